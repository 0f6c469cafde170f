#pragma once

#include "symtime/facts.hpp"
#include "symtime/time.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testing {

using symtime::FactSet;
using symtime::TemporalFact;
using symtime::TimeInterval;
using symtime::TimePoint;

inline TimeInterval years(int a, int b) { return TimeInterval{TimePoint::of_year(a), TimePoint::of_year(b)}; }

inline TimeInterval months(int ya, unsigned ma, int yb, unsigned mb) {
    return TimeInterval{TimePoint::of_month(ya, ma), TimePoint::of_month(yb, mb)};
}

inline TemporalFact fact(const std::string& rel, const std::string& s, const std::string& o, TimeInterval i) {
    return TemporalFact::make(rel, s, o, i);
}

/// The two employment facts used throughout: Valparaiso 1946-1949, Concordia 1949-1953 (month granularity).
inline FactSet pelikan_facts() {
    FactSet fs;
    fs.push_back(fact("works_for", "Jaroslav Pelikan", "Valparaiso University", months(1946, 1, 1949, 1)));
    fs.push_back(fact("works_for", "Jaroslav Pelikan", "Concordia Seminary", months(1949, 1, 1953, 1)));
    return fs;
}

/// Same facts at year granularity.
inline FactSet pelikan_year_facts() {
    FactSet fs;
    fs.push_back(fact("works_for", "Jaroslav Pelikan", "Valparaiso University", years(1946, 1949)));
    fs.push_back(fact("works_for", "Jaroslav Pelikan", "Concordia Seminary", years(1949, 1953)));
    return fs;
}

inline std::filesystem::path fixtures_dir() {
    if (const char* env = std::getenv("SYMTIME_FIXTURES")) return env;
    return std::filesystem::path(__FILE__).parent_path() / "fixtures";
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("symtime_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Random finite time point in [lo, hi] at mixed granularity.
inline TimePoint random_point(std::mt19937_64& rng, int lo, int hi) {
    std::uniform_int_distribution<int> year(lo, hi);
    std::uniform_int_distribution<int> gran(0, 2);
    std::uniform_int_distribution<unsigned> month(1, 12);
    const int y = year(rng);
    switch (gran(rng)) {
    case 0: return TimePoint::of_year(y);
    case 1: return TimePoint::of_month(y, month(rng));
    default: {
        const unsigned m = month(rng);
        std::uniform_int_distribution<unsigned> day(1, symtime::last_day_of_month(y, m));
        return TimePoint::of_day(y, m, day(rng));
    }
    }
}

/// Random valid interval within [lo, hi] years.
inline TimeInterval random_interval(std::mt19937_64& rng, int lo, int hi) {
    for (;;) {
        TimePoint a = random_point(rng, lo, hi);
        TimePoint b = random_point(rng, lo, hi);
        if (symtime::compare_timepoints(a, b) > 0) std::swap(a, b);
        TimeInterval i{a, b};
        if (i.is_valid()) return i;
    }
}

} // namespace testing
