#include "symtime/time.hpp"

#include "symtime/error.hpp"

#include <chrono>
#include <cstdio>

namespace symtime {

TimePoint TimePoint::of_year(std::int32_t year) {
    TimePoint p{year, std::nullopt, std::nullopt, Boundedness::finite};
    p.validate();
    return p;
}

TimePoint TimePoint::of_month(std::int32_t year, unsigned month) {
    TimePoint p{year, month, std::nullopt, Boundedness::finite};
    p.validate();
    return p;
}

TimePoint TimePoint::of_day(std::int32_t year, unsigned month, unsigned day) {
    TimePoint p{year, month, day, Boundedness::finite};
    p.validate();
    return p;
}

TimePoint TimePoint::negative_infinity() {
    return TimePoint{0, std::nullopt, std::nullopt, Boundedness::negative_infinite};
}

TimePoint TimePoint::positive_infinity() {
    return TimePoint{0, std::nullopt, std::nullopt, Boundedness::positive_infinite};
}

Granularity TimePoint::granularity() const noexcept {
    if (day) return Granularity::day;
    if (month) return Granularity::month;
    return Granularity::year;
}

void TimePoint::validate() const {
    if (!is_finite()) {
        if (year != 0 || month || day)
            throw Error(Errc::invalid_argument, "infinite time point carries calendar fields");
        return;
    }
    if (year < kMinYear || year > kMaxYear)
        throw Error(Errc::invalid_argument, "year out of range: " + std::to_string(year));
    if (day && !month) throw Error(Errc::invalid_argument, "day given without month");
    if (month && (*month < 1 || *month > 12))
        throw Error(Errc::invalid_argument, "month out of range: " + std::to_string(*month));
    if (day && (*day < 1 || *day > last_day_of_month(year, *month)))
        throw Error(Errc::invalid_argument, "day out of range: " + std::to_string(*day));
}

unsigned last_day_of_month(std::int32_t year, unsigned month) {
    using namespace std::chrono;
    const year_month_day_last last{std::chrono::year{year} / std::chrono::month{month} / std::chrono::last};
    return static_cast<unsigned>(last.day());
}

namespace {

int rank(Boundedness b) {
    switch (b) {
    case Boundedness::negative_infinite: return 0;
    case Boundedness::finite: return 1;
    case Boundedness::positive_infinite: return 2;
    }
    return 1;
}

// Missing sorts before present.
std::strong_ordering compare_component(const std::optional<unsigned>& a, const std::optional<unsigned>& b) {
    if (!a && !b) return std::strong_ordering::equal;
    if (!a) return std::strong_ordering::less;
    if (!b) return std::strong_ordering::greater;
    return *a <=> *b;
}

} // namespace

std::strong_ordering compare_timepoints(const TimePoint& a, const TimePoint& b) {
    if (auto c = rank(a.boundedness) <=> rank(b.boundedness); c != 0) return c;
    if (!a.is_finite()) return std::strong_ordering::equal;
    if (auto c = a.year <=> b.year; c != 0) return c;
    if (auto c = compare_component(a.month, b.month); c != 0) return c;
    return compare_component(a.day, b.day);
}

TimePoint widen(const TimePoint& p, BoundSide side) {
    if (!p.is_finite()) throw Error(Errc::invalid_argument, "cannot widen an infinite time point");
    TimePoint out = p;
    if (side == BoundSide::start) {
        if (!out.month) out.month = 1u;
        if (!out.day) out.day = 1u;
    } else {
        if (!out.month) out.month = 12u;
        if (!out.day) out.day = last_day_of_month(out.year, *out.month);
    }
    return out;
}

std::int64_t widened_day(const TimePoint& p, BoundSide side) {
    if (p.boundedness == Boundedness::negative_infinite) return kNegativeInfinityDay;
    if (p.boundedness == Boundedness::positive_infinite) return kPositiveInfinityDay;
    const TimePoint full = widen(p, side);
    const std::chrono::year_month_day ymd{std::chrono::year{full.year}, std::chrono::month{*full.month},
                                          std::chrono::day{*full.day}};
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::string to_string(const TimePoint& p) {
    if (p.boundedness == Boundedness::negative_infinite) return "-inf";
    if (p.boundedness == Boundedness::positive_infinite) return "+inf";
    char buf[32];
    const char* sign = p.year < 0 ? "-" : "";
    const long y = p.year < 0 ? -static_cast<long>(p.year) : static_cast<long>(p.year);
    if (p.day)
        std::snprintf(buf, sizeof buf, "%s%04ld-%02u-%02u", sign, y, *p.month, *p.day);
    else if (p.month)
        std::snprintf(buf, sizeof buf, "%s%04ld-%02u", sign, y, *p.month);
    else
        std::snprintf(buf, sizeof buf, "%s%04ld", sign, y);
    return buf;
}

TimeInterval TimeInterval::universal() {
    return TimeInterval{TimePoint::negative_infinity(), TimePoint::positive_infinity()};
}

bool TimeInterval::is_valid() const {
    if (start.boundedness == Boundedness::positive_infinite) return false;
    if (end.boundedness == Boundedness::negative_infinite) return false;
    return widened_day(start, BoundSide::start) <= widened_day(end, BoundSide::end);
}

std::string to_string(const TimeInterval& interval) {
    return "[" + to_string(interval.start) + ", " + to_string(interval.end) + "]";
}

} // namespace symtime
