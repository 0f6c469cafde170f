#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

namespace symtime {

enum class Boundedness { finite, negative_infinite, positive_infinite };

enum class BoundSide { start, end };

enum class Granularity { year, month, day };

inline constexpr std::int32_t kMinYear = -32767;
inline constexpr std::int32_t kMaxYear = 32767;

/// Calendar instant at year, month or day granularity, or one of the two
/// unbounded sentinels. Infinite points carry no calendar fields.
struct TimePoint {
    std::int32_t year = 0;
    std::optional<unsigned> month;
    std::optional<unsigned> day;
    Boundedness boundedness = Boundedness::finite;

    static TimePoint of_year(std::int32_t year);
    static TimePoint of_month(std::int32_t year, unsigned month);
    static TimePoint of_day(std::int32_t year, unsigned month, unsigned day);
    static TimePoint negative_infinity();
    static TimePoint positive_infinity();

    bool is_finite() const noexcept { return boundedness == Boundedness::finite; }
    Granularity granularity() const noexcept;

    /// Throws Error(invalid_argument) when the field combination is not a real date.
    void validate() const;

    friend bool operator==(const TimePoint&, const TimePoint&) = default;
};

/// Raw total order: -inf < finite < +inf; finite points compare by
/// (year, month, day) with a missing component ordered before any present one.
std::strong_ordering compare_timepoints(const TimePoint& a, const TimePoint& b);

/// Fills missing month/day with the first (start) or last (end) day they could denote.
/// Throws Error(invalid_argument) on infinite input.
TimePoint widen(const TimePoint& p, BoundSide side);

unsigned last_day_of_month(std::int32_t year, unsigned month);

inline constexpr std::int64_t kNegativeInfinityDay = std::numeric_limits<std::int64_t>::min();
inline constexpr std::int64_t kPositiveInfinityDay = std::numeric_limits<std::int64_t>::max();

/// Days since 1970-01-01 of widen(p, side); infinities map to the sentinels above.
std::int64_t widened_day(const TimePoint& p, BoundSide side);

/// "1946", "1949-01", "1949-01-05", "-inf", "+inf".
std::string to_string(const TimePoint& p);

/// Closed interval. The non-empty invariant is checked by is_valid() rather
/// than enforced, so that inverted intervals produced upstream can be audited.
struct TimeInterval {
    TimePoint start;
    TimePoint end;

    static TimeInterval universal();

    bool is_valid() const;

    friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

std::string to_string(const TimeInterval& interval);

} // namespace symtime
