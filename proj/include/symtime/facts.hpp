#pragma once

#include "symtime/time.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace symtime {

/// Trim and collapse internal whitespace runs to a single space.
std::string collapse_whitespace(std::string_view text);

/// Unicode-aware lowercase of UTF-8 text. Invalid byte sequences pass through unchanged.
std::string utf8_lower(std::string_view text);

/// Canonical entity key: utf8_lower(collapse_whitespace(text)). No alias resolution.
std::string canonical_entity(std::string_view text);

bool same_entity(std::string_view a, std::string_view b);

/// Offset of the first whole-word occurrence of `needle` in `haystack` at or
/// after `from`, or npos. Both arguments are expected in canonical form; ASCII
/// letters, digits and non-ASCII bytes count as word characters.
std::size_t find_mention(std::string_view haystack, std::string_view needle, std::size_t from = 0);

/// Letters, digits and underscore, starting with a letter (ASCII).
bool is_identifier(std::string_view text);

/// relation(subject, object, start, end)
struct TemporalFact {
    std::string relation;
    std::string subject;
    std::string object;
    TimeInterval interval;
    std::optional<std::size_t> provenance;

    /// Trims the entity strings and validates; throws Error(invalid_argument).
    static TemporalFact make(std::string relation, std::string subject, std::string object, TimeInterval interval,
                             std::optional<std::size_t> provenance = std::nullopt);

    /// String and time point invariants. Interval non-emptiness is left to the audit.
    void validate() const;

    friend bool operator==(const TemporalFact&, const TemporalFact&) = default;
};

/// Relation identical, entities canonically equal, intervals identical. Provenance ignored.
bool equivalent(const TemporalFact& a, const TemporalFact& b);

/// Ordered collection of facts; insertion order is preserved and duplicates are kept.
class FactSet {
public:
    using value_type = TemporalFact;
    using const_iterator = std::vector<TemporalFact>::const_iterator;

    FactSet() = default;
    explicit FactSet(std::vector<TemporalFact> facts) : facts_(std::move(facts)) {}

    void push_back(TemporalFact fact) { facts_.push_back(std::move(fact)); }

    std::size_t size() const noexcept { return facts_.size(); }
    bool empty() const noexcept { return facts_.empty(); }
    const TemporalFact& operator[](std::size_t i) const { return facts_[i]; }
    const TemporalFact& at(std::size_t i) const;
    const_iterator begin() const noexcept { return facts_.begin(); }
    const_iterator end() const noexcept { return facts_.end(); }
    const std::vector<TemporalFact>& facts() const noexcept { return facts_; }

    /// Copy with fact i replaced; throws Error(out_of_range).
    FactSet with_replaced(std::size_t i, TemporalFact fact) const;

    friend bool operator==(const FactSet&, const FactSet&) = default;

private:
    std::vector<TemporalFact> facts_;
};

/// Indices of facts equivalent to an earlier fact in the set.
std::vector<std::size_t> duplicate_indices(const FactSet& facts);

/// First occurrence of every equivalence class, in order.
FactSet deduplicated(const FactSet& facts);

enum class QueryKind { overlap, before, after, first, last };

const char* to_string(QueryKind kind);
std::optional<QueryKind> parse_query_kind(std::string_view text);

struct TemporalQuery {
    std::optional<std::string> subject;
    std::optional<std::string> relation;
    std::optional<TimeInterval> interval;
    QueryKind kind = QueryKind::overlap;
    std::optional<std::string> reference_object;

    /// overlap needs an interval, before/after need a reference object.
    void validate() const;

    friend bool operator==(const TemporalQuery&, const TemporalQuery&) = default;
};

struct AnswerCandidate {
    std::string relation;
    std::string subject;
    std::string object;
    std::optional<TimeInterval> interval;

    static AnswerCandidate from_fact(const TemporalFact& fact, bool keep_interval = true);

    void validate() const;

    friend bool operator==(const AnswerCandidate&, const AnswerCandidate&) = default;
};

bool equivalent(const AnswerCandidate& a, const AnswerCandidate& b);

std::string to_string(const AnswerCandidate& candidate);

} // namespace symtime
