#pragma once

#include "symtime/facts.hpp"
#include "symtime/report.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace symtime {

/// Closed-interval overlap on granularity-widened bounds:
/// start(a) <= end(b) and start(b) <= end(a).
bool intervals_overlap(const TimeInterval& a, const TimeInterval& b);

/// Facts whose interval overlaps the query interval, in original order.
FactSet filter_relevant(const FactSet& facts, const TimeInterval& query_interval);

/// Facts whose subject canonically equals `subject`, in original order.
FactSet filter_subject(const FactSet& facts, std::string_view subject);

FactSet filter_relation(const FactSet& facts, std::string_view relation);

enum class Direction { before, after };

/// Index of the first fact with the given relation/subject whose object is
/// `reference_object`. Empty relation or subject match anything.
/// Throws Error(reference_not_found).
std::size_t find_reference(const FactSet& facts, std::string_view relation, std::string_view subject,
                           std::string_view reference_object);

/// Nearest fact (same relation and subject, different object) ending no later
/// than the reference starts (before), or starting no earlier than it ends
/// (after). Endpoints are compared raw, so "1949-01" meets "1949-01".
///
/// Ties: before prefers the latest start, after the earliest end, then the
/// lexicographically smallest canonical object.
std::optional<std::size_t> find_adjacent_index(const FactSet& facts, std::string_view relation,
                                               std::string_view subject, std::string_view reference_object,
                                               Direction direction);

std::optional<TemporalFact> find_adjacent(const FactSet& facts, std::string_view relation, std::string_view subject,
                                          std::string_view reference_object, Direction direction);

/// Relation identical, subject and object canonically equal, and the candidate
/// interval (if any) overlaps the fact interval.
bool entails(const TemporalFact& fact, const AnswerCandidate& candidate);

/// Entailment scan over every candidate; unsupported candidates become
/// unsupported_candidate violations.
ConsistencyReport verify_answer(const FactSet& facts, std::span<const AnswerCandidate> candidates);

} // namespace symtime
