#pragma once

#include "symtime/facts.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace symtime {

struct SymbolicAnswer {
    std::string answer;
    std::optional<std::size_t> fact_index;
    std::string explanation;
};

/// Answers a query from the facts alone.
///   overlap: among facts about the subject (and relation) overlapping the
///            query interval, the object with the longest overlap; ties go
///            to the earlier fact.
///   before/after: find_adjacent from the reference object.
///   first/last: earliest start / latest end among facts in scope.
/// An empty answer means no fact qualifies. Throws Error(invalid_argument) on
/// a query that fails TemporalQuery::validate().
SymbolicAnswer answer_symbolically(const FactSet& facts, const TemporalQuery& query);

/// Heuristic query from a natural-language question:
///   subject: the longest fact subject mentioned in the question;
///   relation: the only relation of that subject, or the one whose name
///             tokens best match question words;
///   kind: before/after when "before"/"prior to" or "after"/"following"
///         precedes a mentioned fact object, which becomes the reference;
///         overlap over the span of the dates in the question otherwise;
///         first/last on "first"/"earliest" or "last"/"latest"/"most recent";
///         last when nothing else applies.
TemporalQuery infer_query(std::string_view question, const FactSet& facts);

} // namespace symtime
