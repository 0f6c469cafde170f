#pragma once

#include "symtime/facts.hpp"
#include "symtime/report.hpp"

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace symtime {

/// Exhaustive consistency check of candidates against facts and the query:
///   inverted fact intervals, unentailed candidates, candidate subjects that
///   differ from the query subject, candidate intervals outside the query
///   interval, and before/after references that do not resolve.
///
/// An unentailed candidate is reported as interval_mismatch when some fact
/// matches its relation, subject and object but not its interval, as
/// subject_mismatch when a fact matches all but the subject, and as
/// unsupported_candidate otherwise.
ConsistencyReport audit(const FactSet& facts, std::span<const AnswerCandidate> candidates, const TemporalQuery& query);

enum class RepairKind { swap_bounds, widen_granularity, missing_fact, relabel_subject };

const char* to_string(RepairKind kind);

struct RepairHypothesis {
    RepairKind kind = RepairKind::missing_fact;
    /// Fact edited by swap_bounds, widen_granularity and relabel_subject.
    std::optional<std::size_t> fact_index;
    /// Candidate the hypothesis was derived from, if any.
    std::optional<std::size_t> candidate_index;
    /// widen_granularity: which bound is coarsened to its year.
    std::optional<BoundSide> side;
    /// relabel_subject: the replacement subject.
    std::optional<std::string> new_subject;
    std::string rendered_suggestion;

    friend bool operator==(const RepairHypothesis&, const RepairHypothesis&) = default;
};

/// Hypotheses ordered by edit size: swap_bounds, widen_granularity,
/// relabel_subject, missing_fact; violation order within a kind.
/// Throws Error(precondition) on a consistent report.
std::vector<RepairHypothesis> propose_repairs(const ConsistencyReport& report, const FactSet& facts);

/// Copy of `facts` with the single edit described by `hypothesis`.
/// missing_fact is never applied (Error(precondition)); a bad index is Error(out_of_range).
FactSet apply_repair(const FactSet& facts, const RepairHypothesis& hypothesis);

/// Deterministic text form embedded verbatim in reflection prompts.
std::string render_report(const ConsistencyReport& report);

/// "1. ...\n2. ...\n"
std::string render_repairs(const std::vector<RepairHypothesis>& hypotheses);

nlohmann::json to_json(const TimeInterval& interval);
nlohmann::json to_json(const TemporalFact& fact);
nlohmann::json to_json(const AnswerCandidate& candidate);
nlohmann::json to_json(const ConsistencyReport& report);
nlohmann::json to_json(const RepairHypothesis& hypothesis);

} // namespace symtime
