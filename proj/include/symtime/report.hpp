#pragma once

#include "symtime/facts.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace symtime {

enum class ConsistencyStatus { consistent, inconsistent };

enum class ViolationKind { unsupported_candidate, inverted_interval, subject_mismatch, interval_mismatch, dangling_reference };

const char* to_string(ConsistencyStatus status);
const char* to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind = ViolationKind::unsupported_candidate;
    std::string detail;
    std::vector<std::size_t> fact_indices;
    std::optional<std::size_t> candidate_index;
    /// subject_mismatch: the subject the fact should carry.
    std::optional<std::string> expected_subject;

    friend bool operator==(const Violation&, const Violation&) = default;
};

/// Outcome of checking candidates (and optionally the fact set itself) against
/// the facts. witnesses[i] is the index of the first fact entailing candidates[i].
struct ConsistencyReport {
    ConsistencyStatus status = ConsistencyStatus::consistent;
    std::vector<AnswerCandidate> candidates;
    std::vector<std::optional<std::size_t>> witnesses;
    std::vector<Violation> violations;

    bool consistent() const noexcept { return status == ConsistencyStatus::consistent; }
    std::vector<std::size_t> supported() const;
    std::vector<std::size_t> unsupported() const;
    std::size_t count(ViolationKind kind) const;

    friend bool operator==(const ConsistencyReport&, const ConsistencyReport&) = default;
};

} // namespace symtime
