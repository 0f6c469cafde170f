#include "symtime/temporal.hpp"

#include "symtime/error.hpp"

#include <algorithm>

namespace symtime {

const char* to_string(ConsistencyStatus status) {
    return status == ConsistencyStatus::consistent ? "consistent" : "inconsistent";
}

const char* to_string(ViolationKind kind) {
    switch (kind) {
    case ViolationKind::unsupported_candidate: return "unsupported_candidate";
    case ViolationKind::inverted_interval: return "inverted_interval";
    case ViolationKind::subject_mismatch: return "subject_mismatch";
    case ViolationKind::interval_mismatch: return "interval_mismatch";
    case ViolationKind::dangling_reference: return "dangling_reference";
    }
    return "unsupported_candidate";
}

std::vector<std::size_t> ConsistencyReport::supported() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < witnesses.size(); ++i)
        if (witnesses[i]) out.push_back(i);
    return out;
}

std::vector<std::size_t> ConsistencyReport::unsupported() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < witnesses.size(); ++i)
        if (!witnesses[i]) out.push_back(i);
    return out;
}

std::size_t ConsistencyReport::count(ViolationKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; }));
}

bool intervals_overlap(const TimeInterval& a, const TimeInterval& b) {
    return widened_day(a.start, BoundSide::start) <= widened_day(b.end, BoundSide::end) &&
           widened_day(b.start, BoundSide::start) <= widened_day(a.end, BoundSide::end);
}

FactSet filter_relevant(const FactSet& facts, const TimeInterval& query_interval) {
    FactSet out;
    for (const auto& f : facts)
        if (intervals_overlap(f.interval, query_interval)) out.push_back(f);
    return out;
}

FactSet filter_subject(const FactSet& facts, std::string_view subject) {
    const std::string key = canonical_entity(subject);
    FactSet out;
    for (const auto& f : facts)
        if (canonical_entity(f.subject) == key) out.push_back(f);
    return out;
}

FactSet filter_relation(const FactSet& facts, std::string_view relation) {
    FactSet out;
    for (const auto& f : facts)
        if (f.relation == relation) out.push_back(f);
    return out;
}

namespace {

bool matches_scope(const TemporalFact& f, std::string_view relation, const std::string& subject_key) {
    if (!relation.empty() && f.relation != relation) return false;
    return subject_key.empty() || canonical_entity(f.subject) == subject_key;
}

} // namespace

std::size_t find_reference(const FactSet& facts, std::string_view relation, std::string_view subject,
                           std::string_view reference_object) {
    const std::string subject_key = canonical_entity(subject);
    const std::string ref_key = canonical_entity(reference_object);
    for (std::size_t i = 0; i < facts.size(); ++i)
        if (matches_scope(facts[i], relation, subject_key) && canonical_entity(facts[i].object) == ref_key) return i;
    throw Error(Errc::reference_not_found, "reference object not found: '" + std::string(reference_object) + "'");
}

std::optional<std::size_t> find_adjacent_index(const FactSet& facts, std::string_view relation,
                                               std::string_view subject, std::string_view reference_object,
                                               Direction direction) {
    const std::size_t ref_index = find_reference(facts, relation, subject, reference_object);
    const TemporalFact& ref = facts[ref_index];
    // Resolve the scope from the reference so callers may leave relation/subject empty.
    const std::string scope_relation = ref.relation;
    const std::string subject_key = canonical_entity(ref.subject);
    const std::string ref_key = canonical_entity(ref.object);

    std::optional<std::size_t> best;
    // Returns true when fact i ranks ahead of the current best.
    auto better = [&](std::size_t i, std::size_t b) {
        const TemporalFact& x = facts[i];
        const TemporalFact& y = facts[b];
        if (direction == Direction::before) {
            if (auto c = compare_timepoints(x.interval.end, y.interval.end); c != 0) return c > 0;
            if (auto c = compare_timepoints(x.interval.start, y.interval.start); c != 0) return c > 0;
        } else {
            if (auto c = compare_timepoints(x.interval.start, y.interval.start); c != 0) return c < 0;
            if (auto c = compare_timepoints(x.interval.end, y.interval.end); c != 0) return c < 0;
        }
        return canonical_entity(x.object) < canonical_entity(y.object);
    };

    for (std::size_t i = 0; i < facts.size(); ++i) {
        const TemporalFact& f = facts[i];
        if (f.relation != scope_relation || canonical_entity(f.subject) != subject_key) continue;
        if (canonical_entity(f.object) == ref_key) continue;
        const bool qualifies = direction == Direction::before
                                   ? compare_timepoints(f.interval.end, ref.interval.start) <= 0
                                   : compare_timepoints(f.interval.start, ref.interval.end) >= 0;
        if (!qualifies) continue;
        if (!best || better(i, *best)) best = i;
    }
    return best;
}

std::optional<TemporalFact> find_adjacent(const FactSet& facts, std::string_view relation, std::string_view subject,
                                          std::string_view reference_object, Direction direction) {
    if (auto i = find_adjacent_index(facts, relation, subject, reference_object, direction)) return facts[*i];
    return std::nullopt;
}

bool entails(const TemporalFact& fact, const AnswerCandidate& candidate) {
    if (fact.relation != candidate.relation) return false;
    if (!same_entity(fact.subject, candidate.subject)) return false;
    if (!same_entity(fact.object, candidate.object)) return false;
    return !candidate.interval || intervals_overlap(*candidate.interval, fact.interval);
}

ConsistencyReport verify_answer(const FactSet& facts, std::span<const AnswerCandidate> candidates) {
    ConsistencyReport report;
    report.candidates.assign(candidates.begin(), candidates.end());
    report.witnesses.resize(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        for (std::size_t f = 0; f < facts.size(); ++f) {
            if (entails(facts[f], candidates[c])) {
                report.witnesses[c] = f;
                break;
            }
        }
        if (!report.witnesses[c]) {
            report.violations.push_back(Violation{ViolationKind::unsupported_candidate,
                                                  "no fact entails " + to_string(candidates[c]),
                                                  {},
                                                  c,
                                                  std::nullopt});
        }
    }
    report.status = report.violations.empty() ? ConsistencyStatus::consistent : ConsistencyStatus::inconsistent;
    return report;
}

} // namespace symtime
