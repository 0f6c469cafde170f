#include "symtime/audit.hpp"

#include "symtime/error.hpp"
#include "symtime/symbolic_text.hpp"
#include "symtime/temporal.hpp"

#include <algorithm>
#include <sstream>

namespace symtime {

namespace {

std::string describe_fact(const FactSet& facts, std::size_t i) {
    return "fact " + std::to_string(i) + " " + serialize_fact(facts[i]);
}

bool same_triple_except_interval(const TemporalFact& f, const AnswerCandidate& c) {
    return f.relation == c.relation && same_entity(f.subject, c.subject) && same_entity(f.object, c.object);
}

int rank(RepairKind kind) {
    switch (kind) {
    case RepairKind::swap_bounds: return 0;
    case RepairKind::widen_granularity: return 1;
    case RepairKind::relabel_subject: return 2;
    case RepairKind::missing_fact: return 3;
    }
    return 3;
}

// Side of `fact` whose coarsening to its year makes it overlap `target`, if the
// clash is a same-year granularity difference.
std::optional<BoundSide> granularity_clash(const TemporalFact& fact, const TimeInterval& target) {
    const auto try_side = [&](BoundSide side) -> std::optional<BoundSide> {
        const TimePoint& bound = side == BoundSide::start ? fact.interval.start : fact.interval.end;
        const TimePoint& other = side == BoundSide::start ? target.end : target.start;
        if (!bound.is_finite() || !other.is_finite() || bound.granularity() == Granularity::year) return std::nullopt;
        if (bound.year != other.year) return std::nullopt;
        TimeInterval widened = fact.interval;
        (side == BoundSide::start ? widened.start : widened.end) = TimePoint::of_year(bound.year);
        if (!intervals_overlap(widened, target)) return std::nullopt;
        return side;
    };
    if (widened_day(target.end, BoundSide::end) < widened_day(fact.interval.start, BoundSide::start))
        return try_side(BoundSide::start);
    return try_side(BoundSide::end);
}

TemporalFact swapped(const TemporalFact& f) {
    TemporalFact out = f;
    std::swap(out.interval.start, out.interval.end);
    return out;
}

} // namespace

const char* to_string(RepairKind kind) {
    switch (kind) {
    case RepairKind::swap_bounds: return "swap_bounds";
    case RepairKind::widen_granularity: return "widen_granularity";
    case RepairKind::missing_fact: return "missing_fact";
    case RepairKind::relabel_subject: return "relabel_subject";
    }
    return "missing_fact";
}

ConsistencyReport audit(const FactSet& facts, std::span<const AnswerCandidate> candidates, const TemporalQuery& query) {
    ConsistencyReport report;
    report.candidates.assign(candidates.begin(), candidates.end());
    report.witnesses.resize(candidates.size());
    auto& out = report.violations;

    for (std::size_t i = 0; i < facts.size(); ++i) {
        if (!facts[i].interval.is_valid())
            out.push_back({ViolationKind::inverted_interval, describe_fact(facts, i) + " starts after it ends", {i},
                           std::nullopt, std::nullopt});
    }

    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const AnswerCandidate& cand = candidates[c];
        for (std::size_t i = 0; i < facts.size() && !report.witnesses[c]; ++i)
            if (entails(facts[i], cand)) report.witnesses[c] = i;

        if (!report.witnesses[c]) {
            std::vector<std::size_t> interval_near;
            std::vector<std::size_t> subject_near;
            for (std::size_t i = 0; i < facts.size(); ++i) {
                if (same_triple_except_interval(facts[i], cand))
                    interval_near.push_back(i);
                else if (facts[i].relation == cand.relation && same_entity(facts[i].object, cand.object))
                    subject_near.push_back(i);
            }
            if (!interval_near.empty()) {
                out.push_back({ViolationKind::interval_mismatch,
                               to_string(cand) + " does not overlap " + describe_fact(facts, interval_near.front()),
                               interval_near, c, std::nullopt});
            } else if (!subject_near.empty()) {
                out.push_back({ViolationKind::subject_mismatch,
                               to_string(cand) + " matches " + describe_fact(facts, subject_near.front()) +
                                   " except for its subject",
                               subject_near, c, cand.subject});
            } else {
                out.push_back({ViolationKind::unsupported_candidate, "no fact entails " + to_string(cand), {}, c,
                               std::nullopt});
            }
        } else if (query.subject && !same_entity(cand.subject, *query.subject)) {
            out.push_back({ViolationKind::subject_mismatch,
                           to_string(cand) + " is about '" + cand.subject + "', the question asks about '" +
                               *query.subject + "'",
                           {*report.witnesses[c]}, c, *query.subject});
        }

        if (cand.interval && query.interval && !intervals_overlap(*cand.interval, *query.interval)) {
            out.push_back({ViolationKind::interval_mismatch,
                           to_string(cand) + " lies outside the question interval " + to_string(*query.interval),
                           {}, c, std::nullopt});
        }
    }

    if ((query.kind == QueryKind::before || query.kind == QueryKind::after) && query.reference_object) {
        try {
            find_reference(facts, query.relation.value_or(""), query.subject.value_or(""), *query.reference_object);
        } catch (const Error& e) {
            if (e.code() != Errc::reference_not_found) throw;
            out.push_back({ViolationKind::dangling_reference,
                           "reference '" + *query.reference_object + "' does not occur as an object in the facts",
                           {}, std::nullopt, std::nullopt});
        }
    }

    report.status = out.empty() ? ConsistencyStatus::consistent : ConsistencyStatus::inconsistent;
    return report;
}

std::vector<RepairHypothesis> propose_repairs(const ConsistencyReport& report, const FactSet& facts) {
    if (report.consistent()) throw Error(Errc::precondition, "propose_repairs called on a consistent report");

    std::vector<RepairHypothesis> out;
    for (const Violation& v : report.violations) {
        const AnswerCandidate* cand =
            v.candidate_index && *v.candidate_index < report.candidates.size() ? &report.candidates[*v.candidate_index]
                                                                               : nullptr;
        switch (v.kind) {
        case ViolationKind::inverted_interval: {
            for (std::size_t i : v.fact_indices) {
                if (i >= facts.size()) continue;
                out.push_back({RepairKind::swap_bounds, i, std::nullopt, std::nullopt, std::nullopt,
                               "The dates of " + describe_fact(facts, i) +
                                   " may have been misread; swap its bounds to " +
                                   to_string(swapped(facts[i]).interval) + "."});
            }
            break;
        }
        case ViolationKind::interval_mismatch: {
            bool proposed = false;
            if (cand && cand->interval) {
                for (std::size_t i : v.fact_indices) {
                    if (i >= facts.size()) continue;
                    if (auto side = granularity_clash(facts[i], *cand->interval)) {
                        const TimePoint& bound = *side == BoundSide::start ? facts[i].interval.start
                                                                           : facts[i].interval.end;
                        out.push_back({RepairKind::widen_granularity, i, v.candidate_index, side, std::nullopt,
                                       "The " + std::string(*side == BoundSide::start ? "start" : "end") + " of " +
                                           describe_fact(facts, i) + " may be stated too precisely; read " +
                                           to_string(bound) + " as the whole year " + std::to_string(bound.year) +
                                           "."});
                        proposed = true;
                        break;
                    }
                }
            }
            if (!proposed) {
                out.push_back({RepairKind::missing_fact, std::nullopt, v.candidate_index, std::nullopt, std::nullopt,
                               "A date may have been misinterpreted or a fact omitted: " + v.detail +
                                   ". Re-check the dates in the context."});
            }
            break;
        }
        case ViolationKind::subject_mismatch: {
            if (!v.fact_indices.empty() && v.expected_subject && v.fact_indices.front() < facts.size()) {
                const std::size_t i = v.fact_indices.front();
                out.push_back({RepairKind::relabel_subject, i, v.candidate_index, std::nullopt, v.expected_subject,
                               "The subject of " + describe_fact(facts, i) + " may refer to '" + *v.expected_subject +
                                   "'; relabel it if the context supports this."});
            } else {
                out.push_back({RepairKind::missing_fact, std::nullopt, v.candidate_index, std::nullopt, std::nullopt,
                               "A fact about the questioned subject may have been omitted: " + v.detail + "."});
            }
            break;
        }
        case ViolationKind::unsupported_candidate: {
            const std::string object = cand ? cand->object : std::string("the answer");
            out.push_back({RepairKind::missing_fact, std::nullopt, v.candidate_index, std::nullopt, std::nullopt,
                           "An intermediate event may have been omitted: " + v.detail +
                               ". Look for a fact about " + object + " in the context, or revise the answer."});
            break;
        }
        case ViolationKind::dangling_reference: {
            out.push_back({RepairKind::missing_fact, std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                           "A fact may have been omitted: " + v.detail + ". Extract the fact that mentions it."});
            break;
        }
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const RepairHypothesis& a, const RepairHypothesis& b) { return rank(a.kind) < rank(b.kind); });
    return out;
}

FactSet apply_repair(const FactSet& facts, const RepairHypothesis& hypothesis) {
    if (hypothesis.kind == RepairKind::missing_fact)
        throw Error(Errc::precondition, "missing_fact hypotheses are not applied automatically");
    if (!hypothesis.fact_index) throw Error(Errc::invalid_argument, "repair hypothesis has no target fact");
    const TemporalFact& target = facts.at(*hypothesis.fact_index);

    TemporalFact edited = target;
    switch (hypothesis.kind) {
    case RepairKind::swap_bounds: edited = swapped(target); break;
    case RepairKind::widen_granularity: {
        if (!hypothesis.side) throw Error(Errc::invalid_argument, "widen_granularity needs a side");
        TimePoint& bound = *hypothesis.side == BoundSide::start ? edited.interval.start : edited.interval.end;
        if (!bound.is_finite()) throw Error(Errc::invalid_argument, "cannot widen an unbounded endpoint");
        bound = TimePoint::of_year(bound.year);
        break;
    }
    case RepairKind::relabel_subject: {
        if (!hypothesis.new_subject) throw Error(Errc::invalid_argument, "relabel_subject needs a subject");
        edited.subject = *hypothesis.new_subject;
        break;
    }
    case RepairKind::missing_fact: break;
    }
    edited = TemporalFact::make(edited.relation, edited.subject, edited.object, edited.interval, edited.provenance);
    return facts.with_replaced(*hypothesis.fact_index, std::move(edited));
}

std::string render_report(const ConsistencyReport& report) {
    std::ostringstream out;
    out << "status: " << to_string(report.status) << '\n';
    out << "candidates:";
    if (report.candidates.empty()) out << " none";
    out << '\n';
    for (std::size_t c = 0; c < report.candidates.size(); ++c) {
        out << "  [" << c << "] " << to_string(report.candidates[c]) << ": ";
        if (c < report.witnesses.size() && report.witnesses[c])
            out << "supported by fact " << *report.witnesses[c];
        else
            out << "unsupported";
        out << '\n';
    }
    out << "violations:";
    if (report.violations.empty()) out << " none";
    out << '\n';
    for (std::size_t k = 0; k < report.violations.size(); ++k)
        out << "  " << k + 1 << ". " << to_string(report.violations[k].kind) << ": " << report.violations[k].detail
            << '\n';
    return out.str();
}

std::string render_repairs(const std::vector<RepairHypothesis>& hypotheses) {
    std::string out;
    for (std::size_t k = 0; k < hypotheses.size(); ++k)
        out += std::to_string(k + 1) + ". " + hypotheses[k].rendered_suggestion + "\n";
    return out;
}

nlohmann::json to_json(const TimeInterval& interval) {
    return {{"start", format_timestamp(interval.start, BoundSide::start)},
            {"end", format_timestamp(interval.end, BoundSide::end)}};
}

nlohmann::json to_json(const TemporalFact& fact) {
    nlohmann::json j = {{"relation", fact.relation},
                        {"subject", fact.subject},
                        {"object", fact.object},
                        {"interval", to_json(fact.interval)}};
    j["provenance"] = fact.provenance ? nlohmann::json(*fact.provenance) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const AnswerCandidate& candidate) {
    nlohmann::json j = {{"relation", candidate.relation}, {"subject", candidate.subject}, {"object", candidate.object}};
    j["interval"] = candidate.interval ? to_json(*candidate.interval) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const ConsistencyReport& report) {
    nlohmann::json candidates = nlohmann::json::array();
    for (std::size_t c = 0; c < report.candidates.size(); ++c) {
        nlohmann::json j = to_json(report.candidates[c]);
        j["witness"] = c < report.witnesses.size() && report.witnesses[c] ? nlohmann::json(*report.witnesses[c])
                                                                          : nlohmann::json(nullptr);
        candidates.push_back(std::move(j));
    }
    nlohmann::json violations = nlohmann::json::array();
    for (const Violation& v : report.violations) {
        nlohmann::json j = {{"kind", to_string(v.kind)}, {"detail", v.detail}, {"fact_indices", v.fact_indices}};
        j["candidate_index"] = v.candidate_index ? nlohmann::json(*v.candidate_index) : nlohmann::json(nullptr);
        if (v.expected_subject) j["expected_subject"] = *v.expected_subject;
        violations.push_back(std::move(j));
    }
    return {{"status", to_string(report.status)}, {"candidates", candidates}, {"violations", violations}};
}

nlohmann::json to_json(const RepairHypothesis& h) {
    nlohmann::json j = {{"kind", to_string(h.kind)}, {"suggestion", h.rendered_suggestion}};
    j["fact_index"] = h.fact_index ? nlohmann::json(*h.fact_index) : nlohmann::json(nullptr);
    j["candidate_index"] = h.candidate_index ? nlohmann::json(*h.candidate_index) : nlohmann::json(nullptr);
    if (h.side) j["side"] = *h.side == BoundSide::start ? "start" : "end";
    if (h.new_subject) j["new_subject"] = *h.new_subject;
    return j;
}

} // namespace symtime
