#include "symtime/symbolic_qa.hpp"

#include "symtime/error.hpp"
#include "symtime/temporal.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <regex>
#include <set>

namespace symtime {

namespace {

constexpr auto npos = std::string_view::npos;

// Days shared by two intervals after widening; saturates on unbounded overlap.
std::int64_t overlap_days(const TimeInterval& a, const TimeInterval& b) {
    const std::int64_t lo = std::max(widened_day(a.start, BoundSide::start), widened_day(b.start, BoundSide::start));
    const std::int64_t hi = std::min(widened_day(a.end, BoundSide::end), widened_day(b.end, BoundSide::end));
    if (lo > hi) return 0;
    if (lo == kNegativeInfinityDay || hi == kPositiveInfinityDay) return std::numeric_limits<std::int64_t>::max();
    return hi - lo + 1;
}

FactSet in_scope(const FactSet& facts, const TemporalQuery& q) {
    FactSet scoped = facts;
    if (q.relation) scoped = filter_relation(scoped, *q.relation);
    if (q.subject) scoped = filter_subject(scoped, *q.subject);
    return scoped;
}

std::optional<std::size_t> index_of(const FactSet& facts, const TemporalFact& f) {
    for (std::size_t i = 0; i < facts.size(); ++i)
        if (facts[i] == f) return i;
    return std::nullopt;
}

SymbolicAnswer from_fact(const FactSet& facts, const TemporalFact& f, std::string why) {
    return SymbolicAnswer{f.object, index_of(facts, f), std::move(why)};
}

struct Mention {
    std::size_t pos;
    std::string entity;
};

// Longest-first mentions of the given entities in the canonical text.
std::vector<Mention> mentions(const std::string& canon_text, const std::set<std::string>& entities) {
    std::vector<Mention> out;
    for (const auto& e : entities) {
        const std::string key = canonical_entity(e);
        for (std::size_t p = find_mention(canon_text, key); p != npos; p = find_mention(canon_text, key, p + 1))
            out.push_back({p, e});
    }
    std::sort(out.begin(), out.end(), [](const Mention& a, const Mention& b) {
        if (a.pos != b.pos) return a.pos < b.pos;
        return a.entity.size() > b.entity.size();
    });
    return out;
}

std::vector<std::string> words(const std::string& canon_text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : canon_text) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

int relation_score(const std::string& relation, const std::vector<std::string>& question_words) {
    int score = 0;
    std::size_t start = 0;
    while (start <= relation.size()) {
        std::size_t end = relation.find('_', start);
        if (end == std::string::npos) end = relation.size();
        std::string token = utf8_lower(relation.substr(start, end - start));
        if (token.size() >= 3) {
            const std::string stem = token.substr(0, std::min<std::size_t>(token.size(), 4));
            for (const auto& w : question_words)
                if (w.starts_with(stem)) {
                    ++score;
                    break;
                }
        }
        start = end + 1;
    }
    return score;
}

struct DateMention {
    std::size_t pos;
    TimePoint point;
};

std::vector<DateMention> dates_in(const std::string& canon_text) {
    static const std::regex pattern(
        R"((?:\b(\d{1,2})\s+)?\b(jan|feb|mar|apr|may|jun|jul|aug|sep|oct|nov|dec)[a-z]*\.?,?\s+(?:(\d{1,2})(?:st|nd|rd|th)?,?\s+)?(\d{4})\b|\b(\d{4})(?:-(\d{1,2}))?(?:-(\d{1,2}))?\b)");
    static const std::map<std::string, unsigned> months = {{"jan", 1}, {"feb", 2}, {"mar", 3}, {"apr", 4},
                                                           {"may", 5}, {"jun", 6}, {"jul", 7}, {"aug", 8},
                                                           {"sep", 9}, {"oct", 10}, {"nov", 11}, {"dec", 12}};
    std::vector<DateMention> out;
    for (auto it = std::sregex_iterator(canon_text.begin(), canon_text.end(), pattern); it != std::sregex_iterator();
         ++it) {
        const auto& m = *it;
        try {
            if (m[4].matched) {
                const int year = std::stoi(m[4].str());
                const unsigned month = months.at(m[2].str());
                const auto day_group = m[1].matched ? 1 : (m[3].matched ? 3 : 0);
                out.push_back({static_cast<std::size_t>(m.position(0)),
                               day_group ? TimePoint::of_day(year, month, std::stoul(m[day_group].str()))
                                         : TimePoint::of_month(year, month)});
            } else {
                const int year = std::stoi(m[5].str());
                if (m[7].matched)
                    out.push_back({static_cast<std::size_t>(m.position(0)),
                                   TimePoint::of_day(year, std::stoul(m[6].str()), std::stoul(m[7].str()))});
                else if (m[6].matched)
                    out.push_back({static_cast<std::size_t>(m.position(0)), TimePoint::of_month(year, std::stoul(m[6].str()))});
                else
                    out.push_back({static_cast<std::size_t>(m.position(0)), TimePoint::of_year(year)});
            }
        } catch (const Error&) {
            // Not a real calendar date; ignore the match.
        }
    }
    return out;
}

// Position just past the first whole-word keyword occurrence, or npos.
std::size_t keyword_end(const std::string& canon_text, std::initializer_list<std::string_view> keywords) {
    std::size_t best = npos;
    for (auto k : keywords) {
        const auto p = find_mention(canon_text, k);
        if (p != npos) best = std::min(best, p + k.size());
    }
    return best;
}

} // namespace

SymbolicAnswer answer_symbolically(const FactSet& facts, const TemporalQuery& query) {
    try {
        query.validate();
    } catch (const Error& e) {
        throw Error(Errc::invalid_argument, std::string("invalid query: ") + e.what());
    }

    switch (query.kind) {
    case QueryKind::before:
    case QueryKind::after: {
        const Direction dir = query.kind == QueryKind::before ? Direction::before : Direction::after;
        const auto idx = find_adjacent_index(facts, query.relation.value_or(""), query.subject.value_or(""),
                                             *query.reference_object, dir);
        if (!idx) return {"", std::nullopt, "no fact is adjacent to '" + *query.reference_object + "'"};
        return {facts[*idx].object, idx,
                std::string(dir == Direction::before ? "ends before " : "starts after ") + *query.reference_object};
    }
    case QueryKind::overlap: {
        const FactSet relevant = filter_relevant(in_scope(facts, query), *query.interval);
        const TemporalFact* best = nullptr;
        std::int64_t best_days = -1;
        for (const auto& f : relevant) {
            const std::int64_t d = overlap_days(f.interval, *query.interval);
            if (d > best_days) {
                best = &f;
                best_days = d;
            }
        }
        if (!best) return {"", std::nullopt, "no fact overlaps " + to_string(*query.interval)};
        return from_fact(facts, *best, "longest overlap with " + to_string(*query.interval));
    }
    case QueryKind::first:
    case QueryKind::last: {
        FactSet scoped = in_scope(facts, query);
        if (query.interval) scoped = filter_relevant(scoped, *query.interval);
        const TemporalFact* best = nullptr;
        for (const auto& f : scoped) {
            if (!best) {
                best = &f;
                continue;
            }
            const bool better = query.kind == QueryKind::first
                                    ? compare_timepoints(f.interval.start, best->interval.start) < 0
                                    : compare_timepoints(f.interval.end, best->interval.end) > 0;
            if (better) best = &f;
        }
        if (!best) return {"", std::nullopt, "no fact in scope"};
        return from_fact(facts, *best, query.kind == QueryKind::first ? "earliest start" : "latest end");
    }
    }
    return {"", std::nullopt, ""};
}

TemporalQuery infer_query(std::string_view question, const FactSet& facts) {
    const std::string text = canonical_entity(question);
    TemporalQuery q;
    q.kind = QueryKind::last;

    std::set<std::string> subjects;
    for (const auto& f : facts) subjects.insert(f.subject);
    std::string subject;
    for (const auto& m : mentions(text, subjects))
        if (m.entity.size() > subject.size()) subject = m.entity;
    if (!subject.empty()) q.subject = subject;

    const FactSet scoped = subject.empty() ? facts : filter_subject(facts, subject);
    std::set<std::string> relations;
    for (const auto& f : scoped) relations.insert(f.relation);
    if (relations.size() == 1) {
        q.relation = *relations.begin();
    } else if (relations.size() > 1) {
        const auto qwords = words(text);
        int best = 0;
        int ties = 0;
        for (const auto& r : relations) {
            const int s = relation_score(r, qwords);
            if (s > best) {
                best = s;
                ties = 1;
                q.relation = r;
            } else if (s == best && s > 0) {
                ++ties;
            }
        }
        if (ties != 1) q.relation.reset();
    }

    const FactSet in_relation = q.relation ? filter_relation(scoped, *q.relation) : scoped;
    std::set<std::string> objects;
    for (const auto& f : in_relation) objects.insert(f.object);
    const auto object_mentions = mentions(text, objects);
    const auto dates = dates_in(text);

    const std::size_t before_end = keyword_end(text, {"before", "prior to", "preceding"});
    const std::size_t after_end = keyword_end(text, {"after", "following", "succeeding"});
    for (auto [end, kind] : {std::pair{before_end, QueryKind::before}, std::pair{after_end, QueryKind::after}}) {
        if (end == npos) continue;
        for (const auto& m : object_mentions) {
            if (m.pos < end) continue;
            if (!dates.empty() && dates.front().pos >= end && dates.front().pos < m.pos) break;
            q.kind = kind;
            q.reference_object = m.entity;
            return q;
        }
    }

    if (!dates.empty()) {
        TimePoint lo = dates.front().point;
        TimePoint hi = dates.front().point;
        for (const auto& d : dates) {
            if (compare_timepoints(widen(d.point, BoundSide::start), widen(lo, BoundSide::start)) < 0) lo = d.point;
            if (compare_timepoints(widen(d.point, BoundSide::end), widen(hi, BoundSide::end)) > 0) hi = d.point;
        }
        const std::size_t first_date = dates.front().pos;
        if (before_end != npos && before_end <= first_date && first_date - before_end <= 1) {
            q.kind = QueryKind::last;
            q.interval = TimeInterval{TimePoint::negative_infinity(), lo};
        } else if (after_end != npos && after_end <= first_date && first_date - after_end <= 1) {
            q.kind = QueryKind::first;
            q.interval = TimeInterval{hi, TimePoint::positive_infinity()};
        } else {
            q.kind = QueryKind::overlap;
            q.interval = TimeInterval{lo, hi};
        }
        return q;
    }

    if (keyword_end(text, {"first", "earliest"}) != npos) q.kind = QueryKind::first;
    return q;
}

} // namespace symtime
