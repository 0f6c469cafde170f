#include "symtime/facts.hpp"

#include "symtime/error.hpp"

#include <locale.h>
#include <wctype.h>

namespace symtime {

namespace {

bool is_ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Length of the whitespace sequence starting at text[i], 0 if none. Covers ASCII and U+00A0.
std::size_t space_length(std::string_view text, std::size_t i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_ascii_space(c)) return 1;
    if (c == 0xC2 && i + 1 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0xA0) return 2;
    return 0;
}

locale_t utf8_ctype_locale() {
    static const locale_t loc = [] {
        locale_t l = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(nullptr));
        if (!l) l = newlocale(LC_CTYPE_MASK, "en_US.UTF-8", static_cast<locale_t>(nullptr));
        return l;
    }();
    return loc;
}

// Decodes one code point at text[i]; returns the number of bytes consumed, 0 on a malformed sequence.
std::size_t decode_utf8(std::string_view text, std::size_t i, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return 0;
    }
    if (i + len > text.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(text[i + k]);
        if ((b & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (b & 0x3F);
    }
    return len;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

std::string trim_copy(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_ascii_space(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_ascii_space(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

} // namespace

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < text.size();) {
        if (const auto n = space_length(text, i); n > 0) {
            pending_space = !out.empty();
            i += n;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

std::string utf8_lower(std::string_view text) {
    const locale_t loc = utf8_ctype_locale();
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        char32_t cp = 0;
        const std::size_t n = decode_utf8(text, i, cp);
        if (n == 0) {
            out.push_back(text[i]);
            ++i;
            continue;
        }
        if (cp < 0x80) {
            const char c = static_cast<char>(cp);
            out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
        } else if (loc) {
            encode_utf8(static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc)), out);
        } else {
            out.append(text.substr(i, n));
        }
        i += n;
    }
    return out;
}

std::string canonical_entity(std::string_view text) { return utf8_lower(collapse_whitespace(text)); }

bool same_entity(std::string_view a, std::string_view b) { return canonical_entity(a) == canonical_entity(b); }

std::size_t find_mention(std::string_view haystack, std::string_view needle, std::size_t from) {
    if (needle.empty()) return std::string_view::npos;
    const auto word = [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return u >= 0x80 || (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z');
    };
    for (std::size_t pos = haystack.find(needle, from); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + 1)) {
        const bool left = pos == 0 || !word(haystack[pos - 1]) || !word(needle.front());
        const std::size_t end = pos + needle.size();
        const bool right = end == haystack.size() || !word(haystack[end]) || !word(needle.back());
        if (left && right) return pos;
    }
    return std::string_view::npos;
}

bool is_identifier(std::string_view text) {
    if (text.empty() || !is_ascii_letter(text.front())) return false;
    for (char c : text)
        if (!is_ascii_letter(c) && !is_ascii_digit(c) && c != '_') return false;
    return true;
}

TemporalFact TemporalFact::make(std::string relation, std::string subject, std::string object, TimeInterval interval,
                                std::optional<std::size_t> provenance) {
    TemporalFact fact{trim_copy(relation), trim_copy(subject), trim_copy(object), interval, provenance};
    fact.validate();
    return fact;
}

void TemporalFact::validate() const {
    if (!is_identifier(relation)) throw Error(Errc::invalid_argument, "invalid relation identifier: '" + relation + "'");
    if (subject.empty() || trim_copy(subject) != subject)
        throw Error(Errc::invalid_argument, "subject must be trimmed and non-empty");
    if (object.empty() || trim_copy(object) != object)
        throw Error(Errc::invalid_argument, "object must be trimmed and non-empty");
    interval.start.validate();
    interval.end.validate();
}

bool equivalent(const TemporalFact& a, const TemporalFact& b) {
    return a.relation == b.relation && same_entity(a.subject, b.subject) && same_entity(a.object, b.object) &&
           a.interval == b.interval;
}

const TemporalFact& FactSet::at(std::size_t i) const {
    if (i >= facts_.size())
        throw Error(Errc::out_of_range, "fact index " + std::to_string(i) + " out of range (size " +
                                            std::to_string(facts_.size()) + ")");
    return facts_[i];
}

FactSet FactSet::with_replaced(std::size_t i, TemporalFact fact) const {
    (void)at(i);
    FactSet out = *this;
    out.facts_[i] = std::move(fact);
    return out;
}

std::vector<std::size_t> duplicate_indices(const FactSet& facts) {
    std::vector<std::size_t> dups;
    for (std::size_t i = 0; i < facts.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (equivalent(facts[i], facts[j])) {
                dups.push_back(i);
                break;
            }
        }
    }
    return dups;
}

FactSet deduplicated(const FactSet& facts) {
    const auto dups = duplicate_indices(facts);
    FactSet out;
    std::size_t d = 0;
    for (std::size_t i = 0; i < facts.size(); ++i) {
        if (d < dups.size() && dups[d] == i) {
            ++d;
            continue;
        }
        out.push_back(facts[i]);
    }
    return out;
}

const char* to_string(QueryKind kind) {
    switch (kind) {
    case QueryKind::overlap: return "overlap";
    case QueryKind::before: return "before";
    case QueryKind::after: return "after";
    case QueryKind::first: return "first";
    case QueryKind::last: return "last";
    }
    return "overlap";
}

std::optional<QueryKind> parse_query_kind(std::string_view text) {
    const std::string key = utf8_lower(trim_copy(text));
    for (auto k : {QueryKind::overlap, QueryKind::before, QueryKind::after, QueryKind::first, QueryKind::last})
        if (key == to_string(k)) return k;
    return std::nullopt;
}

void TemporalQuery::validate() const {
    if (kind == QueryKind::overlap && !interval)
        throw Error(Errc::invalid_argument, "overlap query requires an interval");
    if ((kind == QueryKind::before || kind == QueryKind::after) && (!reference_object || reference_object->empty()))
        throw Error(Errc::invalid_argument, std::string(to_string(kind)) + " query requires a reference object");
    if (relation && !is_identifier(*relation))
        throw Error(Errc::invalid_argument, "invalid relation identifier: '" + *relation + "'");
    if (subject && collapse_whitespace(*subject).empty())
        throw Error(Errc::invalid_argument, "query subject must be non-empty");
}

AnswerCandidate AnswerCandidate::from_fact(const TemporalFact& fact, bool keep_interval) {
    AnswerCandidate c{fact.relation, fact.subject, fact.object, std::nullopt};
    if (keep_interval) c.interval = fact.interval;
    return c;
}

void AnswerCandidate::validate() const {
    if (!is_identifier(relation)) throw Error(Errc::invalid_argument, "invalid relation identifier: '" + relation + "'");
    if (subject.empty() || trim_copy(subject) != subject)
        throw Error(Errc::invalid_argument, "candidate subject must be trimmed and non-empty");
    if (object.empty() || trim_copy(object) != object)
        throw Error(Errc::invalid_argument, "candidate object must be trimmed and non-empty");
}

bool equivalent(const AnswerCandidate& a, const AnswerCandidate& b) {
    return a.relation == b.relation && same_entity(a.subject, b.subject) && same_entity(a.object, b.object) &&
           a.interval == b.interval;
}

std::string to_string(const AnswerCandidate& candidate) {
    std::string out = candidate.relation + "(" + candidate.subject + ", " + candidate.object + ")";
    if (candidate.interval) out += " @ " + to_string(*candidate.interval);
    return out;
}

} // namespace symtime
