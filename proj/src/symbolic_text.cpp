#include "symtime/symbolic_text.hpp"

#include <array>
#include <tuple>
#include <charconv>
#include <utility>

namespace symtime {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_char(char c) { return is_letter(c) || is_digit(c) || c == '_'; }

char ascii_lower(char c) { return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c; }

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = ascii_lower(c);
    return out;
}

std::pair<std::size_t, std::size_t> trim_range(std::string_view text, std::size_t b, std::size_t e) {
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    return {b, e};
}

std::string_view trim(std::string_view s) {
    auto [b, e] = trim_range(s, 0, s.size());
    return s.substr(b, e - b);
}

Span span_of(std::size_t b, std::size_t e) { return Span{b, e > b ? e - b : 0}; }

[[noreturn]] void fail(Errc code, const std::string& message, Span span) { throw ParseError(code, message, span); }

// ---------------------------------------------------------------------------
// timestamps

constexpr std::array<std::string_view, 12> kMonthNames = {"january", "february", "march",     "april",
                                                           "may",     "june",     "july",      "august",
                                                           "september", "october", "november", "december"};

std::optional<unsigned> month_from_name(std::string_view token) {
    std::string t = ascii_lower(token);
    if (!t.empty() && t.back() == '.') t.pop_back();
    if (t == "sept") return 9u;
    for (unsigned m = 0; m < kMonthNames.size(); ++m) {
        if (t == kMonthNames[m]) return m + 1;
        if (t.size() == 3 && kMonthNames[m].substr(0, 3) == t) return m + 1;
    }
    return std::nullopt;
}

template <typename Int>
std::optional<Int> parse_digits(std::string_view s, std::size_t min_len, std::size_t max_len) {
    if (s.size() < min_len || s.size() > max_len) return std::nullopt;
    for (char c : s)
        if (!is_digit(c)) return std::nullopt;
    Int value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

TimePoint checked_point(std::int32_t year, std::optional<unsigned> month, std::optional<unsigned> day,
                        std::string_view text) {
    TimePoint p{year, month, day, Boundedness::finite};
    try {
        p.validate();
    } catch (const Error& e) {
        fail(Errc::timestamp_parse, "invalid date '" + std::string(text) + "': " + e.what(), span_of(0, text.size()));
    }
    return p;
}

std::optional<TimePoint> parse_numeric_timestamp(std::string_view t) {
    std::size_t i = 0;
    bool negative = false;
    if (i < t.size() && (t[i] == '-' || t[i] == '+')) {
        negative = t[i] == '-';
        ++i;
    }
    std::size_t j = i;
    while (j < t.size() && is_digit(t[j])) ++j;
    auto year = parse_digits<std::int32_t>(t.substr(i, j - i), 1, 6);
    if (!year) return std::nullopt;
    std::optional<unsigned> month;
    std::optional<unsigned> day;
    if (j < t.size()) {
        if (t[j] != '-') return std::nullopt;
        std::size_t k = ++j;
        while (j < t.size() && is_digit(t[j])) ++j;
        month = parse_digits<unsigned>(t.substr(k, j - k), 1, 2);
        if (!month) return std::nullopt;
        if (j < t.size()) {
            if (t[j] != '-') return std::nullopt;
            k = ++j;
            while (j < t.size() && is_digit(t[j])) ++j;
            day = parse_digits<unsigned>(t.substr(k, j - k), 1, 2);
            if (!day || j != t.size()) return std::nullopt;
        }
    }
    return checked_point(negative ? -*year : *year, month, day, t);
}

std::optional<unsigned> parse_day_token(std::string_view token) {
    std::string t = ascii_lower(token);
    for (std::string_view suffix : {"st", "nd", "rd", "th"}) {
        if (t.size() > suffix.size() && t.ends_with(suffix)) {
            t.resize(t.size() - suffix.size());
            break;
        }
    }
    return parse_digits<unsigned>(t, 1, 2);
}

std::optional<TimePoint> parse_month_name_timestamp(std::string_view t) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < t.size()) {
        while (i < t.size() && (is_space(t[i]) || t[i] == ',')) ++i;
        std::size_t j = i;
        while (j < t.size() && !is_space(t[j]) && t[j] != ',') ++j;
        if (j > i) tokens.push_back(t.substr(i, j - i));
        i = j;
    }
    auto year_of = [](std::string_view tok) { return parse_digits<std::int32_t>(tok, 1, 5); };
    if (tokens.size() == 2) {
        auto m = month_from_name(tokens[0]);
        auto y = year_of(tokens[1]);
        if (m && y) return checked_point(*y, m, std::nullopt, t);
    } else if (tokens.size() == 3) {
        auto y = year_of(tokens[2]);
        if (!y) return std::nullopt;
        if (auto m = month_from_name(tokens[1]); m) {
            if (auto d = parse_day_token(tokens[0])) return checked_point(*y, m, d, t);
        }
        if (auto m = month_from_name(tokens[0]); m) {
            if (auto d = parse_day_token(tokens[1])) return checked_point(*y, m, d, t);
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// predicate syntax

struct Arg {
    std::string value;
    bool quoted = false;
    Span span;
};

struct Call {
    std::string name;
    std::vector<Arg> args;
};

struct Cursor {
    std::string_view text;
    std::size_t pos;
    std::size_t end;

    bool done() const { return pos >= end; }
    char peek() const { return pos < end ? text[pos] : '\0'; }
    void skip_space() {
        while (pos < end && is_space(text[pos])) ++pos;
    }
};

// Parses "..." starting at the opening quote; leaves the cursor after the closing quote.
std::string parse_quoted(Cursor& c) {
    const std::size_t open = c.pos++;
    std::string out;
    while (!c.done()) {
        const char ch = c.text[c.pos++];
        if (ch == '"') return out;
        if (ch == '\\') {
            if (c.done()) break;
            const char esc = c.text[c.pos++];
            switch (esc) {
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'r': out.push_back('\r'); break;
            default: out.push_back(esc); break;
            }
            continue;
        }
        out.push_back(ch);
    }
    fail(Errc::fact_parse, "unterminated quoted argument", span_of(open, c.end));
}

// Bare or quoted value, terminated by ',' or `closer` at the top level.
Arg parse_value(Cursor& c, char closer, std::string_view forbidden) {
    c.skip_space();
    Arg arg;
    const std::size_t start = c.pos;
    if (c.peek() == '"') {
        arg.value = parse_quoted(c);
        arg.quoted = true;
        arg.span = span_of(start, c.pos);
        c.skip_space();
        return arg;
    }
    while (!c.done() && c.peek() != ',' && c.peek() != closer) {
        const char ch = c.peek();
        if (forbidden.find(ch) != std::string_view::npos)
            fail(Errc::fact_parse,
                 std::string("unexpected '") + ch + "' in unquoted argument; quote entity names containing , ( ) or \"",
                 span_of(c.pos, c.pos + 1));
        ++c.pos;
    }
    auto [b, e] = trim_range(c.text, start, c.pos);
    arg.value = std::string(c.text.substr(b, e - b));
    arg.span = span_of(b, e);
    if (arg.value.empty()) fail(Errc::fact_parse, "empty argument", span_of(start, c.pos));
    return arg;
}

Call parse_call(std::string_view text, std::size_t begin, std::size_t end, const Span& whole) {
    Cursor c{text, begin, end};
    c.skip_space();
    const std::size_t name_start = c.pos;
    while (!c.done() && is_ident_char(c.peek())) ++c.pos;
    Call call;
    call.name = std::string(text.substr(name_start, c.pos - name_start));
    if (!is_identifier(call.name)) fail(Errc::fact_parse, "expected a relation identifier", whole);
    c.skip_space();
    if (c.peek() != '(') fail(Errc::fact_parse, "expected '(' after relation '" + call.name + "'", whole);
    ++c.pos;
    c.skip_space();
    if (c.peek() == ')') {
        ++c.pos;
    } else {
        for (;;) {
            call.args.push_back(parse_value(c, ')', "()\"{}"));
            if (c.done()) fail(Errc::fact_parse, "missing ')'", whole);
            const char ch = c.text[c.pos++];
            if (ch == ')') break;
            if (ch != ',') fail(Errc::fact_parse, "expected ',' or ')'", span_of(c.pos - 1, c.pos));
        }
    }
    c.skip_space();
    if (!c.done()) fail(Errc::fact_parse, "unexpected text after predicate", span_of(c.pos, end));
    return call;
}

struct Field {
    std::string key;
    Arg value;
    Span key_span;
};

std::vector<Field> parse_record(std::string_view text, std::size_t begin, std::size_t end, const Span& whole) {
    Cursor c{text, begin, end};
    c.skip_space();
    if (c.peek() != '{') fail(Errc::fact_parse, "expected '{'", whole);
    ++c.pos;
    std::vector<Field> fields;
    c.skip_space();
    if (c.peek() == '}') {
        ++c.pos;
    } else {
        for (;;) {
            c.skip_space();
            Field field;
            const std::size_t key_start = c.pos;
            if (c.peek() == '"') {
                field.key = parse_quoted(c);
            } else {
                while (!c.done() && is_ident_char(c.peek())) ++c.pos;
                field.key = std::string(text.substr(key_start, c.pos - key_start));
            }
            field.key_span = span_of(key_start, c.pos);
            if (field.key.empty()) fail(Errc::fact_parse, "expected a record key", span_of(key_start, key_start + 1));
            c.skip_space();
            if (c.peek() != ':') fail(Errc::fact_parse, "expected ':' after key '" + field.key + "'", whole);
            ++c.pos;
            field.value = parse_value(c, '}', "{\"");
            fields.push_back(std::move(field));
            if (c.done()) fail(Errc::fact_parse, "missing '}'", whole);
            const char ch = c.text[c.pos++];
            if (ch == '}') break;
            if (ch != ',') fail(Errc::fact_parse, "expected ',' or '}'", span_of(c.pos - 1, c.pos));
        }
    }
    c.skip_space();
    if (!c.done()) fail(Errc::fact_parse, "unexpected text after record", span_of(c.pos, end));
    return fields;
}

TimePoint timestamp_arg(const Arg& arg, BoundSide side) {
    try {
        return normalize_timestamp(arg.value, side);
    } catch (const ParseError& e) {
        fail(Errc::timestamp_parse, e.what(), arg.span);
    }
}

// Relation/subject/object plus optional start/end, common to all three formats.
struct RawFact {
    const Arg* relation = nullptr;
    const Arg* subject = nullptr;
    const Arg* object = nullptr;
    const Arg* start = nullptr;
    const Arg* end = nullptr;
};

RawFact raw_from_call(const Call& call, Arg& relation_holder, bool allow_short, const Span& whole,
                      SymbolicFormat& format) {
    RawFact raw;
    const auto n = call.args.size();
    if (call.name == "holds" && (n == 5 || (allow_short && n == 3))) {
        format = SymbolicFormat::fol;
        raw.relation = &call.args[0];
        raw.subject = &call.args[1];
        raw.object = &call.args[2];
        if (n == 5) {
            raw.start = &call.args[3];
            raw.end = &call.args[4];
        }
        return raw;
    }
    if (n == 4 || (allow_short && n == 2)) {
        format = SymbolicFormat::quadruple;
        relation_holder.value = call.name;
        relation_holder.span = whole;
        raw.relation = &relation_holder;
        raw.subject = &call.args[0];
        raw.object = &call.args[1];
        if (n == 4) {
            raw.start = &call.args[2];
            raw.end = &call.args[3];
        }
        return raw;
    }
    fail(Errc::fact_parse,
         "wrong arity for '" + call.name + "': expected 4 arguments, got " + std::to_string(n), whole);
}

RawFact raw_from_record(const std::vector<Field>& fields, bool allow_short, const Span& whole) {
    RawFact raw;
    for (const auto& f : fields) {
        const std::string key = ascii_lower(f.key);
        const Arg** slot = nullptr;
        if (key == "relation") slot = &raw.relation;
        else if (key == "subject") slot = &raw.subject;
        else if (key == "object") slot = &raw.object;
        else if (key == "start") slot = &raw.start;
        else if (key == "end") slot = &raw.end;
        else fail(Errc::fact_parse, "unknown record key '" + f.key + "'", f.key_span);
        if (*slot) fail(Errc::fact_parse, "duplicate record key '" + f.key + "'", f.key_span);
        *slot = &f.value;
    }
    if (!raw.relation || !raw.subject || !raw.object)
        fail(Errc::fact_parse, "record needs relation, subject and object", whole);
    const bool has_times = raw.start && raw.end;
    if (!has_times && (raw.start || raw.end || !allow_short))
        fail(Errc::fact_parse, "record needs both start and end", whole);
    return raw;
}

TemporalFact fact_from_raw(const RawFact& raw, const Span& whole) {
    const TimePoint start = timestamp_arg(*raw.start, BoundSide::start);
    const TimePoint end = timestamp_arg(*raw.end, BoundSide::end);
    try {
        return TemporalFact::make(raw.relation->value, raw.subject->value, raw.object->value, TimeInterval{start, end});
    } catch (const Error& e) {
        fail(Errc::fact_parse, e.what(), whole);
    }
}

bool starts_record(std::string_view text, std::size_t begin, std::size_t end) {
    while (begin < end && is_space(text[begin])) ++begin;
    return begin < end && text[begin] == '{';
}

TemporalFact parse_fact_range(std::string_view text, std::size_t begin, std::size_t end) {
    const auto [b, e] = trim_range(text, begin, end);
    const Span whole = span_of(b, e);
    if (b == e) fail(Errc::fact_parse, "empty predicate", whole);
    if (starts_record(text, b, e)) {
        const auto fields = parse_record(text, b, e, whole);
        return fact_from_raw(raw_from_record(fields, false, whole), whole);
    }
    const Call call = parse_call(text, b, e, whole);
    Arg relation_holder;
    SymbolicFormat format{};
    return fact_from_raw(raw_from_call(call, relation_holder, false, whole, format), whole);
}

std::optional<AnswerCandidate> candidate_from_raw(const RawFact& raw, const Span& whole) {
    AnswerCandidate c{std::string(trim(raw.relation->value)), std::string(trim(raw.subject->value)),
                      std::string(trim(raw.object->value)), std::nullopt};
    if (raw.start && raw.end)
        c.interval = TimeInterval{timestamp_arg(*raw.start, BoundSide::start), timestamp_arg(*raw.end, BoundSide::end)};
    try {
        c.validate();
    } catch (const Error& e) {
        fail(Errc::fact_parse, e.what(), whole);
    }
    return c;
}

// Index of the closing delimiter matching text[open], or npos. Quotes are
// honoured; nesting and line breaks abort the match.
std::size_t find_closing(std::string_view text, std::size_t open, char opener, char closer) {
    bool in_quote = false;
    for (std::size_t i = open + 1; i < text.size(); ++i) {
        const char ch = text[i];
        if (ch == '\n') return std::string_view::npos;
        if (in_quote) {
            if (ch == '\\') ++i;
            else if (ch == '"') in_quote = false;
            continue;
        }
        if (ch == '"') in_quote = true;
        else if (ch == opener) return std::string_view::npos;
        else if (ch == closer) return i;
    }
    return std::string_view::npos;
}

// ---------------------------------------------------------------------------
// tags

bool iequals_at(std::string_view text, std::size_t pos, std::string_view word) {
    if (pos + word.size() > text.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i)
        if (ascii_lower(text[pos + i]) != word[i]) return false;
    return true;
}

constexpr std::array<Stage, 5> kStages = {Stage::representation, Stage::inference, Stage::consistency_check,
                                          Stage::reflection, Stage::answer};

// Stage whose opening tag starts at text[pos] together with the tag length.
std::optional<std::pair<Stage, std::size_t>> opening_tag_at(std::string_view text, std::size_t pos) {
    if (text[pos] != '<') return std::nullopt;
    for (Stage s : kStages) {
        const std::string_view name = tag_name(s);
        if (iequals_at(text, pos + 1, name) && pos + 1 + name.size() < text.size() &&
            text[pos + 1 + name.size()] == '>')
            return std::pair{s, name.size() + 2};
    }
    return std::nullopt;
}

std::size_t find_closing_tag(std::string_view text, std::size_t from, Stage stage) {
    const std::string closing = std::string("</") + tag_name(stage) + ">";
    for (std::size_t i = text.find('<', from); i != std::string_view::npos; i = text.find('<', i + 1))
        if (iequals_at(text, i, closing)) return i;
    return std::string_view::npos;
}

std::size_t find_next_opening(std::string_view text, std::size_t from) {
    for (std::size_t i = text.find('<', from); i != std::string_view::npos; i = text.find('<', i + 1))
        if (opening_tag_at(text, i)) return i;
    return std::string_view::npos;
}

} // namespace

const char* to_string(SymbolicFormat format) {
    switch (format) {
    case SymbolicFormat::quadruple: return "quadruple";
    case SymbolicFormat::fol: return "fol";
    case SymbolicFormat::dict: return "dict";
    }
    return "quadruple";
}

std::optional<SymbolicFormat> parse_symbolic_format(std::string_view text) {
    const std::string key = ascii_lower(trim(text));
    for (auto f : {SymbolicFormat::quadruple, SymbolicFormat::fol, SymbolicFormat::dict})
        if (key == to_string(f)) return f;
    return std::nullopt;
}

TimePoint normalize_timestamp(std::string_view text, BoundSide side) {
    const std::string_view t = trim(text);
    if (t.empty()) fail(Errc::timestamp_parse, "empty timestamp", span_of(0, text.size()));
    const std::string lower = ascii_lower(t);
    if (lower == "unknown")
        return side == BoundSide::start ? TimePoint::negative_infinity() : TimePoint::positive_infinity();
    if (lower == "present") return TimePoint::positive_infinity();
    if (lower == "-inf") return TimePoint::negative_infinity();
    if (lower == "+inf" || lower == "inf") return TimePoint::positive_infinity();
    if (auto p = parse_numeric_timestamp(t)) return *p;
    if (auto p = parse_month_name_timestamp(t)) return *p;
    fail(Errc::timestamp_parse, "unrecognized timestamp '" + std::string(t) + "'", span_of(0, text.size()));
}

std::string format_timestamp(const TimePoint& point, BoundSide side) {
    if (point.boundedness == Boundedness::negative_infinite && side == BoundSide::start) return "unknown";
    if (point.boundedness == Boundedness::positive_infinite && side == BoundSide::end) return "present";
    return to_string(point);
}

std::string quote_if_needed(std::string_view entity) {
    bool needs = entity.empty();
    for (char ch : entity) {
        if (ch == ',' || ch == '(' || ch == ')' || ch == '{' || ch == '}' || ch == '"' || ch == '\\' ||
            static_cast<unsigned char>(ch) < 0x20) {
            needs = true;
            break;
        }
    }
    if (!needs) return std::string(entity);
    std::string out = "\"";
    for (char ch : entity) {
        switch (ch) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out.push_back(ch); break;
        }
    }
    out.push_back('"');
    return out;
}

TemporalFact parse_fact(std::string_view text) { return parse_fact_range(text, 0, text.size()); }

std::string serialize_fact(const TemporalFact& fact, SymbolicFormat format) {
    const std::string s = quote_if_needed(fact.subject);
    const std::string o = quote_if_needed(fact.object);
    const std::string ts = format_timestamp(fact.interval.start, BoundSide::start);
    const std::string te = format_timestamp(fact.interval.end, BoundSide::end);
    switch (format) {
    case SymbolicFormat::fol:
        return "holds(" + fact.relation + ", " + s + ", " + o + ", " + ts + ", " + te + ")";
    case SymbolicFormat::dict:
        return "{relation: " + fact.relation + ", subject: " + s + ", object: " + o + ", start: " + ts +
               ", end: " + te + "}";
    case SymbolicFormat::quadruple: break;
    }
    return fact.relation + "(" + s + ", " + o + ", " + ts + ", " + te + ")";
}

std::string serialize_facts(const FactSet& facts, SymbolicFormat format) {
    std::string out;
    for (const auto& f : facts) {
        out += serialize_fact(f, format);
        out.push_back('\n');
    }
    return out;
}

bool FactBlock::has_errors() const {
    for (const auto& d : diagnostics)
        if (d.severity == Severity::error) return true;
    return false;
}

FactBlock parse_fact_block(std::string_view text) {
    FactBlock block;
    std::size_t line_no = 0;
    for (std::size_t line_start = 0; line_start <= text.size(); ++line_no) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = text.size();
        auto [b, e] = trim_range(text, line_start, line_end);
        const std::size_t next = line_end + 1;

        if (b == e || text[b] == '#' || text.substr(b, e - b).starts_with("```")) {
            line_start = next;
            continue;
        }
        // List markers: "- ", "* ", "1. ", "1) ".
        if (e - b > 2 && (text[b] == '-' || text[b] == '*') && is_space(text[b + 1])) {
            b += 2;
        } else {
            std::size_t k = b;
            while (k < e && is_digit(text[k])) ++k;
            if (k > b && k + 1 < e && (text[k] == '.' || text[k] == ')') && is_space(text[k + 1])) b = k + 2;
        }
        std::tie(b, e) = trim_range(text, b, e);
        if (e - b > 1 && (text[e - 1] == ';' || text[e - 1] == '.' || text[e - 1] == ',') &&
            (text[e - 2] == ')' || text[e - 2] == '}'))
            --e;

        try {
            TemporalFact fact = parse_fact_range(text, b, e);
            fact.provenance = line_no;
            block.facts.push_back(std::move(fact));
        } catch (const ParseError& err) {
            block.diagnostics.push_back(ParseDiagnostic{
                Severity::error, "line " + std::to_string(line_no + 1) + ": " + err.what(), err.span()});
        }
        line_start = next;
    }
    return block;
}

std::vector<PredicateMatch> scan_predicates(std::string_view text) {
    std::vector<PredicateMatch> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const char ch = text[i];
        if (is_letter(ch) && (i == 0 || !is_ident_char(text[i - 1]))) {
            std::size_t j = i;
            while (j < text.size() && is_ident_char(text[j])) ++j;
            if (j < text.size() && text[j] == '(') {
                const std::size_t close = find_closing(text, j, '(', ')');
                if (close != std::string_view::npos) {
                    const Span whole = span_of(i, close + 1);
                    try {
                        const Call call = parse_call(text, i, close + 1, whole);
                        Arg relation_holder;
                        SymbolicFormat format{};
                        const RawFact raw = raw_from_call(call, relation_holder, true, whole, format);
                        if (auto c = candidate_from_raw(raw, whole)) {
                            out.push_back(PredicateMatch{whole, format, std::move(*c)});
                            i = close + 1;
                            continue;
                        }
                    } catch (const ParseError&) {
                    }
                }
            }
            i = j;
            continue;
        }
        if (ch == '{') {
            const std::size_t close = find_closing(text, i, '{', '}');
            if (close != std::string_view::npos) {
                const Span whole = span_of(i, close + 1);
                try {
                    const auto fields = parse_record(text, i, close + 1, whole);
                    if (auto c = candidate_from_raw(raw_from_record(fields, true, whole), whole)) {
                        out.push_back(PredicateMatch{whole, SymbolicFormat::dict, std::move(*c)});
                        i = close + 1;
                        continue;
                    }
                } catch (const ParseError&) {
                }
            }
        }
        ++i;
    }
    return out;
}

const char* tag_name(Stage stage) {
    switch (stage) {
    case Stage::representation: return "representation";
    case Stage::inference: return "inference";
    case Stage::consistency_check: return "consistency_check";
    case Stage::reflection: return "reflection";
    case Stage::answer: return "answer";
    }
    return "answer";
}

std::optional<Stage> parse_stage(std::string_view text) {
    const std::string key = ascii_lower(trim(text));
    for (Stage s : kStages)
        if (key == tag_name(s)) return s;
    return std::nullopt;
}

const StageBlock* TaggedOutput::last(Stage stage) const {
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
        if (it->stage == stage) return &*it;
    return nullptr;
}

TaggedOutput scan_tagged_blocks(std::string_view text) {
    TaggedOutput out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t lt = text.find('<', pos);
        if (lt == std::string_view::npos) break;
        const auto tag = opening_tag_at(text, lt);
        if (!tag) {
            pos = lt + 1;
            continue;
        }
        const auto [stage, tag_len] = *tag;
        const std::size_t body_start = lt + tag_len;
        std::size_t body_end = find_closing_tag(text, body_start, stage);
        std::size_t resume = 0;
        if (body_end != std::string_view::npos) {
            resume = body_end + std::char_traits<char>::length(tag_name(stage)) + 3;
        } else {
            body_end = find_next_opening(text, body_start);
            if (body_end == std::string_view::npos) body_end = text.size();
            resume = body_end;
            out.diagnostics.push_back(ParseDiagnostic{
                Severity::warning,
                std::string("unclosed <") + tag_name(stage) + "> tag; body runs to " +
                    (body_end == text.size() ? "end of text" : "next tag"),
                span_of(lt, body_end)});
        }
        out.blocks.push_back(StageBlock{stage, std::string(text.substr(body_start, body_end - body_start)),
                                        out.blocks.size(), span_of(body_start, body_end)});
        pos = resume;
    }
    return out;
}

TaggedOutput parse_tagged_output(std::string_view text) {
    TaggedOutput out = scan_tagged_blocks(text);
    if (!out.last(Stage::answer)) fail(Errc::missing_answer, "no <answer> block in model output", span_of(0, text.size()));
    return out;
}

} // namespace symtime
