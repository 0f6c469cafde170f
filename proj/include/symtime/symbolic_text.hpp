#pragma once

#include "symtime/error.hpp"
#include "symtime/facts.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace symtime {

enum class SymbolicFormat { quadruple, fol, dict };

const char* to_string(SymbolicFormat format);
std::optional<SymbolicFormat> parse_symbolic_format(std::string_view text);

enum class Severity { warning, error };

struct ParseDiagnostic {
    Severity severity = Severity::error;
    std::string message;
    Span span;

    friend bool operator==(const ParseDiagnostic&, const ParseDiagnostic&) = default;
};

/// Accepts YYYY, YYYY-MM, YYYY-MM-DD (optionally signed year), English month
/// forms ("January 1949", "1 January 1949", "January 1, 1949", three-letter
/// abbreviations), "present", and "unknown". "unknown" resolves to the
/// infinite bound on `side`; "present" is always +inf. The result keeps the
/// finest granularity found in the input.
///
/// Throws ParseError(timestamp_parse) with a span covering the input.
TimePoint normalize_timestamp(std::string_view text, BoundSide side = BoundSide::start);

/// Inverse of normalize_timestamp for the given side: "unknown" for an open
/// start, "present" for an open end.
std::string format_timestamp(const TimePoint& point, BoundSide side);

/// Double-quotes an entity when it contains any of , ( ) { } " \ or control
/// characters; embedded quotes and backslashes are backslash-escaped.
std::string quote_if_needed(std::string_view entity);

/// Parses one fact in any of the three formats:
///   works_for(Jaroslav Pelikan, Valparaiso University, 1946, 1949)
///   holds(works_for, Jaroslav Pelikan, Valparaiso University, 1946, 1949)
///   {relation: works_for, subject: Jaroslav Pelikan, object: ..., start: 1946, end: 1949}
/// Throws ParseError(fact_parse | timestamp_parse) with a span into `text`.
TemporalFact parse_fact(std::string_view text);

std::string serialize_fact(const TemporalFact& fact, SymbolicFormat format = SymbolicFormat::quadruple);

/// One fact per line.
std::string serialize_facts(const FactSet& facts, SymbolicFormat format = SymbolicFormat::quadruple);

struct FactBlock {
    FactSet facts;
    std::vector<ParseDiagnostic> diagnostics;

    bool has_errors() const;
};

/// One predicate per non-empty line. Lines starting with '#' or a code fence
/// are skipped; list markers ("- ", "1. ") and a trailing ';' or '.' are
/// tolerated. Failing lines become error diagnostics with spans into `text`.
/// Each fact's provenance is its zero-based line number.
FactBlock parse_fact_block(std::string_view text);

struct PredicateMatch {
    Span span;
    SymbolicFormat format = SymbolicFormat::quadruple;
    AnswerCandidate candidate;
};

/// Finds serialized predicates embedded in free text. Besides full facts this
/// accepts the interval-less forms rel(s, o), holds(rel, s, o) and dict
/// records without start/end.
std::vector<PredicateMatch> scan_predicates(std::string_view text);

enum class Stage { representation, inference, consistency_check, reflection, answer };

/// Tag name used in model output, e.g. "consistency_check".
const char* tag_name(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);

struct StageBlock {
    Stage stage = Stage::answer;
    std::string body;
    std::size_t index = 0;
    Span span;

    friend bool operator==(const StageBlock&, const StageBlock&) = default;
};

struct TaggedOutput {
    std::vector<StageBlock> blocks;
    std::vector<ParseDiagnostic> diagnostics;

    /// Last block of the given stage, or nullptr.
    const StageBlock* last(Stage stage) const;
};

/// Extracts <representation>, <inference>, <consistency_check>, <reflection>
/// and <answer> blocks in document order. Tags are case-insensitive and text
/// outside them is ignored. An unclosed tag runs to the next recognised
/// opening tag, or to the end of the text, with a warning.
TaggedOutput scan_tagged_blocks(std::string_view text);

/// scan_tagged_blocks, but throws ParseError(missing_answer) if no <answer> block exists.
TaggedOutput parse_tagged_output(std::string_view text);

} // namespace symtime
