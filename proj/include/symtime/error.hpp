#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace symtime {

enum class Errc {
    invalid_argument,
    timestamp_parse,
    fact_parse,
    missing_answer,
    reference_not_found,
    sequencing,
    transport,
    pipeline,
    precondition,
    out_of_range,
    aggregation,
    io,
    empty_dataset,
    unknown_prediction_id,
};

const char* to_string(Errc code);

/// Character range [offset, offset + length) into the text that was parsed.
struct Span {
    std::size_t offset = 0;
    std::size_t length = 0;

    friend bool operator==(const Span&, const Span&) = default;
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

class ParseError : public Error {
public:
    ParseError(Errc code, const std::string& what, Span span) : Error(code, what), span_(span) {}

    const Span& span() const noexcept { return span_; }

private:
    Span span_;
};

} // namespace symtime
