#include "symtime/error.hpp"

namespace symtime {

const char* to_string(Errc code) {
    switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::timestamp_parse: return "timestamp-parse";
    case Errc::fact_parse: return "fact-parse";
    case Errc::missing_answer: return "missing-answer";
    case Errc::reference_not_found: return "reference-not-found";
    case Errc::sequencing: return "sequencing";
    case Errc::transport: return "transport";
    case Errc::pipeline: return "pipeline";
    case Errc::precondition: return "precondition";
    case Errc::out_of_range: return "out-of-range";
    case Errc::aggregation: return "aggregation";
    case Errc::io: return "io";
    case Errc::empty_dataset: return "empty-dataset";
    case Errc::unknown_prediction_id: return "unknown-prediction-id";
    }
    return "unknown";
}

} // namespace symtime
