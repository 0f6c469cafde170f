#pragma once

#include "symtime/backend.hpp"
#include "symtime/error.hpp"
#include "symtime/facts.hpp"
#include "symtime/report.hpp"
#include "symtime/symbolic_text.hpp"

#include <json.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace symtime {

/// The five ablation rows: the full protocol and one variant per removed component.
enum class Variant { full, symbolic_only, disable_symbolic, disable_consistency, disable_reflection };

const char* to_string(Variant variant);
std::optional<Variant> parse_variant(std::string_view text);

/// Row label in the ablation table, e.g. "w/o Consistency Check".
const char* variant_label(Variant variant);

/// Ablation table row order: symbolic only, w/o symbol, w/o consistency, w/o reflection, full.
inline constexpr Variant kAblationOrder[] = {Variant::symbolic_only, Variant::disable_symbolic,
                                             Variant::disable_consistency, Variant::disable_reflection,
                                             Variant::full};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
};

struct PipelineConfig {
    bool disable_symbolic = false;
    bool disable_consistency = false;
    bool disable_reflection = false;
    bool symbolic_only = false;
    int max_reflections = 2;
    SymbolicFormat format = SymbolicFormat::quadruple;
    double temperature = 0.1;
    int num_runs = 3;
    int max_tokens = 1024;
    RetryPolicy retry;

    /// symbolic_only excludes the other flags; max_reflections is 0 exactly when
    /// disable_reflection is set. Throws Error(invalid_argument).
    void validate() const;

    /// `base` with the ablation flags of `variant`. disable_reflection zeroes
    /// max_reflections; the other variants keep base.max_reflections (or 2 if it is 0).
    static PipelineConfig for_variant(Variant variant, PipelineConfig base);
    static PipelineConfig for_variant(Variant variant);

    Variant variant() const;
};

struct PipelineInput {
    std::string item_id;
    std::string question;
    std::string context;
    /// Pre-parsed facts and query, used by the symbolic-only path when present.
    std::optional<FactSet> facts;
    std::optional<TemporalQuery> query;
};

struct TraceStage {
    StageBlock block;
    int round = 0;
    /// False for stages produced by the harness without a model call.
    bool from_model = true;
    std::optional<FactSet> facts;
    std::vector<AnswerCandidate> candidates;
    std::optional<ConsistencyReport> report;
    /// consistency_check: the verdict read from the model's own text.
    std::optional<std::string> model_verdict;
    /// reflection: "facts" when it restated the representation, else "inference".
    std::optional<std::string> reflection_path;
};

enum class TraceStatus { ok, extraction_error, failed };

const char* to_string(TraceStatus status);

struct PipelineTrace {
    std::string item_id;
    int run = 0;
    std::string question;
    std::string context;
    Variant variant = Variant::full;
    std::vector<TraceStage> stages;
    std::vector<BackendRequest> requests;
    std::size_t backend_calls = 0;
    FactSet facts;
    std::optional<TemporalQuery> query;
    int reflection_count = 0;
    std::string final_answer;
    std::optional<bool> answer_supported;
    TraceStatus status = TraceStatus::ok;
    std::optional<std::string> error;
    std::vector<std::string> diagnostics;

    const TraceStage* last(Stage stage) const;
    std::size_t count(Stage stage) const;
};

/// Thrown by run_pipeline when the backend stays unreachable; carries the partial trace.
class PipelineFailure : public Error {
public:
    PipelineFailure(const std::string& what, PipelineTrace trace)
        : Error(Errc::pipeline, what), trace_(std::move(trace)) {}

    const PipelineTrace& trace() const noexcept { return trace_; }

private:
    PipelineTrace trace_;
};

const std::string& system_prompt();

/// Prompt for `stage` given the trace so far. Throws Error(sequencing) when a
/// prerequisite stage is missing or the stage is disabled by the config.
BackendRequest build_stage_prompt(Stage stage, const PipelineTrace& state, const PipelineConfig& config);

/// Predicates in the body (any format) plus whole-word mentions of fact
/// objects outside those predicates, which inherit the fact's relation and
/// subject. Deduplicated; predicates first, then mentions, each in order of appearance.
std::vector<AnswerCandidate> extract_candidates(std::string_view body, const FactSet& facts);

/// "inconsistent", "consistent" or "unknown" from free text.
std::string read_verdict(std::string_view consistency_text);

/// Runs the staged protocol once. Throws PipelineFailure after the retry
/// budget is exhausted on a transport error and Error(invalid_argument) on a
/// bad config or empty question. A missing <answer> is recorded in the trace.
PipelineTrace run_pipeline(const PipelineInput& input, ModelBackend& backend, const PipelineConfig& config,
                           int run = 0);

/// num_runs independent runs; failed runs keep their partial trace with status failed.
std::vector<PipelineTrace> run_with_repeats(const PipelineInput& input, ModelBackend& backend,
                                            const PipelineConfig& config);

nlohmann::json to_json(const PipelineTrace& trace);

} // namespace symtime
