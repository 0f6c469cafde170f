#pragma once

#include "symtime/backend.hpp"
#include "symtime/evaluation.hpp"
#include "symtime/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace symtime::cli {

/// Stable process exit codes.
enum ExitCode : int { kOk = 0, kDomainError = 1, kIoError = 2 };

/// Maps an error to its exit code: io and transport are 2, everything else 1.
int exit_code_for(const Error& error);

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

struct CliConfig {
    std::string endpoint;
    std::string model = "gpt-4o-mini";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_seconds = 120;
    /// Scripted backend; takes precedence over the endpoint.
    std::optional<std::filesystem::path> mock;
    PipelineConfig pipeline;
    int parallelism = 4;
    /// Reserved for randomized tie-breaking; no code path consumes it yet.
    std::uint64_t seed = 0;
    Adapter adapter = Adapter::canonical;
    std::optional<DatasetId> dataset;

    /// Pipeline invariants plus positive parallelism and timeout.
    void validate() const;
};

/// Applies one setting by name. Keys:
///   endpoint, model, api_key_env, timeout, mock, variant, disable_symbolic,
///   disable_consistency, disable_reflection, symbolic_only, max_reflections,
///   format, temperature, num_runs, max_tokens, retry_attempts,
///   retry_backoff_ms, parallelism, seed, adapter, dataset
/// Booleans accept true/false/1/0/yes/no/on/off. Throws Error(invalid_argument).
void set_option(CliConfig& config, std::string_view key, std::string_view value);

/// `key = value` lines; blank lines and lines starting with '#' or ';' are
/// ignored. Throws ParseError(invalid_argument) naming the line.
void apply_config_text(CliConfig& config, std::string_view text);
/// Error(io) when the file cannot be read.
void apply_config_file(CliConfig& config, const std::filesystem::path& path);

/// Scripted backend when `mock` is set, HTTP otherwise. Error(invalid_argument)
/// when neither is configured.
std::unique_ptr<ModelBackend> make_backend(const CliConfig& config);

/// Prints each fact canonically; diagnostics go to err as "path:line: message".
/// Exit 1 iff any error diagnostic, 2 when the file cannot be read.
int cmd_parse(const std::filesystem::path& facts_file, SymbolicFormat format, Streams io);

struct QueryArgs {
    std::optional<std::string> subject;
    std::optional<std::string> relation;
    std::optional<std::string> from;
    std::optional<std::string> to;
    std::optional<std::string> kind;
    std::optional<std::string> ref;
};

/// Without --kind: overlap when --from or --to is given (an absent side is
/// unbounded), otherwise the subject/relation filter alone. overlap and the
/// filter print the matching facts; before/after/first/last print the answer
/// object only. Exit 1 on a usage error or when nothing matches.
int cmd_query(const std::filesystem::path& facts_file, const QueryArgs& args, SymbolicFormat format, Streams io);

struct RunPaths {
    std::filesystem::path dataset;
    std::filesystem::path predictions;
    /// Default: "<predictions>.traces".
    std::optional<std::filesystem::path> traces;
    /// Default: "<predictions>.checkpoint".
    std::optional<std::filesystem::path> checkpoint;
};

struct RunSummary {
    std::size_t items = 0;
    std::size_t scheduled = 0;
    std::size_t skipped = 0;
    std::size_t written = 0;
    std::size_t failed = 0;
    std::size_t extraction_errors = 0;
    std::size_t backend_calls = 0;
};

/// Runs every (item, run) pair not yet in the checkpoint on a pool of
/// `parallelism` workers. Each finished pair appends one prediction line (failed
/// pairs append none), writes "<traces>/<id>.run<r>.json", then appends
/// "<id>\t<run>" to the checkpoint. An existing checkpoint resumes the batch and
/// appends to the predictions file; without one both files start empty.
/// Throws on dataset or file errors; pipeline failures are counted instead.
RunSummary run_batch(const CliConfig& config, const RunPaths& paths, ModelBackend& backend, Streams io);

/// run_batch with a backend from make_backend (none for symbolic_only).
/// Exit 0 iff no pair failed.
int cmd_run(const CliConfig& config, const RunPaths& paths, Streams io);

struct EvalPaths {
    std::filesystem::path dataset;
    std::filesystem::path predictions;
    std::optional<std::filesystem::path> json_out;
};

/// Prints the score table (one row labelled `label`) and optionally writes the
/// JSON summary. Exit 1 on an unknown prediction id.
int cmd_eval(const CliConfig& config, const EvalPaths& paths, Streams io, std::string_view label = "Full");

struct AblatePaths {
    std::filesystem::path dataset;
    /// Receives <variant>/predictions.jsonl and traces per variant.
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> json_out;
};

/// Runs the five ablation variants in table order and prints one table with
/// a row per variant. Exit 0 iff every run of every variant succeeded.
int cmd_ablate(const CliConfig& config, const AblatePaths& paths, Streams io);

} // namespace symtime::cli
