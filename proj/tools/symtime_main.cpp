// symtime command-line entry point. Settings resolve in this order:
// built-in defaults, then --config file, then explicit flags.

#include "symtime/cli.hpp"
#include "symtime/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

using namespace symtime;

namespace {

// Flag values land here keyed by their config-file name; only flags that
// were actually given are applied on top of the config file.
struct Overrides {
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void option(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        options.emplace_back(key, app.add_option(flag, values[key], help));
    }
    void flag(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        values[key] = "true";
        options.emplace_back(key, app.add_flag(flag, help));
    }
    void apply(cli::CliConfig& config) const {
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) cli::set_option(config, key, values.at(key));
    }
};

void backend_options(CLI::App& app, Overrides& o) {
    o.option(app, "--mock", "mock", "scripted backend (JSON Lines), replaces the endpoint");
    o.option(app, "--endpoint", "endpoint", "OpenAI-compatible base URL");
    o.option(app, "--model", "model", "model name sent to the endpoint");
    o.option(app, "--api-key-env", "api_key_env", "environment variable holding the API key");
    o.option(app, "--timeout", "timeout", "HTTP timeout in seconds");
    o.option(app, "--temperature", "temperature", "sampling temperature (default 0.1)");
    o.option(app, "--max-tokens", "max_tokens", "completion token limit");
    o.option(app, "--num-runs", "num_runs", "independent runs per item (default 3)");
    o.option(app, "--max-reflections", "max_reflections", "reflection budget (default 2)");
    o.option(app, "--parallelism", "parallelism", "concurrent items (default 4)");
    o.option(app, "--retry-attempts", "retry_attempts", "backend attempts per stage");
    o.option(app, "--retry-backoff-ms", "retry_backoff_ms", "first retry delay, doubled per attempt");
    o.option(app, "--variant", "variant",
             "full, symbolic_only, disable_symbolic, disable_consistency or disable_reflection");
    o.flag(app, "--symbolic-only", "symbolic_only", "answer from parsed facts without a model");
    o.flag(app, "--disable-symbolic", "disable_symbolic", "skip the symbolic representation stage");
    o.flag(app, "--disable-consistency", "disable_consistency", "skip consistency checking");
    o.flag(app, "--disable-reflection", "disable_reflection", "skip abductive reflection");
}

void dataset_options(CLI::App& app, Overrides& o) {
    o.option(app, "--adapter", "adapter", "canonical, timeqa or tempreason field names");
    o.option(app, "--dataset-id", "dataset", "force every record into one dataset column");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal question answering with symbolic facts, staged prompting and evaluation."};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    std::string config_path;
    Overrides global;
    app.add_option("--config", config_path, "key = value settings file")->check(CLI::ExistingFile);
    global.option(app, "--seed", "seed", "seed for randomized tie-breaking (reserved)");
    global.option(app, "--format", "format", "fact format: quadruple, fol or dict");
    // Subcommand options are accepted before or after the subcommand name.
    app.fallthrough();

    Overrides sub;
    std::string facts_file, dataset, predictions, traces, checkpoint, json_out, out_dir, label = "Full";
    cli::QueryArgs query;

    auto* parse = app.add_subcommand("parse", "print the facts of a fact file canonically");
    parse->add_option("facts", facts_file, "fact file")->required();

    auto* q = app.add_subcommand("query", "answer a query from a fact file");
    q->add_option("facts", facts_file, "fact file")->required();
    q->add_option("--subject", query.subject, "subject filter");
    q->add_option("--relation", query.relation, "relation filter");
    q->add_option("--from", query.from, "interval start");
    q->add_option("--to", query.to, "interval end");
    q->add_option("--kind", query.kind, "overlap, before, after, first or last");
    q->add_option("--ref", query.ref, "reference object for before/after");

    auto* run = app.add_subcommand("run", "run the pipeline over a dataset");
    run->add_option("dataset", dataset, "dataset file (JSON Lines)")->required();
    run->add_option("-o,--predictions", predictions, "predictions output")->required();
    run->add_option("--traces", traces, "trace directory (default <predictions>.traces)");
    run->add_option("--checkpoint", checkpoint, "checkpoint file (default <predictions>.checkpoint)");
    backend_options(*run, sub);
    dataset_options(*run, sub);

    auto* eval = app.add_subcommand("eval", "score predictions against a dataset");
    eval->add_option("dataset", dataset, "dataset file (JSON Lines)")->required();
    eval->add_option("predictions", predictions, "predictions file (JSON Lines)")->required();
    eval->add_option("--json", json_out, "write the JSON summary here");
    eval->add_option("--label", label, "row label");
    dataset_options(*eval, sub);

    auto* ablate = app.add_subcommand("ablate", "run and score the five ablation variants");
    ablate->add_option("dataset", dataset, "dataset file (JSON Lines)")->required();
    ablate->add_option("-o,--out", out_dir, "output directory")->required();
    ablate->add_option("--json", json_out, "write the JSON summary here");
    backend_options(*ablate, sub);
    dataset_options(*ablate, sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kOk : cli::kDomainError;
    }

    const cli::Streams io{std::cout, std::cerr};
    cli::CliConfig config;
    try {
        if (!config_path.empty()) cli::apply_config_file(config, config_path);
        global.apply(config);
        sub.apply(config);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_code_for(e);
    }
    const auto opt_path = [](const std::string& s) {
        return s.empty() ? std::nullopt : std::optional<std::filesystem::path>(s);
    };

    if (*parse) return cli::cmd_parse(facts_file, config.pipeline.format, io);
    if (*q) return cli::cmd_query(facts_file, query, config.pipeline.format, io);
    if (*run) return cli::cmd_run(config, {dataset, predictions, opt_path(traces), opt_path(checkpoint)}, io);
    if (*eval) return cli::cmd_eval(config, {dataset, predictions, opt_path(json_out)}, io, label);
    if (*ablate) return cli::cmd_ablate(config, {dataset, out_dir, opt_path(json_out)}, io);
    return cli::kDomainError;
}
