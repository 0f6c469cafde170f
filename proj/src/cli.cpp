#include "symtime/cli.hpp"

#include "symtime/error.hpp"
#include "symtime/symbolic_qa.hpp"
#include "symtime/symbolic_text.hpp"
#include "symtime/temporal.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace symtime::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(std::string_view key, std::string_view value) {
    const std::string v = utf8_lower(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(Errc::invalid_argument, std::string(key) + ": expected a boolean, got '" + std::string(value) + "'");
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw Error(Errc::invalid_argument, std::string(key) + ": expected a number, got '" + std::string(value) + "'");
    return out;
}

double parse_double(std::string_view key, std::string_view value) {
    try {
        std::size_t used = 0;
        const double d = std::stod(std::string(value), &used);
        if (used == value.size()) return d;
    } catch (const std::exception&) {
    }
    throw Error(Errc::invalid_argument, std::string(key) + ": expected a number, got '" + std::string(value) + "'");
}

// 1-based line of a byte offset.
std::size_t line_of(std::string_view text, std::size_t offset) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(
                                                                                    std::min(offset, text.size())),
                                                   '\n'));
}

FactSet read_facts(const fs::path& path, Streams io, bool& had_errors) {
    const std::string text = read_text(path);
    const FactBlock block = parse_fact_block(text);
    for (const auto& d : block.diagnostics)
        io.err << path.string() << ":" << line_of(text, d.span.offset) << ": "
               << (d.severity == Severity::error ? "error: " : "warning: ") << d.message << "\n";
    had_errors = block.has_errors();
    return block.facts;
}

// File-system safe trace name; a hash suffix keeps distinct ids distinct.
std::string trace_name(const std::string& id, int run) {
    std::string safe;
    bool changed = false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        safe.push_back(ok ? c : '_');
        changed = changed || !ok;
    }
    if (safe.empty() || safe.front() == '.') {
        safe.insert(safe.begin(), '_');
        changed = true;
    }
    if (changed) {
        std::uint32_t h = 2166136261u;
        for (unsigned char c : id) h = (h ^ c) * 16777619u;
        char buf[16];
        std::snprintf(buf, sizeof buf, "-%08x", h);
        safe += buf;
    }
    return safe + ".run" + std::to_string(run) + ".json";
}

using Key = std::pair<std::string, int>;

std::set<Key> read_checkpoint(const fs::path& path) {
    std::set<Key> done;
    const std::string text = read_text(path);
    std::istringstream lines(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(lines, line);) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            done.emplace(j.at("id").get<std::string>(), j.at("run").get<int>());
        } catch (const nlohmann::json::exception& e) {
            // A torn final line from an interrupted write is expected; anything else is not.
            if (lines.peek() != EOF)
                throw Error(Errc::io, path.string() + ":" + std::to_string(line_no) + ": bad checkpoint entry");
        }
    }
    return done;
}

// Rewrites the checkpoint without a torn tail and keeps only predictions whose
// pair is checkpointed, so an interrupted write is redone exactly once.
void compact_for_resume(const fs::path& checkpoint, const fs::path& predictions, const std::set<Key>& done) {
    std::string kept_checkpoint;
    for (const auto& [id, run] : done) kept_checkpoint += nlohmann::json{{"id", id}, {"run", run}}.dump() + "\n";
    std::string kept_predictions;
    if (fs::exists(predictions)) {
        std::set<Key> seen;
        std::istringstream lines(read_text(predictions));
        for (std::string line; std::getline(lines, line);) {
            try {
                const auto j = nlohmann::json::parse(line);
                Key key{j.at("id").get<std::string>(), j.value("run", 0)};
                if (done.count(key) && seen.insert(key).second) kept_predictions += line + "\n";
            } catch (const nlohmann::json::exception&) {
                // Torn or foreign line: its pair is not checkpointed, so it reruns.
            }
        }
    }
    for (const auto& [path, text] : {std::pair{checkpoint, &kept_checkpoint}, std::pair{predictions, &kept_predictions}}) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::trunc);
        out << *text;
        if (!out) throw Error(Errc::io, "cannot write " + path.string());
    }
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::ofstream open_out(const fs::path& p, bool append) {
    ensure_parent(p);
    std::ofstream out(p, append ? std::ios::app : std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + p.string());
    return out;
}

void write_json_file(const fs::path& p, const nlohmann::json& j) {
    auto out = open_out(p, false);
    out << j.dump(2) << "\n";
    if (!out) throw Error(Errc::io, "cannot write " + p.string());
}

std::unique_ptr<ModelBackend> backend_for(const CliConfig& config) {
    if (config.pipeline.symbolic_only) return std::make_unique<MockBackend>(std::vector<MockBackend::Entry>{});
    return make_backend(config);
}

void print_summary(const RunSummary& s, std::ostream& out) {
    out << "items: " << s.items << "  pairs: " << s.scheduled + s.skipped << "  skipped (checkpoint): " << s.skipped
        << "  predictions: " << s.written << "  failed: " << s.failed
        << "  extraction errors: " << s.extraction_errors << "  backend calls: " << s.backend_calls << "\n";
}

ScoreReport score_files(const CliConfig& config, const fs::path& dataset, const fs::path& predictions, Streams io) {
    const Dataset ds = load_dataset(dataset, config.adapter, config.dataset);
    for (const auto& d : ds.diagnostics) io.err << dataset.string() << ":" << d.line << ": " << d.message << "\n";
    return aggregate(score_predictions(ds, load_predictions(predictions)));
}

template <class Fn>
int guarded(Streams io, Fn fn) {
    try {
        return fn();
    } catch (const Error& e) {
        io.err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        io.err << "error: " << e.what() << "\n";
        return kIoError;
    }
}

} // namespace

int exit_code_for(const Error& error) {
    return error.code() == Errc::io || error.code() == Errc::transport ? kIoError : kDomainError;
}

void CliConfig::validate() const {
    pipeline.validate();
    if (parallelism < 1) throw Error(Errc::invalid_argument, "parallelism must be at least 1");
    if (timeout_seconds < 1) throw Error(Errc::invalid_argument, "timeout must be at least 1 second");
    if (pipeline.num_runs < 1) throw Error(Errc::invalid_argument, "num_runs must be at least 1");
    if (pipeline.retry.attempts < 1) throw Error(Errc::invalid_argument, "retry_attempts must be at least 1");
}

void set_option(CliConfig& c, std::string_view key, std::string_view raw) {
    const std::string value = trim(raw);
    PipelineConfig& p = c.pipeline;
    if (key == "endpoint") c.endpoint = value;
    else if (key == "model") c.model = value;
    else if (key == "api_key_env") c.api_key_env = value;
    else if (key == "timeout") c.timeout_seconds = parse_number<int>(key, value);
    else if (key == "mock") c.mock = value.empty() ? std::nullopt : std::optional<fs::path>(value);
    else if (key == "variant") {
        const auto v = parse_variant(value);
        if (!v) throw Error(Errc::invalid_argument, "unknown variant '" + value + "'");
        p = PipelineConfig::for_variant(*v, p);
    } else if (key == "disable_symbolic") p.disable_symbolic = parse_bool(key, value);
    else if (key == "disable_consistency") p.disable_consistency = parse_bool(key, value);
    else if (key == "symbolic_only") p.symbolic_only = parse_bool(key, value);
    else if (key == "disable_reflection") {
        // Keeps the max_reflections == 0 <=> disable_reflection invariant.
        p.disable_reflection = parse_bool(key, value);
        if (p.disable_reflection) p.max_reflections = 0;
        else if (p.max_reflections == 0) p.max_reflections = 2;
    } else if (key == "max_reflections") {
        p.max_reflections = parse_number<int>(key, value);
        if (p.max_reflections < 0) throw Error(Errc::invalid_argument, "max_reflections must be non-negative");
        p.disable_reflection = p.max_reflections == 0;
    } else if (key == "format") {
        const auto f = parse_symbolic_format(value);
        if (!f) throw Error(Errc::invalid_argument, "unknown format '" + value + "'");
        p.format = *f;
    } else if (key == "temperature") p.temperature = parse_double(key, value);
    else if (key == "num_runs") p.num_runs = parse_number<int>(key, value);
    else if (key == "max_tokens") p.max_tokens = parse_number<int>(key, value);
    else if (key == "retry_attempts") p.retry.attempts = parse_number<int>(key, value);
    else if (key == "retry_backoff_ms") p.retry.initial_backoff = std::chrono::milliseconds(parse_number<long>(key, value));
    else if (key == "parallelism") c.parallelism = parse_number<int>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "adapter") {
        const auto a = parse_adapter(value);
        if (!a) throw Error(Errc::invalid_argument, "unknown adapter '" + value + "'");
        c.adapter = *a;
    } else if (key == "dataset") {
        const auto d = parse_dataset_id(value);
        if (!d) throw Error(Errc::invalid_argument, "unknown dataset '" + value + "'");
        c.dataset = *d;
    } else {
        throw Error(Errc::invalid_argument, "unknown option '" + std::string(key) + "'");
    }
}

void apply_config_text(CliConfig& config, std::string_view text) {
    std::size_t line_no = 0;
    std::size_t offset = 0;
    std::istringstream lines{std::string(text)};
    for (std::string line; std::getline(lines, line); offset += line.size() + 1) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#' || t.front() == ';') continue;
        const Span span{offset, line.size()};
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError(Errc::invalid_argument, "config line " + std::to_string(line_no) + ": expected key = value",
                             span);
        try {
            set_option(config, trim(t.substr(0, eq)), t.substr(eq + 1));
        } catch (const Error& e) {
            throw ParseError(Errc::invalid_argument, "config line " + std::to_string(line_no) + ": " + e.what(), span);
        }
    }
}

void apply_config_file(CliConfig& config, const fs::path& path) { apply_config_text(config, read_text(path)); }

std::unique_ptr<ModelBackend> make_backend(const CliConfig& config) {
    if (config.mock) return std::make_unique<MockBackend>(MockBackend::from_file(*config.mock).entries());
    if (config.endpoint.empty())
        throw Error(Errc::invalid_argument, "no backend configured: pass --endpoint or --mock");
    return std::make_unique<HttpChatBackend>(
        HttpBackendConfig{config.endpoint, config.model, config.api_key_env, config.timeout_seconds});
}

int cmd_parse(const fs::path& facts_file, SymbolicFormat format, Streams io) {
    return guarded(io, [&] {
        bool errors = false;
        const FactSet facts = read_facts(facts_file, io, errors);
        for (const auto& f : facts) io.out << serialize_fact(f, format) << "\n";
        return errors ? kDomainError : kOk;
    });
}

int cmd_query(const fs::path& facts_file, const QueryArgs& args, SymbolicFormat format, Streams io) {
    return guarded(io, [&] {
        TemporalQuery q;
        q.subject = args.subject;
        q.relation = args.relation;
        q.reference_object = args.ref;
        if (args.from || args.to) {
            q.interval = TimeInterval{args.from ? normalize_timestamp(*args.from, BoundSide::start)
                                                : TimePoint::negative_infinity(),
                                      args.to ? normalize_timestamp(*args.to, BoundSide::end)
                                              : TimePoint::positive_infinity()};
            if (!q.interval->is_valid())
                throw Error(Errc::invalid_argument, "usage: --from must not be after --to");
        }
        std::optional<QueryKind> kind;
        if (args.kind) {
            kind = parse_query_kind(*args.kind);
            if (!kind) throw Error(Errc::invalid_argument, "usage: unknown --kind '" + *args.kind + "'");
        } else if (q.interval) {
            kind = QueryKind::overlap;
        }
        if (kind) {
            q.kind = *kind;
            try {
                q.validate();
            } catch (const Error& e) {
                throw Error(Errc::invalid_argument, std::string("usage: ") + e.what());
            }
        } else if (q.reference_object) {
            throw Error(Errc::invalid_argument, "usage: --ref needs --kind before or --kind after");
        }

        bool errors = false;
        const FactSet facts = read_facts(facts_file, io, errors);
        if (errors) return kDomainError;

        if (!kind || *kind == QueryKind::overlap) {
            FactSet matches = facts;
            if (q.relation) matches = filter_relation(matches, *q.relation);
            if (q.subject) matches = filter_subject(matches, *q.subject);
            if (q.interval) matches = filter_relevant(matches, *q.interval);
            for (const auto& f : matches) io.out << serialize_fact(f, format) << "\n";
            if (matches.empty()) {
                io.err << "no matching facts\n";
                return kDomainError;
            }
            return kOk;
        }

        SymbolicAnswer answer;
        try {
            answer = answer_symbolically(facts, q);
        } catch (const Error& e) {
            if (e.code() != Errc::reference_not_found) throw;
            io.err << e.what() << "\n";
            return kDomainError;
        }
        if (answer.answer.empty()) {
            io.err << "no answer: " << answer.explanation << "\n";
            return kDomainError;
        }
        io.out << answer.answer << "\n";
        return kOk;
    });
}

RunSummary run_batch(const CliConfig& config, const RunPaths& paths, ModelBackend& backend, Streams io) {
    config.validate();
    const Dataset ds = load_dataset(paths.dataset, config.adapter, config.dataset);
    for (const auto& d : ds.diagnostics) io.err << paths.dataset.string() << ":" << d.line << ": " << d.message << "\n";

    const fs::path traces = paths.traces.value_or(fs::path(paths.predictions.string() + ".traces"));
    const fs::path checkpoint = paths.checkpoint.value_or(fs::path(paths.predictions.string() + ".checkpoint"));
    const bool resume = fs::exists(checkpoint);
    const std::set<Key> done = resume ? read_checkpoint(checkpoint) : std::set<Key>{};
    if (resume) compact_for_resume(checkpoint, paths.predictions, done);

    RunSummary summary;
    summary.items = ds.records.size();
    std::vector<std::pair<const EvalRecord*, int>> tasks;
    for (const auto& r : ds.records)
        for (int run = 0; run < config.pipeline.num_runs; ++run) {
            if (done.count({r.id, run})) ++summary.skipped;
            else tasks.emplace_back(&r, run);
        }
    summary.scheduled = tasks.size();

    fs::create_directories(traces);
    std::ofstream predictions = open_out(paths.predictions, resume);
    std::ofstream progress = open_out(checkpoint, resume);

    std::mutex mutex;
    std::atomic<std::size_t> next{0};
    std::optional<Error> fatal;
    const auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& [record, run] = tasks[i];
            const PipelineInput input{record->id, record->question, record->context, std::nullopt, std::nullopt};
            PipelineTrace trace;
            bool failed = false;
            try {
                trace = run_pipeline(input, backend, config.pipeline, run);
            } catch (const PipelineFailure& f) {
                trace = f.trace();
                failed = true;
            } catch (const Error& e) {
                // Bad input for this item; record it like a failed run.
                trace.item_id = record->id;
                trace.run = run;
                trace.question = record->question;
                trace.context = record->context;
                trace.variant = config.pipeline.variant();
                trace.status = TraceStatus::failed;
                trace.error = e.what();
                failed = true;
            }
            const std::string trace_text = to_json(trace).dump(2) + "\n";

            std::lock_guard lock(mutex);
            if (fatal) return;
            try {
                std::ofstream t = open_out(traces / trace_name(record->id, run), false);
                t << trace_text;
                if (!t) throw Error(Errc::io, "cannot write trace for " + record->id);
                summary.backend_calls += trace.backend_calls;
                if (failed) {
                    ++summary.failed;
                    io.err << "failed: " << record->id << " run " << run << ": " << trace.error.value_or("") << "\n";
                } else {
                    if (trace.status == TraceStatus::extraction_error) ++summary.extraction_errors;
                    predictions << to_json(Prediction{record->id, trace.final_answer, run}).dump() << "\n";
                    predictions.flush();
                    if (!predictions) throw Error(Errc::io, "cannot write " + paths.predictions.string());
                    ++summary.written;
                }
                // Failed pairs are checkpointed too so a rerun does not hammer a dead item.
                progress << nlohmann::json{{"id", record->id}, {"run", run}}.dump() << "\n";
                progress.flush();
                if (!progress) throw Error(Errc::io, "cannot write " + checkpoint.string());
            } catch (const Error& e) {
                fatal = e;
            }
        }
    };

    const int n = std::max(1, std::min<int>(config.parallelism, static_cast<int>(tasks.size())));
    {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    }
    if (fatal) throw *fatal;
    return summary;
}

int cmd_run(const CliConfig& config, const RunPaths& paths, Streams io) {
    return guarded(io, [&] {
        config.validate();
        auto backend = backend_for(config);
        const RunSummary s = run_batch(config, paths, *backend, io);
        print_summary(s, io.out);
        return s.failed == 0 ? kOk : exit_code_for(Error(Errc::transport, ""));
    });
}

int cmd_eval(const CliConfig& config, const EvalPaths& paths, Streams io, std::string_view label) {
    return guarded(io, [&] {
        const ScoreReport report = score_files(config, paths.dataset, paths.predictions, io);
        io.out << render_score_table({{std::string(label), report}});
        if (paths.json_out) {
            nlohmann::json j = to_json(report);
            j["label"] = label;
            write_json_file(*paths.json_out, j);
        }
        return kOk;
    });
}

int cmd_ablate(const CliConfig& config, const AblatePaths& paths, Streams io) {
    return guarded(io, [&] {
        config.validate();
        std::vector<std::pair<std::string, ScoreReport>> rows;
        nlohmann::json variants = nlohmann::json::array();
        std::size_t failures = 0;
        for (Variant v : kAblationOrder) {
            CliConfig c = config;
            c.pipeline = PipelineConfig::for_variant(v, config.pipeline);
            auto backend = backend_for(c);
            const fs::path dir = paths.out_dir / to_string(v);
            const RunPaths rp{paths.dataset, dir / "predictions.jsonl", dir / "traces", dir / "checkpoint.jsonl"};
            const RunSummary s = run_batch(c, rp, *backend, io);
            failures += s.failed;
            io.err << variant_label(v) << ": ";
            print_summary(s, io.err);
            const ScoreReport report = score_files(c, paths.dataset, rp.predictions, Streams{io.out, io.err});
            variants.push_back({{"variant", to_string(v)},
                                {"label", variant_label(v)},
                                {"backend_calls", s.backend_calls},
                                {"failed", s.failed},
                                {"report", to_json(report)}});
            rows.emplace_back(variant_label(v), report);
        }
        io.out << render_score_table(rows, "Variant");
        if (paths.json_out) write_json_file(*paths.json_out, {{"variants", variants}});
        return failures == 0 ? kOk : kIoError;
    });
}

} // namespace symtime::cli
