#include "symtime/pipeline.hpp"

#include "symtime/audit.hpp"
#include "symtime/symbolic_qa.hpp"
#include "symtime/temporal.hpp"

#include <algorithm>
#include <thread>

namespace symtime {

namespace {

const char* format_description(SymbolicFormat format) {
    switch (format) {
    case SymbolicFormat::fol:
        return "first-order logic format, one ground atom per line:\n"
               "holds(relation, subject, object, start, end)\n"
               "e.g. holds(works_for, Jaroslav Pelikan, Valparaiso University, 1946, 1949)";
    case SymbolicFormat::dict:
        return "dictionary format, one record per line:\n"
               "{relation: ..., subject: ..., object: ..., start: ..., end: ...}\n"
               "e.g. {relation: works_for, subject: Jaroslav Pelikan, object: Valparaiso University, start: 1946, "
               "end: 1949}";
    case SymbolicFormat::quadruple: break;
    }
    return "quadruple format, one predicate per line:\n"
           "relation(subject, object, start, end)\n"
           "e.g. works_for(Jaroslav Pelikan, Valparaiso University, 1946, 1949)";
}

[[noreturn]] void out_of_order(Stage stage, const std::string& why) {
    throw Error(Errc::sequencing, std::string("cannot build the ") + tag_name(stage) + " prompt: " + why);
}

const TraceStage* latest_reasoning(const PipelineTrace& state) {
    for (auto it = state.stages.rbegin(); it != state.stages.rend(); ++it)
        if (it->block.stage == Stage::inference || it->block.stage == Stage::reflection) return &*it;
    return nullptr;
}

bool check_failed(const TraceStage& cc, const PipelineConfig& config) {
    if (config.disable_symbolic) return cc.model_verdict == std::string("inconsistent");
    return cc.report && !cc.report->consistent();
}

std::string facts_section(const PipelineTrace& state, const PipelineConfig& config) {
    if (state.facts.empty()) return "Facts:\n(none)\n";
    return "Facts:\n" + serialize_facts(state.facts, config.format);
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

std::string strip_blocks(std::string_view body, Stage stage) {
    const TaggedOutput nested = scan_tagged_blocks(body);
    std::string out(body);
    for (auto it = nested.blocks.rbegin(); it != nested.blocks.rend(); ++it)
        if (it->stage == stage)
            for (std::size_t k = it->span.offset; k < it->span.offset + it->span.length; ++k) out[k] = ' ';
    return out;
}

} // namespace

const char* to_string(Variant variant) {
    switch (variant) {
    case Variant::full: return "full";
    case Variant::symbolic_only: return "symbolic_only";
    case Variant::disable_symbolic: return "disable_symbolic";
    case Variant::disable_consistency: return "disable_consistency";
    case Variant::disable_reflection: return "disable_reflection";
    }
    return "full";
}

std::optional<Variant> parse_variant(std::string_view text) {
    for (Variant v : {Variant::full, Variant::symbolic_only, Variant::disable_symbolic, Variant::disable_consistency,
                      Variant::disable_reflection})
        if (text == to_string(v)) return v;
    return std::nullopt;
}

const char* variant_label(Variant variant) {
    switch (variant) {
    case Variant::full: return "Full";
    case Variant::symbolic_only: return "Symbolic only";
    case Variant::disable_symbolic: return "w/o Symbol";
    case Variant::disable_consistency: return "w/o Consistency Check";
    case Variant::disable_reflection: return "w/o Abductive Reflection";
    }
    return "Full";
}

const char* to_string(TraceStatus status) {
    switch (status) {
    case TraceStatus::ok: return "ok";
    case TraceStatus::extraction_error: return "extraction_error";
    case TraceStatus::failed: return "failed";
    }
    return "ok";
}

void PipelineConfig::validate() const {
    if (symbolic_only && (disable_symbolic || disable_consistency || disable_reflection))
        throw Error(Errc::invalid_argument, "symbolic_only cannot be combined with other ablation flags");
    if (max_reflections < 0) throw Error(Errc::invalid_argument, "max_reflections must be non-negative");
    if ((max_reflections == 0) != disable_reflection)
        throw Error(Errc::invalid_argument, "max_reflections must be 0 exactly when disable_reflection is set");
    if (temperature < 0) throw Error(Errc::invalid_argument, "temperature must be non-negative");
    if (num_runs < 1) throw Error(Errc::invalid_argument, "num_runs must be at least 1");
    if (max_tokens < 1) throw Error(Errc::invalid_argument, "max_tokens must be positive");
    if (retry.attempts < 1) throw Error(Errc::invalid_argument, "retry attempts must be at least 1");
    if (retry.initial_backoff.count() < 0) throw Error(Errc::invalid_argument, "retry backoff must be non-negative");
}

PipelineConfig PipelineConfig::for_variant(Variant variant, PipelineConfig base) {
    base.disable_symbolic = variant == Variant::disable_symbolic;
    base.disable_consistency = variant == Variant::disable_consistency;
    base.disable_reflection = variant == Variant::disable_reflection;
    base.symbolic_only = variant == Variant::symbolic_only;
    if (base.disable_reflection)
        base.max_reflections = 0;
    else if (base.max_reflections == 0)
        base.max_reflections = 2;
    return base;
}

PipelineConfig PipelineConfig::for_variant(Variant variant) { return for_variant(variant, PipelineConfig{}); }

Variant PipelineConfig::variant() const {
    if (symbolic_only) return Variant::symbolic_only;
    if (disable_symbolic) return Variant::disable_symbolic;
    if (disable_consistency) return Variant::disable_consistency;
    if (disable_reflection) return Variant::disable_reflection;
    return Variant::full;
}

const TraceStage* PipelineTrace::last(Stage stage) const {
    for (auto it = stages.rbegin(); it != stages.rend(); ++it)
        if (it->block.stage == stage) return &*it;
    return nullptr;
}

std::size_t PipelineTrace::count(Stage stage) const {
    return static_cast<std::size_t>(
        std::count_if(stages.begin(), stages.end(), [stage](const TraceStage& s) { return s.block.stage == stage; }));
}

const std::string& system_prompt() {
    static const std::string prompt =
        "You answer questions about when things happened by reasoning over time-stamped facts in stages: "
        "symbolic representation, inference, consistency check, reflection and answer. "
        "Each message asks for exactly one stage. Reply with that stage only, wrapped in its tag, "
        "for example <inference>...</inference>. Treat every interval as closed: a fact holds from the "
        "first day of its start date to the last day of its end date.";
    return prompt;
}

BackendRequest build_stage_prompt(Stage stage, const PipelineTrace& state, const PipelineConfig& config) {
    if (config.symbolic_only) out_of_order(stage, "the symbolic-only variant sends no prompts");
    BackendRequest req;
    req.system_prompt = system_prompt();
    req.temperature = config.temperature;
    req.max_tokens = config.max_tokens;
    req.stage = stage;
    req.round = state.reflection_count;
    req.run = state.run;
    req.item_id = state.item_id;

    const std::string question = "Question:\n" + state.question + "\n";
    std::string p;
    switch (stage) {
    case Stage::representation: {
        if (config.disable_symbolic) out_of_order(stage, "symbolic representation is disabled");
        if (!state.stages.empty()) out_of_order(stage, "it must be the first stage");
        p = "Stage 1: symbolic representation.\n"
            "Extract every temporal fact in the context in the ";
        p += format_description(config.format);
        p += "\nWrite dates as YYYY, YYYY-MM or YYYY-MM-DD. Use 'unknown' for a missing start and 'present' "
             "for an ongoing end. Double-quote names that contain commas or parentheses.\n"
             "Wrap the facts in <representation></representation> tags.\n\n"
             "Context:\n" +
             state.context + "\n\n" + question;
        break;
    }
    case Stage::inference: {
        if (!config.disable_symbolic && !state.last(Stage::representation))
            out_of_order(stage, "no representation stage yet");
        if (state.last(Stage::inference)) out_of_order(stage, "inference already ran");
        if (config.disable_symbolic) {
            p = "Stage 2: inference.\n"
                "Reason step by step in natural language over the context to answer the question. "
                "Pay attention to the dates of each event and to who the question is about.\n"
                "Wrap your reasoning in <inference></inference> tags.\n\n"
                "Context:\n" +
                state.context + "\n\n" + question;
        } else {
            p = "Stage 2: neural-symbolic inference.\n"
                "Reason over the facts below to answer the question. A fact is relevant when its interval "
                "overlaps the time the question asks about, and only facts about the questioned subject count. "
                "For questions about what came before or after an event, use the fact whose end or start date "
                "matches that event.\n"
                "Quote each fact your conclusion relies on exactly as written.\n"
                "Wrap your reasoning in <inference></inference> tags.\n\n" +
                facts_section(state, config) + "\n" + question;
        }
        break;
    }
    case Stage::consistency_check: {
        if (config.disable_consistency) out_of_order(stage, "consistency checking is disabled");
        if (!state.last(Stage::inference)) out_of_order(stage, "no inference stage yet");
        const Stage prev = state.stages.back().block.stage;
        if (prev != Stage::inference && prev != Stage::reflection)
            out_of_order(stage, "it must follow inference or reflection");
        p = "Stage 3: consistency check.\n"
            "Verify that every conclusion of the reasoning below is entailed by at least one fact and that its "
            "dates agree with that fact's interval. Start with the word 'consistent' or 'inconsistent', then "
            "give the reasons.\n"
            "Wrap the check in <consistency_check></consistency_check> tags.\n\n";
        p += config.disable_symbolic ? "Context:\n" + state.context + "\n" : facts_section(state, config);
        p += "\nReasoning:\n" + latest_reasoning(state)->block.body + "\n\n" + question;
        break;
    }
    case Stage::reflection: {
        if (config.disable_reflection) out_of_order(stage, "reflection is disabled");
        if (state.stages.empty() || state.stages.back().block.stage != Stage::consistency_check)
            out_of_order(stage, "it must follow a consistency check");
        const TraceStage& cc = state.stages.back();
        if (!check_failed(cc, config)) out_of_order(stage, "the last consistency check did not fail");
        if (state.reflection_count >= config.max_reflections) out_of_order(stage, "no reflections remain");
        req.round = state.reflection_count + 1;
        p = "Stage 4: abductive reflection.\n";
        if (cc.report) {
            p += "The consistency check failed. Verification report:\n" + render_report(*cc.report);
            const auto repairs = propose_repairs(*cc.report, state.facts);
            if (!repairs.empty()) p += "Possible revisions:\n" + render_repairs(repairs);
        } else {
            p += "The consistency check failed:\n" + cc.block.body + "\n";
        }
        p += "\nPropose the smallest plausible revision: a misread date, a mislabelled subject, or an omitted "
             "fact. If the facts must change, restate the full corrected fact list inside "
             "<representation></representation> tags within your reflection. Then state the revised "
             "conclusion, quoting the facts it relies on.\n"
             "Wrap the revision in <reflection></reflection> tags.\n\n";
        p += config.disable_symbolic ? "Context:\n" + state.context + "\n" : facts_section(state, config);
        p += "\nPrevious reasoning:\n" + latest_reasoning(state)->block.body + "\n\n" + question;
        break;
    }
    case Stage::answer: {
        if (!state.last(Stage::inference)) out_of_order(stage, "no inference stage yet");
        p = "Stage 5: answer.\n"
            "Give the concise final answer to the question, only the entity, date or value, with no "
            "explanation, inside <answer></answer> tags.\n\n" +
            question + "\nReasoning:\n" + latest_reasoning(state)->block.body + "\n";
        if (const TraceStage* cc = state.last(Stage::consistency_check); cc && cc->report)
            p += "\nVerification status: " + std::string(to_string(cc->report->status)) + "\n";
        break;
    }
    }
    req.user_prompt = std::move(p);
    return req;
}

std::vector<AnswerCandidate> extract_candidates(std::string_view body, const FactSet& facts) {
    std::vector<AnswerCandidate> out;
    const auto add = [&out](AnswerCandidate c) {
        for (const auto& existing : out)
            if (equivalent(existing, c)) return;
        out.push_back(std::move(c));
    };

    std::string masked(body);
    for (const auto& m : scan_predicates(body)) {
        add(m.candidate);
        std::fill_n(masked.begin() + static_cast<std::ptrdiff_t>(m.span.offset), m.span.length, ' ');
    }

    const std::string text = canonical_entity(masked);
    std::vector<std::pair<std::size_t, std::size_t>> mentions; // (position, fact index)
    for (std::size_t i = 0; i < facts.size(); ++i) {
        const auto pos = find_mention(text, canonical_entity(facts[i].object));
        if (pos != std::string_view::npos) mentions.emplace_back(pos, i);
    }
    std::sort(mentions.begin(), mentions.end());
    for (const auto& [pos, i] : mentions) add(AnswerCandidate::from_fact(facts[i], false));
    return out;
}

std::string read_verdict(std::string_view consistency_text) {
    const std::string t = ascii_lower(consistency_text);
    for (const char* bad : {"inconsistent", "not consistent", "contradict", "unsupported", "not supported"})
        if (t.find(bad) != std::string::npos) return "inconsistent";
    if (t.find("consistent") != std::string::npos) return "consistent";
    return "unknown";
}

namespace {

class Runner {
public:
    Runner(const PipelineInput& input, ModelBackend& backend, const PipelineConfig& config, int run)
        : input_(input), backend_(backend), config_(config) {
        trace_.item_id = input.item_id;
        trace_.run = run;
        trace_.question = input.question;
        trace_.context = input.context;
        trace_.variant = config.variant();
        trace_.query = input.query;
    }

    PipelineTrace run() {
        if (config_.symbolic_only) return run_symbolic();

        if (!config_.disable_symbolic) {
            const std::string body = stage_body(Stage::representation, call(Stage::representation));
            FactBlock block = parse_fact_block(body);
            for (const auto& d : block.diagnostics) trace_.diagnostics.push_back("representation " + d.message);
            trace_.facts = block.facts;
            record(Stage::representation, body).facts = std::move(block.facts);
        }

        const std::string inference = stage_body(Stage::inference, call(Stage::inference));
        std::vector<AnswerCandidate> candidates = extract_candidates(inference, trace_.facts);
        record(Stage::inference, inference).candidates = candidates;

        if (!config_.disable_consistency) {
            const TemporalQuery audit_query = input_.query.value_or(TemporalQuery{});
            for (;;) {
                const std::string check = stage_body(Stage::consistency_check, call(Stage::consistency_check));
                TraceStage& cc = record(Stage::consistency_check, check);
                cc.model_verdict = read_verdict(check);
                cc.candidates = candidates;
                if (!config_.disable_symbolic) cc.report = audit(trace_.facts, candidates, audit_query);
                if (!check_failed(cc, config_) || trace_.reflection_count >= config_.max_reflections) break;

                const std::string reflection = stage_body(Stage::reflection, call(Stage::reflection));
                ++trace_.reflection_count;
                TraceStage& rs = record(Stage::reflection, reflection);
                const TaggedOutput nested = scan_tagged_blocks(reflection);
                const StageBlock* restated = nested.last(Stage::representation);
                FactBlock revised;
                if (restated && !config_.disable_symbolic) revised = parse_fact_block(restated->body);
                if (!revised.facts.empty()) {
                    for (const auto& d : revised.diagnostics) trace_.diagnostics.push_back("reflection " + d.message);
                    trace_.facts = revised.facts;
                    rs.facts = std::move(revised.facts);
                    rs.reflection_path = "facts";
                    auto fresh = extract_candidates(strip_blocks(reflection, Stage::representation), trace_.facts);
                    if (!fresh.empty()) candidates = std::move(fresh);
                } else {
                    rs.reflection_path = "inference";
                    candidates = extract_candidates(reflection, trace_.facts);
                }
                rs.candidates = candidates;
            }
        }

        answer_stage();
        return std::move(trace_);
    }

private:
    PipelineTrace run_symbolic() {
        FactSet facts;
        if (input_.facts) {
            facts = *input_.facts;
        } else {
            FactBlock block = parse_fact_block(input_.context);
            for (const auto& d : block.diagnostics) trace_.diagnostics.push_back("context " + d.message);
            facts = std::move(block.facts);
        }
        trace_.facts = facts;
        record(Stage::representation, serialize_facts(facts, config_.format), false).facts = facts;

        const TemporalQuery query = input_.query ? *input_.query : infer_query(input_.question, facts);
        trace_.query = query;
        SymbolicAnswer answer;
        try {
            answer = answer_symbolically(facts, query);
        } catch (const Error& e) {
            if (e.code() != Errc::reference_not_found && e.code() != Errc::invalid_argument) throw;
            trace_.diagnostics.push_back(std::string("symbolic answer: ") + e.what());
        }
        if (!answer.explanation.empty()) trace_.diagnostics.push_back("symbolic answer: " + answer.explanation);
        trace_.final_answer = answer.answer;
        trace_.answer_supported = !answer.answer.empty();
        record(Stage::answer, answer.answer, false);
        return std::move(trace_);
    }

    void answer_stage() {
        for (int attempt = 0; attempt < config_.retry.attempts; ++attempt) {
            const std::string response = call(Stage::answer);
            const TaggedOutput parsed = scan_tagged_blocks(response);
            if (const StageBlock* a = parsed.last(Stage::answer)) {
                for (const auto& d : parsed.diagnostics) trace_.diagnostics.push_back("answer: " + d.message);
                record(Stage::answer, a->body);
                trace_.final_answer = collapse_whitespace(a->body);
                if (!trace_.facts.empty()) {
                    const auto cands = extract_candidates(trace_.final_answer, trace_.facts);
                    trace_.answer_supported = !cands.empty() && verify_answer(trace_.facts, cands).consistent();
                }
                return;
            }
            trace_.diagnostics.push_back("answer: no <answer> block in response (attempt " +
                                         std::to_string(attempt + 1) + ")");
        }
        trace_.status = TraceStatus::extraction_error;
        trace_.error = "missing <answer> block after " + std::to_string(config_.retry.attempts) + " attempts";
    }

    std::string call(Stage stage) {
        BackendRequest req = build_stage_prompt(stage, trace_, config_);
        trace_.requests.push_back(req);
        std::string last_error;
        for (int attempt = 0; attempt < config_.retry.attempts; ++attempt) {
            ++trace_.backend_calls;
            try {
                return backend_.complete(req);
            } catch (const Error& e) {
                last_error = e.what();
                if (e.code() != Errc::transport) fail(std::string(tag_name(stage)) + ": " + last_error);
            }
            if (attempt + 1 < config_.retry.attempts && config_.retry.initial_backoff.count() > 0)
                std::this_thread::sleep_for(config_.retry.initial_backoff * (1LL << attempt));
        }
        fail(std::string(tag_name(stage)) + ": backend unreachable after " + std::to_string(config_.retry.attempts) +
             " attempts: " + last_error);
    }

    [[noreturn]] void fail(const std::string& why) {
        trace_.status = TraceStatus::failed;
        trace_.error = why;
        throw PipelineFailure(why, std::move(trace_));
    }

    std::string stage_body(Stage stage, const std::string& response) {
        const TaggedOutput parsed = scan_tagged_blocks(response);
        for (const auto& d : parsed.diagnostics) trace_.diagnostics.push_back(std::string(tag_name(stage)) + ": " + d.message);
        if (const StageBlock* b = parsed.last(stage)) return b->body;
        trace_.diagnostics.push_back(std::string(tag_name(stage)) + ": no <" + tag_name(stage) +
                                     "> block in response; using the whole response");
        return response;
    }

    TraceStage& record(Stage stage, std::string body, bool from_model = true) {
        TraceStage s;
        s.block = StageBlock{stage, std::move(body), trace_.stages.size(), Span{}};
        s.block.span.length = s.block.body.size();
        s.round = trace_.reflection_count;
        s.from_model = from_model;
        trace_.stages.push_back(std::move(s));
        return trace_.stages.back();
    }

    const PipelineInput& input_;
    ModelBackend& backend_;
    const PipelineConfig& config_;
    PipelineTrace trace_;
};

nlohmann::json to_json(const TemporalQuery& q) {
    nlohmann::json j = {{"kind", to_string(q.kind)}};
    j["subject"] = q.subject ? nlohmann::json(*q.subject) : nlohmann::json(nullptr);
    j["relation"] = q.relation ? nlohmann::json(*q.relation) : nlohmann::json(nullptr);
    j["interval"] = q.interval ? to_json(*q.interval) : nlohmann::json(nullptr);
    j["reference_object"] = q.reference_object ? nlohmann::json(*q.reference_object) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const FactSet& facts) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& f : facts) j.push_back(to_json(f));
    return j;
}

} // namespace

PipelineTrace run_pipeline(const PipelineInput& input, ModelBackend& backend, const PipelineConfig& config, int run) {
    config.validate();
    if (collapse_whitespace(input.question).empty()) throw Error(Errc::invalid_argument, "question must not be empty");
    return Runner(input, backend, config, run).run();
}

std::vector<PipelineTrace> run_with_repeats(const PipelineInput& input, ModelBackend& backend,
                                            const PipelineConfig& config) {
    config.validate();
    std::vector<PipelineTrace> traces;
    traces.reserve(static_cast<std::size_t>(config.num_runs));
    for (int r = 0; r < config.num_runs; ++r) {
        try {
            traces.push_back(run_pipeline(input, backend, config, r));
        } catch (const PipelineFailure& f) {
            traces.push_back(f.trace());
        }
    }
    return traces;
}

nlohmann::json to_json(const PipelineTrace& trace) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : trace.stages) {
        nlohmann::json j = {{"index", s.block.index},
                            {"stage", tag_name(s.block.stage)},
                            {"round", s.round},
                            {"source", s.from_model ? "model" : "harness"},
                            {"body", s.block.body}};
        if (s.facts) j["facts"] = to_json(*s.facts);
        if (!s.candidates.empty()) {
            j["candidates"] = nlohmann::json::array();
            for (const auto& c : s.candidates) j["candidates"].push_back(to_json(c));
        }
        if (s.report) j["report"] = to_json(*s.report);
        if (s.model_verdict) j["model_verdict"] = *s.model_verdict;
        if (s.reflection_path) j["reflection_path"] = *s.reflection_path;
        stages.push_back(std::move(j));
    }
    nlohmann::json requests = nlohmann::json::array();
    for (const auto& r : trace.requests)
        requests.push_back({{"stage", tag_name(r.stage)},
                            {"round", r.round},
                            {"temperature", r.temperature},
                            {"max_tokens", r.max_tokens},
                            {"user_prompt", r.user_prompt}});
    nlohmann::json paths = nlohmann::json::array();
    for (const auto& s : trace.stages)
        if (s.reflection_path) paths.push_back(*s.reflection_path);

    nlohmann::json j = {{"item_id", trace.item_id},
                        {"run", trace.run},
                        {"variant", to_string(trace.variant)},
                        {"question", trace.question},
                        {"context", trace.context},
                        {"system_prompt", trace.requests.empty() ? std::string() : trace.requests.front().system_prompt},
                        {"stages", stages},
                        {"requests", requests},
                        {"backend_calls", trace.backend_calls},
                        {"facts", to_json(trace.facts)},
                        {"reflection_count", trace.reflection_count},
                        {"reflection_paths", paths},
                        {"final_answer", trace.final_answer},
                        {"status", to_string(trace.status)},
                        {"diagnostics", trace.diagnostics}};
    j["query"] = trace.query ? to_json(*trace.query) : nlohmann::json(nullptr);
    j["answer_supported"] = trace.answer_supported ? nlohmann::json(*trace.answer_supported) : nlohmann::json(nullptr);
    j["error"] = trace.error ? nlohmann::json(*trace.error) : nlohmann::json(nullptr);
    return j;
}

} // namespace symtime
