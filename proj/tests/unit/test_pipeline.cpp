#include "support.hpp"

#include "symtime/audit.hpp"
#include "symtime/pipeline.hpp"
#include "symtime/symbolic_qa.hpp"
#include "symtime/temporal.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace symtime;

namespace {

const char* kQuestion = "Where did Jaroslav Pelikan work before Concordia Seminary?";
const char* kContext = "Jaroslav Pelikan taught at Valparaiso University from January 1946 to January 1949. "
                       "In January 1949 he joined Concordia Seminary, where he stayed until January 1953.";

PipelineInput pelikan_input() { return PipelineInput{"pelikan", kQuestion, kContext, std::nullopt, std::nullopt}; }

PipelineConfig quick(Variant v = Variant::full, int max_reflections = 2) {
    PipelineConfig c;
    c.max_reflections = max_reflections;
    c = PipelineConfig::for_variant(v, c);
    c.retry.initial_backoff = std::chrono::milliseconds(0);
    c.num_runs = 1;
    return c;
}

MockBackend mock(const std::string& name) { return MockBackend::from_file(testing::fixtures_dir() / name); }

std::vector<Stage> stage_list(const PipelineTrace& t) {
    std::vector<Stage> out;
    for (const auto& s : t.stages) out.push_back(s.block.stage);
    return out;
}

using S = Stage;

} // namespace

// ---------------------------------------------------------------------------
// prompts

TEST_CASE("build_stage_prompt embeds the state verbatim", "[prompt]") {
    PipelineTrace state;
    state.question = kQuestion;
    state.context = kContext;
    const auto config = quick();

    SECTION("stage 1 names the configured format") {
        auto dict = config;
        dict.format = SymbolicFormat::dict;
        const auto req = build_stage_prompt(Stage::representation, state, dict);
        CHECK(req.user_prompt.find("dictionary format") != std::string::npos);
        CHECK(req.user_prompt.find("<representation>") != std::string::npos);
        CHECK(req.temperature == 0.1);
    }
    SECTION("stage 2 carries both facts") {
        state.facts = testing::pelikan_facts();
        TraceStage rep;
        rep.block.stage = Stage::representation;
        state.stages.push_back(rep);
        const auto req = build_stage_prompt(Stage::inference, state, config);
        for (const auto& f : state.facts) CHECK(req.user_prompt.find(serialize_fact(f)) != std::string::npos);
        CHECK(req.user_prompt.find("<inference>") != std::string::npos);
    }
    SECTION("reflection carries the failed report") {
        state.facts = testing::pelikan_facts();
        TraceStage rep;
        rep.block.stage = Stage::representation;
        TraceStage inf;
        inf.block = {Stage::inference, "works_for(Jaroslav Pelikan, Yale, 1946, 1949)", 1, {}};
        TraceStage cc;
        cc.block.stage = Stage::consistency_check;
        const std::vector<AnswerCandidate> cands = {{"works_for", "Jaroslav Pelikan", "Yale", std::nullopt}};
        cc.report = audit(state.facts, cands, TemporalQuery{});
        state.stages = {rep, inf, cc};
        const auto req = build_stage_prompt(Stage::reflection, state, config);
        CHECK(req.user_prompt.find(render_report(*cc.report)) != std::string::npos);
        CHECK(req.user_prompt.find("Yale") != std::string::npos);
        CHECK(req.round == 1);
    }
    SECTION("out of order calls are sequencing errors") {
        for (Stage s : {Stage::inference, Stage::consistency_check, Stage::reflection, Stage::answer}) {
            try {
                build_stage_prompt(s, state, config);
                FAIL("expected a sequencing error");
            } catch (const Error& e) {
                CHECK(e.code() == Errc::sequencing);
            }
        }
        CHECK_THROWS_AS(build_stage_prompt(Stage::representation, state, quick(Variant::disable_symbolic)), Error);
        CHECK_THROWS_AS(build_stage_prompt(Stage::representation, state, quick(Variant::symbolic_only)), Error);
    }
}

// ---------------------------------------------------------------------------
// candidates

TEST_CASE("extract_candidates examples", "[candidates]") {
    const auto facts = testing::pelikan_facts();
    SECTION("quoted predicate") {
        const auto c = extract_candidates("so works_for(Jaroslav Pelikan, Valparaiso University, 1946-01, 1949-01).",
                                          facts);
        REQUIRE(c.size() == 1);
        CHECK(c[0].relation == "works_for");
        CHECK(c[0].subject == "Jaroslav Pelikan");
        CHECK(c[0].object == "Valparaiso University");
    }
    SECTION("plain mention inherits relation and subject") {
        const auto c = extract_candidates("He was at valparaiso  university then.", facts);
        REQUIRE(c.size() == 1);
        CHECK(c[0] == AnswerCandidate{"works_for", "Jaroslav Pelikan", "Valparaiso University", std::nullopt});
    }
    SECTION("empty body") { CHECK(extract_candidates("", facts).empty()); }
    SECTION("partial words do not count") { CHECK(extract_candidates("Valparaiso Universityville", facts).empty()); }
    SECTION("duplicates collapse") {
        CHECK(extract_candidates("Concordia Seminary, then Concordia Seminary", facts).size() == 1);
    }
}

TEST_CASE("read_verdict", "[candidates]") {
    CHECK(read_verdict("Consistent.") == "consistent");
    CHECK(read_verdict("This is INCONSISTENT with fact 2") == "inconsistent");
    CHECK(read_verdict("The answer is not supported") == "inconsistent");
    CHECK(read_verdict("hmm") == "unknown");
}

// ---------------------------------------------------------------------------
// runs

TEST_CASE("happy path trace", "[pipeline]") {
    auto backend = mock("mock_pelikan.jsonl");
    const auto t = run_pipeline(pelikan_input(), backend, quick());
    CHECK(stage_list(t) == std::vector<Stage>{S::representation, S::inference, S::consistency_check, S::answer});
    CHECK(t.reflection_count == 0);
    CHECK(t.final_answer == "Valparaiso University");
    CHECK(t.answer_supported == true);
    CHECK(t.status == TraceStatus::ok);
    CHECK(t.facts == parse_fact_block(testing::read_file(testing::fixtures_dir() / "pelikan.facts")).facts);
    CHECK(t.backend_calls == 4);
    CHECK(backend.calls() == 4);
    REQUIRE(t.last(Stage::consistency_check)->report);
    CHECK(t.last(Stage::consistency_check)->report->consistent());
    for (std::size_t i = 0; i < t.stages.size(); ++i) CHECK(t.stages[i].block.index == i);
}

TEST_CASE("contradiction triggers reflection and a revised answer", "[pipeline]") {
    SECTION("full") {
        auto backend = mock("mock_contradiction.jsonl");
        const auto t = run_pipeline(pelikan_input(), backend, quick());
        CHECK(stage_list(t) == std::vector<Stage>{S::representation, S::inference, S::consistency_check, S::reflection,
                                                  S::consistency_check, S::answer});
        CHECK(t.reflection_count == 1);
        CHECK(t.final_answer == "Valparaiso University");
        CHECK(t.answer_supported == true);
        CHECK(t.stages[3].reflection_path == std::string("inference"));
        CHECK_FALSE(t.stages[2].report->consistent());
        CHECK(t.stages[4].report->consistent());
        // The model's own check said consistent; the harness report did not.
        CHECK(t.stages[2].model_verdict == std::string("consistent"));
    }
    SECTION("without reflection") {
        auto backend = mock("mock_contradiction.jsonl");
        const auto t = run_pipeline(pelikan_input(), backend, quick(Variant::disable_reflection));
        CHECK(t.count(Stage::reflection) == 0);
        CHECK(t.final_answer == "Yale University");
        CHECK(t.answer_supported == false);
    }
}

TEST_CASE("reflection can revise the facts", "[pipeline]") {
    auto backend = mock("mock_reflection_facts.jsonl");
    const auto t = run_pipeline(pelikan_input(), backend, quick());
    REQUIRE(t.reflection_count == 1);
    CHECK(t.stages[3].reflection_path == std::string("facts"));
    CHECK(t.stages[2].report->count(ViolationKind::inverted_interval) == 1);
    CHECK(t.stages[4].report->consistent());
    const auto expected = testing::pelikan_facts();
    REQUIRE(t.facts.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(equivalent(t.facts[i], expected[i]));
}

TEST_CASE("adversarial mock exhausts exactly the reflection budget", "[pipeline]") {
    for (int max : {1, 2, 3, 5}) {
        auto backend = mock("mock_adversarial.jsonl");
        const auto t = run_pipeline(pelikan_input(), backend, quick(Variant::full, max));
        CHECK(t.reflection_count == max);
        CHECK(t.count(Stage::reflection) == static_cast<std::size_t>(max));
        CHECK(t.count(Stage::consistency_check) == static_cast<std::size_t>(max + 1));
        CHECK(t.answer_supported == false);
    }
}

TEST_CASE("ablation variants produce their stage structures", "[pipeline][ablation]") {
    const auto run = [](Variant v, const char* script) {
        auto backend = mock(script);
        auto t = run_pipeline(pelikan_input(), backend, quick(v));
        CHECK(t.backend_calls == backend.calls());
        return t;
    };
    const auto full = run(Variant::full, "mock_contradiction.jsonl");
    CHECK(stage_list(full).front() == S::representation);
    CHECK(full.count(Stage::reflection) == 1);

    const auto no_symbol = run(Variant::disable_symbolic, "mock_adversarial.jsonl");
    CHECK(no_symbol.count(Stage::representation) == 0);
    CHECK(no_symbol.stages.front().block.stage == S::inference);
    CHECK(no_symbol.facts.empty());
    CHECK(no_symbol.count(Stage::reflection) == 2);
    for (const auto& r : no_symbol.requests)
        if (r.stage != Stage::answer) CHECK(r.user_prompt.find(kContext) != std::string::npos);
    // Reflection is driven by the model's own verdict, quoted in the prompt.
    CHECK(no_symbol.requests[2].user_prompt.find("inconsistent") != std::string::npos);

    const auto no_check = run(Variant::disable_consistency, "mock_contradiction.jsonl");
    CHECK(stage_list(no_check) == std::vector<Stage>{S::representation, S::inference, S::answer});

    const auto no_reflection = run(Variant::disable_reflection, "mock_contradiction.jsonl");
    CHECK(stage_list(no_reflection) ==
          std::vector<Stage>{S::representation, S::inference, S::consistency_check, S::answer});

    auto backend = mock("mock_pelikan.jsonl");
    PipelineInput input = pelikan_input();
    input.context = testing::read_file(testing::fixtures_dir() / "pelikan.facts");
    const auto symbolic = run_pipeline(input, backend, quick(Variant::symbolic_only));
    CHECK(backend.calls() == 0);
    CHECK(symbolic.requests.empty());
    CHECK(stage_list(symbolic) == std::vector<Stage>{S::representation, S::answer});
    CHECK(symbolic.final_answer == "Valparaiso University");
}

TEST_CASE("mock runs are byte-identical", "[pipeline][determinism]") {
    for (const char* script : {"mock_pelikan.jsonl", "mock_contradiction.jsonl", "mock_adversarial.jsonl"}) {
        auto a = mock(script);
        auto b = mock(script);
        const auto ta = to_json(run_pipeline(pelikan_input(), a, quick())).dump();
        const auto tb = to_json(run_pipeline(pelikan_input(), b, quick())).dump();
        CHECK(ta == tb);
    }
}

TEST_CASE("every reflection prompt quotes its triggering report", "[pipeline][property]") {
    for (int max : {1, 2, 4}) {
        auto backend = mock("mock_adversarial.jsonl");
        const auto t = run_pipeline(pelikan_input(), backend, quick(Variant::full, max));
        std::size_t reflections = 0;
        for (std::size_t i = 0; i < t.requests.size(); ++i) {
            if (t.requests[i].stage != Stage::reflection) continue;
            ++reflections;
            // The stage recorded just before this request is the failed check.
            const TraceStage* cc = nullptr;
            for (const auto& s : t.stages)
                if (s.block.stage == Stage::consistency_check && s.round == t.requests[i].round - 1) cc = &s;
            REQUIRE(cc);
            REQUIRE(cc->report);
            CHECK(t.requests[i].user_prompt.find(render_report(*cc->report)) != std::string::npos);
        }
        CHECK(reflections == static_cast<std::size_t>(max));
    }
}

TEST_CASE("randomized adversarial scripts respect ordering and the reflection bound", "[pipeline][property]") {
    std::mt19937_64 rng(8);
    const std::vector<std::string> inferences = {
        "works_for(Jaroslav Pelikan, Yale University, 1946, 1949)", "Valparaiso University",
        "holds(works_for, Someone Else, Concordia Seminary, 1949, 1953)", "nothing useful", ""};
    const std::vector<std::string> checks = {"consistent", "inconsistent", "unclear", ""};
    std::uniform_int_distribution<std::size_t> pi(0, inferences.size() - 1), pc(0, checks.size() - 1);
    std::uniform_int_distribution<int> pmax(0, 4), pvariant(0, 4), tagged(0, 3);
    for (int n = 0; n < 200; ++n) {
        std::vector<MockBackend::Entry> entries;
        entries.push_back({Stage::representation, {}, {}, 0,
                           "<representation>works_for(Jaroslav Pelikan, Valparaiso University, 1946-01, 1949-01)\n"
                           "works_for(Jaroslav Pelikan, Concordia Seminary, 1949-01, 1953-01)</representation>",
                           false, 0});
        entries.push_back({Stage::inference, {}, {}, 0, "<inference>" + inferences[pi(rng)] + "</inference>", false, 0});
        for (int round = 0; round < 6; ++round) {
            entries.push_back({Stage::consistency_check, {}, {}, round,
                               "<consistency_check>" + checks[pc(rng)] + "</consistency_check>", false, 0});
            const std::string body = inferences[pi(rng)];
            entries.push_back({Stage::reflection, {}, {}, round,
                               tagged(rng) ? "<reflection>" + body + "</reflection>" : body, false, 0});
        }
        entries.push_back({Stage::answer, {}, {}, 0, "<answer>" + inferences[pi(rng)] + "</answer>", false, 0});
        MockBackend backend(entries);
        const int max = pmax(rng);
        auto variant = static_cast<Variant>(pvariant(rng));
        if (variant == Variant::symbolic_only) variant = Variant::full;
        auto config = quick(variant, max == 0 ? 1 : max);
        if (max == 0) config = quick(Variant::disable_reflection);
        const auto t = run_pipeline(pelikan_input(), backend, config);

        CHECK(t.reflection_count <= config.max_reflections);
        CHECK(t.count(Stage::reflection) == static_cast<std::size_t>(t.reflection_count));
        if (config.disable_consistency) {
            CHECK(t.count(Stage::consistency_check) == 0);
            CHECK(t.count(Stage::reflection) == 0);
        }
        // Allowed successors in the staged protocol.
        for (std::size_t i = 0; i < t.stages.size(); ++i) {
            CHECK(t.stages[i].block.index == i);
            const Stage cur = t.stages[i].block.stage;
            if (cur == Stage::reflection) {
                REQUIRE(i > 0);
                CHECK(t.stages[i - 1].block.stage == Stage::consistency_check);
            }
            if (i > 0) {
                const Stage prev = t.stages[i - 1].block.stage;
                CHECK(prev != Stage::answer);
                if (cur == Stage::inference) CHECK(prev == Stage::representation);
                if (cur == Stage::consistency_check) CHECK((prev == Stage::inference || prev == Stage::reflection));
            }
        }
        CHECK(t.stages.back().block.stage == Stage::answer);
    }
}

TEST_CASE("transport failures are retried then recorded", "[pipeline][retry]") {
    SECTION("transient failures recover") {
        auto backend = mock("mock_pelikan.jsonl");
        std::vector<MockBackend::Entry> entries = backend.entries();
        entries[1].fail_attempts = 2;
        MockBackend flaky(entries);
        const auto t = run_pipeline(pelikan_input(), flaky, quick());
        CHECK(t.final_answer == "Valparaiso University");
        CHECK(t.backend_calls == 6);
        CHECK(t.requests.size() == 4);
    }
    SECTION("persistent failure throws with the partial trace") {
        MockBackend down({{Stage::representation, {}, {}, 0, "", true, 0}});
        try {
            run_pipeline(pelikan_input(), down, quick());
            FAIL("expected a pipeline failure");
        } catch (const PipelineFailure& f) {
            CHECK(f.code() == Errc::pipeline);
            CHECK(f.trace().status == TraceStatus::failed);
            CHECK(f.trace().backend_calls == 3);
            CHECK(down.calls() == 3);
        }
    }
    SECTION("backoff doubles from the initial delay") {
        MockBackend down({{Stage::representation, {}, {}, 0, "", true, 0}});
        auto config = quick();
        config.retry.initial_backoff = std::chrono::milliseconds(20);
        const auto start = std::chrono::steady_clock::now();
        CHECK_THROWS_AS(run_pipeline(pelikan_input(), down, config), PipelineFailure);
        // 20 ms + 40 ms between three attempts.
        CHECK(std::chrono::steady_clock::now() - start >= std::chrono::milliseconds(60));
    }
    SECTION("one failing run among three") {
        auto backend = mock("mock_pelikan.jsonl");
        std::vector<MockBackend::Entry> entries = backend.entries();
        MockBackend::Entry broken = entries[2];
        broken.run = 1;
        broken.always_fail = true;
        entries.push_back(broken);
        MockBackend partial(entries);
        auto config = quick();
        config.num_runs = 3;
        const auto traces = run_with_repeats(pelikan_input(), partial, config);
        REQUIRE(traces.size() == 3);
        CHECK(traces[0].status == TraceStatus::ok);
        CHECK(traces[1].status == TraceStatus::failed);
        CHECK(traces[1].error.has_value());
        CHECK(traces[2].status == TraceStatus::ok);
        CHECK(traces[2].final_answer == "Valparaiso University");
    }
    SECTION("repeats of a deterministic mock are identical") {
        auto backend = mock("mock_pelikan.jsonl");
        auto config = quick();
        config.num_runs = 3;
        const auto traces = run_with_repeats(pelikan_input(), backend, config);
        REQUIRE(traces.size() == 3);
        for (const auto& t : traces) CHECK(t.final_answer == traces[0].final_answer);
        config.num_runs = 1;
        CHECK(run_with_repeats(pelikan_input(), backend, config).size() == 1);
    }
}

TEST_CASE("missing answer is recorded as an extraction error", "[pipeline]") {
    auto backend = mock("mock_pelikan.jsonl");
    std::vector<MockBackend::Entry> entries = backend.entries();
    entries[3].response = "Valparaiso University, I think.";
    MockBackend sloppy(entries);
    const auto t = run_pipeline(pelikan_input(), sloppy, quick());
    CHECK(t.status == TraceStatus::extraction_error);
    CHECK(t.final_answer.empty());
    CHECK(t.error.has_value());
    CHECK(t.count(Stage::answer) == 0);
    CHECK(sloppy.calls() == 3 + 3);
}

TEST_CASE("config invariants", "[config]") {
    PipelineConfig c;
    CHECK_NOTHROW(c.validate());
    c.symbolic_only = true;
    c.disable_consistency = true;
    CHECK_THROWS_AS(c.validate(), Error);
    PipelineConfig d;
    d.disable_reflection = true;
    CHECK_THROWS_AS(d.validate(), Error);
    d.max_reflections = 0;
    CHECK_NOTHROW(d.validate());
    PipelineConfig e;
    e.max_reflections = 0;
    CHECK_THROWS_AS(e.validate(), Error);
    CHECK(PipelineConfig{}.temperature == 0.1);
    CHECK(PipelineConfig{}.num_runs == 3);
    CHECK(PipelineConfig{}.max_reflections == 2);
    for (Variant v : kAblationOrder) {
        CHECK_NOTHROW(PipelineConfig::for_variant(v).validate());
        CHECK(PipelineConfig::for_variant(v).variant() == v);
        CHECK(parse_variant(to_string(v)) == v);
    }
    PipelineInput empty = pelikan_input();
    empty.question = "  ";
    auto backend = mock("mock_pelikan.jsonl");
    CHECK_THROWS_AS(run_pipeline(empty, backend, quick()), Error);
}

TEST_CASE("mock script parsing", "[mock]") {
    CHECK_THROWS_AS(MockBackend::from_text("{\"stage\": \"bogus\", \"response\": \"x\"}\n"), ParseError);
    CHECK_THROWS_AS(MockBackend::from_text("not json\n"), ParseError);
    CHECK_THROWS_AS(MockBackend::from_text("{\"stage\": \"answer\"}\n"), ParseError);
    CHECK_THROWS_AS(MockBackend::from_file("/nonexistent/script.jsonl"), Error);
    auto m = MockBackend::from_text("{\"stage\": \"answer\", \"response\": \"a\"}\n"
                                    "{\"stage\": \"answer\", \"item\": \"q2\", \"response\": \"b\"}\n"
                                    "{\"stage\": \"answer\", \"round\": 2, \"response\": \"c\"}\n");
    BackendRequest r;
    r.stage = Stage::answer;
    CHECK(m.complete(r) == "a");
    r.item_id = "q2";
    CHECK(m.complete(r) == "b");
    r.item_id = "q3";
    r.round = 3;
    CHECK(m.complete(r) == "c");
    r.stage = Stage::inference;
    CHECK_THROWS_AS(m.complete(r), Error);
    CHECK(m.calls() == 4);
}
