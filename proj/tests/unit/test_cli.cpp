#include "oracles.hpp"
#include "support.hpp"

#include "symtime/cli.hpp"
#include "symtime/error.hpp"

#include <catch_amalgamated.hpp>
#include <json.hpp>

#include <sstream>

using namespace symtime;
namespace fs = std::filesystem;

namespace {

struct Captured {
    std::ostringstream out;
    std::ostringstream err;
    cli::Streams streams() { return {out, err}; }
};

const char* kQuestion = "Where did Jaroslav Pelikan work before Concordia Seminary?";

std::string pelikan_record(const std::string& id) {
    const std::string facts = testing::read_file(testing::fixtures_dir() / "pelikan.facts");
    return nlohmann::json{{"id", id}, {"question", kQuestion}, {"context", facts},
                          {"answers", {"Valparaiso University"}}}
               .dump() +
           "\n";
}

cli::CliConfig mock_config(const std::string& script, int runs = 1) {
    cli::CliConfig c;
    c.mock = testing::fixtures_dir() / script;
    c.pipeline.num_runs = runs;
    c.pipeline.retry.initial_backoff = std::chrono::milliseconds(0);
    return c;
}

std::vector<std::string> lines_of(const fs::path& p) {
    std::vector<std::string> out;
    std::istringstream in(testing::read_file(p));
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

} // namespace

TEST_CASE("cmd_parse", "[cli]") {
    const auto dir = testing::scratch_dir("cli_parse");
    SECTION("valid file") {
        Captured io;
        CHECK(cli::cmd_parse(testing::fixtures_dir() / "pelikan.facts", SymbolicFormat::quadruple, io.streams()) == 0);
        CHECK(io.out.str() == "works_for(Jaroslav Pelikan, Valparaiso University, 1946-01, 1949-01)\n"
                              "works_for(Jaroslav Pelikan, Concordia Seminary, 1949-01, 1953-01)\n");
        CHECK(io.err.str().empty());
    }
    SECTION("one bad line") {
        testing::write_file(dir / "bad.facts", "works_for(A, B, 1990, 1995)\nworks_for(A, C, 1996)\n");
        Captured io;
        CHECK(cli::cmd_parse(dir / "bad.facts", SymbolicFormat::quadruple, io.streams()) == 1);
        CHECK(io.out.str() == "works_for(A, B, 1990, 1995)\n");
        CHECK(io.err.str().find("bad.facts:2:") != std::string::npos);
    }
    SECTION("missing file") {
        Captured io;
        CHECK(cli::cmd_parse(dir / "absent.facts", SymbolicFormat::quadruple, io.streams()) == 2);
    }
    SECTION("dict format") {
        Captured io;
        CHECK(cli::cmd_parse(testing::fixtures_dir() / "pelikan.facts", SymbolicFormat::dict, io.streams()) == 0);
        CHECK(io.out.str().rfind("{relation: works_for", 0) == 0);
    }
}

TEST_CASE("cmd_query", "[cli]") {
    const auto facts = testing::fixtures_dir() / "pelikan.facts";
    const auto run = [&](cli::QueryArgs a, int expected_exit) {
        Captured io;
        CHECK(cli::cmd_query(facts, a, SymbolicFormat::quadruple, io.streams()) == expected_exit);
        return io.out.str();
    };
    cli::QueryArgs before;
    before.kind = "before";
    before.ref = "Concordia Seminary";
    CHECK(run(before, 0) == "Valparaiso University\n");

    cli::QueryArgs range;
    range.from = "1947";
    range.to = "1948";
    CHECK(run(range, 0) == "works_for(Jaroslav Pelikan, Valparaiso University, 1946-01, 1949-01)\n");

    cli::QueryArgs open_end;
    open_end.from = "1949";
    CHECK(run(open_end, 0) == "works_for(Jaroslav Pelikan, Valparaiso University, 1946-01, 1949-01)\n"
                              "works_for(Jaroslav Pelikan, Concordia Seminary, 1949-01, 1953-01)\n");

    cli::QueryArgs no_ref;
    no_ref.kind = "before";
    run(no_ref, 1);

    cli::QueryArgs stray_ref;
    stray_ref.ref = "Concordia Seminary";
    run(stray_ref, 1);

    cli::QueryArgs bad_kind;
    bad_kind.kind = "sideways";
    run(bad_kind, 1);

    cli::QueryArgs inverted;
    inverted.from = "1950";
    inverted.to = "1940";
    run(inverted, 1);

    cli::QueryArgs nothing;
    nothing.from = "1990";
    CHECK(run(nothing, 1).empty());

    cli::QueryArgs last;
    last.kind = "last";
    last.subject = "jaroslav  pelikan";
    CHECK(run(last, 0) == "Concordia Seminary\n");

    cli::QueryArgs unknown_ref = before;
    unknown_ref.ref = "Harvard";
    run(unknown_ref, 1);
}

TEST_CASE("config file and overrides", "[cli][config]") {
    cli::CliConfig c;
    cli::apply_config_text(c, "# comment\n"
                              "endpoint = http://localhost:8000/v1\n"
                              "model=test-model\n"
                              "\n"
                              "temperature = 0.3\n"
                              "num_runs = 5\n"
                              "variant = disable_reflection\n"
                              "format = fol\n"
                              "parallelism = 2\n"
                              "dataset = timeqa-hard\n");
    CHECK(c.endpoint == "http://localhost:8000/v1");
    CHECK(c.model == "test-model");
    CHECK(c.pipeline.temperature == 0.3);
    CHECK(c.pipeline.num_runs == 5);
    CHECK(c.pipeline.variant() == Variant::disable_reflection);
    CHECK(c.pipeline.max_reflections == 0);
    CHECK(c.pipeline.format == SymbolicFormat::fol);
    CHECK(c.dataset == DatasetId::timeqa_hard);
    CHECK_NOTHROW(c.validate());

    // A later setting wins, which is how flags override the file.
    cli::set_option(c, "variant", "full");
    CHECK(c.pipeline.max_reflections == 2);
    cli::set_option(c, "max_reflections", "0");
    CHECK(c.pipeline.disable_reflection);
    CHECK_NOTHROW(c.validate());

    CHECK_THROWS_AS(cli::apply_config_text(c, "nonsense\n"), ParseError);
    CHECK_THROWS_AS(cli::apply_config_text(c, "colour = blue\n"), ParseError);
    CHECK_THROWS_AS(cli::apply_config_text(c, "num_runs = three\n"), ParseError);
    CHECK_THROWS_AS(cli::apply_config_text(c, "symbolic_only = maybe\n"), ParseError);
    try {
        cli::apply_config_text(c, "model = x\nformat = yaml\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    cli::CliConfig bad;
    bad.parallelism = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    cli::CliConfig no_backend;
    CHECK_THROWS_AS(cli::make_backend(no_backend), Error);
}

TEST_CASE("cmd_run", "[cli][run]") {
    const auto dir = testing::scratch_dir("cli_run");
    testing::write_file(dir / "two.jsonl", pelikan_record("p1") + pelikan_record("p2"));

    SECTION("two items, one run") {
        Captured io;
        const cli::RunPaths paths{dir / "two.jsonl", dir / "pred.jsonl", dir / "traces", std::nullopt};
        CHECK(cli::cmd_run(mock_config("mock_pelikan.jsonl"), paths, io.streams()) == 0);
        const auto preds = load_predictions(dir / "pred.jsonl");
        CHECK(preds.size() == 2);
        for (const auto& p : preds) CHECK(p.prediction == "Valparaiso University");
        CHECK(count_files(dir / "traces") == 2);
        const auto trace = nlohmann::json::parse(testing::read_file(dir / "traces" / "p1.run0.json"));
        CHECK(trace["item_id"] == "p1");
        CHECK(trace["final_answer"] == "Valparaiso University");
        CHECK(fs::exists(dir / "pred.jsonl.checkpoint"));
        CHECK(io.out.str().find("backend calls: 8") != std::string::npos);
    }
    SECTION("resume skips checkpointed pairs") {
        testing::write_file(dir / "resume.jsonl.checkpoint", "{\"id\": \"p1\", \"run\": 0}\n{\"id\": \"p2\", \"ru");
        // p2 was predicted but not checkpointed before the interrupt; its line must not survive twice.
        testing::write_file(dir / "resume.jsonl", "{\"id\": \"p1\", \"prediction\": \"Valparaiso University\", \"run\": 0}\n"
                                                  "{\"id\": \"p2\", \"prediction\": \"stale\", \"run\": 0}\n"
                                                  "{\"id\": \"p2\", \"predic");
        auto backend = MockBackend::from_file(testing::fixtures_dir() / "mock_pelikan.jsonl");
        Captured io;
        const auto s = cli::run_batch(mock_config("mock_pelikan.jsonl"),
                                      {dir / "two.jsonl", dir / "resume.jsonl", std::nullopt, std::nullopt}, backend,
                                      io.streams());
        CHECK(s.skipped == 1);
        CHECK(s.scheduled == 1);
        CHECK(backend.calls() == 4);
        CHECK(lines_of(dir / "resume.jsonl").size() == 2);
        const auto preds = load_predictions(dir / "resume.jsonl");
        CHECK(preds[1] == Prediction{"p2", "Valparaiso University", 0});
        CHECK(lines_of(dir / "resume.jsonl.checkpoint").size() == 2);
        // A second pass has nothing left to do.
        const auto again = cli::run_batch(mock_config("mock_pelikan.jsonl"),
                                          {dir / "two.jsonl", dir / "resume.jsonl", std::nullopt, std::nullopt},
                                          backend, io.streams());
        CHECK(again.scheduled == 0);
        CHECK(backend.calls() == 4);
        CHECK(lines_of(dir / "resume.jsonl").size() == 2);
    }
    SECTION("symbolic only makes no backend calls") {
        auto config = mock_config("mock_pelikan.jsonl");
        config.mock.reset();
        config.pipeline = PipelineConfig::for_variant(Variant::symbolic_only, config.pipeline);
        Captured io;
        CHECK(cli::cmd_run(config, {dir / "two.jsonl", dir / "sym.jsonl", std::nullopt, std::nullopt}, io.streams()) ==
              0);
        CHECK(io.out.str().find("backend calls: 0") != std::string::npos);
        for (const auto& p : load_predictions(dir / "sym.jsonl")) CHECK(p.prediction == "Valparaiso University");
    }
    SECTION("failures are counted and the batch continues") {
        auto entries = MockBackend::from_file(testing::fixtures_dir() / "mock_pelikan.jsonl").entries();
        MockBackend::Entry dead = entries[1];
        dead.item = "p2";
        dead.always_fail = true;
        entries.push_back(dead);
        MockBackend backend(entries);
        auto config = mock_config("mock_pelikan.jsonl", 3);
        Captured io;
        const auto s = cli::run_batch(config, {dir / "two.jsonl", dir / "fail.jsonl", std::nullopt, std::nullopt},
                                      backend, io.streams());
        CHECK(s.failed == 3);
        CHECK(s.written == 3);
        // Line count = items x runs - failures.
        CHECK(lines_of(dir / "fail.jsonl").size() == 2 * 3 - 3);
        CHECK(count_files(dir / "fail.jsonl.traces") == 6);
        CHECK(io.err.str().find("failed: p2") != std::string::npos);
    }
    SECTION("exit code 2 when a pair fails") {
        testing::write_file(dir / "dead.mock", "{\"stage\": \"representation\", \"error\": \"transport\"}\n");
        auto config = mock_config("mock_pelikan.jsonl");
        config.mock = dir / "dead.mock";
        Captured io;
        CHECK(cli::cmd_run(config, {dir / "two.jsonl", dir / "dead.jsonl", std::nullopt, std::nullopt}, io.streams()) ==
              2);
        CHECK(lines_of(dir / "dead.jsonl").empty());
    }
    SECTION("parallelism does not change the results") {
        testing::write_file(dir / "bench.jsonl", testing::read_file(testing::fixtures_dir() / "bench" / "bench20.jsonl"));
        std::vector<std::set<std::string>> results;
        for (int workers : {1, 8}) {
            auto config = mock_config("bench/bench20_mock.jsonl", 2);
            config.parallelism = workers;
            const fs::path pred = dir / ("par" + std::to_string(workers) + ".jsonl");
            Captured io;
            REQUIRE(cli::cmd_run(config, {dir / "bench.jsonl", pred, std::nullopt, std::nullopt}, io.streams()) == 0);
            const auto l = lines_of(pred);
            results.emplace_back(l.begin(), l.end());
        }
        CHECK(results[0].size() == 40);
        CHECK(results[0] == results[1]);
    }
    SECTION("bad inputs") {
        Captured io;
        CHECK(cli::cmd_run(mock_config("mock_pelikan.jsonl"), {dir / "absent.jsonl", dir / "x.jsonl", {}, {}},
                           io.streams()) == 2);
        cli::CliConfig none;
        CHECK(cli::cmd_run(none, {dir / "two.jsonl", dir / "x.jsonl", {}, {}}, io.streams()) == 1);
        testing::write_file(dir / "empty.jsonl", "\n");
        CHECK(cli::cmd_run(mock_config("mock_pelikan.jsonl"), {dir / "empty.jsonl", dir / "x.jsonl", {}, {}},
                           io.streams()) == 1);
    }
}

TEST_CASE("cmd_eval", "[cli][eval]") {
    const auto dir = testing::scratch_dir("cli_eval");
    SECTION("identity") {
        testing::write_file(dir / "one.jsonl", pelikan_record("p1"));
        testing::write_file(dir / "one.pred", "{\"id\": \"p1\", \"prediction\": \"Valparaiso University\", \"run\": 0}\n");
        Captured io;
        CHECK(cli::cmd_eval({}, {dir / "one.jsonl", dir / "one.pred", dir / "one.json"}, io.streams()) == 0);
        CHECK(io.out.str().find("|  100.0  100.0 |  100.0  100.0") != std::string::npos);
        const auto j = nlohmann::json::parse(testing::read_file(dir / "one.json"));
        CHECK(j["macro"]["em"] == 100.0);
    }
    SECTION("hand-built three items") {
        // a: EM 0, F1 0.8 (P 2/3, R 1). b: EM 1, F1 1. c: EM 0, F1 0.
        testing::write_file(dir / "three.jsonl",
                            R"({"id": "a", "question": "q", "context": "c", "answers": ["Valparaiso University"]})"
                            "\n"
                            R"({"id": "b", "question": "q", "context": "c", "answers": ["1949"]})"
                            "\n"
                            R"({"id": "c", "question": "q", "context": "c", "answers": ["Concordia Seminary"]})"
                            "\n");
        testing::write_file(dir / "three.pred",
                            R"({"id": "a", "prediction": "University of Valparaiso", "run": 0})"
                            "\n"
                            R"({"id": "b", "prediction": "1949", "run": 0})"
                            "\n"
                            R"({"id": "c", "prediction": "Yale", "run": 0})"
                            "\n");
        CHECK_THAT((oracle::f1_single("University of Valparaiso", "Valparaiso University") + 1.0 + 0.0) / 3 * 100,
                   Catch::Matchers::WithinAbs(60.0, 1e-9));
        Captured io;
        CHECK(cli::cmd_eval({}, {dir / "three.jsonl", dir / "three.pred", std::nullopt}, io.streams()) == 0);
        CHECK(io.out.str() == "Method | Custom        | Avg (Macro)\n"
                              "       |     EM     F1 |     EM     F1\n"
                              "-------+---------------+--------------\n"
                              "Full   |   33.3   60.0 |   33.3   60.0\n");
    }
    SECTION("unknown id") {
        testing::write_file(dir / "one.jsonl", pelikan_record("p1"));
        testing::write_file(dir / "stray.pred", "{\"id\": \"zz9\", \"prediction\": \"x\", \"run\": 0}\n");
        Captured io;
        CHECK(cli::cmd_eval({}, {dir / "one.jsonl", dir / "stray.pred", std::nullopt}, io.streams()) == 1);
        CHECK(io.err.str().find("zz9") != std::string::npos);
    }
    SECTION("missing predictions file") {
        testing::write_file(dir / "one.jsonl", pelikan_record("p1"));
        Captured io;
        CHECK(cli::cmd_eval({}, {dir / "one.jsonl", dir / "absent.pred", std::nullopt}, io.streams()) == 2);
    }
}

TEST_CASE("cmd_ablate", "[cli][ablate]") {
    const auto dir = testing::scratch_dir("cli_ablate");
    testing::write_file(dir / "one.jsonl", pelikan_record("p1"));

    Captured io;
    CHECK(cli::cmd_ablate(mock_config("mock_contradiction.jsonl"), {dir / "one.jsonl", dir / "out", dir / "a.json"},
                          io.streams()) == 0);
    std::vector<std::string> rows;
    std::istringstream table(io.out.str());
    for (std::string l; std::getline(table, l);) rows.push_back(l);
    REQUIRE(rows.size() == 3 + 5);
    CHECK(rows[3].rfind("Symbolic only", 0) == 0);
    CHECK(rows[4].rfind("w/o Symbol", 0) == 0);
    CHECK(rows[5].rfind("w/o Consistency Check", 0) == 0);
    CHECK(rows[6].rfind("w/o Abductive Reflection", 0) == 0);
    CHECK(rows[7].rfind("Full", 0) == 0);

    const auto j = nlohmann::json::parse(testing::read_file(dir / "a.json"));
    REQUIRE(j["variants"].size() == 5);
    const auto& sym = j["variants"][0];
    CHECK(sym["variant"] == "symbolic_only");
    CHECK(sym["backend_calls"] == 0);
    CHECK(sym["report"]["macro"]["em"] == 100.0);

    // The contradiction script is only corrected by reflection.
    const auto answer = [&](const char* variant) {
        return load_predictions(dir / "out" / variant / "predictions.jsonl").at(0).prediction;
    };
    CHECK(answer("full") == "Valparaiso University");
    CHECK(answer("disable_reflection") == "Yale University");
    CHECK(j["variants"][4]["report"]["macro"]["em"] == 100.0);
    CHECK(j["variants"][3]["report"]["macro"]["em"] == 0.0);
}
