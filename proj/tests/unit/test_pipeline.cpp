// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>

#include "synthaug/error.hpp"
#include "synthaug/pipeline.hpp"
#include "test_support.hpp"

using namespace synthaug;
using namespace synthaug::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = SYNTHAUG_TOY_DIR;

// Copy of the toy fixture so each test owns its output directory.
fs::path copy_toy(const TempDir& dir) {
    const auto root = dir / "toy";
    fs::copy(kToy, root, fs::copy_options::recursive);
    fs::remove_all(root / "out");
    return root;
}

json toy_manifest(const fs::path& root) { return json::parse(read_file(root / "manifest.json")); }

std::string stage_status(const json& ledger, const std::string& name) {
    for (const auto& s : ledger["stages"]) {
        if (s["name"] == name) return s["status"];
    }
    return "absent";
}

// Minimal ledger carrying only what the report reads.
json fake_ledger(const std::string& task, const std::string& kind, double of, double sf, const char* mode,
                 std::size_t a, std::size_t g, double dev, double test) {
    const std::size_t n = 1000;
    json row{{"task_id", task},
             {"kind", kind},
             {"base_n", n},
             {"original_fraction", of},
             {"synthetic_fraction", sf},
             {"mode", mode ? json(mode) : json(nullptr)},
             {"annotate_count", a},
             {"generate_count", g},
             {"original_count", fraction_count(of, n)},
             {"synthetic_count", fraction_count(sf, n)}};
    auto block = [&](double v) {
        if (kind == "classification") return json{{"correct", 0}, {"total", 1}, {"accuracy", v}};
        json prf{{"p", v}, {"r", v}, {"f", v}};
        return json{{"rouge1", prf}, {"rouge2", prf}, {"rougeL", prf}};
    };
    return json{{"report_row", row}, {"metrics", {{"trainer_id", "t"}, {"dev", block(dev)}, {"test", block(test)}}}};
}

}  // namespace

TEST_CASE("toy manifest runs end to end") {
    TempDir dir;
    const auto root = copy_toy(dir);
    const auto out = cmd_run(root / "manifest.json");
    CHECK(out.ledger_path == root / "out" / "ledger.json");
    const auto ledger = json::parse(read_file(out.ledger_path));
    for (const char* s : {"ingest", "sample", "synthesize", "mix", "export", "train", "evaluate"})
        CHECK_MESSAGE(stage_status(ledger, s) == "ok", s);
    CHECK(ledger["report_row"]["original_count"] == 4);
    CHECK(ledger["report_row"]["synthetic_count"] == 20);
    CHECK(ledger["metrics"]["trainer_id"] == kBaselineTrainerId);
    CHECK(ledger["inputs"]["train"]["records"] == 40);
    for (const char* f : {"original.jsonl", "pool.jsonl", "synthetic.jsonl", "augmented.jsonl", "metrics.json",
                          "export/train.jsonl", "export/task_card.json", "student/metrics.json"})
        CHECK_MESSAGE(fs::exists(root / "out" / f), f);
    // lookup teacher is always right, so every synthetic label is the gold one
    const auto synth = read_file(root / "out" / "synthetic.jsonl");
    CHECK(std::count(synth.begin(), synth.end(), '\n') == 20);
}

TEST_CASE("two runs are byte-identical") {
    TempDir a, b;
    const auto ra = copy_toy(a);
    const auto rb = copy_toy(b);
    cmd_run(ra / "manifest.json");
    cmd_run(rb / "manifest.json");
    for (const char* f : {"synthetic.jsonl", "augmented.jsonl", "ledger.json", "metrics.json", "export/train.jsonl"})
        CHECK_MESSAGE(read_file(ra / "out" / f) == read_file(rb / "out" / f), f);
}

TEST_CASE("seed override changes the sample and is recorded") {
    TempDir a, b;
    const auto ra = copy_toy(a);
    const auto rb = copy_toy(b);
    cmd_run(ra / "manifest.json");
    RunOptions opt;
    opt.seed_override = 12;
    const auto o = cmd_run(rb / "manifest.json", opt);
    CHECK(o.ledger["seed"] == 12);
    CHECK(o.ledger["manifest"]["seed_override"] == true);
    CHECK(read_file(ra / "out" / "original.jsonl") != read_file(rb / "out" / "original.jsonl"));
}

TEST_CASE("dry run validates and writes nothing") {
    TempDir dir;
    const auto root = copy_toy(dir);
    RunOptions opt;
    opt.dry_run = true;
    const auto o = cmd_run(root / "manifest.json", opt);
    CHECK(o.ledger_path.empty());
    CHECK(o.ledger["original_count"] == 4);
    CHECK(o.ledger["pool"]["records"] == 36);
    CHECK_FALSE(fs::exists(root / "out"));
}

TEST_CASE("validation failures happen before any output") {
    TempDir dir;
    const auto root = copy_toy(dir);
    auto expect_invalid = [&](const json& m, const std::string& needle) {
        write_json(root / "bad.json", m);
        try {
            cmd_run(root / "bad.json");
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
            CHECK(exit_code_for(e) == 2);
        }
        CHECK_FALSE(fs::exists(root / "out"));
    };
    auto m = toy_manifest(root);
    m["data"]["dev"] = "missing.jsonl";
    expect_invalid(m, "data.dev");

    m = toy_manifest(root);
    m["plan"]["exemplars"]["k"] = 5;
    expect_invalid(m, "plan.exemplars.k");

    m = toy_manifest(root);
    m["mix"]["synthetic_fraction"] = 0.95;
    expect_invalid(m, "unlabeled pool holds 36");

    m = toy_manifest(root);
    m["plan"]["annotate_fraction"] = 0.2;
    expect_invalid(m, "mix needs 20");

    m = toy_manifest(root);
    m.erase("seed");
    expect_invalid(m, "'seed'");

    m = toy_manifest(root);
    m["schema_version"] = 2;
    expect_invalid(m, "schema_version");

    m = toy_manifest(root);
    m["backend"] = {{"kind", "http"}, {"endpoint", "http://127.0.0.1:1"}, {"model_name", "m"},
                    {"auth_env", "SYNTHAUG_SURELY_UNSET_VAR"}};
    ::unsetenv("SYNTHAUG_SURELY_UNSET_VAR");
    expect_invalid(m, "SYNTHAUG_SURELY_UNSET_VAR");

    m = toy_manifest(root);
    m["plan"]["exemplars"] = {{"selection", "fixed-list"}, {"ids", {"nope"}}, {"k", 1}};
    expect_invalid(m, "plan.exemplars.ids");
}

TEST_CASE("a failing trainer fails the train stage with exit code 4") {
    TempDir dir;
    const auto root = copy_toy(dir);
    auto m = toy_manifest(root);
    m["trainer"] = {{"command", {std::string(SYNTHAUG_STUB_DIR) + "/trainer_fail.sh", "{train}", "{dev}", "{test}", "{out}"}},
                    {"timeout_s", 20}};
    write_json(root / "m.json", m);
    try {
        cmd_run(root / "m.json");
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "train");
        CHECK(e.exit_code() == 4);
    }
    const auto ledger = json::parse(read_file(root / "out" / "ledger.json"));
    CHECK(ledger["failed_stage"] == "train");
    CHECK(stage_status(ledger, "mix") == "ok");
}

TEST_CASE("external trainer results land in the ledger") {
    TempDir dir;
    const auto root = copy_toy(dir);
    auto m = toy_manifest(root);
    m["trainer"] = {{"command", {std::string(SYNTHAUG_STUB_DIR) + "/trainer_ok.sh", "{train}", "{dev}", "{test}", "{out}"}}};
    write_json(root / "m.json", m);
    const auto o = cmd_run(root / "m.json");
    CHECK(o.ledger["metrics"]["trainer_id"] == "stub-ok");
    CHECK(o.ledger["metrics"]["dev"]["accuracy"] == 0.75);
}

TEST_CASE("no synthetic data skips synthesis") {
    TempDir dir;
    const auto root = copy_toy(dir);
    auto m = toy_manifest(root);
    m["mix"]["synthetic_fraction"] = 0.0;
    write_json(root / "m.json", m);
    const auto o = cmd_run(root / "m.json");
    CHECK(stage_status(o.ledger, "synthesize") == "skipped");
    CHECK(o.ledger["report_row"]["mode"].is_null());
}

TEST_CASE("exit code mapping") {
    CHECK(exit_code_for(ValidationError("x")) == 2);
    CHECK(exit_code_for(BackendUnavailable("x")) == 3);
    CHECK(exit_code_for(TrainerTimeout("x")) == 4);
    CHECK(exit_code_for(std::runtime_error("x")) == 1);
    CHECK(exit_code_for(StageError("synthesize", "x", 3)) == 3);
}

TEST_CASE("data type labels") {
    CHECK(data_type_label(std::nullopt) == "-");
    CHECK(data_type_label(SynthesisMode::generate) == "X,Y");
    CHECK(data_type_label(SynthesisMode::annotate) == "Y|X");
    CHECK(data_type_label(SynthesisMode::combine) == "Y|X; X,Y");
}

TEST_CASE("report groups, orders and marks the best rows") {
    const std::vector<json> ledgers{
        fake_ledger("rte", "classification", 0.01, 0.10, "annotate", 100, 0, 0.61, 0.60),
        fake_ledger("rte", "classification", 0.01, 0.0, nullptr, 0, 0, 0.55, 0.6049),
        fake_ledger("rte", "classification", 0.01, 0.10, "generate", 0, 100, 0.58, 0.59),
        fake_ledger("rte", "classification", 0.01, 0.10, "combine", 50, 50, 0.70, 0.5951),
    };
    const auto table = render_report(ledgers);
    const auto none = table.find("| 1%       | -");
    const auto gen = table.find("X,Y ");
    const auto ann = table.find("Y|X ");
    const auto comb = table.find("Y|X; X,Y");
    REQUIRE(none != std::string::npos);
    CHECK(none < gen);
    CHECK(gen < ann);
    CHECK(ann < comb);
    CHECK(table.find("5% each") != std::string::npos);
    CHECK(table.find("70.00*") != std::string::npos);
    // 60.49 and 60.00 differ at two decimals, so only one best test score
    CHECK(table.find("60.49*") != std::string::npos);
    CHECK(table.find("60.00*") == std::string::npos);
    CHECK(table.find("Dev Acc") != std::string::npos);
}

TEST_CASE("report ties share the mark and a single row is best") {
    const std::vector<json> tie{fake_ledger("t", "classification", 0.05, 0.0, nullptr, 0, 0, 0.5, 0.80001),
                                fake_ledger("t", "classification", 0.05, 0.2, "annotate", 200, 0, 0.4, 0.8)};
    const auto table = render_report(tie);
    std::size_t marks = 0;
    for (std::size_t pos = table.find("80.00*"); pos != std::string::npos; pos = table.find("80.00*", pos + 1)) ++marks;
    CHECK(marks == 2);
    const std::vector<json> one{fake_ledger("t", "generation", 0.05, 0.0, nullptr, 0, 0, 0.5, 0.4)};
    const auto single = render_report(one);
    CHECK(single.find("50.00*") != std::string::npos);
    CHECK(single.find("Rouge-L") != std::string::npos);
}

TEST_CASE("report rejects mixed kinds and broken ledgers") {
    const std::vector<json> mixed{fake_ledger("a", "classification", 0.01, 0.0, nullptr, 0, 0, 0.5, 0.5),
                                  fake_ledger("b", "generation", 0.01, 0.0, nullptr, 0, 0, 0.5, 0.5)};
    CHECK_THROWS_AS(render_report(mixed), ValidationError);
    const std::vector<json> broken{json{{"metrics", json::object()}}};
    CHECK_THROWS_AS(render_report(broken), ValidationError);
    CHECK_THROWS_AS(render_report(std::vector<json>{}), ValidationError);
}

TEST_CASE("report over real run ledgers") {
    TempDir dir;
    const auto root = copy_toy(dir);
    auto m = toy_manifest(root);
    std::vector<fs::path> paths;
    for (double sf : {0.0, 0.25, 0.5}) {
        m["mix"]["synthetic_fraction"] = sf;
        m["output_dir"] = "out-" + std::to_string(static_cast<int>(sf * 100));
        write_json(root / "m.json", m);
        paths.push_back(cmd_run(root / "m.json").ledger_path);
    }
    const auto table = cmd_report(paths);
    CHECK(table.find("toy-sentiment") != std::string::npos);
    CHECK(table.find("25%") != std::string::npos);
    CHECK(table.find("50%") != std::string::npos);
}
