// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. One PASS/FAIL line per criterion; exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "synthaug/corpus.hpp"
#include "synthaug/metrics.hpp"
#include "synthaug/mixing.hpp"
#include "synthaug/pipeline.hpp"
#include "synthaug/prompting.hpp"
#include "synthaug/rng.hpp"
#include "synthaug/synthesis.hpp"
#include "test_support.hpp"

using namespace synthaug;
using namespace synthaug::testing;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kToy = SYNTHAUG_TOY_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(prec) << v;
    return ss.str();
}

fs::path copy_toy(const fs::path& dest) {
    fs::copy(kToy, dest, fs::copy_options::recursive);
    fs::remove_all(dest / "out");
    return dest;
}

json load(const fs::path& p) { return json::parse(read_file(p)); }

std::vector<std::string> random_tokens(Rng& r, std::size_t max_len, std::size_t alphabet) {
    std::vector<std::string> t;
    const auto n = r.below(max_len + 1);
    for (std::uint64_t i = 0; i < n; ++i) t.push_back("t" + std::to_string(r.below(alphabet)));
    return t;
}

// ---------------------------------------------------------------- criteria

Outcome rouge_oracle() {
    const auto t0 = Clock::now();
    Rng r(20240501);
    double worst = 0.0;
    std::size_t mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto alphabet = 2 + r.below(6);
        const auto cand = random_tokens(r, 8, alphabet);
        const auto ref = random_tokens(r, 8, alphabet);
        std::vector<std::pair<PrfScore, OracleScore>> cmp{{rouge_n(cand, ref, 1), oracle_rouge_n(cand, ref, 1)},
                                                          {rouge_n(cand, ref, 2), oracle_rouge_n(cand, ref, 2)},
                                                          {rouge_l(cand, ref), oracle_rouge_l(cand, ref)}};
        for (const auto& [got, want] : cmp) {
            const double d = std::max({std::abs(got.precision - want.p), std::abs(got.recall - want.r),
                                       std::abs(got.f1 - want.f)});
            worst = std::max(worst, d);
            if (d > 1e-9) ++mismatches;
        }
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 10.0,
            "1000 pairs, max deviation " + fmt(worst, 12) + ", " + fmt(secs, 2) + " s"};
}

Outcome worked_rouge() {
    const auto r1 = rouge_n("police killed the gunman", "police kill the gunman", 1);
    const auto r2 = rouge_n("police killed the gunman", "police kill the gunman", 2);
    const bool ok = r1.f1 == 0.75 && r2.f1 == 1.0 / 3.0;
    return {ok, "R1 F1 = " + fmt(r1.f1, 17) + ", R2 F1 = " + fmt(r2.f1, 17)};
}

Outcome fraction_arithmetic() {
    const std::vector<int> pct{1, 2, 3, 4, 5, 10, 20, 26, 30, 31, 40, 43, 44, 78, 80, 100, 254};
    // Expected counts computed independently with exact rational arithmetic.
    const std::vector<std::pair<std::size_t, std::vector<std::size_t>>> table{
        {11514, {115, 230, 345, 461, 576, 1151, 2303, 2994, 3454, 3569, 4606, 4951, 5066, 8981, 9211, 11514, 29246}},
        {2500, {25, 50, 75, 100, 125, 250, 500, 650, 750, 775, 1000, 1075, 1100, 1950, 2000, 2500, 6350}},
        {9427, {94, 189, 283, 377, 471, 943, 1885, 2451, 2828, 2922, 3771, 4054, 4148, 7353, 7542, 9427, 23945}},
        {5100, {51, 102, 153, 204, 255, 510, 1020, 1326, 1530, 1581, 2040, 2193, 2244, 3978, 4080, 5100, 12954}},
        {212300,
         {2123, 4246, 6369, 8492, 10615, 21230, 42460, 55198, 63690, 65813, 84920, 91289, 93412, 165594, 169840, 212300,
          539242}},
        {164982,
         {1650, 3300, 4949, 6599, 8249, 16498, 32996, 42895, 49495, 51144, 65993, 70942, 72592, 128686, 131986, 164982,
          419054}},
        {35426,
         {354, 709, 1063, 1417, 1771, 3543, 7085, 9211, 10628, 10982, 14170, 15233, 15587, 27632, 28341, 35426, 89982}},
    };
    const auto t0 = Clock::now();
    std::size_t checked = 0, bad = 0;
    std::string first_bad;
    for (const auto& [n, expected] : table) {
        std::vector<Example> rows;
        rows.reserve(n);
        for (std::size_t i = 0; i < n; ++i) rows.push_back({std::to_string(i), "x", "y"});
        const Dataset ds("sizes", Split::train, std::move(rows));
        for (std::size_t c = 0; c < pct.size(); ++c) {
            const double f = pct[c] / 100.0;
            MixPlan plan{f <= 1.0 ? f : 0.0, f, n, 0, false, false};
            std::vector<std::size_t> got{fraction_count(f, n), plan.synthetic_count()};
            if (f <= 1.0) {
                got.push_back(plan.original_count());
                got.push_back(sample_fraction(ds, f, 7).size());
            }
            for (auto g : got) {
                ++checked;
                if (g != expected[c]) {
                    ++bad;
                    if (first_bad.empty())
                        first_bad = "; N=" + std::to_string(n) + " f=" + std::to_string(pct[c]) + "% got " + std::to_string(g);
                }
            }
        }
    }
    const bool rte = fraction_count(0.05, 2500) == 125;
    return {bad == 0 && rte,
            std::to_string(checked) + " counts over 7 sizes x 17 fractions, RTE 5% -> " +
                std::to_string(fraction_count(0.05, 2500)) + ", " + fmt(seconds_since(t0), 2) + " s" + first_bad};
}

std::string random_text(Rng& r) {
    static const std::vector<std::string> words{"the",   "cat", "sat", "on",     "mat",  "?",    "x",  "Yes",
                                                "[DATA]", "a\tb", "é",  "INPUT", "[in", "out]", "42", "\"q\""};
    std::string s;
    const auto n = 1 + r.below(10);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (!s.empty()) s += ' ';
        s += words[r.below(words.size())];
    }
    return s;
}

Outcome prompt_grammar() {
    const TaskSpec task{"qa", "Answer the question.", TaskKind::generation, {}, {}};
    Rng r(77);
    std::size_t identity = 0, terminal = 0, total = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Example> ex;
        const auto k = r.below(9);
        for (std::uint64_t i = 0; i < k; ++i) ex.push_back({std::to_string(i), random_text(r), random_text(r)});
        const Example target{"t", random_text(r), std::nullopt};
        for (const auto mode : {PromptMode::annotate, PromptMode::generate}) {
            ++total;
            const auto p = render_prompt(task, ex, mode, mode == PromptMode::annotate ? &target : nullptr);
            const std::string tail = mode == PromptMode::annotate ? "[OUTPUT]" : "[INPUT]";
            if (p.text.size() >= tail.size() && p.text.compare(p.text.size() - tail.size(), tail.size(), tail) == 0)
                ++terminal;
            const auto parts = parse_prompt(p.text);
            bool same = parts.mode == mode && parts.description == task.description && parts.exemplars.size() == ex.size();
            for (std::size_t i = 0; same && i < ex.size(); ++i)
                same = parts.exemplars[i].first == ex[i].input && parts.exemplars[i].second == *ex[i].output;
            if (mode == PromptMode::annotate) same = same && parts.target_input == target.input;
            else same = same && !parts.target_input.has_value();
            if (same) ++identity;
        }
    }
    return {identity == total && terminal == total,
            std::to_string(identity) + "/" + std::to_string(total) + " round trips, " + std::to_string(terminal) + "/" +
                std::to_string(total) + " terminal tags"};
}

// Classification task with distinct inputs, so generation never runs dry.
fs::path write_reviews(const fs::path& dir, std::size_t n) {
    fs::create_directories(dir);
    const TaskSpec task{"reviews", "Is the review positive or negative?", TaskKind::classification,
                        {"positive", "negative"}, {}};
    write_json(dir / "task.json", json::parse(to_json(task).dump()));
    static const std::vector<std::string> good{"lovely", "superb", "great", "moving"};
    static const std::vector<std::string> bad{"dull", "clumsy", "bleak", "tedious"};
    auto make = [&](std::size_t count, const std::string& prefix, std::uint64_t seed) {
        Rng r(seed);
        std::vector<Example> out;
        for (std::size_t i = 0; i < count; ++i) {
            const bool pos = r.below(2) == 0;
            const auto& words = pos ? good : bad;
            out.push_back({prefix + std::to_string(i),
                           "review " + prefix + std::to_string(i) + " says it was " + words[r.below(words.size())],
                           pos ? "positive" : "negative"});
        }
        return out;
    };
    const auto train = make(n, "r", 1);
    write_examples(dir / "train.jsonl", train);
    write_examples(dir / "dev.jsonl", make(50, "d", 2));
    write_examples(dir / "test.jsonl", make(50, "e", 3));
    write_examples(dir / "table.jsonl", train);
    json m;
    m["schema_version"] = 1;
    m["seed"] = 3;
    m["task"] = "task.json";
    m["data"] = {{"train", "train.jsonl"}, {"dev", "dev.jsonl"}, {"test", "test.jsonl"}};
    m["backend"] = {{"kind", "mock-lookup"}, {"table", "table.jsonl"}, {"parallelism", 4}};
    m["plan"] = {{"mode", "combine"}, {"annotate_fraction", 0.05}, {"generate_fraction", 0.05}, {"exemplars", {{"k", 8}}}};
    m["mix"] = {{"original_fraction", 0.1}, {"synthetic_fraction", 0.1}};
    m["output_dir"] = "out";
    write_json(dir / "manifest.json", m);
    return dir / "manifest.json";
}

// Reviews manifest switched to a single synthesis mode.
fs::path reviews_in_mode(const fs::path& dir, const std::string& mode) {
    const auto path = write_reviews(dir, 400);
    if (mode != "combine") {
        auto m = load(path);
        m["plan"] = {{"mode", mode}, {"exemplars", {{"k", 8}}}};
        write_json(path, m);
    }
    return path;
}

Outcome temperature_defaults(const fs::path& work) {
    std::map<std::string, std::vector<double>> seen;
    for (const std::string mode : {"annotate", "generate", "combine"}) {
        const auto path = reviews_in_mode(work / ("temp-" + mode), mode);
        cmd_run(path);
        for (const auto& rec : load_synthetic_jsonl(path.parent_path() / "out" / "synthetic.jsonl"))
            seen[std::string(to_string(rec.mode))].push_back(rec.temperature);
    }
    bool ok = !seen["annotate"].empty() && !seen["generate"].empty();
    for (double t : seen["annotate"]) ok = ok && t == 0.1;
    for (double t : seen["generate"]) ok = ok && t == 0.8;
    return {ok, std::to_string(seen["annotate"].size()) + " annotate records at 0.1, " +
                    std::to_string(seen["generate"].size()) + " generate records at 0.8"};
}

Outcome determinism(const fs::path& work) {
    const std::vector<std::string> files{"synthetic.jsonl", "augmented.jsonl", "ledger.json"};
    std::size_t compared = 0, equal = 0;
    for (const std::string mode : {"annotate", "generate", "combine"}) {
        const auto path = reviews_in_mode(work / ("det-" + mode), mode);
        const auto root = path.parent_path();
        cmd_run(path);
        std::vector<std::string> first;
        for (const auto& f : files) first.push_back(read_file(root / "out" / f));
        fs::remove_all(root / "out");
        cmd_run(path);
        for (std::size_t i = 0; i < files.size(); ++i) {
            ++compared;
            if (read_file(root / "out" / files[i]) == first[i]) ++equal;
        }
    }
    return {equal == compared, std::to_string(equal) + "/" + std::to_string(compared) +
                                   " artifacts byte-identical across reruns (3 modes)"};
}

double test_accuracy(const json& ledger) { return ledger["metrics"]["test"]["accuracy"].get<double>(); }

Outcome closed_loop(const fs::path& work) {
    const auto t0 = Clock::now();
    double min_gain = 1.0;
    std::ostringstream detail;
    detail << std::fixed << std::setprecision(1);
    bool ok = true;
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const auto dir = work / ("parity-" + std::to_string(seed));
        fs::create_directories(dir);
        const auto files = write_parity_scenario(dir, 1000, 200, seed);
        write_json(dir / "base.json", parity_manifest(files, seed, "annotate", 0.01, 0.0, "out-base"));
        write_json(dir / "aug.json", parity_manifest(files, seed, "annotate", 0.01, 0.20, "out-aug"));
        const auto base = cmd_run(dir / "base.json");
        const auto aug = cmd_run(dir / "aug.json");
        const double a = test_accuracy(base.ledger);
        const double b = test_accuracy(aug.ledger);
        min_gain = std::min(min_gain, b - a);
        ok = ok && aug.ledger["report_row"]["synthetic_count"] == 200 && b - a >= 0.10;
        detail << (seed == 1 ? "" : "; ") << "seed " << seed << ": " << 100 * a << " -> " << 100 * b;
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 30.0,
            "min gain " + fmt(100 * min_gain, 1) + " points (" + detail.str() + "), " + fmt(secs, 2) + " s"};
}

Outcome combine_each(const fs::path& work) {
    std::vector<fs::path> manifests;
    // toy: N = 40, 5% = 2 per mode
    const auto toy = copy_toy(work / "combine-toy");
    auto m = load(toy / "manifest.json");
    m["plan"] = {{"mode", "combine"}, {"annotate_fraction", 0.05}, {"generate_fraction", 0.05}, {"exemplars", {{"k", 2}}}};
    m["mix"]["synthetic_fraction"] = 0.1;
    write_json(toy / "m.json", m);
    manifests.push_back(toy / "m.json");
    manifests.push_back(write_reviews(work / "combine-reviews", 400));

    bool ok = true;
    std::ostringstream detail;
    for (const auto& path : manifests) {
        const auto out = cmd_run(path);
        std::size_t a = 0, g = 0;
        for (const auto& rec : load_synthetic_jsonl(path.parent_path() / "out" / "synthetic.jsonl"))
            (rec.mode == PromptMode::annotate ? a : g) += 1;
        const auto want = fraction_count(0.05, out.ledger["report_row"]["base_n"].get<std::size_t>());
        ok = ok && a == g && a == want;
        const std::vector<json> ledgers{out.ledger};
        const auto table = render_report(ledgers);
        std::string row;
        std::istringstream lines(table);
        for (std::string line; std::getline(lines, line);) {
            if (line.find("Y|X; X,Y") != std::string::npos) row = line;
        }
        const bool header = table.find("| Original | Type      | Synthetic  |") != std::string::npos;
        ok = ok && header && row.find("| 10%      | Y|X; X,Y  | 5% each    |") == 0;
        detail << (detail.tellp() > 0 ? "; " : "") << out.ledger["report_row"]["task_id"].get<std::string>()
               << " annotate=" << a << " generate=" << g << " row \"" << row.substr(0, 36) << "\"";
    }
    return {ok, detail.str()};
}

Outcome dedup_guarantee(const fs::path& work) {
    struct Run {
        std::string name;
        std::vector<SyntheticRecord> records;
        std::vector<std::string> sources;
    };
    std::vector<Run> runs;

    // Library-level generation against a teacher that repeats itself a lot.
    {
        const auto dir = work / "dedup-parity";
        fs::create_directories(dir);
        const auto files = write_parity_scenario(dir, 1000, 10, 9);
        const auto task = parity_task();
        const auto train = load_jsonl(files.train, Split::train, task);
        const auto source = sample_fraction(train, 0.01, 1);
        BackendConfig cfg = backend_from_json(json{{"kind", "mock-lookup"}, {"table", files.table.string()}}, dir);
        TeacherClient client(cfg);
        SynthesisPlan plan;
        plan.mode = SynthesisMode::generate;
        plan.target_count = 150;
        plan.exemplar_policy.k = 4;
        plan.seed = 5;
        plan.source_fraction = dataset_digest(source);
        Run run{"parity generate", run_generation(plan, source, task, client).records, {}};
        for (const auto& ex : source.examples()) run.sources.push_back(ex.input);
        runs.push_back(std::move(run));
    }
    // Scripted teacher cycling through case and spacing variants.
    {
        const TaskSpec task{"yn", "Yes or no?", TaskKind::classification, {"yes", "no"}, {}};
        const Dataset source("yn", Split::train, {{"s1", "Is it raining", "yes"}, {"s2", "is water dry", "no"}});
        BackendConfig cfg;
        cfg.kind = BackendKind::mock_scripted;
        cfg.script = {" Is it  RAINING\n[OUTPUT] yes", " new one\n[OUTPUT] no", " NEW ONE \n[OUTPUT] yes",
                      " third\n[OUTPUT] no", " Third\n[OUTPUT] no", " fourth!\n[OUTPUT] yes"};
        TeacherClient client(cfg);
        SynthesisPlan plan;
        plan.mode = SynthesisMode::generate;
        plan.target_count = 12;
        plan.exemplar_policy.k = 2;
        plan.seed = 1;
        Run run{"scripted generate", run_generation(plan, source, task, client).records, {"Is it raining", "is water dry"}};
        runs.push_back(std::move(run));
    }
    // Full pipeline runs in generate and combine mode.
    for (const std::string mode : {"generate", "combine"}) {
        const auto root = copy_toy(work / ("dedup-" + mode));
        auto m = load(root / "manifest.json");
        m["plan"]["mode"] = mode;
        m["mix"]["synthetic_fraction"] = 0.4;
        write_json(root / "m.json", m);
        cmd_run(root / "m.json");
        Run run{"toy " + mode, load_synthetic_jsonl(root / "out" / "synthetic.jsonl"), {}};
        for (const auto& line : load_jsonl(root / "out" / "original.jsonl", Split::train,
                                           load_task_spec(root / "task.json")).examples())
            run.sources.push_back(line.input);
        runs.push_back(std::move(run));
    }

    std::size_t pairs = 0, collisions = 0, records = 0;
    for (const auto& run : runs) {
        records += run.records.size();
        for (std::size_t i = 0; i < run.records.size(); ++i) {
            const auto a = normalize_for_dedup(run.records[i].input);
            for (std::size_t j = i + 1; j < run.records.size(); ++j, ++pairs)
                collisions += a == normalize_for_dedup(run.records[j].input);
            for (const auto& s : run.sources) {
                ++pairs;
                collisions += a == normalize_for_dedup(s);
            }
        }
    }
    const bool nonempty = std::all_of(runs.begin(), runs.end(), [](const Run& r) { return !r.records.empty(); });
    return {collisions == 0 && nonempty, std::to_string(records) + " records over " + std::to_string(runs.size()) +
                                             " runs, " + std::to_string(pairs) + " pairs checked, " +
                                             std::to_string(collisions) + " collisions"};
}

}  // namespace

int main() {
    TempDir work("synthaug-acceptance");
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"rouge-oracle-equivalence", rouge_oracle},
        {"worked-rouge-values", worked_rouge},
        {"fraction-arithmetic", fraction_arithmetic},
        {"prompt-grammar", prompt_grammar},
        {"temperature-defaults", [&] { return temperature_defaults(work.path()); }},
        {"end-to-end-determinism", [&] { return determinism(work.path()); }},
        {"closed-loop-direction", [&] { return closed_loop(work.path()); }},
        {"combine-5pct-each", [&] { return combine_each(work.path()); }},
        {"dedup-guarantee", [&] { return dedup_guarantee(work.path()); }},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
        failed += o.pass ? 0 : 1;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
