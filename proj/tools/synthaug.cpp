// SPDX-License-Identifier: Apache-2.0
//
// synthaug: command-line front end for the augmentation pipeline.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "synthaug/backend.hpp"
#include "synthaug/corpus.hpp"
#include "synthaug/error.hpp"
#include "synthaug/metrics.hpp"
#include "synthaug/mixing.hpp"
#include "synthaug/pipeline.hpp"
#include "synthaug/rng.hpp"
#include "synthaug/synthesis.hpp"
#include "synthaug/trainer_bridge.hpp"

namespace fs = std::filesystem;
using namespace synthaug;
using nlohmann::json;

namespace {

void log_stderr(const std::string& line) {
    std::cerr << line;
    if (line.empty() || line.back() != '\n') std::cerr << '\n';
}

Split split_arg(const std::string& s) { return parse_split(s); }

json read_json(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthaug: teacher-driven training data augmentation"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Execute a full manifest-driven run");
    std::string manifest;
    bool resume = false, dry_run = false;
    std::optional<std::uint64_t> seed_override;
    run->add_option("--manifest", manifest, "Run manifest (JSON)")->required();
    run->add_flag("--resume", resume, "Continue synthesis from the last checkpoint");
    run->add_flag("--dry-run", dry_run, "Validate and print the plan without writing anything");
    run->add_option("--seed-override", seed_override, "Replace the manifest seed");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Load and validate a JSONL split");
    std::string task_path, input_path, split_name = "train";
    ingest->add_option("--task", task_path, "Task spec (JSON)")->required();
    ingest->add_option("--input", input_path, "JSONL file")->required();
    ingest->add_option("--split", split_name, "train, dev, test or unlabeled");

    // sample
    auto* sample = app.add_subcommand("sample", "Draw a seeded fraction of a split");
    double fraction = 0.0;
    std::uint64_t seed = 0;
    std::string out_path;
    sample->add_option("--task", task_path, "Task spec (JSON)")->required();
    sample->add_option("--input", input_path, "JSONL file")->required();
    sample->add_option("--fraction", fraction, "Fraction in [0, 1]")->required();
    sample->add_option("--seed", seed, "Seed")->required();
    sample->add_option("--out", out_path, "Output JSONL")->required();

    // synthesize
    auto* synth = app.add_subcommand("synthesize", "Query the teacher for synthetic records");
    std::string backend_path, exemplars_path, pool_path, mode_name = "annotate", checkpoint_dir;
    std::size_t count = 0, k = 8, max_resamples = 3;
    std::optional<std::size_t> annotate_count, generate_count;
    std::optional<double> temperature;
    synth->add_option("--task", task_path, "Task spec (JSON)")->required();
    synth->add_option("--backend", backend_path, "Backend config (JSON)")->required();
    synth->add_option("--exemplars", exemplars_path, "Labeled exemplar source (JSONL)")->required();
    synth->add_option("--pool", pool_path, "Unlabeled pool (JSONL), for annotation");
    synth->add_option("--mode", mode_name, "annotate, generate or combine");
    synth->add_option("--count", count, "Records per mode")->required();
    synth->add_option("--annotate-count", annotate_count, "Combine: annotation count");
    synth->add_option("--generate-count", generate_count, "Combine: generation count");
    synth->add_option("--k", k, "Exemplars per prompt");
    synth->add_option("--max-resamples", max_resamples, "Resample budget per item");
    synth->add_option("--temperature", temperature, "Override the per-mode temperature");
    synth->add_option("--seed", seed, "Seed")->required();
    synth->add_option("--checkpoint-dir", checkpoint_dir, "Checkpoint directory");
    synth->add_flag("--resume", resume, "Resume from the checkpoint directory");
    synth->add_option("--out", out_path, "Output JSONL")->required();

    // mix
    auto* mix = app.add_subcommand("mix", "Combine an original subset with synthetic records");
    std::string synthetic_path;
    std::size_t base_n = 0;
    double original_fraction = 0.0, synthetic_fraction = 0.0;
    bool markers = false, original_is_full = false;
    mix->add_option("--task", task_path, "Task spec (JSON)")->required();
    mix->add_option("--original", input_path, "Original examples (JSONL)")->required();
    mix->add_option("--synthetic", synthetic_path, "Synthetic records (JSONL)")->required();
    mix->add_option("--base-n", base_n, "Size of the full training set")->required();
    mix->add_option("--original-fraction", original_fraction, "Original share of base N")->required();
    mix->add_option("--synthetic-fraction", synthetic_fraction, "Synthetic share of base N")->required();
    mix->add_flag("--original-is-full", original_is_full, "Sample the original share from --original");
    mix->add_flag("--markers", markers, "Keep an origin field per example");
    mix->add_option("--seed", seed, "Seed")->required();
    mix->add_option("--out", out_path, "Output JSONL")->required();

    // export
    auto* exp = app.add_subcommand("export", "Write the trainer-facing files and task card");
    std::string dev_path, test_path;
    exp->add_option("--task", task_path, "Task spec (JSON)")->required();
    exp->add_option("--train", input_path, "Training JSONL")->required();
    exp->add_option("--dev", dev_path, "Dev JSONL")->required();
    exp->add_option("--test", test_path, "Test JSONL")->required();
    exp->add_option("--out", out_path, "Output directory")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Score predictions against gold");
    std::string gold_path;
    eval->add_option("--task", task_path, "Task spec (JSON)")->required();
    eval->add_option("--predictions", input_path, "Predictions JSONL")->required();
    eval->add_option("--gold", gold_path, "Gold JSONL")->required();
    eval->add_option("--out", out_path, "Report JSON");

    // report
    auto* report = app.add_subcommand("report", "Compare run ledgers");
    std::vector<std::string> ledgers;
    report->add_option("ledgers", ledgers, "ledger.json files")->required();

    // baseline-train
    auto* baseline = app.add_subcommand("baseline-train", "Built-in nearest-neighbour student (trainer contract)");
    std::string b_train, b_dev, b_test, b_out;
    baseline->add_option("train", b_train)->required();
    baseline->add_option("dev", b_dev)->required();
    baseline->add_option("test", b_test)->required();
    baseline->add_option("out", b_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            RunOptions opt;
            opt.resume = resume;
            opt.dry_run = dry_run;
            opt.seed_override = seed_override;
            opt.log = log_stderr;
            const auto outcome = cmd_run(manifest, opt);
            if (dry_run) {
                std::cout << outcome.ledger.dump(2) << "\n";
            } else {
                std::cout << "ledger: " << outcome.ledger_path.string() << "\n";
            }
        } else if (*ingest) {
            const auto task = load_task_spec(task_path);
            const auto ds = load_jsonl(input_path, split_arg(split_name), task);
            nlohmann::ordered_json j;
            j["task_id"] = task.task_id;
            j["split"] = to_string(ds.split());
            j["records"] = ds.size();
            j["assigned_ids"] = ds.assigned_ids();
            j["sha256"] = dataset_digest(ds);
            if (task.is_classification() && ds.split() != Split::unlabeled) {
                const auto h = label_histogram(ds, task);
                j["labels"] = h.counts;
                j["out_of_set"] = h.out_of_set;
            }
            std::cout << j.dump(2) << "\n";
        } else if (*sample) {
            const auto task = load_task_spec(task_path);
            const auto ds = load_jsonl(input_path, Split::train, task);
            const auto sub = sample_fraction(ds, fraction, seed);
            save_jsonl(sub, out_path);
            std::cout << sub.size() << " of " << ds.size() << " examples -> " << out_path << "\n";
        } else if (*synth) {
            const auto task = load_task_spec(task_path);
            const auto cfg = backend_from_json(read_json(backend_path), fs::path(backend_path).parent_path());
            const auto source = load_jsonl(exemplars_path, Split::train, task);
            std::optional<Dataset> pool;
            if (!pool_path.empty()) pool = load_jsonl(pool_path, Split::unlabeled, task);
            SynthesisPlan plan;
            plan.mode = parse_synthesis_mode(mode_name);
            plan.target_count = count;
            plan.annotate_count = annotate_count;
            plan.generate_count = generate_count;
            plan.temperature = temperature;
            plan.exemplar_policy.k = k;
            plan.exemplar_policy.seed = derive_seed(seed, "exemplars");
            plan.max_resamples = max_resamples;
            plan.seed = derive_seed(seed, "synthesize");
            plan.source_fraction = dataset_digest(source);
            plan.validate();
            SynthesisOptions opt;
            if (!checkpoint_dir.empty()) opt.checkpoint_dir = checkpoint_dir;
            opt.resume = resume;
            opt.log = log_stderr;
            TeacherClient client(cfg);
            const auto result = run_synthesis(plan, pool ? &*pool : nullptr, source, task, client, opt);
            save_synthetic_jsonl(result.records, out_path);
            std::cout << result.records.size() << " records, " << result.dropped.size() << " dropped, shortfall "
                      << result.shortfall << " -> " << out_path << "\n";
        } else if (*mix) {
            const auto task = load_task_spec(task_path);
            const auto original = load_jsonl(input_path, Split::train, task);
            const auto records = load_synthetic_jsonl(synthetic_path);
            MixPlan plan{original_fraction, synthetic_fraction, base_n, derive_seed(seed, "mix"), original_is_full, markers};
            const auto a = build_augmented(original, records, plan);
            save_augmented(a, out_path);
            std::cout << composition_report(a);
        } else if (*exp) {
            const auto task = load_task_spec(task_path);
            const auto train = load_jsonl(input_path, Split::train, task);
            const auto dev = load_jsonl(dev_path, Split::dev, task);
            const auto test = load_jsonl(test_path, Split::test, task);
            const auto m = export_training_set(train.examples(), dev, test, task, out_path);
            std::cout << "exported to " << m.dir.string() << "\n";
        } else if (*eval) {
            const auto task = load_task_spec(task_path);
            const auto preds = load_jsonl(input_path, Split::test, task);
            const auto gold = load_jsonl(gold_path, Split::test, task);
            const auto r = evaluate_predictions(preds.examples(), gold, task);
            if (!out_path.empty()) write_file(out_path, to_json(r).dump(2) + "\n");
            std::cout << format_table(r);
        } else if (*report) {
            std::vector<fs::path> paths(ledgers.begin(), ledgers.end());
            std::cout << cmd_report(paths);
        } else if (*baseline) {
            const auto r = run_baseline_trainer(b_train, b_dev, b_test, b_out);
            std::cout << "dev\n" << format_table(r.dev_metrics) << "test\n" << format_table(r.test_metrics);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
