// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthaug/corpus.hpp"
#include "synthaug/metrics.hpp"
#include "synthaug/mixing.hpp"

namespace synthaug {

/// Fine-tuning defaults handed to trainer adapters through the task card.
/// The core never trains with them.
struct Hyperparameters {
    std::string optimizer;
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double learning_rate = 0.0;
    std::string lr_schedule;
    std::string checkpoint_selection;
};

Hyperparameters default_hyperparameters(TaskKind kind);
nlohmann::ordered_json to_json(const Hyperparameters& hp);

struct ExportManifest {
    std::filesystem::path dir;
    std::filesystem::path train;
    std::filesystem::path dev;
    std::filesystem::path test;
    std::filesystem::path task_card;
};

nlohmann::ordered_json task_card_json(const TaskSpec& task);

/// train.jsonl, dev.jsonl, test.jsonl and task_card.json under dir.
ExportManifest export_training_set(std::span<const Example> train, const Dataset& dev, const Dataset& test,
                                   const TaskSpec& task, const std::filesystem::path& dir);
ExportManifest export_training_set(const AugmentedDataset& a, const Dataset& dev, const Dataset& test,
                                   const TaskSpec& task, const std::filesystem::path& dir);

inline constexpr const char* kTrainPlaceholder = "{train}";
inline constexpr const char* kDevPlaceholder = "{dev}";
inline constexpr const char* kTestPlaceholder = "{test}";
inline constexpr const char* kOutPlaceholder = "{out}";

struct TrainerContract {
    // argv template; every placeholder must appear somewhere in it.
    std::vector<std::string> command;
    std::filesystem::path workdir = ".";
    std::chrono::milliseconds timeout{std::chrono::hours(2)};
    TaskKind expected_metrics = TaskKind::classification;

    void validate() const;
};

/// {"command": [...], "workdir": ..., "timeout_s": ...}; relative paths
/// resolve against base_dir. expected_metrics comes from the task.
TrainerContract trainer_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir, TaskKind kind);
nlohmann::ordered_json to_json(const TrainerContract& contract);

struct StudentResult {
    MetricsReport dev_metrics;
    MetricsReport test_metrics;
    std::chrono::milliseconds wall_time{0};
    std::string trainer_id;
};

/// Parses a metrics.json document: {"trainer_id", "dev": report, "test": report}.
/// Throws MetricsSchemaError naming the first bad field.
StudentResult parse_student_metrics(const nlohmann::json& j, TaskKind expected);
nlohmann::ordered_json to_json(const StudentResult& result);

/// Runs the trainer with placeholders substituted and reads {out}/metrics.json.
/// Throws TrainerFailed on a nonzero exit, TrainerTimeout past the deadline.
StudentResult invoke_trainer(const TrainerContract& contract, const ExportManifest& files,
                             const std::filesystem::path& out_dir);

inline constexpr const char* kBaselineTrainerId = "baseline-nearest-jaccard/v1";

/// Jaccard similarity of two token sets; 1 when both are empty.
double jaccard(std::vector<std::string> a, std::vector<std::string> b);

/// Nearest-neighbour student: the output of the training input that equals the
/// eval input, else of the one with the highest token Jaccard (earliest wins).
std::vector<Example> baseline_predict(const Dataset& train, const Dataset& eval);

MetricsReport evaluate_predictions(std::span<const Example> predictions, const Dataset& gold, const TaskSpec& task);

MetricsReport baseline_student(const Dataset& train, const Dataset& eval, const TaskSpec& task);

/// The baseline behind the trainer contract: reads task_card.json next to the
/// train file and writes {out}/metrics.json.
StudentResult run_baseline_trainer(const std::filesystem::path& train, const std::filesystem::path& dev,
                                   const std::filesystem::path& test, const std::filesystem::path& out_dir);

}  // namespace synthaug
