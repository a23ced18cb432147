// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "synthaug/backend.hpp"
#include "synthaug/corpus.hpp"
#include "synthaug/error.hpp"
#include "synthaug/prompting.hpp"
#include "synthaug/synthesis.hpp"
#include "synthaug/trainer_bridge.hpp"

namespace synthaug {

inline constexpr int kManifestSchemaVersion = 1;

/// One experiment: which data, which teacher, how much to synthesize and mix,
/// which student. Paths are resolved against the manifest's directory.
struct RunManifest {
    std::filesystem::path path;
    std::filesystem::path base_dir;
    std::uint64_t seed = 0;

    std::string task_ref;
    std::string train_ref;
    std::string dev_ref;
    std::string test_ref;
    std::optional<std::string> unlabeled_ref;
    std::string output_ref;

    nlohmann::json backend_json;
    BackendConfig backend;

    SynthesisMode mode = SynthesisMode::annotate;
    // Per-mode request sizes as fractions of N; defaulted from the mix.
    std::optional<double> annotate_fraction;
    std::optional<double> generate_fraction;
    std::size_t exemplar_k = 8;
    ExemplarSelection exemplar_selection = ExemplarSelection::seeded_uniform;
    std::vector<std::string> exemplar_ids;
    std::size_t max_resamples = 3;
    std::optional<double> temperature;
    std::optional<std::size_t> max_tokens;

    double original_fraction = 0.0;
    double synthetic_fraction = 0.0;
    bool markers = false;

    std::optional<nlohmann::json> trainer_json;

    std::filesystem::path resolve(const std::string& ref) const;
    double annotate_share() const;
    double generate_share() const;
};

/// Structural parse; no file access besides what the backend block names.
RunManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& manifest_path);
RunManifest load_manifest(const std::filesystem::path& path);

struct RunOptions {
    bool resume = false;
    bool dry_run = false;
    std::optional<std::uint64_t> seed_override;
    std::function<void(const std::string&)> log;
};

/// A pipeline stage failed. exit_code() follows the CLI convention.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message, int exit_code)
        : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)), exit_code_(exit_code) {}
    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

/// 2 validation, 3 backend, 4 trainer, 1 anything else.
int exit_code_for(const std::exception& e) noexcept;

struct RunOutcome {
    nlohmann::ordered_json ledger;
    std::filesystem::path ledger_path;  // empty for a dry run
};

/// Validates the whole manifest first, then runs
/// ingest, sample, synthesize, mix, export, train, evaluate.
RunOutcome cmd_run(const std::filesystem::path& manifest_path, const RunOptions& options = {});

/// Comparison table over run ledgers; throws ValidationError when the ledgers
/// mix task kinds.
std::string render_report(std::span<const nlohmann::json> ledgers);
std::string cmd_report(std::span<const std::filesystem::path> ledger_paths);

/// Row label for a synthesis mode: "-", "X,Y", "Y|X" or "Y|X; X,Y".
std::string data_type_label(std::optional<SynthesisMode> mode);

}  // namespace synthaug
