// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthaug/backend.hpp"
#include "synthaug/corpus.hpp"
#include "synthaug/prompting.hpp"

namespace synthaug {

enum class SynthesisMode { annotate, generate, combine };

std::string_view to_string(SynthesisMode mode) noexcept;
SynthesisMode parse_synthesis_mode(std::string_view name);

struct SynthesisPlan {
    SynthesisMode mode = SynthesisMode::annotate;
    // M. For combine this is the per-mode count unless overridden below.
    std::size_t target_count = 0;
    std::optional<std::size_t> annotate_count;
    std::optional<std::size_t> generate_count;
    // Overrides the per-mode default temperature when set.
    std::optional<double> temperature;
    std::optional<std::size_t> max_tokens;
    ExemplarPolicy exemplar_policy;
    std::size_t max_resamples = 3;
    std::uint64_t seed = 0;
    // Identity (digest) of the original subset exemplars are drawn from.
    std::string source_fraction;

    void validate() const;
    std::size_t count_for(PromptMode mode) const;
    double temperature_for(PromptMode mode) const;
};

nlohmann::ordered_json to_json(const SynthesisPlan& plan);

struct SyntheticRecord {
    std::string input;
    std::string output;
    PromptMode mode = PromptMode::annotate;
    std::optional<std::string> source_id;
    std::string teacher;
    double temperature = 0.0;
    std::string prompt_hash;
    std::size_t job_index = 0;
    std::uint64_t seed = 0;
    // Resample number that produced the record (0 = first try).
    std::size_t attempt = 0;
    std::vector<std::string> exemplar_ids;

    friend bool operator==(const SyntheticRecord&, const SyntheticRecord&) = default;
};

nlohmann::ordered_json to_json(const SyntheticRecord& rec);
SyntheticRecord synthetic_from_json(const nlohmann::json& j);
std::string to_jsonl(std::span<const SyntheticRecord> records);
void save_synthetic_jsonl(std::span<const SyntheticRecord> records, const std::filesystem::path& path);
std::vector<SyntheticRecord> load_synthetic_jsonl(const std::filesystem::path& path);

/// An item given up on after its resample budget; never imputed.
struct DroppedItem {
    PromptMode mode = PromptMode::annotate;
    std::size_t job_index = 0;
    std::optional<std::string> source_id;
    std::size_t attempts = 0;
    std::string reason;

    friend bool operator==(const DroppedItem&, const DroppedItem&) = default;
};

struct UsageTotals {
    std::size_t requests = 0;
    std::size_t transport_attempts = 0;
    std::size_t prompt_chars = 0;
    std::size_t completion_chars = 0;

    UsageTotals& operator+=(const UsageTotals& other);
    friend bool operator==(const UsageTotals&, const UsageTotals&) = default;
};

struct SynthesisResult {
    std::vector<SyntheticRecord> records;
    std::vector<DroppedItem> dropped;
    // Requested minus produced, summed over modes.
    std::size_t shortfall = 0;
    UsageTotals usage;
};

/// Extension point for post-hoc filtering (e.g. factuality). Returning false
/// rejects the record, which is then resampled like any invalid completion.
using RecordFilter = std::function<bool(const SyntheticRecord&)>;

struct SynthesisOptions {
    RecordFilter filter;
    // When set, progress is checkpointed to <dir>/checkpoint.<mode>.json after
    // every resample round.
    std::optional<std::filesystem::path> checkpoint_dir;
    bool resume = false;
    std::function<void(const std::string&)> log;
};

std::string normalize_for_dedup(std::string_view text);

/// Maps an output onto its label_set entry: exact match after normalization,
/// tolerating trailing punctuation and quotes ("Yes." -> "yes").
std::optional<std::string> canonical_label(const TaskSpec& task, std::string_view output);

/// Seed of the exemplar draw for one attempt of one job.
std::uint64_t exemplar_draw_seed(std::uint64_t policy_seed, PromptMode mode, std::size_t job_index, std::size_t attempt);

/// Seed forwarded to the teacher for one attempt of one job.
std::uint64_t request_seed(std::uint64_t plan_seed, PromptMode mode, std::size_t job_index, std::size_t attempt);

/// Labels plan.count_for(annotate) items drawn from the unlabeled pool.
/// Throws BackendError (after checkpointing) when the teacher is unreachable.
SynthesisResult run_annotation(const SynthesisPlan& plan, const Dataset& pool, const Dataset& exemplar_source,
                               const TaskSpec& task, TeacherClient& backend, const SynthesisOptions& options = {});

/// Asks the teacher for plan.count_for(generate) new pairs, rejecting any
/// whose normalized input repeats an earlier record or the exemplar source.
SynthesisResult run_generation(const SynthesisPlan& plan, const Dataset& exemplar_source, const TaskSpec& task,
                               TeacherClient& backend, const SynthesisOptions& options = {});

/// Annotation records followed by generation records. Generated inputs avoid
/// the annotated ones as well.
SynthesisResult run_combine(const SynthesisPlan& plan, const Dataset& pool, const Dataset& exemplar_source,
                            const TaskSpec& task, TeacherClient& backend, const SynthesisOptions& options = {});

/// Dispatches on plan.mode. pool may be null for generate plans.
SynthesisResult run_synthesis(const SynthesisPlan& plan, const Dataset* pool, const Dataset& exemplar_source,
                              const TaskSpec& task, TeacherClient& backend, const SynthesisOptions& options = {});

}  // namespace synthaug
