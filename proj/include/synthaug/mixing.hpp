// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthaug/corpus.hpp"
#include "synthaug/synthesis.hpp"

namespace synthaug {

/// Composition of an augmented training set. Both fractions are relative to
/// base_n, the size of the full original training set; the synthetic one may
/// exceed 1.
struct MixPlan {
    double original_fraction = 0.0;
    double synthetic_fraction = 0.0;
    std::size_t base_n = 0;
    std::uint64_t seed = 0;
    // The original dataset passed in is the full training set; draw the
    // original subset from it instead of taking it as already sampled.
    bool original_is_full = false;
    // Keep an origin marker on every exported example (debugging only).
    bool keep_markers = false;

    void validate() const;
    std::size_t original_count() const { return fraction_count(original_fraction, base_n); }
    std::size_t synthetic_count() const { return fraction_count(synthetic_fraction, base_n); }
};

nlohmann::ordered_json to_json(const MixPlan& plan);

enum class Origin { original, synthetic };

struct Composition {
    std::size_t original = 0;
    std::size_t synthetic = 0;

    friend bool operator==(const Composition&, const Composition&) = default;
};

struct AugmentedDataset {
    std::vector<Example> examples;
    std::vector<Origin> origins;  // parallel to examples
    Composition composition;
    MixPlan plan;
    std::string original_digest;
    std::string synthetic_digest;
    std::uint64_t shuffle_seed = 0;
};

/// Id under which a synthetic record enters the training set.
std::string synthetic_example_id(const SyntheticRecord& rec);

/// originals + the first synthetic_count() records (in the given order, which
/// synthesis emits by job_index), then one seeded shuffle of the whole.
/// Throws ValidationError when the synthetic pool is too small.
AugmentedDataset build_augmented(const Dataset& original, std::span<const SyntheticRecord> synthetic,
                                 const MixPlan& plan);

/// "1%", "254%", or "1.23%" when the count is not on the integer percent grid.
std::string format_share(std::size_t count, std::size_t base_n);

/// "<original> / <synthetic>", e.g. "1% / 10%".
std::string composition_summary(const Composition& c, std::size_t base_n);

/// Small text table with fractions and absolute counts.
std::string composition_report(const AugmentedDataset& a);

/// The plain training set (no markers) as a train-split Dataset.
Dataset to_dataset(const AugmentedDataset& a, const std::string& task_id);

/// JSONL (with an "origin" field per line when plan.keep_markers) plus a
/// "<path>.provenance.json" sidecar.
void save_augmented(const AugmentedDataset& a, const std::filesystem::path& path);

nlohmann::ordered_json provenance_json(const AugmentedDataset& a);

}  // namespace synthaug
