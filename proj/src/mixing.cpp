// SPDX-License-Identifier: Apache-2.0

#include "synthaug/mixing.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "synthaug/digest.hpp"
#include "synthaug/error.hpp"
#include "synthaug/rng.hpp"

namespace synthaug {

using nlohmann::ordered_json;

void MixPlan::validate() const {
    if (!(original_fraction >= 0.0 && original_fraction <= 1.0)) {
        throw ValidationError("mix plan: original_fraction must lie in [0, 1]");
    }
    if (!(synthetic_fraction >= 0.0) || !std::isfinite(synthetic_fraction)) {
        throw ValidationError("mix plan: synthetic_fraction must be finite and non-negative");
    }
}

ordered_json to_json(const MixPlan& plan) {
    ordered_json j;
    j["original_fraction"] = plan.original_fraction;
    j["synthetic_fraction"] = plan.synthetic_fraction;
    j["base_n"] = plan.base_n;
    j["seed"] = plan.seed;
    j["original_is_full"] = plan.original_is_full;
    j["keep_markers"] = plan.keep_markers;
    j["rng"] = kRngVersion;
    return j;
}

std::string synthetic_example_id(const SyntheticRecord& rec) {
    std::ostringstream ss;
    ss << "synthetic-" << to_string(rec.mode) << "-" << std::setw(6) << std::setfill('0') << rec.job_index;
    return ss.str();
}

AugmentedDataset build_augmented(const Dataset& original, std::span<const SyntheticRecord> synthetic,
                                 const MixPlan& plan) {
    plan.validate();
    const std::size_t n_o = plan.original_count();
    const std::size_t n_s = plan.synthetic_count();

    Dataset originals = plan.original_is_full
                            ? sample_fraction(original, plan.original_fraction, derive_seed(plan.seed, "mix/original"))
                            : original;
    if (originals.size() != n_o) {
        throw ValidationError("mix: original subset has " + std::to_string(originals.size()) + " examples, expected " +
                              std::to_string(n_o) + " = round(" + std::to_string(plan.original_fraction) + " * " +
                              std::to_string(plan.base_n) + ")");
    }
    if (synthetic.size() < n_s) {
        throw ValidationError("mix: insufficient synthetic pool: need " + std::to_string(n_s) + ", have " +
                              std::to_string(synthetic.size()) + " (short by " + std::to_string(n_s - synthetic.size()) +
                              ")");
    }

    AugmentedDataset a;
    a.plan = plan;
    a.composition = {n_o, n_s};
    a.original_digest = dataset_digest(originals);
    a.synthetic_digest = sha256_hex(to_jsonl(synthetic.first(n_s)));
    a.shuffle_seed = derive_seed(plan.seed, "mix/shuffle");

    std::vector<Example> merged;
    std::vector<Origin> origins;
    merged.reserve(n_o + n_s);
    std::unordered_set<std::string> ids;
    for (const auto& ex : originals.examples()) {
        merged.push_back(ex);
        origins.push_back(Origin::original);
        ids.insert(ex.id);
    }
    for (const auto& rec : synthetic.first(n_s)) {
        Example ex{synthetic_example_id(rec), rec.input, rec.output};
        if (!ids.insert(ex.id).second) throw ValidationError("mix: example id '" + ex.id + "' occurs twice");
        merged.push_back(std::move(ex));
        origins.push_back(Origin::synthetic);
    }

    std::vector<std::size_t> order(merged.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(a.shuffle_seed);
    rng.shuffle(std::span<std::size_t>(order));

    a.examples.reserve(order.size());
    a.origins.reserve(order.size());
    for (auto i : order) {
        a.examples.push_back(std::move(merged[i]));
        a.origins.push_back(origins[i]);
    }
    return a;
}

std::string format_share(std::size_t count, std::size_t base_n) {
    if (base_n == 0 || count == 0) return "0%";
    const double pct = 100.0 * static_cast<double>(count) / static_cast<double>(base_n);
    const auto grid = static_cast<std::size_t>(std::llround(pct));
    if (fraction_count(static_cast<double>(grid) / 100.0, base_n) == count) return std::to_string(grid) + "%";
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << pct << "%";
    return ss.str();
}

std::string composition_summary(const Composition& c, std::size_t base_n) {
    return format_share(c.original, base_n) + " / " + format_share(c.synthetic, base_n);
}

std::string composition_report(const AugmentedDataset& a) {
    const auto base = a.plan.base_n;
    const auto total = a.composition.original + a.composition.synthetic;
    std::ostringstream ss;
    ss << "data amount (original / synthetic): " << composition_summary(a.composition, base) << "\n";
    ss << std::left << std::setw(11) << "part" << std::right << std::setw(10) << "share" << std::setw(12) << "examples"
       << "\n";
    ss << std::left << std::setw(11) << "original" << std::right << std::setw(10) << format_share(a.composition.original, base)
       << std::setw(12) << a.composition.original << "\n";
    ss << std::left << std::setw(11) << "synthetic" << std::right << std::setw(10)
       << format_share(a.composition.synthetic, base) << std::setw(12) << a.composition.synthetic << "\n";
    ss << std::left << std::setw(11) << "total" << std::right << std::setw(10) << format_share(total, base) << std::setw(12)
       << total << "\n";
    ss << "relative to base N = " << base << "\n";
    return ss.str();
}

Dataset to_dataset(const AugmentedDataset& a, const std::string& task_id) {
    return Dataset(task_id, Split::train, a.examples);
}

ordered_json provenance_json(const AugmentedDataset& a) {
    ordered_json j;
    j["plan"] = to_json(a.plan);
    j["composition"] = {{"original", a.composition.original}, {"synthetic", a.composition.synthetic}};
    j["summary"] = composition_summary(a.composition, a.plan.base_n);
    j["original_digest"] = a.original_digest;
    j["synthetic_digest"] = a.synthetic_digest;
    j["shuffle_seed"] = a.shuffle_seed;
    return j;
}

void save_augmented(const AugmentedDataset& a, const std::filesystem::path& path) {
    std::string body;
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
        auto j = to_json(a.examples[i]);
        if (a.plan.keep_markers) j["origin"] = a.origins[i] == Origin::original ? "original" : "synthetic";
        body += j.dump();
        body.push_back('\n');
    }
    write_file(path, body);
    auto sidecar = path;
    sidecar += ".provenance.json";
    write_file(sidecar, provenance_json(a).dump(2) + "\n");
}

}  // namespace synthaug
