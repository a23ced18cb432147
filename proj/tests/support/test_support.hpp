// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthaug/corpus.hpp"

namespace synthaug::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "synthaug");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_text(const std::filesystem::path& p, const std::string& body);
void write_json(const std::filesystem::path& p, const nlohmann::json& j);
void write_examples(const std::filesystem::path& p, const std::vector<Example>& examples);

// Brute-force references for the metrics module.
struct OracleScore {
    double p = 0.0;
    double r = 0.0;
    double f = 0.0;
};
/// Greedy one-to-one matching of candidate n-grams against unused reference n-grams.
OracleScore oracle_rouge_n(const std::vector<std::string>& cand, const std::vector<std::string>& ref, int n);
/// Longest subsequence of cand (over all 2^|cand| subsets) that is also a subsequence of ref.
std::size_t oracle_lcs(const std::vector<std::string>& cand, const std::vector<std::string>& ref);
OracleScore oracle_rouge_l(const std::vector<std::string>& cand, const std::vector<std::string>& ref);

/// Token-count parity task: inputs of 1..14 tokens ("w<i>", or "x<i>" with
/// probability 0.05), labelled "even" or "odd".
TaskSpec parity_task();
std::vector<Example> parity_examples(std::size_t n, std::uint64_t seed, const std::string& id_prefix);
std::string parity_label(const std::string& input);

/// Writes task.json, train/dev/test JSONL and a lookup table holding the true
/// label of every train input, for a parity scenario.
struct ParityFiles {
    std::filesystem::path task;
    std::filesystem::path train;
    std::filesystem::path dev;
    std::filesystem::path test;
    std::filesystem::path table;
};
ParityFiles write_parity_scenario(const std::filesystem::path& dir, std::size_t pool, std::size_t eval,
                                  std::uint64_t seed);

/// Manifest JSON for a mock-lookup run over a parity scenario.
nlohmann::json parity_manifest(const ParityFiles& f, std::uint64_t seed, const std::string& mode,
                               double original_fraction, double synthetic_fraction, const std::string& output_dir);

}  // namespace synthaug::testing
