// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "synthaug/corpus.hpp"

namespace synthaug {

/// Lowercased runs of alphanumeric characters. Bytes >= 0x80 count as
/// alphanumeric so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct PrfScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Harmonic mean, 0 when both are 0.
double f1_score(double precision, double recall) noexcept;

/// Clipped n-gram overlap; n must be 1 or 2.
PrfScore rouge_n(std::string_view candidate, std::string_view reference, int n);
PrfScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n);

/// Longest common subsequence over tokens, beta = 1.
PrfScore rouge_l(std::string_view candidate, std::string_view reference);
PrfScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct RougeScore {
    PrfScore rouge1;
    PrfScore rouge2;
    PrfScore rougeL;
};

RougeScore score_pair(std::string_view candidate, std::string_view reference);

/// Best reference per component, by f1.
RougeScore score_pair_multi(std::string_view candidate, std::span<const std::string> references);

enum class RougeAggregation {
    macro,  // mean of per-pair scores
    micro,  // pooled overlap counts
};

using TextPair = std::pair<std::string, std::string>;  // (candidate, reference)

/// Throws ValidationError on an empty input.
RougeScore corpus_rouge(std::span<const TextPair> pairs, RougeAggregation aggregation = RougeAggregation::macro);

struct AccuracyReport {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
};

/// Predictions and gold are matched by id; both sets must hold the same ids.
AccuracyReport accuracy(std::span<const Example> predictions, std::span<const Example> gold, bool normalize);

struct MetricsReport {
    TaskKind kind = TaskKind::classification;
    std::optional<RougeScore> rouge;
    std::optional<AccuracyReport> accuracy;
};

MetricsReport make_report(const RougeScore& rouge);
MetricsReport make_report(const AccuracyReport& acc);

/// {"rouge1":{"p","r","f"},"rouge2":...,"rougeL":...} or {"correct","total","accuracy"}.
nlohmann::ordered_json to_json(const MetricsReport& report);

/// Throws MetricsSchemaError naming the offending field, prefixed by where.
MetricsReport metrics_from_json(const nlohmann::json& j, const std::string& where);

/// Headline number used for ranking: accuracy, or Rouge-L f1.
double primary_score(const MetricsReport& report);

/// Human-readable table, scores in percent with 2 decimals.
std::string format_table(const MetricsReport& report);

std::string format_percent(double fraction);

}  // namespace synthaug
