// SPDX-License-Identifier: Apache-2.0

#include "synthaug/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "synthaug/error.hpp"
#include "synthaug/text.hpp"

namespace synthaug {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_word_byte(unsigned char c) noexcept {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

// Tokens never contain this byte, so it separates n-gram members safely.
constexpr char kJoin = '\x1f';

std::unordered_map<std::string, std::size_t> ngram_counts(std::span<const std::string> tokens, int n) {
    std::unordered_map<std::string, std::size_t> counts;
    const auto un = static_cast<std::size_t>(n);
    if (tokens.size() < un) return counts;
    for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t k = 1; k < un; ++k) {
            key.push_back(kJoin);
            key += tokens[i + k];
        }
        ++counts[key];
    }
    return counts;
}

struct Overlap {
    std::size_t hits = 0;
    std::size_t candidate_total = 0;
    std::size_t reference_total = 0;
};

Overlap ngram_overlap(std::span<const std::string> cand, std::span<const std::string> ref, int n) {
    if (n != 1 && n != 2) throw ValidationError("rouge_n: n must be 1 or 2");
    const auto c = ngram_counts(cand, n);
    const auto r = ngram_counts(ref, n);
    Overlap o;
    for (const auto& [gram, count] : c) {
        o.candidate_total += count;
        if (auto it = r.find(gram); it != r.end()) o.hits += std::min(count, it->second);
    }
    for (const auto& [gram, count] : r) o.reference_total += count;
    return o;
}

PrfScore from_overlap(std::size_t hits, std::size_t cand_total, std::size_t ref_total) {
    PrfScore s;
    if (cand_total == 0 || ref_total == 0) return s;
    s.precision = static_cast<double>(hits) / static_cast<double>(cand_total);
    s.recall = static_cast<double>(hits) / static_cast<double>(ref_total);
    s.f1 = f1_score(s.precision, s.recall);
    return s;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

double f1_score(double precision, double recall) noexcept {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

PrfScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n) {
    const auto o = ngram_overlap(candidate, reference, n);
    return from_overlap(o.hits, o.candidate_total, o.reference_total);
}

PrfScore rouge_n(std::string_view candidate, std::string_view reference, int n) {
    return rouge_n(tokenize(candidate), tokenize(reference), n);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

PrfScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
    return from_overlap(lcs_length(candidate, reference), candidate.size(), reference.size());
}

PrfScore rouge_l(std::string_view candidate, std::string_view reference) {
    return rouge_l(tokenize(candidate), tokenize(reference));
}

RougeScore score_pair(std::string_view candidate, std::string_view reference) {
    const auto c = tokenize(candidate);
    const auto r = tokenize(reference);
    return {rouge_n(c, r, 1), rouge_n(c, r, 2), rouge_l(c, r)};
}

RougeScore score_pair_multi(std::string_view candidate, std::span<const std::string> references) {
    if (references.empty()) throw ValidationError("score_pair_multi: no references");
    RougeScore best = score_pair(candidate, references.front());
    for (std::size_t i = 1; i < references.size(); ++i) {
        const auto s = score_pair(candidate, references[i]);
        if (s.rouge1.f1 > best.rouge1.f1) best.rouge1 = s.rouge1;
        if (s.rouge2.f1 > best.rouge2.f1) best.rouge2 = s.rouge2;
        if (s.rougeL.f1 > best.rougeL.f1) best.rougeL = s.rougeL;
    }
    return best;
}

RougeScore corpus_rouge(std::span<const TextPair> pairs, RougeAggregation aggregation) {
    if (pairs.empty()) throw ValidationError("corpus_rouge: no pairs to score");
    if (aggregation == RougeAggregation::micro) {
        Overlap o1, o2;
        std::size_t lcs = 0, cand_len = 0, ref_len = 0;
        for (const auto& [cand, ref] : pairs) {
            const auto c = tokenize(cand);
            const auto r = tokenize(ref);
            const auto a = ngram_overlap(c, r, 1);
            const auto b = ngram_overlap(c, r, 2);
            o1.hits += a.hits;
            o1.candidate_total += a.candidate_total;
            o1.reference_total += a.reference_total;
            o2.hits += b.hits;
            o2.candidate_total += b.candidate_total;
            o2.reference_total += b.reference_total;
            lcs += lcs_length(c, r);
            cand_len += c.size();
            ref_len += r.size();
        }
        return {from_overlap(o1.hits, o1.candidate_total, o1.reference_total),
                from_overlap(o2.hits, o2.candidate_total, o2.reference_total), from_overlap(lcs, cand_len, ref_len)};
    }

    RougeScore sum;
    auto add = [](PrfScore& acc, const PrfScore& s) {
        acc.precision += s.precision;
        acc.recall += s.recall;
        acc.f1 += s.f1;
    };
    for (const auto& [cand, ref] : pairs) {
        const auto s = score_pair(cand, ref);
        add(sum.rouge1, s.rouge1);
        add(sum.rouge2, s.rouge2);
        add(sum.rougeL, s.rougeL);
    }
    const auto n = static_cast<double>(pairs.size());
    for (PrfScore* s : {&sum.rouge1, &sum.rouge2, &sum.rougeL}) {
        s->precision /= n;
        s->recall /= n;
        s->f1 /= n;
    }
    return sum;
}

AccuracyReport accuracy(std::span<const Example> predictions, std::span<const Example> gold, bool normalize) {
    if (predictions.size() != gold.size()) {
        throw ValidationError("accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                              std::to_string(gold.size()) + " gold examples");
    }
    std::unordered_map<std::string_view, const Example*> by_id;
    for (const auto& p : predictions) by_id.emplace(p.id, &p);

    AccuracyReport report;
    report.total = gold.size();
    for (const auto& g : gold) {
        auto it = by_id.find(g.id);
        if (it == by_id.end()) throw ValidationError("accuracy: no prediction for id '" + g.id + "'");
        if (!g.output) throw ValidationError("accuracy: gold example '" + g.id + "' is unlabeled");
        const auto& pred = it->second->output;
        if (!pred) continue;
        const bool hit = normalize ? normalize_text(*pred) == normalize_text(*g.output) : *pred == *g.output;
        if (hit) ++report.correct;
    }
    report.accuracy = report.total == 0 ? 0.0 : static_cast<double>(report.correct) / static_cast<double>(report.total);
    return report;
}

MetricsReport make_report(const RougeScore& rouge) {
    MetricsReport r;
    r.kind = TaskKind::generation;
    r.rouge = rouge;
    return r;
}

MetricsReport make_report(const AccuracyReport& acc) {
    MetricsReport r;
    r.kind = TaskKind::classification;
    r.accuracy = acc;
    return r;
}

namespace {

ordered_json prf_json(const PrfScore& s) {
    ordered_json j;
    j["p"] = s.precision;
    j["r"] = s.recall;
    j["f"] = s.f1;
    return j;
}

const json& require(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw MetricsSchemaError(where + "." + key);
    return j.at(key);
}

double require_unit(const json& j, const std::string& key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_number()) throw MetricsSchemaError(where + "." + key);
    const double x = v.get<double>();
    if (!(x >= 0.0 && x <= 1.0)) throw MetricsSchemaError(where + "." + key);
    return x;
}

PrfScore prf_from_json(const json& j, const std::string& key, const std::string& where) {
    const auto& block = require(j, key, where);
    const auto path = where + "." + key;
    if (!block.is_object()) throw MetricsSchemaError(path);
    return {require_unit(block, "p", path), require_unit(block, "r", path), require_unit(block, "f", path)};
}

}  // namespace

ordered_json to_json(const MetricsReport& report) {
    ordered_json j;
    if (report.kind == TaskKind::generation) {
        const RougeScore s = report.rouge.value_or(RougeScore{});
        j["rouge1"] = prf_json(s.rouge1);
        j["rouge2"] = prf_json(s.rouge2);
        j["rougeL"] = prf_json(s.rougeL);
    } else {
        const AccuracyReport a = report.accuracy.value_or(AccuracyReport{});
        j["correct"] = a.correct;
        j["total"] = a.total;
        j["accuracy"] = a.accuracy;
    }
    return j;
}

MetricsReport metrics_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw MetricsSchemaError(where);
    if (j.contains("rouge1") || j.contains("rouge2") || j.contains("rougeL")) {
        RougeScore s{prf_from_json(j, "rouge1", where), prf_from_json(j, "rouge2", where),
                     prf_from_json(j, "rougeL", where)};
        return make_report(s);
    }
    AccuracyReport a;
    const auto& correct = require(j, "correct", where);
    const auto& total = require(j, "total", where);
    if (!correct.is_number_unsigned() && !(correct.is_number_integer() && correct.get<long long>() >= 0)) {
        throw MetricsSchemaError(where + ".correct");
    }
    if (!total.is_number_unsigned() && !(total.is_number_integer() && total.get<long long>() >= 0)) {
        throw MetricsSchemaError(where + ".total");
    }
    a.correct = correct.get<std::size_t>();
    a.total = total.get<std::size_t>();
    if (a.correct > a.total) throw MetricsSchemaError(where + ".correct");
    a.accuracy = require_unit(j, "accuracy", where);
    return make_report(a);
}

double primary_score(const MetricsReport& report) {
    if (report.kind == TaskKind::classification) return report.accuracy ? report.accuracy->accuracy : 0.0;
    return report.rouge ? report.rouge->rougeL.f1 : 0.0;
}

std::string format_percent(double fraction) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << 100.0 * fraction;
    return ss.str();
}

std::string format_table(const MetricsReport& report) {
    std::ostringstream ss;
    if (report.kind == TaskKind::classification) {
        const AccuracyReport a = report.accuracy.value_or(AccuracyReport{});
        ss << "accuracy  " << format_percent(a.accuracy) << "  (" << a.correct << "/" << a.total << ")\n";
        return ss.str();
    }
    const RougeScore s = report.rouge.value_or(RougeScore{});
    ss << std::left << std::setw(9) << "metric" << std::right << std::setw(10) << "precision" << std::setw(10) << "recall"
       << std::setw(10) << "f1" << "\n";
    auto row = [&](const char* name, const PrfScore& p) {
        ss << std::left << std::setw(9) << name << std::right << std::setw(10) << format_percent(p.precision)
           << std::setw(10) << format_percent(p.recall) << std::setw(10) << format_percent(p.f1) << "\n";
    };
    row("rouge-1", s.rouge1);
    row("rouge-2", s.rouge2);
    row("rouge-l", s.rougeL);
    return ss.str();
}

}  // namespace synthaug
