// SPDX-License-Identifier: Apache-2.0

#include "test_support.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <stdexcept>

#include "synthaug/rng.hpp"

namespace synthaug::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_text(const fs::path& p, const std::string& body) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << body;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

void write_examples(const fs::path& p, const std::vector<Example>& examples) { write_text(p, to_jsonl(examples)); }

namespace {

std::vector<std::vector<std::string>> grams(const std::vector<std::string>& t, int n) {
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= t.size(); ++i) {
        out.emplace_back(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i) + n);
    }
    return out;
}

OracleScore prf(std::size_t hits, std::size_t c, std::size_t r) {
    OracleScore s;
    if (c == 0 || r == 0) return s;
    s.p = static_cast<double>(hits) / static_cast<double>(c);
    s.r = static_cast<double>(hits) / static_cast<double>(r);
    s.f = s.p + s.r > 0.0 ? 2.0 * s.p * s.r / (s.p + s.r) : 0.0;
    return s;
}

bool is_subsequence(const std::vector<std::string>& needle, const std::vector<std::string>& hay) {
    std::size_t j = 0;
    for (std::size_t i = 0; i < hay.size() && j < needle.size(); ++i) {
        if (hay[i] == needle[j]) ++j;
    }
    return j == needle.size();
}

}  // namespace

OracleScore oracle_rouge_n(const std::vector<std::string>& cand, const std::vector<std::string>& ref, int n) {
    const auto c = grams(cand, n);
    const auto r = grams(ref, n);
    std::vector<bool> used(r.size(), false);
    std::size_t hits = 0;
    for (const auto& g : c) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (!used[j] && r[j] == g) {
                used[j] = true;
                ++hits;
                break;
            }
        }
    }
    return prf(hits, c.size(), r.size());
}

std::size_t oracle_lcs(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    if (cand.size() > 20) throw std::invalid_argument("oracle_lcs: candidate too long for enumeration");
    std::size_t best = 0;
    const std::uint32_t subsets = 1u << cand.size();
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
        std::vector<std::string> sub;
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (mask & (1u << i)) sub.push_back(cand[i]);
        }
        if (sub.size() > best && is_subsequence(sub, ref)) best = sub.size();
    }
    return best;
}

OracleScore oracle_rouge_l(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    return prf(oracle_lcs(cand, ref), cand.size(), ref.size());
}

TaskSpec parity_task() {
    TaskSpec t;
    t.task_id = "token-parity";
    t.description = "Decide whether the number of tokens in the input is even or odd.";
    t.kind = TaskKind::classification;
    t.label_set = {"even", "odd"};
    return t;
}

std::string parity_label(const std::string& input) {
    std::size_t tokens = 0;
    bool in_token = false;
    for (char c : input) {
        if (c == ' ') {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++tokens;
        }
    }
    return tokens % 2 == 0 ? "even" : "odd";
}

std::vector<Example> parity_examples(std::size_t n, std::uint64_t seed, const std::string& id_prefix) {
    Rng rng(seed);
    std::vector<Example> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto len = 1 + rng.below(14);
        std::string input;
        for (std::uint64_t i = 1; i <= len; ++i) {
            if (!input.empty()) input += ' ';
            input += (rng.unit() < 0.05 ? "x" : "w") + std::to_string(i);
        }
        Example ex;
        ex.id = id_prefix + std::to_string(k);
        ex.output = parity_label(input);
        ex.input = std::move(input);
        out.push_back(std::move(ex));
    }
    return out;
}

ParityFiles write_parity_scenario(const fs::path& dir, std::size_t pool, std::size_t eval, std::uint64_t seed) {
    ParityFiles f{dir / "task.json", dir / "train.jsonl", dir / "dev.jsonl", dir / "test.jsonl", dir / "table.jsonl"};
    write_json(f.task, nlohmann::json::parse(to_json(parity_task()).dump()));
    const auto train = parity_examples(pool, derive_seed(seed, "parity/train"), "train-");
    write_examples(f.train, train);
    write_examples(f.dev, parity_examples(eval, derive_seed(seed, "parity/dev"), "dev-"));
    write_examples(f.test, parity_examples(eval, derive_seed(seed, "parity/test"), "test-"));
    std::vector<Example> table;
    for (std::size_t i = 0; i < train.size(); ++i) table.push_back({"row-" + std::to_string(i), train[i].input, train[i].output});
    write_examples(f.table, table);
    return f;
}

nlohmann::json parity_manifest(const ParityFiles& f, std::uint64_t seed, const std::string& mode,
                               double original_fraction, double synthetic_fraction, const std::string& output_dir) {
    nlohmann::json m;
    m["schema_version"] = 1;
    m["seed"] = seed;
    m["task"] = f.task.filename().string();
    m["data"] = {{"train", f.train.filename().string()},
                 {"dev", f.dev.filename().string()},
                 {"test", f.test.filename().string()}};
    m["backend"] = {{"kind", "mock-lookup"}, {"table", f.table.filename().string()}, {"parallelism", 4}};
    m["plan"] = {{"mode", mode}, {"exemplars", {{"k", 8}}}};
    m["mix"] = {{"original_fraction", original_fraction}, {"synthetic_fraction", synthetic_fraction}};
    m["output_dir"] = output_dir;
    return m;
}

}  // namespace synthaug::testing
