// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "synthaug/corpus.hpp"
#include "synthaug/prompting.hpp"

namespace synthaug {

/// Sampling temperature the teacher is queried with when a plan does not
/// override it: low for faithful labels, high for diverse generations.
double default_temperature(PromptMode mode) noexcept;

std::size_t default_max_tokens(TaskKind kind) noexcept;

struct CompletionRequest {
    std::string prompt;
    double temperature = 0.0;
    std::size_t max_tokens = 64;
    std::vector<std::string> stop{std::string(kInputTag)};
    std::string request_id;
    // Per-attempt sampling seed, forwarded to the server.
    std::uint64_t seed = 0;
    // Deterministic dispatch ordinal assigned by the caller; the scripted
    // mock replays its script by this ordinal.
    std::uint64_t sequence = 0;

    void validate() const;
};

enum class BackendKind { http, mock_lookup, mock_echo, mock_scripted };

std::string_view to_string(BackendKind kind) noexcept;
BackendKind parse_backend_kind(std::string_view name);

struct RetryPolicy {
    std::size_t max_attempts = 4;
    std::chrono::milliseconds base_backoff{500};
    double backoff_multiplier = 2.0;
};

struct BackendConfig {
    BackendKind kind = BackendKind::mock_echo;
    std::string endpoint;
    std::string model_name = "mock";
    // Name of the environment variable holding the bearer token. The token
    // itself never appears in configuration files.
    std::string auth_env;
    std::size_t parallelism = 1;
    RetryPolicy retry;
    std::chrono::milliseconds timeout{120'000};

    // mock-lookup: input -> output, in table order.
    std::vector<std::pair<std::string, std::string>> lookup_table;
    // mock-scripted: completions replayed by request sequence.
    std::vector<std::string> script;
    // Simulated service time for mocks.
    std::chrono::milliseconds mock_latency{0};

    void validate() const;
};

/// Parses the "backend" block of a manifest. Relative table paths resolve
/// against base_dir.
BackendConfig backend_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Deterministic, secret-free description of a config for ledgers.
nlohmann::ordered_json describe(const BackendConfig& cfg);

struct UsageRecord {
    std::string request_id;
    std::size_t prompt_chars = 0;
    std::size_t completion_chars = 0;
    std::chrono::milliseconds latency{0};
    std::size_t attempts = 1;
};

struct Completion {
    std::string text;
    UsageRecord usage;
};

/// Shareable handle over one teacher. Safe to call from any number of
/// threads; at most config().parallelism requests are in flight at once.
class TeacherClient {
public:
    explicit TeacherClient(BackendConfig cfg);

    TeacherClient(const TeacherClient&) = delete;
    TeacherClient& operator=(const TeacherClient&) = delete;

    Completion complete(const CompletionRequest& req);

    const BackendConfig& config() const noexcept { return cfg_; }

    /// Highest number of simultaneously running requests observed so far.
    std::size_t peak_in_flight() const noexcept { return peak_.load(); }

private:
    std::string http_once(const CompletionRequest& req, bool& retryable);
    std::string mock_once(const CompletionRequest& req);

    BackendConfig cfg_;
    std::unordered_map<std::string, std::string> lookup_;
    std::string bearer_token_;
    std::counting_semaphore<> slots_;
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
};

/// One-shot convenience over a fresh client.
Completion complete(const BackendConfig& cfg, const CompletionRequest& req);

/// Truncates text at the earliest occurrence of any stop string.
std::string strip_at_stop(std::string text, const std::vector<std::string>& stop);

}  // namespace synthaug
