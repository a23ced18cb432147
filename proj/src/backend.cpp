// SPDX-License-Identifier: Apache-2.0

#include "synthaug/backend.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <optional>
#include <thread>

#include "synthaug/error.hpp"
#include "synthaug/rng.hpp"

namespace synthaug {

using nlohmann::json;
using nlohmann::ordered_json;

double default_temperature(PromptMode mode) noexcept {
    return mode == PromptMode::annotate ? 0.1 : 0.8;
}

std::size_t default_max_tokens(TaskKind kind) noexcept {
    return kind == TaskKind::classification ? 64 : 256;
}

void CompletionRequest::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw ValidationError("completion request: temperature outside [0, 2]");
    if (max_tokens < 1) throw ValidationError("completion request: max_tokens must be at least 1");
    if (stop.empty()) throw ValidationError("completion request: stop list is empty");
    for (const auto& s : stop) {
        if (s.empty()) throw ValidationError("completion request: empty stop string");
    }
}

std::string_view to_string(BackendKind kind) noexcept {
    switch (kind) {
        case BackendKind::http: return "http";
        case BackendKind::mock_lookup: return "mock-lookup";
        case BackendKind::mock_echo: return "mock-echo";
        case BackendKind::mock_scripted: return "mock-scripted";
    }
    return "http";
}

BackendKind parse_backend_kind(std::string_view name) {
    if (name == "http") return BackendKind::http;
    if (name == "mock-lookup") return BackendKind::mock_lookup;
    if (name == "mock-echo") return BackendKind::mock_echo;
    if (name == "mock-scripted") return BackendKind::mock_scripted;
    throw ValidationError("unknown backend kind '" + std::string(name) + "'");
}

void BackendConfig::validate() const {
    if (kind == BackendKind::http) {
        if (endpoint.empty()) throw ValidationError("backend: http backend needs an endpoint");
        if (!endpoint.starts_with("http://") && !endpoint.starts_with("https://")) {
            throw ValidationError("backend: endpoint must be an http:// or https:// URL");
        }
    }
    if (parallelism < 1) throw ValidationError("backend: parallelism must be at least 1");
    if (retry.max_attempts < 1) throw ValidationError("backend: retry.max_attempts must be at least 1");
    if (retry.backoff_multiplier < 1.0) throw ValidationError("backend: retry.backoff_multiplier must be >= 1");
    if (retry.base_backoff.count() < 0) throw ValidationError("backend: retry.base_backoff must be >= 0");
    if (timeout.count() <= 0) throw ValidationError("backend: timeout must be positive");
    if (kind == BackendKind::mock_scripted && script.empty()) throw ValidationError("backend: scripted mock has an empty script");
    if (kind == BackendKind::mock_lookup && lookup_table.empty()) throw ValidationError("backend: lookup mock has an empty table");
}

BackendConfig backend_from_json(const json& j, const std::filesystem::path& base_dir) {
    BackendConfig cfg;
    try {
        cfg.kind = parse_backend_kind(j.at("kind").get<std::string>());
        cfg.endpoint = j.value("endpoint", std::string{});
        cfg.model_name = j.value("model_name", std::string(to_string(cfg.kind)));
        cfg.auth_env = j.value("auth_env", std::string{});
        cfg.parallelism = j.value("parallelism", std::size_t{1});
        if (j.contains("retry")) {
            const auto& r = j.at("retry");
            cfg.retry.max_attempts = r.value("max_attempts", cfg.retry.max_attempts);
            cfg.retry.base_backoff = std::chrono::milliseconds(r.value("base_backoff_ms", cfg.retry.base_backoff.count()));
            cfg.retry.backoff_multiplier = r.value("backoff_multiplier", cfg.retry.backoff_multiplier);
        }
        if (j.contains("timeout_s")) {
            cfg.timeout = std::chrono::milliseconds(static_cast<long long>(std::llround(j.at("timeout_s").get<double>() * 1000.0)));
        }
        cfg.mock_latency = std::chrono::milliseconds(j.value("latency_ms", 0LL));
        if (j.contains("script")) cfg.script = j.at("script").get<std::vector<std::string>>();
        if (j.contains("table")) {
            const auto& t = j.at("table");
            if (t.is_string()) {
                auto path = std::filesystem::path(t.get<std::string>());
                if (path.is_relative()) path = base_dir / path;
                TaskSpec any{"lookup-table", "", TaskKind::generation, {}, {}};
                const auto ds = load_jsonl(path, Split::train, any);
                for (const auto& ex : ds.examples()) cfg.lookup_table.emplace_back(ex.input, *ex.output);
            } else {
                for (const auto& [k, v] : t.items()) cfg.lookup_table.emplace_back(k, v.get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("backend config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ordered_json describe(const BackendConfig& cfg) {
    ordered_json j;
    j["kind"] = to_string(cfg.kind);
    j["model_name"] = cfg.model_name;
    if (!cfg.endpoint.empty()) j["endpoint"] = cfg.endpoint;
    if (!cfg.auth_env.empty()) j["auth_env"] = cfg.auth_env;
    j["parallelism"] = cfg.parallelism;
    j["retry"] = {{"max_attempts", cfg.retry.max_attempts},
                  {"base_backoff_ms", cfg.retry.base_backoff.count()},
                  {"backoff_multiplier", cfg.retry.backoff_multiplier}};
    j["timeout_ms"] = cfg.timeout.count();
    if (!cfg.lookup_table.empty()) j["lookup_entries"] = cfg.lookup_table.size();
    if (!cfg.script.empty()) j["script_entries"] = cfg.script.size();
    return j;
}

std::string strip_at_stop(std::string text, const std::vector<std::string>& stop) {
    std::size_t cut = std::string::npos;
    for (const auto& s : stop) {
        if (s.empty()) continue;
        cut = std::min(cut, text.find(s));
    }
    if (cut != std::string::npos) text.resize(cut);
    return text;
}

TeacherClient::TeacherClient(BackendConfig cfg)
    : cfg_(std::move(cfg)), slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(cfg_.parallelism, 1))) {
    cfg_.validate();
    for (const auto& [in, out] : cfg_.lookup_table) lookup_.emplace(in, out);
    if (!cfg_.auth_env.empty()) {
        const char* token = std::getenv(cfg_.auth_env.c_str());
        if (token == nullptr || *token == '\0') {
            throw ValidationError("backend: environment variable " + cfg_.auth_env + " is not set");
        }
        bearer_token_ = token;
    }
}

namespace {

class SlotGuard {
public:
    SlotGuard(std::counting_semaphore<>& slots, std::atomic<std::size_t>& in_flight, std::atomic<std::size_t>& peak)
        : slots_(slots), in_flight_(in_flight) {
        slots_.acquire();
        const auto now = in_flight_.fetch_add(1) + 1;
        auto seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
    }
    ~SlotGuard() {
        in_flight_.fetch_sub(1);
        slots_.release();
    }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

private:
    std::counting_semaphore<>& slots_;
    std::atomic<std::size_t>& in_flight_;
};

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string base_path;
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto path_at = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = url.substr(0, path_at);
    if (path_at != std::string::npos) ep.base_path = url.substr(path_at);
    while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
    return ep;
}

std::string server_message(const std::string& body) {
    auto j = json::parse(body, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("error")) {
        const auto& e = j.at("error");
        if (e.is_object() && e.contains("message") && e.at("message").is_string()) return e.at("message").get<std::string>();
        if (e.is_string()) return e.get<std::string>();
    }
    return body;
}

// The segment text after the last non-empty [INPUT] tag, minus a trailing
// terminal tag.
std::string last_input_segment(std::string_view prompt) {
    std::size_t end = prompt.size();
    while (true) {
        const auto at = prompt.rfind(kInputTag, end == 0 ? 0 : end - 1);
        if (at == std::string_view::npos || at >= end) return {};
        auto seg = prompt.substr(at + kInputTag.size(), end - at - kInputTag.size());
        if (seg.ends_with(kOutputTag)) seg.remove_suffix(kOutputTag.size());
        while (!seg.empty() && seg.back() == '\n') seg.remove_suffix(1);
        if (!seg.empty()) return std::string(seg);
        if (at == 0) return {};
        end = at;
    }
}

}  // namespace

std::string TeacherClient::mock_once(const CompletionRequest& req) {
    if (cfg_.mock_latency.count() > 0) std::this_thread::sleep_for(cfg_.mock_latency);
    switch (cfg_.kind) {
        case BackendKind::mock_echo:
            return last_input_segment(req.prompt);
        case BackendKind::mock_scripted:
            return cfg_.script[req.sequence % cfg_.script.size()];
        case BackendKind::mock_lookup: {
            const std::string_view prompt = req.prompt;
            if (prompt.ends_with(kOutputTag)) {
                static constexpr std::string_view kTargetStart = "[INPUT] ";
                static constexpr std::string_view kTargetEnd = "\n[OUTPUT]";
                const auto at = prompt.rfind(kTargetStart);
                if (at == std::string_view::npos) throw LookupMiss("lookup mock: annotate prompt without a target");
                const auto begin = at + kTargetStart.size();
                const std::string key(prompt.substr(begin, prompt.size() - kTargetEnd.size() - begin));
                auto it = lookup_.find(key);
                if (it == lookup_.end()) throw LookupMiss("lookup mock: no entry for input '" + key + "'");
                return " " + it->second;
            }
            // Generate prompt: emit a table pair chosen by the request seed.
            const auto& [in, out] = cfg_.lookup_table[splitmix64(req.seed) % cfg_.lookup_table.size()];
            return " " + in + "\n" + std::string(kOutputTag) + " " + out;
        }
        case BackendKind::http:
            break;
    }
    throw Error("mock_once called on a non-mock backend");
}

std::string TeacherClient::http_once(const CompletionRequest& req, bool& retryable) {
    const auto ep = split_endpoint(cfg_.endpoint);
    httplib::Client cli(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());

    ordered_json body;
    body["model"] = cfg_.model_name;
    body["prompt"] = req.prompt;
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;
    body["stop"] = req.stop;
    body["seed"] = req.seed;

    httplib::Headers headers;
    if (!bearer_token_.empty()) headers.emplace("Authorization", "Bearer " + bearer_token_);

    auto res = cli.Post(ep.base_path + "/v1/completions", headers, body.dump(), "application/json");
    if (!res) {
        retryable = true;
        throw BackendUnavailable("transport error: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        retryable = true;
        throw BackendUnavailable("HTTP " + std::to_string(res->status) + ": " + server_message(res->body));
    }
    if (res->status < 200 || res->status >= 300) throw BackendRejected(res->status, server_message(res->body));

    auto j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty() ||
        !j["choices"][0].contains("text") || !j["choices"][0]["text"].is_string()) {
        throw BackendRejected(res->status, "response lacks choices[0].text");
    }
    return j["choices"][0]["text"].get<std::string>();
}

Completion TeacherClient::complete(const CompletionRequest& req) {
    req.validate();
    const auto start = std::chrono::steady_clock::now();
    Completion result;
    result.usage.request_id = req.request_id;
    result.usage.prompt_chars = req.prompt.size();

    if (cfg_.kind != BackendKind::http) {
        SlotGuard guard(slots_, in_flight_, peak_);
        result.text = mock_once(req);
        result.usage.attempts = 1;
    } else {
        double backoff_ms = static_cast<double>(cfg_.retry.base_backoff.count());
        for (std::size_t attempt = 1;; ++attempt) {
            bool retryable = false;
            try {
                SlotGuard guard(slots_, in_flight_, peak_);
                result.text = http_once(req, retryable);
                result.usage.attempts = attempt;
                break;
            } catch (const BackendUnavailable& e) {
                if (!retryable) throw;
                if (attempt >= cfg_.retry.max_attempts) {
                    throw BackendUnavailable("request " + req.request_id + " failed after " + std::to_string(attempt) +
                                             " attempts: " + e.what());
                }
            }
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff_ms));
            backoff_ms *= cfg_.retry.backoff_multiplier;
        }
    }

    result.text = strip_at_stop(std::move(result.text), req.stop);
    result.usage.completion_chars = result.text.size();
    result.usage.latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return result;
}

Completion complete(const BackendConfig& cfg, const CompletionRequest& req) {
    TeacherClient client(cfg);
    return client.complete(req);
}

}  // namespace synthaug
