// SPDX-License-Identifier: Apache-2.0

#include "synthaug/synthesis.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <thread>
#include <unordered_set>

#include "synthaug/digest.hpp"
#include "synthaug/error.hpp"
#include "synthaug/rng.hpp"
#include "synthaug/text.hpp"

namespace synthaug {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(SynthesisMode mode) noexcept {
    switch (mode) {
        case SynthesisMode::annotate: return "annotate";
        case SynthesisMode::generate: return "generate";
        case SynthesisMode::combine: return "combine";
    }
    return "annotate";
}

SynthesisMode parse_synthesis_mode(std::string_view name) {
    if (name == "annotate") return SynthesisMode::annotate;
    if (name == "generate") return SynthesisMode::generate;
    if (name == "combine") return SynthesisMode::combine;
    throw ValidationError("unknown synthesis mode '" + std::string(name) + "'");
}

void SynthesisPlan::validate() const {
    if (mode != SynthesisMode::combine && (annotate_count || generate_count)) {
        throw ValidationError("synthesis plan: per-mode counts are only meaningful for combine plans");
    }
    if (temperature && !(*temperature >= 0.0 && *temperature <= 2.0)) {
        throw ValidationError("synthesis plan: temperature outside [0, 2]");
    }
    if (max_tokens && *max_tokens < 1) throw ValidationError("synthesis plan: max_tokens must be at least 1");
}

std::size_t SynthesisPlan::count_for(PromptMode m) const {
    switch (mode) {
        case SynthesisMode::annotate: return m == PromptMode::annotate ? target_count : 0;
        case SynthesisMode::generate: return m == PromptMode::generate ? target_count : 0;
        case SynthesisMode::combine:
            return m == PromptMode::annotate ? annotate_count.value_or(target_count) : generate_count.value_or(target_count);
    }
    return 0;
}

double SynthesisPlan::temperature_for(PromptMode m) const {
    return temperature.value_or(default_temperature(m));
}

ordered_json to_json(const SynthesisPlan& plan) {
    ordered_json j;
    j["mode"] = to_string(plan.mode);
    j["annotate_count"] = plan.count_for(PromptMode::annotate);
    j["generate_count"] = plan.count_for(PromptMode::generate);
    j["annotate_temperature"] = plan.temperature_for(PromptMode::annotate);
    j["generate_temperature"] = plan.temperature_for(PromptMode::generate);
    j["max_tokens"] = plan.max_tokens ? json(*plan.max_tokens) : json(nullptr);
    j["exemplars"] = {{"k", plan.exemplar_policy.k},
                      {"selection", to_string(plan.exemplar_policy.selection)},
                      {"seed", plan.exemplar_policy.seed},
                      {"fixed_ids", plan.exemplar_policy.fixed_ids}};
    j["max_resamples"] = plan.max_resamples;
    j["seed"] = plan.seed;
    j["source_fraction"] = plan.source_fraction;
    j["rng"] = kRngVersion;
    return j;
}

ordered_json to_json(const SyntheticRecord& rec) {
    ordered_json j;
    j["input"] = rec.input;
    j["output"] = rec.output;
    j["mode"] = to_string(rec.mode);
    if (rec.source_id) j["source_id"] = *rec.source_id;
    j["teacher"] = rec.teacher;
    j["temperature"] = rec.temperature;
    j["prompt_hash"] = rec.prompt_hash;
    j["job_index"] = rec.job_index;
    j["seed"] = rec.seed;
    j["attempt"] = rec.attempt;
    j["exemplar_ids"] = rec.exemplar_ids;
    return j;
}

SyntheticRecord synthetic_from_json(const json& j) {
    SyntheticRecord rec;
    try {
        rec.input = j.at("input").get<std::string>();
        rec.output = j.at("output").get<std::string>();
        rec.mode = parse_prompt_mode(j.at("mode").get<std::string>());
        if (j.contains("source_id") && !j.at("source_id").is_null()) rec.source_id = j.at("source_id").get<std::string>();
        rec.teacher = j.at("teacher").get<std::string>();
        rec.temperature = j.at("temperature").get<double>();
        rec.prompt_hash = j.at("prompt_hash").get<std::string>();
        rec.job_index = j.at("job_index").get<std::size_t>();
        rec.seed = j.at("seed").get<std::uint64_t>();
        rec.attempt = j.value("attempt", std::size_t{0});
        if (j.contains("exemplar_ids")) rec.exemplar_ids = j.at("exemplar_ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("synthetic record: ") + e.what());
    }
    return rec;
}

std::string to_jsonl(std::span<const SyntheticRecord> records) {
    std::string out;
    for (const auto& rec : records) {
        out += to_json(rec).dump();
        out.push_back('\n');
    }
    return out;
}

void save_synthetic_jsonl(std::span<const SyntheticRecord> records, const std::filesystem::path& path) {
    write_file(path, to_jsonl(records));
}

std::vector<SyntheticRecord> load_synthetic_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<SyntheticRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(synthetic_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

UsageTotals& UsageTotals::operator+=(const UsageTotals& other) {
    requests += other.requests;
    transport_attempts += other.transport_attempts;
    prompt_chars += other.prompt_chars;
    completion_chars += other.completion_chars;
    return *this;
}

std::string normalize_for_dedup(std::string_view text) {
    return normalize_text(text);
}

std::optional<std::string> canonical_label(const TaskSpec& task, std::string_view output) {
    std::string norm = normalize_for_dedup(output);
    auto strip = [](std::string& s) {
        static constexpr std::string_view kEdge = ".!?,;:\"'`";
        bool changed = true;
        while (changed && !s.empty()) {
            changed = false;
            if (kEdge.find(s.back()) != std::string_view::npos) {
                s.pop_back();
                changed = true;
            }
            if (!s.empty() && kEdge.find(s.front()) != std::string_view::npos) {
                s.erase(s.begin());
                changed = true;
            }
        }
        s = normalize_text(s);
    };
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& label : task.label_set) {
            if (normalize_for_dedup(label) == norm) return label;
        }
        strip(norm);
    }
    return std::nullopt;
}

std::uint64_t exemplar_draw_seed(std::uint64_t policy_seed, PromptMode mode, std::size_t job_index, std::size_t attempt) {
    return derive_seed(derive_seed(policy_seed, std::string("exemplars/") + std::string(to_string(mode)), job_index),
                       "attempt", attempt);
}

std::uint64_t request_seed(std::uint64_t plan_seed, PromptMode mode, std::size_t job_index, std::size_t attempt) {
    return derive_seed(derive_seed(plan_seed, std::string("request/") + std::string(to_string(mode)), job_index), "attempt",
                       attempt);
}

namespace {

ordered_json to_json(const DroppedItem& d) {
    ordered_json j;
    j["mode"] = to_string(d.mode);
    j["job_index"] = d.job_index;
    if (d.source_id) j["source_id"] = *d.source_id;
    j["attempts"] = d.attempts;
    j["reason"] = d.reason;
    return j;
}

DroppedItem dropped_from_json(const json& j) {
    DroppedItem d;
    d.mode = parse_prompt_mode(j.at("mode").get<std::string>());
    d.job_index = j.at("job_index").get<std::size_t>();
    if (j.contains("source_id")) d.source_id = j.at("source_id").get<std::string>();
    d.attempts = j.at("attempts").get<std::size_t>();
    d.reason = j.at("reason").get<std::string>();
    return d;
}

void log_line(const SynthesisOptions& options, const std::string& msg) {
    if (options.log) options.log(msg);
}

/// Exemplar candidates: labeled and free of prompt tags.
std::vector<Example> usable_exemplars(const Dataset& source, const SynthesisOptions& options) {
    std::vector<Example> out;
    for (const auto& ex : source.examples()) {
        if (!ex.output || contains_tag_literal(ex.input) || contains_tag_literal(*ex.output)) {
            log_line(options, "exemplar '" + ex.id + "' excluded: unlabeled or contains a prompt tag literal");
            continue;
        }
        out.push_back(ex);
    }
    return out;
}

struct Job {
    std::size_t index = 0;
    const Example* target = nullptr;  // annotate only
};

struct RoundState {
    std::map<std::size_t, std::size_t> attempts;  // pending job -> next attempt
    std::map<std::size_t, SyntheticRecord> accepted;
    std::vector<DroppedItem> dropped;
    std::uint64_t next_sequence = 0;
    std::size_t round = 0;
    UsageTotals usage;
};

class JobEngine {
public:
    JobEngine(PromptMode mode, const SynthesisPlan& plan, const TaskSpec& task, std::vector<Example> exemplars,
              TeacherClient& backend, const SynthesisOptions& options, std::string fingerprint)
        : mode_(mode),
          plan_(plan),
          task_(task),
          exemplars_(std::move(exemplars)),
          backend_(backend),
          options_(options),
          fingerprint_(std::move(fingerprint)) {}

    void seen_input(std::string_view input) { seen_.insert(normalize_for_dedup(input)); }

    SynthesisResult run(std::vector<Job> jobs, std::vector<DroppedItem> predropped) {
        std::map<std::size_t, Job> by_index;
        for (const auto& job : jobs) by_index.emplace(job.index, job);

        RoundState state;
        bool restored = options_.resume && restore(state);
        if (!restored) {
            state.dropped = std::move(predropped);
            for (const auto& job : jobs) state.attempts.emplace(job.index, 0);
        }
        if (mode_ == PromptMode::generate) {
            for (const auto& [idx, rec] : state.accepted) seen_input(rec.input);
        }

        while (!state.attempts.empty()) {
            run_round(state, by_index);
            checkpoint(state);
        }

        SynthesisResult result;
        for (auto& [idx, rec] : state.accepted) result.records.push_back(std::move(rec));
        std::sort(state.dropped.begin(), state.dropped.end(),
                  [](const DroppedItem& a, const DroppedItem& b) { return a.job_index < b.job_index; });
        result.dropped = std::move(state.dropped);
        result.usage = state.usage;
        return result;
    }

private:
    std::filesystem::path checkpoint_path() const {
        return *options_.checkpoint_dir / ("checkpoint." + std::string(to_string(mode_)) + ".json");
    }

    bool restore(RoundState& state) {
        if (!options_.checkpoint_dir) return false;
        const auto path = checkpoint_path();
        if (!std::filesystem::exists(path)) return false;
        json j;
        try {
            j = json::parse(read_file(path));
        } catch (const json::parse_error& e) {
            throw ValidationError(path.string() + ": unreadable checkpoint: " + e.what());
        }
        if (j.value("fingerprint", std::string{}) != fingerprint_) {
            throw ValidationError(path.string() + ": checkpoint belongs to a different plan or input set");
        }
        state.round = j.at("round").get<std::size_t>();
        state.next_sequence = j.at("next_sequence").get<std::uint64_t>();
        for (const auto& [k, v] : j.at("pending").items()) state.attempts.emplace(std::stoull(k), v.get<std::size_t>());
        for (const auto& r : j.at("records")) {
            auto rec = synthetic_from_json(r);
            state.accepted.emplace(rec.job_index, std::move(rec));
        }
        for (const auto& d : j.at("dropped")) state.dropped.push_back(dropped_from_json(d));
        const auto& u = j.at("usage");
        state.usage.requests = u.at("requests").get<std::size_t>();
        state.usage.transport_attempts = u.at("transport_attempts").get<std::size_t>();
        state.usage.prompt_chars = u.at("prompt_chars").get<std::size_t>();
        state.usage.completion_chars = u.at("completion_chars").get<std::size_t>();
        log_line(options_, "resumed " + std::string(to_string(mode_)) + " from " + path.string() + " at round " +
                               std::to_string(state.round) + " with " + std::to_string(state.accepted.size()) +
                               " completed records");
        return true;
    }

    void checkpoint(const RoundState& state) const {
        if (!options_.checkpoint_dir) return;
        ordered_json j;
        j["fingerprint"] = fingerprint_;
        j["mode"] = to_string(mode_);
        j["round"] = state.round;
        j["next_sequence"] = state.next_sequence;
        auto completed = json::array();
        for (const auto& [idx, rec] : state.accepted) completed.push_back(idx);
        for (const auto& d : state.dropped) completed.push_back(d.job_index);
        std::sort(completed.begin(), completed.end());
        j["completed"] = std::move(completed);
        ordered_json pending = ordered_json::object();
        for (const auto& [idx, attempt] : state.attempts) pending[std::to_string(idx)] = attempt;
        j["pending"] = std::move(pending);
        auto records = ordered_json::array();
        for (const auto& [idx, rec] : state.accepted) records.push_back(to_json(rec));
        j["records"] = std::move(records);
        auto dropped = ordered_json::array();
        for (const auto& d : state.dropped) dropped.push_back(to_json(d));
        j["dropped"] = std::move(dropped);
        j["usage"] = {{"requests", state.usage.requests},
                      {"transport_attempts", state.usage.transport_attempts},
                      {"prompt_chars", state.usage.prompt_chars},
                      {"completion_chars", state.usage.completion_chars}};
        std::filesystem::create_directories(*options_.checkpoint_dir);
        write_file(checkpoint_path(), j.dump(2) + "\n");
    }

    struct Attempt {
        std::size_t job = 0;
        std::size_t attempt = 0;
        RenderedPrompt prompt;
        CompletionRequest request;
    };

    void run_round(RoundState& state, const std::map<std::size_t, Job>& jobs) {
        std::vector<Attempt> batch;
        batch.reserve(state.attempts.size());
        for (const auto& [idx, attempt] : state.attempts) {
            const Job& job = jobs.at(idx);
            Attempt a;
            a.job = idx;
            a.attempt = attempt;
            const auto picked = select_exemplars(
                exemplars_, plan_.exemplar_policy, exemplar_draw_seed(plan_.exemplar_policy.seed, mode_, idx, attempt));
            a.prompt = render_prompt(task_, picked, mode_, job.target);
            a.request.prompt = a.prompt.text;
            a.request.temperature = plan_.temperature_for(mode_);
            a.request.max_tokens = plan_.max_tokens.value_or(default_max_tokens(task_.kind));
            a.request.request_id = std::string(to_string(mode_)) + "-j" + std::to_string(idx) + "-a" + std::to_string(attempt);
            a.request.seed = request_seed(plan_.seed, mode_, idx, attempt);
            a.request.sequence = state.next_sequence++;
            batch.push_back(std::move(a));
        }

        std::vector<std::optional<Completion>> completions(batch.size());
        std::vector<std::exception_ptr> errors(batch.size());
        dispatch(batch, completions, errors);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            // Abort before touching state; the last checkpoint stays valid.
            if (errors[i]) std::rethrow_exception(errors[i]);
        }

        for (std::size_t i = 0; i < batch.size(); ++i) {
            const Attempt& a = batch[i];
            const Completion& c = *completions[i];
            state.usage.requests += 1;
            state.usage.transport_attempts += c.usage.attempts;
            state.usage.prompt_chars += c.usage.prompt_chars;
            state.usage.completion_chars += c.usage.completion_chars;

            const Job& job = jobs.at(a.job);
            std::string reason;
            if (auto rec = accept(a, job, c.text, reason)) {
                state.accepted.emplace(a.job, std::move(*rec));
                state.attempts.erase(a.job);
                continue;
            }
            const std::size_t used = a.attempt + 1;
            if (used > plan_.max_resamples) {
                DroppedItem d{mode_, a.job, job.target ? std::optional<std::string>(job.target->id) : std::nullopt, used,
                              reason};
                log_line(options_, "dropped " + std::string(to_string(mode_)) + " job " + std::to_string(a.job) +
                                       (d.source_id ? " (source " + *d.source_id + ")" : std::string{}) + " after " +
                                       std::to_string(used) + " attempts: " + reason);
                state.dropped.push_back(std::move(d));
                state.attempts.erase(a.job);
            } else {
                state.attempts[a.job] = used;
            }
        }
        ++state.round;
    }

    void dispatch(const std::vector<Attempt>& batch, std::vector<std::optional<Completion>>& out,
                  std::vector<std::exception_ptr>& errors) {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < batch.size(); i = next++) {
                try {
                    out[i] = backend_.complete(batch[i].request);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        const std::size_t workers = std::min(backend_.config().parallelism, batch.size());
        if (workers <= 1) {
            worker();
            return;
        }
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    std::optional<SyntheticRecord> accept(const Attempt& a, const Job& job, const std::string& raw, std::string& reason) {
        ParsedCompletion parsed;
        try {
            parsed = parse_completion(raw, mode_);
        } catch (const MalformedCompletion& e) {
            reason = e.what();
            return std::nullopt;
        }

        SyntheticRecord rec;
        rec.mode = mode_;
        rec.input = mode_ == PromptMode::annotate ? job.target->input : *parsed.input;
        rec.output = parsed.output;
        if (job.target) rec.source_id = job.target->id;
        rec.teacher = backend_.config().model_name;
        rec.temperature = a.request.temperature;
        rec.prompt_hash = a.prompt.prompt_hash;
        rec.job_index = a.job;
        rec.seed = plan_.seed;
        rec.attempt = a.attempt;
        rec.exemplar_ids = a.prompt.exemplar_ids;

        if (trim(rec.input).empty()) {
            reason = "empty input";
            return std::nullopt;
        }
        if (contains_tag_literal(rec.input) || contains_tag_literal(rec.output)) {
            reason = "prompt tag literal in generated fields";
            return std::nullopt;
        }
        if (mode_ == PromptMode::generate && !matches_field_template(task_, rec.input)) {
            reason = "input does not follow the task's field template";
            return std::nullopt;
        }
        if (task_.is_classification()) {
            auto label = canonical_label(task_, rec.output);
            if (!label) {
                reason = "label '" + rec.output + "' not in label set";
                return std::nullopt;
            }
            rec.output = *label;
        }
        std::string norm;
        if (mode_ == PromptMode::generate) {
            norm = normalize_for_dedup(rec.input);
            if (seen_.contains(norm)) {
                reason = "duplicate input";
                return std::nullopt;
            }
        }
        if (options_.filter && !options_.filter(rec)) {
            reason = "rejected by record filter";
            return std::nullopt;
        }
        if (mode_ == PromptMode::generate) seen_.insert(std::move(norm));
        return rec;
    }

    PromptMode mode_;
    const SynthesisPlan& plan_;
    const TaskSpec& task_;
    std::vector<Example> exemplars_;
    TeacherClient& backend_;
    const SynthesisOptions& options_;
    std::string fingerprint_;
    std::unordered_set<std::string> seen_;
};

std::string fingerprint(PromptMode mode, const SynthesisPlan& plan, const TaskSpec& task, const Dataset& exemplar_source,
                        const Dataset* pool, const TeacherClient& backend) {
    ordered_json j;
    j["mode"] = to_string(mode);
    j["plan"] = to_json(plan);
    j["task"] = to_json(task);
    j["exemplar_source"] = dataset_digest(exemplar_source);
    if (pool) j["pool"] = dataset_digest(*pool);
    j["backend"] = describe(backend.config());
    return sha256_hex(j.dump());
}

void check_exemplar_supply(const SynthesisPlan& plan, std::size_t usable) {
    if (plan.exemplar_policy.selection == ExemplarSelection::seeded_uniform && plan.exemplar_policy.k > usable) {
        throw ValidationError("exemplar source has " + std::to_string(usable) + " usable labeled examples, fewer than k=" +
                              std::to_string(plan.exemplar_policy.k));
    }
}

}  // namespace

SynthesisResult run_annotation(const SynthesisPlan& plan, const Dataset& pool, const Dataset& exemplar_source,
                               const TaskSpec& task, TeacherClient& backend, const SynthesisOptions& options) {
    plan.validate();
    task.validate();
    const std::size_t m = plan.count_for(PromptMode::annotate);
    if (pool.empty()) throw ValidationError("run_annotation: unlabeled pool is empty");
    if (m > pool.size()) {
        throw ValidationError("run_annotation: " + std::to_string(m) + " annotations requested from a pool of " +
                              std::to_string(pool.size()));
    }
    auto exemplars = usable_exemplars(exemplar_source, options);
    check_exemplar_supply(plan, exemplars.size());

    const auto picked = sample_indices(pool.size(), m, derive_seed(plan.seed, "annotate/pool"));
    std::vector<Job> jobs;
    std::vector<DroppedItem> predropped;
    for (std::size_t j = 0; j < picked.size(); ++j) {
        const Example& item = pool[picked[j]];
        if (contains_tag_literal(item.input)) {
            log_line(options, "dropped annotate job " + std::to_string(j) + " (source " + item.id +
                                  "): input contains a prompt tag literal");
            predropped.push_back({PromptMode::annotate, j, item.id, 0, "input contains a prompt tag literal"});
            continue;
        }
        jobs.push_back({j, &item});
    }

    JobEngine engine(PromptMode::annotate, plan, task, std::move(exemplars), backend, options,
                     fingerprint(PromptMode::annotate, plan, task, exemplar_source, &pool, backend));
    auto result = engine.run(std::move(jobs), std::move(predropped));
    result.shortfall = m - result.records.size();
    return result;
}

namespace {

// prior: records already in the synthetic set (annotations of a combine run),
// which generated inputs must not repeat either.
SynthesisResult generate(const SynthesisPlan& plan, const Dataset& exemplar_source, const TaskSpec& task,
                         TeacherClient& backend, const SynthesisOptions& options,
                         std::span<const SyntheticRecord> prior) {
    plan.validate();
    task.validate();
    const std::size_t m = plan.count_for(PromptMode::generate);
    auto exemplars = usable_exemplars(exemplar_source, options);
    check_exemplar_supply(plan, exemplars.size());

    JobEngine engine(PromptMode::generate, plan, task, std::move(exemplars), backend, options,
                     fingerprint(PromptMode::generate, plan, task, exemplar_source, nullptr, backend));
    for (const auto& ex : exemplar_source.examples()) engine.seen_input(ex.input);
    for (const auto& rec : prior) engine.seen_input(rec.input);

    std::vector<Job> jobs;
    jobs.reserve(m);
    for (std::size_t j = 0; j < m; ++j) jobs.push_back({j, nullptr});
    auto result = engine.run(std::move(jobs), {});
    result.shortfall = m - result.records.size();
    if (result.shortfall > 0) {
        log_line(options, "generation shortfall: " + std::to_string(result.shortfall) + " of " + std::to_string(m) +
                              " records could not be produced");
    }
    return result;
}

}  // namespace

SynthesisResult run_generation(const SynthesisPlan& plan, const Dataset& exemplar_source, const TaskSpec& task,
                               TeacherClient& backend, const SynthesisOptions& options) {
    return generate(plan, exemplar_source, task, backend, options, {});
}

SynthesisResult run_combine(const SynthesisPlan& plan, const Dataset& pool, const Dataset& exemplar_source,
                            const TaskSpec& task, TeacherClient& backend, const SynthesisOptions& options) {
    SynthesisResult out;
    if (plan.count_for(PromptMode::annotate) > 0) out = run_annotation(plan, pool, exemplar_source, task, backend, options);
    if (plan.count_for(PromptMode::generate) > 0) {
        auto gen = generate(plan, exemplar_source, task, backend, options, out.records);
        out.records.insert(out.records.end(), std::make_move_iterator(gen.records.begin()),
                           std::make_move_iterator(gen.records.end()));
        out.dropped.insert(out.dropped.end(), gen.dropped.begin(), gen.dropped.end());
        out.shortfall += gen.shortfall;
        out.usage += gen.usage;
    }
    return out;
}

SynthesisResult run_synthesis(const SynthesisPlan& plan, const Dataset* pool, const Dataset& exemplar_source,
                              const TaskSpec& task, TeacherClient& backend, const SynthesisOptions& options) {
    switch (plan.mode) {
        case SynthesisMode::annotate:
            if (!pool) throw ValidationError("annotate plan needs an unlabeled pool");
            return run_annotation(plan, *pool, exemplar_source, task, backend, options);
        case SynthesisMode::generate:
            return run_generation(plan, exemplar_source, task, backend, options);
        case SynthesisMode::combine:
            if (!pool) {
                if (plan.count_for(PromptMode::annotate) > 0) throw ValidationError("combine plan needs an unlabeled pool");
                return run_generation(plan, exemplar_source, task, backend, options);
            }
            return run_combine(plan, *pool, exemplar_source, task, backend, options);
    }
    return {};
}

}  // namespace synthaug
