// SPDX-License-Identifier: Apache-2.0

#include "synthaug/pipeline.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_set>

#include "synthaug/digest.hpp"
#include "synthaug/metrics.hpp"
#include "synthaug/mixing.hpp"
#include "synthaug/rng.hpp"

namespace synthaug {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------- manifest

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
    throw ValidationError("manifest: '" + field + "' " + what);
}

const json& need(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) bad(where.empty() ? key : where + "." + key, "is required");
    return obj.at(key);
}

std::string need_string(const json& obj, const char* key, const std::string& where) {
    const auto& v = need(obj, key, where);
    if (!v.is_string() || v.get<std::string>().empty()) bad(where.empty() ? key : where + "." + key, "must be a non-empty string");
    return v.get<std::string>();
}

double get_fraction(const json& obj, const char* key, const std::string& where, bool at_most_one) {
    const auto& v = obj.at(key);
    const std::string name = where + "." + key;
    if (!v.is_number()) bad(name, "must be a number");
    const double f = v.get<double>();
    if (!std::isfinite(f) || f < 0.0) bad(name, "must be finite and non-negative");
    if (at_most_one && f > 1.0) bad(name, "must not exceed 1");
    return f;
}

std::size_t get_count(const json& v, const std::string& name) {
    if (!v.is_number_integer() || v.get<long long>() < 0) bad(name, "must be a non-negative integer");
    return v.get<std::size_t>();
}

}  // namespace

fs::path RunManifest::resolve(const std::string& ref) const {
    fs::path p(ref);
    return p.is_absolute() ? p : (base_dir / p).lexically_normal();
}

double RunManifest::annotate_share() const {
    switch (mode) {
        case SynthesisMode::annotate: return annotate_fraction.value_or(synthetic_fraction);
        case SynthesisMode::generate: return 0.0;
        case SynthesisMode::combine: return annotate_fraction.value_or(synthetic_fraction / 2.0);
    }
    return 0.0;
}

double RunManifest::generate_share() const {
    switch (mode) {
        case SynthesisMode::annotate: return 0.0;
        case SynthesisMode::generate: return generate_fraction.value_or(synthetic_fraction);
        case SynthesisMode::combine: return generate_fraction.value_or(synthetic_fraction / 2.0);
    }
    return 0.0;
}

RunManifest parse_manifest(const json& j, const fs::path& manifest_path) {
    if (!j.is_object()) throw ValidationError("manifest: expected a JSON object");
    RunManifest m;
    m.path = manifest_path;
    m.base_dir = manifest_path.has_parent_path() ? manifest_path.parent_path() : fs::path(".");

    const auto& version = need(j, "schema_version", "");
    if (!version.is_number_integer() || version.get<int>() != kManifestSchemaVersion) {
        bad("schema_version", "must be " + std::to_string(kManifestSchemaVersion));
    }
    const auto& seed = need(j, "seed", "");
    if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<long long>() < 0)) {
        bad("seed", "must be a non-negative integer");
    }
    m.seed = seed.get<std::uint64_t>();

    m.task_ref = need_string(j, "task", "");
    const auto& data = need(j, "data", "");
    m.train_ref = need_string(data, "train", "data");
    m.dev_ref = need_string(data, "dev", "data");
    m.test_ref = need_string(data, "test", "data");
    if (data.contains("unlabeled")) m.unlabeled_ref = need_string(data, "unlabeled", "data");
    m.output_ref = need_string(j, "output_dir", "");

    m.backend_json = need(j, "backend", "");
    try {
        m.backend = backend_from_json(m.backend_json, m.base_dir);
        m.backend.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("manifest: backend: ") + e.what());
    }

    const auto& plan = need(j, "plan", "");
    if (!plan.is_object()) bad("plan", "must be an object");
    try {
        m.mode = parse_synthesis_mode(need_string(plan, "mode", "plan"));
    } catch (const ValidationError&) {
        bad("plan.mode", "must be one of annotate, generate, combine");
    }
    if (plan.contains("annotate_fraction")) m.annotate_fraction = get_fraction(plan, "annotate_fraction", "plan", false);
    if (plan.contains("generate_fraction")) m.generate_fraction = get_fraction(plan, "generate_fraction", "plan", false);
    if (m.mode == SynthesisMode::annotate && m.generate_fraction) bad("plan.generate_fraction", "needs mode generate or combine");
    if (m.mode == SynthesisMode::generate && m.annotate_fraction) bad("plan.annotate_fraction", "needs mode annotate or combine");
    if (plan.contains("exemplars")) {
        const auto& ex = plan.at("exemplars");
        if (!ex.is_object()) bad("plan.exemplars", "must be an object");
        if (ex.contains("k")) m.exemplar_k = get_count(ex.at("k"), "plan.exemplars.k");
        if (ex.contains("selection")) {
            try {
                m.exemplar_selection = parse_exemplar_selection(need_string(ex, "selection", "plan.exemplars"));
            } catch (const ValidationError&) {
                bad("plan.exemplars.selection", "must be seeded-uniform or fixed-list");
            }
        }
        if (ex.contains("ids")) {
            if (!ex.at("ids").is_array()) bad("plan.exemplars.ids", "must be an array of strings");
            for (const auto& id : ex.at("ids")) {
                if (!id.is_string()) bad("plan.exemplars.ids", "must be an array of strings");
                m.exemplar_ids.push_back(id.get<std::string>());
            }
        }
    }
    if (m.exemplar_k == 0) bad("plan.exemplars.k", "must be positive");
    if (m.exemplar_selection == ExemplarSelection::fixed_list && m.exemplar_ids.empty()) {
        bad("plan.exemplars.ids", "is required for fixed-list selection");
    }
    if (plan.contains("max_resamples")) m.max_resamples = get_count(plan.at("max_resamples"), "plan.max_resamples");
    if (plan.contains("temperature") && !plan.at("temperature").is_null()) {
        if (!plan.at("temperature").is_number()) bad("plan.temperature", "must be a number");
        m.temperature = plan.at("temperature").get<double>();
        if (!(*m.temperature >= 0.0 && *m.temperature <= 2.0)) bad("plan.temperature", "must lie in [0, 2]");
    }
    if (plan.contains("max_tokens") && !plan.at("max_tokens").is_null()) {
        m.max_tokens = get_count(plan.at("max_tokens"), "plan.max_tokens");
        if (*m.max_tokens == 0) bad("plan.max_tokens", "must be positive");
    }

    const auto& mix = need(j, "mix", "");
    if (!mix.is_object()) bad("mix", "must be an object");
    need(mix, "original_fraction", "mix");
    need(mix, "synthetic_fraction", "mix");
    m.original_fraction = get_fraction(mix, "original_fraction", "mix", true);
    m.synthetic_fraction = get_fraction(mix, "synthetic_fraction", "mix", false);
    if (mix.contains("markers")) {
        if (!mix.at("markers").is_boolean()) bad("mix.markers", "must be a boolean");
        m.markers = mix.at("markers").get<bool>();
    }

    if (j.contains("trainer") && !j.at("trainer").is_null()) m.trainer_json = j.at("trainer");
    return m;
}

RunManifest load_manifest(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ValidationError("manifest not found: " + path.string());
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError("manifest " + path.string() + ": " + e.what());
    }
    return parse_manifest(j, path);
}

int exit_code_for(const std::exception& e) noexcept {
    if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->exit_code();
    if (dynamic_cast<const ValidationError*>(&e)) return 2;
    if (dynamic_cast<const BackendError*>(&e)) return 3;
    if (dynamic_cast<const TrainerError*>(&e)) return 4;
    return 1;
}

// ---------------------------------------------------------------- run

namespace {

struct Seeds {
    std::uint64_t sample = 0;
    std::uint64_t synthesize = 0;
    std::uint64_t exemplars = 0;
    std::uint64_t mix = 0;
};

// Everything validation computes; the stages only execute it.
struct Prepared {
    RunManifest manifest;
    fs::path output_dir;
    TaskSpec task;
    Dataset train;
    Dataset dev;
    Dataset test;
    std::optional<Dataset> unlabeled;
    Seeds seeds;
    Dataset original;
    Dataset pool;
    bool pool_derived = false;
    std::size_t base_n = 0;
    std::size_t annotate_count = 0;
    std::size_t generate_count = 0;
    bool synthesize = false;
    SynthesisPlan plan;
    MixPlan mix;
    std::optional<TrainerContract> trainer;
    std::string manifest_digest;
};

void require_file(const fs::path& p, const std::string& field) {
    if (!fs::is_regular_file(p)) bad(field, "names a missing file: " + p.string());
}

Prepared prepare(const fs::path& manifest_path, const RunOptions& options) {
    Prepared p;
    p.manifest = load_manifest(manifest_path);
    auto& m = p.manifest;
    if (options.seed_override) m.seed = *options.seed_override;
    p.manifest_digest = file_sha256(manifest_path);

    require_file(m.resolve(m.task_ref), "task");
    require_file(m.resolve(m.train_ref), "data.train");
    require_file(m.resolve(m.dev_ref), "data.dev");
    require_file(m.resolve(m.test_ref), "data.test");
    if (m.unlabeled_ref) require_file(m.resolve(*m.unlabeled_ref), "data.unlabeled");
    p.output_dir = m.resolve(m.output_ref);
    if (fs::exists(p.output_dir) && !fs::is_directory(p.output_dir)) bad("output_dir", "exists and is not a directory");

    p.task = load_task_spec(m.resolve(m.task_ref));
    p.train = load_jsonl(m.resolve(m.train_ref), Split::train, p.task);
    p.dev = load_jsonl(m.resolve(m.dev_ref), Split::dev, p.task);
    p.test = load_jsonl(m.resolve(m.test_ref), Split::test, p.task);
    if (m.unlabeled_ref) p.unlabeled = load_jsonl(m.resolve(*m.unlabeled_ref), Split::unlabeled, p.task);
    if (p.train.empty()) bad("data.train", "is empty");
    if (p.dev.empty()) bad("data.dev", "is empty");
    if (p.test.empty()) bad("data.test", "is empty");

    p.seeds.sample = derive_seed(m.seed, "sample");
    p.seeds.synthesize = derive_seed(m.seed, "synthesize");
    p.seeds.exemplars = derive_seed(m.seed, "exemplars");
    p.seeds.mix = derive_seed(m.seed, "mix");

    p.base_n = p.train.size();
    p.original = sample_fraction(p.train, m.original_fraction, p.seeds.sample);

    p.annotate_count = fraction_count(m.annotate_share(), p.base_n);
    p.generate_count = fraction_count(m.generate_share(), p.base_n);
    const std::size_t synthetic_count = fraction_count(m.synthetic_fraction, p.base_n);
    p.synthesize = synthetic_count > 0;

    if (p.original.size() + synthetic_count == 0) bad("mix", "selects an empty training set");
    if (p.synthesize) {
        if (p.annotate_count + p.generate_count < synthetic_count) {
            bad("plan", "requests " + std::to_string(p.annotate_count + p.generate_count) +
                            " synthetic records but the mix needs " + std::to_string(synthetic_count));
        }
        if (p.original.empty()) bad("mix.original_fraction", "leaves no exemplars to prompt with");
        if (m.exemplar_selection == ExemplarSelection::seeded_uniform && m.exemplar_k > p.original.size()) {
            bad("plan.exemplars.k", "is " + std::to_string(m.exemplar_k) + " but the original subset holds " +
                                        std::to_string(p.original.size()) + " examples");
        }
        if (m.exemplar_selection == ExemplarSelection::fixed_list) {
            std::unordered_set<std::string_view> have;
            for (const auto& ex : p.original.examples()) have.insert(ex.id);
            for (const auto& id : m.exemplar_ids) {
                if (!have.count(id)) bad("plan.exemplars.ids", "names '" + id + "', which is not in the original subset");
            }
        }
    }

    if (p.annotate_count > 0 && p.synthesize) {
        if (p.unlabeled) {
            p.pool = *p.unlabeled;
        } else {
            std::unordered_set<std::string_view> taken;
            for (const auto& ex : p.original.examples()) taken.insert(ex.id);
            std::vector<Example> rest;
            for (const auto& ex : p.train.examples()) {
                if (!taken.count(ex.id)) rest.push_back({ex.id, ex.input, std::nullopt});
            }
            p.pool = Dataset(p.task.task_id, Split::unlabeled, std::move(rest));
            p.pool_derived = true;
        }
        if (p.pool.size() < p.annotate_count) {
            bad("plan", "asks for " + std::to_string(p.annotate_count) + " annotations but the unlabeled pool holds " +
                            std::to_string(p.pool.size()));
        }
    }

    auto& plan = p.plan;
    plan.mode = m.mode;
    if (m.mode == SynthesisMode::combine) {
        plan.annotate_count = p.annotate_count;
        plan.generate_count = p.generate_count;
        plan.target_count = p.annotate_count + p.generate_count;
    } else {
        plan.target_count = m.mode == SynthesisMode::annotate ? p.annotate_count : p.generate_count;
    }
    plan.temperature = m.temperature;
    plan.max_tokens = m.max_tokens;
    plan.exemplar_policy = {m.exemplar_k, m.exemplar_selection, p.seeds.exemplars, m.exemplar_ids};
    plan.max_resamples = m.max_resamples;
    plan.seed = p.seeds.synthesize;
    plan.source_fraction = dataset_digest(p.original);
    plan.validate();

    if (p.synthesize && m.backend.kind == BackendKind::http && !m.backend.auth_env.empty() &&
        std::getenv(m.backend.auth_env.c_str()) == nullptr) {
        bad("backend.auth_env", "names an unset environment variable: " + m.backend.auth_env);
    }

    p.mix.original_fraction = m.original_fraction;
    p.mix.synthetic_fraction = m.synthetic_fraction;
    p.mix.base_n = p.base_n;
    p.mix.seed = p.seeds.mix;
    p.mix.original_is_full = false;
    p.mix.keep_markers = m.markers;
    p.mix.validate();

    if (m.trainer_json) {
        try {
            p.trainer = trainer_from_json(*m.trainer_json, m.base_dir, p.task.kind);
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("manifest: trainer: ") + e.what());
        } catch (const json::exception& e) {
            throw ValidationError(std::string("manifest: trainer: ") + e.what());
        }
    }
    return p;
}

std::string rel(const fs::path& p, const fs::path& base) { return p.lexically_relative(base).generic_string(); }

ordered_json artifact(const fs::path& p, const fs::path& base, std::optional<std::size_t> records = std::nullopt) {
    ordered_json a;
    a["path"] = rel(p, base);
    a["sha256"] = file_sha256(p);
    if (records) a["records"] = *records;
    return a;
}

ordered_json input_entry(const std::string& ref, const Dataset& ds) {
    ordered_json j;
    j["path"] = ref;
    j["sha256"] = dataset_digest(ds);
    j["records"] = ds.size();
    j["assigned_ids"] = ds.assigned_ids();
    return j;
}

ordered_json usage_json(const UsageTotals& u) {
    ordered_json j;
    j["requests"] = u.requests;
    j["transport_attempts"] = u.transport_attempts;
    j["prompt_chars"] = u.prompt_chars;
    j["completion_chars"] = u.completion_chars;
    return j;
}

ordered_json dropped_json(std::span<const DroppedItem> dropped) {
    ordered_json arr = ordered_json::array();
    for (const auto& d : dropped) {
        ordered_json e;
        e["mode"] = to_string(d.mode);
        e["job_index"] = d.job_index;
        e["source_id"] = d.source_id ? ordered_json(*d.source_id) : ordered_json(nullptr);
        e["attempts"] = d.attempts;
        e["reason"] = d.reason;
        arr.push_back(std::move(e));
    }
    return arr;
}

ordered_json row_json(const Prepared& p, const Composition& c) {
    ordered_json r;
    r["task_id"] = p.task.task_id;
    r["kind"] = to_string(p.task.kind);
    r["base_n"] = p.base_n;
    r["original_fraction"] = p.manifest.original_fraction;
    r["synthetic_fraction"] = p.manifest.synthetic_fraction;
    r["mode"] = p.synthesize ? ordered_json(to_string(p.manifest.mode)) : ordered_json(nullptr);
    r["annotate_count"] = p.synthesize ? p.annotate_count : 0;
    r["generate_count"] = p.synthesize ? p.generate_count : 0;
    r["original_count"] = c.original;
    r["synthetic_count"] = c.synthetic;
    return r;
}

class Runner {
public:
    Runner(Prepared& p, const RunOptions& options) : p_(p), options_(options), out_(p.output_dir) {}

    RunOutcome run() {
        ledger_["schema_version"] = kManifestSchemaVersion;
        ledger_["manifest"] = {{"sha256", p_.manifest_digest}, {"seed_override", options_.seed_override.has_value()}};
        ledger_["seed"] = p_.manifest.seed;
        ledger_["seeds"] = {{"sample", p_.seeds.sample},
                            {"synthesize", p_.seeds.synthesize},
                            {"exemplars", p_.seeds.exemplars},
                            {"mix", p_.seeds.mix}};
        ledger_["rng"] = kRngVersion;
        ordered_json task;
        task["path"] = p_.manifest.task_ref;
        task["sha256"] = file_sha256(p_.manifest.resolve(p_.manifest.task_ref));
        task["task_id"] = p_.task.task_id;
        task["kind"] = to_string(p_.task.kind);
        ledger_["task"] = std::move(task);
        ledger_["backend"] = describe(p_.manifest.backend);
        ledger_["plan"] = to_json(p_.plan);
        ledger_["mix"] = to_json(p_.mix);
        ledger_["trainer"] = p_.trainer ? to_json(*p_.trainer) : ordered_json({{"builtin", kBaselineTrainerId}});
        if (p_.trainer) ledger_["trainer"]["workdir"] = rel(p_.trainer->workdir, p_.manifest.base_dir);
        ledger_["stages"] = ordered_json::array();

        std::error_code ec;
        fs::create_directories(out_, ec);
        if (ec) throw StageError("ingest", "cannot create " + out_.string() + ": " + ec.message(), 1);

        stage("ingest", [&](ordered_json& s) { ingest(s); });
        stage("sample", [&](ordered_json& s) { sample(s); });
        stage("synthesize", [&](ordered_json& s) { synthesize(s); });
        stage("mix", [&](ordered_json& s) { mix(s); });
        stage("export", [&](ordered_json& s) { do_export(s); });
        stage("train", [&](ordered_json& s) { train(s); });
        stage("evaluate", [&](ordered_json& s) { evaluate(s); });

        ledger_["report_row"] = row_json(p_, composition_);
        write_ledger();
        return {ledger_, out_ / "ledger.json"};
    }

private:
    template <typename F>
    void stage(const std::string& name, F&& body) {
        log("stage " + name);
        ordered_json s;
        s["name"] = name;
        s["status"] = "running";
        try {
            body(s);
            if (s["status"] == "running") s["status"] = "ok";
            ledger_["stages"].push_back(std::move(s));
        } catch (const std::exception& e) {
            s["status"] = "failed";
            s["error"] = e.what();
            ledger_["stages"].push_back(std::move(s));
            ledger_["failed_stage"] = name;
            write_ledger();
            throw StageError(name, e.what(), exit_code_for(e));
        }
    }

    void write_ledger() { write_file(out_ / "ledger.json", ledger_.dump(2) + "\n"); }

    void log(const std::string& line) const {
        if (options_.log) options_.log(line);
    }

    void ingest(ordered_json& s) {
        ordered_json inputs;
        inputs["train"] = input_entry(p_.manifest.train_ref, p_.train);
        inputs["dev"] = input_entry(p_.manifest.dev_ref, p_.dev);
        inputs["test"] = input_entry(p_.manifest.test_ref, p_.test);
        if (p_.unlabeled) inputs["unlabeled"] = input_entry(*p_.manifest.unlabeled_ref, *p_.unlabeled);
        if (p_.task.is_classification()) {
            const auto h = label_histogram(p_.train, p_.task);
            inputs["train"]["labels"] = h.counts;
            inputs["train"]["out_of_set"] = h.out_of_set;
        }
        ledger_["inputs"] = inputs;
        s["records"] = p_.train.size() + p_.dev.size() + p_.test.size() + (p_.unlabeled ? p_.unlabeled->size() : 0);
    }

    void sample(ordered_json& s) {
        const auto orig = out_ / "original.jsonl";
        save_jsonl(p_.original, orig);
        s["artifacts"]["original"] = artifact(orig, out_, p_.original.size());
        if (p_.pool_derived) {
            const auto pool = out_ / "pool.jsonl";
            save_jsonl(p_.pool, pool);
            s["artifacts"]["pool"] = artifact(pool, out_, p_.pool.size());
        }
    }

    void synthesize(ordered_json& s) {
        const auto path = out_ / "synthetic.jsonl";
        const auto dropped_path = out_ / "dropped.json";
        if (!p_.synthesize) {
            s["status"] = "skipped";
            records_.clear();
            return;
        }
        TeacherClient client(p_.manifest.backend);
        SynthesisOptions opt;
        opt.checkpoint_dir = out_ / "checkpoints";
        opt.resume = options_.resume;
        opt.log = options_.log;
        const Dataset* pool = p_.annotate_count > 0 ? &p_.pool : nullptr;
        auto result = run_synthesis(p_.plan, pool, p_.original, p_.task, client, opt);
        records_ = std::move(result.records);
        save_synthetic_jsonl(records_, path);
        write_file(dropped_path, dropped_json(result.dropped).dump(2) + "\n");

        std::size_t annotated = 0;
        for (const auto& r : records_) annotated += r.mode == PromptMode::annotate ? 1 : 0;
        s["requested"] = {{"annotate", p_.plan.count_for(PromptMode::annotate)},
                          {"generate", p_.plan.count_for(PromptMode::generate)}};
        s["produced"] = {{"annotate", annotated}, {"generate", records_.size() - annotated}};
        s["dropped"] = result.dropped.size();
        s["shortfall"] = result.shortfall;
        s["usage"] = usage_json(result.usage);
        s["artifacts"]["synthetic"] = artifact(path, out_, records_.size());
        s["artifacts"]["dropped"] = artifact(dropped_path, out_, result.dropped.size());
        ledger_["usage"] = usage_json(result.usage);
    }

    void mix(ordered_json& s) {
        augmented_ = build_augmented(p_.original, records_, p_.mix);
        composition_ = augmented_.composition;
        const auto path = out_ / "augmented.jsonl";
        save_augmented(augmented_, path);
        auto sidecar = path;
        sidecar += ".provenance.json";
        s["composition"] = {{"original", composition_.original},
                            {"synthetic", composition_.synthetic},
                            {"summary", composition_summary(composition_, p_.base_n)}};
        s["artifacts"]["augmented"] = artifact(path, out_, augmented_.examples.size());
        s["artifacts"]["provenance"] = artifact(sidecar, out_);
        log(composition_report(augmented_));
    }

    void do_export(ordered_json& s) {
        files_ = export_training_set(augmented_, p_.dev, p_.test, p_.task, out_ / "export");
        s["artifacts"]["train"] = artifact(files_.train, out_, augmented_.examples.size());
        s["artifacts"]["dev"] = artifact(files_.dev, out_, p_.dev.size());
        s["artifacts"]["test"] = artifact(files_.test, out_, p_.test.size());
        s["artifacts"]["task_card"] = artifact(files_.task_card, out_);
    }

    void train(ordered_json& s) {
        const auto student_dir = out_ / "student";
        student_ = p_.trainer ? invoke_trainer(*p_.trainer, files_, student_dir)
                              : run_baseline_trainer(files_.train, files_.dev, files_.test, student_dir);
        s["trainer_id"] = student_.trainer_id;
        s["artifacts"]["metrics"] = artifact(student_dir / "metrics.json", out_);
    }

    void evaluate(ordered_json& s) {
        const auto path = out_ / "metrics.json";
        const auto table = out_ / "metrics.txt";
        write_file(path, to_json(student_).dump(2) + "\n");
        write_file(table, "dev\n" + format_table(student_.dev_metrics) + "test\n" + format_table(student_.test_metrics));
        s["artifacts"]["metrics"] = artifact(path, out_);
        s["artifacts"]["table"] = artifact(table, out_);
        ledger_["metrics"] = to_json(student_);
    }

    Prepared& p_;
    const RunOptions& options_;
    fs::path out_;
    ordered_json ledger_;
    std::vector<SyntheticRecord> records_;
    AugmentedDataset augmented_;
    Composition composition_;
    ExportManifest files_;
    StudentResult student_;
};

ordered_json dry_run_summary(const Prepared& p) {
    ordered_json j;
    j["dry_run"] = true;
    j["seed"] = p.manifest.seed;
    j["task_id"] = p.task.task_id;
    j["kind"] = to_string(p.task.kind);
    j["base_n"] = p.base_n;
    j["original_count"] = p.original.size();
    j["synthesize"] = p.synthesize;
    j["plan"] = to_json(p.plan);
    j["mix"] = to_json(p.mix);
    j["pool"] = p.synthesize && p.annotate_count > 0
                    ? ordered_json({{"records", p.pool.size()}, {"derived", p.pool_derived}})
                    : ordered_json(nullptr);
    j["backend"] = describe(p.manifest.backend);
    j["trainer"] = p.trainer ? to_json(*p.trainer) : ordered_json({{"builtin", kBaselineTrainerId}});
    j["output_dir"] = p.output_dir.string();
    return j;
}

}  // namespace

RunOutcome cmd_run(const fs::path& manifest_path, const RunOptions& options) {
    Prepared p = prepare(manifest_path, options);
    if (options.dry_run) return {dry_run_summary(p), {}};
    Runner runner(p, options);
    return runner.run();
}

// ---------------------------------------------------------------- report

std::string data_type_label(std::optional<SynthesisMode> mode) {
    if (!mode) return "-";
    switch (*mode) {
        case SynthesisMode::generate: return "X,Y";
        case SynthesisMode::annotate: return "Y|X";
        case SynthesisMode::combine: return "Y|X; X,Y";
    }
    return "-";
}

namespace {

struct ReportRow {
    std::string task_id;
    TaskKind kind = TaskKind::classification;
    double original_fraction = 0.0;
    std::string original_label;
    int type_rank = 0;
    std::string type_label;
    double synthetic_fraction = 0.0;
    std::string synthetic_label;
    double dev = 0.0;
    double test = 0.0;
    std::size_t input_order = 0;
};

int type_rank(std::optional<SynthesisMode> mode) {
    if (!mode) return 0;
    switch (*mode) {
        case SynthesisMode::generate: return 1;
        case SynthesisMode::annotate: return 2;
        case SynthesisMode::combine: return 3;
    }
    return 0;
}

const json& ledger_field(const json& j, const char* key, std::size_t index) {
    if (!j.is_object() || !j.contains(key)) {
        throw ValidationError("report: ledger #" + std::to_string(index + 1) + " lacks '" + key + "'");
    }
    return j.at(key);
}

ReportRow to_row(const json& ledger, std::size_t index) {
    const auto& r = ledger_field(ledger, "report_row", index);
    const auto& metrics = ledger_field(ledger, "metrics", index);
    ReportRow row;
    row.input_order = index;
    row.task_id = r.at("task_id").get<std::string>();
    row.kind = parse_task_kind(r.at("kind").get<std::string>());
    const auto base_n = r.at("base_n").get<std::size_t>();
    row.original_fraction = r.at("original_fraction").get<double>();
    row.synthetic_fraction = r.at("synthetic_fraction").get<double>();
    std::optional<SynthesisMode> mode;
    if (!r.at("mode").is_null() && r.at("synthetic_count").get<std::size_t>() > 0) {
        mode = parse_synthesis_mode(r.at("mode").get<std::string>());
    }
    row.type_rank = type_rank(mode);
    row.type_label = data_type_label(mode);
    row.original_label = format_share(r.at("original_count").get<std::size_t>(), base_n);
    const auto a = r.at("annotate_count").get<std::size_t>();
    const auto g = r.at("generate_count").get<std::size_t>();
    if (mode == SynthesisMode::combine && a == g) {
        row.synthetic_label = format_share(a, base_n) + " each";
    } else {
        row.synthetic_label = format_share(r.at("synthetic_count").get<std::size_t>(), base_n);
    }
    const auto student = parse_student_metrics(metrics, row.kind);
    row.dev = primary_score(student.dev_metrics);
    row.test = primary_score(student.test_metrics);
    return row;
}

long long display_key(double score) { return std::llround(score * 10000.0); }

}  // namespace

std::string render_report(std::span<const json> ledgers) {
    if (ledgers.empty()) throw ValidationError("report: no ledgers given");
    std::vector<ReportRow> rows;
    for (std::size_t i = 0; i < ledgers.size(); ++i) {
        try {
            rows.push_back(to_row(ledgers[i], i));
        } catch (const json::exception& e) {
            throw ValidationError("report: ledger #" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    const TaskKind kind = rows.front().kind;
    for (const auto& r : rows) {
        if (r.kind != kind) throw ValidationError("report: ledgers mix classification and generation tasks");
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (a.task_id != b.task_id) return a.task_id < b.task_id;
        if (a.original_fraction != b.original_fraction) return a.original_fraction < b.original_fraction;
        if (a.type_rank != b.type_rank) return a.type_rank < b.type_rank;
        return a.synthetic_fraction < b.synthetic_fraction;
    });

    const std::string metric = kind == TaskKind::classification ? "Acc" : "Rouge-L";
    std::ostringstream out;
    auto line = [&](const std::string& o, const std::string& t, const std::string& s, const std::string& d,
                    const std::string& te) {
        out << "| " << std::left << std::setw(8) << o << " | " << std::setw(9) << t << " | " << std::setw(10) << s
            << " | " << std::right << std::setw(12) << d << " | " << std::setw(12) << te << " |\n";
    };

    std::size_t begin = 0;
    std::string current_task;
    while (begin < rows.size()) {
        std::size_t end = begin;
        while (end < rows.size() && rows[end].task_id == rows[begin].task_id &&
               rows[end].original_fraction == rows[begin].original_fraction) {
            ++end;
        }
        if (rows[begin].task_id != current_task) {
            if (!current_task.empty()) out << "\n";
            current_task = rows[begin].task_id;
            out << "task: " << current_task << " (" << to_string(kind) << ")\n";
            line("Original", "Type", "Synthetic", "Dev " + metric, "Test " + metric);
            out << "|----------|-----------|------------|--------------|--------------|\n";
        }
        long long best_dev = LLONG_MIN;
        long long best_test = LLONG_MIN;
        for (std::size_t i = begin; i < end; ++i) {
            best_dev = std::max(best_dev, display_key(rows[i].dev));
            best_test = std::max(best_test, display_key(rows[i].test));
        }
        for (std::size_t i = begin; i < end; ++i) {
            const auto& r = rows[i];
            std::string d = format_percent(r.dev);
            std::string t = format_percent(r.test);
            if (display_key(r.dev) == best_dev) d += "*";
            if (display_key(r.test) == best_test) t += "*";
            line(i == begin ? r.original_label : "", r.type_label, r.type_rank == 0 ? "-" : r.synthetic_label, d, t);
        }
        begin = end;
    }
    return out.str();
}

std::string cmd_report(std::span<const fs::path> ledger_paths) {
    std::vector<json> ledgers;
    for (const auto& p : ledger_paths) {
        if (!fs::is_regular_file(p)) throw ValidationError("report: no such ledger: " + p.string());
        try {
            ledgers.push_back(json::parse(read_file(p)));
        } catch (const json::parse_error& e) {
            throw ValidationError("report: " + p.string() + ": " + e.what());
        }
    }
    return render_report(ledgers);
}

}  // namespace synthaug
