// SPDX-License-Identifier: Apache-2.0

#include "synthaug/corpus.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "synthaug/digest.hpp"
#include "synthaug/error.hpp"
#include "synthaug/rng.hpp"
#include "synthaug/text.hpp"

namespace synthaug {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
        case Split::unlabeled: return "unlabeled";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "dev") return Split::dev;
    if (name == "test") return Split::test;
    if (name == "unlabeled") return Split::unlabeled;
    throw ValidationError("unknown split '" + std::string(name) + "'");
}

std::string_view to_string(TaskKind kind) noexcept {
    return kind == TaskKind::classification ? "classification" : "generation";
}

TaskKind parse_task_kind(std::string_view name) {
    if (name == "classification") return TaskKind::classification;
    if (name == "generation") return TaskKind::generation;
    throw ValidationError("unknown task kind '" + std::string(name) + "'");
}

void TaskSpec::validate() const {
    if (trim(task_id).empty()) throw ValidationError("task: task_id is empty");
    if (is_classification() && label_set.empty()) {
        throw ValidationError("task " + task_id + ": classification task needs a non-empty label_set");
    }
    if (!is_classification() && !label_set.empty()) {
        throw ValidationError("task " + task_id + ": label_set is only allowed for classification tasks");
    }
    std::set<std::string> labels;
    for (const auto& label : label_set) {
        if (trim(label).empty()) throw ValidationError("task " + task_id + ": blank label in label_set");
        if (!labels.insert(label).second) throw ValidationError("task " + task_id + ": duplicate label '" + label + "'");
    }
    std::set<std::string> tags;
    for (const auto& seg : field_template) {
        if (seg.tag.empty()) throw ValidationError("task " + task_id + ": field segment '" + seg.name + "' has no tag");
        if (seg.tag == "[INPUT]" || seg.tag == "[OUTPUT]") {
            throw ValidationError("task " + task_id + ": field tag " + seg.tag + " collides with a prompt tag");
        }
        if (!tags.insert(seg.tag).second) throw ValidationError("task " + task_id + ": duplicate field tag " + seg.tag);
    }
}

ordered_json to_json(const TaskSpec& task) {
    ordered_json j;
    j["task_id"] = task.task_id;
    j["description"] = task.description;
    j["kind"] = to_string(task.kind);
    j["label_set"] = task.label_set;
    auto segs = ordered_json::array();
    for (const auto& seg : task.field_template) segs.push_back({{"name", seg.name}, {"tag", seg.tag}});
    j["field_template"] = std::move(segs);
    return j;
}

TaskSpec task_from_json(const json& j) {
    TaskSpec task;
    try {
        task.task_id = j.at("task_id").get<std::string>();
        task.description = j.value("description", std::string{});
        task.kind = parse_task_kind(j.at("kind").get<std::string>());
        if (j.contains("label_set") && !j.at("label_set").is_null()) {
            task.label_set = j.at("label_set").get<std::vector<std::string>>();
        }
        if (j.contains("field_template") && !j.at("field_template").is_null()) {
            for (const auto& seg : j.at("field_template")) {
                task.field_template.push_back({seg.value("name", std::string{}), seg.at("tag").get<std::string>()});
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("task spec: ") + e.what());
    }
    task.validate();
    return task;
}

TaskSpec load_task_spec(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return task_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string render_fields(const TaskSpec& task, std::span<const std::string> values) {
    if (values.size() != task.field_template.size()) {
        throw ValidationError("render_fields: expected " + std::to_string(task.field_template.size()) + " values, got " +
                              std::to_string(values.size()));
    }
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += task.field_template[i].tag;
        out.push_back(' ');
        out += values[i];
    }
    return out;
}

bool matches_field_template(const TaskSpec& task, std::string_view text) {
    std::size_t pos = 0;
    for (const auto& seg : task.field_template) {
        const auto at = text.find(seg.tag, pos);
        if (at == std::string_view::npos) return false;
        pos = at + seg.tag.size();
    }
    return true;
}

Dataset::Dataset(std::string task_id, Split split, std::vector<Example> examples, std::size_t assigned_ids)
    : task_id_(std::move(task_id)), split_(split), examples_(std::move(examples)), assigned_ids_(assigned_ids) {
    std::unordered_set<std::string_view> ids;
    ids.reserve(examples_.size());
    for (const auto& ex : examples_) {
        if (trim(ex.input).empty()) throw ValidationError("example '" + ex.id + "': input is blank");
        if (!ids.insert(ex.id).second) throw ValidationError("duplicate example id '" + ex.id + "'");
        if (split_ != Split::unlabeled && !ex.output) {
            throw ValidationError("example '" + ex.id + "': missing output on labeled split " + std::string(to_string(split_)));
        }
    }
}

ordered_json to_json(const Example& example) {
    ordered_json j;
    j["id"] = example.id;
    j["input"] = example.input;
    if (example.output) j["output"] = *example.output;
    return j;
}

std::string to_jsonl(std::span<const Example> examples) {
    std::string out;
    for (const auto& ex : examples) {
        out += to_json(ex).dump(-1, ' ', false, json::error_handler_t::strict);
        out.push_back('\n');
    }
    return out;
}

std::string dataset_digest(const Dataset& ds) {
    return sha256_hex(to_jsonl(ds.examples()));
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::string line_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
    return path.string() + ":" + std::to_string(line) + ": " + what;
}

std::string padded_index(std::size_t index) {
    std::ostringstream ss;
    ss << std::setw(8) << std::setfill('0') << index;
    return ss.str();
}

}  // namespace

Dataset load_jsonl(const std::filesystem::path& path, Split split, const TaskSpec& task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::vector<Example> examples;
    std::unordered_map<std::string, std::size_t> first_line;
    std::size_t assigned = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;

        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(line_error(path, line_no, std::string("malformed JSON: ") + e.what()));
        }
        if (!rec.is_object()) throw ValidationError(line_error(path, line_no, "record is not a JSON object"));

        Example ex;
        if (auto it = rec.find("id"); it != rec.end() && !it->is_null()) {
            if (!it->is_string()) throw ValidationError(line_error(path, line_no, "field 'id' must be a string"));
            ex.id = it->get<std::string>();
        } else {
            ex.id = padded_index(line_no - 1);
            ++assigned;
        }
        auto input = rec.find("input");
        if (input == rec.end() || !input->is_string()) {
            throw ValidationError(line_error(path, line_no, "field 'input' must be a string"));
        }
        ex.input = input->get<std::string>();
        if (trim(ex.input).empty()) throw ValidationError(line_error(path, line_no, "field 'input' is blank"));
        if (auto it = rec.find("output"); it != rec.end() && !it->is_null()) {
            if (!it->is_string()) throw ValidationError(line_error(path, line_no, "field 'output' must be a string"));
            ex.output = it->get<std::string>();
        }
        if (split != Split::unlabeled && !ex.output) {
            throw ValidationError(line_error(path, line_no, "missing output on labeled split " + std::string(to_string(split))));
        }
        auto [it, inserted] = first_line.emplace(ex.id, line_no);
        if (!inserted) {
            throw ValidationError(path.string() + ": duplicate id '" + ex.id + "' on lines " + std::to_string(it->second) +
                                  " and " + std::to_string(line_no));
        }
        examples.push_back(std::move(ex));
    }
    return Dataset(task.task_id, split, std::move(examples), assigned);
}

void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
    write_file(path, to_jsonl(ds.examples()));
}

std::size_t fraction_count(double fraction, std::size_t n) {
    if (!std::isfinite(fraction) || fraction < 0.0) {
        throw ValidationError("fraction must be a finite non-negative number");
    }
    // The epsilon absorbs representation error in f*n (0.05*2500 and the
    // like) so exact halves on the percent grid round up as intended.
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5 + 1e-9));
}

Dataset sample_fraction(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw ValidationError("sample_fraction: fraction must lie in [0, 1]");
    }
    const auto picked = sample_indices(ds.size(), fraction_count(fraction, ds.size()), seed);
    std::vector<Example> out;
    out.reserve(picked.size());
    for (auto i : picked) out.push_back(ds[i]);
    return Dataset(ds.task_id(), ds.split(), std::move(out));
}

LabelHistogram label_histogram(const Dataset& ds, const TaskSpec& task) {
    if (!task.is_classification()) {
        throw ValidationError("label_histogram: task " + task.task_id + " is not a classification task");
    }
    LabelHistogram hist;
    for (const auto& label : task.label_set) hist.counts[label] = 0;
    for (const auto& ex : ds.examples()) {
        if (!ex.output) continue;
        auto it = hist.counts.find(*ex.output);
        if (it != hist.counts.end()) {
            ++it->second;
        } else {
            ++hist.out_of_set;
        }
    }
    return hist;
}

}  // namespace synthaug
