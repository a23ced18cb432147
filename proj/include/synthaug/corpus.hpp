// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace synthaug {

enum class Split { train, dev, test, unlabeled };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view name);

enum class TaskKind { classification, generation };

std::string_view to_string(TaskKind kind) noexcept;
TaskKind parse_task_kind(std::string_view name);

/// One input-output text pair. Unlabeled pool items carry no output.
struct Example {
    std::string id;
    std::string input;
    std::optional<std::string> output;

    bool labeled() const noexcept { return output.has_value(); }

    friend bool operator==(const Example&, const Example&) = default;
};

/// A named segment of a structured input, introduced by a literal tag such
/// as "[CONTEXT]" or "[DATA]".
struct FieldSegment {
    std::string name;
    std::string tag;

    friend bool operator==(const FieldSegment&, const FieldSegment&) = default;
};

struct TaskSpec {
    std::string task_id;
    std::string description;
    TaskKind kind = TaskKind::generation;
    std::vector<std::string> label_set;
    std::vector<FieldSegment> field_template;

    bool is_classification() const noexcept { return kind == TaskKind::classification; }

    /// Throws ValidationError when an invariant is broken.
    void validate() const;

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

nlohmann::ordered_json to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& j);
TaskSpec load_task_spec(const std::filesystem::path& path);

/// Serialize field values in template order: "[CONTEXT] Airport [DATA] ...".
/// values must hold one entry per template segment.
std::string render_fields(const TaskSpec& task, std::span<const std::string> values);

/// True when every template tag occurs in text, in template order.
bool matches_field_template(const TaskSpec& task, std::string_view text);

/// Ordered, immutable collection of examples for one split of one task.
class Dataset {
public:
    Dataset() = default;

    /// Validates: non-blank inputs, unique ids, outputs present unless the
    /// split is unlabeled. Throws ValidationError otherwise.
    Dataset(std::string task_id, Split split, std::vector<Example> examples, std::size_t assigned_ids = 0);

    const std::string& task_id() const noexcept { return task_id_; }
    Split split() const noexcept { return split_; }
    std::span<const Example> examples() const noexcept { return examples_; }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }
    const Example& operator[](std::size_t i) const { return examples_[i]; }

    /// Number of ids synthesized at ingest because the record had none.
    std::size_t assigned_ids() const noexcept { return assigned_ids_; }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.task_id_ == b.task_id_ && a.split_ == b.split_ && a.examples_ == b.examples_;
    }

private:
    std::string task_id_;
    Split split_ = Split::train;
    std::vector<Example> examples_;
    std::size_t assigned_ids_ = 0;
};

nlohmann::ordered_json to_json(const Example& example);

/// One JSON record per line, "\n"-terminated.
std::string to_jsonl(std::span<const Example> examples);

/// SHA-256 of the canonical JSONL form.
std::string dataset_digest(const Dataset& ds);

Dataset load_jsonl(const std::filesystem::path& path, Split split, const TaskSpec& task);
void save_jsonl(const Dataset& ds, const std::filesystem::path& path);

/// Writes bytes to path through a temporary sibling and a rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// round-half-up(fraction * n).
std::size_t fraction_count(double fraction, std::size_t n);

/// Uniform sample without replacement of fraction_count(fraction, N) examples,
/// keeping their relative order.
Dataset sample_fraction(const Dataset& ds, double fraction, std::uint64_t seed);

struct LabelHistogram {
    std::map<std::string, std::size_t> counts;
    std::size_t out_of_set = 0;

    friend bool operator==(const LabelHistogram&, const LabelHistogram&) = default;
};

LabelHistogram label_histogram(const Dataset& ds, const TaskSpec& task);

}  // namespace synthaug
