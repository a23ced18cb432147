// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synthaug/corpus.hpp"

namespace synthaug {

inline constexpr std::string_view kInputTag = "[INPUT]";
inline constexpr std::string_view kOutputTag = "[OUTPUT]";

/// annotate: the teacher labels a given input (prompt ends in [OUTPUT]).
/// generate: the teacher writes a whole pair (prompt ends in [INPUT]).
enum class PromptMode { annotate, generate };

std::string_view to_string(PromptMode mode) noexcept;
PromptMode parse_prompt_mode(std::string_view name);

bool contains_tag_literal(std::string_view text) noexcept;

enum class ExemplarSelection { seeded_uniform, fixed_list };

std::string_view to_string(ExemplarSelection selection) noexcept;
ExemplarSelection parse_exemplar_selection(std::string_view name);

struct ExemplarPolicy {
    std::size_t k = 8;
    ExemplarSelection selection = ExemplarSelection::seeded_uniform;
    std::uint64_t seed = 0;
    std::vector<std::string> fixed_ids;
};

/// Picks the in-prompt demonstrations. seeded_uniform draws policy.k distinct
/// examples (in draw order) from a stream keyed by draw_seed; fixed_list
/// returns the first k listed ids in list order.
std::vector<Example> select_exemplars(std::span<const Example> source, const ExemplarPolicy& policy,
                                      std::uint64_t draw_seed);

struct RenderedPrompt {
    std::string text;
    PromptMode mode = PromptMode::annotate;
    std::vector<std::string> exemplar_ids;
    std::string prompt_hash;
};

std::string prompt_hash(std::string_view text);

/// description "\n" { "[INPUT] " x "\n[OUTPUT] " y "\n" } then either
/// "[INPUT] " target "\n[OUTPUT]" (annotate) or "[INPUT]" (generate).
RenderedPrompt render_prompt(const TaskSpec& task, std::span<const Example> exemplars, PromptMode mode,
                             const Example* target = nullptr);

struct ParsedCompletion {
    std::optional<std::string> input;
    std::string output;

    friend bool operator==(const ParsedCompletion&, const ParsedCompletion&) = default;
};

/// Inverse of the prompt grammar for the text the teacher appends after the
/// terminal tag. Throws MalformedCompletion.
ParsedCompletion parse_completion(std::string_view raw, PromptMode mode);

/// Structured view of a rendered prompt.
struct PromptParts {
    std::string description;
    std::vector<std::pair<std::string, std::string>> exemplars;
    std::optional<std::string> target_input;
    PromptMode mode = PromptMode::annotate;

    friend bool operator==(const PromptParts&, const PromptParts&) = default;
};

/// Recovers the pieces of a prompt built by render_prompt from tag-free
/// fields. Throws ValidationError on text outside the grammar.
PromptParts parse_prompt(std::string_view text);

}  // namespace synthaug
