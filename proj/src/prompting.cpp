// SPDX-License-Identifier: Apache-2.0

#include "synthaug/prompting.hpp"

#include <unordered_map>

#include "synthaug/digest.hpp"
#include "synthaug/error.hpp"
#include "synthaug/rng.hpp"
#include "synthaug/text.hpp"

namespace synthaug {

std::string_view to_string(PromptMode mode) noexcept {
    return mode == PromptMode::annotate ? "annotate" : "generate";
}

PromptMode parse_prompt_mode(std::string_view name) {
    if (name == "annotate") return PromptMode::annotate;
    if (name == "generate") return PromptMode::generate;
    throw ValidationError("unknown prompt mode '" + std::string(name) + "'");
}

bool contains_tag_literal(std::string_view text) noexcept {
    return text.find(kInputTag) != std::string_view::npos || text.find(kOutputTag) != std::string_view::npos;
}

std::string_view to_string(ExemplarSelection selection) noexcept {
    return selection == ExemplarSelection::seeded_uniform ? "seeded-uniform" : "fixed-list";
}

ExemplarSelection parse_exemplar_selection(std::string_view name) {
    if (name == "seeded-uniform") return ExemplarSelection::seeded_uniform;
    if (name == "fixed-list") return ExemplarSelection::fixed_list;
    throw ValidationError("unknown exemplar selection '" + std::string(name) + "'");
}

std::vector<Example> select_exemplars(std::span<const Example> source, const ExemplarPolicy& policy,
                                      std::uint64_t draw_seed) {
    std::vector<Example> out;
    if (policy.selection == ExemplarSelection::fixed_list) {
        std::unordered_map<std::string_view, const Example*> by_id;
        for (const auto& ex : source) by_id.emplace(ex.id, &ex);
        const std::size_t k = std::min(policy.k, policy.fixed_ids.size());
        if (k < policy.k) {
            throw ValidationError("exemplar policy: k=" + std::to_string(policy.k) + " but only " +
                                  std::to_string(policy.fixed_ids.size()) + " fixed ids listed");
        }
        for (std::size_t i = 0; i < k; ++i) {
            auto it = by_id.find(policy.fixed_ids[i]);
            if (it == by_id.end()) throw ValidationError("exemplar id '" + policy.fixed_ids[i] + "' not in exemplar source");
            out.push_back(*it->second);
        }
        return out;
    }
    if (policy.k > source.size()) {
        throw ValidationError("exemplar policy: k=" + std::to_string(policy.k) + " exceeds exemplar source of size " +
                              std::to_string(source.size()));
    }
    Rng rng(draw_seed);
    for (auto i : draw_indices(source.size(), policy.k, rng)) out.push_back(source[i]);
    return out;
}

std::string prompt_hash(std::string_view text) {
    return sha256_hex(text);
}

RenderedPrompt render_prompt(const TaskSpec& task, std::span<const Example> exemplars, PromptMode mode,
                             const Example* target) {
    if (mode == PromptMode::annotate && target == nullptr) {
        throw ValidationError("render_prompt: annotate mode needs a target example");
    }
    if (mode == PromptMode::generate && target != nullptr) {
        throw ValidationError("render_prompt: generate mode takes no target example");
    }
    if (contains_tag_literal(task.description)) {
        throw ValidationError("render_prompt: task description contains a prompt tag literal");
    }

    RenderedPrompt prompt;
    prompt.mode = mode;
    std::string& text = prompt.text;
    text = task.description;
    text.push_back('\n');
    for (const auto& ex : exemplars) {
        if (!ex.output) throw ValidationError("render_prompt: exemplar '" + ex.id + "' is unlabeled");
        if (contains_tag_literal(ex.input) || contains_tag_literal(*ex.output)) {
            throw ValidationError("render_prompt: exemplar '" + ex.id + "' contains a prompt tag literal");
        }
        text.append(kInputTag).append(" ").append(ex.input).append("\n");
        text.append(kOutputTag).append(" ").append(*ex.output).append("\n");
        prompt.exemplar_ids.push_back(ex.id);
    }
    if (mode == PromptMode::annotate) {
        if (trim(target->input).empty()) throw ValidationError("render_prompt: target input is blank");
        if (contains_tag_literal(target->input)) {
            throw ValidationError("render_prompt: target '" + target->id + "' contains a prompt tag literal");
        }
        text.append(kInputTag).append(" ").append(target->input).append("\n").append(kOutputTag);
    } else {
        text.append(kInputTag);
    }
    prompt.prompt_hash = prompt_hash(text);
    return prompt;
}

ParsedCompletion parse_completion(std::string_view raw, PromptMode mode) {
    ParsedCompletion parsed;
    if (mode == PromptMode::annotate) {
        parsed.output = std::string(trim(raw.substr(0, raw.find(kInputTag))));
    } else {
        const auto split = raw.find(kOutputTag);
        if (split == std::string_view::npos) throw MalformedCompletion("generated pair has no [OUTPUT] tag");
        parsed.input = std::string(trim(raw.substr(0, split)));
        const auto rest = raw.substr(split + kOutputTag.size());
        parsed.output = std::string(trim(rest.substr(0, rest.find(kInputTag))));
    }
    if (parsed.output.empty()) throw MalformedCompletion("completion has an empty output");
    return parsed;
}

PromptParts parse_prompt(std::string_view text) {
    static constexpr std::string_view kSegmentStart = "\n[INPUT]";
    static constexpr std::string_view kOutputStart = "\n[OUTPUT]";

    const auto first = text.find(kSegmentStart);
    if (first == std::string_view::npos) throw ValidationError("parse_prompt: no [INPUT] segment");

    PromptParts parts;
    parts.description = std::string(text.substr(0, first));
    std::string_view rest = text.substr(first + 1);  // starts at "[INPUT]"

    while (true) {
        // rest starts with "[INPUT]".
        if (rest == kInputTag) {
            parts.mode = PromptMode::generate;
            return parts;
        }
        if (!rest.starts_with("[INPUT] ")) throw ValidationError("parse_prompt: expected \"[INPUT] \"");
        rest.remove_prefix(kInputTag.size() + 1);
        const auto out_at = rest.find(kOutputStart);
        if (out_at == std::string_view::npos) throw ValidationError("parse_prompt: [INPUT] without [OUTPUT]");
        std::string input(rest.substr(0, out_at));
        rest.remove_prefix(out_at + kOutputStart.size());
        if (rest.empty()) {
            parts.mode = PromptMode::annotate;
            parts.target_input = std::move(input);
            return parts;
        }
        if (rest.front() != ' ') throw ValidationError("parse_prompt: expected a space after [OUTPUT]");
        rest.remove_prefix(1);
        const auto next = rest.find(kSegmentStart);
        if (next == std::string_view::npos) throw ValidationError("parse_prompt: prompt does not end in a terminal tag");
        parts.exemplars.emplace_back(std::move(input), std::string(rest.substr(0, next)));
        rest.remove_prefix(next + 1);
    }
}

}  // namespace synthaug
