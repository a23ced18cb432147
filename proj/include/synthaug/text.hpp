// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace synthaug {

// ASCII whitespace only; multi-byte UTF-8 sequences are never split.
bool is_space(char c) noexcept;

std::string_view trim(std::string_view text) noexcept;

std::string to_lower_ascii(std::string_view text);

/// Lowercase, trim and collapse internal whitespace runs to a single space.
std::string normalize_text(std::string_view text);

}  // namespace synthaug
