// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace synthaug {

/// Identifies the sampling algorithm; recorded next to every seed so that
/// artifacts can be regenerated bit-for-bit.
inline constexpr std::string_view kRngVersion = "mt19937_64/rejection/v1";

/// Seeded generator whose output depends only on the seed. The engine is
/// fully specified by the standard; bounded draws use rejection sampling
/// rather than the implementation-defined std distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    /// Uniform real in [0, 1) with 53 bits of precision.
    double unit();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Labeled sub-seed: every stage draws from its own stream derived from the
/// run seed, so adding draws in one stage never perturbs another.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) noexcept;

/// k distinct indices from [0, n), in draw order.
std::vector<std::size_t> draw_indices(std::size_t n, std::size_t k, Rng& rng);

/// k distinct indices from [0, n), ascending.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace synthaug
