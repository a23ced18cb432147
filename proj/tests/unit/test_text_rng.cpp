// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <set>

#include "synthaug/digest.hpp"
#include "synthaug/rng.hpp"
#include "synthaug/text.hpp"

using namespace synthaug;

TEST_CASE("normalize_text lowercases, trims and collapses whitespace") {
    CHECK(normalize_text("  Hello\t\tWORLD \n") == "hello world");
    CHECK(normalize_text("") == "");
    CHECK(normalize_text(" \t ") == "");
    CHECK(trim("  a b  ") == "a b");
}

TEST_CASE("sha256 of known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("rng streams depend only on the seed") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs |= x != c.next();
    }
    CHECK(differs);
}

TEST_CASE("mt19937_64 reference value") {
    // The standard fixes the 10000th output for the default seed.
    Rng r(5489u);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = r.next();
    CHECK(v == 9981545732273789042ull);
}

TEST_CASE("below stays in range and hits every value") {
    Rng r(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto x = r.below(6);
        REQUIRE(x < 6);
        seen.insert(x);
    }
    CHECK(seen.size() == 6);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("derive_seed separates labels and indices") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("sample_indices returns k distinct sorted indices") {
    for (std::size_t n : {0u, 1u, 5u, 100u}) {
        for (std::size_t k = 0; k <= n; k += std::max<std::size_t>(1, n / 4)) {
            const auto idx = sample_indices(n, k, 99);
            REQUIRE(idx.size() == k);
            CHECK(std::is_sorted(idx.begin(), idx.end()));
            CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
            for (auto i : idx) CHECK(i < n);
            CHECK(idx == sample_indices(n, k, 99));
        }
    }
}

TEST_CASE("shuffle is a permutation") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
    auto w = v;
    Rng r(3);
    r.shuffle(std::span<int>(w));
    CHECK(w != v);
    std::sort(w.begin(), w.end());
    CHECK(w == v);
}
