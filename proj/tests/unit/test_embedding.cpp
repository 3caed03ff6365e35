#include <doctest.h>

#include <random>

#include "bimem/embedding.hpp"
#include "bimem/errors.hpp"
#include "support/test_support.hpp"

using namespace bimem;

TEST_CASE("cosine_sim basics") {
    Vector a{1.0, 2.0, 3.0};
    CHECK(cosine_sim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    Vector e1{1.0, 0.0};
    Vector e2{0.0, 1.0};
    CHECK(cosine_sim(e1, e2) == doctest::Approx(0.0));

    Vector diag{1.0, 1.0};
    CHECK(cosine_sim(diag, e1) == doctest::Approx(0.70710678).epsilon(1e-9));
}

TEST_CASE("cosine_sim error paths") {
    Vector a{1.0, 0.0};
    Vector zero{0.0, 0.0};
    Vector shorter{1.0};

    CHECK_THROWS_AS(cosine_sim(a, zero), Error);
    CHECK_THROWS_AS(cosine_sim(a, shorter), Error);
    CHECK(ranking_sim(a, zero) == 0.0);
    CHECK(ranking_sim(zero, zero) == 0.0);
}

TEST_CASE("cosine_sim symmetry and scale invariance") {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 100; ++round) {
        Vector a(16), b(16);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = static_cast<double>(rng() % 2001) / 1000.0 - 1.0;
            b[i] = static_cast<double>(rng() % 2001) / 1000.0 - 1.0;
        }
        a[0] += 1.5;  // keep away from the zero vector
        b[0] += 1.5;
        CHECK(cosine_sim(a, b) == cosine_sim(b, a));
        CHECK(cosine_sim(a, b) >= -1.0);
        CHECK(cosine_sim(a, b) <= 1.0);

        double c = 0.25 + static_cast<double>(rng() % 100) / 10.0;
        Vector scaled = a;
        for (double& x : scaled) x *= c;
        CHECK(cosine_sim(a, scaled) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("deterministic_embed token geometry") {
    // alpha/beta/gamma land in distinct buckets at dim 256 for the fixed
    // hash, so these cosines follow from the normalized count vectors.
    Vector ab = deterministic_embed("alpha beta", 256);
    Vector ab2 = deterministic_embed("alpha beta", 256);
    CHECK(testsupport::vectors_equal(ab, ab2));
    CHECK(cosine_sim(ab, ab2) == doctest::Approx(1.0));

    Vector a = deterministic_embed("alpha", 256);
    Vector b = deterministic_embed("beta", 256);
    CHECK(testsupport::oracle_cosine(a, b) == doctest::Approx(0.0));

    Vector ag = deterministic_embed("alpha gamma", 256);
    CHECK(cosine_sim(ab, ag) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("deterministic_embed is frozen across platforms") {
    // FNV-1a("alpha") % 256 == 43; a drift here would silently invalidate
    // every stored bank.
    Vector a = deterministic_embed("alpha", 256);
    CHECK(a[43] == doctest::Approx(1.0));

    Vector counts = deterministic_embed("alpha alpha beta", 16);
    double norm = 0.0;
    for (double x : counts) norm += x * x;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("deterministic_embed rejects tiny dimensions") {
    CHECK_THROWS_AS(deterministic_embed("text", 4), Error);
}

TEST_CASE("HashingEmbedder trims and validates input") {
    HashingEmbedder embedder(256);
    CHECK(embedder.dimension() == 256);
    CHECK(embedder.name() == "hash-256");

    CHECK(testsupport::vectors_equal(embedder.embed("hello"), embedder.embed("hello ")));
    CHECK(testsupport::vectors_equal(embedder.embed("hello"), embedder.embed("hello")));
    CHECK_FALSE(testsupport::vectors_equal(embedder.embed("cat"), embedder.embed("dog")));

    CHECK_THROWS_AS(embedder.embed("   "), Error);
    CHECK_THROWS_AS(embedder.embed(""), Error);
}

TEST_CASE("make_provider parses provider ids") {
    auto hash = make_provider("hash-64");
    CHECK(hash->dimension() == 64);
    CHECK(hash->name() == "hash-64");

    CHECK_THROWS_AS(make_provider("sesame"), Error);
    CHECK_THROWS_AS(make_provider("hash-banana"), Error);
}
