#include <cmath>
#include <vector>

#include "doctest.h"
#include "thinning/rng.hpp"

using namespace thinning;

TEST_CASE("identical seeds give identical streams") {
    RandomStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived streams differ across trial and role") {
    CHECK(derive_stream_seed(1, 0, 0) != derive_stream_seed(1, 1, 0));
    CHECK(derive_stream_seed(1, 0, 0) != derive_stream_seed(1, 0, 1));
    CHECK(derive_stream_seed(1, 0, 0) != derive_stream_seed(2, 0, 0));
}

TEST_CASE("uniform01 lies in [0,1) and has the right mean") {
    RandomStream rng(7);
    double sum = 0;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::fabs(sum / N - 0.5) < 0.005);
}

TEST_CASE("below(n) is unbiased over small ranges") {
    RandomStream rng(11);
    const uint64_t n = 7;
    std::vector<int64_t> counts(n, 0);
    const int N = 700000;
    for (int i = 0; i < N; ++i) ++counts[rng.below(n)];
    for (uint64_t i = 0; i < n; ++i)
        CHECK(std::fabs(double(counts[i]) / N - 1.0 / double(n)) < 0.01);
}

TEST_CASE("poisson sampler matches mean and variance") {
    RandomStream rng(13);
    for (double lambda : {0.5, 1.0, 4.0, 25.0, 60.0}) {
        const int N = 100000;
        double sum = 0, sum2 = 0;
        for (int i = 0; i < N; ++i) {
            const double x = double(rng.poisson(lambda));
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / N;
        const double var = sum2 / N - mean * mean;
        CHECK(std::fabs(mean - lambda) < 5.0 * std::sqrt(lambda / N) + 0.01);
        CHECK(std::fabs(var - lambda) < 0.05 * lambda + 0.05);
    }
}

TEST_CASE("exponential sampler has the right mean") {
    RandomStream rng(17);
    const int N = 300000;
    double sum = 0;
    for (int i = 0; i < N; ++i) sum += rng.exponential(2.0);
    CHECK(std::fabs(sum / N - 0.5) < 0.01);
}

TEST_CASE("kahan accumulator tracks many small increments") {
    KahanSum s;
    const double dx = 1e-8;
    for (int i = 0; i < 10000000; ++i) s.add(dx);
    CHECK(std::fabs(s.value() - 0.1) < 1e-12);
}
