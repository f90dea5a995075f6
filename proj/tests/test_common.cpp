#include "doctest.h"

#include "attenopat/common.hpp"

#include <numeric>
#include <vector>

using namespace pat;

TEST_CASE("parallel_for visits every index once")
{
    for (int nt : {1, 3}) {
        set_threads(nt);
        std::vector<int> hit(1000, 0);
        parallel_for(hit.size(), [&](std::size_t i) { hit[i] += 1; });
        CHECK(std::accumulate(hit.begin(), hit.end(), 0) == 1000);
        CHECK(*std::min_element(hit.begin(), hit.end()) == 1);
    }
    set_threads(1);
}

TEST_CASE("parallel_for rethrows worker errors")
{
    set_threads(2);
    CHECK_THROWS_AS(parallel_for(100,
                                 [](std::size_t i) {
                                     if (i == 57) numerical_error("Boom", "worker failure");
                                 }),
                    Error);
    set_threads(1);
}

TEST_CASE("nested parallel_for runs inline")
{
    set_threads(2);
    std::vector<int> hit(64, 0);
    parallel_for(8, [&](std::size_t i) { parallel_for(8, [&](std::size_t j) { hit[i * 8 + j] = 1; }); });
    CHECK(std::accumulate(hit.begin(), hit.end(), 0) == 64);
    set_threads(1);
}

TEST_CASE("pairwise_sum is exact on integers and stable on a long series")
{
    std::vector<double> v(1 << 20, 0.1);
    CHECK(pairwise_sum(v.data(), v.size()) == doctest::Approx(0.1 * (1 << 20)).epsilon(1e-14));
    std::vector<double> w(1001);
    std::iota(w.begin(), w.end(), 0.0);
    CHECK(pairwise_sum(w.data(), w.size()) == 500500.0);
    CHECK(pairwise_sum(w.data(), 0) == 0.0);
}

TEST_CASE("errors carry kind and code")
{
    try {
        config_error("UnknownKey", "model.foo");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(e.code() == "UnknownKey");
    }
}
