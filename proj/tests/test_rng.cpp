#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "arbkit/rng.hpp"
#include "test_support.hpp"

using namespace arbkit;
using namespace testsupport;

TEST_CASE("same (seed, stream) replays the identical sequence") {
    RngStream a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("stream output ignores activity on other streams") {
    RngStream lone(42, 7);
    std::vector<std::uint64_t> expected;
    for (int i = 0; i < 64; ++i) expected.push_back(lone.next_u64());

    // consume a pile of unrelated streams first
    for (std::uint64_t s = 0; s < 50; ++s) {
        RngStream other(42, 1000 + s);
        for (int i = 0; i < 17; ++i) other.next_u64();
    }
    RngStream again(42, 7);
    for (int i = 0; i < 64; ++i) CHECK(again.next_u64() == expected[i]);
}

TEST_CASE("stateless access matches sequential draws and seek") {
    RngStream s(123456789, 11);
    std::vector<std::uint64_t> seq;
    for (int i = 0; i < 16; ++i) seq.push_back(s.next_u64());
    for (int i = 0; i < 16; ++i) CHECK(RngStream::u64_at(123456789, 11, i) == seq[i]);
    s.seek(5);
    CHECK(s.next_u64() == seq[5]);
}

TEST_CASE("distinct streams and seeds decorrelate") {
    RngStream a(42, 0), b(42, 1), c(43, 0);
    int same_ab = 0, same_ac = 0;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        if (va == b.next_u64()) ++same_ab;
        if (va == c.next_u64()) ++same_ac;
    }
    CHECK(same_ab == 0);
    CHECK(same_ac == 0);

    // empirical correlation between adjacent streams, n = 1e6
    const std::size_t n = 1000000;
    RngStream x(20240001, 100), y(20240001, 101);
    double sxy = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = x.normal();
        const double v = y.normal();
        sxy += u * v;
        sx += u;
        sy += v;
        sxx += u * u;
        syy += v * v;
    }
    const double nd = static_cast<double>(n);
    const double corr = (sxy / nd - sx / nd * sy / nd) /
                        std::sqrt((sxx / nd - sx / nd * sx / nd) * (syy / nd - sy / nd * sy / nd));
    CHECK(std::abs(corr) < 3.3 / std::sqrt(nd));
}

TEST_CASE("uniforms stay strictly inside (0,1) with the right moments") {
    RngStream s(7, 0);
    const std::size_t n = 1000000;
    double sum = 0.0, sq = 0.0, mn = 1.0, mx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = s.uniform01();
        sum += u;
        sq += u * u;
        mn = std::min(mn, u);
        mx = std::max(mx, u);
    }
    CHECK(mn > 0.0);
    CHECK(mx < 1.0);
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(var - 1.0 / 12.0) < 3e-4);
}

TEST_CASE("normals and exponentials have the right first moments") {
    RngStream s(11, 4);
    const std::size_t n = 1000000;
    double sn = 0.0, sn2 = 0.0, se = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = s.normal();
        sn += z;
        sn2 += z * z;
        se += s.exponential();
    }
    CHECK(std::abs(sn / n) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(sn2 / n - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
    CHECK(std::abs(se / n - 1.0) < 3.0 / std::sqrt(static_cast<double>(n)));
}
