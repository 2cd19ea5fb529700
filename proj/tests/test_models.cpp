#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "arbkit/models.hpp"
#include "test_support.hpp"

using namespace arbkit;
using namespace testsupport;

namespace {

constexpr double kAbsorbProb = 0.3173105078629141;   // 2 Phi(-1)
constexpr double kInverseMoment = 0.6826894921370859;  // 2 Phi(1) - 1

PathBundle run(ModelKind kind, std::size_t n_steps, std::size_t n_paths, std::uint64_t seed,
               double horizon = 1.0) {
    ModelSpec spec;
    spec.kind = kind;
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(horizon, n_steps));
    return simulate(spec, grid, n_paths, seed);
}

std::vector<double> eval_a(const Characteristics& ch, double t, std::vector<double> state) {
    std::vector<double> out(ch.dim);
    ch.a(t, state, out);
    return out;
}

SymMatrix eval_c(const Characteristics& ch, double t, std::vector<double> state) {
    SymMatrix out(ch.dim);
    ch.c(t, state, out);
    return out;
}

}  // namespace

TEST_CASE("model validation catches bad parameters") {
    ModelSpec s;
    s.kind = ModelKind::StoppedBm;
    s.start = {0.0};
    CHECK_THROWS_AS(validate_model(s), InvalidModelError);

    s = ModelSpec{};
    s.kind = ModelKind::ExpDefault;
    s.rate = -2.0;
    CHECK_THROWS_AS(validate_model(s), InvalidModelError);

    s = ModelSpec{};
    s.kind = ModelKind::KernelDrift;
    s.kernel_rate = 0.0;
    CHECK_THROWS_AS(validate_model(s), InvalidModelError);

    s = ModelSpec{};
    s.kind = ModelKind::DriftedBm;
    s.dim = 2;
    s.sigma = {1.0, 0.0, 0.0};  // wrong size
    CHECK_THROWS_AS(validate_model(s), InvalidModelError);
}

TEST_CASE("absorbed walk: absorption probability and martingale mean") {
    const std::size_t m = 20000;
    PathBundle b = run(ModelKind::StoppedBm, 64, m, 101);
    const auto& abs_at = b.aux_scalars.at("absorbed_at");

    std::size_t absorbed = 0;
    std::vector<double> terminal(m);
    for (std::size_t p = 0; p < m; ++p) {
        terminal[p] = b.value(p, 64);
        if (std::isfinite(abs_at[p])) {
            ++absorbed;
            CHECK(terminal[p] == 0.0);
            // zero from the absorption index onwards
            const auto k = static_cast<std::size_t>(abs_at[p]);
            CHECK(b.value(p, k) == 0.0);
            if (k > 0) CHECK(b.value(p, k - 1) > 0.0);
        } else {
            CHECK(terminal[p] > 0.0);
        }
    }
    const double phat = static_cast<double>(absorbed) / static_cast<double>(m);
    const double se = std::sqrt(kAbsorbProb * (1.0 - kAbsorbProb) / static_cast<double>(m));
    CHECK(std::abs(phat - kAbsorbProb) < 3.0 * se);
    CHECK(std::abs(mean(terminal) - 1.0) < 3.0 * stderr_of_mean(terminal));
}

TEST_CASE("absorption probability does not depend on the grid resolution") {
    // the bridge correction makes absorption exact in distribution at any step count
    const std::size_t m = 20000;
    for (std::size_t n : {8u, 256u}) {
        PathBundle b = run(ModelKind::StoppedBm, n, m, 202);
        std::size_t absorbed = 0;
        for (std::size_t p = 0; p < m; ++p)
            if (b.value(p, n) == 0.0) ++absorbed;
        const double phat = static_cast<double>(absorbed) / static_cast<double>(m);
        const double se = std::sqrt(kAbsorbProb * (1.0 - kAbsorbProb) / static_cast<double>(m));
        CHECK(std::abs(phat - kAbsorbProb) < 3.5 * se);
    }
}

TEST_CASE("radial walk from one: inverse moment matches the reflection value") {
    const std::size_t m = 20000;
    PathBundle b = run(ModelKind::Bes3, 32, m, 303);
    std::vector<double> inv(m);
    for (std::size_t p = 0; p < m; ++p) {
        CHECK(b.value(p, 32) > 0.0);
        inv[p] = 1.0 / b.value(p, 32);
    }
    CHECK(std::abs(mean(inv) - kInverseMoment) < 3.0 * stderr_of_mean(inv) + 1e-4);
}

TEST_CASE("default model: jump time, exact exponential values, martingale mean") {
    const std::size_t m = 20000;
    PathBundle b = run(ModelKind::ExpDefault, 64, m, 404);
    const auto& xi = b.aux_scalars.at("xi");
    const auto& zleft = b.aux_scalars.at("z_left_limit");
    const auto& z = b.aux_series.at("Z");

    std::size_t jumped = 0;
    std::vector<double> terminal(m);
    const double e1 = std::exp(1.0);
    for (std::size_t p = 0; p < m; ++p) {
        terminal[p] = b.value(p, 64);
        CHECK(zleft[p] == doctest::Approx(std::exp(xi[p])).epsilon(1e-12));
        if (xi[p] <= 1.0) {
            ++jumped;
            CHECK(terminal[p] == 0.0);
        } else {
            CHECK(terminal[p] == e1);
        }
        // the price path and its stored copy coincide for this model
        for (std::size_t i = 0; i <= 64; i += 16) CHECK(z[p * 65 + i] == b.value(p, i));
    }
    const double pjump = 1.0 - std::exp(-1.0);
    const double phat = static_cast<double>(jumped) / static_cast<double>(m);
    CHECK(std::abs(phat - pjump) < 3.0 * std::sqrt(pjump * (1.0 - pjump) / m));
    CHECK(std::abs(mean(terminal) - 1.0) < 3.0 * stderr_of_mean(terminal));
}

TEST_CASE("compensated single jump: centred terminal and clock aux") {
    const std::size_t m = 20000;
    PathBundle b = run(ModelKind::CompensatorModel, 64, m, 505);
    const auto& xi = b.aux_scalars.at("xi");
    const auto& clock = b.aux_series.at("B");
    std::vector<double> terminal(m);
    for (std::size_t p = 0; p < m; ++p) {
        terminal[p] = b.value(p, 64);
        const double want =
            std::min(1.0, xi[p]) - (xi[p] <= 1.0 ? 1.0 : 0.0);
        CHECK(terminal[p] == doctest::Approx(want).epsilon(1e-12));
        CHECK(clock[p * 65 + 64] == doctest::Approx(std::min(1.0, xi[p])).epsilon(1e-12));
    }
    CHECK(std::abs(mean(terminal)) < 3.0 * stderr_of_mean(terminal));
}

TEST_CASE("kernel drift model: deterministic component is exact") {
    ModelSpec spec;
    spec.kind = ModelKind::KernelDrift;
    spec.kernel_rate = 2.0;
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, 128));
    PathBundle b = simulate(spec, grid, 5, 606);
    CHECK(b.dim == 2);
    for (std::size_t p = 0; p < 5; ++p)
        for (std::size_t i = 0; i <= 128; ++i)
            CHECK(b.value(p, i, 1) == doctest::Approx(2.0 * grid->time(i)).epsilon(1e-14));
}

TEST_CASE("characteristics report the correct triplet structure") {
    ModelSpec s;
    s.kind = ModelKind::DriftedBm;
    s.dim = 2;
    s.mu = {0.5, -1.0};
    Characteristics ch = characteristics(s);
    CHECK(ch.constant);
    CHECK_FALSE(ch.jump.has_value());
    auto tr = eval_a(ch, 0.0, {0.0, 0.0});
    CHECK(tr[0] == 0.5);
    CHECK(tr[1] == -1.0);
    CHECK(eval_c(ch, 0.0, {0.0, 0.0}).at(0, 0) == 1.0);

    s = ModelSpec{};
    s.kind = ModelKind::StoppedBm;
    ch = characteristics(s);
    CHECK_FALSE(ch.constant);
    CHECK(eval_a(ch, 0.1, {2.0})[0] == 0.0);
    CHECK(eval_c(ch, 0.1, {2.0}).at(0, 0) == 1.0);
    CHECK(eval_c(ch, 0.1, {0.0}).at(0, 0) == 0.0);

    s.kind = ModelKind::Bes3;
    ch = characteristics(s);
    CHECK(eval_a(ch, 0.0, {0.5})[0] == 2.0);

    // both jump models are martingales: the special decomposition has no drift
    s = ModelSpec{};
    s.kind = ModelKind::ExpDefault;
    ch = characteristics(s);
    CHECK(ch.jump.has_value());
    CHECK(eval_a(ch, 0.2, {3.0})[0] == 0.0);
    CHECK(eval_c(ch, 0.2, {3.0}).at(0, 0) == 0.0);

    s.kind = ModelKind::CompensatorModel;
    ch = characteristics(s);
    CHECK(ch.jump.has_value());
    CHECK(eval_a(ch, 0.2, {0.3})[0] == 0.0);
    CHECK(eval_a(ch, 0.2, {-0.7})[0] == 0.0);

    s = ModelSpec{};
    s.kind = ModelKind::KernelDrift;
    s.kernel_rate = 3.0;
    ch = characteristics(s);
    CHECK(ch.constant);
    auto a = eval_a(ch, 0.0, {0.0, 0.0});
    CHECK(a[0] == 0.0);
    CHECK(a[1] == 3.0);
    CHECK(eval_c(ch, 0.0, {0.0, 0.0}).at(1, 1) == 0.0);
}

TEST_CASE("changed-measure characteristics exist exactly where a density is defined") {
    ModelSpec s;
    s.kind = ModelKind::StoppedBm;
    CHECK(has_canonical_density(s));
    Characteristics q = q_characteristics(s);
    CHECK(eval_a(q, 0.0, {0.5})[0] == 2.0);  // 1/x repulsion
    CHECK(eval_c(q, 0.0, {0.5}).at(0, 0) == 1.0);

    s.kind = ModelKind::ExpDefault;
    CHECK(has_canonical_density(s));
    q = q_characteristics(s);
    CHECK(eval_a(q, 0.0, {2.0})[0] == 2.0);
    CHECK_FALSE(q.jump.has_value());

    s.kind = ModelKind::CompensatorModel;
    q = q_characteristics(s);
    CHECK(eval_a(q, 0.0, {0.0})[0] == 1.0);

    for (auto kind : {ModelKind::DriftedBm, ModelKind::Bes3, ModelKind::KernelDrift}) {
        ModelSpec t;
        t.kind = kind;
        if (kind == ModelKind::KernelDrift) t.kernel_rate = 1.0;
        CHECK_FALSE(has_canonical_density(t));
        CHECK_THROWS_AS(q_characteristics(t), UnsupportedOperation);
    }
}

TEST_CASE("simulation is chunk-invariant: per-path streams ignore batching") {
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, 32));
    ModelSpec spec;
    spec.kind = ModelKind::StoppedBm;

    PathBundle whole = simulate(spec, grid, 100, 888);
    PathBundle front = simulate(spec, grid, 60, 888, 0);
    PathBundle back = simulate(spec, grid, 40, 888, 60);
    for (std::size_t p = 0; p < 60; ++p)
        for (std::size_t i = 0; i <= 32; ++i)
            CHECK(whole.value(p, i) == front.value(p, i));
    for (std::size_t p = 0; p < 40; ++p)
        for (std::size_t i = 0; i <= 32; ++i)
            CHECK(whole.value(60 + p, i) == back.value(p, i));

    // the chunk driver visits every path exactly once, in global coordinates
    std::vector<double> terminals(100, std::nan(""));
    for_each_chunk(spec, grid, 100, 888, 7, 1,
                   [&](const PathBundle& chunk, std::size_t) {
                       for (std::size_t p = 0; p < chunk.n_paths; ++p)
                           terminals[chunk.path_offset + p] = chunk.value(p, 32);
                   });
    for (std::size_t p = 0; p < 100; ++p) CHECK(terminals[p] == whole.value(p, 32));
}

TEST_CASE("model names round-trip") {
    for (auto kind : {ModelKind::DriftedBm, ModelKind::StoppedBm, ModelKind::Bes3,
                      ModelKind::ExpDefault, ModelKind::CompensatorModel, ModelKind::KernelDrift})
        CHECK(model_kind_from_name(model_kind_name(kind)) == kind);
    CHECK_FALSE(model_kind_from_name("garbage").has_value());
}
