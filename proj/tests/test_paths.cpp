#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "arbkit/models.hpp"
#include "arbkit/pathfile.hpp"
#include "arbkit/paths.hpp"
#include "test_support.hpp"

using namespace arbkit;
using namespace testsupport;

namespace {

PathBundle single_path(GridPtr grid, const std::vector<double>& values, int dim = 1) {
    PathBundle b;
    b.grid = grid;
    b.n_paths = 1;
    b.dim = dim;
    b.values = values;
    return b;
}

GridProcess constant_strategy(const PathBundle& on, std::vector<double> h) {
    const int w = static_cast<int>(h.size());
    std::vector<double> v(on.n_paths * on.grid->points() * h.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = h[i % h.size()];
    return GridProcess::from_values(on.grid, on.n_paths, w, std::move(v));
}

}  // namespace

TEST_CASE("time grid basics and refinement") {
    TimeGrid g = TimeGrid::uniform(1.0, 8);
    CHECK(g.time(0) == 0.0);
    CHECK(g.horizon() == 1.0);
    CHECK(g.steps() == 8);
    TimeGrid f = g.refined(2);
    CHECK(f.steps() == 16);
    for (std::size_t i = 0; i <= 8; ++i) CHECK(f.time(2 * i) == g.time(i));

    CHECK_THROWS_AS(TimeGrid::uniform(-1.0, 4), ContractViolation);
    CHECK_THROWS_AS(TimeGrid({0.0, 0.5, 0.5, 1.0}), ContractViolation);
    CHECK_THROWS_AS(TimeGrid({0.1, 0.5, 1.0}), ContractViolation);
}

TEST_CASE("ito integral: zero and buy-and-hold strategies") {
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, 512));
    ModelSpec spec;
    spec.kind = ModelKind::StoppedBm;
    PathBundle b = simulate(spec, grid, 50, 777);

    GainsProcess zero = ito_integral(constant_strategy(b, {0.0}), b);
    for (std::size_t p = 0; p < b.n_paths; ++p) CHECK(zero.terminal(p) == 0.0);

    GainsProcess hold = ito_integral(constant_strategy(b, {1.0}), b);
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        CHECK(hold.at(p, 0) == 0.0);
        CHECK(hold.terminal(p) ==
              doctest::Approx(b.value(p, grid->steps()) - b.value(p, 0)).epsilon(1e-12));
    }
}

TEST_CASE("ito integral converges to the Riemann value on S = t^2, H = t") {
    // integral of t d(t^2) over [0,1] is 2/3; left sums err like 1/N
    double errs[2];
    std::size_t n = 1000;
    for (int round = 0; round < 2; ++round) {
        auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, n));
        std::vector<double> s(grid->points()), h(grid->points());
        for (std::size_t i = 0; i < grid->points(); ++i) {
            s[i] = grid->time(i) * grid->time(i);
            h[i] = grid->time(i);
        }
        PathBundle b = single_path(grid, s);
        GridProcess strat = GridProcess::from_values(grid, 1, 1, h);
        errs[round] = std::abs(ito_integral(strat, b).terminal(0) - 2.0 / 3.0);
        CHECK(errs[round] < 2.0 / static_cast<double>(n));
        n *= 2;
    }
    CHECK(errs[0] / errs[1] > 1.7);
    CHECK(errs[0] / errs[1] < 2.3);
}

TEST_CASE("ito integral is linear in the strategy") {
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, 128));
    ModelSpec spec;
    spec.kind = ModelKind::DriftedBm;
    spec.dim = 2;
    spec.mu = {0.1, -0.2};
    PathBundle b = simulate(spec, grid, 20, 9001);

    RngStream rng(5, 5);
    auto random_strategy = [&]() {
        std::vector<double> v(b.n_paths * grid->points() * 2);
        for (auto& x : v) x = rng.normal();
        return GridProcess::from_values(grid, b.n_paths, 2, std::move(v));
    };
    GridProcess h1 = random_strategy(), h2 = random_strategy();
    const double alpha = 1.7, beta = -0.4;
    std::vector<double> combo(h1.values.size());
    for (std::size_t i = 0; i < combo.size(); ++i)
        combo[i] = alpha * h1.values[i] + beta * h2.values[i];
    GridProcess hc = GridProcess::from_values(grid, b.n_paths, 2, std::move(combo));

    GainsProcess g1 = ito_integral(h1, b), g2 = ito_integral(h2, b), gc = ito_integral(hc, b);
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        const double want = alpha * g1.terminal(p) + beta * g2.terminal(p);
        CHECK(gc.terminal(p) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("ito integral rejects shape mismatches and non-finite strategies") {
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, 16));
    ModelSpec spec;
    spec.kind = ModelKind::StoppedBm;
    PathBundle b = simulate(spec, grid, 3, 1);

    GridProcess wrong_width = constant_strategy(b, {1.0, 2.0});
    CHECK_THROWS_AS(ito_integral(wrong_width, b), ContractViolation);

    GridProcess nan_strat = constant_strategy(b, {1.0});
    nan_strat.values[5] = std::nan("");
    CHECK_THROWS_AS(ito_integral(nan_strat, b), ContractViolation);
}

TEST_CASE("generator predictability guard rejects future reads") {
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, 32));
    ModelSpec spec;
    spec.kind = ModelKind::StoppedBm;
    PathBundle b = simulate(spec, grid, 2, 42);

    // reading the current index is fine
    GridProcess ok = GridProcess::generate(
        b, 1, [](const PathView& v, std::size_t i, std::span<double> out) {
            out[0] = v.value(i);
        });
    CHECK(ok.at(0, 3) == b.value(0, 3));

    // peeking one step ahead must be rejected at construction
    CHECK_THROWS_AS(GridProcess::generate(
                        b, 1,
                        [&](const PathView& v, std::size_t i, std::span<double> out) {
                            out[0] = i + 1 < grid->points() ? v.value(i + 1) : v.value(i);
                        }),
                    PredictabilityViolation);
}

TEST_CASE("admissibility flags paths that breach the credit line") {
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, 4));
    std::vector<double> gains = {0.0, -0.5, -1.5, 0.2, 1.0};
    GainsProcess g;
    g.grid = grid;
    g.n_paths = 1;
    g.values = gains;
    CHECK(check_admissible(g, 2.0, 1e-9).all);
    auto r = check_admissible(g, 1.0, 1e-9);
    CHECK_FALSE(r.all);
    CHECK(r.per_path[0] == 0);
    CHECK(r.worst_shortfall == doctest::Approx(0.5));
    CHECK_THROWS_AS(check_admissible(g, -1.0, 1e-9), ContractViolation);
}

TEST_CASE("realized covariation: deterministic path carries no quadratic variation") {
    double errs[2];
    std::size_t n = 256;
    for (int round = 0; round < 2; ++round) {
        auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, n));
        std::vector<double> s(grid->points());
        for (std::size_t i = 0; i < grid->points(); ++i) s[i] = grid->time(i);
        PathBundle b = single_path(grid, s);
        GridProcess cov = realized_covariation(b);
        errs[round] = cov.at(0, grid->steps());
        CHECK(errs[round] == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-9));
        n *= 2;
    }
    CHECK(errs[0] / errs[1] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("realized covariation matches the diffusion matrix for correlated BM") {
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, 256));
    const double rho = 0.5;
    ModelSpec spec;
    spec.kind = ModelKind::DriftedBm;
    spec.dim = 2;
    spec.sigma = {1.0, 0.0, rho, std::sqrt(1.0 - rho * rho)};
    const std::size_t m = 4000;
    PathBundle b = simulate(spec, grid, m, 314159);
    GridProcess cov = realized_covariation(b);

    std::vector<double> c00(m), c01(m), c11(m);
    for (std::size_t p = 0; p < m; ++p) {
        c00[p] = cov.at(p, grid->steps(), 0);
        c01[p] = cov.at(p, grid->steps(), 1);
        c11[p] = cov.at(p, grid->steps(), 3);
    }
    CHECK(std::abs(mean(c00) - 1.0) < 3.0 * stderr_of_mean(c00) + 1e-3);
    CHECK(std::abs(mean(c01) - rho) < 3.0 * stderr_of_mean(c01) + 1e-3);
    CHECK(std::abs(mean(c11) - 1.0) < 3.0 * stderr_of_mean(c11) + 1e-3);

    // every increment is PSD up to rounding; increments are differences of
    // running sums, so the error floor is the ulp of the cumulative (~1e-15)
    const double ulp_abs = 1e-14;
    for (std::size_t p = 0; p < 10; ++p) {
        for (std::size_t i = 0; i + 1 < grid->points(); ++i) {
            const double a = cov.at(p, i + 1, 0) - cov.at(p, i, 0);
            const double bb = cov.at(p, i + 1, 1) - cov.at(p, i, 1);
            const double c = cov.at(p, i + 1, 3) - cov.at(p, i, 3);
            CHECK(a >= -ulp_abs);
            CHECK(c >= -ulp_abs);
            CHECK(a * c - bb * bb >= -ulp_abs * (a + c) - 1e-28);
        }
    }
}

TEST_CASE("path file round-trips bit-exactly including aux blocks") {
    auto grid = std::make_shared<TimeGrid>(TimeGrid::uniform(2.0, 64));
    ModelSpec spec;
    spec.kind = ModelKind::ExpDefault;
    PathBundle b = simulate(spec, grid, 37, 20240001);

    const std::string file = std::filesystem::temp_directory_path() / "arbkit_rt.arbk";
    write_path_file(file, b);
    PathBundle r = read_path_file(file);

    CHECK(r.n_paths == b.n_paths);
    CHECK(r.dim == b.dim);
    CHECK(r.root_seed == b.root_seed);
    CHECK(r.grid->times() == b.grid->times());
    CHECK(r.values == b.values);
    CHECK(r.aux_series.at("Z") == b.aux_series.at("Z"));
    CHECK(r.aux_scalars.at("xi") == b.aux_scalars.at("xi"));
    CHECK(r.aux_scalars.at("z_left_limit") == b.aux_scalars.at("z_left_limit"));
    std::remove(file.c_str());
}

TEST_CASE("path file reader rejects garbage") {
    const std::string file = std::filesystem::temp_directory_path() / "arbkit_bad.arbk";
    {
        std::ofstream out(file, std::ios::binary);
        out << "NOPE this is not a path file";
    }
    CHECK_THROWS_AS(read_path_file(file), PathFileError);
    std::remove(file.c_str());
}

TEST_CASE("coupled refinement restricts the fine path onto the coarse grid") {
    auto coarse = std::make_shared<TimeGrid>(TimeGrid::uniform(1.0, 64));

    ModelSpec bm;
    bm.kind = ModelKind::DriftedBm;
    bm.mu = {0.2};
    RefinedPair pair = refine_grid(bm, coarse, 25, 4242, 2);
    CHECK(pair.fine.grid->steps() == 128);
    for (std::size_t p = 0; p < 25; ++p)
        for (std::size_t i = 0; i <= 64; ++i)
            CHECK(pair.coarse.value(p, i) == pair.fine.value(p, 2 * i));

    ModelSpec sb;
    sb.kind = ModelKind::StoppedBm;
    RefinedPair sp = refine_grid(sb, coarse, 400, 515, 2);
    const auto& fine_abs = sp.fine.aux_scalars.at("absorbed_at");
    const auto& coarse_abs = sp.coarse.aux_scalars.at("absorbed_at");
    for (std::size_t p = 0; p < 400; ++p) {
        if (std::isfinite(fine_abs[p])) {
            // absorption lands within one coarse step of the fine time
            CHECK(coarse_abs[p] == std::ceil(fine_abs[p] / 2.0));
            CHECK(sp.coarse.value(p, static_cast<std::size_t>(coarse_abs[p])) == 0.0);
            CHECK(2.0 * coarse_abs[p] - fine_abs[p] <= 1.0);
        } else {
            CHECK(!std::isfinite(coarse_abs[p]));
        }
    }
    CHECK_THROWS_AS(refine_grid(sb, coarse, 1, 1, 1), ContractViolation);
}
