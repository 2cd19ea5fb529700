#include "arbkit/paths.hpp"

#include <cmath>

namespace arbkit {

TimeGrid TimeGrid::uniform(double horizon, std::size_t steps) {
    if (!(horizon > 0.0)) throw ContractViolation("TimeGrid: horizon must be positive");
    if (steps < 1) throw ContractViolation("TimeGrid: need at least one step");
    std::vector<double> t(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i)
        t[i] = horizon * (static_cast<double>(i) / static_cast<double>(steps));
    t[steps] = horizon;
    return TimeGrid(std::move(t));
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw ContractViolation("TimeGrid: need at least two points");
    if (times_.front() != 0.0) throw ContractViolation("TimeGrid: first time must be 0");
    for (std::size_t i = 1; i < times_.size(); ++i)
        if (!(times_[i] > times_[i - 1]))
            throw ContractViolation("TimeGrid: times must be strictly increasing");
}

TimeGrid TimeGrid::refined(std::size_t factor) const {
    if (factor < 2) throw ContractViolation("TimeGrid::refined: factor must be >= 2");
    std::vector<double> t;
    t.reserve(steps() * factor + 1);
    for (std::size_t i = 0; i < steps(); ++i) {
        const double a = times_[i], b = times_[i + 1];
        for (std::size_t k = 0; k < factor; ++k)
            t.push_back(a + (b - a) * (static_cast<double>(k) / static_cast<double>(factor)));
    }
    t.push_back(times_.back());
    t[0] = 0.0;
    return TimeGrid(std::move(t));
}

GridProcess GridProcess::generate(const PathBundle& on, int width, const Generator& gen) {
    if (width < 1) throw ContractViolation("GridProcess: width must be positive");
    GridProcess p;
    p.grid = on.grid;
    p.n_paths = on.n_paths;
    p.width = width;
    p.values.resize(on.n_paths * on.grid->points() * static_cast<std::size_t>(width));
    const std::size_t npts = on.grid->points();
    for (std::size_t path = 0; path < on.n_paths; ++path) {
        for (std::size_t i = 0; i < npts; ++i) {
            PathView view(on, path, i);
            std::span<double> out(&p.values[(path * npts + i) * width],
                                  static_cast<std::size_t>(width));
            gen(view, i, out);
        }
    }
    return p;
}

GridProcess GridProcess::from_values(GridPtr grid, std::size_t n_paths, int width,
                                     std::vector<double> values) {
    if (!grid) throw ContractViolation("GridProcess: null grid");
    if (values.size() != n_paths * grid->points() * static_cast<std::size_t>(width))
        throw ContractViolation("GridProcess: value buffer has the wrong size");
    GridProcess p;
    p.grid = std::move(grid);
    p.n_paths = n_paths;
    p.width = width;
    p.values = std::move(values);
    return p;
}

namespace {
void check_same_grid(const GridPtr& a, const GridPtr& b, const char* who) {
    if (a == b) return;
    if (a && b && a->times() == b->times()) return;
    throw ContractViolation(std::string(who) + ": grids differ");
}
}  // namespace

GainsProcess ito_integral(const GridProcess& strategy, const PathBundle& prices) {
    check_same_grid(strategy.grid, prices.grid, "ito_integral");
    if (strategy.n_paths != prices.n_paths)
        throw ContractViolation("ito_integral: path counts differ");
    if (strategy.width != prices.dim)
        throw ContractViolation("ito_integral: strategy width != price dimension");

    GainsProcess g;
    g.grid = prices.grid;
    g.n_paths = prices.n_paths;
    const std::size_t npts = prices.grid->points();
    const int d = prices.dim;
    g.values.assign(prices.n_paths * npts, 0.0);
    for (std::size_t path = 0; path < prices.n_paths; ++path) {
        double acc = 0.0;
        g.values[path * npts] = 0.0;
        for (std::size_t i = 0; i + 1 < npts; ++i) {
            double step = 0.0;
            for (int k = 0; k < d; ++k) {
                const double h = strategy.at(path, i, k);
                if (!std::isfinite(h))
                    throw ContractViolation("ito_integral: non-finite strategy value");
                step += h * (prices.value(path, i + 1, k) - prices.value(path, i, k));
            }
            acc += step;
            g.values[path * npts + i + 1] = acc;
        }
    }
    return g;
}

GridProcess realized_covariation(const PathBundle& prices) {
    const int d = prices.dim;
    const int w = d * d;
    const std::size_t npts = prices.grid->points();
    std::vector<double> v(prices.n_paths * npts * static_cast<std::size_t>(w), 0.0);
    for (std::size_t path = 0; path < prices.n_paths; ++path) {
        std::vector<double> acc(static_cast<std::size_t>(w), 0.0);
        for (std::size_t i = 0; i + 1 < npts; ++i) {
            for (int a = 0; a < d; ++a) {
                const double da = prices.value(path, i + 1, a) - prices.value(path, i, a);
                for (int b = 0; b < d; ++b) {
                    const double db = prices.value(path, i + 1, b) - prices.value(path, i, b);
                    acc[static_cast<std::size_t>(a) * d + b] += da * db;
                }
            }
            double* out = &v[(path * npts + i + 1) * w];
            for (int k = 0; k < w; ++k) out[k] = acc[k];
        }
    }
    return GridProcess::from_values(prices.grid, prices.n_paths, w, std::move(v));
}

AdmissibilityReport check_admissible(const GainsProcess& gains, double a, double tol) {
    if (!(a >= 0.0)) throw ContractViolation("check_admissible: credit line must be >= 0");
    if (!(tol >= 0.0)) throw ContractViolation("check_admissible: tolerance must be >= 0");
    AdmissibilityReport r;
    r.per_path.resize(gains.n_paths, 1);
    const std::size_t npts = gains.grid->points();
    for (std::size_t path = 0; path < gains.n_paths; ++path) {
        double min_g = 0.0;
        for (std::size_t i = 0; i < npts; ++i)
            min_g = std::min(min_g, gains.values[path * npts + i]);
        if (min_g < -a - tol) {
            r.per_path[path] = 0;
            r.all = false;
            r.worst_shortfall = std::max(r.worst_shortfall, -a - min_g);
        }
    }
    return r;
}

}  // namespace arbkit
