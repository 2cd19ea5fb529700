#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "arbkit/numerics.hpp"

namespace arbkit {

// A generator asked to read path values beyond its current index.
struct PredictabilityViolation : std::logic_error {
    using std::logic_error::logic_error;
};

// Strictly increasing times with t_0 = 0 and t_N = T.
class TimeGrid {
  public:
    static TimeGrid uniform(double horizon, std::size_t steps);
    explicit TimeGrid(std::vector<double> times);

    double horizon() const { return times_.back(); }
    std::size_t steps() const { return times_.size() - 1; }   // N
    std::size_t points() const { return times_.size(); }      // N + 1
    double time(std::size_t i) const { return times_[i]; }
    double dt(std::size_t i) const { return times_[i + 1] - times_[i]; }
    const std::vector<double>& times() const { return times_; }

    // Inserts factor-1 intermediate points per cell.
    TimeGrid refined(std::size_t factor) const;

  private:
    std::vector<double> times_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

// Simulated paths: n_paths x (N+1) x dim, path-major.  aux_series carries
// per-(path, time) companions (Z, B), aux_scalars per-path reals (jump time,
// absorption index).  Treated as immutable once a model hands it out.
struct PathBundle {
    GridPtr grid;
    std::size_t n_paths = 0;
    int dim = 0;
    std::uint64_t root_seed = 0;
    std::size_t path_offset = 0;   // global index of path 0 (chunked runs)
    std::vector<double> values;
    std::map<std::string, std::vector<double>> aux_series;
    std::map<std::string, std::vector<double>> aux_scalars;

    double value(std::size_t path, std::size_t i, int k = 0) const {
        return values[(path * grid->points() + i) * dim + k];
    }
    double& value_ref(std::size_t path, std::size_t i, int k = 0) {
        return values[(path * grid->points() + i) * dim + k];
    }
    double aux_at(const std::string& name, std::size_t path, std::size_t i) const {
        return aux_series.at(name)[path * grid->points() + i];
    }
};

// Read window over one path limited to indices <= limit; reading past the
// limit throws, which is how predictability is enforced at construction.
class PathView {
  public:
    PathView(const PathBundle& b, std::size_t path, std::size_t limit)
        : b_(b), path_(path), limit_(limit) {}
    double value(std::size_t i, int k = 0) const {
        if (i > limit_)
            throw PredictabilityViolation("generator read index " + std::to_string(i) +
                                          " beyond current index " + std::to_string(limit_));
        return b_.value(path_, i, k);
    }
    double time(std::size_t i) const { return b_.grid->time(i); }
    std::size_t index() const { return limit_; }
    int dim() const { return b_.dim; }

  private:
    const PathBundle& b_;
    std::size_t path_;
    std::size_t limit_;
};

// Grid-indexed process, width values per (path, time).  By the left-point
// convention the value at index i applies on (t_i, t_{i+1}].
struct GridProcess {
    GridPtr grid;
    std::size_t n_paths = 0;
    int width = 0;
    std::vector<double> values;

    using Generator =
        std::function<void(const PathView&, std::size_t i, std::span<double> out)>;

    // Builds from a generator that sees only values with index <= i.
    static GridProcess generate(const PathBundle& on, int width, const Generator& gen);
    static GridProcess from_values(GridPtr grid, std::size_t n_paths, int width,
                                   std::vector<double> values);

    double at(std::size_t path, std::size_t i, int k = 0) const {
        return values[(path * grid->points() + i) * width + k];
    }
    double& at_ref(std::size_t path, std::size_t i, int k = 0) {
        return values[(path * grid->points() + i) * width + k];
    }
};

// Cumulative gains, one value per (path, time), G_0 = 0 by construction.
struct GainsProcess {
    GridPtr grid;
    std::size_t n_paths = 0;
    std::vector<double> values;

    double at(std::size_t path, std::size_t i) const {
        return values[path * grid->points() + i];
    }
    double terminal(std::size_t path) const { return at(path, grid->steps()); }
};

// Left-point stochastic sum: G_{t_j} = sum_{i<j} H_i . (S_{i+1} - S_i).
// H must be finite everywhere it is used; shapes and grids must match.
GainsProcess ito_integral(const GridProcess& strategy, const PathBundle& prices);

// Cumulative realized covariation, width dim*dim, zero at index 0.
GridProcess realized_covariation(const PathBundle& prices);

struct AdmissibilityReport {
    std::vector<std::uint8_t> per_path;
    bool all = true;
    double worst_shortfall = 0.0;   // max over paths of (-a - min G)+, 0 when admissible
};

// G >= -a - tol at every grid time.
AdmissibilityReport check_admissible(const GainsProcess& gains, double a, double tol);

}  // namespace arbkit
