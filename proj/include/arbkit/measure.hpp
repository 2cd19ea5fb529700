#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arbkit/arbitrage.hpp"
#include "arbkit/models.hpp"
#include "arbkit/paths.hpp"

namespace arbkit {

// Non-negative unit-start density with absorbing zero.  exact_zero_time and
// left_limit are per-path companions when the model knows the death time and
// the pre-death value analytically (jump models); both may be empty.
struct DensityProcess {
    GridProcess z;                        // width 1
    std::vector<double> exact_zero_time;  // +inf sentinel = never dies
    std::vector<double> left_limit;       // value just before death, NaN unknown

    std::size_t n_paths() const { return z.n_paths; }
    double at(std::size_t p, std::size_t i) const { return z.at(p, i); }
    double terminal(std::size_t p) const { return z.at(p, z.grid->steps()); }
    bool has_exact_zero(std::size_t p) const;
};

// Validates the invariants: Z0 = 1 (to 1e-12), Z >= 0 and finite, zero is
// absorbing, and the grid values agree with exact_zero_time where given.
DensityProcess make_density(GridProcess z, std::vector<double> exact_zero_time = {},
                            std::vector<double> left_limit = {});

// Canonical density of a simulated bundle (stopped_bm: Z = S; jump models:
// the Z / xi / z_left_limit aux blocks).  UnsupportedOperation otherwise.
DensityProcess density_process(const ModelSpec& spec, const PathBundle& paths);

std::vector<double> terminal_weights(const DensityProcess& z);

// Z > 0 everywhere on every path whose terminal weight is positive.  True by
// construction (absorbing zero); exposed for tests and belt-and-braces use.
void assert_q_positivity(const DensityProcess& z);

enum class Approach : std::uint8_t { None, Jump, Continuous };
std::string approach_name(Approach a);

// First-passage summary of a density: death time tau, level passages tau_n,
// and how zero was approached.
struct StoppingReport {
    std::vector<std::size_t> ladder;
    double eps_jump = 0.0;
    std::vector<double> tau;             // +inf sentinel
    std::vector<double> tau_n;           // path-major, ladder.size() per path
    std::vector<double> z_before_zero;   // NaN when tau = +inf
    std::vector<Approach> approach;

    double tau_n_at(std::size_t p, std::size_t j) const {
        return tau_n[p * ladder.size() + j];
    }
};

std::vector<std::size_t> default_ladder();                // {2, 4, ..., 1024}
double default_eps_jump(const TimeGrid& grid, double scale = 1.0);

StoppingReport stopping_times(const DensityProcess& z, std::span<const std::size_t> ladder = {},
                              double eps_jump = 0.0);

struct JumpProbability {
    double fraction = 0.0;
    double low = 0.0;     // Wilson bounds
    double high = 0.0;
    std::size_t n_jump = 0;
    std::size_t n_paths = 0;
};

JumpProbability jump_to_zero_probability(const StoppingReport& report);

// Monte Carlo E_Q[payoff] = E_P[Z_T payoff].  Payoff entries on dead paths
// (Z_T = 0) are never read; a non-finite product on a live path throws.
struct WeightedExpectation {
    double estimate = 0.0;
    double stderr_est = 0.0;
    double effective_sample_size = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_zero = 0;
};

WeightedExpectation reweight(std::span<const double> payoff, std::span<const double> z_t);

// Predictable drift-correction integrand theta with c theta = d<M,Z>/dB; the
// Q drift is lambda_bar = lambda + theta / Z_-.
using ThetaRule =
    std::function<void(double t, std::span<const double> state, std::span<double> theta_out)>;

// theta for the catalog densities: stopped_bm 1{x>0}; jump models 0 (their
// diffusion part is absent, the measure change acts on the jump compensator).
std::optional<ThetaRule> canonical_theta(const ModelSpec& spec);

enum class GirsanovMode : std::uint8_t { Analytic, Estimated };

struct QDecomposition {
    GridProcess theta;        // width d
    GridProcess lambda_bar;   // width d
    GridProcess nu_bar;       // width d, equals the original nu entrywise
    GridProcess m_bar;        // width d, drift-corrected increments per step
    GridProcess quad_bar;     // width 1, lambda_bar' c lambda_bar
    GridProcess theta_quad;   // width 1, theta' c theta / Z_-^2
    GridProcess active;       // width 1, original mask AND Z_- > 0
    bool low_sample_warning = false;   // estimated mode starved of live paths
};

// Estimated mode recovers the shift per step from the cross-path ratio
// sum(dM dZ) / sum(Z_- dB), then scales by Z_- so the theta field always
// satisfies lambda_bar = lambda + theta / Z_-.
QDecomposition girsanov(const DecompositionProcess& dec, const Characteristics& ch,
                        const DensityProcess& z, const PathBundle& s, GirsanovMode mode,
                        const ThetaRule* analytic_theta = nullptr, int threads = 1);

// K^Q plus the pathwise comparison K^Q_t <= 2 K_t + 2 sum theta'c theta/Z_-^2 dB
// (within 1e-8 absolute + 5% relative), checked at every grid time on every
// path with positive weight.
struct BoundCheck {
    bool holds = true;
    double worst_excess = 0.0;   // max over (path, t) of lhs - allowed rhs
    std::size_t n_paths = 0;
};

struct QTradeoff {
    TradeoffReport report;
    BoundCheck bound;
};

QTradeoff mvt_under_q(const QDecomposition& qdec, const Characteristics& ch,
                      const DecompositionProcess& p_dec, const PathBundle& s,
                      std::span<const double> weights);

// Local-martingale diagnostic for R = L/Z and R*S^k under Q: per-step
// cross-sectional weighted t statistics of the increments; PASS while every
// |t| stays below the threshold.  A statistical screen, never a proof.
struct SmdDiagnostic {
    bool pass = true;
    double max_stat = 0.0;
    std::size_t argmax_step = 0;
    int argmax_component = -1;   // -1: R itself; k >= 0: R * S^k
    double threshold = 0.0;
    std::size_t n_steps = 0;
};

// Streaming accumulator: feed chunks (l_chunk null means L = 1), finish once.
class SmdAccumulator {
  public:
    SmdAccumulator(GridPtr grid, int dim, double threshold = 4.0);
    void add_chunk(const PathBundle& chunk, const GridProcess* l_chunk,
                   const DensityProcess& z_chunk, std::span<const double> weights);
    SmdDiagnostic finish();

  private:
    GridPtr grid_;
    int dim_;
    double threshold_;
    std::size_t n_total_ = 0;
    // per (component, step): running sum and sum of squares of weighted terms,
    // plus the largest weighted level magnitude seen (rounding-noise floor)
    std::vector<double> sum_, sumsq_, scale_;
    bool finished_ = false;
};

SmdDiagnostic smd_under_q(const GridProcess* l, const DensityProcess& z, const PathBundle& s,
                          std::span<const double> weights, double threshold = 4.0);

}  // namespace arbkit
