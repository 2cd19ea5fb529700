#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arbkit/models.hpp"
#include "arbkit/numerics.hpp"
#include "arbkit/paths.hpp"

namespace arbkit {

// Thresholds separating discretisation noise from genuine effects.  Every
// verdict embeds the values it was produced with.
struct Thresholds {
    double tol_nu = 1e-8;        // orthogonal drift mass, relative to drift scale
    double rho_div = 1.5;        // fine/coarse ratio flagging divergence
    double k_max = 1e6;          // absolute trade-off level flagging divergence
    double tol_mono = 1e-9;      // per-step monotonicity slack, times gain scale
    double tol_admiss = 1e-9;    // credit-line slack for admissibility checks
    double eps_pos = 1e-6;       // gain counted as strictly positive above this
    double min_pos_fraction = 0.0;  // extra demand beyond a positive Wilson bound
    std::vector<double> v_ladder = {1.0, 0.5, 0.25, 0.125};
};

// Per-step drift split a = c lambda + nu on a bundle, left-point convention.
// quad carries lambda' c lambda; active masks the steps that enter integrals
// (1.0 everywhere under the original measure, zeroed after a density dies).
// nu_mass and drift_mass are per-path path totals sum |.| dB.
struct DecompositionProcess {
    GridProcess lambda;
    GridProcess nu;
    GridProcess quad;
    GridProcess active;
    std::vector<double> nu_mass;
    std::vector<double> drift_mass;
};

DecompositionProcess decompose_bundle(const Characteristics& ch, const PathBundle& s,
                                      int threads = 1);

// Accumulated squared market price of risk and its refinement diagnostics.
// divergence/sigma_estimate are populated only when a refined pair was given.
struct TradeoffReport {
    GridProcess k_hat;                     // cumulative, width 1, zero at index 0
    std::vector<double> terminal;          // per path K_T
    std::vector<std::uint8_t> divergence;  // per path: fine run diverged from coarse
    std::vector<double> sigma_estimate;    // per path first divergent time, +inf if none
    bool refined = false;
    double rho_div = 0.0;
    double k_max = 0.0;
};

GridProcess k_hat_from_quad(const GridProcess& quad, const GridProcess& active,
                            const Characteristics& ch);

TradeoffReport mean_variance_tradeoff(const DecompositionProcess& dec,
                                      const Characteristics& ch, const PathBundle& s);

// Coupled-refinement version: flags paths whose trade-off keeps growing as the
// grid refines (the numerical signature of K_T = infinity or sigma < T).
TradeoffReport mean_variance_tradeoff(const Characteristics& ch, const RefinedPair& pair,
                                      const Thresholds& thr = {}, int threads = 1);

enum class Condition : std::uint8_t { Nip, Nsa, Na1, Na };
enum class VerdictState : std::uint8_t {
    HoldsNumerically,
    FailsWithCertificate,
    Inconclusive,
};

std::string condition_name(Condition c);
std::string verdict_state_name(VerdictState s);

enum class CertificateKind : std::uint8_t {
    IncreasingProfit,
    StrongArbitrage,
    ArbitrageOpportunity,
    FirstKind,
};

std::string certificate_kind_name(CertificateKind k);

// Strategy as a rule over (path so far, step); materialised per path at
// verification time so certificates stay small and reusable across chunks.
using StrategyRule = GridProcess::Generator;

struct CertificateStats {
    std::size_t n_paths = 0;        // paths inspected (positive weight when weighted)
    std::size_t n_positive = 0;     // of those, terminal gain > eps_pos
    double positive_fraction = 0.0;
    double wilson_low = 0.0;
    double mean_gain = 0.0;         // weighted mean of terminal gains
    double stderr_gain = 0.0;
    double worst_step = 0.0;        // most negative per-step increment seen
    double worst_terminal = 0.0;    // smallest terminal gain seen
    double worst_drawdown = 0.0;    // smallest G_t over all paths/times
};

struct Certificate {
    CertificateKind kind = CertificateKind::IncreasingProfit;
    int width = 1;                       // strategy components (= model dim)
    StrategyRule strategy;               // single strategy (all kinds but FirstKind)
    std::vector<StrategyRule> ladder_strategies;  // FirstKind: one per v
    std::vector<double> v_ladder;
    double xi_claim = 0.0;               // FirstKind target claim (constant)
    double a_bound = 0.0;                // ArbitrageOpportunity credit line
    bool verified = false;
    CertificateStats stats;
    std::string description;
};

struct Evidence {
    double max_nu_mass = 0.0;
    double drift_scale = 0.0;
    double divergence_fraction = 0.0;
    double tol_nu = 0.0;
    double rho_div = 0.0;
    double k_max = 0.0;
    std::string certificate_ref;   // certificate kind when one is attached
    std::string note;
};

struct Verdict {
    Condition condition = Condition::Nip;
    VerdictState state = VerdictState::Inconclusive;
    Evidence evidence;
    std::optional<Certificate> certificate;
};

// Builds the unverified buy-the-orthogonal-drift certificate H = nu.
Certificate nip_certificate(const Characteristics& ch);

// Streaming certificate verification: feed chunks (weights may be empty for
// unweighted runs; zero-weight paths are skipped without reading their
// values), then finish() returns the certificate with verified + stats set.
class CertificateVerifier {
  public:
    CertificateVerifier(Certificate cert, Thresholds thr);
    void add_chunk(const PathBundle& chunk, std::span<const double> weights, int threads = 1);
    Certificate finish();

  private:
    struct PathResult;
    PathResult fold_path(const PathBundle& chunk, std::size_t p, double weight) const;

    Certificate cert_;
    Thresholds thr_;
    std::vector<double> gain_terms_;   // weight * terminal gain, global path order
    std::size_t n_total_ = 0;          // all paths fed in
    std::size_t n_visited_ = 0;        // paths with positive weight
    std::size_t n_positive_ = 0;       // of those, terminal gain > eps_pos
    // +inf so the min-merge is a no-op until the first visited path
    double worst_step_ = std::numeric_limits<double>::infinity();
    double worst_terminal_ = std::numeric_limits<double>::infinity();
    double worst_drawdown_ = std::numeric_limits<double>::infinity();
    bool conditions_ok_ = true;        // kind-specific per-path predicate held so far
    bool finished_ = false;
};

Certificate verify_certificate(Certificate cert, const PathBundle& s,
                               std::span<const double> weights = {},
                               const Thresholds& thr = {}, int threads = 1);

// Tri-state classifiers.  check_nip attempts and verifies a certificate when
// the orthogonal drift mass is material; the later conditions inherit a
// verified failure (an increasing profit defeats every condition).  weights,
// when given, restrict every max / fraction to paths with positive weight.
Verdict check_nip(const DecompositionProcess& dec, const Characteristics& ch,
                  const PathBundle& s, std::span<const double> weights = {},
                  const Thresholds& thr = {}, int threads = 1);
Verdict check_nsa(const TradeoffReport& tradeoff, const Verdict& nip,
                  std::span<const double> weights = {}, const Thresholds& thr = {});
Verdict check_na1(const TradeoffReport& tradeoff, const Verdict& nip,
                  std::span<const double> weights = {}, const Thresholds& thr = {},
                  const Certificate* extra = nullptr);

}  // namespace arbkit
