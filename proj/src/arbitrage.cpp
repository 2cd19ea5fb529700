#include "arbkit/arbitrage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arbkit/threading.hpp"

namespace arbkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double db_of(const Characteristics& ch, double t0, double t1) {
    return ch.b_increment ? ch.b_increment(t0, t1) : t1 - t0;
}

// Splits a = c lambda + nu at one point; d == 1 short-circuits the
// eigendecomposition, matching pinv_psd semantics exactly.
void decompose_point(const SymMatrix& c, std::span<const double> a, std::span<double> lambda,
                     std::span<double> nu, double& quad) {
    const int d = c.dim();
    if (d == 1) {
        const double cv = c.at(0, 0);
        if (cv < 0.0) throw NotPsdError("negative 1x1 diffusion entry");
        if (cv > 0.0) {
            lambda[0] = a[0] / cv;
            nu[0] = 0.0;
            quad = a[0] * a[0] / cv;
        } else {
            lambda[0] = 0.0;
            nu[0] = a[0];
            quad = 0.0;
        }
        return;
    }
    DriftDecomposition dd = decompose_drift(a, c);
    double q = 0.0;
    for (int i = 0; i < d; ++i) {
        lambda[i] = dd.lambda[i];
        nu[i] = dd.nu[i];
        double row = 0.0;
        for (int j = 0; j < d; ++j) row += c.at(i, j) * dd.lambda[j];
        q += dd.lambda[i] * row;
    }
    quad = q;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

DecompositionProcess decompose_bundle(const Characteristics& ch, const PathBundle& s,
                                      int threads) {
    if (ch.dim != s.dim) throw ContractViolation("characteristics dimension mismatch");
    const int d = s.dim;
    const std::size_t npts = s.grid->points();
    const std::size_t n = s.n_paths;

    DecompositionProcess dec;
    dec.lambda = GridProcess::from_values(s.grid, n, d, std::vector<double>(n * npts * d));
    dec.nu = GridProcess::from_values(s.grid, n, d, std::vector<double>(n * npts * d));
    dec.quad = GridProcess::from_values(s.grid, n, 1, std::vector<double>(n * npts));
    dec.active = GridProcess::from_values(s.grid, n, 1, std::vector<double>(n * npts, 1.0));
    dec.nu_mass.assign(n, 0.0);
    dec.drift_mass.assign(n, 0.0);

    if (ch.constant) {
        std::vector<double> state(d, 0.0), a(d), lam(d), nu(d);
        SymMatrix c(d);
        ch.a(0.0, state, a);
        ch.c(0.0, state, c);
        double quad = 0.0;
        decompose_point(c, a, lam, nu, quad);
        double b_total = 0.0;
        for (std::size_t i = 0; i + 1 < npts; ++i)
            b_total += db_of(ch, s.grid->time(i), s.grid->time(i + 1));
        const double nu_norm = norm2(nu), a_norm = norm2(a);
        parallel_blocks(n, 256, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
            for (std::size_t p = begin; p < end; ++p) {
                for (std::size_t i = 0; i + 1 < npts; ++i) {
                    for (int k = 0; k < d; ++k) {
                        dec.lambda.at_ref(p, i, k) = lam[k];
                        dec.nu.at_ref(p, i, k) = nu[k];
                    }
                    dec.quad.at_ref(p, i) = quad;
                }
                dec.nu_mass[p] = nu_norm * b_total;
                dec.drift_mass[p] = a_norm * b_total;
            }
        });
        return dec;
    }

    parallel_blocks(n, 64, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        std::vector<double> state(d), a(d), lam(d), nu(d);
        SymMatrix c(d);
        for (std::size_t p = begin; p < end; ++p) {
            double nmass = 0.0, dmass = 0.0;
            for (std::size_t i = 0; i + 1 < npts; ++i) {
                for (int k = 0; k < d; ++k) state[static_cast<std::size_t>(k)] = s.value(p, i, k);
                const double t = s.grid->time(i);
                ch.a(t, state, a);
                ch.c(t, state, c);
                double quad = 0.0;
                decompose_point(c, a, lam, nu, quad);
                for (int k = 0; k < d; ++k) {
                    dec.lambda.at_ref(p, i, k) = lam[k];
                    dec.nu.at_ref(p, i, k) = nu[k];
                }
                dec.quad.at_ref(p, i) = quad;
                const double db = db_of(ch, t, s.grid->time(i + 1));
                nmass += norm2(nu) * db;
                dmass += norm2(a) * db;
            }
            dec.nu_mass[p] = nmass;
            dec.drift_mass[p] = dmass;
        }
    });
    return dec;
}

GridProcess k_hat_from_quad(const GridProcess& quad, const GridProcess& active,
                            const Characteristics& ch) {
    const std::size_t n = quad.n_paths, npts = quad.grid->points();
    GridProcess k = GridProcess::from_values(quad.grid, n, 1, std::vector<double>(n * npts));
    for (std::size_t p = 0; p < n; ++p) {
        double acc = 0.0;
        k.at_ref(p, 0) = 0.0;
        for (std::size_t i = 0; i + 1 < npts; ++i) {
            acc += active.at(p, i) * quad.at(p, i) *
                   db_of(ch, quad.grid->time(i), quad.grid->time(i + 1));
            k.at_ref(p, i + 1) = acc;
        }
    }
    return k;
}

TradeoffReport mean_variance_tradeoff(const DecompositionProcess& dec,
                                      const Characteristics& ch, const PathBundle& s) {
    TradeoffReport r;
    r.k_hat = k_hat_from_quad(dec.quad, dec.active, ch);
    r.terminal.resize(s.n_paths);
    for (std::size_t p = 0; p < s.n_paths; ++p)
        r.terminal[p] = r.k_hat.at(p, s.grid->steps());
    return r;
}

TradeoffReport compare_refined_k(const GridProcess& kc, const GridProcess& kf,
                                 const Characteristics& ch, const Thresholds& thr) {
    const std::size_t n = kc.n_paths;
    const std::size_t nc = kc.grid->steps();
    const std::size_t factor = kf.grid->steps() / nc;
    if (kf.n_paths != n) throw ContractViolation("coarse and fine path counts differ");
    if (factor * nc != kf.grid->steps() || factor < 2)
        throw ContractViolation("fine grid is not a refinement of the coarse grid");

    TradeoffReport r;
    r.refined = true;
    r.rho_div = thr.rho_div;
    r.k_max = thr.k_max;
    r.k_hat = kc;
    r.terminal.resize(n);
    r.divergence.assign(n, 0);
    r.sigma_estimate.assign(n, kInf);

    const double b_total = [&] {
        double b = 0.0;
        for (std::size_t i = 0; i < nc; ++i)
            b += db_of(ch, kc.grid->time(i), kc.grid->time(i + 1));
        return std::max(b, 1e-300);
    }();

    for (std::size_t p = 0; p < n; ++p) {
        const double kct = kc.at(p, nc), kft = kf.at(p, nc * factor);
        r.terminal[p] = kct;
        if (kft > thr.k_max && kft > thr.rho_div * kct) r.divergence[p] = 1;
        for (std::size_t i = 0; i < nc; ++i) {
            const double dkc = kc.at(p, i + 1) - kc.at(p, i);
            const double dkf = kf.at(p, (i + 1) * factor) - kf.at(p, i * factor);
            const double budget =
                thr.k_max * (db_of(ch, kc.grid->time(i), kc.grid->time(i + 1)) / b_total);
            if (dkf > budget && dkf > thr.rho_div * dkc) {
                r.sigma_estimate[p] = kc.grid->time(i);
                break;
            }
        }
    }
    return r;
}

TradeoffReport mean_variance_tradeoff(const Characteristics& ch, const RefinedPair& pair,
                                      const Thresholds& thr, int threads) {
    DecompositionProcess dc = decompose_bundle(ch, pair.coarse, threads);
    DecompositionProcess df = decompose_bundle(ch, pair.fine, threads);
    GridProcess kc = k_hat_from_quad(dc.quad, dc.active, ch);
    GridProcess kf = k_hat_from_quad(df.quad, df.active, ch);
    return compare_refined_k(kc, kf, ch, thr);
}

std::string condition_name(Condition c) {
    switch (c) {
        case Condition::Nip: return "NIP";
        case Condition::Nsa: return "NSA";
        case Condition::Na1: return "NA1";
        case Condition::Na: return "NA";
    }
    return "?";
}

std::string verdict_state_name(VerdictState s) {
    switch (s) {
        case VerdictState::HoldsNumerically: return "HOLDS_NUMERICALLY";
        case VerdictState::FailsWithCertificate: return "FAILS_WITH_CERTIFICATE";
        case VerdictState::Inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

std::string certificate_kind_name(CertificateKind k) {
    switch (k) {
        case CertificateKind::IncreasingProfit: return "INCREASING_PROFIT";
        case CertificateKind::StrongArbitrage: return "STRONG_ARBITRAGE";
        case CertificateKind::ArbitrageOpportunity: return "ARBITRAGE_OPPORTUNITY";
        case CertificateKind::FirstKind: return "FIRST_KIND";
    }
    return "?";
}

Certificate nip_certificate(const Characteristics& ch) {
    Certificate cert;
    cert.kind = CertificateKind::IncreasingProfit;
    cert.width = ch.dim;
    cert.description = "holds the drift component orthogonal to the diffusion range";
    const int d = ch.dim;
    if (ch.constant) {
        std::vector<double> state(d, 0.0), a(d), lam(d), nu(d);
        SymMatrix c(d);
        ch.a(0.0, state, a);
        ch.c(0.0, state, c);
        double quad = 0.0;
        decompose_point(c, a, lam, nu, quad);
        cert.strategy = [nu](const PathView&, std::size_t, std::span<double> out) {
            std::copy(nu.begin(), nu.end(), out.begin());
        };
        return cert;
    }
    cert.strategy = [ch, d](const PathView& v, std::size_t i, std::span<double> out) {
        std::vector<double> state(d), a(d), lam(d);
        SymMatrix c(d);
        for (int k = 0; k < d; ++k) state[static_cast<std::size_t>(k)] = v.value(i, k);
        const double t = v.time(i);
        ch.a(t, state, a);
        ch.c(t, state, c);
        double quad = 0.0;
        decompose_point(c, a, lam, out, quad);
    };
    return cert;
}

struct CertificateVerifier::PathResult {
    double terminal = 0.0;
    double min_step = 0.0;
    double min_gain = 0.0;
    double max_abs_gain = 0.0;
    bool ok = true;
};

CertificateVerifier::CertificateVerifier(Certificate cert, Thresholds thr)
    : cert_(std::move(cert)), thr_(std::move(thr)) {
    if (cert_.width < 1) throw ContractViolation("certificate strategy width must be >= 1");
    if (cert_.kind == CertificateKind::FirstKind) {
        if (cert_.ladder_strategies.empty() ||
            cert_.ladder_strategies.size() != cert_.v_ladder.size())
            throw ContractViolation("first-kind certificate needs one strategy per ladder level");
    } else if (!cert_.strategy) {
        throw ContractViolation("certificate has no strategy");
    }
}

// Runs one strategy over one path; never reads other paths.
static void run_strategy(const PathBundle& b, std::size_t p, const StrategyRule& rule, int width,
                         double& terminal, double& min_step, double& min_gain,
                         double& max_abs_gain) {
    const std::size_t npts = b.grid->points();
    const int d = b.dim;
    std::vector<double> h(static_cast<std::size_t>(width));
    double g = 0.0;
    min_step = kInf;
    min_gain = 0.0;
    max_abs_gain = 0.0;
    for (std::size_t i = 0; i + 1 < npts; ++i) {
        PathView view(b, p, i);
        rule(view, i, h);
        double dg = 0.0;
        for (int k = 0; k < d; ++k) dg += h[static_cast<std::size_t>(k)] * (b.value(p, i + 1, k) - b.value(p, i, k));
        if (!std::isfinite(dg))
            throw ContractViolation("non-finite gain increment during certificate verification");
        g += dg;
        min_step = std::min(min_step, dg);
        min_gain = std::min(min_gain, g);
        max_abs_gain = std::max(max_abs_gain, std::abs(g));
    }
    terminal = g;
    if (npts < 2) min_step = 0.0;
}

CertificateVerifier::PathResult CertificateVerifier::fold_path(const PathBundle& chunk,
                                                               std::size_t p,
                                                               double /*weight*/) const {
    PathResult r;
    if (cert_.kind == CertificateKind::FirstKind) {
        bool ok = true;
        for (std::size_t v = 0; v < cert_.v_ladder.size(); ++v) {
            double term = 0.0, mstep = 0.0, mgain = 0.0, mabs = 0.0;
            run_strategy(chunk, p, cert_.ladder_strategies[v], cert_.width, term, mstep, mgain,
                         mabs);
            const double vcap = cert_.v_ladder[v];
            if (mgain < -vcap - thr_.tol_admiss) ok = false;                    // v-admissible
            if (vcap + term < cert_.xi_claim - thr_.tol_admiss) ok = false;     // super-replicates
            if (v == 0) {
                r.terminal = term;
                r.min_step = mstep;
                r.min_gain = mgain;
                r.max_abs_gain = mabs;
            }
        }
        r.ok = ok;
        return r;
    }

    run_strategy(chunk, p, cert_.strategy, cert_.width, r.terminal, r.min_step, r.min_gain,
                 r.max_abs_gain);
    const double scale = std::max(1.0, r.max_abs_gain);
    switch (cert_.kind) {
        case CertificateKind::IncreasingProfit:
            r.ok = r.min_step >= -thr_.tol_mono * scale;
            break;
        case CertificateKind::StrongArbitrage:
            r.ok = r.min_gain >= -thr_.tol_mono * scale && r.terminal >= -thr_.tol_mono * scale;
            break;
        case CertificateKind::ArbitrageOpportunity:
            r.ok = r.min_gain >= -cert_.a_bound - thr_.tol_admiss &&
                   r.terminal >= -thr_.tol_admiss;
            break;
        case CertificateKind::FirstKind: break;  // handled above
    }
    return r;
}

void CertificateVerifier::add_chunk(const PathBundle& chunk, std::span<const double> weights,
                                    int threads) {
    if (finished_) throw ContractViolation("verifier already finished");
    if (!weights.empty() && weights.size() != chunk.n_paths)
        throw ContractViolation("weights length does not match the chunk");
    const std::size_t n = chunk.n_paths;
    const std::size_t base = gain_terms_.size();
    gain_terms_.resize(base + n, 0.0);

    struct Block {
        std::size_t visited = 0, positive = 0;
        double worst_step = kInf, worst_terminal = kInf, worst_drawdown = kInf;
        bool ok = true;
    };
    const std::size_t bsz = 64;
    std::vector<Block> blocks(block_count(n, bsz));

    parallel_blocks(n, bsz, threads, [&](std::size_t begin, std::size_t end, std::size_t bi) {
        Block blk;
        for (std::size_t p = begin; p < end; ++p) {
            const double w = weights.empty() ? 1.0 : weights[p];
            if (!(w > 0.0)) continue;  // ignored without reading the path
            PathResult pr = fold_path(chunk, p, w);
            ++blk.visited;
            if (pr.terminal > thr_.eps_pos) ++blk.positive;
            blk.worst_step = std::min(blk.worst_step, pr.min_step);
            blk.worst_terminal = std::min(blk.worst_terminal, pr.terminal);
            blk.worst_drawdown = std::min(blk.worst_drawdown, pr.min_gain);
            blk.ok = blk.ok && pr.ok;
            gain_terms_[base + p] = w * pr.terminal;
        }
        blocks[bi] = blk;
    });

    n_total_ += n;
    for (const Block& blk : blocks) {
        n_visited_ += blk.visited;
        n_positive_ += blk.positive;
        worst_step_ = std::min(worst_step_, blk.worst_step);
        worst_terminal_ = std::min(worst_terminal_, blk.worst_terminal);
        worst_drawdown_ = std::min(worst_drawdown_, blk.worst_drawdown);
        conditions_ok_ = conditions_ok_ && blk.ok;
    }
}

Certificate CertificateVerifier::finish() {
    if (finished_) throw ContractViolation("verifier already finished");
    finished_ = true;

    CertificateStats& st = cert_.stats;
    st.n_paths = n_visited_;
    st.n_positive = n_positive_;
    st.worst_step = n_visited_ ? worst_step_ : 0.0;
    st.worst_terminal = n_visited_ ? worst_terminal_ : 0.0;
    st.worst_drawdown = n_visited_ ? worst_drawdown_ : 0.0;

    if (n_total_ > 0) {
        const double m = pairwise_sum(gain_terms_) / static_cast<double>(n_total_);
        st.mean_gain = m;
        if (n_total_ > 1) {
            std::vector<double> sq(gain_terms_.size());
            for (std::size_t i = 0; i < sq.size(); ++i) {
                const double dev = gain_terms_[i] - m;
                sq[i] = dev * dev;
            }
            const double var = pairwise_sum(sq) / static_cast<double>(n_total_ - 1);
            st.stderr_gain = std::sqrt(var / static_cast<double>(n_total_));
        }
    }
    if (n_visited_ > 0) {
        st.positive_fraction =
            static_cast<double>(n_positive_) / static_cast<double>(n_visited_);
        st.wilson_low = wilson_interval(n_positive_, n_visited_).low;
    }

    const bool positive_mass =
        n_visited_ > 0 && st.wilson_low > 0.0 && st.positive_fraction >= thr_.min_pos_fraction;
    switch (cert_.kind) {
        case CertificateKind::IncreasingProfit:
        case CertificateKind::StrongArbitrage:
        case CertificateKind::ArbitrageOpportunity:
            cert_.verified = conditions_ok_ && positive_mass;
            break;
        case CertificateKind::FirstKind:
            cert_.verified = conditions_ok_ && cert_.xi_claim > 0.0 && n_visited_ > 0;
            break;
    }
    return cert_;
}

Certificate verify_certificate(Certificate cert, const PathBundle& s,
                               std::span<const double> weights, const Thresholds& thr,
                               int threads) {
    CertificateVerifier v(std::move(cert), thr);
    v.add_chunk(s, weights, threads);
    return v.finish();
}

Verdict check_nip(const DecompositionProcess& dec, const Characteristics& ch,
                  const PathBundle& s, std::span<const double> weights, const Thresholds& thr,
                  int threads) {
    Verdict v;
    v.condition = Condition::Nip;
    v.evidence.tol_nu = thr.tol_nu;

    double max_nu = 0.0, max_drift = 0.0;
    for (std::size_t p = 0; p < s.n_paths; ++p) {
        if (!weights.empty() && !(weights[p] > 0.0)) continue;
        max_nu = std::max(max_nu, dec.nu_mass[p]);
        max_drift = std::max(max_drift, dec.drift_mass[p]);
    }
    v.evidence.max_nu_mass = max_nu;
    v.evidence.drift_scale = max_drift;

    if (max_nu <= thr.tol_nu * std::max(1.0, max_drift)) {
        v.state = VerdictState::HoldsNumerically;
        return v;
    }

    Certificate cert = verify_certificate(nip_certificate(ch), s, weights, thr, threads);
    if (cert.verified) {
        v.state = VerdictState::FailsWithCertificate;
        v.evidence.certificate_ref = certificate_kind_name(cert.kind);
        v.certificate = std::move(cert);
    } else {
        v.state = VerdictState::Inconclusive;
        v.evidence.note = "orthogonal drift mass is material but its certificate did not verify";
    }
    return v;
}

namespace {

Verdict inherit_failure(Condition cond, const Verdict& nip) {
    Verdict v;
    v.condition = cond;
    v.state = VerdictState::FailsWithCertificate;
    v.certificate = nip.certificate;
    v.evidence = nip.evidence;
    v.evidence.note = "inherited: a verified increasing profit defeats this condition";
    return v;
}

}  // namespace

Verdict check_nsa(const TradeoffReport& tradeoff, const Verdict& nip,
                  std::span<const double> weights, const Thresholds& thr) {
    if (nip.state == VerdictState::FailsWithCertificate)
        return inherit_failure(Condition::Nsa, nip);
    Verdict v;
    v.condition = Condition::Nsa;
    v.evidence.rho_div = thr.rho_div;
    v.evidence.k_max = thr.k_max;
    if (nip.state == VerdictState::Inconclusive) {
        v.state = VerdictState::Inconclusive;
        v.evidence.note = "orthogonal drift question unresolved";
        return v;
    }
    if (!tradeoff.refined) {
        v.state = VerdictState::Inconclusive;
        v.evidence.note = "no refinement data to probe interior divergence";
        return v;
    }
    std::size_t n_finite = 0, n_used = 0;
    for (std::size_t p = 0; p < tradeoff.sigma_estimate.size(); ++p) {
        if (!weights.empty() && !(weights[p] > 0.0)) continue;
        ++n_used;
        if (std::isfinite(tradeoff.sigma_estimate[p])) ++n_finite;
    }
    v.evidence.divergence_fraction =
        n_used ? static_cast<double>(n_finite) / static_cast<double>(n_used) : 0.0;
    if (n_finite == 0) {
        v.state = VerdictState::HoldsNumerically;
    } else {
        v.state = VerdictState::Inconclusive;
        v.evidence.note = "interior divergence flagged without a verified certificate";
    }
    return v;
}

Verdict check_na1(const TradeoffReport& tradeoff, const Verdict& nip,
                  std::span<const double> weights, const Thresholds& thr,
                  const Certificate* extra) {
    Verdict v;
    v.condition = Condition::Na1;
    v.evidence.rho_div = thr.rho_div;
    v.evidence.k_max = thr.k_max;
    if (extra && extra->verified &&
        (extra->kind == CertificateKind::FirstKind ||
         extra->kind == CertificateKind::IncreasingProfit)) {
        v.state = VerdictState::FailsWithCertificate;
        v.evidence.certificate_ref = certificate_kind_name(extra->kind);
        v.certificate = *extra;
        return v;
    }
    if (nip.state == VerdictState::FailsWithCertificate)
        return inherit_failure(Condition::Na1, nip);
    if (nip.state == VerdictState::Inconclusive) {
        v.state = VerdictState::Inconclusive;
        v.evidence.note = "orthogonal drift question unresolved";
        return v;
    }
    if (!tradeoff.refined) {
        v.state = VerdictState::Inconclusive;
        v.evidence.note = "no refinement data to probe trade-off divergence";
        return v;
    }
    std::size_t n_div = 0, n_used = 0;
    for (std::size_t p = 0; p < tradeoff.divergence.size(); ++p) {
        if (!weights.empty() && !(weights[p] > 0.0)) continue;
        ++n_used;
        if (tradeoff.divergence[p]) ++n_div;
    }
    v.evidence.divergence_fraction =
        n_used ? static_cast<double>(n_div) / static_cast<double>(n_used) : 0.0;
    if (n_div == 0) {
        v.state = VerdictState::HoldsNumerically;
    } else {
        v.state = VerdictState::Inconclusive;
        v.evidence.note = "trade-off kept growing under refinement on some paths";
    }
    return v;
}

}  // namespace arbkit
