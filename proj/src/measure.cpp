#include "arbkit/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arbkit/threading.hpp"

namespace arbkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void require(bool cond, const char* msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace

bool DensityProcess::has_exact_zero(std::size_t p) const {
    return !exact_zero_time.empty() && std::isfinite(exact_zero_time[p]) &&
           exact_zero_time[p] <= z.grid->horizon();
}

DensityProcess make_density(GridProcess z, std::vector<double> exact_zero_time,
                            std::vector<double> left_limit) {
    require(z.width == 1, "density must have width 1");
    require(z.n_paths >= 1, "density needs at least one path");
    const std::size_t n = z.n_paths, npts = z.grid->points();
    require(exact_zero_time.empty() || exact_zero_time.size() == n,
            "exact_zero_time length mismatch");
    require(left_limit.empty() || left_limit.size() == n, "left_limit length mismatch");

    for (std::size_t p = 0; p < n; ++p) {
        require(std::abs(z.at(p, 0) - 1.0) <= 1e-12, "density must start at 1");
        bool dead = false;
        for (std::size_t i = 0; i < npts; ++i) {
            const double v = z.at(p, i);
            require(std::isfinite(v) && v >= 0.0, "density values must be finite non-negative");
            if (dead) require(v == 0.0, "density must stay at zero once it hits zero");
            if (v == 0.0) dead = true;
        }
        if (!exact_zero_time.empty()) {
            const double xz = exact_zero_time[p];
            require(std::isfinite(xz) || xz == kInf, "exact_zero_time must be finite or +inf");
            for (std::size_t i = 0; i < npts; ++i) {
                const bool past = z.grid->time(i) >= xz;
                require((z.at(p, i) == 0.0) == past,
                        "grid zeros disagree with the exact zero time");
            }
        }
        if (!left_limit.empty()) {
            const double ll = left_limit[p];
            require(std::isnan(ll) || ll >= 0.0, "left limit must be NaN or non-negative");
        }
    }

    DensityProcess d;
    d.z = std::move(z);
    d.exact_zero_time = std::move(exact_zero_time);
    d.left_limit = std::move(left_limit);
    return d;
}

DensityProcess density_process(const ModelSpec& spec, const PathBundle& paths) {
    const std::size_t n = paths.n_paths, npts = paths.grid->points();
    switch (spec.kind) {
        case ModelKind::StoppedBm: {
            require(paths.dim == 1, "stopped walk density expects a scalar bundle");
            GridProcess z = GridProcess::from_values(paths.grid, n, 1, paths.values);
            const auto& abs_at = paths.aux_scalars.at("absorbed_at");
            std::vector<double> xz(n, kInf);
            for (std::size_t p = 0; p < n; ++p)
                if (std::isfinite(abs_at[p]))
                    xz[p] = paths.grid->time(static_cast<std::size_t>(abs_at[p]));
            return make_density(std::move(z), std::move(xz));
        }
        case ModelKind::ExpDefault:
        case ModelKind::CompensatorModel: {
            GridProcess z =
                GridProcess::from_values(paths.grid, n, 1, paths.aux_series.at("Z"));
            (void)npts;
            return make_density(std::move(z), paths.aux_scalars.at("xi"),
                                paths.aux_scalars.at("z_left_limit"));
        }
        default:
            throw UnsupportedOperation("no canonical density for model kind " +
                                       model_kind_name(spec.kind));
    }
}

std::vector<double> terminal_weights(const DensityProcess& z) {
    std::vector<double> w(z.n_paths());
    for (std::size_t p = 0; p < z.n_paths(); ++p) w[p] = z.terminal(p);
    return w;
}

void assert_q_positivity(const DensityProcess& z) {
    const std::size_t npts = z.z.grid->points();
    for (std::size_t p = 0; p < z.n_paths(); ++p) {
        if (!(z.terminal(p) > 0.0)) continue;
        for (std::size_t i = 0; i < npts; ++i)
            require(z.at(p, i) > 0.0, "live path carries a zero density value");
    }
}

std::string approach_name(Approach a) {
    switch (a) {
        case Approach::None: return "NONE";
        case Approach::Jump: return "JUMP";
        case Approach::Continuous: return "CONTINUOUS";
    }
    return "?";
}

std::vector<std::size_t> default_ladder() {
    return {2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
}

double default_eps_jump(const TimeGrid& grid, double scale) {
    double max_dt = 0.0;
    for (std::size_t i = 0; i < grid.steps(); ++i) max_dt = std::max(max_dt, grid.dt(i));
    return 5.0 * std::sqrt(max_dt) * scale;
}

StoppingReport stopping_times(const DensityProcess& z, std::span<const std::size_t> ladder,
                              double eps_jump) {
    std::vector<std::size_t> lad(ladder.begin(), ladder.end());
    if (lad.empty()) lad = default_ladder();
    for (std::size_t nlevel : lad) require(nlevel >= 1, "ladder levels must be >= 1");

    const TimeGrid& grid = *z.z.grid;
    const std::size_t n = z.n_paths(), npts = grid.points(), L = lad.size();

    StoppingReport r;
    r.ladder = lad;
    r.eps_jump = eps_jump > 0.0 ? eps_jump : default_eps_jump(grid);
    r.tau.assign(n, kInf);
    r.tau_n.assign(n * L, kInf);
    r.z_before_zero.assign(n, kNan);
    r.approach.assign(n, Approach::None);

    for (std::size_t p = 0; p < n; ++p) {
        std::size_t zero_idx = npts;
        for (std::size_t i = 0; i < npts; ++i)
            if (z.at(p, i) == 0.0) {
                zero_idx = i;
                break;
            }
        const bool exact = z.has_exact_zero(p);
        const double tau =
            exact ? z.exact_zero_time[p] : (zero_idx < npts ? grid.time(zero_idx) : kInf);
        r.tau[p] = tau;

        for (std::size_t j = 0; j < L; ++j) {
            const double level = 1.0 / static_cast<double>(lad[j]);
            double t_grid = kInf;
            for (std::size_t i = 0; i < npts; ++i)
                if (z.at(p, i) < level) {
                    t_grid = grid.time(i);
                    break;
                }
            r.tau_n[p * L + j] = std::min(t_grid, exact ? z.exact_zero_time[p] : kInf);
        }

        if (std::isfinite(tau)) {
            double before = kNan;
            if (!z.left_limit.empty() && !std::isnan(z.left_limit[p])) {
                before = z.left_limit[p];
            } else if (zero_idx > 0 && zero_idx < npts) {
                before = z.at(p, zero_idx - 1);
            }
            r.z_before_zero[p] = before;
            r.approach[p] =
                (std::isfinite(before) && before > r.eps_jump) ? Approach::Jump
                                                               : Approach::Continuous;
        }
    }
    return r;
}

JumpProbability jump_to_zero_probability(const StoppingReport& report) {
    JumpProbability j;
    j.n_paths = report.approach.size();
    for (Approach a : report.approach)
        if (a == Approach::Jump) ++j.n_jump;
    if (j.n_paths > 0) {
        j.fraction = static_cast<double>(j.n_jump) / static_cast<double>(j.n_paths);
        WilsonInterval ci = wilson_interval(j.n_jump, j.n_paths);
        j.low = ci.low;
        j.high = ci.high;
    }
    return j;
}

WeightedExpectation reweight(std::span<const double> payoff, std::span<const double> z_t) {
    require(payoff.size() == z_t.size(), "payoff and weight lengths differ");
    require(!z_t.empty(), "reweight needs at least one path");
    const std::size_t n = z_t.size();

    std::vector<double> prod(n), w(n), w2(n);
    std::size_t n_zero = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const double z = z_t[p];
        require(std::isfinite(z) && z >= 0.0, "weights must be finite non-negative");
        if (z > 0.0) {
            const double v = z * payoff[p];
            require(std::isfinite(v), "non-finite weighted payoff on a live path");
            prod[p] = v;
        } else {
            prod[p] = 0.0;   // dead path: payoff intentionally not read into the sum
            ++n_zero;
        }
        w[p] = z;
        w2[p] = z * z;
    }

    WeightedExpectation e;
    e.n_paths = n;
    e.n_zero = n_zero;
    e.estimate = pairwise_sum(prod) / static_cast<double>(n);
    if (n > 1) {
        std::vector<double> sq(n);
        for (std::size_t p = 0; p < n; ++p) {
            const double dev = prod[p] - e.estimate;
            sq[p] = dev * dev;
        }
        const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
        e.stderr_est = std::sqrt(var / static_cast<double>(n));
    }
    const double sw = pairwise_sum(w), sw2 = pairwise_sum(w2);
    e.effective_sample_size = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
    return e;
}

std::optional<ThetaRule> canonical_theta(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::StoppedBm:
            return ThetaRule([](double, std::span<const double> x, std::span<double> out) {
                out[0] = x[0] > 0.0 ? 1.0 : 0.0;
            });
        case ModelKind::ExpDefault:
        case ModelKind::CompensatorModel:
            // no diffusion part: the change of measure lives in the jump
            // compensator, so the Girsanov integrand vanishes
            return ThetaRule([](double, std::span<const double>, std::span<double> out) {
                out[0] = 0.0;
            });
        default: return std::nullopt;
    }
}

QDecomposition girsanov(const DecompositionProcess& dec, const Characteristics& ch,
                        const DensityProcess& z, const PathBundle& s, GirsanovMode mode,
                        const ThetaRule* analytic_theta, int threads) {
    const int d = s.dim;
    const std::size_t n = s.n_paths, npts = s.grid->points();
    require(ch.dim == d, "characteristics dimension mismatch");
    require(dec.lambda.n_paths == n && z.n_paths() == n, "path counts differ");
    require(z.z.grid->times() == s.grid->times(), "density grid differs from the bundle grid");
    if (mode == GirsanovMode::Analytic)
        require(analytic_theta != nullptr, "analytic mode needs a theta rule");

    auto zeros = [&](int w) {
        return GridProcess::from_values(s.grid, n, w, std::vector<double>(n * npts * w));
    };
    QDecomposition q;
    q.theta = zeros(d);
    q.lambda_bar = zeros(d);
    q.nu_bar = zeros(d);
    q.m_bar = zeros(d);
    q.quad_bar = zeros(1);
    q.theta_quad = zeros(1);
    q.active = zeros(1);

    // Estimated mode: one shift vector per step from the cross-path ratio.
    std::vector<double> shifts;
    bool warn = false;
    if (mode == GirsanovMode::Estimated) {
        shifts.assign((npts - 1) * d, 0.0);
        std::vector<double> num(n), den(n), centry(n), state(d), a(d);
        SymMatrix c(d);
        for (std::size_t i = 0; i + 1 < npts; ++i) {
            const double t = s.grid->time(i);
            const double db = ch.b_increment ? ch.b_increment(t, s.grid->time(i + 1)) : s.grid->dt(i);
            std::size_t live = 0;
            SymMatrix cbar(d);
            std::vector<double> cov(d, 0.0);
            for (int k = 0; k < d; ++k) {
                for (std::size_t p = 0; p < n; ++p) {
                    num[p] = 0.0;
                    if (k == 0) den[p] = 0.0;
                    const double zlast = z.at(p, i);
                    if (!(dec.active.at(p, i) > 0.0) || !(zlast > 0.0)) continue;
                    for (int kk = 0; kk < d; ++kk)
                        state[static_cast<std::size_t>(kk)] = s.value(p, i, kk);
                    ch.a(t, state, a);
                    const double dm =
                        s.value(p, i + 1, k) - s.value(p, i, k) - a[static_cast<std::size_t>(k)] * db;
                    const double dz = z.at(p, i + 1) - zlast;
                    num[p] = dm * dz;
                    if (k == 0) {
                        den[p] = zlast * db;
                        ++live;
                    }
                }
                cov[static_cast<std::size_t>(k)] = pairwise_sum(num);
            }
            // average diffusion matrix over live paths, entrywise pairwise sums
            for (int r = 0; r < d; ++r)
                for (int cidx = r; cidx < d; ++cidx) {
                    for (std::size_t p = 0; p < n; ++p) {
                        centry[p] = 0.0;
                        if (!(dec.active.at(p, i) > 0.0) || !(z.at(p, i) > 0.0)) continue;
                        for (int kk = 0; kk < d; ++kk)
                            state[static_cast<std::size_t>(kk)] = s.value(p, i, kk);
                        ch.c(t, state, c);
                        centry[p] = c.at(r, cidx);
                    }
                    const double avg =
                        live ? pairwise_sum(centry) / static_cast<double>(live) : 0.0;
                    cbar.set(r, cidx, avg);
                }
            const double dsum = pairwise_sum(den);
            if (live > 0 && live < 32) warn = true;
            if (live == 0 || dsum <= 0.0) continue;
            PseudoinverseResult pinv = pinv_psd(cbar);
            for (int r = 0; r < d; ++r) {
                double sh = 0.0;
                for (int k = 0; k < d; ++k)
                    sh += pinv.pinv.at(r, k) * (cov[static_cast<std::size_t>(k)] / dsum);
                shifts[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(r)] = sh;
            }
        }
    }
    q.low_sample_warning = warn;

    parallel_blocks(n, 64, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        std::vector<double> state(d), th(d), lb(d), abar(d);
        SymMatrix c(d);
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t i = 0; i + 1 < npts; ++i) {
                for (int k = 0; k < d; ++k)
                    q.nu_bar.at_ref(p, i, k) = dec.nu.at(p, i, k);
                const double zlast = z.at(p, i);
                const bool act = dec.active.at(p, i) > 0.0 && zlast > 0.0;
                q.active.at_ref(p, i) = act ? 1.0 : 0.0;
                if (!act) continue;

                const double t = s.grid->time(i);
                const double db =
                    ch.b_increment ? ch.b_increment(t, s.grid->time(i + 1)) : s.grid->dt(i);
                for (int k = 0; k < d; ++k)
                    state[static_cast<std::size_t>(k)] = s.value(p, i, k);
                ch.c(t, state, c);

                if (mode == GirsanovMode::Analytic) {
                    (*analytic_theta)(t, state, th);
                } else {
                    for (int k = 0; k < d; ++k)
                        th[static_cast<std::size_t>(k)] =
                            shifts[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] *
                            zlast;
                }
                for (int k = 0; k < d; ++k) {
                    q.theta.at_ref(p, i, k) = th[static_cast<std::size_t>(k)];
                    lb[static_cast<std::size_t>(k)] =
                        dec.lambda.at(p, i, k) + th[static_cast<std::size_t>(k)] / zlast;
                    q.lambda_bar.at_ref(p, i, k) = lb[static_cast<std::size_t>(k)];
                }
                double qb = 0.0, tq = 0.0;
                for (int r = 0; r < d; ++r) {
                    double crow_l = 0.0, crow_t = 0.0;
                    for (int k = 0; k < d; ++k) {
                        crow_l += c.at(r, k) * lb[static_cast<std::size_t>(k)];
                        crow_t += c.at(r, k) * th[static_cast<std::size_t>(k)];
                    }
                    qb += lb[static_cast<std::size_t>(r)] * crow_l;
                    tq += th[static_cast<std::size_t>(r)] * crow_t;
                    abar[static_cast<std::size_t>(r)] = crow_l + dec.nu.at(p, i, r);
                }
                q.quad_bar.at_ref(p, i) = qb;
                q.theta_quad.at_ref(p, i) = tq / (zlast * zlast);
                for (int k = 0; k < d; ++k)
                    q.m_bar.at_ref(p, i, k) = s.value(p, i + 1, k) - s.value(p, i, k) -
                                              abar[static_cast<std::size_t>(k)] * db;
            }
        }
    });
    return q;
}

QTradeoff mvt_under_q(const QDecomposition& qdec, const Characteristics& ch,
                      const DecompositionProcess& p_dec, const PathBundle& s,
                      std::span<const double> weights) {
    QTradeoff out;
    out.report.k_hat = k_hat_from_quad(qdec.quad_bar, qdec.active, ch);
    const std::size_t n = s.n_paths, last = s.grid->steps();
    out.report.terminal.resize(n);
    for (std::size_t p = 0; p < n; ++p)
        out.report.terminal[p] = out.report.k_hat.at(p, last);

    GridProcess kp = k_hat_from_quad(p_dec.quad, p_dec.active, ch);
    GridProcess tq = k_hat_from_quad(qdec.theta_quad, qdec.active, ch);

    double worst = -kInf;
    std::size_t counted = 0;
    for (std::size_t p = 0; p < n; ++p) {
        if (!weights.empty() && !(weights[p] > 0.0)) continue;
        ++counted;
        for (std::size_t i = 0; i <= last; ++i) {
            const double rhs = 2.0 * kp.at(p, i) + 2.0 * tq.at(p, i);
            const double excess = out.report.k_hat.at(p, i) - (rhs + 1e-8 + 0.05 * rhs);
            worst = std::max(worst, excess);
        }
    }
    out.bound.n_paths = counted;
    out.bound.worst_excess = counted ? worst : 0.0;
    out.bound.holds = out.bound.worst_excess <= 0.0;
    return out;
}

SmdAccumulator::SmdAccumulator(GridPtr grid, int dim, double threshold)
    : grid_(std::move(grid)), dim_(dim), threshold_(threshold) {
    require(dim_ >= 1, "diagnostic needs dimension >= 1");
    const std::size_t cells = static_cast<std::size_t>(dim_ + 1) * grid_->steps();
    sum_.assign(cells, 0.0);
    sumsq_.assign(cells, 0.0);
    scale_.assign(cells, 0.0);
}

void SmdAccumulator::add_chunk(const PathBundle& chunk, const GridProcess* l_chunk,
                               const DensityProcess& z_chunk, std::span<const double> weights) {
    require(!finished_, "accumulator already finished");
    require(chunk.grid->times() == grid_->times(), "chunk grid mismatch");
    require(chunk.dim == dim_, "chunk dimension mismatch");
    require(z_chunk.n_paths() == chunk.n_paths, "density path count mismatch");
    if (!weights.empty()) require(weights.size() == chunk.n_paths, "weights length mismatch");
    if (l_chunk)
        require(l_chunk->n_paths == chunk.n_paths && l_chunk->width == 1,
                "candidate deflator shape mismatch");

    const std::size_t n = chunk.n_paths, steps = grid_->steps();
    std::vector<double> terms(n);
    for (int comp = -1; comp < dim_; ++comp) {
        const std::size_t crow = static_cast<std::size_t>(comp + 1) * steps;
        for (std::size_t i = 0; i < steps; ++i) {
            double level = scale_[crow + i];
            for (std::size_t p = 0; p < n; ++p) {
                terms[p] = 0.0;
                const double w = weights.empty() ? 1.0 : weights[p];
                if (!(w > 0.0)) continue;
                const double z0 = z_chunk.at(p, i), z1 = z_chunk.at(p, i + 1);
                if (!(z0 > 0.0) || !(z1 > 0.0)) continue;
                const double l0 = l_chunk ? l_chunk->at(p, i) : 1.0;
                const double l1 = l_chunk ? l_chunk->at(p, i + 1) : 1.0;
                require(l0 > 0.0 && l1 > 0.0, "candidate deflator must stay positive");
                double x0 = l0 / z0, x1 = l1 / z1;
                if (comp >= 0) {
                    x0 *= chunk.value(p, i, comp);
                    x1 *= chunk.value(p, i + 1, comp);
                }
                const double term = w * (x1 - x0);
                require(std::isfinite(term), "non-finite diagnostic term on a live path");
                terms[p] = term;
                level = std::max(level, w * std::max(std::abs(x0), std::abs(x1)));
            }
            scale_[crow + i] = level;
            sum_[crow + i] += pairwise_sum(terms);
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) terms[p] *= terms[p];
            acc = pairwise_sum(terms);
            sumsq_[crow + i] += acc;
        }
    }
    n_total_ += n;
}

SmdDiagnostic SmdAccumulator::finish() {
    require(!finished_, "accumulator already finished");
    finished_ = true;

    SmdDiagnostic diag;
    diag.threshold = threshold_;
    diag.n_steps = grid_->steps();
    const auto n = static_cast<double>(n_total_);
    for (int comp = -1; comp < dim_; ++comp) {
        const std::size_t crow = static_cast<std::size_t>(comp + 1) * grid_->steps();
        for (std::size_t i = 0; i < grid_->steps(); ++i) {
            const double s1 = sum_[crow + i], s2 = sumsq_[crow + i];
            const double mean = n > 0.0 ? s1 / n : 0.0;
            // increments are differences of like-sized levels, so means below
            // the level ulp are rounding noise, not drift
            const double floor = 64.0 * 2.220446049250313e-16 * std::max(1.0, scale_[crow + i]);
            double stat = 0.0;
            if (n > 1.0 && std::abs(mean) > floor) {
                const double var = std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0));
                const double se = std::sqrt(var / n);
                stat = se > 0.0 ? std::abs(mean) / se : kInf;
            }
            if (stat > diag.max_stat) {
                diag.max_stat = stat;
                diag.argmax_step = i;
                diag.argmax_component = comp;
            }
        }
    }
    diag.pass = diag.max_stat < threshold_;
    return diag;
}

SmdDiagnostic smd_under_q(const GridProcess* l, const DensityProcess& z, const PathBundle& s,
                          std::span<const double> weights, double threshold) {
    SmdAccumulator acc(s.grid, s.dim, threshold);
    acc.add_chunk(s, l, z, weights);
    return acc.finish();
}

}  // namespace arbkit
