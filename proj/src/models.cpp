#include "arbkit/models.hpp"

#include <cmath>
#include <limits>

#include "arbkit/rng.hpp"
#include "arbkit/threading.hpp"

namespace arbkit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::DriftedBm: return "drifted_bm";
        case ModelKind::StoppedBm: return "stopped_bm";
        case ModelKind::Bes3: return "bes3";
        case ModelKind::ExpDefault: return "exp_default";
        case ModelKind::CompensatorModel: return "compensator_model";
        case ModelKind::KernelDrift: return "kernel_drift";
    }
    return "unknown";
}

std::optional<ModelKind> model_kind_from_name(const std::string& name) {
    if (name == "drifted_bm") return ModelKind::DriftedBm;
    if (name == "stopped_bm") return ModelKind::StoppedBm;
    if (name == "bes3") return ModelKind::Bes3;
    if (name == "exp_default") return ModelKind::ExpDefault;
    if (name == "compensator_model") return ModelKind::CompensatorModel;
    if (name == "kernel_drift") return ModelKind::KernelDrift;
    return std::nullopt;
}

int model_dim(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::DriftedBm: return spec.dim;
        case ModelKind::KernelDrift: return 2;
        default: return 1;
    }
}

ModelSpec validate_model(ModelSpec spec) {
    switch (spec.kind) {
        case ModelKind::DriftedBm: {
            if (spec.dim < 1 || spec.dim > 64)
                throw InvalidModelError("drifted_bm: dim must be in [1, 64]");
            const std::size_t d = static_cast<std::size_t>(spec.dim);
            if (spec.start.empty()) spec.start.assign(d, 0.0);
            if (spec.mu.empty()) spec.mu.assign(d, 0.0);
            if (spec.sigma.empty()) {
                spec.sigma.assign(d * d, 0.0);
                for (std::size_t i = 0; i < d; ++i) spec.sigma[i * d + i] = 1.0;
            }
            if (spec.start.size() != d || spec.mu.size() != d || spec.sigma.size() != d * d)
                throw InvalidModelError("drifted_bm: start/mu need dim entries, sigma dim*dim");
            break;
        }
        case ModelKind::StoppedBm:
        case ModelKind::Bes3: {
            if (spec.start.empty()) spec.start = {1.0};
            if (spec.start.size() != 1 || !(spec.start[0] > 0.0))
                throw InvalidModelError(model_kind_name(spec.kind) +
                                        ": start must be a single positive value");
            break;
        }
        case ModelKind::ExpDefault:
        case ModelKind::CompensatorModel: {
            if (!(spec.rate > 0.0))
                throw InvalidModelError(model_kind_name(spec.kind) + ": rate must be positive");
            if (!spec.start.empty())
                throw InvalidModelError(model_kind_name(spec.kind) + ": start is fixed");
            break;
        }
        case ModelKind::KernelDrift: {
            if (spec.start.empty()) spec.start = {0.0, 0.0};
            if (spec.start.size() != 2)
                throw InvalidModelError("kernel_drift: start needs two entries");
            if (!(spec.kernel_rate != 0.0))
                throw InvalidModelError("kernel_drift: kernel_rate must be nonzero");
            break;
        }
    }
    return spec;
}

Characteristics characteristics(const ModelSpec& raw) {
    const ModelSpec spec = validate_model(raw);
    Characteristics ch;
    ch.dim = model_dim(spec);
    ch.b_increment = [](double t0, double t1) { return t1 - t0; };
    switch (spec.kind) {
        case ModelKind::DriftedBm: {
            const int d = spec.dim;
            SymMatrix c(d);
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j) {
                    double s = 0.0;
                    for (int k = 0; k < d; ++k)
                        s += spec.sigma[static_cast<std::size_t>(i) * d + k] *
                             spec.sigma[static_cast<std::size_t>(j) * d + k];
                    c.set(i, j, s);
                }
            ch.constant = true;
            ch.a = [mu = spec.mu](double, std::span<const double>, std::span<double> out) {
                for (std::size_t i = 0; i < mu.size(); ++i) out[i] = mu[i];
            };
            ch.c = [c](double, std::span<const double>, SymMatrix& out) { out = c; };
            break;
        }
        case ModelKind::StoppedBm: {
            // martingale: zero drift, unit diffusion until absorption
            ch.a = [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
            ch.c = [](double, std::span<const double> x, SymMatrix& out) {
                out = SymMatrix(1);
                out.set(0, 0, x[0] > 0.0 ? 1.0 : 0.0);
            };
            break;
        }
        case ModelKind::Bes3: {
            ch.a = [](double, std::span<const double> x, std::span<double> out) {
                out[0] = 1.0 / x[0];
            };
            ch.c = [](double, std::span<const double>, SymMatrix& out) {
                out = SymMatrix::identity(1);
            };
            break;
        }
        case ModelKind::ExpDefault: {
            // martingale: the growth at rate S is exactly offset by the
            // compensated jump to zero, so the finite-variation drift is 0
            ch.constant = true;
            ch.a = [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
            ch.c = [](double, std::span<const double>, SymMatrix& out) { out = SymMatrix(1); };
            ch.jump = JumpSpec{spec.rate, "jump to zero at xi ~ Exp(rate)"};
            break;
        }
        case ModelKind::CompensatorModel: {
            // martingale: S = (t ^ xi) - 1{t >= xi} compensates its own jump
            ch.constant = true;
            ch.a = [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
            ch.c = [](double, std::span<const double>, SymMatrix& out) { out = SymMatrix(1); };
            ch.jump = JumpSpec{spec.rate, "unit drop at xi ~ Exp(rate)"};
            break;
        }
        case ModelKind::KernelDrift: {
            SymMatrix c(2);
            c.set(0, 0, 1.0);
            ch.constant = true;
            ch.a = [k = spec.kernel_rate](double, std::span<const double>, std::span<double> out) {
                out[0] = 0.0;
                out[1] = k;
            };
            ch.c = [c](double, std::span<const double>, SymMatrix& out) { out = c; };
            break;
        }
    }
    return ch;
}

bool has_canonical_density(const ModelSpec& spec) {
    return spec.kind == ModelKind::StoppedBm || spec.kind == ModelKind::ExpDefault ||
           spec.kind == ModelKind::CompensatorModel;
}

Characteristics q_characteristics(const ModelSpec& raw) {
    const ModelSpec spec = validate_model(raw);
    Characteristics ch;
    ch.dim = model_dim(spec);
    ch.b_increment = [](double t0, double t1) { return t1 - t0; };
    switch (spec.kind) {
        case ModelKind::StoppedBm: {
            // under the terminal-value reweighting the path law gains drift 1/x
            ch.a = [](double, std::span<const double> x, std::span<double> out) {
                out[0] = x[0] > 0.0 ? 1.0 / x[0] : 0.0;
            };
            ch.c = [](double, std::span<const double> x, SymMatrix& out) {
                out = SymMatrix(1);
                out.set(0, 0, x[0] > 0.0 ? 1.0 : 0.0);
            };
            break;
        }
        case ModelKind::ExpDefault: {
            // weighted paths never default: S = e^t, finite variation
            ch.a = [](double, std::span<const double> x, std::span<double> out) {
                out[0] = x[0];
            };
            ch.c = [](double, std::span<const double>, SymMatrix& out) { out = SymMatrix(1); };
            break;
        }
        case ModelKind::CompensatorModel: {
            // weighted paths never jump: S = t, deterministic increase
            ch.constant = true;
            ch.a = [](double, std::span<const double>, std::span<double> out) { out[0] = 1.0; };
            ch.c = [](double, std::span<const double>, SymMatrix& out) { out = SymMatrix(1); };
            break;
        }
        default:
            throw UnsupportedOperation(model_kind_name(spec.kind) +
                                       " has no canonical density process");
    }
    return ch;
}

namespace {

PathBundle make_bundle(const ModelSpec& spec, GridPtr grid, std::size_t n_paths,
                       std::uint64_t root_seed, std::size_t path_offset) {
    PathBundle b;
    b.grid = std::move(grid);
    b.n_paths = n_paths;
    b.dim = model_dim(spec);
    b.root_seed = root_seed;
    b.path_offset = path_offset;
    b.values.resize(n_paths * b.grid->points() * static_cast<std::size_t>(b.dim));
    return b;
}

void simulate_drifted_bm(const ModelSpec& spec, PathBundle& b) {
    const std::size_t npts = b.grid->points();
    const int d = spec.dim;
    std::vector<double> z(d), step(d);
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        RngStream rng(b.root_seed, b.path_offset + p);
        for (int k = 0; k < d; ++k) b.value_ref(p, 0, k) = spec.start[k];
        for (std::size_t i = 0; i + 1 < npts; ++i) {
            const double dt = b.grid->dt(i);
            const double sq = std::sqrt(dt);
            for (int k = 0; k < d; ++k) z[k] = rng.normal();
            for (int r = 0; r < d; ++r) {
                double diff = 0.0;
                for (int k = 0; k < d; ++k)
                    diff += spec.sigma[static_cast<std::size_t>(r) * d + k] * z[k];
                b.value_ref(p, i + 1, r) = b.value(p, i, r) + spec.mu[r] * dt + sq * diff;
            }
        }
    }
}

void simulate_stopped_bm(const ModelSpec& spec, PathBundle& b) {
    const std::size_t npts = b.grid->points();
    auto& absorbed = b.aux_scalars["absorbed_at"];
    absorbed.assign(b.n_paths, kInf);
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        RngStream rng(b.root_seed, b.path_offset + p);
        double w = spec.start[0];
        b.value_ref(p, 0) = w;
        bool alive = true;
        for (std::size_t i = 0; i + 1 < npts; ++i) {
            if (!alive) {
                b.value_ref(p, i + 1) = 0.0;
                continue;
            }
            const double dt = b.grid->dt(i);
            const double next = w + std::sqrt(dt) * rng.normal();
            if (next <= 0.0) {
                alive = false;
            } else {
                // exact absorption law: survive the step with the reflection
                // complement, P(hit 0 | endpoints) = exp(-2 w w' / dt)
                const double hit = std::exp(-2.0 * w * next / dt);
                if (rng.uniform01() < hit) alive = false;
            }
            if (alive) {
                w = next;
                b.value_ref(p, i + 1) = w;
            } else {
                b.value_ref(p, i + 1) = 0.0;
                absorbed[p] = static_cast<double>(i + 1);
            }
        }
    }
}

void simulate_bes3(const ModelSpec& spec, PathBundle& b) {
    const std::size_t npts = b.grid->points();
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        RngStream rng(b.root_seed, b.path_offset + p);
        double y0 = spec.start[0], y1 = 0.0, y2 = 0.0;
        b.value_ref(p, 0) = spec.start[0];
        for (std::size_t i = 0; i + 1 < npts; ++i) {
            const double sq = std::sqrt(b.grid->dt(i));
            y0 += sq * rng.normal();
            y1 += sq * rng.normal();
            y2 += sq * rng.normal();
            b.value_ref(p, i + 1) = std::sqrt(y0 * y0 + y1 * y1 + y2 * y2);
        }
    }
}

void simulate_exp_default(const ModelSpec& spec, PathBundle& b) {
    const std::size_t npts = b.grid->points();
    auto& xi = b.aux_scalars["xi"];
    auto& zleft = b.aux_scalars["z_left_limit"];
    auto& z = b.aux_series["Z"];
    xi.assign(b.n_paths, 0.0);
    zleft.assign(b.n_paths, 0.0);
    z.assign(b.n_paths * npts, 0.0);
    std::vector<double> egrid(npts);
    for (std::size_t i = 0; i < npts; ++i) egrid[i] = std::exp(b.grid->time(i));
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        RngStream rng(b.root_seed, b.path_offset + p);
        const double jump = rng.exponential() / spec.rate;
        xi[p] = jump;
        zleft[p] = std::exp(jump);
        for (std::size_t i = 0; i < npts; ++i) {
            const double v = b.grid->time(i) < jump ? egrid[i] : 0.0;
            b.value_ref(p, i) = v;
            z[p * npts + i] = v;
        }
    }
}

void simulate_compensator(const ModelSpec& spec, PathBundle& b) {
    const std::size_t npts = b.grid->points();
    auto& xi = b.aux_scalars["xi"];
    auto& zleft = b.aux_scalars["z_left_limit"];
    auto& z = b.aux_series["Z"];
    auto& comp = b.aux_series["B"];
    xi.assign(b.n_paths, 0.0);
    zleft.assign(b.n_paths, 0.0);
    z.assign(b.n_paths * npts, 0.0);
    comp.assign(b.n_paths * npts, 0.0);
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        RngStream rng(b.root_seed, b.path_offset + p);
        const double jump = rng.exponential() / spec.rate;
        xi[p] = jump;
        zleft[p] = std::exp(jump);
        for (std::size_t i = 0; i < npts; ++i) {
            const double t = b.grid->time(i);
            const double clipped = std::min(t, jump);
            const double jumped = t >= jump ? 1.0 : 0.0;
            b.value_ref(p, i) = clipped - jumped;
            comp[p * npts + i] = clipped;
            z[p * npts + i] = t < jump ? std::exp(t) : 0.0;
        }
    }
}

void simulate_kernel_drift(const ModelSpec& spec, PathBundle& b) {
    const std::size_t npts = b.grid->points();
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        RngStream rng(b.root_seed, b.path_offset + p);
        double w = spec.start[0];
        b.value_ref(p, 0, 0) = w;
        b.value_ref(p, 0, 1) = spec.start[1];
        for (std::size_t i = 0; i + 1 < npts; ++i) {
            w += std::sqrt(b.grid->dt(i)) * rng.normal();
            b.value_ref(p, i + 1, 0) = w;
            b.value_ref(p, i + 1, 1) = spec.start[1] + spec.kernel_rate * b.grid->time(i + 1);
        }
    }
}

}  // namespace

PathBundle simulate(const ModelSpec& raw, GridPtr grid, std::size_t n_paths,
                    std::uint64_t root_seed, std::size_t path_offset) {
    const ModelSpec spec = validate_model(raw);
    if (!grid) throw ContractViolation("simulate: null grid");
    if (n_paths == 0) throw ContractViolation("simulate: need at least one path");
    PathBundle b = make_bundle(spec, std::move(grid), n_paths, root_seed, path_offset);
    switch (spec.kind) {
        case ModelKind::DriftedBm: simulate_drifted_bm(spec, b); break;
        case ModelKind::StoppedBm: simulate_stopped_bm(spec, b); break;
        case ModelKind::Bes3: simulate_bes3(spec, b); break;
        case ModelKind::ExpDefault: simulate_exp_default(spec, b); break;
        case ModelKind::CompensatorModel: simulate_compensator(spec, b); break;
        case ModelKind::KernelDrift: simulate_kernel_drift(spec, b); break;
    }
    return b;
}

bool supports_coupled_refinement(const ModelSpec& spec) {
    (void)validate_model(spec);
    // every catalog sampler is exact in distribution on any grid, so the
    // restriction of a fine simulation is a valid coarse simulation
    return true;
}

RefinedPair refine_grid(const ModelSpec& raw, GridPtr coarse, std::size_t n_paths,
                        std::uint64_t root_seed, std::size_t factor,
                        std::size_t path_offset) {
    const ModelSpec spec = validate_model(raw);
    if (!supports_coupled_refinement(spec))
        throw UnsupportedOperation(model_kind_name(spec.kind) +
                                   " does not support coupled refinement");
    if (factor < 2) throw ContractViolation("refine_grid: factor must be >= 2");
    if (!coarse) throw ContractViolation("refine_grid: null grid");

    auto fine_grid = std::make_shared<TimeGrid>(coarse->refined(factor));
    RefinedPair pair;
    pair.fine = simulate(spec, fine_grid, n_paths, root_seed, path_offset);
    PathBundle& c = pair.coarse;
    c = make_bundle(spec, coarse, n_paths, root_seed, path_offset);
    const std::size_t cn = coarse->points();
    const std::size_t fn = fine_grid->points();
    const int d = c.dim;
    for (std::size_t p = 0; p < n_paths; ++p)
        for (std::size_t i = 0; i < cn; ++i)
            for (int k = 0; k < d; ++k)
                c.value_ref(p, i, k) = pair.fine.value(p, std::min(i * factor, fn - 1), k);

    for (const auto& [name, data] : pair.fine.aux_series) {
        auto& out = c.aux_series[name];
        out.resize(n_paths * cn);
        for (std::size_t p = 0; p < n_paths; ++p)
            for (std::size_t i = 0; i < cn; ++i)
                out[p * cn + i] = data[p * fn + std::min(i * factor, fn - 1)];
    }
    c.aux_scalars = pair.fine.aux_scalars;
    if (auto it = c.aux_scalars.find("absorbed_at"); it != c.aux_scalars.end()) {
        // fine absorption index maps to the next coarse grid point
        for (auto& v : it->second)
            if (std::isfinite(v))
                v = std::ceil(v / static_cast<double>(factor));
    }
    return pair;
}

void for_each_chunk(const ModelSpec& spec, GridPtr grid, std::size_t n_paths,
                    std::uint64_t root_seed, std::size_t chunk_paths, int threads,
                    const std::function<void(const PathBundle&, std::size_t)>& fn) {
    parallel_blocks(n_paths, chunk_paths, threads,
                    [&](std::size_t begin, std::size_t end, std::size_t index) {
                        fn(simulate(spec, grid, end - begin, root_seed, begin), index);
                    });
}

void for_each_refined_chunk(const ModelSpec& spec, GridPtr coarse, std::size_t n_paths,
                            std::uint64_t root_seed, std::size_t factor,
                            std::size_t chunk_paths, int threads,
                            const std::function<void(const RefinedPair&, std::size_t)>& fn) {
    parallel_blocks(n_paths, chunk_paths, threads,
                    [&](std::size_t begin, std::size_t end, std::size_t index) {
                        fn(refine_grid(spec, coarse, end - begin, root_seed, factor, begin),
                           index);
                    });
}

}  // namespace arbkit
