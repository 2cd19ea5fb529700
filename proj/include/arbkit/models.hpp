#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arbkit/numerics.hpp"
#include "arbkit/paths.hpp"

namespace arbkit {

// Model parameters failed validation.
struct InvalidModelError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Operation asked of a model kind that does not support it.
struct UnsupportedOperation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ModelKind {
    DriftedBm,         // dS = mu dt + sigma dW, exact Gaussian increments
    StoppedBm,         // scalar BM from start > 0, absorbed at zero (bridge test)
    Bes3,              // |start.e1 + 3-d BM|, exact
    ExpDefault,        // S_t = 1{xi > t} e^t, xi ~ Exp(rate)
    CompensatorModel,  // S = (t ^ xi) - 1{t >= xi}, martingale; B = t ^ xi in aux
    KernelDrift,       // S1 = BM, S2 = rate * t: drift orthogonal to the volatility range
};

std::string model_kind_name(ModelKind kind);
std::optional<ModelKind> model_kind_from_name(const std::string& name);

struct ModelSpec {
    ModelKind kind = ModelKind::DriftedBm;
    int dim = 1;                      // drifted_bm only; others fix their own
    std::vector<double> start;        // default per kind
    std::vector<double> mu;           // drifted_bm drift
    std::vector<double> sigma;        // drifted_bm volatility matrix, row-major dim x dim
    double rate = 1.0;                // exp_default / compensator_model jump intensity
    double kernel_rate = 1.0;         // kernel_drift: dS2 = kernel_rate dt
};

// Normalizes defaults and checks parameter ranges; throws InvalidModelError.
ModelSpec validate_model(ModelSpec spec);

int model_dim(const ModelSpec& spec);

struct JumpSpec {
    double rate = 0.0;
    std::string description;
};

// Differential characteristics relative to the clock B (here B = t):
// drift density a and diffusion matrix c as functions of (t, state).
struct Characteristics {
    int dim = 0;
    bool constant = false;   // a and c do not depend on (t, state)
    std::function<void(double t, std::span<const double> state, std::span<double> a_out)> a;
    std::function<void(double t, std::span<const double> state, SymMatrix& c_out)> c;
    std::function<double(double t0, double t1)> b_increment;   // defaults to t1 - t0
    std::optional<JumpSpec> jump;
};

// Characteristics under the original measure.
Characteristics characteristics(const ModelSpec& spec);

// Characteristics after the kind's canonical measure change (density in aux);
// UnsupportedOperation for kinds without one.
Characteristics q_characteristics(const ModelSpec& spec);
bool has_canonical_density(const ModelSpec& spec);   // density_process support

// Simulates n_paths paths; path p uses stream (root_seed, path_offset + p).
// Aux content per kind:
//   stopped_bm:        scalar "absorbed_at" (grid index, +inf when never)
//   exp_default:       series "Z" (= S), scalars "xi", "z_left_limit" (= e^xi)
//   compensator_model: series "Z", "B", scalars "xi", "z_left_limit"
PathBundle simulate(const ModelSpec& spec, GridPtr grid, std::size_t n_paths,
                    std::uint64_t root_seed, std::size_t path_offset = 0);

// Coupled refinement: simulates once on the factor-refined grid and restricts
// to the coarse grid, so the coarse path IS the fine path at coarse times.
struct RefinedPair {
    PathBundle coarse;
    PathBundle fine;
};
bool supports_coupled_refinement(const ModelSpec& spec);
RefinedPair refine_grid(const ModelSpec& spec, GridPtr coarse, std::size_t n_paths,
                        std::uint64_t root_seed, std::size_t factor,
                        std::size_t path_offset = 0);

// Streams the simulation in fixed-size chunks; chunk boundaries depend only on
// (n_paths, chunk_paths), so results are independent of the thread count.
void for_each_chunk(const ModelSpec& spec, GridPtr grid, std::size_t n_paths,
                    std::uint64_t root_seed, std::size_t chunk_paths, int threads,
                    const std::function<void(const PathBundle&, std::size_t chunk_index)>& fn);

// Same streaming driver for coupled pairs.
void for_each_refined_chunk(const ModelSpec& spec, GridPtr coarse, std::size_t n_paths,
                            std::uint64_t root_seed, std::size_t factor,
                            std::size_t chunk_paths, int threads,
                            const std::function<void(const RefinedPair&, std::size_t)>& fn);

}  // namespace arbkit
