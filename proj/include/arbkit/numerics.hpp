#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace arbkit {

// Contract breaches (bad shapes, asymmetric input, negative tolerances).
struct ContractViolation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input claimed positive semidefinite has an eigenvalue below the tolerated band.
struct NotPsdError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense symmetric matrix, d <= 64.  Symmetry holds exactly as stored:
// construction from full data rejects any c_ij != c_ji.
class SymMatrix {
  public:
    SymMatrix() = default;
    explicit SymMatrix(int dim);                          // zero matrix
    static SymMatrix from_rows(int dim, std::span<const double> row_major);
    static SymMatrix diagonal(std::span<const double> diag);
    static SymMatrix identity(int dim);

    int dim() const { return dim_; }
    double at(int i, int j) const { return v_[static_cast<std::size_t>(i) * dim_ + j]; }
    void set(int i, int j, double x);                     // writes (i,j) and (j,i)
    const std::vector<double>& data() const { return v_; }

    std::vector<double> apply(std::span<const double> x) const;  // matrix * vector
    double trace() const;
    double frobenius() const;

  private:
    int dim_ = 0;
    std::vector<double> v_;
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// vectors is column-major: column k is the unit eigenvector for values[k].
struct EigenSym {
    std::vector<double> values;
    std::vector<double> vectors;
    int dim = 0;
    double vector_at(int row, int col) const { return vectors[static_cast<std::size_t>(row) * dim + col]; }
};
EigenSym jacobi_eigensym(const SymMatrix& m);

struct PseudoinverseResult {
    SymMatrix pinv;
    int rank = 0;
    std::vector<double> eigenvalues;      // ascending
    SymMatrix range_projector;            // c * pinv, idempotent
};

// Moore-Penrose pseudoinverse of a PSD matrix.  Eigenvalues below
// tol * max_eig are treated as zero; an eigenvalue below -sqrt(tol) * max|eig|
// raises NotPsdError.
PseudoinverseResult pinv_psd(const SymMatrix& c, double tol = 1e-12);

struct DriftDecomposition {
    std::vector<double> lambda;   // c+ a, lies in range(c)
    std::vector<double> nu;       // a - c lambda, lies in ker(c)
    double nu_norm = 0.0;
};

// Splits a drift vector as a = c lambda + nu with nu in ker(c).
DriftDecomposition decompose_drift(std::span<const double> a, const SymMatrix& c,
                                   double tol = 1e-12);

// Order-independent summation: fixed recursive halving, small sequential base.
double pairwise_sum(std::span<const double> x);

// Standard normal cdf / density.
double normal_cdf(double x);
double normal_pdf(double x);

struct WilsonInterval {
    double estimate = 0.0;
    double low = 0.0;
    double high = 0.0;
};
// Wilson score interval for a binomial proportion (z = 1.96 for 95%).
WilsonInterval wilson_interval(std::size_t successes, std::size_t n, double z = 1.96);

}  // namespace arbkit
