#include "arbkit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace arbkit {

namespace {
constexpr int kMaxDim = 64;

void check_dim(int dim) {
    if (dim < 1 || dim > kMaxDim)
        throw ContractViolation("SymMatrix: dimension must be in [1, 64], got " + std::to_string(dim));
}
}  // namespace

SymMatrix::SymMatrix(int dim) : dim_(dim), v_(static_cast<std::size_t>(dim) * dim, 0.0) {
    check_dim(dim);
}

SymMatrix SymMatrix::from_rows(int dim, std::span<const double> row_major) {
    check_dim(dim);
    const std::size_t n = static_cast<std::size_t>(dim) * dim;
    if (row_major.size() != n)
        throw ContractViolation("SymMatrix: expected " + std::to_string(n) + " entries");
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            if (row_major[static_cast<std::size_t>(i) * dim + j] !=
                row_major[static_cast<std::size_t>(j) * dim + i])
                throw ContractViolation("SymMatrix: input is not symmetric at (" +
                                        std::to_string(i) + "," + std::to_string(j) + ")");
    SymMatrix m(dim);
    m.v_.assign(row_major.begin(), row_major.end());
    return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    SymMatrix m(static_cast<int>(diag.size()));
    for (int i = 0; i < m.dim_; ++i) m.v_[static_cast<std::size_t>(i) * m.dim_ + i] = diag[i];
    return m;
}

SymMatrix SymMatrix::identity(int dim) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.v_[static_cast<std::size_t>(i) * dim + i] = 1.0;
    return m;
}

void SymMatrix::set(int i, int j, double x) {
    v_[static_cast<std::size_t>(i) * dim_ + j] = x;
    v_[static_cast<std::size_t>(j) * dim_ + i] = x;
}

std::vector<double> SymMatrix::apply(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(dim_))
        throw ContractViolation("SymMatrix::apply: vector length mismatch");
    std::vector<double> y(dim_, 0.0);
    for (int i = 0; i < dim_; ++i) {
        double s = 0.0;
        for (int j = 0; j < dim_; ++j) s += at(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

double SymMatrix::trace() const {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += at(i, i);
    return s;
}

double SymMatrix::frobenius() const {
    double s = 0.0;
    for (double x : v_) s += x * x;
    return std::sqrt(s);
}

EigenSym jacobi_eigensym(const SymMatrix& m) {
    const int d = m.dim();
    if (d == 0) throw ContractViolation("jacobi_eigensym: empty matrix");
    std::vector<double> a = m.data();
    std::vector<double> v(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i) * d + i] = 1.0;

    auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * d + j]; };
    auto V = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(i) * d + j]; };

    const double fro = m.frobenius();
    const double stop = fro > 0.0 ? 1e-15 * fro : 0.0;
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += 2.0 * A(p, q) * A(p, q);
        if (std::sqrt(off) <= stop) break;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                const double apq = A(p, q);
                if (apq == 0.0) continue;
                const double app = A(p, p), aqq = A(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                // smaller-magnitude root keeps rotations below pi/4
                const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                              : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < d; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                A(p, q) = 0.0;
                A(q, p) = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenSym out;
    out.dim = d;
    out.values.resize(d);
    for (int i = 0; i < d; ++i) out.values[i] = A(i, i);
    // sort ascending, permute columns accordingly
    std::vector<int> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int i, int j) { return out.values[i] < out.values[j]; });
    std::vector<double> values(d);
    std::vector<double> vectors(static_cast<std::size_t>(d) * d);
    for (int k = 0; k < d; ++k) {
        values[k] = out.values[idx[k]];
        for (int r = 0; r < d; ++r) vectors[static_cast<std::size_t>(r) * d + k] = V(r, idx[k]);
    }
    out.values = std::move(values);
    out.vectors = std::move(vectors);
    return out;
}

PseudoinverseResult pinv_psd(const SymMatrix& c, double tol) {
    if (!(tol > 0.0) || tol >= 1.0)
        throw ContractViolation("pinv_psd: tol must be in (0, 1)");
    const int d = c.dim();
    EigenSym eig = jacobi_eigensym(c);

    double scale = 0.0;
    for (double ev : eig.values) scale = std::max(scale, std::abs(ev));
    const double neg_band = std::sqrt(tol) * scale;
    const double cutoff = tol * scale;

    PseudoinverseResult r;
    r.eigenvalues = eig.values;
    std::vector<double> inv_vals(d, 0.0);
    std::vector<double> kept(d, 0.0);
    for (int k = 0; k < d; ++k) {
        const double ev = eig.values[k];
        if (ev < -neg_band)
            throw NotPsdError("pinv_psd: eigenvalue " + std::to_string(ev) +
                              " below PSD tolerance band");
        if (ev > cutoff) {
            inv_vals[k] = 1.0 / ev;
            kept[k] = 1.0;
            ++r.rank;
        }
    }

    SymMatrix pinv(d), proj(d);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            double sp = 0.0, sq = 0.0;
            for (int k = 0; k < d; ++k) {
                const double vik = eig.vector_at(i, k), vjk = eig.vector_at(j, k);
                sp += vik * inv_vals[k] * vjk;
                sq += vik * kept[k] * vjk;
            }
            pinv.set(i, j, sp);
            proj.set(i, j, sq);
        }
    }
    r.pinv = std::move(pinv);
    r.range_projector = std::move(proj);
    return r;
}

DriftDecomposition decompose_drift(std::span<const double> a, const SymMatrix& c, double tol) {
    if (a.size() != static_cast<std::size_t>(c.dim()))
        throw ContractViolation("decompose_drift: drift length != matrix dimension");
    PseudoinverseResult p = pinv_psd(c, tol);
    DriftDecomposition d;
    d.lambda = p.pinv.apply(a);
    std::vector<double> cl = c.apply(d.lambda);
    d.nu.resize(a.size());
    double n2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d.nu[i] = a[i] - cl[i];
        n2 += d.nu[i] * d.nu[i];
    }
    d.nu_norm = std::sqrt(n2);
    return d;
}

double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 32) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014327;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

WilsonInterval wilson_interval(std::size_t successes, std::size_t n, double z) {
    WilsonInterval w;
    if (n == 0) return w;
    const double p = static_cast<double>(successes) / static_cast<double>(n);
    const double nn = static_cast<double>(n);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    w.estimate = p;
    w.low = std::max(0.0, center - half);
    w.high = std::min(1.0, center + half);
    return w;
}

}  // namespace arbkit
