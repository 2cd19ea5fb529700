#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "arbkit/numerics.hpp"
#include "arbkit/rng.hpp"

namespace testsupport {

// Random orthogonal matrix as a product of Givens rotations (column-major like
// EigenSym::vectors).  Forward construction: tests build Q diag(w) Q^T with a
// known spectrum and check the library against it.
inline std::vector<double> random_orthogonal(arbkit::RngStream& rng, int d) {
    std::vector<double> q(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) q[static_cast<std::size_t>(i) * d + i] = 1.0;
    const int rounds = 2 * d * d;
    for (int r = 0; r < rounds; ++r) {
        const int i = static_cast<int>(rng.next_u64() % d);
        int j = static_cast<int>(rng.next_u64() % d);
        if (i == j) j = (j + 1) % d;
        if (d == 1) break;
        const double a = 6.283185307179586 * rng.uniform01();
        const double c = std::cos(a), s = std::sin(a);
        for (int k = 0; k < d; ++k) {
            const double qi = q[static_cast<std::size_t>(k) * d + i];
            const double qj = q[static_cast<std::size_t>(k) * d + j];
            q[static_cast<std::size_t>(k) * d + i] = c * qi - s * qj;
            q[static_cast<std::size_t>(k) * d + j] = s * qi + c * qj;
        }
    }
    return q;
}

// PSD matrix with the given nonzero spectrum spread over `rank` directions:
// largest eigenvalue ~ scale, smallest nonzero ~ scale / cond.
inline arbkit::SymMatrix random_psd(arbkit::RngStream& rng, int d, int rank, double cond,
                                    double scale, std::vector<double>* eigenvalues = nullptr) {
    std::vector<double> q = random_orthogonal(rng, d);
    std::vector<double> w(d, 0.0);
    for (int k = 0; k < rank; ++k) {
        // log-uniform in [scale/cond, scale]
        const double u = rng.uniform01();
        w[k] = scale * std::exp(-u * std::log(cond));
    }
    if (rank > 0) w[0] = scale;
    if (eigenvalues) *eigenvalues = w;
    arbkit::SymMatrix m(d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k)
                s += q[static_cast<std::size_t>(i) * d + k] * w[k] *
                     q[static_cast<std::size_t>(j) * d + k];
            m.set(i, j, s);
        }
    return m;
}

inline double rel_frobenius_diff(const arbkit::SymMatrix& a, const arbkit::SymMatrix& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        num += d * d;
        den += a.data()[i] * a.data()[i];
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

inline arbkit::SymMatrix matmul_sym(const arbkit::SymMatrix& a, const arbkit::SymMatrix& b,
                                    const arbkit::SymMatrix& c) {
    // a*b*c for symmetric inputs, result assumed symmetric (set both halves from upper)
    const int d = a.dim();
    std::vector<double> ab(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += a.at(i, k) * b.at(k, j);
            ab[static_cast<std::size_t>(i) * d + j] = s;
        }
    arbkit::SymMatrix out(d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += ab[static_cast<std::size_t>(i) * d + k] * c.at(k, j);
            out.set(i, j, s);
        }
    return out;
}

inline double mean(std::span<const double> x) {
    return arbkit::pairwise_sum(x) / static_cast<double>(x.size());
}

inline double sample_sd(std::span<const double> x) {
    const double m = mean(x);
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - m) * (x[i] - m);
    return std::sqrt(arbkit::pairwise_sum(sq) / static_cast<double>(x.size() - 1));
}

inline double stderr_of_mean(std::span<const double> x) {
    return sample_sd(x) / std::sqrt(static_cast<double>(x.size()));
}

}  // namespace testsupport
