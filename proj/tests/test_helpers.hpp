#pragma once

#include "bmsim/bm_core.hpp"
#include "bmsim/systems.hpp"

#include <random>

namespace bmsim::testing {

using Rng = std::mt19937;

inline Mat random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, Real scale = 1.0) {
    std::uniform_real_distribution<Real> dist(-scale, scale);
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

inline Vec random_vector(Rng& rng, Eigen::Index n, Real scale = 1.0) {
    std::uniform_real_distribution<Real> dist(-scale, scale);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

/// SPD matrix with eigenvalues in [lo, hi].
inline Mat random_spd(Rng& rng, Eigen::Index n, Real lo = 0.5, Real hi = 2.0) {
    Mat a = random_matrix(rng, n, n);
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ();
    std::uniform_real_distribution<Real> dist(lo, hi);
    Vec d(n);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = dist(rng);
    return q * d.asDiagonal() * q.transpose();
}

/// PSD matrix; with probability ~1/2 it is rank deficient.
inline Mat random_psd(Rng& rng, Eigen::Index n, Real hi = 2.0) {
    Mat a = random_matrix(rng, n, n);
    Eigen::HouseholderQR<Mat> qr(a);
    Mat q = qr.householderQ();
    std::uniform_real_distribution<Real> dist(0.0, hi);
    std::bernoulli_distribution zero(0.3);
    Vec d(n);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = zero(rng) ? 0.0 : dist(rng);
    return q * d.asDiagonal() * q.transpose();
}

inline RlcSystem random_rlc(Rng& rng, Eigen::Index sigma, Eigen::Index rho, Eigen::Index m) {
    Mat B;
    do {
        B = random_matrix(rng, sigma, m);
    } while (!has_full_column_rank(B));
    return RlcSystem(random_spd(rng, sigma), random_spd(rng, rho), random_psd(rng, sigma),
                     random_psd(rng, rho), random_matrix(rng, sigma, rho), B);
}

inline SwitchedRlcSystem random_srlc(Rng& rng, Eigen::Index sigma, Eigen::Index rho) {
    Vec vs(1);
    std::uniform_real_distribution<Real> vdist(0.5, 2.0);
    vs[0] = vdist(rng);
    return SwitchedRlcSystem(random_spd(rng, sigma), random_spd(rng, rho),
                             random_psd(rng, sigma), random_psd(rng, rho),
                             random_matrix(rng, sigma, rho), random_matrix(rng, sigma, rho),
                             random_matrix(rng, sigma, 1), random_matrix(rng, sigma, 1), vs);
}

}  // namespace bmsim::testing
