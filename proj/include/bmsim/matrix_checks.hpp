#pragma once

#include "bmsim/types.hpp"

namespace bmsim {

inline bool is_symmetric(const Mat& m, Real tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    const Real scale = std::max<Real>(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Symmetric positive definite (Cholesky succeeds and diagonal is positive).
inline bool is_spd(const Mat& m) {
    if (!is_symmetric(m)) return false;
    Eigen::LLT<Mat> llt(m);
    return llt.info() == Eigen::Success && m.diagonal().minCoeff() > 0.0;
}

/// Symmetric positive semidefinite within a small eigenvalue tolerance.
inline bool is_psd(const Mat& m, Real tol = 1e-10) {
    if (!is_symmetric(m)) return false;
    if (m.rows() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    const Real scale = std::max<Real>(1.0, m.cwiseAbs().maxCoeff());
    return es.eigenvalues().minCoeff() >= -tol * scale;
}

/// Strictly positive definite via the smallest eigenvalue.
inline bool is_pd(const Mat& m, Real tol = 1e-10) {
    if (!is_symmetric(m)) return false;
    if (m.rows() == 0) return false;
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    const Real scale = std::max<Real>(1.0, m.cwiseAbs().maxCoeff());
    return es.eigenvalues().minCoeff() > tol * scale;
}

inline Eigen::Index column_rank(const Mat& m) {
    if (m.size() == 0) return 0;
    Eigen::ColPivHouseholderQR<Mat> qr(m);
    return qr.rank();
}

inline bool has_full_column_rank(const Mat& m) {
    return m.cols() == 0 || column_rank(m) == m.cols();
}

inline bool is_nonsingular(const Mat& m) {
    if (m.rows() != m.cols()) return false;
    Eigen::FullPivLU<Mat> lu(m);
    return lu.isInvertible();
}

}  // namespace bmsim
