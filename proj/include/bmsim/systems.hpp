#pragma once

#include "bmsim/matrix_checks.hpp"
#include "bmsim/types.hpp"

#include <utility>
#include <vector>

namespace bmsim {

/// Constant-topology RLC circuit in Brayton-Moser form:
///   -L dI/dt = Gamma V + R I - B u_s
///    C dV/dt = Gamma^T I - G V
class RlcSystem {
public:
    RlcSystem(Mat L, Mat C, Mat R, Mat G, Mat Gamma, Mat B)
        : L_(std::move(L)), C_(std::move(C)), R_(std::move(R)), G_(std::move(G)),
          Gamma_(std::move(Gamma)), B_(std::move(B)) {
        const auto s = L_.rows();
        const auto r = C_.rows();
        require(is_spd(L_), "L must be symmetric positive definite");
        require(is_spd(C_), "C must be symmetric positive definite");
        require(R_.rows() == s && R_.cols() == s, "R dimension mismatch");
        require(G_.rows() == r && G_.cols() == r, "G dimension mismatch");
        require(is_psd(R_), "R must be symmetric positive semidefinite");
        require(is_psd(G_), "G must be symmetric positive semidefinite");
        require(Gamma_.rows() == s && Gamma_.cols() == r, "Gamma dimension mismatch");
        require(B_.rows() == s, "B dimension mismatch");
        require(has_full_column_rank(B_), "B must have full column rank");
        lltL_.compute(L_);
        lltC_.compute(C_);
    }

    Eigen::Index sigma() const { return L_.rows(); }
    Eigen::Index rho() const { return C_.rows(); }
    Eigen::Index inputs() const { return B_.cols(); }

    const Mat& L() const { return L_; }
    const Mat& C() const { return C_; }
    const Mat& R() const { return R_; }
    const Mat& G() const { return G_; }
    const Mat& Gamma() const { return Gamma_; }
    const Mat& B() const { return B_; }

    Vec solve_L(const Vec& rhs) const { return lltL_.solve(rhs); }
    Vec solve_C(const Vec& rhs) const { return lltC_.solve(rhs); }

private:
    Mat L_, C_, R_, G_, Gamma_, B_;
    Eigen::LLT<Mat> lltL_, lltC_;
};

/// Switched RLC circuit (averaged model) with one or more switching channels:
///   Gamma(u) = Gamma0 + sum_k u_k dGamma_k,  B(u) = B0 + sum_k u_k dB_k
///   -L dI/dt = R I + Gamma(u) V - B(u) Vs
///    C dV/dt = Gamma(u)^T I - G V
/// The single-switch constructor matches Gamma(u) = u Gamma1 + (1-u) Gamma0.
class SwitchedRlcSystem {
public:
    SwitchedRlcSystem(Mat L, Mat C, Mat R, Mat G,
                      Mat Gamma0, const Mat& Gamma1, Mat B0, const Mat& B1, Vec Vs)
        : SwitchedRlcSystem(std::move(L), std::move(C), std::move(R), std::move(G), Gamma0,
                            std::vector<Mat>{Gamma1 - Gamma0}, B0, std::vector<Mat>{B1 - B0},
                            std::move(Vs)) {}

    SwitchedRlcSystem(Mat L, Mat C, Mat R, Mat G,
                      Mat Gamma0, std::vector<Mat> dGamma,
                      Mat B0, std::vector<Mat> dB, Vec Vs)
        : L_(std::move(L)), C_(std::move(C)), R_(std::move(R)), G_(std::move(G)),
          Gamma0_(std::move(Gamma0)), dGamma_(std::move(dGamma)),
          B0_(std::move(B0)), dB_(std::move(dB)), Vs_(std::move(Vs)) {
        const auto s = L_.rows();
        const auto r = C_.rows();
        require(is_spd(L_), "L must be symmetric positive definite");
        require(is_spd(C_), "C must be symmetric positive definite");
        require(R_.rows() == s && R_.cols() == s && is_psd(R_),
                "R must be symmetric positive semidefinite");
        require(G_.rows() == r && G_.cols() == r && is_psd(G_),
                "G must be symmetric positive semidefinite");
        require(Gamma0_.rows() == s && Gamma0_.cols() == r, "Gamma0 dimension mismatch");
        require(B0_.rows() == s && B0_.cols() == Vs_.size(), "B0 dimension mismatch");
        require(dGamma_.size() == dB_.size(), "one (dGamma, dB) pair per channel");
        for (const auto& dg : dGamma_)
            require(dg.rows() == s && dg.cols() == r, "dGamma dimension mismatch");
        for (const auto& db : dB_)
            require(db.rows() == s && db.cols() == Vs_.size(), "dB dimension mismatch");
        require(Vs_.size() == 0 || Vs_.cwiseAbs().minCoeff() > 0.0,
                "every source voltage must be nonzero");
        lltL_.compute(L_);
        lltC_.compute(C_);
    }

    Eigen::Index sigma() const { return L_.rows(); }
    Eigen::Index rho() const { return C_.rows(); }
    Eigen::Index switches() const { return static_cast<Eigen::Index>(dGamma_.size()); }
    Eigen::Index sources() const { return Vs_.size(); }

    const Mat& L() const { return L_; }
    const Mat& C() const { return C_; }
    const Mat& R() const { return R_; }
    const Mat& G() const { return G_; }
    const Mat& Gamma0() const { return Gamma0_; }
    const Mat& B0() const { return B0_; }
    const Vec& Vs() const { return Vs_; }
    const Mat& dGamma(Eigen::Index k) const { return dGamma_[static_cast<std::size_t>(k)]; }
    const Mat& dB(Eigen::Index k) const { return dB_[static_cast<std::size_t>(k)]; }

    /// Gamma at u=1 for single-switch systems.
    Mat Gamma1() const {
        require(switches() == 1, "Gamma1 is defined for single-switch systems");
        return Gamma0_ + dGamma_[0];
    }
    Mat B1() const {
        require(switches() == 1, "B1 is defined for single-switch systems");
        return B0_ + dB_[0];
    }

    Mat gamma_at(const Vec& u) const {
        check_u(u);
        Mat g = Gamma0_;
        for (Eigen::Index k = 0; k < switches(); ++k) g += u[k] * dGamma_[static_cast<std::size_t>(k)];
        return g;
    }
    Mat b_at(const Vec& u) const {
        check_u(u);
        Mat b = B0_;
        for (Eigen::Index k = 0; k < switches(); ++k) b += u[k] * dB_[static_cast<std::size_t>(k)];
        return b;
    }
    Mat gamma_at(Real u) const { return gamma_at(Vec::Constant(1, u)); }
    Mat b_at(Real u) const { return b_at(Vec::Constant(1, u)); }

    Vec solve_L(const Vec& rhs) const { return lltL_.solve(rhs); }
    Vec solve_C(const Vec& rhs) const { return lltC_.solve(rhs); }
    const Eigen::LLT<Mat>& lltL() const { return lltL_; }
    const Eigen::LLT<Mat>& lltC() const { return lltC_; }

    /// Returns a copy with G replaced (used by load-step events; PSD re-checked).
    SwitchedRlcSystem with_load(Mat newG) const {
        if (!(newG.rows() == rho() && newG.cols() == rho() && is_psd(newG)))
            throw NonPsdResult("load change would make G indefinite or mis-sized");
        SwitchedRlcSystem out(*this);
        out.G_ = std::move(newG);
        return out;
    }

private:
    void check_u(const Vec& u) const {
        if (u.size() != switches()) throw DimensionError("duty vector size mismatch");
    }

    Mat L_, C_, R_, G_, Gamma0_;
    std::vector<Mat> dGamma_;
    Mat B0_;
    std::vector<Mat> dB_;
    Vec Vs_;
    Eigen::LLT<Mat> lltL_, lltC_;
};

}  // namespace bmsim
