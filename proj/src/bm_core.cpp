#include "bmsim/bm_core.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace bmsim {

namespace {

void check_state(Eigen::Index sigma, Eigen::Index rho, const CircuitState& s) {
    if (s.I.size() != sigma || s.V.size() != rho)
        throw DimensionError("circuit state dimension mismatch");
}

Real quad(const Mat& M, const Vec& x) { return x.dot(M * x); }

}  // namespace

Real mixed_potential(const RlcSystem& sys, const CircuitState& s) {
    check_state(sys.sigma(), sys.rho(), s);
    return s.I.dot(sys.Gamma() * s.V) + 0.5 * quad(sys.R(), s.I) - 0.5 * quad(sys.G(), s.V);
}

Real mixed_potential(const SwitchedRlcSystem& sys, const Vec& u, const CircuitState& s) {
    check_state(sys.sigma(), sys.rho(), s);
    return s.I.dot(sys.gamma_at(u) * s.V) + 0.5 * quad(sys.R(), s.I) - 0.5 * quad(sys.G(), s.V);
}

std::pair<Vec, Vec> grad_mixed_potential(const RlcSystem& sys, const CircuitState& s) {
    check_state(sys.sigma(), sys.rho(), s);
    return {sys.Gamma() * s.V + sys.R() * s.I, sys.Gamma().transpose() * s.I - sys.G() * s.V};
}

std::pair<Vec, Vec> grad_mixed_potential(const SwitchedRlcSystem& sys, const Vec& u,
                                         const CircuitState& s) {
    check_state(sys.sigma(), sys.rho(), s);
    const Mat gamma = sys.gamma_at(u);
    return {gamma * s.V + sys.R() * s.I, gamma.transpose() * s.I - sys.G() * s.V};
}

std::pair<Vec, Vec> rlc_dynamics(const RlcSystem& sys, const CircuitState& s, const Vec& us) {
    check_state(sys.sigma(), sys.rho(), s);
    if (us.size() != sys.inputs()) throw DimensionError("input dimension mismatch");
    Vec dI = -sys.solve_L(sys.Gamma() * s.V + sys.R() * s.I - sys.B() * us);
    Vec dV = sys.solve_C(sys.Gamma().transpose() * s.I - sys.G() * s.V);
    return {std::move(dI), std::move(dV)};
}

std::pair<Vec, Vec> srlc_dynamics(const SwitchedRlcSystem& sys, const CircuitState& s,
                                  const Vec& u) {
    check_state(sys.sigma(), sys.rho(), s);
    const Mat gamma = sys.gamma_at(u);
    Vec dI = -sys.solve_L(sys.R() * s.I + gamma * s.V - sys.b_at(u) * sys.Vs());
    Vec dV = sys.solve_C(gamma.transpose() * s.I - sys.G() * s.V);
    return {std::move(dI), std::move(dV)};
}

ExtendedState extended_rlc_dynamics(const RlcSystem& sys, const ExtendedState& e,
                                    const Vec& upsilon_s) {
    if (upsilon_s.size() != sys.inputs()) throw DimensionError("upsilon_s dimension mismatch");
    if (e.u.size() != sys.inputs()) throw DimensionError("u_s dimension mismatch");
    auto [dI, dV] = rlc_dynamics(sys, {e.I, e.V}, e.u);
    ExtendedState d;
    d.I = std::move(dI);
    d.V = std::move(dV);
    d.dI = -sys.solve_L(sys.Gamma() * e.dV + sys.R() * e.dI - sys.B() * upsilon_s);
    d.dV = sys.solve_C(sys.Gamma().transpose() * e.dI - sys.G() * e.dV);
    d.u = upsilon_s;
    return d;
}

ExtendedState extended_srlc_dynamics(const SwitchedRlcSystem& sys, const ExtendedState& e,
                                     const Vec& upsilon) {
    if (upsilon.size() != sys.switches()) throw DimensionError("upsilon dimension mismatch");
    if (e.u.size() != sys.switches()) throw DimensionError("duty dimension mismatch");
    auto [dI, dV] = srlc_dynamics(sys, {e.I, e.V}, e.u);
    const Mat gamma = sys.gamma_at(e.u);
    Vec rI = sys.R() * e.dI + gamma * e.dV;
    Vec rV = gamma.transpose() * e.dI - sys.G() * e.dV;
    for (Eigen::Index k = 0; k < sys.switches(); ++k) {
        rI += (sys.dGamma(k) * e.V - sys.dB(k) * sys.Vs()) * upsilon[k];
        rV += (sys.dGamma(k).transpose() * e.I) * upsilon[k];
    }
    ExtendedState d;
    d.I = std::move(dI);
    d.V = std::move(dV);
    d.dI = -sys.solve_L(rI);
    d.dV = sys.solve_C(rV);
    d.u = upsilon;
    return d;
}

Real energy_storage(const Mat& L, const Mat& C, const CircuitState& s) {
    return 0.5 * quad(L, s.I) + 0.5 * quad(C, s.V);
}
Real energy_storage(const RlcSystem& sys, const CircuitState& s) {
    check_state(sys.sigma(), sys.rho(), s);
    return energy_storage(sys.L(), sys.C(), s);
}
Real energy_storage(const SwitchedRlcSystem& sys, const CircuitState& s) {
    check_state(sys.sigma(), sys.rho(), s);
    return energy_storage(sys.L(), sys.C(), s);
}

Real krasovskii_storage(const Mat& L, const Mat& C, const Vec& dI, const Vec& dV) {
    return 0.5 * quad(L, dI) + 0.5 * quad(C, dV);
}
Real krasovskii_storage(const RlcSystem& sys, const Vec& dI, const Vec& dV) {
    return krasovskii_storage(sys.L(), sys.C(), dI, dV);
}
Real krasovskii_storage(const SwitchedRlcSystem& sys, const Vec& dI, const Vec& dV) {
    return krasovskii_storage(sys.L(), sys.C(), dI, dV);
}

Vec rlc_output(const RlcSystem& sys, const Vec& dI) {
    if (dI.size() != sys.sigma()) throw DimensionError("dI dimension mismatch");
    return sys.B().transpose() * dI;
}

Vec srlc_output(const SwitchedRlcSystem& sys, const CircuitState& s, const Vec& dI,
                const Vec& dV) {
    check_state(sys.sigma(), sys.rho(), s);
    Vec y(sys.switches());
    for (Eigen::Index k = 0; k < sys.switches(); ++k) {
        y[k] = dV.dot(sys.dGamma(k).transpose() * s.I) - dI.dot(sys.dGamma(k) * s.V) +
               dI.dot(sys.dB(k) * sys.Vs());
    }
    return y;
}

namespace {

/// Assembles [R Gamma; Gamma^T -G] and solves against [b; 0].
CircuitState solve_steady(const Mat& R, const Mat& G, const Mat& gamma, const Vec& b,
                          const char* what) {
    const Eigen::Index s = R.rows();
    const Eigen::Index r = G.rows();
    Mat A(s + r, s + r);
    A.topLeftCorner(s, s) = R;
    A.topRightCorner(s, r) = gamma;
    A.bottomLeftCorner(r, s) = gamma.transpose();
    A.bottomRightCorner(r, r) = -G;
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible()) throw SingularSystem(what);
    Vec rhs = Vec::Zero(s + r);
    rhs.head(s) = b;
    Vec x = lu.solve(rhs);
    CircuitState out{x.head(s), x.tail(r)};
    const Real resid = (A * x - rhs).norm();
    if (resid > 1e-9 * std::max<Real>(1.0, x.norm()))
        throw SingularSystem("steady-state solve did not reach the required residual");
    return out;
}

}  // namespace

CircuitState rlc_steady_state(const RlcSystem& sys, const Vec& us) {
    if (us.size() != sys.inputs()) throw DimensionError("input dimension mismatch");
    return solve_steady(sys.R(), sys.G(), sys.Gamma(), sys.B() * us,
                        "steady-state matrix A_s is rank deficient");
}

CircuitState srlc_steady_state(const SwitchedRlcSystem& sys, const Vec& u) {
    return solve_steady(sys.R(), sys.G(), sys.gamma_at(u), sys.b_at(u) * sys.Vs(),
                        "steady-state matrix A(u) is rank deficient");
}

CircuitState srlc_steady_state(const SwitchedRlcSystem& sys, Real u) {
    return srlc_steady_state(sys, Vec::Constant(1, u));
}

Setpoint srlc_feasible_input(const SwitchedRlcSystem& sys, Real vstar, Eigen::Index out_index) {
    require(sys.switches() == 1, "feasible-input search needs a single-switch system");
    if (out_index < 0 || out_index >= sys.rho()) throw DimensionError("bad output index");

    const Real delta = 1e-6;
    auto g = [&](Real u) -> Real {
        return srlc_steady_state(sys, u).V[out_index] - vstar;
    };

    constexpr int kGrid = 256;
    Real lo = delta, hi = 1.0 - delta;
    Real prev_u = lo, prev_g = g(lo);
    int sign_changes = 0;
    Real bl = 0, bh = 0, gl = 0;
    for (int i = 1; i <= kGrid; ++i) {
        const Real cur_u = lo + (hi - lo) * static_cast<Real>(i) / kGrid;
        const Real cur_g = g(cur_u);
        if (prev_g == 0.0 || prev_g * cur_g < 0.0) {
            ++sign_changes;
            if (sign_changes == 1) { bl = prev_u; bh = cur_u; gl = prev_g; }
        }
        prev_u = cur_u;
        prev_g = cur_g;
    }
    if (sign_changes == 0) throw NoFeasibleInput("no feasible duty cycle in (0,1)");
    if (sign_changes > 1)
        throw MultipleRoots("more than one candidate duty cycle in (0,1)");

    // Bisection, then Newton polish on the bracketed root.
    for (int it = 0; it < 80 && (bh - bl) > 1e-13; ++it) {
        const Real mid = 0.5 * (bl + bh);
        const Real gm = g(mid);
        if (gl * gm <= 0.0) bh = mid; else { bl = mid; gl = gm; }
    }
    Real u = 0.5 * (bl + bh);
    for (int it = 0; it < 4; ++it) {
        const Real h = 1e-7;
        const Real d = (g(u + h) - g(u - h)) / (2 * h);
        if (d == 0.0) break;
        const Real next = u - g(u) / d;
        if (next <= 0.0 || next >= 1.0) break;
        u = next;
    }
    if (std::abs(g(u)) > 1e-9 * std::max<Real>(1.0, std::abs(vstar)))
        throw NoFeasibleInput("root polish failed to reach tolerance");

    CircuitState ss = srlc_steady_state(sys, u);
    return Setpoint{ss.I, ss.V, Vec::Constant(1, u)};
}

std::string AssumptionReport::summary() const {
    std::ostringstream os;
    auto yn = [](bool b) { return b ? "yes" : "no"; };
    auto cs = [](TheoremCase c) {
        switch (c) {
            case TheoremCase::b_i: return "b-i";
            case TheoremCase::b_ii: return "b-ii";
            case TheoremCase::b_iii: return "b-iii";
            default: return "none";
        }
    };
    os << "L,C SPD: " << yn(lc_spd) << "; R,G PSD: " << yn(rg_psd)
       << "; R>0: " << yn(r_pd) << "; G>0: " << yn(g_pd)
       << "; Gamma full col rank: " << yn(gamma_full_column_rank)
       << "; Gamma^T full col rank: " << yn(gamma_t_full_column_rank)
       << "; steady matrix full rank: " << yn(steady_matrix_full_rank)
       << "; output-shaping case: " << cs(output_shaping_case)
       << "; input-shaping case: " << cs(input_shaping_case);
    if (assumption7_sampled) {
        os << "; assumption-7 at samples: "
           << (assumption7_pass_at_samples ? "pass" : "FAIL") << " (sampled only)";
    }
    if (!note.empty()) os << "; " << note;
    return os.str();
}

namespace {

TheoremCase output_case(bool r_pd, bool g_pd, bool gamma_t_rank) {
    if (r_pd && g_pd) return TheoremCase::b_i;
    if (g_pd && gamma_t_rank) return TheoremCase::b_ii;
    return TheoremCase::none;
}

TheoremCase input_case(bool r_pd, bool g_pd, bool gamma_rank, bool gamma_t_rank) {
    if (r_pd && g_pd) return TheoremCase::b_i;
    if (r_pd && gamma_rank) return TheoremCase::b_ii;
    if (g_pd && gamma_t_rank) return TheoremCase::b_iii;
    return TheoremCase::none;
}

}  // namespace

AssumptionReport verify_assumptions(const RlcSystem& sys) {
    AssumptionReport rep;
    rep.lc_spd = is_spd(sys.L()) && is_spd(sys.C());
    rep.rg_psd = is_psd(sys.R()) && is_psd(sys.G());
    rep.r_pd = is_pd(sys.R());
    rep.g_pd = is_pd(sys.G());
    rep.gamma_full_column_rank = has_full_column_rank(sys.Gamma());
    rep.gamma_t_full_column_rank = has_full_column_rank(sys.Gamma().transpose());
    const Eigen::Index s = sys.sigma(), r = sys.rho();
    Mat A(s + r, s + r);
    A.topLeftCorner(s, s) = sys.R();
    A.topRightCorner(s, r) = sys.Gamma();
    A.bottomLeftCorner(r, s) = sys.Gamma().transpose();
    A.bottomRightCorner(r, r) = -sys.G();
    rep.steady_matrix_full_rank = is_nonsingular(A);
    rep.output_shaping_case = output_case(rep.r_pd, rep.g_pd, rep.gamma_t_full_column_rank);
    rep.input_shaping_case =
        input_case(rep.r_pd, rep.g_pd, rep.gamma_full_column_rank, rep.gamma_t_full_column_rank);
    return rep;
}

AssumptionReport verify_assumptions(const SwitchedRlcSystem& sys,
                                    const std::vector<CircuitState>& samples,
                                    const std::optional<Vec>& ubar) {
    AssumptionReport rep;
    rep.lc_spd = is_spd(sys.L()) && is_spd(sys.C());
    rep.rg_psd = is_psd(sys.R()) && is_psd(sys.G());
    rep.r_pd = is_pd(sys.R());
    rep.g_pd = is_pd(sys.G());

    // Column ranks of Gamma(u) are checked at sampled duty values (and ubar).
    std::vector<Vec> u_samples;
    const Eigen::Index nsw = sys.switches();
    u_samples.push_back(Vec::Constant(nsw, 0.0));
    u_samples.push_back(Vec::Constant(nsw, 0.5));
    u_samples.push_back(Vec::Constant(nsw, 1.0));
    if (ubar) u_samples.push_back(*ubar);
    bool grank = true, gtrank = true;
    for (const auto& u : u_samples) {
        const Mat gamma = sys.gamma_at(u);
        grank = grank && has_full_column_rank(gamma);
        gtrank = gtrank && has_full_column_rank(gamma.transpose());
    }
    rep.gamma_full_column_rank = grank;
    rep.gamma_t_full_column_rank = gtrank;

    const Vec u_for_A = ubar ? *ubar : Vec::Constant(nsw, 0.5);
    const Eigen::Index s = sys.sigma(), r = sys.rho();
    Mat A(s + r, s + r);
    A.topLeftCorner(s, s) = sys.R();
    A.topRightCorner(s, r) = sys.gamma_at(u_for_A);
    A.bottomLeftCorner(r, s) = sys.gamma_at(u_for_A).transpose();
    A.bottomRightCorner(r, r) = -sys.G();
    rep.steady_matrix_full_rank = is_nonsingular(A);

    rep.output_shaping_case = output_case(rep.r_pd, rep.g_pd, rep.gamma_t_full_column_rank);
    rep.input_shaping_case =
        input_case(rep.r_pd, rep.g_pd, rep.gamma_full_column_rank, rep.gamma_t_full_column_rank);

    if (!samples.empty()) {
        rep.assumption7_sampled = true;
        rep.assumption7_min_norm.assign(static_cast<std::size_t>(nsw),
                                        std::numeric_limits<Real>::infinity());
        for (const auto& st : samples) {
            for (Eigen::Index k = 0; k < nsw; ++k) {
                Vec top = sys.dGamma(k) * st.V - sys.dB(k) * sys.Vs();
                Vec bot = sys.dGamma(k).transpose() * st.I;
                const Real n = std::max(top.cwiseAbs().maxCoeff(), bot.cwiseAbs().maxCoeff());
                auto& slot = rep.assumption7_min_norm[static_cast<std::size_t>(k)];
                slot = std::min(slot, n);
            }
        }
        for (Real n : rep.assumption7_min_norm)
            if (!(n > 0.0)) rep.assumption7_pass_at_samples = false;
        rep.note = "assumption-7 checked at " + std::to_string(samples.size()) +
                   " point(s): sampled only, the global claim is not decided";
    }
    return rep;
}

}  // namespace bmsim
