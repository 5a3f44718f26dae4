#include "bmsim/audit.hpp"

#include "bmsim/bm_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bmsim {

namespace {

constexpr std::size_t kNoRow = std::numeric_limits<std::size_t>::max();

struct SparseEntry {
    Eigen::Index r, c;
    Real v;
};

std::vector<SparseEntry> sparsify(const Mat& m) {
    std::vector<SparseEntry> out;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            if (m(r, c) != 0.0) out.push_back({r, c, m(r, c)});
    return out;
}

Real quad_form(const Mat& M, const Real* x) {
    Real acc = 0;
    const Eigen::Index n = M.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
        Real col = 0;
        for (Eigen::Index i = 0; i < n; ++i) col += x[i] * M(i, j);
        acc += col * x[j];
    }
    return acc;
}

struct Checks {
    bool passivity = true;
    bool lyapunov = true;
    bool dissipation = true;
    bool condition = true;
};

/// Order-independent accumulator (sums, maxima with smallest-row tie break):
/// serial and parallel scans agree bit for bit.
struct Accum {
    std::size_t pass_n = 0, lyap_n = 0, diss_n = 0, cond_n = 0, col_n = 0;
    Real pass_max = 0, lyap_max = 0, diss_max = 0;
    std::size_t pass_row = kNoRow, lyap_row = kNoRow, diss_row = kNoRow, cond_first = kNoRow,
                col_first = kNoRow;

    static void take_max(Real v, std::size_t row, Real& best, std::size_t& best_row) {
        if (v > best || (v == best && row < best_row)) {
            best = v;
            best_row = row;
        }
    }
    void merge(const Accum& o) {
        pass_n += o.pass_n;
        lyap_n += o.lyap_n;
        diss_n += o.diss_n;
        cond_n += o.cond_n;
        col_n += o.col_n;
        take_max(o.pass_max, o.pass_row, pass_max, pass_row);
        take_max(o.lyap_max, o.lyap_row, lyap_max, lyap_row);
        take_max(o.diss_max, o.diss_row, diss_max, diss_row);
        cond_first = std::min(cond_first, o.cond_first);
        col_first = std::min(col_first, o.col_first);
    }
};

/// Scalar controller parameters unpacked for the row kernels.
struct CtlEval {
    enum Kind { output_shaping, input_shaping, network } kind = input_shaping;
    const OutputShapingSrlcController* os = nullptr;
    const InputShapingSrlcController* is = nullptr;
    const NetworkInputShapingController* net = nullptr;

    explicit CtlEval(const SrlcController& c) {
        if ((os = std::get_if<OutputShapingSrlcController>(&c))) kind = output_shaping;
        else if ((is = std::get_if<InputShapingSrlcController>(&c))) kind = input_shaping;
        else {
            net = &std::get<NetworkInputShapingController>(c);
            kind = network;
        }
    }

    void rates(const Real* u, const Real* y, Real* ups, Eigen::Index nu, Real I0,
               Real V0) const {
        switch (kind) {
            case output_shaping: {
                const Real m = os->choice.m(I0, V0);
                const Real gamma = os->choice.has_gamma ? os->choice.gamma(I0, V0) : 0.0;
                ups[0] = m * (os->gains.mu - os->gains.ki * (gamma - os->gamma_star) -
                              os->gains.kd * (m * y[0]));
                break;
            }
            case input_shaping:
                ups[0] = (is->gains.mu - is->gains.ki * (u[0] - is->ubar) - y[0]) /
                         is->gains.kd;
                break;
            case network:
                for (Eigen::Index k = 0; k < nu; ++k)
                    ups[k] = -(net->ki[k] * (u[k] - net->ubar[k]) + y[k]) / net->kd[k];
                break;
        }
    }

    Real shaping(const Real* u, Eigen::Index nu, Real I0, Real V0) const {
        switch (kind) {
            case output_shaping: {
                const Real gamma = os->choice.has_gamma ? os->choice.gamma(I0, V0) : 0.0;
                const Real e = gamma - os->gamma_star;
                return 0.5 * os->gains.ki * e * e;
            }
            case input_shaping: {
                const Real e = u[0] - is->ubar;
                return 0.5 * is->gains.ki * e * e;
            }
            case network: {
                Real acc = 0;
                for (Eigen::Index k = 0; k < nu; ++k) {
                    const Real e = u[k] - net->ubar[k];
                    acc += net->ki[k] * e * e;
                }
                return 0.5 * acc;
            }
        }
        return 0;
    }

};

/// One segment of the trajectory with its own system. The row at a segment
/// boundary stores pre-event values; the segment that starts there re-derives
/// dI, dV (and everything downstream) under the post-event system.
struct SegmentData {
    const SwitchedRlcSystem* sys = nullptr;
    std::size_t first = 0, last = 0;
    std::vector<std::vector<SparseEntry>> dG;
    std::vector<Vec> dbvs;
    Real cond_tol = 0;
    bool has_override = false;
    Vec o_dI, o_dV;

    const Real* dI_at(const Trajectory& tr, std::size_t k) const {
        if (has_override && k == first) return o_dI.data();
        return &tr.dI[k * static_cast<std::size_t>(tr.sigma)];
    }
    const Real* dV_at(const Trajectory& tr, std::size_t k) const {
        if (has_override && k == first) return o_dV.data();
        return &tr.dV[k * static_cast<std::size_t>(tr.rho)];
    }
};

/// Recomputed per-row values: the audits never trust the derived columns of
/// the trajectory; they re-derive S, S_d and the supply from the state columns
/// and flag rows whose stored values disagree.
struct Derived {
    std::vector<Real> S, Sd, supply, diss;
};

void derive_rows(const Trajectory& tr, const AuditContext& ctx, const SegmentData& sd,
                 const CtlEval& ctl, bool check_columns, Exec exec, Derived& out, Accum& acc) {
    const std::size_t first = sd.first, last = sd.last;
    const Eigen::Index sigma = tr.sigma, rho = tr.rho, nu = tr.nu;
    const Mat& L = sd.sys->L();
    const Mat& C = sd.sys->C();
    const Mat& R = sd.sys->R();
    const Mat& G = sd.sys->G();
    out.S.assign(last - first + 1, 0.0);
    out.Sd.assign(last - first + 1, 0.0);
    out.supply.assign(last - first + 1, 0.0);
    out.diss.assign(last - first + 1, 0.0);

    auto row_body = [&](std::size_t k, Accum& a, Vec& y, Vec& ups) {
        const Real* Iv = &tr.I[k * static_cast<std::size_t>(sigma)];
        const Real* Vv = &tr.V[k * static_cast<std::size_t>(rho)];
        const Real* uv = &tr.u[k * static_cast<std::size_t>(nu)];
        const Real* dIv = sd.dI_at(tr, k);
        const Real* dVv = sd.dV_at(tr, k);

        for (Eigen::Index ch = 0; ch < nu; ++ch) {
            Real yk = 0;
            const Vec& db = sd.dbvs[static_cast<std::size_t>(ch)];
            for (Eigen::Index r = 0; r < sigma; ++r) yk += dIv[r] * db[r];
            for (const auto& en : sd.dG[static_cast<std::size_t>(ch)])
                yk += en.v * (dVv[en.c] * Iv[en.r] - dIv[en.r] * Vv[en.c]);
            y[ch] = yk;
        }
        ctl.rates(uv, y.data(), ups.data(), nu, Iv[0], Vv[0]);

        const std::size_t i = k - first;
        const Real S = 0.5 * (quad_form(L, dIv) + quad_form(C, dVv));
        out.S[i] = S;
        out.Sd[i] = S + ctl.shaping(uv, nu, Iv[0], Vv[0]);
        out.supply[i] = ups.dot(y);
        out.diss[i] = quad_form(R, dIv) + quad_form(G, dVv);

        if (check_columns && !(sd.has_override && k == first)) {
            const Real mism = std::max({std::abs(tr.S[k] - out.S[i]) /
                                            std::max<Real>(1.0, std::abs(out.S[i])),
                                        std::abs(tr.Sd[k] - out.Sd[i]) /
                                            std::max<Real>(1.0, std::abs(out.Sd[i])),
                                        std::abs(tr.supply[k] - out.supply[i]) /
                                            std::max<Real>(1.0, std::abs(out.supply[i]))});
            if (mism > 1e-9) {
                ++a.col_n;
                a.col_first = std::min(a.col_first, k);
            }
        }
    };

    Accum total;
#ifdef _OPENMP
    if (exec == Exec::parallel) {
        std::vector<Accum> parts(static_cast<std::size_t>(omp_get_max_threads()));
        const auto lo = static_cast<std::int64_t>(first);
        const auto hi = static_cast<std::int64_t>(last);
#pragma omp parallel
        {
            Vec y(nu), ups(nu);
            auto& mine = parts[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
            for (std::int64_t k = lo; k <= hi; ++k)
                row_body(static_cast<std::size_t>(k), mine, y, ups);
        }
        for (const auto& p : parts) total.merge(p);
    } else
#endif
    {
        (void)exec;
        Vec y(nu), ups(nu);
        for (std::size_t k = first; k <= last; ++k) row_body(k, total, y, ups);
    }
    acc.merge(total);
}

void scan_segment(const Trajectory& tr, const AuditContext& ctx, const SegmentData& sd,
                  const CtlEval& ctl, const Derived& d, const Checks& ck, Exec exec,
                  SegmentAudit& out, Accum& acc) {
    const std::size_t first = sd.first, last = sd.last;
    const Real h = tr.dt;
    const Eigen::Index sigma = tr.sigma, rho = tr.rho, nu = tr.nu;

    auto step_body = [&](std::size_t k, Accum& a, Vec& top, Vec& bot) {
        // Assumption-7 / Theorem-2 condition monitor at row k (informational).
        if (ck.condition && nu > 0) {
            const Real* Iv = &tr.I[k * static_cast<std::size_t>(sigma)];
            const Real* Vv = &tr.V[k * static_cast<std::size_t>(rho)];
            for (Eigen::Index ch = 0; ch < nu; ++ch) {
                top = -sd.dbvs[static_cast<std::size_t>(ch)];
                bot.setZero();
                for (const auto& en : sd.dG[static_cast<std::size_t>(ch)]) {
                    top[en.r] += en.v * Vv[en.c];
                    bot[en.c] += en.v * Iv[en.r];
                }
                const Real mx = std::max(top.cwiseAbs().maxCoeff(), bot.cwiseAbs().maxCoeff());
                if (mx < sd.cond_tol) {
                    ++a.cond_n;
                    a.cond_first = std::min(a.cond_first, k);
                    break;
                }
            }
        }
        if (k >= last) return;

        const std::size_t i = k - first;
        const Real S0 = d.S[i];
        if (ck.passivity && k + 2 <= last) {
            // S(k+2) - S(k) <= int(supply) + eps over the window [k, k+2];
            // Simpson keeps the quadrature error below the 1e-6 epsilon floor
            // through steep startup and post-event transients.
            const Real sup =
                (h / 3.0) * (d.supply[i] + 4.0 * d.supply[i + 1] + d.supply[i + 2]);
            const Real eps = ctx.eps_rel * std::max<Real>(1.0, std::abs(S0));
            const Real excess = (d.S[i + 2] - S0) - sup - eps;
            if (excess > 0) {
                ++a.pass_n;
                Accum::take_max(excess, k, a.pass_max, a.pass_row);
            }
        }
        if (ck.lyapunov) {
            const Real dSd = d.Sd[i + 1] - d.Sd[i];
            Real port_int = 0;
            if (ctx.mu != 0.0) {
                // The mu-port is m*y for output shaping, du for input shaping.
                auto port_at = [&](std::size_t kk) {
                    ExtendedState e;
                    e.I = tr.I_row(kk);
                    e.V = tr.V_row(kk);
                    e.dI = Eigen::Map<const Vec>(sd.dI_at(tr, kk), sigma);
                    e.dV = Eigen::Map<const Vec>(sd.dV_at(tr, kk), rho);
                    e.u = tr.u_row(kk);
                    if (ctl.kind == CtlEval::output_shaping) {
                        const Real m = ctl.os->choice.m(e.I[0], e.V[0]);
                        return m * srlc_output(*sd.sys, {e.I, e.V}, e.dI, e.dV)[0];
                    }
                    return controller_rate(ctx.controller, *sd.sys, e).sum();
                };
                port_int = 0.5 * ctx.mu * (port_at(k) + port_at(k + 1)) * h;
            }
            const Real eps = ctx.eps_rel * std::max<Real>(1.0, std::abs(d.Sd[i]));
            const Real excess = dSd - port_int - eps;
            if (excess > 0) {
                ++a.lyap_n;
                Accum::take_max(excess, k, a.lyap_max, a.lyap_row);
            }
        }
        if (ck.dissipation && k + 2 <= last) {
            // dS/dt = -dI'R dI - dV'G dV + supply over [k, k+2] with Simpson
            // quadrature (trapezoid cannot resolve the fastest decaying modes
            // at the stated 1e-5 relative tolerance).
            auto g = [&](std::size_t j) { return d.supply[j] - d.diss[j]; };
            const Real lhs2 = d.S[i + 2] - S0;
            const Real rhs2 = (h / 3.0) * (g(i) + 4.0 * g(i + 1) + g(i + 2));
            const Real resid = std::abs(lhs2 - rhs2);
            const Real scale = std::max(
                {std::abs(lhs2), std::abs(rhs2), 1e-6 * std::max<Real>(1.0, std::abs(S0))});
            const Real rel = resid / scale;
            if (rel > ctx.diss_rel) {
                ++a.diss_n;
                Accum::take_max(rel, k, a.diss_max, a.diss_row);
            }
        }
    };

    Accum total;
#ifdef _OPENMP
    if (exec == Exec::parallel) {
        std::vector<Accum> parts(static_cast<std::size_t>(omp_get_max_threads()));
        const auto lo = static_cast<std::int64_t>(first);
        const auto hi = static_cast<std::int64_t>(last);
#pragma omp parallel
        {
            Vec top(sigma), bot(rho);
            auto& mine = parts[static_cast<std::size_t>(omp_get_thread_num())];
#pragma omp for schedule(static)
            for (std::int64_t k = lo; k <= hi; ++k)
                step_body(static_cast<std::size_t>(k), mine, top, bot);
        }
        for (const auto& p : parts) total.merge(p);
    } else
#endif
    {
        Vec top(sigma), bot(rho);
        for (std::size_t k = first; k <= last; ++k) step_body(k, total, top, bot);
    }
    acc.merge(total);

    // Convergence against the declared target (serial reverse scan).
    std::size_t last_out = kNoRow;
    for (std::size_t k = first; k <= last; ++k) {
        Real dev = 0;
        const Real* Vv = &tr.V[k * static_cast<std::size_t>(rho)];
        for (Eigen::Index j = 0; j < rho; ++j)
            dev = std::max(dev, std::abs(Vv[j] - out.target[j]));
        if (dev > out.band) last_out = k;
    }
    if (last_out == kNoRow) {
        out.converged = true;
        out.convergence_time = tr.t[first];
    } else if (last_out < last) {
        out.converged = true;
        out.convergence_time = tr.t[last_out + 1];
    } else {
        out.converged = false;
        out.convergence_time = -1;
    }

    const std::size_t len = last - first + 1;
    const std::size_t tail = std::max<std::size_t>(1, len / 10);
    Real tail_min = std::numeric_limits<Real>::infinity();
    for (std::size_t k = last + 1 - tail; k <= last; ++k)
        tail_min = std::min(tail_min, d.S[k - first]);
    out.tail_min_storage = tail_min;
}

AuditReport run_checked(const Trajectory& tr, const AuditContext& ctx, const Checks& ck,
                        Exec exec) {
    if (tr.rows() < 2) throw InvalidParams("trajectory too short to audit");
    const std::size_t nseg = ctx.systems.size();
    require(nseg == ctx.boundaries.size() + 1, "audit context segment mismatch");
    require(ctx.segments.size() == nseg, "audit segment specs mismatch");

    AuditReport rep;
    rep.method = ctx.method;
    rep.saturation_count = tr.saturation_count;
    rep.first_saturation_time = tr.first_saturation_time;
    rep.segments.resize(nseg);
    const CtlEval ctl(ctx.controller);

    for (std::size_t s = 0; s < nseg; ++s) {
        SegmentData sd;
        sd.sys = &ctx.systems[s];
        sd.first = s == 0 ? 0 : ctx.boundaries[s - 1];
        sd.last = s + 1 < nseg ? ctx.boundaries[s] : tr.rows() - 1;
        require(sd.first < sd.last, "empty audit segment");
        require(sd.sys->sigma() == tr.sigma && sd.sys->rho() == tr.rho &&
                    sd.sys->switches() == tr.nu,
                "audit system does not match the trajectory layout");
        for (Eigen::Index k = 0; k < sd.sys->switches(); ++k) {
            sd.dG.push_back(sparsify(sd.sys->dGamma(k)));
            sd.dbvs.push_back(sd.sys->dB(k) * sd.sys->Vs());
        }
        sd.cond_tol = 1e-9 * std::max<Real>(1.0, sd.sys->Vs().cwiseAbs().maxCoeff());
        if (s > 0) {
            const std::size_t b = sd.first;
            auto [dI0, dV0] =
                srlc_dynamics(*sd.sys, {tr.I_row(b), tr.V_row(b)}, tr.u_row(b));
            sd.has_override = true;
            sd.o_dI = std::move(dI0);
            sd.o_dV = std::move(dV0);
        }

        auto& seg = rep.segments[s];
        seg.first_row = sd.first;
        seg.last_row = sd.last;
        seg.target = ctx.segments[s].expected_voltage;
        seg.band = ctx.segments[s].band;
        require(seg.target.size() == tr.rho, "audit target dimension mismatch");

        Accum acc;
        Derived derived;
        derive_rows(tr, ctx, sd, ctl, ck.passivity || ck.lyapunov, exec, derived, acc);
        scan_segment(tr, ctx, sd, ctl, derived, ck, exec, seg, acc);

        seg.passivity_violations = acc.pass_n;
        seg.max_passivity_violation = acc.pass_max;
        seg.t_worst_passivity = acc.pass_row == kNoRow ? -1 : tr.t[acc.pass_row];
        seg.lyapunov_violations = acc.lyap_n;
        seg.max_lyapunov_increase = acc.lyap_max;
        seg.t_worst_lyapunov = acc.lyap_row == kNoRow ? -1 : tr.t[acc.lyap_row];
        seg.dissipation_violations = acc.diss_n;
        seg.max_dissipation_rel_err = acc.diss_max;
        seg.t_worst_dissipation = acc.diss_row == kNoRow ? -1 : tr.t[acc.diss_row];
        seg.condition_flags = acc.cond_n;
        seg.first_condition_flag_time = acc.cond_first == kNoRow ? -1 : tr.t[acc.cond_first];
        seg.column_mismatches = acc.col_n;
        seg.first_column_mismatch_time = acc.col_first == kNoRow ? -1 : tr.t[acc.col_first];

        if (ctx.segments[s].settle_within) {
            seg.deadline_met = seg.converged &&
                               (seg.convergence_time - tr.t[sd.first]) <=
                                   *ctx.segments[s].settle_within + 1e-12;
        } else {
            seg.deadline_met = seg.converged;
        }
    }
    return rep;
}

}  // namespace

AuditContext make_audit_context(const Scenario& sc, const Trajectory& traj) {
    AuditContext ctx;
    ctx.systems = segment_systems(sc);
    // Boundaries come from the declared events, not from trajectory metadata,
    // so an offline audit of a parsed CSV behaves exactly like the in-run one.
    for (std::size_t i = 0; i < sc.events.size(); ++i) {
        if (i > 0 && sc.events[i].time == sc.events[i - 1].time) continue;
        const auto row = static_cast<std::size_t>(std::llround(sc.events[i].time / traj.dt));
        if (std::abs(static_cast<Real>(row) * traj.dt - sc.events[i].time) >
                1e-9 * std::max<Real>(1.0, sc.events[i].time) ||
            row == 0 || row + 1 >= traj.rows())
            throw SchemaMismatch("event time does not match the trajectory grid");
        ctx.boundaries.push_back(row);
    }
    ctx.controller = sc.controller;
    ctx.method = std::holds_alternative<OutputShapingSrlcController>(sc.controller)
                     ? "output_shaping"
                     : "input_shaping";
    if (const auto* os = std::get_if<OutputShapingSrlcController>(&sc.controller))
        ctx.mu = os->gains.mu;
    else if (const auto* is = std::get_if<InputShapingSrlcController>(&sc.controller))
        ctx.mu = is->gains.mu;
    if (!sc.audit_segments.empty()) {
        ctx.segments = sc.audit_segments;
    } else {
        AuditSegmentSpec def;
        def.expected_voltage = sc.setpoint.Vstar;
        def.band = 0.5;
        ctx.segments.assign(ctx.systems.size(), def);
    }
    require(ctx.segments.size() == ctx.systems.size(),
            "audit segment specs must match the number of segments");
    return ctx;
}

bool AuditReport::audits_pass() const {
    for (const auto& s : segments)
        if (s.passivity_violations || s.lyapunov_violations || s.dissipation_violations ||
            s.column_mismatches)
            return false;
    return true;
}

bool AuditReport::converged() const {
    for (const auto& s : segments)
        if (!s.converged || !s.deadline_met) return false;
    return true;
}

std::string AuditReport::format() const {
    std::ostringstream os;
    os.precision(6);
    os << "audit report (" << method << ", " << segments.size() << " segment(s))\n";
    std::size_t total = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        total += s.passivity_violations + s.lyapunov_violations + s.dissipation_violations +
                 s.column_mismatches;
        os << "segment " << i + 1 << ": rows " << s.first_row << ".." << s.last_row << "\n";
        os << "  passivity:   " << s.passivity_violations << " violations";
        if (s.passivity_violations)
            os << " (max excess " << s.max_passivity_violation << " at t="
               << s.t_worst_passivity << ")";
        os << "\n";
        os << "  shaped storage: " << s.lyapunov_violations << " violations";
        if (s.lyapunov_violations)
            os << " (max increase " << s.max_lyapunov_increase << " at t="
               << s.t_worst_lyapunov << ")";
        os << "\n";
        os << "  dissipation identity: " << s.dissipation_violations << " violations";
        if (s.dissipation_violations)
            os << " (max rel err " << s.max_dissipation_rel_err << " at t="
               << s.t_worst_dissipation << ")";
        os << "\n";
        if (s.column_mismatches)
            os << "  column consistency: " << s.column_mismatches
               << " row(s) disagree with the state columns, first at t="
               << s.first_column_mismatch_time << "\n";
        if (s.condition_flags)
            os << "  note: control-direction vector vanished at " << s.condition_flags
               << " sample(s), first at t=" << s.first_condition_flag_time
               << " (informational)\n";
        os << "  convergence: ";
        if (s.converged) {
            os << "reached " << s.target.transpose().eval() << " +/- " << s.band << " V at t="
               << s.convergence_time << (s.deadline_met ? "" : " (deadline missed)") << "\n";
        } else {
            os << "NOT within " << s.band << " V of " << s.target.transpose().eval()
               << " by segment end\n";
        }
        os << "  tail min storage: " << s.tail_min_storage << "\n";
    }
    if (saturation_count)
        os << "duty saturation events: " << saturation_count << ", first at t="
           << first_saturation_time << "\n";
    os << "total: " << total << " violations\n";
    os << (audits_pass() ? "audits: PASS" : "audits: FAIL") << "\n";
    os << (converged() ? "convergence: PASS" : "convergence: FAIL") << "\n";
    return os.str();
}

AuditReport run_audits(const Trajectory& traj, const AuditContext& ctx, Exec exec) {
    return run_checked(traj, ctx, Checks{}, exec);
}

AuditReport passivity_audit(const Trajectory& traj, const AuditContext& ctx, Exec exec) {
    Checks ck;
    ck.lyapunov = false;
    return run_checked(traj, ctx, ck, exec);
}

AuditReport lyapunov_audit(const Trajectory& traj, const AuditContext& ctx, Exec exec) {
    Checks ck;
    ck.passivity = false;
    ck.dissipation = false;
    ck.condition = false;
    return run_checked(traj, ctx, ck, exec);
}

}  // namespace bmsim
