#include "bmsim/converters.hpp"

#include "bmsim/bm_core.hpp"

#include <cmath>

namespace bmsim {

std::string to_string(ConverterKind k) {
    switch (k) {
        case ConverterKind::buck: return "buck";
        case ConverterKind::boost: return "boost";
        case ConverterKind::buckboost: return "buckboost";
        case ConverterKind::cuk: return "cuk";
    }
    return "?";
}

ConverterKind converter_kind_from_string(const std::string& name) {
    if (name == "buck") return ConverterKind::buck;
    if (name == "boost") return ConverterKind::boost;
    if (name == "buckboost") return ConverterKind::buckboost;
    if (name == "cuk") return ConverterKind::cuk;
    throw InvalidParams("unknown converter kind: " + name);
}

namespace {

Mat m1(Real v) { return Mat::Constant(1, 1, v); }

void check_common(const ConverterParams& p) {
    require(p.L > 0 && p.C > 0, "inductance and capacitance must be positive");
    require(p.G >= 0, "load conductance must be nonnegative");
    require(p.Vs != 0, "source voltage must be nonzero");
    if (p.kind == ConverterKind::cuk)
        require(p.L2 > 0 && p.C2 > 0, "Cuk needs positive L2 and C2");
}

}  // namespace

SwitchedRlcSystem make_converter(const ConverterParams& p) {
    check_common(p);
    const Vec vs = Vec::Constant(1, p.Vs);
    switch (p.kind) {
        case ConverterKind::buck:
            // -L dI = V - u Vs
            return SwitchedRlcSystem(m1(p.L), m1(p.C), m1(0.0), m1(p.G),
                                     m1(1.0), m1(1.0), m1(0.0), m1(1.0), vs);
        case ConverterKind::boost:
            // -L dI = (1-u) V - Vs
            return SwitchedRlcSystem(m1(p.L), m1(p.C), m1(0.0), m1(p.G),
                                     m1(1.0), m1(0.0), m1(1.0), m1(1.0), vs);
        case ConverterKind::buckboost:
            // -L dI = (1-u) V - u Vs
            return SwitchedRlcSystem(m1(p.L), m1(p.C), m1(0.0), m1(p.G),
                                     m1(1.0), m1(0.0), m1(0.0), m1(1.0), vs);
        case ConverterKind::cuk: {
            // -L1 dI1 = (1-u) V1 - Vs      -L2 dI2 = u V1 + V2
            //  C1 dV1 = (1-u) I1 + u I2     C2 dV2 = I2 - G V2
            Mat L = Eigen::Vector2d(p.L, p.L2).asDiagonal();
            Mat C = Eigen::Vector2d(p.C, p.C2).asDiagonal();
            Mat R = Mat::Zero(2, 2);
            Mat G = Mat::Zero(2, 2);
            G(1, 1) = p.G;
            Mat G0(2, 2), G1(2, 2);
            G0 << 1, 0, 0, 1;
            G1 << 0, 0, 1, 1;
            Mat B01(2, 1);
            B01 << 1, 0;
            return SwitchedRlcSystem(L, C, R, G, G0, G1, B01, B01, vs);
        }
    }
    throw InvalidParams("unreachable converter kind");
}

Setpoint converter_setpoint(const ConverterParams& p, Real vstar) {
    check_common(p);
    Setpoint sp;
    switch (p.kind) {
        case ConverterKind::buck: {
            const Real ub = vstar / p.Vs;
            if (!(ub > 0 && ub < 1)) throw NoFeasibleInput("buck needs 0 < Vstar < Vs");
            sp.ubar = Vec::Constant(1, ub);
            sp.Vstar = Vec::Constant(1, vstar);
            sp.Ibar = Vec::Constant(1, p.G * vstar);
            break;
        }
        case ConverterKind::boost: {
            const Real ub = 1.0 - p.Vs / vstar;
            if (!(ub > 0 && ub < 1)) throw NoFeasibleInput("boost needs Vstar > Vs > 0");
            sp.ubar = Vec::Constant(1, ub);
            sp.Vstar = Vec::Constant(1, vstar);
            sp.Ibar = Vec::Constant(1, p.G * vstar * vstar / p.Vs);
            break;
        }
        case ConverterKind::buckboost: {
            // (1-u) Vstar = u Vs  and  (1-u) Ibar = G Vstar
            const Real ub = vstar / (vstar + p.Vs);
            if (!(ub > 0 && ub < 1))
                throw NoFeasibleInput("buck-boost needs Vstar and Vs of the same sign");
            sp.ubar = Vec::Constant(1, ub);
            sp.Vstar = Vec::Constant(1, vstar);
            sp.Ibar = Vec::Constant(1, p.G * vstar * (vstar + p.Vs) / p.Vs);
            break;
        }
        case ConverterKind::cuk: {
            // Polarity-inverting topology: V2 = -u Vs / (1-u) < 0 for u in (0,1).
            if (!(vstar * p.Vs < 0))
                throw NoFeasibleInput(
                    "Cuk output is polarity inverting: V2star must have the opposite sign "
                    "of Vs (steady state V2 = -u Vs/(1-u))");
            const Real ub = vstar / (vstar - p.Vs);
            if (!(ub > 0 && ub < 1)) throw NoFeasibleInput("no interior duty for this V2star");
            const Real v1 = p.Vs / (1.0 - ub);
            const Real i2 = p.G * vstar;
            const Real i1 = -ub * i2 / (1.0 - ub);
            sp.ubar = Vec::Constant(1, ub);
            sp.Vstar = Eigen::Vector2d(v1, vstar);
            sp.Ibar = Eigen::Vector2d(i1, i2);
            break;
        }
    }

    // The closed forms must sit on the dynamics to 1e-9.
    const SwitchedRlcSystem sys = make_converter(p);
    auto [dI, dV] = srlc_dynamics(sys, {sp.Ibar, sp.Vstar}, sp.ubar);
    const Real resid = std::max(dI.cwiseAbs().maxCoeff(), dV.cwiseAbs().maxCoeff());
    const Real scale = std::max<Real>(1.0, std::abs(vstar));
    if (resid > 1e-9 * scale)
        throw InvalidParams("converter setpoint residual exceeds tolerance");
    return sp;
}

namespace {

void need_nonzero(Real x, const char* what) {
    if (x == 0.0) throw DomainError(std::string("gamma choice domain: ") + what);
}

}  // namespace

std::vector<GammaChoice> boost_gamma_catalogue() {
    std::vector<GammaChoice> rows;
    rows.push_back({"identity", [](Real, Real) { return 1.0; }, {}, false});
    rows.push_back({"inv_V2",
                    [](Real, Real V) {
                        need_nonzero(V, "V must be nonzero for m=1/V^2");
                        return 1.0 / (V * V);
                    },
                    [](Real I, Real V) {
                        need_nonzero(V, "V must be nonzero for gamma=I/V");
                        return I / V;
                    },
                    true});
    rows.push_back({"inv_I2",
                    [](Real I, Real) {
                        need_nonzero(I, "I must be nonzero for m=1/I^2");
                        return 1.0 / (I * I);
                    },
                    [](Real I, Real V) {
                        need_nonzero(I, "I must be nonzero for gamma=-V/I");
                        return -V / I;
                    },
                    true});
    rows.push_back({"inv_norm2",
                    [](Real I, Real V) {
                        const Real n = V * V + I * I;
                        need_nonzero(n, "(I,V) must be nonzero for m=1/(V^2+I^2)");
                        return 1.0 / n;
                    },
                    [](Real I, Real V) {
                        need_nonzero(V, "V must be nonzero for gamma=atan(I/V)");
                        return std::atan(I / V);
                    },
                    true});
    rows.push_back({"inv_IV",
                    [](Real I, Real V) {
                        need_nonzero(I * V, "I*V must be nonzero for m=1/(IV)");
                        return 1.0 / (I * V);
                    },
                    [](Real I, Real V) {
                        if (!(I / V > 0)) throw DomainError("gamma=ln(I/V) needs I/V > 0");
                        return std::log(I / V);
                    },
                    true});
    return rows;
}

GammaChoice buck_gamma_scaled(Real Vs, Real scale) {
    require(Vs != 0, "buck gamma choices need a nonzero source voltage");
    require(scale != 0, "the integrating factor must be nonzero");
    return {"identity", [scale](Real, Real) { return scale; },
            [Vs, scale](Real I, Real) { return scale * I * Vs; }, true};
}

std::vector<GammaChoice> buck_gamma_catalogue(Real Vs) {
    // Any nonzero constant is an integrating factor for the buck output
    // y = dI*Vs; the named row is m = 1 and gamma_choice rescales it.
    return {buck_gamma_scaled(Vs, 1.0)};
}

GammaChoice gamma_choice(const ConverterParams& p, const std::string& name, Real scale) {
    require(scale != 0, "the integrating factor scale must be nonzero");
    std::vector<GammaChoice> rows;
    switch (p.kind) {
        case ConverterKind::buck: rows = buck_gamma_catalogue(p.Vs); break;
        case ConverterKind::boost: rows = boost_gamma_catalogue(); break;
        default:
            throw InvalidParams("no gamma catalogue for " + to_string(p.kind) +
                                " (output shaping presets cover buck and boost)");
    }
    for (auto& r : rows) {
        if (r.name != name) continue;
        if (scale == 1.0) return r;
        // If gamma' = s*gamma and m' = s*m then d(gamma')/dt = m'*y still
        // holds; the scale tunes the shaped loop without touching the gains.
        if (!r.has_gamma)
            throw InvalidParams("the identity boost row cannot be rescaled usefully");
        GammaChoice scaled = r;
        auto m0 = r.m;
        auto g0 = r.gamma;
        scaled.m = [m0, scale](Real I, Real V) { return scale * m0(I, V); };
        scaled.gamma = [g0, scale](Real I, Real V) { return scale * g0(I, V); };
        return scaled;
    }
    throw InvalidParams("unknown gamma choice '" + name + "' for " + to_string(p.kind));
}

}  // namespace bmsim
