#include <catch2/catch_amalgamated.hpp>

#include "bmsim/bm_core.hpp"
#include "bmsim/converters.hpp"
#include "test_helpers.hpp"

using namespace bmsim;
using Catch::Approx;
namespace bt = bmsim::testing;

namespace {

Vec v1(Real x) { return Vec::Constant(1, x); }

ConverterParams buck_fig5() {
    return {ConverterKind::buck, 1e-3, 1e-3, 0.04, 400.0};
}
ConverterParams boost_fig7() {
    return {ConverterKind::boost, 1.12e-3, 6.8e-3, 0.04, 280.0};
}

}  // namespace

TEST_CASE("mixed potential of the buck at the operating point") {
    auto sys = make_converter(buck_fig5());
    CircuitState s{v1(15.2), v1(380.0)};
    // 15.2*380 - 0.5*0.04*380^2 = 2888 W
    CHECK(mixed_potential(sys, v1(0.95), s) == Approx(2888.0).epsilon(1e-12));
    CHECK(mixed_potential(sys, v1(0.0), {v1(0.0), v1(0.0)}) == 0.0);
}

TEST_CASE("mixed potential of the boost with the switch closed") {
    auto sys = make_converter(boost_fig7());
    ConverterParams p = boost_fig7();
    p.G = 0.04;
    CircuitState s{v1(7.0), v1(380.0)};
    // Gamma(1) = 0 kills the cross term: P = -0.5*0.04*380^2
    CHECK(mixed_potential(sys, v1(1.0), s) == Approx(-2888.0).epsilon(1e-12));
}

TEST_CASE("gradient of the mixed potential at the buck equilibrium") {
    auto sys = make_converter(buck_fig5());
    auto [gi, gv] = grad_mixed_potential(sys, v1(0.95), {v1(15.2), v1(380.0)});
    CHECK(gi[0] == Approx(380.0));
    CHECK(gv[0] == Approx(0.0).margin(1e-12));
    auto [zi, zv] = grad_mixed_potential(sys, v1(0.5), {v1(0.0), v1(0.0)});
    CHECK(zi[0] == 0.0);
    CHECK(zv[0] == 0.0);
}

TEST_CASE("analytic gradient matches central differences on random systems") {
    bt::Rng rng(12345);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index sigma = 1 + trial % 4;
        const Eigen::Index rho = 1 + (trial / 2) % 3;
        auto sys = bt::random_srlc(rng, sigma, rho);
        const Vec u = v1(std::uniform_real_distribution<Real>(0, 1)(rng));
        const Vec I = bt::random_vector(rng, sigma, 2.0);
        const Vec V = bt::random_vector(rng, rho, 2.0);
        auto [gi, gv] = grad_mixed_potential(sys, u, {I, V});
        const Real h = 1e-5;
        for (Eigen::Index j = 0; j < sigma; ++j) {
            Vec ip = I, im = I;
            ip[j] += h;
            im[j] -= h;
            const Real fd = (mixed_potential(sys, u, {ip, V}) -
                             mixed_potential(sys, u, {im, V})) /
                            (2 * h);
            CHECK(gi[j] == Approx(fd).epsilon(1e-6).margin(1e-9));
        }
        for (Eigen::Index j = 0; j < rho; ++j) {
            Vec vp = V, vm = V;
            vp[j] += h;
            vm[j] -= h;
            const Real fd = (mixed_potential(sys, u, {I, vp}) -
                             mixed_potential(sys, u, {I, vm})) /
                            (2 * h);
            CHECK(gv[j] == Approx(fd).epsilon(1e-6).margin(1e-9));
        }
    }
}

TEST_CASE("series RL dynamics by hand") {
    // Gamma=1, rho=1, L=C=R=G=B=1
    RlcSystem sys(Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1),
                  Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1));
    auto [di, dv] = rlc_dynamics(sys, {v1(1.0), v1(0.0)}, v1(0.0));
    CHECK(di[0] == Approx(-1.0));
    CHECK(dv[0] == Approx(1.0));

    SECTION("input enters affinely through L^-1 B") {
        auto [di2, dv2] = rlc_dynamics(sys, {v1(1.0), v1(0.0)}, v1(0.7));
        CHECK(di2[0] - di[0] == Approx(0.7));
        CHECK(dv2[0] == dv[0]);
    }

    SECTION("extended dynamics by hand") {
        ExtendedState e{v1(1.0), v1(0.0), v1(-1.0), v1(1.0), v1(0.0)};
        ExtendedState d = extended_rlc_dynamics(sys, e, v1(0.0));
        // ddI = -(Gamma dV + R dI) = -(1 - 1) = 0 ; ddV = dI - dV = -2
        CHECK(d.dI[0] == Approx(0.0).margin(1e-15));
        CHECK(d.dV[0] == Approx(-2.0));
        CHECK(d.u[0] == 0.0);
    }

    SECTION("equilibrium is a fixed point") {
        auto ss = rlc_steady_state(sys, v1(0.4));
        auto [die, dve] = rlc_dynamics(sys, ss, v1(0.4));
        CHECK(std::abs(die[0]) <= 1e-12);
        CHECK(std::abs(dve[0]) <= 1e-12);
    }
}

TEST_CASE("buck averaged dynamics hold the figure operating point") {
    auto sys = make_converter(buck_fig5());
    auto [di, dv] = srlc_dynamics(sys, {v1(15.2), v1(380.0)}, v1(0.95));
    CHECK(std::abs(di[0]) <= 1e-9);
    CHECK(std::abs(dv[0]) <= 1e-9);
}

TEST_CASE("boost with the switch closed charges from the source") {
    ConverterParams p = boost_fig7();
    auto sys = make_converter(p);
    auto [di, dv] = srlc_dynamics(sys, {v1(3.0), v1(100.0)}, v1(1.0));
    CHECK(di[0] == Approx(p.Vs / p.L));
}

TEST_CASE("switched dynamics are affine in the duty cycle when R = 0") {
    bt::Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        auto base = bt::random_srlc(rng, 2, 2);
        SwitchedRlcSystem sys(base.L(), base.C(), Mat::Zero(2, 2), base.G(), base.Gamma0(),
                              base.Gamma1(), base.B0(), base.B1(), base.Vs());
        const Vec I = bt::random_vector(rng, 2), V = bt::random_vector(rng, 2);
        const Real u = std::uniform_real_distribution<Real>(0, 1)(rng);
        auto [d0, dv0] = srlc_dynamics(sys, {I, V}, v1(0.0));
        auto [d1, dv1] = srlc_dynamics(sys, {I, V}, v1(1.0));
        auto [du, dvu] = srlc_dynamics(sys, {I, V}, v1(u));
        CHECK((du - ((1 - u) * d0 + u * d1)).cwiseAbs().maxCoeff() <= 1e-12);
        (void)dv0;
        (void)dv1;
        (void)dvu;
    }
}

TEST_CASE("gamma and input matrices interpolate affinely") {
    bt::Rng rng(7);
    auto sys = bt::random_srlc(rng, 3, 2);
    CHECK((sys.gamma_at(0.5) - 0.5 * (sys.Gamma0() + sys.Gamma1())).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((sys.b_at(0.5) - 0.5 * (sys.B0() + sys.B1())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("storage functions") {
    Mat L = 1e-3 * Mat::Identity(1, 1), C = 1e-3 * Mat::Identity(1, 1);
    CHECK(energy_storage(L, C, {v1(2.0), v1(3.0)}) == Approx(6.5e-3));
    CHECK(energy_storage(L, C, {v1(0.0), v1(0.0)}) == 0.0);
    CHECK(energy_storage(L, C, {v1(4.0), v1(6.0)}) == Approx(4 * 6.5e-3));
    CHECK(krasovskii_storage(L, C, v1(2.0), v1(3.0)) == Approx(6.5e-3));
    CHECK(krasovskii_storage(L, C, v1(0.0), v1(0.0)) == 0.0);

    SECTION("positive definite in the derivatives") {
        bt::Rng rng(3);
        auto sys = bt::random_srlc(rng, 3, 2);
        for (int i = 0; i < 50; ++i) {
            const Vec dI = bt::random_vector(rng, 3), dV = bt::random_vector(rng, 2);
            const Real s = krasovskii_storage(sys, dI, dV);
            if (dI.norm() + dV.norm() > 0)
                CHECK(s > 0.0);
        }
        CHECK(krasovskii_storage(sys, Vec::Zero(3), Vec::Zero(2)) == 0.0);
    }
}

TEST_CASE("rlc output selects the actuated current derivatives") {
    Mat B(2, 1);
    B << 1, 0;
    RlcSystem sys(Mat::Identity(2, 2), Mat::Identity(1, 1), Mat::Zero(2, 2),
                  Mat::Identity(1, 1), Mat::Ones(2, 1), B);
    Vec dI(2);
    dI << 3, 5;
    CHECK(rlc_output(sys, dI)[0] == Approx(3.0));
    CHECK(rlc_output(sys, Vec::Zero(2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rlc_output(sys, 2 * dI)[0] == Approx(6.0));
}

TEST_CASE("switched output reduces to the known converter ports") {
    SECTION("buck: y = dI * Vs") {
        auto sys = make_converter(buck_fig5());
        const Vec y = srlc_output(sys, {v1(1.0), v1(2.0)}, v1(0.3), v1(0.8));
        CHECK(y[0] == Approx(0.3 * 400.0));
    }
    SECTION("boost: y = dI V - dV I") {
        auto sys = make_converter(boost_fig7());
        const Vec y = srlc_output(sys, {v1(2.0), v1(5.0)}, v1(0.3), v1(0.7));
        CHECK(y[0] == Approx(0.3 * 5.0 - 0.7 * 2.0));
    }
    SECTION("zero derivatives give zero output") {
        auto sys = make_converter(boost_fig7());
        CHECK(srlc_output(sys, {v1(2.0), v1(5.0)}, v1(0.0), v1(0.0))[0] == 0.0);
    }
}

TEST_CASE("rlc steady state solves the feasibility equations") {
    // Buck-as-RLC analogue: Gamma=1, R=0, G=0.04, B=1, us=380.
    RlcSystem sys(Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Zero(1, 1),
                  0.04 * Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1));
    auto ss = rlc_steady_state(sys, v1(380.0));
    CHECK(ss.I[0] == Approx(15.2));
    CHECK(ss.V[0] == Approx(380.0));

    SECTION("zero input gives the origin") {
        auto z = rlc_steady_state(sys, v1(0.0));
        CHECK(z.I[0] == 0.0);
        CHECK(z.V[0] == 0.0);
    }
    SECTION("residual below 1e-9 relative") {
        auto [di, dv] = rlc_dynamics(sys, ss, v1(380.0));
        const Real scale = std::hypot(ss.I[0], ss.V[0]);
        CHECK(std::hypot(di[0], dv[0]) <= 1e-9 * scale);
    }
}

TEST_CASE("switched steady states") {
    SECTION("buck at u = 0.95") {
        auto sys = make_converter(buck_fig5());
        auto ss = srlc_steady_state(sys, 0.95);
        CHECK(ss.I[0] == Approx(15.2));
        CHECK(ss.V[0] == Approx(380.0));
    }
    SECTION("boost at the figure duty") {
        auto sys = make_converter(boost_fig7());
        auto ss = srlc_steady_state(sys, 1.0 - 280.0 / 380.0);
        CHECK(ss.V[0] == Approx(380.0));
        CHECK(ss.I[0] == Approx(0.04 * 380.0 * 380.0 / 280.0).epsilon(1e-9));
    }
    SECTION("vanishing Gamma(u)^T with positive load pins V to zero") {
        // Needs R > 0 so the current block stays solvable once Gamma(u) = 0.
        SwitchedRlcSystem sys(Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1),
                              0.04 * Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Zero(1, 1),
                              Mat::Identity(1, 1), Mat::Identity(1, 1), v1(1.0));
        auto ss = srlc_steady_state(sys, 1.0);
        CHECK(ss.V[0] == Approx(0.0).margin(1e-12));
        CHECK(ss.I[0] == Approx(1.0));
    }
    SECTION("lossless boost at u = 1 has no steady state") {
        auto sys = make_converter(boost_fig7());
        CHECK_THROWS_AS(srlc_steady_state(sys, 1.0), SingularSystem);
    }
}

TEST_CASE("feasible duty search") {
    SECTION("buck reaches 380 V from a 400 V source") {
        auto sys = make_converter(buck_fig5());
        auto sp = srlc_feasible_input(sys, 380.0);
        CHECK(sp.ubar[0] == Approx(0.95).epsilon(1e-9));
        CHECK(sp.Ibar[0] == Approx(15.2).epsilon(1e-9));
    }
    SECTION("boost reaches 380 V from a 280 V source") {
        auto sys = make_converter(boost_fig7());
        auto sp = srlc_feasible_input(sys, 380.0);
        CHECK(sp.ubar[0] == Approx(1.0 - 280.0 / 380.0).epsilon(1e-9));
        CHECK(sp.Ibar[0] == Approx(5776.0 / 280.0).epsilon(1e-9));
    }
    SECTION("buck cannot exceed its source voltage") {
        auto sys = make_converter(buck_fig5());
        CHECK_THROWS_AS(srlc_feasible_input(sys, 410.0), NoFeasibleInput);
    }
    SECTION("non-monotone voltage map reports multiple candidates") {
        // Vbar(u) = gamma/(gamma^2+1) with gamma from 0.5 to 2 is not monotone.
        SwitchedRlcSystem sys(Mat::Identity(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1),
                              Mat::Identity(1, 1), 0.5 * Mat::Identity(1, 1),
                              2.0 * Mat::Identity(1, 1), Mat::Identity(1, 1),
                              Mat::Identity(1, 1), v1(1.0));
        CHECK_THROWS_AS(srlc_feasible_input(sys, 0.45), MultipleRoots);
    }
}

TEST_CASE("assumption report") {
    SECTION("buck: steady matrix has determinant -1 for every load") {
        auto sys = make_converter(buck_fig5());
        auto rep = verify_assumptions(sys, {}, Vec::Constant(1, 0.95));
        CHECK(rep.lc_spd);
        CHECK(rep.rg_psd);
        CHECK_FALSE(rep.r_pd);
        CHECK(rep.g_pd);
        CHECK(rep.steady_matrix_full_rank);
        CHECK(rep.input_shaping_case == TheoremCase::b_iii);
        CHECK(rep.output_shaping_case == TheoremCase::b_ii);
    }
    SECTION("boost control direction vanishes only at the origin") {
        auto sys = make_converter(boost_fig7());
        auto at_origin = verify_assumptions(sys, {{v1(0.0), v1(0.0)}});
        CHECK(at_origin.assumption7_sampled);
        CHECK_FALSE(at_origin.assumption7_pass_at_samples);
        auto away = verify_assumptions(sys, {{v1(1.0), v1(10.0)}, {v1(0.0), v1(5.0)}});
        CHECK(away.assumption7_pass_at_samples);
        CHECK(away.note.find("sampled") != std::string::npos);
    }
    SECTION("constructed failure satisfies no theorem case") {
        RlcSystem sys(Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Zero(2, 2),
                      Mat::Zero(2, 2), Mat::Zero(2, 2), Mat::Identity(2, 2));
        auto rep = verify_assumptions(sys);
        CHECK_FALSE(rep.r_pd);
        CHECK_FALSE(rep.g_pd);
        CHECK_FALSE(rep.gamma_full_column_rank);
        CHECK(rep.output_shaping_case == TheoremCase::none);
        CHECK(rep.input_shaping_case == TheoremCase::none);
        CHECK_FALSE(rep.steady_matrix_full_rank);
    }
}

TEST_CASE("construction rejects bad systems") {
    Mat I1 = Mat::Identity(1, 1);
    CHECK_THROWS_AS(RlcSystem(-I1, I1, I1, I1, I1, I1), InvalidParams);
    CHECK_THROWS_AS(RlcSystem(I1, I1, -I1, I1, I1, I1), InvalidParams);
    CHECK_THROWS_AS(RlcSystem(I1, I1, I1, I1, I1, Mat::Zero(1, 1)), InvalidParams);
    CHECK_THROWS_AS(SwitchedRlcSystem(I1, I1, I1, I1, I1, I1, I1, I1, v1(0.0)), InvalidParams);
    auto sys = make_converter(buck_fig5());
    CHECK_THROWS_AS(srlc_dynamics(sys, {Vec::Zero(2), v1(0.0)}, v1(0.5)), DimensionError);
    CHECK_THROWS_AS(mixed_potential(sys, v1(0.5), {Vec::Zero(2), v1(0.0)}), DimensionError);
}
