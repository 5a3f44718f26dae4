#include <catch2/catch_amalgamated.hpp>

#include "bmsim/bm_core.hpp"
#include "bmsim/converters.hpp"
#include "bmsim/sim.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace bmsim;
using Catch::Approx;
namespace bt = bmsim::testing;

namespace {

Vec v1(Real x) { return Vec::Constant(1, x); }

}  // namespace

TEST_CASE("buck field matches its averaged equations") {
    ConverterParams p{ConverterKind::buck, 2e-3, 3e-3, 0.05, 48.0};
    auto sys = make_converter(p);
    bt::Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Real I = bt::random_vector(rng, 1, 10)[0];
        const Real V = bt::random_vector(rng, 1, 50)[0];
        const Real u = std::uniform_real_distribution<Real>(0, 1)(rng);
        auto [di, dv] = srlc_dynamics(sys, {v1(I), v1(V)}, v1(u));
        CHECK(di[0] == Approx(-(V - u * p.Vs) / p.L).margin(1e-12));
        CHECK(dv[0] == Approx((I - p.G * V) / p.C).margin(1e-12));
    }
}

TEST_CASE("boost field matches its averaged equations") {
    ConverterParams p{ConverterKind::boost, 1.12e-3, 6.8e-3, 0.04, 280.0};
    auto sys = make_converter(p);
    bt::Rng rng(2);
    for (int i = 0; i < 20; ++i) {
        const Real I = bt::random_vector(rng, 1, 30)[0];
        const Real V = bt::random_vector(rng, 1, 400)[0];
        const Real u = std::uniform_real_distribution<Real>(0, 1)(rng);
        auto [di, dv] = srlc_dynamics(sys, {v1(I), v1(V)}, v1(u));
        CHECK(di[0] == Approx(-((1 - u) * V - p.Vs) / p.L).margin(1e-9));
        CHECK(dv[0] == Approx(((1 - u) * I - p.G * V) / p.C).margin(1e-9));
    }
}

TEST_CASE("buck-boost field matches its averaged equations") {
    ConverterParams p{ConverterKind::buckboost, 1e-3, 1e-3, 0.04, 400.0};
    auto sys = make_converter(p);
    auto [di, dv] = srlc_dynamics(sys, {v1(10.0), v1(100.0)}, v1(0.3));
    CHECK(di[0] == Approx(-((1 - 0.3) * 100.0 - 0.3 * 400.0) / p.L));
    CHECK(dv[0] == Approx(((1 - 0.3) * 10.0 - 0.04 * 100.0) / p.C));
}

TEST_CASE("Cuk field matches its averaged equations") {
    ConverterParams p{ConverterKind::cuk, 1e-3, 2e-3, 0.04, 400.0, 1.5e-3, 2.5e-3};
    auto sys = make_converter(p);
    REQUIRE(sys.sigma() == 2);
    REQUIRE(sys.rho() == 2);
    bt::Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const Vec I = bt::random_vector(rng, 2, 20);
        const Vec V = bt::random_vector(rng, 2, 300);
        const Real u = std::uniform_real_distribution<Real>(0, 1)(rng);
        auto [di, dv] = srlc_dynamics(sys, {I, V}, v1(u));
        CHECK(di[0] == Approx(-((1 - u) * V[0] - p.Vs) / p.L).margin(1e-9));
        CHECK(di[1] == Approx(-(u * V[0] + V[1]) / p.L2).margin(1e-9));
        CHECK(dv[0] == Approx(((1 - u) * I[0] + u * I[1]) / p.C).margin(1e-9));
        CHECK(dv[1] == Approx((I[1] - p.G * V[1]) / p.C2).margin(1e-9));
    }

    SECTION("output port matches the appendix law") {
        const Vec I = bt::random_vector(rng, 2, 20);
        const Vec V = bt::random_vector(rng, 2, 300);
        const Vec dI = bt::random_vector(rng, 2, 100);
        const Vec dV = bt::random_vector(rng, 2, 100);
        const Real y = srlc_output(sys, {I, V}, dI, dV)[0];
        CHECK(y == Approx(dV[0] * (I[1] - I[0]) - V[0] * (dI[1] - dI[0])).margin(1e-9));
    }
}

TEST_CASE("closed-form setpoints sit on the dynamics") {
    SECTION("buck") {
        ConverterParams p{ConverterKind::buck, 1e-3, 1e-3, 0.04, 400.0};
        auto sp = converter_setpoint(p, 380.0);
        CHECK(sp.ubar[0] == Approx(0.95));
        CHECK(sp.Ibar[0] == Approx(15.2));
    }
    SECTION("boost") {
        ConverterParams p{ConverterKind::boost, 1.12e-3, 6.8e-3, 0.04, 280.0};
        auto sp = converter_setpoint(p, 380.0);
        CHECK(sp.ubar[0] == Approx(1.0 - 280.0 / 380.0).epsilon(1e-12));
        CHECK(sp.Ibar[0] == Approx(5776.0 / 280.0).epsilon(1e-12));
    }
    SECTION("buck-boost") {
        ConverterParams p{ConverterKind::buckboost, 1e-3, 1e-3, 0.04, 400.0};
        auto sp = converter_setpoint(p, 380.0);
        CHECK(sp.ubar[0] == Approx(380.0 / 780.0).epsilon(1e-12));
        CHECK(sp.Ibar[0] == Approx(0.04 * 380.0 * 780.0 / 400.0).epsilon(1e-12));
    }
    SECTION("Cuk") {
        ConverterParams p{ConverterKind::cuk, 1e-3, 1e-3, 0.04, 400.0, 1e-3, 1e-3};
        auto sp = converter_setpoint(p, -380.0);
        CHECK(sp.ubar[0] == Approx(380.0 / 780.0).epsilon(1e-12));
        CHECK(sp.Vstar[0] == Approx(780.0).epsilon(1e-12));
        CHECK(sp.Vstar[1] == Approx(-380.0));
        CHECK(sp.Ibar[1] == Approx(-15.2));
        CHECK(sp.Ibar[0] == Approx(0.48717948717948717 * 15.2 / 0.5128205128205128)
                                .epsilon(1e-9));
    }
    SECTION("round trip through the steady-state solver") {
        for (auto kind : {ConverterKind::buck, ConverterKind::boost, ConverterKind::buckboost}) {
            ConverterParams p{kind, 1e-3, 1e-3, 0.04, 400.0};
            const Real vstar = kind == ConverterKind::boost ? 500.0 : 380.0;
            auto sp = converter_setpoint(p, vstar);
            auto ss = srlc_steady_state(make_converter(p), sp.ubar);
            CHECK(std::abs(ss.V[0] - sp.Vstar[0]) <= 1e-9 * std::abs(vstar));
            CHECK(std::abs(ss.I[0] - sp.Ibar[0]) <= 1e-9 * std::max<Real>(1.0, sp.Ibar[0]));
        }
    }
    SECTION("infeasible targets are rejected") {
        ConverterParams buck{ConverterKind::buck, 1e-3, 1e-3, 0.04, 400.0};
        CHECK_THROWS_AS(converter_setpoint(buck, 400.0), NoFeasibleInput);
        ConverterParams boost{ConverterKind::boost, 1e-3, 1e-3, 0.04, 400.0};
        CHECK_THROWS_AS(converter_setpoint(boost, 380.0), NoFeasibleInput);
        ConverterParams cuk{ConverterKind::cuk, 1e-3, 1e-3, 0.04, 400.0, 1e-3, 1e-3};
        CHECK_THROWS_AS(converter_setpoint(cuk, 380.0), NoFeasibleInput);
    }
}

TEST_CASE("boost gamma catalogue") {
    auto rows = boost_gamma_catalogue();
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].name == "identity");
    CHECK_FALSE(rows[0].has_gamma);

    SECTION("table values") {
        auto& inv_v2 = rows[1];
        CHECK(inv_v2.m(20.63, 380.0) == Approx(1.0 / (380.0 * 380.0)));
        CHECK(inv_v2.gamma(20.63, 380.0) == Approx(20.63 / 380.0).epsilon(1e-12));
        CHECK(rows[2].gamma(2.0, 10.0) == Approx(-5.0));
        CHECK(rows[3].gamma(1.0, 1.0) == Approx(std::atan(1.0)));
        CHECK(rows[4].gamma(std::exp(2.0), 1.0) == Approx(2.0));
    }

    SECTION("domain guards") {
        CHECK_THROWS_AS(rows[1].m(1.0, 0.0), DomainError);
        CHECK_THROWS_AS(rows[2].m(0.0, 1.0), DomainError);
        CHECK_THROWS_AS(rows[3].m(0.0, 0.0), DomainError);
        CHECK_THROWS_AS(rows[4].gamma(-1.0, 1.0), DomainError);
    }

    SECTION("every row is an exact integrating factor along a trajectory") {
        // Open-loop boost with a slowly varying duty cycle; d(gamma)/dt must
        // match m*y at interior samples (central differences).
        ConverterParams p{ConverterKind::boost, 1.12e-3, 6.8e-3, 0.04, 280.0};
        auto sys = make_converter(p);
        auto field = [&](Real t, const Vec& z, Vec& dz) {
            const Real u = 0.35 + 0.1 * std::sin(200.0 * t);
            auto [di, dv] = srlc_dynamics(sys, {v1(z[0]), v1(z[1])}, v1(u));
            dz[0] = di[0];
            dz[1] = dv[0];
        };
        Vec z0(2);
        z0 << 10.0, 200.0;  // away from the domain boundaries
        const Real dt = 1e-6;
        auto path = rk4_path(field, z0, dt, 4000, 1);
        for (const auto& row : boost_gamma_catalogue()) {
            if (!row.has_gamma) continue;
            for (std::size_t k = 500; k < path.size() - 500; k += 250) {
                const Real t = static_cast<Real>(k) * dt;
                const Real u = 0.35 + 0.1 * std::sin(200.0 * t);
                auto [di, dv] = srlc_dynamics(sys, {v1(path[k][0]), v1(path[k][1])}, v1(u));
                const Real y = srlc_output(sys, {v1(path[k][0]), v1(path[k][1])}, di, dv)[0];
                const Real m = row.m(path[k][0], path[k][1]);
                const Real dgamma_fd = (row.gamma(path[k + 1][0], path[k + 1][1]) -
                                        row.gamma(path[k - 1][0], path[k - 1][1])) /
                                       (2 * dt);
                CHECK(dgamma_fd == Approx(m * y).epsilon(1e-5).margin(1e-8));
            }
        }
    }
}

TEST_CASE("buck gamma choices are constant integrating factors") {
    auto rows = buck_gamma_catalogue(400.0);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].name == "identity");
    CHECK(rows[0].gamma(2.0, 0.0) == Approx(800.0));

    // y = dI*Vs, so d(gamma)/dt = m*y = scale*dI*Vs = d(scale*I*Vs)/dt exactly.
    const Real dI = 7.0, Vs = 400.0;
    for (Real s : {1.0, 2e-5, 1.0 / (Vs * Vs)}) {
        auto row = buck_gamma_scaled(Vs, s);
        CHECK(row.m(1.0, 2.0) * (dI * Vs) == Approx(s * dI * Vs));
        CHECK(row.gamma(3.0, 0.0) == Approx(s * 3.0 * Vs));
    }
    CHECK_THROWS_AS(buck_gamma_scaled(400.0, 0.0), InvalidParams);
}

TEST_CASE("factory outputs satisfy the standing assumptions") {
    ConverterParams bp{ConverterKind::buck, 1e-3, 1e-3, 0.04, 400.0};
    auto buck = make_converter(bp);
    auto rep = verify_assumptions(
        buck, {{v1(0.0), v1(0.0)}, {v1(15.2), v1(380.0)}, {v1(-3.0), v1(7.0)}});
    CHECK(rep.lc_spd);
    CHECK(rep.rg_psd);
    // Buck control direction is the constant -Vs: nonzero everywhere.
    CHECK(rep.assumption7_pass_at_samples);
    CHECK(rep.assumption7_min_norm[0] == Approx(400.0));

    ConverterParams op{ConverterKind::boost, 1.12e-3, 6.8e-3, 0.04, 280.0};
    auto boost = make_converter(op);
    auto rep2 = verify_assumptions(boost, {{v1(1.0), v1(0.0)}, {v1(0.0), v1(2.0)}});
    CHECK(rep2.assumption7_pass_at_samples);  // nonzero whenever (I, V) != 0
    auto rep3 = verify_assumptions(boost, {{v1(0.0), v1(0.0)}});
    CHECK_FALSE(rep3.assumption7_pass_at_samples);
}

TEST_CASE("converter parameter validation") {
    ConverterParams p{ConverterKind::buck, 0.0, 1e-3, 0.04, 400.0};
    CHECK_THROWS_AS(make_converter(p), InvalidParams);
    p = {ConverterKind::buck, 1e-3, 1e-3, -0.1, 400.0};
    CHECK_THROWS_AS(make_converter(p), InvalidParams);
    p = {ConverterKind::cuk, 1e-3, 1e-3, 0.04, 400.0, 0.0, 1e-3};
    CHECK_THROWS_AS(make_converter(p), InvalidParams);
    CHECK_THROWS_AS(converter_kind_from_string("flyback"), InvalidParams);
    ConverterParams good{ConverterKind::buckboost, 1e-3, 1e-3, 0.04, 400.0};
    CHECK_THROWS_AS(gamma_choice(good, "identity"), InvalidParams);
}
