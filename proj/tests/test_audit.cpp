#include <catch2/catch_amalgamated.hpp>

#include "bmsim/audit.hpp"
#include "bmsim/csv.hpp"
#include "bmsim/scenario_io.hpp"

#include <cstdio>

using namespace bmsim;
using Catch::Approx;

namespace {

Vec v1(Real x) { return Vec::Constant(1, x); }

Scenario quick_buck(Real t_end, Real dt, bool with_event) {
    ConverterParams p{ConverterKind::buck, 1e-3, 1e-3, 0.04, 400.0};
    auto sys = make_converter(p);
    auto sp = converter_setpoint(p, 380.0);
    InputShapingSrlcController ic;
    ic.gains = Gains(16e5, 8e7);
    ic.ubar = sp.ubar[0];
    Scenario sc{std::move(sys), ic, sp, dt, t_end, {v1(0.0), v1(0.0)}, v1(0.5), {}, 1, false,
                {}};
    if (with_event) {
        sc.events = {{t_end / 2, 0, 0.02}};
        AuditSegmentSpec seg;
        seg.expected_voltage = v1(380.0);
        seg.band = 0.5;
        sc.audit_segments = {seg, seg};
    }
    return sc;
}

}  // namespace

TEST_CASE("healthy run audits clean, serial and parallel agree exactly") {
    auto sc = quick_buck(0.6, 1e-5, true);
    auto tr = integrate(sc);
    auto ctx = make_audit_context(sc, tr);
    auto serial = run_audits(tr, ctx, Exec::serial);
    auto parallel = run_audits(tr, ctx, Exec::parallel);

    CHECK(serial.audits_pass());
    CHECK(serial.converged());
    REQUIRE(serial.segments.size() == 2);
    for (const auto& seg : serial.segments) {
        CHECK(seg.passivity_violations == 0);
        CHECK(seg.lyapunov_violations == 0);
        CHECK(seg.dissipation_violations == 0);
    }
    CHECK(serial.format() == parallel.format());
    CHECK(serial.format().find("0 violations") != std::string::npos);
    CHECK(serial.format().find("audits: PASS") != std::string::npos);
}

TEST_CASE("corrupted trajectory is flagged with timestamps") {
    auto sc = quick_buck(0.1, 1e-5, false);
    auto tr = integrate(sc);
    for (auto& x : tr.dI) x = 0.0;  // zero the current-derivative column
    auto ctx = make_audit_context(sc, tr);
    auto rep = run_audits(tr, ctx);
    CHECK_FALSE(rep.audits_pass());
    const auto& seg = rep.segments[0];
    CHECK(seg.dissipation_violations > 0);
    CHECK(seg.t_worst_dissipation >= 0.0);
    CHECK(rep.format().find("audits: FAIL") != std::string::npos);
}

TEST_CASE("equilibrium trajectory has exactly zero residuals") {
    auto sc = quick_buck(0.01, 1e-5, false);
    ConverterParams p{ConverterKind::buck, 1e-3, 1e-3, 0.04, 400.0};
    auto sp = converter_setpoint(p, 380.0);
    sc.initial = {sp.Ibar, sp.Vstar};
    sc.u0 = sp.ubar;
    auto tr = integrate(sc);
    auto ctx = make_audit_context(sc, tr);
    auto rep = run_audits(tr, ctx);
    CHECK(rep.audits_pass());
    CHECK(rep.segments[0].converged);
    CHECK(rep.segments[0].convergence_time == Approx(0.0));
    CHECK(rep.segments[0].max_passivity_violation == 0.0);
    CHECK(rep.segments[0].tail_min_storage <= 1e-10);
}

TEST_CASE("undamped loop loses convergence and the audit reports it") {
    // G = 0 removes the only plant dissipation of the buck: the shaped storage
    // still decreases (through kd du^2) but the LC pair keeps ringing, so the
    // voltage never settles and the tail storage stays finite.
    ConverterParams p{ConverterKind::buck, 1e-3, 1e-3, 0.04, 400.0};
    auto lossless =
        SwitchedRlcSystem(make_converter(p).L(), make_converter(p).C(), Mat::Zero(1, 1),
                          Mat::Zero(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1),
                          Mat::Zero(1, 1), Mat::Identity(1, 1), v1(400.0));
    Setpoint sp;
    sp.Vstar = v1(380.0);
    sp.Ibar = v1(0.0);  // G = 0 draws no load current
    sp.ubar = v1(0.95);
    InputShapingSrlcController ic;
    ic.gains = Gains(16e5, 8e7);
    ic.ubar = 0.95;
    Scenario sc{std::move(lossless), ic, sp, 1e-5, 0.6, {v1(0.0), v1(0.0)}, v1(0.5), {}, 1,
                false, {}};
    auto tr = integrate(sc);
    auto ctx = make_audit_context(sc, tr);
    auto rep = run_audits(tr, ctx);
    CHECK(rep.audits_pass());          // the theorems' inequalities still hold
    CHECK_FALSE(rep.converged());      // but the hypotheses for settling are gone
    CHECK(rep.segments[0].tail_min_storage > 1e-2);
    CHECK(rep.format().find("convergence: FAIL") != std::string::npos);
}

TEST_CASE("offline audit of the serialized trajectory is bit-identical") {
    auto sc = quick_buck(0.2, 1e-5, true);
    sc.events = {{0.1, 0, 0.02}};
    auto tr = integrate(sc);

    const std::string path = "test_audit_traj.csv";
    write_trajectory_csv(tr, path);
    auto parsed = read_trajectory_csv(path);
    REQUIRE(parsed.rows() == tr.rows());

    auto ctx = make_audit_context(sc, parsed);
    auto once = run_audits(parsed, ctx);
    auto again = run_audits(read_trajectory_csv(path), ctx);
    CHECK(once.format() == again.format());
    std::remove(path.c_str());
}

TEST_CASE("csv round trip preserves 12 significant digits") {
    CHECK(csv_format(380.0) == "380");
    CHECK(csv_roundtrip(1.0 / 3.0) == Approx(1.0 / 3.0).epsilon(1e-11));
    CHECK(csv_roundtrip(-2.5e-7) == -2.5e-7);
    auto sc = quick_buck(0.002, 1e-6, false);
    auto tr = integrate(sc);
    const std::string path = "test_audit_rt.csv";
    write_trajectory_csv(tr, path);
    auto parsed = read_trajectory_csv(path);
    REQUIRE(parsed.rows() == tr.rows());
    for (std::size_t k = 0; k < tr.rows(); ++k) {
        CHECK(parsed.t[k] == csv_roundtrip(tr.t[k]));
        CHECK(parsed.V[k] == csv_roundtrip(tr.V[k]));
        CHECK(parsed.S[k] == csv_roundtrip(tr.S[k]));
    }
    std::remove(path.c_str());
}

TEST_CASE("csv schema mismatches are rejected") {
    const std::string path = "test_audit_bad.csv";
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("t,I_1,V_1,bogus\n0,1,2,3\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(read_trajectory_csv(path), SchemaMismatch);
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("t,I_1,V_1,u_1,dI_1,dV_1,S,S_d,supply\n0,1,2\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(read_trajectory_csv(path), SchemaMismatch);
    std::remove(path.c_str());
}

TEST_CASE("fragment audits run their own checks only") {
    auto sc = quick_buck(0.05, 1e-5, false);
    auto tr = integrate(sc);
    for (auto& x : tr.Sd) x += 1e-3;  // no effect on passivity columns
    tr.Sd[tr.rows() / 2] += 1.0;      // a shaped-storage jump
    auto ctx = make_audit_context(sc, tr);
    auto pas = passivity_audit(tr, ctx);
    CHECK(pas.segments[0].passivity_violations == 0);
    CHECK(pas.segments[0].lyapunov_violations == 0);  // not checked in this fragment
    auto lya = lyapunov_audit(tr, ctx);
    CHECK(lya.segments[0].lyapunov_violations > 0);
    CHECK(lya.segments[0].t_worst_lyapunov >= 0.0);
}
