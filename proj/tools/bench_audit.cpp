// Compares the serial reference audit kernels against the OpenMP ones on real
// trajectories (a single converter and the four-node network).

#include "bmsim/audit.hpp"
#include "bmsim/scenario_io.hpp"

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace bmsim;

namespace {

double seconds_for(const Trajectory& traj, const AuditContext& ctx, Exec exec, int reps) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    for (int r = 0; r < reps; ++r) {
        volatile bool ok = run_audits(traj, ctx, exec).audits_pass();
        (void)ok;
    }
    const auto t1 = clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void bench_case(const char* label, const Json& doc, int reps) {
    ResolvedScenario rs = resolve_scenario(doc);
    Trajectory traj = integrate(rs.scenario);
    AuditContext ctx = make_audit_context(rs.scenario, traj);

    const AuditReport serial = run_audits(traj, ctx, Exec::serial);
    const AuditReport parallel = run_audits(traj, ctx, Exec::parallel);
    const bool equal = serial.format() == parallel.format();

    const double ts = seconds_for(traj, ctx, Exec::serial, reps);
    const double tp = seconds_for(traj, ctx, Exec::parallel, reps);
    const double n = static_cast<double>(traj.rows());
    std::printf("%-10s %9zu rows  serial %8.2f ms (%6.1f Msamples/s)  omp %8.2f ms "
                "(%6.1f Msamples/s)  speedup %.2fx  results %s\n",
                label, traj.rows(), ts * 1e3, n / ts / 1e6, tp * 1e3, n / tp / 1e6, ts / tp,
                equal ? "identical" : "DIFFER");
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP max threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; parallel falls back to serial\n");
#endif

    Json buck = preset_scenario("fig6");
    buck["sim"]["t_end"] = 0.5;
    buck["events"] = Json::array();
    buck["audit"].erase("segments");
    bench_case("buck", buck, 5);

    Json net = preset_scenario("network4");
    net["sim"]["t_end"] = 0.25;
    net["events"] = Json::array();
    bench_case("network", net, 5);
    return 0;
}
