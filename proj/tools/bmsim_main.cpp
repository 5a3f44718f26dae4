#include "bmsim/audit.hpp"
#include "bmsim/csv.hpp"
#include "bmsim/scenario_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace bmsim;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

struct RunOutcome {
    int exit_code = 1;
    std::string summary;
};

RunOutcome run_scenario(ResolvedScenario rs, const fs::path& outdir, Exec exec) {
    std::ostringstream log;
    fs::create_directories(outdir);

    Trajectory traj = integrate(rs.scenario);
    write_text(outdir / "scenario.resolved", scenario_to_string(rs.resolved));
    const fs::path csv_path = outdir / "trajectory.csv";
    write_trajectory_csv(traj, csv_path.string());

    // Audit the serialized values so `bmsim audit` reproduces this report.
    Trajectory parsed = read_trajectory_csv(csv_path.string());
    if (parsed.sigma != traj.sigma || parsed.rho != traj.rho || parsed.nu != traj.nu ||
        parsed.rows() != traj.rows())
        throw SchemaMismatch("serialized trajectory does not match the run");
    AuditContext ctx = make_audit_context(rs.scenario, parsed);
    AuditReport rep = run_audits(parsed, ctx, exec);
    write_text(outdir / "audit.txt", rep.format());

    log << "wrote " << (outdir / "trajectory.csv").string() << " (" << parsed.rows()
        << " rows)\n";
    if (traj.saturation_count)
        log << "duty saturation: " << traj.saturation_count << " clamp(s), first at t="
            << traj.first_saturation_time << "\n";
    log << rep.format();

    RunOutcome out;
    if (!rep.audits_pass()) {
        out.exit_code = 2;
    } else if (!rep.converged()) {
        out.exit_code = 3;
        if (rep.method == "output_shaping") {
            for (std::size_t s = 1; s < rep.segments.size(); ++s) {
                if (!rep.segments[s].converged && ctx.segments[s].expected_is_default) {
                    log << "note: post-event setpoint shift expected - output shaping pins the "
                           "integrated output, so after a load step the voltage settles away "
                           "from Vstar; declare audit.segments[" << s
                        << "].expected_voltage for the post-event segment\n";
                    break;
                }
            }
        }
    } else {
        out.exit_code = 0;
    }
    out.summary = log.str();
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Brayton-Moser converter and DC-network simulator"};
    app.require_subcommand(1);

    // run
    std::string run_file;
    std::string out_dir = "out";
    double dt_override = 0;
    bool saturate = false;
    bool all_presets = false;
    bool serial = false;
    auto* run_cmd = app.add_subcommand("run", "simulate a scenario file and audit the result");
    run_cmd->add_option("file", run_file, "scenario file (JSON)");
    run_cmd->add_option("--out", out_dir, "output directory");
    run_cmd->add_option("--dt", dt_override, "override the integration step (s)");
    run_cmd->add_flag("--saturate-duty", saturate, "clamp duty cycles to [0,1]");
    run_cmd->add_flag("--all-presets", all_presets, "run every preset, one worker each");
    run_cmd->add_flag("--serial", serial, "run the audits on the serial reference kernels");

    // preset
    std::string preset_name;
    std::string emit_path;
    auto* preset_cmd = app.add_subcommand("preset", "emit a figure-reproduction scenario");
    preset_cmd->add_option("name", preset_name, "preset name")->required();
    preset_cmd->add_option("--emit", emit_path, "write to this file instead of stdout");

    // audit
    std::string audit_csv, audit_resolved;
    auto* audit_cmd = app.add_subcommand("audit", "re-audit a trajectory CSV offline");
    audit_cmd->add_option("csv", audit_csv, "trajectory.csv")->required();
    audit_cmd->add_option("resolved", audit_resolved, "scenario.resolved")->required();
    audit_cmd->add_flag("--serial", serial, "use the serial reference kernels");

    CLI11_PARSE(app, argc, argv);
    const Exec exec = serial ? Exec::serial : Exec::parallel;

    try {
        if (run_cmd->parsed()) {
            auto apply_overrides = [&](ResolvedScenario& rs) {
                if (dt_override > 0) {
                    rs.scenario.dt = dt_override;
                    rs.resolved["sim"]["dt"] = dt_override;
                }
                if (saturate) {
                    rs.scenario.saturate_duty = true;
                    rs.resolved["sim"]["saturate_duty"] = true;
                }
            };
            if (all_presets) {
                const auto& names = preset_names();
                std::vector<RunOutcome> results(names.size());
                std::vector<std::thread> workers;
                std::mutex mtx;
                for (std::size_t i = 0; i < names.size(); ++i) {
                    workers.emplace_back([&, i]() {
                        RunOutcome r;
                        try {
                            ResolvedScenario rs = resolve_scenario(preset_scenario(names[i]));
                            apply_overrides(rs);
                            r = run_scenario(std::move(rs), fs::path(out_dir) / names[i], exec);
                        } catch (const std::exception& e) {
                            r.exit_code = 1;
                            r.summary = std::string("error: ") + e.what() + "\n";
                        }
                        std::lock_guard<std::mutex> lock(mtx);
                        results[i] = std::move(r);
                    });
                }
                for (auto& w : workers) w.join();
                int worst = 0;
                for (std::size_t i = 0; i < names.size(); ++i) {
                    std::cout << "=== " << names[i] << " (exit " << results[i].exit_code
                              << ") ===\n"
                              << results[i].summary;
                    worst = std::max(worst, results[i].exit_code);
                }
                return worst;
            }
            if (run_file.empty()) {
                std::cerr << "error: missing scenario file (or use --all-presets)\n";
                return 1;
            }
            ResolvedScenario rs = load_scenario_file(run_file);
            apply_overrides(rs);
            RunOutcome r = run_scenario(std::move(rs), out_dir, exec);
            std::cout << r.summary;
            return r.exit_code;
        }
        if (preset_cmd->parsed()) {
            const Json j = preset_scenario(preset_name);
            const std::string text = scenario_to_string(j);
            if (emit_path.empty())
                std::cout << text;
            else
                write_text(emit_path, text);
            return 0;
        }
        if (audit_cmd->parsed()) {
            std::ifstream in(audit_resolved);
            if (!in) throw Error("cannot open " + audit_resolved);
            Json doc = Json::parse(in);
            ResolvedScenario rs = resolve_scenario(doc);
            Trajectory traj = read_trajectory_csv(audit_csv);
            if (traj.sigma != rs.scenario.system.sigma() ||
                traj.rho != rs.scenario.system.rho() ||
                traj.nu != rs.scenario.system.switches())
                throw SchemaMismatch("trajectory columns do not match the resolved scenario");
            AuditContext ctx = make_audit_context(rs.scenario, traj);
            AuditReport rep = run_audits(traj, ctx, exec);
            std::cout << rep.format();
            if (!rep.audits_pass()) return 2;
            if (!rep.converged()) return 3;
            return 0;
        }
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const SchemaMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
