// Batch CLI for the state-bin demand aggregation toolkit.
//
// Subcommands: plan, dispatch, capacity, study {phev|tcl|comm}, verify, data.
// Exit code is 0 only when every internal invariant check passes.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "statebin/harness.hpp"
#include "statebin/rng.hpp"

using namespace statebin;

namespace {

ExperimentConfig config_from_flags(const std::string& config_path, double scale,
                                   std::uint64_t seed, const std::string& out_dir) {
    ExperimentConfig config;
    if (!config_path.empty()) config = load_experiment_config(config_path);
    if (scale > 0.0) config.scale = scale;
    if (seed != 0) config.seed = seed;
    if (!out_dir.empty()) config.output_dir = out_dir;
    config.validate();
    return config;
}

int finish(const RunReport& report, const ExperimentConfig& config) {
    if (!config.output_dir.empty()) {
        auto files = write_report_tables(report, config, config.output_dir);
        for (const auto& f : files) std::cout << "wrote " << f << '\n';
        std::ofstream timing(config.output_dir + "/timings.txt", std::ios::app);
        timing << config.name << " wall_seconds=" << report.wall_seconds << '\n';
    }
    if (!report.invariants_ok) {
        for (const auto& msg : report.invariant_failures)
            std::cerr << "invariant failed: " << msg << '\n';
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"state-bin demand aggregation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, study_kind = "phev";
    double scale = 0.0;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config (json)");
        cmd->add_option("--scale", scale, "population scale factor in (0,1]");
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--out", out_dir, "output directory for data tables");
    };

    auto* plan_cmd = app.add_subcommand("plan", "forward purchase planning (both models)");
    add_common(plan_cmd);
    auto* dispatch_cmd =
        app.add_subcommand("dispatch", "plan then run the configured real-time scheduler");
    add_common(dispatch_cmd);
    std::string scheduler;
    dispatch_cmd->add_option("--scheduler", scheduler, "mpc or edf");
    auto* capacity_cmd = app.add_subcommand("capacity", "TCL regulation capacity (M and M')");
    add_common(capacity_cmd);
    auto* study_cmd = app.add_subcommand("study", "run a bundled case study");
    study_cmd->add_option("kind", study_kind, "phev | tcl | comm")->required();
    add_common(study_cmd);

    auto* verify_cmd = app.add_subcommand("verify", "measurement & verification test");
    std::string observed_path, profile_path;
    verify_cmd->add_option("--observed", observed_path, "observed daily load (columnar)")
        ->required();
    verify_cmd->add_option("--profile", profile_path, "M&V profile (json)")->required();

    auto* data_cmd = app.add_subcommand("data", "write the bundled default data files");
    std::string data_dir = "data";
    data_cmd->add_option("--out", data_dir, "directory for the default files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (plan_cmd->parsed() || dispatch_cmd->parsed()) {
            auto config = config_from_flags(config_path, scale, seed, out_dir);
            if (!scheduler.empty()) config.scheduler = scheduler;
            auto report = run_phev_study(config);
            for (const auto& s : report.phev) {
                std::cout << s.model << '/' << s.scheduler
                          << ": plan_cost=" << s.plan_expected_cost
                          << " realized_cost=" << s.realized_cost
                          << " total_abs_deviation=" << s.total_abs_deviation << '\n';
            }
            return finish(report, config);
        }
        if (capacity_cmd->parsed()) {
            auto config = config_from_flags(config_path, scale, seed, out_dir);
            auto report = run_tcl_study(config);
            std::cout << "M=" << report.capacity_conservative_w / 1e6
                      << " MW, M'=" << report.capacity_simulated_w / 1e6 << " MW\n";
            return finish(report, config);
        }
        if (study_cmd->parsed()) {
            auto config = config_from_flags(config_path, scale, seed, out_dir);
            RunReport report;
            if (study_kind == "phev") {
                report = run_phev_study(config);
                for (const auto& s : report.phev)
                    std::cout << s.model << '/' << s.scheduler
                              << " total_abs_deviation=" << s.total_abs_deviation << '\n';
            } else if (study_kind == "tcl") {
                report = run_tcl_study(config);
                std::cout << "M'=" << report.capacity_simulated_w / 1e6
                          << " MW, tracking within tolerance "
                          << report.tracking_within_tolerance_frac * 100 << "% of minutes\n";
            } else if (study_kind == "comm") {
                report = run_comm_study(config);
                std::cout << "peak uplink " << report.peak_pps
                          << " packets/s, collector capacity "
                          << report.coverage.capacity_pps_floor << " packets/s\n";
            } else {
                std::cerr << "unknown study kind: " << study_kind << '\n';
                return 2;
            }
            return finish(report, config);
        }
        if (verify_cmd->parsed()) {
            std::ifstream obs_in(observed_path);
            if (!obs_in) throw Error("cannot open " + observed_path);
            auto observed = read_column_series(obs_in);
            std::ifstream prof_in(profile_path);
            if (!prof_in) throw Error("cannot open " + profile_path);
            nlohmann::json j;
            prof_in >> j;
            MvProfile profile;
            profile.mean = j.at("mean").get<std::vector<double>>();
            profile.dispatched = j.at("dispatched").get<std::vector<double>>();
            profile.threshold = j.at("threshold").get<double>();
            profile.covariance = j.at("covariance").get<std::vector<std::vector<double>>>();
            auto result = mv_verify(observed, profile);
            std::cout << (result.accepted ? "ACCEPT" : "REJECT")
                      << " statistic=" << result.statistic
                      << " threshold=" << profile.threshold << '\n';
            return result.accepted ? 0 : 1;
        }
        if (data_cmd->parsed()) {
            std::filesystem::create_directories(data_dir);
            {
                std::ofstream out(data_dir + "/prices_forward.txt");
                auto prices = make_default_price_curve(32);
                out << "# hour forward_price\n";
                for (int h = 0; h < prices.hours; ++h)
                    out << h << ' ' << prices.forward[h] << '\n';
            }
            {
                std::ofstream out(data_dir + "/ambient_day.txt");
                auto amb = make_default_ambient_day();
                out << "# hour deg_f\n";
                for (std::size_t h = 0; h < amb.size(); ++h) out << h << ' ' << amb[h] << '\n';
            }
            {
                std::ofstream out(data_dir + "/ambient_tcl_study.txt");
                auto amb = make_default_tcl_ambient();
                out << "# hour deg_f\n";
                for (std::size_t h = 0; h < amb.size(); ++h) out << h << ' ' << amb[h] << '\n';
            }
            {
                std::ofstream out(data_dir + "/base_load_day.txt");
                auto base = make_default_base_load(32, 1.0);
                out << "# hour load_units\n";
                for (std::size_t h = 0; h < base.size(); ++h)
                    out << h << ' ' << base[h] << '\n';
            }
            {
                std::ofstream out(data_dir + "/regulation_signal.txt");
                auto sig = make_default_regulation_signal(360, 2024);
                out << "# minute normalized\n";
                for (std::size_t m = 0; m < sig.size(); ++m) out << m << ' ' << sig[m] << '\n';
            }
            {
                std::ofstream out(data_dir + "/phev_catalog.json");
                write_cluster_catalog(out, ev_case_catalog());
            }
            {
                std::ofstream out(data_dir + "/phev_profile.txt");
                write_rate_profile(out, ev_case_profile(1.0));
            }
            std::cout << "wrote defaults under " << data_dir << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
