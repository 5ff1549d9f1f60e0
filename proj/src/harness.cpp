#include "statebin/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "statebin/rng.hpp"

namespace statebin {

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

} // namespace

void ExperimentConfig::validate() const {
    if (scale <= 0.0 || scale > 1.0)
        throw Error("ExperimentConfig: scale must lie in (0, 1]");
    if (scenario_count < 1) throw Error("ExperimentConfig: need at least one scenario");
    if (scheduler != "mpc" && scheduler != "edf")
        throw Error("ExperimentConfig: scheduler must be mpc or edf");
    for (const std::string* path : {&price_file, &ambient_file, &signal_file,
                                    &base_load_file, &catalog_file, &arrival_profile_file})
        if (!path->empty() && !std::filesystem::exists(*path))
            throw Error("ExperimentConfig: referenced file does not exist: " + *path);
}

ExperimentConfig load_experiment_config(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw Error("load_experiment_config: cannot open " + json_path);
    nlohmann::json j;
    in >> j;
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    c.scale = j.value("scale", c.scale);
    c.seed = j.value("seed", c.seed);
    c.scenario_count = j.value("scenario_count", c.scenario_count);
    c.price_file = j.value("price_file", c.price_file);
    c.ambient_file = j.value("ambient_file", c.ambient_file);
    c.signal_file = j.value("signal_file", c.signal_file);
    c.base_load_file = j.value("base_load_file", c.base_load_file);
    c.catalog_file = j.value("catalog_file", c.catalog_file);
    c.arrival_profile_file = j.value("arrival_profile_file", c.arrival_profile_file);
    c.scheduler = j.value("scheduler", c.scheduler);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.capacity_reference_units = j.value("capacity_reference_units", c.capacity_reference_units);
    c.capacity_override_watts = j.value("capacity_override_watts", c.capacity_override_watts);
    c.households = j.value("households", c.households);
    c.evs_per_household = j.value("evs_per_household", c.evs_per_household);
    c.tcls_per_household = j.value("tcls_per_household", c.tcls_per_household);
    c.validate();
    return c;
}

std::string experiment_config_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["scale"] = c.scale;
    j["seed"] = c.seed;
    j["scenario_count"] = c.scenario_count;
    j["price_file"] = c.price_file;
    j["ambient_file"] = c.ambient_file;
    j["signal_file"] = c.signal_file;
    j["base_load_file"] = c.base_load_file;
    j["catalog_file"] = c.catalog_file;
    j["arrival_profile_file"] = c.arrival_profile_file;
    j["scheduler"] = c.scheduler;
    j["output_dir"] = c.output_dir;
    j["capacity_reference_units"] = c.capacity_reference_units;
    j["capacity_override_watts"] = c.capacity_override_watts;
    j["households"] = c.households;
    j["evs_per_household"] = c.evs_per_household;
    j["tcls_per_household"] = c.tcls_per_household;
    return j.dump();
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    std::string s = experiment_config_json(config);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Cluster catalog files

std::vector<ClusterSpec> read_cluster_catalog(std::istream& in) {
    nlohmann::json j;
    in >> j;
    TclCaseConfig conversion;
    if (j.contains("tcl_conversion")) {
        const auto& t = j.at("tcl_conversion");
        conversion.thermal_capacitance_btu_per_f =
            t.value("thermal_capacitance_btu_per_f",
                    conversion.thermal_capacitance_btu_per_f);
        conversion.heat_cop = t.value("heat_cop", conversion.heat_cop);
        conversion.noise_sigma_f = t.value("noise_sigma_f", conversion.noise_sigma_f);
    }
    std::vector<ClusterSpec> catalog;
    for (const auto& e : j.at("clusters")) {
        ClusterSpec spec;
        spec.id = static_cast<ClusterId>(catalog.size());
        std::string category = e.at("category").get<std::string>();
        if (category == "nid") {
            spec.category = Category::Nid;
            NidClusterParams p;
            p.pulse = e.at("pulse").get<std::vector<double>>();
            p.max_start_delay = e.at("max_start_delay").get<int>();
            spec.params = p;
            spec.state_space = {0, 1};
        } else if (category == "ideal_battery") {
            spec.category = Category::IdealBattery;
            IdealBatteryParams p;
            p.capacity = e.at("capacity").get<int>();
            spec.params = p;
            spec.state_space = battery_state_space(p.capacity);
        } else if (category == "ric" || category == "is") {
            spec.category = category == "ric" ? Category::Ric : Category::Is;
            RicClusterParams p;
            p.capacity = e.at("capacity").get<int>();
            p.deadline = e.at("deadline").get<int>();
            p.required_fraction = e.value("required_fraction", 1.0);
            p.max_rate = e.at("max_rate").get<int>();
            p.allow_discharge = e.value("allow_discharge", false);
            spec.params = p;
            spec.state_space = battery_state_space(p.capacity);
        } else if (category == "tcl") {
            spec.category = Category::Tcl;
            TclClusterParams p = tcl_params_from_raw(
                e.at("power_watts").get<double>(), e.at("loss_w_per_c").get<double>(),
                e.at("setpoint_f").get<double>(), e.at("band_f").get<double>(), conversion);
            p.noise_sigma_f = e.value("noise_sigma_f", p.noise_sigma_f);
            spec.params = p;
            auto grid = tcl_default_grid(p);
            spec.state_space.resize(grid.bins);
            for (int x = 0; x < grid.bins; ++x) spec.state_space[x] = x;
        } else {
            throw Error("read_cluster_catalog: unknown category: " + category);
        }
        catalog.push_back(std::move(spec));
    }
    return catalog;
}

void write_cluster_catalog(std::ostream& out, const std::vector<ClusterSpec>& catalog) {
    nlohmann::json clusters = nlohmann::json::array();
    for (const auto& spec : catalog) {
        nlohmann::json e;
        switch (spec.category) {
            case Category::Nid:
                e["category"] = "nid";
                e["pulse"] = spec.nid().pulse;
                e["max_start_delay"] = spec.nid().max_start_delay;
                break;
            case Category::IdealBattery:
                e["category"] = "ideal_battery";
                e["capacity"] = spec.ideal().capacity;
                break;
            case Category::Ric:
            case Category::Is:
                e["category"] = spec.category == Category::Ric ? "ric" : "is";
                e["capacity"] = spec.ric().capacity;
                e["deadline"] = spec.ric().deadline;
                e["required_fraction"] = spec.ric().required_fraction;
                e["max_rate"] = spec.ric().max_rate;
                e["allow_discharge"] = spec.ric().allow_discharge;
                break;
            case Category::Tcl:
                e["category"] = "tcl";
                e["power_watts"] = spec.tcl().power_watts;
                e["loss_w_per_c"] = spec.tcl().loss_w_per_c;
                e["setpoint_f"] = spec.tcl().setpoint_f;
                e["band_f"] = spec.tcl().band_f;
                e["noise_sigma_f"] = spec.tcl().noise_sigma_f;
                break;
        }
        clusters.push_back(std::move(e));
    }
    nlohmann::json j;
    j["clusters"] = std::move(clusters);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Bundled defaults

PriceCurve make_default_price_curve(int hours) {
    // synthetic day-ahead shape: cheap overnight, morning shoulder, evening
    // peak around hour 18, falling back to the next overnight trough
    static const double day[24] = {26, 24, 23, 22, 22, 24, 30, 36, 38, 37, 36, 35,
                                   34, 34, 35, 38, 44, 52, 56, 54, 46, 38, 32, 28};
    std::vector<double> forward(hours);
    for (int h = 0; h < hours; ++h) forward[h] = day[h % 24];
    return PriceCurve::two_settlement(std::move(forward));
}

std::vector<double> make_default_base_load(int hours, double scale) {
    // double-peaked residential shape, in the same power units as the
    // flexible load (one unit = one appliance charging)
    static const double day[24] = {52, 48, 46, 45, 45, 48, 60, 74, 80, 78, 76, 75,
                                   74, 73, 74, 78, 88, 104, 112, 108, 96, 80, 66, 58};
    std::vector<double> load(hours);
    for (int h = 0; h < hours; ++h) load[h] = 125.0 * scale * day[h % 24];
    return load;
}

std::vector<double> make_default_ambient_day() {
    return {39, 38, 37, 36, 35, 35, 37, 40, 44, 48, 51, 54,
            56, 57, 57, 56, 54, 51, 48, 46, 44, 42, 41, 40};
}

std::vector<double> make_default_tcl_ambient() { return {41, 40.5, 40, 39.5, 39, 39}; }

std::vector<double> make_default_regulation_signal(int minutes, std::uint64_t seed) {
    // alternating excursions with lognormal durations (97% quantile near the
    // 19-minute hold assumption) where long excursions are shallow and only
    // short ones approach the rails, so the signal stays roughly
    // energy-neutral over the population's thermal timescale; per-minute slew
    // is clamped to a realistic rate
    constexpr double kMedianMinutes = 5.0;
    constexpr double kLogSd = 0.709; // puts the 97% duration quantile near 19
    constexpr double kEnergyCap = 8.0;
    constexpr double kMaxSlew = 0.22;
    const double pi = 3.14159265358979323846;

    auto rng = make_rng(seed, 0x516);
    std::normal_distribution<double> logdur(std::log(kMedianMinutes), kLogSd);
    std::uniform_real_distribution<double> amp_law(0.5, 1.0);
    std::vector<double> signal;
    signal.reserve(minutes);
    double sign = 1.0;
    double prev = 0.0;
    while (static_cast<int>(signal.size()) < minutes) {
        int dur = std::max(2, static_cast<int>(std::lround(std::exp(logdur(rng)))));
        double amp =
            amp_law(rng) * std::min(1.0, std::sqrt(kEnergyCap / dur)) * sign;
        for (int i = 0; i < dur && static_cast<int>(signal.size()) < minutes; ++i) {
            double v = amp * std::sin(pi * (i + 0.5) / dur);
            v = std::clamp(v, prev - kMaxSlew, prev + kMaxSlew);
            prev = v;
            signal.push_back(v);
        }
        sign = -sign;
    }
    return signal;
}

std::vector<double> read_column_series(std::istream& in) {
    std::vector<std::pair<long, double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        long idx;
        double v;
        if (!(ls >> idx >> v)) throw Error("read_column_series: malformed line: " + line);
        rows.emplace_back(idx, v);
    }
    std::sort(rows.begin(), rows.end());
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto& [i, v] : rows) out.push_back(v);
    return out;
}

PriceCurve read_price_files(const std::string& forward_path,
                            const std::string& adjustment_path) {
    std::ifstream fin(forward_path);
    if (!fin) throw Error("read_price_files: cannot open " + forward_path);
    std::vector<double> forward = read_column_series(fin);
    if (adjustment_path.empty()) return PriceCurve::two_settlement(std::move(forward));

    PriceCurve p;
    p.hours = static_cast<int>(forward.size());
    p.forward = std::move(forward);
    std::ifstream ain(adjustment_path);
    if (!ain) throw Error("read_price_files: cannot open " + adjustment_path);
    std::string line;
    std::vector<std::pair<long, std::pair<double, double>>> rows;
    while (std::getline(ain, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        long t;
        double up, dn;
        if (!(ls >> t >> up >> dn)) throw Error("read_price_files: malformed line: " + line);
        rows.emplace_back(t, std::make_pair(up, dn));
    }
    std::sort(rows.begin(), rows.end());
    if (rows.size() % p.forward.size() != 0)
        throw Error("read_price_files: adjustment rows must be a multiple of the hours");
    p.substeps = static_cast<int>(rows.size() / p.forward.size());
    for (auto& [t, ud] : rows) {
        p.up.push_back(ud.first);
        p.dn.push_back(ud.second);
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// PHEV study

namespace {

struct DispatchOutcome {
    std::vector<double> realized;
    bool deadlines_met = true;
};

DispatchOutcome dispatch_realized(const std::vector<ClusterSpec>& catalog,
                                  const ScenarioTrace& realized_trace,
                                  const std::vector<double>& purchase,
                                  const PriceCurve& prices,
                                  const ArrivalRateProfile& forecast,
                                  const std::string& scheduler, int horizon) {
    NidDispatchState state = NidDispatchState::initial(catalog.size(), horizon);
    MpcConfig mpc;
    mpc.forecast = &forecast;
    MpcStepResult last_plan;
    for (int t = 0; t < horizon; ++t) {
        state.observe_arrivals(realized_trace, t);
        std::vector<Count> inc;
        if (scheduler == "mpc") {
            if (t % std::max(1, mpc.resolve_every_hours) == 0) {
                last_plan = mpc_schedule_step(state, catalog, purchase, prices, mpc, t);
                inc = last_plan.increments;
            } else {
                inc = commit_from_plan(state, catalog, last_plan, t);
            }
        } else {
            inc = edf_schedule_step(state, catalog, purchase, t);
        }
        state.commit(inc, t);
    }
    DispatchOutcome out;
    out.realized = state.realized_load(catalog);
    for (std::size_t q = 0; q < catalog.size(); ++q) {
        const auto& p = catalog[q].nid();
        for (int h = 0; h < horizon; ++h)
            if (state.cum_activations(static_cast<ClusterId>(q), h) <
                state.cum_arrivals(static_cast<ClusterId>(q), h - p.max_start_delay))
                out.deadlines_met = false;
    }
    return out;
}

} // namespace

RunReport run_phev_study(const ExperimentConfig& config) {
    config.validate();
    const double t0 = now_seconds();
    RunReport report;
    report.config_digest = config_hash(config);
    report.seed = config.seed;

    auto catalog = ev_case_catalog();
    if (!config.catalog_file.empty()) {
        std::ifstream in(config.catalog_file);
        catalog = read_cluster_catalog(in);
    }
    auto profile = ev_case_profile(config.scale);
    if (!config.arrival_profile_file.empty()) {
        std::ifstream in(config.arrival_profile_file);
        profile = read_rate_profile(in);
    }
    if (profile.rates.size() != catalog.size())
        throw Error("run_phev_study: arrival profile does not match the catalog");
    PriceCurve prices = config.price_file.empty()
                            ? make_default_price_curve(profile.horizon_hours)
                            : read_price_files(config.price_file);
    if (prices.hours < profile.horizon_hours)
        throw Error("run_phev_study: price curve shorter than the study horizon");

    report.base_load = make_default_base_load(profile.horizon_hours, config.scale);
    if (!config.base_load_file.empty()) {
        std::ifstream in(config.base_load_file);
        report.base_load = read_column_series(in);
    }

    auto scenarios = build_scenario_set(profile, config.scenario_count,
                                        derive_seed(config.seed, 0x97AD));
    auto realized_trace = sample_scenario(profile, derive_seed(config.seed, 0x6EA1));

    report.flexible_energy = 0.0;
    for (std::size_t q = 0; q < catalog.size(); ++q)
        report.flexible_energy +=
            static_cast<double>(realized_trace.cumulative_at(static_cast<ClusterId>(q), 0,
                                                             profile.horizon_hours - 1)) *
            catalog[q].nid().pulse_energy();

    PlanResult plans[2];
    plans[0] = plan_forward_clustered(scenarios, prices, catalog);
    plans[1] = plan_forward_tank(scenarios, prices, catalog);
    const char* model_names[2] = {"clustered", "tank"};

    for (int m = 0; m < 2; ++m) {
        for (const char* sched : {"mpc", "edf"}) {
            auto outcome = dispatch_realized(catalog, realized_trace, plans[m].purchase,
                                             prices, profile, sched,
                                             profile.horizon_hours);
            PhevSeries series;
            series.model = model_names[m];
            series.scheduler = sched;
            series.purchase = plans[m].purchase;
            series.realized = outcome.realized;
            series.deviation.resize(profile.horizon_hours);
            for (int h = 0; h < profile.horizon_hours; ++h)
                series.deviation[h] = outcome.realized[h] - plans[m].purchase[h];
            series.plan_expected_cost = plans[m].expected_cost;
            std::vector<double> sub(outcome.realized.size() * prices.substeps);
            for (std::size_t h = 0; h < outcome.realized.size(); ++h)
                for (int l = 0; l < prices.substeps; ++l)
                    sub[h * prices.substeps + l] = outcome.realized[h];
            series.realized_cost =
                plans[m].forward_cost + realtime_cost(sub, plans[m].purchase, prices);
            for (double d : series.deviation) series.total_abs_deviation += std::abs(d);
            series.purchase_total_variation = plans[m].total_variation();
            if (!outcome.deadlines_met) {
                report.invariants_ok = false;
                report.invariant_failures.push_back(std::string(model_names[m]) + "/" +
                                                    sched + ": missed deadline");
            }
            report.phev.push_back(std::move(series));
        }
    }
    report.wall_seconds = now_seconds() - t0;
    return report;
}

// ---------------------------------------------------------------------------
// TCL study

RunReport run_tcl_study(const ExperimentConfig& config) {
    config.validate();
    const double t0 = now_seconds();
    RunReport report;
    report.config_digest = config_hash(config);
    report.seed = config.seed;

    TclCaseConfig case_config;
    case_config.population = static_cast<int>(std::lround(10000.0 * config.scale));
    auto catalog = build_tcl_case_catalog(case_config);
    auto units = draw_tcl_units(catalog, case_config.population,
                                derive_seed(config.seed, 0x7C15));

    std::vector<double> ambient = make_default_tcl_ambient();
    if (!config.ambient_file.empty()) {
        std::ifstream in(config.ambient_file);
        ambient = read_column_series(in);
    }
    const int hours = static_cast<int>(ambient.size());

    std::vector<std::vector<double>> occupancy(catalog.specs.size(),
                                               std::vector<double>(hours, 0.0));
    for (const auto& u : units)
        for (int h = 0; h < hours; ++h) occupancy[u.cluster][h] += 1.0;

    report.tcl_baseline_w = tcl_baseline_load(catalog.specs, occupancy, ambient);
    CapacityConfig cap_config;
    cap_config.reference_units = config.capacity_reference_units;
    cap_config.seed = derive_seed(config.seed, 0xCAB);
    auto capacity = simulated_capacity(catalog, occupancy, ambient, cap_config);
    report.tcl_env_min_w = capacity.envelopes.min_load;
    report.tcl_env_max_w = capacity.envelopes.max_load;
    report.capacity_conservative_w = capacity.conservative;
    report.capacity_simulated_w = capacity.simulated;
    for (ClusterId q : capacity.failed_clusters) {
        report.invariants_ok = false;
        report.invariant_failures.push_back("capacity bisection failed for cluster " +
                                            std::to_string(q));
    }

    // tracking run
    const double offered = config.capacity_override_watts > 0.0
                               ? config.capacity_override_watts
                               : capacity.simulated;
    std::vector<double> normalized;
    if (!config.signal_file.empty()) {
        std::ifstream in(config.signal_file);
        normalized = read_normalized_signal(in);
    } else {
        normalized = make_default_regulation_signal(hours * 60,
                                                    derive_seed(config.seed, 0x51D));
    }
    RegulationSignal signal = scale_signal(normalized, offered);
    const int minutes = std::min<int>(hours * 60, static_cast<int>(signal.watts.size()));

    TclPopulationSim sim(units, case_config.courtesy_minutes,
                         derive_seed(config.seed, 0x7AC));
    sim.initialize_reports(ambient[0]);
    report.track_target_w.reserve(minutes);
    report.track_realized_w.reserve(minutes);
    report.sampled_unit_temps_f.assign(3, {});
    int within = 0;
    const double tolerance = 0.05 * (capacity.simulated > 0 ? capacity.simulated : offered);
    double measured = sim.realized_load_watts();
    double correction = 0.0; // integral action against unforecast switches
    for (int minute = 0; minute < minutes; ++minute) {
        int h = std::min(minute / 60, hours - 1);
        double target = report.tcl_baseline_w[h] + signal.watts[minute];
        auto coarse = coarse_cluster(sim.visible_reports(), sim.mean_power_watts());
        auto cmds = tcl_track_step(coarse, report.tcl_baseline_w[h],
                                   signal.watts[minute] + correction,
                                   sim.mean_power_watts(), measured);
        auto stats = sim.step(cmds, ambient[h]);
        report.band_violation_unit_minutes += stats.band_violations;
        const double metered = sim.metered_load_watts();
        // level feedback from the end-of-minute state; integral action on the
        // metered deviation that the acceptance rule scores
        measured = sim.realized_load_watts();
        correction = std::clamp(correction - 0.35 * (metered - target), -0.3 * target,
                                0.3 * target);
        report.track_target_w.push_back(target);
        report.track_realized_w.push_back(metered);
        if (std::abs(metered - target) < tolerance) within++;
        for (int s = 0; s < 3 && s < static_cast<int>(sim.units().size()); ++s)
            report.sampled_unit_temps_f[s].push_back(sim.units()[s].temp_f);
    }
    report.tracking_within_tolerance_frac =
        minutes > 0 ? static_cast<double>(within) / minutes : 0.0;
    report.tracking_acceptable = report.tracking_within_tolerance_frac >= 0.95;
    if (report.band_violation_unit_minutes > 0) {
        report.invariants_ok = false;
        report.invariant_failures.push_back("comfort band violations during tracking");
    }
    report.wall_seconds = now_seconds() - t0;
    return report;
}

// ---------------------------------------------------------------------------
// Communication study

RunReport run_comm_study(const ExperimentConfig& config) {
    config.validate();
    const double t0 = now_seconds();
    RunReport report;
    report.config_digest = config_hash(config);
    report.seed = config.seed;

    const int minutes = 24 * 60;
    std::vector<double> ambient = make_default_ambient_day();
    if (!config.ambient_file.empty()) {
        std::ifstream in(config.ambient_file);
        ambient = read_column_series(in);
    }

    // per-EV arrival probability per minute from the case arrival shape
    auto profile = ev_case_profile(1.0);
    double total = profile.total_expected();
    std::vector<double> ev_prob(minutes, 0.0);
    for (int minute = 0; minute < minutes; ++minute) {
        int h = minute / 60;
        double hour_rate = 0.0;
        for (std::size_t q = 0; q < profile.rates.size(); ++q)
            hour_rate += profile.rates[q][0][h];
        ev_prob[minute] = hour_rate / total / 60.0; // one arrival per EV per day
    }

    // TCL switch-report probability per minute: two reports per on/off cycle
    TclCaseConfig case_config;
    auto catalog = build_tcl_case_catalog(case_config);
    const int n_tcl = config.households * config.tcls_per_household;
    auto units = draw_tcl_units(catalog, n_tcl, derive_seed(config.seed, 0xC0));

    report.uplink_pps_per_minute.resize(minutes);
    Neighborhood hood;
    hood.households = config.households;
    hood.latency_ratio = 0.007 / 60.0;
    hood.interval_seconds = 60.0;
    const int n_ev = config.households * config.evs_per_household;
    hood.transmit_prob.resize(n_ev + n_tcl);

    for (int minute = 0; minute < minutes; ++minute) {
        int h = std::min(minute / 60, static_cast<int>(ambient.size()) - 1);
        for (int i = 0; i < n_ev; ++i) hood.transmit_prob[i] = ev_prob[minute];
        for (int i = 0; i < n_tcl; ++i) {
            const auto& p = units[i].params;
            double rate;
            try {
                auto d = tcl_duty_cycle(p, ambient[h], p.lower_bound(), p.upper_bound());
                rate = 2.0 / (d.tau_on_min + d.tau_off_min); // switch events per minute
            } catch (const Error&) {
                rate = 0.0; // band unreachable at this ambient: unit stays put
            }
            hood.transmit_prob[n_ev + i] = std::min(1.0, rate);
        }
        report.uplink_pps_per_minute[minute] = mac_throughput(hood);
    }
    report.peak_pps = 0.0;
    for (double v : report.uplink_pps_per_minute) report.peak_pps = std::max(report.peak_pps, v);

    report.coverage = coverage_limits(0.007, 100.0, report.peak_pps);
    report.forward_values_per_minute =
        static_cast<double>(ev_case_catalog().size()) + 60.0; // clusters relayed upstream
    report.forward_bytes_per_minute = report.forward_values_per_minute; // one byte each
    report.wall_seconds = now_seconds() - t0;
    return report;
}

// ---------------------------------------------------------------------------

namespace {

std::ofstream open_table(const std::string& dir, const std::string& name,
                         const RunReport& report, std::vector<std::string>& written) {
    std::filesystem::create_directories(dir);
    std::string path = dir + "/" + name;
    std::ofstream out(path);
    if (!out) throw Error("write_report_tables: cannot write " + path);
    out << "# config=" << std::hex << report.config_digest << std::dec
        << " seed=" << report.seed << '\n';
    written.push_back(path);
    return out;
}

} // namespace

std::vector<std::string> write_report_tables(const RunReport& report,
                                             const ExperimentConfig& config,
                                             const std::string& dir) {
    std::vector<std::string> written;
    (void)config;
    for (const auto& series : report.phev) {
        auto out = open_table(dir, "phev_" + series.model + "_" + series.scheduler + ".csv",
                              report, written);
        out << "hour,purchase,realized,deviation,base_load\n";
        for (std::size_t h = 0; h < series.purchase.size(); ++h)
            out << h << ',' << series.purchase[h] << ',' << series.realized[h] << ','
                << series.deviation[h] << ','
                << (h < report.base_load.size() ? report.base_load[h] : 0.0) << '\n';
        out << "# plan_cost=" << series.plan_expected_cost
            << " realized_cost=" << series.realized_cost
            << " total_abs_deviation=" << series.total_abs_deviation
            << " purchase_total_variation=" << series.purchase_total_variation << '\n';
    }
    if (!report.tcl_baseline_w.empty()) {
        auto out = open_table(dir, "tcl_capacity.csv", report, written);
        out << "hour,baseline_w,env_min_w,env_max_w\n";
        for (std::size_t h = 0; h < report.tcl_baseline_w.size(); ++h)
            out << h << ',' << report.tcl_baseline_w[h] << ',' << report.tcl_env_min_w[h]
                << ',' << report.tcl_env_max_w[h] << '\n';
        out << "# M_w=" << report.capacity_conservative_w
            << " Mprime_w=" << report.capacity_simulated_w << '\n';
    }
    if (!report.track_target_w.empty()) {
        auto out = open_table(dir, "tcl_tracking.csv", report, written);
        out << "minute,target_w,realized_w,unit0_f,unit1_f,unit2_f\n";
        for (std::size_t m = 0; m < report.track_target_w.size(); ++m) {
            out << m << ',' << report.track_target_w[m] << ',' << report.track_realized_w[m];
            for (int s = 0; s < 3; ++s)
                out << ','
                    << (s < static_cast<int>(report.sampled_unit_temps_f.size()) &&
                                m < report.sampled_unit_temps_f[s].size()
                            ? report.sampled_unit_temps_f[s][m]
                            : 0.0);
            out << '\n';
        }
        out << "# within_tolerance=" << report.tracking_within_tolerance_frac
            << " acceptable=" << (report.tracking_acceptable ? 1 : 0) << '\n';
    }
    if (!report.uplink_pps_per_minute.empty()) {
        auto out = open_table(dir, "comm_uplink.csv", report, written);
        out << "minute,packets_per_second\n";
        for (std::size_t m = 0; m < report.uplink_pps_per_minute.size(); ++m)
            out << m << ',' << report.uplink_pps_per_minute[m] << '\n';
        out << "# peak_pps=" << report.peak_pps
            << " capacity_pps=" << report.coverage.capacity_pps_floor
            << " density_pps_m2=" << report.coverage.density_truncated
            << " capacity_ratio=" << report.coverage.capacity_ratio
            << " forward_bytes_per_min=" << report.forward_bytes_per_minute << '\n';
    }
    return written;
}

} // namespace statebin
