#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "statebin/planner.hpp"
#include "statebin/rng.hpp"
#include "statebin/tclsim.hpp"
#include "support/oracles.hpp"

using namespace statebin;

TEST_CASE("raw-parameter conversion keeps the physical orderings") {
    TclCaseConfig config;
    auto a = tcl_params_from_raw(3000, 125, 72, 3, config);
    CHECK(a.power_watts == 3000);
    CHECK(a.loss_per_min > 0.0);
    CHECK(a.gain_f_per_min > 0.0);
    // stronger heater, same loss: higher rise
    auto b = tcl_params_from_raw(4000, 125, 72, 3, config);
    CHECK(b.on_rise() > a.on_rise());
    // leakier envelope: faster loss, smaller rise
    auto c = tcl_params_from_raw(3000, 200, 72, 3, config);
    CHECK(c.loss_per_min > a.loss_per_min);
    CHECK(c.on_rise() < a.on_rise());
    // halving the thermal mass doubles both rates
    TclCaseConfig light = config;
    light.thermal_capacitance_btu_per_f = config.thermal_capacitance_btu_per_f / 2.0;
    auto d = tcl_params_from_raw(3000, 125, 72, 3, light);
    CHECK(d.loss_per_min == doctest::Approx(2.0 * a.loss_per_min));
    CHECK(d.gain_f_per_min == doctest::Approx(2.0 * a.gain_f_per_min));
}

TEST_CASE("case catalog has 96 clusters and covers its own draws") {
    TclCaseConfig config;
    auto catalog = build_tcl_case_catalog(config);
    CHECK(catalog.specs.size() == 96);
    CHECK(catalog.bins.size() == 96);
    auto units = draw_tcl_units(catalog, 500, 42);
    for (const auto& u : units) {
        REQUIRE(u.cluster >= 0);
        REQUIRE(u.cluster < 96);
        const auto& bin = catalog.bins[u.cluster];
        CHECK(u.params.power_watts >= bin.power_lo - 1e-9);
        CHECK(u.params.power_watts <= bin.power_hi + 1e-9);
        CHECK(u.temp_f >= u.params.lower_bound());
        CHECK(u.temp_f <= u.params.upper_bound());
    }
    // initial switch states follow the Bernoulli(0.15) law
    int on = 0;
    for (const auto& u : units)
        if (u.on) on++;
    CHECK(std::abs(on / 500.0 - 0.15) < 3.0 * std::sqrt(0.15 * 0.85 / 500.0));
}

TEST_CASE("reference units stay inside their cluster bin") {
    TclCaseConfig config;
    auto catalog = build_tcl_case_catalog(config);
    auto units = draw_cluster_reference_units(catalog, 17, 100, 7);
    for (const auto& u : units) CHECK(u.cluster == 17);
}

TEST_CASE("thermostat cycling keeps the temperature inside the band") {
    TclCaseConfig config;
    config.noise_sigma_f = 0.05;
    auto catalog = build_tcl_case_catalog(config);
    auto units = draw_cluster_reference_units(catalog, 5, 60, 11);
    TclPopulationSim sim(units, 1.0, 3);
    sim.initialize_reports(40.0);
    int violations = 0;
    for (int minute = 0; minute < 240; ++minute) {
        auto stats = sim.step_autonomous(40.0);
        violations += stats.band_violations;
    }
    CHECK(violations == 0);
    // the population actually cycles
    CHECK(sim.on_count() > 0);
    CHECK(sim.on_count() < 60);
}

TEST_CASE("long-run autonomous duty matches the closed form") {
    TclCaseConfig config;
    config.noise_sigma_f = 0.02;
    config.levels_power = 1;
    config.levels_loss = 1;
    config.levels_setpoint = 1;
    config.levels_band = 1;
    auto catalog = build_tcl_case_catalog(config);
    const auto& p = catalog.specs[0].tcl();
    const double ambient = 40.0;

    auto units = draw_cluster_reference_units(catalog, 0, 400, 21);
    TclPopulationSim sim(units, 1.0, 9);
    sim.initialize_reports(ambient);
    double on_sum = 0.0;
    int measured = 0;
    for (int minute = 0; minute < 360; ++minute) {
        sim.step_autonomous(ambient);
        if (minute >= 60) { // skip the initial transient
            on_sum += static_cast<double>(sim.on_count());
            measured++;
        }
    }
    double duty_sim = on_sum / measured / 400.0;
    auto duty = tcl_duty_cycle(p, ambient, p.lower_bound(), p.upper_bound());
    CHECK(std::abs(duty_sim - duty.duty) < 0.05);
}

TEST_CASE("courtesy period hides units from the coarse state") {
    TclCaseConfig config;
    auto catalog = build_tcl_case_catalog(config);
    auto units = draw_cluster_reference_units(catalog, 40, 30, 2);
    TclPopulationSim sim(units, /*courtesy=*/2.0, 4);
    sim.initialize_reports(40.0);
    auto reports = sim.visible_reports();
    int visible = 0;
    for (const auto& r : reports)
        if (r.reported) visible++;
    CHECK(visible == 30); // everyone reported at start

    // command a few switches: those units disappear until courtesy passes
    TclTrackCommands cmds;
    cmds.turn_on.assign(30, 0);
    cmds.turn_off.assign(30, 0);
    auto coarse = coarse_cluster(reports, sim.mean_power_watts());
    // pick any nonempty OFF bin to switch
    for (int tau = 0; tau < 30; ++tau)
        if (coarse.off[tau] > 0) {
            cmds.turn_on[tau] = std::min<Count>(3, coarse.off[tau]);
            break;
        }
    auto stats = sim.step(cmds, 40.0);
    CHECK(stats.commanded_switches > 0);
    int hidden = 0;
    for (const auto& r : sim.visible_reports())
        if (!r.reported) hidden++;
    CHECK(hidden >= stats.commanded_switches);
}

TEST_CASE("deadline reports agree with the switch-deadline closed form") {
    TclCaseConfig config;
    config.noise_sigma_f = 0.0; // deterministic physics for this check
    auto catalog = build_tcl_case_catalog(config);
    auto units = draw_cluster_reference_units(catalog, 60, 20, 8);
    TclPopulationSim sim(units, 1.0, 5);
    const double ambient = 40.0;
    sim.initialize_reports(ambient);
    auto reports = sim.visible_reports();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& u = sim.units()[i];
        double expect =
            tcl_switch_deadline(u.temp_f, u.on, u.params, u.params.loss_per_min * ambient);
        CHECK(reports[i].deadline_min == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("population simulation is deterministic given the seed") {
    TclCaseConfig config;
    auto catalog = build_tcl_case_catalog(config);
    auto units = draw_tcl_units(catalog, 80, 33);
    auto run = [&](std::uint64_t seed) {
        TclPopulationSim sim(units, 1.0, seed);
        sim.initialize_reports(40.0);
        std::vector<double> series;
        for (int minute = 0; minute < 60; ++minute) {
            sim.step_autonomous(40.0);
            series.push_back(sim.realized_load_watts());
        }
        return series;
    };
    CHECK(run(7) == run(7));
    CHECK(run(7) != run(8));
}
