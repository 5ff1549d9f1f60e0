#pragma once

// Simulation-side TCL machinery: the per-unit thermostat model (exact
// exponential integration with boundary-crossing events), the case-study
// catalog generator, and the minute-driven population simulator consumed by
// the coarse-deadline scheduler.

#include <cstdint>
#include <vector>

#include "statebin/categories.hpp"
#include "statebin/types.hpp"

namespace statebin {

// Parameter laws and unit conversions for the bundled residential-heating
// case: draws are uniform, quantized into 3 x 4 x 4 x 2 = 96 clusters. The
// reduced thermal model needs a per-unit thermal capacitance which the source
// distributions do not pin down; it is an explicit, documented constant here.
struct TclCaseConfig {
    int population = 10000;
    double thermal_capacitance_btu_per_f = 620.0;
    // the fleet heats with heat pumps: thermal output = cop * electrical draw
    double heat_cop = 2.5;
    double noise_sigma_f = 0.05;

    int levels_power = 3, levels_loss = 4, levels_setpoint = 4, levels_band = 2;
    double power_lo_w = 2000.0, power_hi_w = 4000.0;  // electrical = heat, watts
    double loss_lo_wc = 50.0, loss_hi_wc = 200.0;     // UA, W per deg C
    double setpoint_lo_f = 69.0, setpoint_hi_f = 75.0;
    double band_lo_f = 2.0, band_hi_f = 4.0;

    double initial_on_prob = 0.15;
    double courtesy_minutes = 1.0;
};

// Converts raw draws (watts, W/C) into the per-minute reduced model.
TclClusterParams tcl_params_from_raw(double power_watts, double loss_w_per_c,
                                     double setpoint_f, double band_f,
                                     const TclCaseConfig& config);

struct TclCaseCatalog {
    TclCaseConfig config;
    std::vector<ClusterSpec> specs;

    struct BinRange {
        double power_lo, power_hi;
        double loss_lo, loss_hi;
        double setpoint_lo, setpoint_hi;
        double band_lo, band_hi;
    };
    std::vector<BinRange> bins;
};

TclCaseCatalog build_tcl_case_catalog(const TclCaseConfig& config);

// A simulated unit: carries its own (unquantized) physics.
struct TclUnit {
    TclClusterParams params;
    ClusterId cluster = -1;
    double temp_f = 0.0;
    bool on = false;
    double courtesy_left_min = 0.0;
    bool reported = false;
    double deadline_left_min = 0.0;
};

// Draws `count` units iid from the case laws, assigns catalog clusters, and
// randomizes initial temperature (uniform in band) and switch state.
std::vector<TclUnit> draw_tcl_units(const TclCaseCatalog& catalog, int count,
                                    std::uint64_t seed);

// Reference population for one cluster: raw parameters uniform within the
// cluster's quantization bin.
std::vector<TclUnit> draw_cluster_reference_units(const TclCaseCatalog& catalog,
                                                  ClusterId q, int count,
                                                  std::uint64_t seed);

// Per-bin switch commands for one minute (indexed by deadline bin).
struct TclTrackCommands {
    std::vector<Count> turn_on;  // applied to OFF units in each bin
    std::vector<Count> turn_off; // applied to ON units in each bin
    double residual_watts = 0.0; // unmet part of the requested change

    Count total() const;
};

// Minute-driven population simulator. Units autonomously switch whenever
// their temperature reaches a comfort boundary, which is also what bounds
// any excursion to less than one step.
class TclPopulationSim {
public:
    TclPopulationSim(std::vector<TclUnit> units, double courtesy_minutes,
                     std::uint64_t seed);

    const std::vector<TclUnit>& units() const { return units_; }
    // makes every unit submit its first deadline (call once before stepping)
    void initialize_reports(double ambient_f);
    std::vector<CoarseUnitReport> visible_reports() const;
    double realized_load_watts() const;
    // metered average power over the last simulated minute (accounts for
    // mid-minute switches by their exact on-time fraction)
    double metered_load_watts() const { return last_minute_energy_w_; }
    double mean_power_watts() const;
    Count on_count() const;

    struct StepStats {
        int commanded_switches = 0;
        int autonomous_switches = 0;
        int band_violations = 0; // units measured outside their band at the tick
    };

    // Applies the commands, advances the physics one minute at the given
    // ambient temperature, then lets units report after their courtesy.
    StepStats step(const TclTrackCommands& commands, double ambient_f);

    // Advances without any scheduler action (pure thermostat behavior).
    StepStats step_autonomous(double ambient_f);

private:
    std::vector<TclUnit> units_;
    double courtesy_minutes_;
    std::uint64_t seed_;
    long minute_ = 0;
    double last_minute_energy_w_ = 0.0;

    int advance_unit(TclUnit& u, double ambient_f, double eps_f, double& on_fraction,
                     double duration);
    void refresh_reports(double ambient_f);
};

} // namespace statebin
