#pragma once

// Core domain types shared by all statebin modules.
//
// Conventions used throughout the library:
//  * time is a 0-based integer step index; the step duration lives in
//    QuantizationConfig (60 min for planning, 1 min for TCL real time)
//  * battery-like states are integer charge levels, 1 level = 1 hour of
//    charging at rated power, so a switch of +1 level in one step is one
//    power unit
//  * TCL temperatures are degrees Fahrenheit; loss rates are per minute
//  * counts are exact 64-bit integers, relaxation to doubles happens only
//    inside the planner LPs

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace statebin {

using Count = std::int64_t;
using StateIndex = int;
using ClusterId = int;
using TimeIndex = int;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct QuantizationConfig {
    double delta_t_minutes = 60.0; // step duration
    double delta_x_kwh = 1.0;      // energy per state level

    void validate() const {
        if (delta_t_minutes <= 0.0 || delta_x_kwh <= 0.0)
            throw Error("QuantizationConfig: quantization steps must be positive");
    }
};

enum class Category : std::uint8_t {
    IdealBattery = 0,
    Ric = 1, // rate-constrained instantaneous consumption
    Is = 2,  // interruptible constant-rate service
    Nid = 3, // non-interruptible deferrable pulse
    Tcl = 4, // thermostatically controlled load
};

const char* category_name(Category c);

// Battery with charge rate limit and a deadline to reach a fraction of full
// charge. chi = horizon end, rho = 1, rate = capacity + 1 reduces to the
// ideal battery. Also reused for IS where the rate is the fixed charge step.
struct RicClusterParams {
    StateIndex capacity = 0;       // E: states 0..E
    TimeIndex deadline = 0;        // chi, time index of the deadline
    double required_fraction = 1.; // rho in (0,1]
    StateIndex max_rate = 1;       // G, states per step
    bool allow_discharge = false;  // V2G; off by default

    bool is_ideal() const {
        return required_fraction >= 1.0 && max_rate >= capacity + 1;
    }
};

// Deferrable appliance that, once started, follows a fixed pulse.
struct NidClusterParams {
    std::vector<double> pulse;  // power per step once started
    TimeIndex max_start_delay = 0; // chi, steps an appliance may wait

    double pulse_energy() const {
        double e = 0.0;
        for (double v : pulse) e += v;
        return e;
    }
};

// Thermostatically controlled load (heating convention: ON raises x).
struct TclClusterParams {
    double power_watts = 0.0;     // electrical draw when ON
    double gain_f_per_min = 0.0;  // heat gain G while ON, deg F per minute
    double setpoint_f = 0.0;      // x*, comfort band centre
    double band_f = 0.0;          // B, comfort band width
    double loss_per_min = 0.0;    // k, thermal loss rate per minute
    double loss_w_per_c = 0.0;    // UA value the cluster was quantized from
    int window_start_min = 0;     // [chi_s, chi_e) comfort clock window
    int window_end_min = 24 * 60;
    double noise_sigma_f = 0.05;  // per-step temperature noise, deg F
    double confidence = 0.95;     // eta for the chance constraint

    double lower_bound() const { return setpoint_f - band_f / 2.0; }
    double upper_bound() const { return setpoint_f + band_f / 2.0; }
    // steady-state temperature over ambient while ON
    double on_rise() const { return gain_f_per_min / loss_per_min; }
};

struct IdealBatteryParams {
    StateIndex capacity = 0;
};

using ClusterParams = std::variant<IdealBatteryParams, RicClusterParams,
                                   NidClusterParams, TclClusterParams>;

// Quantized constraint bundle for one cluster of one appliance category.
struct ClusterSpec {
    ClusterId id = 0;
    Category category = Category::IdealBattery;
    ClusterParams params;
    std::vector<StateIndex> state_space; // ordered discrete states

    StateIndex num_states() const { return static_cast<StateIndex>(state_space.size()); }
    bool has_state(StateIndex x) const {
        return x >= 0 && x < num_states();
    }

    const RicClusterParams& ric() const { return std::get<RicClusterParams>(params); }
    const NidClusterParams& nid() const { return std::get<NidClusterParams>(params); }
    const TclClusterParams& tcl() const { return std::get<TclClusterParams>(params); }
    const IdealBatteryParams& ideal() const { return std::get<IdealBatteryParams>(params); }
};

std::vector<StateIndex> battery_state_space(StateIndex capacity);

// Pre-quantization description of a single appliance. The id is visible to
// the simulation side only; planner and dispatch never see it.
struct ApplianceRecord {
    std::int64_t id = 0;
    Category category = Category::IdealBattery;
    TimeIndex arrival_time = 0;

    // kappa: initial state
    double initial_state = 0.0; // charge level or temperature
    bool initial_on = false;    // TCL switch state

    // theta: raw constraint tuple, category dependent
    double capacity = 0.0;        // battery E (charge-hours)
    double deadline = 0.0;        // battery chi (steps) / NID slack (steps)
    double required_fraction = 1.0;
    double max_rate = 0.0;        // battery G
    std::vector<double> pulse;    // NID load profile
    double tcl_power_watts = 0.0;
    double tcl_setpoint_f = 0.0;
    double tcl_band_f = 0.0;
    double tcl_loss_w_per_c = 0.0; // UA value, W per deg C
};

} // namespace statebin
