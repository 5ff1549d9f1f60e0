#include "statebin/tclsim.hpp"

#include <algorithm>
#include <cmath>

#include "statebin/popmodel.hpp"
#include "statebin/rng.hpp"

namespace statebin {

namespace {

constexpr double kBtuPerHourPerWatt = 3.412142;
constexpr double kFPerC = 9.0 / 5.0;

double bin_midpoint(double lo, double hi, int levels, int idx) {
    double w = (hi - lo) / levels;
    return lo + w * (idx + 0.5);
}

} // namespace

TclClusterParams tcl_params_from_raw(double power_watts, double loss_w_per_c,
                                     double setpoint_f, double band_f,
                                     const TclCaseConfig& config) {
    TclClusterParams p;
    p.power_watts = power_watts;
    p.loss_w_per_c = loss_w_per_c;
    p.setpoint_f = setpoint_f;
    p.band_f = band_f;
    const double c = config.thermal_capacitance_btu_per_f;
    // UA [Btu/(h F)] = UA [W/C] * 3.412 / 1.8 ; heat output = cop * draw
    const double ua_btu_h_f = loss_w_per_c * kBtuPerHourPerWatt / kFPerC;
    const double heat_btu_h = config.heat_cop * power_watts * kBtuPerHourPerWatt;
    p.loss_per_min = ua_btu_h_f / (60.0 * c);
    p.gain_f_per_min = heat_btu_h / (60.0 * c);
    p.noise_sigma_f = config.noise_sigma_f;
    return p;
}

TclCaseCatalog build_tcl_case_catalog(const TclCaseConfig& config) {
    TclCaseCatalog catalog;
    catalog.config = config;
    int id = 0;
    for (int ig = 0; ig < config.levels_power; ++ig)
        for (int ik = 0; ik < config.levels_loss; ++ik)
            for (int is = 0; is < config.levels_setpoint; ++is)
                for (int ib = 0; ib < config.levels_band; ++ib) {
                    double g = bin_midpoint(config.power_lo_w, config.power_hi_w,
                                            config.levels_power, ig);
                    double k = bin_midpoint(config.loss_lo_wc, config.loss_hi_wc,
                                            config.levels_loss, ik);
                    double sp = bin_midpoint(config.setpoint_lo_f, config.setpoint_hi_f,
                                             config.levels_setpoint, is);
                    double b = bin_midpoint(config.band_lo_f, config.band_hi_f,
                                            config.levels_band, ib);
                    ClusterSpec spec;
                    spec.id = id++;
                    spec.category = Category::Tcl;
                    spec.params = tcl_params_from_raw(g, k, sp, b, config);
                    auto grid = tcl_default_grid(std::get<TclClusterParams>(spec.params));
                    spec.state_space.resize(grid.bins);
                    for (int x = 0; x < grid.bins; ++x) spec.state_space[x] = x;
                    catalog.specs.push_back(std::move(spec));

                    TclCaseCatalog::BinRange r;
                    double gw = (config.power_hi_w - config.power_lo_w) / config.levels_power;
                    double kw = (config.loss_hi_wc - config.loss_lo_wc) / config.levels_loss;
                    double sw =
                        (config.setpoint_hi_f - config.setpoint_lo_f) / config.levels_setpoint;
                    double bw = (config.band_hi_f - config.band_lo_f) / config.levels_band;
                    r.power_lo = config.power_lo_w + gw * ig;
                    r.power_hi = r.power_lo + gw;
                    r.loss_lo = config.loss_lo_wc + kw * ik;
                    r.loss_hi = r.loss_lo + kw;
                    r.setpoint_lo = config.setpoint_lo_f + sw * is;
                    r.setpoint_hi = r.setpoint_lo + sw;
                    r.band_lo = config.band_lo_f + bw * ib;
                    r.band_hi = r.band_lo + bw;
                    catalog.bins.push_back(r);
                }
    return catalog;
}

namespace {

TclUnit make_unit(double g, double k, double sp, double b, const TclCaseCatalog& catalog,
                  std::mt19937_64& rng) {
    TclUnit u;
    u.params = tcl_params_from_raw(g, k, sp, b, catalog.config);

    ApplianceRecord rec;
    rec.category = Category::Tcl;
    rec.tcl_power_watts = g;
    rec.tcl_loss_w_per_c = k;
    rec.tcl_setpoint_f = sp;
    rec.tcl_band_f = b;
    u.cluster = assign_cluster(rec, catalog.specs);

    std::uniform_real_distribution<double> in_band(u.params.lower_bound(),
                                                   u.params.upper_bound());
    u.temp_f = in_band(rng);
    std::bernoulli_distribution on(catalog.config.initial_on_prob);
    u.on = on(rng);
    return u;
}

} // namespace

std::vector<TclUnit> draw_tcl_units(const TclCaseCatalog& catalog, int count,
                                    std::uint64_t seed) {
    auto rng = make_rng(seed, 0x7C1);
    const auto& c = catalog.config;
    std::uniform_real_distribution<double> g_law(c.power_lo_w, c.power_hi_w);
    std::uniform_real_distribution<double> k_law(c.loss_lo_wc, c.loss_hi_wc);
    std::uniform_real_distribution<double> sp_law(c.setpoint_lo_f, c.setpoint_hi_f);
    std::uniform_real_distribution<double> b_law(c.band_lo_f, c.band_hi_f);

    std::vector<TclUnit> units;
    units.reserve(count);
    for (int i = 0; i < count; ++i)
        units.push_back(
            make_unit(g_law(rng), k_law(rng), sp_law(rng), b_law(rng), catalog, rng));
    return units;
}

std::vector<TclUnit> draw_cluster_reference_units(const TclCaseCatalog& catalog,
                                                  ClusterId q, int count,
                                                  std::uint64_t seed) {
    if (q < 0 || static_cast<std::size_t>(q) >= catalog.bins.size())
        throw Error("draw_cluster_reference_units: bad cluster id");
    auto rng = make_rng(seed, 0x7C2 + static_cast<std::uint64_t>(q));
    const auto& r = catalog.bins[q];
    std::uniform_real_distribution<double> g_law(r.power_lo, r.power_hi);
    std::uniform_real_distribution<double> k_law(r.loss_lo, r.loss_hi);
    std::uniform_real_distribution<double> sp_law(r.setpoint_lo, r.setpoint_hi);
    std::uniform_real_distribution<double> b_law(r.band_lo, r.band_hi);

    std::vector<TclUnit> units;
    units.reserve(count);
    for (int i = 0; i < count; ++i)
        units.push_back(
            make_unit(g_law(rng), k_law(rng), sp_law(rng), b_law(rng), catalog, rng));
    return units;
}

Count TclTrackCommands::total() const {
    Count n = 0;
    for (Count v : turn_on) n += v;
    for (Count v : turn_off) n += v;
    return n;
}

TclPopulationSim::TclPopulationSim(std::vector<TclUnit> units, double courtesy_minutes,
                                   std::uint64_t seed)
    : units_(std::move(units)), courtesy_minutes_(courtesy_minutes), seed_(seed) {
    for (auto& u : units_) {
        u.reported = false;
        u.courtesy_left_min = 0.0;
    }
}

void TclPopulationSim::initialize_reports(double ambient_f) {
    refresh_reports(ambient_f);
}

std::vector<CoarseUnitReport> TclPopulationSim::visible_reports() const {
    std::vector<CoarseUnitReport> reports(units_.size());
    for (std::size_t i = 0; i < units_.size(); ++i) {
        reports[i].reported = units_[i].reported;
        reports[i].deadline_min = units_[i].deadline_left_min;
        reports[i].on = units_[i].on;
    }
    return reports;
}

double TclPopulationSim::realized_load_watts() const {
    double w = 0.0;
    for (const auto& u : units_)
        if (u.on) w += u.params.power_watts;
    return w;
}

double TclPopulationSim::mean_power_watts() const {
    if (units_.empty()) return 0.0;
    double w = 0.0;
    for (const auto& u : units_) w += u.params.power_watts;
    return w / static_cast<double>(units_.size());
}

Count TclPopulationSim::on_count() const {
    Count n = 0;
    for (const auto& u : units_)
        if (u.on) n++;
    return n;
}

// Advances the unit for `duration` minutes with the exact exponential
// solution, flipping the switch at every comfort-boundary crossing.
// on_fraction accumulates the time spent ON (in minutes).
int TclPopulationSim::advance_unit(TclUnit& u, double ambient_f, double eps_f,
                                   double& on_fraction, double duration) {
    const double k = u.params.loss_per_min;
    const double lower = u.params.lower_bound();
    const double upper = u.params.upper_bound();
    int switches = 0;
    double remaining = duration;
    int guard = 0;

    auto force_if_outside = [&]() {
        if (u.temp_f > upper + 1e-9 && u.on) {
            u.on = false;
            u.courtesy_left_min = courtesy_minutes_;
            u.reported = false;
            switches++;
        } else if (u.temp_f < lower - 1e-9 && !u.on) {
            u.on = true;
            u.courtesy_left_min = courtesy_minutes_;
            u.reported = false;
            switches++;
        }
    };

    force_if_outside();
    while (remaining > 1e-9 && ++guard < 64) {
        const double steady = ambient_f + eps_f / k + (u.on ? u.params.on_rise() : 0.0);
        const double decay = std::exp(-k * remaining);
        const double x_end = steady + (u.temp_f - steady) * decay;

        double boundary = 0.0;
        bool crossing = false;
        if (steady > u.temp_f && x_end > upper + 1e-12 && u.temp_f <= upper) {
            boundary = upper;
            crossing = true;
        } else if (steady < u.temp_f && x_end < lower - 1e-12 && u.temp_f >= lower) {
            boundary = lower;
            crossing = true;
        }
        if (!crossing) {
            if (u.on) on_fraction += remaining;
            u.temp_f = x_end;
            break;
        }
        const double tau =
            std::clamp(std::log((u.temp_f - steady) / (boundary - steady)) / k, 0.0,
                       remaining);
        if (u.on) on_fraction += tau;
        u.temp_f = boundary;
        remaining -= tau;
        u.on = !u.on;
        u.courtesy_left_min = courtesy_minutes_;
        u.reported = false;
        switches++;
    }
    return switches;
}

void TclPopulationSim::refresh_reports(double ambient_f) {
    for (auto& u : units_) {
        if (u.reported) {
            u.deadline_left_min = std::max(0.0, u.deadline_left_min - 1.0);
            continue;
        }
        u.courtesy_left_min -= 1.0;
        if (u.courtesy_left_min > 1e-9) continue;
        u.courtesy_left_min = 0.0;
        const double alpha_mean = u.params.loss_per_min * ambient_f;
        double deadline;
        try {
            deadline = tcl_switch_deadline(u.temp_f, u.on, u.params, alpha_mean);
        } catch (const Error&) {
            deadline = 1e9; // boundary unreachable: park in the farthest bin
        }
        u.deadline_left_min = deadline;
        u.reported = true;
    }
}

TclPopulationSim::StepStats TclPopulationSim::step(const TclTrackCommands& commands,
                                                   double ambient_f) {
    StepStats stats;
    const int bins = static_cast<int>(commands.turn_on.size());

    if (bins > 0) {
        std::vector<Count> need_on(commands.turn_on);
        std::vector<Count> need_off(commands.turn_off);
        for (auto& u : units_) {
            if (!u.reported) continue;
            int bin = std::clamp(static_cast<int>(std::floor(u.deadline_left_min)), 0,
                                 bins - 1);
            if (!u.on && need_on[bin] > 0) {
                u.on = true;
                need_on[bin]--;
                u.courtesy_left_min = courtesy_minutes_;
                u.reported = false;
                stats.commanded_switches++;
            } else if (u.on && need_off[bin] > 0) {
                u.on = false;
                need_off[bin]--;
                u.courtesy_left_min = courtesy_minutes_;
                u.reported = false;
                stats.commanded_switches++;
            }
        }
    }

    auto rng = make_rng(seed_, 0xF00D + static_cast<std::uint64_t>(minute_));
    std::normal_distribution<double> noise(0.0, 1.0);
    double energy_w = 0.0;
    for (auto& u : units_) {
        // eps is the deviation of alpha from its mean k * ambient; its sd is
        // the configured per-step temperature noise
        double eps = u.params.noise_sigma_f > 0.0 ? noise(rng) * u.params.noise_sigma_f : 0.0;
        double on_fraction = 0.0;
        stats.autonomous_switches += advance_unit(u, ambient_f, eps, on_fraction, 1.0);
        energy_w += on_fraction * u.params.power_watts;
        if (u.temp_f > u.params.upper_bound() + 1e-6 ||
            u.temp_f < u.params.lower_bound() - 1e-6)
            stats.band_violations++;
    }
    last_minute_energy_w_ = energy_w;
    minute_++;
    refresh_reports(ambient_f);
    return stats;
}

TclPopulationSim::StepStats TclPopulationSim::step_autonomous(double ambient_f) {
    TclTrackCommands none;
    none.turn_on.assign(1, 0);
    none.turn_off.assign(1, 0);
    return step(none, ambient_f);
}

} // namespace statebin
