#include "statebin/categories.hpp"

#include <algorithm>
#include <cmath>

#include "statebin/rng.hpp"

namespace statebin {

namespace {

double normal_cdf(double x, double mean, double sigma) {
    return 0.5 * std::erfc(-(x - mean) / (sigma * std::sqrt(2.0)));
}

} // namespace

std::vector<StateIndex> neighbor_set(const ClusterSpec& cluster, StateIndex x) {
    if (!cluster.has_state(x))
        throw Error("neighbor_set: state outside cluster state space");
    std::vector<StateIndex> out;
    switch (cluster.category) {
        case Category::IdealBattery: {
            out = cluster.state_space;
            break;
        }
        case Category::Ric: {
            const auto& p = cluster.ric();
            StateIndex lo = p.allow_discharge ? std::max(0, x - p.max_rate) : x;
            StateIndex hi = std::min(p.capacity, x + p.max_rate);
            for (StateIndex s = lo; s <= hi; ++s) out.push_back(s);
            break;
        }
        case Category::Is: {
            const auto& p = cluster.ric();
            out.push_back(x);
            StateIndex up = std::min(x + p.max_rate, p.capacity);
            if (up != x) out.push_back(up);
            break;
        }
        case Category::Nid: {
            out.push_back(x);
            if (x == 0) out.push_back(1);
            break;
        }
        case Category::Tcl: {
            out = cluster.state_space;
            break;
        }
    }
    return out;
}

DeadlineReport deadline_feasible(const PopulationState& state,
                                 const std::vector<ClusterSpec>& catalog,
                                 TimeIndex t) {
    DeadlineReport report;
    for (std::size_t q = 0; q < catalog.size(); ++q) {
        const auto& spec = catalog[q];
        if (spec.category != Category::Ric && spec.category != Category::Is) continue;
        const auto& p = spec.ric();
        if (t < p.deadline) continue;
        const double threshold = p.required_fraction * p.capacity;
        for (StateIndex x = 0; x <= p.capacity; ++x) {
            if (static_cast<double>(x) < threshold - 1e-9 && state.occupancy[q][x] > 0) {
                report.feasible = false;
                report.violations.push_back(
                    DeadlineViolation{spec.id, x, state.occupancy[q][x]});
            }
        }
    }
    return report;
}

std::vector<double> nid_load(const std::vector<double>& activation_increments,
                             const std::vector<double>& pulse,
                             const std::vector<double>* cumulative_arrivals,
                             TimeIndex max_start_delay) {
    if (cumulative_arrivals) {
        const auto& a = *cumulative_arrivals;
        double d = 0.0;
        for (std::size_t t = 0; t < activation_increments.size(); ++t) {
            if (activation_increments[t] < -1e-9)
                throw Error("nid_load: negative activation increment");
            d += activation_increments[t];
            double at = t < a.size() ? a[t] : (a.empty() ? 0.0 : a.back());
            if (d > at + 1e-9)
                throw Error("nid_load: causality violation, activations exceed arrivals");
            std::int64_t lag = static_cast<std::int64_t>(t) - max_start_delay;
            double due = lag < 0 ? 0.0
                                 : (static_cast<std::size_t>(lag) < a.size()
                                        ? a[static_cast<std::size_t>(lag)]
                                        : (a.empty() ? 0.0 : a.back()));
            if (d < due - 1e-9)
                throw Error("nid_load: missed start deadline, d(t) < a(t - chi)");
        }
    }
    if (pulse.empty()) return std::vector<double>(activation_increments.size(), 0.0);
    std::vector<double> load(activation_increments.size() + pulse.size() - 1, 0.0);
    for (std::size_t t = 0; t < activation_increments.size(); ++t) {
        if (activation_increments[t] == 0.0) continue;
        for (std::size_t j = 0; j < pulse.size(); ++j)
            load[t + j] += activation_increments[t] * pulse[j];
    }
    return load;
}

std::vector<double> resample_pulse(const std::vector<double>& pulse,
                                   double from_dt_minutes, double to_dt_minutes) {
    if (from_dt_minutes <= 0.0 || to_dt_minutes <= 0.0)
        throw Error("resample_pulse: step durations must be positive");
    const double duration = from_dt_minutes * static_cast<double>(pulse.size());
    const std::size_t steps =
        static_cast<std::size_t>(std::ceil(duration / to_dt_minutes - 1e-9));
    std::vector<double> out(steps, 0.0);
    for (std::size_t j = 0; j < steps; ++j) {
        const double t0 = j * to_dt_minutes;
        const double t1 = std::min((j + 1) * to_dt_minutes, duration);
        // integrate the piecewise-constant source over [t0, t1)
        double energy = 0.0;
        std::size_t i0 = static_cast<std::size_t>(t0 / from_dt_minutes);
        for (std::size_t i = i0; i < pulse.size(); ++i) {
            double s0 = i * from_dt_minutes, s1 = (i + 1) * from_dt_minutes;
            double lo = std::max(s0, t0), hi = std::min(s1, t1);
            if (hi <= lo) break;
            energy += pulse[i] * (hi - lo);
        }
        out[j] = energy / to_dt_minutes;
    }
    return out;
}

StateIndex TemperatureGrid::nearest_bin(double temp_f) const {
    if (bins <= 0) throw Error("TemperatureGrid: empty grid");
    double idx = (temp_f - origin_f) / step_f;
    StateIndex x = static_cast<StateIndex>(std::lround(idx));
    return std::clamp(x, 0, bins - 1);
}

TemperatureGrid tcl_default_grid(const TclClusterParams& params, double margin_f) {
    TemperatureGrid g;
    g.step_f = 0.5;
    g.origin_f = params.lower_bound() - margin_f;
    g.bins = static_cast<int>(
                 std::ceil((params.band_f + 2.0 * margin_f) / g.step_f)) + 1;
    return g;
}

std::vector<double> tcl_transition_pmf(const TclClusterParams& params,
                                       const TemperatureGrid& grid,
                                       StateIndex x, bool on, double ambient_f) {
    if (grid.bins < 2)
        throw Error("tcl_transition_pmf: degenerate grid (need at least 2 bins)");
    const double span = grid.step_f * grid.bins;
    if (span < 6.0 * params.noise_sigma_f || span <= params.gain_f_per_min)
        throw Error("tcl_transition_pmf: state range too narrow for the noise support");
    if (x < 0 || x >= grid.bins)
        throw Error("tcl_transition_pmf: state outside grid");
    const double k = params.loss_per_min;
    const double temp = grid.center(x);
    const double mean = temp * (1.0 - k) + ambient_f * k + (on ? params.gain_f_per_min : 0.0);
    const double sigma = params.noise_sigma_f;

    std::vector<double> pmf(grid.bins, 0.0);
    if (sigma <= 0.0) {
        // point-mass noise: deterministic landing bin, folded to the grid
        pmf[grid.nearest_bin(mean)] = 1.0;
        return pmf;
    }
    double folded_out = 0.0;
    for (StateIndex j = 0; j < grid.bins; ++j) {
        double lo = grid.center(j) - grid.step_f / 2.0;
        double hi = grid.center(j) + grid.step_f / 2.0;
        double mass = normal_cdf(hi, mean, sigma) - normal_cdf(lo, mean, sigma);
        if (j == 0) {
            double below = normal_cdf(lo, mean, sigma);
            mass += below;
            folded_out += below;
        }
        if (j == grid.bins - 1) {
            double above = 1.0 - normal_cdf(hi, mean, sigma);
            mass += above;
            folded_out += above;
        }
        pmf[j] = mass;
    }
    (void)folded_out; // boundary folding is the documented modeling choice
    // remove the tiny numerical drift so rows sum to exactly 1
    double total = 0.0;
    for (double p : pmf) total += p;
    for (double& p : pmf) p /= total;
    return pmf;
}

void TclSwitchState::validate() const {
    if (off.size() != on.size())
        throw Error("TclSwitchState: off/on size mismatch");
    for (std::size_t x = 0; x < off.size(); ++x)
        if (off[x] < 0 || on[x] < 0)
            throw Error("TclSwitchState: negative occupancy split");
}

SwitchMatrix tcl_sample_switches(const TclSwitchState& split,
                                 const TclClusterParams& params,
                                 const TemperatureGrid& grid,
                                 double ambient_f,
                                 ClusterId q, std::size_t num_clusters,
                                 std::uint64_t seed) {
    split.validate();
    if (static_cast<int>(split.off.size()) != grid.bins)
        throw Error("tcl_sample_switches: split does not match grid");
    auto rng = make_rng(seed, static_cast<std::uint64_t>(q));
    SwitchMatrix d = SwitchMatrix::empty(num_clusters);

    for (StateIndex x = 0; x < grid.bins; ++x) {
        for (int b = 0; b <= 1; ++b) {
            Count n = b ? split.on[x] : split.off[x];
            if (n == 0) continue;
            auto pmf = tcl_transition_pmf(params, grid, x, b != 0, ambient_f);
            // multinomial via sequential conditional binomials
            double rest = 1.0;
            Count remaining = n;
            for (StateIndex j = 0; j < grid.bins && remaining > 0; ++j) {
                double p = rest > 1e-300 ? std::min(1.0, pmf[j] / rest) : 1.0;
                Count c;
                if (j == grid.bins - 1) {
                    c = remaining;
                } else {
                    std::binomial_distribution<Count> bin(remaining, p);
                    c = bin(rng);
                }
                remaining -= c;
                rest -= pmf[j];
                if (c > 0 && j != x) d.add(q, x, j, c);
            }
        }
    }
    return d;
}

double tcl_switch_deadline(double temp_f, bool on,
                           const TclClusterParams& params, double alpha) {
    const double k = params.loss_per_min;
    if (k <= 0.0) throw Error("tcl_switch_deadline: loss rate must be positive");
    const double lower = params.lower_bound();
    const double upper = params.upper_bound();
    if (temp_f < lower - 1e-12 || temp_f > upper + 1e-12)
        return 0.0; // outside the band: forced switch now

    const double steady = (alpha + (on ? 1.0 : 0.0) * params.gain_f_per_min) / k;
    const double boundary = on ? upper : lower;
    // the drift must carry the unit across its boundary: ON needs the steady
    // state above the band, OFF below it
    if ((on && steady <= upper + 1e-12) || (!on && steady >= lower - 1e-12))
        throw Error("tcl_switch_deadline: unreachable boundary (check gain/loss/ambient)");
    double ratio = (temp_f - steady) / (boundary - steady);
    if (ratio < 1.0) ratio = 1.0; // numeric guard at the boundary itself
    return std::log(ratio) / k;
}

Count CoarseTclState::total() const {
    Count n = 0;
    for (Count v : off) n += v;
    for (Count v : on) n += v;
    return n;
}

CoarseTclState coarse_cluster(const std::vector<CoarseUnitReport>& units,
                              double mean_power_watts,
                              int num_bins, double bin_minutes) {
    if (num_bins <= 0 || bin_minutes <= 0.0)
        throw Error("coarse_cluster: invalid bin configuration");
    CoarseTclState s;
    s.num_bins = num_bins;
    s.bin_minutes = bin_minutes;
    s.off.assign(num_bins, 0);
    s.on.assign(num_bins, 0);
    s.mean_power_watts = mean_power_watts;
    for (const auto& u : units) {
        if (!u.reported) continue; // courtesy period: not visible yet
        // bin tau holds deadlines in [tau, tau+1) bin widths, so bin 0 is
        // everything due within the next interval
        int bin = static_cast<int>(std::floor(u.deadline_min / bin_minutes));
        bin = std::clamp(bin, 0, num_bins - 1);
        if (u.on)
            s.on[bin]++;
        else
            s.off[bin]++;
    }
    return s;
}

} // namespace statebin
