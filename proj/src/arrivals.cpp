#include "statebin/arrivals.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "statebin/rng.hpp"

namespace statebin {

void ArrivalRateProfile::validate() const {
    if (horizon_hours <= 0) throw Error("ArrivalRateProfile: empty horizon");
    for (const auto& cluster : rates)
        for (const auto& state : cluster) {
            if (static_cast<int>(state.size()) != horizon_hours)
                throw Error("ArrivalRateProfile: rate vector length != horizon");
            for (double v : state)
                if (v < 0.0 || !std::isfinite(v))
                    throw Error("ArrivalRateProfile: rates must be finite and nonnegative");
        }
}

double ArrivalRateProfile::total_expected() const {
    double total = 0.0;
    for (const auto& cluster : rates)
        for (const auto& state : cluster)
            for (double v : state) total += v;
    return total;
}

Count ScenarioTrace::cumulative_at(ClusterId q, StateIndex x, int t) const {
    if (t < 0) return 0;
    const auto& series = cumulative[q][x];
    if (series.empty()) return 0;
    if (t >= static_cast<int>(series.size())) return series.back();
    return series[t];
}

Count ScenarioTrace::increment_at(ClusterId q, StateIndex x, int t) const {
    return cumulative_at(q, x, t) - cumulative_at(q, x, t - 1);
}

Count ScenarioTrace::total_arrivals() const {
    Count total = 0;
    for (const auto& cluster : cumulative)
        for (const auto& state : cluster)
            if (!state.empty()) total += state.back();
    return total;
}

ScenarioTrace sample_scenario(const ArrivalRateProfile& profile, std::uint64_t seed,
                              double step_minutes) {
    profile.validate();
    if (step_minutes <= 0.0) throw Error("sample_scenario: step must be positive");
    const int steps = static_cast<int>(
        std::lround(profile.horizon_hours * 60.0 / step_minutes));

    ScenarioTrace trace;
    trace.seed = seed;
    trace.step_minutes = step_minutes;
    trace.cumulative.resize(profile.rates.size());

    std::uint64_t stream = 0;
    for (std::size_t q = 0; q < profile.rates.size(); ++q) {
        trace.cumulative[q].resize(profile.rates[q].size());
        for (std::size_t x = 0; x < profile.rates[q].size(); ++x) {
            auto rng = make_rng(seed, stream++);
            auto& series = trace.cumulative[q][x];
            series.assign(steps, 0);
            Count cum = 0;
            for (int t = 0; t < steps; ++t) {
                const int h = static_cast<int>(t * step_minutes / 60.0);
                const double mean = profile.rates[q][x][h] * step_minutes / 60.0;
                if (mean > 0.0) {
                    std::poisson_distribution<Count> pois(mean);
                    cum += pois(rng);
                }
                series[t] = cum;
            }
        }
    }
    return trace;
}

ScenarioSet build_scenario_set(const ArrivalRateProfile& profile, int count,
                               std::uint64_t base_seed, double step_minutes) {
    if (count < 1) throw Error("build_scenario_set: need at least one scenario");
    ScenarioSet set;
    set.traces.reserve(count);
    for (int k = 0; k < count; ++k)
        set.traces.push_back(
            sample_scenario(profile, derive_seed(base_seed, 0xA0 + k), step_minutes));
    return set;
}

std::uint64_t trace_hash(const ScenarioTrace& trace) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& cluster : trace.cumulative)
        for (const auto& state : cluster)
            for (Count v : state) mix(static_cast<std::uint64_t>(v));
    return h;
}

ArrivalRateProfile ev_case_profile(double scale) {
    if (scale < 0.0) throw Error("ev_case_profile: scale must be nonnegative");
    constexpr int kHorizon = 32;
    constexpr int kArrivalHours = 24; // arrivals within day one only
    constexpr double kPopulation = 40000.0;
    constexpr double kPeakHour = 18.0; // evening peak (synthetic template)
    constexpr double kPeakWidth = 2.5;

    std::vector<double> shape(kArrivalHours, 0.0);
    double total = 0.0;
    for (int h = 0; h < kArrivalHours; ++h) {
        double c = h + 0.5;
        shape[h] = std::exp(-(c - kPeakHour) * (c - kPeakHour) / (2.0 * kPeakWidth * kPeakWidth));
        total += shape[h];
    }
    for (double& v : shape) v /= total;

    ArrivalRateProfile profile;
    profile.horizon_hours = kHorizon;
    profile.rates.resize(15);
    const double per_cluster = kPopulation * scale / 15.0; // uniform cluster weights
    for (int q = 0; q < 15; ++q) {
        profile.rates[q].resize(1);
        profile.rates[q][0].assign(kHorizon, 0.0);
        for (int h = 0; h < kArrivalHours; ++h)
            profile.rates[q][0][h] = per_cluster * shape[h];
    }
    return profile;
}

std::vector<ClusterSpec> ev_case_catalog() {
    std::vector<ClusterSpec> catalog;
    for (int soc = 0; soc <= 4; ++soc) {
        for (int slack = 1; slack <= 3; ++slack) {
            ClusterSpec spec;
            spec.id = ev_case_cluster_id(soc, slack);
            spec.category = Category::Nid;
            NidClusterParams p;
            p.pulse.assign(5 - soc, 1.0); // unit-rate charge, full charge = 5 hours
            p.max_start_delay = slack;
            spec.params = p;
            spec.state_space = {0, 1};
            catalog.push_back(std::move(spec));
        }
    }
    return catalog;
}

void write_rate_profile(std::ostream& out, const ArrivalRateProfile& profile) {
    out << "# q x h lambda\n";
    for (std::size_t q = 0; q < profile.rates.size(); ++q)
        for (std::size_t x = 0; x < profile.rates[q].size(); ++x)
            for (int h = 0; h < profile.horizon_hours; ++h)
                out << q << ' ' << x << ' ' << h << ' ' << profile.rates[q][x][h] << '\n';
}

void write_trace_snapshots(std::ostream& out, const ScenarioTrace& trace) {
    for (int t = 0; t < trace.steps(); ++t)
        for (std::size_t q = 0; q < trace.cumulative.size(); ++q)
            for (std::size_t x = 0; x < trace.cumulative[q].size(); ++x)
                out << t << ' ' << q << ' ' << x << ' '
                    << trace.cumulative[q][x][t] << '\n';
}

ArrivalRateProfile read_rate_profile(std::istream& in) {
    struct Entry {
        int q, x, h;
        double lambda;
    };
    std::vector<Entry> entries;
    int max_q = -1, max_h = -1;
    std::vector<int> max_x;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Entry e{};
        if (!(ls >> e.q >> e.x >> e.h >> e.lambda))
            throw Error("read_rate_profile: malformed line: " + line);
        entries.push_back(e);
        max_q = std::max(max_q, e.q);
        max_h = std::max(max_h, e.h);
        if (static_cast<int>(max_x.size()) <= e.q) max_x.resize(e.q + 1, -1);
        max_x[e.q] = std::max(max_x[e.q], e.x);
    }
    ArrivalRateProfile profile;
    profile.horizon_hours = max_h + 1;
    profile.rates.resize(max_q + 1);
    for (int q = 0; q <= max_q; ++q) {
        int nx = q < static_cast<int>(max_x.size()) ? max_x[q] + 1 : 0;
        profile.rates[q].assign(std::max(nx, 1),
                                std::vector<double>(profile.horizon_hours, 0.0));
    }
    for (const auto& e : entries) profile.rates[e.q][e.x][e.h] = e.lambda;
    return profile;
}

} // namespace statebin
