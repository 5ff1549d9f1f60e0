#include "statebin/popmodel.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "statebin/categories.hpp"

namespace statebin {

const char* category_name(Category c) {
    switch (c) {
        case Category::IdealBattery: return "ideal_battery";
        case Category::Ric: return "ric";
        case Category::Is: return "is";
        case Category::Nid: return "nid";
        case Category::Tcl: return "tcl";
    }
    return "unknown";
}

std::vector<StateIndex> battery_state_space(StateIndex capacity) {
    std::vector<StateIndex> s(static_cast<std::size_t>(capacity) + 1);
    for (StateIndex x = 0; x <= capacity; ++x) s[x] = x;
    return s;
}

PerStateCounts zero_counts(const std::vector<ClusterSpec>& catalog) {
    PerStateCounts c(catalog.size());
    for (std::size_t q = 0; q < catalog.size(); ++q)
        c[q].assign(catalog[q].state_space.size(), 0);
    return c;
}

void SwitchMatrix::add(ClusterId q, StateIndex from, StateIndex to, Count count) {
    if (from == to)
        throw Error("SwitchMatrix: d_{x,x} is structurally zero");
    if (count < 0)
        throw Error("SwitchMatrix: negative switch count");
    if (q < 0 || static_cast<std::size_t>(q) >= per_cluster.size())
        throw Error("SwitchMatrix: cluster id out of range");
    if (count == 0) return;
    for (auto& e : per_cluster[q]) {
        if (e.from == from && e.to == to) {
            e.count += count;
            return;
        }
    }
    per_cluster[q].push_back(SwitchEntry{from, to, count});
}

PopulationState PopulationState::initial(const std::vector<ClusterSpec>& catalog) {
    PopulationState s;
    s.time = 0;
    s.occupancy = zero_counts(catalog);
    s.cumulative_arrivals = zero_counts(catalog);
    s.cumulative_departures = zero_counts(catalog);
    return s;
}

Count PopulationState::total_in_cluster(ClusterId q) const {
    Count n = 0;
    for (Count v : occupancy[q]) n += v;
    return n;
}

Count PopulationState::total() const {
    Count n = 0;
    for (std::size_t q = 0; q < occupancy.size(); ++q) n += total_in_cluster(static_cast<ClusterId>(q));
    return n;
}

namespace {

// Nearest grid value; ties resolve to the smaller value. Values are in range
// when they fall within half an edge spacing of the grid ends.
double quantize_nearest(double v, const std::vector<double>& grid, const char* what) {
    if (grid.empty()) throw Error(std::string("assign_cluster: empty grid for ") + what);
    if (grid.size() == 1) return grid.front(); // one level quantizes everything
    double lo = grid.front(), hi = grid.back();
    double tol_lo = (grid[1] - grid[0]) / 2.0;
    double tol_hi = (grid[grid.size() - 1] - grid[grid.size() - 2]) / 2.0;
    if (v < lo - tol_lo - 1e-12 || v > hi + tol_hi + 1e-12) {
        std::ostringstream os;
        os << "assign_cluster: " << what << "=" << v << " outside grid range ["
           << lo << ", " << hi << "]";
        throw Error(os.str());
    }
    double best = grid.front();
    double best_d = std::abs(v - best);
    for (double g : grid) {
        double d = std::abs(v - g);
        if (d < best_d - 1e-12) {
            best = g;
            best_d = d;
        }
    }
    return best;
}

// Largest grid value <= v (conservative rounding for deadlines and slacks).
double quantize_down(double v, const std::vector<double>& grid, const char* what) {
    if (grid.empty()) throw Error(std::string("assign_cluster: empty grid for ") + what);
    if (v < grid.front() - 1e-12) {
        std::ostringstream os;
        os << "assign_cluster: " << what << "=" << v << " below grid minimum " << grid.front();
        throw Error(os.str());
    }
    double best = grid.front();
    for (double g : grid)
        if (g <= v + 1e-12) best = g;
    return best;
}

std::vector<double> sorted_unique(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(),
                        [](double a, double b) { return std::abs(a - b) < 1e-12; }),
            v.end());
    return v;
}

double pulse_distance(const std::vector<double>& a, const std::vector<double>& b) {
    std::size_t n = std::max(a.size(), b.size());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double ai = i < a.size() ? a[i] : 0.0;
        double bi = i < b.size() ? b[i] : 0.0;
        d += (ai - bi) * (ai - bi);
    }
    return d;
}

} // namespace

ClusterId assign_cluster(const ApplianceRecord& record,
                         const std::vector<ClusterSpec>& clusters) {
    std::vector<const ClusterSpec*> same;
    for (const auto& c : clusters)
        if (c.category == record.category) same.push_back(&c);
    if (same.empty())
        throw Error(std::string("assign_cluster: no clusters for category ") +
                    category_name(record.category));

    switch (record.category) {
        case Category::IdealBattery: {
            std::vector<double> caps;
            for (auto* c : same) caps.push_back(c->ideal().capacity);
            double e = quantize_nearest(record.capacity, sorted_unique(caps), "capacity");
            for (auto* c : same)
                if (c->ideal().capacity == static_cast<StateIndex>(std::lround(e))) return c->id;
            break;
        }
        case Category::Ric:
        case Category::Is: {
            std::vector<double> caps, rates, deadlines, fracs;
            for (auto* c : same) {
                caps.push_back(c->ric().capacity);
                rates.push_back(c->ric().max_rate);
                deadlines.push_back(c->ric().deadline);
                fracs.push_back(c->ric().required_fraction);
            }
            double e = quantize_nearest(record.capacity, sorted_unique(caps), "capacity");
            double g = quantize_nearest(record.max_rate, sorted_unique(rates), "max_rate");
            double chi = quantize_down(record.deadline, sorted_unique(deadlines), "deadline");
            double rho = quantize_down(record.required_fraction, sorted_unique(fracs),
                                       "required_fraction");
            for (auto* c : same) {
                const auto& p = c->ric();
                if (p.capacity == std::lround(e) && p.max_rate == std::lround(g) &&
                    p.deadline == std::lround(chi) &&
                    std::abs(p.required_fraction - rho) < 1e-9)
                    return c->id;
            }
            break;
        }
        case Category::Nid: {
            std::vector<double> slacks;
            for (auto* c : same) slacks.push_back(c->nid().max_start_delay);
            double chi = quantize_down(record.deadline, sorted_unique(slacks), "slack");
            const ClusterSpec* best = nullptr;
            double best_d = 0.0;
            for (auto* c : same) {
                if (c->nid().max_start_delay != std::lround(chi)) continue;
                double d = pulse_distance(record.pulse, c->nid().pulse);
                if (!best || d < best_d) {
                    best = c;
                    best_d = d;
                }
            }
            if (best) return best->id;
            break;
        }
        case Category::Tcl: {
            std::vector<double> powers, setpoints, bands, losses;
            for (auto* c : same) {
                powers.push_back(c->tcl().power_watts);
                setpoints.push_back(c->tcl().setpoint_f);
                bands.push_back(c->tcl().band_f);
                losses.push_back(c->tcl().loss_w_per_c);
            }
            double g = quantize_nearest(record.tcl_power_watts, sorted_unique(powers), "power");
            double xs = quantize_nearest(record.tcl_setpoint_f, sorted_unique(setpoints),
                                         "setpoint");
            double b = quantize_nearest(record.tcl_band_f, sorted_unique(bands), "band");
            double k = quantize_nearest(record.tcl_loss_w_per_c, sorted_unique(losses), "loss");
            for (auto* c : same) {
                const auto& p = c->tcl();
                if (std::abs(p.power_watts - g) < 1e-9 && std::abs(p.setpoint_f - xs) < 1e-9 &&
                    std::abs(p.band_f - b) < 1e-9 && std::abs(p.loss_w_per_c - k) < 1e-9)
                    return c->id;
            }
            break;
        }
    }
    throw Error("assign_cluster: quantized tuple not present in catalog (grid not covering)");
}

PopulationState update_occupancy(const PopulationState& state,
                                 const PerStateCounts& new_arrivals,
                                 const SwitchMatrix& switches,
                                 const std::vector<ClusterSpec>& catalog,
                                 const PerStateCounts* departures) {
    if (state.occupancy.size() != catalog.size() || new_arrivals.size() != catalog.size() ||
        switches.per_cluster.size() != catalog.size())
        throw Error("update_occupancy: shape mismatch with catalog");

    PopulationState next = state;
    next.time = state.time + 1;

    for (std::size_t q = 0; q < catalog.size(); ++q) {
        const auto& spec = catalog[q];
        const StateIndex ns = spec.num_states();
        std::vector<Count> outflow(ns, 0);
        std::vector<Count> inflow(ns, 0);
        for (const auto& e : switches.per_cluster[q]) {
            if (!spec.has_state(e.from) || !spec.has_state(e.to))
                throw Error("update_occupancy: switch state outside cluster state space");
            auto nb = neighbor_set(spec, e.from);
            if (std::find(nb.begin(), nb.end(), e.to) == nb.end())
                throw Error("update_occupancy: switch target not in the category neighbor set");
            outflow[e.from] += e.count;
            inflow[e.to] += e.count;
        }
        for (StateIndex x = 0; x < ns; ++x) {
            if (outflow[x] > state.occupancy[q][x])
                throw Error("update_occupancy: infeasible switch, outflow exceeds occupancy");
            if (new_arrivals[q][x] < 0)
                throw Error("update_occupancy: negative arrival count");
            Count dep = departures ? (*departures)[q][x] : 0;
            if (dep < 0) throw Error("update_occupancy: negative departure count");
            Count n = state.occupancy[q][x] - outflow[x] + inflow[x] + new_arrivals[q][x] - dep;
            if (n < 0)
                throw Error("update_occupancy: negative occupancy after departures");
            next.occupancy[q][x] = n;
            next.cumulative_arrivals[q][x] += new_arrivals[q][x];
            next.cumulative_departures[q][x] += dep;
        }
    }
    return next;
}

Count load_from_switches(const SwitchMatrix& switches) {
    Count load = 0;
    for (const auto& cluster : switches.per_cluster)
        for (const auto& e : cluster)
            load += static_cast<Count>(e.to - e.from) * e.count;
    return load;
}

Count load_from_occupancy_deltas(const PopulationState& at_t,
                  const PopulationState& at_t_plus_1,
                  const PerStateCounts& arrival_increments) {
    if (at_t.occupancy.size() != at_t_plus_1.occupancy.size() ||
        arrival_increments.size() != at_t.occupancy.size())
        throw Error("load_from_occupancy_deltas: mismatched history shapes");
    if (at_t_plus_1.time != at_t.time + 1)
        throw Error("load_from_occupancy_deltas: snapshots must be one step apart");

    Count load = 0;
    for (std::size_t q = 0; q < at_t.occupancy.size(); ++q) {
        const auto& n0 = at_t.occupancy[q];
        const auto& n1 = at_t_plus_1.occupancy[q];
        if (n0.size() != n1.size() || arrival_increments[q].size() != n0.size())
            throw Error("load_from_occupancy_deltas: mismatched state space sizes");
        const int E = static_cast<int>(n0.size()) - 1;
        // suffix sums of dn over x' >= x
        Count suffix = 0;
        std::vector<Count> suffix_dn(n0.size() + 1, 0);
        for (int x = E; x >= 0; --x) {
            suffix += n1[x] - n0[x];
            suffix_dn[x] = suffix;
        }
        for (int x = 0; x <= E; ++x)
            load += suffix_dn[x] - static_cast<Count>(x + 1) * arrival_increments[q][x];
    }
    return load;
}

void write_snapshot(std::ostream& out, const PopulationState& state) {
    for (std::size_t q = 0; q < state.occupancy.size(); ++q)
        for (std::size_t x = 0; x < state.occupancy[q].size(); ++x)
            out << state.time << ' ' << q << ' ' << x << ' ' << state.occupancy[q][x] << '\n';
}

std::vector<SnapshotRecord> read_snapshot_records(std::istream& in) {
    std::vector<SnapshotRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        SnapshotRecord r{};
        if (!(ls >> r.t >> r.q >> r.x >> r.n))
            throw Error("read_snapshot_records: malformed line: " + line);
        records.push_back(r);
    }
    return records;
}

} // namespace statebin
