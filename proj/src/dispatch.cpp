#include "statebin/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "statebin/rng.hpp"

namespace statebin {

NidDispatchState NidDispatchState::initial(std::size_t clusters, int horizon_hours) {
    NidDispatchState s;
    s.horizon_hours = horizon_hours;
    s.arrivals.assign(clusters, std::vector<Count>(horizon_hours, 0));
    s.activations.assign(clusters, std::vector<Count>(horizon_hours, 0));
    return s;
}

void NidDispatchState::observe_arrivals(const ScenarioTrace& trace, int hour) {
    if (trace.cumulative.size() != arrivals.size())
        throw Error("NidDispatchState: trace does not match cluster count");
    for (std::size_t q = 0; q < arrivals.size(); ++q)
        arrivals[q][hour] = trace.increment_at(static_cast<ClusterId>(q), 0, hour);
}

void NidDispatchState::commit(const std::vector<Count>& increments, int hour) {
    if (increments.size() != activations.size())
        throw Error("NidDispatchState: increment size mismatch");
    for (std::size_t q = 0; q < increments.size(); ++q) {
        if (increments[q] < 0) throw Error("NidDispatchState: negative activation");
        activations[q][hour] += increments[q];
        if (cum_activations(static_cast<ClusterId>(q), hour) >
            cum_arrivals(static_cast<ClusterId>(q), hour))
            throw Error("NidDispatchState: activations exceed arrivals");
    }
}

Count NidDispatchState::cum_arrivals(ClusterId q, int through_hour) const {
    Count c = 0;
    for (int h = 0; h <= std::min(through_hour, horizon_hours - 1); ++h)
        c += arrivals[q][h];
    return c;
}

Count NidDispatchState::cum_activations(ClusterId q, int through_hour) const {
    Count c = 0;
    for (int h = 0; h <= std::min(through_hour, horizon_hours - 1); ++h)
        c += activations[q][h];
    return c;
}

std::vector<double> NidDispatchState::committed_load(const std::vector<ClusterSpec>& catalog,
                                                     int from_hour) const {
    std::vector<double> load(horizon_hours - from_hour, 0.0);
    for (std::size_t q = 0; q < activations.size(); ++q) {
        const auto& pulse = catalog[q].nid().pulse;
        for (int s = 0; s < from_hour; ++s) {
            Count d = activations[q][s];
            if (d == 0) continue;
            for (std::size_t j = 0; j < pulse.size(); ++j) {
                int h = s + static_cast<int>(j);
                if (h < from_hour) continue;
                if (h >= horizon_hours) break;
                load[h - from_hour] += static_cast<double>(d) * pulse[j];
            }
        }
    }
    return load;
}

std::vector<double> NidDispatchState::realized_load(
    const std::vector<ClusterSpec>& catalog) const {
    std::vector<double> load(horizon_hours, 0.0);
    for (std::size_t q = 0; q < activations.size(); ++q) {
        const auto& pulse = catalog[q].nid().pulse;
        for (int s = 0; s < horizon_hours; ++s) {
            Count d = activations[q][s];
            if (d == 0) continue;
            for (std::size_t j = 0; j < pulse.size(); ++j) {
                int h = s + static_cast<int>(j);
                if (h >= horizon_hours) break;
                load[h] += static_cast<double>(d) * pulse[j];
            }
        }
    }
    return load;
}

// ---------------------------------------------------------------------------

MpcStepResult mpc_schedule_step(const NidDispatchState& state,
                                const std::vector<ClusterSpec>& catalog,
                                const std::vector<double>& purchase,
                                const PriceCurve& prices, const MpcConfig& config, int t) {
    const int H = state.horizon_hours;
    if (t < 0 || t >= H) throw Error("mpc_schedule_step: hour outside horizon");
    const int end = config.lookahead_hours > 0 ? std::min(H, t + config.lookahead_hours) : H;

    ScheduleLpSpec spec;
    spec.start_hour = t;
    spec.end_hour = end;
    spec.fixed_load = state.committed_load(catalog, t);
    spec.fixed_load.resize(end - t);

    const std::size_t nq = catalog.size();
    std::vector<Count> committed(nq), cum_up_t(nq), cum_lo_t(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        const auto& p = catalog[q].nid();
        ServiceCluster c;
        c.pulse = p.pulse;
        c.committed = static_cast<double>(state.cum_activations(static_cast<ClusterId>(q), t - 1));
        committed[q] = state.cum_activations(static_cast<ClusterId>(q), t - 1);
        c.cum_lower.resize(end - t);
        c.cum_upper.resize(end - t);
        for (int h = t; h < end; ++h) {
            // observed arrivals through t, expected arrivals beyond
            double expect = static_cast<double>(state.cum_arrivals(static_cast<ClusterId>(q), std::min(h, t)));
            if (config.forecast)
                for (int f = t + 1; f <= h; ++f)
                    expect += config.forecast->rate(static_cast<ClusterId>(q), 0, f);
            double expect_lag;
            int lag = h - p.max_start_delay;
            if (lag <= t) {
                expect_lag = static_cast<double>(
                    state.cum_arrivals(static_cast<ClusterId>(q), lag));
            } else {
                expect_lag = static_cast<double>(state.cum_arrivals(static_cast<ClusterId>(q), t));
                if (config.forecast)
                    for (int f = t + 1; f <= lag; ++f)
                        expect_lag += config.forecast->rate(static_cast<ClusterId>(q), 0, f);
            }
            c.cum_upper[h - t] = std::max(expect, c.committed);
            c.cum_lower[h - t] = std::min(expect_lag, c.cum_upper[h - t]);
        }
        cum_up_t[q] = state.cum_arrivals(static_cast<ClusterId>(q), t);
        cum_lo_t[q] = state.cum_arrivals(static_cast<ClusterId>(q), t - p.max_start_delay);
        spec.clusters.push_back(std::move(c));
    }
    spec.validate();

    DenseSimplex default_solver;
    const LpSolver& solver = config.solver ? *config.solver : default_solver;
    ScheduleLp lp = build_schedule_lp(spec, prices, purchase);
    LpSolution sol = solver.solve(lp.problem);
    if (!sol.optimal())
        throw Error("mpc_schedule_step: lookahead LP failed to solve");

    // integerize only the step-t decision
    std::vector<double> frac(nq);
    for (std::size_t q = 0; q < nq; ++q) frac[q] = sol.x[lp.cum_vars[q][0]];

    MpcStepResult result;
    result.lp_iterations = sol.iterations;
    result.plan_start_hour = t;
    result.planned_cumulative.resize(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        result.planned_cumulative[q].resize(end - t);
        for (int s = 0; s < end - t; ++s)
            result.planned_cumulative[q][s] = sol.x[lp.cum_vars[q][s]];
    }
    result.increments = round_step_increments(frac, committed, cum_up_t, cum_lo_t);
    for (std::size_t q = 0; q < nq; ++q)
        if (committed[q] + result.increments[q] < cum_lo_t[q])
            throw Error("mpc_schedule_step: rounding failed to cover a deadline");
    for (std::size_t q = 0; q < nq; ++q)
        if (cum_lo_t[q] > committed[q]) result.forced_overdue = true;
    return result;
}

std::vector<Count> commit_from_plan(const NidDispatchState& state,
                                    const std::vector<ClusterSpec>& catalog,
                                    const MpcStepResult& plan, int t) {
    const std::size_t nq = catalog.size();
    int offset = t - plan.plan_start_hour;
    if (offset < 0 || plan.planned_cumulative.empty() ||
        offset >= static_cast<int>(plan.planned_cumulative[0].size()))
        throw Error("commit_from_plan: hour outside the stored plan window");
    std::vector<double> frac(nq);
    std::vector<Count> committed(nq), up(nq), lo(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        frac[q] = plan.planned_cumulative[q][offset];
        committed[q] = state.cum_activations(static_cast<ClusterId>(q), t - 1);
        up[q] = state.cum_arrivals(static_cast<ClusterId>(q), t);
        lo[q] = state.cum_arrivals(static_cast<ClusterId>(q),
                                   t - catalog[q].nid().max_start_delay);
    }
    return round_step_increments(frac, committed, up, lo);
}

std::vector<Count> edf_schedule_step(const NidDispatchState& state,
                                     const std::vector<ClusterSpec>& catalog,
                                     const std::vector<double>& purchase, int t) {
    const std::size_t nq = catalog.size();
    struct Cohort {
        int ttd;
        ClusterId q;
        int arrival;
        Count waiting;
    };
    std::vector<Cohort> cohorts;
    for (std::size_t q = 0; q < nq; ++q) {
        const auto& p = catalog[q].nid();
        Count consumed = state.cum_activations(static_cast<ClusterId>(q), t - 1);
        for (int h0 = 0; h0 <= t; ++h0) {
            Count size = state.arrivals[q][h0];
            if (size == 0) continue;
            Count used = std::min(consumed, size); // FIFO: oldest cohorts first
            consumed -= used;
            Count waiting = size - used;
            if (waiting > 0)
                cohorts.push_back(Cohort{h0 + p.max_start_delay - t,
                                         static_cast<ClusterId>(q), h0, waiting});
        }
    }
    std::sort(cohorts.begin(), cohorts.end(), [](const Cohort& a, const Cohort& b) {
        if (a.ttd != b.ttd) return a.ttd < b.ttd;
        if (a.q != b.q) return a.q < b.q;
        return a.arrival < b.arrival;
    });

    auto tails = state.committed_load(catalog, t);
    double load = tails.empty() ? 0.0 : tails[0];
    const double target = purchase[t];

    std::vector<Count> increments(nq, 0);
    for (const auto& cohort : cohorts) {
        const double first_power = catalog[cohort.q].nid().pulse.empty()
                                       ? 0.0
                                       : catalog[cohort.q].nid().pulse[0];
        for (Count i = 0; i < cohort.waiting; ++i) {
            const bool overdue = cohort.ttd <= 0;
            // activate while it brings the hour closer to the purchase;
            // undershoot wins ties
            const bool closer =
                std::abs(load + first_power - target) < std::abs(load - target) - 1e-12;
            if (!overdue && !closer) return increments;
            increments[cohort.q]++;
            load += first_power;
        }
    }
    return increments;
}

TclTrackCommands tcl_track_step(const CoarseTclState& coarse, double baseline_watts,
                                double signal_watts, double mean_power_watts,
                                double measured_load_watts) {
    TclTrackCommands cmds;
    const int bins = coarse.num_bins;
    cmds.turn_on.assign(bins, 0);
    cmds.turn_off.assign(bins, 0);
    if (bins == 0 || mean_power_watts <= 0.0) return cmds;

    // forced switches first: bin 0 holds units at their switching deadline
    const Count forced_on = coarse.off.empty() ? 0 : coarse.off[0];
    const Count forced_off = coarse.on.empty() ? 0 : coarse.on[0];
    cmds.turn_on[0] = forced_on;
    cmds.turn_off[0] = forced_off;

    const double target = baseline_watts + signal_watts;
    const double post_forced =
        measured_load_watts + mean_power_watts * static_cast<double>(forced_on - forced_off);
    const double need = target - post_forced;
    Count k = static_cast<Count>(std::llround(need / mean_power_watts));

    if (k > 0) {
        for (int tau = 1; tau < bins && k > 0; ++tau) {
            Count take = std::min<Count>(coarse.off[tau], k);
            cmds.turn_on[tau] += take;
            k -= take;
        }
    } else if (k < 0) {
        Count want = -k;
        for (int tau = 1; tau < bins && want > 0; ++tau) {
            Count take = std::min<Count>(coarse.on[tau], want);
            cmds.turn_off[tau] += take;
            want -= take;
        }
        k = -want;
    }
    cmds.residual_watts = static_cast<double>(k) * mean_power_watts;
    return cmds;
}

// ---------------------------------------------------------------------------

void DispatchCommand::validate() const {
    for (const auto& r : switch_ratios)
        if (r.ratio < -1e-12 || r.ratio > 1.0 + 1e-12)
            throw Error("DispatchCommand: switch ratio outside [0,1]");
    for (const auto& r : tcl_on_ratios)
        if (r.ratio < -1e-12 || r.ratio > 1.0 + 1e-12)
            throw Error("DispatchCommand: on-ratio outside [0,1]");
    for (const auto& f : fifo_thresholds)
        if (f.boundary_wait < -1e-12 || f.boundary_wait > 1.0 + 1e-12)
            throw Error("DispatchCommand: boundary ratio outside [0,1]");
}

DispatchCommand make_downlink(const SwitchMatrix& decisions, const PopulationState& state,
                              TimeIndex t) {
    DispatchCommand cmd;
    cmd.t = t;
    for (std::size_t q = 0; q < decisions.per_cluster.size(); ++q) {
        std::vector<Count> outflow(state.occupancy[q].size(), 0);
        for (const auto& e : decisions.per_cluster[q]) outflow[e.from] += e.count;
        for (std::size_t x = 0; x < outflow.size(); ++x)
            if (outflow[x] > state.occupancy[q][x])
                throw Error("make_downlink: decision exceeds occupancy");
        for (const auto& e : decisions.per_cluster[q]) {
            Count n = state.occupancy[q][e.from];
            if (n == 0) continue; // no ratio for empty bins
            cmd.switch_ratios.push_back(
                DispatchCommand::SwitchRatio{static_cast<ClusterId>(q), e.from, e.to,
                                             static_cast<double>(e.count) /
                                                 static_cast<double>(n)});
        }
    }
    // per-(q,x) ratio sums must stay within 1
    cmd.validate();
    return cmd;
}

DispatchCommand make_downlink_tcl(const std::vector<std::vector<Count>>& desired_on,
                                  const PopulationState& state, TimeIndex t) {
    DispatchCommand cmd;
    cmd.t = t;
    for (std::size_t q = 0; q < desired_on.size(); ++q)
        for (std::size_t x = 0; x < desired_on[q].size(); ++x) {
            Count n = state.occupancy[q][x];
            Count d = desired_on[q][x];
            if (d > n) throw Error("make_downlink_tcl: desired ON exceeds occupancy");
            if (n == 0) continue;
            cmd.tcl_on_ratios.push_back(DispatchCommand::OnRatio{
                static_cast<ClusterId>(q), static_cast<StateIndex>(x),
                static_cast<double>(d) / static_cast<double>(n)});
        }
    cmd.validate();
    return cmd;
}

DispatchCommand::FifoThreshold nid_fifo_threshold(const std::vector<Count>& cumulative_arrivals,
                                                  Count cumulative_target, ClusterId q) {
    if (cumulative_arrivals.empty() ||
        cumulative_arrivals.back() < cumulative_target)
        throw Error("nid_fifo_threshold: target exceeds total arrivals");
    int tau = 0;
    while (cumulative_arrivals[tau] < cumulative_target) tau++;
    Count at_tau = cumulative_arrivals[tau];
    Count before = tau > 0 ? cumulative_arrivals[tau - 1] : 0;
    double kappa = 0.0;
    if (at_tau > before)
        kappa = static_cast<double>(at_tau - cumulative_target) /
                static_cast<double>(at_tau - before);
    return DispatchCommand::FifoThreshold{q, tau, kappa};
}

DownlinkOutcome apply_downlink(const DispatchCommand& command,
                               std::vector<SimAppliance>& population,
                               std::size_t num_clusters, std::uint64_t seed) {
    command.validate();
    auto rng = make_rng(seed, 0xD0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    DownlinkOutcome out;
    out.realized = SwitchMatrix::empty(num_clusters);

    // battery switch ratios, grouped per (q, x)
    for (auto& app : population) {
        double u = unif(rng);
        double acc = 0.0;
        for (const auto& r : command.switch_ratios) {
            if (r.q != app.q || r.from != app.x) continue;
            acc += r.ratio;
            if (u < acc) {
                out.realized.add(r.q, r.from, r.to, 1);
                out.realized_moves++;
                app.x = r.to;
                break;
            }
        }
    }
    // TCL on-ratios
    for (auto& app : population) {
        for (const auto& r : command.tcl_on_ratios) {
            if (r.q != app.q || r.x != app.x) continue;
            app.on = unif(rng) < r.ratio;
            break;
        }
    }
    // NID FIFO thresholds
    for (auto& app : population) {
        if (app.started) continue;
        for (const auto& f : command.fifo_thresholds) {
            if (f.q != app.q) continue;
            if (app.arrival < f.tau) {
                app.started = true;
            } else if (app.arrival == f.tau) {
                if (unif(rng) >= f.boundary_wait) app.started = true;
            }
            if (app.started) {
                app.started_at = command.t;
                out.realized_starts++;
            }
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

void RegulationSignal::validate(double capacity_watts) const {
    for (double v : watts)
        if (std::abs(v) > capacity_watts + 1e-6)
            throw Error("RegulationSignal: sample exceeds the offered capacity");
}

std::vector<double> read_normalized_signal(std::istream& in) {
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        long minute;
        double v;
        if (!(ls >> minute >> v))
            throw Error("read_normalized_signal: malformed line: " + line);
        if (v < -1.0 - 1e-9 || v > 1.0 + 1e-9)
            throw Error("read_normalized_signal: value outside [-1, 1]");
        values.push_back(v);
    }
    return values;
}

RegulationSignal scale_signal(const std::vector<double>& normalized, double capacity_watts) {
    RegulationSignal s;
    s.watts.reserve(normalized.size());
    for (double v : normalized) s.watts.push_back(v * capacity_watts);
    s.validate(capacity_watts);
    return s;
}

void append_command_log(std::ostream& out, const DispatchCommand& command) {
    for (const auto& r : command.switch_ratios)
        out << command.t << " SW " << r.q << ' ' << r.from << ' ' << r.to << ' ' << r.ratio
            << '\n';
    for (const auto& r : command.tcl_on_ratios)
        out << command.t << " TCL " << r.q << ' ' << r.x << ' ' << r.ratio << '\n';
    for (const auto& f : command.fifo_thresholds)
        out << command.t << " FIFO " << f.q << ' ' << f.tau << ' ' << f.boundary_wait << '\n';
    out << command.t << " END\n";
}

std::vector<DispatchCommand> read_command_log(std::istream& in) {
    std::vector<DispatchCommand> commands;
    DispatchCommand current;
    bool open = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        TimeIndex t;
        std::string kind;
        if (!(ls >> t >> kind)) throw Error("read_command_log: malformed line: " + line);
        if (!open) {
            current = DispatchCommand{};
            current.t = t;
            open = true;
        }
        if (kind == "SW") {
            DispatchCommand::SwitchRatio r{};
            if (!(ls >> r.q >> r.from >> r.to >> r.ratio))
                throw Error("read_command_log: malformed SW line");
            current.switch_ratios.push_back(r);
        } else if (kind == "TCL") {
            DispatchCommand::OnRatio r{};
            if (!(ls >> r.q >> r.x >> r.ratio))
                throw Error("read_command_log: malformed TCL line");
            current.tcl_on_ratios.push_back(r);
        } else if (kind == "FIFO") {
            DispatchCommand::FifoThreshold f{};
            if (!(ls >> f.q >> f.tau >> f.boundary_wait))
                throw Error("read_command_log: malformed FIFO line");
            current.fifo_thresholds.push_back(f);
        } else if (kind == "END") {
            commands.push_back(std::move(current));
            open = false;
        } else {
            throw Error("read_command_log: unknown record kind: " + kind);
        }
    }
    if (open) throw Error("read_command_log: truncated log");
    return commands;
}

} // namespace statebin
