#include "statebin/planner.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>

#include "statebin/dispatch.hpp"
#include "statebin/rng.hpp"

namespace statebin {

// ---------------------------------------------------------------------------
// Prices

PriceCurve PriceCurve::two_settlement(std::vector<double> forward, int substeps) {
    PriceCurve p;
    p.hours = static_cast<int>(forward.size());
    p.substeps = substeps;
    p.forward = std::move(forward);
    p.up.resize(static_cast<std::size_t>(p.hours) * substeps);
    p.dn.resize(static_cast<std::size_t>(p.hours) * substeps);
    // per-substep adjustment prices; the hourly totals land at +-20% of the
    // forward price
    for (int h = 0; h < p.hours; ++h)
        for (int l = 0; l < substeps; ++l) {
            p.up[static_cast<std::size_t>(h) * substeps + l] = 1.2 * p.forward[h] / substeps;
            p.dn[static_cast<std::size_t>(h) * substeps + l] = 0.8 * p.forward[h] / substeps;
        }
    p.validate();
    return p;
}

void PriceCurve::validate() const {
    if (hours <= 0 || substeps <= 0) throw Error("PriceCurve: empty");
    if (static_cast<int>(forward.size()) != hours ||
        static_cast<int>(up.size()) != hours * substeps ||
        static_cast<int>(dn.size()) != hours * substeps)
        throw Error("PriceCurve: size mismatch");
    for (double v : forward)
        if (!std::isfinite(v)) throw Error("PriceCurve: non-finite forward price");
    for (std::size_t t = 0; t < up.size(); ++t) {
        if (!std::isfinite(up[t]) || !std::isfinite(dn[t]))
            throw Error("PriceCurve: non-finite adjustment price");
        if (dn[t] > up[t] + 1e-12)
            throw Error("PriceCurve: pi_dn > pi_up makes the deviation split unbounded");
    }
}

double PriceCurve::up_hour_total(int h) const {
    double s = 0.0;
    for (int l = 0; l < substeps; ++l) s += up[static_cast<std::size_t>(h) * substeps + l];
    return s;
}

double PriceCurve::dn_hour_total(int h) const {
    double s = 0.0;
    for (int l = 0; l < substeps; ++l) s += dn[static_cast<std::size_t>(h) * substeps + l];
    return s;
}

double realtime_cost(const std::vector<double>& load_substeps,
                     const std::vector<double>& purchase_hourly,
                     const PriceCurve& prices) {
    if (static_cast<int>(load_substeps.size()) != prices.hours * prices.substeps)
        throw Error("realtime_cost: load must cover every sub-step");
    if (static_cast<int>(purchase_hourly.size()) != prices.hours)
        throw Error("realtime_cost: purchase must cover every hour");
    double cost = 0.0;
    for (int h = 0; h < prices.hours; ++h)
        for (int l = 0; l < prices.substeps; ++l) {
            std::size_t t = static_cast<std::size_t>(h) * prices.substeps + l;
            double dev = load_substeps[t] - purchase_hourly[h];
            if (dev >= 0.0)
                cost += prices.up[t] * dev;
            else
                cost += prices.dn[t] * dev; // negative part: rebate
        }
    return cost;
}

// ---------------------------------------------------------------------------
// Scheduling model

void ScheduleLpSpec::validate() const {
    if (end_hour <= start_hour) throw Error("ScheduleLpSpec: empty window");
    const int W = window_hours();
    if (static_cast<int>(fixed_load.size()) != W)
        throw Error("ScheduleLpSpec: fixed_load must cover the window");
    for (const auto& c : clusters) {
        if (static_cast<int>(c.cum_lower.size()) != W ||
            static_cast<int>(c.cum_upper.size()) != W)
            throw Error("ScheduleLpSpec: cumulative bounds must cover the window");
        double prev_up = c.committed;
        for (int t = 0; t < W; ++t) {
            if (c.cum_lower[t] > c.cum_upper[t] + 1e-9)
                throw Error("ScheduleLpSpec: cum_lower exceeds cum_upper (impossible deadline)");
            if (c.cum_upper[t] < prev_up - 1e-9)
                throw Error("ScheduleLpSpec: cum_upper must be nondecreasing");
            prev_up = c.cum_upper[t];
            if (c.committed > c.cum_upper[t] + 1e-9)
                throw Error("ScheduleLpSpec: committed activations exceed arrivals");
        }
    }
}

ScheduleLpSpec make_nid_schedule_spec(const std::vector<ClusterSpec>& catalog,
                                      const ScenarioTrace& trace, int horizon_hours) {
    if (trace.cumulative.size() != catalog.size())
        throw Error("make_nid_schedule_spec: trace does not match catalog");
    ScheduleLpSpec spec;
    spec.start_hour = 0;
    spec.end_hour = horizon_hours;
    spec.fixed_load.assign(horizon_hours, 0.0);
    spec.clusters.reserve(catalog.size());
    for (std::size_t q = 0; q < catalog.size(); ++q) {
        if (catalog[q].category != Category::Nid)
            throw Error("make_nid_schedule_spec: catalog must be NID clusters");
        const auto& p = catalog[q].nid();
        ServiceCluster c;
        c.pulse = p.pulse;
        c.cum_lower.resize(horizon_hours);
        c.cum_upper.resize(horizon_hours);
        for (int h = 0; h < horizon_hours; ++h) {
            c.cum_upper[h] = static_cast<double>(trace.cumulative_at(q, 0, h));
            c.cum_lower[h] =
                static_cast<double>(trace.cumulative_at(q, 0, h - p.max_start_delay));
        }
        spec.clusters.push_back(std::move(c));
    }
    spec.validate();
    return spec;
}

ScheduleLpSpec make_tank_schedule_spec(const std::vector<ClusterSpec>& catalog,
                                       const ScenarioTrace& trace, int horizon_hours) {
    if (trace.cumulative.size() != catalog.size())
        throw Error("make_tank_schedule_spec: trace does not match catalog");
    // arrived-energy curves keyed by the completion deadline hour
    std::vector<std::vector<double>> arrived(horizon_hours,
                                             std::vector<double>(horizon_hours, 0.0));
    for (std::size_t q = 0; q < catalog.size(); ++q) {
        if (catalog[q].category != Category::Nid)
            throw Error("make_tank_schedule_spec: catalog must be NID clusters");
        const auto& p = catalog[q].nid();
        const double energy = p.pulse_energy();
        const int len = static_cast<int>(p.pulse.size());
        for (int h = 0; h < horizon_hours; ++h) {
            Count da = trace.increment_at(q, 0, h);
            if (da == 0) continue;
            int deadline = std::min(h + p.max_start_delay + len - 1, horizon_hours - 1);
            for (int t = h; t < horizon_hours; ++t)
                arrived[deadline][t] += energy * static_cast<double>(da);
        }
    }
    ScheduleLpSpec spec;
    spec.start_hour = 0;
    spec.end_hour = horizon_hours;
    spec.fixed_load.assign(horizon_hours, 0.0);
    for (int d = 0; d < horizon_hours; ++d) {
        if (arrived[d][horizon_hours - 1] <= 0.0) continue;
        ServiceCluster c;
        c.pulse = {1.0};
        c.cum_upper = arrived[d];
        c.cum_lower.assign(horizon_hours, 0.0);
        for (int t = d; t < horizon_hours; ++t) c.cum_lower[t] = arrived[d][horizon_hours - 1];
        spec.clusters.push_back(std::move(c));
    }
    spec.validate();
    return spec;
}

std::vector<double> schedule_loads(const ScheduleLpSpec& spec,
                                   const std::vector<std::vector<double>>& cumulative) {
    const int W = spec.window_hours();
    std::vector<double> load(spec.fixed_load);
    for (std::size_t q = 0; q < spec.clusters.size(); ++q) {
        const auto& c = spec.clusters[q];
        double prev = c.committed;
        for (int t = 0; t < W; ++t) {
            double inc = cumulative[q][t] - prev;
            prev = cumulative[q][t];
            if (inc == 0.0) continue;
            for (std::size_t j = 0; j < c.pulse.size(); ++j) {
                int h = t + static_cast<int>(j);
                if (h >= W) break;
                load[h] += inc * c.pulse[j];
            }
        }
    }
    return load;
}

ScheduleLp build_schedule_lp(const ScheduleLpSpec& spec, const PriceCurve& prices,
                             const std::vector<double>& purchase) {
    spec.validate();
    if (static_cast<int>(purchase.size()) < spec.end_hour)
        throw Error("build_schedule_lp: purchase does not cover the window");

    const int W = spec.window_hours();
    ScheduleLp lp;
    lp.cum_vars.resize(spec.clusters.size());

    // cumulative activation variables with box bounds
    for (std::size_t q = 0; q < spec.clusters.size(); ++q) {
        const auto& c = spec.clusters[q];
        lp.cum_vars[q].resize(W);
        double running_lo = c.committed;
        for (int t = 0; t < W; ++t) {
            running_lo = std::max(running_lo, c.cum_lower[t]);
            lp.cum_vars[q][t] =
                lp.problem.add_variable(0.0, running_lo, c.cum_upper[t]);
        }
    }
    // deviation variables
    lp.over_vars.resize(W);
    lp.under_vars.resize(W);
    for (int t = 0; t < W; ++t) {
        int h = spec.start_hour + t;
        lp.over_vars[t] = lp.problem.add_variable(prices.up_hour_total(h), 0.0, kInf);
        lp.under_vars[t] = lp.problem.add_variable(-prices.dn_hour_total(h), 0.0, kInf);
    }

    // monotonicity rows
    for (std::size_t q = 0; q < spec.clusters.size(); ++q)
        for (int t = 1; t < W; ++t)
            lp.problem.add_row(RowSense::GE, 0.0,
                               {{lp.cum_vars[q][t], 1.0}, {lp.cum_vars[q][t - 1], -1.0}});

    // load-link rows: sum_q load_q(h) - u_h + v_h = B(h) - fixed(h)
    lp.link_rows.resize(W);
    for (int t = 0; t < W; ++t) {
        const int h = spec.start_hour + t;
        std::vector<std::pair<int, double>> coeffs;
        double rhs = purchase[h] - spec.fixed_load[t];
        for (std::size_t q = 0; q < spec.clusters.size(); ++q) {
            const auto& c = spec.clusters[q];
            auto pulse_at = [&](int j) -> double {
                return (j >= 0 && j < static_cast<int>(c.pulse.size())) ? c.pulse[j] : 0.0;
            };
            for (int s = 0; s <= t; ++s) {
                double coef = (s == t) ? pulse_at(0) : pulse_at(t - s) - pulse_at(t - s - 1);
                if (coef != 0.0) coeffs.emplace_back(lp.cum_vars[q][s], coef);
            }
            rhs += pulse_at(t) * c.committed;
        }
        coeffs.emplace_back(lp.over_vars[t], -1.0);
        coeffs.emplace_back(lp.under_vars[t], 1.0);
        lp.problem.rows.push_back(LpRow{std::move(coeffs), RowSense::EQ, rhs});
        lp.link_rows[t] = static_cast<int>(lp.problem.rows.size()) - 1;
    }
    return lp;
}

// ---------------------------------------------------------------------------
// Rounding

std::vector<Count> round_step_increments(const std::vector<double>& fractional_cum,
                                         const std::vector<Count>& committed,
                                         const std::vector<Count>& cum_upper,
                                         const std::vector<Count>& cum_lower) {
    const std::size_t n = fractional_cum.size();
    if (committed.size() != n || cum_upper.size() != n || cum_lower.size() != n)
        throw Error("round_step_increments: size mismatch");

    std::vector<Count> inc(n, 0);
    std::vector<double> desired(n, 0.0);
    std::vector<Count> cap(n, 0);
    double total_desired = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
        Count forced = std::max<Count>(0, cum_lower[q] - committed[q]);
        cap[q] = cum_upper[q] - committed[q];
        if (cap[q] < 0) throw Error("round_step_increments: committed exceeds arrivals");
        if (forced > cap[q])
            throw Error("round_step_increments: deadline demands more than arrived");
        double want = std::clamp(fractional_cum[q], static_cast<double>(cum_lower[q]),
                                 static_cast<double>(cum_upper[q])) -
                      static_cast<double>(committed[q]);
        want = std::max(want, 0.0);
        desired[q] = want;
        total_desired += want;
        inc[q] = std::max(forced, static_cast<Count>(std::floor(want + 1e-9)));
        inc[q] = std::min(inc[q], cap[q]);
    }
    // distribute the remaining whole units by largest fractional remainder
    Count target = static_cast<Count>(std::llround(total_desired));
    Count have = std::accumulate(inc.begin(), inc.end(), Count{0});
    while (have < target) {
        int best = -1;
        double best_rem = -1.0;
        for (std::size_t q = 0; q < n; ++q) {
            if (inc[q] >= cap[q]) continue;
            double rem = desired[q] - std::floor(desired[q] + 1e-9);
            if (inc[q] > static_cast<Count>(std::floor(desired[q] + 1e-9)))
                rem -= static_cast<double>(inc[q]); // already boosted; deprioritize
            if (rem > best_rem + 1e-15) {
                best_rem = rem;
                best = static_cast<int>(q);
            }
        }
        if (best < 0) break;
        inc[best]++;
        have++;
    }
    return inc;
}

// ---------------------------------------------------------------------------
// Two-settlement solve

namespace {

struct SubproblemSolveResult {
    double cost = 0.0;
    std::vector<double> duals; // per hour
    std::vector<std::vector<double>> cumulative;
};

SubproblemSolveResult solve_subproblem(const ScheduleLpSpec& spec, const PriceCurve& prices,
                                       const std::vector<double>& purchase,
                                       const LpSolver& solver) {
    ScheduleLp lp = build_schedule_lp(spec, prices, purchase);
    LpSolution sol = solver.solve(lp.problem);
    if (sol.status == LpStatus::Infeasible) {
        std::ostringstream os;
        os << "planner: scenario subproblem infeasible (impossible deadline set)";
        throw Error(os.str());
    }
    if (sol.status == LpStatus::Unbounded)
        throw Error("planner: scenario subproblem unbounded (check price configuration)");
    if (sol.status != LpStatus::Optimal)
        throw Error("planner: LP iteration limit hit in scenario subproblem");

    SubproblemSolveResult r;
    r.cost = sol.objective;
    const int W = spec.window_hours();
    r.duals.resize(W);
    for (int t = 0; t < W; ++t) r.duals[t] = sol.row_duals[lp.link_rows[t]];
    r.cumulative.resize(spec.clusters.size());
    for (std::size_t q = 0; q < spec.clusters.size(); ++q) {
        r.cumulative[q].resize(W);
        for (int t = 0; t < W; ++t) r.cumulative[q][t] = sol.x[lp.cum_vars[q][t]];
    }
    return r;
}

// price sanity shared by every planning entry point
void check_price_configuration(const PriceCurve& prices) {
    prices.validate();
    for (int h = 0; h < prices.hours; ++h) {
        if (prices.dn_hour_total(h) > prices.forward[h] + 1e-9)
            throw Error("planner: hourly pi_dn total exceeds the forward price; "
                        "buying unbounded forward energy would be profitable");
    }
}

std::vector<double> purchase_upper_bounds(const std::vector<ScheduleLpSpec>& specs,
                                          int horizon) {
    std::vector<double> bmax(horizon, 0.0);
    for (const auto& spec : specs) {
        double peak_total = 0.0;
        for (const auto& c : spec.clusters) {
            double peak = 0.0;
            for (double v : c.pulse) peak = std::max(peak, v);
            peak_total += peak * (c.cum_upper.empty() ? 0.0 : c.cum_upper.back());
        }
        for (int t = 0; t < spec.window_hours(); ++t)
            bmax[spec.start_hour + t] =
                std::max(bmax[spec.start_hour + t], spec.fixed_load[t] + peak_total);
    }
    return bmax;
}

PlanResult solve_deterministic_equivalent(const std::vector<ScheduleLpSpec>& specs,
                                          const PriceCurve& prices,
                                          const PlanConfig& config) {
    const int H = specs.front().end_hour;
    const int K = static_cast<int>(specs.size());
    const double prob = 1.0 / K;
    DenseSimplex default_solver;
    const LpSolver& solver = config.solver ? *config.solver : default_solver;

    LpProblem lp;
    std::vector<double> bmax = purchase_upper_bounds(specs, H);
    std::vector<int> b_vars(H);
    for (int h = 0; h < H; ++h)
        b_vars[h] = lp.add_variable(prices.forward[h], 0.0, bmax[h] + 1.0);

    struct ScenarioVars {
        std::vector<std::vector<int>> cum;
        std::vector<int> over, under;
    };
    std::vector<ScenarioVars> vars(K);

    for (int k = 0; k < K; ++k) {
        const auto& spec = specs[k];
        const int W = spec.window_hours();
        vars[k].cum.resize(spec.clusters.size());
        for (std::size_t q = 0; q < spec.clusters.size(); ++q) {
            const auto& c = spec.clusters[q];
            vars[k].cum[q].resize(W);
            double running_lo = c.committed;
            for (int t = 0; t < W; ++t) {
                running_lo = std::max(running_lo, c.cum_lower[t]);
                vars[k].cum[q][t] = lp.add_variable(0.0, running_lo, c.cum_upper[t]);
            }
        }
        vars[k].over.resize(W);
        vars[k].under.resize(W);
        for (int t = 0; t < W; ++t) {
            int h = spec.start_hour + t;
            vars[k].over[t] = lp.add_variable(prob * prices.up_hour_total(h), 0.0, kInf);
            vars[k].under[t] = lp.add_variable(-prob * prices.dn_hour_total(h), 0.0, kInf);
        }
        for (std::size_t q = 0; q < spec.clusters.size(); ++q)
            for (int t = 1; t < W; ++t)
                lp.add_row(RowSense::GE, 0.0,
                           {{vars[k].cum[q][t], 1.0}, {vars[k].cum[q][t - 1], -1.0}});
        for (int t = 0; t < W; ++t) {
            const int h = spec.start_hour + t;
            std::vector<std::pair<int, double>> coeffs;
            double rhs = -spec.fixed_load[t];
            for (std::size_t q = 0; q < spec.clusters.size(); ++q) {
                const auto& c = spec.clusters[q];
                auto pulse_at = [&](int j) -> double {
                    return (j >= 0 && j < static_cast<int>(c.pulse.size())) ? c.pulse[j] : 0.0;
                };
                for (int s = 0; s <= t; ++s) {
                    double coef =
                        (s == t) ? pulse_at(0) : pulse_at(t - s) - pulse_at(t - s - 1);
                    if (coef != 0.0) coeffs.emplace_back(vars[k].cum[q][s], coef);
                }
                rhs += pulse_at(t) * c.committed;
            }
            coeffs.emplace_back(vars[k].over[t], -1.0);
            coeffs.emplace_back(vars[k].under[t], 1.0);
            coeffs.emplace_back(b_vars[h], -1.0);
            lp.rows.push_back(LpRow{std::move(coeffs), RowSense::EQ, rhs});
        }
    }

    LpSolution sol = solver.solve(lp);
    if (!sol.optimal())
        throw Error("planner: deterministic equivalent did not solve to optimality");

    PlanResult result;
    result.purchase.resize(H);
    for (int h = 0; h < H; ++h) result.purchase[h] = sol.x[b_vars[h]];
    result.forward_cost = 0.0;
    for (int h = 0; h < H; ++h) result.forward_cost += prices.forward[h] * result.purchase[h];
    result.expected_cost = sol.objective;
    result.lp_iterations = sol.iterations;
    result.schedules.resize(K);
    result.scenario_costs.resize(K);
    for (int k = 0; k < K; ++k) {
        const auto& spec = specs[k];
        const int W = spec.window_hours();
        result.schedules[k].resize(spec.clusters.size());
        for (std::size_t q = 0; q < spec.clusters.size(); ++q) {
            result.schedules[k][q].resize(W);
            for (int t = 0; t < W; ++t)
                result.schedules[k][q][t] = sol.x[vars[k].cum[q][t]];
        }
        auto loads = schedule_loads(spec, result.schedules[k]);
        std::vector<double> sub_loads(static_cast<std::size_t>(H) * prices.substeps, 0.0);
        for (int t = 0; t < W; ++t)
            for (int l = 0; l < prices.substeps; ++l)
                sub_loads[static_cast<std::size_t>(spec.start_hour + t) * prices.substeps + l] =
                    loads[t];
        result.scenario_costs[k] = realtime_cost(sub_loads, result.purchase, prices);
    }
    return result;
}

Count to_count_checked(double v, const char* what) {
    Count c = static_cast<Count>(std::llround(v));
    if (std::abs(v - static_cast<double>(c)) > 1e-6)
        throw Error(std::string("planner: expected an integer value for ") + what);
    return c;
}

// Integer rounding replay of every scenario schedule plus the optional
// exhaustive-ILP gap on tiny single-scenario instances.
PlanResult finalize_rounding(PlanResult result, const std::vector<ScheduleLpSpec>& specs,
                             const PriceCurve& prices, const PlanConfig& config) {
    const int K = static_cast<int>(specs.size());
    const int H = specs.front().end_hour;
    result.scenario_rounded_costs.assign(K, 0.0);
    result.rounding_applied = true;

    for (int k = 0; k < K; ++k) {
        const auto& spec = specs[k];
        const int W = spec.window_hours();
        const std::size_t nq = spec.clusters.size();
        std::vector<Count> committed(nq);
        for (std::size_t q = 0; q < nq; ++q)
            committed[q] = to_count_checked(spec.clusters[q].committed, "committed");

        std::vector<std::vector<double>> rounded_cum(nq, std::vector<double>(W, 0.0));
        for (int t = 0; t < W; ++t) {
            std::vector<double> frac(nq);
            std::vector<Count> up(nq), lo(nq);
            for (std::size_t q = 0; q < nq; ++q) {
                frac[q] = result.schedules[k][q][t];
                up[q] = to_count_checked(spec.clusters[q].cum_upper[t], "cum_upper");
                lo[q] = to_count_checked(spec.clusters[q].cum_lower[t], "cum_lower");
            }
            auto inc = round_step_increments(frac, committed, up, lo);
            for (std::size_t q = 0; q < nq; ++q) {
                committed[q] += inc[q];
                rounded_cum[q][t] = static_cast<double>(committed[q]);
            }
        }
        auto loads = schedule_loads(spec, rounded_cum);
        std::vector<double> sub_loads(static_cast<std::size_t>(H) * prices.substeps, 0.0);
        for (int t = 0; t < W; ++t)
            for (int l = 0; l < prices.substeps; ++l)
                sub_loads[static_cast<std::size_t>(spec.start_hour + t) * prices.substeps +
                          l] = loads[t];
        result.scenario_rounded_costs[k] = realtime_cost(sub_loads, result.purchase, prices);
    }

    if (config.compute_exact_gap && K == 1) {
        const auto& spec = specs.front();
        const int W = spec.window_hours();
        double total_arrivals = 0.0;
        for (const auto& c : spec.clusters)
            total_arrivals += c.cum_upper.back() - c.committed;
        if (W <= 10 && spec.clusters.size() <= 4 && total_arrivals <= 8.5) {
            // exhaustive integer search over monotone cumulative paths
            const std::size_t nq = spec.clusters.size();
            std::vector<std::vector<double>> cum(nq, std::vector<double>(W, 0.0));
            double best = kInf;
            std::function<void(std::size_t)> per_cluster = [&](std::size_t q) {
                if (q == nq) {
                    auto loads = schedule_loads(spec, cum);
                    double cost = 0.0;
                    for (int t = 0; t < W; ++t) {
                        int h = spec.start_hour + t;
                        cost += std::min(prices.forward[h], prices.up_hour_total(h)) *
                                loads[t];
                    }
                    best = std::min(best, cost);
                    return;
                }
                const auto& c = spec.clusters[q];
                std::function<void(int, Count)> per_hour = [&](int t, Count level) {
                    if (t == W) {
                        per_cluster(q + 1);
                        return;
                    }
                    Count lo = std::max<Count>(to_count_checked(c.cum_lower[t], "lo"), level);
                    Count up = to_count_checked(c.cum_upper[t], "up");
                    for (Count v = lo; v <= up; ++v) {
                        cum[q][t] = static_cast<double>(v);
                        per_hour(t + 1, v);
                    }
                };
                per_hour(0, to_count_checked(c.committed, "committed"));
            };
            per_cluster(0);
            double rounded_total = result.forward_cost + result.scenario_rounded_costs[0];
            result.relaxation_gap = rounded_total - best;
        }
    }
    return result;
}

} // namespace

double PlanResult::total_variation() const {
    double tv = 0.0;
    for (std::size_t h = 1; h < purchase.size(); ++h)
        tv += std::abs(purchase[h] - purchase[h - 1]);
    return tv;
}

PlanResult solve_two_settlement(const std::vector<ScheduleLpSpec>& scenario_specs,
                                const PriceCurve& prices, const PlanConfig& config) {
    if (scenario_specs.empty()) throw Error("solve_two_settlement: no scenarios");
    check_price_configuration(prices);
    const int H = scenario_specs.front().end_hour;
    for (const auto& s : scenario_specs) {
        s.validate();
        if (s.start_hour != 0 || s.end_hour != H)
            throw Error("solve_two_settlement: scenarios must share the planning window");
    }
    if (prices.hours < H) throw Error("solve_two_settlement: price curve shorter than horizon");

    if (config.deterministic_equivalent)
        return finalize_rounding(solve_deterministic_equivalent(scenario_specs, prices, config),
                                 scenario_specs, prices, config);

    const int K = static_cast<int>(scenario_specs.size());
    const double prob = 1.0 / K;
    DenseSimplex default_solver;
    const LpSolver& solver = config.solver ? *config.solver : default_solver;

    std::vector<double> bmax = purchase_upper_bounds(scenario_specs, H);
    double theta_lo = 0.0;
    for (int h = 0; h < H; ++h) theta_lo -= prices.dn_hour_total(h) * (bmax[h] + 1.0);

    LpProblem master;
    std::vector<int> b_vars(H);
    for (int h = 0; h < H; ++h)
        master.add_variable(prices.forward[h], 0.0, bmax[h] + 1.0);
    for (int h = 0; h < H; ++h) b_vars[h] = h;
    std::vector<int> theta_vars(K);
    for (int k = 0; k < K; ++k) theta_vars[k] = master.add_variable(prob, theta_lo, kInf);

    PlanResult result;
    result.purchase.assign(H, 0.0);
    double best_ub = kInf;
    std::vector<double> best_b(H, 0.0);
    long lp_iters = 0;

    std::vector<double> b_hat(H, 0.0);
    int iter = 0;
    for (; iter < config.benders_max_iterations; ++iter) {
        LpSolution msol = solver.solve(master);
        if (!msol.optimal())
            throw Error("planner: master problem failed to solve");
        lp_iters += msol.iterations;
        for (int h = 0; h < H; ++h) b_hat[h] = msol.x[b_vars[h]];
        const double lb = msol.objective;

        double mean_cost = 0.0;
        bool added_cut = false;
        std::vector<SubproblemSolveResult> subs(K);
        for (int k = 0; k < K; ++k) {
            subs[k] = solve_subproblem(scenario_specs[k], prices, b_hat, solver);
            mean_cost += subs[k].cost;
            const double theta_k = msol.x[theta_vars[k]];
            if (subs[k].cost > theta_k + config.benders_tolerance *
                                             std::max(1.0, std::abs(subs[k].cost))) {
                // theta_k >= v + y'(B - B_hat)
                std::vector<std::pair<int, double>> coeffs;
                coeffs.emplace_back(theta_vars[k], 1.0);
                double rhs = subs[k].cost;
                for (int h = 0; h < H; ++h) {
                    if (subs[k].duals[h] != 0.0) {
                        coeffs.emplace_back(b_vars[h], -subs[k].duals[h]);
                        rhs -= subs[k].duals[h] * b_hat[h];
                    }
                }
                master.add_row(RowSense::GE, rhs, std::move(coeffs));
                added_cut = true;
            }
        }
        mean_cost *= prob;
        double forward = 0.0;
        for (int h = 0; h < H; ++h) forward += prices.forward[h] * b_hat[h];
        const double ub = forward + mean_cost;
        if (ub < best_ub) {
            best_ub = ub;
            best_b = b_hat;
        }
        if (!added_cut || best_ub - lb <= config.benders_tolerance * std::max(1.0, std::abs(best_ub)))
            break;
    }

    result.benders_iterations = iter + 1;
    result.lp_iterations = lp_iters;
    result.purchase = best_b;
    result.forward_cost = 0.0;
    for (int h = 0; h < H; ++h) result.forward_cost += prices.forward[h] * best_b[h];

    // final subproblem pass at the returned purchase
    result.scenario_costs.resize(K);
    result.schedules.resize(K);
    double mean_cost = 0.0;
    for (int k = 0; k < K; ++k) {
        auto sub = solve_subproblem(scenario_specs[k], prices, best_b, solver);
        result.scenario_costs[k] = sub.cost;
        result.schedules[k] = std::move(sub.cumulative);
        mean_cost += sub.cost;
    }
    result.expected_cost = result.forward_cost + mean_cost * prob;

    return finalize_rounding(std::move(result), scenario_specs, prices, config);
}

namespace {

int common_horizon(const ScenarioSet& scenarios) {
    if (scenarios.traces.empty()) throw Error("planner: empty scenario set");
    int steps = scenarios.traces.front().steps();
    for (const auto& t : scenarios.traces) {
        if (std::abs(t.step_minutes - 60.0) > 1e-9)
            throw Error("planner: planning scenarios must be sampled hourly");
        if (t.steps() != steps)
            throw Error("planner: scenarios must share the horizon");
    }
    return steps;
}

} // namespace

PlanResult plan_forward_clustered(const ScenarioSet& scenarios, const PriceCurve& prices,
                                  const std::vector<ClusterSpec>& catalog,
                                  const PlanConfig& config) {
    const int H = common_horizon(scenarios);
    std::vector<ScheduleLpSpec> specs;
    specs.reserve(scenarios.traces.size());
    for (const auto& trace : scenarios.traces)
        specs.push_back(make_nid_schedule_spec(catalog, trace, H));
    return solve_two_settlement(specs, prices, config);
}

PlanResult plan_forward_tank(const ScenarioSet& scenarios, const PriceCurve& prices,
                             const std::vector<ClusterSpec>& catalog,
                             const PlanConfig& config) {
    const int H = common_horizon(scenarios);
    std::vector<ScheduleLpSpec> specs;
    specs.reserve(scenarios.traces.size());
    for (const auto& trace : scenarios.traces)
        specs.push_back(make_tank_schedule_spec(catalog, trace, H));
    return solve_two_settlement(specs, prices, config);
}

void write_plan_table(std::ostream& out, const PlanResult& plan) {
    out << "# expected_cost=" << plan.expected_cost
        << " forward_cost=" << plan.forward_cost
        << " scenarios=" << plan.scenario_costs.size()
        << " total_variation=" << plan.total_variation() << '\n';
    out << "# h B\n";
    for (std::size_t h = 0; h < plan.purchase.size(); ++h)
        out << h << ' ' << plan.purchase[h] << '\n';
}

// ---------------------------------------------------------------------------
// Explicit state-bin tank LP (validation path for small instances)

LpProblem build_tank_statebin_lp(const std::vector<ClusterSpec>& catalog,
                                 const ScenarioTrace& trace, int horizon_hours,
                                 const PriceCurve& prices) {
    check_price_configuration(prices);
    // one state-bin cluster per completion deadline; full charge level common
    // to all appliances (the bundled case: 5)
    struct TankCluster {
        int deadline;
        int full_level;
        std::vector<std::vector<Count>> arrivals_by_state; // [x][h]
    };
    std::vector<TankCluster> tanks;
    auto find_tank = [&](int deadline, int full) -> TankCluster& {
        for (auto& t : tanks)
            if (t.deadline == deadline) {
                if (t.full_level != full)
                    throw Error("build_tank_statebin_lp: mixed full-charge levels in one "
                                "deadline cluster");
                return t;
            }
        tanks.push_back(TankCluster{deadline, full,
                                    std::vector<std::vector<Count>>(
                                        full + 1, std::vector<Count>(horizon_hours, 0))});
        return tanks.back();
    };

    int full_common = 0;
    for (const auto& spec : catalog) {
        if (spec.category != Category::Nid)
            throw Error("build_tank_statebin_lp: catalog must be NID clusters");
        full_common = std::max(full_common, static_cast<int>(spec.nid().pulse.size()));
    }
    for (std::size_t q = 0; q < catalog.size(); ++q) {
        const auto& p = catalog[q].nid();
        const int len = static_cast<int>(p.pulse.size());
        for (double v : p.pulse)
            if (std::abs(v - 1.0) > 1e-9)
                throw Error("build_tank_statebin_lp: needs unit-rate pulses");
        for (int h = 0; h < horizon_hours; ++h) {
            Count da = trace.increment_at(static_cast<ClusterId>(q), 0, h);
            if (da == 0) continue;
            int deadline = std::min(h + p.max_start_delay + len - 1, horizon_hours - 1);
            auto& tank = find_tank(deadline, full_common);
            tank.arrivals_by_state[full_common - len][h] += da;
        }
    }

    LpProblem lp;
    const int H = horizon_hours;
    std::vector<int> b_vars(H);
    for (int h = 0; h < H; ++h) b_vars[h] = lp.add_variable(prices.forward[h], 0.0, kInf);
    std::vector<int> over(H), under(H);
    for (int h = 0; h < H; ++h) {
        over[h] = lp.add_variable(prices.up_hour_total(h), 0.0, kInf);
        under[h] = lp.add_variable(-prices.dn_hour_total(h), 0.0, kInf);
    }
    // the purchase stays bounded because dn totals are below the forward price
    // (checked); still give B a finite roof for the simplex
    double energy_total = 0.0;
    for (const auto& tank : tanks)
        for (const auto& st : tank.arrivals_by_state)
            for (Count v : st) energy_total += static_cast<double>(v) * full_common;
    for (int h = 0; h < H; ++h) lp.upper[b_vars[h]] = energy_total + 1.0;

    std::vector<std::vector<std::pair<int, double>>> load_terms(H);

    for (const auto& tank : tanks) {
        const int E = tank.full_level;
        // occupancy variables n_x(h) and charge moves d_{x->x'}(h), x' > x
        std::vector<std::vector<int>> n_vars(E + 1, std::vector<int>(H, -1));
        for (int x = 0; x <= E; ++x)
            for (int h = 0; h < H; ++h) {
                double up_bound = kInf;
                if (x < E && h > tank.deadline) up_bound = 0.0; // all full by then
                n_vars[x][h] = lp.add_variable(0.0, 0.0, up_bound);
            }
        std::vector<std::vector<std::vector<int>>> d_vars(
            E + 1, std::vector<std::vector<int>>(E + 1, std::vector<int>(H, -1)));
        for (int x = 0; x <= E; ++x)
            for (int xp = x + 1; xp <= E; ++xp)
                for (int h = 0; h < H; ++h) {
                    if (h > tank.deadline) continue; // no charging past the deadline
                    d_vars[x][xp][h] = lp.add_variable(0.0, 0.0, kInf);
                    load_terms[h].emplace_back(d_vars[x][xp][h],
                                               static_cast<double>(xp - x));
                }

        for (int x = 0; x <= E; ++x) {
            Count cum_arr = 0;
            for (int h = 0; h < H; ++h) {
                cum_arr += tank.arrivals_by_state[x][h];
                // n_x(h) = a_x(h) + sum_{s<h} (in - out)
                std::vector<std::pair<int, double>> coeffs{{n_vars[x][h], 1.0}};
                for (int s = 0; s < h; ++s) {
                    for (int xp = 0; xp <= E; ++xp) {
                        if (xp < x && d_vars[xp][x][s] >= 0)
                            coeffs.emplace_back(d_vars[xp][x][s], -1.0);
                        if (xp > x && d_vars[x][xp][s] >= 0)
                            coeffs.emplace_back(d_vars[x][xp][s], 1.0);
                    }
                }
                lp.add_row(RowSense::EQ, static_cast<double>(cum_arr), std::move(coeffs));
                // outflow during hour h bounded by occupancy
                if (x < E && h <= tank.deadline) {
                    std::vector<std::pair<int, double>> out{{n_vars[x][h], -1.0}};
                    for (int xp = x + 1; xp <= E; ++xp)
                        if (d_vars[x][xp][h] >= 0) out.emplace_back(d_vars[x][xp][h], 1.0);
                    lp.add_row(RowSense::LE, 0.0, std::move(out));
                }
            }
        }
    }

    for (int h = 0; h < H; ++h) {
        auto coeffs = load_terms[h];
        coeffs.emplace_back(over[h], -1.0);
        coeffs.emplace_back(under[h], 1.0);
        coeffs.emplace_back(b_vars[h], -1.0);
        lp.add_row(RowSense::EQ, 0.0, std::move(coeffs));
    }
    return lp;
}

// ---------------------------------------------------------------------------
// TCL capacity

TclDutyCycle tcl_duty_cycle(const TclClusterParams& params, double ambient_f,
                            double lower_f, double upper_f) {
    const double k = params.loss_per_min;
    if (k <= 0.0) throw Error("tcl_duty_cycle: loss rate must be positive");
    if (upper_f <= lower_f) throw Error("tcl_duty_cycle: empty band");
    const double steady_on = ambient_f + params.on_rise();
    if (steady_on <= upper_f + 1e-12) {
        std::ostringstream os;
        os << "tcl_duty_cycle: unreachable upper boundary (steady-on " << steady_on
           << " F <= " << upper_f << " F); heater too weak for the ambient";
        throw Error(os.str());
    }
    if (ambient_f >= lower_f - 1e-12) {
        std::ostringstream os;
        os << "tcl_duty_cycle: unreachable lower boundary (ambient " << ambient_f
           << " F >= " << lower_f << " F); no heating needed";
        throw Error(os.str());
    }
    TclDutyCycle d;
    d.tau_on_min = std::log((steady_on - lower_f) / (steady_on - upper_f)) / k;
    d.tau_off_min = std::log((upper_f - ambient_f) / (lower_f - ambient_f)) / k;
    d.duty = d.tau_on_min / (d.tau_on_min + d.tau_off_min);
    return d;
}

namespace {

void check_occupancy_shape(const std::vector<ClusterSpec>& catalog,
                           const std::vector<std::vector<double>>& occupancy,
                           const std::vector<double>& ambient) {
    if (occupancy.size() != catalog.size())
        throw Error("tcl baseline: occupancy rows must match the catalog");
    for (const auto& row : occupancy)
        if (row.size() != ambient.size())
            throw Error("tcl baseline: occupancy columns must match the ambient profile");
}

} // namespace

std::vector<double> tcl_baseline_load(const std::vector<ClusterSpec>& catalog,
                                      const std::vector<std::vector<double>>& occupancy,
                                      const std::vector<double>& ambient_f) {
    check_occupancy_shape(catalog, occupancy, ambient_f);
    std::vector<double> load(ambient_f.size(), 0.0);
    for (std::size_t q = 0; q < catalog.size(); ++q) {
        const auto& p = catalog[q].tcl();
        for (std::size_t h = 0; h < ambient_f.size(); ++h) {
            if (occupancy[q][h] <= 0.0) continue;
            TclDutyCycle d;
            try {
                d = tcl_duty_cycle(p, ambient_f[h], p.lower_bound(), p.upper_bound());
            } catch (const Error& e) {
                std::ostringstream os;
                os << "tcl_baseline_load: cluster " << catalog[q].id << " hour " << h << ": "
                   << e.what();
                throw Error(os.str());
            }
            load[h] += occupancy[q][h] * p.power_watts * d.duty;
        }
    }
    return load;
}

TclEnvelopes tcl_stationary_envelopes(const std::vector<ClusterSpec>& catalog,
                                      const std::vector<std::vector<double>>& occupancy,
                                      const std::vector<double>& ambient_f,
                                      double theta_f) {
    check_occupancy_shape(catalog, occupancy, ambient_f);
    for (const auto& spec : catalog)
        if (theta_f > spec.tcl().band_f + 1e-12)
            throw Error("tcl_stationary_envelopes: theta exceeds a cluster band width");

    TclEnvelopes env;
    env.max_load.assign(ambient_f.size(), 0.0);
    env.min_load.assign(ambient_f.size(), 0.0);
    for (std::size_t q = 0; q < catalog.size(); ++q) {
        const auto& p = catalog[q].tcl();
        const double lo = p.lower_bound(), up = p.upper_bound();
        for (std::size_t h = 0; h < ambient_f.size(); ++h) {
            if (occupancy[q][h] <= 0.0) continue;
            auto dmax = tcl_duty_cycle(p, ambient_f[h], up - theta_f, up);
            auto dmin = tcl_duty_cycle(p, ambient_f[h], lo, lo + theta_f);
            env.max_load[h] += occupancy[q][h] * p.power_watts * dmax.duty;
            env.min_load[h] += occupancy[q][h] * p.power_watts * dmin.duty;
        }
    }
    return env;
}

double conservative_capacity(const TclEnvelopes& envelopes,
                             const std::vector<double>& baseline) {
    if (envelopes.max_load.size() != baseline.size() ||
        envelopes.min_load.size() != baseline.size())
        throw Error("conservative_capacity: size mismatch");
    double m = kInf;
    for (std::size_t h = 0; h < baseline.size(); ++h) {
        m = std::min(m, baseline[h] - envelopes.min_load[h]);
        m = std::min(m, envelopes.max_load[h] - baseline[h]);
    }
    return std::max(0.0, m);
}

namespace {

// Holds the cluster at baseline + step for the hold duration; accepted when
// the deviation stays below tol_frac * |step| for the required share of
// minutes.
bool hold_step_acceptable(const std::vector<TclUnit>& snapshot, double ambient_f,
                          double step_watts_total, double baseline_watts,
                          const CapacityConfig& config, double mean_power,
                          double courtesy_minutes, std::uint64_t seed) {
    TclPopulationSim sim(snapshot, courtesy_minutes, seed);
    // snapshot units already carry their report state; re-initialize cheaply
    sim.initialize_reports(ambient_f);
    const int hold = static_cast<int>(std::lround(config.hold_minutes));
    const double target = baseline_watts + step_watts_total;
    const double tol = config.accept_tolerance_frac * std::abs(step_watts_total);
    int ok_minutes = 0;
    double measured = sim.realized_load_watts();
    // integral action: unforecast boundary crossings drain the commanded level
    // every minute, so the running shortfall is re-commanded on top
    double correction = 0.0;
    for (int minute = 0; minute < hold; ++minute) {
        auto coarse = coarse_cluster(sim.visible_reports(), mean_power);
        auto cmds = tcl_track_step(coarse, target + correction, 0.0, mean_power, measured);
        sim.step(cmds, ambient_f);
        measured = sim.metered_load_watts();
        correction = std::clamp(correction - 0.5 * (measured - target),
                                -0.3 * std::abs(target), 0.3 * std::abs(target));
        if (std::abs(measured - target) < tol) ok_minutes++;
    }
    return ok_minutes >= static_cast<int>(std::ceil(config.accept_quantile * hold - 1e-9));
}

} // namespace

CapacityResult simulated_capacity(const TclCaseCatalog& catalog,
                                  const std::vector<std::vector<double>>& occupancy,
                                  const std::vector<double>& ambient_f,
                                  const CapacityConfig& config) {
    check_occupancy_shape(catalog.specs, occupancy, ambient_f);
    CapacityResult result;
    result.baseline = tcl_baseline_load(catalog.specs, occupancy, ambient_f);
    result.envelopes =
        tcl_stationary_envelopes(catalog.specs, occupancy, ambient_f, config.theta_f);
    result.conservative = conservative_capacity(result.envelopes, result.baseline);

    const std::size_t nq = catalog.specs.size();
    const std::size_t nh = ambient_f.size();
    result.per_cluster_step.assign(nq, std::vector<double>(nh, 0.0));

    double m_prime = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
        double total_n = 0.0;
        for (std::size_t h = 0; h < nh; ++h) total_n += occupancy[q][h];
        if (total_n <= 0.0) continue;

        // The step response is certified on the cluster model itself: a
        // reference population carrying the quantized parameters with the
        // noise at its mean, so M^q(h) measures capacity physics rather than
        // sampling noise of a finite draw.
        TclClusterParams params = catalog.specs[q].tcl();
        params.noise_sigma_f = 0.0;
        const int n_ref = config.reference_units;
        double worst_product = kInf;
        bool cluster_failed = false;

        for (std::size_t h = 0; h < nh; ++h) {
            TclDutyCycle duty;
            try {
                duty = tcl_duty_cycle(params, ambient_f[h], params.lower_bound(),
                                      params.upper_bound());
            } catch (const Error&) {
                cluster_failed = true;
                break;
            }

            // initial temperatures uniform in the band, then settled into the
            // natural cycle before the step is applied
            std::vector<TclUnit> units(n_ref);
            auto rng = make_rng(config.seed, 0xAA0000 + (q << 8) + h);
            std::uniform_real_distribution<double> in_band(params.lower_bound(),
                                                           params.upper_bound());
            for (int i = 0; i < n_ref; ++i) {
                units[i].params = params;
                units[i].cluster = static_cast<ClusterId>(q);
                units[i].temp_f = in_band(rng);
                units[i].on = (static_cast<double>(i) / n_ref) < duty.duty;
            }
            TclPopulationSim warm(units, catalog.config.courtesy_minutes,
                                  derive_seed(config.seed, 0xAA00 + q));
            warm.initialize_reports(ambient_f[h]);
            for (int minute = 0; minute < config.warmup_minutes; ++minute)
                warm.step_autonomous(ambient_f[h]);
            const auto snapshot = warm.units();
            const double baseline = duty.duty * params.power_watts * n_ref;
            const double mean_power = params.power_watts;

            double per_unit_step = kInf;
            for (int dir = 0; dir < 2; ++dir) {
                const double sign = dir == 0 ? 1.0 : -1.0;
                const double headroom =
                    dir == 0 ? (1.0 - duty.duty) * params.power_watts
                             : duty.duty * params.power_watts;
                double lo = 0.0, hi = std::min(headroom * 1.25, params.power_watts);
                const double bracket = hi;
                std::uint64_t hold_seed =
                    derive_seed(config.seed, 0xBB0000 + (q << 8) + h * 2 + dir);
                if (!hold_step_acceptable(snapshot, ambient_f[h], sign * hi * n_ref,
                                          baseline, config, mean_power,
                                          catalog.config.courtesy_minutes, hold_seed)) {
                    for (int it = 0; it < config.bisect_iterations; ++it) {
                        double mid = (lo + hi) / 2.0;
                        if (hold_step_acceptable(snapshot, ambient_f[h], sign * mid * n_ref,
                                                 baseline, config, mean_power,
                                                 catalog.config.courtesy_minutes, hold_seed))
                            lo = mid;
                        else
                            hi = mid;
                        if (hi - lo <= config.bracket_tolerance_frac * bracket) break;
                    }
                } else {
                    lo = hi;
                }
                per_unit_step = std::min(per_unit_step, lo);
            }
            result.per_cluster_step[q][h] = per_unit_step;
            worst_product = std::min(worst_product, occupancy[q][h] * per_unit_step);
        }
        if (cluster_failed) {
            result.failed_clusters.push_back(catalog.specs[q].id);
            continue;
        }
        if (std::isfinite(worst_product)) m_prime += worst_product;
    }
    result.simulated = m_prime;
    return result;
}

} // namespace statebin
