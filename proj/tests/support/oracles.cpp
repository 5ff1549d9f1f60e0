#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "statebin/categories.hpp"
#include "statebin/rng.hpp"

namespace oracle {

using statebin::Category;

Trajectory random_battery_trajectory(const std::vector<ClusterSpec>& catalog,
                                     int num_appliances, int num_steps,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(statebin::derive_seed(seed, 77));
    Trajectory traj;

    std::vector<int> battery_clusters;
    for (const auto& c : catalog)
        if (c.category != Category::Nid && c.category != Category::Tcl)
            battery_clusters.push_back(c.id);
    if (battery_clusters.empty()) throw statebin::Error("oracle: no battery clusters");

    for (int i = 0; i < num_appliances; ++i) {
        BatteryAppliance a;
        a.cluster = battery_clusters[rng() % battery_clusters.size()];
        const auto& spec = catalog[a.cluster];
        a.arrival = 1 + static_cast<int>(rng() % std::max(1, num_steps));
        a.initial = static_cast<int>(rng() % spec.state_space.size());
        traj.appliances.push_back(a);
    }

    std::vector<int> state(num_appliances, -1); // -1: not yet arrived

    for (int t = 0; t < num_steps; ++t) {
        TrajectoryStep step;
        step.arrival_increments = statebin::zero_counts(catalog);
        step.switches = SwitchMatrix::empty(catalog.size());

        // moves of appliances present at time t
        for (int i = 0; i < num_appliances; ++i) {
            if (traj.appliances[i].arrival > t) continue;
            const auto& spec = catalog[traj.appliances[i].cluster];
            auto nb = statebin::neighbor_set(spec, state[i]);
            int next = nb[rng() % nb.size()];
            if (next != state[i]) {
                step.switches.add(traj.appliances[i].cluster, state[i], next, 1);
                step.per_appliance_load += next - state[i];
                state[i] = next;
            }
        }
        // arrivals landing at time t+1
        for (int i = 0; i < num_appliances; ++i) {
            if (traj.appliances[i].arrival != t + 1) continue;
            state[i] = traj.appliances[i].initial;
            step.arrival_increments[traj.appliances[i].cluster][state[i]] += 1;
        }
        traj.steps.push_back(std::move(step));
    }
    return traj;
}

// ---------------------------------------------------------------------------

namespace {

// Solves the m x m system via Gaussian elimination; false when singular.
bool solve_square(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double>& out) {
    const int m = static_cast<int>(b.size());
    for (int col = 0; col < m; ++col) {
        int piv = -1;
        double best = 1e-9;
        for (int r = col; r < m; ++r)
            if (std::abs(a[r][col]) > best) {
                best = std::abs(a[r][col]);
                piv = r;
            }
        if (piv < 0) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (int r = 0; r < m; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (int ccol = col; ccol < m; ++ccol) a[r][ccol] -= f * a[col][ccol];
            b[r] -= f * b[col];
        }
    }
    out.assign(m, 0.0);
    for (int r = 0; r < m; ++r) out[r] = b[r] / a[r][r];
    return true;
}

} // namespace

LpBruteForceResult lp_brute_force(const LpProblem& problem) {
    problem.validate();
    const int nv = problem.num_vars;
    const int m = static_cast<int>(problem.rows.size());
    const int n = nv + m; // structurals + slacks

    std::vector<double> lo(problem.lower), up(problem.upper), cost(problem.cost);
    lo.resize(n);
    up.resize(n);
    cost.resize(n, 0.0);
    for (int i = 0; i < m; ++i) {
        switch (problem.rows[i].sense) {
            case statebin::RowSense::LE: lo[nv + i] = 0.0;  up[nv + i] = 1e18; break;
            case statebin::RowSense::EQ: lo[nv + i] = 0.0;  up[nv + i] = 0.0;  break;
            case statebin::RowSense::GE: lo[nv + i] = -1e18; up[nv + i] = 0.0; break;
        }
    }
    for (int j = 0; j < nv; ++j)
        if (!std::isfinite(lo[j]) || !std::isfinite(up[j]))
            throw statebin::Error("lp_brute_force: needs finite structural bounds");

    std::vector<std::vector<double>> dense(m, std::vector<double>(n, 0.0));
    std::vector<double> rhs(m, 0.0);
    for (int i = 0; i < m; ++i) {
        for (auto [j, v] : problem.rows[i].coeffs) dense[i][j] += v;
        dense[i][nv + i] = 1.0;
        rhs[i] = problem.rows[i].rhs;
    }

    LpBruteForceResult result;
    result.feasible = false;
    result.objective = 1e300;

    // choose m basis columns, all others pinned at a finite bound
    std::vector<int> comb(m);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == m) {
            std::vector<char> basic(n, 0);
            for (int b : comb) basic[b] = 1;
            std::vector<int> nonbasic;
            for (int j = 0; j < n; ++j)
                if (!basic[j]) nonbasic.push_back(j);

            // every nonbasic must sit at a finite bound; enumerate both sides
            const int nn = static_cast<int>(nonbasic.size());
            for (int mask = 0; mask < (1 << nn); ++mask) {
                std::vector<double> xval(n, 0.0);
                bool ok = true;
                for (int p = 0; p < nn; ++p) {
                    int j = nonbasic[p];
                    double v = (mask >> p) & 1 ? up[j] : lo[j];
                    if (std::abs(v) >= 1e17) { ok = false; break; }
                    xval[j] = v;
                }
                if (!ok) continue;
                std::vector<double> b2(rhs);
                for (int p = 0; p < nn; ++p) {
                    int j = nonbasic[p];
                    for (int i = 0; i < m; ++i) b2[i] -= dense[i][j] * xval[j];
                }
                std::vector<std::vector<double>> bm(m, std::vector<double>(m, 0.0));
                for (int col = 0; col < m; ++col)
                    for (int i = 0; i < m; ++i) bm[i][col] = dense[i][comb[col]];
                std::vector<double> xb;
                if (!solve_square(bm, b2, xb)) continue;
                bool feas = true;
                for (int col = 0; col < m && feas; ++col) {
                    int j = comb[col];
                    if (xb[col] < lo[j] - 1e-7 || xb[col] > up[j] + 1e-7) feas = false;
                    xval[j] = xb[col];
                }
                if (!feas) continue;
                double obj = 0.0;
                for (int j = 0; j < n; ++j) obj += cost[j] * xval[j];
                result.feasible = true;
                result.objective = std::min(result.objective, obj);
            }
            return;
        }
        for (int j = start; j <= n - (m - depth); ++j) {
            comb[depth] = j;
            rec(j + 1, depth + 1);
        }
    };
    if (m == 0) {
        // pure box problem
        double obj = 0.0;
        for (int j = 0; j < nv; ++j) obj += cost[j] >= 0 ? cost[j] * lo[j] : cost[j] * up[j];
        result.feasible = true;
        result.objective = obj;
    } else {
        rec(0, 0);
    }
    return result;
}

// ---------------------------------------------------------------------------

double enumerate_nid_best(const std::vector<NidAppliance>& appliances, int horizon,
                          const std::function<double(const std::vector<double>&)>& cost) {
    const int n = static_cast<int>(appliances.size());
    std::vector<int> start(n, 0);
    double best = 1e300;
    std::function<void(int)> rec = [&](int idx) {
        if (idx == n) {
            std::vector<double> load(horizon, 0.0);
            for (int i = 0; i < n; ++i)
                for (std::size_t j = 0; j < appliances[i].pulse.size(); ++j) {
                    int h = start[i] + static_cast<int>(j);
                    if (h < horizon) load[h] += appliances[i].pulse[j];
                }
            best = std::min(best, cost(load));
            return;
        }
        for (int s = appliances[idx].arrival;
             s <= appliances[idx].arrival + appliances[idx].max_delay; ++s) {
            if (s >= horizon) break;
            start[idx] = s;
            rec(idx + 1);
        }
    };
    rec(0);
    return best;
}

double enumerate_tank_best(const std::vector<TankAppliance>& appliances, int horizon,
                           const std::function<double(const std::vector<double>&)>& cost) {
    const int n = static_cast<int>(appliances.size());
    std::vector<std::vector<int>> charge(n, std::vector<int>(horizon, 0));
    double best = 1e300;

    std::function<void(int)> per_appliance = [&](int idx) {
        if (idx == n) {
            std::vector<double> load(horizon, 0.0);
            for (int i = 0; i < n; ++i)
                for (int h = 0; h < horizon; ++h) load[h] += charge[i][h];
            best = std::min(best, cost(load));
            return;
        }
        const auto& a = appliances[idx];
        std::function<void(int, int)> per_hour = [&](int h, int level) {
            if (h == horizon) {
                if (level == a.capacity) per_appliance(idx + 1);
                return;
            }
            if (h >= a.deadline && level < a.capacity) return; // missed
            int max_add = (h >= a.arrival) ? a.capacity - level : 0;
            for (int add = 0; add <= max_add; ++add) {
                charge[idx][h] = add;
                per_hour(h + 1, level + add);
            }
            charge[idx][h] = 0;
        };
        per_hour(0, a.initial);
    };
    per_appliance(0);
    return best;
}

double deterministic_plan_cost(const std::vector<double>& load,
                               const std::vector<double>& pi_f,
                               const std::vector<double>& pi_up,
                               const std::vector<double>& pi_dn) {
    double total = 0.0;
    for (std::size_t h = 0; h < load.size(); ++h) {
        if (pi_dn[h] > pi_f[h] + 1e-12)
            throw statebin::Error("deterministic_plan_cost: pi_dn > pi_f is unbounded");
        total += std::min(pi_f[h], pi_up[h]) * load[h];
    }
    return total;
}

// ---------------------------------------------------------------------------

double boundary_hit_time_ode(const statebin::TclClusterParams& params, double x0,
                             bool on, double ambient_f, double dt_min) {
    const double k = params.loss_per_min;
    const double g = on ? params.gain_f_per_min : 0.0;
    const double target = on ? params.upper_bound() : params.lower_bound();
    double x = x0;
    double t = 0.0;
    const double tmax = 1e6;
    while (t < tmax) {
        double rate = -k * x + ambient_f * k + g;
        double xn = x + dt_min * rate;
        bool crossed = on ? (xn >= target) : (xn <= target);
        if (crossed) {
            double frac = std::abs((target - x) / (xn - x));
            return t + dt_min * frac;
        }
        x = xn;
        t += dt_min;
    }
    throw statebin::Error("boundary_hit_time_ode: boundary not reached");
}

DutyCycleResult thermostat_duty_ode(const statebin::TclClusterParams& params,
                                    double ambient_f, double lower_f, double upper_f,
                                    double dt_min) {
    statebin::TclClusterParams p = params;
    p.setpoint_f = (lower_f + upper_f) / 2.0;
    p.band_f = upper_f - lower_f;
    DutyCycleResult r;
    r.tau_on_min = boundary_hit_time_ode(p, lower_f, true, ambient_f, dt_min);
    r.tau_off_min = boundary_hit_time_ode(p, upper_f, false, ambient_f, dt_min);
    r.duty = r.tau_on_min / (r.tau_on_min + r.tau_off_min);
    return r;
}

// ---------------------------------------------------------------------------

namespace {

double gamma_p_series(double a, double x) {
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-14) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace

double chi_square_cdf(double x, double dof) {
    if (x <= 0.0) return 0.0;
    const double a = dof / 2.0, xx = x / 2.0;
    if (xx < a + 1.0) return gamma_p_series(a, xx);
    return 1.0 - gamma_q_contfrac(a, xx);
}

} // namespace oracle
