#include "statebin/simplex.hpp"

#include <algorithm>
#include <cmath>

namespace statebin {

int LpProblem::add_variable(double c, double lo, double up) {
    num_vars++;
    cost.push_back(c);
    lower.push_back(lo);
    upper.push_back(up);
    return num_vars - 1;
}

void LpProblem::add_row(RowSense sense, double rhs,
                        std::vector<std::pair<int, double>> coeffs) {
    rows.push_back(LpRow{std::move(coeffs), sense, rhs});
}

void LpProblem::validate() const {
    if (static_cast<int>(cost.size()) != num_vars ||
        static_cast<int>(lower.size()) != num_vars ||
        static_cast<int>(upper.size()) != num_vars)
        throw Error("LpProblem: inconsistent variable arrays");
    for (int j = 0; j < num_vars; ++j) {
        if (lower[j] > upper[j] + 1e-12)
            throw Error("LpProblem: variable with lower > upper");
        if (std::isinf(lower[j]) && std::isinf(upper[j]))
            throw Error("LpProblem: free variables are not supported");
        if (!std::isfinite(cost[j])) throw Error("LpProblem: non-finite cost");
    }
    for (const auto& row : rows) {
        if (!std::isfinite(row.rhs)) throw Error("LpProblem: non-finite rhs");
        for (auto [j, v] : row.coeffs) {
            if (j < 0 || j >= num_vars) throw Error("LpProblem: coefficient index out of range");
            if (!std::isfinite(v)) throw Error("LpProblem: non-finite coefficient");
        }
    }
}

namespace {

constexpr double kEpsOpt = 1e-9;
constexpr double kEpsPivot = 1e-9;
constexpr double kEpsFeas = 1e-7;

enum class AtBound : char { Lower, Upper };

struct Tableau {
    int m = 0; // rows
    int n = 0; // total columns (structurals + slacks + artificials)
    std::vector<double> t;     // m x n, row major
    std::vector<double> d;     // reduced-cost row, n
    std::vector<double> beta;  // current values of basic variables
    std::vector<int> basis;    // column basic in each row
    std::vector<double> lo, up, cost;
    std::vector<char> in_basis;
    std::vector<AtBound> at;      // valid for nonbasic columns
    std::vector<double> val;      // current value of nonbasic columns
    long iterations = 0;

    double& T(int i, int j) { return t[static_cast<std::size_t>(i) * n + j]; }
    double T(int i, int j) const { return t[static_cast<std::size_t>(i) * n + j]; }

    void compute_reduced_costs(const std::vector<double>& costs) {
        // d_j = c_j - c_B' B^-1 A_j, using the maintained tableau columns
        d.assign(n, 0.0);
        for (int j = 0; j < n; ++j) d[j] = costs[j];
        for (int i = 0; i < m; ++i) {
            double cb = costs[basis[i]];
            if (cb == 0.0) continue;
            const double* row = &t[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) d[j] -= cb * row[j];
        }
    }

    double objective(const std::vector<double>& costs) const {
        double obj = 0.0;
        for (int j = 0; j < n; ++j)
            if (!in_basis[j]) obj += costs[j] * val[j];
        for (int i = 0; i < m; ++i) obj += costs[basis[i]] * beta[i];
        return obj;
    }

    // One simplex pass minimizing `costs`. Returns final status.
    LpStatus iterate(const std::vector<double>& costs, long max_iter, bool phase_two) {
        compute_reduced_costs(costs);
        int stall = 0;
        bool bland = false;
        while (true) {
            if (iterations >= max_iter) return LpStatus::IterationLimit;

            // entering column
            int q = -1;
            double best = kEpsOpt;
            for (int j = 0; j < n; ++j) {
                if (in_basis[j]) continue;
                if (up[j] - lo[j] < 1e-15) continue; // fixed
                double score = 0.0;
                if (at[j] == AtBound::Lower && d[j] < -kEpsOpt) score = -d[j];
                else if (at[j] == AtBound::Upper && d[j] > kEpsOpt) score = d[j];
                else continue;
                if (bland) { q = j; break; }
                if (score > best) { best = score; q = j; }
            }
            if (q < 0) return LpStatus::Optimal;

            const double sigma = (at[q] == AtBound::Lower) ? 1.0 : -1.0;

            // ratio test
            double t_max = kInf;
            if (std::isfinite(up[q]) && std::isfinite(lo[q]))
                t_max = up[q] - lo[q]; // bound flip
            int r = -1;
            AtBound leave_at = AtBound::Lower;
            for (int i = 0; i < m; ++i) {
                double a = sigma * T(i, q);
                if (std::abs(a) < kEpsPivot) continue;
                int bj = basis[i];
                double limit;
                AtBound hit;
                if (a > 0.0) { // basic decreases toward its lower bound
                    if (!std::isfinite(lo[bj])) continue;
                    limit = (beta[i] - lo[bj]) / a;
                    hit = AtBound::Lower;
                } else { // basic increases toward its upper bound
                    if (!std::isfinite(up[bj])) continue;
                    limit = (beta[i] - up[bj]) / a;
                    hit = AtBound::Upper;
                }
                if (limit < -1e-11) limit = 0.0;
                bool better = limit < t_max - 1e-12;
                bool tie = std::abs(limit - t_max) <= 1e-12 && r >= 0;
                if (bland ? (better || (tie && basis[i] < basis[r]))
                          : (better || (tie && std::abs(T(i, q)) > std::abs(T(r, q)))))
                {
                    t_max = limit;
                    r = i;
                    leave_at = hit;
                }
            }

            if (std::isinf(t_max)) {
                if (!phase_two)
                    throw Error("simplex: phase-1 objective unbounded (internal error)");
                return LpStatus::Unbounded;
            }

            iterations++;
            if (t_max < 1e-12) {
                if (++stall > 64) bland = true;
            } else {
                stall = 0;
                bland = false;
            }

            // move basics by the step
            if (t_max != 0.0) {
                for (int i = 0; i < m; ++i) {
                    double a = T(i, q);
                    if (a != 0.0) beta[i] -= sigma * t_max * a;
                }
            }

            if (r < 0) {
                // entering variable flips to its opposite bound
                at[q] = (at[q] == AtBound::Lower) ? AtBound::Upper : AtBound::Lower;
                val[q] = (at[q] == AtBound::Lower) ? lo[q] : up[q];
                continue;
            }

            // pivot: q enters at row r, basis[r] leaves at the bound it hit
            int leave = basis[r];
            double enter_val = val[q] + sigma * t_max;
            in_basis[leave] = 0;
            at[leave] = leave_at;
            val[leave] = (leave_at == AtBound::Lower) ? lo[leave] : up[leave];
            basis[r] = q;
            in_basis[q] = 1;
            beta[r] = enter_val;

            // eliminate column q from the tableau and the reduced-cost row
            double piv = T(r, q);
            double* rowr = &t[static_cast<std::size_t>(r) * n];
            double inv = 1.0 / piv;
            for (int j = 0; j < n; ++j) rowr[j] *= inv;
            for (int i = 0; i < m; ++i) {
                if (i == r) continue;
                double f = T(i, q);
                if (std::abs(f) < 1e-14) { T(i, q) = 0.0; continue; }
                double* rowi = &t[static_cast<std::size_t>(i) * n];
                for (int j = 0; j < n; ++j) rowi[j] -= f * rowr[j];
                rowi[q] = 0.0;
            }
            double f = d[q];
            if (std::abs(f) > 0.0) {
                for (int j = 0; j < n; ++j) d[j] -= f * rowr[j];
                d[q] = 0.0;
            }
        }
    }
};

} // namespace

LpSolution DenseSimplex::solve(const LpProblem& problem) const {
    problem.validate();
    const int nv = problem.num_vars;
    const int m = static_cast<int>(problem.rows.size());

    Tableau tab;
    tab.m = m;

    // columns: structurals, then one slack per row, artificials appended later
    int n = nv + m;
    tab.lo = problem.lower;
    tab.up = problem.upper;
    tab.cost = problem.cost;
    tab.lo.resize(n);
    tab.up.resize(n);
    tab.cost.resize(n, 0.0);
    for (int i = 0; i < m; ++i) {
        switch (problem.rows[i].sense) {
            case RowSense::LE: tab.lo[nv + i] = 0.0;   tab.up[nv + i] = kInf; break;
            case RowSense::EQ: tab.lo[nv + i] = 0.0;   tab.up[nv + i] = 0.0;  break;
            case RowSense::GE: tab.lo[nv + i] = -kInf; tab.up[nv + i] = 0.0;  break;
        }
    }

    // nonbasic structurals start at a finite bound
    tab.at.assign(n, AtBound::Lower);
    tab.val.assign(n, 0.0);
    for (int j = 0; j < nv; ++j) {
        if (std::isfinite(problem.lower[j])) {
            tab.at[j] = AtBound::Lower;
            tab.val[j] = problem.lower[j];
        } else {
            tab.at[j] = AtBound::Upper;
            tab.val[j] = problem.upper[j];
        }
    }

    // residuals with slacks basic
    std::vector<double> residual(m, 0.0);
    for (int i = 0; i < m; ++i) {
        double r = problem.rows[i].rhs;
        for (auto [j, v] : problem.rows[i].coeffs) r -= v * tab.val[j];
        residual[i] = r;
    }

    // count artificials needed
    int n_art = 0;
    for (int i = 0; i < m; ++i) {
        double s_lo = tab.lo[nv + i], s_up = tab.up[nv + i];
        if (residual[i] > s_up + 1e-12 || residual[i] < s_lo - 1e-12) n_art++;
    }

    const int total = n + n_art;
    tab.n = total;
    tab.lo.resize(total, 0.0);
    tab.up.resize(total, 0.0);
    tab.cost.resize(total, 0.0);
    tab.at.resize(total, AtBound::Lower);
    tab.val.resize(total, 0.0);
    tab.t.assign(static_cast<std::size_t>(m) * total, 0.0);
    tab.basis.assign(m, -1);
    tab.in_basis.assign(total, 0);
    tab.beta.assign(m, 0.0);

    std::vector<double> phase1_cost(total, 0.0);

    int next_art = n;
    for (int i = 0; i < m; ++i) {
        for (auto [j, v] : problem.rows[i].coeffs) tab.T(i, j) += v;
        tab.T(i, nv + i) = 1.0;
        double s_lo = tab.lo[nv + i], s_up = tab.up[nv + i];
        if (residual[i] > s_up + 1e-12) {
            // slack nonbasic at its upper bound, artificial carries the excess
            tab.at[nv + i] = AtBound::Upper;
            tab.val[nv + i] = s_up;
            int a = next_art++;
            tab.T(i, a) = 1.0;
            tab.lo[a] = 0.0;
            tab.up[a] = kInf;
            phase1_cost[a] = 1.0;
            tab.basis[i] = a;
            tab.in_basis[a] = 1;
            tab.beta[i] = residual[i] - s_up;
        } else if (residual[i] < s_lo - 1e-12) {
            tab.at[nv + i] = AtBound::Lower;
            tab.val[nv + i] = s_lo;
            int a = next_art++;
            tab.T(i, a) = -1.0;
            // normalize so the basic (artificial) column carries +1
            for (int j = 0; j < total; ++j) tab.T(i, j) = -tab.T(i, j);
            tab.lo[a] = 0.0;
            tab.up[a] = kInf;
            phase1_cost[a] = 1.0;
            tab.basis[i] = a;
            tab.in_basis[a] = 1;
            tab.beta[i] = s_lo - residual[i];
        } else {
            // slack basic and feasible
            tab.at[nv + i] = AtBound::Lower; // irrelevant while basic
            tab.basis[i] = nv + i;
            tab.in_basis[nv + i] = 1;
            tab.beta[i] = residual[i];
        }
    }

    long max_iter = max_iterations_ > 0
                        ? max_iterations_
                        : 20000L + 60L * static_cast<long>(m + total);

    LpSolution sol;

    if (n_art > 0) {
        LpStatus st = tab.iterate(phase1_cost, max_iter, /*phase_two=*/false);
        if (st == LpStatus::IterationLimit) {
            sol.status = st;
            sol.iterations = tab.iterations;
            return sol;
        }
        double infeas = tab.objective(phase1_cost);
        if (infeas > kEpsFeas) {
            sol.status = LpStatus::Infeasible;
            sol.iterations = tab.iterations;
            sol.objective = infeas;
            return sol;
        }
        // artificials may stay basic at zero but must never move again
        for (int a = n; a < total; ++a) tab.up[a] = 0.0;
    }

    LpStatus st = tab.iterate(tab.cost, max_iter, /*phase_two=*/true);
    sol.status = st;
    sol.iterations = tab.iterations;
    if (st != LpStatus::Optimal) return sol;

    sol.objective = tab.objective(tab.cost);
    sol.x.assign(nv, 0.0);
    for (int j = 0; j < nv; ++j)
        if (!tab.in_basis[j]) sol.x[j] = tab.val[j];
    for (int i = 0; i < m; ++i)
        if (tab.basis[i] < nv) sol.x[tab.basis[i]] = tab.beta[i];
    for (int j = 0; j < nv; ++j)
        sol.x[j] = std::clamp(sol.x[j], problem.lower[j], problem.upper[j]);

    // duals: y_i = -d_{slack_i} at the optimal basis
    sol.row_duals.assign(m, 0.0);
    for (int i = 0; i < m; ++i) sol.row_duals[i] = -tab.d[nv + i];
    return sol;
}

} // namespace statebin
