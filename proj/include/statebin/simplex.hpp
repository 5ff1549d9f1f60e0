#pragma once

// Dense bounded-variable primal simplex. Adequate for the desk-scale LPs the
// planner produces (hundreds of rows); anything larger should go through the
// LpSolver interface to an external solver.

#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "statebin/types.hpp"

namespace statebin {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense : char { LE = '<', EQ = '=', GE = '>' };

struct LpRow {
    std::vector<std::pair<int, double>> coeffs;
    RowSense sense = RowSense::LE;
    double rhs = 0.0;
};

// minimize c'x  s.t.  Ax {<=,=,>=} b,  lower <= x <= upper
struct LpProblem {
    int num_vars = 0;
    std::vector<double> cost;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<LpRow> rows;

    int add_variable(double c, double lo, double up);
    void add_row(RowSense sense, double rhs, std::vector<std::pair<int, double>> coeffs);
    void validate() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
    LpStatus status = LpStatus::Optimal;
    double objective = 0.0;
    std::vector<double> x;
    // dual value per row: d(objective)/d(rhs_i) at the optimum
    std::vector<double> row_duals;
    long iterations = 0;

    bool optimal() const { return status == LpStatus::Optimal; }
};

class LpSolver {
public:
    virtual ~LpSolver() = default;
    virtual LpSolution solve(const LpProblem& problem) const = 0;
};

class DenseSimplex : public LpSolver {
public:
    explicit DenseSimplex(long max_iterations = 0) : max_iterations_(max_iterations) {}
    LpSolution solve(const LpProblem& problem) const override;

private:
    long max_iterations_; // 0: derive from problem size
};

} // namespace statebin
