#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tslpm/types.hpp"

namespace tslpm {

/// Objective for minimisation: returns f(x) and writes grad f(x). May return
/// +infinity for points outside the domain; the line search backs off.
using Objective = std::function<double(const VectorXd& x, VectorXd& grad)>;

struct LbfgsOptions {
    int memory = 10;
    int max_iters = 2000;
    /// Converged when max|g| <= gradient_tolerance * max(1, |f|), or
    /// max|g| <= gradient_tolerance when relative_tolerance is false.
    double gradient_tolerance = 1e-6;
    bool relative_tolerance = true;
    double c1 = 1e-4;  // sufficient decrease
    double c2 = 0.9;   // curvature (strong Wolfe)
    int max_line_search_evals = 60;
};

struct LbfgsResult {
    VectorXd x;
    double f = 0.0;
    VectorXd grad;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
    /// Objective after each accepted step, starting with f(x0).
    std::vector<double> f_history;
    /// g.p at the start of each accepted iteration (negative for descent).
    std::vector<double> directional_derivatives;
};

/// Limited-memory BFGS with the two-loop recursion for the search direction
/// and a strong-Wolfe line search (bracketing + cubic-interpolation zoom).
LbfgsResult minimize_lbfgs(const Objective& objective, VectorXd x0, const LbfgsOptions& options = {});

}  // namespace tslpm
