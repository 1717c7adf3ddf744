#include "tslpm/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

#include "tslpm/error.hpp"

namespace tslpm {

namespace {

struct Point {
    double step = 0.0;
    double f = 0.0;
    double slope = 0.0;  // d/dstep f(x + step p)
    VectorXd x;
    VectorXd grad;
};

// Minimiser of the cubic matching f and f' at both ends, or the midpoint
// when the fit is degenerate. Kept inside the inner 80% of the bracket.
double cubic_step(const Point& lo, const Point& hi) {
    const double a = lo.step, b = hi.step;
    const double mid = 0.5 * (a + b);
    if (!std::isfinite(hi.f) || !std::isfinite(hi.slope)) return mid;
    const double d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    const double disc = d1 * d1 - lo.slope * hi.slope;
    if (disc < 0.0) return mid;
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = hi.slope - lo.slope + 2.0 * d2;
    if (denom == 0.0) return mid;
    double t = b - (b - a) * (hi.slope + d2 - d1) / denom;
    const double lo_edge = std::min(a, b) + 0.1 * std::abs(b - a);
    const double hi_edge = std::max(a, b) - 0.1 * std::abs(b - a);
    if (!std::isfinite(t)) return mid;
    return std::clamp(t, lo_edge, hi_edge);
}

class LineSearch {
public:
    LineSearch(const Objective& obj, const VectorXd& x, const VectorXd& p, double f0, double slope0,
               const LbfgsOptions& opt, int& evals)
        : obj_(obj), x_(x), p_(p), f0_(f0), slope0_(slope0), opt_(opt), evals_(evals) {}

    std::optional<Point> run(double initial_step) {
        Point prev{0.0, f0_, slope0_, x_, {}};
        double step = initial_step;
        bool first = true;
        while (budget_left()) {
            Point cur = probe(step);
            if (!std::isfinite(cur.f)) {  // outside the domain: shrink toward the last good point
                step = prev.step + 0.25 * (step - prev.step);
                if (step - prev.step < 1e-20) return std::nullopt;
                continue;
            }
            if (cur.f > f0_ + opt_.c1 * step * slope0_ || (!first && cur.f >= prev.f)) return zoom(prev, cur);
            if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
            if (cur.slope >= 0.0) return zoom(cur, prev);
            prev = std::move(cur);
            step *= 2.0;
            first = false;
        }
        return std::nullopt;
    }

private:
    bool budget_left() const { return used_ < opt_.max_line_search_evals; }

    Point probe(double step) {
        Point pt;
        pt.step = step;
        pt.x = x_ + step * p_;
        pt.f = obj_(pt.x, pt.grad);
        ++evals_;
        ++used_;
        pt.slope = std::isfinite(pt.f) ? pt.grad.dot(p_) : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(pt.f)) pt.f = std::numeric_limits<double>::infinity();
        return pt;
    }

    std::optional<Point> zoom(Point lo, Point hi) {
        while (budget_left()) {
            if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, std::abs(lo.step))) break;
            Point cur = probe(cubic_step(lo, hi));
            if (!std::isfinite(cur.f) || cur.f > f0_ + opt_.c1 * cur.step * slope0_ || cur.f >= lo.f) {
                hi = std::move(cur);
                continue;
            }
            if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
            if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
            lo = std::move(cur);
        }
        // Accept the best sufficient-decrease point found, if any.
        if (lo.step > 0.0 && lo.f <= f0_ + opt_.c1 * lo.step * slope0_) return lo;
        return std::nullopt;
    }

    const Objective& obj_;
    const VectorXd& x_;
    const VectorXd& p_;
    double f0_, slope0_;
    const LbfgsOptions& opt_;
    int& evals_;
    int used_ = 0;
};

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, VectorXd x0, const LbfgsOptions& opt) {
    if (opt.memory < 1) throw ConfigError("L-BFGS memory must be >= 1");
    LbfgsResult res;
    res.x = std::move(x0);
    res.f = objective(res.x, res.grad);
    res.evaluations = 1;
    if (!std::isfinite(res.f)) throw NumericError("objective is not finite at the initial point");
    res.f_history.push_back(res.f);

    std::deque<VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    const auto converged = [&] {
        const double scale = opt.relative_tolerance ? std::max(1.0, std::abs(res.f)) : 1.0;
        return res.grad.cwiseAbs().maxCoeff() <= opt.gradient_tolerance * scale;
    };

    while (true) {
        if (res.grad.size() == 0 || converged()) {
            res.converged = true;
            res.message = "gradient tolerance reached";
            return res;
        }
        if (res.iterations >= opt.max_iters) {
            res.message = "maximum iterations reached";
            return res;
        }

        // Two-loop recursion.
        VectorXd q = res.grad;
        std::vector<double> alpha(s_hist.size());
        for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
            alpha[k] = rho_hist[k] * s_hist[k].dot(q);
            q -= alpha[k] * y_hist[k];
        }
        if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = rho_hist[k] * y_hist[k].dot(q);
            q += (alpha[k] - beta) * s_hist[k];
        }
        VectorXd p = -q;
        double slope = res.grad.dot(p);
        if (!(slope < 0.0)) {  // lost descent: fall back to steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            p = -res.grad;
            slope = res.grad.dot(p);
        }
        const double initial_step =
            s_hist.empty() ? std::min(1.0, 1.0 / res.grad.cwiseAbs().maxCoeff()) : 1.0;

        LineSearch search(objective, res.x, p, res.f, slope, opt, res.evaluations);
        auto accepted = search.run(initial_step);
        if (!accepted) {
            if (!s_hist.empty()) {  // retry once from steepest descent
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            res.message = "line search failed to find a strong-Wolfe step";
            return res;
        }

        VectorXd s = accepted->x - res.x;
        VectorXd y = accepted->grad - res.grad;
        const double sy = s.dot(y);
        res.directional_derivatives.push_back(slope);
        res.x = std::move(accepted->x);
        res.f = accepted->f;
        res.grad = std::move(accepted->grad);
        res.f_history.push_back(res.f);
        ++res.iterations;
        if (sy > 1e-12 * std::max(1.0, s.norm() * y.norm())) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
    }
}

}  // namespace tslpm
