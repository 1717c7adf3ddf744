#include "tslpm/map_fit.hpp"

#include <cmath>
#include <Eigen/Eigenvalues>
#include <limits>
#include <vector>

#include "tslpm/error.hpp"
#include "tslpm/parallel.hpp"
#include "tslpm/random.hpp"

namespace tslpm {

VectorXd default_initialization(const Posterior& target, std::uint64_t seed, double latent_sd) {
    VectorXd x = VectorXd::Zero(target.dimension());
    if (const auto* z = target.layout().find("Z")) {
        Rng rng(seed);
        for (Index k = 0; k < z->length; ++k) x(z->offset + k) = rng.normal(0.0, latent_sd);
    }
    return x;
}

MatrixXd curvature_whitening(const Posterior& target, const VectorXd& x, double eigen_floor) {
    // Jacobi scaling first: raw entries span many orders of magnitude.
    const MatrixXd H = target.negative_hessian(x);
    const VectorXd d = H.diagonal().cwiseAbs().cwiseSqrt().cwiseInverse();
    const MatrixXd S = d.asDiagonal() * H * d.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S);
    if (eig.info() != Eigen::Success) throw NumericError("curvature eigendecomposition failed");
    const VectorXd scale = eig.eigenvalues().cwiseAbs().cwiseMax(eigen_floor).cwiseSqrt().cwiseInverse();
    return d.asDiagonal() * eig.eigenvectors() * scale.asDiagonal();
}

namespace {

constexpr int kRoundIterations = 50;  // metric refresh interval

// Counts that differ by orders of magnitude across nodes make the posterior
// badly conditioned in the raw coordinates. Each round runs L-BFGS in
// coordinates u with x = x_r + W u, where W whitens the curvature at x_r,
// so the gradient test is on a Newton-decrement scale.
LbfgsResult minimize_whitened(const Posterior& target, VectorXd x, const LbfgsOptions& options, int max_rounds,
                              double whitened_tolerance) {
    LbfgsResult total;
    int failed_rounds = 0;
    for (int round = 0;; ++round) {
        const MatrixXd W = curvature_whitening(target, x);
        const auto to_x = [&](const VectorXd& u) -> VectorXd { return W * u; };

        const Objective whitened = [&](const VectorXd& u, VectorXd& grad) {
            VectorXd g;
            const double v = target.evaluate(x + to_x(u), &g);
            if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
            grad = -W.transpose() * g;
            return -v;
        };
        LbfgsOptions opt = options;
        opt.gradient_tolerance = whitened_tolerance;
        opt.relative_tolerance = false;
        opt.max_iters = std::min(kRoundIterations, std::max(0, options.max_iters - total.iterations));
        const LbfgsResult r = minimize_lbfgs(whitened, VectorXd::Zero(x.size()), opt);

        x += to_x(r.x);
        total.iterations += r.iterations;
        total.evaluations += r.evaluations;
        total.f = r.f;
        total.message = r.message;
        total.converged = r.converged;
        // Converged before any step: the metric is current, so this is final.
        if (r.converged && r.iterations == 0) break;
        if (!r.converged && r.iterations == 0 && ++failed_rounds >= 2) break;
        if (total.iterations >= options.max_iters || round + 1 >= max_rounds) {
            total.converged = false;
            total.message = "iteration budget exhausted";
            break;
        }
    }
    total.x = std::move(x);
    VectorXd g;
    total.f = -target.evaluate(total.x, &g);
    total.grad = -g;
    return total;
}

}  // namespace

MapFit fit_map(const Posterior& target, const std::optional<VectorXd>& init, const MapOptions& options) {
    if (options.n_starts < 1) throw ConfigError("n_starts must be >= 1");
    if (init && init->size() != target.dimension())
        throw ShapeError("initial point has length " + std::to_string(init->size()) + ", expected " +
                         std::to_string(target.dimension()));

    const Objective negative_log_posterior = [&target](const VectorXd& x, VectorXd& grad) {
        const double v = target.evaluate(x, &grad);
        if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
        grad = -grad;
        return -v;
    };

    const auto n = static_cast<std::size_t>(options.n_starts);
    std::vector<std::optional<LbfgsResult>> results(n);
    std::vector<std::string> errors(n);
    parallel_for(n, options.jobs, [&](std::size_t k) {
        VectorXd x0;
        if (k == 0 && init) {
            x0 = *init;
        } else {
            x0 = default_initialization(target, derive_seed(options.seed, k), options.init_latent_sd);
            // Without a user start, start 0 comes from a linearised fit.
            if (k == 0 && target.has_data()) x0 = target.linearised_estimate(x0);
        }
        try {
            results[k] = target.has_data() ? minimize_whitened(target, x0, options.lbfgs, options.max_rounds,
                                                                   options.whitened_tolerance)
                                           : minimize_lbfgs(negative_log_posterior, x0, options.lbfgs);
        } catch (const NumericError& e) {
            errors[k] = e.what();
        }
    });

    std::size_t best = n;
    for (std::size_t k = 0; k < n; ++k)
        if (results[k] && (best == n || results[k]->f < results[best]->f)) best = k;
    if (best == n) throw NumericError("every MAP start failed: " + errors[0]);

    const LbfgsResult& r = *results[best];
    MapFit fit;
    fit.flat = FlatParams{r.x, target.layout()};
    fit.params = unpack(fit.flat, target.config());
    fit.log_posterior = -r.f;
    fit.iterations = r.iterations;
    fit.converged = r.converged;
    fit.gradient_norm = r.grad.size() ? r.grad.cwiseAbs().maxCoeff() : 0.0;
    fit.message = r.message;
    fit.best_start = static_cast<int>(best);
    return fit;
}

MapFit fit_map(const CountPanel& panel, const CovariateMatrix& covariates, const ModelConfig& config,
               const std::optional<FlatParams>& init, const MapOptions& options) {
    const Posterior target(config, panel, covariates);
    std::optional<VectorXd> x0;
    if (init) {
        if (!(init->layout == target.layout())) throw ConfigError("initial point layout does not match config");
        x0 = init->values;
    }
    return fit_map(target, x0, options);
}

}  // namespace tslpm
