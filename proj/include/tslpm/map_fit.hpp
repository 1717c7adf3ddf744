#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tslpm/lbfgs.hpp"
#include "tslpm/posterior.hpp"

namespace tslpm {

struct MapOptions {
    LbfgsOptions lbfgs;
    int n_starts = 5;
    std::uint64_t seed = 0;
    /// Standard deviation of the random latent coordinates in the default
    /// initialisation (variance 0.01). Exact zeros are a saddle in Z.
    double init_latent_sd = 0.1;
    int jobs = 1;
    /// Curvature refreshes per start (see fit_map).
    int max_rounds = 200;
    /// Convergence threshold on max |gradient| in whitened coordinates; its
    /// square is about twice the log-posterior gain still available.
    double whitened_tolerance = 1e-3;
};

struct MapFit {
    ParameterSet params;
    FlatParams flat;
    double log_posterior = 0.0;
    int iterations = 0;
    bool converged = false;
    /// max_k |d log posterior / d theta_k| at the returned point.
    double gradient_norm = 0.0;
    std::string message;
    int best_start = 0;
};

/// W with W W^T approximating the inverse of |curvature| at x: absolute
/// eigenvalues of the Jacobi-scaled negative Hessian, floored at
/// `eigen_floor` (the likelihood is flat along rotations of Z, and away from
/// a mode the curvature can be negative).
MatrixXd curvature_whitening(const Posterior& target, const VectorXd& x, double eigen_floor = 1e-12);

/// Default starting point: zeros everywhere except Z ~ N(0, sd^2).
VectorXd default_initialization(const Posterior& target, std::uint64_t seed, double latent_sd = 0.1);

/// Maximises the log posterior by minimising its negative with L-BFGS from
/// `n_starts` starting points and keeps the best. When `init` is given it is
/// used as the first start; otherwise the first start is the linearised
/// estimate. L-BFGS runs in coordinates whitened by the absolute curvature,
/// refreshed every few dozen iterations, until a run converges without
/// moving. A prior-only target uses plain L-BFGS.
MapFit fit_map(const Posterior& target, const std::optional<VectorXd>& init, const MapOptions& options = {});

MapFit fit_map(const CountPanel& panel, const CovariateMatrix& covariates, const ModelConfig& config,
               const std::optional<FlatParams>& init = std::nullopt, const MapOptions& options = {});

}  // namespace tslpm
