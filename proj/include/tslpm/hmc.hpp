#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tslpm/posterior.hpp"

namespace tslpm {

/// Posterior draws from one HMC run, after burn-in and thinning.
struct Chain {
    ModelConfig config;
    FlatLayout layout;
    std::vector<VectorXd> samples;
    std::vector<double> log_posteriors;
    double accept_rate = 0.0;  // accepted / post-burn-in proposals
    double step_size = 0.0;
    int n_leapfrog = 0;
    std::uint64_t seed = 0;
    bool aligned = false;
    int divergences = 0;       // over the whole run, warm-up included
    int warmup_divergences = 0;
    std::string metric = "identity";  // or "laplace"

    std::size_t size() const { return samples.size(); }
    /// Draws of coordinate k.
    VectorXd coordinate(Index k) const;
};

struct LeapfrogState {
    VectorXd position;
    VectorXd momentum;
    double log_density = 0.0;  // at `position`
    VectorXd grad;             // at `position`
    bool divergent = false;    // a non-finite density/gradient was hit
};

/// n_steps leapfrog steps for H(q, m) = -log p(q) + m.m/2 (identity mass):
/// half momentum step, full position step, half momentum step.
LeapfrogState leapfrog(const LogDensity& target, const VectorXd& position, const VectorXd& momentum, double step,
                       int n_steps);

/// Same, reusing a known density value and gradient at `position`.
LeapfrogState leapfrog(const LogDensity& target, LeapfrogState start, double step, int n_steps);

/// Nesterov dual averaging of log step size toward a target acceptance
/// statistic (gamma = 0.05, t0 = 10, kappa = 0.75, mu = log(10 * eps0)).
class DualAveraging {
public:
    explicit DualAveraging(double initial_step, double target_accept = 0.8, double gamma = 0.05, double t0 = 10.0,
                           double kappa = 0.75);

    /// Feeds one acceptance statistic and returns the next step size.
    double update(double accept_stat);
    double step() const { return std::exp(log_step_); }
    /// Iterate-averaged step, used once warm-up ends.
    double adapted_step() const { return std::exp(log_step_bar_); }

private:
    double target_, gamma_, t0_, kappa_, mu_;
    double h_bar_ = 0.0;
    double log_step_;
    double log_step_bar_ = 0.0;
    int m_ = 0;
};

/// Affine reparametrisation q = center + transform * u. Identity-mass HMC
/// on u is HMC on q with mass matrix (transform transform^T)^{-1}.
struct AffineMetric {
    VectorXd center;
    MatrixXd transform;
};

struct HmcOptions {
    int iters = 10000;  // total, burn-in included
    int burnin = 5000;
    int thin = 5;
    double target_accept = 0.8;
    std::uint64_t seed = 0;
    std::optional<VectorXd> init;
    int n_leapfrog = 20;
    double leapfrog_jitter = 0.2;  // L drawn uniformly in L*(1 +- jitter)
    /// Starting step size; <= 0 selects one with the doubling heuristic.
    double initial_step = 0.0;
    bool adapt = true;
    double divergence_threshold = 1000.0;  // |Delta H| above this is divergent
    /// Dense mass matrix; identity when empty.
    std::optional<AffineMetric> metric;
};

/// Metric from a Laplace approximation: centred at the MAP, with the mass
/// matrix equal to the absolute curvature there (see curvature_whitening).
AffineMetric laplace_metric(const Posterior& target, std::uint64_t seed, int jobs = 1);
/// Same, at a mode that is already known.
AffineMetric laplace_metric(const Posterior& target, const VectorXd& mode);

/// Step size at which one leapfrog step has acceptance probability near 1/2.
double find_reasonable_step(const LogDensity& target, const VectorXd& position, std::uint64_t seed);

/// Fixed-length HMC with Metropolis correction; step size adapted by dual
/// averaging during burn-in and frozen afterwards. Without `init`, the
/// Posterior overloads start from default_initialization, or with a metric
/// from one draw of the Laplace approximation shrunk 10-fold toward its
/// centre.
Chain hmc_sample(const LogDensity& target, const ModelConfig& config, const FlatLayout& layout,
                 const HmcOptions& options);
Chain hmc_sample(const Posterior& target, const HmcOptions& options);

/// Independent chains, seeds derived from options.seed.
std::vector<Chain> hmc_sample_chains(const Posterior& target, const HmcOptions& options, int n_chains, int jobs = 1);

struct ChainDiagnostics {
    std::vector<std::string> names;
    VectorXd rhat;  // NaN where undefined (constant draws)
    VectorXd ess;
    std::vector<bool> rhat_defined;
    int divergence_count = 0;
};

/// Split-Rhat and autocorrelation ESS (Geyer initial positive sequence) per
/// coordinate. A single chain is split in halves.
ChainDiagnostics diagnostics(const std::vector<Chain>& chains);

/// Lower-level versions on raw draws: chains[c][s] for one coordinate.
double split_rhat(const std::vector<VectorXd>& chains);
double effective_sample_size(const std::vector<VectorXd>& chains);

}  // namespace tslpm
