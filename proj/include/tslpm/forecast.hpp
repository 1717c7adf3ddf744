#pragma once

#include <cstdint>
#include <vector>

#include "tslpm/hmc.hpp"
#include "tslpm/map_fit.hpp"

namespace tslpm {

/// Poisson quantile, rounded outwards (down below the median, up above).
/// Exact up to lambda = 1e9, Cornish-Fisher beyond.
double poisson_quantile(double lambda, double p);

enum class ForecastMode { one_step, multi_step };
std::string_view to_string(ForecastMode m);

struct ForecastResult {
    MatrixXd point;  // N x H conditional-mean forecasts
    MatrixXd lower;  // N x H predictive quantiles
    MatrixXd upper;
    ForecastMode mode = ForecastMode::one_step;
    int draws_used = 0;
    double level = 0.95;
};

struct ForecastOptions {
    int draws = 1000;  // Monte Carlo trajectories / predictive draws
    std::uint64_t seed = 0;
    double level = 0.95;
    /// Multi-step only: propagate log(lambda + 1) deterministically instead of
    /// simulating trajectories. Faster, but biased for the Poisson recursion.
    bool plug_in = false;
};

/// h-step forecasts for h = 1..H past the end of `history`, each made from
/// observed data only. `future` holds the observations that follow the
/// history (at least H-1 columns). With a single parameter set, point = lambda
/// and the band is the exact Poisson quantile interval.
ForecastResult forecast_one_step(const ParameterSet& params, const ModelConfig& config, const CountPanel& history,
                                 const CovariateMatrix& covariates, Index horizon, const CountMatrix& future,
                                 const ForecastOptions& options = {});
/// Chain version: point = posterior mean of lambda, band from one Poisson
/// draw per posterior sample.
ForecastResult forecast_one_step(const Chain& chain, const CountPanel& history, const CovariateMatrix& covariates,
                                 Index horizon, const CountMatrix& future, const ForecastOptions& options = {});

/// Simulates `draws` trajectories of length H from the end of `history`;
/// point = trajectory mean, band = empirical quantiles.
ForecastResult forecast_multi_step(const ParameterSet& params, const ModelConfig& config, const CountPanel& history,
                                   const CovariateMatrix& covariates, Index horizon,
                                   const ForecastOptions& options = {});
/// Chain version: trajectory d uses posterior draw d mod S.
ForecastResult forecast_multi_step(const Chain& chain, const CountPanel& history, const CovariateMatrix& covariates,
                                   Index horizon, const ForecastOptions& options = {});

enum class RmseScope { per_node_per_h, per_h, total };

/// sqrt(mean squared error): N x H for per_node_per_h, 1 x H for per_h
/// (pooled over nodes), 1 x 1 for total.
MatrixXd rmse(const MatrixXd& pred, const MatrixXd& actual, RmseScope scope);

/// Per-node fraction of in-sample observations y_it (t >= t0) that fall inside
/// the central `level` band of one-step posterior predictive draws.
VectorXd posterior_predictive_coverage(const Chain& chain, const CountPanel& panel, const CovariateMatrix& covariates,
                                       double level = 0.95, std::uint64_t seed = 0);

/// |zhat_i - zhat_j| / |z_i - z_j| for all i < j (row-major pair order).
VectorXd distance_ratio_distribution(const MatrixXd& Z_hat, const MatrixXd& Z_true);

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

struct ForecastStudyOptions {
    double split = 0.8;  // fraction of time points used for training
    Index horizon = 5;
    Index origin_stride = 1;
    ForecastOptions forecast;
    MapOptions map;
};

struct ForecastStudy {
    MapFit fit;
    Index train_length = 0;
    Index n_origins = 0;
    VectorXd one_step_rmse;    // per h, pooled over nodes and origins
    VectorXd multi_step_rmse;
    MatrixXd one_step_rmse_by_node;  // N x H
    MatrixXd multi_step_rmse_by_node;
};

/// Fits the MAP on the first `split` share of the panel, then forecasts from
/// every origin in the test period (stride `origin_stride`) with both
/// algorithms and scores them against the held-out data.
ForecastStudy evaluate_forecasts(const CountPanel& panel, const CovariateMatrix& covariates, const ModelConfig& config,
                                 const ForecastStudyOptions& options = {});

}  // namespace tslpm
