#include "tslpm/forecast.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <cmath>
#include <cstdio>

#include "tslpm/error.hpp"
#include "tslpm/random.hpp"
#include "tslpm/stability.hpp"

namespace tslpm {

std::string_view to_string(ForecastMode m) { return m == ForecastMode::one_step ? "one_step" : "multi_step"; }

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw ConfigError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

constexpr double kExactQuantileLimit = 1e9;

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("interval level must lie in (0, 1)");
}


// Observed log1p history followed by the first `extra` future columns.
MatrixXd observed_history(const CountPanel& history, const CountMatrix& future, Index extra) {
    MatrixXd full(history.n_nodes(), history.n_times() + extra);
    full.leftCols(history.n_times()) = history.log1p_counts();
    if (extra > 0) full.rightCols(extra) = future.leftCols(extra).cast<double>().array().log1p().matrix();
    return full;
}

void check_one_step_inputs(const ModelConfig& config, const CountPanel& history, Index horizon,
                           const CountMatrix& future) {
    if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");
    if (history.n_times() < config.seasonal_lag)
        throw IndexError("history shorter than the seasonal lag");
    if (future.cols() < horizon - 1) {
        const Index missing_h = future.cols() + 2;
        throw IndexError("one-step forecast at h=" + std::to_string(missing_h) +
                         " needs the observation at h=" + std::to_string(missing_h - 1) +
                         "; only " + std::to_string(future.cols()) + " future columns supplied");
    }
    if (horizon > 1 && future.rows() != history.n_nodes())
        throw ShapeError("future observations have the wrong number of nodes");
}

// N x H one-step intensities from observed data.
MatrixXd one_step_intensities(const IntensityModel& model, const MatrixXd& full, Index t_hist, Index horizon,
                              int lag) {
    MatrixXd lam(model.n_nodes(), horizon);
    const VectorXd empty;
    for (Index h = 0; h < horizon; ++h) {
        const Index c = t_hist + h;  // predicted column
        const VectorXd seasonal = lag > 0 ? VectorXd(full.col(c - lag)) : empty;
        lam.col(h) = model.log_intensity(full.col(c - 1), seasonal).array().exp();
    }
    if (!lam.allFinite()) throw NumericError("forecast intensity overflow");
    return lam;
}

// Per-cell empirical band and mean of draws stored as rows of `draws`.
void summarise_draws(const MatrixXd& draws, Index n, Index horizon, double level, ForecastResult& out,
                     bool set_point) {
    out.lower.resize(n, horizon);
    out.upper.resize(n, horizon);
    if (set_point) out.point.resize(n, horizon);
    const double tail = 0.5 * (1.0 - level);
    std::vector<double> cell(static_cast<std::size_t>(draws.rows()));
    for (Index h = 0; h < horizon; ++h)
        for (Index i = 0; i < n; ++i) {
            const Index col = h * n + i;
            for (Index d = 0; d < draws.rows(); ++d) cell[static_cast<std::size_t>(d)] = draws(d, col);
            if (set_point) out.point(i, h) = draws.col(col).mean();
            out.lower(i, h) = quantile(cell, tail);
            out.upper(i, h) = quantile(cell, 1.0 - tail);
        }
}

std::vector<IntensityModel> chain_models(const Chain& chain, const CovariateMatrix& covariates) {
    if (chain.samples.empty()) throw ConfigError("empty chain");
    std::vector<IntensityModel> models;
    models.reserve(chain.samples.size());
    for (const auto& draw : chain.samples)
        models.emplace_back(unpack(draw, chain.layout, chain.config), chain.config, covariates);
    return models;
}

// One simulated trajectory; writes y into row `row` of `draws` (column h*N+i).
void simulate_trajectory(const IntensityModel& model, const MatrixXd& window, Index horizon, Rng& rng,
                         MatrixXd& draws, Index row) {
    const Index n = model.n_nodes();
    const int lag = model.seasonal_lag();
    const Index w = window.cols();
    MatrixXd ext(n, w + horizon);
    ext.leftCols(w) = window;
    const VectorXd empty;
    for (Index h = 0; h < horizon; ++h) {
        const Index c = w + h;
        const VectorXd seasonal = lag > 0 ? VectorXd(ext.col(c - lag)) : empty;
        const VectorXd lam = model.log_intensity(ext.col(c - 1), seasonal).array().exp();
        for (Index i = 0; i < n; ++i) {
            if (!std::isfinite(lam(i)) || lam(i) > 1e15)
                throw NumericError("trajectory intensity overflow at node " + std::to_string(i) + ", h=" +
                                   std::to_string(h + 1));
            const auto y = rng.poisson(lam(i));
            draws(row, h * n + i) = static_cast<double>(y);
            ext(i, c) = std::log1p(static_cast<double>(y));
        }
    }
}

MatrixXd history_window(const CountPanel& history, int lag) {
    const Index w = std::max<Index>(1, lag);
    if (history.n_times() < w) throw IndexError("history shorter than the seasonal lag");
    return history.log1p_counts().rightCols(w);
}

// Once per process: posterior forecasts would otherwise repeat it per draw.
void warn_if_unstable(const IntensityModel& model) {
    static std::atomic<bool> warned{false};
    if (spectral_radius(model.interaction()) >= 1.0 && !warned.exchange(true))
        std::fprintf(stderr, "warning: forecasting from a non-stationary interaction matrix\n");
}

}  // namespace

double poisson_quantile(double lambda, double p) {
    if (lambda <= 0.0) return 0.0;
    if (lambda <= kExactQuantileLimit)
        return boost::math::quantile(boost::math::poisson_distribution<double>(lambda), p);
    // Cornish-Fisher with continuity correction; its error is O(lambda^-1/2)
    // counts, and the series-based exact quantile stops converging near 1e11.
    // Rounded outwards like the exact branch.
    const double z = boost::math::quantile(boost::math::normal_distribution<double>(), p);
    const double q = lambda + z * std::sqrt(lambda) + (z * z - 1.0) / 6.0 - 0.5;
    return p < 0.5 ? std::floor(q) : std::ceil(q);
}

ForecastResult forecast_one_step(const ParameterSet& params, const ModelConfig& config, const CountPanel& history,
                                 const CovariateMatrix& covariates, Index horizon, const CountMatrix& future,
                                 const ForecastOptions& options) {
    check_level(options.level);
    check_one_step_inputs(config, history, horizon, future);
    const IntensityModel model(params, config, covariates);
    if (model.n_nodes() != history.n_nodes()) throw ShapeError("parameters and history disagree on N");
    const MatrixXd full = observed_history(history, future, horizon - 1);

    ForecastResult out;
    out.mode = ForecastMode::one_step;
    out.level = options.level;
    out.point = one_step_intensities(model, full, history.n_times(), horizon, config.seasonal_lag);
    out.lower.resize(out.point.rows(), horizon);
    out.upper.resize(out.point.rows(), horizon);
    const double tail = 0.5 * (1.0 - options.level);
    for (Index h = 0; h < horizon; ++h)
        for (Index i = 0; i < out.point.rows(); ++i) {
            out.lower(i, h) = poisson_quantile(out.point(i, h), tail);
            out.upper(i, h) = poisson_quantile(out.point(i, h), 1.0 - tail);
        }
    return out;
}

ForecastResult forecast_one_step(const Chain& chain, const CountPanel& history, const CovariateMatrix& covariates,
                                 Index horizon, const CountMatrix& future, const ForecastOptions& options) {
    check_level(options.level);
    check_one_step_inputs(chain.config, history, horizon, future);
    const auto models = chain_models(chain, covariates);
    const Index n = history.n_nodes();
    if (models.front().n_nodes() != n) throw ShapeError("chain and history disagree on N");
    const MatrixXd full = observed_history(history, future, horizon - 1);

    Rng rng(options.seed);
    ForecastResult out;
    out.mode = ForecastMode::one_step;
    out.level = options.level;
    out.point = MatrixXd::Zero(n, horizon);
    MatrixXd draws(static_cast<Index>(models.size()), n * horizon);
    for (std::size_t s = 0; s < models.size(); ++s) {
        const MatrixXd lam =
            one_step_intensities(models[s], full, history.n_times(), horizon, chain.config.seasonal_lag);
        out.point += lam;
        for (Index h = 0; h < horizon; ++h)
            for (Index i = 0; i < n; ++i)
                draws(static_cast<Index>(s), h * n + i) = static_cast<double>(rng.poisson(lam(i, h)));
    }
    out.point /= static_cast<double>(models.size());
    summarise_draws(draws, n, horizon, options.level, out, false);
    out.draws_used = static_cast<int>(models.size());
    return out;
}

ForecastResult forecast_multi_step(const ParameterSet& params, const ModelConfig& config, const CountPanel& history,
                                   const CovariateMatrix& covariates, Index horizon, const ForecastOptions& options) {
    check_level(options.level);
    if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");
    const IntensityModel model(params, config, covariates);
    const Index n = history.n_nodes();
    if (model.n_nodes() != n) throw ShapeError("parameters and history disagree on N");
    warn_if_unstable(model);
    const MatrixXd window = history_window(history, config.seasonal_lag);

    ForecastResult out;
    out.mode = ForecastMode::multi_step;
    out.level = options.level;
    if (options.plug_in) {
        const Index w = window.cols();
        MatrixXd ext(n, w + horizon);
        ext.leftCols(w) = window;
        out.point.resize(n, horizon);
        const VectorXd empty;
        for (Index h = 0; h < horizon; ++h) {
            const Index c = w + h;
            const VectorXd seasonal = config.seasonal_lag > 0 ? VectorXd(ext.col(c - config.seasonal_lag)) : empty;
            const VectorXd lam = model.log_intensity(ext.col(c - 1), seasonal).array().exp();
            if (!lam.allFinite()) throw NumericError("plug-in forecast overflow at h=" + std::to_string(h + 1));
            out.point.col(h) = lam;
            ext.col(c) = lam.array().log1p();
        }
        const double tail = 0.5 * (1.0 - options.level);
        out.lower = out.point.unaryExpr([&](double l) { return poisson_quantile(l, tail); });
        out.upper = out.point.unaryExpr([&](double l) { return poisson_quantile(l, 1.0 - tail); });
        return out;
    }

    if (options.draws < 1) throw ConfigError("multi-step forecasting needs draws >= 1");
    Rng rng(options.seed);
    MatrixXd draws(options.draws, n * horizon);
    for (int d = 0; d < options.draws; ++d) simulate_trajectory(model, window, horizon, rng, draws, d);
    summarise_draws(draws, n, horizon, options.level, out, true);
    out.draws_used = options.draws;
    return out;
}

ForecastResult forecast_multi_step(const Chain& chain, const CountPanel& history, const CovariateMatrix& covariates,
                                   Index horizon, const ForecastOptions& options) {
    check_level(options.level);
    if (horizon < 1) throw ConfigError("forecast horizon must be >= 1");
    if (options.draws < 1) throw ConfigError("multi-step forecasting needs draws >= 1");
    const auto models = chain_models(chain, covariates);
    const Index n = history.n_nodes();
    if (models.front().n_nodes() != n) throw ShapeError("chain and history disagree on N");
    const MatrixXd window = history_window(history, chain.config.seasonal_lag);

    Rng rng(options.seed);
    MatrixXd draws(options.draws, n * horizon);
    for (int d = 0; d < options.draws; ++d)
        simulate_trajectory(models[static_cast<std::size_t>(d) % models.size()], window, horizon, rng, draws, d);
    ForecastResult out;
    out.mode = ForecastMode::multi_step;
    out.level = options.level;
    summarise_draws(draws, n, horizon, options.level, out, true);
    out.draws_used = options.draws;
    return out;
}

MatrixXd rmse(const MatrixXd& pred, const MatrixXd& actual, RmseScope scope) {
    if (pred.rows() != actual.rows() || pred.cols() != actual.cols())
        throw ShapeError("prediction and actual shapes differ");
    if (pred.size() == 0) throw ShapeError("rmse of an empty matrix");
    const MatrixXd sq = (pred - actual).array().square().matrix();
    switch (scope) {
        case RmseScope::per_node_per_h: return sq.cwiseSqrt();
        case RmseScope::per_h: return (sq.colwise().mean()).cwiseSqrt();
        case RmseScope::total: return MatrixXd::Constant(1, 1, std::sqrt(sq.mean()));
    }
    return {};
}

VectorXd posterior_predictive_coverage(const Chain& chain, const CountPanel& panel, const CovariateMatrix& covariates,
                                       double level, std::uint64_t seed) {
    check_level(level);
    const auto models = chain_models(chain, covariates);
    const Index n = panel.n_nodes();
    if (models.front().n_nodes() != n) throw ShapeError("chain and panel disagree on N");
    const Index t0 = chain.config.first_modeled_index();
    const Index m = panel.n_times() - t0;
    if (m < 1) throw DataError("panel has no modeled time points");
    const MatrixXd h = panel.log1p_counts();

    std::vector<MatrixXd> rates;
    rates.reserve(models.size());
    for (const auto& model : models) {
        rates.push_back(model.log_intensity_path(h, t0).array().exp().matrix());
        if (!rates.back().allFinite()) throw NumericError("intensity overflow in predictive check");
    }

    Rng rng(seed);
    const double tail = 0.5 * (1.0 - level);
    std::vector<double> cell(models.size());
    VectorXd covered = VectorXd::Zero(n);
    for (Index t = 0; t < m; ++t)
        for (Index i = 0; i < n; ++i) {
            for (std::size_t s = 0; s < rates.size(); ++s) cell[s] = static_cast<double>(rng.poisson(rates[s](i, t)));
            const double y = static_cast<double>(panel(i, t + t0));
            if (quantile(cell, tail) <= y && y <= quantile(cell, 1.0 - tail)) covered(i) += 1.0;
        }
    return covered / static_cast<double>(m);
}

VectorXd distance_ratio_distribution(const MatrixXd& Z_hat, const MatrixXd& Z_true) {
    if (Z_hat.rows() != Z_true.rows() || Z_hat.cols() != Z_true.cols())
        throw ShapeError("estimated and true positions have different shapes");
    const Index n = Z_true.rows();
    if (n < 2) throw ShapeError("distance ratios need at least two nodes");
    VectorXd out(n * (n - 1) / 2);
    Index k = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            const double denom = (Z_true.row(i) - Z_true.row(j)).norm();
            if (denom == 0.0)
                throw DataError("true positions of nodes " + std::to_string(i) + " and " + std::to_string(j) +
                                " coincide");
            out(k++) = (Z_hat.row(i) - Z_hat.row(j)).norm() / denom;
        }
    return out;
}

ForecastStudy evaluate_forecasts(const CountPanel& panel, const CovariateMatrix& covariates, const ModelConfig& config,
                                 const ForecastStudyOptions& options) {
    if (!(options.split > 0.0 && options.split < 1.0)) throw ConfigError("split must lie in (0, 1)");
    if (options.horizon < 1 || options.origin_stride < 1) throw ConfigError("horizon and stride must be >= 1");
    const Index T = panel.n_times();
    const Index n = panel.n_nodes();
    const auto train_len = static_cast<Index>(std::floor(options.split * static_cast<double>(T)));
    if (train_len < config.first_modeled_index() + 1) throw DataError("training split too short");
    if (T - train_len < options.horizon) throw DataError("test split shorter than the forecast horizon");

    ForecastStudy study;
    study.train_length = train_len;
    study.fit = fit_map(panel.slice(0, train_len), covariates, config, std::nullopt, options.map);

    MatrixXd sq_one = MatrixXd::Zero(n, options.horizon);
    MatrixXd sq_multi = MatrixXd::Zero(n, options.horizon);
    for (Index origin = train_len; origin + options.horizon <= T; origin += options.origin_stride) {
        const CountPanel history = panel.slice(0, origin);
        const MatrixXd actual = panel.counts().middleCols(origin, options.horizon).cast<double>();
        const CountMatrix future = panel.counts().middleCols(origin, options.horizon);
        ForecastOptions fo = options.forecast;
        fo.seed = derive_seed(options.forecast.seed, static_cast<std::uint64_t>(origin));
        const auto one = forecast_one_step(study.fit.params, config, history, covariates, options.horizon, future, fo);
        const auto multi = forecast_multi_step(study.fit.params, config, history, covariates, options.horizon, fo);
        sq_one += (one.point - actual).array().square().matrix();
        sq_multi += (multi.point - actual).array().square().matrix();
        ++study.n_origins;
    }
    const double k = static_cast<double>(study.n_origins);
    study.one_step_rmse_by_node = (sq_one / k).cwiseSqrt();
    study.multi_step_rmse_by_node = (sq_multi / k).cwiseSqrt();
    study.one_step_rmse = (sq_one.colwise().sum() / (k * static_cast<double>(n))).cwiseSqrt().transpose();
    study.multi_step_rmse = (sq_multi.colwise().sum() / (k * static_cast<double>(n))).cwiseSqrt().transpose();
    return study;
}

}  // namespace tslpm
