#include "tslpm/model.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "tslpm/error.hpp"

namespace tslpm {

// ---------------------------------------------------------------------------
// enum <-> string

std::string_view to_string(SharingMode m) { return m == SharingMode::shared ? "shared" : "per_node"; }

std::string_view to_string(SeasonalMode m) {
    switch (m) {
        case SeasonalMode::none: return "none";
        case SeasonalMode::shared: return "shared";
        case SeasonalMode::per_node: return "per_node";
    }
    return "none";
}

std::string_view to_string(InteractionMode m) {
    return m == InteractionMode::latent_projection ? "latent_projection" : "full_matrix";
}

SharingMode sharing_mode_from_string(std::string_view s) {
    if (s == "shared") return SharingMode::shared;
    if (s == "per_node") return SharingMode::per_node;
    throw ConfigError("unknown sharing mode '" + std::string(s) + "' (expected shared|per_node)");
}

SeasonalMode seasonal_mode_from_string(std::string_view s) {
    if (s == "none") return SeasonalMode::none;
    if (s == "shared") return SeasonalMode::shared;
    if (s == "per_node") return SeasonalMode::per_node;
    throw ConfigError("unknown seasonal mode '" + std::string(s) + "' (expected none|shared|per_node)");
}

InteractionMode interaction_mode_from_string(std::string_view s) {
    if (s == "latent_projection") return InteractionMode::latent_projection;
    if (s == "full_matrix") return InteractionMode::full_matrix;
    throw ConfigError("unknown interaction mode '" + std::string(s) +
                      "' (expected latent_projection|full_matrix)");
}

// ---------------------------------------------------------------------------
// CountPanel

CountPanel::CountPanel(CountMatrix counts, std::vector<std::string> labels)
    : counts_(std::move(counts)), labels_(std::move(labels)) {
    if (counts_.rows() < 1) throw DataError("count panel needs at least one node");
    if (counts_.cols() < 2) throw DataError("count panel needs at least two time points");
    for (Index t = 0; t < counts_.cols(); ++t)
        for (Index i = 0; i < counts_.rows(); ++i)
            if (counts_(i, t) < 0) {
                std::ostringstream msg;
                msg << "negative count " << counts_(i, t) << " at node " << i << ", t=" << t;
                throw DataError(msg.str());
            }
    if (labels_.empty()) {
        for (Index i = 0; i < counts_.rows(); ++i) labels_.push_back("node" + std::to_string(i + 1));
    }
    if (static_cast<Index>(labels_.size()) != counts_.rows())
        throw DataError("expected " + std::to_string(counts_.rows()) + " node labels, got " +
                        std::to_string(labels_.size()));
    std::set<std::string> seen;
    for (const auto& l : labels_)
        if (!seen.insert(l).second) throw DataError("duplicate node label '" + l + "'");
}

CountPanel CountPanel::slice(Index begin, Index end) const {
    if (begin < 0 || end > n_times() || end - begin < 2)
        throw IndexError("invalid panel slice [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
    return CountPanel(counts_.middleCols(begin, end - begin), labels_);
}

MatrixXd CountPanel::log1p_counts() const {
    return counts_.cast<double>().array().log1p().matrix();
}

// ---------------------------------------------------------------------------
// CovariateMatrix

void CovariateMatrix::validate() const {
    if (static_cast<Index>(names.size()) != values.cols())
        throw ShapeError("covariate matrix has " + std::to_string(values.cols()) + " columns but " +
                         std::to_string(names.size()) + " names");
    if (!values.allFinite()) throw DataError("covariate matrix has non-finite entries");
    std::set<std::string> seen;
    for (const auto& n : names)
        if (!seen.insert(n).second) throw DataError("duplicate covariate name '" + n + "'");
}

Index CovariateMatrix::column(std::string_view name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == name) return static_cast<Index>(k);
    throw ConfigError("covariate '" + std::string(name) + "' not available");
}

CovariateMatrix CovariateMatrix::standardized() const {
    CovariateMatrix out = *this;
    const Index n = values.rows();
    for (Index k = 0; k < values.cols(); ++k) {
        auto col = out.values.col(k);
        const double mean = col.mean();
        col.array() -= mean;
        const double var = n > 1 ? col.squaredNorm() / static_cast<double>(n - 1) : 0.0;
        if (var > 0.0)
            col /= std::sqrt(var);
        else
            col.setZero();
    }
    return out;
}

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
    if (seasonal_lag < 0) throw ConfigError("seasonal_lag must be >= 0");
    if ((seasonal_lag > 0) != (eta_mode != SeasonalMode::none))
        throw ConfigError("seasonal_lag > 0 is required exactly when eta_mode is not 'none'");
    std::set<std::string> seen;
    for (const auto& n : covariate_names)
        if (!seen.insert(n).second) throw ConfigError("covariate '" + n + "' selected twice");
}

void ModelConfig::validate(const CovariateMatrix& available) const {
    validate();
    for (const auto& n : covariate_names) available.column(n);
}

// ---------------------------------------------------------------------------
// ParameterSet

namespace {

Index expected_length(SharingMode m, Index n) { return m == SharingMode::shared ? 1 : n; }

Index expected_length(SeasonalMode m, Index n) {
    switch (m) {
        case SeasonalMode::none: return 0;
        case SeasonalMode::shared: return 1;
        case SeasonalMode::per_node: return n;
    }
    return 0;
}

void check_block(const char* name, Index got, Index want) {
    if (got != want)
        throw ConfigError(std::string("parameter block '") + name + "' has length " + std::to_string(got) +
                          ", config requires " + std::to_string(want));
}

}  // namespace

Index ParameterSet::n_nodes() const {
    if (Z.rows() > 0) return Z.rows();
    if (full_B.rows() > 0) return full_B.rows();
    return std::max<Index>({alpha.size(), beta.size(), eta.size()});
}

void ParameterSet::validate(const ModelConfig& config, Index n) const {
    check_block("alpha", alpha.size(), expected_length(config.alpha_mode, n));
    check_block("beta", beta.size(), expected_length(config.beta_mode, n));
    check_block("eta", eta.size(), expected_length(config.eta_mode, n));
    check_block("delta", delta.size(), static_cast<Index>(config.covariate_names.size()));
    if (config.interaction_mode == InteractionMode::latent_projection) {
        if (Z.rows() != n || Z.cols() != kLatentDim)
            throw ShapeError("latent positions must be " + std::to_string(n) + "x2, got " +
                             std::to_string(Z.rows()) + "x" + std::to_string(Z.cols()));
        if (full_B.size() != 0) throw ConfigError("full_B given in latent_projection mode");
    } else {
        if (full_B.rows() != n || full_B.cols() != n)
            throw ShapeError("full_B must be " + std::to_string(n) + "x" + std::to_string(n));
        if (Z.size() != 0) throw ConfigError("latent positions given in full_matrix mode");
    }
    if (!alpha.allFinite() || !beta.allFinite() || !Z.allFinite() || !eta.allFinite() || !delta.allFinite() ||
        !full_B.allFinite())
        throw NumericError("non-finite parameter value");
}

ParameterSet ParameterSet::zeros(const ModelConfig& config, Index n) {
    ParameterSet p;
    p.alpha = VectorXd::Zero(expected_length(config.alpha_mode, n));
    p.beta = VectorXd::Zero(expected_length(config.beta_mode, n));
    p.eta = VectorXd::Zero(expected_length(config.eta_mode, n));
    p.delta = VectorXd::Zero(static_cast<Index>(config.covariate_names.size()));
    if (config.interaction_mode == InteractionMode::latent_projection)
        p.Z = MatrixXd::Zero(n, kLatentDim);
    else
        p.full_B = MatrixXd::Zero(n, n);
    return p;
}

namespace {
template <typename A, typename B>
bool same(const A& a, const B& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}
}  // namespace

bool ParameterSet::operator==(const ParameterSet& o) const {
    return same(alpha, o.alpha) && same(beta, o.beta) && same(Z, o.Z) && same(eta, o.eta) &&
           same(delta, o.delta) && same(full_B, o.full_B);
}

// ---------------------------------------------------------------------------
// core model

InteractionMatrix build_interaction_matrix(const ParameterSet& params, const ModelConfig& config) {
    const Index n = params.n_nodes();
    params.validate(config, n);
    InteractionMatrix B(n, n);
    if (config.interaction_mode == InteractionMode::latent_projection)
        B.noalias() = params.Z * params.Z.transpose();
    else
        B = params.full_B;
    for (Index i = 0; i < n; ++i) B(i, i) = ParameterSet::at(params.beta, i);
    return B;
}

MatrixXd selected_covariates(const ModelConfig& config, const CovariateMatrix& covariates) {
    MatrixXd X(covariates.values.rows(), static_cast<Index>(config.covariate_names.size()));
    for (std::size_t k = 0; k < config.covariate_names.size(); ++k)
        X.col(static_cast<Index>(k)) = covariates.values.col(covariates.column(config.covariate_names[k]));
    return X;
}

IntensityModel::IntensityModel(const ParameterSet& params, const ModelConfig& config,
                               const CovariateMatrix& covariates)
    : IntensityModel(params, build_interaction_matrix(params, config), config, covariates) {}

IntensityModel::IntensityModel(const ParameterSet& params, InteractionMatrix B, const ModelConfig& config,
                               const CovariateMatrix& covariates)
    : B_(std::move(B)), seasonal_lag_(config.seasonal_lag) {
    const Index n = B_.rows();
    if (B_.cols() != n) throw ShapeError("interaction matrix must be square");
    config.validate();
    if (covariates.values.rows() != n && !config.covariate_names.empty())
        throw ShapeError("covariates have " + std::to_string(covariates.values.rows()) + " rows, expected " +
                         std::to_string(n));
    base_.resize(n);
    for (Index i = 0; i < n; ++i) base_(i) = ParameterSet::at(params.alpha, i);
    if (!config.covariate_names.empty()) {
        if (params.delta.size() != static_cast<Index>(config.covariate_names.size()))
            throw ConfigError("delta length does not match the covariate selection");
        base_ += selected_covariates(config, covariates) * params.delta;
    }
    if (seasonal_lag_ > 0) {
        eta_.resize(n);
        for (Index i = 0; i < n; ++i) eta_(i) = ParameterSet::at(params.eta, i);
    }
    if (!base_.allFinite() || !B_.allFinite() || !eta_.allFinite())
        throw NumericError("non-finite parameter value");
}

VectorXd IntensityModel::log_intensity(const VectorXd& prev, const VectorXd& seasonal) const {
    VectorXd out = base_;
    out.noalias() += B_ * prev;
    if (seasonal_lag_ > 0) out.array() += eta_.array() * seasonal.array();
    return out;
}

MatrixXd IntensityModel::log_intensity_path(const MatrixXd& h, Index t0) const {
    const Index m = h.cols() - t0;
    MatrixXd out = B_ * h.middleCols(t0 - 1, m);
    out.colwise() += base_;
    if (seasonal_lag_ > 0)
        out.array() += h.middleCols(t0 - seasonal_lag_, m).array().colwise() * eta_.array();
    return out;
}

namespace {

void check_time(const ModelConfig& config, const CountPanel& panel, Index t) {
    const Index first = config.first_modeled_index();
    if (t < first || t > panel.n_times())
        throw IndexError("time index " + std::to_string(t) + " outside [" + std::to_string(first) + ", " +
                         std::to_string(panel.n_times()) + "]");
}

}  // namespace

VectorXd log_intensity(const ParameterSet& params, const ModelConfig& config, const CountPanel& panel,
                       const CovariateMatrix& covariates, Index t) {
    check_time(config, panel, t);
    const IntensityModel model(params, config, covariates);
    if (model.n_nodes() != panel.n_nodes()) throw ShapeError("parameters and panel disagree on N");
    const auto log1p = [&](Index col) { return panel.counts().col(col).cast<double>().array().log1p().matrix(); };
    VectorXd prev = log1p(t - 1);
    VectorXd seasonal = config.seasonal_lag > 0 ? VectorXd(log1p(t - config.seasonal_lag)) : VectorXd();
    VectorXd out = model.log_intensity(prev, seasonal);
    if (!out.allFinite()) throw NumericError("non-finite log intensity at t=" + std::to_string(t));
    return out;
}

MatrixXd intensity_path(const ParameterSet& params, const ModelConfig& config, const CountPanel& panel,
                        const CovariateMatrix& covariates) {
    const Index t0 = config.first_modeled_index();
    if (panel.n_times() < t0 + 1)
        throw IndexError("panel of length " + std::to_string(panel.n_times()) + " has no modeled time points");
    const IntensityModel model(params, config, covariates);
    if (model.n_nodes() != panel.n_nodes()) throw ShapeError("parameters and panel disagree on N");
    MatrixXd lam = model.log_intensity_path(panel.log1p_counts(), t0).array().exp().matrix();
    for (Index c = 0; c < lam.cols(); ++c)
        for (Index i = 0; i < lam.rows(); ++i)
            if (!std::isfinite(lam(i, c)) || lam(i, c) <= 0.0)
                throw NumericError("intensity overflow at node " + std::to_string(i) + ", t=" +
                                   std::to_string(c + t0));
    return lam;
}

double poisson_log_normaliser(double y) {
    if (y == 0.0) return 0.0;
    if (y < 16.0) return y * std::log(y) - y - std::lgamma(y + 1.0);
    // log(y!) = y log y - y + log(2 pi y) / 2 + 1/(12y) - 1/(360y^3) + 1/(1260y^5) - ...
    const double r = 1.0 / y, r2 = r * r;
    return -0.5 * std::log(2.0 * M_PI * y) - r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 / 1260.0));
}

double poisson_log_pmf(double y, double log_lambda) {
    if (y == 0.0) return -std::exp(log_lambda);
    // y log(lambda/y) - (lambda - y) = y (d - expm1(d)) with d = log(lambda/y).
    const double d = log_lambda - std::log(y);
    return y * (d - std::expm1(d)) + poisson_log_normaliser(y);
}

double poisson_log_likelihood(const CountPanel& panel, Index t0, const MatrixXd& log_lambda) {
    double total = 0.0;
    for (Index c = 0; c < log_lambda.cols(); ++c)
        for (Index i = 0; i < log_lambda.rows(); ++i)
            total += poisson_log_pmf(static_cast<double>(panel(i, c + t0)), log_lambda(i, c));
    return total;
}

double log_likelihood(const IntensityModel& model, const ModelConfig& config, const CountPanel& panel) {
    const Index t0 = config.first_modeled_index();
    if (panel.n_times() < t0 + 1)
        throw IndexError("panel of length " + std::to_string(panel.n_times()) + " has no modeled time points");
    if (model.n_nodes() != panel.n_nodes()) throw ShapeError("parameters and panel disagree on N");
    const MatrixXd log_lambda = model.log_intensity_path(panel.log1p_counts(), t0);
    const double ll = poisson_log_likelihood(panel, t0, log_lambda);
    if (!std::isfinite(ll)) throw NumericError("log-likelihood is not finite (intensity overflow)");
    return ll;
}

double log_likelihood(const ParameterSet& params, const ModelConfig& config, const CountPanel& panel,
                      const CovariateMatrix& covariates) {
    return log_likelihood(IntensityModel(params, config, covariates), config, panel);
}

}  // namespace tslpm
