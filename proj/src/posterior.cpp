#include "tslpm/posterior.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "tslpm/error.hpp"

namespace tslpm {

namespace {

// exp(709) is the largest finite double exponential.
constexpr double kMaxLogIntensity = 700.0;

Index block_length(SharingMode m, Index n) { return m == SharingMode::shared ? 1 : n; }

Index block_length(SeasonalMode m, Index n) {
    return m == SeasonalMode::none ? 0 : (m == SeasonalMode::shared ? 1 : n);
}

}  // namespace

FlatLayout::FlatLayout(const ModelConfig& config, Index n) : n_nodes_(n) {
    config.validate();
    auto add = [this](std::string name, Index len) {
        if (len == 0) return;
        blocks_.push_back({std::move(name), size_, len});
        size_ += len;
    };
    add("alpha", block_length(config.alpha_mode, n));
    add("beta", block_length(config.beta_mode, n));
    if (config.interaction_mode == InteractionMode::latent_projection)
        add("Z", n * kLatentDim);
    else
        add("offdiag", n * (n - 1));
    add("eta", block_length(config.eta_mode, n));
    add("delta", static_cast<Index>(config.covariate_names.size()));
}

const FlatLayout::Block* FlatLayout::find(std::string_view name) const {
    for (const auto& b : blocks_)
        if (b.name == name) return &b;
    return nullptr;
}

std::string FlatLayout::coordinate_name(Index k) const {
    for (const auto& b : blocks_) {
        if (k < b.offset || k >= b.offset + b.length) continue;
        const Index local = k - b.offset;
        if (b.name == "Z")
            return "Z[" + std::to_string(local / kLatentDim + 1) + "," + std::to_string(local % kLatentDim + 1) + "]";
        if (b.name == "offdiag") {
            const Index row = local / (n_nodes_ - 1);
            Index col = local % (n_nodes_ - 1);
            if (col >= row) ++col;
            return "B[" + std::to_string(row + 1) + "," + std::to_string(col + 1) + "]";
        }
        if (b.length == 1 && b.name != "delta") return b.name;
        return b.name + "[" + std::to_string(local + 1) + "]";
    }
    throw IndexError("coordinate " + std::to_string(k) + " outside layout of size " + std::to_string(size_));
}

FlatParams pack(const ParameterSet& params, const ModelConfig& config) {
    const Index n = params.n_nodes();
    params.validate(config, n);
    FlatParams flat{VectorXd(0), FlatLayout(config, n)};
    flat.values.resize(flat.layout.size());
    for (const auto& b : flat.layout.blocks()) {
        auto seg = flat.values.segment(b.offset, b.length);
        if (b.name == "alpha") seg = params.alpha;
        else if (b.name == "beta") seg = params.beta;
        else if (b.name == "eta") seg = params.eta;
        else if (b.name == "delta") seg = params.delta;
        else if (b.name == "Z") {
            for (Index i = 0; i < n; ++i)
                for (Index k = 0; k < kLatentDim; ++k) seg(i * kLatentDim + k) = params.Z(i, k);
        } else if (b.name == "offdiag") {
            Index p = 0;
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j)
                    if (i != j) seg(p++) = params.full_B(i, j);
        }
    }
    return flat;
}

ParameterSet unpack(const VectorXd& values, const FlatLayout& layout, const ModelConfig& config) {
    if (values.size() != layout.size())
        throw ShapeError("flat vector has length " + std::to_string(values.size()) + ", layout expects " +
                         std::to_string(layout.size()));
    if (!(FlatLayout(config, layout.n_nodes()) == layout))
        throw ConfigError("flat layout does not match the model configuration");
    const Index n = layout.n_nodes();
    ParameterSet p = ParameterSet::zeros(config, n);
    for (const auto& b : layout.blocks()) {
        const auto seg = values.segment(b.offset, b.length);
        if (b.name == "alpha") p.alpha = seg;
        else if (b.name == "beta") p.beta = seg;
        else if (b.name == "eta") p.eta = seg;
        else if (b.name == "delta") p.delta = seg;
        else if (b.name == "Z") {
            for (Index i = 0; i < n; ++i)
                for (Index k = 0; k < kLatentDim; ++k) p.Z(i, k) = seg(i * kLatentDim + k);
        } else if (b.name == "offdiag") {
            Index q = 0;
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < n; ++j)
                    if (i != j) p.full_B(i, j) = seg(q++);
        }
    }
    return p;
}

ParameterSet unpack(const FlatParams& flat, const ModelConfig& config) {
    return unpack(flat.values, flat.layout, config);
}

double log_prior(const VectorXd& theta) {
    const double var = kPriorSd * kPriorSd;
    const double norm = -std::log(kPriorSd) - 0.5 * std::log(2.0 * std::numbers::pi);
    return static_cast<double>(theta.size()) * norm - theta.squaredNorm() / (2.0 * var);
}

double log_prior(const ParameterSet& params, const ModelConfig& config) {
    return log_prior(pack(params, config).values);
}

// ---------------------------------------------------------------------------
// Posterior

Posterior::Posterior(ModelConfig config, Index n_nodes)
    : config_(std::move(config)), layout_(config_, n_nodes) {}

Posterior Posterior::prior_only(ModelConfig config, Index n_nodes) { return Posterior(std::move(config), n_nodes); }

Posterior::Posterior(ModelConfig config, const CountPanel& panel, const CovariateMatrix& covariates)
    : config_(std::move(config)), layout_(config_, panel.n_nodes()), has_data_(true) {
    config_.validate(covariates);
    const Index n = panel.n_nodes();
    if (!config_.covariate_names.empty() && covariates.values.rows() != n)
        throw ShapeError("covariates have " + std::to_string(covariates.values.rows()) + " rows, panel has " +
                         std::to_string(n) + " nodes");
    const Index t0 = config_.first_modeled_index();
    const Index m = panel.n_times() - t0;
    if (m < 1) throw DataError("panel too short for the configured seasonal lag");
    const MatrixXd h = panel.log1p_counts();
    y_ = panel.counts().middleCols(t0, m).cast<double>();
    prev_ = h.middleCols(t0 - 1, m);
    if (config_.seasonal_lag > 0) seasonal_ = h.middleCols(t0 - config_.seasonal_lag, m);
    X_ = selected_covariates(config_, covariates);
    log_y_ = MatrixXd::Zero(n, m);
    for (Index c = 0; c < m; ++c)
        for (Index i = 0; i < n; ++i) {
            const double y = y_(i, c);
            if (y > 0.0) log_y_(i, c) = std::log(y);
            normaliser_sum_ += poisson_log_normaliser(y);
        }
}

VectorXd Posterior::node_values(const VectorXd& x, const FlatLayout::Block* blk) const {
    const Index n = layout_.n_nodes();
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = blk->length == 1 ? x(blk->offset) : x(blk->offset + i);
    return v;
}

MatrixXd Posterior::log_intensity(const VectorXd& x, MatrixXd& Z) const {
    const Index n = layout_.n_nodes();
    const auto* z_blk = layout_.find("Z");
    const auto* o_blk = layout_.find("offdiag");
    const auto* e_blk = layout_.find("eta");
    const auto* d_blk = layout_.find("delta");

    MatrixXd B(n, n);
    if (z_blk) {
        Z = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            x.data() + z_blk->offset, n, kLatentDim);
        B.noalias() = Z * Z.transpose();
    } else {
        Index q = 0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j) B(i, j) = x(o_blk->offset + q++);
    }
    B.diagonal() = node_values(x, layout_.find("beta"));

    VectorXd base = node_values(x, layout_.find("alpha"));
    if (d_blk) base.noalias() += X_ * x.segment(d_blk->offset, d_blk->length);

    MatrixXd log_lam = B * prev_;
    log_lam.colwise() += base;
    if (e_blk) log_lam.array() += seasonal_.array().colwise() * node_values(x, e_blk).array();
    return log_lam;
}

double Posterior::evaluate(const VectorXd& x, VectorXd* grad) const {
    if (x.size() != layout_.size() || !x.allFinite()) return -std::numeric_limits<double>::infinity();
    const double inv_var = 1.0 / (kPriorSd * kPriorSd);
    double value = log_prior(x);
    if (grad) *grad = -x * inv_var;
    if (!has_data_) return value;

    const Index n = layout_.n_nodes();
    const auto* a_blk = layout_.find("alpha");
    const auto* b_blk = layout_.find("beta");
    const auto* z_blk = layout_.find("Z");
    const auto* o_blk = layout_.find("offdiag");
    const auto* e_blk = layout_.find("eta");
    const auto* d_blk = layout_.find("delta");

    MatrixXd Z;
    const MatrixXd log_lam = log_intensity(x, Z);
    if (log_lam.maxCoeff() > kMaxLogIntensity) return -std::numeric_limits<double>::infinity();

    // Same terms as poisson_log_pmf, inlined to share lambda with the gradient.
    MatrixXd resid(n, log_lam.cols());  // y - lambda
    double loglik = 0.0;
    for (Index c = 0; c < resid.cols(); ++c)
        for (Index i = 0; i < n; ++i) {
            const double y = y_(i, c);
            if (y == 0.0) {
                const double lam = std::exp(log_lam(i, c));
                resid(i, c) = -lam;
                loglik -= lam;
            } else {
                const double d = log_lam(i, c) - log_y_(i, c);
                const double em1 = std::expm1(d);
                resid(i, c) = -y * em1;
                loglik += y * (d - em1);
            }
        }
    value += loglik + normaliser_sum_;
    if (!std::isfinite(value)) return -std::numeric_limits<double>::infinity();
    if (!grad) return value;

    const VectorXd row_sum = resid.rowwise().sum();
    const MatrixXd G = resid * prev_.transpose();  // d loglik / d B_ij
    VectorXd& g = *grad;

    const auto accumulate = [&](const FlatLayout::Block* blk, const VectorXd& per_node) {
        if (blk->length == 1)
            g(blk->offset) += per_node.sum();
        else
            g.segment(blk->offset, n) += per_node;
    };
    accumulate(a_blk, row_sum);
    accumulate(b_blk, G.diagonal());
    if (z_blk) {
        // z_i enters B_ij and B_ji for every j != i.
        MatrixXd S = G + G.transpose();
        S.diagonal().setZero();
        const MatrixXd gz = S * Z;
        for (Index i = 0; i < n; ++i)
            for (Index k = 0; k < kLatentDim; ++k) g(z_blk->offset + i * kLatentDim + k) += gz(i, k);
    } else {
        Index q = 0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j) g(o_blk->offset + q++) += G(i, j);
    }
    if (e_blk) accumulate(e_blk, (resid.array() * seasonal_.array()).rowwise().sum().matrix());
    if (d_blk) g.segment(d_blk->offset, d_blk->length) += X_.transpose() * row_sum;
    return value;
}

void Posterior::jacobian_row(Index i, Index c, const MatrixXd& Z, VectorXd& J) const {
    const Index n = layout_.n_nodes();
    const auto* z_blk = layout_.find("Z");
    const auto* o_blk = layout_.find("offdiag");
    const auto* e_blk = layout_.find("eta");
    const auto* d_blk = layout_.find("delta");
    const auto slot = [](const FlatLayout::Block* blk, Index k) { return blk->offset + (blk->length == 1 ? 0 : k); };

    J.setZero(layout_.size());
    J(slot(layout_.find("alpha"), i)) += 1.0;
    J(slot(layout_.find("beta"), i)) += prev_(i, c);
    for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        if (z_blk) {
            for (Index k = 0; k < kLatentDim; ++k) {
                J(z_blk->offset + i * kLatentDim + k) += Z(j, k) * prev_(j, c);
                J(z_blk->offset + j * kLatentDim + k) += Z(i, k) * prev_(j, c);
            }
        } else {
            J(o_blk->offset + i * (n - 1) + (j < i ? j : j - 1)) += prev_(j, c);
        }
    }
    if (e_blk) J(slot(e_blk, i)) += seasonal_(i, c);
    if (d_blk) J.segment(d_blk->offset, d_blk->length) += X_.row(i).transpose();
}

MatrixXd Posterior::fisher_information(const VectorXd& x) const {
    const Index P = layout_.size();
    MatrixXd F = MatrixXd::Identity(P, P) / (kPriorSd * kPriorSd);
    if (!has_data_) return F;
    if (x.size() != P || !x.allFinite()) throw ShapeError("fisher_information: bad parameter vector");

    MatrixXd Z;
    const MatrixXd lam = log_intensity(x, Z).array().min(kMaxLogIntensity).exp().matrix();
    VectorXd J;
    for (Index c = 0; c < lam.cols(); ++c)
        for (Index i = 0; i < lam.rows(); ++i) {
            jacobian_row(i, c, Z, J);
            F.selfadjointView<Eigen::Lower>().rankUpdate(J, lam(i, c));
        }
    return F.selfadjointView<Eigen::Lower>();
}

MatrixXd Posterior::negative_hessian(const VectorXd& x) const {
    MatrixXd H = fisher_information(x);
    const auto* z_blk = layout_.find("Z");
    if (!has_data_ || !z_blk) return H;  // log intensities are linear in the other blocks
    MatrixXd Z;
    const MatrixXd lam = log_intensity(x, Z).array().min(kMaxLogIntensity).exp().matrix();
    const MatrixXd G = (y_ - lam) * prev_.transpose();
    const Index n = layout_.n_nodes();
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (i != j)
                for (Index k = 0; k < kLatentDim; ++k)
                    H(z_blk->offset + i * kLatentDim + k, z_blk->offset + j * kLatentDim + k) -= G(i, j) + G(j, i);
    return H;
}

VectorXd Posterior::linearised_estimate(const VectorXd& x) const {
    if (!has_data_) return x;
    const Index P = layout_.size();
    const Index n = layout_.n_nodes();
    const auto* z_blk = layout_.find("Z");
    // With latent positions, the off-diagonal of B is fitted freely (extra
    // columns after the flat layout) and then factored as Z Z^T.
    const Index extra = z_blk ? n * (n - 1) : 0;
    const MatrixXd no_latent = MatrixXd::Zero(n, kLatentDim);

    const Index m = P + extra;
    MatrixXd R(y_.size(), m);
    VectorXd counts(y_.size());
    VectorXd J;
    for (Index c = 0, r = 0; c < y_.cols(); ++c)
        for (Index i = 0; i < n; ++i, ++r) {
            jacobian_row(i, c, no_latent, J);
            R.row(r).head(P) = J.transpose();
            for (Index j = 0, q = 0; z_blk && j < n; ++j)
                for (Index k = 0; k < n; ++k)
                    if (j != k) R(r, P + q++) = j == i ? prev_(k, c) : 0.0;
            counts(r) = y_(i, c);
        }
    const double precision = 1.0 / (kPriorSd * kPriorSd);

    // Least squares on log(y + 1/2) with the prior as a ridge.
    MatrixXd A = MatrixXd::Identity(m, m) * precision;
    A.selfadjointView<Eigen::Lower>().rankUpdate(R.transpose());
    VectorXd sol = A.selfadjointView<Eigen::Lower>().ldlt().solve(
        R.transpose() * (counts.array() + 0.5).log().matrix());

    // The model is a Poisson GLM in these coordinates, so the posterior is
    // concave and damped Newton from the least-squares fit is reliable.
    auto objective = [&](const VectorXd& beta) {
        const VectorXd eta = R * beta;
        double f = -0.5 * precision * beta.squaredNorm();
        for (Index r = 0; r < eta.size(); ++r) f += poisson_log_pmf(counts(r), eta(r));
        return f;
    };
    double f = objective(sol);
    for (int it = 0; it < 100 && std::isfinite(f); ++it) {
        const VectorXd lambda = (R * sol).array().exp().matrix();
        const VectorXd grad = R.transpose() * (counts - lambda) - precision * sol;
        MatrixXd H = MatrixXd::Identity(m, m) * precision;
        H.selfadjointView<Eigen::Lower>().rankUpdate(R.transpose() * lambda.cwiseSqrt().asDiagonal());
        const VectorXd step = H.selfadjointView<Eigen::Lower>().ldlt().solve(grad);
        if (grad.dot(step) <= 1e-14 * (1.0 + std::abs(f))) break;  // Newton decrement
        double t = 1.0, f_new = -std::numeric_limits<double>::infinity();
        for (; t > 1e-10; t *= 0.5) {
            f_new = objective(sol + t * step);
            if (std::isfinite(f_new) && f_new >= f) break;
        }
        if (t <= 1e-10) break;
        sol += t * step;
        f = f_new;
    }
    VectorXd out = sol.head(P);
    if (!z_blk) return out;

    MatrixXd S = MatrixXd::Zero(n, n);
    for (Index j = 0, q = 0; j < n; ++j)
        for (Index k = 0; k < n; ++k)
            if (j != k) S(j, k) = sol(P + q++);
    S = (0.5 * (S + S.transpose())).eval();
    // Rank-2 positive semidefinite fit to the off-diagonal; the diagonal is
    // free, so it is refilled from the current fit on every pass.
    MatrixXd Z = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        x.data() + z_blk->offset, n, kLatentDim);
    for (int pass = 0; pass < 200; ++pass) {
        S.diagonal() = (Z * Z.transpose()).diagonal();
        const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S);
        for (Index k = 0; k < kLatentDim && k < n; ++k) {
            const Index idx = n - 1 - k;  // largest first
            Z.col(k) = eig.eigenvectors().col(idx) * std::sqrt(std::max(0.0, eig.eigenvalues()(idx)));
        }
    }
    // Levenberg-Marquardt polish of the off-diagonal residuals, since the
    // exponential link magnifies small errors in B.
    const Index pairs = n * (n - 1) / 2;
    auto residuals = [&](const MatrixXd& Zc) {
        VectorXd r(pairs);
        for (Index i = 0, q = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) r(q++) = Zc.row(i).dot(Zc.row(j)) - S(i, j);
        return r;
    };
    VectorXd r = residuals(Z);
    double damping = 1e-6;
    for (int it = 0; it < 200 && r.squaredNorm() > 1e-28; ++it) {
        MatrixXd Jz = MatrixXd::Zero(pairs, n * kLatentDim);
        for (Index i = 0, q = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j, ++q) {
                Jz.block(q, i * kLatentDim, 1, kLatentDim) = Z.row(j);
                Jz.block(q, j * kLatentDim, 1, kLatentDim) = Z.row(i);
            }
        const MatrixXd JtJ = Jz.transpose() * Jz;
        const VectorXd Jtr = Jz.transpose() * r;
        bool improved = false;
        for (; damping < 1e10 && !improved; damping *= 10) {
            const MatrixXd M = JtJ + damping * MatrixXd::Identity(JtJ.rows(), JtJ.cols());
            const VectorXd dz = -M.ldlt().solve(Jtr);
            MatrixXd trial = Z;
            for (Index i = 0; i < n; ++i) trial.row(i) += dz.segment(i * kLatentDim, kLatentDim).transpose();
            const VectorXd r_trial = residuals(trial);
            if (r_trial.squaredNorm() < r.squaredNorm()) {
                Z = trial;
                r = r_trial;
                improved = true;
            }
        }
        if (!improved) break;
        damping = std::max(1e-12, damping / 100);
    }
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < kLatentDim; ++k) out(z_blk->offset + i * kLatentDim + k) = Z(i, k);
    return out;
}

double Posterior::log_likelihood(const VectorXd& x) const {
    if (!has_data_) return 0.0;
    return evaluate(x, nullptr) - log_prior(x);
}

double log_posterior(const FlatParams& flat, const Posterior& target) {
    if (!(flat.layout == target.layout())) throw ConfigError("flat layout does not match the posterior");
    const double v = target.evaluate(flat.values, nullptr);
    if (!std::isfinite(v)) throw NumericError("log posterior is not finite (intensity overflow)");
    return v;
}

VectorXd grad_log_posterior(const FlatParams& flat, const Posterior& target) {
    if (!(flat.layout == target.layout())) throw ConfigError("flat layout does not match the posterior");
    VectorXd g;
    const double v = target.evaluate(flat.values, &g);
    if (!std::isfinite(v)) throw NumericError("gradient undefined: log posterior is not finite");
    return g;
}

}  // namespace tslpm
