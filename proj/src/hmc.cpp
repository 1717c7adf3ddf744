#include "tslpm/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/LU>
#include <limits>

#include "tslpm/error.hpp"
#include "tslpm/map_fit.hpp"
#include "tslpm/parallel.hpp"
#include "tslpm/random.hpp"

namespace tslpm {

VectorXd Chain::coordinate(Index k) const {
    VectorXd out(static_cast<Index>(samples.size()));
    for (std::size_t s = 0; s < samples.size(); ++s) out(static_cast<Index>(s)) = samples[s](k);
    return out;
}

// ---------------------------------------------------------------------------
// leapfrog

LeapfrogState leapfrog(const LogDensity& target, LeapfrogState st, double step, int n_steps) {
    if (!(step > 0.0)) throw ConfigError("leapfrog step must be > 0");
    if (n_steps < 1) throw ConfigError("leapfrog needs at least one step");
    for (int s = 0; s < n_steps; ++s) {
        st.momentum += 0.5 * step * st.grad;
        st.position += step * st.momentum;
        st.log_density = target.evaluate(st.position, &st.grad);
        if (!std::isfinite(st.log_density) || !st.grad.allFinite()) {
            st.divergent = true;
            st.log_density = -std::numeric_limits<double>::infinity();
            return st;
        }
        st.momentum += 0.5 * step * st.grad;
    }
    return st;
}

LeapfrogState leapfrog(const LogDensity& target, const VectorXd& position, const VectorXd& momentum, double step,
                       int n_steps) {
    if (position.size() != momentum.size()) throw ShapeError("position and momentum sizes differ");
    LeapfrogState st;
    st.position = position;
    st.momentum = momentum;
    st.log_density = target.evaluate(position, &st.grad);
    if (!std::isfinite(st.log_density)) {
        st.divergent = true;
        return st;
    }
    return leapfrog(target, std::move(st), step, n_steps);
}

// ---------------------------------------------------------------------------
// step size

DualAveraging::DualAveraging(double initial_step, double target_accept, double gamma, double t0, double kappa)
    : target_(target_accept), gamma_(gamma), t0_(t0), kappa_(kappa), mu_(std::log(10.0 * initial_step)),
      log_step_(std::log(initial_step)) {
    if (!(initial_step > 0.0)) throw ConfigError("initial step size must be > 0");
}

double DualAveraging::update(double accept_stat) {
    ++m_;
    const double m = static_cast<double>(m_);
    const double w = 1.0 / (m + t0_);
    h_bar_ = (1.0 - w) * h_bar_ + w * (target_ - std::clamp(accept_stat, 0.0, 1.0));
    log_step_ = mu_ - std::sqrt(m) / gamma_ * h_bar_;
    const double eta = std::pow(m, -kappa_);
    log_step_bar_ = eta * log_step_ + (1.0 - eta) * log_step_bar_;
    return step();
}

namespace {

VectorXd draw_momentum(Rng& rng, Index p) {
    VectorXd m(p);
    for (Index k = 0; k < p; ++k) m(k) = rng.normal();
    return m;
}

double hamiltonian(double log_density, const VectorXd& momentum) {
    return log_density - 0.5 * momentum.squaredNorm();
}

}  // namespace

double find_reasonable_step(const LogDensity& target, const VectorXd& position, std::uint64_t seed) {
    Rng rng(seed);
    LeapfrogState start;
    start.position = position;
    start.log_density = target.evaluate(position, &start.grad);
    if (!std::isfinite(start.log_density)) throw NumericError("log density not finite at the initial point");
    start.momentum = draw_momentum(rng, position.size());
    const double h0 = hamiltonian(start.log_density, start.momentum);
    const auto log_ratio = [&](double eps) {
        const auto end = leapfrog(target, start, eps, 1);
        if (end.divergent) return -std::numeric_limits<double>::infinity();
        const double d = hamiltonian(end.log_density, end.momentum) - h0;
        return std::isfinite(d) ? d : -std::numeric_limits<double>::infinity();
    };
    double eps = 1.0;
    const double direction = log_ratio(eps) > std::log(0.5) ? 1.0 : -1.0;
    for (int k = 0; k < 100; ++k) {
        const double lr = log_ratio(eps);
        if (!(direction * lr > -direction * std::log(2.0))) break;
        eps *= std::pow(2.0, direction);
    }
    return eps;
}

// ---------------------------------------------------------------------------
// sampler

namespace {

class AffineDensity final : public LogDensity {
public:
    AffineDensity(const LogDensity& target, const AffineMetric& metric) : target_(target), metric_(metric) {}
    Index dimension() const override { return target_.dimension(); }
    VectorXd to_position(const VectorXd& u) const { return metric_.center + metric_.transform * u; }
    double evaluate(const VectorXd& u, VectorXd* grad) const override {
        VectorXd g;
        const double v = target_.evaluate(to_position(u), grad ? &g : nullptr);
        if (grad && std::isfinite(v)) *grad = metric_.transform.transpose() * g;
        return v;
    }

private:
    const LogDensity& target_;
    const AffineMetric& metric_;
};

Chain sample_identity(const LogDensity& target, const ModelConfig& config, const FlatLayout& layout,
                      const HmcOptions& opt);

}  // namespace

Chain hmc_sample(const LogDensity& target, const ModelConfig& config, const FlatLayout& layout,
                 const HmcOptions& opt) {
    if (!opt.metric) return sample_identity(target, config, layout, opt);
    const AffineMetric& m = *opt.metric;
    const Index p = target.dimension();
    if (m.center.size() != p || m.transform.rows() != p || m.transform.cols() != p)
        throw ShapeError("HMC metric does not match the target dimension");
    const AffineDensity wrapped(target, m);
    HmcOptions inner = opt;
    inner.metric.reset();
    inner.init = opt.init ? VectorXd(m.transform.fullPivLu().solve(*opt.init - m.center)) : VectorXd::Zero(p);
    Chain chain = sample_identity(wrapped, config, layout, inner);
    for (auto& s : chain.samples) s = wrapped.to_position(s);
    chain.metric = "laplace";
    return chain;
}

namespace {
constexpr double kMetricFloor = 1e-4;
}  // namespace

AffineMetric laplace_metric(const Posterior& target, std::uint64_t seed, int jobs) {
    MapOptions mo;
    mo.seed = seed;
    mo.jobs = jobs;
    return laplace_metric(target, fit_map(target, std::nullopt, mo).flat.values);
}

AffineMetric laplace_metric(const Posterior& target, const VectorXd& mode) {
    // A coarser floor than the optimiser uses: directions the likelihood
    // barely constrains get a bounded momentum scale.
    return {mode, curvature_whitening(target, mode, kMetricFloor)};
}

namespace {

void check_schedule(const HmcOptions& opt) {
    if (opt.iters < 1 || opt.burnin < 0 || opt.burnin > opt.iters || opt.thin < 1)
        throw ConfigError("invalid HMC schedule (iters >= 1, 0 <= burnin <= iters, thin >= 1)");
    if (opt.n_leapfrog < 1) throw ConfigError("n_leapfrog must be >= 1");
}

LeapfrogState initial_state(const LogDensity& target, VectorXd position) {
    if (position.size() != target.dimension()) throw ShapeError("HMC initial point has the wrong length");
    LeapfrogState st;
    st.position = std::move(position);
    st.log_density = target.evaluate(st.position, &st.grad);
    if (!std::isfinite(st.log_density)) throw NumericError("log density not finite at the HMC initial point");
    return st;
}

struct Transition {
    double accept_prob = 0.0;
    bool accepted = false;
    bool divergent = false;
};

// One Metropolis-corrected trajectory; updates `cur` on acceptance.
Transition transition(const LogDensity& target, LeapfrogState& cur, double step, const HmcOptions& opt, Rng& rng) {
    cur.momentum = draw_momentum(rng, target.dimension());
    const double jitter = opt.leapfrog_jitter > 0.0 ? rng.uniform(-opt.leapfrog_jitter, opt.leapfrog_jitter) : 0.0;
    const int n_steps = std::max(1, static_cast<int>(std::lround(opt.n_leapfrog * (1.0 + jitter))));

    const double h0 = hamiltonian(cur.log_density, cur.momentum);
    LeapfrogState prop = leapfrog(target, cur, step, n_steps);
    const double dh = prop.divergent ? -std::numeric_limits<double>::infinity()
                                     : hamiltonian(prop.log_density, prop.momentum) - h0;
    Transition t;
    t.divergent = prop.divergent || !std::isfinite(dh) || std::abs(dh) > opt.divergence_threshold;
    t.accept_prob = t.divergent ? 0.0 : std::min(1.0, std::exp(dh));
    t.accepted = rng.uniform() < t.accept_prob;
    if (t.accepted) {
        cur.position = std::move(prop.position);
        cur.log_density = prop.log_density;
        cur.grad = std::move(prop.grad);
    }
    return t;
}

Chain empty_chain(const ModelConfig& config, const FlatLayout& layout, const HmcOptions& opt) {
    Chain chain;
    chain.config = config;
    chain.layout = layout;
    chain.seed = opt.seed;
    chain.n_leapfrog = opt.n_leapfrog;
    const std::size_t stored = static_cast<std::size_t>((opt.iters - opt.burnin + opt.thin - 1) / opt.thin);
    chain.samples.reserve(stored);
    chain.log_posteriors.reserve(stored);
    return chain;
}

void check_warmup(const Chain& chain, const HmcOptions& opt) {
    if (opt.burnin > 0 && chain.warmup_divergences == opt.burnin)
        throw NumericError("every warm-up trajectory diverged (" + std::to_string(opt.burnin) +
                           " iterations); try a smaller initial step or a better starting point");
}

Chain sample_identity(const LogDensity& target, const ModelConfig& config, const FlatLayout& layout,
                      const HmcOptions& opt) {
    check_schedule(opt);
    Rng rng(opt.seed);
    LeapfrogState cur = initial_state(target, opt.init ? *opt.init : VectorXd::Zero(target.dimension()));

    double step = opt.initial_step > 0.0 ? opt.initial_step
                                         : find_reasonable_step(target, cur.position, derive_seed(opt.seed, 1));
    DualAveraging adapter(step, opt.target_accept);

    Chain chain = empty_chain(config, layout, opt);
    int accepted_after = 0;
    int proposals_after = 0;
    for (int it = 0; it < opt.iters; ++it) {
        const bool warmup = it < opt.burnin;
        const Transition t = transition(target, cur, step, opt, rng);
        if (t.divergent) {
            ++chain.divergences;
            if (warmup) ++chain.warmup_divergences;
        }

        if (warmup) {
            if (opt.adapt) {
                step = adapter.update(t.accept_prob);
                // The averaged step can sit above the local stability limit.
                if (it == opt.burnin - 1) step = std::min(step, adapter.adapted_step());
            }
        } else {
            ++proposals_after;
            if (t.accepted) ++accepted_after;
            if ((it - opt.burnin) % opt.thin == 0) {
                chain.samples.push_back(cur.position);
                chain.log_posteriors.push_back(cur.log_density);
            }
        }
    }
    check_warmup(chain, opt);
    chain.accept_rate = proposals_after > 0 ? static_cast<double>(accepted_after) / proposals_after : 0.0;
    chain.step_size = step;
    return chain;
}

VectorXd default_start(const Posterior& target, const HmcOptions& opt) {
    if (!opt.metric) return default_initialization(target, derive_seed(opt.seed, 2));
    Rng rng(derive_seed(opt.seed, 2));
    // Shrunk: floored directions overstate the spread, and a full draw can
    // land where the intensities explode.
    constexpr double kStartScale = 0.1;
    return opt.metric->center + kStartScale * (opt.metric->transform * draw_momentum(rng, target.dimension()));
}

}  // namespace

Chain hmc_sample(const Posterior& target, const HmcOptions& options) {
    HmcOptions opt = options;
    if (!opt.init) opt.init = default_start(target, opt);
    return hmc_sample(static_cast<const LogDensity&>(target), target.config(), target.layout(), opt);
}

std::vector<Chain> hmc_sample_chains(const Posterior& target, const HmcOptions& options, int n_chains, int jobs) {
    if (n_chains < 1) throw ConfigError("need at least one chain");
    std::vector<Chain> chains(static_cast<std::size_t>(n_chains));
    parallel_for(chains.size(), jobs, [&](std::size_t c) {
        HmcOptions opt = options;
        opt.seed = derive_seed(options.seed, 100 + c);
        if (!opt.init) opt.init = default_start(target, opt);
        chains[c] = hmc_sample(target, opt);
    });
    return chains;
}

// ---------------------------------------------------------------------------
// diagnostics

namespace {

// Splits every chain into halves (dropping a middle draw for odd lengths).
std::vector<VectorXd> split_halves(const std::vector<VectorXd>& chains) {
    std::vector<VectorXd> out;
    Index n = std::numeric_limits<Index>::max();
    for (const auto& c : chains) n = std::min(n, c.size());
    const Index half = n / 2;
    for (const auto& c : chains) {
        out.push_back(c.head(half));
        out.push_back(c.segment(n - half, half));
    }
    return out;
}

double variance(const VectorXd& v) {
    if (v.size() < 2) return 0.0;
    return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

// Autocovariance at lag t (biased normalisation by n).
double autocovariance(const VectorXd& v, double mean, Index lag) {
    const Index n = v.size();
    double s = 0.0;
    for (Index i = 0; i + lag < n; ++i) s += (v(i) - mean) * (v(i + lag) - mean);
    return s / static_cast<double>(n);
}

}  // namespace

double split_rhat(const std::vector<VectorXd>& chains) {
    const auto parts = split_halves(chains);
    if (parts.size() < 2 || parts[0].size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(parts[0].size());
    const double m = static_cast<double>(parts.size());
    VectorXd means(parts.size());
    double w = 0.0;
    for (std::size_t j = 0; j < parts.size(); ++j) {
        means(static_cast<Index>(j)) = parts[j].mean();
        w += variance(parts[j]);
    }
    w /= m;
    const double b = n * variance(means);
    if (!(w > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<VectorXd>& chains) {
    const auto parts = split_halves(chains);
    if (parts.size() < 2 || parts[0].size() < 4) return std::numeric_limits<double>::quiet_NaN();
    const Index n = parts[0].size();
    const double m = static_cast<double>(parts.size());
    const double total = m * static_cast<double>(n);
    VectorXd means(parts.size());
    double w = 0.0;
    for (std::size_t j = 0; j < parts.size(); ++j) {
        means(static_cast<Index>(j)) = parts[j].mean();
        w += variance(parts[j]);
    }
    w /= m;
    const double dn = static_cast<double>(n);
    const double var_plus = (dn - 1.0) / dn * w + variance(means);
    if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();

    const auto rho = [&](Index lag) {
        double acov = 0.0;
        for (std::size_t j = 0; j < parts.size(); ++j)
            acov += autocovariance(parts[j], means(static_cast<Index>(j)), lag);
        acov /= m;
        return 1.0 - (w - acov) / var_plus;
    };

    // Geyer's initial positive, monotone sequence over pairs of lags.
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (Index t = 0; t + 1 < n; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
    }
    tau = std::max(tau, 1.0 / std::log10(total));
    return std::min(total / tau, total);
}

ChainDiagnostics diagnostics(const std::vector<Chain>& chains) {
    if (chains.empty()) throw ConfigError("diagnostics need at least one chain");
    const FlatLayout& layout = chains.front().layout;
    for (const auto& c : chains) {
        if (!(c.layout == layout)) throw ConfigError("chains have different parameter layouts");
        if (c.samples.size() < 4) throw ConfigError("each chain needs at least 4 draws for diagnostics");
    }
    ChainDiagnostics out;
    const Index p = layout.size();
    out.rhat.resize(p);
    out.ess.resize(p);
    for (Index k = 0; k < p; ++k) {
        std::vector<VectorXd> draws;
        for (const auto& c : chains) draws.push_back(c.coordinate(k));
        out.names.push_back(layout.coordinate_name(k));
        out.rhat(k) = split_rhat(draws);
        out.rhat_defined.push_back(std::isfinite(out.rhat(k)));
        out.ess(k) = effective_sample_size(draws);
    }
    for (const auto& c : chains) out.divergence_count += c.divergences;
    return out;
}

}  // namespace tslpm
