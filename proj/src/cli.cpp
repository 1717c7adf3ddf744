#include "tslpm/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "tslpm/align.hpp"
#include "tslpm/error.hpp"
#include "tslpm/forecast.hpp"
#include "tslpm/io.hpp"
#include "tslpm/random.hpp"
#include "tslpm/selection.hpp"
#include "tslpm/stability.hpp"
#include "tslpm/synthesis.hpp"

namespace tslpm {

namespace fs = std::filesystem;
using io::Json;

namespace {

ModelConfig load_config(const std::string& path) {
    if (path.empty()) return ModelConfig{};
    return io::config_from_json(io::read_json_file(path));
}

// Covariates are standardised on ingestion so the N(0, 100^2) prior on
// delta has a common scale.
CovariateMatrix load_covariates(const std::string& path, const CountPanel& panel, const ModelConfig& config) {
    if (path.empty()) {
        if (!config.covariate_names.empty()) throw ConfigError("the model config names covariates; pass --covariates");
        return CovariateMatrix::empty(panel.n_nodes());
    }
    CovariateMatrix cov = io::read_covariates_csv(path);
    if (cov.values.rows() != panel.n_nodes())
        throw ShapeError(path + " has " + std::to_string(cov.values.rows()) + " data rows but the panel has " +
                         std::to_string(panel.n_nodes()) + " nodes");
    config.validate(cov);
    return cov.standardized();
}

// Point estimates come either from a parameter file or from a MAP fit file.
ParameterSet load_point(const std::string& path, ModelConfig& config) {
    const Json j = io::read_json_file(path);
    if (j.is_object() && j.value("format", "") == "tslpm.mapfit.v1") return io::params_from_json(j.at("params"), &config);
    return io::params_from_json(j, &config);
}

std::vector<Chain> load_chains(const std::vector<std::string>& paths) {
    std::vector<Chain> chains;
    for (const auto& p : paths) chains.push_back(io::chain_from_json(io::read_json_file(p)));
    for (std::size_t c = 1; c < chains.size(); ++c)
        if (chains[c].config != chains[0].config || !(chains[c].layout == chains[0].layout))
            throw DataError(paths[c] + " was fitted with a different model than " + paths[0]);
    return chains;
}

// Concatenates several chains of the same model into one sample.
Chain pool(std::vector<Chain> chains) {
    Chain out = std::move(chains.front());
    for (std::size_t c = 1; c < chains.size(); ++c) {
        if (chains[c].aligned != out.aligned) throw StateError("cannot pool aligned and unaligned chains");
        out.samples.insert(out.samples.end(), chains[c].samples.begin(), chains[c].samples.end());
        out.log_posteriors.insert(out.log_posteriors.end(), chains[c].log_posteriors.begin(),
                                  chains[c].log_posteriors.end());
        out.divergences += chains[c].divergences;
    }
    return out;
}

void check_nodes(Index n, const CountPanel& panel, const std::string& what) {
    if (n != panel.n_nodes())
        throw ShapeError(what + " has " + std::to_string(n) + " nodes, the panel has " +
                         std::to_string(panel.n_nodes()));
}

std::string exact(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

std::string forecast_csv(const ForecastResult& r, const std::vector<std::string>& labels) {
    std::ostringstream s;
    s.precision(17);
    s << "node,h,point,lower,upper\n";
    for (Index i = 0; i < r.point.rows(); ++i)
        for (Index h = 0; h < r.point.cols(); ++h)
            s << labels[static_cast<std::size_t>(i)] << ',' << h + 1 << ',' << r.point(i, h) << ',' << r.lower(i, h)
              << ',' << r.upper(i, h) << '\n';
    return s.str();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory '" + dir.string() + "': " + ec.message());
}

struct SimulateArgs {
    Index nodes = 0;
    Index timesteps = 0;
    std::uint64_t seed = 0;
    std::string out, params_out, config;
    double sigma0 = 0.01;
    double expand_factor = 1.05;
    bool no_expand = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    const ModelConfig config = load_config(a.config);
    if (!config.covariate_names.empty()) throw ConfigError("simulate does not generate covariates");
    if (a.nodes < 1) throw ConfigError("--nodes must be at least 1");
    if (a.timesteps < 2) throw ConfigError("--timesteps must be at least 2");
    if (!(a.sigma0 > 0.0)) throw ConfigError("--sigma0 must be positive");
    if (!a.no_expand && !(a.expand_factor > 1.0)) throw ConfigError("--expand-factor must exceed 1");
    DrawOptions draw;
    draw.latent_variance = a.sigma0;

    const SyntheticDataset data =
        generate_dataset(a.nodes, a.timesteps, a.seed, config, draw, a.no_expand ? 1.0 : a.expand_factor);
    if (data.redraws > 0)
        err << "note: " << data.redraws << " parameter draw(s) discarded (unstable or overflowing)\n";
    if (data.expansion_capped) err << "note: latent expansion hit its cap; positions left unexpanded\n";
    const CountPanel& panel = data.panel;
    const ParameterSet& params = data.params;
    const StabilityReport report = check_stationarity(build_interaction_matrix(params, config));

    std::ostringstream csv;
    io::write_panel_csv(panel, csv);
    io::write_text_file(a.out, csv.str());
    io::write_json_file(a.params_out, io::to_json(params, config, panel.labels()));
    out << io::to_json(report).dump(2) << '\n';
    return kExitOk;
}

struct FitArgs {
    std::string data, config, covariates, out, init;
    std::uint64_t seed = 0;
    int jobs = 1;
    // map
    int starts = 5;
    int max_iters = 2000;
    double tol = 1e-3;
    // hmc
    int iters = 10000, burnin = 5000, thin = 5, chains = 1, leapfrog = 20;
    double target_accept = 0.8;
    double step_size = 0.0;
    std::string metric = "identity";
};

int cmd_fit_map(const FitArgs& a, std::ostream& out, std::ostream& err) {
    const ModelConfig config = load_config(a.config);
    const CountPanel panel = io::read_panel_csv(a.data);
    const CovariateMatrix cov = load_covariates(a.covariates, panel, config);
    const Posterior target(config, panel, cov);
    std::optional<VectorXd> init;
    if (!a.init.empty()) {
        ModelConfig init_config;
        const ParameterSet p = load_point(a.init, init_config);
        if (init_config != config) throw ConfigError(a.init + " was produced with a different model config");
        init = pack(p, config).values;
    }
    MapOptions opts;
    opts.n_starts = a.starts;
    opts.seed = a.seed;
    opts.jobs = a.jobs;
    opts.lbfgs.max_iters = a.max_iters;
    opts.whitened_tolerance = a.tol;
    const MapFit fit = fit_map(target, init, opts);
    if (!fit.converged) err << "warning: MAP optimisation did not converge: " << fit.message << '\n';
    io::write_json_file(a.out, io::to_json(fit, config, panel.labels()));
    out << "log_posterior " << exact(fit.log_posterior) << "\nconverged " << (fit.converged ? "true" : "false")
        << "\niterations " << fit.iterations << "\ngradient_norm " << exact(fit.gradient_norm) << '\n';
    return kExitOk;
}

int cmd_fit_hmc(const FitArgs& a, std::ostream& out, std::ostream& err) {
    const ModelConfig config = load_config(a.config);
    const CountPanel panel = io::read_panel_csv(a.data);
    const CovariateMatrix cov = load_covariates(a.covariates, panel, config);
    const Posterior target(config, panel, cov);
    if (a.chains < 1) throw ConfigError("--chains must be at least 1");
    HmcOptions opts;
    opts.iters = a.iters;
    opts.burnin = a.burnin;
    opts.thin = a.thin;
    opts.target_accept = a.target_accept;
    opts.seed = a.seed;
    opts.n_leapfrog = a.leapfrog;
    opts.initial_step = a.step_size;
    if (a.metric == "laplace") opts.metric = laplace_metric(target, derive_seed(a.seed, 7), a.jobs);
    if (!a.init.empty()) {
        ModelConfig init_config;
        const ParameterSet p = load_point(a.init, init_config);
        if (init_config != config) throw ConfigError(a.init + " was produced with a different model config");
        opts.init = pack(p, config).values;
    }
    const std::vector<Chain> chains = hmc_sample_chains(target, opts, a.chains, a.jobs);
    const ChainDiagnostics diag = diagnostics(chains);

    const fs::path dir(a.out);
    ensure_dir(dir);
    for (std::size_t c = 0; c < chains.size(); ++c)
        io::write_json_file(dir / ("chain_" + std::to_string(c + 1) + ".json"), io::to_json(chains[c]));
    io::write_json_file(dir / "diagnostics.json", io::to_json(diag, chains));

    for (std::size_t c = 0; c < chains.size(); ++c)
        out << "chain " << c + 1 << ": draws " << chains[c].size() << ", accept " << exact(chains[c].accept_rate)
            << ", step " << exact(chains[c].step_size) << ", divergences " << chains[c].divergences << '\n';
    if (diag.divergence_count > 0) err << "warning: " << diag.divergence_count << " divergent transitions\n";
    return kExitOk;
}

struct AlignArgs {
    std::vector<std::string> chains;
    std::string reference, out_dir;
    std::size_t reference_draw = 0;
};

int cmd_align(const AlignArgs& a, std::ostream& out) {
    const std::vector<Chain> chains = load_chains(a.chains);
    if (chains.front().layout.find("Z") == nullptr) throw ConfigError("these chains have no latent positions to align");
    MatrixXd reference;
    if (!a.reference.empty()) {
        ModelConfig ref_config;
        const ParameterSet p = load_point(a.reference, ref_config);
        if (p.Z.rows() != chains.front().layout.n_nodes()) throw ShapeError("reference has the wrong number of nodes");
        reference = p.Z;
    } else {
        if (a.reference_draw >= chains.front().size())
            throw IndexError("--reference-draw " + std::to_string(a.reference_draw) + " is past the end of " +
                             a.chains.front());
        reference = latent_positions(chains.front().samples[a.reference_draw], chains.front().layout);
    }
    if (!a.out_dir.empty()) ensure_dir(a.out_dir);
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const Chain aligned = align_chain(chains[c], reference);
        const fs::path src(a.chains[c]);
        const fs::path dst = a.out_dir.empty() ? src : fs::path(a.out_dir) / src.filename();
        io::write_json_file(dst, io::to_json(aligned));
        out << "aligned " << src.string() << " -> " << dst.string() << '\n';
    }
    return kExitOk;
}

struct ForecastArgs {
    std::string data, params, covariates, out_json, out_csv, mode = "one-step";
    std::vector<std::string> chains;
    Index horizon = 5;
    Index origin = -1;
    int draws = 1000;
    double level = 0.95;
    std::uint64_t seed = 0;
    bool plug_in = false;
};

int cmd_forecast(const ForecastArgs& a, std::ostream& out) {
    if (a.params.empty() == a.chains.empty()) throw ConfigError("pass exactly one of --params or --chain");
    if (a.mode != "one-step" && a.mode != "multi-step") throw ConfigError("--mode must be one-step or multi-step");
    if (a.horizon < 1) throw ConfigError("--horizon must be at least 1");
    const bool one_step = a.mode == "one-step";
    const CountPanel panel = io::read_panel_csv(a.data);

    // One-step forecasts condition on observations inside the horizon, so by
    // default the origin leaves H-1 observed columns after it.
    const Index T = panel.n_times();
    const Index origin = a.origin >= 0 ? a.origin : (one_step ? T - (a.horizon - 1) : T);
    if (origin < 2 || origin > T) throw IndexError("forecast origin " + std::to_string(origin) + " is outside [2, " + std::to_string(T) + "]");
    if (one_step && origin + a.horizon - 1 > T)
        throw IndexError("one-step forecasts to h=" + std::to_string(a.horizon) + " from origin " +
                         std::to_string(origin) + " need observations up to t=" + std::to_string(origin + a.horizon - 1));
    const CountPanel history = panel.slice(0, origin);
    const CountMatrix future = panel.counts().middleCols(origin, one_step ? a.horizon - 1 : 0);

    ForecastOptions opts;
    opts.draws = a.draws;
    opts.level = a.level;
    opts.seed = a.seed;
    opts.plug_in = a.plug_in;

    ForecastResult result;
    if (!a.params.empty()) {
        ModelConfig config;
        const ParameterSet p = load_point(a.params, config);
        check_nodes(p.n_nodes(), panel, a.params);
        const CovariateMatrix cov = load_covariates(a.covariates, panel, config);
        result = one_step ? forecast_one_step(p, config, history, cov, a.horizon, future, opts)
                          : forecast_multi_step(p, config, history, cov, a.horizon, opts);
    } else {
        const Chain chain = pool(load_chains(a.chains));
        check_nodes(chain.layout.n_nodes(), panel, "chain");
        const CovariateMatrix cov = load_covariates(a.covariates, panel, chain.config);
        result = one_step ? forecast_one_step(chain, history, cov, a.horizon, future, opts)
                          : forecast_multi_step(chain, history, cov, a.horizon, opts);
    }
    if (!a.out_json.empty()) io::write_json_file(a.out_json, io::to_json(result, panel.labels()));
    const std::string csv = forecast_csv(result, panel.labels());
    if (!a.out_csv.empty())
        io::write_text_file(a.out_csv, csv);
    else
        out << csv;
    return kExitOk;
}

struct EvaluateArgs {
    std::string data, config, covariates, out, out_nodes;
    double split = 0.8;
    Index horizon = 5, stride = 1;
    int draws = 1000, starts = 5, jobs = 1;
    std::uint64_t seed = 0;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
    const ModelConfig config = load_config(a.config);
    const CountPanel panel = io::read_panel_csv(a.data);
    const CovariateMatrix cov = load_covariates(a.covariates, panel, config);
    ForecastStudyOptions opts;
    opts.split = a.split;
    opts.horizon = a.horizon;
    opts.origin_stride = a.stride;
    opts.forecast.draws = a.draws;
    opts.forecast.seed = a.seed;
    opts.map.seed = a.seed;
    opts.map.n_starts = a.starts;
    opts.map.jobs = a.jobs;
    const ForecastStudy study = evaluate_forecasts(panel, cov, config, opts);
    if (!study.fit.converged) err << "warning: MAP optimisation did not converge: " << study.fit.message << '\n';

    std::ostringstream csv;
    csv.precision(17);
    csv << "h,one_step_rmse,multi_step_rmse\n";
    for (Index h = 0; h < a.horizon; ++h)
        csv << h + 1 << ',' << study.one_step_rmse(h) << ',' << study.multi_step_rmse(h) << '\n';
    io::write_text_file(a.out, csv.str());
    if (!a.out_nodes.empty()) {
        std::ostringstream nodes;
        nodes.precision(17);
        nodes << "node,h,one_step_rmse,multi_step_rmse\n";
        for (Index i = 0; i < panel.n_nodes(); ++i)
            for (Index h = 0; h < a.horizon; ++h)
                nodes << panel.labels()[static_cast<std::size_t>(i)] << ',' << h + 1 << ','
                      << study.one_step_rmse_by_node(i, h) << ',' << study.multi_step_rmse_by_node(i, h) << '\n';
        io::write_text_file(a.out_nodes, nodes.str());
    }
    out << "train_length " << study.train_length << "\norigins " << study.n_origins << '\n';
    return kExitOk;
}

struct DicArgs {
    std::string data, covariates, out;
    std::vector<std::string> chains;
};

int cmd_dic(const DicArgs& a, std::ostream& out) {
    const CountPanel panel = io::read_panel_csv(a.data);
    const Chain chain = pool(load_chains(a.chains));
    check_nodes(chain.layout.n_nodes(), panel, "chain");
    const CovariateMatrix cov = load_covariates(a.covariates, panel, chain.config);
    const Json j = io::to_json(dic(chain, panel, cov));
    if (!a.out.empty()) io::write_json_file(a.out, j);
    out << j.dump(2) << '\n';
    return kExitOk;
}

struct PpcArgs {
    std::string data, covariates, out;
    std::vector<std::string> chains;
    double level = 0.95;
    std::uint64_t seed = 0;
};

int cmd_ppc(const PpcArgs& a, std::ostream& out) {
    const CountPanel panel = io::read_panel_csv(a.data);
    const Chain chain = pool(load_chains(a.chains));
    check_nodes(chain.layout.n_nodes(), panel, "chain");
    const CovariateMatrix cov = load_covariates(a.covariates, panel, chain.config);
    const VectorXd coverage = posterior_predictive_coverage(chain, panel, cov, a.level, a.seed);
    std::ostringstream csv;
    csv.precision(17);
    csv << "node,coverage\n";
    for (Index i = 0; i < panel.n_nodes(); ++i)
        csv << panel.labels()[static_cast<std::size_t>(i)] << ',' << coverage(i) << '\n';
    if (!a.out.empty())
        io::write_text_file(a.out, csv.str());
    else
        out << csv.str();
    return kExitOk;
}

int cmd_stability(const std::string& params_path, std::ostream& out) {
    ModelConfig config;
    const ParameterSet p = load_point(params_path, config);
    out << io::to_json(check_stationarity(build_interaction_matrix(p, config))).dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Poisson latent position VAR(1) models for multivariate count time series", "tslpm"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Draw a stationary ground truth and simulate a count panel");
    simulate->add_option("--nodes", sim.nodes, "Number of nodes")->required();
    simulate->add_option("--timesteps", sim.timesteps, "Number of time points")->required();
    simulate->add_option("--seed", sim.seed, "Random seed")->required();
    simulate->add_option("--out", sim.out, "Panel CSV to write")->required();
    simulate->add_option("--params-out", sim.params_out, "Ground-truth parameter JSON to write")->required();
    simulate->add_option("--sigma0", sim.sigma0, "Variance of each latent coordinate")->capture_default_str();
    simulate->add_option("--expand-factor", sim.expand_factor, "Latent expansion multiplier (> 1)")
        ->capture_default_str();
    simulate->add_flag("--no-expand", sim.no_expand, "Keep the drawn latent positions");
    simulate->add_option("--config", sim.config, "Model config JSON (default: shared alpha, per-node beta)");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Estimate a model");
    fit->require_subcommand(1);
    auto add_common = [&fa](CLI::App* cmd) {
        cmd->add_option("--data", fa.data, "Panel CSV")->required();
        cmd->add_option("--config", fa.config, "Model config JSON")->required();
        cmd->add_option("--covariates", fa.covariates, "Covariate CSV (standardised on load)");
        cmd->add_option("--seed", fa.seed, "Random seed")->required();
        cmd->add_option("--init", fa.init, "Starting point: parameter or MAP fit JSON");
        cmd->add_option("--jobs", fa.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    };
    auto* fit_map_cmd = fit->add_subcommand("map", "Posterior mode by multi-start L-BFGS");
    add_common(fit_map_cmd);
    fit_map_cmd->add_option("--out", fa.out, "MAP fit JSON to write")->required();
    fit_map_cmd->add_option("--starts", fa.starts, "Number of starting points")->capture_default_str()
        ->check(CLI::PositiveNumber);
    fit_map_cmd->add_option("--max-iters", fa.max_iters, "L-BFGS iteration cap")->capture_default_str();
    fit_map_cmd->add_option("--tol", fa.tol, "Convergence tolerance on the curvature-scaled gradient")->capture_default_str();
    auto* fit_hmc_cmd = fit->add_subcommand("hmc", "Posterior draws by Hamiltonian Monte Carlo");
    add_common(fit_hmc_cmd);
    fit_hmc_cmd->add_option("--out", fa.out, "Directory for chain and diagnostics JSON")->required();
    fit_hmc_cmd->add_option("--iters", fa.iters, "Iterations per chain, burn-in included")->capture_default_str();
    fit_hmc_cmd->add_option("--burnin", fa.burnin, "Warm-up iterations")->capture_default_str();
    fit_hmc_cmd->add_option("--thin", fa.thin, "Keep every k-th draw")->capture_default_str();
    fit_hmc_cmd->add_option("--chains", fa.chains, "Number of chains")->capture_default_str();
    fit_hmc_cmd->add_option("--target-accept", fa.target_accept, "Warm-up acceptance target")->capture_default_str();
    fit_hmc_cmd->add_option("--leapfrog", fa.leapfrog, "Leapfrog steps per proposal")->capture_default_str();
    fit_hmc_cmd->add_option("--step-size", fa.step_size, "Initial step size (0 picks one)")->capture_default_str();
    fit_hmc_cmd->add_option("--metric", fa.metric, "Mass matrix: identity, or laplace (curvature at the MAP)")
        ->check(CLI::IsMember({"identity", "laplace"}))
        ->capture_default_str();

    AlignArgs al;
    auto* align = app.add_subcommand("align", "Procrustes-align latent positions of chains");
    align->add_option("--chain", al.chains, "Chain JSON (repeatable)")->required();
    align->add_option("--reference", al.reference, "Reference positions: parameter or MAP fit JSON");
    align->add_option("--reference-draw", al.reference_draw, "Use this draw of the first chain as reference")
        ->capture_default_str();
    align->add_option("--out-dir", al.out_dir, "Write here instead of rewriting in place");

    ForecastArgs fc;
    auto* forecast = app.add_subcommand("forecast", "Forecast with a point estimate or posterior draws");
    forecast->add_option("--data", fc.data, "Panel CSV")->required();
    forecast->add_option("--params", fc.params, "Parameter or MAP fit JSON");
    forecast->add_option("--chain", fc.chains, "Chain JSON (repeatable)");
    forecast->add_option("--covariates", fc.covariates, "Covariate CSV");
    forecast->add_option("--mode", fc.mode, "one-step or multi-step")->capture_default_str();
    forecast->add_option("--horizon", fc.horizon, "Forecast horizon H")->capture_default_str();
    forecast->add_option("--origin", fc.origin, "Number of history columns (default: see README)");
    forecast->add_option("--draws", fc.draws, "Monte Carlo draws")->capture_default_str();
    forecast->add_option("--level", fc.level, "Interval level")->capture_default_str();
    forecast->add_option("--seed", fc.seed, "Random seed")->required();
    forecast->add_flag("--plug-in", fc.plug_in, "Deterministic multi-step recursion");
    forecast->add_option("--out-json", fc.out_json, "Forecast JSON to write");
    forecast->add_option("--out-csv", fc.out_csv, "Tidy CSV to write (default: stdout)");

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Train/test RMSE study of both forecasting algorithms");
    evaluate->add_option("--data", ev.data, "Panel CSV")->required();
    evaluate->add_option("--config", ev.config, "Model config JSON")->required();
    evaluate->add_option("--covariates", ev.covariates, "Covariate CSV");
    evaluate->add_option("--split", ev.split, "Training fraction")->capture_default_str();
    evaluate->add_option("--horizon", ev.horizon, "Forecast horizon H")->capture_default_str();
    evaluate->add_option("--stride", ev.stride, "Distance between forecast origins")->capture_default_str();
    evaluate->add_option("--draws", ev.draws, "Trajectories per multi-step forecast")->capture_default_str();
    evaluate->add_option("--starts", ev.starts, "MAP starting points")->capture_default_str();
    evaluate->add_option("--jobs", ev.jobs, "Worker threads")->capture_default_str();
    evaluate->add_option("--seed", ev.seed, "Random seed")->required();
    evaluate->add_option("--out", ev.out, "Per-h RMSE CSV to write")->required();
    evaluate->add_option("--out-nodes", ev.out_nodes, "Per-node, per-h RMSE CSV to write");

    DicArgs dc;
    auto* dic_cmd = app.add_subcommand("dic", "Deviance information criterion of aligned chains");
    dic_cmd->add_option("--data", dc.data, "Panel CSV")->required();
    dic_cmd->add_option("--chain", dc.chains, "Chain JSON (repeatable)")->required();
    dic_cmd->add_option("--covariates", dc.covariates, "Covariate CSV");
    dic_cmd->add_option("--out", dc.out, "DIC JSON to write");

    PpcArgs pp;
    auto* ppc = app.add_subcommand("ppc", "Per-node posterior predictive interval coverage");
    ppc->add_option("--data", pp.data, "Panel CSV")->required();
    ppc->add_option("--chain", pp.chains, "Chain JSON (repeatable)")->required();
    ppc->add_option("--covariates", pp.covariates, "Covariate CSV");
    ppc->add_option("--level", pp.level, "Interval level")->capture_default_str();
    ppc->add_option("--seed", pp.seed, "Random seed")->required();
    ppc->add_option("--out", pp.out, "Coverage CSV to write (default: stdout)");

    std::string stab_params;
    auto* stability = app.add_subcommand("stability", "Stationarity report for a parameter file");
    stability->add_option("--params", stab_params, "Parameter or MAP fit JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const CLI::App* scope = &app;
        for (;;) {
            const auto subs = scope->get_subcommands();
            if (subs.empty()) break;
            scope = subs.front();
        }
        err << scope->help();
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim, out, err);
        if (fit_map_cmd->parsed()) return cmd_fit_map(fa, out, err);
        if (fit_hmc_cmd->parsed()) return cmd_fit_hmc(fa, out, err);
        if (align->parsed()) return cmd_align(al, out);
        if (forecast->parsed()) return cmd_forecast(fc, out);
        if (evaluate->parsed()) return cmd_evaluate(ev, out, err);
        if (dic_cmd->parsed()) return cmd_dic(dc, out);
        if (ppc->parsed()) return cmd_ppc(pp, out);
        if (stability->parsed()) return cmd_stability(stab_params, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed JSON input: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return kExitUsage;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace tslpm
