#include "tslpm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tslpm/error.hpp"

namespace tslpm::io {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Splits one CSV line; also returns the 1-based column where each field starts.
std::vector<std::pair<std::string, std::size_t>> split_fields(const std::string& line) {
    std::vector<std::pair<std::string, std::size_t>> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        const auto end = comma == std::string::npos ? line.size() : comma;
        out.emplace_back(trim(std::string_view(line).substr(start, end - start)), start + 1);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, std::size_t col, const std::string& what) {
    throw DataError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::vector<std::string> header_names(const std::string& line, const std::string& source, const char* what) {
    std::vector<std::string> names;
    for (const auto& [name, col] : split_fields(line)) {
        if (name.empty()) fail(source, 1, col, std::string("empty ") + what);
        names.push_back(name);
    }
    return names;
}

Json vector_json(const VectorXd& v) {
    Json a = Json::array();
    for (Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

Json matrix_json(const MatrixXd& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json r = Json::array();
        for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

double json_number(const Json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!j.is_number()) throw DataError("expected a number, got " + j.dump());
    return j.get<double>();
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

VectorXd vector_from_json(const Json& j, const char* what) {
    if (j.is_null()) return VectorXd(0);
    if (!j.is_array()) throw DataError(std::string("'") + what + "' must be an array");
    VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Index>(k)) = json_number(j[k]);
    return v;
}

MatrixXd matrix_from_json(const Json& j, Index cols_expected, const char* what) {
    if (j.is_null()) return MatrixXd(0, 0);
    if (!j.is_array()) throw DataError(std::string("'") + what + "' must be an array of rows");
    const auto rows = static_cast<Index>(j.size());
    const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : cols_expected;
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const Json& r = j[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<Index>(r.size()) != cols)
            throw DataError(std::string("'") + what + "' row " + std::to_string(i) + " has the wrong length");
        for (Index c = 0; c < cols; ++c) m(i, c) = json_number(r[static_cast<std::size_t>(c)]);
    }
    return m;
}

const Json& require(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
    return j.at(key);
}

void require_format(const Json& j, const char* format) {
    const auto& f = require(j, "format");
    if (!f.is_string() || f.get<std::string>() != format)
        throw DataError("expected a '" + std::string(format) + "' document, got format " + f.dump());
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

CountPanel parse_panel_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty panel file");
    const auto labels = header_names(line, source, "node label");
    std::vector<std::vector<std::int64_t>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != labels.size())
            fail(source, line_no, 1,
                 "expected " + std::to_string(labels.size()) + " fields, got " + std::to_string(fields.size()));
        std::vector<std::int64_t> row;
        for (const auto& [text, col] : fields) {
            std::int64_t v = 0;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || ptr != text.data() + text.size())
                fail(source, line_no, col, "expected an integer count, got '" + text + "'");
            if (v < 0) fail(source, line_no, col, "negative count " + text);
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw DataError(source + ": panel needs at least two time rows");
    CountMatrix counts(static_cast<Index>(labels.size()), static_cast<Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t i = 0; i < labels.size(); ++i)
            counts(static_cast<Index>(i), static_cast<Index>(t)) = rows[t][i];
    return CountPanel(std::move(counts), labels);
}

CountPanel read_panel_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_panel_csv(in, path.string());
}

void write_panel_csv(const CountPanel& panel, std::ostream& out) {
    for (Index i = 0; i < panel.n_nodes(); ++i) {
        const auto& l = panel.labels()[static_cast<std::size_t>(i)];
        if (l.find_first_of(",\n\r") != std::string::npos) throw DataError("node label '" + l + "' is not CSV-safe");
        out << (i ? "," : "") << l;
    }
    out << '\n';
    for (Index t = 0; t < panel.n_times(); ++t) {
        for (Index i = 0; i < panel.n_nodes(); ++i) out << (i ? "," : "") << panel(i, t);
        out << '\n';
    }
}

CovariateMatrix parse_covariates_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(source + ": empty covariate file");
    CovariateMatrix cov;
    cov.names = header_names(line, source, "covariate name");
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != cov.names.size())
            fail(source, line_no, 1,
                 "expected " + std::to_string(cov.names.size()) + " fields, got " + std::to_string(fields.size()));
        std::vector<double> row;
        for (const auto& [text, col] : fields) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
                fail(source, line_no, col, "expected a finite number, got '" + text + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    cov.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(cov.names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < cov.names.size(); ++k)
            cov.values(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
    cov.validate();
    return cov;
}

CovariateMatrix read_covariates_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_covariates_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const ModelConfig& c) {
    Json j;
    j["alpha_mode"] = std::string(to_string(c.alpha_mode));
    j["beta_mode"] = std::string(to_string(c.beta_mode));
    j["eta_mode"] = std::string(to_string(c.eta_mode));
    j["seasonal_lag"] = c.seasonal_lag;
    j["covariates"] = c.covariate_names;
    j["interaction_mode"] = std::string(to_string(c.interaction_mode));
    j["latent_dim"] = kLatentDim;
    return j;
}

ModelConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    static const std::vector<std::string> known = {"alpha_mode", "beta_mode",        "eta_mode",  "seasonal_lag",
                                                   "covariates", "interaction_mode", "latent_dim"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown model config field '" + key + "'");
    ModelConfig c;
    try {
        if (j.contains("alpha_mode")) c.alpha_mode = sharing_mode_from_string(j.at("alpha_mode").get<std::string>());
        if (j.contains("beta_mode")) c.beta_mode = sharing_mode_from_string(j.at("beta_mode").get<std::string>());
        if (j.contains("eta_mode")) c.eta_mode = seasonal_mode_from_string(j.at("eta_mode").get<std::string>());
        if (j.contains("seasonal_lag")) c.seasonal_lag = j.at("seasonal_lag").get<int>();
        if (j.contains("covariates")) c.covariate_names = j.at("covariates").get<std::vector<std::string>>();
        if (j.contains("interaction_mode"))
            c.interaction_mode = interaction_mode_from_string(j.at("interaction_mode").get<std::string>());
        if (j.contains("latent_dim") && j.at("latent_dim").get<int>() != kLatentDim)
            throw ConfigError("latent_dim must be 2");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model config: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const ParameterSet& p, const ModelConfig& config, const std::vector<std::string>& labels) {
    const Index n = static_cast<Index>(labels.size());
    p.validate(config, n);
    Json j;
    j["format"] = "tslpm.params.v1";
    j["config"] = to_json(config);
    j["node_labels"] = labels;
    j["alpha"] = vector_json(p.alpha);
    j["beta"] = vector_json(p.beta);
    j["Z"] = p.Z.size() ? matrix_json(p.Z) : Json(nullptr);
    j["eta"] = vector_json(p.eta);
    j["delta"] = vector_json(p.delta);
    j["full_B"] = p.full_B.size() ? matrix_json(p.full_B) : Json(nullptr);
    return j;
}

ParameterSet params_from_json(const Json& j, ModelConfig* config_out) {
    require_format(j, "tslpm.params.v1");
    const ModelConfig config = config_from_json(require(j, "config"));
    const auto labels = require(j, "node_labels").get<std::vector<std::string>>();
    ParameterSet p;
    p.alpha = vector_from_json(require(j, "alpha"), "alpha");
    p.beta = vector_from_json(require(j, "beta"), "beta");
    p.Z = matrix_from_json(require(j, "Z"), kLatentDim, "Z");
    p.eta = vector_from_json(require(j, "eta"), "eta");
    p.delta = vector_from_json(require(j, "delta"), "delta");
    p.full_B = matrix_from_json(require(j, "full_B"), static_cast<Index>(labels.size()), "full_B");
    p.validate(config, static_cast<Index>(labels.size()));
    if (config_out) *config_out = config;
    return p;
}

Json to_json(const StabilityReport& r) {
    Json j;
    j["l1_norm"] = r.l1_norm;
    j["spectral_radius"] = r.spectral_radius;
    j["gershgorin_lower"] = r.gershgorin_lower;
    j["gershgorin_upper"] = r.gershgorin_upper;
    Json discs = Json::array();
    for (const auto& d : r.discs) discs.push_back({{"center", d.center}, {"radius", d.radius}});
    j["discs"] = discs;
    j["satisfies_l1"] = r.satisfies_l1;
    j["satisfies_spectral"] = r.satisfies_spectral;
    j["satisfies_gershgorin_bound"] = r.satisfies_gershgorin_bound;
    return j;
}

Json to_json(const MapFit& fit, const ModelConfig& config, const std::vector<std::string>& labels) {
    Json j;
    j["format"] = "tslpm.mapfit.v1";
    j["log_posterior"] = fit.log_posterior;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["gradient_norm"] = fit.gradient_norm;
    j["message"] = fit.message;
    j["best_start"] = fit.best_start;
    j["params"] = to_json(fit.params, config, labels);
    return j;
}

Json to_json(const Chain& c) {
    if (c.samples.size() != c.log_posteriors.size()) throw StateError("chain samples and log posteriors differ in length");
    Json j;
    j["format"] = "tslpm.chain.v1";
    j["config"] = to_json(c.config);
    j["n_nodes"] = c.layout.n_nodes();
    Json blocks = Json::array();
    for (const auto& b : c.layout.blocks()) blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"length", b.length}});
    j["layout"] = blocks;
    Json names = Json::array();
    for (Index k = 0; k < c.layout.size(); ++k) names.push_back(c.layout.coordinate_name(k));
    j["coordinate_names"] = names;
    j["seed"] = c.seed;
    j["step_size"] = c.step_size;
    j["n_leapfrog"] = c.n_leapfrog;
    j["metric"] = c.metric;
    j["accept_rate"] = c.accept_rate;
    j["divergences"] = c.divergences;
    j["warmup_divergences"] = c.warmup_divergences;
    j["aligned"] = c.aligned;
    j["log_posteriors"] = c.log_posteriors;
    Json samples = Json::array();
    for (const auto& s : c.samples) samples.push_back(vector_json(s));
    j["samples"] = samples;
    return j;
}

Chain chain_from_json(const Json& j) {
    require_format(j, "tslpm.chain.v1");
    Chain c;
    c.config = config_from_json(require(j, "config"));
    c.layout = FlatLayout(c.config, require(j, "n_nodes").get<Index>());
    const auto& blocks = require(j, "layout");
    if (blocks.size() != c.layout.blocks().size()) throw DataError("chain layout does not match its config");
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& b = c.layout.blocks()[k];
        if (blocks[k].at("name").get<std::string>() != b.name || blocks[k].at("offset").get<Index>() != b.offset ||
            blocks[k].at("length").get<Index>() != b.length)
            throw DataError("chain layout block " + std::to_string(k) + " does not match its config");
    }
    c.seed = require(j, "seed").get<std::uint64_t>();
    c.step_size = json_number(require(j, "step_size"));
    c.n_leapfrog = require(j, "n_leapfrog").get<int>();
    c.metric = j.value("metric", std::string("identity"));
    if (c.metric != "identity" && c.metric != "laplace") throw DataError("unknown chain metric '" + c.metric + "'");
    c.accept_rate = json_number(require(j, "accept_rate"));
    c.divergences = require(j, "divergences").get<int>();
    c.warmup_divergences = j.value("warmup_divergences", 0);
    c.aligned = require(j, "aligned").get<bool>();
    c.log_posteriors = require(j, "log_posteriors").get<std::vector<double>>();
    for (const auto& s : require(j, "samples")) {
        VectorXd v = vector_from_json(s, "samples");
        if (v.size() != c.layout.size()) throw DataError("chain sample has the wrong length");
        c.samples.push_back(std::move(v));
    }
    if (c.samples.size() != c.log_posteriors.size()) throw DataError("chain samples and log_posteriors differ in length");
    return c;
}

Json to_json(const ChainDiagnostics& d, const std::vector<Chain>& chains) {
    Json j;
    j["format"] = "tslpm.diagnostics.v1";
    j["n_chains"] = chains.size();
    j["divergences"] = d.divergence_count;
    Json acc = Json::array();
    for (const auto& c : chains) acc.push_back(c.accept_rate);
    j["accept_rate"] = acc;
    Json params = Json::array();
    for (std::size_t k = 0; k < d.names.size(); ++k) {
        const auto i = static_cast<Index>(k);
        params.push_back({{"name", d.names[k]},
                          {"rhat", number_or_null(d.rhat(i))},
                          {"rhat_defined", static_cast<bool>(d.rhat_defined[k])},
                          {"ess", number_or_null(d.ess(i))}});
    }
    j["parameters"] = params;
    return j;
}

Json to_json(const ForecastResult& r, const std::vector<std::string>& labels) {
    Json j;
    j["format"] = "tslpm.forecast.v1";
    j["mode"] = std::string(to_string(r.mode));
    j["draws_used"] = r.draws_used;
    j["level"] = r.level;
    j["node_labels"] = labels;
    j["point"] = matrix_json(r.point);
    j["lower"] = matrix_json(r.lower);
    j["upper"] = matrix_json(r.upper);
    return j;
}

Json to_json(const DicResult& r) {
    Json j;
    j["format"] = "tslpm.dic.v1";
    j["dic"] = r.dic;
    j["p_d"] = r.p_d;
    j["d_bar"] = r.d_bar;
    j["d_at_mean"] = r.d_at_mean;
    j["dic_mean_interaction"] = r.dic_mean_interaction;
    j["p_d_mean_interaction"] = r.p_d_mean_interaction;
    j["d_at_mean_interaction"] = r.d_at_mean_interaction;
    j["negative_p_d"] = r.negative_p_d;
    return j;
}

Json read_json_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace tslpm::io
