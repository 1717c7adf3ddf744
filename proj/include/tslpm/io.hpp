#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <string>

#include "tslpm/forecast.hpp"
#include "tslpm/selection.hpp"
#include "tslpm/stability.hpp"

namespace tslpm::io {

using Json = nlohmann::ordered_json;

// Panel CSV: header row of node labels, then one row of integer counts per
// time step, oldest first.
CountPanel parse_panel_csv(std::istream& in, const std::string& source = "<input>");
CountPanel read_panel_csv(const std::filesystem::path& path);
void write_panel_csv(const CountPanel& panel, std::ostream& out);

// Covariate CSV: header row of covariate names, then one row per node in
// panel order. Values are returned as read (not standardised).
CovariateMatrix parse_covariates_csv(std::istream& in, const std::string& source = "<input>");
CovariateMatrix read_covariates_csv(const std::filesystem::path& path);

Json to_json(const ModelConfig& config);
ModelConfig config_from_json(const Json& j);

Json to_json(const ParameterSet& params, const ModelConfig& config, const std::vector<std::string>& labels);
/// Reads a parameter file; the embedded config must be present.
ParameterSet params_from_json(const Json& j, ModelConfig* config_out = nullptr);

Json to_json(const StabilityReport& report);
Json to_json(const MapFit& fit, const ModelConfig& config, const std::vector<std::string>& labels);
Json to_json(const Chain& chain);
Chain chain_from_json(const Json& j);
Json to_json(const ChainDiagnostics& diag, const std::vector<Chain>& chains);
Json to_json(const ForecastResult& result, const std::vector<std::string>& labels);
Json to_json(const DicResult& result);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);
/// Writes `text` to `path`, throwing DataError if the file cannot be opened.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace tslpm::io
