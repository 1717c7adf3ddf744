#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "tslpm/error.hpp"
#include "tslpm/io.hpp"

using namespace tslpm;

namespace {

std::string error_of(const std::string& text) {
    std::istringstream in(text);
    try {
        io::parse_panel_csv(in, "panel.csv");
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("panel CSV round trip") {
    CountMatrix y(2, 3);
    y << 1, 0, 7, 3, 12, 4;
    const CountPanel p(y, {"north", "south"});
    std::ostringstream out;
    io::write_panel_csv(p, out);
    CHECK(out.str() == "north,south\n1,3\n0,12\n7,4\n");
    std::istringstream in(out.str());
    const CountPanel q = io::parse_panel_csv(in);
    CHECK(q.counts() == p.counts());
    CHECK(q.labels() == p.labels());
}

TEST_CASE("panel CSV tolerates CRLF and trailing blank lines") {
    std::istringstream in("a, b\r\n1, 2\r\n3,4\r\n\r\n");
    const CountPanel p = io::parse_panel_csv(in);
    CHECK(p.n_times() == 2);
    CHECK(p(1, 1) == 4);
    CHECK(p.labels()[1] == "b");
}

TEST_CASE("malformed panels report line and column") {
    CHECK(error_of("a,b\n1,2\n3,x\n") == "panel.csv:3:3: expected an integer count, got 'x'");
    CHECK(error_of("a,b\n1,2\n3\n") == "panel.csv:3:1: expected 2 fields, got 1");
    CHECK(error_of("a,b\n1,-2\n3,4\n") == "panel.csv:2:3: negative count -2");
    CHECK(error_of("a,b\n1,2.5\n3,4\n").find("panel.csv:2:3") == 0);
    CHECK(error_of("a,,b\n") == "panel.csv:1:3: empty node label");
    CHECK(error_of("a,b\n1,2\n").find("at least two") != std::string::npos);
    CHECK(error_of("") == "panel.csv: empty panel file");
}

TEST_CASE("covariate CSV") {
    std::istringstream in("income,density\n1.5,2\n-0.5,3e2\n");
    const CovariateMatrix c = io::parse_covariates_csv(in);
    CHECK(c.names == std::vector<std::string>{"income", "density"});
    CHECK(c.values(1, 1) == 300.0);
    std::istringstream bad("x\n1\nnan\n");
    CHECK_THROWS_AS(io::parse_covariates_csv(bad), DataError);
}

TEST_CASE("config JSON round trip and strictness") {
    for (int k = 0; k < 48; ++k) {
        const ModelConfig c = testing::config_variant(k);
        CHECK(io::config_from_json(io::to_json(c)) == c);
    }
    CHECK(io::config_from_json(io::Json::object()) == ModelConfig{});
    CHECK_THROWS_AS(io::config_from_json(io::Json{{"beta", "shared"}}), ConfigError);
    CHECK_THROWS_AS(io::config_from_json(io::Json{{"beta_mode", "sometimes"}}), ConfigError);
    CHECK_THROWS_AS(io::config_from_json(io::Json{{"seasonal_lag", 3}}), ConfigError);
}

TEST_CASE("parameter JSON round trip is bitwise exact") {
    for (int k = 0; k < 48; k += 3) {
        const ModelConfig c = testing::config_variant(k);
        ParameterSet p = testing::modest_parameters(c, 3, k);
        if (p.full_B.size()) p.full_B.diagonal().setZero();
        const std::vector<std::string> labels = {"a", "b", "c"};
        const std::string text = io::to_json(p, c, labels).dump();
        ModelConfig back_config;
        const ParameterSet q = io::params_from_json(io::Json::parse(text), &back_config);
        CHECK(q == p);
        CHECK(back_config == c);
    }
}

TEST_CASE("chain JSON round trip") {
    Chain ch;
    ch.config = testing::config_variant(5);
    ch.layout = FlatLayout(ch.config, 3);
    Rng rng(1);
    for (int s = 0; s < 5; ++s) {
        VectorXd v(ch.layout.size());
        for (Index k = 0; k < v.size(); ++k) v(k) = rng.normal();
        ch.samples.push_back(v);
        ch.log_posteriors.push_back(rng.normal());
    }
    ch.accept_rate = 0.8125;
    ch.step_size = 0.0123;
    ch.n_leapfrog = 20;
    ch.seed = 0xFFFFFFFFFFFFFFFFull;
    ch.divergences = 3;
    ch.warmup_divergences = 2;
    ch.aligned = true;
    ch.metric = "laplace";
    const Chain back = io::chain_from_json(io::Json::parse(io::to_json(ch).dump()));
    CHECK(back.samples == ch.samples);
    CHECK(back.log_posteriors == ch.log_posteriors);
    CHECK(back.layout == ch.layout);
    CHECK(back.config == ch.config);
    CHECK(back.seed == ch.seed);
    CHECK(back.aligned);
    CHECK(back.divergences == 3);
    CHECK(back.warmup_divergences == 2);
    CHECK(back.metric == "laplace");

    io::Json older = io::to_json(ch);
    older.erase("metric");
    CHECK(io::chain_from_json(older).metric == "identity");
    older["metric"] = "diagonal";
    CHECK_THROWS_AS(io::chain_from_json(older), DataError);

    io::Json broken = io::to_json(ch);
    broken["samples"][0].erase(0);
    CHECK_THROWS_AS(io::chain_from_json(broken), DataError);
    io::Json wrong = io::to_json(ch);
    wrong["format"] = "something.else";
    CHECK_THROWS_AS(io::chain_from_json(wrong), DataError);
}

TEST_CASE("diagnostics JSON writes undefined R-hat as null") {
    ChainDiagnostics d;
    d.names = {"alpha"};
    d.rhat = VectorXd::Constant(1, std::numeric_limits<double>::quiet_NaN());
    d.ess = VectorXd::Constant(1, 10.0);
    d.rhat_defined = {false};
    const io::Json j = io::to_json(d, {});
    CHECK(j["parameters"][0]["rhat"].is_null());
    CHECK(j["parameters"][0]["rhat_defined"] == false);
}
