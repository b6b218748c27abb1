#include "synthetic.hpp"

#include "vaxequity/config.hpp"
#include "vaxequity/errors.hpp"

#include <doctest.h>

#include <fstream>

using namespace vaxequity;

TEST_CASE("defaults materialize from a minimal config") {
    const auto cfg = config_from_json({{"data_path", "d.csv"}, {"static_path", "s.csv"}});
    CHECK(cfg.data_path == "d.csv");
    CHECK(cfg.static_path == "s.csv");
    CHECK(cfg.train_fraction == 0.7);
    CHECK(cfg.split_scheme == regression::SplitScheme::chronological);
    CHECK(cfg.budget_doses == 3'000'000.0);
    CHECK(format_date(cfg.allocation_date) == "2021-04-10");
    CHECK(format_date(cfg.window_start) == "2021-01-01");
    CHECK_FALSE(cfg.window_end);
    CHECK(cfg.omegas == std::vector<double>{0, 8, 20, 50});
    CHECK(cfg.max_iters == 10000);
    CHECK(cfg.tolerance == 1e-8);
    CHECK(cfg.starts == 8);
    CHECK(cfg.resolved_model_path() == std::filesystem::path("out") / "model.json");
    CHECK_NOTHROW(validate(cfg));

    const auto s = cfg.solver_settings();
    CHECK(s.max_iters == 10000);
    CHECK(s.starts == 8);
    CHECK(cfg.split_spec() == regression::SplitSpec{});
}

TEST_CASE("config round trip") {
    RunConfig cfg;
    cfg.data_path = "data/owid.csv";
    cfg.static_path = "data/static.csv";
    cfg.model_path = "m.json";
    cfg.output_dir = "results";
    cfg.columns.new_cases = "cases";
    cfg.window_start = parse_date_or_throw("2021-02-03");
    cfg.window_end = parse_date_or_throw("2021-10-31");
    cfg.global_normalization = true;
    cfg.train_fraction = 0.65;
    cfg.split_scheme = regression::SplitScheme::random;
    cfg.ridge_epsilon = 3e-9;
    cfg.seed = 18446744073709551615ull;
    cfg.budget_doses = 1234567.5;
    cfg.allocation_date = parse_date_or_throw("2021-05-01");
    cfg.omegas = {0.1, 1.0 / 3.0, 7};
    cfg.max_iters = 42;
    cfg.tolerance = 1e-7;
    cfg.starts = 3;

    CHECK(config_from_json(to_json(cfg)) == cfg);
    CHECK(config_from_json(nlohmann::json::parse(to_json(cfg).dump())) == cfg);
    CHECK(config_from_json(to_json(RunConfig{})) == RunConfig{});

    const auto path = synth::temp_dir("config") / "run.json";
    std::ofstream(path) << to_json(cfg).dump(2);
    CHECK(load_config(path) == cfg);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(config_from_json({{"budget", 5}}), SchemaError);
    CHECK_THROWS_AS(config_from_json({{"solver", {{"tolerance", 1e-3}}}}), SchemaError);
    CHECK_THROWS_AS(config_from_json({{"train_fraction", "high"}}), SchemaError);
    CHECK_THROWS_AS(config_from_json({{"split_scheme", "stratified"}}), SchemaError);
    CHECK_THROWS_AS(config_from_json({{"allocation_date", "2021-13-40"}}), SchemaError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), SchemaError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);

    const auto path = synth::temp_dir("config_bad") / "bad.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_config(path), SchemaError);
}

TEST_CASE("validate ranges") {
    RunConfig cfg;
    cfg.train_fraction = 1.0;
    CHECK_THROWS_AS(validate(cfg), DomainError);
    cfg = RunConfig{};
    cfg.budget_doses = -1;
    CHECK_THROWS_AS(validate(cfg), DomainError);
    cfg = RunConfig{};
    cfg.omegas = {};
    CHECK_THROWS_AS(validate(cfg), DomainError);
    cfg.omegas = {1, -2};
    CHECK_THROWS_AS(validate(cfg), DomainError);
    cfg = RunConfig{};
    cfg.window_end = parse_date_or_throw("2020-12-31");
    CHECK_THROWS_AS(validate(cfg), DomainError);
    cfg = RunConfig{};
    cfg.starts = 0;
    CHECK_THROWS_AS(validate(cfg), DomainError);
    cfg = RunConfig{};
    cfg.budget_doses = 0;
    CHECK_NOTHROW(validate(cfg));
}
