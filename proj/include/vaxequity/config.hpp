#pragma once

#include "vaxequity/allocator.hpp"
#include "vaxequity/date.hpp"
#include "vaxequity/ingest.hpp"
#include "vaxequity/regression.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vaxequity {

/// Everything a run needs. Omitted fields keep these defaults; a config with
/// only data_path and static_path set is complete.
struct RunConfig {
    std::filesystem::path data_path;
    std::filesystem::path static_path;
    std::filesystem::path model_path; // empty: <output_dir>/model.json
    std::filesystem::path output_dir = "out";
    ingest::ColumnMapping columns;

    Date window_start = Date{std::chrono::year{2021} / 1 / 1};
    std::optional<Date> window_end; // empty: last available date
    bool global_normalization = false;

    double train_fraction = 0.7;
    regression::SplitScheme split_scheme = regression::SplitScheme::chronological;
    double ridge_epsilon = regression::kDefaultRidge;
    std::uint64_t seed = 0;

    double budget_doses = 3'000'000.0;
    Date allocation_date = Date{std::chrono::year{2021} / 4 / 10}; // day 100 of 2021
    std::vector<double> omegas{0.0, 8.0, 20.0, 50.0};
    int max_iters = 10000;
    double tolerance = 1e-8;
    int starts = 8;

    std::filesystem::path resolved_model_path() const;
    alloc::SolverSettings solver_settings() const;
    regression::SplitSpec split_spec() const;

    bool operator==(const RunConfig &) const = default;
};

nlohmann::json to_json(const RunConfig &cfg);

/// Missing keys keep their defaults; unknown keys and malformed values raise
/// SchemaError.
RunConfig config_from_json(const nlohmann::json &j);

/// Throws IoError if unreadable, SchemaError if malformed.
RunConfig load_config(const std::filesystem::path &path);

/// Checks ranges (train fraction, budget, omegas, solver settings) and
/// throws DomainError on the first violation.
void validate(const RunConfig &cfg);

} // namespace vaxequity
