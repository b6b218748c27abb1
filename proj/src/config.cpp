#include "vaxequity/config.hpp"

#include "vaxequity/errors.hpp"

#include <fstream>
#include <set>

namespace vaxequity {

std::filesystem::path RunConfig::resolved_model_path() const {
    return model_path.empty() ? output_dir / "model.json" : model_path;
}

alloc::SolverSettings RunConfig::solver_settings() const {
    alloc::SolverSettings s;
    s.max_iters = max_iters;
    s.tolerance = tolerance;
    s.starts = starts;
    s.seed = seed;
    return s;
}

regression::SplitSpec RunConfig::split_spec() const {
    return {train_fraction, split_scheme, seed};
}

nlohmann::json to_json(const RunConfig &cfg) {
    nlohmann::json j;
    j["data_path"] = cfg.data_path.string();
    j["static_path"] = cfg.static_path.string();
    j["model_path"] = cfg.model_path.string();
    j["output_dir"] = cfg.output_dir.string();
    j["columns"] = {{"country_id", cfg.columns.country_id},
                    {"name", cfg.columns.name},
                    {"date", cfg.columns.date},
                    {"new_cases", cfg.columns.new_cases},
                    {"new_deaths", cfg.columns.new_deaths},
                    {"total_deaths", cfg.columns.total_deaths},
                    {"people_vaccinated", cfg.columns.people_vaccinated}};
    j["window"] = {{"start", format_date(cfg.window_start)},
                   {"end", cfg.window_end ? nlohmann::json(format_date(*cfg.window_end)) : nlohmann::json()}};
    j["global_normalization"] = cfg.global_normalization;
    j["train_fraction"] = cfg.train_fraction;
    j["split_scheme"] = regression::to_string(cfg.split_scheme);
    j["ridge_epsilon"] = cfg.ridge_epsilon;
    j["seed"] = cfg.seed;
    j["budget_doses"] = cfg.budget_doses;
    j["allocation_date"] = format_date(cfg.allocation_date);
    j["omegas"] = cfg.omegas;
    j["solver"] = {{"max_iters", cfg.max_iters}, {"tol", cfg.tolerance}, {"starts", cfg.starts}};
    return j;
}

namespace {

template <typename T>
void read_if(const nlohmann::json &j, const char *key, T &out) {
    if (j.contains(key) && !j.at(key).is_null()) {
        out = j.at(key).get<T>();
    }
}

void reject_unknown(const nlohmann::json &j, std::initializer_list<const char *> known, const std::string &where) {
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto &[key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw SchemaError("unknown config key '" + where + key + "'");
        }
    }
}

} // namespace

RunConfig config_from_json(const nlohmann::json &j) {
    if (!j.is_object()) {
        throw SchemaError("config must be a JSON object");
    }
    RunConfig cfg;
    try {
        reject_unknown(j,
                       {"data_path", "static_path", "model_path", "output_dir", "columns", "window",
                        "global_normalization", "train_fraction", "split_scheme", "ridge_epsilon", "seed",
                        "budget_doses", "allocation_date", "omegas", "solver"},
                       "");
        if (j.contains("data_path")) {
            cfg.data_path = j.at("data_path").get<std::string>();
        }
        if (j.contains("static_path")) {
            cfg.static_path = j.at("static_path").get<std::string>();
        }
        if (j.contains("model_path")) {
            cfg.model_path = j.at("model_path").get<std::string>();
        }
        if (j.contains("output_dir")) {
            cfg.output_dir = j.at("output_dir").get<std::string>();
        }
        if (j.contains("columns")) {
            const auto &c = j.at("columns");
            reject_unknown(c, {"country_id", "name", "date", "new_cases", "new_deaths", "total_deaths",
                               "people_vaccinated"},
                           "columns.");
            read_if(c, "country_id", cfg.columns.country_id);
            read_if(c, "name", cfg.columns.name);
            read_if(c, "date", cfg.columns.date);
            read_if(c, "new_cases", cfg.columns.new_cases);
            read_if(c, "new_deaths", cfg.columns.new_deaths);
            read_if(c, "total_deaths", cfg.columns.total_deaths);
            read_if(c, "people_vaccinated", cfg.columns.people_vaccinated);
        }
        if (j.contains("window")) {
            const auto &w = j.at("window");
            reject_unknown(w, {"start", "end"}, "window.");
            if (w.contains("start") && !w.at("start").is_null()) {
                cfg.window_start = parse_date_or_throw(w.at("start").get<std::string>());
            }
            if (w.contains("end") && !w.at("end").is_null()) {
                cfg.window_end = parse_date_or_throw(w.at("end").get<std::string>());
            }
        }
        read_if(j, "global_normalization", cfg.global_normalization);
        read_if(j, "train_fraction", cfg.train_fraction);
        if (j.contains("split_scheme")) {
            cfg.split_scheme = regression::parse_split_scheme(j.at("split_scheme").get<std::string>());
        }
        read_if(j, "ridge_epsilon", cfg.ridge_epsilon);
        read_if(j, "seed", cfg.seed);
        read_if(j, "budget_doses", cfg.budget_doses);
        if (j.contains("allocation_date")) {
            cfg.allocation_date = parse_date_or_throw(j.at("allocation_date").get<std::string>());
        }
        read_if(j, "omegas", cfg.omegas);
        if (j.contains("solver")) {
            const auto &s = j.at("solver");
            reject_unknown(s, {"max_iters", "tol", "starts"}, "solver.");
            read_if(s, "max_iters", cfg.max_iters);
            read_if(s, "tol", cfg.tolerance);
            read_if(s, "starts", cfg.starts);
        }
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError(std::string("malformed config: ") + e.what());
    } catch (const DomainError &e) {
        throw SchemaError(std::string("malformed config: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void validate(const RunConfig &cfg) {
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw DomainError("train_fraction must lie in (0, 1)");
    }
    if (!(cfg.budget_doses >= 0.0)) {
        throw DomainError("budget_doses must be >= 0");
    }
    if (cfg.omegas.empty()) {
        throw DomainError("omegas must not be empty");
    }
    for (double w : cfg.omegas) {
        if (!(w >= 0.0)) {
            throw DomainError("every omega must be >= 0");
        }
    }
    if (cfg.window_end && *cfg.window_end < cfg.window_start) {
        throw DomainError("window end precedes window start");
    }
    if (cfg.max_iters < 0 || !(cfg.tolerance > 0.0) || cfg.starts < 1) {
        throw DomainError("solver settings need max_iters >= 0, tol > 0 and starts >= 1");
    }
    if (!(cfg.ridge_epsilon >= 0.0)) {
        throw DomainError("ridge_epsilon must be >= 0");
    }
}

} // namespace vaxequity
