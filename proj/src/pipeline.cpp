#include "vaxequity/pipeline.hpp"

#include "vaxequity/csv.hpp"
#include "vaxequity/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace vaxequity::pipeline {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path &path, const char *what) {
    if (path.empty() || !fs::is_regular_file(path)) {
        throw IoError(std::string(what) + " '" + path.string() + "' not found");
    }
}

std::ofstream open_out(const fs::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    return out;
}

nlohmann::json read_json(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

nlohmann::json params_json(const risk::NormParams &p) { return {{"min", p.min}, {"max", p.max}}; }

risk::NormParams params_from(const nlohmann::json &j) {
    return {j.at("min").get<double>(), j.at("max").get<double>()};
}

double median(std::vector<double> xs) {
    if (xs.empty()) {
        return 0.0;
    }
    std::sort(xs.begin(), xs.end());
    const auto n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double mean(const std::vector<double> &xs) {
    double s = 0.0;
    for (double x : xs) {
        s += x;
    }
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

std::string fmt(double x) { return csv::format_number(x); }

nlohmann::json report_json(const alloc::SolverReport &r) {
    return {{"iterations", r.iterations}, {"total_iterations", r.total_iterations},
            {"converged", r.converged},   {"pg_norm", r.pg_norm},
            {"starts", r.starts},         {"best_start", r.best_start},
            {"diagnostic", r.diagnostic}};
}

} // namespace

IngestOutcome run_ingest(const RunConfig &cfg, std::ostream &log) {
    validate(cfg);
    require_file(cfg.data_path, "data file");
    require_file(cfg.static_path, "static attribute file");

    auto raw = ingest::parse_country_csv(cfg.data_path, cfg.columns);
    const auto attrs = ingest::parse_static_attributes(cfg.static_path);

    IngestOutcome outcome;
    std::vector<std::string> missing;
    auto series = ingest::attach_static(std::move(raw), attrs, &missing);
    for (const auto &id : missing) {
        outcome.skipped.push_back(id + ": no static attributes");
    }

    Date last{};
    for (const auto &s : series) {
        if (!s.records.empty()) {
            last = std::max(last, s.records.back().date);
        }
    }
    const Date window_end = cfg.window_end.value_or(last);

    std::vector<risk::RiskPanel> panels;
    std::vector<ingest::CleaningStats> stats;
    std::vector<const ingest::CountryStatic *> infos;
    for (const auto &s : series) {
        ingest::CleaningStats st;
        auto cleaned = ingest::clean_series(s, st);
        try {
            panels.push_back(risk::build_panel(cleaned, cfg.window_start, window_end));
            stats.push_back(st);
            infos.push_back(&attrs.at(s.info.country_id));
        } catch (const EmptyInputError &e) {
            outcome.skipped.push_back(s.info.country_id + ": " + e.what());
        }
    }
    if (panels.empty()) {
        throw EmptyInputError("no country has records in the analysis window");
    }
    if (cfg.global_normalization) {
        risk::normalize_globally(panels);
    }

    const auto panel_dir = cfg.output_dir / kPanelDir;
    fs::create_directories(panel_dir);
    nlohmann::json countries = nlohmann::json::array();
    for (std::size_t i = 0; i < panels.size(); ++i) {
        const auto &p = panels[i];
        const auto &info = *infos[i];
        risk::write_panel_csv(panel_dir / (p.country_id + ".csv"), p);
        countries.push_back({
            {"country_id", p.country_id},
            {"name", info.name},
            {"population", info.population},
            {"hospital_beds_per_thousand", info.hospital_beds_per_thousand},
            {"human_development_index", info.human_development_index},
            {"first_date", format_date(p.dates.front())},
            {"last_date", format_date(p.dates.back())},
            {"days", p.size()},
            {"cleaned_cells",
             {{"negatives_zeroed", stats[i].negatives_zeroed},
              {"missing_filled", stats[i].missing_filled},
              {"cumulative_repaired", stats[i].cumulative_repaired},
              {"gap_days_inserted", stats[i].gap_days_inserted}}},
            {"rates_clipped", p.rates_clipped},
            {"norm_params",
             {{"risk", params_json(p.risk_params)},
              {"death_rate", params_json(p.death_rate_params)},
              {"vacc_rate", params_json(p.vacc_rate_params)}}},
        });
        if (p.rates_clipped) {
            log << "warning: " << p.country_id << ": rate above 1 clipped\n";
        }
    }
    nlohmann::json summary = {
        {"window", {{"start", format_date(cfg.window_start)}, {"end", format_date(window_end)}}},
        {"global_normalization", cfg.global_normalization},
        {"countries", countries},
        {"skipped", outcome.skipped},
    };
    open_out(cfg.output_dir / kIngestSummary) << summary.dump(2) << '\n';

    outcome.countries = panels.size();
    log << "ingest: " << panels.size() << " countries, window " << format_date(cfg.window_start) << ".."
        << format_date(window_end) << '\n';
    for (std::size_t i = 0; i < panels.size(); ++i) {
        log << "  " << panels[i].country_id << ' ' << format_date(panels[i].dates.front()) << ".."
            << format_date(panels[i].dates.back()) << ", " << stats[i].total() << " cells cleaned\n";
    }
    for (const auto &s : outcome.skipped) {
        log << "  skipped " << s << '\n';
    }
    return outcome;
}

PanelSet load_panels(const RunConfig &cfg) {
    const auto summary_path = cfg.output_dir / kIngestSummary;
    require_file(summary_path, "ingest summary");
    const auto summary = read_json(summary_path);
    PanelSet set;
    try {
        for (const auto &c : summary.at("countries")) {
            ingest::CountryStatic info;
            info.country_id = c.at("country_id").get<std::string>();
            info.name = c.at("name").get<std::string>();
            info.population = c.at("population").get<double>();
            info.hospital_beds_per_thousand = c.at("hospital_beds_per_thousand").get<double>();
            info.human_development_index = c.at("human_development_index").get<double>();
            const auto &np = c.at("norm_params");
            const auto path = cfg.output_dir / kPanelDir / (info.country_id + ".csv");
            require_file(path, "panel");
            set.panels.push_back(risk::read_panel_csv(path, info.country_id, params_from(np.at("risk")),
                                                      params_from(np.at("death_rate")),
                                                      params_from(np.at("vacc_rate"))));
            set.attrs.emplace(info.country_id, std::move(info));
        }
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError("malformed ingest summary: " + std::string(e.what()));
    }
    return set;
}

TrainOutcome run_train(const RunConfig &cfg, std::ostream &log) {
    validate(cfg);
    const auto set = load_panels(cfg);
    TrainOutcome outcome;
    for (const auto &panel : set.panels) {
        try {
            outcome.fits.push_back(regression::fit_country(panel, set.attrs.at(panel.country_id),
                                                           cfg.split_spec(), cfg.ridge_epsilon));
        } catch (const Error &e) {
            outcome.failures.push_back(panel.country_id + ": " + e.what());
        }
    }
    for (const auto &f : outcome.failures) {
        log << "warning: fit failed for " << f << '\n';
    }
    if (outcome.fits.empty()) {
        throw RankError("no country could be fit");
    }

    const auto model_path = cfg.resolved_model_path();
    if (model_path.has_parent_path()) {
        fs::create_directories(model_path.parent_path());
    }
    regression::write_model_file(model_path, outcome.fits);

    std::vector<double> maes;
    std::vector<double> mses;
    std::vector<double> r2s;
    std::size_t negative_beta2 = 0;
    auto metrics = open_out(cfg.output_dir / kMetricsCsv);
    metrics << "country_id,mae,mse,r_squared\n";
    for (const auto &f : outcome.fits) {
        maes.push_back(f.metrics.mae);
        mses.push_back(f.metrics.mse);
        if (f.metrics.r_squared) {
            r2s.push_back(*f.metrics.r_squared);
        }
        if (f.beta[2] < 0.0) {
            ++negative_beta2;
        }
        metrics << csv::escape(f.country_id) << ',' << fmt(f.metrics.mae) << ',' << fmt(f.metrics.mse) << ','
                << (f.metrics.r_squared ? fmt(*f.metrics.r_squared) : std::string()) << '\n';
    }
    auto r2_cell = [&](double v) { return r2s.empty() ? std::string() : fmt(v); };
    metrics << "average," << fmt(mean(maes)) << ',' << fmt(mean(mses)) << ',' << r2_cell(mean(r2s)) << '\n';
    metrics << "median," << fmt(median(maes)) << ',' << fmt(median(mses)) << ',' << r2_cell(median(r2s))
            << '\n';

    const double negative_fraction = static_cast<double>(negative_beta2) / static_cast<double>(outcome.fits.size());
    nlohmann::json report = {
        {"fitted", outcome.fits.size()},
        {"failures", outcome.failures},
        {"mae_average", mean(maes)},
        {"mae_median", median(maes)},
        {"mse_average", mean(mses)},
        {"mse_median", median(mses)},
        {"r_squared_average", r2s.empty() ? nlohmann::json() : nlohmann::json(mean(r2s))},
        {"r_squared_median", r2s.empty() ? nlohmann::json() : nlohmann::json(median(r2s))},
        {"negative_beta2_fraction", negative_fraction},
    };
    open_out(cfg.output_dir / kTrainReport) << report.dump(2) << '\n';

    log << "train: " << outcome.fits.size() << " fits, average test MAE " << fmt(mean(maes))
        << ", negative beta2 in " << negative_beta2 << '/' << outcome.fits.size() << '\n';
    return outcome;
}

alloc::AllocationProblem build_problem(const RunConfig &cfg, const PanelSet &panels,
                                       const std::vector<regression::RiskModelFit> &fits, double omega,
                                       std::vector<std::string> &warnings) {
    alloc::AllocationProblem problem;
    problem.budget_doses = cfg.budget_doses;
    problem.omega = omega;
    for (const auto &fit : fits) {
        auto it = std::find_if(panels.panels.begin(), panels.panels.end(),
                               [&](const risk::RiskPanel &p) { return p.country_id == fit.country_id; });
        if (it == panels.panels.end()) {
            warnings.push_back(fit.country_id + ": no panel, excluded from allocation");
            continue;
        }
        const auto &panel = *it;
        auto t = risk::index_of(panel, cfg.allocation_date);
        if (t < 0) {
            t = static_cast<std::ptrdiff_t>(panel.size()) - 1;
            warnings.push_back(fit.country_id + ": " + format_date(cfg.allocation_date) +
                               " not in panel, using latest day " + format_date(panel.dates[t]));
        }
        if (t == 0) {
            warnings.push_back(fit.country_id + ": allocation day is the first panel day, prior rate taken from it");
        }
        const auto prev = static_cast<std::size_t>(t > 0 ? t - 1 : 0);

        alloc::CountryTerm term;
        term.country_id = fit.country_id;
        term.beta1 = fit.beta[1];
        const double vrange = fit.vacc_rate_params.range();
        term.beta2 = vrange > 0.0 ? fit.beta[2] / vrange : 0.0;
        term.beta0_tilde = fit.beta0_tilde - term.beta2 * fit.vacc_rate_params.min;
        term.death_rate = panel.death_rate[static_cast<std::size_t>(t)];
        term.v_prev = panel.vacc_rate_raw[prev];
        term.population = panels.attrs.at(fit.country_id).population;
        problem.countries.push_back(std::move(term));
    }
    if (problem.countries.empty()) {
        throw EmptyInputError("no fitted country has a panel");
    }
    return problem;
}

void write_allocation_csv(const fs::path &path, const alloc::AllocationProblem &p,
                          const alloc::AllocationResult &r) {
    const auto rounded = alloc::round_doses(r.doses, p.budget_doses);
    auto out = open_out(path);
    out << "country_id,population,v_prev,v_new,doses,doses_rounded,risk_before,risk_after,risk_reduction\n";
    for (std::size_t j = 0; j < p.countries.size(); ++j) {
        const auto &c = p.countries[j];
        out << csv::escape(c.country_id) << ',' << fmt(c.population) << ',' << fmt(c.v_prev) << ','
            << fmt(r.v_new[j]) << ',' << fmt(r.doses[j]) << ',' << rounded[j] << ',' << fmt(r.risk_before[j])
            << ',' << fmt(r.risk_after[j]) << ',' << fmt(r.risk_reduction[j]) << '\n';
    }
}

AllocateOutcome run_allocate(const RunConfig &cfg, std::ostream &log) {
    validate(cfg);
    const auto model_path = cfg.resolved_model_path();
    require_file(model_path, "model file");
    const auto fits = regression::read_model_file(model_path);
    const auto panels = load_panels(cfg);

    AllocateOutcome outcome;
    outcome.problem = build_problem(cfg, panels, fits, cfg.omegas.front(), outcome.warnings);
    outcome.result = alloc::solve_op_fair(outcome.problem, cfg.solver_settings());
    const auto &r = outcome.result;

    fs::create_directories(cfg.output_dir);
    write_allocation_csv(cfg.output_dir / kAllocationCsv, outcome.problem, r);

    const auto rounded = alloc::round_doses(r.doses, outcome.problem.budget_doses);
    long long rounded_total = 0;
    std::size_t saturated = 0;
    for (std::size_t j = 0; j < r.v_new.size(); ++j) {
        rounded_total += rounded[j];
        if (r.v_new[j] >= 1.0) {
            ++saturated;
        }
    }
    nlohmann::json report = {
        {"config", to_json(cfg)},
        {"omega", outcome.problem.omega},
        {"countries", outcome.problem.j_count()},
        {"solver", report_json(r.report)},
        {"totals",
         {{"budget_doses", outcome.problem.budget_doses},
          {"total_doses", r.total_doses()},
          {"total_doses_rounded", rounded_total},
          {"total_risk_reduction", r.total_risk_reduction()},
          {"jain", r.jain},
          {"objective", r.objective},
          {"countries_saturated", saturated}}},
        {"warnings", outcome.warnings},
    };
    open_out(cfg.output_dir / kAllocationReport) << report.dump(2) << '\n';

    for (const auto &w : outcome.warnings) {
        log << "warning: " << w << '\n';
    }
    if (!r.report.converged) {
        log << "warning: solver did not converge: " << r.report.diagnostic << '\n';
    }
    log << "allocate: omega " << fmt(outcome.problem.omega) << ", " << fmt(r.total_doses()) << " doses, jain "
        << fmt(r.jain) << ", risk reduction " << fmt(r.total_risk_reduction()) << '\n';
    return outcome;
}

void write_sweep_csv(const fs::path &path, const std::vector<alloc::SweepEntry> &entries) {
    auto out = open_out(path);
    out << "omega,jain,total_risk_reduction,converged,iterations,error\n";
    for (const auto &e : entries) {
        out << fmt(e.omega) << ',';
        if (e.result) {
            out << fmt(e.result->jain) << ',' << fmt(e.result->total_risk_reduction()) << ','
                << (e.result->report.converged ? "true" : "false") << ',' << e.result->report.iterations << ",\n";
        } else {
            out << ",,false,0," << csv::escape(e.error) << '\n';
        }
    }
}

std::vector<alloc::SweepEntry> run_sweep(const RunConfig &cfg, std::ostream &log) {
    validate(cfg);
    const auto model_path = cfg.resolved_model_path();
    require_file(model_path, "model file");
    const auto fits = regression::read_model_file(model_path);
    const auto panels = load_panels(cfg);
    std::vector<std::string> warnings;
    const auto problem = build_problem(cfg, panels, fits, 0.0, warnings);
    alloc::validate(problem);
    auto entries = alloc::sweep_omega(problem, cfg.omegas, cfg.solver_settings());

    fs::create_directories(cfg.output_dir);
    write_sweep_csv(cfg.output_dir / kSweepCsv, entries);
    for (const auto &w : warnings) {
        log << "warning: " << w << '\n';
    }
    std::size_t ok = 0;
    for (const auto &e : entries) {
        if (e.result) {
            ++ok;
            log << "sweep: omega " << fmt(e.omega) << " jain " << fmt(e.result->jain) << " risk reduction "
                << fmt(e.result->total_risk_reduction()) << (e.result->report.converged ? "" : " (not converged)")
                << '\n';
        } else {
            log << "sweep: omega " << fmt(e.omega) << " failed: " << e.error << '\n';
        }
    }
    if (ok == 0) {
        throw DomainError("every omega in the sweep failed");
    }
    return entries;
}

std::string run_report(const RunConfig &cfg) {
    const auto csv_path = cfg.output_dir / kAllocationCsv;
    const auto json_path = cfg.output_dir / kAllocationReport;
    require_file(csv_path, "allocation table");
    require_file(json_path, "allocation report");

    const auto table = csv::read_file(csv_path);
    auto col = [&](const char *name) {
        auto i = table.column(name);
        if (!i) {
            throw SchemaError("allocation table has no column '" + std::string(name) + "'");
        }
        return *i;
    };
    const auto doses_col = col("doses");
    const auto rounded_col = col("doses_rounded");
    const auto reduction_col = col("risk_reduction");
    const auto v_new_col = col("v_new");
    double doses = 0.0;
    double rounded = 0.0;
    double reduction = 0.0;
    std::size_t saturated = 0;
    for (const auto &row : table.rows) {
        doses += csv::parse_number(row[doses_col]).value_or(0.0);
        rounded += csv::parse_number(row[rounded_col]).value_or(0.0);
        reduction += csv::parse_number(row[reduction_col]).value_or(0.0);
        if (csv::parse_number(row[v_new_col]).value_or(0.0) >= 1.0) {
            ++saturated;
        }
    }

    const auto report = read_json(json_path);
    std::ostringstream out;
    try {
        const auto &totals = report.at("totals");
        const auto &solver = report.at("solver");
        out << "allocation summary\n";
        out << "  omega:                   " << fmt(report.at("omega").get<double>()) << '\n';
        out << "  countries:               " << table.rows.size() << '\n';
        out << "  budget doses:            " << fmt(totals.at("budget_doses").get<double>()) << '\n';
        out << "  total doses:             " << fmt(doses) << '\n';
        out << "  total doses (rounded):   " << fmt(rounded) << '\n';
        out << "  total risk reduction:    " << fmt(reduction) << '\n';
        out << "  jain index:              " << fmt(totals.at("jain").get<double>()) << '\n';
        out << "  countries at saturation: " << saturated << '\n';
        out << "  solver converged:        " << (solver.at("converged").get<bool>() ? "yes" : "no") << '\n';
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError("malformed allocation report: " + std::string(e.what()));
    }
    return out.str();
}

} // namespace vaxequity::pipeline
