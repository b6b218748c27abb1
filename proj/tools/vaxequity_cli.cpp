// Command-line front end: ingest, train, allocate, sweep, report.

#include "vaxequity/config.hpp"
#include "vaxequity/errors.hpp"
#include "vaxequity/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kIo = 2,
    kSchema = 3,
    kInfeasible = 4,
};

struct Overrides {
    std::string config;
    std::string data;
    std::string static_attrs;
    std::string model;
    std::string output_dir;
    std::string window_start;
    std::string window_end;
    std::string allocation_date;
    std::string split_scheme;
    std::string omegas;
    std::optional<double> train_fraction;
    std::optional<double> budget;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iters;
    std::optional<double> tol;
    std::optional<int> starts;
    bool global_norm = false;
    bool verbose = false;
    bool dump_config = false;
};

void add_options(CLI::App &cmd, Overrides &o) {
    cmd.add_option("--config", o.config, "JSON run configuration");
    cmd.add_option("--data", o.data, "time-series CSV");
    cmd.add_option("--static", o.static_attrs, "static attribute CSV");
    cmd.add_option("--model", o.model, "model JSON path (default <output-dir>/model.json)");
    cmd.add_option("--output-dir", o.output_dir, "artifact directory");
    cmd.add_option("--window-start", o.window_start, "first analysis day, YYYY-MM-DD");
    cmd.add_option("--window-end", o.window_end, "last analysis day, YYYY-MM-DD");
    cmd.add_option("--allocation-date", o.allocation_date, "distribution day, YYYY-MM-DD");
    cmd.add_option("--split-scheme", o.split_scheme, "chronological or random");
    cmd.add_option("--omegas", o.omegas, "comma-separated fairness weights");
    cmd.add_option("--train-fraction", o.train_fraction, "training share of each country's days");
    cmd.add_option("--budget", o.budget, "doses available on the distribution day");
    cmd.add_option("--seed", o.seed, "run seed");
    cmd.add_option("--max-iters", o.max_iters, "projected-gradient iteration limit");
    cmd.add_option("--tol", o.tol, "projected-gradient norm tolerance");
    cmd.add_option("--starts", o.starts, "number of multi-starts");
    cmd.add_flag("--global-norm", o.global_norm, "normalize features across all countries");
    cmd.add_flag("--verbose", o.verbose, "print solver traces");
    cmd.add_flag("--dump-config", o.dump_config, "print the effective configuration and exit");
}

std::vector<double> parse_omegas(const std::string &text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception &) {
            throw vaxequity::DomainError("bad omega '" + item + "'");
        }
    }
    return out;
}

vaxequity::RunConfig resolve(const Overrides &o) {
    using namespace vaxequity;
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (!o.data.empty()) cfg.data_path = o.data;
    if (!o.static_attrs.empty()) cfg.static_path = o.static_attrs;
    if (!o.model.empty()) cfg.model_path = o.model;
    if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
    if (!o.window_start.empty()) cfg.window_start = parse_date_or_throw(o.window_start);
    if (!o.window_end.empty()) cfg.window_end = parse_date_or_throw(o.window_end);
    if (!o.allocation_date.empty()) cfg.allocation_date = parse_date_or_throw(o.allocation_date);
    if (!o.split_scheme.empty()) cfg.split_scheme = regression::parse_split_scheme(o.split_scheme);
    if (!o.omegas.empty()) cfg.omegas = parse_omegas(o.omegas);
    if (o.train_fraction) cfg.train_fraction = *o.train_fraction;
    if (o.budget) cfg.budget_doses = *o.budget;
    if (o.seed) cfg.seed = *o.seed;
    if (o.max_iters) cfg.max_iters = *o.max_iters;
    if (o.tol) cfg.tolerance = *o.tol;
    if (o.starts) cfg.starts = *o.starts;
    if (o.global_norm) cfg.global_normalization = true;
    return cfg;
}

void print_solver(const vaxequity::alloc::AllocationResult &r) {
    const auto &s = r.report;
    std::cerr << "solver: best start " << s.best_start << " of " << s.starts << ", " << s.iterations
              << " iterations (" << s.total_iterations << " total), pg norm " << s.pg_norm
              << (s.converged ? ", converged" : ", NOT converged") << '\n';
    if (!s.diagnostic.empty()) {
        std::cerr << "solver: " << s.diagnostic << '\n';
    }
}

int run(const std::string &command, const Overrides &o) {
    using namespace vaxequity;
    const auto cfg = resolve(o);
    if (o.dump_config) {
        std::cout << to_json(cfg).dump(2) << '\n';
        return kOk;
    }
    if (command == "ingest") {
        pipeline::run_ingest(cfg, std::cout);
    } else if (command == "train") {
        pipeline::run_train(cfg, std::cout);
    } else if (command == "allocate") {
        auto outcome = pipeline::run_allocate(cfg, std::cout);
        if (o.verbose) {
            print_solver(outcome.result);
        }
    } else if (command == "sweep") {
        auto entries = pipeline::run_sweep(cfg, std::cout);
        if (o.verbose) {
            for (const auto &e : entries) {
                if (e.result) {
                    std::cerr << "omega " << e.omega << ": ";
                    print_solver(*e.result);
                }
            }
        }
    } else if (command == "report") {
        std::cout << pipeline::run_report(cfg);
    }
    return kOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Pandemic risk modelling and fairness-aware vaccine allocation"};
    app.require_subcommand(1);
    Overrides overrides;
    for (const char *name : {"ingest", "train", "allocate", "sweep", "report"}) {
        static const std::map<std::string, std::string> help = {
            {"ingest", "clean time series and write per-country risk panels"},
            {"train", "fit per-country linear risk models"},
            {"allocate", "solve the fairness-weighted allocation at the first omega"},
            {"sweep", "solve for every omega and tabulate the trade-off"},
            {"report", "summarize existing allocation artifacts"},
        };
        add_options(*app.add_subcommand(name, help.at(name)), overrides);
    }
    CLI11_PARSE(app, argc, argv);

    const auto command = app.get_subcommands().front()->get_name();
    try {
        return run(command, overrides);
    } catch (const vaxequity::IoError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const vaxequity::InfeasibleError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInfeasible;
    } catch (const vaxequity::SchemaError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kSchema;
    } catch (const vaxequity::EmptyInputError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kSchema;
    } catch (const vaxequity::ValidationError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kSchema;
    } catch (const std::filesystem::filesystem_error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
