#include "vaxequity/regression.hpp"

#include "vaxequity/errors.hpp"
#include "vaxequity/seeding.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace vaxequity::regression {

namespace {

constexpr std::size_t N = kFeatureCount;
using Matrix = std::array<std::array<double, N>, N>;

// Relative pivot below which a column counts as dependent on earlier ones.
constexpr double kDependenceTol = 1e-9;

// In-place Cholesky; returns false if a pivot is not positive.
bool cholesky(Matrix &a) {
    for (std::size_t j = 0; j < N; ++j) {
        double d = a[j][j];
        for (std::size_t k = 0; k < j; ++k) {
            d -= a[j][k] * a[j][k];
        }
        if (!(d > 0.0)) {
            return false;
        }
        a[j][j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < N; ++i) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / a[j][j];
        }
    }
    return true;
}

Coefficients cholesky_solve(const Matrix &l, const Coefficients &b) {
    Coefficients y{};
    for (std::size_t i = 0; i < N; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    Coefficients x{};
    for (std::size_t ii = N; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < N; ++k) {
            s -= l[k][ii] * x[k];
        }
        x[ii] = s / l[ii][ii];
    }
    return x;
}

// Marks columns whose Gram pivot collapses once the earlier independent
// columns are projected out.
std::array<bool, N> dependent_columns(const Matrix &gram) {
    std::array<bool, N> dependent{};
    Matrix l{};
    for (std::size_t j = 0; j < N; ++j) {
        double d = gram[j][j];
        for (std::size_t k = 0; k < j; ++k) {
            if (!dependent[k]) {
                d -= l[j][k] * l[j][k];
            }
        }
        if (!(gram[j][j] > 0.0) || d <= kDependenceTol * gram[j][j]) {
            dependent[j] = true;
            continue;
        }
        l[j][j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < N; ++i) {
            double s = gram[i][j];
            for (std::size_t k = 0; k < j; ++k) {
                if (!dependent[k]) {
                    s -= l[i][k] * l[j][k];
                }
            }
            l[i][j] = s / l[j][j];
        }
    }
    return dependent;
}

DesignMatrix take_rows(const DesignMatrix &m, const std::vector<std::size_t> &idx) {
    DesignMatrix out;
    out.rows.reserve(idx.size());
    out.target.reserve(idx.size());
    for (auto i : idx) {
        out.rows.push_back(m.rows[i]);
        out.target.push_back(m.target[i]);
    }
    return out;
}

nlohmann::json params_json(const risk::NormParams &p) { return {{"min", p.min}, {"max", p.max}}; }

risk::NormParams params_from(const nlohmann::json &j) {
    return {j.at("min").get<double>(), j.at("max").get<double>()};
}

} // namespace

std::string to_string(SplitScheme s) {
    return s == SplitScheme::chronological ? "chronological" : "random";
}

SplitScheme parse_split_scheme(const std::string &s) {
    if (s == "chronological") {
        return SplitScheme::chronological;
    }
    if (s == "random") {
        return SplitScheme::random;
    }
    throw DomainError("unknown split scheme '" + s + "' (expected chronological or random)");
}

DesignMatrix build_design_matrix(const risk::RiskPanel &panel, const ingest::CountryStatic &attrs) {
    if (panel.size() == 0) {
        throw EmptyInputError("country '" + panel.country_id + "' has an empty panel");
    }
    DesignMatrix m;
    m.rows.reserve(panel.size());
    for (std::size_t t = 0; t < panel.size(); ++t) {
        m.rows.push_back(Row{1.0, panel.death_rate[t], panel.vacc_rate[t],
                             attrs.hospital_beds_per_thousand, attrs.human_development_index});
    }
    m.target = panel.risk;
    return m;
}

std::pair<DesignMatrix, DesignMatrix> split_train_test(const DesignMatrix &m, double fraction,
                                                       SplitScheme scheme, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw DomainError("train fraction must lie in (0, 1)");
    }
    const std::size_t n = m.size();
    if (n < 2) {
        throw DomainError("a train/test split needs at least 2 rows");
    }
    auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (scheme == SplitScheme::random) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = n - 1; i > 0; --i) {
            std::swap(order[i], order[uniform_index(rng, i + 1)]);
        }
    }
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {take_rows(m, train), take_rows(m, test)};
}

Coefficients fit_ols(const DesignMatrix &train, double ridge_epsilon) {
    if (!(ridge_epsilon >= 0.0)) {
        throw DomainError("ridge epsilon must be >= 0");
    }
    const std::size_t n = train.size();
    if (train.target.size() != n) {
        throw DomainError("design rows and target differ in length");
    }
    {
        auto rows = train.rows;
        std::sort(rows.begin(), rows.end());
        const auto distinct = static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
        if (distinct < N) {
            throw RankError("only " + std::to_string(distinct) +
                            " distinct design rows for 5 coefficients; use a larger window");
        }
    }

    // Scaled normal equations: (X^T X / n) beta = X^T y / n.
    std::array<std::array<long double, N>, N> gram_acc{};
    std::array<long double, N> rhs_acc{};
    for (std::size_t r = 0; r < n; ++r) {
        const auto &x = train.rows[r];
        for (std::size_t i = 0; i < N; ++i) {
            rhs_acc[i] += static_cast<long double>(x[i]) * train.target[r];
            for (std::size_t j = 0; j <= i; ++j) {
                gram_acc[i][j] += static_cast<long double>(x[i]) * x[j];
            }
        }
    }
    Matrix gram{};
    Coefficients rhs{};
    for (std::size_t i = 0; i < N; ++i) {
        rhs[i] = static_cast<double>(rhs_acc[i] / n);
        for (std::size_t j = 0; j <= i; ++j) {
            gram[i][j] = gram[j][i] = static_cast<double>(gram_acc[i][j] / n);
        }
    }

    const auto dependent = dependent_columns(gram);
    Matrix system = gram;
    for (std::size_t j = 0; j < N; ++j) {
        if (dependent[j]) {
            system[j][j] += ridge_epsilon;
        }
    }
    Matrix l = system;
    if (!cholesky(l)) {
        throw RankError("normal equations are singular; increase the ridge or the window");
    }
    Coefficients beta = cholesky_solve(l, rhs);
    // Iterative refinement against the regularized system.
    for (int pass = 0; pass < 3; ++pass) {
        Coefficients resid{};
        for (std::size_t i = 0; i < N; ++i) {
            long double s = rhs[i];
            for (std::size_t j = 0; j < N; ++j) {
                s -= static_cast<long double>(system[i][j]) * beta[j];
            }
            resid[i] = static_cast<double>(s);
        }
        const auto delta = cholesky_solve(l, resid);
        for (std::size_t i = 0; i < N; ++i) {
            beta[i] += delta[i];
        }
    }
    return beta;
}

double predict(const Coefficients &beta, double death_rate, double vacc_rate, double h, double i) {
    return beta[0] + beta[1] * death_rate + beta[2] * vacc_rate + beta[3] * h + beta[4] * i;
}

double predict(const RiskModelFit &fit, double death_rate, double vacc_rate, double h, double i) {
    return predict(fit.beta, death_rate, vacc_rate, h, i);
}

std::vector<double> predict(const Coefficients &beta, const DesignMatrix &m) {
    std::vector<double> out;
    out.reserve(m.size());
    for (const auto &x : m.rows) {
        out.push_back(predict(beta, x[1], x[2], x[3], x[4]));
    }
    return out;
}

FitMetrics eval_metrics(std::span<const double> pred, std::span<const double> actual) {
    if (pred.empty() || pred.size() != actual.size()) {
        throw DomainError("metrics need equal, non-zero lengths");
    }
    const double n = static_cast<double>(pred.size());
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - actual[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        mean += actual[i];
    }
    mean /= n;
    double ss_tot = 0.0;
    for (double a : actual) {
        ss_tot += (a - mean) * (a - mean);
    }
    FitMetrics m;
    m.mae = abs_sum / n;
    m.mse = sq_sum / n;
    if (ss_tot > 0.0) {
        m.r_squared = 1.0 - sq_sum / ss_tot;
    }
    return m;
}

double collapse_intercept(const Coefficients &beta, const ingest::CountryStatic &attrs) {
    return beta[0] + beta[3] * attrs.hospital_beds_per_thousand + beta[4] * attrs.human_development_index;
}

RiskModelFit fit_country(const risk::RiskPanel &panel, const ingest::CountryStatic &attrs,
                         const SplitSpec &split, double ridge_epsilon) {
    const auto design = build_design_matrix(panel, attrs);
    RiskModelFit fit;
    fit.country_id = attrs.country_id.empty() ? panel.country_id : attrs.country_id;
    auto [train, test] = split_train_test(design, split.train_fraction, split.scheme,
                                          derive_seed(split.seed, "split:" + fit.country_id));
    fit.beta = fit_ols(train, ridge_epsilon);
    fit.beta0_tilde = collapse_intercept(fit.beta, attrs);
    fit.hospital_beds_per_thousand = attrs.hospital_beds_per_thousand;
    fit.human_development_index = attrs.human_development_index;
    fit.metrics = eval_metrics(predict(fit.beta, test), test.target);
    fit.split = split;
    fit.train_rows = train.size();
    fit.test_rows = test.size();
    fit.risk_params = panel.risk_params;
    fit.death_rate_params = panel.death_rate_params;
    fit.vacc_rate_params = panel.vacc_rate_params;
    return fit;
}

void write_model_file(const std::filesystem::path &path, const std::vector<RiskModelFit> &fits) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto &f : fits) {
        nlohmann::json r;
        r["country_id"] = f.country_id;
        r["beta0"] = f.beta[0];
        r["beta0_tilde"] = f.beta0_tilde;
        r["beta1"] = f.beta[1];
        r["beta2"] = f.beta[2];
        r["beta3"] = f.beta[3];
        r["beta4"] = f.beta[4];
        r["hospital_beds_per_thousand"] = f.hospital_beds_per_thousand;
        r["human_development_index"] = f.human_development_index;
        r["mae"] = f.metrics.mae;
        r["mse"] = f.metrics.mse;
        r["r_squared"] = f.metrics.r_squared ? nlohmann::json(*f.metrics.r_squared) : nlohmann::json();
        r["norm_params"] = {{"risk", params_json(f.risk_params)},
                            {"death_rate", params_json(f.death_rate_params)},
                            {"vacc_rate", params_json(f.vacc_rate_params)}};
        r["split"] = {{"train_fraction", f.split.train_fraction},
                      {"scheme", to_string(f.split.scheme)},
                      {"seed", f.split.seed},
                      {"train_rows", f.train_rows},
                      {"test_rows", f.test_rows}};
        records.push_back(std::move(r));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write model file '" + path.string() + "'");
    }
    out << records.dump(2) << '\n';
}

std::vector<RiskModelFit> read_model_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open model file '" + path.string() + "'");
    }
    nlohmann::json records;
    try {
        records = nlohmann::json::parse(in);
        std::vector<RiskModelFit> fits;
        for (const auto &r : records) {
            RiskModelFit f;
            f.country_id = r.at("country_id").get<std::string>();
            f.beta = {r.at("beta0").get<double>(), r.at("beta1").get<double>(), r.at("beta2").get<double>(),
                      r.at("beta3").get<double>(), r.at("beta4").get<double>()};
            f.beta0_tilde = r.at("beta0_tilde").get<double>();
            f.hospital_beds_per_thousand = r.value("hospital_beds_per_thousand", 0.0);
            f.human_development_index = r.value("human_development_index", 0.0);
            f.metrics.mae = r.at("mae").get<double>();
            f.metrics.mse = r.at("mse").get<double>();
            if (!r.at("r_squared").is_null()) {
                f.metrics.r_squared = r.at("r_squared").get<double>();
            }
            const auto &np = r.at("norm_params");
            f.risk_params = params_from(np.at("risk"));
            f.death_rate_params = params_from(np.at("death_rate"));
            f.vacc_rate_params = params_from(np.at("vacc_rate"));
            const auto &sp = r.at("split");
            f.split.train_fraction = sp.at("train_fraction").get<double>();
            f.split.scheme = parse_split_scheme(sp.at("scheme").get<std::string>());
            f.split.seed = sp.at("seed").get<std::uint64_t>();
            f.train_rows = sp.value("train_rows", std::size_t{0});
            f.test_rows = sp.value("test_rows", std::size_t{0});
            fits.push_back(std::move(f));
        }
        return fits;
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError("malformed model file '" + path.string() + "': " + e.what());
    }
}

} // namespace vaxequity::regression
