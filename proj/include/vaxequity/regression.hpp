#pragma once

#include "vaxequity/ingest.hpp"
#include "vaxequity/risk_metrics.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vaxequity::regression {

inline constexpr std::size_t kFeatureCount = 5; // 1, D, V, H, I
inline constexpr double kDefaultRidge = 1e-8;

using Row = std::array<double, kFeatureCount>;
using Coefficients = std::array<double, kFeatureCount>; // beta0..beta4

/// Regression design for one country: columns [1, death_rate, vacc_rate,
/// hospital_beds_per_thousand, human_development_index], target is the
/// normalized risk.
struct DesignMatrix {
    std::vector<Row> rows;
    std::vector<double> target;

    std::size_t size() const { return rows.size(); }
};

enum class SplitScheme { chronological, random };

std::string to_string(SplitScheme s);
/// Throws DomainError for anything other than "chronological" or "random".
SplitScheme parse_split_scheme(const std::string &s);

struct SplitSpec {
    double train_fraction = 0.7;
    SplitScheme scheme = SplitScheme::chronological;
    std::uint64_t seed = 0;

    bool operator==(const SplitSpec &) const = default;
};

struct FitMetrics {
    double mae = 0.0;
    double mse = 0.0;
    std::optional<double> r_squared; // nullopt when the actual values are constant
};

struct RiskModelFit {
    std::string country_id;
    Coefficients beta{};
    double beta0_tilde = 0.0;
    double hospital_beds_per_thousand = 0.0;
    double human_development_index = 0.0;
    FitMetrics metrics;
    SplitSpec split;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    risk::NormParams risk_params;
    risk::NormParams death_rate_params;
    risk::NormParams vacc_rate_params;
};

/// Throws EmptyInputError for an empty panel.
DesignMatrix build_design_matrix(const risk::RiskPanel &panel, const ingest::CountryStatic &attrs);

/// Splits into train and test. The train part has round(fraction * n) rows,
/// clamped to [1, n-1]. The chronological scheme takes the leading rows; the
/// random scheme draws a seeded permutation and keeps each part in original
/// row order. Throws DomainError for fraction outside (0,1) or n < 2.
std::pair<DesignMatrix, DesignMatrix> split_train_test(const DesignMatrix &m, double fraction,
                                                       SplitScheme scheme, std::uint64_t seed);

/// Least squares through the normal equations.
///
/// Columns that are linearly dependent on earlier columns (inside a single
/// country H and I are constant, hence collinear with the intercept) receive
/// `ridge_epsilon` on their diagonal entry of the scaled Gram matrix, which
/// drives their coefficient to zero and leaves the others at the exact
/// least-squares solution. Throws RankError when fewer than five distinct
/// rows are available.
Coefficients fit_ols(const DesignMatrix &train, double ridge_epsilon = kDefaultRidge);

/// beta0 + beta1*D + beta2*V + beta3*H + beta4*I
double predict(const Coefficients &beta, double death_rate, double vacc_rate, double h, double i);
double predict(const RiskModelFit &fit, double death_rate, double vacc_rate, double h, double i);
std::vector<double> predict(const Coefficients &beta, const DesignMatrix &m);

/// Throws DomainError on empty or mismatched inputs.
FitMetrics eval_metrics(std::span<const double> pred, std::span<const double> actual);

/// beta0 + beta3*H + beta4*I
double collapse_intercept(const Coefficients &beta, const ingest::CountryStatic &attrs);

/// Design, split, fit and test-set evaluation for one country. A random split
/// draws its permutation from derive_seed(split.seed, "split:<country_id>").
RiskModelFit fit_country(const risk::RiskPanel &panel, const ingest::CountryStatic &attrs,
                         const SplitSpec &split, double ridge_epsilon = kDefaultRidge);

/// One JSON record per fit, in the given order.
void write_model_file(const std::filesystem::path &path, const std::vector<RiskModelFit> &fits);
std::vector<RiskModelFit> read_model_file(const std::filesystem::path &path);

} // namespace vaxequity::regression
