#pragma once

#include "vaxequity/date.hpp"
#include "vaxequity/ingest.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vaxequity::risk {

/// Trailing-window length of the risk metric, in days.
inline constexpr int kRiskWindowDays = 28;

/// Bounds used by min-max normalization; kept so values can be mapped back
/// to raw units.
struct NormParams {
    double min = 0.0;
    double max = 0.0;

    double normalize(double x) const { return max > min ? (x - min) / (max - min) : 0.0; }
    double denormalize(double y) const { return max > min ? min + y * (max - min) : min; }
    double range() const { return max - min; }

    bool operator==(const NormParams &) const = default;
};

struct Normalized {
    std::vector<double> values;
    NormParams params;
};

struct RateSeries {
    std::vector<double> values;
    bool clipped = false; // some day exceeded the population and was clipped to 1
};

/// Daily features of one country over its analysis window.
struct RiskPanel {
    std::string country_id;
    std::vector<Date> dates;
    std::vector<double> risk_raw;
    std::vector<double> death_rate_raw;
    std::vector<double> vacc_rate_raw;
    std::vector<double> risk;
    std::vector<double> death_rate;
    std::vector<double> vacc_rate;
    NormParams risk_params;
    NormParams death_rate_params;
    NormParams vacc_rate_params;
    bool rates_clipped = false;

    std::size_t size() const { return dates.size(); }
    bool operator==(const RiskPanel &) const = default;
};

/// Sliding 28-day risk: out[t] = sum(new_cases[max(0,t-27)..t]) / (28 * population).
/// Head-of-series windows are still divided by 28.
/// Throws DomainError if population <= 0 or the sequence is empty.
std::vector<double> risk_series(std::span<const double> new_cases, double population);

/// Per-capita rate of a cumulative count, clipped to [0, 1].
/// Throws DomainError if population <= 0.
RateSeries rate_series(std::span<const double> cumulative, double population);

/// (x - min) / (max - min), or all zeros when the sequence is constant.
Normalized min_max_normalize(std::span<const double> x);

/// Assembles the panel for a cleaned, gap-free series with static attributes
/// attached. Normalization is per country.
RiskPanel build_panel(const ingest::CountrySeries &series);

/// Panel for the dates in [start, end]. The risk windows draw on the full
/// series, so days early in the window still see 28 days of history; the
/// normalization bounds come from the window only. Throws EmptyInputError
/// when no record falls in the window.
RiskPanel build_panel(const ingest::CountrySeries &series, Date start, Date end);

/// Re-normalizes every panel with bounds pooled across all countries.
void normalize_globally(std::vector<RiskPanel> &panels);

/// Index of `date` in the panel, or -1.
std::ptrdiff_t index_of(const RiskPanel &panel, Date date);

/// Writes date, risk_raw, risk, death_rate_raw, death_rate, vacc_rate_raw, vacc_rate.
void write_panel_csv(const std::filesystem::path &path, const RiskPanel &panel);

/// Reads a panel written by write_panel_csv. Normalization bounds are not
/// part of the file and must be supplied.
RiskPanel read_panel_csv(const std::filesystem::path &path, std::string country_id,
                         const NormParams &risk_params, const NormParams &death_rate_params,
                         const NormParams &vacc_rate_params);

} // namespace vaxequity::risk
