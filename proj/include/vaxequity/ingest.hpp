#pragma once

#include "vaxequity/date.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vaxequity::ingest {

/// One day of a country's epidemic record. Raw records may have missing
/// fields; after clean_series every field is present and non-negative.
struct DailyRecord {
    Date date{};
    std::optional<double> new_cases;         // people/day
    std::optional<double> new_deaths;        // people/day
    std::optional<double> total_deaths;      // cumulative people
    std::optional<double> people_vaccinated; // cumulative people

    bool operator==(const DailyRecord &) const = default;
};

/// Static country attributes. `population` is P_j, `hospital_beds_per_thousand`
/// is H_j and `human_development_index` is I_j.
struct CountryStatic {
    std::string country_id;
    std::string name;
    double population = 0.0;
    double hospital_beds_per_thousand = 0.0;
    double human_development_index = 0.0;

    bool operator==(const CountryStatic &) const = default;
};

struct CountrySeries {
    CountryStatic info;
    std::vector<DailyRecord> records; // strictly increasing dates

    bool operator==(const CountrySeries &) const = default;
};

/// Logical-to-physical column names of the time-series file. Defaults match
/// the Our World in Data export.
struct ColumnMapping {
    std::string country_id = "iso_code";
    std::string name = "location"; // optional column
    std::string date = "date";
    std::string new_cases = "new_cases";
    std::string new_deaths = "new_deaths";
    std::string total_deaths = "total_deaths";
    std::string people_vaccinated = "people_vaccinated";

    bool operator==(const ColumnMapping &) const = default;
};

/// Counts of cells touched by clean_series.
struct CleaningStats {
    std::size_t negatives_zeroed = 0;
    std::size_t missing_filled = 0;
    std::size_t cumulative_repaired = 0;
    std::size_t gap_days_inserted = 0;

    std::size_t total() const {
        return negatives_zeroed + missing_filled + cumulative_repaired + gap_days_inserted;
    }
    CleaningStats &operator+=(const CleaningStats &o);
};

/// Reads a long-format time-series CSV and groups rows by country.
///
/// Countries are returned in ascending country_id order with records sorted
/// by date. Unparseable numeric cells become missing values. Rows whose date
/// cannot be parsed are dropped. Repeated (country, date) rows are merged,
/// later non-missing cells winning.
///
/// Throws IoError if the file cannot be opened, SchemaError naming the first
/// absent mapped column, and EmptyInputError if there are no data rows.
std::vector<CountrySeries> parse_country_csv(const std::filesystem::path &path,
                                             const ColumnMapping &schema = {});

/// Reads the static attribute table (country_id, name, population,
/// hospital_beds_per_thousand, human_development_index). Empty bed or HDI
/// cells are zero-filled; population must be present and positive and HDI
/// must lie in [0,1], otherwise ValidationError names the country.
std::map<std::string, CountryStatic> parse_static_attributes(const std::filesystem::path &path);

/// Checks the CountryStatic invariants, throwing ValidationError.
void validate(const CountryStatic &attrs);

/// Repairs a date-sorted raw series: negative or missing daily counts become
/// 0, missing cumulatives carry the previous value, cumulatives are forced
/// non-decreasing by a running maximum, and calendar gaps are filled with
/// zero-delta days. Total and idempotent.
CountrySeries clean_series(const CountrySeries &raw);
CountrySeries clean_series(const CountrySeries &raw, CleaningStats &stats);

/// Restricts a series to records with start <= date <= end. Throws
/// DomainError if start > end and EmptyInputError if nothing remains.
CountrySeries filter_window(const CountrySeries &series, Date start, Date end);

/// Copies static attributes onto each series by country_id. Series whose id
/// is absent from `attrs` are returned in `missing` and dropped.
std::vector<CountrySeries> attach_static(std::vector<CountrySeries> series,
                                         const std::map<std::string, CountryStatic> &attrs,
                                         std::vector<std::string> *missing = nullptr);

} // namespace vaxequity::ingest
