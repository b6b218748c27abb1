#include "vaxequity/ingest.hpp"

#include "vaxequity/csv.hpp"
#include "vaxequity/errors.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace vaxequity::ingest {

CleaningStats &CleaningStats::operator+=(const CleaningStats &o) {
    negatives_zeroed += o.negatives_zeroed;
    missing_filled += o.missing_filled;
    cumulative_repaired += o.cumulative_repaired;
    gap_days_inserted += o.gap_days_inserted;
    return *this;
}

namespace {

std::size_t require_column(const csv::Table &table, const std::string &name,
                           const std::filesystem::path &path) {
    auto idx = table.column(name);
    if (!idx) {
        throw SchemaError("'" + path.string() + "' has no column '" + name + "'");
    }
    return *idx;
}

void merge_into(DailyRecord &dst, const DailyRecord &src) {
    auto take = [](std::optional<double> &a, const std::optional<double> &b) {
        if (b) {
            a = b;
        }
    };
    take(dst.new_cases, src.new_cases);
    take(dst.new_deaths, src.new_deaths);
    take(dst.total_deaths, src.total_deaths);
    take(dst.people_vaccinated, src.people_vaccinated);
}

double clean_delta(const std::optional<double> &value, CleaningStats &stats) {
    if (!value) {
        ++stats.missing_filled;
        return 0.0;
    }
    if (*value < 0.0) {
        ++stats.negatives_zeroed;
        return 0.0;
    }
    return *value;
}

double clean_cumulative(const std::optional<double> &value, double running_max,
                        CleaningStats &stats) {
    if (!value) {
        ++stats.missing_filled;
        return running_max;
    }
    if (*value < running_max) {
        ++stats.cumulative_repaired;
        return running_max;
    }
    return *value;
}

} // namespace

std::vector<CountrySeries> parse_country_csv(const std::filesystem::path &path,
                                             const ColumnMapping &schema) {
    if (!std::filesystem::exists(path)) {
        throw IoError("data file '" + path.string() + "' not found");
    }
    const auto table = csv::read_file(path);

    const auto id_col = require_column(table, schema.country_id, path);
    const auto date_col = require_column(table, schema.date, path);
    const auto cases_col = require_column(table, schema.new_cases, path);
    const auto deaths_col = require_column(table, schema.new_deaths, path);
    const auto total_deaths_col = require_column(table, schema.total_deaths, path);
    const auto vacc_col = require_column(table, schema.people_vaccinated, path);
    const auto name_col = table.column(schema.name);

    if (table.rows.empty()) {
        throw EmptyInputError("'" + path.string() + "' has a header but no data rows");
    }

    std::map<std::string, CountrySeries> by_id;
    for (const auto &row : table.rows) {
        const auto &id = row[id_col];
        if (id.empty()) {
            continue;
        }
        auto date = parse_date(row[date_col]);
        if (!date) {
            continue;
        }
        auto &series = by_id[id];
        if (series.info.country_id.empty()) {
            series.info.country_id = id;
            series.info.name = name_col ? row[*name_col] : id;
        }
        series.records.push_back(DailyRecord{
            .date = *date,
            .new_cases = csv::parse_number(row[cases_col]),
            .new_deaths = csv::parse_number(row[deaths_col]),
            .total_deaths = csv::parse_number(row[total_deaths_col]),
            .people_vaccinated = csv::parse_number(row[vacc_col]),
        });
    }
    if (by_id.empty()) {
        throw EmptyInputError("'" + path.string() + "' has no rows with a country id and a valid date");
    }

    std::vector<CountrySeries> out;
    out.reserve(by_id.size());
    for (auto &[id, series] : by_id) {
        auto &recs = series.records;
        std::stable_sort(recs.begin(), recs.end(),
                         [](const DailyRecord &a, const DailyRecord &b) { return a.date < b.date; });
        std::vector<DailyRecord> unique;
        unique.reserve(recs.size());
        for (const auto &r : recs) {
            if (!unique.empty() && unique.back().date == r.date) {
                merge_into(unique.back(), r);
            } else {
                unique.push_back(r);
            }
        }
        recs = std::move(unique);
        out.push_back(std::move(series));
    }
    return out;
}

void validate(const CountryStatic &attrs) {
    if (!(attrs.population > 0.0)) {
        throw ValidationError("country '" + attrs.country_id + "': population must be > 0");
    }
    if (!(attrs.hospital_beds_per_thousand >= 0.0)) {
        throw ValidationError("country '" + attrs.country_id +
                              "': hospital_beds_per_thousand must be >= 0");
    }
    if (!(attrs.human_development_index >= 0.0 && attrs.human_development_index <= 1.0)) {
        throw ValidationError("country '" + attrs.country_id +
                              "': human_development_index must lie in [0, 1]");
    }
}

std::map<std::string, CountryStatic> parse_static_attributes(const std::filesystem::path &path) {
    if (!std::filesystem::exists(path)) {
        throw IoError("static attribute file '" + path.string() + "' not found");
    }
    const auto table = csv::read_file(path);
    const auto id_col = require_column(table, "country_id", path);
    const auto name_col = require_column(table, "name", path);
    const auto pop_col = require_column(table, "population", path);
    const auto beds_col = require_column(table, "hospital_beds_per_thousand", path);
    const auto hdi_col = require_column(table, "human_development_index", path);
    if (table.rows.empty()) {
        throw EmptyInputError("'" + path.string() + "' has a header but no data rows");
    }

    std::map<std::string, CountryStatic> out;
    for (const auto &row : table.rows) {
        CountryStatic attrs;
        attrs.country_id = row[id_col];
        if (attrs.country_id.empty()) {
            throw ValidationError("'" + path.string() + "' has a row without country_id");
        }
        attrs.name = row[name_col];
        auto pop = csv::parse_number(row[pop_col]);
        if (!pop) {
            throw ValidationError("country '" + attrs.country_id + "': population missing or unparseable");
        }
        attrs.population = *pop;
        attrs.hospital_beds_per_thousand = csv::parse_number(row[beds_col]).value_or(0.0);
        attrs.human_development_index = csv::parse_number(row[hdi_col]).value_or(0.0);
        validate(attrs);
        out[attrs.country_id] = std::move(attrs);
    }
    return out;
}

CountrySeries clean_series(const CountrySeries &raw) {
    CleaningStats ignored;
    return clean_series(raw, ignored);
}

CountrySeries clean_series(const CountrySeries &raw, CleaningStats &stats) {
    CountrySeries out;
    out.info = raw.info;
    if (raw.records.empty()) {
        return out;
    }
    const auto days = (raw.records.back().date - raw.records.front().date).count() + 1;
    out.records.reserve(static_cast<std::size_t>(std::max<long>(days, 0)));

    double deaths_max = 0.0;
    double vacc_max = 0.0;
    for (const auto &r : raw.records) {
        // Fill any calendar gap before r with zero-delta, carried-cumulative days.
        while (!out.records.empty() && next_day(out.records.back().date) < r.date) {
            out.records.push_back(DailyRecord{
                .date = next_day(out.records.back().date),
                .new_cases = 0.0,
                .new_deaths = 0.0,
                .total_deaths = deaths_max,
                .people_vaccinated = vacc_max,
            });
            ++stats.gap_days_inserted;
        }
        DailyRecord c;
        c.date = r.date;
        c.new_cases = clean_delta(r.new_cases, stats);
        c.new_deaths = clean_delta(r.new_deaths, stats);
        deaths_max = clean_cumulative(r.total_deaths, deaths_max, stats);
        vacc_max = clean_cumulative(r.people_vaccinated, vacc_max, stats);
        c.total_deaths = deaths_max;
        c.people_vaccinated = vacc_max;
        out.records.push_back(c);
    }
    return out;
}

CountrySeries filter_window(const CountrySeries &series, Date start, Date end) {
    if (start > end) {
        throw DomainError("window start " + format_date(start) + " is after end " + format_date(end));
    }
    CountrySeries out;
    out.info = series.info;
    std::copy_if(series.records.begin(), series.records.end(), std::back_inserter(out.records),
                 [&](const DailyRecord &r) { return r.date >= start && r.date <= end; });
    if (out.records.empty()) {
        throw EmptyInputError("country '" + series.info.country_id + "' has no records in " +
                              format_date(start) + ".." + format_date(end));
    }
    return out;
}

std::vector<CountrySeries> attach_static(std::vector<CountrySeries> series,
                                         const std::map<std::string, CountryStatic> &attrs,
                                         std::vector<std::string> *missing) {
    std::vector<CountrySeries> out;
    out.reserve(series.size());
    for (auto &s : series) {
        auto it = attrs.find(s.info.country_id);
        if (it == attrs.end()) {
            if (missing) {
                missing->push_back(s.info.country_id);
            }
            continue;
        }
        s.info = it->second;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace vaxequity::ingest
