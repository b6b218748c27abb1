#include "vaxequity/risk_metrics.hpp"

#include "vaxequity/csv.hpp"
#include "vaxequity/errors.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace vaxequity::risk {

namespace {
void require_population(double population) {
    if (!(population > 0.0)) {
        throw DomainError("population must be > 0");
    }
}

void apply_params(std::span<const double> raw, const NormParams &p, std::vector<double> &out) {
    out.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::clamp(p.normalize(raw[i]), 0.0, 1.0);
    }
}
} // namespace

std::vector<double> risk_series(std::span<const double> new_cases, double population) {
    require_population(population);
    if (new_cases.empty()) {
        throw DomainError("risk_series needs at least one day");
    }
    const double denom = kRiskWindowDays * population;
    std::vector<double> out(new_cases.size());
    for (std::size_t t = 0; t < new_cases.size(); ++t) {
        const std::size_t first = t + 1 >= kRiskWindowDays ? t + 1 - kRiskWindowDays : 0;
        double sum = 0.0;
        for (std::size_t k = first; k <= t; ++k) {
            sum += new_cases[k];
        }
        out[t] = sum / denom;
    }
    return out;
}

RateSeries rate_series(std::span<const double> cumulative, double population) {
    require_population(population);
    RateSeries out;
    out.values.resize(cumulative.size());
    for (std::size_t i = 0; i < cumulative.size(); ++i) {
        const double r = cumulative[i] / population;
        if (r > 1.0) {
            out.clipped = true;
        }
        out.values[i] = std::clamp(r, 0.0, 1.0);
    }
    return out;
}

Normalized min_max_normalize(std::span<const double> x) {
    Normalized out;
    if (x.empty()) {
        return out;
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    out.params = NormParams{*lo, *hi};
    out.values.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.values[i] = out.params.normalize(x[i]);
    }
    return out;
}

namespace {

// Raw columns over the whole series; normalized columns left empty.
RiskPanel raw_panel(const ingest::CountrySeries &series) {
    if (series.records.empty()) {
        throw EmptyInputError("country '" + series.info.country_id + "' has no records");
    }
    const auto n = series.records.size();
    std::vector<double> cases(n);
    std::vector<double> deaths(n);
    std::vector<double> vacc(n);
    RiskPanel panel;
    panel.country_id = series.info.country_id;
    panel.dates.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto &r = series.records[i];
        panel.dates[i] = r.date;
        cases[i] = r.new_cases.value_or(0.0);
        deaths[i] = r.total_deaths.value_or(0.0);
        vacc[i] = r.people_vaccinated.value_or(0.0);
    }
    const double pop = series.info.population;
    panel.risk_raw = risk_series(cases, pop);
    auto d = rate_series(deaths, pop);
    auto v = rate_series(vacc, pop);
    panel.death_rate_raw = std::move(d.values);
    panel.vacc_rate_raw = std::move(v.values);
    panel.rates_clipped = d.clipped || v.clipped;
    return panel;
}

void normalize_per_country(RiskPanel &panel) {
    auto nr = min_max_normalize(panel.risk_raw);
    auto nd = min_max_normalize(panel.death_rate_raw);
    auto nv = min_max_normalize(panel.vacc_rate_raw);
    panel.risk = std::move(nr.values);
    panel.death_rate = std::move(nd.values);
    panel.vacc_rate = std::move(nv.values);
    panel.risk_params = nr.params;
    panel.death_rate_params = nd.params;
    panel.vacc_rate_params = nv.params;
}

} // namespace

RiskPanel build_panel(const ingest::CountrySeries &series) {
    auto panel = raw_panel(series);
    normalize_per_country(panel);
    return panel;
}

RiskPanel build_panel(const ingest::CountrySeries &series, Date start, Date end) {
    if (start > end) {
        throw DomainError("window start " + format_date(start) + " is after end " + format_date(end));
    }
    auto full = raw_panel(series);
    const auto first = std::lower_bound(full.dates.begin(), full.dates.end(), start) - full.dates.begin();
    const auto last = std::upper_bound(full.dates.begin(), full.dates.end(), end) - full.dates.begin();
    if (first >= last) {
        throw EmptyInputError("country '" + series.info.country_id + "' has no records in " + format_date(start) +
                              ".." + format_date(end));
    }
    auto slice = [&](const std::vector<double> &x) {
        return std::vector<double>(x.begin() + first, x.begin() + last);
    };
    RiskPanel panel;
    panel.country_id = full.country_id;
    panel.dates.assign(full.dates.begin() + first, full.dates.begin() + last);
    panel.risk_raw = slice(full.risk_raw);
    panel.death_rate_raw = slice(full.death_rate_raw);
    panel.vacc_rate_raw = slice(full.vacc_rate_raw);
    panel.rates_clipped = full.rates_clipped;
    normalize_per_country(panel);
    return panel;
}

void normalize_globally(std::vector<RiskPanel> &panels) {
    auto pooled = [&](auto member) {
        NormParams p{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (const auto &panel : panels) {
            for (double x : panel.*member) {
                p.min = std::min(p.min, x);
                p.max = std::max(p.max, x);
            }
        }
        return p;
    };
    if (panels.empty()) {
        return;
    }
    const auto rp = pooled(&RiskPanel::risk_raw);
    const auto dp = pooled(&RiskPanel::death_rate_raw);
    const auto vp = pooled(&RiskPanel::vacc_rate_raw);
    for (auto &panel : panels) {
        panel.risk_params = rp;
        panel.death_rate_params = dp;
        panel.vacc_rate_params = vp;
        apply_params(panel.risk_raw, rp, panel.risk);
        apply_params(panel.death_rate_raw, dp, panel.death_rate);
        apply_params(panel.vacc_rate_raw, vp, panel.vacc_rate);
    }
}

std::ptrdiff_t index_of(const RiskPanel &panel, Date date) {
    auto it = std::lower_bound(panel.dates.begin(), panel.dates.end(), date);
    if (it == panel.dates.end() || *it != date) {
        return -1;
    }
    return it - panel.dates.begin();
}

void write_panel_csv(const std::filesystem::path &path, const RiskPanel &panel) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    out << "date,risk_raw,risk,death_rate_raw,death_rate,vacc_rate_raw,vacc_rate\n";
    for (std::size_t i = 0; i < panel.size(); ++i) {
        out << format_date(panel.dates[i]) << ',' << csv::format_number(panel.risk_raw[i]) << ','
            << csv::format_number(panel.risk[i]) << ',' << csv::format_number(panel.death_rate_raw[i])
            << ',' << csv::format_number(panel.death_rate[i]) << ','
            << csv::format_number(panel.vacc_rate_raw[i]) << ',' << csv::format_number(panel.vacc_rate[i])
            << '\n';
    }
}

RiskPanel read_panel_csv(const std::filesystem::path &path, std::string country_id,
                         const NormParams &risk_params, const NormParams &death_rate_params,
                         const NormParams &vacc_rate_params) {
    const auto table = csv::read_file(path);
    static constexpr const char *kColumns[] = {"date",           "risk_raw",   "risk",
                                               "death_rate_raw", "death_rate", "vacc_rate_raw",
                                               "vacc_rate"};
    std::size_t idx[7];
    for (std::size_t c = 0; c < 7; ++c) {
        auto i = table.column(kColumns[c]);
        if (!i) {
            throw SchemaError("panel '" + path.string() + "' has no column '" + kColumns[c] + "'");
        }
        idx[c] = *i;
    }
    if (table.rows.empty()) {
        throw EmptyInputError("panel '" + path.string() + "' is empty");
    }
    RiskPanel panel;
    panel.country_id = std::move(country_id);
    panel.risk_params = risk_params;
    panel.death_rate_params = death_rate_params;
    panel.vacc_rate_params = vacc_rate_params;
    std::vector<double> *cols[6] = {&panel.risk_raw,       &panel.risk,          &panel.death_rate_raw,
                                    &panel.death_rate,     &panel.vacc_rate_raw, &panel.vacc_rate};
    for (const auto &row : table.rows) {
        panel.dates.push_back(parse_date_or_throw(row[idx[0]]));
        for (std::size_t c = 0; c < 6; ++c) {
            auto v = csv::parse_number(row[idx[c + 1]]);
            if (!v) {
                throw SchemaError("panel '" + path.string() + "' has a non-numeric " + kColumns[c + 1] +
                                  " cell");
            }
            cols[c]->push_back(*v);
        }
    }
    return panel;
}

} // namespace vaxequity::risk
