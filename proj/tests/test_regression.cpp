#include "oracles.hpp"
#include "synthetic.hpp"

#include "vaxequity/errors.hpp"
#include "vaxequity/regression.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace vaxequity;
using namespace vaxequity::regression;

namespace {

// max_i |X^T r|_i / (n * max|X| * max(1, max|y|))
double scaled_orthogonality(const DesignMatrix &m, const Coefficients &beta) {
    std::array<double, 5> xtr{};
    double xmax = 0.0;
    double ymax = 1.0;
    for (std::size_t r = 0; r < m.size(); ++r) {
        const double resid = m.target[r] - predict(beta, m.rows[r][1], m.rows[r][2], m.rows[r][3], m.rows[r][4]);
        for (std::size_t i = 0; i < 5; ++i) {
            xtr[i] += m.rows[r][i] * resid;
            xmax = std::max(xmax, std::abs(m.rows[r][i]));
        }
        ymax = std::max(ymax, std::abs(m.target[r]));
    }
    double worst = 0.0;
    for (double v : xtr) {
        worst = std::max(worst, std::abs(v));
    }
    return worst / (static_cast<double>(m.size()) * xmax * ymax);
}

double train_mse(const DesignMatrix &m, const Coefficients &beta) {
    const auto pred = predict(beta, m);
    return eval_metrics(pred, m.target).mse;
}

risk::RiskPanel panel_with(std::size_t days) {
    std::mt19937_64 rng(days);
    return synth::planted_panel(rng, days, 0.1, 0.8, -0.5, 0.0);
}

ingest::CountryStatic attrs(double h = 1.2, double i = 0.6) {
    ingest::CountryStatic a;
    a.country_id = "SYN";
    a.population = 1e6;
    a.hospital_beds_per_thousand = h;
    a.human_development_index = i;
    return a;
}

} // namespace

TEST_CASE("build_design_matrix") {
    const auto panel = panel_with(10);
    const auto m = build_design_matrix(panel, attrs());
    REQUIRE(m.size() == 10);
    REQUIRE(m.target.size() == 10);
    for (std::size_t t = 0; t < 10; ++t) {
        CHECK(m.rows[t][0] == 1.0);
        CHECK(m.rows[t][1] == panel.death_rate[t]);
        CHECK(m.rows[t][2] == panel.vacc_rate[t]);
        CHECK(m.rows[t][3] == 1.2);
        CHECK(m.rows[t][4] == 0.6);
        CHECK(m.target[t] == panel.risk[t]);
    }

    auto zero_death = panel;
    std::fill(zero_death.death_rate.begin(), zero_death.death_rate.end(), 0.0);
    for (const auto &row : build_design_matrix(zero_death, attrs()).rows) {
        CHECK(row[1] == 0.0);
    }
    CHECK_THROWS_AS(build_design_matrix(risk::RiskPanel{}, attrs()), EmptyInputError);
}

TEST_CASE("split_train_test") {
    std::mt19937_64 rng(1);
    const auto m = synth::planted_design(rng, 100, 0.1, 0.8, -0.5, 0.0);

    auto [train, test] = split_train_test(m, 0.7, SplitScheme::chronological, 0);
    REQUIRE(train.size() == 70);
    REQUIRE(test.size() == 30);
    CHECK(train.rows.front() == m.rows[0]);
    CHECK(train.rows.back() == m.rows[69]);
    CHECK(test.rows.front() == m.rows[70]);
    CHECK(test.rows.back() == m.rows[99]);

    const auto two = synth::planted_design(rng, 2, 0.0, 1.0, 0.0, 0.0);
    auto [a, b] = split_train_test(two, 0.5, SplitScheme::chronological, 0);
    CHECK(a.size() == 1);
    CHECK(b.size() == 1);

    auto [r1, t1] = split_train_test(m, 0.7, SplitScheme::random, 42);
    auto [r2, t2] = split_train_test(m, 0.7, SplitScheme::random, 42);
    CHECK(r1.rows == r2.rows);
    CHECK(t1.target == t2.target);
    CHECK(r1.size() == 70);
    auto [r3, t3] = split_train_test(m, 0.7, SplitScheme::random, 43);
    CHECK(r3.rows != r1.rows);

    CHECK_THROWS_AS(split_train_test(synth::planted_design(rng, 1, 0, 0, 0, 0), 0.5, SplitScheme::chronological, 0),
                    DomainError);
    CHECK_THROWS_AS(split_train_test(m, 1.0, SplitScheme::chronological, 0), DomainError);
    CHECK_THROWS_AS(split_train_test(m, 0.0, SplitScheme::chronological, 0), DomainError);
}

TEST_CASE("fit_ols recovers planted coefficients") {
    std::mt19937_64 rng(2);
    const auto m = synth::planted_design(rng, 80, 0.1, 0.8, -0.5, 0.0, 2.0, 0.5);
    const auto beta = fit_ols(m);
    ingest::CountryStatic a = attrs(2.0, 0.5);
    CHECK(std::abs(collapse_intercept(beta, a) - 0.1) <= 1e-6);
    CHECK(std::abs(beta[1] - 0.8) <= 1e-6);
    CHECK(std::abs(beta[2] + 0.5) <= 1e-6);
    CHECK(scaled_orthogonality(m, beta) < 1e-8);
}

TEST_CASE("fit_ols with y equal to D") {
    std::mt19937_64 rng(3);
    auto m = synth::planted_design(rng, 30, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
    const auto beta = fit_ols(m);
    CHECK(std::abs(beta[1] - 1.0) <= 1e-9);
    CHECK(std::abs(beta[2]) <= 1e-9);
    CHECK(std::abs(collapse_intercept(beta, attrs(0.0, 0.0))) <= 1e-9);
}

TEST_CASE("fit_ols matches an independent normal-equations solve when all columns vary") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        DesignMatrix m;
        for (int r = 0; r < 60; ++r) {
            Row x{1.0, synth::uniform(rng, 0, 1), synth::uniform(rng, 0, 1), synth::uniform(rng, 0.5, 5),
                  synth::uniform(rng, 0.3, 0.9)};
            m.rows.push_back(x);
            m.target.push_back(synth::uniform(rng, 0, 1));
        }
        const auto beta = fit_ols(m);
        const auto want = oracle::normal_equations(m.rows, m.target);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(std::abs(beta[i] - want[i]) <= 1e-8);
        }
    }
}

TEST_CASE("fit_ols is locally optimal, orthogonal and deterministic") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        const auto m = synth::planted_design(rng, 50, synth::uniform(rng, -0.2, 0.3), synth::uniform(rng, 0, 1.5),
                                             synth::uniform(rng, -1.5, 0), 0.02, synth::uniform(rng, 0.5, 4),
                                             synth::uniform(rng, 0.3, 0.9));
        const auto beta = fit_ols(m);
        CHECK(scaled_orthogonality(m, beta) < 1e-8);
        const double base = train_mse(m, beta);
        for (std::size_t i = 0; i < 5; ++i) {
            for (double delta : {-1e-3, 1e-3}) {
                auto probe = beta;
                probe[i] += delta;
                CHECK(train_mse(m, probe) >= base - 1e-15);
            }
        }
        CHECK(fit_ols(m) == beta);
    }
}

TEST_CASE("fit_ols rank errors") {
    DesignMatrix m;
    for (int r = 0; r < 20; ++r) {
        m.rows.push_back({1.0, r % 2 == 0 ? 0.1 : 0.2, 0.3, 1.0, 0.5});
        m.target.push_back(0.1);
    }
    CHECK_THROWS_AS(fit_ols(m), RankError);
    CHECK_THROWS_AS(fit_ols(DesignMatrix{}), RankError);
}

TEST_CASE("predict") {
    Coefficients beta{0.01, 0.8, -0.5, 0.002, 0.03};
    CHECK(predict(beta, 0, 0, 0, 0) == 0.01);

    // beta0_tilde = 0.1 with zero H, I terms.
    Coefficients b{0.1, 0.8, -0.5, 0.0, 0.0};
    CHECK(predict(b, 0.2, 0.4, 7.0, 0.3) == doctest::Approx(0.06).epsilon(1e-12));

    std::mt19937_64 rng(6);
    const auto m = synth::planted_design(rng, 25, 0.2, 0.4, -0.3, 0.01);
    const auto got = predict(beta, m);
    for (std::size_t r = 0; r < m.size(); ++r) {
        double dot = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            dot += beta[i] * m.rows[r][i];
        }
        CHECK(std::abs(got[r] - dot) <= 1e-15);
    }
}

TEST_CASE("eval_metrics") {
    const std::vector<double> a{0.1, 0.5, 0.9};
    auto perfect = eval_metrics(a, a);
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.mse == 0.0);
    REQUIRE(perfect.r_squared);
    CHECK(*perfect.r_squared == 1.0);

    auto m = eval_metrics(std::vector<double>{1, 2}, std::vector<double>{1, 3});
    CHECK(m.mae == 0.5);
    CHECK(m.mse == 0.5);

    auto flat = eval_metrics(std::vector<double>{1, 2}, std::vector<double>{3, 3});
    CHECK_FALSE(flat.r_squared);
    CHECK(flat.mae == 1.5);

    std::mt19937_64 rng(50);
    std::vector<double> p(50);
    std::vector<double> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
        p[i] = synth::uniform(rng, -1, 1);
        y[i] = synth::uniform(rng, -1, 1);
    }
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        abs_sum += std::abs(p[i] - y[i]);
        sq_sum += (p[i] - y[i]) * (p[i] - y[i]);
        mean += y[i] / 50.0;
    }
    double tot = 0.0;
    for (double v : y) {
        tot += (v - mean) * (v - mean);
    }
    auto r = eval_metrics(p, y);
    CHECK(std::abs(r.mae - abs_sum / 50.0) <= 1e-12);
    CHECK(std::abs(r.mse - sq_sum / 50.0) <= 1e-12);
    CHECK(std::abs(*r.r_squared - (1.0 - sq_sum / tot)) <= 1e-12);

    CHECK_THROWS_AS(eval_metrics(std::vector<double>{}, std::vector<double>{}), DomainError);
    CHECK_THROWS_AS(eval_metrics(std::vector<double>{1}, std::vector<double>{1, 2}), DomainError);
}

TEST_CASE("collapse_intercept") {
    CHECK(collapse_intercept({0.3, 1, 1, 0, 0}, attrs(5.0, 0.5)) == 0.3);
    CHECK(collapse_intercept({0.01, 0, 0, 0.002, 0.03}, attrs(0.9, 0.6)) == doctest::Approx(0.0298).epsilon(1e-12));
    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
        Coefficients b{synth::uniform(rng, -1, 1), 0, 0, synth::uniform(rng, -1, 1), synth::uniform(rng, -1, 1)};
        const auto a = attrs(synth::uniform(rng, 0, 10), synth::uniform(rng, 0, 1));
        CHECK(std::abs(collapse_intercept(b, a) -
                       (b[0] + b[3] * a.hospital_beds_per_thousand + b[4] * a.human_development_index)) <= 1e-12);
    }
}

TEST_CASE("fit_country, sign reproduction and model file round trip") {
    std::mt19937_64 rng(10);
    std::vector<RiskModelFit> fits;
    for (int i = 0; i < 20; ++i) {
        const auto panel = synth::planted_panel(rng, 300, 0.3, synth::uniform(rng, 0.1, 1.0),
                                                -synth::uniform(rng, 0.1, 1.0), 0.01);
        auto a = attrs(synth::uniform(rng, 0.2, 4), synth::uniform(rng, 0.3, 0.8));
        a.country_id = "C" + std::to_string(i);
        auto fit = fit_country(panel, a, SplitSpec{0.7, SplitScheme::chronological, 1});
        CHECK(fit.beta[2] < 0.0);
        CHECK(std::abs(fit.beta0_tilde - collapse_intercept(fit.beta, a)) <= 1e-12);
        CHECK(fit.train_rows == 210);
        CHECK(fit.test_rows == 90);
        CHECK(fit.metrics.mae >= 0.0);
        fits.push_back(fit);
    }
    const auto path = synth::temp_dir("model") / "model.json";
    write_model_file(path, fits);
    const auto back = read_model_file(path);
    REQUIRE(back.size() == fits.size());
    for (std::size_t i = 0; i < fits.size(); ++i) {
        CHECK(back[i].country_id == fits[i].country_id);
        CHECK(back[i].beta == fits[i].beta);
        CHECK(back[i].beta0_tilde == fits[i].beta0_tilde);
        CHECK(back[i].metrics.mae == fits[i].metrics.mae);
        CHECK(back[i].metrics.r_squared == fits[i].metrics.r_squared);
        CHECK(back[i].vacc_rate_params == fits[i].vacc_rate_params);
        CHECK(back[i].split == fits[i].split);
    }
    CHECK_THROWS_AS(read_model_file("/nonexistent/model.json"), IoError);
}

TEST_CASE("fit_country random split is seeded per country") {
    std::mt19937_64 rng(11);
    const auto panel = synth::planted_panel(rng, 120, 0.2, 0.5, -0.4, 0.02);
    const auto a = attrs();
    const auto f1 = fit_country(panel, a, SplitSpec{0.7, SplitScheme::random, 99});
    const auto f2 = fit_country(panel, a, SplitSpec{0.7, SplitScheme::random, 99});
    CHECK(f1.beta == f2.beta);
    CHECK(f1.metrics.mae == f2.metrics.mae);
}
