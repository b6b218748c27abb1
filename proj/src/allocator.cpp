#include "vaxequity/allocator.hpp"

#include "vaxequity/errors.hpp"
#include "vaxequity/seeding.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace vaxequity::alloc {

namespace {

constexpr int kMaxBisection = 200;
constexpr double kProjectionTol = 1e-10;
constexpr double kMinStep = 1e-30;
constexpr double kMaxStep = 1e12;

double budget_spent(const AllocationProblem &p, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        s += (v[j] - p.countries[j].v_prev) * p.countries[j].population;
    }
    return s;
}

// Variable part of the objective: sum beta2 v - omega * jain(v).
double variable_objective(const AllocationProblem &p, std::span<const double> v) {
    double lin = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        lin += p.countries[j].beta2 * v[j];
    }
    return p.omega > 0.0 ? lin - p.omega * jain_index(v) : lin;
}

long double jain_extended(std::span<const double> v) {
    long double sum = 0.0L;
    long double sq = 0.0L;
    for (double x : v) {
        sum += x;
        sq += static_cast<long double>(x) * x;
    }
    if (sq < kZeroGuard) {
        return 1.0L;
    }
    return sum * sum / (static_cast<long double>(v.size()) * sq);
}

// f(to) - f(from) for the variable objective, in extended precision. Near a
// stationary point the decrease is far below the rounding error of f itself.
double objective_change(const AllocationProblem &p, std::span<const double> from, std::span<const double> to) {
    long double lin = 0.0L;
    for (std::size_t j = 0; j < from.size(); ++j) {
        lin += static_cast<long double>(p.countries[j].beta2) * (static_cast<long double>(to[j]) - from[j]);
    }
    if (p.omega > 0.0) {
        lin -= static_cast<long double>(p.omega) * (jain_extended(to) - jain_extended(from));
    }
    return static_cast<double>(lin);
}

std::vector<double> objective_gradient(const AllocationProblem &p, std::span<const double> v) {
    std::vector<double> g(v.size());
    if (p.omega > 0.0) {
        g = fairness_gradient(v);
        for (auto &x : g) {
            x *= -p.omega;
        }
    }
    for (std::size_t j = 0; j < v.size(); ++j) {
        g[j] += p.countries[j].beta2;
    }
    return g;
}

double norm2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

struct LocalRun {
    std::vector<double> v;
    double f = 0.0; // variable objective
    int iterations = 0;
    bool converged = false;
    double pg_norm = 0.0;
    bool stalled = false;
};

// On a binding budget row, g and g + mu P project to the same point while
// the multiplier stays non-negative. Removing the least-squares multiplier
// over the free coordinates keeps x - s g from cancelling at the scale of the
// (often large) normal component, which would otherwise swamp the tangential
// decrease near a stationary point.
struct Direction {
    std::vector<double> d;
    double mu = 0.0;
};

Direction shifted_direction(const AllocationProblem &p, std::span<const double> x, std::span<const double> g) {
    Direction dir{std::vector<double>(g.begin(), g.end()), 0.0};
    const double tv = p.budget_doses;
    if (budget_spent(p, x) < tv - kProjectionTol * std::max(tv, 1.0)) {
        return dir;
    }
    double gp = 0.0;
    double pp = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const auto &c = p.countries[j];
        if (x[j] > c.v_prev && x[j] < 1.0) {
            gp += g[j] * c.population;
            pp += c.population * c.population;
        }
    }
    const double mu = pp > 0.0 ? -gp / pp : 0.0;
    if (mu > 0.0) {
        dir.mu = mu;
        for (std::size_t j = 0; j < x.size(); ++j) {
            dir.d[j] += mu * p.countries[j].population;
        }
    }
    return dir;
}

// Change of f + mu * spent between two points, in extended precision.
double lagrangian_change(const AllocationProblem &p, double mu, std::span<const double> from,
                         std::span<const double> to) {
    long double spent = 0.0L;
    for (std::size_t j = 0; j < from.size(); ++j) {
        spent += (static_cast<long double>(to[j]) - from[j]) * p.countries[j].population;
    }
    return objective_change(p, from, to) + static_cast<double>(mu * spent);
}

// Largest change in f from rounding each coordinate by one ulp.
double rounding_noise(std::span<const double> x, std::span<const double> g) {
    double noise = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        noise += std::abs(g[j]) * (std::nextafter(std::abs(x[j]), 2.0) - std::abs(x[j]));
    }
    return noise;
}

// Projected gradient from one feasible start.
LocalRun local_solve(const AllocationProblem &p, const SolverSettings &cfg, std::vector<double> x) {
    const std::size_t n = x.size();
    LocalRun run;
    double f = variable_objective(p, x);
    auto g = objective_gradient(p, x);
    double step = 1.0;
    std::vector<double> trial(n);
    std::vector<double> xn(n);

    int it = 0;
    for (;; ++it) {
        for (std::size_t j = 0; j < n; ++j) {
            trial[j] = x[j] - g[j];
        }
        const auto unit = project_feasible(p, trial);
        run.pg_norm = norm2(x, unit);
        if (run.pg_norm <= cfg.tolerance) {
            run.converged = true;
            break;
        }
        if (it >= cfg.max_iters) {
            break;
        }

        // Armijo backtracking along the projection arc, tested on the
        // extended-precision change of the Lagrangian with the shifted
        // multiplier; f itself may not rise by more than its rounding noise.
        // If that finds no step, the plain gradient and plain f are tried.
        const double slack = 4.0 * LDBL_EPSILON * (1.0 + std::abs(f));
        const double f_slack = 16.0 * rounding_noise(x, g) + slack;
        double s = step;
        double fn = 0.0;
        bool accepted = false;
        auto search = [&](const Direction &dir) {
            s = step;
            while (s >= kMinStep) {
                for (std::size_t j = 0; j < n; ++j) {
                    trial[j] = x[j] - s * dir.d[j];
                }
                xn = project_feasible(p, trial);
                double dec = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    dec += dir.d[j] * (xn[j] - x[j]);
                }
                if (dec < 0.0 && lagrangian_change(p, dir.mu, x, xn) <= cfg.armijo * dec + slack &&
                    objective_change(p, x, xn) <= f_slack) {
                    fn = variable_objective(p, xn);
                    return true;
                }
                s *= cfg.backtrack;
            }
            return false;
        };
        const auto shifted = shifted_direction(p, x, g);
        accepted = search(shifted);
        if (!accepted && shifted.mu > 0.0) {
            accepted = search(Direction{g, 0.0});
        }
        if (!accepted) {
            run.stalled = true;
            break;
        }

        auto gn = objective_gradient(p, xn);
        // Barzilai-Borwein guess for the next trial step.
        double ss = 0.0;
        double sy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = xn[j] - x[j];
            ss += dx * dx;
            sy += dx * (gn[j] - g[j]);
        }
        step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, kMaxStep) : std::min(2.0 * s, kMaxStep);

        x.swap(xn);
        g.swap(gn);
        f = fn;
    }
    run.v = std::move(x);
    run.f = f;
    run.iterations = it;
    return run;
}

bool strictly_better(double candidate, double incumbent) {
    return candidate < incumbent - 1e-12 * (1.0 + std::abs(incumbent));
}

AllocationResult result_from_run(const AllocationProblem &p, LocalRun run, int start_index, int starts,
                                 int total_iterations) {
    auto r = evaluate(p, std::move(run.v));
    r.report.iterations = run.iterations;
    r.report.total_iterations = total_iterations;
    r.report.converged = run.converged;
    r.report.pg_norm = run.pg_norm;
    r.report.starts = starts;
    r.report.best_start = start_index;
    if (!run.converged) {
        std::ostringstream msg;
        msg << (run.stalled ? "line search stalled" : "iteration limit reached")
            << " with projected-gradient norm " << run.pg_norm << " after " << run.iterations
            << " iterations";
        r.report.diagnostic = msg.str();
    }
    return r;
}

} // namespace

double AllocationResult::total_doses() const { return std::accumulate(doses.begin(), doses.end(), 0.0); }

double AllocationResult::total_risk_reduction() const {
    return std::accumulate(risk_reduction.begin(), risk_reduction.end(), 0.0);
}

void validate(const AllocationProblem &p) {
    if (p.countries.empty()) {
        throw DomainError("allocation problem has no countries");
    }
    if (!(p.budget_doses >= 0.0) || !std::isfinite(p.budget_doses)) {
        throw DomainError("budget must be a finite value >= 0");
    }
    if (!(p.omega >= 0.0) || !std::isfinite(p.omega)) {
        throw DomainError("omega must be a finite value >= 0");
    }
    for (const auto &c : p.countries) {
        if (!(c.population > 0.0)) {
            throw DomainError("country '" + c.country_id + "': population must be > 0");
        }
        if (!(c.v_prev >= 0.0 && c.v_prev <= 1.0)) {
            throw InfeasibleError("country '" + c.country_id + "': prior vaccination rate " +
                                  std::to_string(c.v_prev) + " outside [0, 1]");
        }
        if (!std::isfinite(c.beta0_tilde) || !std::isfinite(c.beta1) || !std::isfinite(c.beta2) ||
            !std::isfinite(c.death_rate)) {
            throw DomainError("country '" + c.country_id + "': non-finite model term");
        }
    }
}

double jain_index(std::span<const double> v) {
    if (v.empty()) {
        throw DomainError("jain_index of an empty vector");
    }
    double s = 0.0;
    double q = 0.0;
    for (double x : v) {
        if (x < 0.0) {
            throw DomainError("jain_index needs non-negative entries");
        }
        s += x;
        q += x * x;
    }
    if (q < kZeroGuard) {
        return 1.0;
    }
    return s * s / (static_cast<double>(v.size()) * q);
}

std::vector<double> fairness_gradient(std::span<const double> v) {
    if (v.empty()) {
        throw DomainError("fairness_gradient of an empty vector");
    }
    double s = 0.0;
    double q = 0.0;
    for (double x : v) {
        if (x < 0.0) {
            throw DomainError("fairness_gradient needs non-negative entries");
        }
        s += x;
        q += x * x;
    }
    std::vector<double> g(v.size(), 0.0);
    if (q < kZeroGuard) {
        return g;
    }
    const double scale = 2.0 * s / (static_cast<double>(v.size()) * q * q);
    for (std::size_t k = 0; k < v.size(); ++k) {
        g[k] = scale * (q - s * v[k]);
    }
    return g;
}

double objective_value(const AllocationProblem &p, std::span<const double> v) {
    if (v.size() != p.countries.size()) {
        throw DomainError("rate vector length differs from the number of countries");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const auto &c = p.countries[j];
        sum += c.beta0_tilde + c.beta1 * c.death_rate + c.beta2 * v[j];
    }
    return sum - p.omega * jain_index(v);
}

std::vector<double> risk_reduction(const AllocationProblem &p, std::span<const double> v_new) {
    if (v_new.size() != p.countries.size()) {
        throw DomainError("rate vector length differs from the number of countries");
    }
    std::vector<double> out(v_new.size());
    for (std::size_t j = 0; j < v_new.size(); ++j) {
        out[j] = -p.countries[j].beta2 * (v_new[j] - p.countries[j].v_prev);
    }
    return out;
}

AllocationResult evaluate(const AllocationProblem &p, std::vector<double> v_new) {
    AllocationResult r;
    const std::size_t n = p.countries.size();
    r.doses.resize(n);
    r.risk_before.resize(n);
    r.risk_after.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto &c = p.countries[j];
        r.doses[j] = std::max(0.0, (v_new[j] - c.v_prev) * c.population);
        r.risk_before[j] = c.base_risk() + c.beta2 * c.v_prev;
        r.risk_after[j] = c.base_risk() + c.beta2 * v_new[j];
    }
    r.risk_reduction = risk_reduction(p, v_new);
    r.jain = jain_index(v_new);
    r.objective = objective_value(p, v_new);
    r.v_new = std::move(v_new);
    return r;
}

AllocationResult solve_op_greedy(const AllocationProblem &p) {
    validate(p);
    const std::size_t n = p.countries.size();
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < n; ++j) {
        if (p.countries[j].beta2 < 0.0) {
            order.push_back(j);
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto &ca = p.countries[a];
        const auto &cb = p.countries[b];
        const double ra = -ca.beta2 / ca.population;
        const double rb = -cb.beta2 / cb.population;
        if (ra != rb) {
            return ra > rb;
        }
        if (ca.v_prev != cb.v_prev) {
            return ca.v_prev < cb.v_prev;
        }
        return ca.country_id < cb.country_id;
    });

    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) {
        v[j] = p.countries[j].v_prev;
    }
    double remaining = p.budget_doses;
    for (auto j : order) {
        if (remaining <= 0.0) {
            break;
        }
        const auto &c = p.countries[j];
        const double capacity = (1.0 - c.v_prev) * c.population;
        if (capacity <= remaining) {
            v[j] = 1.0;
            remaining -= capacity;
        } else {
            v[j] = c.v_prev + remaining / c.population;
            remaining = 0.0;
        }
    }
    auto r = evaluate(p, std::move(v));
    r.report.converged = true;
    r.report.starts = 1;
    r.report.best_start = 0;
    return r;
}

std::vector<double> project_feasible(const AllocationProblem &p, std::span<const double> w) {
    const std::size_t n = p.countries.size();
    if (w.size() != n) {
        throw DomainError("projection input length differs from the number of countries");
    }
    for (const auto &c : p.countries) {
        if (c.v_prev > 1.0 || c.v_prev < 0.0) {
            throw InfeasibleError("country '" + c.country_id + "': prior vaccination rate outside [0, 1]");
        }
    }
    auto clip_at = [&](double lambda, std::vector<double> &out) {
        double spent = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const auto &c = p.countries[j];
            out[j] = std::clamp(w[j] - lambda * c.population, c.v_prev, 1.0);
            spent += (out[j] - c.v_prev) * c.population;
        }
        return spent;
    };

    std::vector<double> v(n);
    const double tv = p.budget_doses;
    if (clip_at(0.0, v) <= tv) {
        return v;
    }
    if (tv <= 0.0) {
        for (std::size_t j = 0; j < n; ++j) {
            v[j] = p.countries[j].v_prev;
        }
        return v;
    }

    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto &c = p.countries[j];
        hi = std::max(hi, (w[j] - c.v_prev) / c.population);
    }
    for (int i = 0; i < kMaxBisection; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const double spent = clip_at(mid, v);
        if (spent > tv) {
            lo = mid;
        } else {
            hi = mid;
            if (tv - spent <= kProjectionTol * tv) {
                break;
            }
        }
    }

    // Exact multiplier on the active set located at hi.
    std::vector<int> state(n); // -1 at v_prev, +1 at 1, 0 free
    double free_pp = 0.0;
    double numer = -tv;
    for (std::size_t j = 0; j < n; ++j) {
        const auto &c = p.countries[j];
        const double z = w[j] - hi * c.population;
        if (z <= c.v_prev) {
            state[j] = -1;
        } else if (z >= 1.0) {
            state[j] = 1;
            numer += (1.0 - c.v_prev) * c.population;
        } else {
            state[j] = 0;
            free_pp += c.population * c.population;
            numer += (w[j] - c.v_prev) * c.population;
        }
    }
    if (free_pp > 0.0) {
        const double lambda = numer / free_pp;
        bool consistent = lambda >= 0.0;
        std::vector<double> exact(n);
        for (std::size_t j = 0; j < n && consistent; ++j) {
            const auto &c = p.countries[j];
            const double z = w[j] - lambda * c.population;
            const int s = z <= c.v_prev ? -1 : (z >= 1.0 ? 1 : 0);
            consistent = s == state[j];
            exact[j] = std::clamp(z, c.v_prev, 1.0);
        }
        if (consistent && budget_spent(p, exact) <= tv * (1.0 + 1e-12)) {
            return exact;
        }
    }
    clip_at(hi, v);
    return v;
}

std::vector<double> equal_fill(const AllocationProblem &p) {
    const std::size_t n = p.countries.size();
    std::vector<double> v(n);
    auto fill = [&](double level) {
        double spent = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const auto &c = p.countries[j];
            v[j] = std::max(c.v_prev, level);
            spent += (v[j] - c.v_prev) * c.population;
        }
        return spent;
    };
    if (fill(1.0) <= p.budget_doses) {
        return v;
    }
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < kMaxBisection; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (fill(mid) > p.budget_doses) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    fill(lo);
    return v;
}

AllocationResult solve_op_fair(const AllocationProblem &p, const SolverSettings &cfg,
                               std::span<const std::vector<double>> extra_starts) {
    validate(p);
    if (cfg.max_iters < 0 || !(cfg.tolerance > 0.0) || !(cfg.backtrack > 0.0 && cfg.backtrack < 1.0)) {
        throw DomainError("invalid solver settings");
    }
    const std::size_t n = p.countries.size();

    std::vector<std::vector<double>> starts;
    const auto structured = std::max(cfg.starts, 1);
    starts.push_back(solve_op_greedy(p).v_new);
    if (structured > 1) {
        std::vector<double> prev(n);
        for (std::size_t j = 0; j < n; ++j) {
            prev[j] = p.countries[j].v_prev;
        }
        starts.push_back(std::move(prev));
    }
    if (structured > 2) {
        starts.push_back(equal_fill(p));
    }
    std::mt19937_64 rng(derive_seed(cfg.seed, "multistart"));
    for (int k = 3; k < structured; ++k) {
        std::vector<double> w(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double lo = p.countries[j].v_prev;
            w[j] = lo + uniform01(rng) * (1.0 - lo);
        }
        starts.push_back(project_feasible(p, w));
    }
    for (const auto &s : extra_starts) {
        if (s.size() != n) {
            throw DomainError("extra start has the wrong length");
        }
        starts.push_back(project_feasible(p, s));
    }

    std::optional<LocalRun> best;
    int best_index = -1;
    int total = 0;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        auto run = local_solve(p, cfg, starts[k]);
        total += run.iterations;
        if (!best || strictly_better(run.f, best->f)) {
            best = std::move(run);
            best_index = static_cast<int>(k);
        }
    }
    return result_from_run(p, std::move(*best), best_index, static_cast<int>(starts.size()), total);
}

std::vector<SweepEntry> sweep_omega(const AllocationProblem &p, std::span<const double> omegas,
                                    const SolverSettings &cfg) {
    if (omegas.empty()) {
        throw DomainError("omega sweep needs at least one value");
    }
    std::vector<SweepEntry> entries(omegas.size());
    std::vector<AllocationProblem> problems(omegas.size(), p);
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        entries[i].omega = omegas[i];
        problems[i].omega = omegas[i];
        try {
            entries[i].result = solve_op_fair(problems[i], cfg);
        } catch (const Error &e) {
            entries[i].error = e.what();
        }
    }

    // Exchange solutions between omegas until none improves another.
    const std::size_t max_rounds = omegas.size() + 1;
    for (std::size_t round = 0; round < max_rounds; ++round) {
        bool changed = false;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (!entries[i].result) {
                continue;
            }
            for (std::size_t k = 0; k < entries.size(); ++k) {
                if (k == i || !entries[k].result || entries[k].result->v_new == entries[i].result->v_new) {
                    continue;
                }
                auto run = local_solve(problems[i], cfg, entries[k].result->v_new);
                const double incumbent = variable_objective(problems[i], entries[i].result->v_new);
                if (strictly_better(run.f, incumbent)) {
                    const int total = entries[i].result->report.total_iterations + run.iterations;
                    const int starts = entries[i].result->report.starts + 1;
                    entries[i].result = result_from_run(problems[i], std::move(run), -1, starts, total);
                    std::ostringstream note;
                    note << "improved from the omega=" << omegas[k] << " solution";
                    auto &diag = entries[i].result->report.diagnostic;
                    diag = diag.empty() ? note.str() : note.str() + "; " + diag;
                    changed = true;
                }
            }
        }
        if (!changed) {
            break;
        }
    }
    return entries;
}

std::vector<long long> round_doses(std::span<const double> doses, double budget) {
    std::vector<long long> out(doses.size());
    double total = 0.0;
    long long floored = 0;
    std::vector<std::pair<double, std::size_t>> fractions;
    fractions.reserve(doses.size());
    for (std::size_t j = 0; j < doses.size(); ++j) {
        const double d = std::max(0.0, doses[j]);
        total += d;
        const double f = std::floor(d + 1e-9);
        out[j] = static_cast<long long>(f);
        floored += out[j];
        fractions.emplace_back(std::max(0.0, d - f), j);
    }
    const auto target = static_cast<long long>(
        std::min(std::floor(total + 1e-6), std::floor(std::max(budget, 0.0) + 1e-9)));
    long long remainder = target - floored;
    std::stable_sort(fractions.begin(), fractions.end(),
                     [](const auto &a, const auto &b) { return a.first > b.first; });
    for (std::size_t i = 0; i < fractions.size() && remainder > 0; ++i, --remainder) {
        ++out[fractions[i].second];
    }
    // Over budget: take units back, smallest fractional part first, in
    // repeated passes until the budget holds.
    while (remainder < 0) {
        for (std::size_t i = fractions.size(); i-- > 0 && remainder < 0;) {
            auto &d = out[fractions[i].second];
            if (d > 0) {
                --d;
                ++remainder;
            }
        }
    }
    return out;
}

} // namespace vaxequity::alloc
