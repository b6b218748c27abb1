#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vaxequity::alloc {

/// Below this sum of squares a rate vector counts as the origin, where the
/// fairness index is taken to be 1 with zero gradient.
inline constexpr double kZeroGuard = 1e-15;

/// Collapsed linear risk of one country at the distribution day:
/// R_j = beta0_tilde + beta1 * death_rate + beta2 * v_j.
struct CountryTerm {
    std::string country_id;
    double beta0_tilde = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double death_rate = 0.0; // D_j(t)
    double v_prev = 0.0;     // V_j(t-1), fraction of the population
    double population = 0.0; // P_j

    double base_risk() const { return beta0_tilde + beta1 * death_rate; }
};

struct AllocationProblem {
    std::vector<CountryTerm> countries;
    double budget_doses = 0.0; // TV
    double omega = 0.0;        // fairness weight

    std::size_t j_count() const { return countries.size(); }
};

/// Throws DomainError on an empty country list, non-positive population,
/// negative budget or omega, and InfeasibleError when some v_prev lies
/// outside [0, 1].
void validate(const AllocationProblem &p);

struct SolverSettings {
    int max_iters = 10000;
    double tolerance = 1e-8;   // on the projected-gradient norm
    double backtrack = 0.5;    // step shrink factor
    double armijo = 1e-4;      // sufficient-decrease constant
    int starts = 8;            // deterministic multi-starts
    std::uint64_t seed = 0;

    bool operator==(const SolverSettings &) const = default;
};

struct SolverReport {
    int iterations = 0;        // of the winning start
    int total_iterations = 0;  // over all starts
    bool converged = false;
    double pg_norm = 0.0;
    int starts = 0;
    int best_start = -1;
    std::string diagnostic;
};

struct AllocationResult {
    std::vector<double> v_new;
    std::vector<double> doses;
    std::vector<double> risk_before;
    std::vector<double> risk_after;
    std::vector<double> risk_reduction;
    double jain = 1.0;
    double objective = 0.0;
    SolverReport report;

    double total_doses() const;
    double total_risk_reduction() const;
};

/// (sum v)^2 / (J * sum v^2); 1 at the origin. Throws DomainError on an
/// empty vector or a negative entry.
double jain_index(std::span<const double> v);

/// Gradient of jain_index: 2 S (Q - S v_k) / (J Q^2) with S = sum v and
/// Q = sum v^2; zero at the origin.
std::vector<double> fairness_gradient(std::span<const double> v);

/// sum_j (beta0_tilde + beta1 D_j + beta2 v_j) - omega * jain_index(v).
double objective_value(const AllocationProblem &p, std::span<const double> v);

/// -beta2_j * (v_new_j - v_prev_j) for each country.
std::vector<double> risk_reduction(const AllocationProblem &p, std::span<const double> v_new);

/// Exact solution of the efficiency-only problem (omega ignored). Countries
/// with beta2 < 0 are filled to full coverage in descending |beta2|/P order
/// (ties: ascending v_prev, then country_id) until the budget runs out.
/// Countries with beta2 >= 0 receive nothing.
AllocationResult solve_op_greedy(const AllocationProblem &p);

/// Euclidean projection onto {v : v_prev <= v <= 1, sum (v - v_prev) P <= TV}.
/// Box clipping first; if the budget row is violated, bisection on the
/// multiplier of v(l) = clip(w - l P, v_prev, 1) followed by an exact solve
/// for l on the located active set.
std::vector<double> project_feasible(const AllocationProblem &p, std::span<const double> w);

/// Common level L with v_j = max(v_prev_j, L) spending the budget (or L = 1
/// when the budget covers everyone).
std::vector<double> equal_fill(const AllocationProblem &p);

/// Multi-start projected gradient with Armijo backtracking on the
/// fairness-weighted problem. Starts, in order: the greedy solution, v_prev,
/// the equal-fill point, seeded random feasible points, then `extra_starts`.
/// A later start replaces the incumbent only if strictly better. Never
/// throws on non-convergence; the report carries converged = false.
AllocationResult solve_op_fair(const AllocationProblem &p, const SolverSettings &cfg,
                               std::span<const std::vector<double>> extra_starts = {});

/// Assembles a result (doses, risks, Jain, objective) for a given rate vector.
AllocationResult evaluate(const AllocationProblem &p, std::vector<double> v_new);

struct SweepEntry {
    double omega = 0.0;
    std::optional<AllocationResult> result;
    std::string error; // set when the solve for this omega failed

    double jain() const { return result ? result->jain : 0.0; }
    double total_risk_reduction() const { return result ? result->total_risk_reduction() : 0.0; }
};

/// Solves for each omega in order with the same multi-start seeds. Each
/// omega's solution is then offered as a start to every other omega until no
/// solve improves, so every entry is the best point the whole sweep found
/// for its omega. Failures are recorded per entry.
std::vector<SweepEntry> sweep_omega(const AllocationProblem &p, std::span<const double> omegas,
                                    const SolverSettings &cfg);

/// Integer doses: floor each entry, then hand out the remainder up to
/// min(floor(sum), floor(budget)) by largest fractional part (ties by index).
/// If the floors already exceed the budget, units are taken back from the
/// smallest fractional parts until it holds.
std::vector<long long> round_doses(std::span<const double> doses, double budget);

} // namespace vaxequity::alloc
