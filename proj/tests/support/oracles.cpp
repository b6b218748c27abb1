#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

using vaxequity::alloc::AllocationProblem;

std::vector<double> risk_window_sums(const std::vector<double> &cases, double population) {
    std::vector<double> out;
    for (long t = 0; t < static_cast<long>(cases.size()); ++t) {
        double sum = 0.0;
        for (long k = t - 27; k <= t; ++k) {
            if (k >= 0) {
                sum += cases[static_cast<std::size_t>(k)];
            }
        }
        out.push_back(sum / (28.0 * population));
    }
    return out;
}

std::array<double, 5> normal_equations(const std::vector<std::array<double, 5>> &x, const std::vector<double> &y) {
    double a[5][6] = {};
    for (std::size_t r = 0; r < x.size(); ++r) {
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                a[i][j] += x[r][i] * x[r][j];
            }
            a[i][5] += x[r][i] * y[r];
        }
    }
    for (int col = 0; col < 5; ++col) {
        int piv = col;
        for (int r = col + 1; r < 5; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) {
                piv = r;
            }
        }
        for (int c = 0; c < 6; ++c) {
            std::swap(a[col][c], a[piv][c]);
        }
        for (int r = 0; r < 5; ++r) {
            if (r == col) {
                continue;
            }
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 6; ++c) {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    std::array<double, 5> beta{};
    for (int i = 0; i < 5; ++i) {
        beta[i] = a[i][5] / a[i][i];
    }
    return beta;
}

double jain(const std::vector<double> &v) {
    double s = 0.0;
    double q = 0.0;
    for (double x : v) {
        s += x;
        q += x * x;
    }
    if (q < 1e-15) {
        return 1.0;
    }
    return (s * s) / (static_cast<double>(v.size()) * q);
}

double objective(const AllocationProblem &p, const std::vector<double> &v) {
    double risk = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const auto &c = p.countries[j];
        risk += c.beta0_tilde;
        risk += c.beta1 * c.death_rate;
        risk += c.beta2 * v[j];
    }
    return risk - p.omega * jain(v);
}

std::vector<double> jain_fd_gradient(const std::vector<double> &v, double h) {
    std::vector<double> g(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        auto up = v;
        auto dn = v;
        up[k] += h;
        dn[k] -= h;
        g[k] = (jain(up) - jain(dn)) / (2.0 * h);
    }
    return g;
}

double lp_vertex_minimum(const AllocationProblem &p) {
    const std::size_t n = p.countries.size();
    std::size_t patterns = 1;
    for (std::size_t j = 0; j < n; ++j) {
        patterns *= 3;
    }
    double best = std::numeric_limits<double>::infinity();
    AllocationProblem linear = p;
    linear.omega = 0.0;
    // Each coordinate at its lower bound, upper bound, or (at most one) free
    // coordinate fixed by a tight budget row.
    for (std::size_t code = 0; code < patterns; ++code) {
        std::vector<int> state(n);
        std::size_t c = code;
        int free_count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            state[j] = static_cast<int>(c % 3);
            c /= 3;
            free_count += state[j] == 2;
        }
        if (free_count > 1) {
            continue;
        }
        std::vector<double> v(n);
        double spent = 0.0;
        std::size_t free_idx = n;
        for (std::size_t j = 0; j < n; ++j) {
            const auto &cj = p.countries[j];
            if (state[j] == 0) {
                v[j] = cj.v_prev;
            } else if (state[j] == 1) {
                v[j] = 1.0;
                spent += (1.0 - cj.v_prev) * cj.population;
            } else {
                free_idx = j;
            }
        }
        if (free_idx < n) {
            const auto &cf = p.countries[free_idx];
            const double dv = (p.budget_doses - spent) / cf.population;
            v[free_idx] = cf.v_prev + dv;
            if (v[free_idx] < cf.v_prev - 1e-12 || v[free_idx] > 1.0 + 1e-12) {
                continue;
            }
        } else if (spent > p.budget_doses * (1.0 + 1e-12) + 1e-9) {
            continue;
        }
        best = std::min(best, objective(linear, v));
    }
    return best;
}

std::vector<double> projection_by_enumeration(const AllocationProblem &p, const std::vector<double> &w) {
    const std::size_t n = p.countries.size();
    std::size_t patterns = 1;
    for (std::size_t j = 0; j < n; ++j) {
        patterns *= 3;
    }
    const double tv = p.budget_doses;
    std::vector<double> best;
    double best_dist = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::vector<double> &v) {
        double spent = 0.0;
        double dist = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const auto &c = p.countries[j];
            if (v[j] < c.v_prev - 1e-12 || v[j] > 1.0 + 1e-12) {
                return;
            }
            spent += (v[j] - c.v_prev) * c.population;
            dist += (v[j] - w[j]) * (v[j] - w[j]);
        }
        if (spent > tv + 1e-9 * std::max(tv, 1.0)) {
            return;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = v;
        }
    };
    for (std::size_t code = 0; code < patterns; ++code) {
        std::vector<int> state(n); // 0 lower, 1 upper, 2 free
        std::size_t c = code;
        for (std::size_t j = 0; j < n; ++j) {
            state[j] = static_cast<int>(c % 3);
            c /= 3;
        }
        for (int budget_active = 0; budget_active < 2; ++budget_active) {
            double lambda = 0.0;
            if (budget_active) {
                double num = -tv;
                double den = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const auto &cj = p.countries[j];
                    if (state[j] == 1) {
                        num += (1.0 - cj.v_prev) * cj.population;
                    } else if (state[j] == 2) {
                        num += (w[j] - cj.v_prev) * cj.population;
                        den += cj.population * cj.population;
                    }
                }
                if (den == 0.0) {
                    continue;
                }
                lambda = num / den;
            }
            std::vector<double> v(n);
            for (std::size_t j = 0; j < n; ++j) {
                const auto &cj = p.countries[j];
                v[j] = state[j] == 0 ? cj.v_prev : state[j] == 1 ? 1.0 : w[j] - lambda * cj.population;
            }
            consider(v);
        }
    }
    if (best.empty()) {
        throw std::logic_error("projection oracle found no feasible candidate");
    }
    return best;
}

double grid_minimum3(const AllocationProblem &p, double step) {
    if (p.countries.size() != 3) {
        throw std::invalid_argument("grid oracle is for three countries");
    }
    const auto &c = p.countries;
    auto axis = [&](double lo) {
        std::vector<double> pts;
        for (int k = 0;; ++k) {
            const double x = lo + k * step;
            if (x >= 1.0) {
                break;
            }
            pts.push_back(x);
        }
        pts.push_back(1.0);
        return pts;
    };
    double best = std::numeric_limits<double>::infinity();
    // Each coordinate in turn is the free one: it runs over its own grid and
    // is also set to the value that exhausts the budget, so points on the
    // budget face are reachable whatever the population mix.
    for (std::size_t free = 0; free < 3; ++free) {
        const std::size_t a = free == 0 ? 1 : 0;
        const std::size_t b = free == 2 ? 1 : 2;
        const auto axis_a = axis(c[a].v_prev);
        const auto axis_b = axis(c[b].v_prev);
        const auto axis_f = axis(c[free].v_prev);
        std::vector<double> v(3);
        for (double xa : axis_a) {
            const double sa = (xa - c[a].v_prev) * c[a].population;
            if (sa > p.budget_doses) {
                break;
            }
            for (double xb : axis_b) {
                const double sb = sa + (xb - c[b].v_prev) * c[b].population;
                if (sb > p.budget_doses) {
                    break;
                }
                v[a] = xa;
                v[b] = xb;
                const double cap = c[free].v_prev + (p.budget_doses - sb) / c[free].population;
                if (free == 2) {
                    for (double xf : axis_f) {
                        if (xf > cap) {
                            break;
                        }
                        v[free] = xf;
                        best = std::min(best, objective(p, v));
                    }
                }
                if (cap < 1.0) {
                    v[free] = cap;
                    best = std::min(best, objective(p, v));
                }
            }
        }
    }
    return best;
}

} // namespace oracle
