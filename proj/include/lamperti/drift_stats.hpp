#pragma once

// Asymptotic drift profiling. Evaluates exact per-state increment moments
// over geometric grids and extrapolates the limits xi = lim 2x*mu(x),
// r2 = lim v(x), R = lim nu(x), and the ratio coefficient
// lim x*(U(x)/D(x) - 1) with the three-parameter model y = L + C*x^(-eps).
// The exponent is estimated, not assumed; only 0 < eps is known a priori.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lamperti/chain.hpp"
#include "lamperti/error.hpp"

namespace lamperti {

struct FitConfig {
    double x0 = 16.0;       // grid origin
    double growth = 2.0;    // geometric ratio
    int points = 12;        // base grid size
    double fit_tol = 1e-3;  // relative residual tolerance
    double eps_min = 0.05;  // smallest decay exponent accepted as converged
    double eps_max = 3.0;   // search cap; constant sequences report this
};

// Arithmetic progression {modulus*t + residue} intersected with
// [min_state, inf). modulus 1, residue 0 is the full lattice.
struct ResidueClass {
    State modulus = 1;
    State residue = 0;
    State min_state = 1;
};

// Smallest member of the class at or above x.
inline State snap_to_lattice(State x, const ResidueClass& cls) {
    State lo = std::max(x, cls.min_state);
    State m = cls.modulus;
    State rem = ((lo - cls.residue) % m + m) % m;
    return rem == 0 ? lo : lo + (m - rem);
}

// x0 * growth^k for k in [0, points).
inline std::vector<State> make_grid(const FitConfig& cfg) {
    if (cfg.points < 1 || cfg.x0 < 1.0 || cfg.growth <= 1.0) {
        throw InvalidSpec("grid needs x0 >= 1, growth > 1, points >= 1");
    }
    std::vector<State> grid;
    double x = cfg.x0;
    for (int k = 0; k < cfg.points; ++k, x *= cfg.growth) {
        State s = static_cast<State>(std::llround(x));
        if (grid.empty() || s > grid.back()) grid.push_back(s);
    }
    return grid;
}

// Base grid with an off-by-one probe after each point. Mixed-residue grids
// expose sequences that converge only along a sub-lattice, which is what
// distinguishes "no limit" from "slow convergence".
inline std::vector<State> make_probe_grid(const FitConfig& cfg) {
    std::vector<State> grid;
    for (State s : make_grid(cfg)) {
        grid.push_back(s);
        grid.push_back(s + 1);
    }
    return grid;
}

// Base grid snapped onto a residue class, deduplicated.
inline std::vector<State> make_restricted_grid(const FitConfig& cfg,
                                               const ResidueClass& cls) {
    std::vector<State> grid;
    for (State s : make_grid(cfg)) {
        State t = snap_to_lattice(s, cls);
        if (grid.empty() || t > grid.back()) grid.push_back(t);
    }
    return grid;
}

// Exact drift evaluation at each grid point.
inline std::vector<DriftQuantities> profile(const ChainSpec& spec,
                                            const std::vector<State>& grid) {
    if (grid.empty()) throw EmptyGrid("profile grid is empty");
    std::vector<DriftQuantities> out;
    out.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < 1) throw InvalidSpec("profile grid states must be >= 1");
        if (i > 0 && grid[i] <= grid[i - 1]) {
            throw InvalidSpec("profile grid must be strictly increasing");
        }
        out.push_back(drift(spec, grid[i]));
    }
    return out;
}

// One extrapolated sequence limit.
struct SeqFit {
    double limit = 0.0;
    double coeff = 0.0;
    double exponent = 0.0;
    double residual = 0.0;  // RMS over the fit window, relative to scale
    bool converged = false;
    bool degenerate = false;  // constant sequence; exponent is the cap
};

struct AsymptoticFit {
    double xi_hat = 0.0;        // limit of 2x*mu(x)
    double r2_hat = 0.0;        // limit of v(x)
    double R_hat = 0.0;         // limit of nu(x)
    double rho_coeff_hat = 0.0; // limit of x*(U/D - 1)
    double eps_hat = 0.0;       // weakest fitted decay exponent
    double residual_norm = 0.0; // largest relative residual across sequences
    bool converged = false;     // all four sequences converged
    std::vector<State> grid;
    SeqFit fit_two_x_mu, fit_v, fit_nu, fit_rho;
    SeqFit fit_dir_rho;  // direction-conditioned ratio; diagnostic only
};

namespace detail {

// Least squares for y = L + C*u with u = x^(-eps), eps fixed. Centered
// formulation keeps the normal equations conditioned for tiny eps.
struct LinFit {
    double L = 0.0, C = 0.0, sse = 0.0;
};

inline LinFit lin_fit_at(const std::vector<double>& xs,
                         const std::vector<double>& ys, double eps) {
    std::size_t n = xs.size();
    double u_mean = 0.0, y_mean = 0.0;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = std::pow(xs[i], -eps);
        u_mean += u[i];
        y_mean += ys[i];
    }
    u_mean /= static_cast<double>(n);
    y_mean /= static_cast<double>(n);
    double suu = 0.0, suy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        suu += (u[i] - u_mean) * (u[i] - u_mean);
        suy += (u[i] - u_mean) * (ys[i] - y_mean);
    }
    LinFit f;
    f.C = suu > 1e-300 ? suy / suu : 0.0;
    f.L = y_mean - f.C * u_mean;
    for (std::size_t i = 0; i < n; ++i) {
        double r = ys[i] - f.L - f.C * u[i];
        f.sse += r * r;
    }
    return f;
}

// Three-parameter fit: coarse log-spaced scan over eps, then golden-section
// refinement around the best bracket.
inline SeqFit fit_sequence(const std::vector<double>& xs,
                           const std::vector<double>& ys,
                           const FitConfig& cfg) {
    std::size_t n = xs.size();
    double scale = 1e-12, y_mean = 0.0;
    for (double y : ys) {
        scale = std::max(scale, std::abs(y));
        y_mean += y;
    }
    y_mean /= static_cast<double>(n);

    SeqFit fit;
    double dev = 0.0;
    for (double y : ys) dev = std::max(dev, std::abs(y - y_mean));
    if (dev <= 1e-9 * std::max(1.0, scale)) {
        fit.limit = y_mean;
        fit.coeff = 0.0;
        fit.exponent = cfg.eps_max;
        fit.residual = dev / std::max(scale, 1e-12);
        fit.converged = true;
        fit.degenerate = true;
        return fit;
    }

    const double lo = 0.02, hi = cfg.eps_max;
    const int scan = 80;
    double best_eps = lo, best_sse = std::numeric_limits<double>::infinity();
    for (int j = 0; j < scan; ++j) {
        double eps = lo * std::pow(hi / lo, static_cast<double>(j) / (scan - 1));
        double sse = lin_fit_at(xs, ys, eps).sse;
        if (sse < best_sse) {
            best_sse = sse;
            best_eps = eps;
        }
    }
    double step = std::pow(hi / lo, 1.0 / (scan - 1));
    double a = std::log(std::max(lo, best_eps / step));
    double b = std::log(std::min(hi, best_eps * step));
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = lin_fit_at(xs, ys, std::exp(c)).sse;
    double fd = lin_fit_at(xs, ys, std::exp(d)).sse;
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = lin_fit_at(xs, ys, std::exp(c)).sse;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = lin_fit_at(xs, ys, std::exp(d)).sse;
        }
    }
    double eps = std::exp((a + b) / 2.0);
    LinFit lf = lin_fit_at(xs, ys, eps);
    if (lf.sse > best_sse) {
        eps = best_eps;
        lf = lin_fit_at(xs, ys, eps);
    }

    fit.limit = lf.L;
    fit.coeff = lf.C;
    fit.exponent = eps;
    fit.residual = std::sqrt(lf.sse / static_cast<double>(n)) /
                   std::max({std::abs(lf.L), scale, 1e-12});
    fit.converged = fit.residual < cfg.fit_tol && fit.exponent > cfg.eps_min;
    return fit;
}

// Consistent geometric growth across the whole grid means the model
// y = L + C*x^(-eps) cannot apply: the limit does not exist.
inline bool grows_without_bound(const std::vector<double>& ys) {
    for (std::size_t i = 1; i < ys.size(); ++i) {
        if (std::abs(ys[i]) <= std::abs(ys[i - 1])) return false;
    }
    return std::abs(ys.back()) >= 100.0 * std::max(std::abs(ys.front()), 1e-12) &&
           std::abs(ys.back()) > 1.0;
}

}  // namespace detail

// Extrapolates all four limits from a drift profile. Fitting uses the last
// half of the grid so pre-asymptotic transients do not bias the limit.
inline AsymptoticFit fit_asymptotics(const std::vector<DriftQuantities>& profiles,
                                     const FitConfig& cfg) {
    if (profiles.empty()) throw EmptyGrid("no profile points to fit");
    if (profiles.size() < 8) {
        throw InvalidSpec("asymptotic fit needs at least 8 profile points");
    }
    for (std::size_t i = 1; i < profiles.size(); ++i) {
        if (profiles[i].x <= profiles[i - 1].x) {
            throw InvalidSpec("profile states must be strictly increasing");
        }
    }
    if (profiles.back().x < 100 * profiles.front().x) {
        throw InvalidSpec("profile grid must span at least two decades");
    }
    for (const auto& q : profiles) {
        if (!(q.down_part > 0.0)) {
            throw NonPositiveDownPart("D(x) = 0 at state " + std::to_string(q.x) +
                                      "; ratio U/D undefined there");
        }
    }

    std::size_t n = profiles.size();
    std::vector<double> two_x_mu(n);
    for (std::size_t i = 0; i < n; ++i) {
        two_x_mu[i] = 2.0 * static_cast<double>(profiles[i].x) * profiles[i].mu;
    }
    if (detail::grows_without_bound(two_x_mu)) {
        throw FitDiverged("2x*mu(x) grows without bound over the grid");
    }

    std::size_t start = n / 2;
    std::size_t m = n - start;
    std::vector<double> xs(m), ys(m);
    for (std::size_t i = 0; i < m; ++i) {
        xs[i] = static_cast<double>(profiles[start + i].x);
    }
    auto fit_tail = [&](auto&& value) {
        for (std::size_t i = 0; i < m; ++i) ys[i] = value(profiles[start + i]);
        return detail::fit_sequence(xs, ys, cfg);
    };

    AsymptoticFit out;
    out.fit_two_x_mu = fit_tail([](const DriftQuantities& q) {
        return 2.0 * static_cast<double>(q.x) * q.mu;
    });
    out.fit_v = fit_tail([](const DriftQuantities& q) { return q.v; });
    out.fit_nu = fit_tail([](const DriftQuantities& q) { return q.nu; });
    out.fit_rho = fit_tail([](const DriftQuantities& q) {
        return static_cast<double>(q.x) * (q.up_part / q.down_part - 1.0);
    });

    bool dir_ok = true;
    for (std::size_t i = start; i < n; ++i) {
        if (!(profiles[i].p_up > 0.0) || !(profiles[i].p_down > 0.0)) dir_ok = false;
    }
    if (dir_ok) {
        out.fit_dir_rho = fit_tail([](const DriftQuantities& q) {
            double up_mean = q.up_part / q.p_up;
            double down_mean = q.down_part / q.p_down;
            return static_cast<double>(q.x) * (up_mean / down_mean - 1.0);
        });
    }

    out.xi_hat = out.fit_two_x_mu.limit;
    out.r2_hat = out.fit_v.limit;
    out.R_hat = out.fit_nu.limit;
    out.rho_coeff_hat = out.fit_rho.limit;
    out.eps_hat = std::min({out.fit_two_x_mu.exponent, out.fit_v.exponent,
                            out.fit_nu.exponent, out.fit_rho.exponent});
    out.residual_norm = std::max({out.fit_two_x_mu.residual, out.fit_v.residual,
                                  out.fit_nu.residual, out.fit_rho.residual});
    out.converged = out.fit_two_x_mu.converged && out.fit_v.converged &&
                    out.fit_nu.converged && out.fit_rho.converged;
    out.grid.reserve(n);
    for (const auto& q : profiles) out.grid.push_back(q.x);
    return out;
}

// Fit restricted to one residue class of the original lattice. The fitted
// R_hat values across classes are the limit points of nu(x).
inline AsymptoticFit fit_restricted(const ChainSpec& spec, const ResidueClass& cls,
                                    const FitConfig& cfg) {
    return fit_asymptotics(profile(spec, make_restricted_grid(cfg, cls)), cfg);
}

// One fit per value set; fit errors carry the component index.
inline std::vector<AsymptoticFit> detect_limit_points(
    const ChainSpec& spec, const std::vector<ResidueClass>& classes,
    const FitConfig& cfg) {
    std::vector<AsymptoticFit> fits;
    fits.reserve(classes.size());
    for (std::size_t j = 0; j < classes.size(); ++j) {
        try {
            fits.push_back(fit_restricted(spec, classes[j], cfg));
        } catch (const Error& e) {
            throw Error("component " + std::to_string(j) + ": " + e.what());
        }
    }
    return fits;
}

// Largest R_hat across per-class fits: the whole-chain normalizer bound.
inline double max_limit_point_R(const std::vector<AsymptoticFit>& fits) {
    if (fits.empty()) throw EmptyList("no component fits");
    double r = fits.front().R_hat;
    for (const auto& f : fits) r = std::max(r, f.R_hat);
    return r;
}

}  // namespace lamperti
