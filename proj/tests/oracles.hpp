// Independent reference computations used by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "dlab/space.hpp"

namespace oracle {

// mu(|f| >= s) by a direct scan.
inline long double distribution(const std::vector<double>& f, const std::vector<double>& mu,
                                long double s) {
    long double m = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (std::fabs(static_cast<long double>(f[i])) >= s) m += mu[i];
    return m;
}

// Defining integral r1 int_0^inf (s^r mu(|f| >= s))^{r1/r} ds/s by 10-point Gauss-Legendre on
// each interval between consecutive jump points; the weak norm by a scan of the jump points.
inline double lorentz_quadrature(const std::vector<double>& f, const std::vector<double>& mu,
                                 double r, double r1) {
    std::vector<long double> jumps{0.0L};
    for (double x : f)
        if (x != 0) jumps.push_back(std::fabs(static_cast<long double>(x)));
    std::sort(jumps.begin(), jumps.end());
    jumps.erase(std::unique(jumps.begin(), jumps.end()), jumps.end());
    if (std::isinf(r1)) {
        long double best = 0;
        for (std::size_t k = 1; k < jumps.size(); ++k)
            best = std::max(best, jumps[k] * std::pow(distribution(f, mu, jumps[k]), 1.0L / r));
        return static_cast<double>(best);
    }
    static const std::array<long double, 5> xs = {
        0.1488743389816312108848260L, 0.4333953941292471907992659L,
        0.6794095682990244062343274L, 0.8650633666889845107320967L,
        0.9739065285171717200779640L};
    static const std::array<long double, 5> ws = {
        0.2955242247147528701738930L, 0.2692667193099963550912269L,
        0.2190863625159820439955349L, 0.1494513491505805931457763L,
        0.0666713443086881375935688L};
    long double total = 0;
    for (std::size_t k = 1; k < jumps.size(); ++k) {
        const long double lo = jumps[k - 1], hi = jumps[k];
        const long double m = distribution(f, mu, hi);  // constant on (lo, hi]
        const long double mid = 0.5L * (lo + hi), half = 0.5L * (hi - lo);
        long double piece = 0;
        for (int i = 0; i < 5; ++i)
            for (int sgn : {-1, 1}) {
                long double s = mid + sgn * half * xs[i];
                piece += ws[i] * std::pow(s, static_cast<long double>(r1) - 1);
            }
        total += r1 * std::pow(m, static_cast<long double>(r1 / r)) * piece * half;
    }
    return static_cast<double>(std::pow(total, 1.0L / r1));
}

inline double lp_direct(const std::vector<double>& f, const std::vector<double>& mu, double r) {
    long double s = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
        s += mu[i] * std::pow(std::fabs(static_cast<long double>(f[i])), static_cast<long double>(r));
    return static_cast<double>(std::pow(s, 1.0L / r));
}

// Random simple function with repeated values and zeros over a random measure.
inline void random_simple(std::mt19937_64& rng, int n, std::vector<double>& f,
                          std::vector<double>& mu) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int levels = 1 + static_cast<int>(U(rng) * 6);
    std::vector<double> vals(levels);
    for (double& v : vals) v = std::exp(4 * U(rng) - 2) * (U(rng) < 0.5 ? -1 : 1);
    f.resize(n);
    mu.resize(n);
    for (int i = 0; i < n; ++i) {
        f[i] = U(rng) < 0.15 ? 0.0 : vals[static_cast<int>(U(rng) * levels) % levels];
        mu[i] = 0.05 + 2 * U(rng);
    }
}

// Generator of mu du/dt = -(L + diag(d mu)) u on a graph: L from the edge list.
inline Eigen::MatrixXd generator(const dlab::DirichletSpace& s, const std::vector<double>& d = {}) {
    const int n = s.size();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : s.edges()) {
        K(e.i, e.i) += e.c;
        K(e.j, e.j) += e.c;
        K(e.i, e.j) -= e.c;
        K(e.j, e.i) -= e.c;
    }
    for (int x = 0; x < n; ++x) {
        if (!d.empty()) K(x, x) += d[x] * s.mu()[x];
        K.row(x) /= s.mu()[x];
    }
    return -K;
}

inline std::vector<double> expm_solve(const Eigen::MatrixXd& G, const std::vector<double>& u0,
                                      double t) {
    Eigen::MatrixXd E = (G * t).exp();
    Eigen::VectorXd v = E * Eigen::Map<const Eigen::VectorXd>(u0.data(), u0.size());
    return {v.data(), v.data() + v.size()};
}

// log of sum_{j < terms} (3/4)^j A / (delta_{j+1} - delta_j)^kappa with
// delta_j = 1 - (1 - delta_star)/(1 + j), summed term by term in long double.
inline double bombieri_log_series(double A, double kappa, double delta_star, std::size_t terms) {
    std::vector<long double> logs(terms);
    long double mx = -std::numeric_limits<long double>::infinity();
    for (std::size_t j = 0; j < terms; ++j) {
        long double dj = 1.0L - (1.0L - delta_star) / (1.0L + j);
        long double dj1 = 1.0L - (1.0L - delta_star) / (2.0L + j);
        logs[j] = j * std::log(0.75L) - kappa * std::log(dj1 - dj);
        mx = std::max(mx, logs[j]);
    }
    long double sum = 0, comp = 0;
    for (long double l : logs) {
        long double y = std::exp(l - mx) - comp;
        long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return static_cast<double>(std::log(static_cast<long double>(A)) + mx + std::log(sum));
}

}  // namespace oracle
