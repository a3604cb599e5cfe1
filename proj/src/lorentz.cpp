#include "dlab/lorentz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dlab {

LevelSets level_sets(std::span<const double> f, std::span<const double> mu) {
    if (f.size() != mu.size()) throw std::invalid_argument("level_sets: size mismatch");
    std::vector<std::pair<double, double>> vals;
    vals.reserve(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double v = std::abs(f[i]);
        if (!std::isfinite(v)) throw std::invalid_argument("level_sets: non-finite value");
        if (v > 0 && mu[i] > 0) vals.emplace_back(v, mu[i]);
    }
    std::sort(vals.begin(), vals.end(),
              [](const auto& x, const auto& y) { return x.first > y.first; });
    LevelSets ls;
    Accumulator cum;
    for (std::size_t i = 0; i < vals.size();) {
        double v = vals[i].first;
        while (i < vals.size() && vals[i].first == v) cum.add(vals[i++].second);
        ls.v.push_back(v);
        ls.M.push_back(cum.value());
    }
    return ls;
}

double log_lorentz_norm(const LevelSets& ls, double r, double r1) {
    if (!(r > 0)) throw std::invalid_argument("lorentz_norm: r must be positive");
    if (!(r1 > 0)) throw std::invalid_argument("lorentz_norm: r1 must be positive");
    if (ls.empty()) return -kInf;
    const double lv = std::log(ls.vmax());
    if (std::isinf(r)) {
        if (std::isinf(r1)) return lv;
        return kInf;
    }
    if (std::isinf(r1)) {
        double best = -kInf;
        for (std::size_t i = 0; i < ls.v.size(); ++i)
            best = std::max(best, std::log(ls.v[i]) + std::log(ls.M[i]) / r);
        return best;
    }
    // sum_i M_i^{r1/r} (x_i^{r1} - x_{i+1}^{r1}), x = v / vmax
    Accumulator acc;
    const std::size_t K = ls.v.size();
    for (std::size_t i = 0; i < K; ++i) {
        double lx = std::log(ls.v[i]) - lv;
        double diff;
        if (i + 1 < K) {
            double lratio = std::log(ls.v[i + 1]) - std::log(ls.v[i]);
            diff = std::exp(r1 * lx) * -std::expm1(r1 * lratio);
        } else {
            diff = std::exp(r1 * lx);
        }
        acc.add(std::exp((r1 / r) * std::log(ls.M[i])) * diff);
    }
    return lv + std::log(acc.value()) / r1;
}

double lorentz_norm(const LevelSets& ls, double r, double r1) {
    return std::exp(log_lorentz_norm(ls, r, r1));
}

double lorentz_norm(std::span<const double> f, std::span<const double> mu, double r, double r1) {
    return lorentz_norm(level_sets(f, mu), r, r1);
}

double lp_norm(std::span<const double> f, std::span<const double> mu, double r) {
    double m = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (mu[i] > 0) m = std::max(m, std::abs(f[i]));
    if (m == 0) return 0;
    if (std::isinf(r)) return m;
    Accumulator acc;
    for (std::size_t i = 0; i < f.size(); ++i) acc.add(std::pow(std::abs(f[i]) / m, r) * mu[i]);
    return m * std::pow(acc.value(), 1.0 / r);
}

double quasi_triangle_K(double r, double r1) {
    double inv_r1 = std::isinf(r1) ? 0.0 : 1.0 / r1;
    return std::pow(2.0, 1.0 / r + std::max(0.0, inv_r1 - 1.0) + 1.0);
}

LawCheck check_power_law(std::span<const double> f, std::span<const double> mu, double sigma,
                         double r, double r1, double rtol) {
    if (!(sigma > 0)) throw std::invalid_argument("check_power_law: sigma must be positive");
    std::vector<double> fs(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) fs[i] = std::pow(std::abs(f[i]), sigma);
    LawCheck c;
    c.lhs = std::exp(log_lorentz_norm(level_sets(fs, mu), r, r1) / sigma);
    c.rhs = lorentz_norm(f, mu, sigma * r, sigma * r1);
    c.ok = std::abs(c.lhs - c.rhs) <= rtol * std::max(c.lhs, c.rhs);
    return c;
}

LawCheck check_monotonicity(std::span<const double> f, std::span<const double> mu, double r,
                            double r1, double r2) {
    if (r1 > r2) throw std::invalid_argument("check_monotonicity: requires r1 <= r2");
    auto ls = level_sets(f, mu);
    LawCheck c;
    c.lhs = lorentz_norm(ls, r, r2);
    c.rhs = std::pow(2.0, 2.0 / r1) * lorentz_norm(ls, r, r1);
    c.ok = c.lhs <= c.rhs * (1 + 1e-12);
    return c;
}

namespace {
double inv(double x) { return std::isinf(x) ? 0.0 : 1.0 / x; }
double from_inv(double y) { return y == 0 ? kInf : 1.0 / y; }
}  // namespace

HoelderCheck check_lorentz_hoelder(std::span<const double> f, std::span<const double> g,
                                   std::span<const double> mu, const HoelderSplit& s,
                                   double sigma, double factor) {
    if (!(s.a > 0 && s.a1 > 0 && s.b > 0 && s.b1 > 0))
        throw std::invalid_argument("check_lorentz_hoelder: exponents must be positive");
    const double r = from_inv(inv(s.a) + inv(s.b));
    const double r1 = from_inv(inv(s.a1) + inv(s.b1));
    HoelderCheck out;
    std::vector<double> fg(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) fg[i] = f[i] * g[i];
    auto lf = level_sets(f, mu);
    out.product.lhs = lorentz_norm(level_sets(fg, mu), r, r1);
    out.product.rhs = factor * lorentz_norm(lf, s.a, s.a1) * lorentz_norm(level_sets(g, mu), s.b, s.b1);
    out.product.ok = out.product.lhs <= out.product.rhs * (1 + 1e-12);
    if (sigma >= 0 && sigma <= 1) {
        out.has_interpolation = true;
        out.sigma = sigma;
        const double rs = from_inv(sigma * inv(s.a) + (1 - sigma) * inv(s.b));
        const double r1s = from_inv(sigma * inv(s.a1) + (1 - sigma) * inv(s.b1));
        out.interpolation.lhs = lorentz_norm(lf, rs, r1s);
        double la = log_lorentz_norm(lf, s.a, s.a1);
        double lb = log_lorentz_norm(lf, s.b, s.b1);
        double lr = (sigma > 0 ? sigma * la : 0.0) + (sigma < 1 ? (1 - sigma) * lb : 0.0);
        out.interpolation.rhs = factor * std::exp(lr);
        out.interpolation.ok = out.interpolation.lhs <= out.interpolation.rhs * (1 + 1e-12);
    }
    return out;
}

ExponentPair ExponentPair::make(double r, double q, double gamma, double nu) {
    if (!(r > 1) || !(q > 1)) throw std::invalid_argument("ExponentPair: need r > 1 and q > 1");
    ExponentPair e;
    e.r = r;
    e.q = q;
    e.gamma = gamma;
    e.nu = nu;
    e.r_prime = std::isinf(r) ? 1.0 : r / (r - 1);
    e.q_prime = std::isinf(q) ? 1.0 : q / (q - 1);
    e.r_dprime = r > 2 ? from_inv(0.5 - inv(r)) : kInf;
    return e;
}

ExponentPair ExponentPair::on_boundary(double r, double gamma, double nu) {
    double inv_q = 1.0 - gamma - nu * inv(r) / 2.0;
    if (inv_q < -1e-14) throw std::invalid_argument("ExponentPair: r below admissible range");
    return make(r, from_inv(std::max(inv_q, 0.0)), gamma, nu);
}

double ExponentPair::slack() const { return 1.0 - inv(q) - nu * inv(r) / 2.0 - gamma; }

bool ExponentPair::admissible(double tol) const {
    return slack() >= -tol && r >= 1.0 / (1.0 - gamma) - tol;
}

double min_admissible_r(double gamma, double nu) {
    return std::max(nu / (2.0 * (1.0 - gamma)), 1.0 / (1.0 - gamma));
}

std::vector<double> triple_norm_r_grid(double gamma, double nu, int grid_size) {
    const double rmin = min_admissible_r(gamma, nu);
    const double rmax = std::max(64.0 / (1.0 - gamma), 64.0 * rmin);
    std::vector<double> rs;
    rs.push_back(rmin);
    const int n = std::max(grid_size, 2);
    for (int i = 1; i < n; ++i)
        rs.push_back(rmin * std::pow(rmax / rmin, static_cast<double>(i) / (n - 1)));
    rs.push_back(kInf);
    return rs;
}

double log_mixed_norm(const std::vector<LevelSets>& slices, std::span<const double> weights,
                      const ExponentPair& pair) {
    std::vector<double> ln(slices.size());
    for (std::size_t j = 0; j < slices.size(); ++j)
        ln[j] = log_lorentz_norm(slices[j], 2 * pair.r_prime, 2.0);
    if (std::isinf(pair.q_prime)) {
        double m = -kInf;
        for (double x : ln) m = std::max(m, x);
        return m;
    }
    const double s = 2 * pair.q_prime;
    for (double& x : ln) x *= s;
    return log_sum_exp(ln, weights) / s;
}

namespace {
std::vector<LevelSets> slice_levels(const TimeWindow& u, std::span<const double> mu) {
    std::vector<LevelSets> out;
    out.reserve(u.size());
    for (const auto& row : u.values) out.push_back(level_sets(row, mu));
    return out;
}
}  // namespace

TripleNorm triple_norm(const TimeWindow& u, std::span<const double> mu, double gamma, double nu,
                       int grid_size) {
    if (u.size() == 0) throw std::invalid_argument("triple_norm: empty domain");
    if (!(gamma >= 0 && gamma < 1) || !(nu > 2))
        throw std::invalid_argument("triple_norm: need gamma in [0,1) and nu > 2");
    auto slices = slice_levels(u, mu);
    TripleNorm out;
    for (double r : triple_norm_r_grid(gamma, nu, grid_size)) {
        ExponentPair pair;
        if (std::isinf(r)) {
            pair.r = kInf;
            pair.q = gamma > 0 ? 1.0 / (1.0 - gamma) : 1.0;
            pair.r_prime = 1.0;
            pair.q_prime = gamma > 0 ? 1.0 / gamma : kInf;
            pair.r_dprime = 2.0;
            pair.gamma = gamma;
            pair.nu = nu;
        } else {
            pair = ExponentPair::on_boundary(r, gamma, nu);
        }
        double lv = log_mixed_norm(slices, u.weights, pair);
        out.trace.emplace_back(r, std::exp(lv));
        if (lv > out.log_value || out.trace.size() == 1) {
            out.log_value = lv;
            out.pair = pair;
        }
    }
    out.value = std::exp(out.log_value);
    return out;
}

Lemma1 lemma1_bound(const TimeWindow& w, std::span<const double> mu, const ExponentPair& pair) {
    if (!pair.admissible()) throw std::invalid_argument("lemma1_bound: inadmissible pair");
    const double nu = pair.nu;
    const double gam = 1.0 - inv(pair.q) - nu * inv(pair.r) / 2.0;
    auto slices = slice_levels(w, mu);
    Lemma1 out;
    out.lhs = std::exp(2.0 * log_mixed_norm(slices, w.weights, pair));
    const double sob = 2.0 * nu / (nu - 2.0);
    std::vector<double> ls(slices.size()), l2(slices.size());
    double sup2 = -kInf;
    for (std::size_t j = 0; j < slices.size(); ++j) {
        ls[j] = 2.0 * log_lorentz_norm(slices[j], sob, 2.0);
        double n2 = 2.0 * log_lorentz_norm(slices[j], 2.0, 2.0);
        sup2 = std::max(sup2, n2);
    }
    const double sigma = nu * inv(pair.r) / 2.0;
    double lint = log_sum_exp(ls, w.weights);
    if (!std::isfinite(sup2)) {
        out.rhs = 0;
        return out;
    }
    double lr = gam * std::log(w.length()) + (sigma > 0 ? sigma * lint : 0.0) +
                (sigma < 1 ? (1.0 - sigma) * sup2 : 0.0);
    out.rhs = std::exp(lr);
    return out;
}

}  // namespace dlab
