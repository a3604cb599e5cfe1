#pragma once

#include <span>
#include <vector>

#include "dlab/numeric.hpp"

namespace dlab {

// Distribution data of a simple function: v_1 > ... > v_K > 0 and M_i = mu(|f| >= v_i).
struct LevelSets {
    std::vector<double> v;
    std::vector<double> M;
    bool empty() const { return v.empty(); }
    double vmax() const { return v.empty() ? 0.0 : v.front(); }
};

// Nodes with zero measure are ignored, so a masked measure restricts the norm to a subset.
LevelSets level_sets(std::span<const double> f, std::span<const double> mu);

// ||f||_{r,r1}; r1 = kInf selects the weak norm.
double lorentz_norm(const LevelSets& ls, double r, double r1);
double lorentz_norm(std::span<const double> f, std::span<const double> mu, double r, double r1);
// log ||f||_{r,r1}, finite range even when the norm itself would overflow.
double log_lorentz_norm(const LevelSets& ls, double r, double r1);

double lp_norm(std::span<const double> f, std::span<const double> mu, double r);

// Quasi-triangle constant: ||u+v|| <= K (||u|| + ||v||).
double quasi_triangle_K(double r, double r1);

struct LawCheck {
    bool ok = false;
    double lhs = 0;
    double rhs = 0;
    double ratio() const { return rhs > 0 ? lhs / rhs : (lhs > 0 ? kInf : 0.0); }
};

LawCheck check_power_law(std::span<const double> f, std::span<const double> mu, double sigma,
                         double r, double r1, double rtol = 1e-12);
LawCheck check_monotonicity(std::span<const double> f, std::span<const double> mu, double r,
                            double r1, double r2);

struct HoelderSplit {
    double a, a1, b, b1;
};

struct HoelderCheck {
    LawCheck product;
    bool has_interpolation = false;
    double sigma = 0;
    LawCheck interpolation;
    bool ok() const { return product.ok && (!has_interpolation || interpolation.ok); }
};

// Exponents (r, r1) are derived from the split. With sigma in [0,1] the interpolation variant
// ||f||_{r_s,r1_s} <= ||f||_{a,a1}^sigma ||f||_{b,b1}^{1-sigma} is checked as well.
HoelderCheck check_lorentz_hoelder(std::span<const double> f, std::span<const double> g,
                                   std::span<const double> mu, const HoelderSplit& split,
                                   double sigma = -1.0, double factor = 1.0);

struct ExponentPair {
    double r = 0, q = 0;
    double r_prime = 0, q_prime = 0;
    double r_dprime = 0;
    double gamma = 0;
    double nu = 0;

    // q = kInf is allowed.
    static ExponentPair make(double r, double q, double gamma, double nu);
    // the pair on the boundary 1 - 1/q - nu/(2r) = gamma
    static ExponentPair on_boundary(double r, double gamma, double nu);
    double slack() const;
    bool admissible(double tol = 1e-12) const;
};

// Smallest admissible r for (gamma, nu); there q = infinity.
double min_admissible_r(double gamma, double nu);

// Time samples of a node field on an interval, with quadrature weights.
struct TimeWindow {
    double t0 = 0, t1 = 0;
    std::vector<double> times;
    std::vector<double> weights;
    std::vector<std::vector<double>> values;
    double length() const { return t1 - t0; }
    std::size_t size() const { return times.size(); }
};

struct TripleNorm {
    double value = 0;
    double log_value = -kInf;
    ExponentPair pair;
    std::vector<std::pair<double, double>> trace;  // (r, candidate value)
};

std::vector<double> triple_norm_r_grid(double gamma, double nu, int grid_size);

// |||u|||: sup over the sampled admissible boundary of (int ||u(t)||_{2r',2}^{2q'} dt)^{1/(2q'})
TripleNorm triple_norm(const TimeWindow& u, std::span<const double> mu, double gamma, double nu,
                       int grid_size = 65);

// log of (int ||u(t)||_{2r',2}^{2q'} dt)^{1/(2q')}
double log_mixed_norm(const std::vector<LevelSets>& slices, std::span<const double> weights,
                      const ExponentPair& pair);

struct Lemma1 {
    double lhs = 0;
    double rhs = 0;
};

Lemma1 lemma1_bound(const TimeWindow& w, std::span<const double> mu, const ExponentPair& pair);

}  // namespace dlab
