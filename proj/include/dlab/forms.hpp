#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dlab/field.hpp"
#include "dlab/lorentz.hpp"
#include "dlab/space.hpp"

namespace dlab {

// E_t(u,g) = sum_e F_e(t,u)(g_i - g_j) + sum_x B_x(t,u) g_x mu_x.
struct QuasilinearForm {
    std::shared_ptr<const DirichletSpace> space;
    std::function<double(double t, int e, double ui, double uj)> flux;
    std::function<double(double t, int x, const std::vector<double>& u)> density;
    std::string name;
    bool linear = false;
};

struct FormValue {
    double A = 0;
    double B = 0;
    double total = 0;
};

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<double> edge_fluxes(const QuasilinearForm& form, double t,
                                const std::vector<double>& u);
std::vector<double> node_densities(const QuasilinearForm& form, double t,
                                   const std::vector<double>& u);
FormValue evaluate_form(const QuasilinearForm& form, double t, const std::vector<double>& u,
                        const std::vector<double>& g);
// r_x with E_t(u,g) = sum_x r_x g_x.
std::vector<double> form_action(const QuasilinearForm& form, double t,
                                const std::vector<double>& u);
// Nodal measure dA_t(u,g)(x) = 1/2 sum_{e ~ x} F_e (g_x - g_y).
std::vector<double> a_measure(const QuasilinearForm& form, double t, const std::vector<double>& u,
                              const std::vector<double>& g);

QuasilinearForm heat_form(std::shared_ptr<const DirichletSpace> space);

enum class CoefficientKind { b, c, d, e, w1, w2, w3 };
const char* kind_name(CoefficientKind k);
bool is_first_order(CoefficientKind k);

// Time-independent coefficient with its Lorentz exponent pair.
struct Coefficient {
    CoefficientKind kind = CoefficientKind::d;
    std::vector<double> values;
    double r = 2;
    double q = kInf;
    double weak_norm = 0;  // ||.||_{r,inf} over the reference ball
    double norm = 0;       // ||.||_{L^q(I -> L^{r,inf})}
};

struct AdaptedCoefficients {
    double a = 1;
    double a_bar = 1;
    double gamma = 0.5;
    double nu = 4;
    double time_length = 1;
    std::vector<Coefficient> coeffs;
    double kappa = 0;

    double sum_norms(CoefficientKind k) const;
    double sum_sq_norms(CoefficientKind k) const;
};

// Computes weak norms over `ball` (all nodes when empty), checks exponent admissibility and kappa.
AdaptedCoefficients certify_coefficients(const DirichletSpace& s, std::vector<Coefficient> cs,
                                         double a, double a_bar, double gamma, double nu,
                                         double time_length, const std::vector<char>& ball = {});

using Nonlinearity = std::function<double(double t, int e, double u)>;

// A = alpha * grad u on every edge (alpha evaluated at the edge average of u),
// B = d u - w2 using the realized d and w2 coefficients.
QuasilinearForm build_aronson_serrin_form(std::shared_ptr<const DirichletSpace> space,
                                          const AdaptedCoefficients& coeffs,
                                          const Nonlinearity& alpha);

struct AdaptednessProbe {
    double t = 0;
    std::vector<double> u, v, f, g;
};

struct AdaptednessEntry {
    std::string inequality;
    std::size_t probe = 0;
    double lhs = 0;
    double rhs = 0;
    double margin = 0;  // (rhs - lhs) / scale
};

struct AdaptednessReport {
    std::vector<AdaptednessEntry> entries;
    double min_margin = kInf;
    bool pass = false;
};

// Lorentz duality factors in the distribution-function normalization.
double duality_factor_zero_order(double r);   // r'
double duality_factor_first_order(double r);  // sqrt(r''/2)

AdaptednessReport verify_adaptedness(const QuasilinearForm& form,
                                     const AdaptedCoefficients& coeffs,
                                     const std::vector<AdaptednessProbe>& probes,
                                     double holder_scale = 1.0);

struct TraceItem {
    std::string name;
    double value = 0;
    std::string formula;
};

struct HypothesisConstants {
    double a = 1;       // effective a entering H.1/H.2
    double a_bar = 1;
    double C1 = 0;
    double C2 = 0;
    double beta = 1;
    double k = 2;
    double kappa = 0;
    double gamma = 0.5;
    double nu = 4;
    double eta = 0.1;
    std::vector<TraceItem> trace;
};

// cutoff_bound = C_cut: Gamma(psi,psi) <= C_cut ((delta-delta')R)^{-2} dmu.
HypothesisConstants derive_h1_constants(const AdaptedCoefficients& coeffs, double C_cut, double R,
                                        double k = 2.0, double eta = 0.1);

// C1 summand of the lemma at a given p (before the p-uniform bound), for trace inspection.
double lemma_c1_at_p(const AdaptedCoefficients& coeffs, double p);

struct HFunction {
    double p = 2;
    double kappa = 0;
    double n = kInf;
    double epsilon = 0;
};

struct HValue {
    double H = 0;
    double H_prime = 0;
};

HValue h_eval(const HFunction& hf, double v);

struct HypothesisCheck {
    std::string name;
    double lhs = 0;
    double rhs = 0;
    double margin = 0;
    double budget = 0;
    bool pass = false;
    double t = 0;
};

// Time weight on the window; defaults to 1.
using TimeWeight = std::function<double(double)>;

HypothesisCheck check_H1a(const SpaceTimeField& u, const QuasilinearForm& form,
                          const NestedDomainFamily& fam, const HypothesisConstants& hc,
                          double p, double n, double delta_prime, double delta,
                          std::pair<double, double> interval, const TimeWeight& chi = {});

HypothesisCheck check_H1b(const SpaceTimeField& u, const QuasilinearForm& form,
                          const NestedDomainFamily& fam, const HypothesisConstants& hc,
                          double p, double epsilon, double delta_prime, double delta,
                          std::pair<double, double> interval, const TimeWeight& chi = {});

struct DField {
    double value = 0;  // D_i(t), time-independent
    double r = 2;      // the Lorentz exponent entering ||psi||_{2r',2}
};

std::vector<DField> h2_d_fields(const AdaptedCoefficients& coeffs);

HypothesisCheck check_H2(const std::vector<double>& u, double t, const QuasilinearForm& form,
                         const NestedDomainFamily& fam, const HypothesisConstants& hc,
                         double epsilon, double delta_prime, double delta,
                         const std::vector<DField>& D);

}  // namespace dlab
