#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace dlab {

struct Edge {
    int i = 0;
    int j = 0;
    double c = 0.0;    // conductance
    double len = 1.0;  // metric length
};

// Finite weighted graph viewed as a metric measure Dirichlet space.
class DirichletSpace {
public:
    DirichletSpace() = default;
    DirichletSpace(std::vector<double> mu, std::vector<Edge> edges);

    int size() const { return static_cast<int>(mu_.size()); }
    const std::vector<double>& mu() const { return mu_; }
    const std::vector<Edge>& edges() const { return edges_; }
    // incident edge indices per node
    const std::vector<std::vector<int>>& incident() const { return incident_; }
    double total_measure() const;
    double measure(const std::vector<char>& set) const;

    // lattice metadata, empty for non-grid spaces
    std::vector<int> dims;
    double spacing = 1.0;
    bool torus = false;
    std::vector<std::vector<double>> coords;

    std::vector<double> distances_from(int source) const;
    std::string hash() const;

    void write(std::ostream& os) const;
    static DirichletSpace read(std::istream& is);

private:
    std::vector<double> mu_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> incident_;
};

using WeightRule = std::function<double(const std::vector<double>& coord)>;

DirichletSpace build_grid_space(const std::vector<int>& dims, double spacing,
                                const WeightRule& weight = {}, bool torus = false);

int grid_index(const DirichletSpace& s, const std::vector<int>& multi);

// Nodewise energy measure Gamma(u,v)(x) = 1/2 sum_y c(x,y)(u(x)-u(y))(v(x)-v(y)).
std::vector<double> energy_measure(const DirichletSpace& s, const std::vector<double>& u,
                                   const std::vector<double>& v);
// Edge-sum Dirichlet form.
double dirichlet_form(const DirichletSpace& s, const std::vector<double>& u,
                      const std::vector<double>& v);

struct NestedDomainFamily {
    int center = 0;
    double R = 1.0;
    double delta_star = 0.5;
    double a = 0, a_prime = 0, b_prime = 0, b = 0;
    double c0 = 1.0;
    double C3 = 1.0;
    double k_time = 1.0;
    std::vector<double> dist;  // distances from center, filled by attach()

    double a_delta(double d) const { return c0 * d; }
    // I^-_delta = (a - a_delta, b'), I^+_delta = (a', b + a_delta)
    std::pair<double, double> I_minus(double d) const { return {a - a_delta(d), b_prime}; }
    std::pair<double, double> I_plus(double d) const { return {a_prime, b + a_delta(d)}; }
    // B_delta = open ball of radius delta R
    std::vector<char> ball(double d) const;
    void attach(const DirichletSpace& s);
};

NestedDomainFamily nested_family(int center, double R, double delta_star,
                                 std::array<double, 4> anchors, double c0);

struct CutoffFunction {
    std::vector<double> values;
    double inner_delta = 0;
    double outer_delta = 0;
    double C_cut = 0;  // max_x Gamma(psi,psi)(x) ((delta-delta')R)^2 / mu(x)
};

CutoffFunction build_cutoff(const DirichletSpace& s, const NestedDomainFamily& fam,
                            double delta_prime, double delta);

// A witness for the weighted Sobolev inequality: f > 0 and the exponents p it is used with.
struct SobolevWitness {
    std::vector<double> f;
    std::vector<double> p;
};

struct SobolevTerms {
    double lhs = 0;     // ||f^{p/2} psi||^2_{2nu/(nu-2),2}
    double energy = 0;  // (p^2/4) int f^{p-2} psi^2 dGamma(f)
    double mass = 0;    // int_{B_delta} f^p dmu
};

SobolevTerms sobolev_terms(const DirichletSpace& s, const NestedDomainFamily& fam,
                           const CutoffFunction& psi, double nu, const std::vector<double>& f,
                           double p);

struct SpaceCertificate {
    double nu = 0;
    double C_SI = 0;
    double C_SI0 = 0;
    double C_wPI = 0;
    double k = 1;
    double delta_prime = 0;
    double delta = 0;
    std::vector<SobolevWitness> witness_set;
    std::vector<std::vector<double>> poincare_witnesses;
};

struct SobolevSweep {
    double C_SI = 0;
    double C_SI0 = 0;
    double ratio = 0;  // C_SI0 / C_SI at the chosen point
};

SpaceCertificate certify_sobolev(const DirichletSpace& s, const NestedDomainFamily& fam,
                                 double delta_prime, double delta, double nu,
                                 const std::vector<SobolevWitness>& witnesses, double k = 1.0);

// C_SI needed at a fixed ratio C_SI0 = ratio * C_SI.
double sobolev_constant_at_ratio(const DirichletSpace& s, const NestedDomainFamily& fam,
                                 double delta_prime, double delta, double nu,
                                 const std::vector<SobolevWitness>& witnesses, double k,
                                 double ratio);

// Max relative violation of wSI by the certificate over its own witnesses (<= 0 means holds).
double recheck_sobolev(const DirichletSpace& s, const NestedDomainFamily& fam,
                       const SpaceCertificate& cert);

struct PoincareTerms {
    double lhs = 0;
    double rhs_integral = 0;  // int psi^2 f^{-2} dGamma(f)
};

PoincareTerms poincare_terms(const DirichletSpace& s, const CutoffFunction& psi,
                             const std::vector<double>& f);

double certify_poincare(const DirichletSpace& s, const NestedDomainFamily& fam,
                        double delta_prime, double delta,
                        const std::vector<std::vector<double>>& witnesses);

class CertificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dlab
