#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "dlab/field.hpp"
#include "dlab/forms.hpp"
#include "dlab/space.hpp"

namespace dlab {

struct EstimateInputs {
    double p = 0;
    double n = kInf;
    double epsilon = 0;
    double delta_prime = 0;
    double delta = 0;
    double lambda = 0;
};

struct BudgetItem {
    std::string name;
    double value = 0;
};

struct EstimateReport {
    std::string name;
    double lhs = 0;
    double rhs = 0;
    double margin = 0;
    EstimateInputs inputs;
    double tolerance_budget = 0;
    std::vector<BudgetItem> budget;
    bool pass = false;
    // "pass", "fail" or "unverified"
    std::string status;
    std::string note;

    // Sums the budget items and sets margin, pass and status.
    void finalize(bool asserted = true);
};

struct LedgerEntry {
    std::string name;
    double value = 0;
    std::string formula;
    std::string inputs;
};

struct ConstantLedger {
    // hypothesis constants
    double a = 1, a_bar = 1;
    double C1 = 0, C2 = 0, C3 = 0;
    double C_SI = 1, C_SI0 = 1, C_WPI = 1;
    double nu = 4, gamma = 0.5, k = 2, beta = 1, eta = 0.1, kappa = 0;
    // geometry
    std::array<double, 4> tau{0.25, 0.5, 0.75, 1.0};
    double delta_star = 0.5;
    double delta = 0.5;
    double R = 1;
    double mu_B1 = 1;
    double D_sum = 0;  // sum of the H.2 D-field values

    // derived
    double L = 0;
    double A0 = 0, C_prime = 0, A1 = 0, k1 = 0, A2 = 0, k2 = 0, A3 = 0;
    double A0_late = 0, C_prime_late = 0, A1_late = 0, A2_late = 0, A3_late = 0;
    double log_C_PHI = 0;      // A3 + A3'
    double log_log_C_PHI = 0;  // log(A3 + A3'), finite when C_PHI itself overflows
    double C_PHI = 1;
    std::vector<LedgerEntry> trace;
};

// Builds the hypothesis part of a ledger from certified constants.
ConstantLedger make_ledger(const HypothesisConstants& hc, const SpaceCertificate& cert,
                           double C_WPI, const NestedDomainFamily& fam,
                           std::array<double, 4> tau, double delta, double mu_B1, double D_sum);

// Per-level factor bound of the Moser step at |p| and gap delta - delta'.
struct MoserStep {
    int level = 0;
    double delta_i = 0;   // outer radius of the level
    double d_i = 0;       // (delta - delta') 2^{-i-1}
    double p_i = 0;       // p theta^i
    double log_factor = 0;
    double log_norm = 0;  // log |||u^{p_i/2}|||^2 on the level cylinder (NaN when not sampled)
};

struct MoserProduct {
    double log_Pi = 0;    // log of the accumulated constant, tail included
    double tail = 0;      // certified bound on the omitted log tail
    double theta = 0;
    std::vector<MoserStep> steps;
};

enum class MoserKind { subsolution, supersolution };

// log(prod F_i^{theta^{-i}}) for the iteration at exponent p, interval length I and gap.
MoserProduct moser_product(const ConstantLedger& L, MoserKind kind, double p, double I,
                           double gap);

// Paper-form A0 for the subsolution (p >= 2) and supersolution cases.
double A0_subsol(const ConstantLedger& L, double p, double I, double gap);
double A0_supsol(const ConstantLedger& L, double p, double I, double gap);

enum class Branch { minus, plus };
const char* branch_name(Branch b);

EstimateReport cacciopoli_subsol(const SpaceTimeField& u, const QuasilinearForm& form,
                                 const NestedDomainFamily& fam, const ConstantLedger& L,
                                 double p, double delta_prime, double delta);

struct SupTimeEnergy {
    EstimateReport sup_l2;
    EstimateReport energy;
    double L = 0;
    bool single_slab = false;
};

SupTimeEnergy suptime_energy(const SpaceTimeField& u, const QuasilinearForm& form,
                             const NestedDomainFamily& fam, const ConstantLedger& L,
                             double delta_prime, double delta);

// Slab length (a |delta - delta'|^k / (48 C1 C_SI))^{1/gamma}; infinite when C1 = 0.
double slab_length(const ConstantLedger& L, double gap);

struct MveResult {
    EstimateReport report;
    MoserProduct product;
    double A0 = 0;
    double C_prime = 0;
};

MveResult mve_subsol(const SpaceTimeField& u, const QuasilinearForm& form,
                     const NestedDomainFamily& fam, const ConstantLedger& L, double p,
                     double delta_prime, double delta, int sampled_levels = 8);

MveResult mve_supsol(const SpaceTimeField& u, const QuasilinearForm& form,
                     const NestedDomainFamily& fam, const ConstantLedger& L, double p,
                     double epsilon, double delta_prime, double delta, Branch branch,
                     int sampled_levels = 8);

struct LogLemmaResult {
    double anchor = 0;  // c = W(t_mid)
    std::vector<EstimateReport> reports;
};

// Upper branch on (t0, t_mid): measure of {log u_eps - c > lambda}; lower branch on
// (t_mid, t1): measure of {log u_eps - c < -lambda}.
LogLemmaResult log_lemma(const SpaceTimeField& u, const DirichletSpace& s,
                         const NestedDomainFamily& fam,
                         const ConstantLedger& L, double epsilon, double delta,
                         std::array<double, 3> times, const std::vector<double>& lambdas,
                         bool upper);

struct BombieriCase {
    std::string name;
    double bound = 0;  // bound on A in the normalized form A / gap^{k2 + 2 k1 / gamma}
};

struct BombieriResult {
    double A = 0;
    double exponent = 0;  // k2 + 2 k1 / gamma
    double log_A3 = 0;
    double A3 = 0;        // the bound on log sup f
    double tail = 0;      // bound on the omitted relative tail
    std::size_t terms = 0;
    std::vector<BombieriCase> cases;
    int binding = 0;
    double recorded_log_phi = 0;
    std::vector<double> log_terms;  // leading log terms of the series
};

// K_quasi is the quasi-triangle constant of the space-time Lorentz norm.
BombieriResult bombieri_constant(double A1, double k1, double A2, double k2, double gamma,
                                 double eta, double delta_star, double K_quasi);

// Direct log-space summation of the first `terms` series terms.
double bombieri_brute_log_sum(double A, double exponent, double delta_star, std::size_t terms);

struct HarnackConstant {
    double log_C_PHI = 0;
    double log_log_C_PHI = 0;
    BombieriResult early;
    BombieriResult late;
};

// Fills every derived ledger field and its trace.
HarnackConstant harnack_constant(ConstantLedger& L);

// Relative difference between recorded and recomputed derived constants.
double replay_ledger(const ConstantLedger& L);

struct MonotonicityProbe {
    std::string name;
    double base = 0;
    double probed = 0;
    bool ok = false;
};

std::vector<MonotonicityProbe> monotonicity_audit(const ConstantLedger& L, double step = 1e-3);

struct HarnackVerdict {
    double sup_minus = 0;
    double inf_plus = 0;
    double ratio = 0;
    double log_ratio = 0;
    double log_C_PHI = 0;
    bool certified = false;
    bool pass = false;
    std::string note;
};

// Q- = (s + tau1, s + tau2) x B_delta, Q+ = (s + tau3, s + tau4) x B_delta.
HarnackVerdict harnack_verify(const SpaceTimeField& u, const NestedDomainFamily& fam,
                              const ConstantLedger& L, double s, double delta,
                              bool hypotheses_certified);

struct MaxPrincipleInput {
    double M = 0;
    double norm_b = 0;
    double norm_d = 0;
    double norm_w1 = 0;
    double norm_w2 = 0;
    double t0 = 0, t1 = 1;
    double mu_U = 1;
    std::vector<char> domain;
};

double kappa_shift(const MaxPrincipleInput& in);

EstimateReport maximum_principle_check(const SpaceTimeField& u, const ConstantLedger& L,
                                       const MaxPrincipleInput& in);

struct PointwiseResult {
    double lhs = 0;
    double rhs = 0;
    bool pass = false;
};

// chain: node sequence from x to y; d = chain length in the metric.
PointwiseResult pointwise_estimate(const SpaceTimeField& u, const DirichletSpace& s,
                                   const std::vector<int>& chain, double s_time, double t_time,
                                   const ConstantLedger& L, double nbhd_delta);

double pointwise_rhs(double C, double s_time, double t_time, double R, double nbhd_delta,
                     double d);

}  // namespace dlab
