#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "dlab/field.hpp"
#include "dlab/forms.hpp"

namespace dlab {

enum class BoundaryMode { full_space, zero_outside };

struct SolverControls {
    double rtol = 1e-10;
    double atol = 1e-12;
    double max_dt = 0.05;
    double min_dt = 1e-10;
    std::size_t max_steps = 50'000'000;
};

struct SolveStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    double min_step = 0;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// mu_x du_x/dt = -(E_t(u, 1_x)), Dormand-Prince 5(4) with steps landing on output_times.
// In zero_outside mode nodes outside `domain` are held at 0.
SpaceTimeField integrate(const QuasilinearForm& form, const std::vector<double>& u0,
                         const std::vector<double>& output_times,
                         BoundaryMode mode = BoundaryMode::full_space,
                         const std::vector<char>& domain = {}, const SolverControls& ctl = {},
                         SolveStats* stats = nullptr);

std::vector<double> uniform_times(double t0, double t1, std::size_t intervals);

enum class SignMode { solution, subsolution, supersolution };
const char* sign_mode_name(SignMode m);

struct WeakProbe {
    std::vector<double> phi;
    double a = 0;
    double b = 0;
};

struct ResidualCertificate {
    std::vector<WeakProbe> test_set;
    std::vector<double> residuals;  // signed
    std::vector<double> scales;
    double budget_rel = 1e-8;
    SignMode sign_mode = SignMode::solution;
    bool pass = false;
    double worst_ratio = 0;  // max over probes of signed violation / (budget_rel * scale)
};

// Weak identity residual int u(b) phi - int u(a) phi + int_a^b E_t(u, phi) dt, evaluated with
// composite Simpson on the field's (uniform) grid.
ResidualCertificate certify_weak(const SpaceTimeField& u, const QuasilinearForm& form,
                                 const std::vector<WeakProbe>& probes, SignMode mode,
                                 double budget_rel = 1e-8,
                                 const std::vector<char>& domain = {});

// Adds the nonnegative source density s: the solution of the new form is a supersolution of the
// original one.
QuasilinearForm with_source(const QuasilinearForm& form, std::vector<double> source);

struct SupersolutionResult {
    SpaceTimeField field;
    ResidualCertificate certificate;
    bool nonnegative = false;
};

SupersolutionResult make_supersolution(const QuasilinearForm& form,
                                       const std::vector<double>& source,
                                       const std::vector<double>& u0,
                                       const std::vector<double>& output_times,
                                       const std::vector<WeakProbe>& probes,
                                       const SolverControls& ctl = {});

// Kolmogorov-type space: x1 edges carry conductance, x2 edges only metric length.
DirichletSpace kolmogorov_space(int n1, int n2, double spacing);

// drift_matrix = [[0,0],[b21,0]] in (x1,x2) coordinates; m = 1 diffusive direction.
QuasilinearForm build_kolmogorov_form(std::shared_ptr<const DirichletSpace> grid,
                                      const std::array<std::array<double, 2>, 2>& drift_matrix,
                                      int m = 1);

}  // namespace dlab
