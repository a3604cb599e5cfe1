#include "dlab/solver.hpp"

#include <algorithm>
#include <cmath>

#include "dlab/numeric.hpp"

namespace dlab {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

std::vector<double> uniform_times(double t0, double t1, std::size_t intervals) {
    std::vector<double> t(intervals + 1);
    for (std::size_t j = 0; j <= intervals; ++j)
        t[j] = t0 + (t1 - t0) * static_cast<double>(j) / static_cast<double>(intervals);
    t.back() = t1;
    return t;
}

SpaceTimeField integrate(const QuasilinearForm& form, const std::vector<double>& u0,
                         const std::vector<double>& out_t, BoundaryMode mode,
                         const std::vector<char>& domain, const SolverControls& ctl,
                         SolveStats* stats) {
    const auto& s = *form.space;
    const int n = s.size();
    if (u0.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("integrate: u0 size");
    for (double v : u0)
        if (!std::isfinite(v)) throw std::invalid_argument("integrate: u0 not finite");
    if (out_t.size() < 2) throw std::invalid_argument("integrate: need at least two output times");
    std::vector<char> active(n, 1);
    if (mode == BoundaryMode::zero_outside) {
        if (domain.size() != static_cast<std::size_t>(n))
            throw std::invalid_argument("integrate: zero_outside needs a domain mask");
        active = domain;
    }
    auto rhs = [&](double t, const std::vector<double>& u, std::vector<double>& du) {
        auto r = form_action(form, t, u);
        for (int x = 0; x < n; ++x) du[x] = active[x] ? -r[x] / s.mu()[x] : 0.0;
    };
    std::vector<double> y = u0;
    if (mode == BoundaryMode::zero_outside)
        for (int x = 0; x < n; ++x)
            if (!active[x]) y[x] = 0;
    SpaceTimeField out;
    out.space_hash = s.hash();
    out.times = out_t;
    out.values.push_back(y);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y5(n);
    double t = out_t.front();
    double h = std::min(ctl.max_dt, (out_t[1] - out_t[0]));
    SolveStats st;
    st.min_step = kInf;
    rhs(t, y, k1);
    for (std::size_t j = 1; j < out_t.size(); ++j) {
        const double target = out_t[j];
        if (!(target > t)) throw std::invalid_argument("integrate: output times not increasing");
        while (t < target) {
            bool last = false;
            double step = std::min(h, ctl.max_dt);
            if (t + step >= target - 1e-12 * std::max(1.0, std::abs(target))) {
                step = target - t;
                last = true;
            }
            auto stage = [&](std::vector<double>& dst, std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
                for (int x = 0; x < n; ++x) {
                    double acc = y[x];
                    for (const auto& [c, k] : terms) acc += step * c * (*k)[x];
                    dst[x] = acc;
                }
            };
            stage(tmp, {{a21, &k1}});
            rhs(t + c2 * step, tmp, k2);
            stage(tmp, {{a31, &k1}, {a32, &k2}});
            rhs(t + c3 * step, tmp, k3);
            stage(tmp, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
            rhs(t + c4 * step, tmp, k4);
            stage(tmp, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
            rhs(t + c5 * step, tmp, k5);
            stage(tmp, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
            rhs(t + step, tmp, k6);
            stage(y5, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
            rhs(t + step, y5, k7);
            double err = 0;
            for (int x = 0; x < n; ++x) {
                double ex = step * (e1 * k1[x] + e3 * k3[x] + e4 * k4[x] + e5 * k5[x] +
                                    e6 * k6[x] + e7 * k7[x]);
                double sc = ctl.atol + ctl.rtol * std::max(std::abs(y[x]), std::abs(y5[x]));
                err = std::max(err, std::abs(ex) / sc);
            }
            if (!std::isfinite(err)) throw SolverError("integrate: non-finite state at t=" + std::to_string(t));
            if (err <= 1.0) {
                t = last ? target : t + step;
                y.swap(y5);
                k1.swap(k7);
                ++st.accepted;
                st.min_step = std::min(st.min_step, step);
                double fac = err == 0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
                if (!last || fac < 1) h = std::max(step * fac, ctl.min_dt);
            } else {
                ++st.rejected;
                h = step * std::clamp(0.9 * std::pow(err, -0.25), 0.1, 0.9);
                if (h < ctl.min_dt)
                    throw SolverError("integrate: step-size collapse at t=" + std::to_string(t));
            }
            if (st.accepted + st.rejected > ctl.max_steps)
                throw SolverError("integrate: step budget exhausted at t=" + std::to_string(t));
        }
        out.values.push_back(y);
    }
    if (stats) *stats = st;
    out.validate();
    return out;
}

const char* sign_mode_name(SignMode m) {
    switch (m) {
        case SignMode::solution: return "solution";
        case SignMode::subsolution: return "subsolution";
        case SignMode::supersolution: return "supersolution";
    }
    return "?";
}

ResidualCertificate certify_weak(const SpaceTimeField& u, const QuasilinearForm& form,
                                 const std::vector<WeakProbe>& probes, SignMode mode,
                                 double budget_rel, const std::vector<char>& domain) {
    const auto& s = *form.space;
    ResidualCertificate cert;
    cert.test_set = probes;
    cert.budget_rel = budget_rel;
    cert.sign_mode = mode;
    cert.pass = true;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const auto& pr = probes[k];
        for (int x = 0; x < s.size(); ++x) {
            if (!domain.empty() && !domain[x] && pr.phi[x] != 0)
                throw std::invalid_argument("certify_weak: probe " + std::to_string(k) +
                                            " not supported in U");
            if (mode != SignMode::solution && pr.phi[x] < 0)
                throw std::invalid_argument("certify_weak: probe must be nonnegative");
        }
        std::vector<double> tg;
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < u.times.size(); ++j)
            if (u.times[j] >= pr.a - 1e-12 && u.times[j] <= pr.b + 1e-12) {
                tg.push_back(u.times[j]);
                idx.push_back(j);
            }
        if (tg.size() < 2 || std::abs(tg.front() - pr.a) > 1e-9 || std::abs(tg.back() - pr.b) > 1e-9)
            throw std::invalid_argument("certify_weak: probe times must be grid times");
        auto w = simpson_weights(tg);
        Accumulator integral, absint;
        for (std::size_t q = 0; q < tg.size(); ++q) {
            double e = evaluate_form(form, tg[q], u.values[idx[q]], pr.phi).total;
            integral.add(w[q] * e);
            absint.add(w[q] * std::abs(e));
        }
        Accumulator mb, ma, sc;
        for (int x = 0; x < s.size(); ++x) {
            mb.add(u.values[idx.back()][x] * pr.phi[x] * s.mu()[x]);
            ma.add(u.values[idx.front()][x] * pr.phi[x] * s.mu()[x]);
            sc.add((std::abs(u.values[idx.back()][x]) + std::abs(u.values[idx.front()][x])) *
                   std::abs(pr.phi[x]) * s.mu()[x]);
        }
        double res = mb.value() - ma.value() + integral.value();
        double scale = sc.value() + absint.value();
        cert.residuals.push_back(res);
        cert.scales.push_back(scale);
        double viol = mode == SignMode::solution        ? std::abs(res)
                      : mode == SignMode::subsolution   ? res
                                                        : -res;
        double ratio = viol / (budget_rel * std::max(scale, 1e-300));
        cert.worst_ratio = std::max(cert.worst_ratio, ratio);
        if (ratio > 1) cert.pass = false;
    }
    return cert;
}

QuasilinearForm with_source(const QuasilinearForm& form, std::vector<double> source) {
    for (double v : source)
        if (!(v >= 0)) throw std::invalid_argument("with_source: source must be nonnegative");
    QuasilinearForm f = form;
    auto base = form.density;
    f.density = [base, source](double t, int x, const std::vector<double>& u) {
        return (base ? base(t, x, u) : 0.0) - source[x];
    };
    f.name = form.name + "+source";
    return f;
}

SupersolutionResult make_supersolution(const QuasilinearForm& form,
                                       const std::vector<double>& source,
                                       const std::vector<double>& u0,
                                       const std::vector<double>& times,
                                       const std::vector<WeakProbe>& probes,
                                       const SolverControls& ctl) {
    auto driven = with_source(form, source);
    SupersolutionResult r;
    r.field = integrate(driven, u0, times, BoundaryMode::full_space, {}, ctl);
    r.certificate = certify_weak(r.field, form, probes, SignMode::supersolution);
    if (!r.certificate.pass)
        throw std::runtime_error("make_supersolution: supersolution certificate failed");
    r.nonnegative = true;
    for (const auto& row : r.field.values)
        for (double v : row) r.nonnegative = r.nonnegative && v >= 0;
    return r;
}

DirichletSpace kolmogorov_space(int n1, int n2, double spacing) {
    auto g = build_grid_space({n1, n2}, spacing);
    std::vector<Edge> edges = g.edges();
    for (auto& e : edges) {
        bool x2_edge = std::abs(g.coords[e.i][1] - g.coords[e.j][1]) > 0;
        if (x2_edge) e.c = 0;
    }
    DirichletSpace k(g.mu(), edges);
    k.dims = g.dims;
    k.spacing = g.spacing;
    k.coords = g.coords;
    return k;
}

QuasilinearForm build_kolmogorov_form(std::shared_ptr<const DirichletSpace> grid,
                                      const std::array<std::array<double, 2>, 2>& B, int m) {
    if (grid->dims.size() != 2) throw std::invalid_argument("kolmogorov: needs a 2D grid");
    if (m >= 2) throw std::invalid_argument("kolmogorov: requires m < n");
    if (B[0][0] != 0 || B[0][1] != 0 || B[1][1] != 0)
        throw std::invalid_argument("kolmogorov: drift must be [[0,0],[b,0]]");
    const double b21 = B[1][0];
    const int n1 = grid->dims[0], n2 = grid->dims[1];
    const double h = grid->spacing;
    const double x1c = 0.5 * (n1 - 1) * h;
    auto sp = grid;
    QuasilinearForm f;
    f.space = grid;
    f.flux = [sp](double, int e, double ui, double uj) { return sp->edges()[e].c * (ui - uj); };
    f.density = [sp, b21, n1, n2, h, x1c](double, int x, const std::vector<double>& u) {
        int i1 = x % n1, i2 = x / n1;
        double x1 = i1 * h - x1c;
        double v = b21 * x1;  // transport speed multiplying d/dx2
        double d2;
        if (v >= 0)
            d2 = i2 + 1 < n2 ? (u[x + n1] - u[x]) / h : 0.0;
        else
            d2 = i2 > 0 ? (u[x] - u[x - n1]) / h : 0.0;
        return -v * d2;
    };
    f.name = "kolmogorov";
    f.linear = true;
    return f;
}

}  // namespace dlab
