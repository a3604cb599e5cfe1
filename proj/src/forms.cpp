#include "dlab/forms.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dlab/numeric.hpp"

namespace dlab {

namespace {

void check_finite(double v, const char* what, int where, double t) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "form evaluation: non-finite " << what << " at index " << where << ", t=" << t;
        throw EvaluationError(os.str());
    }
}

}  // namespace

std::vector<double> edge_fluxes(const QuasilinearForm& form, double t,
                                const std::vector<double>& u) {
    const auto& edges = form.space->edges();
    std::vector<double> F(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        F[e] = form.flux(t, static_cast<int>(e), u[edges[e].i], u[edges[e].j]);
        check_finite(F[e], "edge flux", static_cast<int>(e), t);
    }
    return F;
}

std::vector<double> node_densities(const QuasilinearForm& form, double t,
                                   const std::vector<double>& u) {
    std::vector<double> B(form.space->size(), 0.0);
    if (!form.density) return B;
    for (int x = 0; x < form.space->size(); ++x) {
        B[x] = form.density(t, x, u);
        check_finite(B[x], "node density", x, t);
    }
    return B;
}

FormValue evaluate_form(const QuasilinearForm& form, double t, const std::vector<double>& u,
                        const std::vector<double>& g) {
    const auto& s = *form.space;
    auto F = edge_fluxes(form, t, u);
    auto B = node_densities(form, t, u);
    Accumulator A, Bs;
    for (std::size_t e = 0; e < F.size(); ++e)
        A.add(F[e] * (g[s.edges()[e].i] - g[s.edges()[e].j]));
    for (int x = 0; x < s.size(); ++x) Bs.add(B[x] * g[x] * s.mu()[x]);
    FormValue v;
    v.A = A.value();
    v.B = Bs.value();
    v.total = v.A + v.B;
    return v;
}

std::vector<double> form_action(const QuasilinearForm& form, double t,
                                const std::vector<double>& u) {
    const auto& s = *form.space;
    auto F = edge_fluxes(form, t, u);
    auto B = node_densities(form, t, u);
    std::vector<double> r(s.size());
    for (int x = 0; x < s.size(); ++x) r[x] = B[x] * s.mu()[x];
    for (std::size_t e = 0; e < F.size(); ++e) {
        r[s.edges()[e].i] += F[e];
        r[s.edges()[e].j] -= F[e];
    }
    return r;
}

std::vector<double> a_measure(const QuasilinearForm& form, double t, const std::vector<double>& u,
                              const std::vector<double>& g) {
    const auto& s = *form.space;
    auto F = edge_fluxes(form, t, u);
    std::vector<double> m(s.size(), 0.0);
    for (std::size_t e = 0; e < F.size(); ++e) {
        const Edge& ed = s.edges()[e];
        double half = 0.5 * F[e] * (g[ed.i] - g[ed.j]);
        m[ed.i] += half;
        m[ed.j] += half;
    }
    return m;
}

QuasilinearForm heat_form(std::shared_ptr<const DirichletSpace> space) {
    QuasilinearForm f;
    auto sp = space;
    f.space = space;
    f.flux = [sp](double, int e, double ui, double uj) { return sp->edges()[e].c * (ui - uj); };
    f.name = "heat";
    f.linear = true;
    return f;
}

const char* kind_name(CoefficientKind k) {
    switch (k) {
        case CoefficientKind::b: return "b";
        case CoefficientKind::c: return "c";
        case CoefficientKind::d: return "d";
        case CoefficientKind::e: return "e";
        case CoefficientKind::w1: return "w1";
        case CoefficientKind::w2: return "w2";
        case CoefficientKind::w3: return "w3";
    }
    return "?";
}

bool is_first_order(CoefficientKind k) {
    return k != CoefficientKind::d && k != CoefficientKind::w2;
}

double AdaptedCoefficients::sum_norms(CoefficientKind k) const {
    double s = 0;
    for (const auto& c : coeffs)
        if (c.kind == k) s += c.norm;
    return s;
}

double AdaptedCoefficients::sum_sq_norms(CoefficientKind k) const {
    double s = 0;
    for (const auto& c : coeffs)
        if (c.kind == k) s += c.norm * c.norm;
    return s;
}

AdaptedCoefficients certify_coefficients(const DirichletSpace& s, std::vector<Coefficient> cs,
                                         double a, double a_bar, double gamma, double nu,
                                         double time_length, const std::vector<char>& ball) {
    if (!(a > 0) || !(a_bar >= a)) throw std::invalid_argument("coefficients: need 0 < a <= a_bar");
    if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("coefficients: gamma in (0,1)");
    AdaptedCoefficients out;
    out.a = a;
    out.a_bar = a_bar;
    out.gamma = gamma;
    out.nu = nu;
    out.time_length = time_length;
    std::vector<double> mu = s.mu();
    if (!ball.empty())
        for (int x = 0; x < s.size(); ++x)
            if (!ball[x]) mu[x] = 0;
    for (auto& c : cs) {
        if (c.values.size() != static_cast<std::size_t>(s.size()))
            throw std::invalid_argument("coefficients: field size mismatch");
        for (double v : c.values)
            if (!(v >= 0) || !std::isfinite(v))
                throw std::invalid_argument(std::string("coefficients: ") + kind_name(c.kind) +
                                            " must be finite and nonnegative");
        // first-order coefficients enter squared, so (r/2, q/2) must be admissible
        double rr = is_first_order(c.kind) ? c.r / 2 : c.r;
        double qq = is_first_order(c.kind) ? c.q / 2 : c.q;
        bool ok = rr > 1 && qq > 1 && ExponentPair::make(rr, qq, gamma, nu).admissible();
        if (!ok)
            throw std::invalid_argument(std::string("coefficients: exponent pair of ") +
                                        kind_name(c.kind) + " violates the gamma condition");
        c.weak_norm = lorentz_norm(c.values, mu, c.r, kInf);
        c.norm = std::isinf(c.q) ? c.weak_norm : std::pow(time_length, 1.0 / c.q) * c.weak_norm;
    }
    out.coeffs = std::move(cs);
    out.kappa = out.sum_norms(CoefficientKind::w1) + out.sum_norms(CoefficientKind::w2) +
                out.sum_norms(CoefficientKind::w3);
    return out;
}

QuasilinearForm build_aronson_serrin_form(std::shared_ptr<const DirichletSpace> space,
                                          const AdaptedCoefficients& coeffs,
                                          const Nonlinearity& alpha) {
    const int n = space->size();
    std::vector<double> d(n, 0.0), w2(n, 0.0);
    for (const auto& c : coeffs.coeffs) {
        if (c.kind == CoefficientKind::d)
            for (int x = 0; x < n; ++x) d[x] += c.values[x];
        if (c.kind == CoefficientKind::w2)
            for (int x = 0; x < n; ++x) w2[x] += c.values[x];
    }
    const double a = coeffs.a, ab = coeffs.a_bar;
    auto sp = space;
    QuasilinearForm f;
    f.space = space;
    Nonlinearity al = alpha ? alpha : Nonlinearity([](double, int, double) { return 1.0; });
    f.flux = [sp, al, a, ab](double t, int e, double ui, double uj) {
        double m = al(t, e, 0.5 * (ui + uj));
        if (!(m >= a - 1e-14 && m <= ab + 1e-14))
            throw EvaluationError("aronson-serrin form: alpha=" + std::to_string(m) +
                                  " outside [a, a_bar] on edge " + std::to_string(e));
        return sp->edges()[e].c * m * (ui - uj);
    };
    bool any_b = false;
    for (int x = 0; x < n; ++x) any_b = any_b || d[x] != 0 || w2[x] != 0;
    if (any_b)
        f.density = [d, w2](double, int x, const std::vector<double>& u) {
            return d[x] * u[x] - w2[x];
        };
    f.name = "aronson-serrin";
    f.linear = !alpha;
    return f;
}

double duality_factor_zero_order(double r) { return std::isinf(r) ? 1.0 : r / (r - 1.0); }

double duality_factor_first_order(double r) {
    if (std::isinf(r)) return 1.0;
    double half = r / 2;
    return std::sqrt(half / (half - 1.0));
}

AdaptednessReport verify_adaptedness(const QuasilinearForm& form,
                                     const AdaptedCoefficients& co,
                                     const std::vector<AdaptednessProbe>& probes,
                                     double holder_scale) {
    const auto& s = *form.space;
    const int n = s.size();
    const auto& mu = s.mu();
    AdaptednessReport rep;
    auto add = [&](const char* name, std::size_t k, double lhs, double rhs) {
        double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        AdaptednessEntry e{name, k, lhs, rhs, (rhs - lhs) / scale};
        rep.min_margin = std::min(rep.min_margin, e.margin);
        rep.entries.push_back(e);
    };
    auto field_sum = [&](CoefficientKind kind) {
        std::vector<double> out(n, 0.0);
        for (const auto& c : co.coeffs)
            if (c.kind == kind)
                for (int x = 0; x < n; ++x) out[x] += c.values[x];
        return out;
    };
    auto b = field_sum(CoefficientKind::b), w1 = field_sum(CoefficientKind::w1);
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const auto& pr = probes[k];
        // (e^A >), nodewise
        auto dA = a_measure(form, pr.t, pr.u, pr.u);
        auto G = energy_measure(s, pr.u, pr.u);
        double worst_l = 0, worst_r = 0, worst = kInf;
        for (int x = 0; x < n; ++x) {
            double rhs = co.a * G[x] - b[x] * b[x] * pr.u[x] * pr.u[x] * mu[x] -
                         w1[x] * w1[x] * mu[x];
            double sc = std::max({std::abs(dA[x]), std::abs(rhs), 1e-300});
            double m = (dA[x] - rhs) / sc;
            if (m < worst) {
                worst = m;
                worst_l = rhs;
                worst_r = dA[x];
            }
        }
        add("e^A>", k, worst_l, worst_r);

        // (e^A <)
        auto dAuv = a_measure(form, pr.t, pr.u, pr.v);
        Accumulator l;
        for (int x = 0; x < n; ++x) l.add(pr.f[x] * pr.g[x] * dAuv[x]);
        auto Gv = energy_measure(s, pr.v, pr.v);
        Accumulator f2G, g2G;
        for (int x = 0; x < n; ++x) {
            f2G.add(pr.f[x] * pr.f[x] * G[x]);
            g2G.add(pr.g[x] * pr.g[x] * Gv[x]);
        }
        double first = co.a_bar * std::sqrt(std::max(0.0, f2G.value()));
        std::vector<double> fu(n);
        for (int x = 0; x < n; ++x) fu[x] = pr.f[x] * pr.u[x];
        for (const auto& c : co.coeffs) {
            if (c.kind != CoefficientKind::e && c.kind != CoefficientKind::w3) continue;
            double rdd = 2 * c.r / (c.r - 2);
            const auto& h = c.kind == CoefficientKind::e ? fu : pr.f;
            first += holder_scale * duality_factor_first_order(c.r) * c.weak_norm *
                     lorentz_norm(h, mu, rdd, 2.0);
        }
        add("e^A<", k, std::abs(l.value()), first * std::sqrt(std::max(0.0, g2G.value())));

        // (e^B <)
        auto B = node_densities(form, pr.t, pr.u);
        Accumulator lb;
        for (int x = 0; x < n; ++x) lb.add(pr.f[x] * pr.g[x] * B[x] * pr.v[x] * mu[x]);
        std::vector<double> gv(n);
        for (int x = 0; x < n; ++x) gv[x] = pr.g[x] * pr.v[x];
        Accumulator rb;
        for (const auto& c : co.coeffs) {
            double rp = c.r / (c.r - 1);
            if (c.kind == CoefficientKind::d)
                rb.add(holder_scale * duality_factor_zero_order(c.r) * c.weak_norm *
                       lorentz_norm(fu, mu, 2 * rp, 2.0) * lorentz_norm(gv, mu, 2 * rp, 2.0));
            else if (c.kind == CoefficientKind::w2)
                rb.add(holder_scale * duality_factor_zero_order(c.r) * c.weak_norm *
                       lorentz_norm(pr.f, mu, 2 * rp, 2.0) * lorentz_norm(gv, mu, 2 * rp, 2.0));
            else if (c.kind == CoefficientKind::c) {
                double rdd = 2 * c.r / (c.r - 2);
                rb.add(holder_scale * duality_factor_first_order(c.r) * c.weak_norm *
                       std::sqrt(std::max(0.0, f2G.value())) * lorentz_norm(gv, mu, rdd, 2.0));
            }
        }
        add("e^B<", k, std::abs(lb.value()), rb.value());
    }
    rep.pass = rep.min_margin >= -1e-10;
    return rep;
}

double lemma_c1_at_p(const AdaptedCoefficients& co, double p) {
    using K = CoefficientKind;
    const double kap = co.kappa;
    auto sq = [&](K k, bool over_kappa) {
        double s = 0;
        for (const auto& c : co.coeffs)
            if (c.kind == k) {
                double nrm = over_kappa ? c.norm / kap : c.norm;
                s += duality_factor_first_order(c.r) * duality_factor_first_order(c.r) * nrm * nrm;
            }
        return s;
    };
    auto lin = [&](K k, bool over_kappa) {
        double s = 0;
        for (const auto& c : co.coeffs)
            if (c.kind == k) s += duality_factor_zero_order(c.r) * (over_kappa ? c.norm / kap : c.norm);
        return s;
    };
    const bool wk = kap > 0;
    return (p - 1) * (sq(K::b, false) + (wk ? sq(K::w1, true) : 0.0)) +
           (4.0 / co.a) * sq(K::c, false) + sq(K::e, false) + (wk ? sq(K::w3, true) : 0.0) +
           2.0 * (lin(K::d, false) + (wk ? lin(K::w2, true) : 0.0));
}

HypothesisConstants derive_h1_constants(const AdaptedCoefficients& co, double C_cut, double R,
                                        double k, double eta) {
    using K = CoefficientKind;
    bool has_w = false;
    for (const auto& c : co.coeffs)
        if ((c.kind == K::w1 || c.kind == K::w2 || c.kind == K::w3) && c.norm > 0) has_w = true;
    if (has_w && !(co.kappa > 0))
        throw std::invalid_argument("derive_h1_constants: kappa = 0 with nonzero w-fields");
    HypothesisConstants hc;
    hc.a_bar = co.a_bar;
    hc.a = co.a / 4.0;
    hc.beta = 1.0;
    hc.k = k;
    hc.kappa = co.kappa;
    hc.gamma = co.gamma;
    hc.nu = co.nu;
    hc.eta = eta;
    // p-uniform C1: the (p-1) factor is bounded by p in H.1a and by 2(1 v |p|) in H.1b
    double first = lemma_c1_at_p(co, 2.0) - lemma_c1_at_p(co, 1.0);
    double rest = lemma_c1_at_p(co, 1.0);
    hc.C1 = 2.0 * first + rest;
    hc.C2 = 4.0 * (4.0 * co.a_bar * co.a_bar / co.a + 1.0) * C_cut / (R * R);
    hc.trace.push_back({"a", hc.a, "a_coercive / 4"});
    hc.trace.push_back({"C1.first_order", first,
                        "sum (r''/2)(||b||^2 + ||w1/kappa||^2), multiplied by (p-1)"});
    hc.trace.push_back({"C1.rest", rest,
                        "(4/a)(r''/2)||c||^2 + (r''/2)(||e||^2 + ||w3/kappa||^2) + "
                        "2 r'(||d|| + ||w2/kappa||)"});
    hc.trace.push_back({"C1", hc.C1, "2 * C1.first_order + C1.rest"});
    hc.trace.push_back({"C2", hc.C2, "4 (4 a_bar^2 / a + 1) C_cut / R^2"});
    hc.trace.push_back({"beta", 1.0, "1"});
    hc.trace.push_back({"kappa", hc.kappa, "sum ||w1|| + ||w2|| + ||w3||"});
    return hc;
}

HValue h_eval(const HFunction& hf, double v) {
    const double p = hf.p;
    double vb = std::max(v, 0.0) + hf.kappa;
    HValue out;
    if (p < 2) {
        vb += hf.epsilon;
        if (!(vb > 0)) throw std::invalid_argument("h_eval: v_bar must be positive for p < 2");
        if (p == 0) {
            out.H = std::log(vb);
            out.H_prime = 1.0 / vb;
        } else {
            out.H = std::pow(vb, p) / p;
            out.H_prime = std::pow(vb, p - 1);
        }
        return out;
    }
    const double vn = std::min(vb, hf.n);
    const double kp1 = hf.kappa > 0 ? std::pow(hf.kappa, p - 1) : 0.0;
    const double kp = hf.kappa > 0 ? std::pow(hf.kappa, p) : 0.0;
    out.H = 0.5 * vb * vb * std::pow(vn, p - 2) + (1.0 / p - 0.5) * std::pow(vn, p) - vb * kp1 +
            (p - 1) / p * kp;
    out.H_prime = vb * std::pow(vn, p - 2) - kp1;
    return out;
}

namespace {

std::vector<double> masked_mu(const DirichletSpace& s, const std::vector<char>& ball) {
    std::vector<double> mu = s.mu();
    for (int x = 0; x < s.size(); ++x)
        if (!ball[x]) mu[x] = 0;
    return mu;
}

}  // namespace

HypothesisCheck check_H1a(const SpaceTimeField& u, const QuasilinearForm& form,
                          const NestedDomainFamily& fam, const HypothesisConstants& hc,
                          double p, double n, double dp, double d,
                          std::pair<double, double> I, const TimeWeight& chi) {
    if (p < 2) throw std::invalid_argument("check_H1a: p must be at least 2");
    if (!(n >= 1)) throw std::invalid_argument("check_H1a: n must be a positive integer");
    const auto& s = *form.space;
    if (u.nodes() != static_cast<std::size_t>(s.size()))
        throw std::invalid_argument("check_H1a: field does not cover the space");
    auto psi = build_cutoff(s, fam, dp, d);
    auto w = u.window(I.first, I.second);
    auto mu1 = masked_mu(s, fam.ball(1.0));
    const int N = s.size();
    std::vector<double> lhs_t(w.size()), c2_t(w.size());
    TimeWindow h = w;
    HFunction hf{p, hc.kappa, n, 0.0};
    for (std::size_t j = 0; j < w.size(); ++j) {
        const auto& uj = w.values[j];
        double c = chi ? chi(w.times[j]) : 1.0;
        std::vector<double> g(N), ub(N), un(N);
        for (int x = 0; x < N; ++x) {
            ub[x] = std::max(uj[x], 0.0) + hc.kappa;
            un[x] = std::min(ub[x], n);
            g[x] = h_eval(hf, uj[x]).H_prime * psi.values[x] * psi.values[x];
        }
        double E = evaluate_form(form, w.times[j], uj, g).total;
        auto G = energy_measure(s, uj, uj);
        Accumulator t1, t2, c2;
        for (int x = 0; x < N; ++x) {
            double wgt = std::pow(un[x], p - 2) * psi.values[x] * psi.values[x] * G[x];
            t1.add(wgt);
            if (ub[x] <= n) t2.add(wgt);
            c2.add(ub[x] * ub[x] * std::pow(un[x], p - 2) * psi.values[x] * s.mu()[x]);
            h.values[j][x] = ub[x] * std::pow(un[x], (p - 2) / 2) * psi.values[x] * std::sqrt(c);
        }
        lhs_t[j] = (-E + hc.a / 2 * t1.value() + (p - 2) / 4 * hc.a * t2.value()) * c;
        c2_t[j] = c2.value() * c;
    }
    auto [L, Lerr] = integrate_with_error(w.times, lhs_t);
    auto [C2i, C2err] = integrate_with_error(w.times, c2_t);
    double tn = hc.C1 > 0 ? triple_norm(h, mu1, hc.gamma, hc.nu).value : 0.0;
    const double gap = std::pow(d - dp, -hc.k);
    HypothesisCheck out;
    out.name = "H.1a";
    out.lhs = L;
    out.rhs = p * hc.C1 * tn * tn + std::pow(p, hc.beta) * hc.C2 * gap * C2i;
    out.margin = out.rhs - out.lhs;
    out.budget = Lerr + std::pow(p, hc.beta) * hc.C2 * gap * C2err +
                 1e-8 * std::max(std::abs(out.lhs), std::abs(out.rhs));
    out.pass = out.margin >= -out.budget;
    return out;
}

HypothesisCheck check_H1b(const SpaceTimeField& u, const QuasilinearForm& form,
                          const NestedDomainFamily& fam, const HypothesisConstants& hc,
                          double p, double eps, double dp, double d,
                          std::pair<double, double> I, const TimeWeight& chi) {
    const double eta = hc.eta;
    bool in_domain = p < 0 || (p > 0 && p < 1 - eta) || (p > 1 + eta && p < 2);
    if (!in_domain) throw std::invalid_argument("check_H1b: p lies in an excluded band");
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("check_H1b: epsilon in (0,1)");
    const auto& s = *form.space;
    auto psi = build_cutoff(s, fam, dp, d);
    auto w = u.window(I.first, I.second);
    auto mu1 = masked_mu(s, fam.ball(1.0));
    const int N = s.size();
    const double sgn = (1 - p) / std::abs(1 - p);
    std::vector<double> lhs_t(w.size()), c2_t(w.size());
    TimeWindow h = w;
    HFunction hf{p, hc.kappa, kInf, eps};
    for (std::size_t j = 0; j < w.size(); ++j) {
        const auto& uj = w.values[j];
        for (double v : uj)
            if (v < -1e-12) throw std::invalid_argument("check_H1b: u must be nonnegative");
        double c = chi ? chi(w.times[j]) : 1.0;
        std::vector<double> g(N), ue(N);
        for (int x = 0; x < N; ++x) {
            ue[x] = std::max(uj[x], 0.0) + hc.kappa + eps;
            g[x] = h_eval(hf, uj[x]).H_prime * psi.values[x] * psi.values[x];
        }
        double E = evaluate_form(form, w.times[j], uj, g).total;
        auto G = energy_measure(s, uj, uj);
        Accumulator t1, c2;
        for (int x = 0; x < N; ++x) {
            t1.add(std::pow(ue[x], p - 2) * psi.values[x] * psi.values[x] * G[x]);
            c2.add(std::pow(ue[x], p) * psi.values[x] * s.mu()[x]);
            h.values[j][x] = std::pow(ue[x], p / 2) * psi.values[x];
        }
        lhs_t[j] = (sgn * E + std::abs(p - 1) / 4 * hc.a * t1.value()) * c;
        c2_t[j] = c2.value();
    }
    auto [L, Lerr] = integrate_with_error(w.times, lhs_t);
    auto [C2i, C2err] = integrate_with_error(w.times, c2_t);
    double tn = hc.C1 > 0 ? triple_norm(h, mu1, hc.gamma, hc.nu).value : 0.0;
    const double gap = std::pow(d - dp, -hc.k);
    const double f1 = std::max(1.0, std::abs(p));
    const double f2 = std::max(1.0, std::pow(std::abs(p), hc.beta));
    HypothesisCheck out;
    out.name = "H.1b";
    out.lhs = L;
    out.rhs = f1 * hc.C1 * tn * tn + f2 * hc.C2 * gap * C2i;
    out.margin = out.rhs - out.lhs;
    out.budget = Lerr + f2 * hc.C2 * gap * C2err +
                 1e-8 * std::max(std::abs(out.lhs), std::abs(out.rhs));
    out.pass = out.margin >= -out.budget;
    return out;
}

std::vector<DField> h2_d_fields(const AdaptedCoefficients& co) {
    using K = CoefficientKind;
    std::vector<DField> out;
    const double kap = co.kappa;
    for (const auto& c : co.coeffs) {
        double nrm = c.weak_norm;
        bool w = c.kind == K::w1 || c.kind == K::w2 || c.kind == K::w3;
        if (w) {
            if (!(kap > 0)) continue;
            nrm /= kap;
        }
        if (nrm == 0) continue;
        if (is_first_order(c.kind)) {
            double f = duality_factor_first_order(c.r);
            double mult = c.kind == K::c ? 1.0 / co.a : 1.0;
            // ||psi||_{r'',2} = ||psi||_{2 (r/2)',2}
            out.push_back({mult * f * f * nrm * nrm, c.r / 2});
        } else {
            out.push_back({duality_factor_zero_order(c.r) * nrm, c.r});
        }
    }
    return out;
}

HypothesisCheck check_H2(const std::vector<double>& u, double t, const QuasilinearForm& form,
                         const NestedDomainFamily& fam, const HypothesisConstants& hc,
                         double eps, double dp, double d, const std::vector<DField>& D) {
    const auto& s = *form.space;
    const int N = s.size();
    auto psi = build_cutoff(s, fam, dp, d);
    HFunction hf{0.0, hc.kappa, kInf, eps};
    std::vector<double> g(N), ue(N);
    for (int x = 0; x < N; ++x) {
        if (u[x] < -1e-12) throw std::invalid_argument("check_H2: u must be nonnegative");
        ue[x] = std::max(u[x], 0.0) + hc.kappa + eps;
        g[x] = h_eval(hf, u[x]).H_prime * psi.values[x] * psi.values[x];
    }
    double E = evaluate_form(form, t, u, g).total;
    auto G = energy_measure(s, u, u);
    Accumulator t1, ps;
    for (int x = 0; x < N; ++x) {
        t1.add(psi.values[x] * psi.values[x] * G[x] / (ue[x] * ue[x]));
        ps.add(psi.values[x] * s.mu()[x]);
    }
    Accumulator rhs;
    for (const auto& df : D) {
        double rp = df.r / (df.r - 1);
        double nrm = lorentz_norm(psi.values, s.mu(), 2 * rp, 2.0);
        rhs.add(df.value * nrm * nrm);
    }
    rhs.add(hc.C2 * std::pow(1 - fam.delta_star, -hc.k) * ps.value());
    HypothesisCheck out;
    out.name = "H.2";
    out.t = t;
    out.lhs = E + hc.a * t1.value();
    out.rhs = rhs.value();
    out.margin = out.rhs - out.lhs;
    out.budget = 1e-10 * std::max(std::abs(out.lhs), std::abs(out.rhs));
    out.pass = out.margin >= -out.budget;
    return out;
}

}  // namespace dlab
