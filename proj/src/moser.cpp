#include "dlab/moser.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dlab/numeric.hpp"

namespace dlab {

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> masked_mu(const DirichletSpace& s, const std::vector<char>& ball) {
    std::vector<double> mu = s.mu();
    for (int x = 0; x < s.size(); ++x)
        if (!ball[x]) mu[x] = 0;
    return mu;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// log |||exp(lg)|||^2 with lg = sigma log(v) + log(weight), evaluated on a shifted copy so that
// large powers stay representable.
double log_triple_sq(const TimeWindow& w, const std::vector<double>& mu, double sigma,
                     const std::vector<double>& weight, double gamma, double nu) {
    TimeWindow g = w;
    double m = -kInf;
    std::vector<std::vector<double>> lg(w.size(), std::vector<double>(mu.size(), -kInf));
    for (std::size_t j = 0; j < w.size(); ++j)
        for (std::size_t x = 0; x < mu.size(); ++x) {
            if (!(mu[x] > 0)) continue;
            double v = w.values[j][x];
            double wt = weight.empty() ? 1.0 : weight[x];
            if (!(wt > 0)) continue;
            double l = sigma * safe_log(v) + std::log(wt);
            if (v == 0 && sigma < 0) l = kInf;
            lg[j][x] = l;
            m = std::max(m, l);
        }
    if (!std::isfinite(m)) {
        if (m > 0) throw std::invalid_argument("triple norm: zero base with negative power");
        return -kInf;
    }
    for (std::size_t j = 0; j < w.size(); ++j)
        for (std::size_t x = 0; x < mu.size(); ++x)
            g.values[j][x] = std::isfinite(lg[j][x]) ? std::exp(lg[j][x] - m) : 0.0;
    auto tn = triple_norm(g, mu, gamma, nu);
    return 2 * (tn.log_value + m);
}

TimeWindow shifted(const TimeWindow& w, double kappa, double eps) {
    return map_window(w, [&](double, std::size_t, double v) { return std::max(v, 0.0) + kappa + eps; });
}

double theta_of(const ConstantLedger& L) { return (L.nu + 2) / L.nu; }

void check_pair(const NestedDomainFamily& fam, double dp, double d) {
    if (!(fam.delta_star <= dp + 1e-15 && dp < d && d <= 1.0 + 1e-15))
        throw std::invalid_argument("need delta* <= delta' < delta <= 1");
}

double exp_or_inf(double l) { return l > 700 ? kInf : std::exp(l); }

}  // namespace

void EstimateReport::finalize(bool asserted) {
    Accumulator b;
    for (const auto& item : budget) b.add(item.value);
    tolerance_budget = b.value();
    if (std::isinf(rhs) && rhs > 0) {
        margin = kInf;
        pass = !std::isnan(lhs);
    } else {
        margin = rhs - lhs;
        pass = margin >= -tolerance_budget;
    }
    status = asserted ? (pass ? "pass" : "fail") : "unverified";
}

const char* branch_name(Branch b) { return b == Branch::minus ? "minus" : "plus"; }

ConstantLedger make_ledger(const HypothesisConstants& hc, const SpaceCertificate& cert,
                           double C_WPI, const NestedDomainFamily& fam,
                           std::array<double, 4> tau, double delta, double mu_B1, double D_sum) {
    ConstantLedger L;
    L.a = hc.a;
    L.a_bar = hc.a_bar;
    L.C1 = hc.C1;
    L.C2 = hc.C2;
    L.C3 = fam.C3;
    L.C_SI = std::max(1.0, cert.C_SI);
    L.C_SI0 = std::max(1.0, cert.C_SI0);
    L.C_WPI = C_WPI;
    L.nu = hc.nu;
    L.gamma = hc.gamma;
    L.k = std::max({hc.k, cert.k, fam.k_time});
    L.beta = hc.beta;
    L.eta = hc.eta;
    L.kappa = hc.kappa;
    L.tau = tau;
    L.delta_star = fam.delta_star;
    L.delta = delta;
    L.R = fam.R;
    L.mu_B1 = mu_B1;
    L.D_sum = D_sum;
    harnack_constant(L);
    return L;
}

double slab_length(const ConstantLedger& L, double gap) {
    if (!(L.C1 > 0)) return kInf;
    if (!(L.gamma > 0)) return kNaN;
    return std::pow(L.a * std::pow(gap, L.k) / (48 * L.C1 * L.C_SI), 1.0 / L.gamma);
}

MoserProduct moser_product(const ConstantLedger& L, MoserKind kind, double p, double I,
                           double gap) {
    if (!(gap > 0 && gap <= 1)) throw std::invalid_argument("moser_product: gap in (0,1]");
    if (!(I > 0)) throw std::invalid_argument("moser_product: empty interval");
    const double th = theta_of(L);
    const bool sub = kind == MoserKind::subsolution;
    const double a_eff = sub ? L.a : L.a * L.eta;
    const double C_hat = std::max(L.C_SI, 2 * a_eff);
    const double kap = sub && L.kappa > 0 ? 1.0 : 0.0;
    const double pa = std::abs(p);
    auto logF = [&](int i, double* d_out, double* p_out) {
        double pi = pa * std::pow(th, i);
        double d = gap * std::pow(2.0, -i - 1);
        double dk = std::pow(d, L.k);
        double stuff;
        if (sub)
            stuff = pi * pi * L.C1 + (std::pow(pi, L.beta + 1) * L.C2 + 2 * L.C3) * I / dk +
                    (pi - 1) * kap;
        else
            stuff = (1 + pi * pi) * L.C1 +
                    ((1 + std::pow(pi, L.beta + 1)) * L.C2 + 2 * L.C3) * I / dk;
        if (d_out) *d_out = d;
        if (p_out) *p_out = pi;
        return std::log(4 * std::pow(I, L.gamma) / dk * (C_hat / a_eff * stuff + L.C_SI0 * I));
    };
    const double log_g =
        L.k * std::log(2.0) +
        std::log(std::max({2 * th, th * th, std::pow(2.0, L.k) * std::pow(th, L.beta + 1)}));
    MoserProduct out;
    out.theta = th;
    Accumulator acc;
    const double tol = std::log1p(1e-9);
    for (int i = 0; i < 4000; ++i) {
        MoserStep st;
        st.level = i;
        st.log_factor = logF(i, &st.d_i, &st.p_i);
        st.delta_i = kNaN;
        st.log_norm = kNaN;
        acc.add(std::pow(th, -i) * st.log_factor);
        out.steps.push_back(st);
        const int N = i + 1;
        double pN = pa * std::pow(th, N);
        if (pN < 2) continue;
        double lfN = logF(N, nullptr, nullptr);
        double tail = std::pow(th, -N) * (std::max(lfN, 0.0) * th / (th - 1) +
                                          log_g * th / ((th - 1) * (th - 1)));
        if (tail < tol) {
            out.tail = tail;
            out.log_Pi = acc.value() + tail;
            return out;
        }
    }
    throw std::runtime_error("moser_product: tail did not converge");
}

double A0_subsol(const ConstantLedger& L, double p, double I, double gap) {
    const double C_hat = std::max(L.C_SI, 2 * L.a);
    return 4 * std::pow(I, L.gamma + 1) * C_hat * std::pow(p, L.beta + 1) /
           (L.a * std::pow(gap, 2 * L.k)) *
           (L.C1 / I + L.a * L.C_SI0 / C_hat + L.C2 + L.C3);
}

double A0_supsol(const ConstantLedger& L, double p, double I, double gap) {
    const double ae = L.a * L.eta;
    const double C_hat = std::max(L.C_SI, 2 * ae);
    return 4 * std::pow(I, L.gamma + 1) * C_hat * std::pow(1 + std::abs(p), L.beta + 1) /
           (ae * std::pow(gap, 2 * L.k)) * (L.C1 / I + ae * L.C_SI0 / C_hat + L.C2 + L.C3);
}

EstimateReport cacciopoli_subsol(const SpaceTimeField& u, const QuasilinearForm& form,
                                 const NestedDomainFamily& fam, const ConstantLedger& L,
                                 double p, double dp, double d) {
    const double eta = L.eta;
    if (!(p >= 2 || (p > 1 + eta && p < 2)))
        throw std::invalid_argument("cacciopoli_subsol: p lies in an excluded band");
    check_pair(fam, dp, d);
    const auto& s = *form.space;
    const int N = s.size();
    auto psi = build_cutoff(s, fam, dp, d);
    auto Iin = fam.I_minus(dp), Iout = fam.I_minus(d);
    auto win = shifted(u.window(Iin.first, Iin.second), L.kappa, 0);
    auto raw_in = u.window(Iin.first, Iin.second);
    auto wout = shifted(u.window(Iout.first, Iout.second), L.kappa, 0);
    auto muB = masked_mu(s, fam.ball(d));

    double sup = 0;
    std::vector<double> en(win.size());
    for (std::size_t j = 0; j < win.size(); ++j) {
        auto G = energy_measure(s, raw_in.values[j], raw_in.values[j]);
        Accumulator m, e;
        for (int x = 0; x < N; ++x) {
            double p2 = psi.values[x] * psi.values[x];
            double v = win.values[j][x];
            m.add(std::pow(v, p) * p2 * s.mu()[x]);
            e.add(std::pow(v, p - 2) * p2 * G[x]);
        }
        sup = std::max(sup, m.value());
        en[j] = e.value();
    }
    auto [E, Eerr] = integrate_with_error(win.times, en);
    std::vector<double> ms(wout.size());
    for (std::size_t j = 0; j < wout.size(); ++j) {
        Accumulator m;
        for (int x = 0; x < N; ++x) m.add(std::pow(wout.values[j][x], p) * psi.values[x] * s.mu()[x]);
        ms[j] = m.value();
    }
    auto [Ms, Merr] = integrate_with_error(wout.times, ms);
    double tn2 = L.C1 > 0 ? std::exp(log_triple_sq(wout, muB, p / 2, psi.values, L.gamma, L.nu))
                          : 0.0;
    const double gapk = std::pow(d - dp, -L.k);
    const double c2 = (std::pow(p, L.beta + 1) * L.C2 + 2 * L.C3) * gapk;
    Accumulator kap;
    if (L.kappa > 0)
        for (int x = 0; x < N; ++x)
            kap.add(std::pow(L.kappa, p) * psi.values[x] * psi.values[x] * s.mu()[x]);

    EstimateReport r;
    r.name = "cacciopoli_subsol";
    r.inputs = {p, kInf, 0, dp, d, 0};
    r.lhs = 0.5 * sup + L.a * p * p / 4 * E;
    r.rhs = p * p * L.C1 * tn2 + c2 * Ms + (p - 1) * kap.value();
    r.budget.push_back({"energy time quadrature", L.a * p * p / 4 * Eerr});
    r.budget.push_back({"mass time quadrature", c2 * Merr});
    r.budget.push_back({"floating point", 1e-9 * std::max(std::abs(r.lhs), std::abs(r.rhs))});
    r.note = "n saturated at max u";
    r.finalize();
    return r;
}

SupTimeEnergy suptime_energy(const SpaceTimeField& u, const QuasilinearForm& form,
                             const NestedDomainFamily& fam, const ConstantLedger& L,
                             double dp, double d) {
    check_pair(fam, dp, d);
    const auto& s = *form.space;
    const int N = s.size();
    const double gap = d - dp;
    auto psi = build_cutoff(s, fam, dp, d);
    auto Iin = fam.I_minus(dp), Iout = fam.I_minus(d);
    const double Ilen = Iout.second - Iout.first;
    SupTimeEnergy out;
    out.L = slab_length(L, gap);
    out.single_slab = !(L.gamma > 0) || !std::isfinite(out.L);
    if (!(L.gamma > 0)) out.L = Ilen;
    double expo = std::isfinite(out.L) ? 1 + Ilen / out.L : 1.0;

    auto raw_in = u.window(Iin.first, Iin.second);
    auto win = shifted(raw_in, L.kappa, 0);
    double sup = 0;
    std::vector<double> en(win.size());
    for (std::size_t j = 0; j < win.size(); ++j) {
        auto G = energy_measure(s, raw_in.values[j], raw_in.values[j]);
        Accumulator m, e;
        for (int x = 0; x < N; ++x) {
            double p2 = psi.values[x] * psi.values[x];
            m.add(win.values[j][x] * win.values[j][x] * p2 * s.mu()[x]);
            e.add(p2 * G[x]);
        }
        sup = std::max(sup, m.value());
        en[j] = e.value();
    }
    auto [E, Eerr] = integrate_with_error(win.times, en);
    auto wout = shifted(u.window(Iout.first, Iout.second), L.kappa, 0);
    auto inB = fam.ball(d);
    std::vector<double> ms(wout.size());
    for (std::size_t j = 0; j < wout.size(); ++j) {
        Accumulator m;
        for (int x = 0; x < N; ++x)
            if (inB[x]) m.add(wout.values[j][x] * wout.values[j][x] * s.mu()[x]);
        ms[j] = m.value();
    }
    auto [Ms, Merr] = integrate_with_error(wout.times, ms);
    const double pre = L.a * L.C_SI0 / (4 * L.C_SI) +
                       (std::pow(2.0, L.beta + 1) * L.C2 + 2 * L.C3) / std::pow(gap, L.k) +
                       (L.kappa > 0 ? 2 / out.L : 0.0);
    const double K = pre * Ms;
    auto scaled = [&](double log2_factor, double v) {
        if (v == 0) return 0.0;
        double l = log2_factor * std::log(2.0) + std::log(v);
        return exp_or_inf(l);
    };
    EstimateInputs in{0, kInf, 0, dp, d, 0};
    out.sup_l2.name = "suptime_sup_l2";
    out.sup_l2.inputs = in;
    out.sup_l2.lhs = sup;
    out.sup_l2.rhs = scaled(expo, K);
    out.sup_l2.budget.push_back({"mass time quadrature", scaled(expo, pre * Merr)});
    out.sup_l2.note = out.single_slab ? "single slab" : "L = " + fmt(out.L);
    out.sup_l2.finalize();
    out.energy.name = "suptime_energy";
    out.energy.inputs = in;
    out.energy.lhs = E;
    out.energy.rhs = scaled(expo + 1, 2 / L.a * K);
    out.energy.budget.push_back({"energy time quadrature", Eerr});
    out.energy.budget.push_back({"mass time quadrature", scaled(expo + 1, 2 / L.a * pre * Merr)});
    out.energy.note = out.sup_l2.note;
    out.energy.finalize();
    return out;
}

namespace {

struct Cylinder {
    std::pair<double, double> I;
    std::vector<char> ball;
};

Cylinder cylinder(const NestedDomainFamily& fam, Branch b, double d) {
    return {b == Branch::minus ? fam.I_minus(d) : fam.I_plus(d), fam.ball(d)};
}

// Shared Moser iteration report: lhs = max of v^p on Q_{delta'}, rhs = Pi |||v^{p/2}|||^2 on Q_delta.
MveResult run_mve(const std::string& name, const SpaceTimeField& u, const DirichletSpace& s,
                  const NestedDomainFamily& fam, const ConstantLedger& L, MoserKind kind,
                  Branch br, double p, double eps, double dp, double d, int sampled) {
    check_pair(fam, dp, d);
    const double gap = d - dp;
    auto inner = cylinder(fam, br, dp);
    auto outer = cylinder(fam, br, d);
    const double I = outer.I.second - outer.I.first;
    MveResult res;
    res.product = moser_product(L, kind, p, I, gap);
    res.A0 = kind == MoserKind::subsolution ? A0_subsol(L, p, I, gap) : A0_supsol(L, p, I, gap);
    res.C_prime = std::exp(res.product.log_Pi - (L.nu + 2) / 2 * std::log(res.A0) +
                           L.k * (L.nu + 2) * std::log(gap));

    auto win_in = shifted(u.window(inner.I.first, inner.I.second), L.kappa, eps);
    double lmax = -kInf;
    for (const auto& row : win_in.values)
        for (int x = 0; x < s.size(); ++x)
            if (inner.ball[x]) {
                double v = row[x];
                double l = v > 0 ? p * std::log(v) : (p > 0 ? -kInf : kInf);
                lmax = std::max(lmax, l);
            }
    const double th = res.product.theta;
    auto level_norm = [&](int i, double di) {
        auto c = cylinder(fam, br, di);
        auto w = shifted(u.window(c.I.first, c.I.second), L.kappa, eps);
        return log_triple_sq(w, masked_mu(s, c.ball), p * std::pow(th, i) / 2, {}, L.gamma, L.nu);
    };
    double di = d;
    std::string failure;
    for (std::size_t i = 0; i < res.product.steps.size(); ++i) {
        auto& st = res.product.steps[i];
        st.delta_i = di;
        if (static_cast<int>(i) <= sampled) st.log_norm = level_norm(static_cast<int>(i), di);
        di -= st.d_i;
    }
    for (int i = 0; i < sampled && i + 1 < static_cast<int>(res.product.steps.size()); ++i) {
        const auto& a = res.product.steps[i];
        const auto& b = res.product.steps[i + 1];
        if (!std::isfinite(a.log_norm) || !std::isfinite(b.log_norm)) continue;
        double lhs = b.log_norm / th;
        double rhs = a.log_factor + a.log_norm;
        if (lhs > rhs + 1e-9 * std::max(1.0, std::abs(rhs)) && failure.empty())
            failure = "iteration divergence at level " + std::to_string(i + 1) +
                      ": wSI witness set does not cover u^{p theta^i / 2} at this level";
    }
    const double lN0 = res.product.steps.front().log_norm;
    EstimateReport& r = res.report;
    r.name = name;
    r.inputs = {p, kInf, eps, dp, d, 0};
    r.lhs = exp_or_inf(lmax);
    double lrhs = res.product.log_Pi + lN0;
    r.rhs = exp_or_inf(lrhs);
    r.budget.push_back({"triple norm quadrature", 1e-9 * r.rhs});
    r.budget.push_back({"iteration tail", (std::exp(res.product.tail) - 1) * r.rhs});
    r.finalize();
    if (!failure.empty()) {
        r.pass = false;
        r.status = "fail";
        r.note = failure;
    } else {
        r.note = std::to_string(res.product.steps.size()) + " levels";
    }
    return res;
}

}  // namespace

MveResult mve_subsol(const SpaceTimeField& u, const QuasilinearForm& form,
                     const NestedDomainFamily& fam, const ConstantLedger& L, double p,
                     double dp, double d, int sampled) {
    if (!(p >= 2 || (p > 1 + L.eta && p < 2)))
        throw std::invalid_argument("mve_subsol: p lies in an excluded band");
    return run_mve("mve_subsol", u, *form.space, fam, L, MoserKind::subsolution, Branch::minus,
                   p, 0.0, dp, d, sampled);
}

MveResult mve_supsol(const SpaceTimeField& u, const QuasilinearForm& form,
                     const NestedDomainFamily& fam, const ConstantLedger& L, double p,
                     double eps, double dp, double d, Branch branch, int sampled) {
    if (branch == Branch::minus && !(p < 0))
        throw std::invalid_argument("mve_supsol: the minus branch needs p < 0");
    if (branch == Branch::plus && !(p > 0 && p < 1 - L.eta))
        throw std::invalid_argument("mve_supsol: the plus branch needs p in (0, 1 - eta)");
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("mve_supsol: epsilon in (0,1)");
    for (const auto& row : u.values)
        for (double v : row)
            if (v < -1e-12) throw std::invalid_argument("mve_supsol: u must be nonnegative");
    auto res = run_mve("mve_supsol", u, *form.space, fam, L, MoserKind::supersolution, branch, p,
                       eps, dp, d, sampled);
    res.report.note += std::string(", branch ") + branch_name(branch);
    return res;
}

LogLemmaResult log_lemma(const SpaceTimeField& u, const DirichletSpace& s,
                         const NestedDomainFamily& fam, const ConstantLedger& L, double eps,
                         double delta, std::array<double, 3> times,
                         const std::vector<double>& lambdas, bool upper) {
    if (!(eps > 0)) throw std::invalid_argument("log_lemma: epsilon must be positive");
    for (const auto& row : u.values)
        for (double v : row)
            if (v < -1e-12) throw std::invalid_argument("log_lemma: u must be nonnegative");
    const int N = s.size();
    auto psi = build_cutoff(s, fam, delta, 1.0);
    auto um = u.at(times[1]);
    Accumulator num, den;
    for (int x = 0; x < N; ++x) {
        double w = psi.values[x] * psi.values[x] * s.mu()[x];
        num.add(std::log(std::max(um[x], 0.0) + L.kappa + eps) * w);
        den.add(w);
    }
    LogLemmaResult out;
    out.anchor = num.value() / den.value();
    auto I = upper ? std::make_pair(times[0], times[1]) : std::make_pair(times[1], times[2]);
    auto w = shifted(u.window(I.first, I.second), L.kappa, eps);
    auto inB = fam.ball(delta);
    const double Ilen = I.second - I.first;
    const double bracket = L.C_WPI / (L.a * Ilen) +
                           L.D_sum * std::max(std::pow(Ilen, L.gamma), Ilen) +
                           L.C2 * Ilen / std::pow(1 - delta, L.k);
    for (double lam : lambdas) {
        if (!(lam > 0)) throw std::invalid_argument("log_lemma: lambda must be positive");
        Accumulator meas;
        for (std::size_t j = 0; j < w.size(); ++j) {
            Accumulator m;
            for (int x = 0; x < N; ++x) {
                if (!inB[x]) continue;
                double l = std::log(w.values[j][x]) - out.anchor;
                if (upper ? l > lam : l < -lam) m.add(s.mu()[x]);
            }
            meas.add(w.weights[j] * m.value());
        }
        EstimateReport r;
        r.name = upper ? "log_lemma_upper" : "log_lemma_lower";
        r.inputs = {0, kInf, eps, delta, 1.0, lam};
        r.lhs = meas.value();
        r.rhs = 3 / lam * std::max(1.0, L.mu_B1) * Ilen * bracket;
        r.budget.push_back({"floating point", 1e-12 * std::max(r.lhs, r.rhs)});
        r.note = "anchor c = " + fmt(out.anchor);
        r.finalize();
        out.reports.push_back(r);
    }
    return out;
}

double bombieri_brute_log_sum(double A, double exponent, double delta_star, std::size_t terms) {
    std::vector<double> lt(terms);
    const double l34 = std::log(0.75), l1d = std::log(1 - delta_star);
    for (std::size_t j = 0; j < terms; ++j) {
        double jj = static_cast<double>(j);
        lt[j] = jj * l34 + exponent * (std::log1p(jj) + std::log(2 + jj) - l1d);
    }
    std::vector<double> ones(terms, 1.0);
    return std::log(A) + log_sum_exp(lt, ones);
}

BombieriResult bombieri_constant(double A1, double k1, double A2, double k2, double gamma,
                                 double eta, double delta_star, double K_quasi) {
    if (!(gamma > 0 && gamma < 1))
        throw std::invalid_argument(
            "bombieri_constant: gamma must lie in (0,1); the exponent 2 k1 / gamma is undefined "
            "at gamma = 0");
    if (!(delta_star > 0 && delta_star < 1))
        throw std::invalid_argument("bombieri_constant: delta* in (0,1)");
    if (!(A1 >= 1 && A2 >= 1)) throw std::invalid_argument("bombieri_constant: A1, A2 >= 1");
    if (!(eta > 0 && eta < 1)) throw std::invalid_argument("bombieri_constant: eta in (0,1)");
    BombieriResult out;
    out.exponent = k2 + 2 * k1 / gamma;
    const double K = 2 * K_quasi * K_quasi;
    // case: the balancing condition fails, log phi <= (2 A2 / g^{k2}) (2 K A1 g^{-k1})^{2/gamma}
    const double c3 = 2 * A2 * std::pow(2 * K * A1, 2 / gamma);
    // case: phi below the threshold where the balancing exponent stays below 1 - eta
    auto h = [&](double Lg) { return (1 - eta) * Lg - 2 * gamma * std::log(Lg / (2 * A2)); };
    double Lstar = 2 * gamma / (1 - eta);
    double c2 = 0;
    if (h(Lstar) < 0) {
        double lo = Lstar, hi = 2 * Lstar;
        while (h(hi) < 0) hi *= 2;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (h(mid) < 0 ? lo : hi) = mid;
        }
        c2 = hi;
    }
    out.A = std::max(c2, c3);
    out.cases = {{"contraction", 0.75 * out.A}, {"phi_below_C", c2}, {"balance_fails", c3}};
    out.binding = c3 >= c2 ? 2 : 1;
    out.recorded_log_phi = out.A;

    const double l34 = std::log(0.75), l1d = std::log(1 - delta_star);
    auto logt = [&](double j) {
        return j * l34 + out.exponent * (std::log1p(j) + std::log(2 + j) - l1d);
    };
    std::vector<double> lt;
    double lsum = -kInf;
    for (std::size_t j = 0;; ++j) {
        double jj = static_cast<double>(j);
        double l = logt(jj);
        lt.push_back(l);
        lsum = lsum > l ? lsum + std::log1p(std::exp(l - lsum)) : l + std::log1p(std::exp(lsum - l));
        double r_next = 0.75 * std::pow((jj + 4) / (jj + 2), out.exponent);
        if (r_next < 1) {
            double ltail = logt(jj + 1) - std::log1p(-r_next);
            if (ltail - lsum < std::log(1e-14)) {
                out.terms = j + 1;
                out.tail = std::exp(ltail - lsum);
                break;
            }
        }
        if (j > 100'000'000) throw std::runtime_error("bombieri_constant: series too slow");
    }
    std::vector<double> ones(lt.size(), 1.0);
    double lpart = log_sum_exp(lt, ones);
    out.log_A3 = std::log(out.A) + lpart + std::log1p(out.tail);
    out.A3 = exp_or_inf(out.log_A3);
    for (std::size_t j = 0; j < std::min<std::size_t>(lt.size(), 64); ++j)
        out.log_terms.push_back(std::log(out.A) + lt[j]);
    return out;
}

HarnackConstant harnack_constant(ConstantLedger& L) {
    if (!(L.tau[0] > 0 && L.tau[0] < L.tau[1] && L.tau[1] < L.tau[2] && L.tau[2] < L.tau[3]))
        throw std::invalid_argument("harnack_constant: need 0 < tau1 < tau2 < tau3 < tau4");
    for (auto [name, v] : {std::pair{"a", L.a}, {"C_SI", L.C_SI}, {"C_SI0", L.C_SI0},
                           {"C_wPI", L.C_WPI}, {"mu(B1)", L.mu_B1}})
        if (!(v > 0 && std::isfinite(v)))
            throw std::invalid_argument(std::string("harnack_constant: missing certification of ") +
                                        name);
    L.trace.clear();
    auto rec = [&](const std::string& n, double v, const std::string& f, const std::string& in) {
        L.trace.push_back({n, v, f, in});
    };
    const double pabs = 1 - L.eta;
    L.k1 = L.k * (L.nu + 2);
    L.k2 = L.k;
    L.L = slab_length(L, 1 - L.delta_star);
    rec("L", L.L, "(a (1-delta*)^k / (48 C1 C_SI))^{1/gamma}", "gap = 1 - delta*");
    rec("k1", L.k1, "k (nu + 2)", "");
    rec("k2", L.k2, "k", "");
    const double Kq = quasi_triangle_K(2 / L.gamma, 2);
    rec("K_quasi", Kq, "2^{gamma/2 + 1}", "Lorentz (2/gamma, 2)");
    HarnackConstant hc;
    auto branch = [&](const char* tag, double I, double& A0, double& Cp, double& A1, double& A2,
                      double& A3) {
        std::string in = std::string(tag) + ", |I1| = " + fmt(I) + ", |p| = 1 - eta";
        auto prod = moser_product(L, MoserKind::supersolution, pabs, I, 1.0);
        A0 = A0_supsol(L, pabs, I, 1.0);
        Cp = std::exp(prod.log_Pi - (L.nu + 2) / 2 * std::log(A0));
        const double norm = std::pow(I * L.mu_B1, L.gamma / 2);
        A1 = std::max(1.0, std::exp(prod.log_Pi) * norm);
        A2 = std::max(1.0, 3 * std::max(1.0, L.mu_B1) *
                               (L.C_WPI / L.a + L.D_sum * I * std::max(std::pow(I, L.gamma), I) +
                                L.C2 * I * I) /
                               (I * L.mu_B1));
        auto B = bombieri_constant(A1, L.k1, A2, L.k2, L.gamma, L.eta, L.delta_star, Kq);
        A3 = B.A3;
        std::string t(tag);
        rec("A0." + t, A0,
            "4 |I|^{gamma+1} C_SI (1+|p|)^{beta+1} / (a eta) (C1/|I| + a eta C_SI0/C_SI + C2 + C3)",
            in);
        rec("Pi." + t, std::exp(prod.log_Pi), "prod_i F_i^{theta^{-i}}, certified tail",
            in + ", levels = " + std::to_string(prod.steps.size()));
        rec("C_prime." + t, Cp, "Pi / A0^{(nu+2)/2}", in);
        rec("A1." + t, A1, "max(1, C' A0^{(nu+2)/2} (|I1| mu(B1))^{gamma/2})", in);
        rec("A2." + t, A2,
            "max(1, 3 (1 v mu(B1)) (C_wPI/a + sum D |I|(|I|^gamma v |I|) + C2 |I|^2) / (|I| "
            "mu(B1)))",
            in);
        rec("A." + t, B.A, "max over the case bounds, binding: " + B.cases[B.binding].name, in);
        rec("A3." + t, A3, "sum_j (3/4)^j A / (delta_{j+1} - delta_j)^{k2 + 2 k1/gamma}",
            in + ", terms = " + std::to_string(B.terms));
        return B;
    };
    hc.early = branch("early", L.tau[1], L.A0, L.C_prime, L.A1, L.A2, L.A3);
    hc.late = branch("late", L.tau[3] - L.tau[1], L.A0_late, L.C_prime_late, L.A1_late,
                     L.A2_late, L.A3_late);
    const double la = hc.early.log_A3, lb = hc.late.log_A3;
    const double m = std::max(la, lb);
    hc.log_log_C_PHI = m + std::log(std::exp(la - m) + std::exp(lb - m));
    hc.log_C_PHI = exp_or_inf(hc.log_log_C_PHI);
    L.log_C_PHI = hc.log_C_PHI;
    L.log_log_C_PHI = hc.log_log_C_PHI;
    L.C_PHI = exp_or_inf(L.log_C_PHI);
    rec("log_C_PHI", L.log_C_PHI, "A3.early + A3.late", "");
    rec("log_log_C_PHI", L.log_log_C_PHI, "log(A3.early + A3.late)", "");
    rec("C_PHI", L.C_PHI, "exp(A3.early + A3.late)", "");
    return hc;
}

double replay_ledger(const ConstantLedger& L) {
    ConstantLedger R = L;
    harnack_constant(R);
    double worst = 0;
    auto cmp = [&](double a, double b) {
        if (a == b) return;
        if (!std::isfinite(a) || !std::isfinite(b)) {
            worst = kInf;
            return;
        }
        worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
    };
    cmp(L.A0, R.A0);
    cmp(L.C_prime, R.C_prime);
    cmp(L.A1, R.A1);
    cmp(L.A2, R.A2);
    cmp(L.A3, R.A3);
    cmp(L.A0_late, R.A0_late);
    cmp(L.A1_late, R.A1_late);
    cmp(L.A2_late, R.A2_late);
    cmp(L.A3_late, R.A3_late);
    cmp(L.log_log_C_PHI, R.log_log_C_PHI);
    if (L.trace.size() != R.trace.size()) return kInf;
    for (std::size_t i = 0; i < L.trace.size(); ++i) cmp(L.trace[i].value, R.trace[i].value);
    return worst;
}

std::vector<MonotonicityProbe> monotonicity_audit(const ConstantLedger& L, double step) {
    std::vector<MonotonicityProbe> out;
    ConstantLedger base = L;
    harnack_constant(base);
    auto probe = [&](const char* name, double ConstantLedger::*field, bool increasing) {
        ConstantLedger q = base;
        double& v = q.*field;
        v = v > 0 ? v * (1 + step) : step;
        harnack_constant(q);
        MonotonicityProbe p;
        p.name = increasing ? name : std::string("1/") + name;
        p.base = base.log_log_C_PHI;
        p.probed = q.log_log_C_PHI;
        const double tol = 1e-12 * std::abs(p.base);
        p.ok = increasing ? p.probed >= p.base - tol : p.probed <= p.base + tol;
        out.push_back(p);
    };
    probe("C1", &ConstantLedger::C1, true);
    probe("C2", &ConstantLedger::C2, true);
    probe("C3", &ConstantLedger::C3, true);
    probe("C_SI", &ConstantLedger::C_SI, true);
    probe("C_SI0", &ConstantLedger::C_SI0, true);
    probe("C_wPI", &ConstantLedger::C_WPI, true);
    probe("a", &ConstantLedger::a, false);
    return out;
}

HarnackVerdict harnack_verify(const SpaceTimeField& u, const NestedDomainFamily& fam,
                              const ConstantLedger& L, double s, double delta,
                              bool certified) {
    auto inB = fam.ball(delta);
    auto wm = u.window(s + L.tau[0], s + L.tau[1]);
    auto wp = u.window(s + L.tau[2], s + L.tau[3]);
    HarnackVerdict v;
    v.sup_minus = -kInf;
    v.inf_plus = kInf;
    for (const auto& row : wm.values)
        for (std::size_t x = 0; x < row.size(); ++x)
            if (inB[x]) v.sup_minus = std::max(v.sup_minus, std::max(row[x], 0.0) + L.kappa);
    for (const auto& row : wp.values)
        for (std::size_t x = 0; x < row.size(); ++x)
            if (inB[x]) v.inf_plus = std::min(v.inf_plus, std::max(row[x], 0.0) + L.kappa);
    v.log_C_PHI = L.log_C_PHI;
    v.certified = certified;
    if (v.inf_plus <= 0) {
        v.ratio = v.sup_minus > 0 ? kInf : 1.0;
        v.log_ratio = v.sup_minus > 0 ? kInf : 0.0;
        v.note = v.sup_minus > 0 ? "Harnack violation candidate: inf over Q+ is zero" : "u = 0";
    } else {
        v.ratio = v.sup_minus / v.inf_plus;
        v.log_ratio = std::log(v.sup_minus) - std::log(v.inf_plus);
    }
    const bool holds = v.log_ratio <= 0 || std::log(v.log_ratio) <= L.log_log_C_PHI;
    if (!certified) {
        v.pass = false;
        if (v.note.empty()) v.note = "hypotheses not certified; empirical ratio only";
    } else {
        v.pass = holds;
    }
    return v;
}

double kappa_shift(const MaxPrincipleInput& in) {
    return (in.norm_b + in.norm_d) * std::abs(in.M) + in.norm_w1 + in.norm_w2;
}

EstimateReport maximum_principle_check(const SpaceTimeField& u, const ConstantLedger& L,
                                       const MaxPrincipleInput& in) {
    if (in.domain.size() != u.nodes())
        throw std::invalid_argument("maximum_principle_check: domain mask required");
    auto w = u.window(in.t0, in.t1);
    double lhs = -kInf;
    for (const auto& row : w.values)
        for (std::size_t x = 0; x < row.size(); ++x)
            if (in.domain[x]) lhs = std::max(lhs, row[x]);
    const double I = in.t1 - in.t0;
    const double kM = kappa_shift(in);
    EstimateReport r;
    r.name = "maximum_principle";
    r.inputs = {2, kInf, 0, 0.5, 1.0, 0};
    r.lhs = lhs;
    if (kM == 0) {
        r.rhs = in.M;
    } else {
        ConstantLedger q = L;
        q.kappa = kM;
        auto prod = moser_product(q, MoserKind::subsolution, 2, I, 0.5);
        double Ls = slab_length(q, 0.5);
        double expo = std::isfinite(Ls) ? 1 + I / Ls : 1.0;
        double logC = prod.log_Pi + std::log(2.0) + q.gamma * std::log(I) + expo * std::log(2.0) +
                      std::log(4 * q.C_SI / q.a + 1);
        double lextra = 0.5 * (logC + std::log(I * in.mu_U)) + std::log(kM);
        r.rhs = in.M + exp_or_inf(lextra);
        r.note = "log C = " + fmt(0.5 * (logC + std::log(I * in.mu_U)));
    }
    r.budget.push_back({"solver", 1e-9 * std::max(1.0, std::abs(lhs))});
    r.note += (r.note.empty() ? "" : ", ") + std::string("kappa^M = ") + fmt(kM);
    r.finalize();
    return r;
}

double pointwise_rhs(double C, double s_time, double t_time, double R, double nbhd, double d) {
    const double dt = t_time - s_time;
    return C * (1 + dt / (R * R) + dt / s_time + dt / (nbhd * nbhd) + d * d / dt);
}

PointwiseResult pointwise_estimate(const SpaceTimeField& u, const DirichletSpace& s,
                                   const std::vector<int>& chain, double s_time, double t_time,
                                   const ConstantLedger& L, double nbhd) {
    if (chain.empty()) throw std::invalid_argument("pointwise_estimate: empty chain");
    if (!(0 < s_time && s_time < t_time))
        throw std::invalid_argument("pointwise_estimate: need 0 < s < t");
    double d = 0;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        double len = kInf;
        for (int e : s.incident()[chain[i]]) {
            const auto& ed = s.edges()[e];
            if ((ed.i == chain[i] && ed.j == chain[i + 1]) ||
                (ed.j == chain[i] && ed.i == chain[i + 1]))
                len = std::min(len, ed.len);
        }
        if (!std::isfinite(len))
            throw std::invalid_argument("pointwise_estimate: chain link without an edge");
        d += len;
    }
    const double links = std::max<double>(1, static_cast<double>(chain.size()) - 1);
    auto us = u.at(s_time), ut = u.at(t_time);
    PointwiseResult r;
    r.lhs = std::log((std::max(us[chain.front()], 0.0) + L.kappa) /
                     (std::max(ut[chain.back()], 0.0) + L.kappa));
    r.rhs = pointwise_rhs(links * L.log_C_PHI, s_time, t_time, L.R, nbhd, d);
    r.pass = r.lhs <= r.rhs;
    return r;
}

}  // namespace dlab
