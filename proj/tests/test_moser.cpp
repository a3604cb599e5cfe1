#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "dlab/moser.hpp"
#include "dlab/solver.hpp"
#include "oracles.hpp"

using namespace dlab;

namespace {

struct Run {
    std::shared_ptr<DirichletSpace> s;
    NestedDomainFamily fam;
    QuasilinearForm form;
    SpaceTimeField u;
    ConstantLedger L;
};

SpaceTimeField constant_field(int nodes, double value, double t_end, int n) {
    SpaceTimeField u;
    u.times = uniform_times(0, t_end, n);
    u.values.assign(u.times.size(), std::vector<double>(nodes, value));
    return u;
}

// 12x12 heat run with the ledger certified on its own snapshots.
Run heat_run(double base = 1.0, double amp = 2.0) {
    Run r;
    r.s = std::make_shared<DirichletSpace>(build_grid_space({12, 12}, 1.0));
    r.fam = nested_family(grid_index(*r.s, {6, 6}), 5.0, 0.5, {3, 4.5, 7.5, 9}, 3.0);
    r.fam.attach(*r.s);
    r.form = heat_form(r.s);
    std::vector<double> u0(r.s->size());
    for (int x = 0; x < r.s->size(); ++x) {
        double dx = r.s->coords[x][0] - 6, dy = r.s->coords[x][1] - 6;
        u0[x] = base + amp * std::exp(-(dx * dx + dy * dy) / 8);
    }
    r.u = integrate(r.form, u0, uniform_times(0, 12, 96));
    const double eta = 0.1;
    std::vector<SobolevWitness> ws;
    std::vector<std::vector<double>> pw;
    for (std::size_t j = 0; j < r.u.times.size(); j += 12) {
        std::vector<double> e = r.u.values[j];
        for (double& v : e) v += 1e-3;
        ws.push_back({r.u.values[j], {2, 3, 4}});
        ws.push_back({e, {-1, 0.45 * (1 - eta)}});
        pw.push_back(e);
    }
    auto co = certify_coefficients(*r.s, {}, 1, 1, 0.5, 4, 12, r.fam.ball(1.0));
    SpaceCertificate cert;
    double C_cut = 0;
    for (auto [dp, d] : {std::pair{0.5, 1.0}, {0.75, 1.0}, {0.5, 0.75}}) {
        auto c = certify_sobolev(*r.s, r.fam, dp, d, 4.0, ws);
        cert.C_SI = std::max(cert.C_SI, c.C_SI);
        cert.C_SI0 = std::max(cert.C_SI0, c.C_SI0);
        C_cut = std::max(C_cut, build_cutoff(*r.s, r.fam, dp, d).C_cut);
    }
    cert.k = 1;
    auto hc = derive_h1_constants(co, C_cut, r.fam.R, 2.0, eta);
    const double C_wPI = certify_poincare(*r.s, r.fam, 0.5, 1.0, pw);
    r.L = make_ledger(hc, cert, C_wPI, r.fam, {3, 6, 9, 12}, 0.5,
                      r.s->measure(r.fam.ball(1.0)), 0.0);
    harnack_constant(r.L);
    return r;
}

const Run& shared_run() {
    static const Run r = heat_run();
    return r;
}

ConstantLedger unit_ledger() {
    ConstantLedger L;
    L.a = L.a_bar = 1;
    L.C1 = L.C2 = L.C3 = 1;
    L.C_SI = L.C_SI0 = L.C_WPI = 1;
    L.nu = 4;
    L.gamma = 0.5;
    L.k = 0;
    L.delta_star = 0.5;
    L.delta = 0.5;
    L.tau = {0.25, 0.5, 0.75, 1.0};
    L.mu_B1 = 1;
    return L;
}

}  // namespace

TEST_SUITE("moser") {

TEST_CASE("slab length and iteration geometry") {
    ConstantLedger L = unit_ledger();
    CHECK(slab_length(L, 0.7) == doctest::Approx(1.0 / 2304).epsilon(1e-14));
    L.C1 = 0;
    CHECK(std::isinf(slab_length(L, 0.5)));

    auto P = moser_product(unit_ledger(), MoserKind::subsolution, 2.0, 1.0, 0.25);
    CHECK(P.theta == doctest::Approx(1.5));
    REQUIRE(P.steps.size() >= 2);
    CHECK(P.steps[0].d_i == doctest::Approx(0.125));
    CHECK(P.steps[1].d_i == doctest::Approx(0.0625));
    double sum = 0;
    for (int i = 0; i < 60; ++i) sum += 0.25 * std::pow(2.0, -i - 1);
    CHECK(sum == doctest::Approx(0.25));
    for (std::size_t i = 0; i < P.steps.size(); ++i)
        CHECK(P.steps[i].p_i == doctest::Approx(2.0 * std::pow(1.5, static_cast<double>(i))));
    CHECK(P.tail < std::log1p(1e-9));
    CHECK(std::isfinite(P.log_Pi));
}

TEST_CASE("supersolution A0 stays bounded as p approaches 0") {
    ConstantLedger L = unit_ledger();
    double prev = A0_supsol(L, -1e-3, 1.0, 0.5);
    for (double p : {-1e-5, -1e-8, -1e-12}) {
        double a = A0_supsol(L, p, 1.0, 0.5);
        CHECK(std::isfinite(a));
        CHECK(a == doctest::Approx(prev).epsilon(1e-2));
        prev = a;
    }
}

TEST_CASE("Bombieri series arithmetic") {
    // delta_j = 1 - (1 - delta*)/(1 + j)
    auto dj = [](double ds, int j) { return 1 - (1 - ds) / (1 + j); };
    CHECK(dj(0.5, 0) == doctest::Approx(0.5));
    CHECK(dj(0.5, 1) == doctest::Approx(0.75));
    CHECK(dj(0.5, 2) == doctest::Approx(0.8333333333333334));
    CHECK(dj(0.5, 1) - dj(0.5, 0) == doctest::Approx(0.25));
    CHECK(dj(0.5, 2) - dj(0.5, 1) == doctest::Approx(1.0 / 12));

    auto z = bombieri_constant(2, 0, 2, 0, 0.5, 0.1, 0.5, 4);
    CHECK(z.A3 == doctest::Approx(4 * z.A).epsilon(1e-13));

    auto b = bombieri_constant(2, 1, 2, 1, 0.5, 0.1, 0.5, 4);
    CHECK(b.exponent == doctest::Approx(5.0));
    double brute = oracle::bombieri_log_series(b.A, b.exponent, 0.5, 1'000'000);
    CHECK(std::abs(b.log_A3 - brute) <= 1e-12);
    CHECK(std::abs(bombieri_brute_log_sum(b.A, b.exponent, 0.5, 100'000) - brute) <= 1e-12);

    // the binding case dominates the others at the recorded phi
    CHECK(b.recorded_log_phi == b.A);
    for (const auto& c : b.cases) CHECK(c.bound <= b.cases[b.binding].bound);

    CHECK_THROWS(bombieri_constant(2, 1, 2, 1, 0.0, 0.1, 0.5, 4));
    CHECK_THROWS(bombieri_constant(0.5, 1, 2, 1, 0.5, 0.1, 0.5, 4));
    CHECK_THROWS(bombieri_constant(2, 1, 2, 1, 0.5, 0.1, 1.0, 4));
}

TEST_CASE("Harnack constant of unit hypothesis constants") {
    ConstantLedger L = unit_ledger();
    auto hc = harnack_constant(L);
    CHECK(std::isfinite(L.log_log_C_PHI));
    CHECK(L.log_C_PHI >= 0);  // C_PHI >= 1
    CHECK(L.C_PHI >= 1);
    CHECK(replay_ledger(L) <= 1e-12);
    CHECK(hc.log_C_PHI == L.log_C_PHI);
    CHECK(L.log_C_PHI == doctest::Approx(L.A3 + L.A3_late).epsilon(1e-12));

    // C_PHI increases strictly in C1
    ConstantLedger M = unit_ledger();
    M.C1 = 2;
    harnack_constant(M);
    CHECK(M.log_log_C_PHI > L.log_log_C_PHI);
    for (const auto& m : monotonicity_audit(L)) CHECK(m.ok);

    ConstantLedger bad = unit_ledger();
    bad.C_WPI = 0;
    CHECK_THROWS(harnack_constant(bad));
    bad = unit_ledger();
    bad.tau = {0.5, 0.25, 0.75, 1.0};
    CHECK_THROWS(harnack_constant(bad));
}

TEST_CASE("estimates on a heat solution") {
    const Run& r = shared_run();
    CHECK(replay_ledger(r.L) <= 1e-12);
    for (double p : {2.0, 3.0, 4.0}) {
        auto c = cacciopoli_subsol(r.u, r.form, r.fam, r.L, p, 0.5, 1.0);
        CHECK(c.pass);
        CHECK(c.margin >= 0);
    }
    CHECK_THROWS(cacciopoli_subsol(r.u, r.form, r.fam, r.L, 1.05, 0.5, 1.0));
    auto se = suptime_energy(r.u, r.form, r.fam, r.L, 0.5, 1.0);
    CHECK(se.sup_l2.pass);
    CHECK(se.energy.pass);
    for (double p : {2.0, 4.0}) {
        auto m = mve_subsol(r.u, r.form, r.fam, r.L, p, 0.5, 1.0);
        CHECK(m.report.pass);
        CHECK_FALSE(m.product.steps.empty());
        for (std::size_t i = 0; i < m.product.steps.size(); ++i)
            CHECK(m.product.steps[i].p_i == doctest::Approx(p * std::pow(1.5, double(i))));
    }
    auto sm = mve_supsol(r.u, r.form, r.fam, r.L, -1.0, 1e-3, 0.5, 1.0, Branch::minus);
    CHECK(sm.report.pass);
    for (double p : {0.45 * 0.9, 0.5 * 0.9}) {
        auto sp = mve_supsol(r.u, r.form, r.fam, r.L, p, 1e-3, 0.5, 1.0, Branch::plus);
        CHECK(sp.report.pass);
    }
    CHECK_THROWS(mve_supsol(r.u, r.form, r.fam, r.L, 0.5, 1e-3, 0.5, 1.0, Branch::minus));
    CHECK_THROWS(mve_supsol(r.u, r.form, r.fam, r.L, -1.0, 1e-3, 0.5, 1.0, Branch::plus));
    CHECK_THROWS(mve_supsol(r.u, r.form, r.fam, r.L, -1.0, 0.0, 0.5, 1.0, Branch::minus));

    for (bool upper : {true, false}) {
        auto ll = log_lemma(r.u, *r.s, r.fam, r.L, 1e-3, 0.5, {0.0, 6.0, 12.0}, {0.5, 1, 2, 4}, upper);
        for (const auto& rep : ll.reports) CHECK(rep.pass);
    }
    auto hv = harnack_verify(r.u, r.fam, r.L, 0.0, 0.5, true);
    CHECK(hv.pass);
    CHECK(std::isfinite(hv.ratio));
    CHECK(hv.ratio >= 1);
}

TEST_CASE("trivial fields") {
    const Run& r = shared_run();
    const int n = r.s->size();
    auto zero = constant_field(n, 0.0, 12, 96);
    auto c = cacciopoli_subsol(zero, r.form, r.fam, r.L, 2.0, 0.5, 1.0);
    CHECK(c.lhs == 0.0);
    CHECK(c.rhs == 0.0);
    CHECK(c.pass);
    auto se = suptime_energy(zero, r.form, r.fam, r.L, 0.5, 1.0);
    CHECK(se.sup_l2.lhs == 0.0);
    CHECK(se.sup_l2.rhs == 0.0);
    CHECK(se.energy.lhs == 0.0);

    auto one = constant_field(n, 3.0, 12, 96);
    CHECK(mve_supsol(one, r.form, r.fam, r.L, -1.0, 1e-3, 0.5, 1.0, Branch::minus).report.pass);
    auto ll = log_lemma(one, *r.s, r.fam, r.L, 1e-3, 0.5, {0.0, 6.0, 12.0}, {0.5, 1, 1e6}, false);
    for (const auto& rep : ll.reports) {
        CHECK(rep.lhs == 0.0);
        CHECK(rep.pass);
    }
    auto hv = harnack_verify(one, r.fam, r.L, 0.0, 0.5, true);
    CHECK(hv.ratio == doctest::Approx(1.0));
    CHECK(hv.pass);
    auto neg = constant_field(n, -1.0, 12, 96);
    CHECK_THROWS(log_lemma(neg, *r.s, r.fam, r.L, 1e-3, 0.5, {0.0, 6.0, 12.0}, {1.0}, true));

    // a vanishing infimum is a violation candidate
    auto gap = one;
    for (auto& row : gap.values) row[r.fam.center] = 0.0;
    auto hz = harnack_verify(gap, r.fam, r.L, 0.0, 0.5, false);
    CHECK(hz.note.find("violation") != std::string::npos);
    CHECK_FALSE(hz.pass);
}

TEST_CASE("Harnack ratio cross-checked against the matrix exponential") {
    const Run& r = shared_run();
    auto G = oracle::generator(*r.s);
    const auto ball = r.fam.ball(0.5);
    double sup_m = 0, inf_p = kInf;
    for (std::size_t j = 0; j < r.u.times.size(); ++j) {
        double t = r.u.times[j];
        auto v = oracle::expm_solve(G, r.u.values[0], t);
        for (int x = 0; x < r.s->size(); ++x) {
            if (!ball[x]) continue;
            if (t >= 3 - 1e-12 && t <= 6 + 1e-12) sup_m = std::max(sup_m, v[x]);
            if (t >= 9 - 1e-12 && t <= 12 + 1e-12) inf_p = std::min(inf_p, v[x]);
        }
    }
    auto hv = harnack_verify(r.u, r.fam, r.L, 0.0, 0.5, true);
    CHECK(hv.sup_minus == doctest::Approx(sup_m).epsilon(1e-8));
    CHECK(hv.inf_plus == doctest::Approx(inf_p).epsilon(1e-8));
}

TEST_CASE("maximum principle") {
    auto s = std::make_shared<DirichletSpace>(build_grid_space({10, 10}, 1.0));
    auto fam = nested_family(grid_index(*s, {5, 5}), 4.0, 0.5, {1, 1.5, 2.5, 3}, 1.0);
    fam.attach(*s);
    auto U = fam.ball(1.0);
    std::vector<double> u0(s->size(), 0.0);
    for (int x = 0; x < s->size(); ++x)
        if (U[x]) u0[x] = -1.0;
    auto u = integrate(heat_form(s), u0, uniform_times(0, 4, 64), BoundaryMode::zero_outside, U);
    ConstantLedger L = unit_ledger();
    MaxPrincipleInput in;
    in.M = 0;
    in.t0 = 0;
    in.t1 = 4;
    in.mu_U = s->measure(U);
    in.domain = U;
    auto rep = maximum_principle_check(u, L, in);
    CHECK(rep.rhs == 0.0);
    CHECK(rep.lhs <= 0.0);
    CHECK(rep.pass);

    MaxPrincipleInput m = in;
    m.M = 1;
    m.norm_b = 0.2;
    m.norm_d = 0.3;
    m.norm_w1 = 0.05;
    m.norm_w2 = 0.07;
    CHECK(kappa_shift(m) == doctest::Approx((0.2 + 0.3) * 1 + 0.05 + 0.07));
    m.M = -2;
    CHECK(kappa_shift(m) == doctest::Approx((0.2 + 0.3) * 2 + 0.05 + 0.07));
    CHECK_THROWS(maximum_principle_check(u, L, MaxPrincipleInput{}));
}

TEST_CASE("pointwise estimate") {
    const Run& r = shared_run();
    for (double d : {0.0, 1.0, 2.0, 4.0}) {
        double a = pointwise_rhs(3.0, 4, 8, 5, 1, d), b = pointwise_rhs(3.0, 4, 8, 5, 1, d + 0.5);
        CHECK(b > a);
    }
    const int c = r.fam.center;
    auto same = pointwise_estimate(r.u, *r.s, {c}, 6.0 - 1e-9, 6.0, r.L, 1.0);
    CHECK(std::abs(same.lhs) <= 1e-8);
    CHECK(same.pass);
    auto two = pointwise_estimate(r.u, *r.s, {c, c + 1, c + 2}, 4.0, 10.0, r.L, 1.0);
    CHECK(two.pass);
    CHECK_THROWS(pointwise_estimate(r.u, *r.s, {c, c + 5}, 4.0, 10.0, r.L, 1.0));
    CHECK_THROWS(pointwise_estimate(r.u, *r.s, {c}, 5.0, 4.0, r.L, 1.0));
}

TEST_CASE("report margins") {
    EstimateReport r;
    r.lhs = 1.0;
    r.rhs = 0.9;
    r.budget = {{"a", 0.05}, {"b", 0.06}};
    r.finalize();
    CHECK(r.tolerance_budget == doctest::Approx(0.11));
    CHECK(r.pass);
    CHECK(r.status == "pass");
    r.budget = {{"a", 0.05}};
    r.finalize();
    CHECK_FALSE(r.pass);
    CHECK(r.status == "fail");
    r.finalize(false);
    CHECK(r.status == "unverified");
    r.rhs = kInf;
    r.finalize();
    CHECK(r.pass);
}

}  // TEST_SUITE
