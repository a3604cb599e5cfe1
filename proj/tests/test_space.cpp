#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dlab/space.hpp"
#include "dlab/lorentz.hpp"

using namespace dlab;

namespace {

std::vector<double> random_field(std::mt19937_64& rng, int n, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> U(lo, hi);
    std::vector<double> f(n);
    for (double& x : f) x = U(rng);
    return f;
}

DirichletSpace path(int n) { return build_grid_space({n}, 1.0); }

NestedDomainFamily family_at(const DirichletSpace& s, int center, double R) {
    auto fam = nested_family(center, R, 0.25, {1, 2, 3, 4}, 1.0);
    fam.attach(s);
    return fam;
}

}  // namespace

TEST_SUITE("space") {

TEST_CASE("lattice construction counts") {
    auto p = path(4);
    CHECK(p.size() == 4);
    REQUIRE(p.edges().size() == 3);
    for (const auto& e : p.edges()) CHECK(e.c == doctest::Approx(1.0));

    auto torus = build_grid_space({8, 8}, 1.0, {}, true);
    CHECK(torus.size() == 64);
    CHECK(torus.edges().size() == 128);

    auto g = build_grid_space({16, 16}, 1.0, [](const std::vector<double>&) { return 1.0; });
    CHECK(g.total_measure() == doctest::Approx(256.0).epsilon(1e-15));
}

TEST_CASE("nonpositive weight is rejected") {
    CHECK_THROWS(build_grid_space({4, 4}, 1.0, [](const std::vector<double>& c) {
        return c[0] > 1.5 ? 0.0 : 1.0;
    }));
    CHECK_THROWS(build_grid_space({4}, -1.0));
}

TEST_CASE("energy measure on a single edge") {
    auto p = path(2);
    auto g = energy_measure(p, {0.0, 1.0}, {0.0, 1.0});
    CHECK(g[0] == doctest::Approx(0.5));
    CHECK(g[1] == doctest::Approx(0.5));
    CHECK(dirichlet_form(p, {0.0, 1.0}, {0.0, 1.0}) == doctest::Approx(1.0));
    auto c = energy_measure(p, {3.0, 3.0}, {3.0, 3.0});
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 0.0);
}

TEST_CASE("energy measure sums to the edge-sum form") {
    std::mt19937_64 rng(7);
    auto s = build_grid_space({4, 4}, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto u = random_field(rng, s.size());
        auto v = random_field(rng, s.size());
        auto w = random_field(rng, s.size());
        // independent edge sum
        double direct = 0;
        for (const auto& e : s.edges()) direct += e.c * (u[e.i] - u[e.j]) * (u[e.i] - u[e.j]);
        auto g = energy_measure(s, u, u);
        double total = 0;
        for (double x : g) {
            CHECK(x >= 0);
            total += x;
        }
        CHECK(std::abs(total - direct) <= 1e-14 * std::max(1.0, direct));

        auto guv = energy_measure(s, u, v), gvu = energy_measure(s, v, u);
        std::vector<double> vw(s.size());
        for (int x = 0; x < s.size(); ++x) vw[x] = 2 * v[x] + w[x];
        auto lin = energy_measure(s, u, vw), guw = energy_measure(s, u, w);
        for (int x = 0; x < s.size(); ++x) {
            CHECK(guv[x] == doctest::Approx(gvu[x]).epsilon(1e-14));
            CHECK(lin[x] == doctest::Approx(2 * guv[x] + guw[x]).epsilon(1e-12));
        }
    }
}

TEST_CASE("strong locality of the form") {
    auto s = path(10);
    std::vector<double> u(10, 0.0), g(10, 0.0);
    u[1] = 1.0;
    u[2] = -2.0;
    // g constant on an edge neighborhood of supp(u)
    for (int x = 0; x < 5; ++x) g[x] = 4.0;
    CHECK(dirichlet_form(s, u, g) == doctest::Approx(0.0));
}

TEST_CASE("serialization round trip") {
    auto s = build_grid_space({3, 4}, 0.5);
    std::stringstream ss;
    s.write(ss);
    auto r = DirichletSpace::read(ss);
    CHECK(r.hash() == s.hash());
    CHECK(r.size() == s.size());
    CHECK(r.edges().size() == s.edges().size());
}

TEST_CASE("nested family schedule") {
    auto f = nested_family(0, 1.0, 0.5, {1, 2, 3, 4}, 1.0);
    CHECK(f.C3 == doctest::Approx(1.0));
    CHECK(1.0 / std::abs(f.a_delta(1.0) - f.a_delta(0.5)) ==
          doctest::Approx(f.C3 / std::abs(1.0 - 0.5)));
    auto g = nested_family(0, 1.0, 0.5, {1, 2, 3, 4}, 0.1);
    CHECK(g.C3 == doctest::Approx(10.0));
    CHECK_THROWS(nested_family(0, 1.0, 0.5, {1, 3, 2, 4}, 1.0));

    auto s = build_grid_space({9, 9}, 1.0);
    auto h = nested_family(grid_index(s, {4, 4}), 4.0, 0.5, {2, 3, 5, 6}, 1.0);
    h.attach(s);
    auto inner = h.ball(0.5), outer = h.ball(1.0);
    int n_in = 0, n_out = 0;
    for (int x = 0; x < s.size(); ++x) {
        if (inner[x]) CHECK(outer[x]);
        n_in += inner[x];
        n_out += outer[x];
    }
    CHECK(n_in < n_out);
    CHECK(h.I_minus(0.5).first > h.I_minus(1.0).first);
    CHECK(h.I_plus(0.5).second < h.I_plus(1.0).second);
}

TEST_CASE("cutoff is a linear ramp on a path") {
    auto s = path(10);
    auto fam = family_at(s, 0, 9.0);
    auto psi = build_cutoff(s, fam, 1.0 / 3, 2.0 / 3);
    for (int x = 0; x < 10; ++x) {
        double expect = std::clamp((6.0 - x) / 3.0, 0.0, 1.0);
        CHECK(psi.values[x] == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("cutoff gradient bound on unit grids") {
    auto s = build_grid_space({16, 16}, 1.0);
    auto fam = family_at(s, grid_index(s, {8, 8}), 6.0);
    for (auto [dp, d] : {std::pair{0.5, 1.0}, {0.75, 1.0}, {0.5, 0.75}, {0.25, 0.5}}) {
        auto psi = build_cutoff(s, fam, dp, d);
        CHECK(psi.C_cut <= 2.0 + 1e-12);
        auto g = energy_measure(s, psi.values, psi.values);
        const double r2 = std::pow((d - dp) * fam.R, 2);
        for (int x = 0; x < s.size(); ++x)
            CHECK(g[x] <= psi.C_cut / r2 * s.mu()[x] * (1 + 1e-12));
    }
}

TEST_CASE("empty annulus is rejected") {
    auto s = path(4);
    auto fam = family_at(s, 0, 3.0);
    CHECK_THROWS(build_cutoff(s, fam, 0.5, 0.52));
}

TEST_CASE("two-node Sobolev terms in closed form") {
    auto s = path(2);
    auto fam = family_at(s, 0, 1.5);
    auto psi = build_cutoff(s, fam, 0.5, 1.0);
    REQUIRE(psi.values[0] == doctest::Approx(1.0));
    REQUIRE(psi.values[1] == doctest::Approx(2.0 / 3));
    auto t = sobolev_terms(s, fam, psi, 4.0, {1.0, 2.0}, 2.0);
    // f psi = (1, 4/3): ||.||_{4,2}^2 = 1 * (16/9 - 1) + sqrt(2) * 1
    CHECK(t.lhs == doctest::Approx(7.0 / 9 + std::sqrt(2.0)).epsilon(1e-14));
    CHECK(t.energy == doctest::Approx(0.5 * (1 + 4.0 / 9)).epsilon(1e-14));
    CHECK(t.mass == doctest::Approx(5.0).epsilon(1e-14));

    auto cert = certify_sobolev(s, fam, 0.5, 1.0, 4.0, {{{1.0, 2.0}, {2.0}}});
    CHECK(t.lhs <= std::pow(0.5, -cert.k) * (cert.C_SI * t.energy + cert.C_SI0 * t.mass) *
                       (1 + 1e-12));
}

TEST_CASE("certified Sobolev constants replay on their witnesses") {
    std::mt19937_64 rng(11);
    auto s = build_grid_space({10, 10}, 1.0);
    auto fam = family_at(s, grid_index(s, {5, 5}), 4.0);
    std::vector<SobolevWitness> ws;
    for (int k = 0; k < 6; ++k) ws.push_back({random_field(rng, s.size(), 0.2, 2.0), {2.0, 3.0}});
    auto cert = certify_sobolev(s, fam, 0.5, 1.0, 4.0, ws);
    CHECK(recheck_sobolev(s, fam, cert) <= 1e-10);

    // a larger witness set never lowers the constant needed at a fixed trade-off ratio
    auto more = ws;
    for (int k = 0; k < 4; ++k) more.push_back({random_field(rng, s.size(), 0.05, 3.0), {2.0, 4.0}});
    for (double ratio : {0.1, 1.0, 10.0})
        CHECK(sobolev_constant_at_ratio(s, fam, 0.5, 1.0, 4.0, more, 1.0, ratio) >=
              sobolev_constant_at_ratio(s, fam, 0.5, 1.0, 4.0, ws, 1.0, ratio));
}

TEST_CASE("constant Sobolev witness") {
    auto s = build_grid_space({8, 8}, 1.0);
    auto fam = family_at(s, grid_index(s, {4, 4}), 3.0);
    std::vector<double> one(s.size(), 1.0);
    auto cert = certify_sobolev(s, fam, 0.5, 1.0, 4.0, {{one, {2.0}}});
    auto psi = build_cutoff(s, fam, 0.5, 1.0);
    auto t = sobolev_terms(s, fam, psi, 4.0, one, 2.0);
    CHECK(t.energy == 0.0);
    CHECK(t.lhs <= 2.0 * cert.C_SI0 * t.mass * (1 + 1e-12));
}

TEST_CASE("Poincare constant on an exponential ramp") {
    auto s = path(12);
    auto fam = family_at(s, 0, 10.0);
    std::vector<double> f(12);
    for (int x = 0; x < 12; ++x) f[x] = std::exp(0.3 * x);
    auto psi = build_cutoff(s, fam, 0.4, 0.8);

    // direct evaluation
    double num = 0, den = 0;
    for (int x = 0; x < 12; ++x) {
        double w = psi.values[x] * psi.values[x];
        num += 0.3 * x * w;
        den += w;
    }
    const double mean = num / den;
    double lhs = 0, rhs = 0;
    for (int x = 0; x < 12; ++x) {
        double w = psi.values[x] * psi.values[x];
        lhs += (0.3 * x - mean) * (0.3 * x - mean) * w;
        double g = 0;
        if (x > 0) g += 0.5 * std::pow(f[x] - f[x - 1], 2);
        if (x < 11) g += 0.5 * std::pow(f[x] - f[x + 1], 2);
        rhs += w * g / (f[x] * f[x]);
    }
    const double C = certify_poincare(s, fam, 0.4, 0.8, {f});
    CHECK(C == doctest::Approx(lhs / rhs).epsilon(1e-12));

    std::vector<double> scaled = f;
    for (double& x : scaled) x *= 17.0;
    CHECK(certify_poincare(s, fam, 0.4, 0.8, {scaled}) == doctest::Approx(C).epsilon(1e-12));
    CHECK(certify_poincare(s, fam, 0.4, 0.8, {std::vector<double>(12, 2.5)}) == 0.0);
    std::vector<double> bad = f;
    bad[3] = 0.0;
    CHECK_THROWS(certify_poincare(s, fam, 0.4, 0.8, {bad}));
}

}  // TEST_SUITE
