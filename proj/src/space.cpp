#include "dlab/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>

#include "dlab/lorentz.hpp"
#include "dlab/numeric.hpp"

namespace dlab {

DirichletSpace::DirichletSpace(std::vector<double> mu, std::vector<Edge> edges)
    : mu_(std::move(mu)), edges_(std::move(edges)) {
    const int n = size();
    for (int x = 0; x < n; ++x)
        if (!(mu_[x] > 0) || !std::isfinite(mu_[x]))
            throw std::invalid_argument("DirichletSpace: node " + std::to_string(x) +
                                        " has nonpositive measure");
    incident_.assign(n, {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const Edge& ed = edges_[e];
        if (ed.i < 0 || ed.j < 0 || ed.i >= n || ed.j >= n || ed.i == ed.j)
            throw std::invalid_argument("DirichletSpace: bad edge endpoints");
        if (!(ed.c >= 0) || !(ed.len > 0))
            throw std::invalid_argument("DirichletSpace: bad conductance or length");
        incident_[ed.i].push_back(static_cast<int>(e));
        incident_[ed.j].push_back(static_cast<int>(e));
    }
}

double DirichletSpace::total_measure() const { return accurate_sum(mu_); }

double DirichletSpace::measure(const std::vector<char>& set) const {
    Accumulator acc;
    for (int x = 0; x < size(); ++x)
        if (set[x]) acc.add(mu_[x]);
    return acc.value();
}

std::vector<double> DirichletSpace::distances_from(int source) const {
    std::vector<double> d(size(), kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    d[source] = 0;
    pq.emplace(0.0, source);
    while (!pq.empty()) {
        auto [dx, x] = pq.top();
        pq.pop();
        if (dx > d[x]) continue;
        for (int e : incident_[x]) {
            const Edge& ed = edges_[e];
            int y = ed.i == x ? ed.j : ed.i;
            double nd = dx + ed.len;
            if (nd < d[y]) {
                d[y] = nd;
                pq.emplace(nd, y);
            }
        }
    }
    return d;
}

std::string DirichletSpace::hash() const {
    std::ostringstream os;
    write(os);
    const std::string s = os.str();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void DirichletSpace::write(std::ostream& os) const {
    char buf[64];
    os << "dlab-space v1\n" << size() << ' ' << edges_.size() << '\n';
    for (int x = 0; x < size(); ++x) {
        std::snprintf(buf, sizeof buf, "%.17g", mu_[x]);
        os << x << ' ' << buf << '\n';
    }
    for (const Edge& e : edges_) {
        os << e.i << ' ' << e.j;
        std::snprintf(buf, sizeof buf, " %.17g", e.c);
        os << buf;
        std::snprintf(buf, sizeof buf, " %.17g", e.len);
        os << buf << '\n';
    }
}

DirichletSpace DirichletSpace::read(std::istream& is) {
    std::string tag, ver;
    is >> tag >> ver;
    if (tag != "dlab-space" || ver != "v1")
        throw std::runtime_error("space file: unsupported header '" + tag + " " + ver + "'");
    std::size_t n = 0, m = 0;
    is >> n >> m;
    std::vector<double> mu(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t id;
        is >> id >> mu[k];
        if (id != k) throw std::runtime_error("space file: node ids out of order");
    }
    std::vector<Edge> edges(m);
    for (auto& e : edges) is >> e.i >> e.j >> e.c >> e.len;
    if (!is) throw std::runtime_error("space file: truncated");
    return DirichletSpace(std::move(mu), std::move(edges));
}

int grid_index(const DirichletSpace& s, const std::vector<int>& multi) {
    int idx = 0, stride = 1;
    for (std::size_t k = 0; k < s.dims.size(); ++k) {
        idx += multi[k] * stride;
        stride *= s.dims[k];
    }
    return idx;
}

DirichletSpace build_grid_space(const std::vector<int>& dims, double spacing,
                                const WeightRule& weight, bool torus) {
    if (dims.empty()) throw std::invalid_argument("build_grid_space: dims must be nonempty");
    if (!(spacing > 0)) throw std::invalid_argument("build_grid_space: spacing must be positive");
    int n = 1;
    for (int d : dims) {
        if (d < 1) throw std::invalid_argument("build_grid_space: sizes must be positive");
        if (torus && d < 3) throw std::invalid_argument("build_grid_space: torus needs size >= 3");
        n *= d;
    }
    const int D = static_cast<int>(dims.size());
    const double vol = std::pow(spacing, D);
    std::vector<std::vector<double>> coords(n, std::vector<double>(D));
    std::vector<double> w(n), mu(n);
    for (int x = 0; x < n; ++x) {
        int rem = x;
        for (int k = 0; k < D; ++k) {
            coords[x][k] = (rem % dims[k]) * spacing;
            rem /= dims[k];
        }
        w[x] = weight ? weight(coords[x]) : 1.0;
        if (!(w[x] > 0) || !std::isfinite(w[x]))
            throw std::invalid_argument("build_grid_space: weight must be positive at node " +
                                        std::to_string(x));
        mu[x] = w[x] * vol;
    }
    const double c_unit = std::pow(spacing, D - 2);
    std::vector<Edge> edges;
    int stride = 1;
    for (int k = 0; k < D; ++k) {
        for (int x = 0; x < n; ++x) {
            int ck = (x / stride) % dims[k];
            int y;
            if (ck + 1 < dims[k])
                y = x + stride;
            else if (torus)
                y = x - ck * stride;
            else
                continue;
            edges.push_back({x, y, c_unit * 0.5 * (w[x] + w[y]), spacing});
        }
        stride *= dims[k];
    }
    DirichletSpace s(std::move(mu), std::move(edges));
    s.dims = dims;
    s.spacing = spacing;
    s.torus = torus;
    s.coords = std::move(coords);
    return s;
}

std::vector<double> energy_measure(const DirichletSpace& s, const std::vector<double>& u,
                                   const std::vector<double>& v) {
    std::vector<Accumulator> acc(s.size());
    for (const Edge& e : s.edges()) {
        double val = 0.5 * e.c * (u[e.i] - u[e.j]) * (v[e.i] - v[e.j]);
        acc[e.i].add(val);
        acc[e.j].add(val);
    }
    std::vector<double> out(s.size());
    for (int x = 0; x < s.size(); ++x) out[x] = acc[x].value();
    return out;
}

double dirichlet_form(const DirichletSpace& s, const std::vector<double>& u,
                      const std::vector<double>& v) {
    Accumulator acc;
    for (const Edge& e : s.edges()) acc.add(e.c * (u[e.i] - u[e.j]) * (v[e.i] - v[e.j]));
    return acc.value();
}

std::vector<char> NestedDomainFamily::ball(double d) const {
    std::vector<char> b(dist.size());
    for (std::size_t x = 0; x < dist.size(); ++x) b[x] = dist[x] < d * R;
    return b;
}

void NestedDomainFamily::attach(const DirichletSpace& s) {
    if (center < 0 || center >= s.size()) throw std::invalid_argument("family: bad center");
    dist = s.distances_from(center);
    // B_{delta*} must be a proper subset of B_1
    auto inner = ball(delta_star), outer = ball(1.0);
    bool strict = false;
    for (std::size_t x = 0; x < dist.size(); ++x) {
        if (inner[x] && !outer[x]) throw std::logic_error("family: balls not nested");
        strict = strict || (outer[x] && !inner[x]);
    }
    if (!strict)
        throw CertificationError("family: B_delta* equals B_1 at this graph resolution");
}

NestedDomainFamily nested_family(int center, double R, double delta_star,
                                 std::array<double, 4> anchors, double c0) {
    auto [a, ap, bp, b] = anchors;
    if (!(a < ap && ap < bp && bp < b))
        throw std::invalid_argument("nested_family: anchors must satisfy a < a' < b' < b");
    if (!(c0 > 0)) throw std::invalid_argument("nested_family: c0 must be positive");
    if (!(delta_star > 0 && delta_star < 1))
        throw std::invalid_argument("nested_family: delta_star must lie in (0,1)");
    if (!(R > 0)) throw std::invalid_argument("nested_family: R must be positive");
    NestedDomainFamily f;
    f.center = center;
    f.R = R;
    f.delta_star = delta_star;
    f.a = a;
    f.a_prime = ap;
    f.b_prime = bp;
    f.b = b;
    f.c0 = c0;
    f.C3 = 1.0 / c0;
    f.k_time = 1.0;
    return f;
}

CutoffFunction build_cutoff(const DirichletSpace& s, const NestedDomainFamily& fam,
                            double dp, double d) {
    if (!(fam.delta_star <= dp + 1e-15 && dp < d && d <= 1.0 + 1e-15))
        throw std::invalid_argument("build_cutoff: need delta* <= delta' < delta <= 1");
    if (fam.dist.size() != static_cast<std::size_t>(s.size()))
        throw std::invalid_argument("build_cutoff: family not attached to this space");
    const double width = (d - dp) * fam.R;
    CutoffFunction c;
    c.inner_delta = dp;
    c.outer_delta = d;
    c.values.resize(s.size());
    bool annulus = false;
    for (int x = 0; x < s.size(); ++x) {
        double dx = fam.dist[x];
        c.values[x] = std::clamp((d * fam.R - dx) / width, 0.0, 1.0);
        annulus = annulus || (dx > dp * fam.R && dx < d * fam.R);
    }
    if (!annulus)
        throw CertificationError("build_cutoff: empty annulus between delta'=" +
                                 std::to_string(dp) + " and delta=" + std::to_string(d));
    auto g = energy_measure(s, c.values, c.values);
    for (int x = 0; x < s.size(); ++x) c.C_cut = std::max(c.C_cut, g[x] * width * width / s.mu()[x]);
    return c;
}

SobolevTerms sobolev_terms(const DirichletSpace& s, const NestedDomainFamily& fam,
                           const CutoffFunction& psi, double nu, const std::vector<double>& f,
                           double p) {
    const int n = s.size();
    auto inB = fam.ball(psi.outer_delta);
    std::vector<double> h(n), wt(n, 0.0);
    for (int x = 0; x < n; ++x) h[x] = std::pow(f[x], p / 2) * psi.values[x];
    SobolevTerms t;
    t.lhs = std::pow(lorentz_norm(h, s.mu(), 2 * nu / (nu - 2), 2.0), 2);
    auto g = energy_measure(s, f, f);
    Accumulator en, ms;
    for (int x = 0; x < n; ++x) {
        if (!inB[x]) continue;
        en.add(std::pow(f[x], p - 2) * psi.values[x] * psi.values[x] * g[x]);
        ms.add(std::pow(f[x], p) * s.mu()[x]);
    }
    t.energy = p * p / 4 * en.value();
    t.mass = ms.value();
    return t;
}

namespace {

struct NormalizedTerms {
    double lhs, energy, mass;
    std::size_t witness;
    double p;
};

std::vector<NormalizedTerms> collect_terms(const DirichletSpace& s,
                                           const NestedDomainFamily& fam,
                                           const CutoffFunction& psi, double nu,
                                           const std::vector<SobolevWitness>& ws) {
    auto inB = fam.ball(psi.outer_delta);
    std::vector<NormalizedTerms> out;
    for (std::size_t k = 0; k < ws.size(); ++k) {
        const auto& w = ws[k];
        if (w.f.size() != static_cast<std::size_t>(s.size()))
            throw std::invalid_argument("certify_sobolev: witness size mismatch");
        double m = 0;
        bool vanishes = false;
        for (int x = 0; x < s.size(); ++x) {
            if (w.f[x] < 0) throw std::invalid_argument("certify_sobolev: negative witness");
            m = std::max(m, w.f[x]);
            vanishes = vanishes || (inB[x] && w.f[x] == 0);
        }
        if (m == 0) continue;
        std::vector<double> fn(w.f);
        for (double& v : fn) v /= m;
        for (double p : w.p) {
            if (p < 2 && vanishes)
                throw std::invalid_argument("certify_sobolev: witness " + std::to_string(k) +
                                            " vanishes in B_delta with p < 2");
            auto t = sobolev_terms(s, fam, psi, nu, fn, p);
            out.push_back({t.lhs, t.energy, t.mass, k, p});
        }
    }
    return out;
}

double required_C_SI(const std::vector<NormalizedTerms>& ts, double gap_pow, double ratio,
                     std::size_t* worst = nullptr) {
    double c = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double denom = ts[i].energy + ratio * ts[i].mass;
        double need = ts[i].lhs == 0 ? 0.0 : (denom > 0 ? ts[i].lhs * gap_pow / denom : kInf);
        if (need > c) {
            c = need;
            if (worst) *worst = i;
        }
    }
    return c;
}

}  // namespace

double sobolev_constant_at_ratio(const DirichletSpace& s, const NestedDomainFamily& fam,
                                 double dp, double d, double nu,
                                 const std::vector<SobolevWitness>& ws, double k, double ratio) {
    auto psi = build_cutoff(s, fam, dp, d);
    auto ts = collect_terms(s, fam, psi, nu, ws);
    return required_C_SI(ts, std::pow(d - dp, k), ratio);
}

SpaceCertificate certify_sobolev(const DirichletSpace& s, const NestedDomainFamily& fam,
                                 double dp, double d, double nu,
                                 const std::vector<SobolevWitness>& ws, double k) {
    if (!(nu > 2)) throw std::invalid_argument("certify_sobolev: nu must exceed 2");
    auto psi = build_cutoff(s, fam, dp, d);
    auto ts = collect_terms(s, fam, psi, nu, ws);
    const double gap_pow = std::pow(d - dp, k);
    double best_sum = kInf, best_ratio = 0, best_c = 0;
    std::size_t worst = 0;
    for (int i = 0; i < 33; ++i) {
        double ratio = std::pow(10.0, -4.0 + 8.0 * i / 32.0);
        double c = required_C_SI(ts, gap_pow, ratio, &worst);
        if (c * (1 + ratio) < best_sum) {
            best_sum = c * (1 + ratio);
            best_ratio = ratio;
            best_c = c;
        }
    }
    if (!std::isfinite(best_sum)) {
        const auto& t = ts[worst];
        throw CertificationError("certify_sobolev: no finite constants; witness " +
                                 std::to_string(t.witness) + " p=" + std::to_string(t.p));
    }
    SpaceCertificate cert;
    cert.nu = nu;
    cert.k = k;
    cert.delta_prime = dp;
    cert.delta = d;
    cert.C_SI = best_c;
    cert.C_SI0 = best_ratio * best_c;
    cert.witness_set = ws;
    return cert;
}

double recheck_sobolev(const DirichletSpace& s, const NestedDomainFamily& fam,
                       const SpaceCertificate& cert) {
    auto psi = build_cutoff(s, fam, cert.delta_prime, cert.delta);
    auto ts = collect_terms(s, fam, psi, cert.nu, cert.witness_set);
    const double gp = std::pow(cert.delta - cert.delta_prime, -cert.k);
    double worst = -kInf;
    for (const auto& t : ts) {
        double rhs = gp * (cert.C_SI * t.energy + cert.C_SI0 * t.mass);
        worst = std::max(worst, (t.lhs - rhs) / std::max(rhs, 1e-300));
    }
    return worst;
}

PoincareTerms poincare_terms(const DirichletSpace& s, const CutoffFunction& psi,
                             const std::vector<double>& f) {
    const int n = s.size();
    std::vector<double> lf(n);
    for (int x = 0; x < n; ++x) {
        if (!(f[x] > 0)) throw std::invalid_argument("poincare: witness must be positive");
        lf[x] = std::log(f[x]);
    }
    Accumulator num, den;
    for (int x = 0; x < n; ++x) {
        double w = psi.values[x] * psi.values[x] * s.mu()[x];
        num.add(lf[x] * w);
        den.add(w);
    }
    const double mean = num.value() / den.value();
    auto g = energy_measure(s, f, f);
    Accumulator lhs, rhs;
    for (int x = 0; x < n; ++x) {
        double p2 = psi.values[x] * psi.values[x];
        lhs.add((lf[x] - mean) * (lf[x] - mean) * p2 * s.mu()[x]);
        rhs.add(p2 * g[x] / (f[x] * f[x]));
    }
    return {lhs.value(), rhs.value()};
}

double certify_poincare(const DirichletSpace& s, const NestedDomainFamily& fam, double dp,
                        double d, const std::vector<std::vector<double>>& ws) {
    auto psi = build_cutoff(s, fam, dp, d);
    double c = 0;
    for (std::size_t k = 0; k < ws.size(); ++k) {
        auto t = poincare_terms(s, psi, ws[k]);
        if (t.rhs_integral <= 0) {
            if (t.lhs > 1e-24)
                throw CertificationError("certify_poincare: witness " + std::to_string(k) +
                                         " has zero energy but positive variance");
            continue;
        }
        c = std::max(c, t.lhs / t.rhs_integral);
    }
    return c;
}

}  // namespace dlab
