#include "dlab/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "dlab/solver.hpp"

namespace dlab {

namespace fs = std::filesystem;

namespace {

json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double den(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ConfigError("expected a number, got " + j.dump());
}

std::string g17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

const char* type_name(const json& j) {
    if (j.is_number()) return "number";
    if (j.is_string()) return "string";
    if (j.is_boolean()) return "boolean";
    if (j.is_array()) return "array";
    if (j.is_object()) return "object";
    return "null";
}

void merge(json& base, const json& user, const std::string& path) {
    for (auto it = user.begin(); it != user.end(); ++it) {
        std::string p = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) {
            if (path == "ledger_overrides") {
                base[it.key()] = it.value();
                continue;
            }
            throw ConfigError("unknown config field: " + p);
        }
        json& b = base[it.key()];
        if (std::string(type_name(b)) != type_name(it.value()))
            throw ConfigError("config field " + p + ": expected " + type_name(b) + ", got " +
                              type_name(it.value()));
        if (b.is_object())
            merge(b, it.value(), p);
        else
            b = it.value();
    }
}

}  // namespace

json default_config(const std::string& id) {
    json c = {
        {"schema_version", kSchemaVersion},
        {"scenario", id},
        {"kind", "heat"},
        {"seed", 1},
        {"grid", {{"dims", {16, 16}}, {"spacing", 1.0}}},
        {"geometry",
         {{"center", {8, 8}},
          {"R", 6.0},
          {"delta_star", 0.5},
          {"delta", 0.5},
          {"anchors", {4.0, 6.0, 10.0, 12.0}},
          {"c0", 4.0},
          {"tau", {4.0, 8.0, 12.0, 16.0}},
          {"t_end", 16.0},
          {"time_intervals", 128},
          {"pairs", {{0.5, 1.0}, {0.75, 1.0}, {0.5, 0.75}}}}},
        {"coefficients",
         {{"a", 1.0},
          {"a_bar", 1.0},
          {"alpha", "one"},
          {"gamma", 0.5},
          {"nu", 4.0},
          {"eta", 0.1},
          {"d0", 0.0},
          {"d_r", 4.0},
          {"d_profile", "singular"},
          {"x0_offset", {0.5, 0.5}},
          {"w2", 0.0},
          {"w_r", 8.0},
          {"drift_b21", 0.0}}},
        {"initial", {{"base", 1.0}, {"amplitude", 2.0}, {"width", 3.0}}},
        {"checks", {{"epsilon", 1e-3}, {"lambdas", {0.5, 1.0, 2.0, 4.0}}, {"weak_probes", 20}}},
        {"max_principle", {{"M", {0.0, 1.0}}}},
        {"pointwise",
         {{"enabled", false},
          {"chain", {{0, 0}, {1, 0}, {2, 0}}},
          {"s", 4.0},
          {"t", 12.0},
          {"nbhd", 1.0}}},
        {"ledger_overrides", json::object()},
    };
    if (id == "S1" || id == "custom") {
    } else if (id == "S2") {
        c["kind"] = "aronson_serrin";
        c["coefficients"]["a"] = 0.5;
        c["coefficients"]["a_bar"] = 1.5;
        c["coefficients"]["alpha"] = "sin";
        c["coefficients"]["d0"] = 0.1;
    } else if (id == "S3") {
        c["kind"] = "kolmogorov";
        c["geometry"]["time_intervals"] = 256;
        c["coefficients"]["drift_b21"] = 1.0;
    } else if (id == "S4") {
        c["kind"] = "max_principle";
        c["coefficients"]["d_profile"] = "constant";
        c["coefficients"]["d0"] = 0.05;
        c["coefficients"]["d_r"] = 8.0;
        c["coefficients"]["w2"] = 0.02;
        c["geometry"]["anchors"] = {1.0, 1.5, 2.5, 3.0};
        c["geometry"]["c0"] = 1.0;
        c["geometry"]["tau"] = {1.0, 2.0, 3.0, 4.0};
        c["geometry"]["t_end"] = 4.0;
        c["geometry"]["time_intervals"] = 512;
        c["initial"]["base"] = 0.0;
        c["initial"]["amplitude"] = 1.5;
    } else if (id == "S5") {
        c["pointwise"]["enabled"] = true;
    } else {
        throw ConfigError("unknown scenario id: " + id);
    }
    return c;
}

json load_config(const json& user) {
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    if (!user.contains("scenario") || !user["scenario"].is_string())
        throw ConfigError("config field scenario: required string");
    json base = default_config(user["scenario"].get<std::string>());
    merge(base, user, "");
    if (base["schema_version"] != kSchemaVersion)
        throw ConfigError("config field schema_version: unsupported value " +
                          base["schema_version"].dump());
    const std::string kind = base["kind"];
    if (kind != "heat" && kind != "aronson_serrin" && kind != "kolmogorov" &&
        kind != "max_principle")
        throw ConfigError("config field kind: unknown value " + kind);
    const auto& g = base["grid"];
    if (g["dims"].size() != 2) throw ConfigError("config field grid.dims: need two entries");
    for (const auto& d : g["dims"])
        if (!d.is_number_integer() || d.get<int>() < 3)
            throw ConfigError("config field grid.dims: entries must be integers >= 3");
    if (!(g["spacing"].get<double>() > 0)) throw ConfigError("config field grid.spacing: must be positive");
    const auto& geo = base["geometry"];
    if (geo["anchors"].size() != 4) throw ConfigError("config field geometry.anchors: need 4");
    if (geo["tau"].size() != 4) throw ConfigError("config field geometry.tau: need 4");
    if (geo["center"].size() != 2) throw ConfigError("config field geometry.center: need 2");
    if (!(geo["time_intervals"].is_number_integer() && geo["time_intervals"].get<int>() >= 4))
        throw ConfigError("config field geometry.time_intervals: integer >= 4");
    for (const auto& p : geo["pairs"])
        if (!p.is_array() || p.size() != 2)
            throw ConfigError("config field geometry.pairs: entries are [delta', delta]");
    if (!base["seed"].is_number_integer()) throw ConfigError("config field seed: integer");
    static const std::vector<std::string> overridable = {
        "a", "C1", "C2", "C3", "C_SI", "C_SI0", "C_wPI", "kappa", "D_sum"};
    for (auto it = base["ledger_overrides"].begin(); it != base["ledger_overrides"].end(); ++it) {
        if (std::find(overridable.begin(), overridable.end(), it.key()) == overridable.end())
            throw ConfigError("config field ledger_overrides." + it.key() + ": not overridable");
        if (!it.value().is_number())
            throw ConfigError("config field ledger_overrides." + it.key() + ": expected number");
    }
    return base;
}

json report_to_json(const EstimateReport& r) {
    json b = json::array();
    for (const auto& it : r.budget) b.push_back({{"name", it.name}, {"value", num(it.value)}});
    return {{"name", r.name},
            {"status", r.status},
            {"lhs", num(r.lhs)},
            {"rhs", num(r.rhs)},
            {"margin", num(r.margin)},
            {"tolerance_budget", num(r.tolerance_budget)},
            {"budget", b},
            {"inputs",
             {{"p", num(r.inputs.p)},
              {"n", num(r.inputs.n)},
              {"epsilon", num(r.inputs.epsilon)},
              {"delta_prime", num(r.inputs.delta_prime)},
              {"delta", num(r.inputs.delta)},
              {"lambda", num(r.inputs.lambda)}}},
            {"note", r.note}};
}

namespace {

struct FieldRef {
    const char* name;
    double ConstantLedger::*ptr;
};

const std::vector<FieldRef>& hypothesis_fields() {
    static const std::vector<FieldRef> f = {
        {"a", &ConstantLedger::a},           {"a_bar", &ConstantLedger::a_bar},
        {"C1", &ConstantLedger::C1},         {"C2", &ConstantLedger::C2},
        {"C3", &ConstantLedger::C3},         {"C_SI", &ConstantLedger::C_SI},
        {"C_SI0", &ConstantLedger::C_SI0},   {"C_wPI", &ConstantLedger::C_WPI},
        {"nu", &ConstantLedger::nu},         {"gamma", &ConstantLedger::gamma},
        {"k", &ConstantLedger::k},           {"beta", &ConstantLedger::beta},
        {"eta", &ConstantLedger::eta},       {"kappa", &ConstantLedger::kappa},
        {"delta_star", &ConstantLedger::delta_star}, {"delta", &ConstantLedger::delta},
        {"R", &ConstantLedger::R},           {"mu_B1", &ConstantLedger::mu_B1},
        {"D_sum", &ConstantLedger::D_sum},
    };
    return f;
}

}  // namespace

json ledger_to_json(const ConstantLedger& L) {
    json h = json::object();
    for (const auto& f : hypothesis_fields()) h[f.name] = num(L.*f.ptr);
    h["tau"] = {L.tau[0], L.tau[1], L.tau[2], L.tau[3]};
    json d = {{"L", num(L.L)},
              {"A0", num(L.A0)},
              {"C_prime", num(L.C_prime)},
              {"A1", num(L.A1)},
              {"k1", num(L.k1)},
              {"A2", num(L.A2)},
              {"k2", num(L.k2)},
              {"A3", num(L.A3)},
              {"A0_late", num(L.A0_late)},
              {"C_prime_late", num(L.C_prime_late)},
              {"A1_late", num(L.A1_late)},
              {"A2_late", num(L.A2_late)},
              {"A3_late", num(L.A3_late)},
              {"log_C_PHI", num(L.log_C_PHI)},
              {"log_log_C_PHI", num(L.log_log_C_PHI)},
              {"C_PHI", num(L.C_PHI)}};
    json t = json::array();
    for (const auto& e : L.trace)
        t.push_back({{"name", e.name}, {"value", num(e.value)}, {"formula", e.formula},
                     {"inputs", e.inputs}});
    return {{"hypothesis", h}, {"derived", d}, {"trace", t}};
}

ConstantLedger ledger_from_json(const json& j) {
    ConstantLedger L;
    const auto& h = j.at("hypothesis");
    for (const auto& f : hypothesis_fields()) L.*f.ptr = den(h.at(f.name));
    for (int i = 0; i < 4; ++i) L.tau[i] = h.at("tau").at(i).get<double>();
    const auto& d = j.at("derived");
    L.L = den(d.at("L"));
    L.A0 = den(d.at("A0"));
    L.C_prime = den(d.at("C_prime"));
    L.A1 = den(d.at("A1"));
    L.k1 = den(d.at("k1"));
    L.A2 = den(d.at("A2"));
    L.k2 = den(d.at("k2"));
    L.A3 = den(d.at("A3"));
    L.A0_late = den(d.at("A0_late"));
    L.C_prime_late = den(d.at("C_prime_late"));
    L.A1_late = den(d.at("A1_late"));
    L.A2_late = den(d.at("A2_late"));
    L.A3_late = den(d.at("A3_late"));
    L.log_C_PHI = den(d.at("log_C_PHI"));
    L.log_log_C_PHI = den(d.at("log_log_C_PHI"));
    L.C_PHI = den(d.at("C_PHI"));
    for (const auto& e : j.at("trace"))
        L.trace.push_back({e.at("name"), den(e.at("value")), e.at("formula"), e.at("inputs")});
    return L;
}

namespace {

EstimateReport from_check(const HypothesisCheck& c, EstimateInputs in) {
    EstimateReport r;
    r.name = c.name;
    r.lhs = c.lhs;
    r.rhs = c.rhs;
    r.inputs = in;
    r.budget.push_back({"time quadrature and floating point", c.budget});
    return r;
}

struct Pipeline {
    json cfg;
    std::mt19937_64 rng;
    std::shared_ptr<DirichletSpace> space;
    NestedDomainFamily fam;
    std::vector<EstimateReport> reports;
    json trace = json::array();
    json lorentz = json::array();
    std::vector<std::string> notes;
    std::vector<std::pair<std::string, std::string>> fields;  // (file name, content)

    void add(EstimateReport r, bool asserted = true) {
        r.finalize(asserted);
        reports.push_back(std::move(r));
    }
    void add_final(const EstimateReport& r) { reports.push_back(r); }
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    }
};

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

std::vector<double> bump(const DirichletSpace& s, int center, double base, double amp,
                         double width) {
    std::vector<double> u(s.size());
    for (int x = 0; x < s.size(); ++x)
        u[x] = base + amp * std::exp(-dist2(s.coords[x], s.coords[center]) / (2 * width * width));
    return u;
}

std::vector<double> positive_field(Pipeline& P, const std::vector<char>& support) {
    const auto& s = *P.space;
    int c = 0;
    do c = static_cast<int>(P.uniform(0, s.size() - 1e-9));
    while (!support[c]);
    double w = P.uniform(1.0, 3.0), amp = P.uniform(0.2, 2.0), base = P.uniform(0.2, 1.0);
    return bump(s, c, base, amp, w);
}

std::string field_text(const SpaceTimeField& u) {
    std::ostringstream os;
    u.write(os);
    return os.str();
}

}  // namespace

RunResult run_scenario(const json& config_in, const std::string& out_dir, bool strict) {
    Pipeline P;
    P.cfg = load_config(config_in);
    const json& cfg = P.cfg;
    P.rng.seed(cfg["seed"].get<std::uint64_t>());
    const std::string kind = cfg["kind"];
    const auto& geo = cfg["geometry"];
    const auto& co_cfg = cfg["coefficients"];
    const std::vector<int> dims = cfg["grid"]["dims"];
    const double h = cfg["grid"]["spacing"];

    // space and geometry
    if (kind == "kolmogorov")
        P.space = std::make_shared<DirichletSpace>(kolmogorov_space(dims[0], dims[1], h));
    else
        P.space = std::make_shared<DirichletSpace>(build_grid_space(dims, h));
    const auto& s = *P.space;
    const int center = grid_index(s, geo["center"].get<std::vector<int>>());
    std::array<double, 4> anchors, tau;
    for (int i = 0; i < 4; ++i) {
        anchors[i] = geo["anchors"][i];
        tau[i] = geo["tau"][i];
    }
    P.fam = nested_family(center, geo["R"], geo["delta_star"], anchors, geo["c0"]);
    P.fam.attach(s);
    auto& fam = P.fam;
    const double delta = geo["delta"];
    const double t_end = geo["t_end"];
    const double eta = co_cfg["eta"];
    const double eps = cfg["checks"]["epsilon"];
    const auto ball1 = fam.ball(1.0);
    const double mu_B1 = s.measure(ball1);
    std::vector<std::pair<double, double>> pairs;
    for (const auto& p : geo["pairs"]) pairs.push_back({p[0], p[1]});
    const double ds = fam.delta_star;

    // coefficients and form
    std::vector<Coefficient> cs;
    const double d0 = co_cfg["d0"];
    if (d0 != 0 && kind != "kolmogorov") {
        Coefficient d;
        d.kind = CoefficientKind::d;
        d.r = co_cfg["d_r"];
        d.q = kInf;
        d.values.resize(s.size());
        if (co_cfg["d_profile"] == "singular") {
            std::vector<double> x0 = s.coords[center];
            for (int i = 0; i < 2; ++i) x0[i] += co_cfg["x0_offset"][i].get<double>() * h;
            const double ex = -2.0 / d.r;
            for (int x = 0; x < s.size(); ++x)
                d.values[x] = d0 * std::pow(std::sqrt(dist2(s.coords[x], x0)), ex);
        } else if (co_cfg["d_profile"] == "constant") {
            std::fill(d.values.begin(), d.values.end(), d0);
        } else {
            throw ConfigError("config field coefficients.d_profile: unknown value");
        }
        cs.push_back(d);
    }
    const double w2 = co_cfg["w2"];
    if (w2 != 0 && kind != "kolmogorov") {
        Coefficient w;
        w.kind = CoefficientKind::w2;
        w.r = co_cfg["w_r"];
        w.q = kInf;
        w.values.assign(s.size(), w2);
        cs.push_back(w);
    }
    auto co = certify_coefficients(s, cs, co_cfg["a"], co_cfg["a_bar"], co_cfg["gamma"],
                                   co_cfg["nu"], t_end, ball1);
    QuasilinearForm form;
    if (kind == "kolmogorov") {
        const double b21 = co_cfg["drift_b21"];
        form = build_kolmogorov_form(P.space, {{{0.0, 0.0}, {b21, 0.0}}});
    } else if (cs.empty() && co_cfg["alpha"] == "one") {
        form = heat_form(P.space);
    } else {
        Nonlinearity alpha;
        if (co_cfg["alpha"] == "sin")
            alpha = [](double, int, double u) { return 1.0 + 0.5 * std::sin(u); };
        else if (co_cfg["alpha"] == "one")
            alpha = [](double, int, double) { return 1.0; };
        else
            throw ConfigError("config field coefficients.alpha: unknown value");
        form = build_aronson_serrin_form(P.space, co, alpha);
    }

    // adaptedness on seeded probes
    if (kind != "kolmogorov") {
        std::vector<AdaptednessProbe> probes;
        for (int k = 0; k < 8; ++k) {
            AdaptednessProbe pr;
            pr.t = P.uniform(0, t_end);
            for (auto* v : {&pr.u, &pr.v, &pr.f, &pr.g}) {
                v->resize(s.size());
                for (double& x : *v) x = P.uniform(-1, 1);
            }
            for (double& x : pr.f) x = std::abs(x);
            probes.push_back(pr);
        }
        auto ad = verify_adaptedness(form, co, probes);
        std::vector<std::string> kinds;
        for (const auto& e : ad.entries)
            if (std::find(kinds.begin(), kinds.end(), e.inequality) == kinds.end())
                kinds.push_back(e.inequality);
        for (const auto& k : kinds) {
            const AdaptednessEntry* worst = nullptr;
            for (const auto& e : ad.entries)
                if (e.inequality == k && (!worst || e.margin < worst->margin)) worst = &e;
            EstimateReport r;
            r.name = "adaptedness " + k;
            r.lhs = worst->lhs;
            r.rhs = worst->rhs;
            r.budget.push_back({"floating point", 1e-10 * std::max(std::abs(r.lhs), std::abs(r.rhs))});
            r.note = "worst of " + std::to_string(probes.size()) + " probes";
            P.add(r);
        }
    } else {
        P.notes.push_back("adaptedness not applicable to the Kolmogorov drift");
    }

    // integration
    const auto times = uniform_times(0, t_end, geo["time_intervals"].get<std::size_t>());
    const auto& ini = cfg["initial"];
    std::vector<SpaceTimeField> sols;
    std::vector<double> Ms;
    const bool mp = kind == "max_principle";
    if (mp) {
        for (const auto& m : cfg["max_principle"]["M"]) Ms.push_back(m);
        for (double M : Ms) {
            auto u0 = bump(s, center, 0.0, ini["amplitude"], ini["width"]);
            for (int x = 0; x < s.size(); ++x) u0[x] = ball1[x] ? M - u0[x] : 0.0;
            auto u = integrate(form, u0, times, BoundaryMode::zero_outside, ball1);
            u.space_hash = s.hash();
            sols.push_back(u);
        }
    } else {
        auto u0 = bump(s, center, ini["base"], ini["amplitude"], ini["width"]);
        auto u = integrate(form, u0, times);
        u.space_hash = s.hash();
        sols.push_back(u);
    }
    const SpaceTimeField& u = sols.front();

    // weak residuals
    for (std::size_t f = 0; f < sols.size(); ++f) {
        std::vector<WeakProbe> probes;
        const int nprobe = cfg["checks"]["weak_probes"];
        for (int k = 0; k < nprobe; ++k) {
            WeakProbe pr;
            pr.phi = positive_field(P, ball1);
            if (mp)
                for (int x = 0; x < s.size(); ++x)
                    if (!ball1[x]) pr.phi[x] = 0;
            std::size_t i = static_cast<std::size_t>(P.uniform(0, times.size() - 2));
            std::size_t j = i + 2 + static_cast<std::size_t>(P.uniform(0, times.size() - i - 2));
            j = std::min(j, times.size() - 1);
            pr.a = times[i];
            pr.b = times[j];
            probes.push_back(pr);
        }
        auto wc = certify_weak(sols[f], form, probes, SignMode::solution, 1e-8,
                               mp ? ball1 : std::vector<char>{});
        EstimateReport r;
        r.name = "weak_residual";
        double worst = 0;
        for (std::size_t k = 0; k < wc.residuals.size(); ++k)
            worst = std::max(worst, std::abs(wc.residuals[k]) / std::max(wc.scales[k], 1e-300));
        r.lhs = worst;
        r.rhs = wc.budget_rel;
        r.note = std::to_string(probes.size()) + " probes, Simpson in time" +
                 (mp ? ", M = " + g17(Ms[f]) : "");
        P.add(r);
    }

    // geometric certification on declared witnesses and solution snapshots
    std::vector<SobolevWitness> sw;
    std::vector<std::vector<double>> pw;
    for (int k = 0; k < 4; ++k) {
        auto f = positive_field(P, ball1);
        sw.push_back({f, {2.0}});
        pw.push_back(f);
    }
    const double p_small = 0.45 * (1 - eta);
    const double kap = co.kappa;
    for (std::size_t j = 0; j < u.times.size(); j += 16) {
        std::vector<double> ub(s.size()), ue(s.size());
        for (int x = 0; x < s.size(); ++x) {
            ub[x] = std::max(u.values[j][x], 0.0) + kap;
            ue[x] = ub[x] + eps;
        }
        bool positive = *std::min_element(ub.begin(), ub.end()) > 0;
        sw.push_back({ub, positive ? std::vector<double>{2.0, 3.0, 4.0} : std::vector<double>{2.0, 4.0}});
        sw.push_back({ue, {-1.0, p_small}});
        if (!mp) pw.push_back(ue);
    }
    SpaceCertificate cert;
    double C_cut = 0;
    for (auto [dp, d] : pairs) {
        auto c = certify_sobolev(s, fam, dp, d, co.nu, sw);
        cert.C_SI = std::max(cert.C_SI, c.C_SI);
        cert.C_SI0 = std::max(cert.C_SI0, c.C_SI0);
        C_cut = std::max(C_cut, build_cutoff(s, fam, dp, d).C_cut);
    }
    cert.nu = co.nu;
    cert.k = 1.0;
    cert.witness_set = sw;
    for (auto [dp, d] : pairs) {
        SpaceCertificate c = cert;
        c.delta_prime = dp;
        c.delta = d;
        EstimateReport r;
        r.name = "wSI_recheck";
        r.inputs = {0, kInf, 0, dp, d, 0};
        r.lhs = recheck_sobolev(s, fam, c);
        r.rhs = 0;
        r.budget.push_back({"floating point", 1e-12});
        r.note = "max relative violation over " + std::to_string(sw.size()) + " witnesses";
        P.add(r);
    }
    const double C_wPI = certify_poincare(s, fam, delta, 1.0, pw);

    // hypothesis constants
    auto hc = derive_h1_constants(co, C_cut, fam.R, 2.0, eta);
    if (kind == "kolmogorov") {
        const double b21 = co_cfg["drift_b21"];
        const double vmax = std::abs(b21) * 0.5 * (dims[0] - 1) * h;
        const double extra = 4 * vmax / fam.R;
        hc.C2 += extra;
        hc.trace.push_back({"C2.drift", extra, "4 max|b21 x1| / R"});
    }
    auto D = h2_d_fields(co);
    double D_sum = 0;
    for (const auto& df : D) D_sum += df.value;

    bool hyp_ok = true;
    bool h2_all = true;
    const auto Im1 = fam.I_minus(1.0), Ip1 = fam.I_plus(1.0);
    if (!mp) {
        for (double p : {2.0, 3.0, 4.0}) {
            auto c = check_H1a(u, form, fam, hc, p, kInf, ds, 1.0, Im1);
            auto r = from_check(c, {p, kInf, 0, ds, 1.0, 0});
            P.add(r);
            hyp_ok = hyp_ok && P.reports.back().pass;
        }
        for (double p : {-1.0, p_small, 1.5}) {
            auto I = p > 0 && p < 1 ? Ip1 : Im1;
            auto c = check_H1b(u, form, fam, hc, p, eps, ds, 1.0, I);
            auto r = from_check(c, {p, kInf, eps, ds, 1.0, 0});
            P.add(r);
            hyp_ok = hyp_ok && P.reports.back().pass;
        }
        std::vector<std::pair<std::vector<double>, double>> h2probes;
        for (std::size_t j = 0; j < u.times.size(); j += 16)
            h2probes.push_back({u.values[j], u.times[j]});
        if (kind == "kolmogorov") {
            const double x1c = 0.5 * (dims[0] - 1) * h;
            for (double K : {0.5, 2.0, 8.0, 32.0}) {
                std::vector<double> v(s.size());
                for (int x = 0; x < s.size(); ++x) {
                    double x1 = s.coords[x][0] - x1c;
                    double x2 = s.coords[x][1] - s.coords[center][1];
                    v[x] = std::exp(-K * x1 * x2 / fam.R);
                }
                h2probes.push_back({v, 0.0});
            }
        }
        for (const auto& [v, t] : h2probes) {
            auto c = check_H2(v, t, form, fam, hc, eps, delta, 1.0, D);
            auto r = from_check(c, {0, kInf, eps, delta, 1.0, 0});
            r.note = t == 0 && &v != &h2probes.front().first ? "synthetic probe" : "t = " + g17(t);
            r.finalize(kind != "kolmogorov");
            h2_all = h2_all && r.pass;
            P.add_final(r);
        }
        if (kind == "kolmogorov") {
            P.notes.push_back(h2_all ? "H.2 held on every probe"
                                     : "H.2 unverified: negative-margin probe recorded");
            hyp_ok = hyp_ok && h2_all;
        } else {
            hyp_ok = hyp_ok && h2_all;
        }
    }

    // ledger
    ConstantLedger L = make_ledger(hc, cert, C_wPI, fam, tau, delta, mu_B1, D_sum);
    for (auto it = cfg["ledger_overrides"].begin(); it != cfg["ledger_overrides"].end(); ++it) {
        const double v = it.value();
        const std::string k = it.key();
        if (k == "a") L.a = v;
        else if (k == "C1") L.C1 = v;
        else if (k == "C2") L.C2 = v;
        else if (k == "C3") L.C3 = v;
        else if (k == "C_SI") L.C_SI = v;
        else if (k == "C_SI0") L.C_SI0 = v;
        else if (k == "C_wPI") L.C_WPI = v;
        else if (k == "kappa") L.kappa = v;
        else if (k == "D_sum") L.D_sum = v;
    }
    harnack_constant(L);
    {
        EstimateReport r;
        r.name = "ledger_replay";
        r.lhs = replay_ledger(L);
        r.rhs = 1e-12;
        P.add(r);
        for (const auto& m : monotonicity_audit(L)) {
            EstimateReport q;
            q.name = "monotonicity " + m.name;
            q.lhs = 0;
            q.rhs = 0;
            q.note = "log log C_PHI " + g17(m.base) + " -> " + g17(m.probed);
            q.finalize();
            q.pass = m.ok;
            q.status = m.ok ? "pass" : "fail";
            P.add_final(q);
        }
    }

    auto add_trace = [&](const std::string& id, const MveResult& m) {
        for (const auto& st : m.product.steps)
            P.trace.push_back({{"report", id},
                               {"level", st.level},
                               {"delta_i", num(st.delta_i)},
                               {"d_i", num(st.d_i)},
                               {"p_i", num(st.p_i)},
                               {"log_factor", num(st.log_factor)},
                               {"log_norm", num(st.log_norm)}});
    };

    // estimates
    if (!mp) {
        for (double p : {2.0, 3.0, 4.0}) P.add_final(cacciopoli_subsol(u, form, fam, L, p, ds, 1.0));
        auto se = suptime_energy(u, form, fam, L, ds, 1.0);
        P.add_final(se.sup_l2);
        P.add_final(se.energy);
        for (double p : {2.0, 4.0}) {
            auto m = mve_subsol(u, form, fam, L, p, ds, 1.0);
            add_trace("mve_subsol p=" + g17(p), m);
            P.add_final(m.report);
        }
        {
            auto m = mve_supsol(u, form, fam, L, -1.0, eps, ds, 1.0, Branch::minus);
            add_trace("mve_supsol p=-1", m);
            P.add_final(m.report);
            auto m2 = mve_supsol(u, form, fam, L, p_small, eps, ds, 1.0, Branch::plus);
            add_trace("mve_supsol p=" + g17(p_small), m2);
            P.add_final(m2.report);
        }
        std::vector<double> lambdas = cfg["checks"]["lambdas"];
        for (bool upper : {true, false}) {
            auto ll = log_lemma(u, s, fam, L, eps, delta, {0.0, tau[1], tau[3]}, lambdas, upper);
            for (auto r : ll.reports) {
                if (kind == "kolmogorov") r.finalize(false);
                P.add_final(r);
            }
        }
        const bool certified = kind != "kolmogorov" && hyp_ok;
        auto hv = harnack_verify(u, fam, L, 0.0, delta, certified);
        EstimateReport r;
        r.name = "harnack";
        r.inputs = {0, kInf, 0, delta, 1.0, 0};
        r.lhs = hv.log_ratio > 0 ? std::log(hv.log_ratio) : -kInf;
        r.rhs = L.log_log_C_PHI;
        r.note = "log log scale, sup Q- = " + g17(hv.sup_minus) + ", inf Q+ = " +
                 g17(hv.inf_plus) + ", ratio = " + g17(hv.ratio) +
                 (hv.note.empty() ? "" : ", " + hv.note);
        r.finalize(certified);
        if (certified) {
            r.pass = hv.pass;
            r.status = hv.pass ? "pass" : "fail";
        }
        P.add_final(r);
        if (!certified && kind != "kolmogorov")
            P.notes.push_back("Harnack not certified: a hypothesis check failed");
        if (kind == "kolmogorov") P.notes.push_back("Harnack certification refused: H.2 unverified");

        if (cfg["pointwise"]["enabled"].get<bool>()) {
            std::vector<int> chain;
            auto cc = geo["center"].get<std::vector<int>>();
            for (const auto& off : cfg["pointwise"]["chain"])
                chain.push_back(grid_index(s, {cc[0] + off[0].get<int>(), cc[1] + off[1].get<int>()}));
            auto pe = pointwise_estimate(u, s, chain, cfg["pointwise"]["s"], cfg["pointwise"]["t"],
                                         L, cfg["pointwise"]["nbhd"]);
            EstimateReport q;
            q.name = "pointwise";
            q.lhs = pe.lhs;
            q.rhs = pe.rhs;
            q.note = std::to_string(chain.size() - 1) + " links";
            q.finalize(certified);
            P.add_final(q);
        }

        auto w = u.window(Im1.first, Im1.second);
        w = map_window(w, [&](double, std::size_t, double v) { return std::max(v, 0.0) + kap; });
        std::vector<double> muB(s.mu());
        for (int x = 0; x < s.size(); ++x)
            if (!ball1[x]) muB[x] = 0;
        auto tn = triple_norm(w, muB, L.gamma, L.nu);
        for (const auto& [r, v] : tn.trace) {
            auto pr = r == kInf ? ExponentPair{} : ExponentPair::on_boundary(r, L.gamma, L.nu);
            P.lorentz.push_back({{"r", num(r)},
                                 {"q", num(r == kInf ? 1 / (1 - L.gamma) : pr.q)},
                                 {"value", num(v)},
                                 {"sup", num(tn.value)}});
        }
    } else {
        for (std::size_t f = 0; f < sols.size(); ++f) {
            MaxPrincipleInput in;
            in.M = Ms[f];
            for (const auto& c : co.coeffs) {
                if (c.kind == CoefficientKind::d) in.norm_d += c.norm;
                if (c.kind == CoefficientKind::b) in.norm_b += c.norm;
                if (c.kind == CoefficientKind::w1) in.norm_w1 += c.norm;
                if (c.kind == CoefficientKind::w2) in.norm_w2 += c.norm;
            }
            in.t0 = 0;
            in.t1 = t_end;
            in.mu_U = mu_B1;
            in.domain = ball1;
            auto r = maximum_principle_check(sols[f], L, in);
            r.note += ", M = " + g17(in.M);
            P.add_final(r);
        }
    }

    // bundle
    fs::create_directories(out_dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream os(fs::path(out_dir) / name, std::ios::binary);
        os << text;
        if (!os) throw std::runtime_error("cannot write " + name);
    };
    write("config.json", cfg.dump(2) + "\n");
    {
        std::ostringstream os;
        s.write(os);
        write("space.txt", os.str());
    }
    for (std::size_t f = 0; f < sols.size(); ++f)
        write(mp ? "field_M" + g17(Ms[f]) + ".txt" : "field.txt", field_text(sols[f]));
    std::string lines;
    RunResult res;
    for (const auto& r : P.reports) {
        lines += report_to_json(r).dump() + "\n";
        if (r.status == "fail") res.failures.push_back(r.name);
        if (r.status == "unverified") res.unverified.push_back(r.name);
    }
    res.reports = P.reports.size();
    write("reports.jsonl", lines);
    json lj = ledger_to_json(L);
    json audit = {{"replay_rel_diff", num(replay_ledger(L))}, {"monotonicity", json::array()}};
    for (const auto& m : monotonicity_audit(L))
        audit["monotonicity"].push_back(
            {{"name", m.name}, {"base", num(m.base)}, {"probed", num(m.probed)}, {"ok", m.ok}});
    lj["audit"] = audit;
    json ht = json::array();
    for (const auto& t : hc.trace)
        ht.push_back({{"name", t.name}, {"value", num(t.value)}, {"formula", t.formula}});
    lj["hypothesis_trace"] = ht;
    write("ledger.json", lj.dump(2) + "\n");
    write("iteration_trace.json", P.trace.dump(1) + "\n");
    write("lorentz_grid.json", P.lorentz.dump(1) + "\n");
    res.exit_code = res.failures.empty() && (!strict || res.unverified.empty()) ? 0 : 1;
    json summary = {{"scenario", cfg["scenario"]},
                    {"kind", kind},
                    {"exit_code", res.exit_code},
                    {"strict", strict},
                    {"failures", res.failures},
                    {"unverified", res.unverified},
                    {"notes", P.notes},
                    {"reports", res.reports}};
    write("summary.json", summary.dump(2) + "\n");
    emit_tables(out_dir, table_kinds());
    {
        auto now = std::chrono::system_clock::now();
        std::time_t tt = std::chrono::system_clock::to_time_t(now);
        char buf[64];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
        write("metadata.json", json{{"created", buf}}.dump(2) + "\n");
    }
    return res;
}

const std::vector<std::string>& table_kinds() {
    static const std::vector<std::string> k = {"margins", "ledger", "iteration_trace",
                                               "lorentz_grid"};
    return k;
}

namespace {

json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    return json::parse(is);
}

std::string cell(const json& j) {
    if (j.is_string()) return csv_field(j.get<std::string>());
    if (j.is_number()) return g17(j.get<double>());
    if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
    return csv_field(j.dump());
}

}  // namespace

void emit_tables(const std::string& bundle, const std::vector<std::string>& kinds) {
    const fs::path dir(bundle);
    for (const auto& k : kinds)
        if (std::find(table_kinds().begin(), table_kinds().end(), k) == table_kinds().end())
            throw std::invalid_argument("unknown table kind: " + k);
    for (const auto& k : kinds) {
        std::string out;
        if (k == "margins") {
            std::ifstream is(dir / "reports.jsonl");
            if (!is) throw std::runtime_error("bundle has no reports.jsonl");
            std::vector<json> rs;
            for (std::string line; std::getline(is, line);)
                if (!line.empty()) rs.push_back(json::parse(line));
            std::stable_sort(rs.begin(), rs.end(), [](const json& a, const json& b) {
                return den(a["margin"]) < den(b["margin"]);
            });
            out = "name,status,p,epsilon,delta_prime,delta,lambda,lhs,rhs,margin,tolerance_budget,note\n";
            for (const auto& r : rs) {
                const auto& in = r["inputs"];
                out += cell(r["name"]) + "," + cell(r["status"]) + "," + cell(in["p"]) + "," +
                       cell(in["epsilon"]) + "," + cell(in["delta_prime"]) + "," +
                       cell(in["delta"]) + "," + cell(in["lambda"]) + "," + cell(r["lhs"]) + "," +
                       cell(r["rhs"]) + "," + cell(r["margin"]) + "," +
                       cell(r["tolerance_budget"]) + "," + cell(r["note"]) + "\n";
            }
        } else if (k == "ledger") {
            auto lj = read_json(dir / "ledger.json");
            out = "name,value,formula,inputs\n";
            for (auto it = lj["hypothesis"].begin(); it != lj["hypothesis"].end(); ++it)
                out += csv_field(it.key()) + "," + cell(it.value()) + ",hypothesis,\n";
            for (const auto& e : lj["hypothesis_trace"])
                out += cell(e["name"]) + "," + cell(e["value"]) + "," + cell(e["formula"]) +
                       ",derived from certified coefficients\n";
            for (const auto& e : lj["trace"])
                out += cell(e["name"]) + "," + cell(e["value"]) + "," + cell(e["formula"]) + "," +
                       cell(e["inputs"]) + "\n";
        } else if (k == "iteration_trace") {
            auto tj = read_json(dir / "iteration_trace.json");
            out = "report,level,delta_i,d_i,p_i,log_factor,log_norm\n";
            for (const auto& r : tj)
                out += cell(r["report"]) + "," + cell(r["level"]) + "," + cell(r["delta_i"]) +
                       "," + cell(r["d_i"]) + "," + cell(r["p_i"]) + "," + cell(r["log_factor"]) +
                       "," + cell(r["log_norm"]) + "\n";
        } else {
            auto gj = read_json(dir / "lorentz_grid.json");
            out = "r,q,value,sup\n";
            for (const auto& r : gj)
                out += cell(r["r"]) + "," + cell(r["q"]) + "," + cell(r["value"]) + "," +
                       cell(r["sup"]) + "\n";
        }
        std::ofstream os(dir / (k + ".csv"), std::ios::binary);
        os << out;
    }
}

ReplayResult replay_bundle(const std::string& bundle, const std::string& scratch) {
    const fs::path dir(bundle);
    auto cfg = read_json(dir / "config.json");
    auto summary = read_json(dir / "summary.json");
    fs::remove_all(scratch);
    run_scenario(cfg, scratch, summary.value("strict", false));
    ReplayResult rr;
    rr.identical = true;
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(scratch)) {
        auto n = e.path().filename().string();
        if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) {
        if (n == "metadata.json") continue;
        if (!fs::exists(dir / n) || !fs::exists(fs::path(scratch) / n) ||
            slurp(dir / n) != slurp(fs::path(scratch) / n)) {
            rr.identical = false;
            rr.differing.push_back(n);
        }
    }
    rr.ledger_rel_diff = replay_ledger(ledger_from_json(read_json(dir / "ledger.json")));
    return rr;
}

}  // namespace dlab
