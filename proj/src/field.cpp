#include "dlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dlab {

void SpaceTimeField::validate() const {
    if (times.empty() || times.size() != values.size())
        throw std::invalid_argument("field: time grid and values disagree");
    for (std::size_t j = 0; j + 1 < times.size(); ++j)
        if (!(times[j + 1] > times[j])) throw std::invalid_argument("field: times not increasing");
    for (const auto& row : values) {
        if (row.size() != nodes()) throw std::invalid_argument("field: ragged rows");
        for (double v : row)
            if (!std::isfinite(v)) throw std::invalid_argument("field: non-finite entry");
    }
}

std::vector<double> SpaceTimeField::at(double t) const {
    if (t < times.front() - 1e-12 || t > times.back() + 1e-12)
        throw std::out_of_range("field: time outside grid");
    auto it = std::lower_bound(times.begin(), times.end(), t);
    std::size_t j = static_cast<std::size_t>(it - times.begin());
    if (j < times.size() && times[j] == t) return values[j];
    if (j == 0) return values.front();
    if (j == times.size()) return values.back();
    const double th = (t - times[j - 1]) / (times[j] - times[j - 1]);
    std::vector<double> out(nodes());
    for (std::size_t x = 0; x < out.size(); ++x)
        out[x] = (1 - th) * values[j - 1][x] + th * values[j][x];
    return out;
}

TimeWindow SpaceTimeField::window(double t0, double t1) const {
    if (!(t1 > t0)) throw std::invalid_argument("field: empty time window");
    if (t0 < times.front() - 1e-12 || t1 > times.back() + 1e-12)
        throw std::out_of_range("field: window not covered by the time grid");
    TimeWindow w;
    w.t0 = t0;
    w.t1 = t1;
    const double eps = 1e-12 * std::max(1.0, std::abs(t1));
    w.times.push_back(t0);
    w.values.push_back(at(t0));
    for (std::size_t j = 0; j < times.size(); ++j)
        if (times[j] > t0 + eps && times[j] < t1 - eps) {
            w.times.push_back(times[j]);
            w.values.push_back(values[j]);
        }
    w.times.push_back(t1);
    w.values.push_back(at(t1));
    w.weights = trapezoid_weights(w.times);
    return w;
}

void SpaceTimeField::write(std::ostream& os) const {
    char buf[40];
    os << "dlab-field v1\n" << (space_hash.empty() ? "-" : space_hash) << ' ' << nodes() << ' '
       << times.size() << '\n';
    for (std::size_t j = 0; j < times.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", times[j]);
        os << buf;
        for (double v : values[j]) {
            std::snprintf(buf, sizeof buf, " %.17g", v);
            os << buf;
        }
        os << '\n';
    }
}

SpaceTimeField SpaceTimeField::read(std::istream& is) {
    std::string tag, ver, hash;
    is >> tag >> ver;
    if (tag != "dlab-field" || ver != "v1")
        throw std::runtime_error("field file: unsupported header '" + tag + " " + ver + "'");
    std::size_t n = 0, m = 0;
    is >> hash >> n >> m;
    SpaceTimeField f;
    f.space_hash = hash == "-" ? "" : hash;
    f.times.resize(m);
    f.values.assign(m, std::vector<double>(n));
    for (std::size_t j = 0; j < m; ++j) {
        is >> f.times[j];
        for (std::size_t x = 0; x < n; ++x) is >> f.values[j][x];
    }
    if (!is) throw std::runtime_error("field file: truncated");
    f.validate();
    return f;
}

}  // namespace dlab
