#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dlab/lorentz.hpp"

namespace dlab {

// u(t,x) sampled on a strictly increasing time grid; piecewise linear in t between samples.
struct SpaceTimeField {
    std::vector<double> times;
    std::vector<std::vector<double>> values;
    std::string space_hash;

    std::size_t nodes() const { return values.empty() ? 0 : values.front().size(); }
    std::vector<double> at(double t) const;
    void validate() const;

    // Samples on [t0,t1]: grid times strictly inside plus interpolated endpoints,
    // with trapezoid weights.
    TimeWindow window(double t0, double t1) const;

    void write(std::ostream& os) const;
    static SpaceTimeField read(std::istream& is);
};

// Pointwise transform of every sample in a window.
template <class F>
TimeWindow map_window(const TimeWindow& w, F&& f) {
    TimeWindow out = w;
    for (std::size_t j = 0; j < w.size(); ++j)
        for (std::size_t x = 0; x < w.values[j].size(); ++x)
            out.values[j][x] = f(w.times[j], x, w.values[j][x]);
    return out;
}

}  // namespace dlab
