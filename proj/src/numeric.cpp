#include "dlab/numeric.hpp"

#include <stdexcept>

namespace dlab {

std::vector<double> simpson_weights(std::span<const double> t) {
    const std::size_t n = t.size();
    if (n < 3) return trapezoid_weights(t);
    const double h = (t.back() - t.front()) / static_cast<double>(n - 1);
    std::vector<double> w(n, 0.0);
    std::size_t intervals = n - 1;
    std::size_t simpson_end = intervals % 2 == 0 ? intervals : intervals - 3;
    for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if (simpson_end != intervals) {
        std::size_t i = simpson_end;
        w[i] += 3.0 * h / 8.0;
        w[i + 1] += 9.0 * h / 8.0;
        w[i + 2] += 9.0 * h / 8.0;
        w[i + 3] += 3.0 * h / 8.0;
    }
    return w;
}

std::pair<double, double> integrate_with_error(const std::vector<double>& t,
                                               const std::vector<double>& f) {
    auto w = trapezoid_weights(t);
    double full = dot(w, f);
    if (t.size() < 5) return {full, 0.0};
    std::vector<double> tc, fc;
    for (std::size_t j = 0; j < t.size(); j += 2) {
        tc.push_back(t[j]);
        fc.push_back(f[j]);
    }
    if (tc.back() != t.back()) {
        tc.push_back(t.back());
        fc.push_back(f.back());
    }
    auto wc = trapezoid_weights(tc);
    return {full, std::abs(full - dot(wc, fc)) / 3.0};
}

}  // namespace dlab
