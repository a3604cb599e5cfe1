#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace dlab {

// Compensated (Neumaier) accumulator.
class Accumulator {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    Accumulator& operator+=(double x) { add(x); return *this; }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double accurate_sum(std::span<const double> xs) {
    Accumulator acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    Accumulator acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
    return acc.value();
}

// log(sum_i w_i exp(x_i)) for w_i >= 0; -inf when every weight is zero or x_i = -inf.
inline double log_sum_exp(std::span<const double> x, std::span<const double> w) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i)
        if (w[i] > 0 && x[i] > m) m = x[i];
    if (!std::isfinite(m)) return m;
    Accumulator acc;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (w[i] > 0) acc.add(w[i] * std::exp(x[i] - m));
    return m + std::log(acc.value());
}

inline double safe_log(double x) {
    return x > 0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

// Trapezoid weights for a strictly increasing grid.
inline std::vector<double> trapezoid_weights(std::span<const double> t) {
    std::vector<double> w(t.size(), 0.0);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        double h = t[i + 1] - t[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

// Composite Simpson weights for a uniform grid with an odd number of points;
// an even count closes with a 3/8 panel.
std::vector<double> simpson_weights(std::span<const double> t);

// Trapezoid integral with a Richardson-type error estimate from the every-other-point rule.
std::pair<double, double> integrate_with_error(const std::vector<double>& t,
                                               const std::vector<double>& f);

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace dlab
