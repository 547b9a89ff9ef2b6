#pragma once
// Shared small utilities for the mean-field lab.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfl {

inline constexpr const char* kVersion = "0.1.0";

// Argument/state validation. Throws std::invalid_argument so the CLI can map
// violations to exit code 2.
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

struct RuntimeFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double sqr(double x) { return x * x; }

// Compensated accumulator; keeps fixed-order sums reproducible to the last ulp.
struct KahanSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

inline double dot(const double* a, const double* b, int n) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2sq(const double* a, int n) { return dot(a, a, n); }

inline double norm2(const double* a, int n) { return std::sqrt(norm2sq(a, n)); }

// Surface area of the unit sphere S^{d-1} in R^d.
inline double unit_sphere_area(int d) {
    require(d >= 1, "unit_sphere_area: d >= 1");
    // 2 pi^{d/2} / Gamma(d/2)
    return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

// Volume of the unit ball in R^d.
inline double unit_ball_volume(int d) { return unit_sphere_area(d) / d; }

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace mfl
