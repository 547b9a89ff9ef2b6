#pragma once
// Weighted point clouds: the discrete measures the transport metrics act on.

#include <cmath>
#include <cstdint>
#include <vector>

#include "mfl/common.hpp"
#include "mfl/state.hpp"

namespace mfl {

struct WeightedCloud {
    int dim = 0;
    std::vector<double> points;   // K x dim, row-major
    std::vector<double> weights;  // K, nonnegative, sum 1

    int64_t size() const { return (int64_t)weights.size(); }
    double* p(int64_t i) { return points.data() + (size_t)i * dim; }
    const double* p(int64_t i) const { return points.data() + (size_t)i * dim; }

    void validate() const {
        require(dim >= 1, "cloud.dim must be >= 1");
        require(size() >= 1, "cloud must be nonempty");
        require((int64_t)points.size() == size() * dim, "cloud.points must be K x dim");
        require(all_finite(points), "cloud points must be finite");
        double s = 0;
        for (double w : weights) {
            require(w >= 0.0, "cloud weights must be >= 0");
            s += w;
        }
        require(std::abs(s - 1.0) <= 1e-12, "cloud weights must sum to 1 within 1e-12");
    }
};

inline double point_distance(const WeightedCloud& a, int64_t i, const WeightedCloud& b, int64_t j) {
    double r2 = 0;
    const double* pa = a.p(i);
    const double* pb = b.p(j);
    for (int c = 0; c < a.dim; ++c) r2 += sqr(pa[c] - pb[c]);
    return std::sqrt(r2);
}

// Empirical measure mu_N as an equal-weight cloud over phase points (X_i, V_i).
inline WeightedCloud phase_cloud(const ParticleState& st) {
    st.validate();
    WeightedCloud c;
    c.dim = 2 * st.dim;
    c.points.resize((size_t)st.n * c.dim);
    c.weights.assign(st.n, 1.0 / (double)st.n);
    for (int64_t i = 0; i < st.n; ++i) {
        for (int k = 0; k < st.dim; ++k) {
            c.points[(size_t)i * c.dim + k] = st.x(i)[k];
            c.points[(size_t)i * c.dim + st.dim + k] = st.v(i)[k];
        }
    }
    return c;
}

// Equal-weight cloud over the positions only.
inline WeightedCloud position_cloud(const ParticleState& st) {
    st.validate();
    WeightedCloud c;
    c.dim = st.dim;
    c.points.assign(st.positions.begin(), st.positions.end());
    c.weights.assign(st.n, 1.0 / (double)st.n);
    return c;
}

}  // namespace mfl
