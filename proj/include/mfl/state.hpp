#pragma once
// Particle phase-space state Z = (X_i, V_i)_{i<N} and sampled trajectories.

#include <cstdint>
#include <vector>

#include "mfl/common.hpp"

namespace mfl {

struct ParticleState {
    int dim = 0;    // d (space); phase space is R^{2d}
    int64_t n = 0;  // N >= 1
    std::vector<double> positions;   // n x dim, row-major
    std::vector<double> velocities;  // n x dim, row-major
    double time = 0.0;

    ParticleState() = default;
    ParticleState(int d, int64_t N)
        : dim(d), n(N), positions((size_t)N * d, 0.0), velocities((size_t)N * d, 0.0) {}

    double* x(int64_t i) { return positions.data() + (size_t)i * dim; }
    const double* x(int64_t i) const { return positions.data() + (size_t)i * dim; }
    double* v(int64_t i) { return velocities.data() + (size_t)i * dim; }
    const double* v(int64_t i) const { return velocities.data() + (size_t)i * dim; }

    void validate() const {
        require(dim >= 1, "state.dim must be >= 1");
        require(n >= 1, "state.n must be >= 1");
        require((int64_t)positions.size() == n * dim && (int64_t)velocities.size() == n * dim,
                "state arrays must be n x dim");
        require(time >= 0.0, "state.time must be >= 0");
        require(all_finite(positions) && all_finite(velocities), "state entries must be finite");
    }
};

// Time-ordered states sampled every dt_sample, with an averaging window tau
// (an integer multiple of dt_sample).
struct TrajectoryWindow {
    std::vector<ParticleState> states;
    double dt_sample = 0.0;
    double tau = 0.0;

    void validate() const {
        require(!states.empty(), "window must contain at least one state");
        require(dt_sample > 0.0, "window.dt_sample must be > 0");
        require(tau > 0.0, "window.tau must be > 0");
        double k = tau / dt_sample;
        require(std::abs(k - std::round(k)) < 1e-9, "window.tau must be an integer multiple of dt_sample");
        for (size_t s = 1; s < states.size(); ++s) {
            double gap = states[s].time - states[s - 1].time;
            require(std::abs(gap - dt_sample) < 1e-9 * std::max(1.0, dt_sample),
                    "window states must be uniformly spaced");
            require(states[s].n == states[0].n && states[s].dim == states[0].dim,
                    "window states must share n and dim");
        }
    }

    int tau_samples() const { return (int)std::llround(tau / dt_sample); }
};

namespace detail {
// Sample index range of the window covering [t - tau, t] at the final time,
// with the zero-fill convention for t < tau (integrand null before time 0).
struct WindowSpan {
    int first = 0, last = 0;  // inclusive sample range
    double tau = 0.0;
};

inline WindowSpan window_span(const TrajectoryWindow& w) {
    w.validate();
    WindowSpan ws;
    ws.tau = w.tau;
    ws.last = (int)w.states.size() - 1;
    int k = w.tau_samples();
    double t0 = w.states.front().time;
    if (ws.last >= k) {
        ws.first = ws.last - k;
    } else {
        require(t0 <= 1e-12, "window shorter than tau must start at t = 0");
        ws.first = 0;
    }
    return ws;
}
}  // namespace detail

}  // namespace mfl
