#pragma once
// N-particle mean-field dynamics a_i = (1/N) sum_{j != i} F(X_i - X_j) and
// the trajectory diagnostics used by the studies.
//
// Determinism contract: with 1 OpenMP thread the pairwise sum runs in fixed
// lexicographic (i<j) order with compensated accumulation, bit-reproducible
// across runs. With t threads, pairs are partitioned statically per thread
// and partials merged in thread order, reproducible for that thread count.

#include <omp.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "mfl/common.hpp"
#include "mfl/kernels.hpp"
#include "mfl/state.hpp"

namespace mfl {

// Closest approach bookkeeping for singular no-cut-off runs: min over pairs
// of the position-space distance and that pair's relative speed.
struct PairApproach {
    double min_dx = std::numeric_limits<double>::infinity();
    double rel_speed = 0.0;  // |V_i - V_j| of the minimizing pair
};

namespace detail {

template <ScaleMode M, int D>
void accel_pairs(const ParticleState& st, double cn, const ScaleConsts& k,
                 std::vector<double>& acc, PairApproach* approach) {
    const int64_t n = st.n;
    const double* X = st.positions.data();
    const double* V = st.velocities.data();
    const int nthreads = omp_get_max_threads();

    if (nthreads <= 1) {
        // canonical single-threaded path: i<j order, Kahan-compensated rows
        std::vector<double> comp((size_t)n * D, 0.0);
        auto add = [&](double* row, double* crow, int c, double val) {
            double y = val - crow[c];
            double t = row[c] + y;
            crow[c] = (t - row[c]) - y;
            row[c] = t;
        };
        PairApproach ap;
        for (int64_t i = 0; i < n; ++i) {
            const double* xi = X + i * D;
            double* ai = acc.data() + i * D;
            double* ci = comp.data() + i * D;
            for (int64_t j = i + 1; j < n; ++j) {
                const double* xj = X + j * D;
                double dx[D > 0 ? D : 1];
                double r2 = 0;
                for (int c = 0; c < D; ++c) {
                    dx[c] = xi[c] - xj[c];
                    r2 += dx[c] * dx[c];
                }
                double g = r2 == 0.0 ? 0.0 : cn * force_scale<M>(r2, k);
                double* aj = acc.data() + j * D;
                double* cj = comp.data() + j * D;
                for (int c = 0; c < D; ++c) {
                    add(ai, ci, c, g * dx[c]);
                    add(aj, cj, c, -g * dx[c]);
                }
                if (approach && r2 < ap.min_dx * ap.min_dx) {
                    ap.min_dx = std::sqrt(r2);
                    double dv2 = 0;
                    for (int c = 0; c < D; ++c) dv2 += sqr(V[i * D + c] - V[j * D + c]);
                    ap.rel_speed = std::sqrt(dv2);
                }
            }
        }
        if (approach) *approach = ap;
        return;
    }

    std::vector<std::vector<double>> partial(nthreads);
    std::vector<PairApproach> aps(nthreads);
#pragma omp parallel num_threads(nthreads)
    {
        const int t = omp_get_thread_num();
        auto& loc = partial[t];
        loc.assign((size_t)n * D, 0.0);
        PairApproach ap;
#pragma omp for schedule(static, 8)
        for (int64_t i = 0; i < n; ++i) {
            const double* xi = X + i * D;
            double* ai = loc.data() + i * D;
            for (int64_t j = i + 1; j < n; ++j) {
                const double* xj = X + j * D;
                double dx[D > 0 ? D : 1];
                double r2 = 0;
                for (int c = 0; c < D; ++c) {
                    dx[c] = xi[c] - xj[c];
                    r2 += dx[c] * dx[c];
                }
                double g = r2 == 0.0 ? 0.0 : cn * force_scale<M>(r2, k);
                double* aj = loc.data() + j * D;
                for (int c = 0; c < D; ++c) {
                    double f = g * dx[c];
                    ai[c] += f;
                    aj[c] -= f;
                }
                if (approach && r2 < ap.min_dx * ap.min_dx) {
                    ap.min_dx = std::sqrt(r2);
                    double dv2 = 0;
                    for (int c = 0; c < D; ++c) dv2 += sqr(V[i * D + c] - V[j * D + c]);
                    ap.rel_speed = std::sqrt(dv2);
                }
            }
        }
        aps[t] = ap;
    }
    for (int t = 0; t < nthreads; ++t) {
        const auto& loc = partial[t];
        for (size_t q = 0; q < acc.size(); ++q) acc[q] += loc[q];
        if (approach && aps[t].min_dx < approach->min_dx) *approach = aps[t];
    }
}

template <ScaleMode M>
void accel_dispatch_dim(const ParticleState& st, double cn, const ScaleConsts& k,
                        std::vector<double>& acc, PairApproach* ap) {
    switch (st.dim) {
        case 1: accel_pairs<M, 1>(st, cn, k, acc, ap); break;
        case 2: accel_pairs<M, 2>(st, cn, k, acc, ap); break;
        case 3: accel_pairs<M, 3>(st, cn, k, acc, ap); break;
        case 6: accel_pairs<M, 6>(st, cn, k, acc, ap); break;
        default: {
            // generic-dimension fallback, same pairing structure
            const int64_t n = st.n;
            const int d = st.dim;
            std::vector<double> dx(d);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = i + 1; j < n; ++j) {
                    double r2 = 0;
                    for (int c = 0; c < d; ++c) {
                        dx[c] = st.x(i)[c] - st.x(j)[c];
                        r2 += dx[c] * dx[c];
                    }
                    double g = r2 == 0.0 ? 0.0 : cn * force_scale<M>(r2, k);
                    for (int c = 0; c < d; ++c) {
                        acc[(size_t)i * d + c] += g * dx[c];
                        acc[(size_t)j * d + c] -= g * dx[c];
                    }
                    if (ap && r2 < ap->min_dx * ap->min_dx) {
                        ap->min_dx = std::sqrt(r2);
                        double dv2 = 0;
                        for (int c = 0; c < d; ++c) dv2 += sqr(st.v(i)[c] - st.v(j)[c]);
                        ap->rel_speed = std::sqrt(dv2);
                    }
                }
        }
    }
}

}  // namespace detail

// a_i = (1/N) sum_{j != i} F(X_i - X_j); self term excluded via F(0) = 0.
// Coincident points contribute zero force in the no-cut-off case.
inline std::vector<double> accelerations(const ParticleState& st, const KernelSpec& kernel,
                                         PairApproach* approach = nullptr) {
    st.validate();
    require(st.dim == kernel.dim, "accelerations: state and kernel dimensions differ");
    std::vector<double> acc((size_t)st.n * st.dim, 0.0);
    if (st.n == 1) return acc;
    double cn = kernel.strength / (double)st.n;
    ScaleConsts k = scale_consts(kernel);
    with_scale_mode(kernel, [&](auto m) {
        detail::accel_dispatch_dim<decltype(m)::value>(st, cn, k, acc, approach);
    });
    return acc;
}

// Velocity-Verlet step; force depends on positions only. Passing acc0 (the
// accelerations at st) avoids recomputing them; acc_out receives the
// accelerations at the returned state for reuse.
inline ParticleState step_verlet(const ParticleState& st, const KernelSpec& kernel, double dt,
                                 const std::vector<double>* acc0 = nullptr,
                                 std::vector<double>* acc_out = nullptr,
                                 PairApproach* approach = nullptr) {
    require(dt > 0.0, "step_verlet: dt must be > 0");
    std::vector<double> a = acc0 ? *acc0 : accelerations(st, kernel);
    ParticleState out = st;
    const size_t m = out.positions.size();
    for (size_t q = 0; q < m; ++q)
        out.positions[q] += st.velocities[q] * dt + 0.5 * a[q] * dt * dt;
    std::vector<double> a2 = accelerations(out, kernel, approach);
    for (size_t q = 0; q < m; ++q) out.velocities[q] += 0.5 * (a[q] + a2[q]) * dt;
    out.time = st.time + dt;
    if (acc_out) *acc_out = std::move(a2);
    return out;
}

// d_N: min over i != j of the R^{2d} distance between (X_i,V_i) and (X_j,V_j).
inline double min_pair_distance(const ParticleState& st) {
    st.validate();
    require(st.n >= 2, "min_pair_distance: N >= 2 required");
    const int d = st.dim;
    const int64_t n = st.n;
    double best = std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(min : best) schedule(static, 8)
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j) {
            double r2 = 0;
            for (int c = 0; c < d; ++c) r2 += sqr(st.x(i)[c] - st.x(j)[c]);
            for (int c = 0; c < d; ++c) r2 += sqr(st.v(i)[c] - st.v(j)[c]);
            double r = std::sqrt(r2);
            if (r < best) best = r;
        }
    return best;
}

// max_i |(X_i, V_i)| in R^{2d}.
inline double support_radius(const ParticleState& st) {
    st.validate();
    double best = 0.0;
    for (int64_t i = 0; i < st.n; ++i) {
        double r2 = norm2sq(st.x(i), st.dim) + norm2sq(st.v(i), st.dim);
        best = std::max(best, std::sqrt(r2));
    }
    return best;
}

// R^N(t): running sup over sampled times; returned per sample, non-decreasing.
inline std::vector<double> support_radius(const TrajectoryWindow& w) {
    w.validate();
    std::vector<double> out;
    out.reserve(w.states.size());
    double run = 0.0;
    for (const auto& st : w.states) {
        run = std::max(run, support_radius(st));
        out.push_back(run);
    }
    return out;
}

// |E_N|_inf at the particle locations: max_i |a_i|.
inline double field_sup(const ParticleState& st, const KernelSpec& kernel) {
    auto a = accelerations(st, kernel);
    double best = 0.0;
    for (int64_t i = 0; i < st.n; ++i)
        best = std::max(best, norm2(a.data() + (size_t)i * st.dim, st.dim));
    return best;
}

// |grad^N E|_inf(t): max over pairs i != j of
//   (1/tau) int_{t-tau}^t |E_N(X_i) - E_N(X_j)| / (|X_i - X_j| + eps^{1+r'}) ds
// evaluated at the window's final time by the trapezoid rule on the stored
// samples; returns 0 at t = 0.
inline double avg_discrete_field_derivative(const TrajectoryWindow& w, const KernelSpec& kernel,
                                            double eps, double r_prime) {
    auto ws = detail::window_span(w);
    if (ws.first == ws.last) return 0.0;  // t = 0 window
    const double soft = std::pow(eps, 1.0 + r_prime);
    const int d = w.states[0].dim;
    const int64_t n = w.states[0].n;
    const int ns = ws.last - ws.first + 1;

    std::vector<std::vector<double>> E(ns);
    for (int s = 0; s < ns; ++s) E[s] = accelerations(w.states[ws.first + s], kernel);

    // trapezoid weights over the available samples; zero-fill for s < 0 needs
    // no extra terms since the integrand vanishes there
    std::vector<double> wt(ns, w.dt_sample);
    wt.front() *= 0.5;
    wt.back() *= 0.5;

    double best = 0.0;
#pragma omp parallel for reduction(max : best) schedule(static, 4)
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = i + 1; j < n; ++j) {
            double acc = 0.0;
            for (int s = 0; s < ns; ++s) {
                const auto& st = w.states[ws.first + s];
                double de2 = 0, dx2 = 0;
                for (int c = 0; c < d; ++c) {
                    de2 += sqr(E[s][(size_t)i * d + c] - E[s][(size_t)j * d + c]);
                    dx2 += sqr(st.x(i)[c] - st.x(j)[c]);
                }
                acc += wt[s] * std::sqrt(de2) / (std::sqrt(dx2) + soft);
            }
            double val = acc / ws.tau;
            if (val > best) best = val;
        }
    }
    return best;
}

// (1/N) sum |V_i|^2/2 + (1/2N^2) sum_{i != j} Phi(X_i - X_j).
inline double total_energy(const ParticleState& st, const KernelSpec& kernel) {
    st.validate();
    require(kernel.cutoff.has_value() || kernel.alpha != 1.0,
            "total_energy: alpha = 1 without cut-off has no potential");
    const int d = st.dim;
    const int64_t n = st.n;
    KahanSum kin, pot;
    for (int64_t i = 0; i < n; ++i) kin.add(0.5 * norm2sq(st.v(i), d));
    std::vector<double> dx(d);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            if (i == j) continue;
            for (int c = 0; c < d; ++c) dx[c] = st.x(i)[c] - st.x(j)[c];
            pot.add(potential(kernel, dx));
        }
    return kin.value() / (double)n + pot.value() / (2.0 * (double)n * (double)n);
}

// Mean momentum (1/N) sum V_i; conserved by odd kernels.
inline std::vector<double> mean_momentum(const ParticleState& st) {
    std::vector<double> p(st.dim, 0.0);
    for (int64_t i = 0; i < st.n; ++i)
        for (int c = 0; c < st.dim; ++c) p[c] += st.v(i)[c];
    for (int c = 0; c < st.dim; ++c) p[c] /= (double)st.n;
    return p;
}

// Smooth test function on phase space R^{2d} with analytic gradient,
// z = (x, v) packed as 2d doubles.
struct TestFunction {
    std::function<double(const std::vector<double>&)> value;
    std::function<std::vector<double>(const std::vector<double>&)> grad;  // 2d components
};

// Weak-form residual |d/dt<mu_N, phi> - <mu_N, v.grad_x phi + E_N.grad_v phi>|
// at the window midpoint; time derivative by central differences.
inline double moment_residual(const TrajectoryWindow& w, const KernelSpec& kernel,
                              const TestFunction& phi) {
    w.validate();
    require(w.states.size() >= 3, "moment_residual: window of >= 3 states required");
    const size_t mid = w.states.size() / 2;
    const auto& sm = w.states[mid];
    const int d = sm.dim;
    const int64_t n = sm.n;

    auto avg_phi = [&](const ParticleState& st) {
        KahanSum s;
        std::vector<double> z(2 * d);
        for (int64_t i = 0; i < n; ++i) {
            for (int c = 0; c < d; ++c) {
                z[c] = st.x(i)[c];
                z[d + c] = st.v(i)[c];
            }
            s.add(phi.value(z));
        }
        return s.value() / (double)n;
    };
    double ddt = (avg_phi(w.states[mid + 1]) - avg_phi(w.states[mid - 1])) / (2.0 * w.dt_sample);

    auto E = accelerations(sm, kernel);
    KahanSum rhs;
    std::vector<double> z(2 * d);
    for (int64_t i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) {
            z[c] = sm.x(i)[c];
            z[d + c] = sm.v(i)[c];
        }
        auto g = phi.grad(z);
        double term = 0;
        for (int c = 0; c < d; ++c)
            term += sm.v(i)[c] * g[c] + E[(size_t)i * d + c] * g[d + c];
        rhs.add(term);
    }
    return std::abs(ddt - rhs.value() / (double)n);
}

// ---------------------------------------------------------------------------
// Fixed-step driver

struct SimOptions {
    double dt = 1e-3;
    int64_t steps = 0;
    int sample_stride = 1;        // store every k-th state (plus the initial one)
    double diverge_guard = 1e50;  // abort when any |coordinate| exceeds this
    bool track_approach = false;  // record near-collision statistics (no cut-off runs)
};

struct SimReport {
    int64_t flagged_steps = 0;  // steps with min |dX| < 10 dt |dV| of the closest pair
    double min_position_distance = std::numeric_limits<double>::infinity();
};

// Runs steps of velocity-Verlet, invoking sink(state, step_index) at stride
// boundaries (and at step 0). Throws RuntimeFailure naming the step on
// non-finite or diverged state.
inline SimReport run_simulation(
    const ParticleState& initial, const KernelSpec& kernel, const SimOptions& opt,
    const std::function<void(const ParticleState&, int64_t)>& sink) {
    initial.validate();
    kernel.validate();
    SimReport rep;
    ParticleState st = initial;
    sink(st, 0);
    std::vector<double> acc = accelerations(st, kernel);
    for (int64_t s = 1; s <= opt.steps; ++s) {
        PairApproach ap;
        std::vector<double> acc_next;
        st = step_verlet(st, kernel, opt.dt, &acc, &acc_next,
                         opt.track_approach ? &ap : nullptr);
        acc = std::move(acc_next);
        if (opt.track_approach && st.n >= 2) {
            rep.min_position_distance = std::min(rep.min_position_distance, ap.min_dx);
            if (ap.min_dx < 10.0 * opt.dt * ap.rel_speed) ++rep.flagged_steps;
        }
        for (double xq : st.positions)
            if (!std::isfinite(xq) || std::abs(xq) > opt.diverge_guard)
                throw RuntimeFailure("simulation diverged or went non-finite at step " +
                                     std::to_string(s));
        for (double vq : st.velocities)
            if (!std::isfinite(vq) || std::abs(vq) > opt.diverge_guard)
                throw RuntimeFailure("simulation diverged or went non-finite at step " +
                                     std::to_string(s));
        if (s % opt.sample_stride == 0) sink(st, s);
    }
    return rep;
}

// Convenience wrapper collecting sampled states into a TrajectoryWindow.
inline TrajectoryWindow simulate_window(const ParticleState& initial, const KernelSpec& kernel,
                                        double dt, int64_t steps, int sample_stride, double tau,
                                        SimReport* report = nullptr) {
    TrajectoryWindow w;
    w.dt_sample = dt * sample_stride;
    w.tau = tau;
    SimOptions opt;
    opt.dt = dt;
    opt.steps = steps;
    opt.sample_stride = sample_stride;
    opt.track_approach = !kernel.cutoff.has_value();
    SimReport rep = run_simulation(initial, kernel, opt,
                                   [&](const ParticleState& st, int64_t) { w.states.push_back(st); });
    if (report) *report = rep;
    return w;
}

}  // namespace mfl
