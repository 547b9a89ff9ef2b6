#pragma once
// Singular interaction-force families F(x) = c x/|x|^{1+alpha} with the
// F(0) = 0 convention, plus the N-dependent regularized variants.
//
// Two cut-off realizations are provided:
//   smooth: F_N(x) = c x / (|x|^2 + eta^2)^{(1+alpha)/2}
//   sharp : F_N(x) = c x / max(|x|, eta)^{1+alpha}
// with eta = eps^{m_bar}. The smooth family is the default (C^inf, good for
// gradient and integrator-order tests); the sharp family agrees with F
// exactly outside eta, which is what the L1 gap bound consumes. Note the
// smooth family's L1 gap diverges for alpha <= d-2.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "mfl/common.hpp"

namespace mfl {

enum class CutoffKind { smooth, sharp };

struct CutoffSpec {
    double m_bar = 1.0;   // cut-off order, eta = eps^{m_bar}; m_bar >= 1 in the theorems
    double eps = 0.0;     // scale eps(N), > 0
    CutoffKind kind = CutoffKind::smooth;

    double eta() const { return std::pow(eps, m_bar); }
};

struct KernelSpec {
    int dim = 3;            // d, space dimension
    double alpha = 0.5;     // singularity exponent, >= 0
    double strength = 1.0;  // c != 0; c > 0 repulsive, c < 0 attractive
    std::optional<CutoffSpec> cutoff;

    bool repulsive() const { return strength > 0; }

    void validate() const {
        require(dim >= 1, "kernel.dim must be >= 1");
        require(alpha >= 0.0, "kernel.alpha must be >= 0");
        // strength 0 is the free-transport kernel, used all over the tests
        if (cutoff) {
            // the theorems want m_bar >= 1 (eta <= eps); the cut-off study
            // deliberately probes m_bar < 1, so only positivity is hard
            require(cutoff->m_bar > 0.0, "kernel.cutoff.m_bar must be > 0");
            require(cutoff->eps > 0.0, "kernel.cutoff.eps must be > 0");
        } else {
            // Field integrability of F * rho needs alpha < d. (The theorems'
            // stronger alpha < d-1 is surfaced by admissible_params flags.)
            require(alpha < dim, "kernel.alpha must be < dim without cut-off");
        }
    }
};

// ---------------------------------------------------------------------------
// Scalar magnitude profile: F(x) = c * g(|x|^2) * x. Specialized modes keep
// pow() out of the O(N^2) loops.

enum class ScaleMode : int {
    plain_generic,
    plain_half,    // alpha = 0.5
    plain_one,     // alpha = 1
    plain_two,     // alpha = 2
    smooth_generic,
    smooth_half,
    smooth_two,
    sharp_generic,
    sharp_half,
    sharp_two,
};

struct ScaleConsts {
    double expo;       // -(1+alpha)/2
    double eta2;       // eta^2 (cut-off families)
    double inner;      // eta^{-(1+alpha)} (sharp family inside)
};

template <ScaleMode M>
inline double force_scale(double r2, const ScaleConsts& k) {
    if constexpr (M == ScaleMode::plain_generic) {
        return r2 > 0 ? std::pow(r2, k.expo) : 0.0;
    } else if constexpr (M == ScaleMode::plain_half) {
        if (r2 <= 0) return 0.0;
        double r = std::sqrt(r2);
        return 1.0 / (r * std::sqrt(r));  // r^{-3/2}
    } else if constexpr (M == ScaleMode::plain_one) {
        return r2 > 0 ? 1.0 / r2 : 0.0;
    } else if constexpr (M == ScaleMode::plain_two) {
        return r2 > 0 ? 1.0 / (r2 * std::sqrt(r2)) : 0.0;
    } else if constexpr (M == ScaleMode::smooth_generic) {
        return std::pow(r2 + k.eta2, k.expo);
    } else if constexpr (M == ScaleMode::smooth_half) {
        double t = r2 + k.eta2;
        double s = std::sqrt(t);
        return 1.0 / (s * std::sqrt(s));
    } else if constexpr (M == ScaleMode::smooth_two) {
        double t = r2 + k.eta2;
        return 1.0 / (t * std::sqrt(t));
    } else if constexpr (M == ScaleMode::sharp_generic) {
        if (r2 <= 0) return 0.0;
        return r2 >= k.eta2 ? std::pow(r2, k.expo) : k.inner;
    } else if constexpr (M == ScaleMode::sharp_half) {
        if (r2 <= 0) return 0.0;
        if (r2 < k.eta2) return k.inner;
        double r = std::sqrt(r2);
        return 1.0 / (r * std::sqrt(r));
    } else {  // sharp_two
        if (r2 <= 0) return 0.0;
        return r2 >= k.eta2 ? 1.0 / (r2 * std::sqrt(r2)) : k.inner;
    }
}

inline ScaleConsts scale_consts(const KernelSpec& spec) {
    ScaleConsts k{};
    k.expo = -0.5 * (1.0 + spec.alpha);
    if (spec.cutoff) {
        double eta = spec.cutoff->eta();
        k.eta2 = eta * eta;
        k.inner = std::pow(eta, -(1.0 + spec.alpha));
    }
    return k;
}

inline ScaleMode scale_mode(const KernelSpec& spec) {
    auto fam = [&](ScaleMode g, ScaleMode h, ScaleMode t2) {
        if (spec.alpha == 0.5) return h;
        if (spec.alpha == 2.0) return t2;
        return g;
    };
    if (!spec.cutoff) {
        if (spec.alpha == 1.0) return ScaleMode::plain_one;
        return fam(ScaleMode::plain_generic, ScaleMode::plain_half, ScaleMode::plain_two);
    }
    if (spec.cutoff->kind == CutoffKind::smooth)
        return fam(ScaleMode::smooth_generic, ScaleMode::smooth_half, ScaleMode::smooth_two);
    return fam(ScaleMode::sharp_generic, ScaleMode::sharp_half, ScaleMode::sharp_two);
}

// Dispatch helper: calls fn with the compile-time mode tag.
template <class Fn>
inline decltype(auto) with_scale_mode(const KernelSpec& spec, Fn&& fn) {
    switch (scale_mode(spec)) {
        case ScaleMode::plain_generic: return fn(std::integral_constant<ScaleMode, ScaleMode::plain_generic>{});
        case ScaleMode::plain_half: return fn(std::integral_constant<ScaleMode, ScaleMode::plain_half>{});
        case ScaleMode::plain_one: return fn(std::integral_constant<ScaleMode, ScaleMode::plain_one>{});
        case ScaleMode::plain_two: return fn(std::integral_constant<ScaleMode, ScaleMode::plain_two>{});
        case ScaleMode::smooth_generic: return fn(std::integral_constant<ScaleMode, ScaleMode::smooth_generic>{});
        case ScaleMode::smooth_half: return fn(std::integral_constant<ScaleMode, ScaleMode::smooth_half>{});
        case ScaleMode::smooth_two: return fn(std::integral_constant<ScaleMode, ScaleMode::smooth_two>{});
        case ScaleMode::sharp_generic: return fn(std::integral_constant<ScaleMode, ScaleMode::sharp_generic>{});
        case ScaleMode::sharp_half: return fn(std::integral_constant<ScaleMode, ScaleMode::sharp_half>{});
        default: return fn(std::integral_constant<ScaleMode, ScaleMode::sharp_two>{});
    }
}

// ---------------------------------------------------------------------------
// Point evaluations

// F(spec, x); total function, F(0) = 0.
inline std::vector<double> force(const KernelSpec& spec, const std::vector<double>& x) {
    require((int)x.size() == spec.dim, "force: x has wrong dimension");
    double r2 = norm2sq(x.data(), spec.dim);
    ScaleConsts k = scale_consts(spec);
    double g = with_scale_mode(spec, [&](auto m) { return force_scale<decltype(m)::value>(r2, k); });
    std::vector<double> out(spec.dim);
    double s = r2 == 0.0 ? 0.0 : spec.strength * g;  // F(0) = 0, no self-interaction
    for (int i = 0; i < spec.dim; ++i) out[i] = s * x[i];
    return out;
}

inline double force_magnitude(const KernelSpec& spec, double r) {
    double r2 = r * r;
    ScaleConsts k = scale_consts(spec);
    double g = with_scale_mode(spec, [&](auto m) { return force_scale<decltype(m)::value>(r2, k); });
    return std::abs(spec.strength) * g * r;
}

// Phi with -grad Phi = force, anchored by continuity (no additive gauge terms
// beyond what continuity at the cut-off radius requires).
inline double potential(const KernelSpec& spec, const std::vector<double>& x) {
    require((int)x.size() == spec.dim, "potential: x has wrong dimension");
    double c = spec.strength;
    double a = spec.alpha;
    double r = norm2(x.data(), spec.dim);
    if (!spec.cutoff) {
        require(a != 1.0, "potential: alpha = 1 without cut-off is excluded (logarithmic case)");
        return -c * std::pow(r, 1.0 - a) / (1.0 - a);
    }
    double eta = spec.cutoff->eta();
    if (spec.cutoff->kind == CutoffKind::smooth) {
        double t2 = r * r + eta * eta;
        if (a == 1.0) return -0.5 * c * std::log(t2);
        return -c * std::pow(t2, 0.5 * (1.0 - a)) / (1.0 - a);
    }
    // sharp family: quadratic well inside eta, matched continuously
    auto outer = [&](double rr) {
        return a == 1.0 ? -c * std::log(rr) : -c * std::pow(rr, 1.0 - a) / (1.0 - a);
    };
    if (r >= eta) return outer(r);
    double match = outer(eta) + 0.5 * c * std::pow(eta, 1.0 - a);
    return -0.5 * c * r * r * std::pow(eta, -1.0 - a) + match;
}

// K_eps(r) = min(r^{-(1+alpha)}, eps^{-(1+r')} r^{-alpha}), K_eps(0) = 0.
inline double kepsilon(double x_norm, double eps, double r_prime, double alpha) {
    require(x_norm >= 0.0, "kepsilon: x_norm >= 0");
    require(eps > 0.0, "kepsilon: eps > 0");
    if (x_norm == 0.0) return 0.0;
    double a = std::pow(x_norm, -(1.0 + alpha));
    double b = std::pow(eps, -(1.0 + r_prime)) * std::pow(x_norm, -alpha);
    return std::min(a, b);
}

// ---------------------------------------------------------------------------
// (S^alpha) verification: empirical constants over sampled shells

struct SalphaReport {
    double c_force = 0.0;  // sup |F| |x|^alpha
    double c_grad = 0.0;   // sup |grad F| |x|^{1+alpha} (max row-sum norm, central differences)
    bool pass = false;
    std::vector<double> shell_force;  // per-decade suprema
    std::vector<double> shell_grad;
};

// Generic version used for both library kernels and deliberately wrong
// families in tests.
inline SalphaReport verify_salpha_fn(
    const std::function<std::vector<double>(const std::vector<double>&)>& F, int dim,
    double alpha, const std::vector<double>& sample_radii) {
    require(!sample_radii.empty(), "verify_salpha: radii required");
    for (double r : sample_radii) require(r > 0.0, "verify_salpha: radii must be positive");

    double rmin = *std::min_element(sample_radii.begin(), sample_radii.end());
    auto decade_of = [&](double r) { return (int)std::floor(std::log10(r / rmin) + 1e-12); };
    int ndec = decade_of(*std::max_element(sample_radii.begin(), sample_radii.end())) + 1;

    SalphaReport rep;
    rep.shell_force.assign(ndec, 0.0);
    rep.shell_grad.assign(ndec, 0.0);

    // a few fixed probe directions
    std::vector<std::vector<double>> dirs;
    for (int i = 0; i < dim; ++i) {
        std::vector<double> e(dim, 0.0);
        e[i] = 1.0;
        dirs.push_back(e);
    }
    std::vector<double> diag(dim, 1.0 / std::sqrt((double)dim));
    dirs.push_back(diag);

    bool finite = true;
    for (double r : sample_radii) {
        int dec = decade_of(r);
        for (const auto& u : dirs) {
            std::vector<double> x(dim);
            for (int i = 0; i < dim; ++i) x[i] = r * u[i];
            auto f = F(x);
            double fn = norm2(f.data(), dim);
            if (!std::isfinite(fn)) finite = false;
            rep.shell_force[dec] = std::max(rep.shell_force[dec], fn * std::pow(r, alpha));

            // grad F by central differences, max row-sum norm
            double h = 1e-6 * r;
            double rowmax = 0.0;
            std::vector<std::vector<double>> cols(dim);
            for (int j = 0; j < dim; ++j) {
                auto xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                auto fp = F(xp), fm = F(xm);
                cols[j].resize(dim);
                for (int i = 0; i < dim; ++i) cols[j][i] = (fp[i] - fm[i]) / (2 * h);
            }
            for (int i = 0; i < dim; ++i) {
                double row = 0.0;
                for (int j = 0; j < dim; ++j) row += std::abs(cols[j][i]);
                rowmax = std::max(rowmax, row);
            }
            if (!std::isfinite(rowmax)) finite = false;
            rep.shell_grad[dec] = std::max(rep.shell_grad[dec], rowmax * std::pow(r, 1.0 + alpha));
        }
    }
    rep.c_force = *std::max_element(rep.shell_force.begin(), rep.shell_force.end());
    rep.c_grad = *std::max_element(rep.shell_grad.begin(), rep.shell_grad.end());

    auto stable = [](const std::vector<double>& s) {
        double lo = 1e300, hi = 0.0;
        for (double v : s) {
            if (v <= 0) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return hi > 0 && hi / lo <= 1.10;
    };
    rep.pass = finite && stable(rep.shell_force) && stable(rep.shell_grad);
    return rep;
}

inline SalphaReport verify_salpha(const KernelSpec& spec, const std::vector<double>& sample_radii) {
    return verify_salpha_fn([&](const std::vector<double>& x) { return force(spec, x); }, spec.dim,
                            spec.alpha, sample_radii);
}

// ---------------------------------------------------------------------------
// L1 kernel gap  ||F - F_N||_1  by radial quadrature

namespace detail {
// Adaptive Simpson on [a,b], relative tolerance on the whole integral.
inline double adapt_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6 * (fa + 4 * flm + fm);
    double right = (b - m) / 6 * (fm + 4 * frm + fb);
    if (depth <= 0) throw RuntimeFailure("l1_gap: radial quadrature did not converge");
    if (std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
    return adapt_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adapt_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    double m = 0.5 * (a + b);
    double fa = f(a), fm = f(m), fb = f(b);
    double whole = (b - a) / 6 * (fa + 4 * fm + fb);
    double scale = std::max(std::abs(whole), 1e-300);
    return adapt_simpson(f, a, b, fa, fm, fb, whole, tol * scale, 48);
}

// wide smooth tails: integrate per decade so the tolerance split stays local
inline double integrate_decades(const std::function<double(double)>& f, double a, double b,
                                double tol) {
    double total = 0.0, lo = a;
    while (lo < b) {
        double hi = std::min(b, lo * 10.0);
        total += integrate(f, lo, hi, tol);
        lo = hi;
    }
    return total;
}
}  // namespace detail

// int_{R^d} |F - F_N| dx. Radial integrand; the inner interval [0, eta] is
// regularized by the substitution r = eta u^{1/(d-alpha)}. Diverges for the
// smooth family when alpha <= d-2 (reported as RuntimeFailure).
inline double l1_gap(const KernelSpec& spec) {
    require(spec.cutoff.has_value(), "l1_gap: cut-off required");
    require(spec.alpha < spec.dim, "l1_gap: alpha < d required");
    const int d = spec.dim;
    const double a = spec.alpha;
    const double c = std::abs(spec.strength);
    const double eta = spec.cutoff->eta();
    const double S = unit_sphere_area(d);

    // 1 - |F_N|/|F|, computed without cancellation at large r
    auto one_minus_ratio = [&](double r) -> double {
        if (r <= 0) return 1.0;
        if (spec.cutoff->kind == CutoffKind::smooth) {
            double w = eta * eta / (r * r + eta * eta);
            return -std::expm1(0.5 * (1.0 + a) * std::log1p(-w));
        }
        return r >= eta ? 0.0 : 1.0 - std::pow(r / eta, 1.0 + a);
    };

    // substitution r = eta u^{1/p} with p = d - a turns the [0, eta] part
    // into the bounded integrand eta^p/p (1 - ratio(r(u)))
    const double p = d - a;  // > 0
    auto inner = [&](double u) -> double {
        double r = eta * std::pow(u, 1.0 / p);
        return std::pow(eta, p) / p * one_minus_ratio(r);
    };
    double total = detail::integrate(inner, 0.0, 1.0, 1e-10);

    if (spec.cutoff->kind == CutoffKind::smooth) {
        if (a <= d - 2 + 1e-12)
            throw RuntimeFailure("l1_gap: integral diverges for the smooth family when alpha <= d-2");
        // tail over [eta, R]; beyond R use the asymptotic (1+a)/2 eta^2 r^{d-3-a}
        double R = eta * 1e6;
        auto tail = [&](double r) { return std::pow(r, d - 1.0 - a) * one_minus_ratio(r); };
        total += detail::integrate_decades(tail, eta, R, 1e-10);
        total += 0.5 * (1.0 + a) * eta * eta * std::pow(R, d - 2 - a) / (a + 2 - d);
    }
    return S * c * total;
}

}  // namespace mfl
