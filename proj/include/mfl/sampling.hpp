#pragma once
// Initial conditions: i.i.d. sampling from compactly supported densities on
// phase space R^{2d}, mesh placement, the eps(N) = N^{-gamma/2d} scale, blob
// smoothing f_N^0 = mu_N * phi_eps, and the cube-covering estimate of
// ||f_N^0||_inf.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "mfl/cloud.hpp"
#include "mfl/common.hpp"
#include "mfl/rng.hpp"
#include "mfl/state.hpp"

namespace mfl {

// ---------------------------------------------------------------------------
// Densities f^0 on R^{2d} (dim below is the phase-space dimension 2d)

enum class DensityKind { uniform_ball, uniform_cube, truncated_gaussian, product_1d };

struct DensitySpec {
    DensityKind kind = DensityKind::uniform_cube;
    int dim = 2;          // phase-space dimension 2d (even)
    double radius = 1.0;  // cube half-side / ball radius / truncation radius / 1d half-width
    double sigma = 0.5;   // truncated_gaussian only

    void validate() const {
        require(dim >= 2 && dim % 2 == 0, "density.dim must be even and >= 2");
        require(radius > 0.0 && std::isfinite(radius), "density.radius must be positive");
        if (kind == DensityKind::truncated_gaussian)
            require(sigma > 0.0, "density.sigma must be positive");
        require(std::isfinite(sup_norm()) && sup_norm() > 0.0,
                "density must have a finite positive sup norm");
    }

    // ||f^0||_inf, analytic per kind.
    double sup_norm() const {
        switch (kind) {
            case DensityKind::uniform_cube: return std::pow(2.0 * radius, -dim);
            case DensityKind::uniform_ball:
                return 1.0 / (unit_ball_volume(dim) * std::pow(radius, dim));
            case DensityKind::truncated_gaussian:
                return std::pow(2.0 * M_PI * sigma * sigma, -0.5 * dim) / gaussian_mass();
            case DensityKind::product_1d: {
                // product of triangle densities (1 - |t|/a)/a on [-a, a]
                return std::pow(radius, -dim);
            }
        }
        return 0.0;
    }

    // R^0: support contained in B_{2d}(0, R^0).
    double support_radius() const {
        switch (kind) {
            case DensityKind::uniform_cube:
            case DensityKind::product_1d: return radius * std::sqrt((double)dim);
            case DensityKind::uniform_ball:
            case DensityKind::truncated_gaussian: return radius;
        }
        return 0.0;
    }

  private:
    // mass of the untruncated gaussian inside B(0, radius)
    double gaussian_mass() const {
        const double rmax = radius / sigma;
        const int steps = 4000;
        double h = rmax / steps, acc = 0.0;
        for (int i = 0; i <= steps; ++i) {
            double r = i * h;
            double f = std::pow(r, dim - 1) * std::exp(-0.5 * r * r);
            acc += (i == 0 || i == steps) ? 0.5 * f : f;
        }
        return acc * h * unit_sphere_area(dim) / std::pow(2.0 * M_PI, 0.5 * dim);
    }
};

// ---------------------------------------------------------------------------
// Mollifiers phi (radial-ish, mass one, compact support)

enum class MollifierKind { uniform_ball, uniform_cube };

struct Mollifier {
    MollifierKind kind = MollifierKind::uniform_ball;
    int dim = 2;  // phase-space dimension

    // smallest c with supp phi in B(0, c); 1 for the unit-ball indicator,
    // sqrt(n)/2 for the unit cube [-1/2, 1/2]^n
    double c_phi() const {
        return kind == MollifierKind::uniform_ball ? 1.0 : 0.5 * std::sqrt((double)dim);
    }

    double sup_norm() const {
        return kind == MollifierKind::uniform_ball ? 1.0 / unit_ball_volume(dim) : 1.0;
    }
};

struct BlobMeasure {
    ParticleState base;
    double eps = 0.0;
    Mollifier phi;
    double c_phi = 1.0;
};

// ---------------------------------------------------------------------------
// Sampling

// eps(N) = N^{-gamma/(2d)}
inline double epsilon_scale(int64_t n, double gamma, int dim_d) {
    require(n >= 1, "epsilon_scale: n >= 1");
    require(dim_d >= 1, "epsilon_scale: dim >= 1");
    return std::pow((double)n, -gamma / (2.0 * dim_d));
}

namespace detail {
inline void density_draw(const DensitySpec& f, Rng& rng, double* z) {
    const int n = f.dim;
    switch (f.kind) {
        case DensityKind::uniform_cube:
            for (int c = 0; c < n; ++c) z[c] = rng.uniform(-f.radius, f.radius);
            return;
        case DensityKind::uniform_ball: {
            for (int64_t attempt = 0; attempt < 1000000; ++attempt) {
                double r2 = 0;
                for (int c = 0; c < n; ++c) {
                    z[c] = rng.uniform(-f.radius, f.radius);
                    r2 += z[c] * z[c];
                }
                if (r2 <= f.radius * f.radius) return;
            }
            throw RuntimeFailure("sample_iid: rejection failure (malformed density)");
        }
        case DensityKind::truncated_gaussian: {
            for (int64_t attempt = 0; attempt < 1000000; ++attempt) {
                double r2 = 0;
                for (int c = 0; c < n; ++c) {
                    z[c] = f.sigma * rng.normal();
                    r2 += z[c] * z[c];
                }
                if (r2 <= f.radius * f.radius) return;
            }
            throw RuntimeFailure("sample_iid: rejection failure (malformed density)");
        }
        case DensityKind::product_1d: {
            // triangle density on [-a, a] by inverse CDF
            for (int c = 0; c < n; ++c) {
                double u = rng.uniform();
                z[c] = u < 0.5 ? f.radius * (std::sqrt(2.0 * u) - 1.0)
                               : f.radius * (1.0 - std::sqrt(2.0 * (1.0 - u)));
            }
            return;
        }
    }
}
}  // namespace detail

// N i.i.d. phase-space draws from f^0; stream keyed per particle, so the
// result is identical across thread counts and run orders.
inline ParticleState sample_iid(const DensitySpec& f, int64_t count, uint64_t seed) {
    f.validate();
    require(count >= 1, "sample_iid: count >= 1");
    const int d = f.dim / 2;
    ParticleState st(d, count);
    Rng root(seed);
    std::vector<double> z(f.dim);
    for (int64_t i = 0; i < count; ++i) {
        Rng stream = root.at((uint64_t)i);
        detail::density_draw(f, stream, z.data());
        for (int c = 0; c < d; ++c) {
            st.x(i)[c] = z[c];
            st.v(i)[c] = z[d + c];
        }
    }
    st.validate();
    return st;
}

// Particles at the cell centers of a uniform grid over box [lo, hi]^{2d}.
inline ParticleState mesh_init(int n_per_axis, int dim_2d, const std::vector<double>& lo,
                               const std::vector<double>& hi) {
    require(n_per_axis >= 1, "mesh_init: n_per_axis >= 1");
    require(dim_2d >= 2 && dim_2d % 2 == 0, "mesh_init: phase dimension must be even");
    require((int)lo.size() == dim_2d && (int)hi.size() == dim_2d, "mesh_init: box size mismatch");
    double nd = std::pow((double)n_per_axis, dim_2d);
    require(nd <= 1e8, "mesh_init: N = n_per_axis^{2d} too large");
    int64_t total = (int64_t)std::llround(nd);
    const int d = dim_2d / 2;
    ParticleState st(d, total);
    std::vector<int> idx(dim_2d, 0);
    for (int64_t i = 0; i < total; ++i) {
        for (int c = 0; c < dim_2d; ++c) {
            double h = (hi[c] - lo[c]) / n_per_axis;
            double val = lo[c] + (idx[c] + 0.5) * h;
            if (c < d)
                st.x(i)[c] = val;
            else
                st.v(i)[c - d] = val;
        }
        for (int c = dim_2d - 1; c >= 0; --c) {
            if (++idx[c] < n_per_axis) break;
            idx[c] = 0;
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// ||f_N^0||_inf upper estimate by the cube-covering argument: cover the
// support with cubes of side L*eps on a grid and count points in the doubled
// cubes; over-estimates the exact sup by at most 2^{2d} for the cube phi.

namespace detail {
struct CellKey {
    std::vector<int64_t> c;
    bool operator<(const CellKey& o) const { return c < o.c; }
};
}  // namespace detail

inline double blob_sup_norm(const ParticleState& st, double eps, const Mollifier& phi) {
    st.validate();
    require(eps > 0.0, "blob_sup_norm: eps > 0");
    const int n = 2 * st.dim;
    require(phi.dim == n, "blob_sup_norm: mollifier dimension mismatch");
    const double spacing = eps;  // L = 1 cube grid
    // For the ball indicator the count radius inflates so that every moving
    // ball is covered: |z - c_k|_inf <= eps/2 implies B(z, eps) inside
    // B(c_k, (1 + sqrt(n)/2) eps).
    const bool cube = phi.kind == MollifierKind::uniform_cube;
    const double count_linf = eps;                                   // cube: doubled cube
    const double count_l2 = (1.0 + 0.5 * std::sqrt((double)n)) * eps;  // ball

    // bucket phase points into cells of side = spacing
    std::map<detail::CellKey, std::vector<int64_t>> cells;
    std::vector<double> z(n);
    auto phase = [&](int64_t i, double* out) {
        for (int c = 0; c < st.dim; ++c) {
            out[c] = st.x(i)[c];
            out[st.dim + c] = st.v(i)[c];
        }
    };
    for (int64_t i = 0; i < st.n; ++i) {
        phase(i, z.data());
        detail::CellKey key;
        key.c.resize(n);
        for (int c = 0; c < n; ++c) key.c[c] = (int64_t)std::floor(z[c] / spacing);
        cells[key].push_back(i);
    }

    // candidate centers: cell centers of occupied cells and their neighbors
    const int reach = cube ? 1 : (int)std::ceil(count_l2 / spacing);
    std::map<detail::CellKey, bool> centers;
    std::vector<int> off(n, -reach);
    for (const auto& [key, pts] : cells) {
        std::fill(off.begin(), off.end(), -reach);
        while (true) {
            detail::CellKey ck = key;
            for (int c = 0; c < n; ++c) ck.c[c] += off[c];
            centers[ck] = true;
            int c = n - 1;
            for (; c >= 0; --c) {
                if (++off[c] <= reach) break;
                off[c] = -reach;
            }
            if (c < 0) break;
        }
    }

    int64_t best = 0;
    std::vector<double> zc(n), zp(n);
    for (const auto& [ck, _] : centers) {
        for (int c = 0; c < n; ++c) zc[c] = (ck.c[c] + 0.5) * spacing;
        int64_t count = 0;
        std::fill(off.begin(), off.end(), -reach);
        while (true) {
            detail::CellKey nk = ck;
            for (int c = 0; c < n; ++c) nk.c[c] += off[c];
            auto it = cells.find(nk);
            if (it != cells.end()) {
                for (int64_t i : it->second) {
                    phase(i, zp.data());
                    if (cube) {
                        bool in = true;
                        for (int c = 0; c < n && in; ++c)
                            in = std::abs(zp[c] - zc[c]) <= count_linf;
                        count += in;
                    } else {
                        double r2 = 0;
                        for (int c = 0; c < n; ++c) r2 += sqr(zp[c] - zc[c]);
                        count += r2 <= count_l2 * count_l2;
                    }
                }
            }
            int c = n - 1;
            for (; c >= 0; --c) {
                if (++off[c] <= reach) break;
                off[c] = -reach;
            }
            if (c < 0) break;
        }
        best = std::max(best, count);
    }
    return phi.sup_norm() * (double)best / ((double)st.n * std::pow(eps, n));
}

// Exact sup of f_N^0 for the cube indicator in phase dimension 2 (d = 1):
// max depth of N axis-aligned squares of side eps, by plane sweep.
inline double blob_sup_norm_exact_2d(const ParticleState& st, double eps) {
    st.validate();
    require(st.dim == 1, "blob_sup_norm_exact_2d: needs d = 1 (phase dimension 2)");
    const int64_t n = st.n;
    struct Ev {
        double x;
        int type;  // +1 open, -1 close
        double ylo, yhi;
    };
    std::vector<Ev> evs;
    evs.reserve(2 * n);
    const double h = 0.5 * eps;
    for (int64_t i = 0; i < n; ++i) {
        double x = st.x(i)[0], y = st.v(i)[0];
        evs.push_back({x - h, +1, y - h, y + h});
        evs.push_back({x + h, -1, y - h, y + h});
    }
    std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) {
        if (a.x != b.x) return a.x < b.x;
        return a.type > b.type;  // open before close: closed squares
    });
    std::vector<std::pair<double, double>> active;
    int64_t best = 0;
    for (const auto& e : evs) {
        if (e.type > 0) {
            active.push_back({e.ylo, e.yhi});
            // depth along y among active intervals
            std::vector<std::pair<double, int>> ys;
            ys.reserve(2 * active.size());
            for (auto& iv : active) {
                ys.push_back({iv.first, +1});
                ys.push_back({iv.second, -1});
            }
            std::sort(ys.begin(), ys.end(), [](auto& a, auto& b) {
                if (a.first != b.first) return a.first < b.first;
                return a.second > b.second;
            });
            int64_t depth = 0;
            for (auto& [yy, t] : ys) {
                depth += t;
                best = std::max(best, depth);
            }
        } else {
            for (size_t q = 0; q < active.size(); ++q)
                if (active[q].first == e.ylo && active[q].second == e.yhi) {
                    active.erase(active.begin() + q);
                    break;
                }
        }
    }
    return (double)best / ((double)n * eps * eps);
}

// ---------------------------------------------------------------------------
// Blob quadrature: each Dirac replaced by k equal-weight nodes from a fixed
// low-discrepancy pattern inside the (scaled) support of phi. Node 0 sits at
// the origin, so k = 1 recovers mu_N. The boundary shell always contains the
// +-e_i axis directions, and refining k keeps previous directions (nested),
// which makes the bottleneck distance to mu_N converge upward to c_phi eps.

namespace detail {
// van der Corput base 2: 0, 1/2, 1/4, 3/4, 1/8, ... (nested dyadic refinement)
inline double vdc2(uint64_t q) {
    double r = 0.0, f = 0.5;
    while (q) {
        if (q & 1) r += f;
        f *= 0.5;
        q >>= 1;
    }
    return r;
}

inline double halton(int64_t i, int base, uint64_t scramble) {
    double f = 1.0, r = 0.0;
    int64_t idx = i + 1;
    uint64_t s = scramble;
    while (idx > 0) {
        f /= base;
        int64_t digit = idx % base;
        digit = (digit + (int64_t)(splitmix64(s) % (uint64_t)base)) % base;
        r += f * (double)digit;
        idx /= base;
    }
    return r;
}

inline std::vector<double> quadrature_pattern(int k, int n, MollifierKind kind) {
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    std::vector<double> nodes;  // k x n
    nodes.assign((size_t)k * n, 0.0);
    if (k == 1) return nodes;

    // direction streams keyed by n only, so refining k nests the pattern
    uint64_t scramble_key = 0x9e3779b97f4a7c15ULL ^ (0x100000001b3ULL * (uint64_t)n);
    int m_boundary = k / 2;
    int produced = 1;  // node 0 at origin

    auto set_node = [&](int idx, const std::vector<double>& z) {
        for (int c = 0; c < n; ++c) nodes[(size_t)idx * n + c] = z[c];
    };

    // boundary shell
    std::vector<double> z(n, 0.0);
    for (int b = 0; b < m_boundary && produced < k; ++b) {
        std::fill(z.begin(), z.end(), 0.0);
        if (n == 2) {
            // dyadic angles via van der Corput; first four are the +-axes
            double theta = 2.0 * M_PI * vdc2((uint64_t)b);
            z[0] = std::cos(theta);
            z[1] = std::sin(theta);
        } else if (b < 2 * n) {  // the 2n axis directions first
            z[b / 2] = (b % 2 == 0) ? 1.0 : -1.0;
        } else {
            uint64_t s = scramble_key + 1000003ULL * (uint64_t)b;
            double norm = 0;
            for (int c = 0; c < n; ++c) {
                double u1 = ((splitmix64(s) >> 11) + 0.5) * 0x1.0p-53;
                double u2 = ((splitmix64(s) >> 11) + 0.5) * 0x1.0p-53;
                z[c] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
                norm += z[c] * z[c];
            }
            norm = std::sqrt(norm);
            for (int c = 0; c < n; ++c) z[c] /= norm;
        }
        if (kind == MollifierKind::uniform_cube) {
            // push the direction out to the cube boundary [-1/2, 1/2]^n
            double mx = 0;
            for (int c = 0; c < n; ++c) mx = std::max(mx, std::abs(z[c]));
            for (int c = 0; c < n; ++c) z[c] *= 0.5 / mx;
        }
        set_node(produced++, z);
    }

    // interior low-discrepancy nodes
    int64_t i = 0;
    while (produced < k) {
        if (kind == MollifierKind::uniform_ball) {
            // direction from scrambled normals keyed by i, radius u^{1/n}
            uint64_t s = scramble_key ^ (0xabcdef123ULL + (uint64_t)i);
            double norm = 0;
            for (int c = 0; c < n; ++c) {
                double u1 = ((splitmix64(s) >> 11) + 0.5) * 0x1.0p-53;
                double u2 = ((splitmix64(s) >> 11) + 0.5) * 0x1.0p-53;
                z[c] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
                norm += z[c] * z[c];
            }
            norm = std::sqrt(norm);
            double radius = std::pow(halton(i, primes[0], scramble_key), 1.0 / n);
            for (int c = 0; c < n; ++c) z[c] = radius * z[c] / norm;
        } else {
            for (int c = 0; c < n; ++c)
                z[c] = halton(i, primes[c % 12], scramble_key + c) - 0.5;
        }
        set_node(produced++, z);
        ++i;
    }
    return nodes;
}
}  // namespace detail

inline WeightedCloud blob_quadrature(const ParticleState& st, double eps, const Mollifier& phi,
                                     int k_per_blob) {
    st.validate();
    require(k_per_blob >= 1, "blob_quadrature: k >= 1");
    require(eps > 0.0, "blob_quadrature: eps > 0");
    const int n = 2 * st.dim;
    require(phi.dim == n, "blob_quadrature: mollifier dimension mismatch");
    auto pattern = detail::quadrature_pattern(k_per_blob, n, phi.kind);
    WeightedCloud cloud;
    cloud.dim = n;
    cloud.points.resize((size_t)st.n * k_per_blob * n);
    cloud.weights.assign((size_t)st.n * k_per_blob, 1.0 / ((double)st.n * k_per_blob));
    for (int64_t i = 0; i < st.n; ++i) {
        for (int q = 0; q < k_per_blob; ++q) {
            double* dst = cloud.points.data() + ((size_t)i * k_per_blob + q) * n;
            const double* node = pattern.data() + (size_t)q * n;
            for (int c = 0; c < st.dim; ++c) {
                dst[c] = st.x(i)[c] + eps * node[c];
                dst[st.dim + c] = st.v(i)[c] + eps * node[st.dim + c];
            }
        }
    }
    return cloud;
}

}  // namespace mfl
