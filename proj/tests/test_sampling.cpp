#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "mfl/particles.hpp"
#include "mfl/sampling.hpp"
#include "mfl/transport.hpp"

using namespace mfl;
using Catch::Approx;

TEST_CASE("epsilon_scale pinned values") {
    CHECK(epsilon_scale(64, 1.0, 3) == Approx(0.5).margin(1e-15));
    CHECK(epsilon_scale(4096, 0.9, 3) == Approx(std::pow(2.0, -1.8)).epsilon(1e-12));
    // monotone decreasing in N
    double prev = 1e9;
    for (int64_t n : {16, 64, 256, 1024}) {
        double e = epsilon_scale(n, 0.8, 2);
        CHECK(e < prev);
        prev = e;
    }
}

TEST_CASE("sample_iid: support, determinism, CLT-scale mean") {
    DensitySpec f;
    f.kind = DensityKind::uniform_cube;
    f.dim = 6;
    f.radius = 1.0;
    const int64_t n = 4096;
    auto st = sample_iid(f, n, 123);
    auto st2 = sample_iid(f, n, 123);
    CHECK(st.positions == st2.positions);  // bit-for-bit
    CHECK(st.velocities == st2.velocities);

    // all inside the support ball
    for (int64_t i = 0; i < n; ++i) {
        double r2 = norm2sq(st.x(i), 3) + norm2sq(st.v(i), 3);
        CHECK(std::sqrt(r2) <= f.support_radius() + 1e-12);
    }

    // per-coordinate mean within 3 sigma / sqrt(N), sigma = radius/sqrt(3)
    double bound = 3.0 * (1.0 / std::sqrt(3.0)) / std::sqrt((double)n);
    for (int c = 0; c < 3; ++c) {
        double mx = 0, mv = 0;
        for (int64_t i = 0; i < n; ++i) {
            mx += st.x(i)[c];
            mv += st.v(i)[c];
        }
        CHECK(std::abs(mx / n) < bound);
        CHECK(std::abs(mv / n) < bound);
    }
}

TEST_CASE("sample_iid: ball, gaussian and product kinds stay in support") {
    for (auto kind :
         {DensityKind::uniform_ball, DensityKind::truncated_gaussian, DensityKind::product_1d}) {
        DensitySpec f;
        f.kind = kind;
        f.dim = 4;
        f.radius = 2.0;
        f.sigma = 0.8;
        auto st = sample_iid(f, 500, 9);
        for (int64_t i = 0; i < st.n; ++i) {
            double r2 = norm2sq(st.x(i), 2) + norm2sq(st.v(i), 2);
            CHECK(std::sqrt(r2) <= f.support_radius() + 1e-12);
        }
        // determinism across calls
        auto st2 = sample_iid(f, 500, 9);
        CHECK(st.positions == st2.positions);
    }
}

TEST_CASE("density sup_norm analytic values") {
    DensitySpec cube;
    cube.kind = DensityKind::uniform_cube;
    cube.dim = 2;
    cube.radius = 1.0;
    CHECK(cube.sup_norm() == Approx(0.25));
    CHECK(cube.support_radius() == Approx(std::sqrt(2.0)));

    DensitySpec ball;
    ball.kind = DensityKind::uniform_ball;
    ball.dim = 2;
    ball.radius = 2.0;
    CHECK(ball.sup_norm() == Approx(1.0 / (M_PI * 4.0)));

    DensitySpec bad;
    bad.dim = 3;  // odd phase dimension
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    DensitySpec neg;
    neg.radius = -1;
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}

TEST_CASE("mesh_init: pinned 2x2 case, d_N, and overflow") {
    auto st = mesh_init(2, 2, {0, 0}, {1, 1});
    CHECK(st.n == 4);
    std::vector<std::pair<double, double>> got;
    for (int64_t i = 0; i < 4; ++i) got.push_back({st.x(i)[0], st.v(i)[0]});
    std::sort(got.begin(), got.end());
    std::vector<std::pair<double, double>> want = {
        {0.25, 0.25}, {0.25, 0.75}, {0.75, 0.25}, {0.75, 0.75}};
    CHECK(got == want);

    // d_N equals box_side / n_per_axis exactly
    auto st3 = mesh_init(3, 4, {0, 0, 0, 0}, {1, 1, 1, 1});
    CHECK(min_pair_distance(st3) == Approx(1.0 / 3.0).margin(1e-15));

    CHECK_THROWS_AS(mesh_init(100, 6, std::vector<double>(6, 0.0), std::vector<double>(6, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("blob_sup_norm: pinned small cases") {
    Mollifier cube;
    cube.kind = MollifierKind::uniform_cube;
    cube.dim = 2;

    ParticleState one(1, 1);
    CHECK(blob_sup_norm(one, 1.0, cube) == Approx(1.0));

    ParticleState two(1, 2);  // coincident pair: counts add
    CHECK(blob_sup_norm(two, 1.0, cube) == Approx(1.0));  // 2 points / (2 * 1)
    ParticleState twob(1, 2);
    twob.x(1)[0] = 10.0;  // far apart: each cube holds one point
    CHECK(blob_sup_norm(twob, 1.0, cube) == Approx(0.5));
}

TEST_CASE("blob_sup_norm brackets the exact sup (n = 2)") {
    DensitySpec f;
    f.kind = DensityKind::uniform_cube;
    f.dim = 2;
    f.radius = 1.0;
    Mollifier cube;
    cube.kind = MollifierKind::uniform_cube;
    cube.dim = 2;

    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        auto st = sample_iid(f, 100, seed);
        double eps = 0.3;
        double est = blob_sup_norm(st, eps, cube);
        double exact = blob_sup_norm_exact_2d(st, eps);

        // dense scan is a lower bound on the true sup
        double dense = 0;
        for (double x = -1.2; x <= 1.2; x += 0.01)
            for (double v = -1.2; v <= 1.2; v += 0.01) {
                int count = 0;
                for (int64_t i = 0; i < st.n; ++i)
                    count += std::abs(st.x(i)[0] - x) <= eps / 2 &&
                             std::abs(st.v(i)[0] - v) <= eps / 2;
                dense = std::max(dense, count / (st.n * eps * eps));
            }

        CHECK(dense <= exact * (1 + 1e-12));
        CHECK(est >= exact * (1 - 1e-12));
        CHECK(est <= 4.0 * exact * (1 + 1e-12));  // 2^n over-estimate bound
        CHECK(est >= dense * (1 - 1e-12));
    }
}

TEST_CASE("blob sup of mesh init is bounded by 2^{2d} x uniform density") {
    // phase dim 2: mesh over [0,1]^2, uniform density 1
    auto st = mesh_init(8, 2, {0, 0}, {1, 1});
    Mollifier cube;
    cube.kind = MollifierKind::uniform_cube;
    cube.dim = 2;
    double grid_len = 1.0 / 8;
    for (double eps : {grid_len, 2 * grid_len, 4 * grid_len}) {
        double exact = blob_sup_norm_exact_2d(st, eps);
        CHECK(exact <= 4.0 * 1.0 * (1 + 1e-12));  // 2^{2d} x uniform density
        // the covering estimate stays within its own 2^{2d} factor of exact
        CHECK(blob_sup_norm(st, eps, cube) <= 4.0 * exact * (1 + 1e-12));
    }
}

TEST_CASE("blob_quadrature: equality at boundary nodes for a collinear cloud") {
    // particles on the x axis, zero velocity; the +e_x boundary node of the
    // extremal particle realizes W_inf(f_N, mu_N) = c_phi eps exactly
    ParticleState st(1, 5);
    for (int64_t i = 0; i < 5; ++i) st.x(i)[0] = 0.125 * (double)i;
    Mollifier ball;
    ball.kind = MollifierKind::uniform_ball;
    ball.dim = 2;
    double eps = 0.25;
    auto mu = phase_cloud(st);
    for (int k : {2, 8, 32}) {
        auto q = blob_quadrature(st, eps, ball, k);
        double v = winf(q, mu).cost;
        CHECK(v <= ball.c_phi() * eps * (1 + 1e-12));
        CHECK(v >= ball.c_phi() * eps * (1 - 1e-9));
    }
}

TEST_CASE("blob_quadrature: refinement converges upward toward c_phi eps") {
    DensitySpec f;
    f.kind = DensityKind::uniform_cube;
    f.dim = 2;
    f.radius = 1.0;
    auto st = sample_iid(f, 8, 31);
    Mollifier ball;
    ball.kind = MollifierKind::uniform_ball;
    ball.dim = 2;
    double eps = epsilon_scale(st.n, 0.9, 1);
    auto mu = phase_cloud(st);
    double prev = 0.0;
    for (int k : {1, 4, 16, 64, 256}) {
        auto q = blob_quadrature(st, eps, ball, k);
        double v = winf(q, mu).cost;
        CHECK(v >= prev - 1e-12);
        CHECK(v <= eps * (1 + 1e-12));
        prev = v;
    }
    CHECK(prev >= 0.9 * eps);
}
