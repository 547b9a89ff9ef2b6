#include "mfl/transport.hpp"
#include "mfl/rng.hpp"
#include <cstdio>
#include <chrono>
using namespace mfl;
WeightedCloud random_cloud(int dim, int k, uint64_t seed) {
    Rng rng(seed);
    WeightedCloud c; c.dim = dim;
    c.points.resize((size_t)k * dim);
    for (auto& p : c.points) p = rng.uniform(-1, 1);
    c.weights.assign(k, 1.0 / k);
    return c;
}
int main(int argc, char** argv){
    int k = argc > 1 ? atoi(argv[1]) : 60;
    auto a = random_cloud(3, k, 1);
    auto b0 = random_cloud(3, k, 2);
    WeightedCloud b; b.dim = 3;
    for (int64_t j = 0; j < b0.size(); ++j)
        for (int rep = 0; rep < 2; ++rep) {
            b.points.insert(b.points.end(), b0.p(j), b0.p(j) + 3);
            b.weights.push_back(0.5 * b0.weights[j]);
        }
    auto t0 = std::chrono::steady_clock::now();
    auto res_jv = w1(a, b0);
    auto t1 = std::chrono::steady_clock::now();
    printf("jv cost=%.12f (%.3fs)\n", res_jv.cost,
           std::chrono::duration<double>(t1 - t0).count());
    auto res_ns = w1(a, b);
    auto t2 = std::chrono::steady_clock::now();
    printf("ns cost=%.12f (%.3fs)\n", res_ns.cost,
           std::chrono::duration<double>(t2 - t1).count());
    return 0;
}
