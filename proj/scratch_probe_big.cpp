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
    int k = argc > 1 ? atoi(argv[1]) : 4000;
    int dim = argc > 2 ? atoi(argv[2]) : 6;
    auto a = random_cloud(dim, k, 1);
    auto b = random_cloud(dim, k, 2);
    auto t0 = std::chrono::steady_clock::now();
    auto res = w1(a, b);
    auto t1 = std::chrono::steady_clock::now();
    printf("k=%d dim=%d cost=%.12f time=%.2fs\n", k, dim, res.cost,
           std::chrono::duration<double>(t1 - t0).count());
    return 0;
}
