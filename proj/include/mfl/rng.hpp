#pragma once
// Counter-based RNG. Streams are keyed by (seed, ids...) so Monte Carlo
// replicas and per-particle draws are independent and order-insensitive:
// stream(seed, replica, particle) always yields the same sequence no matter
// which thread asks first.

#include <cmath>
#include <cstdint>

namespace mfl {

namespace detail {
inline uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) { mix(0x243f6a8885a308d3ULL); }

    // Derive an independent sub-stream; used as Rng(seed).at(replica, i).
    Rng at(uint64_t id) const {
        Rng r = *this;
        r.mix(id);
        return r;
    }
    Rng at(uint64_t a, uint64_t b) const { return at(a).at(b); }
    Rng at(uint64_t a, uint64_t b, uint64_t c) const { return at(a).at(b).at(c); }

    uint64_t next_u64() { return detail::splitmix64(state_); }

    // Uniform in [0,1).
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal, Box-Muller (consumes two draws; spare cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

  private:
    void mix(uint64_t id) {
        state_ ^= 0x9e3779b97f4a7c15ULL + id + (state_ << 6) + (state_ >> 2);
        detail::splitmix64(state_);
    }
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace mfl
