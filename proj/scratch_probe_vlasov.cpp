#include "mfl/vlasov.hpp"
#include <cstdio>
using namespace mfl;
int main(){
    // gaussian with machine-zero tails inside the box
    double sigma = 0.45;
    auto g = make_grid(256, 256, -4, 4, -4, 4, [&](double x, double v) {
        return std::exp(-(x * x + v * v) / (2 * sigma * sigma));
    });
    KernelSpec k; k.dim = 1; k.alpha = 0.5; k.strength = 1.0;
    double maxdrift = 0;
    for (int s = 0; s < 25; ++s) {
        g = semi_lagrangian_step(g, k, 0.01);
        maxdrift = std::max(maxdrift, std::abs(g.mass_drift_last));
    }
    printf("gaussian 256^2 interacting: max drift/step = %.3e\n", maxdrift);

    // free transport support creep with the bump profile
    auto bump = [](double s, double a) {
        if (std::abs(s) >= a) return 0.0;
        double c = std::cos(0.5 * M_PI * s / a);
        return c * c * c * c;
    };
    auto gb = make_grid(64, 64, -2, 2, -2, 2,
                        [&](double x, double v) { return bump(x, 1) * bump(v, 1); });
    KernelSpec freek = k; freek.strength = 0;
    std::vector<PhaseGrid> hist{gb};
    for (int s = 0; s < 20; ++s) hist.push_back(semi_lagrangian_step(hist.back(), freek, 0.02));
    auto sb = support_bounds_monitor(hist, 0.5);
    printf("free bump: R0=%.4f K0=%.4f R(T)=%.4f  R0+K0*T=%.4f dx=%.4f\n",
           sb.r_of_t.front(), sb.k_of_t.front(), sb.r_of_t.back(),
           sb.r_of_t.front() + sb.k_of_t.front() * (sb.times.back() - sb.times.front()),
           gb.dx());

    // same with gaussian
    auto gg = make_grid(128, 128, -4, 4, -4, 4, [&](double x, double v) {
        return std::exp(-(x * x + v * v) / (2 * sigma * sigma));
    });
    std::vector<PhaseGrid> hist2{gg};
    for (int s = 0; s < 20; ++s) hist2.push_back(semi_lagrangian_step(hist2.back(), freek, 0.02));
    auto sb2 = support_bounds_monitor(hist2, 0.5);
    printf("free gauss: R0=%.4f K0=%.4f R(T)=%.4f  R0+K0*T=%.4f dx=%.4f\n",
           sb2.r_of_t.front(), sb2.k_of_t.front(), sb2.r_of_t.back(),
           sb2.r_of_t.front() + sb2.k_of_t.front() * (sb2.times.back() - sb2.times.front()),
           gg.dx());
    return 0;
}
