#include <cmath>
#include <numbers>

#include "relit/error.hpp"
#include "relit/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace relit::kernels {

SpecularDirections SpecularDirections::fibonacci(int count) {
    SpecularDirections d;
    d.incident = fibonacci_sphere(count);
    d.half.reserve(d.incident.size());
    d.basis.reserve(d.incident.size());
    const Vec3 view{0.0, 0.0, 1.0};
    for (const Vec3& wi : d.incident) {
        d.half.push_back(normalize(wi + view));
        d.basis.push_back(sh_basis_polynomial(wi));
    }
    d.weight = 4.0 * std::numbers::pi / count;
    return d;
}

std::vector<double> direction_radiance(const SpecularDirections& dirs, const ShLighting& light) {
    std::vector<double> rad(dirs.size() * 3, 0.0);
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            double v = 0.0;
            for (int k = 0; k < kShCoeffCount; ++k) v += light(c, k) * dirs.basis[i][k];
            rad[3 * i + c] = std::max(0.0, v);
        }
    }
    return rad;
}

std::vector<double> gaussian_taps(double sigma) {
    if (!(sigma > 0.0)) throw InvalidInput("gaussian_taps: sigma must be positive");
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        taps[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : taps) v /= sum;
    return taps;
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace relit::kernels
