#pragma once

// Per-pixel rendering kernels. Each kernel exists twice with the same
// signature: `serial` is the direct textbook evaluation kept as the testing
// reference, `parallel` is the OpenMP version used by the library. Parallel
// kernels never share accumulators between pixels, and cross-pixel sums are
// reduced over fixed blocks in a fixed order, so their output does not depend
// on the thread count.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "relit/sh.hpp"
#include "relit/vec3.hpp"

namespace relit::kernels {

/// Directions the specular integral is accumulated over, with the half
/// vectors toward the fixed +z viewer precomputed.
struct SpecularDirections {
    std::vector<Vec3> incident;
    std::vector<Vec3> half;
    std::vector<ShBasis> basis;
    double weight = 0.0;  // solid angle per direction, 4 pi / count

    static SpecularDirections fibonacci(int count);
    std::size_t size() const { return incident.size(); }
};

/// Clamped radiance of a light along every direction: count x 3, direction-major.
std::vector<double> direction_radiance(const SpecularDirections& dirs, const ShLighting& light);

struct SpecularRequest {
    std::span<const Vec3> normals;        // one per active pixel
    std::span<const double> radiance;     // dirs x 3, from direction_radiance
    double exponent = 32.0;
};

struct SpecularResult {
    std::span<double> value;              // active x 3
    std::span<Vec3> jacobian;             // active x 3: d value[c] / d normal; may be empty
    std::span<double> d_exponent;         // active x 3; may be empty
};

/// Both variants also accept an optional lobe table (active x dirs) that is
/// filled with the per-direction Blinn-Phong lobe values.
namespace serial {

void irradiance(std::span<const Vec3> normals, const std::array<ShBasis, 3>& weights, std::span<double> out);

void specular(const SpecularDirections& dirs, const SpecularRequest& req, const SpecularResult& out,
              std::span<double> lobes = {});

/// adjoint[i*3+c] = sum_p grad[p*3+c] * lobes[p*dirs+i]
void specular_direction_adjoint(std::span<const double> lobes, std::size_t dir_count,
                                std::span<const double> grad, std::span<double> adjoint);

void compose(std::span<const double> albedo, std::span<const double> shading, std::span<const double> cspec,
             int cspec_channels, std::span<const double> specular, std::span<double> out);

/// Separable Gaussian with zero padding; radius = ceil(3 sigma).
void gaussian_blur(std::span<const double> in, int width, int height, double sigma, std::span<double> out);

}  // namespace serial

namespace parallel {

void irradiance(std::span<const Vec3> normals, const std::array<ShBasis, 3>& weights, std::span<double> out);

void specular(const SpecularDirections& dirs, const SpecularRequest& req, const SpecularResult& out,
              std::span<double> lobes = {});

void specular_direction_adjoint(std::span<const double> lobes, std::size_t dir_count,
                                std::span<const double> grad, std::span<double> adjoint);

void compose(std::span<const double> albedo, std::span<const double> shading, std::span<const double> cspec,
             int cspec_channels, std::span<const double> specular, std::span<double> out);

void gaussian_blur(std::span<const double> in, int width, int height, double sigma, std::span<double> out);

}  // namespace parallel

/// Normalized 1-D Gaussian taps, length 2 * ceil(3 sigma) + 1.
std::vector<double> gaussian_taps(double sigma);

/// Number of threads the parallel kernels will use.
int thread_count();

}  // namespace relit::kernels
