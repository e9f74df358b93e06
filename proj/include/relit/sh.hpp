#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <vector>

#include "relit/image.hpp"
#include "relit/vec3.hpp"

namespace relit {

inline constexpr int kShCoeffCount = 9;

/// Real SH basis values, ordered (0,0),(1,-1),(1,0),(1,1),(2,-2),(2,-1),(2,0),(2,1),(2,2).
using ShBasis = std::array<double, kShCoeffCount>;
using Rgb = std::array<double, 3>;

/// Band index l of each coefficient slot.
inline constexpr std::array<int, kShCoeffCount> kShBand = {0, 1, 1, 1, 2, 2, 2, 2, 2};

/// Clamped-cosine convolution gains per band: pi, 2pi/3, pi/4.
inline constexpr std::array<double, 3> kIrradianceBandGain = {std::numbers::pi, 2.0 * std::numbers::pi / 3.0,
                                                              std::numbers::pi / 4.0};

/// Order-2 spherical-harmonics lighting: 9 coefficients per color channel.
struct ShLighting {
    std::array<ShBasis, 3> coeffs{};

    double& operator()(int channel, int k) { return coeffs[channel][k]; }
    double operator()(int channel, int k) const { return coeffs[channel][k]; }

    ShLighting operator+(const ShLighting& o) const;
    ShLighting operator*(double s) const;
    bool operator==(const ShLighting&) const = default;

    bool all_finite() const;
    /// Euclidean norm over all 27 coefficients.
    double norm() const;
    /// Same 9-vector in all three channels.
    static ShLighting white(const ShBasis& c);
};

/// Evaluates the basis at a unit direction (x right, y up, z toward the camera).
/// Throws InvalidInput when |d| deviates from 1 by more than 1e-6.
ShBasis eval_sh_basis(const Vec3& d);

/// Basis polynomials evaluated without the unit-length check.
ShBasis sh_basis_polynomial(const Vec3& d);

/// d Y_k / d(x, y, z) of the basis polynomials.
std::array<Vec3, kShCoeffCount> sh_basis_gradient(const Vec3& d);

/// Per-channel coefficients premultiplied by band gain / pi, so that
/// irradiance = dot(weights[c], Y(n)).
std::array<ShBasis, 3> irradiance_weights(const ShLighting& light);

/// (1/pi) sum_k A_l(k) L[c][k] Y_k(n); a constant unit-radiance environment gives 1.
Rgb sh_irradiance(const Vec3& n, const ShLighting& light);

/// sum_k L[c][k] Y_k(d), clamped at 0 from below.
Rgb eval_sh_radiance(const Vec3& d, const ShLighting& light);

/// Unclamped radiance reconstruction.
Rgb eval_sh_radiance_unclamped(const Vec3& d, const ShLighting& light);

/// Equirectangular HDR panorama. Column u maps to azimuth phi = 2 pi u, row v to
/// polar angle theta = pi v measured from +y, with direction
/// (sin theta sin phi, cos theta, sin theta cos phi): u = 0 faces the camera (+z),
/// u = 0.5 is straight behind the subject.
struct EnvironmentMap {
    ImageBuffer image;

    Vec3 direction(int x, int y) const;
    double solid_angle(int y) const;
};

EnvironmentMap make_environment(ImageBuffer image);

ShLighting project_env_to_sh(const EnvironmentMap& env);

/// SH projection of max(0, cos(angle to axis))^exponent, white, unnormalized.
ShLighting clamped_cosine_lobe(const Vec3& axis, double exponent);

/// White clamped-cosine light about +z scaled to unit irradiance at n = +z.
ShLighting front_light_init();

/// Deterministic white directional-dominant light: random axis, exponent in
/// [1, 8], scaled so the peak irradiance is 1.
ShLighting sample_random_lighting(std::uint64_t seed);

/// intensity * (clamped-cosine lobe about dir with unit peak irradiance)
/// + ambient * (uniform radiance).
ShLighting directional_light(const Vec3& dir, double intensity, double ambient);

/// Uniform radiance environment of the given value.
ShLighting uniform_light(double radiance);

/// Deterministic near-uniform sphere sampling (golden-angle spiral).
std::vector<Vec3> fibonacci_sphere(int count);

/// Largest unclamped irradiance of one channel over a dense probe set.
double peak_irradiance(const ShLighting& light, int channel, int probes = 4096);

}  // namespace relit
