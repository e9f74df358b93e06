#include "relit/sh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "relit/error.hpp"

namespace relit {

namespace {

constexpr double kPi = std::numbers::pi;

// Real SH normalization constants.
const double kY00 = 0.5 * std::sqrt(1.0 / kPi);
const double kY1 = std::sqrt(3.0 / (4.0 * kPi));
const double kY2a = 0.5 * std::sqrt(15.0 / kPi);
const double kY20 = 0.25 * std::sqrt(5.0 / kPi);
const double kY22 = 0.25 * std::sqrt(15.0 / kPi);

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

ShLighting ShLighting::operator+(const ShLighting& o) const {
    ShLighting r;
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < kShCoeffCount; ++k) r.coeffs[c][k] = coeffs[c][k] + o.coeffs[c][k];
    return r;
}

ShLighting ShLighting::operator*(double s) const {
    ShLighting r;
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < kShCoeffCount; ++k) r.coeffs[c][k] = coeffs[c][k] * s;
    return r;
}

bool ShLighting::all_finite() const {
    for (const auto& ch : coeffs)
        for (double v : ch)
            if (!std::isfinite(v)) return false;
    return true;
}

double ShLighting::norm() const {
    double s = 0.0;
    for (const auto& ch : coeffs)
        for (double v : ch) s += v * v;
    return std::sqrt(s);
}

ShLighting ShLighting::white(const ShBasis& c) {
    ShLighting r;
    r.coeffs = {c, c, c};
    return r;
}

ShBasis sh_basis_polynomial(const Vec3& d) {
    const double x = d.x, y = d.y, z = d.z;
    return {kY00,           kY1 * y,       kY1 * z, kY1 * x, kY2a * x * y,
            kY2a * y * z,   kY20 * (3.0 * z * z - 1.0), kY2a * x * z, kY22 * (x * x - y * y)};
}

ShBasis eval_sh_basis(const Vec3& d) {
    if (std::abs(length(d) - 1.0) > 1e-6) throw InvalidInput("eval_sh_basis: direction is not unit length");
    return sh_basis_polynomial(d);
}

std::array<Vec3, kShCoeffCount> sh_basis_gradient(const Vec3& d) {
    const double x = d.x, y = d.y, z = d.z;
    return {Vec3{0, 0, 0},
            Vec3{0, kY1, 0},
            Vec3{0, 0, kY1},
            Vec3{kY1, 0, 0},
            Vec3{kY2a * y, kY2a * x, 0},
            Vec3{0, kY2a * z, kY2a * y},
            Vec3{0, 0, 6.0 * kY20 * z},
            Vec3{kY2a * z, 0, kY2a * x},
            Vec3{2.0 * kY22 * x, -2.0 * kY22 * y, 0}};
}

std::array<ShBasis, 3> irradiance_weights(const ShLighting& light) {
    std::array<ShBasis, 3> w{};
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < kShCoeffCount; ++k) w[c][k] = kIrradianceBandGain[kShBand[k]] / kPi * light(c, k);
    return w;
}

Rgb sh_irradiance(const Vec3& n, const ShLighting& light) {
    const ShBasis y = eval_sh_basis(n);
    const auto w = irradiance_weights(light);
    Rgb out{};
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < kShCoeffCount; ++k) out[c] += w[c][k] * y[k];
    return out;
}

Rgb eval_sh_radiance_unclamped(const Vec3& d, const ShLighting& light) {
    const ShBasis y = eval_sh_basis(d);
    Rgb out{};
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < kShCoeffCount; ++k) out[c] += light(c, k) * y[k];
    return out;
}

Rgb eval_sh_radiance(const Vec3& d, const ShLighting& light) {
    Rgb out = eval_sh_radiance_unclamped(d, light);
    for (double& v : out) v = std::max(0.0, v);
    return out;
}

Vec3 EnvironmentMap::direction(int x, int y) const {
    const double phi = 2.0 * kPi * (x + 0.5) / image.width();
    const double theta = kPi * (y + 0.5) / image.height();
    return {std::sin(theta) * std::sin(phi), std::cos(theta), std::sin(theta) * std::cos(phi)};
}

double EnvironmentMap::solid_angle(int y) const {
    const double theta = kPi * (y + 0.5) / image.height();
    return (2.0 * kPi / image.width()) * (kPi / image.height()) * std::sin(theta);
}

EnvironmentMap make_environment(ImageBuffer image) {
    if (image.width() == 0 || image.height() == 0) throw InvalidInput("environment map is empty");
    if (image.channels() == 1) {
        ImageBuffer rgb(image.width(), image.height(), 3);
        for (std::size_t p = 0; p < image.pixel_count(); ++p)
            for (int c = 0; c < 3; ++c) rgb[3 * p + c] = image[p];
        image = std::move(rgb);
    }
    if (image.channels() != 3) throw InvalidInput("environment map must have 3 channels");
    for (double& v : image.data()) v = std::isfinite(v) ? std::max(0.0, v) : 0.0;
    return EnvironmentMap{std::move(image)};
}

ShLighting project_env_to_sh(const EnvironmentMap& env) {
    const ImageBuffer& img = env.image;
    if (img.width() == 0 || img.height() == 0) throw InvalidInput("project_env_to_sh: zero-sized map");
    if (img.channels() != 3) throw InvalidInput("project_env_to_sh: map must have 3 channels");
    ShLighting out;
    for (int y = 0; y < img.height(); ++y) {
        const double dw = env.solid_angle(y);
        ShLighting row;
        for (int x = 0; x < img.width(); ++x) {
            const ShBasis basis = sh_basis_polynomial(env.direction(x, y));
            for (int c = 0; c < 3; ++c) {
                const double v = img.at(x, y, c);
                if (v == 0.0) continue;
                for (int k = 0; k < kShCoeffCount; ++k) row(c, k) += v * basis[k];
            }
        }
        out = out + row * dw;
    }
    return out;
}

ShLighting clamped_cosine_lobe(const Vec3& axis, double exponent) {
    const Vec3 a = normalize(axis);
    if (length(a) == 0.0) throw InvalidInput("clamped_cosine_lobe: zero axis");
    if (!(exponent >= 0.0)) throw InvalidInput("clamped_cosine_lobe: exponent must be >= 0");
    const double p = exponent;
    // Zonal coefficients 2 pi int_0^1 t^p N_l P_l(t) dt.
    const std::array<double, 3> legendre_moment = {1.0 / (p + 1.0), 1.0 / (p + 2.0),
                                                   0.5 * (3.0 / (p + 3.0) - 1.0 / (p + 1.0))};
    const ShBasis y = sh_basis_polynomial(a);
    ShBasis c{};
    for (int k = 0; k < kShCoeffCount; ++k) {
        const int l = kShBand[k];
        const double norm_l = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi));
        const double zonal = 2.0 * kPi * norm_l * legendre_moment[l];
        c[k] = std::sqrt(4.0 * kPi / (2.0 * l + 1.0)) * zonal * y[k];
    }
    return ShLighting::white(c);
}

namespace {

// Irradiance of a white zonal lobe at its own axis.
double lobe_peak_irradiance(const ShLighting& lobe, const Vec3& axis) {
    return sh_irradiance(normalize(axis), lobe)[0];
}

}  // namespace

ShLighting front_light_init() {
    const Vec3 axis{0.0, 0.0, 1.0};
    const ShLighting lobe = clamped_cosine_lobe(axis, 1.0);
    return lobe * (1.0 / lobe_peak_irradiance(lobe, axis));
}

ShLighting sample_random_lighting(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double z = 2.0 * uniform01(rng) - 1.0;
    const double phi = 2.0 * kPi * uniform01(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 axis{r * std::cos(phi), r * std::sin(phi), z};
    const double exponent = 1.0 + 7.0 * uniform01(rng);
    const ShLighting lobe = clamped_cosine_lobe(axis, exponent);
    return lobe * (1.0 / lobe_peak_irradiance(lobe, axis));
}

ShLighting uniform_light(double radiance) {
    ShBasis c{};
    c[0] = radiance * 2.0 * std::sqrt(kPi);
    return ShLighting::white(c);
}

ShLighting directional_light(const Vec3& dir, double intensity, double ambient) {
    if (length(dir) == 0.0 || !std::isfinite(length(dir))) throw InvalidInput("directional_light: invalid direction");
    if (!std::isfinite(intensity) || !std::isfinite(ambient)) throw InvalidInput("directional_light: non-finite intensity");
    const Vec3 axis = normalize(dir);
    const ShLighting lobe = clamped_cosine_lobe(axis, 1.0);
    return lobe * (intensity / lobe_peak_irradiance(lobe, axis)) + uniform_light(ambient);
}

std::vector<Vec3> fibonacci_sphere(int count) {
    if (count < 1) throw InvalidInput("fibonacci_sphere: count must be positive");
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> dirs(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        dirs[static_cast<std::size_t>(i)] = {r * std::cos(phi), r * std::sin(phi), z};
    }
    return dirs;
}

double peak_irradiance(const ShLighting& light, int channel, int probes) {
    const auto w = irradiance_weights(light);
    double best = -std::numeric_limits<double>::infinity();
    for (const Vec3& d : fibonacci_sphere(probes)) {
        const ShBasis y = sh_basis_polynomial(d);
        double e = 0.0;
        for (int k = 0; k < kShCoeffCount; ++k) e += w[channel][k] * y[k];
        best = std::max(best, e);
    }
    return best;
}

}  // namespace relit
