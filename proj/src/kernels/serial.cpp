#include <cmath>
#include <numbers>

#include "relit/kernels.hpp"

namespace relit::kernels::serial {

void irradiance(std::span<const Vec3> normals, const std::array<ShBasis, 3>& weights, std::span<double> out) {
    for (std::size_t p = 0; p < normals.size(); ++p) {
        const ShBasis y = sh_basis_polynomial(normals[p]);
        for (int c = 0; c < 3; ++c) {
            double e = 0.0;
            for (int k = 0; k < kShCoeffCount; ++k) e += weights[c][k] * y[k];
            out[3 * p + c] = std::max(0.0, e);
        }
    }
}

void specular(const SpecularDirections& dirs, const SpecularRequest& req, const SpecularResult& out,
              std::span<double> lobes) {
    const double s = req.exponent;
    const double norm = (s + 2.0) / (2.0 * std::numbers::pi);
    const std::size_t nd = dirs.size();
    for (std::size_t p = 0; p < req.normals.size(); ++p) {
        const Vec3 n = req.normals[p];
        for (int c = 0; c < 3; ++c) {
            out.value[3 * p + c] = 0.0;
            if (!out.jacobian.empty()) out.jacobian[3 * p + c] = Vec3{};
            if (!out.d_exponent.empty()) out.d_exponent[3 * p + c] = 0.0;
        }
        for (std::size_t i = 0; i < nd; ++i) {
            const double t = dot(dirs.half[i], n);
            const double lobe = t > 0.0 ? norm * std::pow(t, s) : 0.0;
            if (!lobes.empty()) lobes[p * nd + i] = lobe;
            if (t <= 0.0) continue;
            for (int c = 0; c < 3; ++c) {
                const double r = dirs.weight * req.radiance[3 * i + c];
                out.value[3 * p + c] += r * lobe;
                if (!out.jacobian.empty()) out.jacobian[3 * p + c] += dirs.half[i] * (r * norm * s * std::pow(t, s - 1.0));
                if (!out.d_exponent.empty()) {
                    out.d_exponent[3 * p + c] +=
                        r * (std::pow(t, s) / (2.0 * std::numbers::pi) + norm * std::pow(t, s) * std::log(t));
                }
            }
        }
    }
}

void specular_direction_adjoint(std::span<const double> lobes, std::size_t dir_count, std::span<const double> grad,
                                std::span<double> adjoint) {
    for (std::size_t i = 0; i < dir_count * 3; ++i) adjoint[i] = 0.0;
    const std::size_t active = grad.size() / 3;
    for (std::size_t p = 0; p < active; ++p)
        for (std::size_t i = 0; i < dir_count; ++i)
            for (int c = 0; c < 3; ++c) adjoint[3 * i + c] += grad[3 * p + c] * lobes[p * dir_count + i];
}

void compose(std::span<const double> albedo, std::span<const double> shading, std::span<const double> cspec,
             int cspec_channels, std::span<const double> specular, std::span<double> out) {
    const std::size_t pixels = albedo.size() / 3;
    for (std::size_t p = 0; p < pixels; ++p) {
        for (int c = 0; c < 3; ++c) {
            const double k = cspec_channels == 1 ? cspec[p] : cspec[3 * p + c];
            out[3 * p + c] = albedo[3 * p + c] * (shading[3 * p + c] + k * specular[3 * p + c]);
        }
    }
}

void gaussian_blur(std::span<const double> in, int width, int height, double sigma, std::span<double> out) {
    const auto taps = gaussian_taps(sigma);
    const int r = static_cast<int>(taps.size() / 2);
    std::vector<double> tmp(in.size(), 0.0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < width) acc += taps[static_cast<std::size_t>(k + r)] * in[static_cast<std::size_t>(y) * width + xx];
            }
            tmp[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < height) acc += taps[static_cast<std::size_t>(k + r)] * tmp[static_cast<std::size_t>(yy) * width + x];
            }
            out[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
}

}  // namespace relit::kernels::serial
