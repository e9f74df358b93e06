#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "relit/kernels.hpp"

namespace relit::kernels::parallel {

namespace {

constexpr std::ptrdiff_t kReduceBlock = 256;

}  // namespace

void irradiance(std::span<const Vec3> normals, const std::array<ShBasis, 3>& weights, std::span<double> out) {
    const auto count = static_cast<std::ptrdiff_t>(normals.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < count; ++p) {
        const ShBasis y = sh_basis_polynomial(normals[static_cast<std::size_t>(p)]);
        for (int c = 0; c < 3; ++c) {
            double e = 0.0;
            for (int k = 0; k < kShCoeffCount; ++k) e += weights[c][k] * y[k];
            out[static_cast<std::size_t>(3 * p + c)] = std::max(0.0, e);
        }
    }
}

void specular(const SpecularDirections& dirs, const SpecularRequest& req, const SpecularResult& out,
              std::span<double> lobes) {
    const double s = req.exponent;
    const double norm = (s + 2.0) / (2.0 * std::numbers::pi);
    const double inv_two_pi = 1.0 / (2.0 * std::numbers::pi);
    const std::size_t nd = dirs.size();
    const bool want_jac = !out.jacobian.empty();
    const bool want_ds = !out.d_exponent.empty();
    const bool want_lobes = !lobes.empty();

    // Directions with no light in any channel only contribute to the lobe table.
    std::vector<std::uint8_t> lit(nd, 0);
    std::vector<double> rad(nd * 3);
    for (std::size_t i = 0; i < nd; ++i) {
        for (int c = 0; c < 3; ++c) rad[3 * i + c] = dirs.weight * req.radiance[3 * i + c];
        lit[i] = rad[3 * i] > 0.0 || rad[3 * i + 1] > 0.0 || rad[3 * i + 2] > 0.0;
    }

    const auto count = static_cast<std::ptrdiff_t>(req.normals.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pp = 0; pp < count; ++pp) {
        const auto p = static_cast<std::size_t>(pp);
        const Vec3 n = req.normals[p];
        double v[3] = {0.0, 0.0, 0.0};
        double ds[3] = {0.0, 0.0, 0.0};
        Vec3 jac[3] = {};
        double* lobe_row = want_lobes ? &lobes[p * nd] : nullptr;
        for (std::size_t i = 0; i < nd; ++i) {
            const Vec3& h = dirs.half[i];
            const double t = h.x * n.x + h.y * n.y + h.z * n.z;
            if (t <= 0.0) {
                if (lobe_row) lobe_row[i] = 0.0;
                continue;
            }
            if (!lit[i] && !lobe_row) continue;
            const double log_t = std::log(t);
            const double ts = std::exp(s * log_t);
            const double lobe = norm * ts;
            if (lobe_row) lobe_row[i] = lobe;
            if (!lit[i]) continue;
            const double* r = &rad[3 * i];
            v[0] += r[0] * lobe;
            v[1] += r[1] * lobe;
            v[2] += r[2] * lobe;
            if (want_jac) {
                const double dlobe = norm * s * ts / t;
                for (int c = 0; c < 3; ++c) jac[c] += h * (r[c] * dlobe);
            }
            if (want_ds) {
                const double dl = ts * inv_two_pi + lobe * log_t;
                for (int c = 0; c < 3; ++c) ds[c] += r[c] * dl;
            }
        }
        for (int c = 0; c < 3; ++c) {
            out.value[3 * p + c] = v[c];
            if (want_jac) out.jacobian[3 * p + c] = jac[c];
            if (want_ds) out.d_exponent[3 * p + c] = ds[c];
        }
    }
}

void specular_direction_adjoint(std::span<const double> lobes, std::size_t dir_count, std::span<const double> grad,
                                std::span<double> adjoint) {
    const auto active = static_cast<std::ptrdiff_t>(grad.size() / 3);
    const std::ptrdiff_t blocks = (active + kReduceBlock - 1) / kReduceBlock;
    const std::size_t stride = dir_count * 3;
    std::vector<double> partial(static_cast<std::size_t>(blocks) * stride, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        double* acc = &partial[static_cast<std::size_t>(b) * stride];
        const std::ptrdiff_t end = std::min(active, (b + 1) * kReduceBlock);
        for (std::ptrdiff_t pp = b * kReduceBlock; pp < end; ++pp) {
            const auto p = static_cast<std::size_t>(pp);
            const double g0 = grad[3 * p], g1 = grad[3 * p + 1], g2 = grad[3 * p + 2];
            if (g0 == 0.0 && g1 == 0.0 && g2 == 0.0) continue;
            const double* row = &lobes[p * dir_count];
            for (std::size_t i = 0; i < dir_count; ++i) {
                const double l = row[i];
                if (l == 0.0) continue;
                acc[3 * i] += g0 * l;
                acc[3 * i + 1] += g1 * l;
                acc[3 * i + 2] += g2 * l;
            }
        }
    }
    std::fill(adjoint.begin(), adjoint.begin() + static_cast<std::ptrdiff_t>(stride), 0.0);
    for (std::ptrdiff_t b = 0; b < blocks; ++b)
        for (std::size_t j = 0; j < stride; ++j) adjoint[j] += partial[static_cast<std::size_t>(b) * stride + j];
}

void compose(std::span<const double> albedo, std::span<const double> shading, std::span<const double> cspec,
             int cspec_channels, std::span<const double> specular, std::span<double> out) {
    const auto pixels = static_cast<std::ptrdiff_t>(albedo.size() / 3);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pp = 0; pp < pixels; ++pp) {
        const auto p = static_cast<std::size_t>(pp);
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
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        const double* row = &in[static_cast<std::size_t>(y) * width];
        double* dst = &tmp[static_cast<std::size_t>(y) * width];
        for (int x = 0; x < width; ++x) {
            const int lo = std::max(-r, -x), hi = std::min(r, width - 1 - x);
            double acc = 0.0;
            for (int k = lo; k <= hi; ++k) acc += taps[static_cast<std::size_t>(k + r)] * row[x + k];
            dst[x] = acc;
        }
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        const int lo = std::max(-r, -y), hi = std::min(r, height - 1 - y);
        double* dst = &out[static_cast<std::size_t>(y) * width];
        for (int x = 0; x < width; ++x) dst[x] = 0.0;
        for (int k = lo; k <= hi; ++k) {
            const double t = taps[static_cast<std::size_t>(k + r)];
            const double* src = &tmp[static_cast<std::size_t>(y + k) * width];
            for (int x = 0; x < width; ++x) dst[x] += t * src[x];
        }
    }
}

}  // namespace relit::kernels::parallel
