#include "relit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "relit/error.hpp"

namespace relit {

LossGrad tv_loss(const ImageBuffer& map, const Mask& mask) {
    if (map.width() < 2 || map.height() < 2) throw InvalidInput("tv_loss: map must be at least 2x2");
    if (!mask.matches(map)) throw InvalidInput("tv_loss: mask size does not match the map");
    const int w = map.width(), h = map.height(), ch = map.channels();
    LossGrad out{0.0, ImageBuffer(w, h, ch)};
    std::size_t pairs = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.inside(x, y)) continue;
            pairs += (x + 1 < w && mask.inside(x + 1, y)) + (y + 1 < h && mask.inside(x, y + 1));
        }
    if (pairs == 0) return out;
    const double inv = 1.0 / static_cast<double>(pairs);
    double sum = 0.0;
    auto pair = [&](int x0, int y0, int x1, int y1) {
        for (int c = 0; c < ch; ++c) {
            const double d = map.at(x1, y1, c) - map.at(x0, y0, c);
            sum += d * d;
            out.gradient.at(x1, y1, c) += 2.0 * d * inv;
            out.gradient.at(x0, y0, c) -= 2.0 * d * inv;
        }
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.inside(x, y)) continue;
            if (x + 1 < w && mask.inside(x + 1, y)) pair(x, y, x + 1, y);
            if (y + 1 < h && mask.inside(x, y + 1)) pair(x, y, x, y + 1);
        }
    }
    out.value = sum * inv;
    return out;
}

LossGrad parsimony_loss(const ImageBuffer& albedo, const Mask& mask, const ParsimonyOptions& opt) {
    if (opt.bins < 2) throw InvalidInput("parsimony_loss: at least 2 bins are required");
    if (!(opt.sigma_bins > 0.0)) throw InvalidInput("parsimony_loss: sigma must be positive");
    if (!mask.matches(albedo)) throw InvalidInput("parsimony_loss: mask size does not match the map");
    const int ch = albedo.channels();
    LossGrad out{0.0, ImageBuffer(albedo.width(), albedo.height(), ch)};

    std::vector<std::size_t> pixels;
    for (std::size_t p = 0; p < mask.pixel_count(); ++p)
        if (mask.inside(p)) pixels.push_back(p);
    if (pixels.empty()) return out;
    if (pixels.size() > opt.max_samples) {
        // Monte Carlo estimate of the density from a seeded subsample.
        std::mt19937_64 rng(opt.seed);
        for (std::size_t i = 0; i < opt.max_samples; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (pixels.size() - i));
            std::swap(pixels[i], pixels[j]);
        }
        pixels.resize(opt.max_samples);
        std::sort(pixels.begin(), pixels.end());
    }

    const int bins = opt.bins;
    const double bin_width = 1.0 / bins;
    const double sigma = opt.sigma_bins * bin_width;
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    const double inv_sigma2 = 1.0 / (sigma * sigma);
    // Gaussian weights beyond 8 sigma are below 1e-14 of the peak and are skipped.
    const int reach = static_cast<int>(std::ceil(8.0 * opt.sigma_bins)) + 1;
    const std::size_t n = pixels.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    // Per-pixel normalized assignments over a fixed window of bins, stored flat.
    const int span = 2 * reach + 1;
    std::vector<int> first(n), count(n);
    std::vector<double> w(n * span), dw(n * span), q(n);
    // Consecutive Gaussian samples differ by a ratio that itself shrinks by a
    // constant factor, so each pixel needs only two exponentials.
    const double ratio_step = std::exp(-bin_width * bin_width * inv_sigma2);

    for (int c = 0; c < ch; ++c) {
        std::vector<double> density(static_cast<std::size_t>(bins), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = albedo[pixels[i] * ch + c];
            const int centre = std::clamp(static_cast<int>(std::floor(a * bins)), 0, bins - 1);
            const int lo = std::max(0, centre - reach);
            const int cnt = std::min(bins - 1, centre + reach) - lo + 1;
            first[i] = lo;
            count[i] = cnt;
            double* wi = &w[i * span];
            double* dwi = &dw[i * span];
            const double d0 = a - (lo + 0.5) * bin_width;
            double e = std::exp(-d0 * d0 * inv_two_sigma2);
            double ratio = std::exp((2.0 * d0 * bin_width - bin_width * bin_width) * inv_two_sigma2);
            double z = 0.0, zg = 0.0;
            for (int k = 0; k < cnt; ++k) {
                const double d = d0 - k * bin_width;
                wi[k] = e;
                dwi[k] = -d * inv_sigma2;  // d log e / da
                z += e;
                zg += e * dwi[k];
                e *= ratio;
                ratio *= ratio_step;
            }
            const double mean_g = zg / z;
            const double inv_z = 1.0 / z;
            for (int k = 0; k < cnt; ++k) {
                wi[k] *= inv_z;
                dwi[k] = wi[k] * (dwi[k] - mean_g);
                density[static_cast<std::size_t>(lo + k)] += wi[k] * inv_n;
            }
        }
        double loss = 0.0;
        // r_b = (1/n) sum_p w_pb / q_p
        std::vector<double> r(static_cast<std::size_t>(bins), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* wi = &w[i * span];
            const double* dens = &density[static_cast<std::size_t>(first[i])];
            double qi = 0.0;
            for (int k = 0; k < count[i]; ++k) qi += wi[k] * dens[k];
            q[i] = qi;
            loss -= std::log(qi / bin_width);
            double* ri = &r[static_cast<std::size_t>(first[i])];
            const double s = inv_n / qi;
            for (int k = 0; k < count[i]; ++k) ri[k] += wi[k] * s;
        }
        loss *= inv_n;
        for (std::size_t i = 0; i < n; ++i) {
            const double* dwi = &dw[i * span];
            const auto b0 = static_cast<std::size_t>(first[i]);
            const double inv_q = 1.0 / q[i];
            double g = 0.0;
            for (int k = 0; k < count[i]; ++k) g += dwi[k] * (density[b0 + k] * inv_q + r[b0 + k]);
            out.gradient[pixels[i] * ch + c] = -g * inv_n / ch;
        }
        out.value += loss / ch;
    }
    return out;
}

LossGrad residual_l1(const ImageBuffer& delta, const Mask& mask) {
    if (!mask.matches(delta)) throw InvalidInput("residual_l1: mask size does not match the field");
    const int ch = delta.channels();
    LossGrad out{0.0, ImageBuffer(delta.width(), delta.height(), ch)};
    const double count = static_cast<double>(mask.count_inside()) * ch;
    if (count == 0.0) return out;
    double sum = 0.0;
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
        if (!mask.inside(p)) continue;
        for (int c = 0; c < ch; ++c) {
            const double v = delta[p * ch + c];
            sum += std::abs(v);
            out.gradient[p * ch + c] = (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0)) / count;
        }
    }
    out.value = sum / count;
    return out;
}

LossGrad reconstruction_loss(const ImageBuffer& render, const ImageBuffer& target, const Mask& mask) {
    if (!render.same_shape(target)) throw InvalidInput("reconstruction_loss: render and target dimensions differ");
    if (!mask.matches(render)) throw InvalidInput("reconstruction_loss: mask size does not match");
    const int ch = render.channels();
    LossGrad out{0.0, ImageBuffer(render.width(), render.height(), ch)};
    const double count = mask.weight_sum() * ch;
    if (count == 0.0) return out;
    double sum = 0.0;
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
        const double m = mask[p];
        if (m <= 0.0) continue;
        for (int c = 0; c < ch; ++c) {
            const double d = render[p * ch + c] - target[p * ch + c];
            sum += m * d * d;
            out.gradient[p * ch + c] = 2.0 * m * d / count;
        }
    }
    out.value = sum / count;
    return out;
}

}  // namespace relit
