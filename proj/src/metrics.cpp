#include "relit/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "relit/error.hpp"

namespace relit {

namespace {

void require_same(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
    if (!a.same_shape(b)) throw InvalidInput(std::string(what) + ": image dimensions differ");
}

double to_db(double mse, double peak) {
    if (!(mse > 0.0)) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b, const Mask& mask, double peak) {
    require_same(a, b, "psnr");
    if (!mask.matches(a)) throw InvalidInput("psnr: mask size does not match the images");
    const int ch = a.channels();
    double sum = 0.0, weight = 0.0;
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        const double m = mask[p];
        if (!(m > 0.0)) continue;
        for (int c = 0; c < ch; ++c) {
            const double d = a[p * ch + c] - b[p * ch + c];
            sum += m * d * d;
        }
        weight += m * ch;
    }
    if (weight == 0.0) throw InvalidInput("psnr: mask is empty");
    return to_db(sum / weight, peak);
}

double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak) {
    return psnr(a, b, Mask(a.width(), a.height(), 1.0), peak);
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    require_same(a, b, "ssim");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    const int w = a.width(), h = a.height(), ch = a.channels();
    if (w < kWin || h < kWin) throw InvalidInput("ssim: images must be at least 11x11");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    std::array<double, kWin> g{};
    double gs = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - kWin / 2;
        g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        gs += g[i];
    }
    for (double& v : g) v /= gs;

    // Valid-mode separable filtering of the five moment images.
    const int ow = w - kWin + 1, oh = h - kWin + 1;
    auto filter = [&](auto&& sample) {
        std::vector<double> rows(static_cast<std::size_t>(h) * ow);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int i = 0; i < kWin; ++i) s += g[i] * sample(x + i, y);
                rows[static_cast<std::size_t>(y) * ow + x] = s;
            }
        std::vector<double> out(static_cast<std::size_t>(oh) * ow);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int i = 0; i < kWin; ++i) s += g[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
                out[static_cast<std::size_t>(y) * ow + x] = s;
            }
        return out;
    };

    double total = 0.0;
    for (int c = 0; c < ch; ++c) {
        auto A = [&](int x, int y) { return a.at(x, y, c); };
        auto B = [&](int x, int y) { return b.at(x, y, c); };
        const auto mu_a = filter(A);
        const auto mu_b = filter(B);
        const auto aa = filter([&](int x, int y) { return A(x, y) * A(x, y); });
        const auto bb = filter([&](int x, int y) { return B(x, y) * B(x, y); });
        const auto ab = filter([&](int x, int y) { return A(x, y) * B(x, y); });
        double sum = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = aa[i] - ma * ma, vb = bb[i] - mb * mb, cov = ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += sum / static_cast<double>(mu_a.size());
    }
    return total / ch;
}

ImageBuffer stacked_gradients(const ImageBuffer& img) {
    const auto [dx, dy] = spatial_gradients(img);
    std::vector<double> data(dx.data().begin(), dx.data().end());
    data.insert(data.end(), dy.data().begin(), dy.data().end());
    return ImageBuffer(img.width(), 2 * img.height(), img.channels(), std::move(data));
}

double psnr_grad(const ImageBuffer& a, const ImageBuffer& b, const Mask& mask) {
    require_same(a, b, "psnr_grad");
    if (!mask.matches(a)) throw InvalidInput("psnr_grad: mask size does not match the images");
    const Mask eroded = mask.eroded();
    std::vector<double> m(eroded.values().begin(), eroded.values().end());
    m.insert(m.end(), eroded.values().begin(), eroded.values().end());
    return psnr(stacked_gradients(a), stacked_gradients(b), Mask(a.width(), 2 * a.height(), std::move(m)));
}

std::string MetricsReport::to_json() const {
    // Deep perceptual and lip-sync metrics need pretrained networks this toolkit does not ship.
    return nlohmann::json{{"psnr", psnr},
                          {"ssim", ssim},
                          {"psnr_grad", psnr_grad},
                          {"extensions", {{"lpips", "unavailable"}, {"syncnet", "unavailable"}}}}
        .dump(2);
}

std::string MetricsReport::to_table() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "metric     value\npsnr       %.4f dB\nssim       %.6f\npsnr_grad  %.4f dB\nlpips      unavailable\n"
                  "syncnet    unavailable\n",
                  psnr, ssim, psnr_grad);
    return buf;
}

MetricsReport compute_metrics(const ImageBuffer& a, const ImageBuffer& b, const Mask& mask) {
    return {psnr(a, b, mask), ssim(a, b), psnr_grad(a, b, mask)};
}

}  // namespace relit
