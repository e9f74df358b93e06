#include "relit/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "relit/error.hpp"
#include "relit/kernels.hpp"

namespace relit {

namespace {

constexpr double kLumR = 0.2126, kLumG = 0.7152, kLumB = 0.0722;

// Row-stochastic area-overlap resampling from `size` samples onto `cells`.
struct AreaResampler {
    int size = 0;
    int cells = 0;
    std::vector<std::vector<std::pair<int, double>>> taps;  // per cell: (sample, weight)

    AreaResampler(int size_, int cells_) : size(size_), cells(cells_), taps(static_cast<std::size_t>(cells_)) {
        const double span = static_cast<double>(size) / cells;
        for (int i = 0; i < cells; ++i) {
            const double lo = i * span, hi = (i + 1) * span;
            for (int x = static_cast<int>(std::floor(lo)); x < size && x < hi; ++x) {
                const double overlap = std::min(hi, x + 1.0) - std::max(lo, static_cast<double>(x));
                if (overlap > 0.0) taps[static_cast<std::size_t>(i)].emplace_back(x, overlap / span);
            }
        }
    }
};

}  // namespace

struct SelfQuotientEmbedder::Forward {
    int width = 0, height = 0;
    std::vector<double> lum_masked;   // Y * m
    std::vector<double> blur_den;     // blur(m) + tiny
    std::vector<double> base;         // blur(Y m) / blur(m)
    double guard = 0.0;
    double mask_sum = 0.0;
    std::vector<double> quotient;     // Y m / (base + guard)
    std::vector<double> centred;      // zero-mean grid values
    double norm = 0.0;
    EmbeddingVector embedding;
};

SelfQuotientEmbedder::SelfQuotientEmbedder() : SelfQuotientEmbedder(Options{}) {}

SelfQuotientEmbedder::SelfQuotientEmbedder(Options options) : options_(options) {
    if (options_.grid < 1 || !(options_.sigma_fraction > 0.0) || options_.min_size < 1) {
        throw InvalidInput("SelfQuotientEmbedder: invalid options");
    }
}

SelfQuotientEmbedder::Forward SelfQuotientEmbedder::run(const ImageBuffer& img, const Mask& mask) const {
    if (img.width() < options_.min_size || img.height() < options_.min_size) {
        throw InvalidInput("self-quotient embedding needs at least " + std::to_string(options_.min_size) + "x" +
                           std::to_string(options_.min_size) + " pixels");
    }
    if (!mask.matches(img)) throw InvalidInput("self-quotient embedding: mask size does not match");
    if (img.channels() != 1 && img.channels() != 3) throw InvalidInput("self-quotient embedding: 1 or 3 channels");

    Forward f;
    f.width = img.width();
    f.height = img.height();
    const std::size_t n = img.pixel_count();
    const double sigma = options_.sigma_fraction * std::min(f.width, f.height);

    f.lum_masked.resize(n);
    std::vector<double> m(n);
    double lum_sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const double y = img.channels() == 3 ? kLumR * img[3 * p] + kLumG * img[3 * p + 1] + kLumB * img[3 * p + 2]
                                             : img[p];
        m[p] = mask[p];
        f.lum_masked[p] = y * m[p];
        lum_sum += f.lum_masked[p];
        f.mask_sum += m[p];
    }
    std::vector<double> num(n);
    f.blur_den.resize(n);
    kernels::parallel::gaussian_blur(f.lum_masked, f.width, f.height, sigma, num);
    kernels::parallel::gaussian_blur(m, f.width, f.height, sigma, f.blur_den);
    f.guard = f.mask_sum > 0.0 ? options_.guard * lum_sum / f.mask_sum + 1e-12 : 1e-12;

    f.base.resize(n);
    f.quotient.resize(n);
    for (std::size_t p = 0; p < n; ++p) {
        f.blur_den[p] += 1e-12;
        f.base[p] = num[p] / f.blur_den[p];
        f.quotient[p] = f.lum_masked[p] / (f.base[p] + f.guard);
    }

    const int g = options_.grid;
    const AreaResampler rx(f.width, g), ry(f.height, g);
    std::vector<double> rows(static_cast<std::size_t>(f.height) * g, 0.0);
    for (int y = 0; y < f.height; ++y)
        for (int i = 0; i < g; ++i) {
            double acc = 0.0;
            for (const auto& [x, wgt] : rx.taps[static_cast<std::size_t>(i)])
                acc += wgt * f.quotient[static_cast<std::size_t>(y) * f.width + x];
            rows[static_cast<std::size_t>(y) * g + i] = acc;
        }
    f.centred.assign(static_cast<std::size_t>(g) * g, 0.0);
    for (int j = 0; j < g; ++j)
        for (int i = 0; i < g; ++i) {
            double acc = 0.0;
            for (const auto& [y, wgt] : ry.taps[static_cast<std::size_t>(j)])
                acc += wgt * rows[static_cast<std::size_t>(y) * g + i];
            f.centred[static_cast<std::size_t>(j) * g + i] = acc;
        }
    double mean = 0.0;
    for (double v : f.centred) mean += v;
    mean /= static_cast<double>(f.centred.size());
    double sq = 0.0;
    for (double& v : f.centred) {
        v -= mean;
        sq += v * v;
    }
    f.norm = std::sqrt(sq);
    f.embedding.assign(f.centred.size(), 0.0);
    if (f.norm > 1e-12)
        for (std::size_t i = 0; i < f.centred.size(); ++i) f.embedding[i] = f.centred[i] / f.norm;
    return f;
}

EmbeddingVector SelfQuotientEmbedder::embed(const ImageBuffer& img, const Mask& mask) const {
    return run(img, mask).embedding;
}

ImageBuffer SelfQuotientEmbedder::backward(const ImageBuffer& img, const Mask& mask,
                                           std::span<const double> grad_e) const {
    const Forward f = run(img, mask);
    if (grad_e.size() != f.embedding.size()) throw InvalidInput("embedding gradient has the wrong length");
    ImageBuffer out(img.width(), img.height(), img.channels());
    if (f.norm <= 1e-12) return out;

    const int g = options_.grid;
    const std::size_t cells = f.embedding.size();
    // Unit-norm projection, then mean removal.
    double e_dot = 0.0;
    for (std::size_t i = 0; i < cells; ++i) e_dot += f.embedding[i] * grad_e[i];
    std::vector<double> gv(cells);
    double gmean = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        gv[i] = (grad_e[i] - f.embedding[i] * e_dot) / f.norm;
        gmean += gv[i];
    }
    gmean /= static_cast<double>(cells);
    for (double& v : gv) v -= gmean;

    // Transposed area resampling back onto the quotient image.
    const AreaResampler rx(f.width, g), ry(f.height, g);
    std::vector<double> grows(static_cast<std::size_t>(f.height) * g, 0.0);
    for (int j = 0; j < g; ++j)
        for (const auto& [y, wgt] : ry.taps[static_cast<std::size_t>(j)])
            for (int i = 0; i < g; ++i)
                grows[static_cast<std::size_t>(y) * g + i] += wgt * gv[static_cast<std::size_t>(j) * g + i];
    const std::size_t n = img.pixel_count();
    std::vector<double> gq(n, 0.0);
    for (int y = 0; y < f.height; ++y)
        for (int i = 0; i < g; ++i)
            for (const auto& [x, wgt] : rx.taps[static_cast<std::size_t>(i)])
                gq[static_cast<std::size_t>(y) * f.width + x] += wgt * grows[static_cast<std::size_t>(y) * g + i];

    // quotient = Ym / (base + guard), base = blur(Ym) / blur(m).
    std::vector<double> g_lum(n, 0.0), g_num(n, 0.0);
    double g_guard = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const double denom = f.base[p] + f.guard;
        g_lum[p] = gq[p] / denom;
        const double g_base = -gq[p] * f.lum_masked[p] / (denom * denom);
        g_guard += g_base;
        g_num[p] = g_base / f.blur_den[p];
    }
    std::vector<double> g_blur(n);
    const double sigma = options_.sigma_fraction * std::min(f.width, f.height);
    kernels::parallel::gaussian_blur(g_num, f.width, f.height, sigma, g_blur);
    const double g_guard_per_lum = f.mask_sum > 0.0 ? g_guard * options_.guard / f.mask_sum : 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const double gy = (g_lum[p] + g_blur[p] + g_guard_per_lum) * mask[p];
        if (img.channels() == 3) {
            out[3 * p] = gy * kLumR;
            out[3 * p + 1] = gy * kLumG;
            out[3 * p + 2] = gy * kLumB;
        } else {
            out[p] = gy;
        }
    }
    return out;
}

EmbeddingVector self_quotient_embedding(const ImageBuffer& image, const Mask& mask) {
    return SelfQuotientEmbedder().embed(image, mask);
}

}  // namespace relit
