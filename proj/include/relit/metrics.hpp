#pragma once

#include <string>

#include "relit/image.hpp"

namespace relit {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE) over masked pixels (mask-weighted), capped at 100 dB.
double psnr(const ImageBuffer& a, const ImageBuffer& b, const Mask& mask, double peak = 1.0);
double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak = 1.0);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 1, averaged over valid windows and channels.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

/// Forward-difference gradients stacked as one buffer: dx on top of dy.
ImageBuffer stacked_gradients(const ImageBuffer& img);

/// PSNR of the stacked gradient maps over the 1-pixel-eroded mask.
double psnr_grad(const ImageBuffer& a, const ImageBuffer& b, const Mask& mask);

struct MetricsReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double psnr_grad = 0.0;

    std::string to_json() const;
    std::string to_table() const;
};

MetricsReport compute_metrics(const ImageBuffer& a, const ImageBuffer& b, const Mask& mask);

}  // namespace relit
