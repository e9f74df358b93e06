#pragma once

#include <cstdint>

#include "relit/image.hpp"

namespace relit {

/// Scalar loss with its gradient with respect to the input buffer.
struct LossGrad {
    double value = 0.0;
    ImageBuffer gradient;
};

/// Squared forward-difference total variation over horizontally and vertically
/// adjacent pixel pairs that are both inside the mask, summed over channels and
/// divided by the number of such pairs. Empty mask gives 0.
LossGrad tv_loss(const ImageBuffer& map, const Mask& mask);

struct ParsimonyOptions {
    int bins = 64;                     // centres at (b + 0.5) / bins over [0, 1]
    double sigma_bins = 1.0;           // Gaussian width in bin widths
    std::size_t max_samples = 65536;   // seeded pixel subsample above this
    std::uint64_t seed = 0;
};

/// Entropy of a soft Gaussian histogram, computed per channel and averaged:
/// -(1/|P|) sum_p log(sum_b w_pb p_b / bin_width), with w_pb the per-pixel
/// normalized Gaussian assignment and p_b the histogram it induces.
LossGrad parsimony_loss(const ImageBuffer& albedo, const Mask& mask, const ParsimonyOptions& options = {});

/// Mean absolute value over masked-in components; subgradient 0 at exact zeros.
LossGrad residual_l1(const ImageBuffer& delta, const Mask& mask);

/// Masked mean squared error over pixels and channels.
LossGrad reconstruction_loss(const ImageBuffer& render, const ImageBuffer& target, const Mask& mask);

}  // namespace relit
