#pragma once

#include <span>
#include <vector>

#include "relit/image.hpp"

namespace relit {

using EmbeddingVector = std::vector<double>;

/// Illumination-insensitive image descriptor used by the identity-consistency
/// loss. Implementations must be differentiable almost everywhere.
class Embedder {
public:
    virtual ~Embedder() = default;

    virtual EmbeddingVector embed(const ImageBuffer& image, const Mask& mask) const = 0;

    /// Pulls a gradient with respect to the embedding back to the image.
    virtual ImageBuffer backward(const ImageBuffer& image, const Mask& mask,
                                 std::span<const double> grad_embedding) const = 0;
};

/// Self-quotient image: luminance divided by its masked Gaussian blur
/// (sigma = sigma_fraction * min(width, height)), area-averaged onto a
/// grid x grid lattice, then made zero-mean and unit-norm.
class SelfQuotientEmbedder final : public Embedder {
public:
    struct Options {
        int grid = 16;
        double sigma_fraction = 0.08;
        int min_size = 32;
        double guard = 1e-4;  // relative to the masked mean luminance
    };

    SelfQuotientEmbedder();
    explicit SelfQuotientEmbedder(Options options);

    EmbeddingVector embed(const ImageBuffer& image, const Mask& mask) const override;
    ImageBuffer backward(const ImageBuffer& image, const Mask& mask,
                         std::span<const double> grad_embedding) const override;

    const Options& options() const { return options_; }

private:
    struct Forward;
    Forward run(const ImageBuffer& image, const Mask& mask) const;

    Options options_;
};

EmbeddingVector self_quotient_embedding(const ImageBuffer& image, const Mask& mask);

}  // namespace relit
