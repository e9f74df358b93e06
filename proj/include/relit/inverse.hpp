#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "relit/decomposition.hpp"
#include "relit/embedding.hpp"
#include "relit/image.hpp"
#include "relit/kernels.hpp"
#include "relit/losses.hpp"
#include "relit/sh.hpp"
#include "relit/shading.hpp"

namespace relit {

/// Weights of the full portrait objective. Only render_rgb, delta_n,
/// consistent, parsimony and total_smooth drive this optimizer; the audio and
/// blending weights are carried for completeness of the configuration format.
struct LossWeights {
    double local_rgb = 1.0;
    double blend_rgb = 1.0;
    double blend_per = 100.0;
    double render_rgb = 1.0;
    double delta_n = 1.0;
    double consistent = 3.0;
    double exp = 1.0;
    double parsimony = 0.001;
    double total_smooth = 1.0;

    bool valid() const;
};

struct OptimizerConfig {
    LossWeights weights;
    std::array<int, 3> stages{2000, 2000, 1000};
    int bins = 64;
    double sigma_bins = 1.0;
    double phong_s = 32.0;
    bool optimize_s = false;
    std::uint64_t seed = 0;
    std::uint64_t ics_seed_stride = 1;
    int specular_samples = kDefaultSpecularSamples;
    double step = 1e-2;          // Adam step for per-pixel maps and log s
    double light_step = 1e-3;    // Adam step for the SH coefficients
    double convergence_tolerance = 1e-3;
};

/// Free variables of the decomposition.
struct Variables {
    ImageBuffer albedo;   // 3 channels
    ImageBuffer delta;    // 3 channels, normal residual
    ImageBuffer cspec;    // 1 channel
    ShLighting light;
    double log_s = 0.0;
};

/// Gradient of the weighted objective with respect to each variable.
struct Gradients {
    ImageBuffer albedo;
    ImageBuffer delta;
    ImageBuffer cspec;
    ShLighting light;
    double log_s = 0.0;
};

/// Unweighted value of every implemented term.
struct TermValues {
    double render = 0.0;
    double delta_l1 = 0.0;
    double parsimony = 0.0;
    double smooth = 0.0;      // TV(A) + TV(N) + TV(Rspec) + TV(Cspec)
    double consistent = 0.0;

    double weighted(const LossWeights& w) const;
};

struct EvaluationOptions {
    LossWeights weights;
    bool diffuse_only = false;        // Cspec and Sspec drop out of render and smoothness
    std::optional<ShLighting> relight;  // enables the identity-consistency term
    bool l1_in_gradient = true;       // add the L1 subgradient to the delta gradient
    bool consistency_normals_only = false;  // identity consistency only drives the normal residual
};

/// The decomposition objective over one frame, with analytic gradients.
///
/// The specular smoothness term acts on the Blinn-Phong lobe field
/// R(n_p, w_i, +z) over the specular sample directions (solid-angle weighted),
/// so it constrains the normals and exponent but never the lighting.
class Objective {
public:
    Objective(ImageBuffer target, NormalMap nhat, Mask mask, int specular_samples = kDefaultSpecularSamples,
              ParsimonyOptions parsimony = {}, std::shared_ptr<const Embedder> embedder = nullptr);

    TermValues evaluate(const Variables& vars, const EvaluationOptions& options, Gradients* grad = nullptr) const;

    /// normalize(nhat + delta) on masked pixels.
    NormalMap refined_normals(const ImageBuffer& delta) const;

    const ImageBuffer& target() const { return target_; }
    const NormalMap& nhat() const { return nhat_; }
    const Mask& mask() const { return mask_; }
    const Embedder& embedder() const { return *embedder_; }
    int width() const { return target_.width(); }
    int height() const { return target_.height(); }

private:
    ImageBuffer target_;
    NormalMap nhat_;
    Mask mask_;
    std::vector<std::size_t> active_;
    std::vector<std::array<std::ptrdiff_t, 4>> neighbours_;  // right, down, left, up in active indices, -1 if none
    std::size_t pair_count_ = 0;
    kernels::SpecularDirections dirs_;
    ParsimonyOptions parsimony_;
    std::shared_ptr<const Embedder> embedder_;
    EmbeddingVector target_embedding_;
};

/// Identity-consistency term alone: renders the current maps under
/// sample_random_lighting(seed) and compares embeddings with the target frame.
/// The lighting gradient is zero: the sampled light is not a free variable.
struct IdentityConsistency {
    double value = 0.0;
    Gradients gradient;
};
IdentityConsistency identity_consistency_loss(const Objective& objective, const Variables& vars, std::uint64_t seed);

/// Per-channel least squares for the diffuse model I = A * irradiance(N, L).
/// Throws InvalidInput naming the deficiency when the normals do not
/// constrain all nine coefficients.
ShLighting estimate_lighting_ls(const ImageBuffer& image, const ImageBuffer& albedo, const NormalMap& normals,
                                const Mask& mask);

struct DecompositionResult {
    DecompositionSet set;
    bool converged = true;
    TermValues final_terms;
    std::vector<double> stage2_trace;  // stage-2 objective before every stage-2 step, then after the last
    std::size_t iterations = 0;
};

/// Staged first-order optimization of albedo, normal residual, lighting,
/// specular coefficient (and optionally the Phong exponent).
/// Throws Error on divergence. `warm_start` replaces the default initialization.
DecompositionResult decompose(const ImageBuffer& image, const NormalMap& nhat, const Mask& mask,
                              const OptimizerConfig& config,
                              const std::optional<Variables>& warm_start = std::nullopt,
                              std::shared_ptr<const Embedder> embedder = nullptr);

/// Default starting point: front light, albedo from the image divided by its
/// front-lit shading, zero residual and zero specular coefficient.
Variables initial_variables(const ImageBuffer& image, const NormalMap& nhat, const Mask& mask, double phong_s);

}  // namespace relit
