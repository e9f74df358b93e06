#pragma once

#include <optional>
#include <vector>

#include "relit/image.hpp"
#include "relit/kernels.hpp"
#include "relit/sh.hpp"
#include "relit/vec3.hpp"

namespace relit {

/// Per-pixel unit normals (camera space) with a validity mask. Masked-out
/// pixels hold the (0, 0, 1) placeholder.
class NormalMap {
public:
    NormalMap() = default;
    NormalMap(int width, int height);
    /// Normalizes masked-in vectors and resets masked-out ones to the placeholder.
    NormalMap(int width, int height, std::vector<Vec3> vectors, Mask mask);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return vectors_.size(); }

    const Vec3& operator[](std::size_t i) const { return vectors_[i]; }
    const Vec3& at(int x, int y) const { return vectors_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<const Vec3> vectors() const { return vectors_; }
    const Mask& mask() const { return mask_; }

    /// Encodes as a 3-channel image (raw components, or (n + 1) / 2 when `encoded`).
    ImageBuffer to_image(bool encoded = false) const;
    /// Decodes a 3-channel image; `encoded` images are mapped back with 2v - 1.
    static NormalMap from_image(const ImageBuffer& img, const Mask& mask, bool encoded);

    bool operator==(const NormalMap&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Vec3> vectors_;
    Mask mask_;
};

/// Blinn-Phong shininess.
class PhongExponent {
public:
    explicit PhongExponent(double s = 32.0);
    double value() const { return s_; }

private:
    double s_;
};

inline constexpr int kDefaultSpecularSamples = 128;

/// Diffuse shading per masked pixel: clamped SH irradiance; masked-out pixels are 0.
ImageBuffer shading_map(const NormalMap& normals, const ShLighting& light);

/// ((s + 2) / 2 pi) * max(0, h . n)^s with h = normalize(wi + wo).
double blinn_phong_lobe(const Vec3& n, const Vec3& wi, const Vec3& wo, PhongExponent s);

/// Specular accumulation over a Fibonacci set of incident directions, viewer at +z.
ImageBuffer specular_map(const NormalMap& normals, const ShLighting& light, PhongExponent s,
                         int samples = kDefaultSpecularSamples);

/// A * (Sshad + Cspec * Sspec). Cspec may have 1 (broadcast) or 3 channels.
ImageBuffer compose_render(const ImageBuffer& albedo, const ImageBuffer& shading, const ImageBuffer& cspec,
                           const ImageBuffer& specular);

struct DecompositionSet;

/// Re-renders a decomposition under a new light and alpha-blends it over an
/// optional background using `mask` as coverage.
ImageBuffer relight(const DecompositionSet& d, const ShLighting& light, PhongExponent s,
                    const std::optional<ImageBuffer>& background, const Mask& mask,
                    int samples = kDefaultSpecularSamples);

/// Forward render of explicit maps (shared by relight and the synthetic renderer).
ImageBuffer render_maps(const NormalMap& normals, const ImageBuffer& albedo, const ImageBuffer& cspec,
                        const ShLighting& light, PhongExponent s, int samples = kDefaultSpecularSamples);

}  // namespace relit
