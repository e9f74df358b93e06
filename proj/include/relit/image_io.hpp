#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "relit/image.hpp"

namespace relit {

enum class Transfer { Linear, Srgb };

/// sRGB electro-optical transfer function (encoded -> linear).
double srgb_to_linear(double encoded);
/// sRGB opto-electronic transfer function (linear -> encoded).
double linear_to_srgb(double linear);

/// Loads PNG (8/16-bit gray, gray+alpha, RGB, RGBA; alpha dropped), PFM or
/// Radiance HDR. The transfer only applies to PNG; float formats are linear.
ImageBuffer load_image(const std::filesystem::path& path, Transfer transfer = Transfer::Linear);

/// Writes by extension: .png (8-bit), .pfm, .hdr. Values are clamped to
/// [0, 1] for PNG only.
void save_image(const ImageBuffer& buffer, const std::filesystem::path& path,
                Transfer transfer = Transfer::Linear);

/// 8-bit PNG encoded in memory; byte-identical to what save_image writes.
std::vector<std::uint8_t> encode_png(const ImageBuffer& buffer, Transfer transfer);

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes, Transfer transfer);

/// Mask from a single-channel (or luminance of RGB) PNG, 255 -> 1.0.
Mask load_mask(const std::filesystem::path& path);
void save_mask(const Mask& mask, const std::filesystem::path& path);

}  // namespace relit
