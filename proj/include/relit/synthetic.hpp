#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "relit/image.hpp"
#include "relit/sh.hpp"
#include "relit/shading.hpp"

namespace relit {

struct AlbedoPattern {
    enum class Kind { Constant, TwoTone, Checker, CorrelatedStripe };
    Kind kind = Kind::Constant;
    Rgb a{0.5, 0.5, 0.5};
    Rgb b{0.2, 0.2, 0.2};
    double band = 0.3;        // two-tone: height fraction of the middle band in colour b
    int cell = 16;            // checker: cell size in pixels
    double level = 0.6;       // correlated stripe: irradiance level (fraction of max) at the stripe centre
    double width = 0.12;      // correlated stripe: irradiance range covered by the stripe
};

struct SyntheticScene {
    enum class Geometry { Sphere, Obj };
    Geometry geometry = Geometry::Sphere;
    double sphere_radius = 0.45;      // fraction of the smaller image side
    std::filesystem::path obj_path;
    AlbedoPattern albedo;
    ShLighting light = front_light_init();
    double phong_s = 32.0;
    double cspec = 0.0;
    int width = 256;
    int height = 256;
    std::uint64_t seed = 0;
    int specular_samples = kDefaultSpecularSamples;
};

struct SyntheticBundle {
    ImageBuffer image;
    ImageBuffer albedo;
    ImageBuffer cspec;   // 1 channel
    NormalMap normal;
    Mask mask;
    ShLighting light;
    double phong_s = 32.0;
};

/// Ground-truth maps and their forward render.
SyntheticBundle render_synthetic(const SyntheticScene& scene);

/// Orthographic analytic sphere centred in the frame.
NormalMap sphere_normals(int width, int height, double radius_fraction);

/// Adds a smooth seeded low-frequency tilt field of the given amplitude and
/// renormalizes. Masked-out pixels are left alone.
NormalMap perturb_normals(const NormalMap& normals, double amplitude, std::uint64_t seed);

}  // namespace relit
