#pragma once

#include <string>
#include <vector>

#include "relit/image.hpp"
#include "relit/sh.hpp"
#include "relit/shading.hpp"

namespace relit {

/// Output bundle of one decomposition run.
struct DecompositionSet {
    NormalMap normal;        // refined, normalize(nhat + delta)
    NormalMap nhat;          // initial geometry
    ImageBuffer delta;       // 3-channel residual field, zero outside the mask
    ImageBuffer albedo;      // 3 channels, [0, 1]
    ImageBuffer shading;     // Sshad
    ImageBuffer specular;    // Sspec
    ImageBuffer cspec;       // 1 channel, [0, 2]
    ShLighting light;
    double phong_s = 32.0;
    int specular_samples = kDefaultSpecularSamples;
    Mask mask;

    /// A * (Sshad + Cspec * Sspec) of the stored maps.
    ImageBuffer reconstruction() const;
    /// Empty string when complete, otherwise names the first missing map.
    std::string missing_map() const;
};

}  // namespace relit
