#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>

#include "relit/inverse.hpp"
#include "relit/sh.hpp"

namespace relit::test {

/// Random 8x8 scene with every variable away from clamps and kinks.
struct RandomScene {
    ImageBuffer target;
    NormalMap nhat;
    Mask mask;
    Variables vars;
};

inline RandomScene random_scene(std::uint64_t seed, int w = 8, int h = 8) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomScene s;
    s.mask = Mask(w, h, 1.0);
    std::vector<Vec3> nv(static_cast<std::size_t>(w) * h);
    for (Vec3& v : nv) v = {u(rng) - 0.5, u(rng) - 0.5, 1.0};
    s.nhat = NormalMap(w, h, nv, s.mask);
    s.target = ImageBuffer(w, h, 3);
    for (double& v : s.target.data()) v = u(rng);
    Variables& x = s.vars;
    x.albedo = ImageBuffer(w, h, 3);
    for (double& v : x.albedo.data()) v = 0.2 + 0.6 * u(rng);
    x.delta = ImageBuffer(w, h, 3);
    for (double& v : x.delta.data()) v = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.01 + 0.09 * u(rng));  // off the L1 kink
    x.cspec = ImageBuffer(w, h, 1);
    for (double& v : x.cspec.data()) v = u(rng);
    x.light = uniform_light(0.8);
    for (int c = 0; c < 3; ++c)
        for (int k = 1; k < kShCoeffCount; ++k) x.light(c, k) = 0.2 * (u(rng) - 0.5);
    x.log_s = std::log(8.0);
    return s;
}

/// ||fd - analytic|| / ||fd|| with central differences of step h.
inline double fd_relative_error(const std::function<double(const Variables&)>& f, const Variables& x,
                                const std::function<std::span<double>(Variables&)>& coords,
                                std::span<const double> analytic, double h = 1e-4) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        Variables a = x, b = x;
        coords(a)[i] += h;
        coords(b)[i] -= h;
        const double fd = (f(a) - f(b)) / (2.0 * h);
        num += (fd - analytic[i]) * (fd - analytic[i]);
        den += fd * fd;
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

inline LossWeights zero_weights() { return LossWeights{0, 0, 0, 0, 0, 0, 0, 0, 0}; }

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("relit_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace relit::test
