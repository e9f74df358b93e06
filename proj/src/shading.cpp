#include "relit/shading.hpp"

#include <cmath>
#include <numbers>

#include "relit/decomposition.hpp"
#include "relit/error.hpp"

namespace relit {

namespace {

const Vec3 kPlaceholder{0.0, 0.0, 1.0};

struct ActivePixels {
    std::vector<std::size_t> index;
    std::vector<Vec3> normals;
};

ActivePixels gather(const NormalMap& n) {
    ActivePixels a;
    for (std::size_t p = 0; p < n.pixel_count(); ++p) {
        if (!n.mask().inside(p)) continue;
        a.index.push_back(p);
        a.normals.push_back(n[p]);
    }
    return a;
}

ImageBuffer scatter(const ActivePixels& a, const std::vector<double>& values, int width, int height) {
    ImageBuffer out(width, height, 3);
    for (std::size_t i = 0; i < a.index.size(); ++i)
        for (int c = 0; c < 3; ++c) out[3 * a.index[i] + c] = values[3 * i + c];
    return out;
}

}  // namespace

NormalMap::NormalMap(int width, int height)
    : width_(width), height_(height), vectors_(static_cast<std::size_t>(width) * height, kPlaceholder),
      mask_(width, height, 0.0) {}

NormalMap::NormalMap(int width, int height, std::vector<Vec3> vectors, Mask mask)
    : width_(width), height_(height), vectors_(std::move(vectors)), mask_(std::move(mask)) {
    if (vectors_.size() != static_cast<std::size_t>(width) * height || !mask_.matches(width, height)) {
        throw InvalidInput("NormalMap: vector count or mask size does not match dimensions");
    }
    for (std::size_t p = 0; p < vectors_.size(); ++p) {
        const Vec3 v = vectors_[p];
        const double len = length(v);
        if (!mask_.inside(p) || !(len > 0.0) || !std::isfinite(len)) {
            vectors_[p] = kPlaceholder;
        } else {
            vectors_[p] = v / len;
        }
    }
}

ImageBuffer NormalMap::to_image(bool encoded) const {
    ImageBuffer img(width_, height_, 3);
    for (std::size_t p = 0; p < vectors_.size(); ++p) {
        for (int c = 0; c < 3; ++c) {
            const double v = vectors_[p][c];
            img[3 * p + c] = encoded ? 0.5 * (v + 1.0) : v;
        }
    }
    return img;
}

NormalMap NormalMap::from_image(const ImageBuffer& img, const Mask& mask, bool encoded) {
    if (img.channels() != 3) throw InvalidInput("normal map image must have 3 channels");
    if (!mask.matches(img)) throw InvalidInput("normal map and mask sizes differ");
    std::vector<Vec3> v(img.pixel_count());
    for (std::size_t p = 0; p < v.size(); ++p) {
        Vec3 n{img[3 * p], img[3 * p + 1], img[3 * p + 2]};
        if (encoded) n = n * 2.0 - Vec3{1.0, 1.0, 1.0};
        v[p] = n;
    }
    return NormalMap(img.width(), img.height(), std::move(v), mask);
}

PhongExponent::PhongExponent(double s) : s_(s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidInput("Phong exponent must be finite and positive");
}

ImageBuffer shading_map(const NormalMap& normals, const ShLighting& light) {
    const ActivePixels a = gather(normals);
    std::vector<double> values(a.normals.size() * 3);
    kernels::parallel::irradiance(a.normals, irradiance_weights(light), values);
    return scatter(a, values, normals.width(), normals.height());
}

double blinn_phong_lobe(const Vec3& n, const Vec3& wi, const Vec3& wo, PhongExponent s) {
    const Vec3 sum = wi + wo;
    if (length(sum) < 1e-12) throw InvalidInput("blinn_phong_lobe: antiparallel directions have no half vector");
    const Vec3 h = normalize(sum);
    const double t = std::max(0.0, dot(h, n));
    return (s.value() + 2.0) / (2.0 * std::numbers::pi) * std::pow(t, s.value());
}

ImageBuffer specular_map(const NormalMap& normals, const ShLighting& light, PhongExponent s, int samples) {
    if (samples < 16) throw InvalidInput("specular_map: at least 16 samples are required");
    const auto dirs = kernels::SpecularDirections::fibonacci(samples);
    const auto radiance = kernels::direction_radiance(dirs, light);
    const ActivePixels a = gather(normals);
    std::vector<double> values(a.normals.size() * 3);
    kernels::parallel::specular(dirs, {a.normals, radiance, s.value()}, {values, {}, {}});
    return scatter(a, values, normals.width(), normals.height());
}

ImageBuffer compose_render(const ImageBuffer& albedo, const ImageBuffer& shading, const ImageBuffer& cspec,
                           const ImageBuffer& specular) {
    const int w = albedo.width(), h = albedo.height();
    if (albedo.channels() != 3 || !shading.same_shape(albedo) || !specular.same_shape(albedo)) {
        throw InvalidInput("compose_render: albedo, shading and specular must be same-sized 3-channel buffers");
    }
    if (!cspec.same_extent(w, h) || (cspec.channels() != 1 && cspec.channels() != 3)) {
        throw InvalidInput("compose_render: Cspec must match the albedo size with 1 or 3 channels");
    }
    ImageBuffer out(w, h, 3);
    kernels::parallel::compose(albedo.data(), shading.data(), cspec.data(), cspec.channels(), specular.data(),
                               out.data());
    return out;
}

ImageBuffer render_maps(const NormalMap& normals, const ImageBuffer& albedo, const ImageBuffer& cspec,
                        const ShLighting& light, PhongExponent s, int samples) {
    return compose_render(albedo, shading_map(normals, light), cspec, specular_map(normals, light, s, samples));
}

ImageBuffer relight(const DecompositionSet& d, const ShLighting& light, PhongExponent s,
                    const std::optional<ImageBuffer>& background, const Mask& mask, int samples) {
    if (const std::string missing = d.missing_map(); !missing.empty()) {
        throw InvalidInput("relight: decomposition is missing " + missing);
    }
    ImageBuffer out = render_maps(d.normal, d.albedo, d.cspec, light, s, samples);
    if (!background) return out;
    if (!background->same_extent(out.width(), out.height())) {
        throw InvalidInput("relight: background size does not match the decomposition");
    }
    if (!mask.matches(out)) throw InvalidInput("relight: mask size does not match the decomposition");
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        const double a = mask[p];
        for (int c = 0; c < 3; ++c) {
            const double bg = background->channels() == 1 ? (*background)[p] : (*background)[3 * p + c];
            out[3 * p + c] = a * out[3 * p + c] + (1.0 - a) * bg;
        }
    }
    return out;
}

ImageBuffer DecompositionSet::reconstruction() const {
    return compose_render(albedo, shading, cspec, specular);
}

std::string DecompositionSet::missing_map() const {
    const int w = normal.width(), h = normal.height();
    if (w == 0 || h == 0) return "normal";
    if (!albedo.same_extent(w, h) || albedo.channels() != 3) return "albedo";
    if (!cspec.same_extent(w, h)) return "cspec";
    if (!mask.matches(w, h)) return "mask";
    return {};
}

}  // namespace relit
