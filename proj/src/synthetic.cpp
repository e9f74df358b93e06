#include "relit/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "relit/error.hpp"
#include "relit/geometry.hpp"

namespace relit {

NormalMap sphere_normals(int width, int height, double radius_fraction) {
    if (width < 1 || height < 1) throw InvalidInput("sphere_normals: empty frame");
    if (!(radius_fraction > 0.0)) throw InvalidInput("sphere_normals: radius must be positive");
    const double r = radius_fraction * std::min(width, height);
    const double cx = 0.5 * width, cy = 0.5 * height;
    std::vector<Vec3> v(static_cast<std::size_t>(width) * height, Vec3{0.0, 0.0, 1.0});
    Mask mask(width, height, 0.0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double nx = (x + 0.5 - cx) / r;
            const double ny = -(y + 0.5 - cy) / r;
            const double q = 1.0 - nx * nx - ny * ny;
            if (q <= 1e-6) continue;
            v[static_cast<std::size_t>(y) * width + x] = {nx, ny, std::sqrt(q)};
            mask.set(x, y, 1.0);
        }
    return NormalMap(width, height, std::move(v), std::move(mask));
}

namespace {

ImageBuffer make_albedo(const AlbedoPattern& pat, const NormalMap& normals, const ShLighting& light,
                        std::uint64_t seed) {
    const int w = normals.width(), h = normals.height();
    ImageBuffer out(w, h, 3);
    const Mask& mask = normals.mask();

    // Seeded phase for the checker.
    std::mt19937_64 rng(seed);
    const int cell = std::max(1, pat.cell);
    const int ox = static_cast<int>(rng() % static_cast<std::uint64_t>(cell));
    const int oy = static_cast<int>(rng() % static_cast<std::uint64_t>(cell));

    double max_e = 0.0;
    std::vector<double> e(normals.pixel_count(), 0.0);
    if (pat.kind == AlbedoPattern::Kind::CorrelatedStripe) {
        for (std::size_t p = 0; p < e.size(); ++p) {
            if (!mask.inside(p)) continue;
            const Rgb irr = sh_irradiance(normals[p], light);
            e[p] = std::max(0.0, 0.2126 * irr[0] + 0.7152 * irr[1] + 0.0722 * irr[2]);
            max_e = std::max(max_e, e[p]);
        }
    }

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            if (!mask.inside(p)) continue;
            bool use_b = false;
            switch (pat.kind) {
                case AlbedoPattern::Kind::Constant: break;
                case AlbedoPattern::Kind::TwoTone:
                    use_b = std::abs((y + 0.5) / h - 0.5) < 0.5 * pat.band;
                    break;
                case AlbedoPattern::Kind::Checker:
                    use_b = (((x + ox) / cell) + ((y + oy) / cell)) % 2 == 1;
                    break;
                case AlbedoPattern::Kind::CorrelatedStripe:
                    use_b = max_e > 0.0 && std::abs(e[p] / max_e - pat.level) < 0.5 * pat.width;
                    break;
            }
            const Rgb& col = use_b ? pat.b : pat.a;
            for (int c = 0; c < 3; ++c) out[3 * p + c] = col[c];
        }
    return out;
}

}  // namespace

SyntheticBundle render_synthetic(const SyntheticScene& scene) {
    if (scene.width < 2 || scene.height < 2) throw InvalidInput("synthetic scene must be at least 2x2");
    if (!(scene.cspec >= 0.0 && scene.cspec <= 2.0)) throw InvalidInput("synthetic Cspec must lie in [0, 2]");
    for (const Rgb* col : {&scene.albedo.a, &scene.albedo.b})
        for (double v : *col)
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("synthetic albedo colours must lie in [0, 1]");
    SyntheticBundle b;
    if (scene.geometry == SyntheticScene::Geometry::Sphere) {
        b.normal = sphere_normals(scene.width, scene.height, scene.sphere_radius);
    } else {
        b.normal = rasterize_normals(load_obj(scene.obj_path), scene.width, scene.height).normals;
    }
    b.mask = b.normal.mask();
    b.light = scene.light;
    b.phong_s = PhongExponent(scene.phong_s).value();
    b.albedo = make_albedo(scene.albedo, b.normal, scene.light, scene.seed);
    b.cspec = ImageBuffer(scene.width, scene.height, 1);
    for (std::size_t p = 0; p < b.mask.pixel_count(); ++p)
        if (b.mask.inside(p)) b.cspec[p] = scene.cspec;
    b.image = render_maps(b.normal, b.albedo, b.cspec, b.light, PhongExponent(b.phong_s), scene.specular_samples);
    return b;
}

NormalMap perturb_normals(const NormalMap& normals, double amplitude, std::uint64_t seed) {
    const int w = normals.width(), h = normals.height();
    std::mt19937_64 rng(seed);
    auto u01 = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    struct Wave {
        double fx, fy, ph;
    };
    std::array<Wave, 4> waves{};
    for (auto& wv : waves) wv = {1.0 + 2.0 * u01(), 1.0 + 2.0 * u01(), 2.0 * std::numbers::pi * u01()};
    std::vector<Vec3> v(normals.vectors().begin(), normals.vectors().end());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            if (!normals.mask().inside(p)) continue;
            const double u = static_cast<double>(x) / w, t = static_cast<double>(y) / h;
            auto field = [&](const Wave& a, const Wave& b) {
                return 0.5 * (std::sin(2.0 * std::numbers::pi * (a.fx * u + a.fy * t) + a.ph) +
                              std::sin(2.0 * std::numbers::pi * (b.fx * u - b.fy * t) + b.ph));
            };
            v[p] = v[p] + Vec3{amplitude * field(waves[0], waves[1]), amplitude * field(waves[2], waves[3]), 0.0};
        }
    return NormalMap(w, h, std::move(v), normals.mask());
}

}  // namespace relit
