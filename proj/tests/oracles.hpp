#pragma once

// Reference computations coded independently of the library, shared by the
// unit tests and the acceptance runner.

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "relit/inverse.hpp"
#include "relit/losses.hpp"
#include "relit/sh.hpp"
#include "relit/shading.hpp"
#include "support.hpp"

namespace relit::oracle {

inline constexpr double kPi = std::numbers::pi;

/// Real SH up to l = 2 written out from the closed-form polynomials.
inline std::array<double, 9> textbook_sh(double x, double y, double z) {
    const double c0 = 1.0 / (2.0 * std::sqrt(kPi));
    const double c1 = std::sqrt(3.0 / (4.0 * kPi));
    const double c2 = std::sqrt(15.0 / (4.0 * kPi));
    const double c20 = std::sqrt(5.0 / (16.0 * kPi));
    const double c22 = std::sqrt(15.0 / (16.0 * kPi));
    return {c0, c1 * y, c1 * z, c1 * x, c2 * x * y, c2 * y * z, c20 * (3.0 * z * z - 1.0), c2 * x * z,
            c22 * (x * x - y * y)};
}

/// Unclamped radiance sum_k L_ck Y_k(d) using the textbook basis.
inline double textbook_radiance(const ShLighting& l, int c, double x, double y, double z) {
    const auto b = textbook_sh(x, y, z);
    double r = 0.0;
    for (int k = 0; k < 9; ++k) r += l(c, k) * b[k];
    return r;
}

/// Orthonormal frame (t, b) completing n.
inline void frame(const Vec3& n, Vec3& t, Vec3& b) {
    const Vec3 a = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    t = normalize(cross(a, n));
    b = cross(n, t);
}

/// Largest |<Y_j, Y_k> - delta_jk| from stratified Monte Carlo over the sphere
/// (sqrt(samples)^2 jittered strata in (z, phi)).
inline double sh_orthonormality_error(int samples, std::uint64_t seed) {
    const int side = static_cast<int>(std::sqrt(static_cast<double>(samples)));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::array<std::array<double, 9>, 9> gram{};
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            const double z = 1.0 - 2.0 * (i + u(rng)) / side;
            const double phi = 2.0 * kPi * (j + u(rng)) / side;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const ShBasis y = eval_sh_basis(normalize(Vec3{r * std::cos(phi), r * std::sin(phi), z}));
            for (int a = 0; a < 9; ++a)
                for (int b = 0; b < 9; ++b) gram[a][b] += y[a] * y[b];
        }
    const double w = 4.0 * kPi / (static_cast<double>(side) * side);
    double worst = 0.0;
    for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b) worst = std::max(worst, std::abs(gram[a][b] * w - (a == b ? 1.0 : 0.0)));
    return worst;
}

/// (1/pi) int_{hemisphere(n)} Lrad(w) cos dw of the order-2 reconstruction,
/// by a midpoint rule with n_theta x n_phi cells.
inline Rgb hemisphere_irradiance(const Vec3& n, const ShLighting& l, int n_theta = 250, int n_phi = 400) {
    Vec3 t, b;
    frame(n, t, b);
    Rgb e{0, 0, 0};
    const double dt = 0.5 * kPi / n_theta, dp = 2.0 * kPi / n_phi;
    for (int i = 0; i < n_theta; ++i) {
        const double th = (i + 0.5) * dt;
        const double wgt = std::cos(th) * std::sin(th) * dt * dp / kPi;
        for (int j = 0; j < n_phi; ++j) {
            const double ph = (j + 0.5) * dp;
            const Vec3 w = t * (std::sin(th) * std::cos(ph)) + b * (std::sin(th) * std::sin(ph)) + n * std::cos(th);
            for (int c = 0; c < 3; ++c) e[c] += wgt * textbook_radiance(l, c, w.x, w.y, w.z);
        }
    }
    return e;
}

/// int over the hemisphere about n of blinn_phong_lobe(n, w, w, s) dw, with the
/// lobe evaluated by the library at oracle-generated directions.
inline double blinn_phong_hemisphere_integral(double s, int n_theta = 250, int n_phi = 400) {
    const Vec3 n{0.0, 0.0, 1.0};
    double sum = 0.0;
    const double dt = 0.5 * kPi / n_theta, dp = 2.0 * kPi / n_phi;
    for (int i = 0; i < n_theta; ++i) {
        const double th = (i + 0.5) * dt;
        for (int j = 0; j < n_phi; ++j) {
            const double ph = (j + 0.5) * dp;
            const Vec3 w{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
            sum += blinn_phong_lobe(n, w, w, PhongExponent(s)) * std::sin(th) * dt * dp;
        }
    }
    return sum;
}

/// SSIM straight from the definition: every 11x11 window summed directly with
/// 2-D Gaussian weights (sigma 1.5), K1 = 0.01, K2 = 0.03, range 1.
inline double ssim_direct(const ImageBuffer& a, const ImageBuffer& b) {
    const int r = 5;
    double wsum = 0.0;
    double w[11][11];
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) wsum += w[i][j] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / 4.5);
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        double sum = 0.0;
        int windows = 0;
        for (int cy = r; cy < a.height() - r; ++cy)
            for (int cx = r; cx < a.width() - r; ++cx) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < 11; ++i)
                    for (int j = 0; j < 11; ++j) {
                        const double wt = w[i][j] / wsum;
                        const double x = a.at(cx + j - r, cy + i - r, c), y = b.at(cx + j - r, cy + i - r, c);
                        ma += wt * x;
                        mb += wt * y;
                        saa += wt * x * x;
                        sbb += wt * y * y;
                        sab += wt * x * y;
                    }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++windows;
            }
        total += sum / windows;
    }
    return total / a.channels();
}

/// One analytic-vs-central-difference comparison.
struct GradientCheck {
    std::string term;
    std::string variable;
    double relative_error = 0.0;
    double tolerance = 0.0;
    bool ok() const { return relative_error <= tolerance; }
};

/// Every objective term against every optimized variable on a random 8x8
/// scene, plus the standalone identity-consistency operation.
inline std::vector<GradientCheck> objective_gradient_suite(std::uint64_t seed) {
    test::RandomScene s = test::random_scene(seed);
    SelfQuotientEmbedder::Options eo;
    eo.grid = 4;
    eo.min_size = 8;
    auto embedder = std::make_shared<SelfQuotientEmbedder>(eo);
    ParsimonyOptions po;
    po.bins = 16;
    const Objective obj(s.target, s.nhat, s.mask, 64, po, embedder);
    const Variables& x = s.vars;

    using Coords = std::function<std::span<double>(Variables&)>;
    const std::vector<std::pair<std::string, Coords>> vars = {
        {"albedo", [](Variables& v) { return v.albedo.data(); }},
        {"delta_n", [](Variables& v) { return v.delta.data(); }},
        {"cspec", [](Variables& v) { return v.cspec.data(); }},
        {"light", [](Variables& v) { return std::span<double>(v.light.coeffs[0].data(), 27); }},
        {"log_s", [](Variables& v) { return std::span<double>(&v.log_s, 1); }},
    };
    auto analytic = [](const Gradients& g, const std::string& name) -> std::vector<double> {
        if (name == "albedo") return {g.albedo.data().begin(), g.albedo.data().end()};
        if (name == "delta_n") return {g.delta.data().begin(), g.delta.data().end()};
        if (name == "cspec") return {g.cspec.data().begin(), g.cspec.data().end()};
        if (name == "light") return {g.light.coeffs[0].begin(), g.light.coeffs[2].end()};
        return {g.log_s};
    };

    std::vector<GradientCheck> out;
    const char* terms[] = {"render", "residual_l1", "parsimony", "total_smooth", "identity_consistency"};
    for (int t = 0; t < 5; ++t) {
        EvaluationOptions o;
        o.weights = test::zero_weights();
        double tol = 1e-4;
        switch (t) {
            case 0: o.weights.render_rgb = 1.0; break;
            case 1: o.weights.delta_n = 1.0; break;
            case 2: o.weights.parsimony = 1.0; break;
            case 3: o.weights.total_smooth = 1.0; break;
            default:
                o.weights.consistent = 1.0;
                o.relight = sample_random_lighting(seed + 5);
                tol = 1e-3;
        }
        Gradients g;
        obj.evaluate(x, o, &g);
        auto f = [&](const Variables& v) { return obj.evaluate(v, o).weighted(o.weights); };
        for (const auto& [name, coords] : vars) {
            const std::vector<double> a = analytic(g, name);
            out.push_back({terms[t], name, test::fd_relative_error(f, x, coords, a), tol});
        }
    }

    const IdentityConsistency ics = identity_consistency_loss(obj, x, seed + 9);
    auto f_ics = [&](const Variables& v) { return identity_consistency_loss(obj, v, seed + 9).value; };
    for (const auto& [name, coords] : vars) {
        if (name == "light") continue;  // the sampled light is not a variable of this operation
        out.push_back({"identity_consistency_op", name,
                       test::fd_relative_error(f_ics, x, coords, analytic(ics.gradient, name)), 1e-3});
    }
    return out;
}

/// Standalone loss operations against their own inputs.
inline std::vector<GradientCheck> loss_gradient_suite(std::uint64_t seed) {
    test::RandomScene s = test::random_scene(seed);
    Mask mask = s.mask;
    mask.set(3, 3, 0.0);  // exercise masked-out pixels
    mask.set(0, 5, 0.0);
    std::vector<GradientCheck> out;
    auto check = [&](const std::string& name, const ImageBuffer& input,
                     const std::function<LossGrad(const ImageBuffer&)>& loss, double tol) {
        const LossGrad lg = loss(input);
        double num = 0.0, den = 0.0;
        const double h = 1e-4;
        for (std::size_t i = 0; i < input.size(); ++i) {
            ImageBuffer a = input, b = input;
            a[i] += h;
            b[i] -= h;
            const double fd = (loss(a).value - loss(b).value) / (2.0 * h);
            num += (fd - lg.gradient[i]) * (fd - lg.gradient[i]);
            den += fd * fd;
        }
        out.push_back({name, "input", den > 0.0 ? std::sqrt(num / den) : std::sqrt(num), tol});
    };
    ParsimonyOptions po;
    po.bins = 16;
    check("tv", s.vars.albedo, [&](const ImageBuffer& m) { return tv_loss(m, mask); }, 1e-5);
    check("parsimony", s.vars.albedo, [&](const ImageBuffer& m) { return parsimony_loss(m, mask, po); }, 1e-4);
    check("residual_l1", s.vars.delta, [&](const ImageBuffer& m) { return residual_l1(m, mask); }, 1e-4);
    check("reconstruction", s.vars.albedo,
          [&](const ImageBuffer& m) { return reconstruction_loss(m, s.target, mask); }, 1e-4);
    return out;
}

}  // namespace relit::oracle
