#include "relit/inverse.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "relit/error.hpp"

namespace relit {

bool LossWeights::valid() const {
    for (double w : {local_rgb, blend_rgb, blend_per, render_rgb, delta_n, consistent, exp, parsimony, total_smooth})
        if (!std::isfinite(w) || w < 0.0) return false;
    return true;
}

double TermValues::weighted(const LossWeights& w) const {
    return w.render_rgb * render + w.delta_n * delta_l1 + w.parsimony * parsimony + w.total_smooth * smooth +
           w.consistent * consistent;
}

namespace {

struct Shade {
    std::vector<double> diffuse;    // active x 3, clamped irradiance
    std::vector<double> specular;   // active x 3, empty for diffuse-only
    std::vector<Vec3> jacobian;     // d specular / d n
    std::vector<double> d_exponent;
    std::vector<double> lobes;      // active x dirs
    std::vector<double> radiance;   // dirs x 3
    std::array<ShBasis, 3> weights{};
};

Shade shade(const std::vector<Vec3>& normals, const ShLighting& light, double s,
            const kernels::SpecularDirections& dirs, bool with_specular, bool normal_grad, bool lobes,
            bool exponent_grad) {
    Shade out;
    const std::size_t n = normals.size();
    out.weights = irradiance_weights(light);
    out.diffuse.resize(3 * n);
    kernels::parallel::irradiance(normals, out.weights, out.diffuse);
    if (!with_specular) return out;
    out.radiance = kernels::direction_radiance(dirs, light);
    out.specular.resize(3 * n);
    if (normal_grad) out.jacobian.resize(3 * n);
    if (exponent_grad) out.d_exponent.resize(3 * n);
    if (lobes) out.lobes.resize(n * dirs.size());
    kernels::parallel::specular(dirs, {normals, out.radiance, s}, {out.specular, out.jacobian, out.d_exponent},
                                out.lobes);
    return out;
}

// Sum of per-pixel contributions in fixed blocks so the result does not
// depend on scheduling.
template <std::size_t K, class F>
std::array<double, K> blocked_sum(std::size_t count, F&& term) {
    constexpr std::size_t block = 256;
    const std::size_t blocks = (count + block - 1) / block;
    std::vector<std::array<double, K>> partial(blocks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
        std::array<double, K> acc{};
        const std::size_t end = std::min(count, (static_cast<std::size_t>(b) + 1) * block);
        for (std::size_t i = static_cast<std::size_t>(b) * block; i < end; ++i) term(i, acc);
        partial[static_cast<std::size_t>(b)] = acc;
    }
    std::array<double, K> total{};
    for (const auto& acc : partial)
        for (std::size_t k = 0; k < K; ++k) total[k] += acc[k];
    return total;
}

struct LobeSmoothness {
    double value = 0.0;
    std::vector<Vec3> normal_grad;
    double d_log_s = 0.0;
};

// Squared differences of the lobe rows of neighbouring pixels.
LobeSmoothness lobe_smoothness(const std::vector<Vec3>& normals, const std::vector<double>& lobes,
                               const kernels::SpecularDirections& dirs, double s,
                               const std::vector<std::array<std::ptrdiff_t, 4>>& nb, std::size_t pairs,
                               double weight, bool want_grad) {
    LobeSmoothness out;
    const std::size_t n = normals.size(), nd = dirs.size();
    if (pairs == 0) {
        if (want_grad) out.normal_grad.assign(n, Vec3{});
        return out;
    }
    const auto sum = blocked_sum<1>(n, [&](std::size_t i, std::array<double, 1>& acc) {
        const double* li = &lobes[i * nd];
        for (int k = 0; k < 2; ++k) {
            if (nb[i][k] < 0) continue;
            const double* lj = &lobes[static_cast<std::size_t>(nb[i][k]) * nd];
            for (std::size_t d = 0; d < nd; ++d) acc[0] += (li[d] - lj[d]) * (li[d] - lj[d]);
        }
    });
    out.value = sum[0] * dirs.weight / static_cast<double>(pairs);
    if (!want_grad) return out;

    out.normal_grad.resize(n);
    std::vector<double> ds(n);
    const double scale = 2.0 * weight * dirs.weight / static_cast<double>(pairs);
    const double norm = (s + 2.0) / (2.0 * std::numbers::pi);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* li = &lobes[i * nd];
        Vec3 gn{};
        double gs = 0.0;
        for (std::size_t d = 0; d < nd; ++d) {
            const double t = dot(dirs.half[d], normals[i]);
            if (t <= 0.0) continue;
            double diff = 0.0;
            for (int k = 0; k < 4; ++k)
                if (nb[i][k] >= 0) diff += li[d] - lobes[static_cast<std::size_t>(nb[i][k]) * nd + d];
            if (diff == 0.0) continue;
            const double g = scale * diff;
            const double ts = li[d] / norm;
            gn += dirs.half[d] * (g * norm * s * ts / t);
            gs += g * (ts / (2.0 * std::numbers::pi) + li[d] * std::log(t));
        }
        out.normal_grad[i] = gn;
        ds[i] = gs;
    }
    const auto total = blocked_sum<1>(n, [&](std::size_t i, std::array<double, 1>& acc) { acc[0] += ds[i]; });
    out.d_log_s = total[0] * s;
    return out;
}

}  // namespace

Objective::Objective(ImageBuffer target, NormalMap nhat, Mask mask, int specular_samples, ParsimonyOptions parsimony,
                     std::shared_ptr<const Embedder> embedder)
    : target_(std::move(target)), nhat_(std::move(nhat)), mask_(std::move(mask)),
      dirs_(kernels::SpecularDirections::fibonacci(specular_samples)), parsimony_(parsimony),
      embedder_(std::move(embedder)) {
    const int w = target_.width(), h = target_.height();
    if (target_.channels() != 3) throw InvalidInput("decomposition target must have 3 channels");
    if (w < 2 || h < 2) throw InvalidInput("decomposition target must be at least 2x2");
    if (nhat_.width() != w || nhat_.height() != h) throw InvalidInput("normal map size does not match the image");
    if (!mask_.matches(target_)) throw InvalidInput("mask size does not match the image");
    if (specular_samples < 16) throw InvalidInput("at least 16 specular samples are required");
    if (!target_.all_finite()) throw InvalidInput("input image contains non-finite samples");
    std::vector<std::ptrdiff_t> slot(mask_.pixel_count(), -1);
    for (std::size_t p = 0; p < mask_.pixel_count(); ++p) {
        if (!mask_.inside(p)) continue;
        slot[p] = static_cast<std::ptrdiff_t>(active_.size());
        active_.push_back(p);
    }
    neighbours_.resize(active_.size());
    for (std::size_t i = 0; i < active_.size(); ++i) {
        const int x = static_cast<int>(active_[i] % w), y = static_cast<int>(active_[i] / w);
        auto at = [&](int xx, int yy) -> std::ptrdiff_t {
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) return -1;
            return slot[static_cast<std::size_t>(yy) * w + xx];
        };
        neighbours_[i] = {at(x + 1, y), at(x, y + 1), at(x - 1, y), at(x, y - 1)};
        pair_count_ += (neighbours_[i][0] >= 0) + (neighbours_[i][1] >= 0);
    }
    if (embedder_) target_embedding_ = embedder_->embed(target_, mask_);
}

NormalMap Objective::refined_normals(const ImageBuffer& delta) const {
    std::vector<Vec3> v(nhat_.pixel_count(), Vec3{0.0, 0.0, 1.0});
    for (std::size_t p : active_) v[p] = nhat_[p] + Vec3{delta[3 * p], delta[3 * p + 1], delta[3 * p + 2]};
    return NormalMap(width(), height(), std::move(v), mask_);
}

TermValues Objective::evaluate(const Variables& vars, const EvaluationOptions& opt, Gradients* grad) const {
    const int w = width(), h = height();
    if (!vars.albedo.same_shape(target_) || !vars.delta.same_shape(target_) || !vars.cspec.same_extent(w, h) ||
        vars.cspec.channels() != 1) {
        throw InvalidInput("decomposition variables do not match the image");
    }
    if (opt.relight && !embedder_) throw InvalidInput("identity consistency requires an embedder");
    const LossWeights& lw = opt.weights;
    const std::size_t n = active_.size();
    const bool spec = !opt.diffuse_only;
    const double s = std::exp(vars.log_s);

    // Refined normals of the active pixels.
    std::vector<Vec3> normals(n);
    std::vector<double> inv_len(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = active_[i];
        const Vec3 v = nhat_[p] + Vec3{vars.delta[3 * p], vars.delta[3 * p + 1], vars.delta[3 * p + 2]};
        const double len = length(v);
        if (!(len > 1e-12)) throw Error("normal residual cancels the initial normal at pixel " + std::to_string(p));
        inv_len[i] = 1.0 / len;
        normals[i] = v / len;
    }

    const Shade sh = shade(normals, vars.light, s, dirs_, spec, grad != nullptr, true, grad != nullptr);

    ImageBuffer render(w, h, 3), normal_img = NormalMap(w, h).to_image();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = active_[i];
        for (int c = 0; c < 3; ++c) {
            const double sp = spec ? sh.specular[3 * i + c] : 0.0;
            render[3 * p + c] = vars.albedo[3 * p + c] * (sh.diffuse[3 * i + c] + vars.cspec[p] * sp);
            normal_img[3 * p + c] = normals[i][c];
        }
    }

    TermValues t;
    const LossGrad rec = reconstruction_loss(render, target_, mask_);
    const LossGrad l1 = residual_l1(vars.delta, mask_);
    const LossGrad par = parsimony_loss(vars.albedo, mask_, parsimony_);
    const LossGrad tv_a = tv_loss(vars.albedo, mask_);
    const LossGrad tv_n = tv_loss(normal_img, mask_);
    t.render = rec.value;
    t.delta_l1 = l1.value;
    t.parsimony = par.value;
    t.smooth = tv_a.value + tv_n.value;
    LossGrad tv_c;
    LobeSmoothness tv_r;
    if (spec) {
        tv_r = lobe_smoothness(normals, sh.lobes, dirs_, s, neighbours_, pair_count_, lw.total_smooth, grad != nullptr);
        tv_c = tv_loss(vars.cspec, mask_);
        t.smooth += tv_r.value + tv_c.value;
    }

    // Identity consistency: render under the sampled light and compare embeddings.
    Shade relit;
    ImageBuffer relit_img, g_relit;
    if (opt.relight) {
        relit = shade(normals, *opt.relight, s, dirs_, true, grad != nullptr, false, grad != nullptr);
        relit_img = ImageBuffer(w, h, 3);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t p = active_[i];
            for (int c = 0; c < 3; ++c)
                relit_img[3 * p + c] =
                    vars.albedo[3 * p + c] * (relit.diffuse[3 * i + c] + vars.cspec[p] * relit.specular[3 * i + c]);
        }
        const EmbeddingVector e = embedder_->embed(relit_img, mask_);
        std::vector<double> ge(e.size());
        double d2 = 0.0;
        for (std::size_t k = 0; k < e.size(); ++k) {
            const double d = e[k] - target_embedding_[k];
            d2 += d * d;
            ge[k] = 2.0 * lw.consistent * d;
        }
        t.consistent = d2;
        if (grad) g_relit = embedder_->backward(relit_img, mask_, ge);
    }
    if (!grad) return t;

    Gradients& g = *grad;
    g.albedo = ImageBuffer(w, h, 3);
    g.delta = ImageBuffer(w, h, 3);
    g.cspec = ImageBuffer(w, h, 1);
    g.light = ShLighting{};
    g.log_s = 0.0;

    const double wr = lw.render_rgb, ws = lw.total_smooth;
    std::vector<double> g_diffuse(3 * n), g_spec(spec ? 3 * n : 0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const std::size_t p = active_[i];
        const double cs = vars.cspec[p];
        Vec3 gn{};
        double gc = 0.0;
        std::array<Vec3, kShCoeffCount> dy{};
        bool have_dy = false;
        auto diffuse_normal = [&](const Shade& lit, int c, double gd) {
            if (gd == 0.0 || lit.diffuse[3 * i + c] <= 0.0) return;
            if (!have_dy) {
                dy = sh_basis_gradient(normals[i]);
                have_dy = true;
            }
            for (int k = 0; k < kShCoeffCount; ++k) gn += dy[k] * (gd * lit.weights[c][k]);
        };
        for (int c = 0; c < 3; ++c) {
            const double a = vars.albedo[3 * p + c];
            const double gr = wr * rec.gradient[3 * p + c];
            const double sp = spec ? sh.specular[3 * i + c] : 0.0;
            double ga = gr * (sh.diffuse[3 * i + c] + cs * sp);
            const double gd = gr * a;
            g_diffuse[3 * i + c] = gd;
            diffuse_normal(sh, c, gd);
            if (spec) {
                const double gs = gr * a * cs;
                g_spec[3 * i + c] = gs;
                gn += sh.jacobian[3 * i + c] * gs;
                gc += gr * a * sp;
            }
            if (opt.relight) {
                const double gq = g_relit[3 * p + c];
                diffuse_normal(relit, c, gq * a);
                gn += relit.jacobian[3 * i + c] * (gq * a * cs);
                if (!opt.consistency_normals_only) {
                    ga += gq * (relit.diffuse[3 * i + c] + cs * relit.specular[3 * i + c]);
                    gc += gq * a * relit.specular[3 * i + c];
                }
            }
            g.albedo[3 * p + c] = ga + ws * tv_a.gradient[3 * p + c] + lw.parsimony * par.gradient[3 * p + c];
        }
        gn += Vec3{tv_n.gradient[3 * p], tv_n.gradient[3 * p + 1], tv_n.gradient[3 * p + 2]} * ws;
        if (spec) {
            gc += ws * tv_c.gradient[p];
            gn += tv_r.normal_grad[i];
        }
        g.cspec[p] = gc;
        // Through the renormalization: (I - n n^T) / |nhat + delta|.
        const Vec3 nn = normals[i];
        const Vec3 gv = (gn - nn * dot(nn, gn)) * inv_len[i];
        for (int c = 0; c < 3; ++c) {
            g.delta[3 * p + c] = gv[c] + (opt.l1_in_gradient ? lw.delta_n * l1.gradient[3 * p + c] : 0.0);
        }
    }

    // Lighting: diffuse part through the irradiance weights.
    const auto gl = blocked_sum<27>(n, [&](std::size_t i, std::array<double, 27>& acc) {
        const ShBasis y = sh_basis_polynomial(normals[i]);
        for (int c = 0; c < 3; ++c) {
            const double gd = g_diffuse[3 * i + c];
            if (gd == 0.0 || sh.diffuse[3 * i + c] <= 0.0) continue;
            for (int k = 0; k < kShCoeffCount; ++k) acc[9 * c + k] += gd * y[k];
        }
    });
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < kShCoeffCount; ++k)
            g.light(c, k) = gl[9 * c + k] * kIrradianceBandGain[kShBand[k]] / std::numbers::pi;

    if (spec) {
        // Specular part through the per-direction radiance.
        std::vector<double> adjoint(dirs_.size() * 3);
        kernels::parallel::specular_direction_adjoint(sh.lobes, dirs_.size(), g_spec, adjoint);
        for (std::size_t d = 0; d < dirs_.size(); ++d)
            for (int c = 0; c < 3; ++c) {
                if (sh.radiance[3 * d + c] <= 0.0) continue;
                const double a = dirs_.weight * adjoint[3 * d + c];
                for (int k = 0; k < kShCoeffCount; ++k) g.light(c, k) += a * dirs_.basis[d][k];
            }
        const auto gs = blocked_sum<1>(n, [&](std::size_t i, std::array<double, 1>& acc) {
            for (int c = 0; c < 3; ++c) acc[0] += g_spec[3 * i + c] * sh.d_exponent[3 * i + c];
        });
        g.log_s += gs[0] * s + tv_r.d_log_s;
    }
    if (opt.relight && !opt.consistency_normals_only) {
        const auto gs = blocked_sum<1>(n, [&](std::size_t i, std::array<double, 1>& acc) {
            const std::size_t p = active_[i];
            for (int c = 0; c < 3; ++c)
                acc[0] += g_relit[3 * p + c] * vars.albedo[3 * p + c] * vars.cspec[p] * relit.d_exponent[3 * i + c];
        });
        g.log_s += gs[0] * s;
    }
    return t;
}

IdentityConsistency identity_consistency_loss(const Objective& objective, const Variables& vars, std::uint64_t seed) {
    EvaluationOptions opt;
    opt.weights = LossWeights{0, 0, 0, 0, 0, 1, 0, 0, 0};
    opt.relight = sample_random_lighting(seed);
    opt.l1_in_gradient = false;
    IdentityConsistency out;
    const TermValues t = objective.evaluate(vars, opt, &out.gradient);
    out.value = t.consistent;
    out.gradient.light = ShLighting{};
    return out;
}

ShLighting estimate_lighting_ls(const ImageBuffer& image, const ImageBuffer& albedo, const NormalMap& normals,
                                const Mask& mask) {
    const int w = image.width(), h = image.height();
    if (image.channels() != 3 || !albedo.same_shape(image)) throw InvalidInput("estimate_lighting_ls: image and albedo must be same-sized RGB");
    if (normals.width() != w || normals.height() != h || !mask.matches(image))
        throw InvalidInput("estimate_lighting_ls: normal map or mask size does not match the image");

    ShBasis gain{};
    for (int k = 0; k < kShCoeffCount; ++k) gain[k] = kIrradianceBandGain[kShBand[k]] / std::numbers::pi;

    ShLighting out;
    for (int c = 0; c < 3; ++c) {
        // Geometry term over every usable pixel decides identifiability; the
        // solve uses lit pixels only, since a zero sample of the clamped model
        // is an inequality rather than an equation.
        Eigen::Matrix<double, 9, 9> geo = Eigen::Matrix<double, 9, 9>::Zero();
        Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
        Eigen::Matrix<double, 9, 1> atb = Eigen::Matrix<double, 9, 1>::Zero();
        std::size_t usable = 0;
        for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
            const double m = mask[p];
            const double a = albedo[3 * p + c];
            if (!(m > 0.0) || !(a > 0.0)) continue;
            ++usable;
            const ShBasis y = sh_basis_polynomial(normals[p]);
            Eigen::Matrix<double, 9, 1> row;
            for (int k = 0; k < kShCoeffCount; ++k) row[k] = a * gain[k] * y[k];
            geo.noalias() += m * row * row.transpose();
            const double v = image[3 * p + c];
            if (v > 0.0) {
                ata.noalias() += m * row * row.transpose();
                atb.noalias() += m * v * row;
            }
        }
        if (usable < 9) throw InvalidInput("estimate_lighting_ls: fewer than 9 masked pixels with positive albedo");
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(geo, Eigen::EigenvaluesOnly);
        const auto& ev = eig.eigenvalues();
        const double tol = 1e-10 * std::max(ev.maxCoeff(), 1e-300);
        int rank = 0;
        for (int k = 0; k < 9; ++k) rank += ev[k] > tol;
        if (rank < 9) {
            throw InvalidInput("estimate_lighting_ls: rank-deficient system, the normals constrain only " +
                               std::to_string(rank) + " of 9 lighting coefficients");
        }
        ata += 1e-6 * Eigen::Matrix<double, 9, 9>::Identity();
        const Eigen::Matrix<double, 9, 1> sol = ata.ldlt().solve(atb);
        for (int k = 0; k < kShCoeffCount; ++k) out(c, k) = sol[k];
    }
    return out;
}

Variables initial_variables(const ImageBuffer& image, const NormalMap& nhat, const Mask& mask, double phong_s) {
    const int w = image.width(), h = image.height();
    Variables v;
    v.light = front_light_init();
    v.albedo = ImageBuffer(w, h, 3);
    v.delta = ImageBuffer(w, h, 3);
    v.cspec = ImageBuffer(w, h, 1);
    v.log_s = std::log(PhongExponent(phong_s).value());
    const ImageBuffer shading = shading_map(NormalMap(w, h, {nhat.vectors().begin(), nhat.vectors().end()}, mask),
                                            v.light);
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        if (!mask.inside(p)) continue;
        for (int c = 0; c < 3; ++c) {
            const double s = shading[3 * p + c];
            v.albedo[3 * p + c] = s > 1e-3 ? std::clamp(image[3 * p + c] / s, 0.0, 1.0) : 0.5;
        }
    }
    return v;
}

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-12;  // gradients are per-pixel means and get very small

struct Adam {
    std::vector<double> m, v;
    long t = 0;

    explicit Adam(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}

    void accumulate(std::span<const double> g) {
        ++t;
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
            v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
        }
    }

    // Per-coordinate effective step, lr / (sqrt(v_hat) + eps).
    double step_size(std::size_t i, double lr) const {
        const double vh = v[i] / (1.0 - std::pow(kAdamBeta2, static_cast<double>(t)));
        return lr / (std::sqrt(vh) + kAdamEps);
    }
    double direction(std::size_t i) const { return m[i] / (1.0 - std::pow(kAdamBeta1, static_cast<double>(t))); }
};

std::span<const double> light_span(const ShLighting& l) { return {l.coeffs[0].data(), 27}; }

struct Optimizer {
    Adam albedo, delta, cspec, light, log_s;
    std::vector<std::size_t> active;
    double delta_l1_scale = 0.0;  // lambda / (3 * masked pixels)
};

enum class Update { kDiffuse, kFull };

void fix_gauge(Variables& v, const std::vector<std::size_t>& active);

// One Adam step from x with gradient g, scaled by lr_scale.
Variables adam_step(const Variables& x, const Gradients& g, Optimizer& o, Update which, const OptimizerConfig& cfg,
                    double lr_scale, bool accumulate) {
    Variables y = x;
    const double lr = cfg.step * lr_scale;
    const double lr_light = cfg.light_step * lr_scale;
    if (accumulate) {
        o.albedo.accumulate(g.albedo.data());
        o.light.accumulate(light_span(g.light));
        if (which == Update::kFull) {
            o.delta.accumulate(g.delta.data());
            o.cspec.accumulate(g.cspec.data());
            if (cfg.optimize_s) o.log_s.accumulate(std::span<const double>(&g.log_s, 1));
        }
    }
    for (std::size_t p : o.active) {
        for (int c = 0; c < 3; ++c) {
            const std::size_t i = 3 * p + c;
            y.albedo[i] = std::clamp(x.albedo[i] - o.albedo.step_size(i, lr) * o.albedo.direction(i), 0.0, 1.0);
        }
    }
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < kShCoeffCount; ++k) {
            const auto i = static_cast<std::size_t>(9 * c + k);
            y.light(c, k) = x.light(c, k) - o.light.step_size(i, lr_light) * o.light.direction(i);
        }
    if (which == Update::kFull) {
        for (std::size_t p : o.active) {
            for (int c = 0; c < 3; ++c) {
                // Proximal step for the L1 residual penalty.
                const std::size_t i = 3 * p + c;
                const double eta = o.delta.step_size(i, lr);
                const double z = x.delta[i] - eta * o.delta.direction(i);
                const double thr = eta * o.delta_l1_scale;
                y.delta[i] = z > thr ? z - thr : (z < -thr ? z + thr : 0.0);
            }
            y.cspec[p] = std::clamp(x.cspec[p] - o.cspec.step_size(p, lr) * o.cspec.direction(p), 0.0, 2.0);
        }
        if (cfg.optimize_s) y.log_s = x.log_s - o.log_s.step_size(0, lr) * o.log_s.direction(0);
    }
    fix_gauge(y, o.active);
    return y;
}

// Albedo and lighting are only determined up to a per-channel scale. Pin it by
// giving each light channel unit peak irradiance, unless that would push the
// albedo above 1.
void fix_gauge(Variables& v, const std::vector<std::size_t>& active) {
    for (int c = 0; c < 3; ++c) {
        const double peak = peak_irradiance(v.light, c);
        if (!(peak > 0.0) || !std::isfinite(peak)) continue;
        double max_a = 0.0;
        for (std::size_t p : active) max_a = std::max(max_a, v.albedo[3 * p + c]);
        double k = peak;
        if (max_a > 0.0 && max_a * k > 1.0) k = 1.0 / max_a;
        for (int i = 0; i < kShCoeffCount; ++i) v.light(c, i) /= k;
        for (std::size_t p : active) v.albedo[3 * p + c] = std::min(1.0, v.albedo[3 * p + c] * k);
    }
}

void check_finite(double f, std::size_t iteration) {
    if (!std::isfinite(f)) throw Error("decompose: objective diverged at iteration " + std::to_string(iteration));
}

}  // namespace

DecompositionResult decompose(const ImageBuffer& image, const NormalMap& nhat, const Mask& mask,
                              const OptimizerConfig& cfg, const std::optional<Variables>& warm_start,
                              std::shared_ptr<const Embedder> embedder) {
    if (!cfg.weights.valid()) throw InvalidInput("loss weights must be finite and nonnegative");
    for (int n : cfg.stages)
        if (n < 0) throw InvalidInput("stage iteration counts must be nonnegative");
    if (!(cfg.step > 0.0) || !(cfg.light_step > 0.0)) throw InvalidInput("step sizes must be positive");
    PhongExponent(cfg.phong_s);

    const bool use_ics = cfg.stages[2] > 0 && cfg.weights.consistent > 0.0;
    if (use_ics && !embedder) embedder = std::make_shared<SelfQuotientEmbedder>();
    ParsimonyOptions pars;
    pars.bins = cfg.bins;
    pars.sigma_bins = cfg.sigma_bins;
    pars.seed = cfg.seed;
    const Objective obj(image, nhat, mask, cfg.specular_samples, pars, use_ics ? embedder : nullptr);

    Variables x = warm_start ? *warm_start : initial_variables(image, nhat, mask, cfg.phong_s);
    if (!x.albedo.same_shape(image) || !x.delta.same_shape(image) || !x.cspec.same_extent(image.width(), image.height()))
        throw InvalidInput("warm start does not match the image");
    if (!warm_start) x.log_s = std::log(cfg.phong_s);

    Optimizer o;
    o.albedo = Adam(x.albedo.size());
    o.delta = Adam(x.delta.size());
    o.cspec = Adam(x.cspec.size());
    o.light = Adam(27);
    o.log_s = Adam(1);
    for (std::size_t p = 0; p < mask.pixel_count(); ++p)
        if (mask.inside(p)) o.active.push_back(p);
    if (o.active.empty()) throw InvalidInput("decompose: mask is empty");
    o.delta_l1_scale = cfg.weights.delta_n / (3.0 * static_cast<double>(o.active.size()));
    fix_gauge(x, o.active);

    EvaluationOptions diffuse_opt{cfg.weights, true, std::nullopt, false};
    EvaluationOptions full_opt{cfg.weights, false, std::nullopt, false};
    DecompositionResult result;
    std::size_t iteration = 0;

    // Backtracking Adam: a step that raises the objective is undone and the
    // step size halved; accepted steps let it recover toward the base size.
    auto run_stage = [&](int iterations, const EvaluationOptions& opt, Update which, std::vector<double>* trace) {
        Gradients g;
        double f = obj.evaluate(x, opt, &g).weighted(cfg.weights);
        check_finite(f, iteration);
        double scale = 1.0;
        bool fresh = true;
        for (int it = 0; it < iterations; ++it, ++iteration) {
            if (trace) trace->push_back(f);
            Variables y = adam_step(x, g, o, which, cfg, scale, fresh);
            Gradients gy;
            const double fy = obj.evaluate(y, opt, &gy).weighted(cfg.weights);
            check_finite(fy, iteration);
            if (fy <= f) {
                x = std::move(y);
                g = std::move(gy);
                f = fy;
                scale = std::min(1.0, scale * 1.25);
                fresh = true;
            } else {
                scale *= 0.5;
                fresh = false;
            }
        }
        return f;
    };

    run_stage(cfg.stages[0], diffuse_opt, Update::kDiffuse, nullptr);

    // Least-squares lighting bootstrap, kept only if it does not raise the objective.
    double f2 = obj.evaluate(x, full_opt).weighted(cfg.weights);
    check_finite(f2, iteration);
    try {
        Variables boot = x;
        boot.light = estimate_lighting_ls(image, x.albedo, obj.refined_normals(x.delta), mask);
        fix_gauge(boot, o.active);
        const double fb = obj.evaluate(boot, full_opt).weighted(cfg.weights);
        if (std::isfinite(fb) && fb <= f2) {
            x = std::move(boot);
            f2 = fb;
        }
    } catch (const InvalidInput&) {
        // Unidentifiable geometry: keep the optimized light.
    }

    run_stage(cfg.stages[1], full_opt, Update::kFull, &result.stage2_trace);
    const double f_end = obj.evaluate(x, full_opt).weighted(cfg.weights);
    result.stage2_trace.push_back(f_end);
    if (cfg.stages[1] > 0) {
        const std::size_t window = std::max<std::size_t>(1, result.stage2_trace.size() / 10);
        const double f_then = result.stage2_trace[result.stage2_trace.size() - 1 - window];
        result.converged = (f_then - f_end) <= cfg.convergence_tolerance * std::max(std::abs(f_end), 1e-12);
    }

    // Identity-consistent refinement with a fresh light every iteration. With a
    // zero consistency weight the same schedule runs without the term.
    for (int it = 0; it < cfg.stages[2]; ++it, ++iteration) {
        EvaluationOptions opt = full_opt;
        opt.consistency_normals_only = true;
        if (use_ics) opt.relight = sample_random_lighting(cfg.seed + static_cast<std::uint64_t>(it + 1) * cfg.ics_seed_stride);
        Gradients g;
        const double f = obj.evaluate(x, opt, &g).weighted(cfg.weights);
        check_finite(f, iteration);
        const double decay = 1.0 - static_cast<double>(it) / cfg.stages[2];
        x = adam_step(x, g, o, Update::kFull, cfg, decay, true);
    }

    result.iterations = iteration;
    result.final_terms = obj.evaluate(x, full_opt);

    DecompositionSet& d = result.set;
    d.mask = mask;
    d.nhat = nhat;
    d.normal = obj.refined_normals(x.delta);
    d.delta = ImageBuffer(image.width(), image.height(), 3);
    for (std::size_t p : o.active)
        for (int c = 0; c < 3; ++c) d.delta[3 * p + c] = x.delta[3 * p + c];
    d.albedo = x.albedo;
    d.cspec = x.cspec;
    d.light = x.light;
    d.phong_s = std::exp(x.log_s);
    d.specular_samples = cfg.specular_samples;
    d.shading = shading_map(d.normal, d.light);
    d.specular = specular_map(d.normal, d.light, PhongExponent(d.phong_s), cfg.specular_samples);
    return result;
}

}  // namespace relit
