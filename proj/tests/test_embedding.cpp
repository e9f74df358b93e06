#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "relit/embedding.hpp"
#include "relit/error.hpp"
#include "relit/synthetic.hpp"

using namespace relit;

namespace {

double distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double norm(const EmbeddingVector& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

SyntheticBundle sphere(AlbedoPattern albedo, const ShLighting& light) {
    SyntheticScene s;
    s.width = s.height = 96;
    s.albedo = albedo;
    s.light = light;
    return render_synthetic(s);
}

ImageBuffer random_image(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    ImageBuffer b(w, h, 3);
    for (double& v : b.data()) v = u(rng);
    return b;
}

}  // namespace

TEST(SelfQuotient, LengthUnitNormAndZeroMean) {
    const ImageBuffer img = random_image(64, 48, 1);
    const EmbeddingVector e = self_quotient_embedding(img, Mask(64, 48, 1.0));
    ASSERT_EQ(e.size(), 256u);
    EXPECT_NEAR(norm(e), 1.0, 1e-6);
    double mean = 0.0;
    for (double v : e) mean += v;
    EXPECT_NEAR(mean / 256.0, 0.0, 1e-12);
}

TEST(SelfQuotient, ScaleInvariant) {
    const ImageBuffer img = random_image(64, 64, 2);
    ImageBuffer twice = img;
    for (double& v : twice.data()) v *= 2.0;
    const Mask mask(64, 64, 1.0);
    EXPECT_LT(distance(self_quotient_embedding(img, mask), self_quotient_embedding(twice, mask)), 1e-6);
}

TEST(SelfQuotient, SameAlbedoCloserThanDifferentTextureUnderRandomLights) {
    AlbedoPattern plain;
    plain.kind = AlbedoPattern::Kind::TwoTone;
    AlbedoPattern checker;
    checker.kind = AlbedoPattern::Kind::Checker;
    checker.cell = 12;
    int held = 0, trials = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SyntheticBundle a1 = sphere(plain, sample_random_lighting(seed));
        const SyntheticBundle a2 = sphere(plain, sample_random_lighting(seed + 100));
        const SyntheticBundle b1 = sphere(checker, sample_random_lighting(seed));
        const SyntheticBundle b2 = sphere(checker, sample_random_lighting(seed + 100));
        const auto ea1 = self_quotient_embedding(a1.image, a1.mask);
        const auto ea2 = self_quotient_embedding(a2.image, a2.mask);
        const auto eb1 = self_quotient_embedding(b1.image, b1.mask);
        const auto eb2 = self_quotient_embedding(b2.image, b2.mask);
        const double same = distance(ea1, ea2);
        held += same < distance(ea1, eb1);
        held += same < distance(ea2, eb2);
        trials += 2;
    }
    EXPECT_EQ(held, trials) << "same-albedo pair closer in " << held << " of " << trials << " comparisons";
}

TEST(SelfQuotient, SameAlbedoCloserThanDifferentTextureUnderFrontalLights) {
    AlbedoPattern plain;
    plain.kind = AlbedoPattern::Kind::TwoTone;
    AlbedoPattern checker;
    checker.kind = AlbedoPattern::Kind::Checker;
    checker.cell = 12;
    const ShLighting l1 = front_light_init();
    const ShLighting l2 = directional_light(normalize(Vec3{0.5, 0.3, 1.0}), 1.0, 0.2);
    const SyntheticBundle a1 = sphere(plain, l1), a2 = sphere(plain, l2);
    const SyntheticBundle b1 = sphere(checker, l1), b2 = sphere(checker, l2);
    const auto ea1 = self_quotient_embedding(a1.image, a1.mask);
    const auto ea2 = self_quotient_embedding(a2.image, a2.mask);
    const double same = distance(ea1, ea2);
    EXPECT_LT(same, distance(ea1, self_quotient_embedding(b1.image, b1.mask)));
    EXPECT_LT(same, distance(ea2, self_quotient_embedding(b2.image, b2.mask)));
}

TEST(SelfQuotient, DarkImageStaysFinite) {
    const Mask mask(48, 48, 1.0);
    for (const EmbeddingVector& e : {self_quotient_embedding(ImageBuffer(48, 48, 3, 0.0), mask),
                                     self_quotient_embedding(ImageBuffer(48, 48, 3, 1e-12), mask)})
        for (double v : e) EXPECT_TRUE(std::isfinite(v));
}

TEST(SelfQuotient, RejectsSmallImages) {
    EXPECT_THROW(self_quotient_embedding(ImageBuffer(16, 64, 3, 0.5), Mask(16, 64, 1.0)), InvalidInput);
}

TEST(SelfQuotient, BackwardMatchesFiniteDifferences) {
    SelfQuotientEmbedder::Options o;
    o.grid = 4;
    o.min_size = 8;
    const SelfQuotientEmbedder emb(o);
    const ImageBuffer img = random_image(12, 10, 3);
    Mask mask(12, 10, 1.0);
    mask.set(0, 0, 0.0);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    std::vector<double> w(16);
    for (double& v : w) v = g(rng);
    auto f = [&](const ImageBuffer& im) {
        const auto e = emb.embed(im, mask);
        double s = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) s += w[i] * e[i];
        return s;
    };
    const ImageBuffer grad = emb.backward(img, mask, w);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        ImageBuffer a = img, b = img;
        a[i] += 1e-5;
        b[i] -= 1e-5;
        const double fd = (f(a) - f(b)) / 2e-5;
        num += (fd - grad[i]) * (fd - grad[i]);
        den += fd * fd;
    }
    EXPECT_LT(std::sqrt(num / den), 1e-4);
}
