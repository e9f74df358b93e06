#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "relit/error.hpp"
#include "relit/image.hpp"
#include "relit/image_io.hpp"
#include "support.hpp"

using namespace relit;

namespace {

// Piecewise sRGB curves coded from the published formulas.
double eotf(double v) { return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4); }
double oetf(double v) { return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055; }

ImageBuffer random_buffer(int w, int h, int c, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, scale);
    ImageBuffer b(w, h, c);
    for (double& v : b.data()) v = u(rng);
    return b;
}

}  // namespace

TEST(ImageBuffer, ShapeAndIndexing) {
    ImageBuffer b(4, 3, 3, 0.25);
    EXPECT_EQ(b.size(), 36u);
    EXPECT_EQ(b.pixel_count(), 12u);
    b.at(2, 1, 1) = 7.0;
    EXPECT_EQ(b[(1 * 4 + 2) * 3 + 1], 7.0);
    EXPECT_TRUE(b.all_finite());
    b.at(0, 0, 0) = std::nan("");
    EXPECT_FALSE(b.all_finite());
}

TEST(ImageBuffer, RejectsBadShapes) {
    EXPECT_THROW(ImageBuffer(2, 2, 0), InvalidInput);
    EXPECT_THROW(ImageBuffer(-1, 2, 1), InvalidInput);
    EXPECT_THROW(ImageBuffer(2, 2, 3, std::vector<double>(5)), InvalidInput);
}

TEST(Mask, ClampsAndErodes) {
    Mask m(5, 5, 1.0);
    m.set(0, 0, 3.0);
    EXPECT_EQ(m.at(0, 0), 1.0);
    m.set(2, 2, 0.0);
    const Mask e = m.eroded();
    EXPECT_FALSE(e.inside(0, 0));  // frame border
    EXPECT_FALSE(e.inside(1, 1));  // touches the hole
    EXPECT_FALSE(e.inside(2, 2));
    EXPECT_EQ(e.count_inside(), 0u);
    Mask big(7, 7, 1.0);
    EXPECT_EQ(big.eroded().count_inside(), 25u);
}

TEST(SrgbTransfer, MatchesPiecewiseFormula) {
    for (int i = 0; i <= 255; ++i) {
        const double v = i / 255.0;
        EXPECT_NEAR(srgb_to_linear(v), eotf(v), 1e-12);
        EXPECT_NEAR(linear_to_srgb(v), oetf(v), 1e-12);
        EXPECT_NEAR(linear_to_srgb(srgb_to_linear(v)), v, 1e-12);
    }
}

TEST(PngIo, EndpointsAndMidValue) {
    const auto dir = test::scratch_dir("png_endpoints");
    ImageBuffer b(3, 1, 1);
    b[0] = 0.0;
    b[1] = 128.0 / 255.0;
    b[2] = 1.0;
    save_image(b, dir / "g.png", Transfer::Linear);
    const ImageBuffer lin = load_image(dir / "g.png", Transfer::Srgb);
    EXPECT_EQ(lin[0], 0.0);
    EXPECT_NEAR(lin[1], eotf(128.0 / 255.0), 1e-12);
    EXPECT_EQ(lin[2], 1.0);
}

TEST(PngIo, SrgbEncodingBytes) {
    ImageBuffer b(2, 1, 1);
    b[0] = 1.0;
    b[1] = 0.5;
    const auto bytes = decode_png(encode_png(b, Transfer::Srgb), Transfer::Linear);
    EXPECT_NEAR(bytes[0] * 255.0, 255.0, 1e-9);
    EXPECT_NEAR(bytes[1] * 255.0, std::round(255.0 * oetf(0.5)), 1e-9);
}

TEST(PngIo, RoundTripWithinHalfStep) {
    const auto dir = test::scratch_dir("png_rt");
    const ImageBuffer b = random_buffer(13, 7, 3, 4);
    save_image(b, dir / "a.png", Transfer::Linear);
    const ImageBuffer r = load_image(dir / "a.png", Transfer::Linear);
    ASSERT_TRUE(r.same_shape(b));
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_LE(std::abs(r[i] - b[i]), 1.0 / 510.0 + 1e-12);

    save_image(b, dir / "s.png", Transfer::Srgb);
    const ImageBuffer s = load_image(dir / "s.png", Transfer::Linear);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_LE(std::abs(s[i] - oetf(b[i])), 1.0 / 510.0 + 1e-12);
}

TEST(PngIo, FileMatchesInMemoryEncoding) {
    const auto dir = test::scratch_dir("png_bytes");
    const ImageBuffer b = random_buffer(9, 5, 3, 8);
    save_image(b, dir / "x.png", Transfer::Srgb);
    std::ifstream in(dir / "x.png", std::ios::binary);
    const std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(file, encode_png(b, Transfer::Srgb));
}

TEST(PfmIo, BitExactRoundTrip) {
    const auto dir = test::scratch_dir("pfm_rt");
    for (int c : {1, 3}) {
        ImageBuffer b = random_buffer(11, 6, c, 10 + c, 50.0);
        for (double& v : b.data()) v = static_cast<float>(v);  // PFM stores float32
        save_image(b, dir / "a.pfm");
        EXPECT_EQ(load_image(dir / "a.pfm"), b);
    }
}

TEST(HdrIo, RoundTripWithinRgbePrecision) {
    const auto dir = test::scratch_dir("hdr_rt");
    const ImageBuffer b = random_buffer(40, 9, 3, 12, 20.0);
    save_image(b, dir / "a.hdr");
    const ImageBuffer r = load_image(dir / "a.hdr");
    ASSERT_TRUE(r.same_shape(b));
    for (std::size_t p = 0; p < b.pixel_count(); ++p) {
        const double m = std::max({b[3 * p], b[3 * p + 1], b[3 * p + 2]});
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(r[3 * p + c], b[3 * p + c], m / 128.0);
    }
}

TEST(ImageIo, ErrorsNameThePath) {
    const auto dir = test::scratch_dir("io_err");
    try {
        load_image(dir / "missing.png");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("missing.png"), std::string::npos);
    }
    std::ofstream(dir / "junk.png") << "not an image";
    EXPECT_THROW(load_image(dir / "junk.png"), IoError);
    EXPECT_THROW(save_image(ImageBuffer(2, 2, 3), dir / "nodir" / "x.pfm"), IoError);
}

TEST(MaskIo, Binary255IsOne) {
    const auto dir = test::scratch_dir("mask_io");
    Mask m(4, 4, 0.0);
    m.set(1, 2, 1.0);
    save_mask(m, dir / "m.png");
    const Mask r = load_mask(dir / "m.png");
    EXPECT_EQ(r, m);
}

TEST(SpatialGradients, ConstantRampAndOracle) {
    const auto [cx, cy] = spatial_gradients(ImageBuffer(5, 4, 3, 0.7));
    for (double v : cx.data()) EXPECT_EQ(v, 0.0);
    for (double v : cy.data()) EXPECT_EQ(v, 0.0);

    ImageBuffer ramp(5, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) ramp.at(x, y, 0) = x;
    const auto [rx, ry] = spatial_gradients(ramp);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) {
            EXPECT_EQ(rx.at(x, y, 0), x < 4 ? 1.0 : 0.0);
            EXPECT_EQ(ry.at(x, y, 0), 0.0);
        }

    const ImageBuffer b = random_buffer(4, 4, 2, 3);
    const ImageBuffer copy = b;
    const auto [dx, dy] = spatial_gradients(b);
    EXPECT_EQ(b, copy);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 2; ++c) {
                EXPECT_EQ(dx.at(x, y, c), x < 3 ? b.at(x + 1, y, c) - b.at(x, y, c) : 0.0);
                EXPECT_EQ(dy.at(x, y, c), y < 3 ? b.at(x, y + 1, c) - b.at(x, y, c) : 0.0);
            }
}

TEST(SpatialGradients, RejectsDegenerateInput) {
    EXPECT_THROW(spatial_gradients(ImageBuffer(1, 5, 1)), InvalidInput);
    EXPECT_THROW(spatial_gradients(ImageBuffer(5, 1, 1)), InvalidInput);
}
