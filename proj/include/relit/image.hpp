#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace relit {

/// Row-major H x W x C raster of linear-radiance samples.
///
/// Every map in the pipeline (input frame, albedo, shading, specular,
/// coefficient maps, renders) lives in one of these. Samples are double
/// precision so that analytic gradients can be checked against finite
/// differences; file formats narrow to float or 8/16-bit at the boundary.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, double fill = 0.0);
    ImageBuffer(int width, int height, int channels, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int x, int y, int c) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c) const { return data_[index(x, y, c)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    bool same_shape(const ImageBuffer& o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }
    bool same_extent(int w, int h) const { return width_ == w && height_ == h; }

    /// True when no sample is NaN or infinite.
    bool all_finite() const;

    bool operator==(const ImageBuffer&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Per-pixel weight in [0, 1]. A pixel is "inside" when its weight is > 0.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, double fill = 1.0);
    Mask(int width, int height, std::vector<double> values);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return values_.size(); }

    double operator[](std::size_t i) const { return values_[i]; }
    double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int x, int y, double v);
    bool inside(std::size_t i) const { return values_[i] > 0.0; }
    bool inside(int x, int y) const { return at(x, y) > 0.0; }

    std::span<const double> values() const { return values_; }
    std::size_t count_inside() const;
    double weight_sum() const;

    bool matches(int w, int h) const { return width_ == w && height_ == h; }
    bool matches(const ImageBuffer& img) const { return matches(img.width(), img.height()); }

    /// Pixels whose 3x3 neighbourhood lies entirely inside the mask.
    Mask eroded() const;

    /// Single-channel image view of the mask.
    ImageBuffer to_image() const;
    static Mask from_image(const ImageBuffer& img);

    bool operator==(const Mask&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

/// Forward differences: dx[h,w] = buf[h,w+1] - buf[h,w], dy analogous.
/// The last column of dx and the last row of dy are zero.
std::pair<ImageBuffer, ImageBuffer> spatial_gradients(const ImageBuffer& buffer);

/// Luminance (Rec. 709 weights) of a 3-channel buffer; 1-channel input is copied.
ImageBuffer luminance(const ImageBuffer& buffer);

}  // namespace relit
