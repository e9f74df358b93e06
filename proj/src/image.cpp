#include "relit/image.hpp"

#include <algorithm>
#include <cmath>

#include "relit/error.hpp"

namespace relit {

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
        throw InvalidInput("ImageBuffer: invalid dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width < 0 || height < 0 || channels < 1 ||
        data_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw InvalidInput("ImageBuffer: data length does not match width x height x channels");
    }
}

bool ImageBuffer::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mask::Mask(int width, int height, double fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InvalidInput("Mask: invalid dimensions");
    values_.assign(static_cast<std::size_t>(width) * height, std::clamp(fill, 0.0, 1.0));
}

Mask::Mask(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(width) * height) {
        throw InvalidInput("Mask: value count does not match width x height");
    }
    for (double& v : values_) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
}

void Mask::set(int x, int y, double v) {
    values_[static_cast<std::size_t>(y) * width_ + x] = std::clamp(v, 0.0, 1.0);
}

std::size_t Mask::count_inside() const {
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](double v) { return v > 0.0; }));
}

double Mask::weight_sum() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
}

Mask Mask::eroded() const {
    Mask out(width_, height_, 0.0);
    for (int y = 1; y + 1 < height_; ++y) {
        for (int x = 1; x + 1 < width_; ++x) {
            bool keep = true;
            for (int dy = -1; dy <= 1 && keep; ++dy)
                for (int dx = -1; dx <= 1 && keep; ++dx) keep = inside(x + dx, y + dy);
            if (keep) out.set(x, y, at(x, y));
        }
    }
    return out;
}

ImageBuffer Mask::to_image() const {
    return ImageBuffer(width_, height_, 1, values_);
}

Mask Mask::from_image(const ImageBuffer& img) {
    if (img.channels() == 1) return Mask(img.width(), img.height(), {img.data().begin(), img.data().end()});
    return Mask::from_image(luminance(img));
}

std::pair<ImageBuffer, ImageBuffer> spatial_gradients(const ImageBuffer& buf) {
    if (buf.width() < 2 || buf.height() < 2) {
        throw InvalidInput("spatial_gradients: buffer must be at least 2x2");
    }
    const int w = buf.width(), h = buf.height(), ch = buf.channels();
    ImageBuffer dx(w, h, ch), dy(w, h, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                if (x + 1 < w) dx.at(x, y, c) = buf.at(x + 1, y, c) - buf.at(x, y, c);
                if (y + 1 < h) dy.at(x, y, c) = buf.at(x, y + 1, c) - buf.at(x, y, c);
            }
        }
    }
    return {std::move(dx), std::move(dy)};
}

ImageBuffer luminance(const ImageBuffer& buf) {
    if (buf.channels() == 1) return buf;
    if (buf.channels() != 3) throw InvalidInput("luminance: expected 1 or 3 channels");
    ImageBuffer out(buf.width(), buf.height(), 1);
    for (std::size_t p = 0; p < buf.pixel_count(); ++p) {
        out[p] = 0.2126 * buf[3 * p] + 0.7152 * buf[3 * p + 1] + 0.0722 * buf[3 * p + 2];
    }
    return out;
}

}  // namespace relit
