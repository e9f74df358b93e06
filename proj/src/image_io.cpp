#include "relit/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "relit/error.hpp"

namespace relit {

namespace fs = std::filesystem;

double srgb_to_linear(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

namespace {

std::string lower_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PNG

struct PngReadSource {
    const std::vector<std::uint8_t>* bytes;
    std::size_t offset;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t length) {
    auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
    if (src->offset + length > src->bytes->size()) png_error(png, "truncated PNG stream");
    std::memcpy(out, src->bytes->data() + src->offset, length);
    src->offset += length;
}

void png_write_callback(png_structp png, png_bytep data, png_size_t length) {
    auto* dst = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    dst->insert(dst->end(), data, data + length);
}

void png_flush_callback(png_structp) {}

[[noreturn]] void png_error_callback(png_structp, png_const_charp msg) { throw IoError(std::string("PNG: ") + msg); }

void png_warning_callback(png_structp, png_const_charp) {}

std::uint8_t quantize8(double v, Transfer transfer) {
    v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    if (transfer == Transfer::Srgb) v = linear_to_srgb(v);
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

// ---------------------------------------------------------------------------
// PFM

ImageBuffer decode_pfm(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
        return t;
    };
    const std::string magic = token();
    int channels = 0;
    if (magic == "PF") channels = 3;
    else if (magic == "Pf") channels = 1;
    else throw IoError("not a PFM file: " + path.string());
    int width = 0, height = 0;
    double scale = 0.0;
    try {
        width = std::stoi(token());
        height = std::stoi(token());
        scale = std::stod(token());
    } catch (const std::exception&) {
        throw IoError("malformed PFM header: " + path.string());
    }
    ++pos;  // single whitespace after the scale
    if (width <= 0 || height <= 0) throw IoError("PFM has zero dimension: " + path.string());
    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() < pos + count * 4) throw IoError("truncated PFM data: " + path.string());
    const bool little = scale < 0.0;
    ImageBuffer img(width, height, channels);
    for (int row = 0; row < height; ++row) {
        const int y = height - 1 - row;
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                std::array<std::uint8_t, 4> b{};
                std::memcpy(b.data(), bytes.data() + pos, 4);
                pos += 4;
                if (little != (std::endian::native == std::endian::little)) std::reverse(b.begin(), b.end());
                float f = 0.0f;
                std::memcpy(&f, b.data(), 4);
                img.at(x, y, c) = f;
            }
        }
    }
    return img;
}

void write_pfm(const ImageBuffer& img, const fs::path& path) {
    if (img.channels() != 1 && img.channels() != 3) {
        throw InvalidInput("PFM supports 1 or 3 channels: " + path.string());
    }
    std::ostringstream header;
    header << (img.channels() == 3 ? "PF" : "Pf") << "\n" << img.width() << " " << img.height() << "\n-1.0\n";
    std::string out = header.str();
    const std::size_t header_len = out.size();
    out.resize(header_len + img.size() * 4);
    std::size_t pos = header_len;
    for (int row = 0; row < img.height(); ++row) {
        const int y = img.height() - 1 - row;
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                const float f = static_cast<float>(img.at(x, y, c));
                std::array<std::uint8_t, 4> b{};
                std::memcpy(b.data(), &f, 4);
                if constexpr (std::endian::native != std::endian::little) std::reverse(b.begin(), b.end());
                std::memcpy(out.data() + pos, b.data(), 4);
                pos += 4;
            }
        }
    }
    write_file(path, out.data(), out.size());
}

// ---------------------------------------------------------------------------
// Radiance RGBE

std::array<std::uint8_t, 4> float_to_rgbe(double r, double g, double b) {
    const double v = std::max({r, g, b});
    if (v < 1e-32) return {0, 0, 0, 0};
    int e = 0;
    const double m = std::frexp(v, &e) * 256.0 / v;
    return {static_cast<std::uint8_t>(std::max(0.0, r) * m), static_cast<std::uint8_t>(std::max(0.0, g) * m),
            static_cast<std::uint8_t>(std::max(0.0, b) * m), static_cast<std::uint8_t>(e + 128)};
}

ImageBuffer decode_hdr(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
    std::size_t pos = 0;
    auto line = [&]() {
        std::string s;
        while (pos < bytes.size() && bytes[pos] != '\n') s.push_back(static_cast<char>(bytes[pos++]));
        if (pos < bytes.size()) ++pos;
        return s;
    };
    const std::string magic = line();
    if (magic.rfind("#?", 0) != 0) throw IoError("not a Radiance HDR file: " + path.string());
    for (std::string l = line(); !l.empty(); l = line()) {
        if (l.rfind("FORMAT=", 0) == 0 && l != "FORMAT=32-bit_rle_rgbe") {
            throw IoError("unsupported HDR pixel format " + l + ": " + path.string());
        }
        if (pos >= bytes.size()) throw IoError("truncated HDR header: " + path.string());
    }
    const std::string res = line();
    char ys[3] = {}, xs[3] = {};
    int width = 0, height = 0;
    if (std::sscanf(res.c_str(), "%2s %d %2s %d", ys, &height, xs, &width) != 4 || std::string(ys) != "-Y" ||
        std::string(xs) != "+X") {
        throw IoError("unsupported HDR orientation '" + res + "': " + path.string());
    }
    if (width <= 0 || height <= 0) throw IoError("HDR has zero dimension: " + path.string());

    ImageBuffer img(width, height, 3);
    std::vector<std::uint8_t> scan(static_cast<std::size_t>(width) * 4);
    auto need = [&](std::size_t n) {
        if (pos + n > bytes.size()) throw IoError("truncated HDR data: " + path.string());
    };
    for (int y = 0; y < height; ++y) {
        need(4);
        const bool rle = width >= 8 && width < 32768 && bytes[pos] == 2 && bytes[pos + 1] == 2 &&
                         ((bytes[pos + 2] << 8) | bytes[pos + 3]) == width && !(bytes[pos + 2] & 0x80);
        if (rle) {
            pos += 4;
            for (int comp = 0; comp < 4; ++comp) {
                int x = 0;
                while (x < width) {
                    need(1);
                    int count = bytes[pos++];
                    if (count > 128) {
                        count -= 128;
                        need(1);
                        if (x + count > width) throw IoError("bad HDR run length: " + path.string());
                        const std::uint8_t v = bytes[pos++];
                        for (int i = 0; i < count; ++i) scan[4 * (x++) + comp] = v;
                    } else {
                        if (count == 0 || x + count > width) throw IoError("bad HDR run length: " + path.string());
                        need(count);
                        for (int i = 0; i < count; ++i) scan[4 * (x++) + comp] = bytes[pos++];
                    }
                }
            }
        } else {
            need(scan.size());
            std::memcpy(scan.data(), bytes.data() + pos, scan.size());
            pos += scan.size();
        }
        for (int x = 0; x < width; ++x) {
            const std::uint8_t* p = &scan[4 * x];
            const double f = p[3] == 0 ? 0.0 : std::ldexp(1.0, p[3] - (128 + 8));
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = p[c] * f;
        }
    }
    return img;
}

void write_hdr(const ImageBuffer& img, const fs::path& path) {
    if (img.channels() != 3 && img.channels() != 1) {
        throw InvalidInput("HDR supports 1 or 3 channels: " + path.string());
    }
    std::ostringstream header;
    header << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " << img.height() << " +X " << img.width() << "\n";
    std::string out = header.str();
    const int w = img.width();
    std::vector<std::uint8_t> scan(static_cast<std::size_t>(w) * 4);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < w; ++x) {
            const int c1 = img.channels() == 3 ? 1 : 0, c2 = img.channels() == 3 ? 2 : 0;
            const auto rgbe = float_to_rgbe(img.at(x, y, 0), img.at(x, y, c1), img.at(x, y, c2));
            std::memcpy(&scan[4 * x], rgbe.data(), 4);
        }
        if (w < 8 || w >= 32768) {
            out.append(reinterpret_cast<const char*>(scan.data()), scan.size());
            continue;
        }
        out.push_back(2);
        out.push_back(2);
        out.push_back(static_cast<char>(w >> 8));
        out.push_back(static_cast<char>(w & 0xff));
        for (int comp = 0; comp < 4; ++comp) {
            int x = 0;
            while (x < w) {
                // Find the next run of at least 3 identical bytes.
                int run_start = x, run_len = 0;
                while (run_start < w) {
                    run_len = 1;
                    while (run_len < 127 && run_start + run_len < w &&
                           scan[4 * (run_start + run_len) + comp] == scan[4 * run_start + comp]) {
                        ++run_len;
                    }
                    if (run_len >= 3) break;
                    run_start += run_len;
                }
                while (x < run_start) {
                    const int n = std::min(128, run_start - x);
                    out.push_back(static_cast<char>(n));
                    for (int i = 0; i < n; ++i) out.push_back(static_cast<char>(scan[4 * (x + i) + comp]));
                    x += n;
                }
                if (run_start < w) {
                    out.push_back(static_cast<char>(128 + run_len));
                    out.push_back(static_cast<char>(scan[4 * run_start + comp]));
                    x = run_start + run_len;
                }
            }
        }
    }
    write_file(path, out.data(), out.size());
}

}  // namespace

// ---------------------------------------------------------------------------

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes, Transfer transfer) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG stream");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_callback, png_warning_callback);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    PngReadSource src{&bytes, 0};
    png_set_read_fn(png, &src, png_read_callback);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (width == 0 || height == 0) throw IoError("PNG has zero dimension");

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);

    const int src_channels = png_get_channels(png, info);
    const int depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<std::uint8_t> raw(rowbytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * rowbytes;
    png_read_image(png, rows.data());

    const int channels = src_channels >= 3 ? 3 : 1;
    const double maxval = depth == 16 ? 65535.0 : 255.0;
    ImageBuffer img(static_cast<int>(width), static_cast<int>(height), channels);
    for (png_uint_32 y = 0; y < height; ++y) {
        for (png_uint_32 x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                const std::size_t i = static_cast<std::size_t>(x) * src_channels + c;
                double v = 0.0;
                if (depth == 16) {
                    std::uint16_t s = 0;
                    std::memcpy(&s, rows[y] + 2 * i, 2);
                    v = s / maxval;
                } else {
                    v = rows[y][i] / maxval;
                }
                img.at(static_cast<int>(x), static_cast<int>(y), c) = transfer == Transfer::Srgb ? srgb_to_linear(v) : v;
            }
        }
    }
    return img;
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img, Transfer transfer) {
    if (img.channels() != 1 && img.channels() != 3) throw InvalidInput("PNG export supports 1 or 3 channels");
    if (img.width() == 0 || img.height() == 0) throw InvalidInput("PNG export of empty image");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_callback, png_warning_callback);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    std::vector<std::uint8_t> out;
    png_set_write_fn(png, &out, png_write_callback, png_flush_callback);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
                 img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * img.channels());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < img.channels(); ++c)
                row[static_cast<std::size_t>(x) * img.channels() + c] = quantize8(img.at(x, y, c), transfer);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    return out;
}

ImageBuffer load_image(const fs::path& path, Transfer transfer) {
    if (!fs::exists(path)) throw IoError("file not found: " + path.string());
    const auto bytes = read_file(path);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) {
        try {
            return decode_png(bytes, transfer);
        } catch (const IoError& e) {
            throw IoError(std::string(e.what()) + ": " + path.string());
        }
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == 'F' || bytes[1] == 'f')) return decode_pfm(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == '#' && bytes[1] == '?') return decode_hdr(bytes, path);
    throw IoError("unsupported image format: " + path.string());
}

void save_image(const ImageBuffer& img, const fs::path& path, Transfer transfer) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        const auto bytes = encode_png(img, transfer);
        write_file(path, bytes.data(), bytes.size());
    } else if (ext == ".pfm") {
        write_pfm(img, path);
    } else if (ext == ".hdr") {
        write_hdr(img, path);
    } else {
        throw InvalidInput("unsupported output extension '" + ext + "': " + path.string());
    }
}

Mask load_mask(const fs::path& path) {
    return Mask::from_image(load_image(path, Transfer::Linear));
}

void save_mask(const Mask& mask, const fs::path& path) {
    save_image(mask.to_image(), path, Transfer::Linear);
}

}  // namespace relit
