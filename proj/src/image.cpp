#include "dfdm/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "dfdm/errors.hpp"

namespace dfdm {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

Tensor<float> from_rgb8(const std::vector<std::uint8_t>& rgb, std::size_t h, std::size_t w) {
    Tensor<float> out({h, w, 3});
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(rgb[i]) / 255.0f;
    return out;
}

// --- PPM ---------------------------------------------------------------

struct PpmHeaderReader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    // Skips whitespace and '#' comment lines between header tokens.
    std::string token() {
        while (pos < bytes.size()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
        std::string t;
        while (pos < bytes.size() &&
               !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            t += static_cast<char>(bytes[pos++]);
        }
        return t;
    }
};

Tensor<float> decode_ppm(const std::vector<std::uint8_t>& bytes,
                         const std::filesystem::path& path) {
    PpmHeaderReader rd{bytes};
    const std::string magic = rd.token();
    const bool gray = magic == "P5";
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(rd.token());
        h = std::stoul(rd.token());
        maxval = std::stoul(rd.token());
    } catch (const std::exception&) {
        throw DataError("malformed PPM header: " + path.string());
    }
    if (w == 0 || h == 0) throw DataError("degenerate PPM extents: " + path.string());
    if (maxval != 255) {
        throw DataError("unsupported PPM maxval " + std::to_string(maxval) + ": " +
                        path.string());
    }
    // Exactly one whitespace byte separates the header from the raster.
    rd.pos += 1;
    const std::size_t channels = gray ? 1 : 3;
    const std::size_t need = w * h * channels;
    if (rd.pos + need > bytes.size()) {
        throw DataError("PPM raster is truncated: " + path.string());
    }
    Tensor<float> out({h, w, 3});
    for (std::size_t i = 0; i < w * h; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t src = gray ? i : i * 3 + c;
            out[i * 3 + c] = static_cast<float>(bytes[rd.pos + src]) / 255.0f;
        }
    }
    return out;
}

// --- PNG (libpng simplified API) ----------------------------------------

Tensor<float> decode_png(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
        throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw DataError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return from_rgb8(rgb, img.height, img.width);
}

// --- JPEG (libjpeg) ------------------------------------------------------

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    JpegErrorMgr* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(err->jump, 1);
}

Tensor<float> decode_jpeg(const std::vector<std::uint8_t>& bytes,
                          const std::filesystem::path& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError("cannot decode JPEG: " + path.string());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const std::size_t w = cinfo.output_width, h = cinfo.output_height;
    std::vector<std::uint8_t> rgb(w * h * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return from_rgb8(rgb, h, w);
}

std::vector<std::uint8_t> to_rgb8(const Tensor<float>& image) {
    if (image.rank() != 3 || image.extent(2) != 3) {
        throw ShapeError("image encoder expects HxWx3, got " + shape_str(image.shape()));
    }
    std::vector<std::uint8_t> rgb(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const float v = std::clamp(image[i], 0.0f, 1.0f);
        rgb[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return rgb;
}

float sample_clamped(const Tensor<float>& img, double sy, double sx, std::size_t c) {
    const std::size_t h = img.extent(0), w = img.extent(1);
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    const std::size_t y0 = static_cast<std::size_t>(sy);
    const std::size_t x0 = static_cast<std::size_t>(sx);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const std::size_t x1 = std::min(x0 + 1, w - 1);
    const float fy = static_cast<float>(sy - static_cast<double>(y0));
    const float fx = static_cast<float>(sx - static_cast<double>(x0));
    const float top = (1.0f - fx) * img(y0, x0, c) + fx * img(y0, x1, c);
    const float bot = (1.0f - fx) * img(y1, x0, c) + fx * img(y1, x1, c);
    return (1.0f - fy) * top + fy * bot;
}

}  // namespace

void AugmentConfig::validate() const {
    if (flip_prob < 0.0 || flip_prob > 1.0)
        throw ConfigError("flip_prob " + std::to_string(flip_prob) + " outside [0,1]");
    if (shear_max < 0.0)
        throw ConfigError("shear_max must be nonnegative, got " + std::to_string(shear_max));
    if (!(zoom_lo <= 1.0 && 1.0 <= zoom_hi))
        throw ConfigError("zoom range [" + std::to_string(zoom_lo) + ", " +
                          std::to_string(zoom_hi) + "] must bracket 1.0");
}

Tensor<float> decode_image(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    if (bytes.size() < 2) throw DataError("image file is empty or unreadable: " + path.string());
    if (bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) return decode_ppm(bytes, path);
    if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' &&
        bytes[3] == 'G') {
        return decode_png(path);
    }
    if (bytes[0] == 0xFF && bytes[1] == 0xD8) return decode_jpeg(bytes, path);
    throw DataError("unrecognized image format: " + path.string());
}

Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t out_h, std::size_t out_w) {
    if (image.rank() != 3 || image.extent(2) != 3) {
        throw ShapeError("resize expects HxWx3, got " + shape_str(image.shape()));
    }
    if (out_h == 0 || out_w == 0) throw ShapeError("resize target must be at least 1x1");
    const std::size_t h = image.extent(0), w = image.extent(1);
    if (out_h == h && out_w == w) return image;
    const double sy = out_h > 1 ? static_cast<double>(h - 1) / static_cast<double>(out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(w - 1) / static_cast<double>(out_w - 1) : 0.0;
    Tensor<float> out({out_h, out_w, 3});
    for (std::size_t y = 0; y < out_h; ++y)
        for (std::size_t x = 0; x < out_w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                out(y, x, c) = sample_clamped(image, y * sy, x * sx, c);
    return out;
}

Tensor<float> hflip(const Tensor<float>& image) {
    const std::size_t h = image.extent(0), w = image.extent(1), c = image.extent(2);
    Tensor<float> out(image.shape());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ci = 0; ci < c; ++ci) out(y, x, ci) = image(y, w - 1 - x, ci);
    return out;
}

Tensor<float> augment_image(const Tensor<float>& image, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    const bool flip = rng.next_double() < cfg.flip_prob;
    const double shear = rng.uniform(-cfg.shear_max, cfg.shear_max);
    const double zoom = rng.uniform(cfg.zoom_lo, cfg.zoom_hi);

    if (shear == 0.0 && zoom == 1.0) return flip ? hflip(image) : image;

    const std::size_t h = image.extent(0), w = image.extent(1);
    const double cy = static_cast<double>(h - 1) / 2.0;
    const double cx = static_cast<double>(w - 1) / 2.0;
    Tensor<float> out(image.shape());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            // Invert zoom, then shear, then flip to find the source point.
            double yc = (static_cast<double>(y) - cy) / zoom;
            double xc = (static_cast<double>(x) - cx) / zoom;
            xc -= shear * yc;
            if (flip) xc = -xc;
            for (std::size_t c = 0; c < 3; ++c) {
                out(y, x, c) = std::clamp(sample_clamped(image, yc + cy, xc + cx, c), 0.0f, 1.0f);
            }
        }
    }
    return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor<float>& image) {
    const std::vector<std::uint8_t> rgb = to_rgb8(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write PPM: " + path.string());
    out << "P6\n" << image.extent(1) << ' ' << image.extent(0) << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!out) throw DataError("short write: " + path.string());
}

void write_png(const std::filesystem::path& path, const Tensor<float>& image) {
    const std::vector<std::uint8_t> rgb = to_rgb8(image);
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.extent(1));
    img.height = static_cast<png_uint_32>(image.extent(0));
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, rgb.data(), 0, nullptr)) {
        throw DataError("cannot write PNG " + path.string() + ": " + img.message);
    }
}

void write_jpeg(const std::filesystem::path& path, const Tensor<float>& image, int quality) {
    const std::vector<std::uint8_t> rgb = to_rgb8(image);
    jpeg_compress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw DataError("cannot write JPEG: " + path.string());
    if (setjmp(jerr.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::fclose(f);
        throw DataError("cannot encode JPEG: " + path.string());
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = static_cast<JDIMENSION>(image.extent(1));
    cinfo.image_height = static_cast<JDIMENSION>(image.extent(0));
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const std::size_t stride = image.extent(1) * 3;
    std::vector<std::uint8_t> rowbuf(stride);
    while (cinfo.next_scanline < cinfo.image_height) {
        std::memcpy(rowbuf.data(), rgb.data() + cinfo.next_scanline * stride, stride);
        JSAMPROW row = rowbuf.data();
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
}

}  // namespace dfdm
