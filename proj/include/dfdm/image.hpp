#pragma once

#include <filesystem>

#include "dfdm/rng.hpp"
#include "dfdm/tensor.hpp"

namespace dfdm {

/// Train-time augmentation knobs. Transforms compose as flip, then shear
/// (x' = x + s*y about the center), then zoom about the center; out-of-bounds
/// samples clamp to the nearest edge pixel and resampling is bilinear.
struct AugmentConfig {
    double flip_prob = 0.5;
    double shear_max = 0.2;
    double zoom_lo = 0.8;
    double zoom_hi = 1.2;

    void validate() const;
};

/// Decodes PPM (P6/P5), PNG or JPEG by sniffing the leading bytes. Returns an
/// HxWx3 tensor with channels in [0,1] (v/255); grayscale sources are
/// replicated across the three channels.
Tensor<float> decode_image(const std::filesystem::path& path);

/// Bilinear resize with the corner-aligned convention: source coordinate is
/// dst * (in-1)/(out-1), so the four corners map exactly. Resizing to the
/// same extents is the bit-exact identity.
Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t out_h, std::size_t out_w);

/// Exact horizontal mirror (column reversal).
Tensor<float> hflip(const Tensor<float>& image);

/// Applies one random augmentation draw: flip decision, shear factor and zoom
/// factor are always drawn in that order so the rng stream does not depend on
/// the knob values. Output pixels are clamped to [0,1].
Tensor<float> augment_image(const Tensor<float>& image, const AugmentConfig& cfg, Rng& rng);

// 8-bit encoders, used by the synthetic fixtures and round-trip tests.
void write_ppm(const std::filesystem::path& path, const Tensor<float>& image);
void write_png(const std::filesystem::path& path, const Tensor<float>& image);
void write_jpeg(const std::filesystem::path& path, const Tensor<float>& image, int quality = 95);

}  // namespace dfdm
