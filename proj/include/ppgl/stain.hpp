#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ppgl/case_model.hpp"

namespace ppgl {

// Row-major RGB raster, channel values in [0,1].
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // 3 doubles per pixel, r g b interleaved

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// Same shape, per-pixel (L,a,b).
struct LabImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // 3 doubles per pixel, L a b interleaved
};

struct TissueMask {
  int width = 0;
  int height = 0;
  std::vector<bool> flags;  // row-major, true = tissue

  std::size_t tissue_count() const;
};

void validate(const RasterImage& image);

inline constexpr double kDefaultTissueLuminanceThreshold = 85.0;
inline constexpr double kDefaultStainEpsilon = 1e-6;

// Scalar sRGB(D65) <-> CIELAB conversions; inputs in [0,1], L in [0,100].
void srgb_to_lab(double r, double g, double b, double& L, double& a, double& b_out);
void lab_to_srgb(double L, double a, double b, double& r, double& g, double& b_out);

LabImage rgb_to_lab(const RasterImage& image);
// Out-of-gamut results are clamped to [0,1].
RasterImage lab_to_rgb(const LabImage& lab);

// Tissue = pixels with L below the threshold (H&E background is near-white).
TissueMask tissue_mask(const LabImage& lab, double luminance_threshold);
TissueMask tissue_mask(const RasterImage& image, double luminance_threshold);

// Per-channel mean and population std over masked pixels. Requires at
// least two tissue pixels; throws std::runtime_error otherwise.
StainStats compute_stain_stats(const LabImage& lab, const TissueMask& mask);

// Per-channel affine alignment: sigma_tgt * (v - mu_src) / (sigma_src + eps) + mu_tgt.
// Degenerate channels (sigma_src + eps == 0) map to the target mean.
double align_channel_value(double value, double mu_src, double sigma_src, double mu_tgt,
                           double sigma_tgt, double epsilon);

// LAB-space core of the normalization: statistics from tissue pixels, the
// affine map applied image-wide. No gamut clamping happens here.
LabImage normalize_lab(const LabImage& lab, const TissueMask& mask, const StainStats& target,
                       double epsilon);

// Full pipeline: RGB -> LAB, mask, align, back to RGB (clamped).
RasterImage normalize(const RasterImage& image, const StainStats& target,
                      double epsilon = kDefaultStainEpsilon,
                      double luminance_threshold = kDefaultTissueLuminanceThreshold);

// Plain-text debug format: "width height" on the first line, then one
// "r g b" line per pixel with full round-trip precision.
void write_raster_text(const RasterImage& image, const std::string& path);
RasterImage read_raster_text(const std::string& path);

}  // namespace ppgl
