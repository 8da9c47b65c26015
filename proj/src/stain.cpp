#include "ppgl/stain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ppgl/numeric.hpp"

namespace ppgl {

namespace {

// sRGB primaries / D65. The inverse is computed from the forward matrix so
// the round trip closes to machine precision.
constexpr double kRgbToXyz[3][3] = {
    {0.41239079926595934, 0.357584339383878, 0.1804807884018343},
    {0.21263900587151027, 0.715168678767756, 0.07219231536073371},
    {0.01933081871559182, 0.11919477979462598, 0.9505321522496607}};

struct XyzToRgb {
  double m[3][3];
  XyzToRgb() {
    const auto& a = kRgbToXyz;
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
    m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
    m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
    m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
    m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
    m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
    m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
    m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  }
};

const XyzToRgb kXyzToRgb{};

constexpr double kWhiteX = kRgbToXyz[0][0] + kRgbToXyz[0][1] + kRgbToXyz[0][2];
constexpr double kWhiteY = kRgbToXyz[1][0] + kRgbToXyz[1][1] + kRgbToXyz[1][2];
constexpr double kWhiteZ = kRgbToXyz[2][0] + kRgbToXyz[2][1] + kRgbToXyz[2][2];

constexpr double kDelta = 6.0 / 29.0;
constexpr double kDelta3 = kDelta * kDelta * kDelta;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? c * 12.92 : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta3 ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double f) {
  return f > kDelta ? f * f * f : 3.0 * kDelta * kDelta * (f - 4.0 / 29.0);
}

}  // namespace

void validate(const RasterImage& image) {
  if (image.width <= 0 || image.height <= 0)
    throw std::invalid_argument("image: width and height must be positive");
  if (image.pixels.size() != image.pixel_count() * 3)
    throw std::invalid_argument("image: pixel array size does not match width*height");
  for (double v : image.pixels)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("image: channel values must lie in [0,1]");
}

std::size_t TissueMask::tissue_count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

void srgb_to_lab(double r, double g, double b, double& L, double& a, double& b_out) {
  const double rl = srgb_to_linear(r);
  const double gl = srgb_to_linear(g);
  const double bl = srgb_to_linear(b);
  const double x = kRgbToXyz[0][0] * rl + kRgbToXyz[0][1] * gl + kRgbToXyz[0][2] * bl;
  const double y = kRgbToXyz[1][0] * rl + kRgbToXyz[1][1] * gl + kRgbToXyz[1][2] * bl;
  const double z = kRgbToXyz[2][0] * rl + kRgbToXyz[2][1] * gl + kRgbToXyz[2][2] * bl;
  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  L = 116.0 * fy - 16.0;
  a = 500.0 * (fx - fy);
  b_out = 200.0 * (fy - fz);
}

void lab_to_srgb(double L, double a, double b, double& r, double& g, double& b_out) {
  const double fy = (L + 16.0) / 116.0;
  const double fx = fy + a / 500.0;
  const double fz = fy - b / 200.0;
  const double x = kWhiteX * lab_f_inv(fx);
  const double y = kWhiteY * lab_f_inv(fy);
  const double z = kWhiteZ * lab_f_inv(fz);
  const double rl = kXyzToRgb.m[0][0] * x + kXyzToRgb.m[0][1] * y + kXyzToRgb.m[0][2] * z;
  const double gl = kXyzToRgb.m[1][0] * x + kXyzToRgb.m[1][1] * y + kXyzToRgb.m[1][2] * z;
  const double bl = kXyzToRgb.m[2][0] * x + kXyzToRgb.m[2][1] * y + kXyzToRgb.m[2][2] * z;
  r = std::clamp(linear_to_srgb(rl), 0.0, 1.0);
  g = std::clamp(linear_to_srgb(gl), 0.0, 1.0);
  b_out = std::clamp(linear_to_srgb(bl), 0.0, 1.0);
}

LabImage rgb_to_lab(const RasterImage& image) {
  validate(image);
  LabImage lab{image.width, image.height, std::vector<double>(image.pixels.size())};
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    srgb_to_lab(image.pixels[3 * i], image.pixels[3 * i + 1], image.pixels[3 * i + 2],
                lab.values[3 * i], lab.values[3 * i + 1], lab.values[3 * i + 2]);
  }
  return lab;
}

RasterImage lab_to_rgb(const LabImage& lab) {
  RasterImage image{lab.width, lab.height, std::vector<double>(lab.values.size())};
  const std::size_t n = static_cast<std::size_t>(lab.width) * lab.height;
  for (std::size_t i = 0; i < n; ++i) {
    lab_to_srgb(lab.values[3 * i], lab.values[3 * i + 1], lab.values[3 * i + 2],
                image.pixels[3 * i], image.pixels[3 * i + 1], image.pixels[3 * i + 2]);
  }
  return image;
}

TissueMask tissue_mask(const LabImage& lab, double luminance_threshold) {
  if (!(luminance_threshold > 0.0 && luminance_threshold < 100.0))
    throw std::invalid_argument("tissue_mask: luminance_threshold must be in (0,100)");
  const std::size_t n = static_cast<std::size_t>(lab.width) * lab.height;
  TissueMask mask{lab.width, lab.height, std::vector<bool>(n, false)};
  for (std::size_t i = 0; i < n; ++i) mask.flags[i] = lab.values[3 * i] < luminance_threshold;
  return mask;
}

TissueMask tissue_mask(const RasterImage& image, double luminance_threshold) {
  return tissue_mask(rgb_to_lab(image), luminance_threshold);
}

StainStats compute_stain_stats(const LabImage& lab, const TissueMask& mask) {
  if (mask.width != lab.width || mask.height != lab.height)
    throw std::invalid_argument("compute_stain_stats: mask dimensions do not match image");
  const std::size_t tissue = mask.tissue_count();
  if (tissue < 2)
    throw std::runtime_error("compute_stain_stats: fewer than 2 tissue pixels (no tissue found)");

  const std::size_t n = static_cast<std::size_t>(lab.width) * lab.height;
  std::array<KahanSum, 3> sums;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.flags[i]) continue;
    for (int c = 0; c < 3; ++c) sums[c].add(lab.values[3 * i + c]);
  }
  const double count = static_cast<double>(tissue);
  const double mean_l = sums[0].value() / count;
  const double mean_a = sums[1].value() / count;
  const double mean_b = sums[2].value() / count;

  std::array<KahanSum, 3> sq;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.flags[i]) continue;
    const double dl = lab.values[3 * i] - mean_l;
    const double da = lab.values[3 * i + 1] - mean_a;
    const double db = lab.values[3 * i + 2] - mean_b;
    sq[0].add(dl * dl);
    sq[1].add(da * da);
    sq[2].add(db * db);
  }
  StainStats s;
  s.mean_l = mean_l;
  s.mean_a = mean_a;
  s.mean_b = mean_b;
  s.std_l = std::sqrt(sq[0].value() / count);
  s.std_a = std::sqrt(sq[1].value() / count);
  s.std_b = std::sqrt(sq[2].value() / count);
  return s;
}

double align_channel_value(double value, double mu_src, double sigma_src, double mu_tgt,
                           double sigma_tgt, double epsilon) {
  const double denom = sigma_src + epsilon;
  if (denom <= 0.0) return mu_tgt;
  return sigma_tgt * (value - mu_src) / denom + mu_tgt;
}

LabImage normalize_lab(const LabImage& lab, const TissueMask& mask, const StainStats& target,
                       double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("normalize: epsilon must be >= 0");
  validate(target);
  const StainStats src = compute_stain_stats(lab, mask);
  const double mu_src[3] = {src.mean_l, src.mean_a, src.mean_b};
  const double sd_src[3] = {src.std_l, src.std_a, src.std_b};
  const double mu_tgt[3] = {target.mean_l, target.mean_a, target.mean_b};
  const double sd_tgt[3] = {target.std_l, target.std_a, target.std_b};

  LabImage out{lab.width, lab.height, std::vector<double>(lab.values.size())};
  const std::size_t n = static_cast<std::size_t>(lab.width) * lab.height;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      out.values[3 * i + c] =
          align_channel_value(lab.values[3 * i + c], mu_src[c], sd_src[c], mu_tgt[c], sd_tgt[c], epsilon);
    }
  }
  return out;
}

RasterImage normalize(const RasterImage& image, const StainStats& target, double epsilon,
                      double luminance_threshold) {
  const LabImage lab = rgb_to_lab(image);
  const TissueMask mask = tissue_mask(lab, luminance_threshold);
  return lab_to_rgb(normalize_lab(lab, mask, target, epsilon));
}

void write_raster_text(const RasterImage& image, const std::string& path) {
  validate(image);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_raster_text: cannot open " + path);
  out.precision(17);
  out << image.width << ' ' << image.height << '\n';
  for (std::size_t i = 0; i < image.pixel_count(); ++i)
    out << image.pixels[3 * i] << ' ' << image.pixels[3 * i + 1] << ' ' << image.pixels[3 * i + 2] << '\n';
  if (!out) throw std::runtime_error("write_raster_text: write to " + path + " failed");
}

RasterImage read_raster_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_raster_text: cannot open " + path);
  RasterImage image;
  if (!(in >> image.width >> image.height))
    throw std::runtime_error("read_raster_text: bad header in " + path);
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  for (double& v : image.pixels) {
    if (!(in >> v)) throw std::runtime_error("read_raster_text: truncated pixel data in " + path);
  }
  validate(image);
  return image;
}

}  // namespace ppgl
