#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hrseg/core.hpp"

namespace hrseg {

/// Single-channel H×W field of reals, row-major.
struct Field {
  Extent extent;
  std::vector<double> values;

  Field() = default;
  Field(Extent e, double fill = 0.0) : extent(e), values(e.pixels(), fill) {}
  Field(Extent e, std::vector<double> v) : extent(e), values(std::move(v)) {
    if (values.size() != extent.pixels()) throw Error(ErrorCode::ShapeMismatch, "field size does not match extent");
  }

  double at(std::size_t y, std::size_t x) const { return values[y * extent.width + x]; }
  double& at(std::size_t y, std::size_t x) { return values[y * extent.width + x]; }
};

/// Mirror index without repeating the edge sample (d c b | a b c d | c b a),
/// folded repeatedly so offsets larger than the axis still land inside it.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

inline std::size_t gaussian_radius(double sigma) { return static_cast<std::size_t>(std::ceil(3.0 * sigma)); }

/// Sampled Gaussian of radius ceil(3 sigma), normalized to unit mass.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0.0 || std::isnan(sigma)) throw Error(ErrorCode::NegativeSigma, "sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const std::size_t r = gaussian_radius(sigma);
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(r);
    k[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with reflect padding; sigma = 0 is the identity.
inline Field gaussian_smooth(const Field& field, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  if (sigma == 0.0) return field;
  const auto r = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const std::size_t H = field.extent.height;
  const std::size_t W = field.extent.width;

  Field rows(field.extent);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d) {
        acc += kernel[static_cast<std::size_t>(d + r)] *
               field.at(y, reflect_index(static_cast<std::ptrdiff_t>(x) + d, W));
      }
      rows.at(y, x) = acc;
    }
  }
  Field out(field.extent);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -r; d <= r; ++d) {
        acc += kernel[static_cast<std::size_t>(d + r)] *
               rows.at(reflect_index(static_cast<std::ptrdiff_t>(y) + d, H), x);
      }
      out.at(y, x) = acc;
    }
  }
  return out;
}

}  // namespace hrseg
