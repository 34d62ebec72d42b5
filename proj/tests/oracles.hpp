#pragma once

// Slow, direct re-derivations used to cross-check the library. They share
// only data types with the code under test.

#include <cmath>
#include <optional>
#include <vector>

#include "hrseg/hrseg.hpp"

namespace hrseg::oracle {

struct Counts {
  std::uint64_t tp = 0, fp = 0, fn = 0, support = 0;
};

/// Per class, one pass over every pixel counting TP / FP / FN directly.
inline std::vector<Counts> class_counts(const LabelMap& pred, const LabelMap& gt, std::size_t C, ClassId ignore) {
  std::vector<Counts> out(C);
  for (std::size_t k = 0; k < C; ++k) {
    const auto kk = static_cast<ClassId>(k);
    for (std::size_t y = 0; y < gt.height(); ++y) {
      for (std::size_t x = 0; x < gt.width(); ++x) {
        const ClassId g = gt.at(y, x), p = pred.at(y, x);
        if (g == ignore) continue;
        if (g == kk) ++out[k].support;
        if (g == kk && p == kk) ++out[k].tp;
        if (g != kk && p == kk) ++out[k].fp;
        if (g == kk && p != kk) ++out[k].fn;
      }
    }
  }
  return out;
}

inline std::optional<double> safe_div(std::uint64_t a, std::uint64_t b) {
  if (b == 0) return std::nullopt;
  return static_cast<double>(a) / static_cast<double>(b);
}

/// Full 2-D Gaussian (outer product of the 1-D taps) with mirrored borders
/// computed by explicit reflection, summed in one pass per output pixel.
inline std::vector<double> dense_gaussian(const std::vector<double>& field, std::size_t H, std::size_t W,
                                          double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * r + 1);
  double mass = 0.0;
  for (int d = -r; d <= r; ++d) {
    taps[d + r] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    mass += taps[d + r];
  }
  for (auto& t : taps) t /= mass;
  auto mirror = [](int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
  };
  std::vector<double> out(H * W, 0.0);
  for (int y = 0; y < static_cast<int>(H); ++y) {
    for (int x = 0; x < static_cast<int>(W); ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          acc += taps[dy + r] * taps[dx + r] *
                 field[mirror(y + dy, static_cast<int>(H)) * W + mirror(x + dx, static_cast<int>(W))];
        }
      }
      out[y * W + x] = acc;
    }
  }
  return out;
}

/// Importance loss written out group by group from logits, with the three
/// multipliers supplied from outside (frozen).
inline double frozen_importance_objective(const std::vector<double>& logits, std::size_t C, const LabelMap& gt,
                                          const std::vector<std::size_t>& group_of_class,
                                          const std::vector<double>& multipliers, ClassId ignore) {
  std::vector<double> sum(multipliers.size(), 0.0);
  std::vector<double> count(multipliers.size(), 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore) continue;
    double zmax = logits[i * C];
    for (std::size_t k = 1; k < C; ++k) zmax = std::max(zmax, logits[i * C + k]);
    double z = 0.0;
    for (std::size_t k = 0; k < C; ++k) z += std::exp(logits[i * C + k] - zmax);
    const double logp = logits[i * C + static_cast<std::size_t>(gt[i])] - zmax - std::log(z);
    const std::size_t g = group_of_class[static_cast<std::size_t>(gt[i])];
    sum[g] -= logp;
    count[g] += 1.0;
  }
  double total = 0.0;
  for (std::size_t g = 0; g < multipliers.size(); ++g) {
    if (count[g] > 0.0) total += multipliers[g] * sum[g] / count[g];
  }
  return total;
}

/// Plain triple-loop matrix product.
inline std::vector<std::vector<double>> matmul(const std::vector<std::vector<double>>& a,
                                               const std::vector<std::vector<double>>& b) {
  std::vector<std::vector<double>> out(a.size(), std::vector<double>(b.front().size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.front().size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline std::vector<std::vector<double>> rows_of(const Matrix& m) {
  std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

/// Dense GCN: row-normalize A + I-if-missing, then leaky(Â H W) per layer,
/// last layer linear.
inline std::vector<std::vector<double>> gcn(std::vector<std::vector<double>> adjacency,
                                            std::vector<std::vector<double>> h,
                                            const std::vector<std::vector<std::vector<double>>>& layers,
                                            double slope) {
  const std::size_t n = adjacency.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency[i][i] == 0.0) adjacency[i][i] = 1.0;
    double s = 0.0;
    for (double v : adjacency[i]) s += v;
    for (double& v : adjacency[i]) v /= s;
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = matmul(matmul(adjacency, h), layers[l]);
    if (l + 1 < layers.size()) {
      for (auto& row : h)
        for (auto& v : row) v = v < 0.0 ? slope * v : v;
    }
  }
  return h;
}

}  // namespace hrseg::oracle
