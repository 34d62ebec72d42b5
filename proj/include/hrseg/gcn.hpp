#pragma once

// Class-graph construction from importance groups, graph convolution
// H' = act(A_hat H W) and use of the final GCN layer as a pixel classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hrseg/core.hpp"
#include "hrseg/io.hpp"
#include "hrseg/metrics.hpp"
#include "hrseg/random.hpp"

namespace hrseg {

inline constexpr double kDefaultLeakySlope = 0.01;

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw Error(ErrorCode::DimensionMismatch, "matrix data size mismatch");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Tensor to_tensor(const Matrix& m, DType dtype = DType::Float64) {
  return Tensor{dtype,
                {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
                std::vector<double>(m.values().begin(), m.values().end())};
}

inline Matrix matrix_from_tensor(Tensor t) {
  if (t.dims.size() != 2) {
    throw Error(ErrorCode::DimensionMismatch, "expected a rank-2 tensor, got rank " + std::to_string(t.dims.size()));
  }
  return Matrix(t.dims[0], t.dims[1], std::move(t.values));
}

/// Uniform entries in [lo, hi); for tests and smoke runs, never training.
inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -0.1,
                            double hi = 0.1) {
  SeededRng rng(seed);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

enum class AdjacencyNormalization { Row, Symmetric };

struct GraphSpec {
  std::size_t n = 0;
  Matrix adjacency;
  bool directed = true;

  /// Validates a square non-negative adjacency and adds missing self-loops.
  static GraphSpec from_adjacency(Matrix a, bool directed = true) {
    if (a.rows() != a.cols()) throw Error(ErrorCode::DimensionMismatch, "adjacency must be square");
    for (double v : a.values()) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::DomainError, "adjacency entries must be >= 0");
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
      if (a(i, i) == 0.0) a(i, i) = 1.0;
    }
    return GraphSpec{a.rows(), std::move(a), directed};
  }
};

/// Edge i -> j iff group(i) >= group(j): the most important group reaches
/// every node, the least important only its own group.
inline GraphSpec build_graph(const GroupSpec& groups) {
  const std::size_t n = groups.num_classes();
  std::vector<std::size_t> rank(n);
  for (std::size_t c = 0; c < n; ++c) {
    const auto g = groups.group_of(static_cast<ClassId>(c));
    if (!g) throw Error(ErrorCode::UngroupedClass, "class " + std::to_string(c) + " belongs to no group");
    rank[c] = *g;
  }
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rank[i] >= rank[j] ? 1.0 : 0.0;
  }
  return GraphSpec::from_adjacency(std::move(a), true);
}

inline Matrix normalize_adjacency(const GraphSpec& g,
                                  AdjacencyNormalization mode = AdjacencyNormalization::Row) {
  const std::size_t n = g.adjacency.rows();
  // degrees are summed in sorted order so relabeling nodes cannot change them
  std::vector<double> degree(n, 0.0);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row[j] = g.adjacency(i, j);
    std::sort(row.begin(), row.end());
    for (double v : row) degree[i] += v;
    if (degree[i] <= 0.0) throw Error(ErrorCode::IsolatedNode, "node " + std::to_string(i) + " has no edges");
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = mode == AdjacencyNormalization::Row
                      ? g.adjacency(i, j) / degree[i]
                      : g.adjacency(i, j) / (std::sqrt(degree[i]) * std::sqrt(degree[j]));
    }
  }
  return out;
}

struct GcnWeights {
  std::vector<Matrix> layers;
  double leaky_slope = kDefaultLeakySlope;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().rows(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().cols(); }

  void validate() const {
    if (layers.empty()) throw Error(ErrorCode::DimensionMismatch, "GCN needs at least one layer");
    for (std::size_t l = 1; l < layers.size(); ++l) {
      if (layers[l - 1].cols() != layers[l].rows()) {
        throw Error(ErrorCode::DimensionMismatch, "layer " + std::to_string(l - 1) + " outputs " +
                                                      std::to_string(layers[l - 1].cols()) + " but layer " +
                                                      std::to_string(l) + " expects " +
                                                      std::to_string(layers[l].rows()));
      }
    }
  }

  /// Seeded uniform [-0.1, 0.1) layers for dims d0 -> d1 -> ... -> dL.
  static GcnWeights random(std::span<const std::size_t> dims, std::uint64_t seed,
                           double slope = kDefaultLeakySlope) {
    GcnWeights w{{}, slope};
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      w.layers.push_back(random_matrix(dims[l], dims[l + 1], seed + l));
    }
    return w;
  }
};

namespace detail {

/// A_hat * H. Each output entry sums its non-zero terms in ascending value
/// order, so the result is independent of node numbering.
inline Matrix aggregate(const Matrix& a_hat, const Matrix& h) {
  Matrix out(a_hat.rows(), h.cols());
  std::vector<double> terms;
  terms.reserve(a_hat.cols());
  for (std::size_t i = 0; i < a_hat.rows(); ++i) {
    for (std::size_t k = 0; k < h.cols(); ++k) {
      terms.clear();
      for (std::size_t j = 0; j < a_hat.cols(); ++j) {
        if (a_hat(i, j) != 0.0) terms.push_back(a_hat(i, j) * h(j, k));
      }
      std::sort(terms.begin(), terms.end());
      double s = 0.0;
      for (double t : terms) s += t;
      out(i, k) = s;
    }
  }
  return out;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < b.cols(); ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * b(j, k);
      out(i, k) = s;
    }
  }
  return out;
}

}  // namespace detail

/// Stacked graph convolutions; every layer but the last is followed by a
/// leaky rectifier, the last stays linear.
inline Matrix gcn_forward(const Matrix& h, const GraphSpec& g, const GcnWeights& w,
                          AdjacencyNormalization mode = AdjacencyNormalization::Row) {
  w.validate();
  if (h.rows() != g.adjacency.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "node features have " + std::to_string(h.rows()) +
                                                  " rows, graph has " + std::to_string(g.adjacency.rows()) +
                                                  " nodes");
  }
  if (h.cols() != w.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "node features have dimension " + std::to_string(h.cols()) +
                                                  ", first layer expects " + std::to_string(w.input_dim()));
  }
  const Matrix a_hat = normalize_adjacency(g, mode);
  Matrix cur = h;
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    cur = detail::multiply(detail::aggregate(a_hat, cur), w.layers[l]);
    if (l + 1 < w.layers.size()) {
      for (auto& v : cur.values()) {
        if (v < 0.0) v *= w.leaky_slope;
      }
    }
  }
  return cur;
}

/// One-hot node embeddings: the C×C identity.
inline Matrix embed_one_hot(const ClassSpec& spec) { return Matrix::identity(spec.num_classes()); }

/// C×D feature selector; row k scores class k.
struct ClassifierMatrix {
  Matrix rows;

  std::size_t num_classes() const noexcept { return rows.rows(); }
  std::size_t feature_dim() const noexcept { return rows.cols(); }
};

/// Row-major reshape of the final GCN output into a C×D classifier.
inline ClassifierMatrix reshape_classifier(const Matrix& gcn_output, std::size_t num_classes, std::size_t feature_dim) {
  if (gcn_output.rows() * gcn_output.cols() != num_classes * feature_dim) {
    throw Error(ErrorCode::DimensionMismatch, "GCN output has " + std::to_string(gcn_output.rows()) + "x" +
                                                  std::to_string(gcn_output.cols()) + " entries, classifier needs " +
                                                  std::to_string(num_classes) + "x" + std::to_string(feature_dim));
  }
  const auto v = gcn_output.values();
  return ClassifierMatrix{Matrix(num_classes, feature_dim, std::vector<double>(v.begin(), v.end()))};
}

/// Per pixel: softmax(cls * feature).
inline ProbMap classify_features(const FeatureMap& features, const ClassifierMatrix& cls) {
  if (features.channels() != cls.feature_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "features have depth " + std::to_string(features.channels()) +
                                                  ", classifier expects " + std::to_string(cls.feature_dim()));
  }
  const std::size_t C = cls.num_classes();
  if (C == 0) throw Error(ErrorCode::DimensionMismatch, "classifier has no class rows");
  ProbMap out(features.extent(), C, 0.0);
  std::vector<double> scores(C);
  for (std::size_t i = 0; i < features.pixels(); ++i) {
    const auto f = features.pixel(i);
    for (std::size_t k = 0; k < C; ++k) {
      double s = 0.0;
      for (std::size_t d = 0; d < f.size(); ++d) s += cls.rows(k, d) * f[d];
      scores[k] = s;
    }
    const double smax = *std::max_element(scores.begin(), scores.end());
    auto px = out.pixel(i);
    double z = 0.0;
    for (std::size_t k = 0; k < C; ++k) {
      px[k] = std::exp(scores[k] - smax);
      z += px[k];
    }
    for (auto& v : px) v /= z;
  }
  return out;
}

}  // namespace hrseg
