#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "support.hpp"

using namespace hrseg;
using namespace hrseg::test;

namespace {

Matrix matrix(std::size_t r, std::size_t c, std::vector<double> v) { return Matrix(r, c, std::move(v)); }

GraphSpec random_graph(SeededRng& rng, std::size_t n) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.uniform() < 0.5 ? rng.uniform(0.1, 2.0) : 0.0;
  return GraphSpec::from_adjacency(std::move(a));
}

}  // namespace

TEST(BuildGraph, OneClassPerGroup) {
  // class 0 most important, class 2 least
  const GroupSpec groups({{"G1", {2}}, {"G2", {1}}, {"G3", {0}}}, 3);
  const auto g = build_graph(groups);
  EXPECT_EQ(oracle::rows_of(g.adjacency),
            (std::vector<std::vector<double>>{{1, 1, 1}, {0, 1, 1}, {0, 0, 1}}));
  EXPECT_TRUE(g.directed);
}

TEST(BuildGraph, SingleGroupIsComplete) {
  const auto g = build_graph(GroupSpec::single(4));
  for (double v : g.adjacency.values()) EXPECT_EQ(v, 1.0);
}

TEST(BuildGraph, UngroupedClassesRejected) {
  try {
    build_graph(GroupSpec({}, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UngroupedClass);
  }
}

TEST(BuildGraph, CityscapesRowsFollowImportance) {
  const auto spec = presets::cityscapes_classes();
  const auto groups = presets::cityscapes_groups();
  const auto g = build_graph(groups);
  for (std::size_t i = 0; i < 19; ++i) {
    for (std::size_t j = 0; j < 19; ++j) {
      const auto gi = *groups.group_of(static_cast<ClassId>(i)), gj = *groups.group_of(static_cast<ClassId>(j));
      EXPECT_EQ(g.adjacency(i, j), gi >= gj ? 1.0 : 0.0) << spec.name(static_cast<ClassId>(i));
    }
  }
}

TEST(NormalizeAdjacency, HandValues) {
  EXPECT_EQ(oracle::rows_of(normalize_adjacency(GraphSpec::from_adjacency(matrix(2, 2, {1, 1, 1, 1})))),
            (std::vector<std::vector<double>>{{0.5, 0.5}, {0.5, 0.5}}));
  EXPECT_EQ(oracle::rows_of(normalize_adjacency(GraphSpec::from_adjacency(Matrix::identity(3)))),
            oracle::rows_of(Matrix::identity(3)));
  EXPECT_EQ(oracle::rows_of(normalize_adjacency(GraphSpec::from_adjacency(matrix(2, 2, {1, 0, 1, 1})))),
            (std::vector<std::vector<double>>{{1, 0}, {0.5, 0.5}}));
}

TEST(NormalizeAdjacency, SymmetricVariantAndIsolatedNode) {
  const auto s = normalize_adjacency(GraphSpec::from_adjacency(matrix(2, 2, {1, 1, 1, 1}), false),
                                     AdjacencyNormalization::Symmetric);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
  GraphSpec bad{2, Matrix(2, 2), true};
  try {
    normalize_adjacency(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IsolatedNode);
  }
  EXPECT_THROW(GraphSpec::from_adjacency(matrix(2, 2, {1, -1, 0, 1})), Error);
}

TEST(NormalizeAdjacency, RowsSumToOne) {
  SeededRng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = normalize_adjacency(random_graph(rng, 2 + rng.below(8)));
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(GcnForward, IdentityPathAndLeakyHiddenLayer) {
  const auto g = GraphSpec::from_adjacency(Matrix::identity(3));
  const Matrix h = matrix(3, 2, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(oracle::rows_of(gcn_forward(h, g, GcnWeights{{Matrix::identity(2)}})), oracle::rows_of(h));

  const auto one = GraphSpec::from_adjacency(Matrix::identity(1));
  const GcnWeights two{{Matrix::identity(2), Matrix::identity(2)}, 0.01};
  const auto out = gcn_forward(matrix(1, 2, {1, -1}), one, two);
  EXPECT_EQ(out(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out(0, 1), -0.01);
}

TEST(GcnForward, MatchesDenseOracle) {
  SeededRng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(rng, 3);
    const std::vector<std::size_t> dims{3, 5, 4};
    const auto w = GcnWeights::random(dims, 100 + trial);
    const Matrix h = random_matrix(3, 3, 200 + trial, -1.0, 1.0);
    const auto out = oracle::rows_of(gcn_forward(h, g, w));
    const auto ref = oracle::gcn(oracle::rows_of(g.adjacency), oracle::rows_of(h),
                                 {oracle::rows_of(w.layers[0]), oracle::rows_of(w.layers[1])}, w.leaky_slope);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out[i][j], ref[i][j], 1e-12);
  }
}

TEST(GcnForward, DimensionChecks) {
  const auto g = GraphSpec::from_adjacency(Matrix::identity(3));
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code_of([&] { gcn_forward(Matrix(3, 2), g, GcnWeights{{Matrix(3, 3)}}); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { gcn_forward(Matrix(2, 3), g, GcnWeights{{Matrix(3, 3)}}); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { gcn_forward(Matrix(3, 3), g, GcnWeights{{Matrix(3, 4), Matrix(5, 2)}}); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { gcn_forward(Matrix(3, 3), g, GcnWeights{}); }), ErrorCode::DimensionMismatch);
}

TEST(GcnForward, PermutationEquivariantExactly) {
  SeededRng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5;
    const auto g = random_graph(rng, n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    Matrix pa(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) pa(perm[i], perm[j]) = g.adjacency(i, j);
    const Matrix h = random_matrix(n, 3, 300 + trial, -1.0, 1.0);
    Matrix ph(n, 3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 3; ++k) ph(perm[i], k) = h(i, k);
    const std::vector<std::size_t> dims{3, 6, 4};
    const auto w = GcnWeights::random(dims, 400 + trial);

    const Matrix out = gcn_forward(h, g, w);
    const Matrix pout = gcn_forward(ph, GraphSpec::from_adjacency(pa), w);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(pout(perm[i], k), out(i, k));
  }
}

TEST(EmbedOneHot, IsIdentity) {
  for (std::size_t C : {3u, 19u}) {
    const Matrix e = embed_one_hot(ClassSpec::numbered(C));
    EXPECT_EQ(oracle::rows_of(e), oracle::rows_of(Matrix::identity(C)));
  }
}

TEST(ClassifyFeatures, SelectorRowsAndZeroFeatures) {
  const ClassifierMatrix cls{Matrix::identity(3)};
  FeatureMap f({1, 2}, 3, 0.0);
  f.pixel(0)[2] = 10.0;
  const ProbMap p = classify_features(f, cls);
  EXPECT_EQ(decide_bayes(p)[0], 2);
  for (double v : p.pixel(1)) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  EXPECT_THROW(classify_features(FeatureMap({1, 1}, 4), cls), Error);
}

TEST(ClassifyFeatures, MatchesPerPixelOracle) {
  SeededRng rng(44);
  FeatureMap f({2, 2}, 4, 0.0);
  for (auto& v : f.values()) v = rng.uniform(-3.0, 3.0);
  const ClassifierMatrix cls{random_matrix(3, 4, 45, -1.0, 1.0)};
  const ProbMap p = classify_features(f, cls);
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> s(3, 0.0);
    double z = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t d = 0; d < 4; ++d) s[k] += cls.rows(k, d) * f.pixel(i)[d];
      z += std::exp(s[k]);
    }
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(p.pixel(i)[k], std::exp(s[k]) / z, 1e-12);
  }
}

TEST(ClassifyFeatures, OutputAlwaysValidProbabilities) {
  SeededRng rng(46);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t C = 1 + rng.below(6), D = 1 + rng.below(6);
    FeatureMap f({3, 3}, D, 0.0);
    for (auto& v : f.values()) v = rng.uniform(-500.0, 500.0);
    const ClassifierMatrix cls{random_matrix(C, D, 500 + trial, -5.0, 5.0)};
    EXPECT_NO_THROW(validate_probmap(classify_features(f, cls)));
  }
}

TEST(ClassifierPipeline, IdentityGraphAndWeightsReduceToSoftmaxOfRawScores) {
  const auto spec = ClassSpec::numbered(3);
  const auto g = GraphSpec::from_adjacency(Matrix::identity(3));
  const Matrix out = gcn_forward(embed_one_hot(spec), g, GcnWeights{{Matrix::identity(3)}});
  const auto cls = reshape_classifier(out, 3, 3);
  SeededRng rng(47);
  FeatureMap f({2, 3}, 3, 0.0);
  for (auto& v : f.values()) v = rng.uniform(-2.0, 2.0);
  const ProbMap p = classify_features(f, cls);
  GradientMap raw(f.extent(), 3, std::vector<double>(f.values().begin(), f.values().end()));
  EXPECT_EQ(p, softmax(raw));
  EXPECT_THROW(reshape_classifier(out, 2, 3), Error);
}
