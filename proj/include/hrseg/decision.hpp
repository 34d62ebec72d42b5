#pragma once

// Bayes (argmax posterior) and maximum-likelihood (argmax posterior / prior)
// pixel decisions, and estimation of pixel-wise class priors from label maps.

#include <cstdint>
#include <span>
#include <vector>

#include "hrseg/core.hpp"
#include "hrseg/metrics.hpp"
#include "hrseg/parallel.hpp"
#include "hrseg/smoothing.hpp"

namespace hrseg {

inline constexpr double kDefaultPriorSigma = 40.0;
inline constexpr double kDefaultPriorFloor = 1e-5;

using PriorData = DenseMap<PriorTag>;

struct PriorsMap {
  PriorData data;
  double sigma = kDefaultPriorSigma;
  double floor = kDefaultPriorFloor;
};

/// Per-location class counts; merges associatively across label maps.
class PriorCounts {
 public:
  PriorCounts(Extent extent, std::size_t num_classes)
      : extent_(extent), classes_(num_classes), counts_(extent.pixels() * num_classes, 0),
        valid_(extent.pixels(), 0) {}

  void add(const LabelMap& labels, const ClassSpec& spec) {
    require_same_extent(labels.extent(), extent_, "label map vs prior grid");
    validate_labels(labels, spec);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const ClassId v = labels[i];
      if (v == spec.ignore_id()) continue;
      ++counts_[i * classes_ + static_cast<std::size_t>(v)];
      ++valid_[i];
    }
    ++maps_;
  }

  PriorCounts& merge(const PriorCounts& other) {
    require_same_extent(other.extent_, extent_, "prior count grids");
    if (other.classes_ != classes_) throw Error(ErrorCode::DimensionMismatch, "prior class counts differ");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    for (std::size_t i = 0; i < valid_.size(); ++i) valid_[i] += other.valid_[i];
    maps_ += other.maps_;
    return *this;
  }

  const Extent& extent() const noexcept { return extent_; }
  std::size_t num_classes() const noexcept { return classes_; }
  std::size_t maps() const noexcept { return maps_; }

  /// Raw per-location frequencies; all-ignore locations are uniform 1/C.
  PriorData frequencies() const {
    PriorData f(extent_, classes_, 0.0);
    for (std::size_t i = 0; i < extent_.pixels(); ++i) {
      auto px = f.pixel(i);
      if (valid_[i] == 0) {
        for (auto& v : px) v = 1.0 / static_cast<double>(classes_);
        continue;
      }
      for (std::size_t k = 0; k < classes_; ++k) {
        px[k] = static_cast<double>(counts_[i * classes_ + k]) / static_cast<double>(valid_[i]);
      }
    }
    return f;
  }

 private:
  Extent extent_;
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> valid_;
  std::size_t maps_ = 0;
};

/// Smooths each channel of the raw frequencies and floors the result.
inline PriorsMap finalize_priors(const PriorCounts& counts, double sigma, double floor, std::size_t jobs = 1) {
  if (sigma < 0.0) throw Error(ErrorCode::NegativeSigma, "sigma must be >= 0");
  if (!(floor > 0.0 && floor <= 1.0)) throw Error(ErrorCode::DomainError, "prior floor must lie in (0, 1]");
  if (counts.maps() == 0) throw Error(ErrorCode::EmptyInput, "no label maps for prior estimation");
  PriorData data = counts.frequencies();
  const std::size_t C = data.channels();
  if (sigma > 0.0) {
    // channels are independent and write disjoint slots
    parallel_for(C, jobs, [&](std::size_t k) {
      Field channel(data.extent());
      for (std::size_t i = 0; i < data.pixels(); ++i) channel.values[i] = data.pixel(i)[k];
      const Field smooth = gaussian_smooth(channel, sigma);
      for (std::size_t i = 0; i < data.pixels(); ++i) data.pixel(i)[k] = smooth.values[i];
    });
  }
  for (auto& v : data.values()) v = std::max(v, floor);
  return PriorsMap{std::move(data), sigma, floor};
}

inline PriorsMap estimate_priors(std::span<const LabelMap> labels, const ClassSpec& spec,
                                 double sigma = kDefaultPriorSigma, double floor = kDefaultPriorFloor) {
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no label maps for prior estimation");
  PriorCounts counts(labels.front().extent(), spec.num_classes());
  for (const auto& m : labels) counts.add(m, spec);
  return finalize_priors(counts, sigma, floor);
}

/// Spatially constant prior vector, mostly for tests and uniform baselines.
inline PriorsMap constant_priors(Extent extent, std::span<const double> prior, double floor = kDefaultPriorFloor) {
  PriorData d(extent, prior.size(), 0.0);
  for (std::size_t i = 0; i < d.pixels(); ++i) {
    auto px = d.pixel(i);
    for (std::size_t k = 0; k < prior.size(); ++k) px[k] = std::max(prior[k], floor);
  }
  return PriorsMap{std::move(d), 0.0, floor};
}

namespace detail {
template <class Score>
std::size_t argmax_lowest(std::size_t n, Score&& score) {
  std::size_t best = 0;
  double best_score = score(0);
  for (std::size_t k = 1; k < n; ++k) {
    const double s = score(k);
    if (s > best_score) {
      best = k;
      best_score = s;
    }
  }
  return best;
}
}  // namespace detail

inline LabelMap decide_bayes(const ProbMap& p) {
  if (p.channels() == 0) throw Error(ErrorCode::DimensionMismatch, "probability map has no channels");
  LabelMap out(p.extent());
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const auto px = p.pixel(i);
    out[i] = static_cast<ClassId>(detail::argmax_lowest(px.size(), [&](std::size_t k) { return px[k]; }));
  }
  return out;
}

inline LabelMap decide_ml(const ProbMap& p, const PriorsMap& priors) {
  require_same_extent(p.extent(), priors.data.extent(), "probabilities vs priors");
  if (p.channels() != priors.data.channels()) {
    throw Error(ErrorCode::ShapeMismatch, "probability and prior channel counts differ");
  }
  if (p.channels() == 0) throw Error(ErrorCode::DimensionMismatch, "probability map has no channels");
  LabelMap out(p.extent());
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const auto px = p.pixel(i);
    const auto pr = priors.data.pixel(i);
    out[i] = static_cast<ClassId>(
        detail::argmax_lowest(px.size(), [&](std::size_t k) { return px[k] / pr[k]; }));
  }
  return out;
}

struct RuleReport {
  ConfusionMatrix confusion;
  std::vector<ClassMetrics> metrics;
  MetricsSummary summary;
};

struct RuleComparison {
  RuleReport bayes;
  RuleReport ml;
  std::size_t disagreement = 0;  // pixels where the two rules differ
};

namespace detail {
inline RuleReport evaluate_rule(const LabelMap& pred, const LabelMap& gt, const ClassSpec& spec,
                                const GroupSpec& groups) {
  ConfusionMatrix cm = accumulate(ConfusionMatrix(spec.num_classes()), pred, gt, spec);
  auto metrics = class_metrics(cm);
  auto summary = summarize(metrics, groups);
  return RuleReport{std::move(cm), std::move(metrics), std::move(summary)};
}
}  // namespace detail

/// Runs both rules on one image and evaluates them side by side.
inline RuleComparison compare_rules(const ProbMap& p, const PriorsMap& priors, const LabelMap& gt,
                                    const ClassSpec& spec, const GroupSpec& groups) {
  require_same_extent(p.extent(), gt.extent(), "probabilities vs ground truth");
  const LabelMap bayes = decide_bayes(p);
  const LabelMap ml = decide_ml(p, priors);
  RuleComparison r{detail::evaluate_rule(bayes, gt, spec, groups), detail::evaluate_rule(ml, gt, spec, groups), 0};
  for (std::size_t i = 0; i < bayes.size(); ++i) r.disagreement += bayes[i] != ml[i];
  return r;
}

}  // namespace hrseg
