#pragma once

// Confusion-matrix accumulation and per-class / per-group precision, recall
// and IoU. A metric whose denominator is zero is reported as std::nullopt and
// excluded from every mean.

#include <charconv>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hrseg/core.hpp"

namespace hrseg {

/// counts(g, p) = number of pixels with ground truth g predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes)
      : n_(num_classes), counts_(num_classes * num_classes, 0) {}

  std::size_t num_classes() const noexcept { return n_; }

  std::uint64_t operator()(std::size_t gt, std::size_t pred) const { return counts_[gt * n_ + pred]; }
  std::uint64_t& operator()(std::size_t gt, std::size_t pred) { return counts_[gt * n_ + pred]; }

  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  std::uint64_t gt_count(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += (*this)(k, p);
    return s;
  }

  std::uint64_t pred_count(std::size_t k) const {
    std::uint64_t s = 0;
    for (std::size_t g = 0; g < n_; ++g) s += (*this)(g, k);
    return s;
  }

  ConfusionMatrix& merge(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw Error(ErrorCode::DimensionMismatch, "confusion matrix sizes differ");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

/// Adds one (prediction, ground truth) pair. Pixels whose ground truth is the
/// ignore id contribute nothing; predictions must be real classes.
inline ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMap& pred, const LabelMap& gt,
                                  const ClassSpec& spec) {
  require_same_extent(pred.extent(), gt.extent(), "prediction vs ground truth");
  if (cm.num_classes() != spec.num_classes()) {
    throw Error(ErrorCode::DimensionMismatch, "confusion matrix does not match class spec");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const ClassId p = pred[i];
    if (!spec.is_valid(p)) {
      throw Error(ErrorCode::InvalidClass,
                  "prediction pixel " + std::to_string(i) + " has label " + std::to_string(p));
    }
    const ClassId g = gt[i];
    if (g == spec.ignore_id()) continue;
    if (!spec.is_valid(g)) {
      throw Error(ErrorCode::InvalidClass,
                  "ground-truth pixel " + std::to_string(i) + " has label " + std::to_string(g));
    }
    ++cm(static_cast<std::size_t>(g), static_cast<std::size_t>(p));
  }
  return cm;
}

struct ClassMetrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> iou;
  std::uint64_t support = 0;  // ground-truth pixels

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

namespace detail {
inline std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline std::vector<ClassMetrics> class_metrics(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out(cm.num_classes());
  for (std::size_t k = 0; k < cm.num_classes(); ++k) {
    const std::uint64_t tp = cm(k, k);
    const std::uint64_t fp = cm.pred_count(k) - tp;
    const std::uint64_t fn = cm.gt_count(k) - tp;
    out[k] = ClassMetrics{detail::ratio(tp, tp + fp), detail::ratio(tp, tp + fn),
                          detail::ratio(tp, tp + fp + fn), tp + fn};
  }
  return out;
}

/// IoU recovered from precision and recall: 1/IoU = 1/P + 1/R - 1.
inline double iou_from_pr(double precision, double recall) {
  if (!(precision > 0.0) || !(recall > 0.0)) {
    throw Error(ErrorCode::DomainError, "precision and recall must be positive");
  }
  return 1.0 / (1.0 / precision + 1.0 / recall - 1.0);
}

struct Group {
  std::string name;
  std::vector<ClassId> classes;
};

/// Ordered list of disjoint class groups, least important first (G1, G2, ...).
class GroupSpec {
 public:
  GroupSpec() = default;
  GroupSpec(std::vector<Group> groups, std::size_t num_classes)
      : groups_(std::move(groups)), membership_(num_classes, kNoGroup) {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      for (ClassId c : groups_[g].classes) {
        if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
          throw Error(ErrorCode::InvalidClass,
                      "group " + groups_[g].name + " references class " + std::to_string(c));
        }
        auto& slot = membership_[static_cast<std::size_t>(c)];
        if (slot != kNoGroup) {
          throw Error(ErrorCode::InvalidSpec,
                      "class " + std::to_string(c) + " appears in more than one group");
        }
        slot = g;
      }
    }
  }

  /// One group holding every class.
  static GroupSpec single(std::size_t num_classes, std::string name = "all") {
    Group g{std::move(name), {}};
    for (std::size_t k = 0; k < num_classes; ++k) g.classes.push_back(static_cast<ClassId>(k));
    return GroupSpec({std::move(g)}, num_classes);
  }

  const std::vector<Group>& groups() const noexcept { return groups_; }
  std::size_t size() const noexcept { return groups_.size(); }
  std::size_t num_classes() const noexcept { return membership_.size(); }

  std::optional<std::size_t> group_of(ClassId c) const {
    if (c < 0 || static_cast<std::size_t>(c) >= membership_.size()) return std::nullopt;
    const std::size_t g = membership_[static_cast<std::size_t>(c)];
    if (g == kNoGroup) return std::nullopt;
    return g;
  }

 private:
  static constexpr std::size_t kNoGroup = static_cast<std::size_t>(-1);
  std::vector<Group> groups_;
  std::vector<std::size_t> membership_;
};

struct MetricMeans {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> iou;
  std::uint64_t support = 0;
};

struct GroupSummary {
  std::string name;
  MetricMeans means;
};

struct MetricsSummary {
  MetricMeans overall;
  std::vector<GroupSummary> groups;
  std::vector<ClassId> undefined;  // classes with at least one undefined metric
};

namespace detail {
struct MeanAccumulator {
  double sum = 0.0;
  std::size_t n = 0;
  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

template <class Range>
MetricMeans means_over(const std::vector<ClassMetrics>& m, const Range& ids) {
  MeanAccumulator p, r, u;
  MetricMeans out;
  for (auto id : ids) {
    const auto& cm = m[static_cast<std::size_t>(id)];
    p.add(cm.precision);
    r.add(cm.recall);
    u.add(cm.iou);
    out.support += cm.support;
  }
  out.precision = p.mean();
  out.recall = r.mean();
  out.iou = u.mean();
  return out;
}
}  // namespace detail

/// Unweighted class means overall and per group, skipping undefined values.
inline MetricsSummary summarize(const std::vector<ClassMetrics>& metrics, const GroupSpec& groups) {
  MetricsSummary s;
  std::vector<std::size_t> all(metrics.size());
  for (std::size_t k = 0; k < all.size(); ++k) {
    all[k] = k;
    const auto& m = metrics[k];
    if (!m.precision || !m.recall || !m.iou) s.undefined.push_back(static_cast<ClassId>(k));
  }
  s.overall = detail::means_over(metrics, all);
  for (const auto& g : groups.groups()) {
    for (ClassId c : g.classes) {
      if (c < 0 || static_cast<std::size_t>(c) >= metrics.size()) {
        throw Error(ErrorCode::InvalidClass, "group " + g.name + " references class " + std::to_string(c));
      }
    }
    s.groups.push_back({g.name, detail::means_over(metrics, g.classes)});
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV report: name,precision,recall,iou,support; 4 decimals; undefined empty.

namespace detail {
inline std::string fixed4(const std::optional<double>& v) {
  if (!v) return {};
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), *v, std::chars_format::fixed, 4);
  return std::string(buf, end);
}
}  // namespace detail

inline void write_metrics_csv(std::ostream& out, const ClassSpec& spec,
                              const std::vector<ClassMetrics>& metrics, const MetricsSummary& summary) {
  auto row = [&](const std::string& name, const std::optional<double>& p, const std::optional<double>& r,
                 const std::optional<double>& u, std::uint64_t support) {
    out << name << ',' << detail::fixed4(p) << ',' << detail::fixed4(r) << ',' << detail::fixed4(u) << ','
        << support << '\n';
  };
  out << "name,precision,recall,iou,support\n";
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    const auto& m = metrics[k];
    row(spec.names().at(k), m.precision, m.recall, m.iou, m.support);
  }
  const auto& o = summary.overall;
  row("mean", o.precision, o.recall, o.iou, o.support);
  for (const auto& g : summary.groups) {
    row("mean:" + g.name, g.means.precision, g.means.recall, g.means.iou, g.means.support);
  }
}

}  // namespace hrseg
