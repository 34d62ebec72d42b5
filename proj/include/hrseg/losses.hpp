#pragma once

// Cross-entropy, frequency-weighted cross-entropy and the importance-aware
// loss (IAL), with analytic gradients w.r.t. pre-softmax logits.
//
// All three losses share one shape: sum over non-ignored pixels of
// c_i * -ln p_i[y_i], where the per-pixel coefficient c_i depends on the loss.
// Gradients treat c_i (and therefore the IAL dynamic weights) as constants.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "hrseg/core.hpp"
#include "hrseg/metrics.hpp"

namespace hrseg {

inline constexpr double kLogClamp = 1e-12;
inline constexpr double kDefaultFrequencySmoothing = 1.02;
inline constexpr double kDefaultImportanceLambda = 0.5;
inline constexpr double kDefaultImportanceAlpha = 1.0;

namespace detail {

inline void check_loss_inputs(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec) {
  require_same_extent(p.extent(), gt.extent(), "probabilities vs ground truth");
  if (p.channels() != spec.num_classes()) {
    throw Error(ErrorCode::ShapeMismatch, "probability map has " + std::to_string(p.channels()) +
                                              " channels, expected " + std::to_string(spec.num_classes()));
  }
  validate_labels(gt, spec);
}

inline double neg_log(double prob) { return -std::log(std::max(prob, kLogClamp)); }

inline double gt_channel(const ProbMap& p, const LabelMap& gt, std::size_t i) {
  return p.pixel(i)[static_cast<std::size_t>(gt[i])];
}

}  // namespace detail

/// w[k] = 1 / ln(a + f[k]).
struct FrequencyWeights {
  std::vector<double> frequencies;
  double smoothing = kDefaultFrequencySmoothing;
  std::vector<double> weights;

  static FrequencyWeights from_frequencies(std::vector<double> f, double a = kDefaultFrequencySmoothing) {
    if (!(a > 1.0)) throw Error(ErrorCode::DomainError, "frequency smoothing must exceed 1");
    FrequencyWeights w{std::move(f), a, {}};
    w.weights.reserve(w.frequencies.size());
    for (double fk : w.frequencies) {
      if (!(fk >= 0.0 && fk <= 1.0)) throw Error(ErrorCode::DomainError, "class frequency outside [0,1]");
      w.weights.push_back(1.0 / std::log(a + fk));
    }
    return w;
  }
};

/// Fraction of non-ignored pixels carrying each class, over a set of maps.
inline std::vector<double> class_frequencies(std::span<const LabelMap> maps, const ClassSpec& spec) {
  std::vector<double> counts(spec.num_classes(), 0.0);
  double total = 0.0;
  for (const auto& m : maps) {
    validate_labels(m, spec);
    for (ClassId v : m.values()) {
      if (v == spec.ignore_id()) continue;
      counts[static_cast<std::size_t>(v)] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (auto& c : counts) c /= total;
  }
  return counts;
}

/// Per-pixel coefficients of the (weighted) cross-entropy mean.
inline std::vector<double> cross_entropy_coefficients(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec,
                                                      const FrequencyWeights* weights = nullptr) {
  detail::check_loss_inputs(p, gt, spec);
  if (weights && weights->weights.size() != spec.num_classes()) {
    throw Error(ErrorCode::ShapeMismatch, "frequency weights do not match class count");
  }
  std::size_t n = 0;
  for (ClassId v : gt.values()) n += v != spec.ignore_id();
  std::vector<double> c(gt.size(), 0.0);
  if (n == 0) return c;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == spec.ignore_id()) continue;
    const double w = weights ? weights->weights[static_cast<std::size_t>(gt[i])] : 1.0;
    c[i] = w / static_cast<double>(n);
  }
  return c;
}

/// sum_i c_i * -ln p_i[y_i]
inline double weighted_nll(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec,
                           std::span<const double> coefficients) {
  double total = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == spec.ignore_id() || coefficients[i] == 0.0) continue;
    total += coefficients[i] * detail::neg_log(detail::gt_channel(p, gt, i));
  }
  return total;
}

/// d/dz of weighted_nll with p = softmax(z): c_i * (p_i - onehot(y_i)).
inline GradientMap weighted_nll_gradient(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec,
                                         std::span<const double> coefficients) {
  GradientMap g(p.extent(), p.channels(), 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == spec.ignore_id()) continue;
    const auto px = p.pixel(i);
    auto out = g.pixel(i);
    for (std::size_t k = 0; k < px.size(); ++k) out[k] = coefficients[i] * px[k];
    out[static_cast<std::size_t>(gt[i])] -= coefficients[i];
  }
  return g;
}

/// Mean over non-ignored pixels of -w[y] ln p[y] (w = 1 without weights).
inline double cross_entropy(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec,
                            const FrequencyWeights* weights = nullptr) {
  const auto c = cross_entropy_coefficients(p, gt, spec, weights);
  return weighted_nll(p, gt, spec, c);
}

// ---------------------------------------------------------------------------
// Importance-aware loss

/// Per-class target of one importance level; nullopt marks a masked class.
using TargetVector = std::vector<std::optional<double>>;

/// Number of target levels the loss combination needs for a group count.
inline std::size_t required_target_levels(std::size_t group_count) {
  switch (group_count) {
    case 1: return 0;
    case 2: return 1;
    case 3: return 3;
    default:
      throw Error(ErrorCode::UnsupportedGroupCount,
                  "importance loss supports 1 to 3 groups, got " + std::to_string(group_count));
  }
}

/// Nested targets: level 1 separates G1 from the rest, level 2 separates G3
/// from G2 with G1 masked, level 3 targets G3 only.
inline std::vector<TargetVector> default_importance_targets(const GroupSpec& groups) {
  const std::size_t n = groups.num_classes();
  const std::size_t levels = required_target_levels(groups.size());
  std::vector<TargetVector> t(levels, TargetVector(n, std::nullopt));
  for (std::size_t c = 0; c < n; ++c) {
    const auto g = groups.group_of(static_cast<ClassId>(c));
    if (!g) continue;
    if (levels >= 1) t[0][c] = *g >= 1 ? 1.0 : 0.0;
    if (levels >= 3) {
      if (*g == 2) t[1][c] = 1.0;
      else if (*g == 1) t[1][c] = 0.0;
      if (*g == 2) t[2][c] = 1.0;
    }
  }
  return t;
}

struct ImportanceConfig {
  GroupSpec groups;
  std::vector<TargetVector> targets;
  double lambda = kDefaultImportanceLambda;
  double alpha = kDefaultImportanceAlpha;

  static ImportanceConfig with_default_targets(GroupSpec groups, double lambda = kDefaultImportanceLambda,
                                               double alpha = kDefaultImportanceAlpha) {
    auto targets = default_importance_targets(groups);
    return ImportanceConfig{std::move(groups), std::move(targets), lambda, alpha};
  }
};

/// f_t = mean over non-ignored, non-masked pixels of [(m[y]+lambda)^0.5 (p' - m[y])]^2,
/// with p' the ground-truth channel. Zero when nothing contributes.
inline double dynamic_weight(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec, const TargetVector& target,
                             double lambda) {
  detail::check_loss_inputs(p, gt, spec);
  if (target.size() != spec.num_classes()) {
    throw Error(ErrorCode::ShapeMismatch, "target vector does not match class count");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == spec.ignore_id()) continue;
    const auto& m = target[static_cast<std::size_t>(gt[i])];
    if (!m) continue;
    const double term = std::sqrt(*m + lambda) * (detail::gt_channel(p, gt, i) - *m);
    sum += term * term;
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

struct IALBreakdown {
  std::vector<double> group_losses;        // I_1..I_L, per-group mean CE
  std::vector<std::size_t> group_pixels;   // contributing pixels per group
  std::vector<double> dynamic_weights;     // f_1..f_T
  double alpha = kDefaultImportanceAlpha;
  double total = 0.0;
};

/// Effective multipliers: 1, (f_1+a), (f_2+a)(f_3+a).
inline std::vector<double> importance_multipliers(std::span<const double> f, double alpha, std::size_t group_count) {
  if (f.size() != required_target_levels(group_count)) {
    throw Error(ErrorCode::ShapeMismatch, "dynamic weight count does not match group count");
  }
  std::vector<double> m{1.0};
  if (group_count >= 2) m.push_back(f[0] + alpha);
  if (group_count >= 3) m.push_back((f[1] + alpha) * (f[2] + alpha));
  return m;
}

inline double recombine(const IALBreakdown& b) {
  const auto m = importance_multipliers(b.dynamic_weights, b.alpha, b.group_losses.size());
  double total = 0.0;
  for (std::size_t g = 0; g < m.size(); ++g) total += m[g] * b.group_losses[g];
  return total;
}

namespace detail {

inline void check_importance_config(const ImportanceConfig& cfg, const ClassSpec& spec) {
  if (cfg.groups.num_classes() != spec.num_classes()) {
    throw Error(ErrorCode::ShapeMismatch, "group spec does not match class count");
  }
  if (cfg.targets.size() != required_target_levels(cfg.groups.size())) {
    throw Error(ErrorCode::InvalidSpec, std::to_string(cfg.groups.size()) + " groups need " +
                                            std::to_string(required_target_levels(cfg.groups.size())) +
                                            " target levels, got " + std::to_string(cfg.targets.size()));
  }
}

inline std::vector<std::size_t> pixel_groups(const LabelMap& gt, const ClassSpec& spec, const GroupSpec& groups) {
  std::vector<std::size_t> out(gt.size(), 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == spec.ignore_id()) continue;
    const auto g = groups.group_of(gt[i]);
    if (!g) {
      throw Error(ErrorCode::UngroupedClass, "class " + std::to_string(gt[i]) + " belongs to no group");
    }
    out[i] = *g;
  }
  return out;
}

}  // namespace detail

inline IALBreakdown ial(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec, const ImportanceConfig& cfg) {
  detail::check_loss_inputs(p, gt, spec);
  detail::check_importance_config(cfg, spec);
  const auto groups = detail::pixel_groups(gt, spec, cfg.groups);
  const std::size_t L = cfg.groups.size();

  IALBreakdown b;
  b.alpha = cfg.alpha;
  b.group_losses.assign(L, 0.0);
  b.group_pixels.assign(L, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == spec.ignore_id()) continue;
    b.group_losses[groups[i]] += detail::neg_log(detail::gt_channel(p, gt, i));
    ++b.group_pixels[groups[i]];
  }
  for (std::size_t g = 0; g < L; ++g) {
    if (b.group_pixels[g] > 0) b.group_losses[g] /= static_cast<double>(b.group_pixels[g]);
  }
  for (const auto& t : cfg.targets) b.dynamic_weights.push_back(dynamic_weight(p, gt, spec, t, cfg.lambda));
  b.total = recombine(b);
  return b;
}

/// Per-pixel coefficients of the IAL with the dynamic weights frozen at `p`:
/// the pixel's group multiplier over that group's pixel count.
inline std::vector<double> ial_coefficients(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec,
                                            const ImportanceConfig& cfg) {
  const IALBreakdown b = ial(p, gt, spec, cfg);
  const auto groups = detail::pixel_groups(gt, spec, cfg.groups);
  const auto mult = importance_multipliers(b.dynamic_weights, cfg.alpha, cfg.groups.size());
  std::vector<double> c(gt.size(), 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == spec.ignore_id()) continue;
    const std::size_t g = groups[i];
    c[i] = mult[g] / static_cast<double>(b.group_pixels[g]);
  }
  return c;
}

inline GradientMap ial_gradient(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec,
                                const ImportanceConfig& cfg) {
  const auto c = ial_coefficients(p, gt, spec, cfg);
  return weighted_nll_gradient(p, gt, spec, c);
}

// ---------------------------------------------------------------------------
// Finite-difference check of the frozen-coefficient objective

namespace detail {

inline void softmax_into(std::span<const double> z, std::span<double> out) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    out[k] = std::exp(z[k] - zmax);
    s += out[k];
  }
  for (auto& v : out) v /= s;
}

}  // namespace detail

inline ProbMap softmax(const GradientMap& logits) {
  ProbMap p(logits.extent(), logits.channels(), 0.0);
  for (std::size_t i = 0; i < logits.pixels(); ++i) detail::softmax_into(logits.pixel(i), p.pixel(i));
  return p;
}

/// Logits whose softmax reproduces `p` (entries floored at kLogClamp).
inline GradientMap logits_from_probs(const ProbMap& p) {
  GradientMap z(p.extent(), p.channels(), 0.0);
  for (std::size_t i = 0; i < p.values().size(); ++i) {
    z.values()[i] = std::log(std::max(p.values()[i], kLogClamp));
  }
  return z;
}

struct GradientCheckResult {
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t entries = 0;
};

/// Relative error |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central differences of sum_i c_i * -ln softmax(z_i)[y_i] at z = ln p, with
/// the coefficients held fixed, against the analytic gradient.
inline GradientCheckResult check_gradient(const ProbMap& p, const LabelMap& gt, const ClassSpec& spec,
                                          std::span<const double> coefficients, double step = 1e-5) {
  GradientMap z = logits_from_probs(p);
  const ProbMap at = softmax(z);
  const GradientMap analytic = weighted_nll_gradient(at, gt, spec, coefficients);

  GradientCheckResult r;
  std::vector<double> probs(p.channels());
  auto pixel_objective = [&](std::size_t i) {
    detail::softmax_into(z.pixel(i), probs);
    return coefficients[i] * detail::neg_log(probs[static_cast<std::size_t>(gt[i])]);
  };
  for (std::size_t i = 0; i < gt.size(); ++i) {
    auto zi = z.pixel(i);
    for (std::size_t k = 0; k < zi.size(); ++k) {
      double numeric = 0.0;
      if (gt[i] != spec.ignore_id()) {
        const double saved = zi[k];
        zi[k] = saved + step;
        const double up = pixel_objective(i);
        zi[k] = saved - step;
        const double down = pixel_objective(i);
        zi[k] = saved;
        numeric = (up - down) / (2.0 * step);
      }
      const double a = analytic.pixel(i)[k];
      r.max_relative_error = std::max(r.max_relative_error, relative_error(a, numeric));
      r.max_abs_error = std::max(r.max_abs_error, std::abs(a - numeric));
      ++r.entries;
    }
  }
  return r;
}

}  // namespace hrseg
