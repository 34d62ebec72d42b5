#pragma once

// Shared domain types for the segmentation toolkit: class specifications,
// label maps, dense per-pixel channel maps and the error type used by every
// module.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hrseg {

using ClassId = std::int32_t;

inline constexpr ClassId kDefaultIgnoreId = 255;
inline constexpr double kProbSumTolerance = 1e-4;

enum class ErrorCode {
  NotNormalized,
  OutOfRange,
  InvalidClass,
  InvalidSpec,
  ShapeMismatch,
  EmptyInput,
  NegativeSigma,
  DomainError,
  UngroupedClass,
  UnsupportedGroupCount,
  IsolatedNode,
  DimensionMismatch,
  ChannelMismatch,
  EmptyChain,
  IndivisibleInput,
  Io,
  Parse,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidClass: return "InvalidClass";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NegativeSigma: return "NegativeSigma";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::UngroupedClass: return "UngroupedClass";
    case ErrorCode::UnsupportedGroupCount: return "UnsupportedGroupCount";
    case ErrorCode::IsolatedNode: return "IsolatedNode";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::EmptyChain: return "EmptyChain";
    case ErrorCode::IndivisibleInput: return "IndivisibleInput";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a pixel's channel values do not sum to one.
class NotNormalizedError : public Error {
 public:
  NotNormalizedError(std::size_t pixel, double sum)
      : Error(ErrorCode::NotNormalized,
              "pixel " + std::to_string(pixel) + " sums to " + std::to_string(sum)),
        pixel_(pixel),
        sum_(sum) {}

  std::size_t pixel() const noexcept { return pixel_; }
  double sum() const noexcept { return sum_; }

 private:
  std::size_t pixel_;
  double sum_;
};

class OutOfRangeError : public Error {
 public:
  OutOfRangeError(std::size_t pixel, std::size_t channel, double value)
      : Error(ErrorCode::OutOfRange, "pixel " + std::to_string(pixel) + " channel " +
                                         std::to_string(channel) + " has value " +
                                         std::to_string(value)),
        pixel_(pixel),
        channel_(channel),
        value_(value) {}

  std::size_t pixel() const noexcept { return pixel_; }
  std::size_t channel() const noexcept { return channel_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t pixel_;
  std::size_t channel_;
  double value_;
};

struct Extent {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t pixels() const noexcept { return height * width; }
  friend bool operator==(const Extent&, const Extent&) = default;
};

inline std::string to_string(const Extent& e) {
  return std::to_string(e.height) + "x" + std::to_string(e.width);
}

inline void require_same_extent(const Extent& a, const Extent& b, std::string_view what) {
  if (a != b) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
  }
}

/// Number of classes, their names and the id reserved for void pixels.
class ClassSpec {
 public:
  explicit ClassSpec(std::vector<std::string> names, ClassId ignore_id = kDefaultIgnoreId)
      : names_(std::move(names)), ignore_id_(ignore_id) {
    if (names_.empty()) throw Error(ErrorCode::InvalidSpec, "class list is empty");
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw Error(ErrorCode::InvalidSpec, "empty class name");
      if (!seen.insert(n).second) throw Error(ErrorCode::InvalidSpec, "duplicate class name '" + n + "'");
    }
    if (is_valid(ignore_id_)) {
      throw Error(ErrorCode::InvalidSpec,
                  "ignore id " + std::to_string(ignore_id_) + " collides with a class id");
    }
  }

  /// Anonymous classes named "0".."C-1".
  static ClassSpec numbered(std::size_t num_classes, ClassId ignore_id = kDefaultIgnoreId) {
    std::vector<std::string> names;
    names.reserve(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) names.push_back(std::to_string(k));
    return ClassSpec(std::move(names), ignore_id);
  }

  std::size_t num_classes() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(ClassId id) const { return names_.at(static_cast<std::size_t>(id)); }
  ClassId ignore_id() const noexcept { return ignore_id_; }

  bool is_valid(ClassId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < names_.size();
  }

  std::optional<ClassId> find(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<ClassId>(it - names_.begin());
  }

  ClassId id_of(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw Error(ErrorCode::InvalidClass, "unknown class name '" + std::string(name) + "'");
  }

  friend bool operator==(const ClassSpec&, const ClassSpec&) = default;

 private:
  std::vector<std::string> names_;
  ClassId ignore_id_;
};

/// Dense H×W map of class ids, row-major.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(Extent extent, ClassId fill = 0) : extent_(extent), data_(extent.pixels(), fill) {}
  LabelMap(Extent extent, std::vector<ClassId> data) : extent_(extent), data_(std::move(data)) {
    if (data_.size() != extent_.pixels()) {
      throw Error(ErrorCode::ShapeMismatch, "label data size does not match extent");
    }
  }

  const Extent& extent() const noexcept { return extent_; }
  std::size_t height() const noexcept { return extent_.height; }
  std::size_t width() const noexcept { return extent_.width; }
  std::size_t size() const noexcept { return data_.size(); }

  ClassId operator[](std::size_t i) const { return data_[i]; }
  ClassId& operator[](std::size_t i) { return data_[i]; }
  ClassId at(std::size_t y, std::size_t x) const { return data_[y * extent_.width + x]; }
  ClassId& at(std::size_t y, std::size_t x) { return data_[y * extent_.width + x]; }

  std::span<const ClassId> values() const noexcept { return data_; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  Extent extent_;
  std::vector<ClassId> data_;
};

/// Every value must be a class id of `spec` or its ignore id.
inline void validate_labels(const LabelMap& labels, const ClassSpec& spec) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassId v = labels[i];
    if (v != spec.ignore_id() && !spec.is_valid(v)) {
      throw Error(ErrorCode::InvalidClass,
                  "pixel " + std::to_string(i) + " has label " + std::to_string(v));
    }
  }
}

/// Dense H×W×C map of reals, channel-fastest. The tag keeps probabilities,
/// priors and features from being mixed up at call sites.
template <class Tag>
class DenseMap {
 public:
  DenseMap() = default;
  DenseMap(Extent extent, std::size_t channels, double fill = 0.0)
      : extent_(extent), channels_(channels), data_(extent.pixels() * channels, fill) {}
  DenseMap(Extent extent, std::size_t channels, std::vector<double> data)
      : extent_(extent), channels_(channels), data_(std::move(data)) {
    if (data_.size() != extent_.pixels() * channels_) {
      throw Error(ErrorCode::ShapeMismatch, "map data size does not match extent x channels");
    }
  }

  const Extent& extent() const noexcept { return extent_; }
  std::size_t height() const noexcept { return extent_.height; }
  std::size_t width() const noexcept { return extent_.width; }
  std::size_t pixels() const noexcept { return extent_.pixels(); }
  std::size_t channels() const noexcept { return channels_; }

  std::span<const double> pixel(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * channels_, channels_);
  }
  std::span<double> pixel(std::size_t i) {
    return std::span<double>(data_).subspan(i * channels_, channels_);
  }

  double at(std::size_t y, std::size_t x, std::size_t k) const {
    return data_[(y * extent_.width + x) * channels_ + k];
  }
  double& at(std::size_t y, std::size_t x, std::size_t k) {
    return data_[(y * extent_.width + x) * channels_ + k];
  }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  friend bool operator==(const DenseMap&, const DenseMap&) = default;

 private:
  Extent extent_;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

struct ProbabilityTag {};
struct FeatureTag {};
struct PriorTag {};
struct GradientTag {};

using ProbMap = DenseMap<ProbabilityTag>;
using FeatureMap = DenseMap<FeatureTag>;
using GradientMap = DenseMap<GradientTag>;

/// Checks softmax semantics: entries in [0,1] and finite, per-pixel sums
/// within kProbSumTolerance of one.
inline void validate_probmap(const ProbMap& p) {
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const auto px = p.pixel(i);
    double sum = 0.0;
    for (std::size_t k = 0; k < px.size(); ++k) {
      const double v = px[k];
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw OutOfRangeError(i, k, v);
      sum += v;
    }
    if (std::abs(sum - 1.0) > kProbSumTolerance) throw NotNormalizedError(i, sum);
  }
}

inline std::vector<double> one_hot(ClassId label, const ClassSpec& spec) {
  if (!spec.is_valid(label)) {
    throw Error(ErrorCode::InvalidClass, "cannot one-hot encode label " + std::to_string(label));
  }
  std::vector<double> v(spec.num_classes(), 0.0);
  v[static_cast<std::size_t>(label)] = 1.0;
  return v;
}

}  // namespace hrseg
