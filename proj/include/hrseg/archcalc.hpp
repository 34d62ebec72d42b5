#pragma once

// Analytic shape, receptive-field and parameter accounting for the decoder
// architecture: a /32 encoder, a pyramid-pooling context module and three
// upsampling decoder blocks (UDBs) in four variants.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrseg/core.hpp"

namespace hrseg::arch {

enum class LayerKind { Conv, FactorizedPair, GcnetBlock, Pool, UpsampleBilinear, Pointwise };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::FactorizedPair: return "factorized";
    case LayerKind::GcnetBlock: return "gcnet";
    case LayerKind::Pool: return "pool";
    case LayerKind::UpsampleBilinear: return "upsample";
    case LayerKind::Pointwise: return "pointwise";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::size_t kh = 1;
  std::size_t kw = 1;
  std::size_t stride = 1;    // upsample: scale factor
  std::size_t dilation = 1;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t mid_channels = 0;  // factorized pair only; 0 means out_channels

  static LayerSpec conv(std::size_t k, std::size_t cin, std::size_t cout, std::size_t stride = 1,
                        std::size_t dilation = 1) {
    return {LayerKind::Conv, k, k, stride, dilation, cin, cout, 0};
  }
  static LayerSpec pointwise(std::size_t cin, std::size_t cout) {
    return {LayerKind::Pointwise, 1, 1, 1, 1, cin, cout, 0};
  }
  /// k×1 followed by 1×k.
  static LayerSpec factorized(std::size_t k, std::size_t cin, std::size_t cout, std::size_t dilation = 1,
                              std::size_t mid = 0) {
    return {LayerKind::FactorizedPair, k, k, 1, dilation, cin, cout, mid};
  }
  /// (1×k -> k×1) + (k×1 -> 1×k), channel preserving.
  static LayerSpec gcnet(std::size_t k, std::size_t channels) {
    return {LayerKind::GcnetBlock, k, k, 1, 1, channels, channels, 0};
  }
  static LayerSpec pool(std::size_t k, std::size_t stride, std::size_t channels) {
    return {LayerKind::Pool, k, k, stride, 1, channels, channels, 0};
  }
  static LayerSpec upsample(std::size_t factor, std::size_t channels) {
    return {LayerKind::UpsampleBilinear, 1, 1, factor, 1, channels, channels, 0};
  }

  std::size_t mid() const { return mid_channels == 0 ? out_channels : mid_channels; }
};

struct ReceptiveField {
  std::size_t height = 1;
  std::size_t width = 1;
  friend bool operator==(const ReceptiveField&, const ReceptiveField&) = default;
};

namespace detail {

/// Exact non-negative rational, enough for jumps under strides and upsampling.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Fraction of(std::uint64_t n, std::uint64_t d) {
    const std::uint64_t g = std::gcd(n, d);
    return g == 0 ? Fraction{0, 1} : Fraction{n / g, d / g};
  }
  Fraction operator+(const Fraction& o) const { return of(num * o.den + o.num * den, den * o.den); }
  Fraction operator*(const Fraction& o) const { return of(num * o.num, den * o.den); }
  bool operator<(const Fraction& o) const { return num * o.den < o.num * den; }
  std::uint64_t ceil() const { return (num + den - 1) / den; }
};

/// One spatial axis: receptive field (in input pixels) and current jump.
struct AxisState {
  Fraction rf{1, 1};
  Fraction jump{1, 1};

  void apply(std::size_t k, std::size_t dilation, std::size_t stride) {
    rf = rf + Fraction::of((k - 1) * dilation, 1) * jump;
    jump = jump * Fraction::of(stride, 1);
  }
};

struct State {
  AxisState y;
  AxisState x;
};

inline void apply_layer(State& s, const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Conv:
    case LayerKind::Pool:
    case LayerKind::Pointwise:
      s.y.apply(l.kh, l.dilation, l.stride);
      s.x.apply(l.kw, l.dilation, l.stride);
      break;
    case LayerKind::FactorizedPair:
      s.y.apply(l.kh, l.dilation, 1);  // k×1
      s.x.apply(l.kw, l.dilation, 1);  // 1×k
      break;
    case LayerKind::GcnetBlock: {
      // both branches see one k-tap pass per axis; take the wider branch
      State a = s, b = s;
      a.x.apply(l.kw, 1, 1);
      a.y.apply(l.kh, 1, 1);
      b.y.apply(l.kh, 1, 1);
      b.x.apply(l.kw, 1, 1);
      s.y.rf = std::max(a.y.rf, b.y.rf, [](const Fraction& p, const Fraction& q) { return p < q; });
      s.x.rf = std::max(a.x.rf, b.x.rf, [](const Fraction& p, const Fraction& q) { return p < q; });
      break;
    }
    case LayerKind::UpsampleBilinear:
      s.y.jump = s.y.jump * Fraction::of(1, l.stride);
      s.x.jump = s.x.jump * Fraction::of(1, l.stride);
      break;
  }
}

}  // namespace detail

/// RF = 1 + sum_i (k_i - 1) d_i prod_{j<i} s_j per axis, in input pixels.
inline ReceptiveField receptive_field(std::span<const LayerSpec> chain) {
  if (chain.empty()) throw Error(ErrorCode::EmptyChain, "receptive field of an empty chain");
  detail::State s;
  for (const auto& l : chain) {
    if (l.kh == 0 || l.kw == 0 || l.stride == 0 || l.dilation == 0) {
      throw Error(ErrorCode::InvalidSpec, "layer sizes must be positive");
    }
    detail::apply_layer(s, l);
  }
  return ReceptiveField{static_cast<std::size_t>(s.y.rf.ceil()), static_cast<std::size_t>(s.x.rf.ceil())};
}

inline std::uint64_t layer_params(const LayerSpec& l, bool with_bias) {
  const std::uint64_t cin = l.in_channels, cout = l.out_channels;
  switch (l.kind) {
    case LayerKind::Conv:
    case LayerKind::Pointwise:
      return l.kh * l.kw * cin * cout + (with_bias ? cout : 0);
    case LayerKind::FactorizedPair: {
      const std::uint64_t mid = l.mid();
      return l.kh * cin * mid + l.kw * mid * cout + (with_bias ? mid + cout : 0);
    }
    case LayerKind::GcnetBlock:
      return 4 * l.kh * cin * cin;
    case LayerKind::Pool:
    case LayerKind::UpsampleBilinear:
      return 0;
  }
  return 0;
}

inline std::uint64_t param_count(std::span<const LayerSpec> chain, bool with_bias = false) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const auto& l = chain[i];
    if ((l.kind == LayerKind::GcnetBlock || l.kind == LayerKind::Pool ||
         l.kind == LayerKind::UpsampleBilinear) && l.in_channels != l.out_channels) {
      throw Error(ErrorCode::ChannelMismatch, std::string(to_string(l.kind)) + " must preserve channels");
    }
    if (i > 0 && chain[i - 1].out_channels != l.in_channels) {
      throw Error(ErrorCode::ChannelMismatch, "layer " + std::to_string(i) + " expects " +
                                                  std::to_string(l.in_channels) + " channels, previous produces " +
                                                  std::to_string(chain[i - 1].out_channels));
    }
    total += layer_params(l, with_bias);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Decoder block variants

struct UdbVariant {
  enum class Kind { Basic, Erf, GcnetLate, GcnetEarly };
  Kind kind = Kind::Basic;
  std::vector<std::size_t> dilations;  // erf only
  std::size_t kernel = 7;              // gcnet only

  static UdbVariant basic() { return {Kind::Basic, {}, 0}; }
  static UdbVariant erf(std::vector<std::size_t> dilations) {
    if (dilations.empty()) throw Error(ErrorCode::InvalidSpec, "erf variant needs at least one dilation");
    for (auto d : dilations) {
      if (d == 0) throw Error(ErrorCode::InvalidSpec, "dilations must be positive");
    }
    return {Kind::Erf, std::move(dilations), 0};
  }
  static UdbVariant gcnet_late(std::size_t k) { return {Kind::GcnetLate, {}, check_kernel(k)}; }
  static UdbVariant gcnet_early(std::size_t k) { return {Kind::GcnetEarly, {}, check_kernel(k)}; }

  std::string name() const {
    switch (kind) {
      case Kind::Basic: return "basic";
      case Kind::Erf: {
        std::string s = "erf(";
        for (std::size_t i = 0; i < dilations.size(); ++i) s += (i ? "," : "") + std::to_string(dilations[i]);
        return s + ")";
      }
      case Kind::GcnetLate: return "gcnet-late(k=" + std::to_string(kernel) + ")";
      case Kind::GcnetEarly: return "gcnet-early(k=" + std::to_string(kernel) + ")";
    }
    return "?";
  }

 private:
  static std::size_t check_kernel(std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidSpec, "kernel size must be positive");
    return k;
  }
};

inline const std::vector<std::size_t> kErfDilationsSmall = {1, 2, 3};
inline const std::vector<std::size_t> kErfDilationsLarge = {2, 4, 8};
inline constexpr std::size_t kDefaultDecoderWidth = 128;

/// A decoder block: a lateral path from the encoder and an upsampled path
/// from the previous stage, summed, then the post-merge layers.
struct UdbLayout {
  std::vector<LayerSpec> lateral;
  std::vector<LayerSpec> upsampled;
  std::vector<LayerSpec> merged;
};

inline UdbLayout udb_layout(const UdbVariant& v, std::size_t lateral_channels, std::size_t width) {
  UdbLayout u;
  u.lateral.push_back(LayerSpec::pointwise(lateral_channels, width));
  u.upsampled.push_back(LayerSpec::upsample(2, width));
  switch (v.kind) {
    case UdbVariant::Kind::Basic:
      u.merged.push_back(LayerSpec::conv(3, width, width));
      break;
    case UdbVariant::Kind::Erf:
      for (auto d : v.dilations) u.merged.push_back(LayerSpec::factorized(3, width, width, d));
      break;
    case UdbVariant::Kind::GcnetLate:
      u.lateral.push_back(LayerSpec::gcnet(v.kernel, width));
      break;
    case UdbVariant::Kind::GcnetEarly:
      u.merged.push_back(LayerSpec::gcnet(v.kernel, width));
      break;
  }
  return u;
}

/// Receptive field in block-output pixels: the widest pre-merge path
/// (upsampling treated as a resolution change only) followed by the
/// post-merge layers.
inline ReceptiveField udb_receptive_field(const UdbLayout& u) {
  ReceptiveField best;
  for (const auto* branch : {&u.lateral, &u.upsampled}) {
    std::vector<LayerSpec> chain;
    for (const auto& l : *branch) {
      if (l.kind != LayerKind::UpsampleBilinear) chain.push_back(l);
    }
    chain.insert(chain.end(), u.merged.begin(), u.merged.end());
    if (chain.empty()) continue;
    const auto rf = receptive_field(chain);
    best.height = std::max(best.height, rf.height);
    best.width = std::max(best.width, rf.width);
  }
  return best;
}

inline std::uint64_t udb_params(const UdbLayout& u, bool with_bias = false) {
  return param_count(u.lateral, with_bias) + param_count(u.upsampled, with_bias) + param_count(u.merged, with_bias);
}

// ---------------------------------------------------------------------------
// Whole-network report

inline constexpr std::size_t kEncoderDownsampling = 32;
inline constexpr std::size_t kEncoderStages = 5;
inline constexpr std::size_t kEncoderWidths[kEncoderStages] = {64, 64, 128, 256, 512};
inline constexpr std::size_t kSppGrids[4] = {1, 2, 4, 8};
inline constexpr std::size_t kDecoderBlocks = 3;
inline constexpr std::size_t kFinalUpsampling = 4;

struct StageReport {
  std::string name;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::optional<ReceptiveField> rf;
  std::optional<std::uint64_t> params;
};

struct ArchReport {
  UdbVariant variant;
  Extent input;
  std::size_t decoder_width = kDefaultDecoderWidth;
  bool with_bias = false;
  std::vector<StageReport> stages;
  std::vector<ReceptiveField> udb_rf;
  std::vector<std::uint64_t> udb_params;
  std::uint64_t spp_params = 0;
  std::uint64_t decoder_params = 0;  // SPP + all UDBs; encoder weights are not modelled
  Extent output;
};

inline ArchReport report_variant(const UdbVariant& variant, Extent input,
                                 std::size_t width = kDefaultDecoderWidth, bool with_bias = false) {
  if (input.height == 0 || input.width == 0 || input.height % kEncoderDownsampling != 0 ||
      input.width % kEncoderDownsampling != 0) {
    throw Error(ErrorCode::IndivisibleInput,
                "input " + to_string(input) + " is not divisible by " + std::to_string(kEncoderDownsampling));
  }
  if (width == 0 || width % 4 != 0) {
    throw Error(ErrorCode::InvalidSpec, "decoder width must be a positive multiple of 4");
  }
  ArchReport r{variant, input, width, with_bias, {}, {}, {}, 0, 0, {}};
  r.stages.push_back({"input", input.height, input.width, 3, std::nullopt, std::nullopt});

  std::size_t h = input.height, w = input.width;
  for (std::size_t s = 0; s < kEncoderStages; ++s) {
    h /= 2;
    w /= 2;
    r.stages.push_back({"encoder.stage" + std::to_string(s + 1), h, w, kEncoderWidths[s], std::nullopt, std::nullopt});
  }

  const std::size_t enc_out = kEncoderWidths[kEncoderStages - 1];
  const std::size_t branch = width / 4;
  for (std::size_t g : kSppGrids) {
    const std::vector<LayerSpec> chain = {LayerSpec::pointwise(enc_out, branch)};
    const auto p = param_count(chain, with_bias);
    r.spp_params += p;
    r.stages.push_back({"spp.pool" + std::to_string(g), g, g, branch, std::nullopt, p});
  }
  r.stages.push_back({"spp.concat", h, w, branch * 4, std::nullopt, 0});
  {
    const std::vector<LayerSpec> fuse = {LayerSpec::pointwise(branch * 4, width)};
    const auto p = param_count(fuse, with_bias);
    r.spp_params += p;
    r.stages.push_back({"spp.fuse", h, w, width, std::nullopt, p});
  }

  for (std::size_t b = 0; b < kDecoderBlocks; ++b) {
    const std::size_t lateral_stage = kEncoderStages - 2 - b;  // stage4, stage3, stage2
    const std::size_t lateral_ch = kEncoderWidths[lateral_stage];
    h *= 2;
    w *= 2;
    const UdbLayout u = udb_layout(variant, lateral_ch, width);
    const std::string prefix = "udb" + std::to_string(b + 1);
    for (const auto& l : u.lateral) {
      const std::vector<LayerSpec> one = {l};
      r.stages.push_back({prefix + ".lateral." + std::string(to_string(l.kind)), h, w, l.out_channels,
                          receptive_field(one), layer_params(l, with_bias)});
    }
    r.stages.push_back({prefix + ".upsample", h, w, width, std::nullopt, 0});
    r.stages.push_back({prefix + ".merge", h, w, width, std::nullopt, 0});
    for (std::size_t i = 0; i < u.merged.size(); ++i) {
      const auto& l = u.merged[i];
      std::string name = prefix + "." + std::string(to_string(l.kind));
      if (u.merged.size() > 1) name += std::to_string(i + 1);
      if (l.kind == LayerKind::FactorizedPair) name += "(d=" + std::to_string(l.dilation) + ")";
      const std::vector<LayerSpec> one = {l};
      r.stages.push_back({name, h, w, l.out_channels, receptive_field(one), layer_params(l, with_bias)});
    }
    const auto rf = udb_receptive_field(u);
    const auto p = udb_params(u, with_bias);
    r.udb_rf.push_back(rf);
    r.udb_params.push_back(p);
    r.stages.push_back({prefix, h, w, width, rf, p});
  }

  h *= kFinalUpsampling;
  w *= kFinalUpsampling;
  r.stages.push_back({"output.upsample", h, w, width, std::nullopt, 0});
  r.output = Extent{h, w};
  r.decoder_params = r.spp_params;
  for (auto p : r.udb_params) r.decoder_params += p;
  return r;
}

inline void write_report_text(std::ostream& out, const ArchReport& r) {
  out << "variant: " << r.variant.name() << "  input: " << r.input.height << "x" << r.input.width
      << "  width: " << r.decoder_width << "  bias: " << (r.with_bias ? "yes" : "no") << '\n';
  out << std::left << std::setw(28) << "stage" << std::setw(18) << "shape" << std::setw(10) << "rf"
      << "params\n";
  for (const auto& s : r.stages) {
    std::ostringstream shape, rf;
    shape << s.height << "x" << s.width << "x" << s.channels;
    if (s.rf) rf << s.rf->height << "x" << s.rf->width;
    else rf << "-";
    out << std::left << std::setw(28) << s.name << std::setw(18) << shape.str() << std::setw(10) << rf.str()
        << (s.params ? std::to_string(*s.params) : std::string("-")) << '\n';
  }
  out << "decoder params: " << r.decoder_params << '\n';
  out << "output: " << r.output.height << "x" << r.output.width << '\n';
}

inline nlohmann::json to_json(const ArchReport& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : r.stages) {
    nlohmann::json j{{"name", s.name}, {"shape", {s.height, s.width, s.channels}}};
    j["rf"] = s.rf ? nlohmann::json{s.rf->height, s.rf->width} : nlohmann::json(nullptr);
    j["params"] = s.params ? nlohmann::json(*s.params) : nlohmann::json(nullptr);
    stages.push_back(std::move(j));
  }
  return nlohmann::json{{"variant", r.variant.name()},
                        {"input", {r.input.height, r.input.width}},
                        {"decoder_width", r.decoder_width},
                        {"with_bias", r.with_bias},
                        {"stages", std::move(stages)},
                        {"spp_params", r.spp_params},
                        {"decoder_params", r.decoder_params},
                        {"output", {r.output.height, r.output.width}}};
}

}  // namespace hrseg::arch
