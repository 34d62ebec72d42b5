#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace hrseg;
using namespace hrseg::arch;

namespace {

ReceptiveField rf(std::initializer_list<LayerSpec> chain) {
  const std::vector<LayerSpec> v(chain);
  return receptive_field(v);
}

std::uint64_t params(std::initializer_list<LayerSpec> chain, bool bias = false) {
  const std::vector<LayerSpec> v(chain);
  return param_count(v, bias);
}

const StageReport& stage(const ArchReport& r, const std::string& name) {
  for (const auto& s : r.stages)
    if (s.name == name) return s;
  throw std::runtime_error("no stage " + name);
}

/// 1 + sum (k-1) d prod(strides) by direct accumulation, square kernels only.
std::size_t rf_recurrence(const std::vector<std::array<std::size_t, 3>>& layers) {
  std::size_t r = 1, jump = 1;
  for (const auto& [k, d, s] : layers) {
    r += (k - 1) * d * jump;
    jump *= s;
  }
  return r;
}

}  // namespace

TEST(ReceptiveFieldTest, HandValues) {
  EXPECT_EQ(rf({LayerSpec::conv(3, 8, 8), LayerSpec::conv(3, 8, 8)}), (ReceptiveField{5, 5}));
  EXPECT_EQ(rf({LayerSpec::factorized(3, 8, 8)}), (ReceptiveField{3, 3}));
  EXPECT_EQ(rf({LayerSpec::factorized(3, 8, 8, 1), LayerSpec::factorized(3, 8, 8, 2),
                LayerSpec::factorized(3, 8, 8, 3)}),
            (ReceptiveField{13, 13}));
  EXPECT_EQ(rf({LayerSpec::gcnet(7, 8)}), (ReceptiveField{7, 7}));
  EXPECT_EQ(rf({LayerSpec::conv(3, 8, 8, 2), LayerSpec::conv(3, 8, 8)}), (ReceptiveField{7, 7}));
  try {
    receptive_field(std::vector<LayerSpec>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyChain);
  }
}

TEST(ReceptiveFieldTest, MatchesRecurrenceOnRandomChains) {
  SeededRng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<LayerSpec> chain;
    std::vector<std::array<std::size_t, 3>> plain;
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = 1 + rng.below(7), d = 1 + rng.below(4), s = 1 + rng.below(2);
      chain.push_back(LayerSpec::conv(k, 4, 4, s, d));
      plain.push_back({k, d, s});
    }
    const auto r = receptive_field(chain);
    EXPECT_EQ(r.height, rf_recurrence(plain));
    EXPECT_EQ(r.width, r.height);
  }
}

TEST(ReceptiveFieldTest, MonotoneInKernelAndDilation) {
  SeededRng rng(52);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LayerSpec> chain;
    for (std::size_t i = 0; i < 4; ++i) {
      chain.push_back(LayerSpec::conv(1 + rng.below(5), 4, 4, 1 + rng.below(2), 1 + rng.below(3)));
    }
    const auto base = receptive_field(chain);
    auto bigger = chain;
    const std::size_t at = rng.below(4);
    if (rng.below(2)) bigger[at].kh = bigger[at].kw = bigger[at].kh + 1;
    else ++bigger[at].dilation;
    EXPECT_GE(receptive_field(bigger).height, base.height);
  }
}

TEST(ParamCount, HandValues) {
  constexpr std::uint64_t C = 64;
  EXPECT_EQ(params({LayerSpec::conv(3, C, C)}), 9 * C * C);
  EXPECT_EQ(params({LayerSpec::conv(3, C, C)}, true), 9 * C * C + C);
  EXPECT_EQ(params({LayerSpec::factorized(3, C, C)}), 6 * C * C);
  EXPECT_EQ(params({LayerSpec::gcnet(7, C)}), 28 * C * C);
  EXPECT_EQ(params({LayerSpec::pointwise(512, 128), LayerSpec::upsample(2, 128)}), 512u * 128u);
  try {
    params({LayerSpec::conv(3, 8, 16), LayerSpec::conv(3, 8, 8)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ChannelMismatch);
  }
}

TEST(ParamCount, FactorizedMatchesSquareRfWithFewerParameters) {
  for (std::size_t k = 2; k <= 9; ++k) {
    for (std::size_t d = 1; d <= 3; ++d) {
      EXPECT_EQ(rf({LayerSpec::factorized(k, 16, 16, d)}), rf({LayerSpec::conv(k, 16, 16, 1, d)}));
      const auto pair = params({LayerSpec::factorized(k, 16, 16, d)});
      const auto square = params({LayerSpec::conv(k, 16, 16, 1, d)});
      // 2k versus k^2 taps: equal at k = 2, fewer beyond
      if (k == 2) EXPECT_EQ(pair, square);
      else EXPECT_LT(pair, square);
    }
  }
}

TEST(ReportVariant, ShapesThroughTheNetwork) {
  const auto r = report_variant(UdbVariant::erf(kErfDilationsSmall), {768, 768});
  EXPECT_EQ(stage(r, "encoder.stage5").height, 24u);
  EXPECT_EQ(stage(r, "spp.fuse").width, 24u);
  EXPECT_EQ(stage(r, "udb3").height, 192u);
  EXPECT_EQ(stage(r, "udb3").width, 192u);
  EXPECT_EQ(r.output, (Extent{768, 768}));
  EXPECT_EQ(r.stages.back().name, "output.upsample");
  EXPECT_EQ(r.stages.back().height, 768u);
}

TEST(ReportVariant, ErfReceptiveFieldsAndBasicComparison) {
  const auto erf = report_variant(UdbVariant::erf({1, 2, 3}), {512, 1024});
  const auto basic = report_variant(UdbVariant::basic(), {512, 1024});
  ASSERT_EQ(erf.udb_rf.size(), 3u);
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(erf.udb_rf[b], (ReceptiveField{13, 13}));
    EXPECT_EQ(basic.udb_rf[b], (ReceptiveField{3, 3}));
  }
  const auto large = report_variant(UdbVariant::erf(kErfDilationsLarge), {512, 1024});
  EXPECT_EQ(large.udb_rf[0], (ReceptiveField{29, 29}));
}

TEST(ReportVariant, GcnetEarlyAndLateShareTotalsButNotOrder) {
  const auto early = report_variant(UdbVariant::gcnet_early(7), {768, 768});
  const auto late = report_variant(UdbVariant::gcnet_late(7), {768, 768});
  EXPECT_EQ(early.decoder_params, late.decoder_params);
  EXPECT_EQ(early.udb_params, late.udb_params);
  std::vector<std::string> a, b;
  for (const auto& s : early.stages) a.push_back(s.name);
  for (const auto& s : late.stages) b.push_back(s.name);
  EXPECT_NE(a, b);
  EXPECT_NO_THROW(stage(late, "udb1.lateral.gcnet"));
  EXPECT_NO_THROW(stage(early, "udb1.gcnet"));
}

TEST(ReportVariant, UdbParameterBreakdown) {
  constexpr std::uint64_t W = 128;
  const auto r = report_variant(UdbVariant::erf({1, 2, 3}), {768, 768}, W);
  // lateral 1x1 from stage4 (256 channels) plus three factorized pairs
  EXPECT_EQ(r.udb_params[0], 256 * W + 3 * 6 * W * W);
  EXPECT_EQ(r.udb_params[2], 64 * W + 3 * 6 * W * W);
  EXPECT_EQ(r.spp_params, 4 * 512 * (W / 4) + W * W);
}

TEST(ReportVariant, OutputEqualsInputForEveryDivisibleSize) {
  for (std::size_t h = 32; h <= 512; h += 96) {
    for (std::size_t w = 32; w <= 1024; w += 160) {
      for (const auto& v : {UdbVariant::basic(), UdbVariant::erf({2, 4, 8}), UdbVariant::gcnet_early(5)}) {
        EXPECT_EQ(report_variant(v, {h, w}).output, (Extent{h, w}));
      }
    }
  }
}

TEST(ReportVariant, RejectsIndivisibleInputAndBadSettings) {
  try {
    report_variant(UdbVariant::basic(), {700, 768});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndivisibleInput);
  }
  EXPECT_THROW(report_variant(UdbVariant::basic(), {768, 768}, 130), Error);
  EXPECT_THROW(UdbVariant::erf({}), Error);
  EXPECT_THROW(UdbVariant::erf({1, 0}), Error);
}

TEST(ReportVariant, TextAndJsonCarryTheSameStages) {
  const auto r = report_variant(UdbVariant::erf({1, 2, 3}), {768, 768});
  std::ostringstream text;
  write_report_text(text, r);
  EXPECT_NE(text.str().find("13x13"), std::string::npos);
  EXPECT_NE(text.str().find("output: 768x768"), std::string::npos);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("stages").size(), r.stages.size());
  EXPECT_EQ(j.at("output"), (nlohmann::json{768, 768}));
}
