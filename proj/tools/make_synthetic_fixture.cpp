// Writes the bundled class-imbalanced fixture: label maps, probability maps
// from a simulated prior-biased classifier, a class spec and a manifest.
//
// Layout of every image: a road band along the bottom, one small sign blob
// in the right half, background elsewhere, and an ignored top row. The
// simulated posterior multiplies a noisy per-class likelihood by the global
// class frequencies, so the Bayes rule under-reports the rare classes.

#include <cmath>
#include <cstdio>
#include <numbers>

#include <CLI11.hpp>

#include "hrseg/hrseg.hpp"

namespace {

using namespace hrseg;

constexpr std::size_t kSide = 32;
constexpr std::size_t kImages = 8;
constexpr std::size_t kClasses = 3;

double gaussian(SeededRng& rng) {
  // Box-Muller on the library generator keeps the fixture platform-stable.
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

LabelMap make_labels(SeededRng& rng) {
  const Extent e{kSide, kSide};
  std::vector<ClassId> v(e.pixels(), 0);
  const std::size_t band = 6 + rng.below(4);
  const std::size_t blob = 3 + rng.below(3);
  const std::size_t by = 8 + rng.below(kSide - band - blob - 8);
  const std::size_t bx = kSide / 2 + rng.below(kSide / 2 - blob);
  for (std::size_t y = 0; y < kSide; ++y) {
    for (std::size_t x = 0; x < kSide; ++x) {
      ClassId c = 0;
      if (y >= kSide - band) c = 1;
      if (y >= by && y < by + blob && x >= bx && x < bx + blob) c = 2;
      if (y == 0) c = kDefaultIgnoreId;
      v[y * kSide + x] = c;
    }
  }
  return LabelMap(e, std::move(v));
}

ProbMap make_probs(const LabelMap& gt, const std::vector<double>& frequencies, double signal, SeededRng& rng) {
  ProbMap p(gt.extent(), kClasses, 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    auto px = p.pixel(i);
    const ClassId y = gt[i];
    double sum = 0.0;
    for (std::size_t k = 0; k < kClasses; ++k) {
      const double hit = (y != kDefaultIgnoreId && static_cast<std::size_t>(y) == k) ? signal : 0.0;
      px[k] = std::exp(hit + gaussian(rng)) * frequencies[k];
      sum += px[k];
    }
    for (auto& v : px) v /= sum;
  }
  return p;
}

double mean_recall(const ConfusionMatrix& cm) {
  const auto summary = summarize(class_metrics(cm), GroupSpec::single(cm.num_classes()));
  return summary.overall.recall.value_or(0.0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"write the bundled synthetic fixture"};
  std::string out = "data/synthetic8";
  std::uint64_t seed = 20180;
  double signal = 2.0;
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  app.add_option("--signal", signal, "log-likelihood margin of the true class")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const ClassSpec spec({"background", "road", "sign"});
    SeededRng rng(seed);
    std::vector<LabelMap> labels;
    for (std::size_t n = 0; n < kImages; ++n) labels.push_back(make_labels(rng));
    const std::vector<double> freq = class_frequencies(labels, spec);

    const fs::path root(out);
    fs::create_directories(root / "labels");
    fs::create_directories(root / "probs");
    write_json(root / "classes.json", to_json(spec));

    Json entries = Json::array();
    ConfusionMatrix bayes(kClasses), ml(kClasses);
    const PriorsMap uniform_free = estimate_priors(labels, spec);
    for (std::size_t n = 0; n < kImages; ++n) {
      char stem[16];
      std::snprintf(stem, sizeof stem, "img%02zu", n);
      const ProbMap p = make_probs(labels[n], freq, signal, rng);
      write_pgm(root / "labels" / (std::string(stem) + ".pgm"), labels[n]);
      write_sft(root / "probs" / (std::string(stem) + ".sft"), to_tensor(p, DType::Float64));
      entries.push_back(Json{{"probs", "probs/" + std::string(stem) + ".sft"},
                             {"labels", "labels/" + std::string(stem) + ".pgm"}});
      bayes = accumulate(std::move(bayes), decide_bayes(p), labels[n], spec);
      ml = accumulate(std::move(ml), decide_ml(p, uniform_free), labels[n], spec);
    }
    write_json(root / "manifest.json", Json{{"classes", "classes.json"}, {"entries", std::move(entries)}});

    const double rb = mean_recall(bayes);
    const double rm = mean_recall(ml);
    std::printf("frequencies %.4f %.4f %.4f\n", freq[0], freq[1], freq[2]);
    std::printf("mean recall bayes %.4f ml %.4f\n", rb, rm);
    if (rm < rb) {
      std::fprintf(stderr, "fixture does not show the recall gain; try another seed\n");
      return 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "make_synthetic_fixture: %s\n", e.what());
    return 1;
  }
  return 0;
}
