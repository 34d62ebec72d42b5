#pragma once

// `hrseg` command-line front end. Subcommands: priors, decide, evaluate,
// loss, gcn, arch. Exit codes: 0 success, 1 runtime/data error, 2 usage error.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "hrseg/hrseg.hpp"

namespace hrseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Errors that stem from how the tool was invoked rather than from data.
inline bool is_usage_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ChannelMismatch:
    case ErrorCode::IndivisibleInput:
    case ErrorCode::InvalidSpec:
    case ErrorCode::NegativeSigma:
    case ErrorCode::UnsupportedGroupCount:
      return true;
    default:
      return false;
  }
}

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

inline fs::path sidecar_path(const fs::path& out) { return fs::path(out.string() + ".json"); }

/// Creates the directory that will hold `out`, if any.
inline void ensure_parent(const fs::path& out) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
}

/// Contiguous chunks of [0, n) for `jobs` workers; merging chunk results in
/// index order keeps outputs independent of the job count.
inline std::vector<std::pair<std::size_t, std::size_t>> chunks(std::size_t n, std::size_t jobs) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t j = 0; j < jobs; ++j) out.emplace_back(n * j / jobs, n * (j + 1) / jobs);
  return out;
}

struct ClassOptions {
  std::string classes_path;
  std::string dataset;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--classes", classes_path, "class spec JSON");
    cmd->add_option("--dataset", dataset, "built-in class list and groups")
        ->check(CLI::IsMember({"camvid", "cityscapes"}));
  }

  std::optional<ClassSpec> spec() const {
    if (!classes_path.empty()) return load_class_spec(classes_path);
    if (dataset == "camvid") return presets::camvid_classes();
    if (dataset == "cityscapes") return presets::cityscapes_classes();
    return std::nullopt;
  }

  std::optional<GroupSpec> preset_groups() const {
    if (dataset == "camvid") return presets::camvid_groups();
    if (dataset == "cityscapes") return presets::cityscapes_groups();
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------

struct PriorsCommand {
  std::string manifest;
  double sigma = kDefaultPriorSigma;
  double floor = kDefaultPriorFloor;
  std::string out;
  std::size_t jobs = 1;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("priors", "estimate smoothed pixel-wise class priors from label maps");
    cmd->add_option("--manifest", manifest, "dataset manifest JSON")->required();
    cmd->add_option("--sigma", sigma, "Gaussian smoothing sigma in pixels (0 disables)")->capture_default_str();
    cmd->add_option("--floor", floor, "lower cut-off applied after smoothing")->capture_default_str();
    cmd->add_option("--out", out, "output SFT tensor (sidecar written to <out>.json)")->required();
    cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  int run(std::ostream&) const {
    const DatasetManifest m = load_manifest(manifest);
    std::vector<fs::path> labels;
    for (const auto& e : m.entries) {
      if (!e.labels.empty()) labels.push_back(e.labels);
    }
    if (labels.empty()) throw Error(ErrorCode::EmptyInput, "manifest lists no label maps");
    const Extent extent = verify_manifest_resolution(m);

    const auto parts = chunks(labels.size(), jobs);
    std::vector<PriorCounts> partial(parts.size(), PriorCounts(extent, m.class_spec.num_classes()));
    parallel_for(parts.size(), jobs, [&](std::size_t j) {
      for (std::size_t i = parts[j].first; i < parts[j].second; ++i) partial[j].add(read_pgm(labels[i]), m.class_spec);
    });
    PriorCounts total(extent, m.class_spec.num_classes());
    for (const auto& p : partial) total.merge(p);
    const PriorsMap priors = finalize_priors(total, sigma, floor, jobs);

    ensure_parent(out);
    write_sft(out, to_tensor(priors.data, DType::Float64));
    write_json(sidecar_path(out), Json{{"command", "priors"},
                                       {"sigma", priors.sigma},
                                       {"floor", priors.floor},
                                       {"manifest", manifest},
                                       {"manifest_sha256", sha256_file(manifest)},
                                       {"maps", total.maps()},
                                       {"shape", {extent.height, extent.width, m.class_spec.num_classes()}},
                                       {"class_spec", to_json(m.class_spec)}});
    return kExitOk;
  }
};

inline PriorsMap load_priors(const fs::path& path) {
  PriorData data = dense_map_from_tensor<PriorTag>(read_sft(path));
  double floor = std::numeric_limits<double>::infinity();
  for (double v : data.values()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::DomainError, path.string() + " has non-positive priors");
    floor = std::min(floor, v);
  }
  PriorsMap p{std::move(data), 0.0, floor};
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    const Json j = read_json(side);
    p.sigma = j.value("sigma", p.sigma);
    p.floor = j.value("floor", p.floor);
  }
  return p;
}

struct DecideCommand {
  std::string manifest;
  std::string rule = "bayes";
  std::string priors_path;
  std::string out_dir;
  std::size_t jobs = 1;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("decide", "turn probability maps into label maps");
    cmd->add_option("--manifest", manifest, "dataset manifest JSON (entries need probs)")->required();
    cmd->add_option("--rule", rule, "decision rule")->check(CLI::IsMember({"bayes", "ml"}))->capture_default_str();
    cmd->add_option("--priors", priors_path, "priors SFT (required for --rule ml)");
    cmd->add_option("--out-dir", out_dir, "directory for <stem>.pgm outputs")->required();
    cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  int run(std::ostream&) const {
    if (rule == "ml" && priors_path.empty()) throw UsageError("--rule ml requires --priors");
    const DatasetManifest m = load_manifest(manifest);
    std::vector<fs::path> probs;
    for (const auto& e : m.entries) {
      if (!e.probs.empty()) probs.push_back(e.probs);
    }
    if (probs.empty()) throw Error(ErrorCode::EmptyInput, "manifest lists no probability maps");
    const Extent extent = verify_manifest_resolution(m);

    std::optional<PriorsMap> priors;
    if (rule == "ml") {
      priors = load_priors(priors_path);
      require_same_extent(priors->data.extent(), extent, "priors vs manifest maps");
      if (priors->data.channels() != m.class_spec.num_classes()) {
        throw Error(ErrorCode::DimensionMismatch, "priors channel count does not match class spec");
      }
    }

    std::vector<fs::path> outputs;
    std::map<std::string, std::size_t> seen;
    for (const auto& p : probs) {
      const std::string name = p.stem().string() + ".pgm";
      if (seen[name]++ > 0) throw Error(ErrorCode::InvalidSpec, "two entries map to output " + name);
      outputs.push_back(fs::path(out_dir) / name);
    }
    fs::create_directories(out_dir);
    parallel_for(probs.size(), jobs, [&](std::size_t i) {
      const ProbMap p = read_probmap(probs[i]);
      write_pgm(outputs[i], priors ? decide_ml(p, *priors) : decide_bayes(p));
    });

    Json outs = Json::array();
    for (const auto& o : outputs) outs.push_back(o.filename().string());
    Json echo{{"command", "decide"}, {"rule", rule}, {"manifest", manifest}, {"outputs", std::move(outs)}};
    if (priors) {
      echo["priors"] = priors_path;
      echo["priors_sigma"] = priors->sigma;
      echo["priors_floor"] = priors->floor;
    }
    write_json(fs::path(out_dir) / "decide.run.json", echo);
    return kExitOk;
  }
};

struct EvaluateCommand {
  std::string pred_dir;
  std::string gt_dir;
  ClassOptions classes;
  std::string groups_path;
  std::string out;
  std::size_t jobs = 1;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("evaluate", "per-class and grouped precision / recall / IoU");
    cmd->add_option("--pred-dir", pred_dir, "directory of predicted PGM label maps")->required();
    cmd->add_option("--gt-dir", gt_dir, "directory of ground-truth PGM maps with matching names")->required();
    classes.add_to(cmd);
    cmd->add_option("--groups", groups_path, "group spec JSON (defaults to the --dataset groups)");
    cmd->add_option("--out", out, "output CSV (sidecar written to <out>.json)")->required();
    cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  int run(std::ostream&) const {
    const auto spec = classes.spec();
    if (!spec) throw UsageError("evaluate needs --classes or --dataset");
    GroupSpec groups;
    if (!groups_path.empty()) groups = group_spec_from_json(read_json(groups_path), *spec);
    else if (auto g = classes.preset_groups()) groups = *g;

    std::vector<std::string> names;
    if (!fs::is_directory(pred_dir)) throw Error(ErrorCode::Io, "'" + pred_dir + "' is not a directory");
    for (const auto& e : fs::directory_iterator(pred_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".pgm") names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw Error(ErrorCode::EmptyInput, "no .pgm predictions in '" + pred_dir + "'");
    for (const auto& n : names) {
      if (!fs::exists(fs::path(gt_dir) / n)) throw Error(ErrorCode::Io, "no ground truth for " + n);
    }

    const auto parts = chunks(names.size(), jobs);
    std::vector<ConfusionMatrix> partial(parts.size(), ConfusionMatrix(spec->num_classes()));
    parallel_for(parts.size(), jobs, [&](std::size_t j) {
      for (std::size_t i = parts[j].first; i < parts[j].second; ++i) {
        partial[j] = accumulate(std::move(partial[j]), read_pgm(fs::path(pred_dir) / names[i]),
                                read_pgm(fs::path(gt_dir) / names[i]), *spec);
      }
    });
    ConfusionMatrix cm(spec->num_classes());
    for (const auto& p : partial) cm.merge(p);
    const auto metrics = class_metrics(cm);
    const auto summary = summarize(metrics, groups);

    ensure_parent(out);
    std::ofstream csv(out, std::ios::trunc);
    if (!csv) throw Error(ErrorCode::Io, "cannot create '" + out + "'");
    write_metrics_csv(csv, *spec, metrics, summary);
    Json undefined = Json::array();
    for (ClassId c : summary.undefined) undefined.push_back(spec->name(c));
    write_json(sidecar_path(out), Json{{"command", "evaluate"},
                                       {"pred_dir", pred_dir},
                                       {"gt_dir", gt_dir},
                                       {"images", names.size()},
                                       {"pixels", cm.total()},
                                       {"class_spec", to_json(*spec)},
                                       {"groups", to_json(groups, *spec)},
                                       {"undefined_classes", std::move(undefined)}});
    return kExitOk;
  }
};

struct LossCommand {
  std::string probs;
  std::string gt;
  std::string loss = "ce";
  ClassOptions classes;
  std::string config_path;
  std::vector<double> frequencies;
  double smoothing = kDefaultFrequencySmoothing;
  bool grad_check = false;
  double step = 1e-5;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("loss", "evaluate ce / wce / ial and optionally check gradients");
    cmd->add_option("--probs", probs, "probability map SFT")->required();
    cmd->add_option("--gt", gt, "ground-truth PGM")->required();
    cmd->add_option("--loss", loss, "loss kind")->check(CLI::IsMember({"ce", "wce", "ial"}))->capture_default_str();
    classes.add_to(cmd);
    cmd->add_option("--config", config_path, "importance config JSON (ial)");
    cmd->add_option("--frequencies", frequencies, "class frequencies for wce (default: from --gt)")->delimiter(',');
    cmd->add_option("--smoothing", smoothing, "frequency weighting constant a")->capture_default_str();
    cmd->add_flag("--grad-check", grad_check, "compare the analytic gradient with central differences");
    cmd->add_option("--step", step, "finite-difference step")->capture_default_str();
  }

  int run(std::ostream& out) const {
    const ProbMap p = read_probmap(probs);
    const LabelMap labels = read_pgm(gt);
    const ClassSpec spec = classes.spec().value_or(ClassSpec::numbered(p.channels()));

    Json report{{"loss", loss}, {"probs", probs}, {"gt", gt}, {"class_spec", to_json(spec)}};
    std::vector<double> coefficients;
    if (loss == "ial") {
      ImportanceConfig cfg;
      if (!config_path.empty()) {
        cfg = importance_config_from_json(read_json(config_path), spec);
      } else if (auto g = classes.preset_groups()) {
        cfg = ImportanceConfig::with_default_targets(*g);
      } else {
        throw UsageError("--loss ial needs --config or --dataset");
      }
      const IALBreakdown b = ial(p, labels, spec, cfg);
      report["config"] = to_json(cfg, spec);
      report["value"] = b.total;
      report["breakdown"] = Json{{"group_losses", b.group_losses},
                                 {"group_pixels", b.group_pixels},
                                 {"dynamic_weights", b.dynamic_weights},
                                 {"alpha", b.alpha}};
      if (grad_check) coefficients = ial_coefficients(p, labels, spec, cfg);
    } else {
      std::optional<FrequencyWeights> weights;
      if (loss == "wce") {
        std::vector<double> f = frequencies;
        if (f.empty()) f = class_frequencies(std::span<const LabelMap>(&labels, 1), spec);
        if (f.size() != spec.num_classes()) throw UsageError("--frequencies needs one value per class");
        weights = FrequencyWeights::from_frequencies(f, smoothing);
        report["config"] = Json{{"frequencies", weights->frequencies},
                                {"smoothing", weights->smoothing},
                                {"weights", weights->weights}};
      }
      coefficients = cross_entropy_coefficients(p, labels, spec, weights ? &*weights : nullptr);
      report["value"] = weighted_nll(p, labels, spec, coefficients);
    }
    if (grad_check) {
      const auto r = check_gradient(p, labels, spec, coefficients, step);
      report["grad_check"] = Json{{"max_relative_error", r.max_relative_error},
                                  {"max_abs_error", r.max_abs_error},
                                  {"entries", r.entries},
                                  {"step", step}};
    }
    out << report.dump(2) << '\n';
    return kExitOk;
  }
};

struct GcnCommand {
  std::string features;
  std::string graph;
  std::vector<std::string> weights;
  ClassOptions classes;
  double slope = kDefaultLeakySlope;
  std::string normalization = "row";
  std::string out_probs;
  std::string out_labels;
  std::string emit_graph;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("gcn", "classify feature maps with a graph-convolution classifier");
    cmd->add_option("--features", features, "H x W x D feature SFT")->required();
    cmd->add_option("--graph", graph, "graph JSON (adjacency or groups)")->required();
    cmd->add_option("--weights", weights, "per-layer weight SFT, in order")->required();
    classes.add_to(cmd);
    cmd->add_option("--slope", slope, "leaky rectifier slope")->capture_default_str();
    cmd->add_option("--normalization", normalization, "adjacency normalization")
        ->check(CLI::IsMember({"row", "symmetric"}))
        ->capture_default_str();
    cmd->add_option("--out-probs", out_probs, "output probability SFT");
    cmd->add_option("--out-labels", out_labels, "output label PGM");
    cmd->add_option("--emit-graph", emit_graph, "write the resolved adjacency as JSON");
  }

  int run(std::ostream&) const {
    if (out_probs.empty() && out_labels.empty()) throw UsageError("gcn needs --out-probs and/or --out-labels");
    const FeatureMap f = dense_map_from_tensor<FeatureTag>(read_sft(features));
    GcnWeights w{{}, slope};
    for (const auto& path : weights) w.layers.push_back(matrix_from_tensor(read_sft(path)));
    const auto spec_opt = classes.spec();
    const Json graph_json = read_json(graph);
    std::optional<ClassSpec> spec = spec_opt;
    if (!spec) {
      std::size_t n = graph_json.contains("adjacency") ? graph_json.at("adjacency").size() : 0;
      if (n == 0) throw UsageError("gcn needs --classes or --dataset with a group-rule graph");
      spec = ClassSpec::numbered(n);
    }
    const GraphSpec g = graph_from_json(graph_json, *spec);
    const auto mode = normalization == "row" ? AdjacencyNormalization::Row : AdjacencyNormalization::Symmetric;
    const Matrix out = gcn_forward(embed_one_hot(*spec), g, w, mode);
    const ClassifierMatrix cls = reshape_classifier(out, spec->num_classes(), f.channels());
    const ProbMap p = classify_features(f, cls);

    for (const auto& path : {out_probs, out_labels, emit_graph}) {
      if (!path.empty()) ensure_parent(path);
    }
    if (!out_probs.empty()) write_sft(out_probs, to_tensor(p, DType::Float64));
    if (!out_labels.empty()) write_pgm(out_labels, decide_bayes(p));
    if (!emit_graph.empty()) write_json(emit_graph, to_json(g));
    const std::string primary = out_labels.empty() ? out_probs : out_labels;
    write_json(sidecar_path(primary), Json{{"command", "gcn"},
                                           {"features", features},
                                           {"graph", graph},
                                           {"weights", weights},
                                           {"slope", slope},
                                           {"normalization", normalization},
                                           {"class_spec", to_json(*spec)}});
    return kExitOk;
  }
};

inline Extent parse_extent(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const auto h = std::stoull(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const auto rest = s.substr(x + 1);
    const auto w = std::stoull(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(s);
    return Extent{h, w};
  } catch (const std::exception&) {
    throw UsageError("expected HxW, got '" + s + "'");
  }
}

struct ArchCommand {
  std::string variant = "basic";
  std::vector<std::size_t> dilations = arch::kErfDilationsSmall;
  std::size_t kernel = 7;
  std::string input = "768x768";
  std::size_t width = arch::kDefaultDecoderWidth;
  bool bias = false;
  std::string json_out;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("arch", "shapes, receptive fields and parameter counts of a decoder variant");
    cmd->add_option("--variant", variant, "decoder block variant")
        ->check(CLI::IsMember({"basic", "erf", "gcnet-late", "gcnet-early"}))
        ->capture_default_str();
    cmd->add_option("--dilations", dilations, "erf dilation rates")->delimiter(',');
    cmd->add_option("--kernel", kernel, "gcnet kernel size")->capture_default_str();
    cmd->add_option("--input", input, "input size HxW")->capture_default_str();
    cmd->add_option("--width", width, "decoder width")->capture_default_str();
    cmd->add_flag("--bias", bias, "count convolution biases");
    cmd->add_option("--json", json_out, "also write the report as JSON");
  }

  int run(std::ostream& out) const {
    arch::UdbVariant v;
    if (variant == "basic") v = arch::UdbVariant::basic();
    else if (variant == "erf") v = arch::UdbVariant::erf(dilations);
    else if (variant == "gcnet-late") v = arch::UdbVariant::gcnet_late(kernel);
    else v = arch::UdbVariant::gcnet_early(kernel);
    const auto r = arch::report_variant(v, parse_extent(input), width, bias);
    arch::write_report_text(out, r);
    if (!json_out.empty()) {
      Json j = arch::to_json(r);
      j["config"] = Json{{"variant", variant}, {"dilations", dilations}, {"kernel", kernel},
                         {"input", input},     {"width", width},         {"bias", bias}};
      ensure_parent(json_out);
      write_json(json_out, j);
    }
    return kExitOk;
  }
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"high-recall segmentation decision and evaluation toolkit", "hrseg"};
  app.require_subcommand(1);
  PriorsCommand priors;
  DecideCommand decide;
  EvaluateCommand evaluate;
  LossCommand loss;
  GcnCommand gcn;
  ArchCommand arch_cmd;
  priors.add_to(app);
  decide.add_to(app);
  evaluate.add_to(app);
  loss.add_to(app);
  gcn.add_to(app);
  arch_cmd.add_to(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "priors") return priors.run(out);
    if (name == "decide") return decide.run(out);
    if (name == "evaluate") return evaluate.run(out);
    if (name == "loss") return loss.run(out);
    if (name == "gcn") return gcn.run(out);
    return arch_cmd.run(out);
  } catch (const UsageError& e) {
    err << "hrseg " << name << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "hrseg " << name << ": " << e.what() << '\n';
    return is_usage_error(e.code()) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "hrseg " << name << ": " << e.what() << '\n';
    return kExitRuntime;
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"hrseg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace hrseg::cli
