#pragma once

// File formats: binary PGM label maps, SFT tensors and JSON class specs /
// dataset manifests.
//
// SFT layout (little-endian): "SFT1", u8 dtype (0 = f32, 1 = f64), u8 rank,
// rank x u32 dims, row-major payload.

#include <array>
#include <cctype>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrseg/core.hpp"

namespace hrseg {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// PGM

inline constexpr ClassId kPgmMaxVal = 255;

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
      in.get();
    } else {
      return;
    }
  }
}

inline std::size_t read_pnm_int(std::istream& in, std::string_view what) {
  skip_pnm_space(in);
  std::size_t v = 0;
  if (!(in >> v)) throw Error(ErrorCode::Parse, "PGM header: bad " + std::string(what));
  return v;
}

inline std::ifstream open_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return in;
}

inline std::ofstream create_binary(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create '" + path.string() + "'");
  return out;
}

}  // namespace detail

inline Extent read_pgm_header(std::istream& in) {
  char magic[2] = {};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') {
    throw Error(ErrorCode::Parse, "not a binary PGM (P5) stream");
  }
  Extent e;
  e.width = detail::read_pnm_int(in, "width");
  e.height = detail::read_pnm_int(in, "height");
  const std::size_t maxval = detail::read_pnm_int(in, "maxval");
  if (maxval != static_cast<std::size_t>(kPgmMaxVal)) {
    throw Error(ErrorCode::Parse, "PGM maxval must be 255, got " + std::to_string(maxval));
  }
  if (e.width == 0 || e.height == 0) throw Error(ErrorCode::Parse, "PGM has zero extent");
  // exactly one whitespace byte separates the header from the raster
  if (!std::isspace(in.get())) throw Error(ErrorCode::Parse, "PGM header not terminated");
  return e;
}

inline LabelMap read_pgm(std::istream& in) {
  const Extent e = read_pgm_header(in);
  std::vector<unsigned char> raw(e.pixels());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::Parse, "PGM raster truncated");
  }
  return LabelMap(e, std::vector<ClassId>(raw.begin(), raw.end()));
}

inline void write_pgm(std::ostream& out, const LabelMap& labels) {
  std::vector<unsigned char> raw(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassId v = labels[i];
    if (v < 0 || v > kPgmMaxVal) {
      throw Error(ErrorCode::OutOfRange, "label " + std::to_string(v) + " does not fit a byte");
    }
    raw[i] = static_cast<unsigned char>(v);
  }
  out << "P5\n" << labels.width() << ' ' << labels.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

inline LabelMap read_pgm(const fs::path& path) {
  auto in = detail::open_binary(path);
  return read_pgm(in);
}

inline Extent read_pgm_header(const fs::path& path) {
  auto in = detail::open_binary(path);
  return read_pgm_header(in);
}

inline void write_pgm(const fs::path& path, const LabelMap& labels) {
  auto out = detail::create_binary(path);
  write_pgm(out, labels);
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// SFT tensors

enum class DType : std::uint8_t { Float32 = 0, Float64 = 1 };

struct TensorHeader {
  DType dtype = DType::Float64;
  std::vector<std::uint32_t> dims;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

struct Tensor {
  DType dtype = DType::Float64;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

namespace detail {

inline constexpr std::array<char, 4> kSftMagic = {'S', 'F', 'T', '1'};

template <class UInt>
void put_le(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  }
  out.write(bytes.data(), bytes.size());
}

template <class UInt>
UInt get_le(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw Error(ErrorCode::Parse, "SFT stream truncated");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline TensorHeader read_sft_header(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != detail::kSftMagic) throw Error(ErrorCode::Parse, "missing SFT1 magic");
  TensorHeader h;
  const auto code = detail::get_le<std::uint8_t>(in);
  if (code > 1) throw Error(ErrorCode::Parse, "unknown SFT dtype code " + std::to_string(code));
  h.dtype = static_cast<DType>(code);
  const auto rank = detail::get_le<std::uint8_t>(in);
  h.dims.reserve(rank);
  for (std::uint8_t i = 0; i < rank; ++i) h.dims.push_back(detail::get_le<std::uint32_t>(in));
  return h;
}

inline Tensor read_sft(std::istream& in) {
  const TensorHeader h = read_sft_header(in);
  Tensor t{h.dtype, h.dims, {}};
  const std::size_t n = h.element_count();
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (h.dtype == DType::Float32) {
      t.values[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(in));
    } else {
      t.values[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(in));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::Parse, "trailing bytes after SFT payload");
  }
  return t;
}

inline void write_sft(std::ostream& out, const Tensor& t) {
  if (t.dims.size() > 255) throw Error(ErrorCode::InvalidSpec, "SFT rank exceeds 255");
  if (t.values.size() != t.element_count()) {
    throw Error(ErrorCode::ShapeMismatch, "tensor payload does not match its dims");
  }
  out.write(detail::kSftMagic.data(), detail::kSftMagic.size());
  detail::put_le(out, static_cast<std::uint8_t>(t.dtype));
  detail::put_le(out, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) detail::put_le(out, d);
  for (double v : t.values) {
    if (t.dtype == DType::Float32) {
      detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      detail::put_le(out, std::bit_cast<std::uint64_t>(v));
    }
  }
}

inline Tensor read_sft(const fs::path& path) {
  auto in = detail::open_binary(path);
  return read_sft(in);
}

inline TensorHeader read_sft_header(const fs::path& path) {
  auto in = detail::open_binary(path);
  return read_sft_header(in);
}

inline void write_sft(const fs::path& path, const Tensor& t) {
  auto out = detail::create_binary(path);
  write_sft(out, t);
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

template <class Tag>
Tensor to_tensor(const DenseMap<Tag>& m, DType dtype = DType::Float64) {
  const auto vals = m.values();
  return Tensor{dtype,
                {static_cast<std::uint32_t>(m.height()), static_cast<std::uint32_t>(m.width()),
                 static_cast<std::uint32_t>(m.channels())},
                std::vector<double>(vals.begin(), vals.end())};
}

template <class Tag>
DenseMap<Tag> dense_map_from_tensor(Tensor t) {
  if (t.dims.size() != 3) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected a rank-3 H x W x C tensor, got rank " + std::to_string(t.dims.size()));
  }
  const Extent e{t.dims[0], t.dims[1]};
  return DenseMap<Tag>(e, t.dims[2], std::move(t.values));
}

/// Reads and validates a probability map.
inline ProbMap read_probmap(const fs::path& path) {
  ProbMap p = dense_map_from_tensor<ProbabilityTag>(read_sft(path));
  validate_probmap(p);
  return p;
}

// ---------------------------------------------------------------------------
// JSON: class specs and manifests

inline Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot create '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

/// {"names": [...], "ignore_id": 255}
inline ClassSpec class_spec_from_json(const Json& j) {
  try {
    auto names = j.at("names").get<std::vector<std::string>>();
    const ClassId ignore = j.value("ignore_id", kDefaultIgnoreId);
    return ClassSpec(std::move(names), ignore);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("class spec: ") + e.what());
  }
}

inline Json to_json(const ClassSpec& spec) {
  return Json{{"names", spec.names()}, {"ignore_id", spec.ignore_id()}};
}

inline ClassSpec load_class_spec(const fs::path& path) { return class_spec_from_json(read_json(path)); }

struct ManifestEntry {
  fs::path probs;
  fs::path labels;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  ClassSpec class_spec;
};

/// Manifest schema:
///   {"classes": {...} | "classes.json",
///    "entries": [{"probs": "a.sft", "labels": "a.pgm"}, ...]}
/// Either path of an entry may be omitted; relative paths resolve against
/// the manifest's directory.
inline DatasetManifest load_manifest(const fs::path& path) {
  const Json j = read_json(path);
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  try {
    const Json& cls = j.at("classes");
    ClassSpec spec = cls.is_string() ? load_class_spec(resolve(cls.get<std::string>()))
                                     : class_spec_from_json(cls);
    DatasetManifest m{{}, std::move(spec)};
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({resolve(e.value("probs", std::string())),
                           resolve(e.value("labels", std::string()))});
    }
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

/// Checks from file headers alone that every referenced map shares one
/// resolution and that probability maps carry C channels.
inline Extent verify_manifest_resolution(const DatasetManifest& m) {
  std::optional<Extent> first;
  auto check = [&](const Extent& e, const fs::path& p) {
    if (!first) {
      first = e;
    } else if (*first != e) {
      throw Error(ErrorCode::ShapeMismatch, p.string() + " is " + to_string(e) +
                                                 ", expected " + to_string(*first));
    }
  };
  for (const auto& entry : m.entries) {
    if (!entry.probs.empty()) {
      const TensorHeader h = read_sft_header(entry.probs);
      if (h.dims.size() != 3) {
        throw Error(ErrorCode::DimensionMismatch, entry.probs.string() + " is not rank 3");
      }
      if (h.dims[2] != m.class_spec.num_classes()) {
        throw Error(ErrorCode::DimensionMismatch,
                    entry.probs.string() + " has " + std::to_string(h.dims[2]) +
                        " channels, class spec has " +
                        std::to_string(m.class_spec.num_classes()));
      }
      check(Extent{h.dims[0], h.dims[1]}, entry.probs);
    }
    if (!entry.labels.empty()) check(read_pgm_header(entry.labels), entry.labels);
  }
  if (!first) throw Error(ErrorCode::EmptyInput, "manifest references no maps");
  return *first;
}

}  // namespace hrseg
