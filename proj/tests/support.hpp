#pragma once

#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "hrseg/hrseg.hpp"

namespace hrseg::test {

inline LabelMap random_labels(SeededRng& rng, Extent e, std::size_t classes, double ignore_fraction = 0.0,
                              ClassId ignore_id = kDefaultIgnoreId) {
  LabelMap m(e);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = rng.uniform() < ignore_fraction ? ignore_id : static_cast<ClassId>(rng.below(classes));
  }
  return m;
}

/// Softmax of uniform logits in [-spread, spread].
inline ProbMap random_probmap(SeededRng& rng, Extent e, std::size_t classes, double spread = 2.0) {
  GradientMap z(e, classes, 0.0);
  for (auto& v : z.values()) v = rng.uniform(-spread, spread);
  return softmax(z);
}

inline ProbMap probmap_from(Extent e, std::size_t classes, std::vector<double> values) {
  return ProbMap(e, classes, std::move(values));
}

inline LabelMap labels_from(Extent e, std::vector<ClassId> values) { return LabelMap(e, std::move(values)); }

inline std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

/// Fresh directory under the build tree's temp area, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("hrseg_test_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

}  // namespace hrseg::test
