#pragma once

// Class lists and importance groups for CamVid and Cityscapes.

#include <string>
#include <vector>

#include "hrseg/core.hpp"
#include "hrseg/metrics.hpp"

namespace hrseg::presets {

inline ClassSpec camvid_classes() {
  return ClassSpec({"sky", "building", "pole", "road", "sidewalk", "tree", "sign", "fence", "car", "pedestrian",
                    "bicyclist"});
}

/// Cityscapes train-id order.
inline ClassSpec cityscapes_classes() {
  return ClassSpec({"road", "sidewalk", "building", "wall", "fence", "pole", "traffic light", "sign", "tree",
                    "terrain", "sky", "pedestrian", "rider", "car", "truck", "bus", "train", "motorcycle",
                    "bicycle"});
}

namespace detail {
inline Group named_group(const ClassSpec& spec, std::string name, const std::vector<std::string>& classes) {
  Group g{std::move(name), {}};
  for (const auto& c : classes) g.classes.push_back(spec.id_of(c));
  return g;
}
}  // namespace detail

inline GroupSpec camvid_groups() {
  const ClassSpec s = camvid_classes();
  return GroupSpec({detail::named_group(s, "G1", {"sky", "building", "tree"}),
                    detail::named_group(s, "G2", {"pole", "road", "sidewalk", "fence"}),
                    detail::named_group(s, "G3", {"sign", "car", "pedestrian", "bicyclist"})},
                   s.num_classes());
}

inline GroupSpec cityscapes_groups() {
  const ClassSpec s = cityscapes_classes();
  return GroupSpec(
      {detail::named_group(s, "G1", {"road", "building", "wall", "tree", "terrain", "sky"}),
       detail::named_group(s, "G2", {"car", "sidewalk", "fence", "pole", "pedestrian"}),
       detail::named_group(s, "G3",
                           {"sign", "rider", "truck", "bus", "train", "motorcycle", "bicycle", "traffic light"})},
      s.num_classes());
}

}  // namespace hrseg::presets
