#pragma once

#include <array>

namespace hrseg::test {

/// Per-class precision / recall / IoU rows in percent, as reported for
/// trained CamVid and Cityscapes models. Each is rounded to one decimal.
struct ReportedRow {
  const char* label;
  double precision;
  double recall;
  double iou;
};

inline constexpr std::array<ReportedRow, 14> kReportedRows = {{
    {"camvid ce sign", 88.8, 45.9, 43.4},
    {"camvid ce car", 95.8, 95.7, 91.9},
    {"camvid ce pedestrian", 72.1, 89.8, 66.7},
    {"camvid ce bicyclist", 85.5, 71.5, 63.8},
    {"camvid ce pole", 55.4, 66.8, 43.4},
    {"camvid ce road", 97.7, 97.1, 95.0},
    {"cityscapes ce sign", 77.7, 90.4, 71.8},
    {"cityscapes ce rider", 73.4, 72.5, 57.4},
    {"cityscapes ce truck", 86.1, 79.1, 70.1},
    {"cityscapes ce bus", 89.9, 88.6, 80.5},
    {"cityscapes ce car", 95.9, 97.6, 93.6},
    {"cityscapes ce wall", 73.9, 51.3, 43.4},
    {"cityscapes variant sign", 47.3, 94.2, 46.0},
    {"cityscapes variant traffic light", 30.7, 95.4, 30.3},
}};

/// Half a unit in the last reported digit on each of three rounded values,
/// propagated loosely: 0.2 percentage points.
inline constexpr double kReportedRowSlack = 0.2;

}  // namespace hrseg::test
