#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "motionseg/compensation.hpp"

namespace motionseg {

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> fg;  // 0 or 1, row-major
  int object_id = 1;

  BinaryMask() = default;
  BinaryMask(int width, int height, int object_id = 1);

  bool at(int x, int y) const {
    return fg[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
              static_cast<std::size_t>(x)] != 0;
  }
  void set(int x, int y, bool v = true) {
    fg[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
       static_cast<std::size_t>(x)] = v ? 1 : 0;
  }
  std::size_t count() const noexcept;
};

struct ForegroundScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct FrameScore {
  int object_id = 1;
  double j = 0.0;
  double f = 0.0;
};

struct MetricsReport {
  double j_mean = 0.0;
  double f_mean = 0.0;
  double jf_mean = 0.0;
  std::vector<FrameScore> per_frame;
  std::optional<ForegroundScores> foreground;
};

double jaccard(const BinaryMask& pred, const BinaryMask& gt);

/// 4-connected boundary: foreground pixels with a 4-neighbor that is
/// background or outside the image.
BinaryMask boundary_pixels(const BinaryMask& mask);

double boundary_f(const BinaryMask& pred, const BinaryMask& gt, int tolerance_px);

/// ceil(0.008 * diagonal)
int default_boundary_tolerance(int width, int height);

/// Entries are aligned pairs. Scores are averaged per object over its
/// entries, then over objects.
MetricsReport jf_score(std::span<const BinaryMask> preds, std::span<const BinaryMask> gts,
                       int tolerance_px);

ForegroundScores foreground_pixel_scores(const MotionMap& motion, const BinaryMask& gt,
                                         double threshold = 0.5);

BinaryMask threshold_mask(std::span<const double> values, int width, int height,
                          double threshold, int object_id = 1);

}  // namespace motionseg
