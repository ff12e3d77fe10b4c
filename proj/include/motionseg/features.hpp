#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "motionseg/imaging.hpp"

namespace motionseg {

struct FeaturePoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
};

struct Correspondence {
  FeaturePoint source;
  FeaturePoint target;  // meaningless when !tracked
  bool tracked = false;
};

struct CorrespondenceSet {
  std::vector<Correspondence> entries;
  int source_frame_index = 0;
  int target_frame_index = 0;

  std::size_t tracked_count() const noexcept;
};

struct CornerParams {
  int max_points = 500;
  double quality = 0.01;
  double min_distance = 7.0;
};

struct FlowParams {
  int levels = 3;  // pyramid levels including full resolution
  int window = 15;
  int max_iters = 30;
  double eps = 0.01;
};

/// Minimum eigenvalue of the 3x3-summed structure tensor built from Sobel
/// gradients, row-major, edge-clamped.
std::vector<double> corner_response(const GrayImage& img);

/// Shi-Tomasi corners sorted by descending response, ties in raster order.
std::vector<FeaturePoint> detect_corners(const GrayImage& img, const CornerParams& params = {});

/// Pyramidal Lucas-Kanade. Entry i corresponds to points[i].
CorrespondenceSet track_sparse_flow(const GrayImage& prev, const GrayImage& next,
                                    std::span<const FeaturePoint> points,
                                    const FlowParams& params = {});

namespace detail {

struct Gradients {
  std::vector<double> gx;
  std::vector<double> gy;
};

/// 3x3 Sobel divided by 8 (intensity per pixel), edge-clamped.
Gradients sobel(const GrayImage& img);

/// Blur with [1 4 6 4 1]/16 and keep even pixels.
GrayImage pyr_down(const GrayImage& img);

}  // namespace detail

}  // namespace motionseg
