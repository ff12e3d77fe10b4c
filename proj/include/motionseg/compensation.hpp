#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "motionseg/features.hpp"
#include "motionseg/imaging.hpp"

namespace motionseg {

/// Pixels x..x+w-1, y..y+h-1.
struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  int object_id = 1;

  /// Closed rectangle [x, x+w] x [y, y+h]; the edge counts as inside.
  bool contains_point(double px, double py) const noexcept;
  bool contains_pixel(int px, int py) const noexcept;
  bool intersects(int width, int height) const noexcept;
  /// Clipped to the frame. Throws kInvalidAnnotation if disjoint.
  BoundingBox clipped(int width, int height) const;

  bool operator==(const BoundingBox&) const = default;
};

struct MotionMap {
  int frame_index = 0;
  GrayImage values;

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
};

enum class TransformModel { kAffine };

struct CompensationConfig {
  int ransac_iters = 500;
  double ransac_inlier_px = 3.0;
  double tau2 = 0.2;
  bool use_compensation = true;
  bool use_box_filter = true;
  bool use_bidirectional_filter = true;
  bool use_temporal_matching = true;
  int post_median_radius = 0;
  double blur_sigma = 1.0;
  TransformModel model = TransformModel::kAffine;
  CornerParams corners;
  FlowParams flow;

  /// Throws kInvalidParameter.
  void validate() const;
};

std::vector<FeaturePoint> box_filter(std::span<const FeaturePoint> points,
                                     std::span<const BoundingBox> boxes);

/// Element (n-1)/2 of the sorted values. Throws kInvalidInput when empty.
double lower_median(std::vector<double> values);

/// Indices whose round-trip distance does not exceed the lower median.
std::vector<std::size_t> round_trip_survivors(std::span<const double> distances);

/// Forward-backward tracking; keeps correspondences whose round-trip error
/// is at most the median. Throws kInsufficientCorrespondences when fewer
/// than 4 points survive both passes.
CorrespondenceSet bidirectional_filter(const GrayImage& prev, const GrayImage& cur,
                                       std::span<const FeaturePoint> points,
                                       const FlowParams& flow = {});

struct PointPair {
  double sx, sy;
  double tx, ty;
};

/// Exact affine through three pairs; nullopt for collinear sources or a
/// singular result.
std::optional<AffineTransform> solve_affine_exact(const PointPair& p0, const PointPair& p1,
                                                  const PointPair& p2);
/// Least-squares affine; nullopt when the normal equations are singular.
std::optional<AffineTransform> fit_affine_least_squares(std::span<const PointPair> pairs);

double reprojection_error(const AffineTransform& t, const PointPair& p) noexcept;

struct RansacResult {
  AffineTransform model;
  std::vector<std::size_t> inliers;  // indices into the tracked pairs
  std::size_t sample_count = 0;      // tracked pairs considered
};

RansacResult ransac_affine(std::span<const PointPair> pairs, int iterations, double inlier_px,
                           std::uint64_t seed);

/// Throws kInsufficientCorrespondences with < 3 tracked entries or when no
/// non-degenerate sample exists.
AffineTransform estimate_affine_ransac(const CorrespondenceSet& cs, const CompensationConfig& cfg,
                                       std::uint64_t seed);

struct TwoFrameMotion {
  MotionMap motion;
  AffineTransform transform;  // prev -> cur
  bool fell_back = false;
  std::size_t correspondences = 0;
  std::size_t inliers = 0;
  std::string warning;
};

/// |blur(gray(cur)) - warp(blur(gray(prev)), H)| with H estimated from
/// background points. Pixels the warp cannot observe are set to 0.
TwoFrameMotion two_frame_motion(const Frame& prev, const Frame& cur,
                                std::span<const BoundingBox> boxes,
                                const CompensationConfig& cfg, std::uint64_t seed);

/// out = m_prev where (m_prev - m_next) < tau2, else 0.
MotionMap temporal_matching(const MotionMap& m_prev, const MotionMap& m_next, double tau2);

struct PipelineMotion {
  MotionMap motion;
  TwoFrameMotion from_prev;
  std::optional<TwoFrameMotion> from_next;
};

PipelineMotion motion_pipeline_detailed(const Frame& prev, const Frame& cur, const Frame* next,
                                        std::span<const BoundingBox> boxes_cur,
                                        const CompensationConfig& cfg, std::uint64_t seed);

MotionMap motion_pipeline(const Frame& prev, const Frame& cur, const Frame& next,
                          std::span<const BoundingBox> boxes_cur, const CompensationConfig& cfg,
                          std::uint64_t seed);

}  // namespace motionseg
