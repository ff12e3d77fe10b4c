#include "motionseg/compensation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "motionseg/errors.hpp"

namespace motionseg {

namespace {

void require_same_shape(const GrayImage& a, const GrayImage& b, const char* op) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kShape, std::string(op) + ": dimension mismatch");
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<PointPair> tracked_pairs(const CorrespondenceSet& cs) {
  std::vector<PointPair> pairs;
  pairs.reserve(cs.entries.size());
  for (const auto& e : cs.entries) {
    if (e.tracked) pairs.push_back({e.source.x, e.source.y, e.target.x, e.target.y});
  }
  return pairs;
}

}  // namespace

bool BoundingBox::contains_point(double px, double py) const noexcept {
  return px >= x && px <= x + w && py >= y && py <= y + h;
}

bool BoundingBox::contains_pixel(int px, int py) const noexcept {
  return px >= x && px < x + w && py >= y && py < y + h;
}

bool BoundingBox::intersects(int width, int height) const noexcept {
  return w >= 1 && h >= 1 && x < width && y < height && x + w > 0 && y + h > 0;
}

BoundingBox BoundingBox::clipped(int width, int height) const {
  if (!intersects(width, height)) {
    throw Error(ErrorCode::kInvalidAnnotation,
                "box (" + std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(w) +
                    "," + std::to_string(h) + ") does not intersect the " +
                    std::to_string(width) + "x" + std::to_string(height) + " frame");
  }
  BoundingBox r = *this;
  const int x0 = std::max(x, 0);
  const int y0 = std::max(y, 0);
  const int x1 = std::min(x + w, width);
  const int y1 = std::min(y + h, height);
  r.x = x0;
  r.y = y0;
  r.w = x1 - x0;
  r.h = y1 - y0;
  return r;
}

void CompensationConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidParameter, "CompensationConfig: " + msg);
  };
  if (ransac_iters < 1) fail("ransac_iters must be >= 1");
  if (!(ransac_inlier_px > 0.0)) fail("ransac_inlier_px must be > 0");
  if (!(tau2 >= 0.0)) fail("tau2 must be >= 0");
  if (post_median_radius < 0) fail("post_median_radius must be >= 0");
  if (!(blur_sigma > 0.0)) fail("blur_sigma must be > 0");
  if (corners.max_points < 1 || !(corners.quality > 0.0 && corners.quality < 1.0) ||
      !(corners.min_distance >= 0.0)) {
    fail("invalid corner parameters");
  }
  if (flow.levels < 1 || flow.window < 5 || flow.window % 2 == 0 || flow.max_iters < 1 ||
      !(flow.eps > 0.0)) {
    fail("invalid flow parameters");
  }
}

std::vector<FeaturePoint> box_filter(std::span<const FeaturePoint> points,
                                     std::span<const BoundingBox> boxes) {
  std::vector<FeaturePoint> kept;
  kept.reserve(points.size());
  for (const auto& p : points) {
    const bool inside = std::any_of(boxes.begin(), boxes.end(),
                                    [&](const BoundingBox& b) { return b.contains_point(p.x, p.y); });
    if (!inside) kept.push_back(p);
  }
  return kept;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidInput, "lower_median: empty input");
  auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

std::vector<std::size_t> round_trip_survivors(std::span<const double> distances) {
  if (distances.empty()) return {};
  const double tau = lower_median({distances.begin(), distances.end()});
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (distances[i] <= tau) kept.push_back(i);
  }
  return kept;
}

CorrespondenceSet bidirectional_filter(const GrayImage& prev, const GrayImage& cur,
                                       std::span<const FeaturePoint> points,
                                       const FlowParams& flow) {
  const CorrespondenceSet forward = track_sparse_flow(prev, cur, points, flow);
  std::vector<FeaturePoint> projected;
  std::vector<std::size_t> origin;
  for (std::size_t i = 0; i < forward.entries.size(); ++i) {
    if (forward.entries[i].tracked) {
      projected.push_back(forward.entries[i].target);
      origin.push_back(i);
    }
  }
  const CorrespondenceSet backward = track_sparse_flow(cur, prev, projected, flow);

  std::vector<std::size_t> survivors;
  std::vector<double> distances;
  for (std::size_t k = 0; k < backward.entries.size(); ++k) {
    if (!backward.entries[k].tracked) continue;
    const FeaturePoint& p = forward.entries[origin[k]].source;
    const FeaturePoint& back = backward.entries[k].target;
    survivors.push_back(origin[k]);
    distances.push_back(std::hypot(p.x - back.x, p.y - back.y));
  }
  if (survivors.size() < 4) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                "bidirectional_filter: only " + std::to_string(survivors.size()) +
                    " points tracked in both directions");
  }

  CorrespondenceSet out;
  for (std::size_t k : round_trip_survivors(distances)) {
    out.entries.push_back(forward.entries[survivors[k]]);
  }
  return out;
}

std::optional<AffineTransform> solve_affine_exact(const PointPair& p0, const PointPair& p1,
                                                  const PointPair& p2) {
  const double det = (p1.sx - p0.sx) * (p2.sy - p0.sy) - (p2.sx - p0.sx) * (p1.sy - p0.sy);
  if (!(std::abs(det) > 1e-6)) return std::nullopt;
  // Solve in coordinates relative to p0 for conditioning.
  const double x1 = p1.sx - p0.sx, y1 = p1.sy - p0.sy;
  const double x2 = p2.sx - p0.sx, y2 = p2.sy - p0.sy;
  const double u1 = p1.tx - p0.tx, u2 = p2.tx - p0.tx;
  const double v1 = p1.ty - p0.ty, v2 = p2.ty - p0.ty;
  AffineTransform t;
  t.a = (u1 * y2 - u2 * y1) / det;
  t.b = (x1 * u2 - x2 * u1) / det;
  t.c = (v1 * y2 - v2 * y1) / det;
  t.d = (x1 * v2 - x2 * v1) / det;
  t.tx = p0.tx - t.a * p0.sx - t.b * p0.sy;
  t.ty = p0.ty - t.c * p0.sx - t.d * p0.sy;
  if (!t.is_invertible()) return std::nullopt;
  return t;
}

std::optional<AffineTransform> fit_affine_least_squares(std::span<const PointPair> pairs) {
  if (pairs.size() < 3) return std::nullopt;
  const double n = static_cast<double>(pairs.size());
  double mx = 0, my = 0, mu = 0, mv = 0;
  for (const auto& p : pairs) {
    mx += p.sx;
    my += p.sy;
    mu += p.tx;
    mv += p.ty;
  }
  mx /= n;
  my /= n;
  mu /= n;
  mv /= n;
  double sxx = 0, sxy = 0, syy = 0, sxu = 0, syu = 0, sxv = 0, syv = 0;
  for (const auto& p : pairs) {
    const double x = p.sx - mx, y = p.sy - my, u = p.tx - mu, v = p.ty - mv;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    sxu += x * u;
    syu += y * u;
    sxv += x * v;
    syv += y * v;
  }
  const double det = sxx * syy - sxy * sxy;
  if (!(det > 1e-9 * std::max(1.0, sxx * syy))) return std::nullopt;
  AffineTransform t;
  t.a = (syy * sxu - sxy * syu) / det;
  t.b = (sxx * syu - sxy * sxu) / det;
  t.c = (syy * sxv - sxy * syv) / det;
  t.d = (sxx * syv - sxy * sxv) / det;
  t.tx = mu - t.a * mx - t.b * my;
  t.ty = mv - t.c * mx - t.d * my;
  if (!t.is_invertible()) return std::nullopt;
  return t;
}

double reprojection_error(const AffineTransform& t, const PointPair& p) noexcept {
  return std::hypot(t.apply_x(p.sx, p.sy) - p.tx, t.apply_y(p.sx, p.sy) - p.ty);
}

RansacResult ransac_affine(std::span<const PointPair> pairs, int iterations, double inlier_px,
                           std::uint64_t seed) {
  const std::size_t n = pairs.size();
  if (n < 3) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                "ransac: " + std::to_string(n) + " correspondences, need 3");
  }
  if (iterations < 1 || !(inlier_px > 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "ransac: invalid iteration count or threshold");
  }

  // Draw every sample up front so the parallel scoring cannot perturb the
  // random stream.
  std::mt19937_64 rng(seed);
  std::vector<std::array<std::size_t, 3>> samples(static_cast<std::size_t>(iterations));
  for (auto& s : samples) {
    s[0] = static_cast<std::size_t>(rng() % n);
    do s[1] = static_cast<std::size_t>(rng() % n); while (s[1] == s[0]);
    do s[2] = static_cast<std::size_t>(rng() % n); while (s[2] == s[0] || s[2] == s[1]);
  }

  std::vector<long> scores(samples.size(), -1);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t it = 0; it < static_cast<std::ptrdiff_t>(samples.size()); ++it) {
    const auto& s = samples[static_cast<std::size_t>(it)];
    const auto model = solve_affine_exact(pairs[s[0]], pairs[s[1]], pairs[s[2]]);
    if (!model) continue;
    long count = 0;
    for (const auto& p : pairs) {
      if (reprojection_error(*model, p) <= inlier_px) ++count;
    }
    scores[static_cast<std::size_t>(it)] = count;
  }

  const auto best_it = std::max_element(scores.begin(), scores.end());
  if (*best_it < 0) {
    throw Error(ErrorCode::kInsufficientCorrespondences,
                "ransac: every sample was degenerate");
  }
  const auto& s = samples[static_cast<std::size_t>(best_it - scores.begin())];
  const AffineTransform minimal = *solve_affine_exact(pairs[s[0]], pairs[s[1]], pairs[s[2]]);

  RansacResult result;
  result.sample_count = n;
  std::vector<PointPair> consensus;
  for (std::size_t i = 0; i < n; ++i) {
    if (reprojection_error(minimal, pairs[i]) <= inlier_px) {
      result.inliers.push_back(i);
      consensus.push_back(pairs[i]);
    }
  }
  result.model = fit_affine_least_squares(consensus).value_or(minimal);
  return result;
}

AffineTransform estimate_affine_ransac(const CorrespondenceSet& cs, const CompensationConfig& cfg,
                                       std::uint64_t seed) {
  const std::vector<PointPair> pairs = tracked_pairs(cs);
  return ransac_affine(pairs, cfg.ransac_iters, cfg.ransac_inlier_px, seed).model;
}

TwoFrameMotion two_frame_motion(const Frame& prev, const Frame& cur,
                                std::span<const BoundingBox> boxes,
                                const CompensationConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require_same_shape(prev.gray(), cur.gray(), "two_frame_motion");
  const GrayImage g_prev = gaussian_blur(prev.gray(), cfg.blur_sigma);
  const GrayImage g_cur = gaussian_blur(cur.gray(), cfg.blur_sigma);

  TwoFrameMotion result;
  result.transform = AffineTransform::identity();
  if (cfg.use_compensation) {
    try {
      std::vector<FeaturePoint> points = detect_corners(g_prev, cfg.corners);
      if (cfg.use_box_filter) points = box_filter(points, boxes);
      CorrespondenceSet cs = cfg.use_bidirectional_filter
                                 ? bidirectional_filter(g_prev, g_cur, points, cfg.flow)
                                 : track_sparse_flow(g_prev, g_cur, points, cfg.flow);
      const std::vector<PointPair> pairs = tracked_pairs(cs);
      result.correspondences = pairs.size();
      RansacResult fit = ransac_affine(pairs, cfg.ransac_iters, cfg.ransac_inlier_px, seed);
      result.transform = fit.model;
      result.inliers = fit.inliers.size();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInsufficientCorrespondences) throw;
      result.transform = AffineTransform::identity();
      result.fell_back = true;
      result.warning = std::string("identity transform used: ") + e.what();
    }
  }

  const GrayImage aligned = warp_affine(g_prev, result.transform);
  GrayImage diff = abs_difference(g_cur, aligned);
  if (result.transform != AffineTransform::identity()) {
    const GrayImage support = warp_support(diff.width(), diff.height(), result.transform);
    auto dv = diff.values();
    const auto sv = support.values();
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= sv[i];
  }
  result.motion = MotionMap{cur.index(), std::move(diff)};
  return result;
}

MotionMap temporal_matching(const MotionMap& m_prev, const MotionMap& m_next, double tau2) {
  require_same_shape(m_prev.values, m_next.values, "temporal_matching");
  GrayImage out(m_prev.width(), m_prev.height());
  const auto p = m_prev.values.values();
  const auto n = m_next.values.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (p[i] - n[i] < tau2) ? p[i] : 0.0;
  return MotionMap{m_prev.frame_index, std::move(out)};
}

PipelineMotion motion_pipeline_detailed(const Frame& prev, const Frame& cur, const Frame* next,
                                        std::span<const BoundingBox> boxes_cur,
                                        const CompensationConfig& cfg, std::uint64_t seed) {
  PipelineMotion out{MotionMap{}, two_frame_motion(prev, cur, boxes_cur, cfg, mix_seed(seed, 0)),
                     std::nullopt};
  if (next != nullptr && cfg.use_temporal_matching) {
    out.from_next = two_frame_motion(*next, cur, boxes_cur, cfg, mix_seed(seed, 1));
    out.motion = temporal_matching(out.from_prev.motion, out.from_next->motion, cfg.tau2);
  } else {
    out.motion = out.from_prev.motion;
  }
  if (cfg.post_median_radius > 0) {
    out.motion.values = median_filter(out.motion.values, cfg.post_median_radius);
  }
  return out;
}

MotionMap motion_pipeline(const Frame& prev, const Frame& cur, const Frame& next,
                          std::span<const BoundingBox> boxes_cur, const CompensationConfig& cfg,
                          std::uint64_t seed) {
  if (prev.width() != cur.width() || prev.height() != cur.height() ||
      next.width() != cur.width() || next.height() != cur.height()) {
    throw Error(ErrorCode::kShape, "motion_pipeline: frames differ in size");
  }
  return motion_pipeline_detailed(prev, cur, &next, boxes_cur, cfg, seed).motion;
}

}  // namespace motionseg
