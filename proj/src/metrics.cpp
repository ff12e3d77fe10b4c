#include "motionseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "motionseg/errors.hpp"

namespace motionseg {

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* op) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::kShape, std::string(op) + ": dimension mismatch");
  }
}

// Chebyshev dilation by `radius` via separable running max.
std::vector<std::uint8_t> dilate(const BinaryMask& m, int radius) {
  const int w = m.width;
  const int h = m.height;
  std::vector<std::uint8_t> tmp(m.fg.size(), 0);
  std::vector<std::uint8_t> out(m.fg.size(), 0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* src = m.fg.data() + static_cast<std::ptrdiff_t>(y) * w;
    std::uint8_t* dst = tmp.data() + static_cast<std::ptrdiff_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      if (!src[x]) continue;
      for (int xx = std::max(x - radius, 0); xx <= std::min(x + radius, w - 1); ++xx) dst[xx] = 1;
    }
  }
#pragma omp parallel for schedule(static)
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      if (!tmp[static_cast<std::size_t>(y) * w + x]) continue;
      for (int yy = std::max(y - radius, 0); yy <= std::min(y + radius, h - 1); ++yy) {
        out[static_cast<std::size_t>(yy) * w + x] = 1;
      }
    }
  }
  return out;
}

double harmonic(double p, double r) noexcept { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

BinaryMask::BinaryMask(int width_, int height_, int object_id_)
    : width(width_), height(height_), object_id(object_id_) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kShape, "BinaryMask: empty dimensions");
  fg.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count_if(fg.begin(), fg.end(), [](auto v) { return v != 0; }));
}

double jaccard(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "jaccard");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.fg.size(); ++i) {
    const bool p = pred.fg[i] != 0;
    const bool g = gt.fg[i] != 0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask boundary_pixels(const BinaryMask& mask) {
  BinaryMask out(mask.width, mask.height, mask.object_id);
  const int w = mask.width;
  const int h = mask.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !mask.at(x - 1, y) ||
                        !mask.at(x + 1, y) || !mask.at(x, y - 1) || !mask.at(x, y + 1);
      if (edge) out.set(x, y);
    }
  }
  return out;
}

double boundary_f(const BinaryMask& pred, const BinaryMask& gt, int tolerance_px) {
  require_same_shape(pred, gt, "boundary_f");
  if (tolerance_px < 0) throw Error(ErrorCode::kInvalidParameter, "boundary_f: negative tolerance");
  const BinaryMask pb = boundary_pixels(pred);
  const BinaryMask gb = boundary_pixels(gt);
  const std::size_t np = pb.count();
  const std::size_t ng = gb.count();
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const auto gd = dilate(gb, tolerance_px);
  const auto pd = dilate(pb, tolerance_px);
  std::size_t matched_pred = 0;
  std::size_t matched_gt = 0;
  for (std::size_t i = 0; i < pb.fg.size(); ++i) {
    if (pb.fg[i] && gd[i]) ++matched_pred;
    if (gb.fg[i] && pd[i]) ++matched_gt;
  }
  const double precision = static_cast<double>(matched_pred) / static_cast<double>(np);
  const double recall = static_cast<double>(matched_gt) / static_cast<double>(ng);
  return harmonic(precision, recall);
}

int default_boundary_tolerance(int width, int height) {
  return static_cast<int>(std::ceil(0.008 * std::hypot(width, height)));
}

MetricsReport jf_score(std::span<const BinaryMask> preds, std::span<const BinaryMask> gts,
                       int tolerance_px) {
  if (preds.size() != gts.size()) {
    throw Error(ErrorCode::kInvalidInput, "jf_score: " + std::to_string(preds.size()) +
                                              " predictions vs " + std::to_string(gts.size()) +
                                              " ground-truth masks");
  }
  if (preds.empty()) throw Error(ErrorCode::kInvalidInput, "jf_score: no masks");

  for (std::size_t i = 0; i < preds.size(); ++i) {
    require_same_shape(preds[i], gts[i], "jf_score");
    if (tolerance_px < 0) throw Error(ErrorCode::kInvalidParameter, "jf_score: negative tolerance");
    if (preds[i].object_id != gts[i].object_id) {
      throw Error(ErrorCode::kInvalidInput, "jf_score: object id mismatch at entry " +
                                                std::to_string(i));
    }
  }

  MetricsReport report;
  report.per_frame.resize(preds.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(preds.size()); ++i) {
    const auto& p = preds[static_cast<std::size_t>(i)];
    const auto& g = gts[static_cast<std::size_t>(i)];
    FrameScore& s = report.per_frame[static_cast<std::size_t>(i)];
    s.object_id = g.object_id;
    s.j = jaccard(p, g);
    s.f = boundary_f(p, g, tolerance_px);
  }

  struct Acc {
    double j = 0.0, f = 0.0;
    std::size_t n = 0;
  };
  std::map<int, Acc> per_object;
  for (const auto& s : report.per_frame) {
    Acc& a = per_object[s.object_id];
    a.j += s.j;
    a.f += s.f;
    ++a.n;
  }
  for (const auto& [id, a] : per_object) {
    report.j_mean += a.j / static_cast<double>(a.n);
    report.f_mean += a.f / static_cast<double>(a.n);
  }
  report.j_mean /= static_cast<double>(per_object.size());
  report.f_mean /= static_cast<double>(per_object.size());
  report.jf_mean = 0.5 * (report.j_mean + report.f_mean);
  return report;
}

ForegroundScores foreground_pixel_scores(const MotionMap& motion, const BinaryMask& gt,
                                         double threshold) {
  if (motion.width() != gt.width || motion.height() != gt.height) {
    throw Error(ErrorCode::kShape, "foreground_pixel_scores: dimension mismatch");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidParameter, "foreground_pixel_scores: threshold outside (0,1)");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  const auto v = motion.values.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool p = v[i] > threshold;
    const bool g = gt.fg[i] != 0;
    tp += (p && g) ? 1 : 0;
    fp += (p && !g) ? 1 : 0;
    fn += (!p && g) ? 1 : 0;
  }
  ForegroundScores s;
  if (tp + fp + fn == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  s.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

BinaryMask threshold_mask(std::span<const double> values, int width, int height,
                          double threshold, int object_id) {
  BinaryMask m(width, height, object_id);
  if (values.size() != m.fg.size()) throw Error(ErrorCode::kShape, "threshold_mask: size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) m.fg[i] = values[i] > threshold ? 1 : 0;
  return m;
}

}  // namespace motionseg
