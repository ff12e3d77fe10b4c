#include "motionseg/loss.hpp"

#include <algorithm>
#include <cmath>

#include "motionseg/errors.hpp"

namespace motionseg {

ConfidenceMap::ConfidenceMap(int frame_index_, int width_, int height_, std::vector<double> rho_)
    : frame_index(frame_index_), width(width_), height(height_), rho(std::move(rho_)) {
  if (width <= 0 || height <= 0 ||
      rho.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kShape, "ConfidenceMap: value count does not match dimensions");
  }
  for (double v : rho) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kInvalidParameter, "ConfidenceMap: rho outside [0,1]");
    }
  }
}

double same_class_confidence(double rho_a, double rho_b) noexcept {
  return rho_a * rho_b + (1.0 - rho_a) * (1.0 - rho_b);
}

namespace {

std::size_t pixel_index(const ConfidenceMap& rho, const Pixel& p) {
  if (p.x < 0 || p.y < 0 || p.x >= rho.width || p.y >= rho.height) {
    throw Error(ErrorCode::kShape, "affinity_loss: pair outside the confidence map");
  }
  return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(rho.width) +
         static_cast<std::size_t>(p.x);
}

struct PairTerm {
  double loss = 0.0;
  double d_a = 0.0;
  double d_b = 0.0;
  std::size_t ia = 0;
  std::size_t ib = 0;
};

}  // namespace

LossAndGradient affinity_loss(const ConfidenceMap& rho, const PairAffinitySet& pairs,
                              double clamp_eps) {
  const std::size_t n = pairs.pairs.size();
  std::vector<PairTerm> terms(n);
  for (std::size_t k = 0; k < n; ++k) {
    terms[k].ia = pixel_index(rho, pairs.pairs[k].a);
    terms[k].ib = pixel_index(rho, pairs.pairs[k].b);
  }
  const double floor_loss = -std::log(clamp_eps);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
    const auto& pp = pairs.pairs[static_cast<std::size_t>(k)];
    if (!pp.affinity) continue;
    PairTerm& t = terms[static_cast<std::size_t>(k)];
    const double ra = rho.rho[t.ia];
    const double rb = rho.rho[t.ib];
    const double rab = same_class_confidence(ra, rb);
    if (rab > clamp_eps) {
      t.loss = -std::log(rab);
      t.d_a = -(2.0 * rb - 1.0) / rab;
      t.d_b = -(2.0 * ra - 1.0) / rab;
    } else {
      t.loss = floor_loss;
    }
  }

  // Ordered reduction keeps the result independent of the thread count.
  LossAndGradient out;
  out.gradient.assign(rho.rho.size(), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (!pairs.pairs[k].affinity) continue;
    const PairTerm& t = terms[k];
    out.value += t.loss;
    out.gradient[t.ia] += t.d_a;
    out.gradient[t.ib] += t.d_b;
  }
  return out;
}

namespace {

struct AxisProjection {
  std::vector<double> p;
  std::vector<double> t;
  std::vector<std::size_t> argmax;  // pixel index receiving the gradient
};

// Soft Dice loss and d loss / d p.
double dice(const AxisProjection& ap, std::vector<double>* grad) {
  double overlap = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < ap.p.size(); ++i) {
    overlap += ap.p[i] * ap.t[i];
    pp += ap.p[i] * ap.p[i];
    tt += ap.t[i] * ap.t[i];
  }
  const double s = pp + tt;  // tt >= 1 for a non-empty box
  if (grad) {
    grad->resize(ap.p.size());
    for (std::size_t i = 0; i < ap.p.size(); ++i) {
      (*grad)[i] = -2.0 * (ap.t[i] * s - 2.0 * overlap * ap.p[i]) / (s * s);
    }
  }
  return 1.0 - 2.0 * overlap / s;
}

std::pair<AxisProjection, AxisProjection> project(const ConfidenceMap& rho,
                                                  const BoundingBox& raw) {
  const BoundingBox b = raw.clipped(rho.width, rho.height);
  const int W = rho.width;
  const auto at = [&](int x, int y) {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(W) + static_cast<std::size_t>(x);
  };
  AxisProjection px;
  for (int x = std::max(b.x - b.w, 0); x < std::min(b.x + 2 * b.w, rho.width); ++x) {
    std::size_t best = at(x, b.y);
    for (int y = b.y + 1; y < b.y + b.h; ++y) {
      if (rho.rho[at(x, y)] > rho.rho[best]) best = at(x, y);
    }
    px.p.push_back(rho.rho[best]);
    px.t.push_back(x >= b.x && x < b.x + b.w ? 1.0 : 0.0);
    px.argmax.push_back(best);
  }
  AxisProjection py;
  for (int y = std::max(b.y - b.h, 0); y < std::min(b.y + 2 * b.h, rho.height); ++y) {
    std::size_t best = at(b.x, y);
    for (int x = b.x + 1; x < b.x + b.w; ++x) {
      if (rho.rho[at(x, y)] > rho.rho[best]) best = at(x, y);
    }
    py.p.push_back(rho.rho[best]);
    py.t.push_back(y >= b.y && y < b.y + b.h ? 1.0 : 0.0);
    py.argmax.push_back(best);
  }
  return {std::move(px), std::move(py)};
}

}  // namespace

ProjectionAxisLosses projection_axis_losses(const ConfidenceMap& rho,
                                            std::span<const BoundingBox> boxes) {
  ProjectionAxisLosses out;
  for (const auto& b : boxes) {
    const auto [px, py] = project(rho, b);
    out.x.push_back(dice(px, nullptr));
    out.y.push_back(dice(py, nullptr));
  }
  return out;
}

LossAndGradient projection_loss(const ConfidenceMap& rho, std::span<const BoundingBox> boxes) {
  LossAndGradient out;
  out.gradient.assign(rho.rho.size(), 0.0);
  if (boxes.empty()) return out;
  const double norm = 1.0 / (2.0 * static_cast<double>(boxes.size()));
  std::vector<double> g;
  for (const auto& b : boxes) {
    const auto [px, py] = project(rho, b);
    for (const AxisProjection* ap : {&px, &py}) {
      out.value += norm * dice(*ap, &g);
      for (std::size_t i = 0; i < g.size(); ++i) out.gradient[ap->argmax[i]] += norm * g[i];
    }
  }
  return out;
}

TotalLossAndGradient total_loss_with_gradient(const ConfidenceMap& rho,
                                              const PairAffinitySet& pairs,
                                              std::span<const BoundingBox> boxes,
                                              const LossWeights& weights, double clamp_eps) {
  const LossAndGradient aff = affinity_loss(rho, pairs, clamp_eps);
  const LossAndGradient proj = projection_loss(rho, boxes);
  TotalLossAndGradient out;
  out.report.affinity_loss = aff.value;
  out.report.projection_loss = proj.value;
  out.report.positive_pairs = pairs.positive_count;
  out.report.total = weights.projection * proj.value + weights.affinity * aff.value;
  out.gradient.resize(rho.rho.size());
  for (std::size_t i = 0; i < out.gradient.size(); ++i) {
    out.gradient[i] = weights.projection * proj.gradient[i] + weights.affinity * aff.gradient[i];
  }
  return out;
}

LossReport total_loss(const ConfidenceMap& rho, const PairAffinitySet& pairs,
                      std::span<const BoundingBox> boxes, const LossWeights& weights) {
  return total_loss_with_gradient(rho, pairs, boxes, weights).report;
}

OptimizeResult optimize_mask(const Frame& frame, const MotionMap& motion,
                             std::span<const BoundingBox> boxes, const AffinityConfig& cfg,
                             const OptimizeOptions& options) {
  if (options.steps < 0) throw Error(ErrorCode::kInvalidParameter, "optimize_mask: steps < 0");
  if (!(options.lr > 0.0)) throw Error(ErrorCode::kInvalidParameter, "optimize_mask: lr <= 0");

  OptimizeResult result;
  result.pairs = build_pair_set(frame, motion, boxes, cfg);
  const int w = frame.width();
  const int h = frame.height();
  std::vector<double> logits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool inside = std::any_of(boxes.begin(), boxes.end(),
                                      [&](const BoundingBox& b) { return b.contains_pixel(x, y); });
      logits[static_cast<std::size_t>(y) * w + x] =
          inside ? options.inside_logit : options.outside_logit;
    }
  }

  auto to_confidence = [&] {
    std::vector<double> rho(logits.size());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    return ConfidenceMap(frame.index(), w, h, std::move(rho));
  };

  for (int step = 0; step < options.steps; ++step) {
    const ConfidenceMap rho = to_confidence();
    const TotalLossAndGradient tl =
        total_loss_with_gradient(rho, result.pairs, boxes, options.weights, options.clamp_eps);
    result.loss_history.push_back(tl.report.total);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double r = rho.rho[i];
      logits[i] -= options.lr * tl.gradient[i] * r * (1.0 - r);
    }
  }
  result.confidence = to_confidence();
  result.loss_history.push_back(total_loss_with_gradient(result.confidence, result.pairs, boxes,
                                                         options.weights, options.clamp_eps)
                                    .report.total);
  return result;
}

}  // namespace motionseg
