#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "motionseg/affinity.hpp"
#include "motionseg/compensation.hpp"

namespace motionseg {

/// Per-pixel foreground probability.
struct ConfidenceMap {
  int frame_index = 0;
  int width = 0;
  int height = 0;
  std::vector<double> rho;

  ConfidenceMap() = default;
  /// Throws kShape on size mismatch, kInvalidParameter outside [0,1].
  ConfidenceMap(int frame_index, int width, int height, std::vector<double> rho);

  double at(int x, int y) const {
    return rho[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x)];
  }
};

inline constexpr double kDefaultClampEps = 1e-6;

struct LossWeights {
  double affinity = 1.0;
  double projection = 1.0;
};

struct LossAndGradient {
  double value = 0.0;
  std::vector<double> gradient;  // d value / d rho, row-major
};

double same_class_confidence(double rho_a, double rho_b) noexcept;

/// Sum over positive pairs of -log(max(rho_ab, clamp_eps)).
LossAndGradient affinity_loss(const ConfidenceMap& rho, const PairAffinitySet& pairs,
                              double clamp_eps = kDefaultClampEps);

struct ProjectionAxisLosses {
  std::vector<double> x;  // one per box
  std::vector<double> y;
};

/// Soft Dice between axis max-projections and the box extent, with a zero
/// target band one box-extent wide on each side. Mean over boxes and axes.
LossAndGradient projection_loss(const ConfidenceMap& rho, std::span<const BoundingBox> boxes);
ProjectionAxisLosses projection_axis_losses(const ConfidenceMap& rho,
                                            std::span<const BoundingBox> boxes);

struct LossReport {
  double affinity_loss = 0.0;
  double projection_loss = 0.0;
  std::size_t positive_pairs = 0;
  double total = 0.0;
};

LossReport total_loss(const ConfidenceMap& rho, const PairAffinitySet& pairs,
                      std::span<const BoundingBox> boxes, const LossWeights& weights = {});

struct TotalLossAndGradient {
  LossReport report;
  std::vector<double> gradient;
};

TotalLossAndGradient total_loss_with_gradient(const ConfidenceMap& rho,
                                              const PairAffinitySet& pairs,
                                              std::span<const BoundingBox> boxes,
                                              const LossWeights& weights = {},
                                              double clamp_eps = kDefaultClampEps);

struct OptimizeOptions {
  int steps = 500;
  double lr = 0.1;
  LossWeights weights;
  double clamp_eps = kDefaultClampEps;
  double inside_logit = 0.0;
  double outside_logit = -4.0;
};

struct OptimizeResult {
  ConfidenceMap confidence;
  std::vector<double> loss_history;  // total before each step, then final
  PairAffinitySet pairs;
};

/// Gradient descent on per-pixel logits against the affinity and projection
/// losses. A demonstrator for what the losses supervise, not a trainer.
OptimizeResult optimize_mask(const Frame& frame, const MotionMap& motion,
                             std::span<const BoundingBox> boxes, const AffinityConfig& cfg,
                             const OptimizeOptions& options = {});

}  // namespace motionseg
