#pragma once

// Straightforward single-threaded versions of the parallel kernels. Kept as
// the reference the OpenMP paths are tested and benchmarked against.

#include <span>
#include <vector>

#include "motionseg/affinity.hpp"
#include "motionseg/imaging.hpp"
#include "motionseg/loss.hpp"

namespace motionseg::serial {

GrayImage gaussian_blur(const GrayImage& img, double sigma);
GrayImage warp_affine(const GrayImage& img, const AffineTransform& t);
GrayImage median_filter(const GrayImage& img, int radius);
std::vector<double> corner_response(const GrayImage& img);
PairAffinitySet build_pair_set(const Frame& frame, const MotionMap& motion,
                               std::span<const BoundingBox> boxes, const AffinityConfig& cfg);
LossAndGradient affinity_loss(const ConfidenceMap& rho, const PairAffinitySet& pairs,
                              double clamp_eps = kDefaultClampEps);

}  // namespace motionseg::serial
