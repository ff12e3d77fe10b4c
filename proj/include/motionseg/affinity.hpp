#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <vector>

#include "motionseg/compensation.hpp"
#include "motionseg/imaging.hpp"

namespace motionseg {

enum class ColorSpace { kRgb };

struct AffinityConfig {
  double eta = 0.5;
  double tau_m = 0.75;
  double tau_c = 0.1;
  int dilation = 2;
  int stride = 1;
  ColorSpace color_space = ColorSpace::kRgb;

  void validate() const;
};

struct Pixel {
  int x = 0;
  int y = 0;

  bool operator==(const Pixel&) const = default;
  // raster order
  auto operator<=>(const Pixel& o) const {
    if (auto c = y <=> o.y; c != 0) return c;
    return x <=> o.x;
  }
};

struct AffinityBits {
  bool motion = false;
  bool color = false;
  bool affinity = false;

  bool operator==(const AffinityBits&) const = default;
};

struct PixelPair {
  Pixel a;  // raster-earlier endpoint
  Pixel b;
  double psi = 1.0;
  double phi = 1.0;
  bool motion_bit = true;
  bool color_bit = true;
  bool affinity = true;
};

struct PairAffinitySet {
  int frame_index = 0;
  std::vector<PixelPair> pairs;
  std::size_t positive_count = 0;

  std::size_t total() const noexcept { return pairs.size(); }
};

double motion_similarity(double m_a, double m_b, double eta) noexcept;
double color_similarity(const Rgb& c_a, const Rgb& c_b, double eta) noexcept;
AffinityBits pair_affinity(double psi, double phi, const AffinityConfig& cfg) noexcept;

/// Offsets at the given dilation that point forward in raster order; with
/// their negations they form the 8-neighborhood.
std::span<const Pixel> forward_offsets_unit();

PairAffinitySet build_pair_set(const Frame& frame, const MotionMap& motion,
                               std::span<const BoundingBox> boxes, const AffinityConfig& cfg);

/// positives / enumerated pairs touching each pixel, 0 where untouched.
GrayImage render_pseudo_mask(const PairAffinitySet& pairs, int width, int height);

}  // namespace motionseg
