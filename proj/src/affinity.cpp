#include "motionseg/affinity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "motionseg/errors.hpp"

namespace motionseg {

namespace {

constexpr std::array<Pixel, 4> kForward = {{{1, 0}, {-1, 1}, {0, 1}, {1, 1}}};
constexpr std::array<Pixel, 4> kBackward = {{{-1, -1}, {0, -1}, {1, -1}, {-1, 0}}};

bool raster_less(const PixelPair& l, const PixelPair& r) {
  if (l.a != r.a) return l.a < r.a;
  return l.b < r.b;
}

}  // namespace

void AffinityConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidParameter, "AffinityConfig: " + msg);
  };
  if (!(eta > 0.0)) fail("eta must be > 0");
  if (!(tau_m > 0.0 && tau_m < 1.0)) fail("tau_m must lie in (0,1)");
  if (!(tau_c > 0.0 && tau_c < 1.0)) fail("tau_c must lie in (0,1)");
  if (dilation < 1) fail("dilation must be >= 1");
  if (stride < 1) fail("stride must be >= 1");
}

double motion_similarity(double m_a, double m_b, double eta) noexcept {
  return std::exp(-std::abs(m_a - m_b) * eta);
}

double color_similarity(const Rgb& c_a, const Rgb& c_b, double eta) noexcept {
  const double dr = c_a.r - c_b.r;
  const double dg = c_a.g - c_b.g;
  const double db = c_a.b - c_b.b;
  return std::exp(-std::sqrt(dr * dr + dg * dg + db * db) * eta);
}

AffinityBits pair_affinity(double psi, double phi, const AffinityConfig& cfg) noexcept {
  AffinityBits bits;
  bits.motion = psi > cfg.tau_m;
  bits.color = phi > cfg.tau_c;
  bits.affinity = bits.motion && bits.color;
  return bits;
}

std::span<const Pixel> forward_offsets_unit() { return kForward; }

PairAffinitySet build_pair_set(const Frame& frame, const MotionMap& motion,
                               std::span<const BoundingBox> boxes, const AffinityConfig& cfg) {
  cfg.validate();
  const int w = frame.width();
  const int h = frame.height();
  if (motion.width() != w || motion.height() != h) {
    throw Error(ErrorCode::kShape, "build_pair_set: motion map not aligned to frame");
  }
  PairAffinitySet set;
  set.frame_index = frame.index();
  if (boxes.empty()) return set;

  std::vector<std::uint8_t> inbox(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  for (const auto& b : boxes) {
    for (int y = std::max(b.y, 0); y < std::min(b.y + b.h, h); ++y) {
      for (int x = std::max(b.x, 0); x < std::min(b.x + b.w, w); ++x) {
        inbox[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  }
  const int d = cfg.dilation;
  const int s = cfg.stride;
  auto on_grid = [s](int x, int y) { return x % s == 0 && y % s == 0; };
  auto in_box = [&](int x, int y) { return inbox[static_cast<std::size_t>(y) * w + x] != 0; };

  const int rows = (h + s - 1) / s;
  std::vector<std::vector<PixelPair>> per_row(static_cast<std::size_t>(rows));

#pragma omp parallel for schedule(dynamic, 4)
  for (int r = 0; r < rows; ++r) {
    const int y = r * s;
    auto& out = per_row[static_cast<std::size_t>(r)];
    for (int x = 0; x < w; x += s) {
      auto emit = [&](Pixel off, bool backward) {
        const int qx = x + off.x * d;
        const int qy = y + off.y * d;
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) return;
        // a backward pair with an on-grid partner is emitted from the partner
        if (backward && on_grid(qx, qy)) return;
        if (!in_box(x, y) && !in_box(qx, qy)) return;
        PixelPair pp;
        pp.a = Pixel{x, y};
        pp.b = Pixel{qx, qy};
        if (pp.b < pp.a) std::swap(pp.a, pp.b);
        pp.psi = motion_similarity(motion.values.at(pp.a.x, pp.a.y),
                                   motion.values.at(pp.b.x, pp.b.y), cfg.eta);
        pp.phi = color_similarity(frame.color_at(pp.a.x, pp.a.y),
                                  frame.color_at(pp.b.x, pp.b.y), cfg.eta);
        const AffinityBits bits = pair_affinity(pp.psi, pp.phi, cfg);
        pp.motion_bit = bits.motion;
        pp.color_bit = bits.color;
        pp.affinity = bits.affinity;
        out.push_back(pp);
      };
      for (const Pixel& off : kForward) emit(off, false);
      if (s > 1) {
        for (const Pixel& off : kBackward) emit(off, true);
      }
    }
  }

  std::size_t total = 0;
  for (const auto& r : per_row) total += r.size();
  set.pairs.reserve(total);
  for (auto& r : per_row) set.pairs.insert(set.pairs.end(), r.begin(), r.end());
  if (!std::is_sorted(set.pairs.begin(), set.pairs.end(), raster_less)) {
    std::sort(set.pairs.begin(), set.pairs.end(), raster_less);
  }
  set.positive_count = static_cast<std::size_t>(std::count_if(
      set.pairs.begin(), set.pairs.end(), [](const PixelPair& p) { return p.affinity; }));
  return set;
}

GrayImage render_pseudo_mask(const PairAffinitySet& pairs, int width, int height) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<std::uint32_t> touched(n, 0);
  std::vector<std::uint32_t> positive(n, 0);
  auto idx = [width, height](const Pixel& p) {
    if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
      throw Error(ErrorCode::kShape, "render_pseudo_mask: pair outside the image");
    }
    return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(p.x);
  };
  for (const auto& pp : pairs.pairs) {
    for (const Pixel& p : {pp.a, pp.b}) {
      const std::size_t i = idx(p);
      ++touched[i];
      if (pp.affinity) ++positive[i];
    }
  }
  GrayImage out(width, height);
  auto v = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = touched[i] == 0 ? 0.0 : static_cast<double>(positive[i]) / touched[i];
  }
  return out;
}

}  // namespace motionseg
