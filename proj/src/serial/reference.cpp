#include <algorithm>
#include <cmath>

#include "motionseg/errors.hpp"
#include "motionseg/serial.hpp"

namespace motionseg::serial {

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const std::vector<double> k = motionseg::gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width();
  const int h = img.height();
  GrayImage out(w, h);
  // Direct 2-D convolution with the outer-product kernel.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j) {
        for (int i = -r; i <= r; ++i) {
          acc += k[static_cast<std::size_t>(i + r)] * k[static_cast<std::size_t>(j + r)] *
                 img.at(std::clamp(x + i, 0, w - 1), std::clamp(y + j, 0, h - 1));
        }
      }
      out.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

GrayImage warp_affine(const GrayImage& img, const AffineTransform& t) {
  const AffineTransform inv = t.inverse();
  const int w = img.width();
  const int h = img.height();
  auto tap = [&](int x, int y) {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : img.at(x, y);
  };
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = inv.a * x + inv.b * y + inv.tx;
      const double sy = inv.c * x + inv.d * y + inv.ty;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      if (fx < -1.0 || fy < -1.0 || fx > w || fy > h) continue;
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const double ax = sx - fx;
      const double ay = sy - fy;
      double v = 0.0;
      v += (1.0 - ax) * (1.0 - ay) * tap(x0, y0);
      v += ax * (1.0 - ay) * tap(x0 + 1, y0);
      v += (1.0 - ax) * ay * tap(x0, y0 + 1);
      v += ax * ay * tap(x0 + 1, y0 + 1);
      out.at(x, y) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

GrayImage median_filter(const GrayImage& img, int radius) {
  if (radius < 1) throw Error(ErrorCode::kInvalidParameter, "median_filter: radius must be >= 1");
  const int w = img.width();
  const int h = img.height();
  GrayImage out(w, h);
  std::vector<double> window;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      window.clear();
      for (int j = -radius; j <= radius; ++j) {
        for (int i = -radius; i <= radius; ++i) {
          window.push_back(img.at(std::clamp(x + i, 0, w - 1), std::clamp(y + j, 0, h - 1)));
        }
      }
      std::sort(window.begin(), window.end());
      out.at(x, y) = window[window.size() / 2];
    }
  }
  return out;
}

std::vector<double> corner_response(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  auto px = [&](int x, int y) { return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  auto grad = [&](int x, int y, double& gx, double& gy) {
    // Sobel taps read from the clamped neighborhood of the clamped center.
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1) - px(x - 1, y - 1) -
          2.0 * px(x - 1, y) - px(x - 1, y + 1)) /
         8.0;
    gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1) - px(x - 1, y - 1) -
          2.0 * px(x, y - 1) - px(x + 1, y - 1)) /
         8.0;
  };
  std::vector<double> out(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sxx = 0.0, sxy = 0.0, syy = 0.0;
      for (int j = -1; j <= 1; ++j) {
        for (int i = -1; i <= 1; ++i) {
          double gx = 0.0, gy = 0.0;
          grad(x + i, y + j, gx, gy);
          sxx += gx * gx;
          sxy += gx * gy;
          syy += gy * gy;
        }
      }
      const double tr = sxx + syy;
      const double det = sxx * syy - sxy * sxy;
      const double disc = std::max(0.0, tr * tr / 4.0 - det);
      out[static_cast<std::size_t>(y) * w + x] = std::max(0.0, tr / 2.0 - std::sqrt(disc));
    }
  }
  return out;
}

PairAffinitySet build_pair_set(const Frame& frame, const MotionMap& motion,
                               std::span<const BoundingBox> boxes, const AffinityConfig& cfg) {
  cfg.validate();
  const int w = frame.width();
  const int h = frame.height();
  if (motion.width() != w || motion.height() != h) {
    throw Error(ErrorCode::kShape, "build_pair_set: motion map not aligned to frame");
  }
  auto in_box = [&](int x, int y) {
    return std::any_of(boxes.begin(), boxes.end(),
                       [&](const BoundingBox& b) { return b.contains_pixel(x, y); });
  };
  auto on_grid = [&](int x, int y) { return x % cfg.stride == 0 && y % cfg.stride == 0; };

  PairAffinitySet set;
  set.frame_index = frame.index();
  const int d = cfg.dilation;
  // Every unordered neighbor pair {p, q} with q raster-after p, kept when an
  // endpoint is on the stride grid and an endpoint is inside a box.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (const Pixel& u : forward_offsets_unit()) {
        const int qx = x + u.x * d;
        const int qy = y + u.y * d;
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
        if (!on_grid(x, y) && !on_grid(qx, qy)) continue;
        if (!in_box(x, y) && !in_box(qx, qy)) continue;
        PixelPair pp;
        pp.a = {x, y};
        pp.b = {qx, qy};
        pp.psi = motion_similarity(motion.values.at(x, y), motion.values.at(qx, qy), cfg.eta);
        pp.phi = color_similarity(frame.color_at(x, y), frame.color_at(qx, qy), cfg.eta);
        const AffinityBits bits = pair_affinity(pp.psi, pp.phi, cfg);
        pp.motion_bit = bits.motion;
        pp.color_bit = bits.color;
        pp.affinity = bits.affinity;
        set.positive_count += pp.affinity ? 1 : 0;
        set.pairs.push_back(pp);
      }
    }
  }
  std::sort(set.pairs.begin(), set.pairs.end(), [](const PixelPair& l, const PixelPair& r) {
    return l.a != r.a ? l.a < r.a : l.b < r.b;
  });
  return set;
}

LossAndGradient affinity_loss(const ConfidenceMap& rho, const PairAffinitySet& pairs,
                              double clamp_eps) {
  LossAndGradient out;
  out.gradient.assign(rho.rho.size(), 0.0);
  for (const auto& pp : pairs.pairs) {
    if (!pp.affinity) continue;
    const std::size_t ia = static_cast<std::size_t>(pp.a.y) * rho.width + pp.a.x;
    const std::size_t ib = static_cast<std::size_t>(pp.b.y) * rho.width + pp.b.x;
    const double ra = rho.rho[ia];
    const double rb = rho.rho[ib];
    const double rab = ra * rb + (1.0 - ra) * (1.0 - rb);
    if (rab > clamp_eps) {
      out.value += -std::log(rab);
      out.gradient[ia] += -(2.0 * rb - 1.0) / rab;
      out.gradient[ib] += -(2.0 * ra - 1.0) / rab;
    } else {
      out.value += -std::log(clamp_eps);
    }
  }
  return out;
}

}  // namespace motionseg::serial
