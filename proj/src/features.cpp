#include "motionseg/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "motionseg/errors.hpp"

namespace motionseg {

namespace {

// Near-singular LK systems: min eigenvalue of the window-averaged tensor,
// expressed on the 8-bit intensity scale, below this is rejected.
constexpr double kMinEigenThreshold = 1e-4;
constexpr double kIntensityScale = 255.0;

struct Plane {
  int w = 0;
  int h = 0;
  const double* v = nullptr;

  double sample(double x, double y) const noexcept {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double ax = x - x0;
    const double ay = y - y0;
    const double* r0 = v + static_cast<std::ptrdiff_t>(y0) * w;
    const double* r1 = v + static_cast<std::ptrdiff_t>(y1) * w;
    return (1.0 - ax) * ((1.0 - ay) * r0[x0] + ay * r1[x0]) +
           ax * ((1.0 - ay) * r0[x1] + ay * r1[x1]);
  }
};

double min_eigenvalue(double sxx, double sxy, double syy) noexcept {
  const double half_trace = 0.5 * (sxx + syy);
  const double half_diff = 0.5 * (sxx - syy);
  return std::max(0.0, half_trace - std::sqrt(half_diff * half_diff + sxy * sxy));
}

struct Level {
  GrayImage image;
  detail::Gradients grad;
};

}  // namespace

std::size_t CorrespondenceSet::tracked_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.tracked; }));
}

namespace detail {

Gradients sobel(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  Gradients g;
  g.gx.resize(img.size());
  g.gy.resize(img.size());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double* up = img.row(std::max(y - 1, 0));
    const double* mid = img.row(y);
    const double* dn = img.row(std::min(y + 1, h - 1));
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0);
      const int xr = std::min(x + 1, w - 1);
      const double gx = (up[xr] - up[xl]) + 2.0 * (mid[xr] - mid[xl]) + (dn[xr] - dn[xl]);
      const double gy = (dn[xl] - up[xl]) + 2.0 * (dn[x] - up[x]) + (dn[xr] - up[xr]);
      const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                            static_cast<std::size_t>(x);
      g.gx[i] = gx / 8.0;
      g.gy[i] = gy / 8.0;
    }
  }
  return g;
}

GrayImage pyr_down(const GrayImage& img) {
  static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int w = img.width();
  const int h = img.height();
  const int nw = (w + 1) / 2;
  const int nh = (h + 1) / 2;
  GrayImage tmp(nw, h);
  GrayImage out(nw, nh);
  for (int y = 0; y < h; ++y) {
    const double* src = img.row(y);
    double* dst = tmp.row(y);
    for (int x = 0; x < nw; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * src[std::clamp(2 * x + i, 0, w - 1)];
      dst[x] = acc;
    }
  }
  for (int y = 0; y < nh; ++y) {
    double* dst = out.row(y);
    for (int x = 0; x < nw; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * tmp.row(std::clamp(2 * y + i, 0, h - 1))[x];
      dst[x] = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace detail

std::vector<double> corner_response(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  const detail::Gradients g = detail::sobel(img);
  const std::size_t n = img.size();
  std::vector<double> xx(n), xy(n), yy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = g.gx[i] * g.gx[i];
    xy[i] = g.gx[i] * g.gy[i];
    yy[i] = g.gy[i] * g.gy[i];
  }

  // 3x3 box sums, horizontal then vertical.
  auto box3 = [w, h](const std::vector<double>& src) {
    std::vector<double> tmp(src.size());
    std::vector<double> out(src.size());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
      const double* s = src.data() + static_cast<std::ptrdiff_t>(y) * w;
      double* d = tmp.data() + static_cast<std::ptrdiff_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        d[x] = s[std::max(x - 1, 0)] + s[x] + s[std::min(x + 1, w - 1)];
      }
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
      const double* u = tmp.data() + static_cast<std::ptrdiff_t>(std::max(y - 1, 0)) * w;
      const double* m = tmp.data() + static_cast<std::ptrdiff_t>(y) * w;
      const double* l = tmp.data() + static_cast<std::ptrdiff_t>(std::min(y + 1, h - 1)) * w;
      double* d = out.data() + static_cast<std::ptrdiff_t>(y) * w;
      for (int x = 0; x < w; ++x) d[x] = u[x] + m[x] + l[x];
    }
    return out;
  };
  const auto sxx = box3(xx);
  const auto sxy = box3(xy);
  const auto syy = box3(yy);

  std::vector<double> response(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    response[static_cast<std::size_t>(i)] = min_eigenvalue(
        sxx[static_cast<std::size_t>(i)], sxy[static_cast<std::size_t>(i)],
        syy[static_cast<std::size_t>(i)]);
  }
  return response;
}

std::vector<FeaturePoint> detect_corners(const GrayImage& img, const CornerParams& params) {
  if (img.width() < 8 || img.height() < 8) {
    throw Error(ErrorCode::kShape, "detect_corners: image must be at least 8x8");
  }
  if (params.max_points < 1 || !(params.quality > 0.0 && params.quality < 1.0) ||
      !(params.min_distance >= 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "detect_corners: invalid parameters");
  }
  const int w = img.width();
  const int h = img.height();
  const std::vector<double> response = corner_response(img);
  const double peak = *std::max_element(response.begin(), response.end());
  if (!(peak > 0.0)) return {};
  const double threshold = params.quality * peak;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < response.size(); ++i) {
    if (response[i] > threshold) candidates.push_back(i);
  }
  // candidates are in raster order; a stable sort keeps that as tie-break
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t l, std::size_t r) { return response[l] > response[r]; });

  const double min_d = params.min_distance;
  const double min_d2 = min_d * min_d;
  const int cell = std::max(1, static_cast<int>(std::ceil(min_d)));
  const int gw = (w + cell - 1) / cell;
  const int gh = (h + cell - 1) / cell;
  std::vector<std::vector<FeaturePoint>> grid(static_cast<std::size_t>(gw) *
                                              static_cast<std::size_t>(gh));

  std::vector<FeaturePoint> out;
  for (std::size_t idx : candidates) {
    const int x = static_cast<int>(idx % static_cast<std::size_t>(w));
    const int y = static_cast<int>(idx / static_cast<std::size_t>(w));
    const int cx = x / cell;
    const int cy = y / cell;
    bool keep = true;
    if (min_d > 0.0) {
      for (int gy = std::max(cy - 1, 0); keep && gy <= std::min(cy + 1, gh - 1); ++gy) {
        for (int gx = std::max(cx - 1, 0); keep && gx <= std::min(cx + 1, gw - 1); ++gx) {
          for (const auto& p : grid[static_cast<std::size_t>(gy) * gw + gx]) {
            const double dx = p.x - x;
            const double dy = p.y - y;
            if (dx * dx + dy * dy < min_d2) {
              keep = false;
              break;
            }
          }
        }
      }
    }
    if (!keep) continue;
    FeaturePoint fp{static_cast<double>(x), static_cast<double>(y), response[idx]};
    grid[static_cast<std::size_t>(cy) * gw + cx].push_back(fp);
    out.push_back(fp);
    if (static_cast<int>(out.size()) >= params.max_points) break;
  }
  return out;
}

CorrespondenceSet track_sparse_flow(const GrayImage& prev, const GrayImage& next,
                                    std::span<const FeaturePoint> points,
                                    const FlowParams& params) {
  if (prev.width() != next.width() || prev.height() != next.height()) {
    throw Error(ErrorCode::kShape, "track_sparse_flow: dimension mismatch");
  }
  if (params.levels < 1 || params.window < 5 || params.window % 2 == 0 ||
      params.max_iters < 1 || !(params.eps > 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "track_sparse_flow: invalid parameters");
  }
  const int half = params.window / 2;

  std::vector<Level> prev_pyr;
  std::vector<Level> next_pyr;
  prev_pyr.push_back({prev, detail::sobel(prev)});
  next_pyr.push_back({next, {}});
  for (int l = 1; l < params.levels; ++l) {
    const GrayImage& top = prev_pyr.back().image;
    if ((top.width() + 1) / 2 < params.window || (top.height() + 1) / 2 < params.window) break;
    GrayImage p = detail::pyr_down(top);
    GrayImage n = detail::pyr_down(next_pyr.back().image);
    detail::Gradients g = detail::sobel(p);
    prev_pyr.push_back({std::move(p), std::move(g)});
    next_pyr.push_back({std::move(n), {}});
  }
  const int levels = static_cast<int>(prev_pyr.size());

  CorrespondenceSet cs;
  cs.entries.resize(points.size());
  const double w0 = prev.width();
  const double h0 = prev.height();
  const std::size_t win_n = static_cast<std::size_t>(params.window) *
                            static_cast<std::size_t>(params.window);

#pragma omp parallel
  {
    std::vector<double> tmpl(win_n), tgx(win_n), tgy(win_n);
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(points.size()); ++pi) {
      const FeaturePoint& pt = points[static_cast<std::size_t>(pi)];
      Correspondence& out = cs.entries[static_cast<std::size_t>(pi)];
      out.source = pt;
      out.tracked = false;
      if (pt.x - half < 0.0 || pt.y - half < 0.0 || pt.x + half > w0 - 1 ||
          pt.y + half > h0 - 1) {
        continue;
      }

      double gx = 0.0;  // accumulated guess at the current level
      double gy = 0.0;
      bool ok = true;
      for (int l = levels - 1; l >= 0 && ok; --l) {
        const Level& L = prev_pyr[static_cast<std::size_t>(l)];
        const Plane I{L.image.width(), L.image.height(), L.image.values().data()};
        const Plane Ix{I.w, I.h, L.grad.gx.data()};
        const Plane Iy{I.w, I.h, L.grad.gy.data()};
        const GrayImage& Jimg = next_pyr[static_cast<std::size_t>(l)].image;
        const Plane J{Jimg.width(), Jimg.height(), Jimg.values().data()};
        const double scale = std::ldexp(1.0, -l);
        const double px = pt.x * scale;
        const double py = pt.y * scale;

        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        std::size_t k = 0;
        for (int j = -half; j <= half; ++j) {
          for (int i = -half; i <= half; ++i, ++k) {
            tmpl[k] = I.sample(px + i, py + j);
            tgx[k] = Ix.sample(px + i, py + j);
            tgy[k] = Iy.sample(px + i, py + j);
            sxx += tgx[k] * tgx[k];
            sxy += tgx[k] * tgy[k];
            syy += tgy[k] * tgy[k];
          }
        }
        const double lambda = min_eigenvalue(sxx, sxy, syy) / static_cast<double>(win_n) *
                              kIntensityScale * kIntensityScale;
        if (!(lambda >= kMinEigenThreshold)) {
          ok = false;
          break;
        }
        const double det = sxx * syy - sxy * sxy;

        double vx = 0.0;
        double vy = 0.0;
        for (int it = 0; it < params.max_iters; ++it) {
          const double qx = px + gx + vx;
          const double qy = py + gy + vy;
          double bx = 0.0;
          double by = 0.0;
          k = 0;
          for (int j = -half; j <= half; ++j) {
            for (int i = -half; i <= half; ++i, ++k) {
              const double diff = tmpl[k] - J.sample(qx + i, qy + j);
              bx += diff * tgx[k];
              by += diff * tgy[k];
            }
          }
          const double dx = (syy * bx - sxy * by) / det;
          const double dy = (sxx * by - sxy * bx) / det;
          if (!std::isfinite(dx) || !std::isfinite(dy)) {
            ok = false;
            break;
          }
          vx += dx;
          vy += dy;
          if (std::abs(px + gx + vx) > 2.0 * I.w || std::abs(py + gy + vy) > 2.0 * I.h) {
            ok = false;
            break;
          }
          if (dx * dx + dy * dy < params.eps * params.eps) break;
        }
        if (!ok) break;
        if (l > 0) {
          gx = 2.0 * (gx + vx);
          gy = 2.0 * (gy + vy);
        } else {
          gx += vx;
          gy += vy;
        }
      }
      if (!ok) continue;
      const double tx = pt.x + gx;
      const double ty = pt.y + gy;
      if (!(tx >= 0.0 && ty >= 0.0 && tx <= w0 - 1 && ty <= h0 - 1)) continue;
      out.target = FeaturePoint{tx, ty, pt.score};
      out.tracked = true;
    }
  }
  return cs;
}

}  // namespace motionseg
