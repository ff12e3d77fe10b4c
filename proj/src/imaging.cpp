#include "motionseg/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "motionseg/errors.hpp"

namespace motionseg {

namespace {

void require_valid_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kShape, "image dimensions must be positive, got " +
                                       std::to_string(width) + "x" + std::to_string(height));
  }
}

void require_same_shape(const GrayImage& a, const GrayImage& b, const char* op) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kShape, std::string(op) + ": dimension mismatch " +
                                       std::to_string(a.width()) + "x" +
                                       std::to_string(a.height()) + " vs " +
                                       std::to_string(b.width()) + "x" +
                                       std::to_string(b.height()));
  }
}

double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

}  // namespace

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
  require_valid_dims(width, height);
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  require_valid_dims(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kShape, "GrayImage: value count does not match dimensions");
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kInvalidParameter, "GrayImage: value outside [0,1]");
    }
  }
}

double luma(const Rgb& c) noexcept {
  return clamp01(kLumaR * c.r + kLumaG * c.g + kLumaB * c.b);
}

Frame::Frame(int index, int width, int height, std::vector<Rgb> color)
    : index_(index), color_(std::move(color)) {
  if (index < 0) throw Error(ErrorCode::kInvalidParameter, "Frame: negative index");
  if (width < 3 || height < 3) {
    throw Error(ErrorCode::kShape, "Frame: dimensions must be at least 3x3");
  }
  if (color_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kShape, "Frame: pixel count does not match dimensions");
  }
  std::vector<double> gray(color_.size());
  for (std::size_t i = 0; i < color_.size(); ++i) {
    const Rgb& c = color_[i];
    for (double ch : {c.r, c.g, c.b}) {
      if (!(ch >= 0.0 && ch <= 1.0)) {
        throw Error(ErrorCode::kInvalidParameter, "Frame: channel outside [0,1]");
      }
    }
    gray[i] = luma(c);
  }
  gray_ = GrayImage(width, height, std::move(gray));
}

AffineTransform AffineTransform::rotation_about(double cx, double cy, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  // p' = R (p - c) + c
  return {cs, -sn, cx - cs * cx + sn * cy, sn, cs, cy - sn * cx - cs * cy};
}

bool AffineTransform::is_invertible() const noexcept {
  const double det = determinant();
  return std::isfinite(det) && std::abs(det) > 1e-12;
}

AffineTransform AffineTransform::inverse() const {
  if (!is_invertible()) {
    throw Error(ErrorCode::kInvalidParameter, "AffineTransform: not invertible");
  }
  const double det = determinant();
  AffineTransform inv;
  inv.a = d / det;
  inv.b = -b / det;
  inv.c = -c / det;
  inv.d = a / det;
  inv.tx = -(inv.a * tx + inv.b * ty);
  inv.ty = -(inv.c * tx + inv.d * ty);
  return inv;
}

AffineTransform AffineTransform::then(const AffineTransform& n) const noexcept {
  AffineTransform r;
  r.a = n.a * a + n.b * c;
  r.b = n.a * b + n.b * d;
  r.tx = n.a * tx + n.b * ty + n.tx;
  r.c = n.c * a + n.d * c;
  r.d = n.c * b + n.d * d;
  r.ty = n.c * tx + n.d * ty + n.ty;
  return r;
}

GrayImage to_grayscale(const Frame& frame) {
  std::vector<double> out(frame.color().size());
  const auto color = frame.color();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = luma(color[i]);
  return GrayImage(frame.width(), frame.height(), std::move(out));
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidParameter, "gaussian_blur: sigma must be positive");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int w = img.width();
  const int h = img.height();
  GrayImage tmp(w, h);
  GrayImage out(w, h);

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double* src = img.row(y);
    double* dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += k[static_cast<std::size_t>(i + radius)] * src[xx];
      }
      dst[x] = acc;
    }
  }

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    double* dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += k[static_cast<std::size_t>(i + radius)] * tmp.row(yy)[x];
      }
      dst[x] = clamp01(acc);
    }
  }
  return out;
}

namespace {

inline double tap_or_zero(const GrayImage& img, int x, int y) noexcept {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return 0.0;
  return img.at(x, y);
}

}  // namespace

GrayImage warp_affine(const GrayImage& img, const AffineTransform& t) {
  const AffineTransform inv = t.inverse();
  const int w = img.width();
  const int h = img.height();
  GrayImage out(w, h);

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    double* dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      const double sx = inv.apply_x(x, y);
      const double sy = inv.apply_y(x, y);
      const double fx0 = std::floor(sx);
      const double fy0 = std::floor(sy);
      if (fx0 < -1.0 || fy0 < -1.0 || fx0 > w || fy0 > h) {
        dst[x] = 0.0;
        continue;
      }
      const int x0 = static_cast<int>(fx0);
      const int y0 = static_cast<int>(fy0);
      const double ax = sx - fx0;
      const double ay = sy - fy0;
      const double v = (1.0 - ax) * (1.0 - ay) * tap_or_zero(img, x0, y0) +
                       ax * (1.0 - ay) * tap_or_zero(img, x0 + 1, y0) +
                       (1.0 - ax) * ay * tap_or_zero(img, x0, y0 + 1) +
                       ax * ay * tap_or_zero(img, x0 + 1, y0 + 1);
      dst[x] = clamp01(v);
    }
  }
  return out;
}

GrayImage warp_support(int width, int height, const AffineTransform& t) {
  const AffineTransform inv = t.inverse();
  GrayImage out(width, height);
  constexpr double kSlack = 1e-9;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    double* dst = out.row(y);
    for (int x = 0; x < width; ++x) {
      const double sx = inv.apply_x(x, y);
      const double sy = inv.apply_y(x, y);
      const bool inside = sx >= -kSlack && sy >= -kSlack && sx <= width - 1 + kSlack &&
                          sy <= height - 1 + kSlack;
      dst[x] = inside ? 1.0 : 0.0;
    }
  }
  return out;
}

GrayImage abs_difference(const GrayImage& a, const GrayImage& b) {
  require_same_shape(a, b, "abs_difference");
  GrayImage out(a.width(), a.height());
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = clamp01(std::abs(av[i] - bv[i]));
  return out;
}

GrayImage median_filter(const GrayImage& img, int radius) {
  if (radius < 1) throw Error(ErrorCode::kInvalidParameter, "median_filter: radius must be >= 1");
  const int w = img.width();
  const int h = img.height();
  const int side = 2 * radius + 1;
  GrayImage out(w, h);

#pragma omp parallel
  {
    std::vector<double> window(static_cast<std::size_t>(side * side));
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      double* dst = out.row(y);
      for (int x = 0; x < w; ++x) {
        std::size_t n = 0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const double* src = img.row(std::clamp(y + dy, 0, h - 1));
          for (int dx = -radius; dx <= radius; ++dx) {
            window[n++] = src[std::clamp(x + dx, 0, w - 1)];
          }
        }
        auto mid = window.begin() + static_cast<std::ptrdiff_t>(n / 2);
        std::nth_element(window.begin(), mid, window.end());
        dst[x] = *mid;
      }
    }
  }
  return out;
}

double sample_clamped(const GrayImage& img, double x, double y) noexcept {
  const int w = img.width();
  const int h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double* r0 = img.row(y0);
  const double* r1 = img.row(y1);
  return (1.0 - ax) * ((1.0 - ay) * r0[x0] + ay * r1[x0]) +
         ax * ((1.0 - ay) * r0[x1] + ay * r1[x1]);
}

}  // namespace motionseg
