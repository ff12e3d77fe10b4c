#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace motionseg {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  bool operator==(const Rgb&) const = default;
};

/// Single-channel image with values in [0,1], row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  /// Throws kShape on a size mismatch and kInvalidParameter on values
  /// outside [0,1].
  GrayImage(int width, int height, std::vector<double> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double at(int x, int y) const { return values_[index(x, y)]; }
  double& at(int x, int y) { return values_[index(x, y)]; }
  std::span<const double> values() const& noexcept { return values_; }
  std::span<double> values() & noexcept { return values_; }
  // A span into a temporary would dangle, e.g. in a range-for.
  std::span<const double> values() const&& = delete;
  const double* row(int y) const { return values_.data() + index(0, y); }
  double* row(int y) { return values_.data() + index(0, y); }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// A video frame: color plane plus its luma plane.
class Frame {
 public:
  /// Requires width, height >= 3 and channels in [0,1].
  Frame(int index, int width, int height, std::vector<Rgb> color);

  int index() const noexcept { return index_; }
  int width() const noexcept { return gray_.width(); }
  int height() const noexcept { return gray_.height(); }
  std::span<const Rgb> color() const noexcept { return color_; }
  const Rgb& color_at(int x, int y) const {
    return color_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width()) +
                  static_cast<std::size_t>(x)];
  }
  const GrayImage& gray() const noexcept { return gray_; }

 private:
  int index_;
  std::vector<Rgb> color_;
  GrayImage gray_;
};

/// (x, y) -> (a*x + b*y + tx, c*x + d*y + ty)
struct AffineTransform {
  double a = 1.0;
  double b = 0.0;
  double tx = 0.0;
  double c = 0.0;
  double d = 1.0;
  double ty = 0.0;

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double dx, double dy) {
    return {1.0, 0.0, dx, 0.0, 1.0, dy};
  }
  /// Counter-clockwise in image coordinates (y down renders clockwise).
  static AffineTransform rotation_about(double cx, double cy, double degrees);

  double determinant() const noexcept { return a * d - b * c; }
  bool is_invertible() const noexcept;
  /// Throws kInvalidParameter when singular.
  AffineTransform inverse() const;
  /// Applies *this first, then `next`.
  AffineTransform then(const AffineTransform& next) const noexcept;

  double apply_x(double x, double y) const noexcept { return a * x + b * y + tx; }
  double apply_y(double x, double y) const noexcept { return c * x + d * y + ty; }

  bool operator==(const AffineTransform&) const = default;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

double luma(const Rgb& c) noexcept;
GrayImage to_grayscale(const Frame& frame);

/// Separable Gaussian, radius ceil(3*sigma), edge-clamped borders.
GrayImage gaussian_blur(const GrayImage& img, double sigma);
/// Normalized 1-D kernel of length 2*ceil(3*sigma)+1.
std::vector<double> gaussian_kernel(double sigma);

/// Inverse-mapping bilinear warp; taps outside the source read as 0.
GrayImage warp_affine(const GrayImage& img, const AffineTransform& t);
/// 1 where the inverse-mapped position lies inside the source, else 0.
GrayImage warp_support(int width, int height, const AffineTransform& t);

GrayImage abs_difference(const GrayImage& a, const GrayImage& b);
GrayImage median_filter(const GrayImage& img, int radius);

/// Bilinear sample with coordinates clamped to the image.
double sample_clamped(const GrayImage& img, double x, double y) noexcept;

}  // namespace motionseg
