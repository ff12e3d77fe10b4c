#include <cmath>
#include <numeric>

#include <doctest.h>

#include "motionseg/errors.hpp"
#include "motionseg/imaging.hpp"
#include "motionseg/serial.hpp"
#include "support.hpp"

using namespace motionseg;

TEST_CASE("luma weights") {
  CHECK(luma({1, 1, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(luma({0, 0, 0}) == 0.0);
  CHECK(luma({1, 0, 0}) == doctest::Approx(0.299).epsilon(1e-15));
  CHECK(luma({0, 1, 0}) == doctest::Approx(0.587).epsilon(1e-15));

  const Frame f = testing::flat_frame(0, 4, 3, {1, 0, 0});
  const GrayImage g = to_grayscale(f);
  CHECK(g.width() == 4);
  CHECK(g.height() == 3);
  for (double v : g.values()) CHECK(v == doctest::Approx(0.299));
  CHECK(f.gray() == g);
}

TEST_CASE("container validation") {
  CHECK_THROWS_AS(GrayImage(2, 2, std::vector<double>(3)), Error);
  CHECK_THROWS_AS(GrayImage(1, 1, std::vector<double>{1.5}), Error);
  CHECK_THROWS_AS(testing::flat_frame(0, 2, 5, {0, 0, 0}), Error);
  CHECK_THROWS_AS(testing::flat_frame(-1, 5, 5, {0, 0, 0}), Error);
  CHECK_THROWS_AS(testing::flat_frame(0, 5, 5, {0, 1.2, 0}), Error);
  CHECK_NOTHROW(testing::flat_frame(0, 3, 3, {0, 1, 0}));
}

TEST_CASE("gaussian kernel") {
  for (double sigma : {0.3, 0.5, 1.0, 2.5}) {
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(std::ceil(3 * sigma));
    REQUIRE(k.size() == static_cast<std::size_t>(2 * r + 1));
    CHECK(std::accumulate(k.begin(), k.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    for (int i = 0; i <= r; ++i) CHECK(k[r - i] == k[r + i]);
  }
  CHECK_THROWS_AS(gaussian_kernel(0.0), Error);
  CHECK_THROWS_AS(gaussian_blur(GrayImage(5, 5), -1.0), Error);
}

TEST_CASE("blur examples") {
  SUBCASE("constant image unchanged") {
    const GrayImage c(9, 7, 0.37);
    for (double s : {0.5, 1.0, 3.0}) {
      const GrayImage out = gaussian_blur(c, s);
      for (double v : out.values()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
    }
  }
  SUBCASE("impulse center equals squared normalized center tap") {
    GrayImage img(21, 21);
    img.at(10, 10) = 1.0;
    // independent kernel: exp(-x^2 / 2 sigma^2) over radius 3, normalized
    double sum = 0.0;
    for (int x = -3; x <= 3; ++x) sum += std::exp(-x * x / 2.0);
    const double center = 1.0 / sum;
    CHECK(gaussian_blur(img, 1.0).at(10, 10) == doctest::Approx(center * center).epsilon(1e-12));
  }
  SUBCASE("mass conserved on a 3x3 impulse, sigma 0.5") {
    // Edge clamping replicates border taps, so the block sits away from the border.
    GrayImage img(15, 15);
    for (int y = 6; y <= 8; ++y) {
      for (int x = 6; x <= 8; ++x) img.at(x, y) = 1.0;
    }
    const GrayImage out = gaussian_blur(img, 0.5);
    double s = 0.0;
    for (double v : out.values()) s += v;
    CHECK(std::abs(s - 9.0) <= 1e-6);
  }
  SUBCASE("range stays within the input range") {
    const GrayImage img = testing::random_gray(23, 17, 3);
    const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
    const GrayImage out = gaussian_blur(img, 1.3);
    for (double v : out.values()) {
      CHECK(v >= *lo - 1e-15);
      CHECK(v <= *hi + 1e-15);
    }
  }
}

TEST_CASE("blur matches the direct 2-D reference") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const GrayImage img = testing::random_gray(31 + static_cast<int>(seed), 19, seed);
    const GrayImage a = gaussian_blur(img, 0.8 + 0.4 * static_cast<double>(seed));
    const GrayImage b = serial::gaussian_blur(img, 0.8 + 0.4 * static_cast<double>(seed));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) <= 1e-12);
  }
}

TEST_CASE("warp examples") {
  const GrayImage img = testing::random_gray(12, 9, 11);
  SUBCASE("identity is bitwise equal") { CHECK(warp_affine(img, AffineTransform::identity()) == img); }
  SUBCASE("integer translation shifts one column, vacated column zero") {
    const GrayImage out = warp_affine(img, AffineTransform::translation(1, 0));
    for (int y = 0; y < img.height(); ++y) {
      CHECK(out.at(0, y) == 0.0);
      for (int x = 1; x < img.width(); ++x) CHECK(out.at(x, y) == img.at(x - 1, y));
    }
  }
  SUBCASE("half-pixel shift on a step edge averages neighbours") {
    GrayImage step(8, 4);
    for (int y = 0; y < 4; ++y) {
      for (int x = 4; x < 8; ++x) step.at(x, y) = 1.0;
    }
    const GrayImage out = warp_affine(step, AffineTransform::translation(0.5, 0));
    // out(x) = src(x - 0.5): at x = 4 the taps are src(3)=0 and src(4)=1
    for (int y = 0; y < 4; ++y) CHECK(out.at(4, y) == doctest::Approx(0.5));
    for (int y = 0; y < 4; ++y) CHECK(out.at(6, y) == doctest::Approx(1.0));
  }
  SUBCASE("singular transform rejected") {
    CHECK_THROWS_AS(warp_affine(img, AffineTransform{1, 2, 0, 2, 4, 0}), Error);
  }
}

TEST_CASE("warp round trip") {
  const GrayImage img = testing::smooth_texture(64, 48);
  const AffineTransform ts[] = {AffineTransform::translation(3, -2),
                                AffineTransform::rotation_about(32, 24, 2.0),
                                AffineTransform::rotation_about(32, 24, -3.0).then(AffineTransform::translation(1, 1))};
  for (const auto& t : ts) {
    const GrayImage back = warp_affine(warp_affine(img, t), t.inverse());
    const int margin = 6;
    for (int y = margin; y < img.height() - margin; ++y) {
      for (int x = margin; x < img.width() - margin; ++x) CHECK(std::abs(back.at(x, y) - img.at(x, y)) <= 2e-2);
    }
  }
}

TEST_CASE("warp matches the reference and support marks observed pixels") {
  const GrayImage img = testing::random_gray(40, 30, 5);
  const AffineTransform t = AffineTransform::rotation_about(20, 15, 7.0).then(AffineTransform::translation(2.3, -1.7));
  CHECK(warp_affine(img, t) == serial::warp_affine(img, t));

  const GrayImage s = warp_support(10, 10, AffineTransform::translation(2, 0));
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) CHECK(s.at(x, y) == (x >= 2 ? 1.0 : 0.0));
  }
}

TEST_CASE("affine algebra") {
  const AffineTransform r = AffineTransform::rotation_about(5, 7, 30.0);
  CHECK(r.apply_x(5, 7) == doctest::Approx(5.0));
  CHECK(r.apply_y(5, 7) == doctest::Approx(7.0));
  CHECK(r.determinant() == doctest::Approx(1.0));
  const AffineTransform id = r.then(r.inverse());
  CHECK(id.a == doctest::Approx(1.0));
  CHECK(std::abs(id.b) < 1e-12);
  CHECK(std::abs(id.tx) < 1e-12);
  CHECK(std::abs(id.ty) < 1e-12);
  const AffineTransform t = AffineTransform::translation(1, 0).then(AffineTransform::translation(0, 2));
  CHECK(t == AffineTransform::translation(1, 2));
  CHECK_THROWS_AS(AffineTransform({0, 0, 0, 0, 0, 0}).inverse(), Error);
}

TEST_CASE("abs difference") {
  const GrayImage a = testing::random_gray(6, 5, 1);
  const GrayImage b = testing::random_gray(6, 5, 2);
  const GrayImage zero = abs_difference(a, a);
  for (double v : zero.values()) CHECK(v == 0.0);
  CHECK(abs_difference(a, b) == abs_difference(b, a));
  const GrayImage ones = abs_difference(GrayImage(3, 3, 1.0), GrayImage(3, 3, 0.0));
  for (double v : ones.values()) CHECK(v == 1.0);
  GrayImage p(3, 3), q(3, 3);
  p.at(1, 1) = 0.7;
  q.at(1, 1) = 0.2;
  CHECK(abs_difference(p, q).at(1, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(abs_difference(GrayImage(3, 3), GrayImage(4, 3)), Error);
}

TEST_CASE("median filter") {
  SUBCASE("constant unchanged") { CHECK(median_filter(GrayImage(7, 6, 0.25), 2) == GrayImage(7, 6, 0.25)); }
  SUBCASE("single outlier removed") {
    GrayImage img(7, 7, 0.4);
    img.at(3, 3) = 1.0;
    CHECK(median_filter(img, 1) == GrayImage(7, 7, 0.4));
  }
  SUBCASE("checkerboard majority, enumerated per pixel") {
    GrayImage img(6, 5);
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 6; ++x) img.at(x, y) = (x + y) % 2;
    }
    const GrayImage out = median_filter(img, 1);
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 6; ++x) {
        int ones = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int sx = std::clamp(x + dx, 0, 5);
            const int sy = std::clamp(y + dy, 0, 4);
            ones += img.at(sx, sy) > 0.5 ? 1 : 0;
          }
        }
        CHECK(out.at(x, y) == (ones >= 5 ? 1.0 : 0.0));
      }
    }
  }
  SUBCASE("matches the sorting reference") {
    const GrayImage img = testing::random_gray(25, 18, 9);
    for (int r : {1, 2, 3}) CHECK(median_filter(img, r) == serial::median_filter(img, r));
  }
  CHECK_THROWS_AS(median_filter(GrayImage(4, 4), 0), Error);
}
