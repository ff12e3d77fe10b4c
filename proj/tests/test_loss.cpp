#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "motionseg/errors.hpp"
#include "motionseg/loss.hpp"
#include "motionseg/metrics.hpp"
#include "motionseg/parallel.hpp"
#include "motionseg/serial.hpp"
#include "motionseg/synthetic.hpp"
#include "support.hpp"

using namespace motionseg;

namespace {

ConfidenceMap random_rho(int w, int h, std::uint64_t seed, double lo = 0.05, double hi = 0.95) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(w * h));
  for (auto& x : v) x = u(rng);
  return ConfidenceMap(0, w, h, std::move(v));
}

PairAffinitySet single_pair(Pixel a, Pixel b, bool positive) {
  PairAffinitySet s;
  PixelPair p;
  p.a = a;
  p.b = b;
  p.affinity = p.motion_bit = p.color_bit = positive;
  s.pairs.push_back(p);
  s.positive_count = positive ? 1 : 0;
  return s;
}

template <typename F>
std::vector<double> central_difference(const ConfidenceMap& rho, F f, double h) {
  std::vector<double> g(rho.rho.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    ConfidenceMap p = rho, m = rho;
    p.rho[i] += h;
    m.rho[i] -= h;
    g[i] = (f(p) - f(m)) / (2 * h);
  }
  return g;
}

// max |a - n| / max |n|. Entrywise ratios blow up on entries that cancel to
// ~1e-6 while the difference quotient carries ~1e-8 of rounding noise.
double max_rel_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - n[i]));
    scale = std::max(scale, std::abs(n[i]));
  }
  return diff / std::max(scale, 1e-12);
}

}  // namespace

TEST_CASE("same-class confidence") {
  CHECK(same_class_confidence(1, 1) == 1.0);
  CHECK(same_class_confidence(0.5, 0.5) == 0.5);
  CHECK(same_class_confidence(0.9, 0.8) == doctest::Approx(0.74).epsilon(1e-15));
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const double a = i / 20.0, b = j / 20.0;
      const double v = same_class_confidence(a, b);
      REQUIRE(v == doctest::Approx(a * b + (1 - a) * (1 - b)).epsilon(1e-15));
      REQUIRE(v == doctest::Approx(same_class_confidence(1 - a, 1 - b)).epsilon(1e-15));
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("affinity loss examples") {
  SUBCASE("agreement at rho = 1 costs nothing") {
    const Frame f = testing::flat_frame(0, 8, 8, {0.2, 0.2, 0.2});
    const auto pairs = build_pair_set(f, {0, GrayImage(8, 8)}, std::vector<BoundingBox>{{2, 2, 4, 4, 1}}, {});
    REQUIRE(pairs.positive_count == pairs.total());
    const auto r = affinity_loss(ConfidenceMap(0, 8, 8, std::vector<double>(64, 1.0)), pairs);
    CHECK(r.value == 0.0);
    // d/d rho is -(2 rho_b - 1)/rho_ab = -1 per touching pair; through the
    // sigmoid, rho (1 - rho) = 0, so the logit gradient vanishes.
    std::vector<int> touching(64, 0);
    for (const auto& p : pairs.pairs) {
      ++touching[static_cast<std::size_t>(p.a.y * 8 + p.a.x)];
      ++touching[static_cast<std::size_t>(p.b.y * 8 + p.b.x)];
    }
    for (std::size_t i = 0; i < 64; ++i) {
      CHECK(r.gradient[i] == -touching[i]);
      CHECK(r.gradient[i] * 1.0 * (1.0 - 1.0) == 0.0);
    }
  }
  SUBCASE("no positive pairs") {
    const auto r = affinity_loss(random_rho(4, 4, 1), single_pair({0, 0}, {1, 0}, false));
    CHECK(r.value == 0.0);
    for (double g : r.gradient) CHECK(g == 0.0);
  }
  SUBCASE("single pair 0.9 / 0.8") {
    std::vector<double> v(4, 0.5);
    v[0] = 0.9;
    v[1] = 0.8;
    const ConfidenceMap rho(0, 2, 2, v);
    const auto pairs = single_pair({0, 0}, {1, 0}, true);
    const auto r = affinity_loss(rho, pairs);
    CHECK(r.value == doctest::Approx(0.301105092783921614250655116879).epsilon(1e-14));
    const auto fd = central_difference(rho, [&](const ConfidenceMap& m) { return affinity_loss(m, pairs).value; }, 1e-6);
    CHECK(max_rel_error(r.gradient, fd) <= 1e-6);
    CHECK(r.gradient[0] == doctest::Approx(-(2 * 0.8 - 1) / 0.74));
  }
  SUBCASE("clamp keeps disagreement finite") {
    const ConfidenceMap rho(0, 2, 1, {1.0, 0.0});
    const auto r = affinity_loss(rho, single_pair({0, 0}, {1, 0}, true));
    CHECK(std::isfinite(r.value));
    CHECK(r.value == doctest::Approx(-std::log(kDefaultClampEps)));
    const auto loose = affinity_loss(rho, single_pair({0, 0}, {1, 0}, true), 1e-3);
    CHECK(loose.value == doctest::Approx(-std::log(1e-3)));
  }
}

TEST_CASE("affinity loss properties") {
  const Frame f = testing::random_frame(0, 16, 16, 4);
  const MotionMap m{0, testing::random_gray(16, 16, 5)};
  const std::vector<BoundingBox> boxes = {{2, 3, 10, 9, 1}};
  const auto pairs = build_pair_set(f, m, boxes, {});
  REQUIRE(pairs.positive_count > 0);
  REQUIRE(pairs.positive_count < pairs.total());

  SUBCASE("endpoint swap invariance") {
    PairAffinitySet swapped = pairs;
    for (auto& p : swapped.pairs) std::swap(p.a, p.b);
    const ConfidenceMap rho = random_rho(16, 16, 8);
    const auto a = affinity_loss(rho, pairs);
    const auto b = affinity_loss(rho, swapped);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-14));
    for (std::size_t i = 0; i < a.gradient.size(); ++i) CHECK(a.gradient[i] == doctest::Approx(b.gradient[i]).epsilon(1e-14));
  }
  SUBCASE("moving a pair toward agreement never increases the loss") {
    // Joint move toward (1,1) when rho_a + rho_b >= 1, toward (0,0) otherwise.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    const auto pair = single_pair({0, 0}, {1, 0}, true);
    for (int trial = 0; trial < 500; ++trial) {
      const double a0 = u(rng), b0 = u(rng);
      const double target = a0 + b0 >= 1 ? 1.0 : 0.0;
      double prev = INFINITY;
      for (int k = 0; k <= 10; ++k) {
        const double t = k / 10.0;
        const ConfidenceMap rho(0, 2, 1, {a0 + t * (target - a0), b0 + t * (target - b0)});
        const double v = affinity_loss(rho, pair).value;
        REQUIRE(v <= prev + 1e-15);
        prev = v;
      }
      REQUIRE(prev <= 1e-15);
    }
  }
  SUBCASE("finite for any rho in [0,1]") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      std::vector<double> v(256);
      std::mt19937_64 rng(s);
      for (auto& x : v) x = static_cast<double>(rng() % 2);
      const auto r = total_loss_with_gradient(ConfidenceMap(0, 16, 16, v), pairs, boxes);
      CHECK(std::isfinite(r.report.total));
      for (double g : r.gradient) CHECK(std::isfinite(g));
    }
  }
  SUBCASE("matches the serial accumulation bit for bit, any thread count") {
    const ConfidenceMap rho = random_rho(16, 16, 21);
    const auto ref = serial::affinity_loss(rho, pairs);
    const int saved = thread_count();
    for (int t : {1, 2, 4}) {
      set_thread_count(t);
      const auto r = affinity_loss(rho, pairs);
      CHECK(r.value == ref.value);
      CHECK(r.gradient == ref.gradient);
    }
    set_thread_count(saved);
  }
}

TEST_CASE("projection loss examples") {
  const int w = 20, h = 16;
  const BoundingBox box{6, 4, 8, 6, 1};
  const std::vector<BoundingBox> boxes = {box};
  auto fill = [&](auto pred) {
    std::vector<double> v(static_cast<std::size_t>(w * h), 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) v[static_cast<std::size_t>(y * w + x)] = pred(x, y) ? 1.0 : 0.0;
    }
    return ConfidenceMap(0, w, h, v);
  };
  SUBCASE("exact box gives zero") {
    const auto rho = fill([&](int x, int y) { return box.contains_pixel(x, y); });
    const auto axes = projection_axis_losses(rho, boxes);
    CHECK(std::abs(axes.x[0]) <= 1e-9);
    CHECK(std::abs(axes.y[0]) <= 1e-9);
    CHECK(std::abs(projection_loss(rho, boxes).value) <= 1e-9);
  }
  SUBCASE("empty prediction costs one per axis") {
    const auto axes = projection_axis_losses(fill([](int, int) { return false; }), boxes);
    CHECK(axes.x[0] == 1.0);
    CHECK(axes.y[0] == 1.0);
  }
  SUBCASE("left half of the box") {
    const auto rho = fill([&](int x, int y) { return box.contains_pixel(x, y) && x < box.x + box.w / 2; });
    const auto axes = projection_axis_losses(rho, boxes);
    const double half = box.w / 2.0;
    CHECK(axes.x[0] == doctest::Approx(1 - 2 * half / (half + box.w)));
    CHECK(axes.x[0] == doctest::Approx(1.0 / 3.0));
    CHECK(axes.y[0] == doctest::Approx(0.0));
  }
  SUBCASE("leakage into the margin is penalised") {
    const auto tight = projection_loss(fill([&](int x, int y) { return box.contains_pixel(x, y); }), boxes).value;
    const auto wide = projection_loss(fill([&](int x, int y) { return y >= box.y && y < box.y + box.h && x >= 2; }), boxes).value;
    CHECK(wide > tight);
  }
  SUBCASE("box outside the frame") {
    const std::vector<BoundingBox> outside = {{30, 30, 4, 4, 1}};
    CHECK_THROWS_AS(projection_loss(fill([](int, int) { return false; }), outside), Error);
  }
}

TEST_CASE("gradients match central differences") {
  const int n = 16;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ConfidenceMap rho = random_rho(n, n, 1000 + seed);
    const Frame f = testing::random_frame(0, n, n, 2000 + seed);
    const MotionMap m{0, testing::random_gray(n, n, 3000 + seed)};
    const std::vector<BoundingBox> boxes = {{1 + int(seed % 3), 2, 9, 8, 1}, {8, 9, 6, 5, 2}};
    const auto pairs = build_pair_set(f, m, boxes, {});

    const auto aff = affinity_loss(rho, pairs);
    const auto aff_fd = central_difference(rho, [&](const ConfidenceMap& r) { return affinity_loss(r, pairs).value; }, 1e-6);
    CHECK(max_rel_error(aff.gradient, aff_fd) <= 1e-5);

    const auto proj = projection_loss(rho, boxes);
    const auto proj_fd = central_difference(rho, [&](const ConfidenceMap& r) { return projection_loss(r, boxes).value; }, 1e-6);
    CHECK(max_rel_error(proj.gradient, proj_fd) <= 1e-5);
  }
}

TEST_CASE("total loss") {
  const Frame f = testing::random_frame(0, 16, 16, 4);
  const MotionMap m{0, testing::random_gray(16, 16, 5)};
  const std::vector<BoundingBox> boxes = {{2, 3, 10, 9, 1}};
  const auto pairs = build_pair_set(f, m, boxes, {});
  const ConfidenceMap rho = random_rho(16, 16, 9);
  CHECK(total_loss(rho, pairs, boxes, {0, 0}).total == 0.0);
  const auto only_aff = total_loss(rho, pairs, boxes, {1, 0});
  CHECK(only_aff.total == affinity_loss(rho, pairs).value);
  CHECK(only_aff.positive_pairs == pairs.positive_count);
  const auto both = total_loss(rho, pairs, boxes, {0.5, 2.0});
  CHECK(both.total == doctest::Approx(0.5 * both.affinity_loss + 2.0 * both.projection_loss));
  const auto with_grad = total_loss_with_gradient(rho, pairs, boxes, {0.5, 2.0});
  CHECK(with_grad.report.total == both.total);
  const auto a = affinity_loss(rho, pairs);
  const auto p = projection_loss(rho, boxes);
  for (std::size_t i = 0; i < a.gradient.size(); ++i) {
    CHECK(with_grad.gradient[i] == doctest::Approx(0.5 * a.gradient[i] + 2.0 * p.gradient[i]));
  }
}

TEST_CASE("planted-perfect confidence on the moving-square scene") {
  synth::SceneSpec s;
  s.frames = 3;
  synth::ObjectSpec o;
  o.velocity_x = 3;
  o.velocity_y = 1;
  o.color = Rgb{0.9, 0.2, 0.1};
  s.objects.push_back(o);
  const auto seq = synth::generate(s);
  for (int t = 0; t < 3; ++t) {
    const BinaryMask gt = seq.foreground(t);
    std::vector<double> v(gt.fg.begin(), gt.fg.end());
    const ConfidenceMap rho(t, s.width, s.height, v);
    const auto pairs = build_pair_set(seq.frames[t], seq.planted_motion[t], seq.boxes[t], {});
    CHECK(total_loss(rho, pairs, seq.boxes[t]).total <= 1e-6);
  }
}

TEST_CASE("mask optimisation") {
  synth::SceneSpec s;
  s.width = 96;
  s.height = 72;
  s.frames = 2;
  s.seed = 3;
  synth::ObjectSpec o;
  o.width = 24;
  o.height = 20;
  o.start_x = 30;
  o.start_y = 25;
  o.velocity_x = 3;
  o.velocity_y = 2;
  o.color = Rgb{0.9, 0.15, 0.1};
  o.box_margin = 3;
  s.objects.push_back(o);
  const auto seq = synth::generate(s);
  const Frame& f = seq.frames[1];
  AffinityConfig cfg;
  cfg.dilation = 1;

  SUBCASE("zero steps returns the initialisation") {
    OptimizeOptions opt;
    opt.steps = 0;
    const auto r = optimize_mask(f, seq.planted_motion[1], seq.boxes[1], cfg, opt);
    const BoundingBox& b = seq.boxes[1][0];
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) {
        const double expect = b.contains_pixel(x, y) ? 0.5 : 1.0 / (1.0 + std::exp(4.0));
        REQUIRE(r.confidence.at(x, y) == doctest::Approx(expect).epsilon(1e-15));
      }
    }
    CHECK(r.loss_history.size() == 1);
  }
  SUBCASE("planted motion carves the square") {
    const auto r = optimize_mask(f, seq.planted_motion[1], seq.boxes[1], cfg);
    const BinaryMask pred = threshold_mask(r.confidence.rho, f.width(), f.height(), 0.5);
    CHECK(jaccard(pred, seq.foreground(1)) >= 0.8);
    CHECK(r.loss_history.size() == 501);
    for (std::size_t i = 1; i < r.loss_history.size(); ++i) CHECK(r.loss_history[i] <= r.loss_history[i - 1]);
  }
  SUBCASE("frame-difference motion and colour on a flat background") {
    synth::SceneSpec flat = s;
    flat.background = Rgb{0.3, 0.4, 0.5};
    flat.frames = 3;
    const auto fs = synth::generate(flat);
    const MotionMap motion =
        motion_pipeline(fs.frames[0], fs.frames[1], fs.frames[2], fs.boxes[1], CompensationConfig{}, 1);
    AffinityConfig colour = cfg;
    colour.eta = 2.0;
    colour.tau_c = 0.3;
    const auto r = optimize_mask(fs.frames[1], motion, fs.boxes[1], colour);
    const BinaryMask pred = threshold_mask(r.confidence.rho, f.width(), f.height(), 0.5);
    CHECK(jaccard(pred, fs.foreground(1)) >= 0.8);
  }
  SUBCASE("deterministic") {
    OptimizeOptions opt;
    opt.steps = 50;
    const auto a = optimize_mask(f, seq.planted_motion[1], seq.boxes[1], cfg, opt);
    const auto b = optimize_mask(f, seq.planted_motion[1], seq.boxes[1], cfg, opt);
    CHECK(a.confidence.rho == b.confidence.rho);
    CHECK(a.loss_history == b.loss_history);
  }
  SUBCASE("invalid options") {
    OptimizeOptions opt;
    opt.steps = -1;
    CHECK_THROWS_AS(optimize_mask(f, seq.planted_motion[1], seq.boxes[1], cfg, opt), Error);
    opt.steps = 5;
    opt.lr = 0;
    CHECK_THROWS_AS(optimize_mask(f, seq.planted_motion[1], seq.boxes[1], cfg, opt), Error);
  }
}

TEST_CASE("confidence map validation") {
  CHECK_THROWS_AS(ConfidenceMap(0, 2, 2, {0.1, 0.2, 0.3}), Error);
  CHECK_THROWS_AS(ConfidenceMap(0, 1, 2, {0.1, 1.2}), Error);
}
