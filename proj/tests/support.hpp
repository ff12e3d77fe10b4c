#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "motionseg/imaging.hpp"

namespace testing {

namespace fs = std::filesystem;

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("motionseg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline motionseg::GrayImage random_gray(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(w * h));
  for (auto& x : v) x = u(rng);
  return motionseg::GrayImage(w, h, std::move(v));
}

inline motionseg::Frame random_frame(int index, int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<motionseg::Rgb> c(static_cast<std::size_t>(w * h));
  for (auto& p : c) p = {u(rng), u(rng), u(rng)};
  return motionseg::Frame(index, w, h, std::move(c));
}

inline motionseg::Frame gray_frame(int index, const motionseg::GrayImage& g) {
  std::vector<motionseg::Rgb> c;
  c.reserve(g.size());
  for (double v : g.values()) c.push_back({v, v, v});
  return motionseg::Frame(index, g.width(), g.height(), std::move(c));
}

inline motionseg::Frame flat_frame(int index, int w, int h, motionseg::Rgb color) {
  return motionseg::Frame(index, w, h, std::vector<motionseg::Rgb>(static_cast<std::size_t>(w * h), color));
}

// Smooth deterministic texture, good for trackers and corners.
inline motionseg::GrayImage smooth_texture(int w, int h, double shift_x = 0.0, double shift_y = 0.0) {
  motionseg::GrayImage g(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = x - shift_x;
      const double v = y - shift_y;
      const double s = 0.5 + 0.2 * std::sin(0.31 * u + 0.7) * std::cos(0.23 * v) +
                       0.15 * std::sin(0.11 * u * 0.9 + 0.17 * v) + 0.1 * std::cos(0.41 * v - 0.05 * u);
      g.at(x, y) = std::clamp(s, 0.0, 1.0);
    }
  }
  return g;
}

}  // namespace testing
