#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "motionseg/compensation.hpp"
#include "motionseg/imaging.hpp"
#include "motionseg/metrics.hpp"

namespace motionseg::synth {

struct ObjectSpec {
  int object_id = 1;
  int width = 40;
  int height = 40;
  double start_x = 40.0;  // top-left, image coordinates
  double start_y = 40.0;
  double velocity_x = 0.0;  // pixels per frame
  double velocity_y = 0.0;
  std::optional<Rgb> color;  // uniform color; textured when absent
  int box_margin = 0;
  bool annotated = true;  // false: a distractor with no box and no mask
};

struct SceneSpec {
  int width = 160;
  int height = 120;
  int frames = 3;
  std::uint64_t seed = 0;
  double pan_x = 0.0;  // background displacement per frame
  double pan_y = 0.0;
  double rotation_deg = 0.0;  // per frame, about the image center
  double texture_scale = 6.0;  // background noise cell size in pixels
  double texture_contrast = 1.0;
  bool monochrome = false;  // gray textures, so contrast survives the luma conversion
  std::optional<Rgb> background;  // flat background instead of texture
  std::vector<ObjectSpec> objects;

  /// Throws kInvalidInput.
  void validate() const;
};

SceneSpec scene_from_json(const std::string& text);
std::string scene_to_json(const SceneSpec& spec);

struct Sequence {
  SceneSpec spec;
  std::vector<Frame> frames;
  std::vector<std::vector<BoundingBox>> boxes;
  std::vector<std::vector<std::uint8_t>> labels;  // object id per pixel
  std::vector<std::vector<BinaryMask>> masks;     // annotated objects only
  std::vector<AffineTransform> camera;            // frame 0 -> frame t
  std::vector<MotionMap> planted_motion;          // 1 on moving annotated objects

  /// Union of annotated object masks at frame t.
  BinaryMask foreground(int t) const;
  /// camera[t] composed after camera[t-1]^-1.
  AffineTransform step_transform(int t) const;
};

Sequence generate(const SceneSpec& spec);

/// frames/, masks/, motion_gt/, manifest.json, planted.json
void write_sequence(const Sequence& seq, const std::filesystem::path& dir);

}  // namespace motionseg::synth
