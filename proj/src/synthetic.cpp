#include "motionseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "motionseg/errors.hpp"
#include "motionseg/io.hpp"

namespace motionseg::synth {

using nlohmann::json;

namespace {

std::uint64_t hash64(std::uint64_t x) noexcept {
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDULL;
  x ^= x >> 33;
  x *= 0xC4CEB9FE1A85EC53ULL;
  x ^= x >> 33;
  return x;
}

double lattice(std::int64_t ix, std::int64_t iy, std::uint64_t key) noexcept {
  const std::uint64_t h = hash64(key ^ hash64(static_cast<std::uint64_t>(ix) * 0x9E3779B97F4A7C15ULL ^
                                               hash64(static_cast<std::uint64_t>(iy))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) noexcept { return t * t * (3.0 - 2.0 * t); }

// Smooth value noise in [0,1].
double value_noise(double x, double y, double cell, std::uint64_t key) noexcept {
  const double fx = x / cell;
  const double fy = y / cell;
  const double x0 = std::floor(fx);
  const double y0 = std::floor(fy);
  const auto ix = static_cast<std::int64_t>(x0);
  const auto iy = static_cast<std::int64_t>(y0);
  const double ax = smooth(fx - x0);
  const double ay = smooth(fy - y0);
  const double v00 = lattice(ix, iy, key);
  const double v10 = lattice(ix + 1, iy, key);
  const double v01 = lattice(ix, iy + 1, key);
  const double v11 = lattice(ix + 1, iy + 1, key);
  return (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11);
}

double texture(double x, double y, double cell, std::uint64_t key) noexcept {
  return 0.65 * value_noise(x, y, cell, key) + 0.35 * value_noise(x, y, 0.5 * cell, key ^ 0xA5A5ULL);
}

Rgb textured_color(double x, double y, double cell, double contrast, std::uint64_t key,
                   bool monochrome) noexcept {
  auto ch = [&](std::uint64_t salt) {
    const double n = texture(x, y, cell, hash64(key + salt));
    return std::clamp(0.5 + contrast * 1.6 * (n - 0.5), 0.0, 1.0);
  };
  if (monochrome) {
    const double v = ch(1);
    return {v, v, v};
  }
  return {ch(1), ch(2), ch(3)};
}

Rgb parse_rgb(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kInvalidInput, std::string("scene: ") + what + " must be [r,g,b]");
  }
  Rgb c{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  return c;
}

std::pair<double, double> parse_pair(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::kInvalidInput, std::string("scene: ") + what + " must be [x,y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* ctx) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
      throw Error(ErrorCode::kInvalidInput,
                  std::string("scene: unknown key \"") + it.key() + "\" in " + ctx);
    }
  }
}

bool valid_rgb(const Rgb& c) {
  return c.r >= 0 && c.r <= 1 && c.g >= 0 && c.g <= 1 && c.b >= 0 && c.b <= 1;
}

}  // namespace

void SceneSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidInput, "scene: " + m); };
  if (width < 8 || height < 8) fail("width and height must be at least 8");
  if (frames < 1) fail("frames must be >= 1");
  if (!(texture_scale > 0.0)) fail("texture_scale must be > 0");
  if (!(texture_contrast >= 0.0 && texture_contrast <= 1.0)) fail("texture_contrast must lie in [0,1]");
  if (!std::isfinite(pan_x) || !std::isfinite(pan_y) || !std::isfinite(rotation_deg)) {
    fail("camera motion must be finite");
  }
  if (background && !valid_rgb(*background)) fail("background channels must lie in [0,1]");
  std::set<int> ids;
  for (const auto& o : objects) {
    if (o.object_id < 1 || o.object_id > 255) fail("object_id must lie in [1,255]");
    if (o.annotated && !ids.insert(o.object_id).second) fail("duplicate object_id");
    if (o.width < 1 || o.height < 1) fail("object size must be positive");
    if (o.box_margin < 0) fail("box_margin must be >= 0");
    if (o.color && !valid_rgb(*o.color)) fail("object color channels must lie in [0,1]");
  }
}

SceneSpec scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("scene: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidInput, "scene: expected an object");
  reject_unknown(j, {"width", "height", "frames", "seed", "pan", "rotation_deg", "texture_scale",
                     "texture_contrast", "monochrome", "background", "objects"},
                 "scene");
  SceneSpec s;
  try {
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.frames = j.value("frames", s.frames);
    s.seed = j.value("seed", s.seed);
    if (j.contains("pan")) std::tie(s.pan_x, s.pan_y) = parse_pair(j["pan"], "pan");
    s.rotation_deg = j.value("rotation_deg", s.rotation_deg);
    s.texture_scale = j.value("texture_scale", s.texture_scale);
    s.texture_contrast = j.value("texture_contrast", s.texture_contrast);
    s.monochrome = j.value("monochrome", s.monochrome);
    if (j.contains("background")) s.background = parse_rgb(j["background"], "background");
    if (j.contains("objects")) {
      if (!j["objects"].is_array()) throw Error(ErrorCode::kInvalidInput, "scene: objects must be an array");
      for (const json& oj : j["objects"]) {
        if (!oj.is_object()) throw Error(ErrorCode::kInvalidInput, "scene: object must be an object");
        reject_unknown(oj, {"id", "size", "start", "velocity", "color", "box_margin", "annotated"},
                       "object");
        ObjectSpec o;
        o.object_id = oj.value("id", o.object_id);
        if (oj.contains("size")) {
          const auto [w, h] = parse_pair(oj["size"], "size");
          o.width = static_cast<int>(w);
          o.height = static_cast<int>(h);
        }
        if (oj.contains("start")) std::tie(o.start_x, o.start_y) = parse_pair(oj["start"], "start");
        if (oj.contains("velocity")) {
          std::tie(o.velocity_x, o.velocity_y) = parse_pair(oj["velocity"], "velocity");
        }
        if (oj.contains("color")) o.color = parse_rgb(oj["color"], "color");
        o.box_margin = oj.value("box_margin", o.box_margin);
        o.annotated = oj.value("annotated", o.annotated);
        s.objects.push_back(o);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("scene: ") + e.what());
  }
  s.validate();
  return s;
}

std::string scene_to_json(const SceneSpec& s) {
  json j;
  j["width"] = s.width;
  j["height"] = s.height;
  j["frames"] = s.frames;
  j["seed"] = s.seed;
  j["pan"] = {s.pan_x, s.pan_y};
  j["rotation_deg"] = s.rotation_deg;
  j["texture_scale"] = s.texture_scale;
  j["texture_contrast"] = s.texture_contrast;
  j["monochrome"] = s.monochrome;
  if (s.background) j["background"] = {s.background->r, s.background->g, s.background->b};
  j["objects"] = json::array();
  for (const auto& o : s.objects) {
    json oj{{"id", o.object_id},
            {"size", {o.width, o.height}},
            {"start", {o.start_x, o.start_y}},
            {"velocity", {o.velocity_x, o.velocity_y}},
            {"box_margin", o.box_margin},
            {"annotated", o.annotated}};
    if (o.color) oj["color"] = {o.color->r, o.color->g, o.color->b};
    j["objects"].push_back(oj);
  }
  return j.dump(2);
}

BinaryMask Sequence::foreground(int t) const {
  BinaryMask out(spec.width, spec.height);
  for (const auto& m : masks[static_cast<std::size_t>(t)]) {
    for (std::size_t i = 0; i < m.fg.size(); ++i) out.fg[i] |= m.fg[i];
  }
  return out;
}

AffineTransform Sequence::step_transform(int t) const {
  return camera[static_cast<std::size_t>(t - 1)].inverse().then(camera[static_cast<std::size_t>(t)]);
}

Sequence generate(const SceneSpec& spec) {
  spec.validate();
  Sequence seq;
  seq.spec = spec;
  const int w = spec.width;
  const int h = spec.height;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::uint64_t bg_key = hash64(spec.seed * 2 + 1);

  const AffineTransform step =
      AffineTransform::rotation_about(0.5 * (w - 1), 0.5 * (h - 1), spec.rotation_deg)
          .then(AffineTransform::translation(spec.pan_x, spec.pan_y));
  AffineTransform cam = AffineTransform::identity();

  for (int t = 0; t < spec.frames; ++t) {
    if (t > 0) cam = cam.then(step);
    seq.camera.push_back(cam);
    const AffineTransform to_world = cam.inverse();

    std::vector<Rgb> color(n);
    std::vector<std::uint8_t> labels(n, 0);
    std::vector<double> moving(n, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double wx = to_world.apply_x(x, y);
        const double wy = to_world.apply_y(x, y);
        color[static_cast<std::size_t>(y) * w + x] =
            spec.background ? *spec.background
                            : textured_color(wx, wy, spec.texture_scale, spec.texture_contrast, bg_key,
                                             spec.monochrome);
      }
    }

    std::vector<BinaryMask> masks;
    std::vector<BoundingBox> boxes;
    for (std::size_t oi = 0; oi < spec.objects.size(); ++oi) {
      const ObjectSpec& o = spec.objects[oi];
      const long ox = std::lround(o.start_x + o.velocity_x * t);
      const long oy = std::lround(o.start_y + o.velocity_y * t);
      const bool is_moving = o.velocity_x != 0.0 || o.velocity_y != 0.0;
      const std::uint64_t key = hash64(spec.seed * 7919 + 31 * (oi + 1));
      BinaryMask mask(w, h, o.object_id);
      for (long y = std::max(oy, 0L); y < std::min(oy + o.height, static_cast<long>(h)); ++y) {
        for (long x = std::max(ox, 0L); x < std::min(ox + o.width, static_cast<long>(w)); ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
          color[i] = o.color ? *o.color
                             : textured_color(static_cast<double>(x - ox), static_cast<double>(y - oy),
                                              0.5 * spec.texture_scale, 1.0, key, spec.monochrome);
          // later objects occlude earlier ones
          for (auto& m : masks) m.fg[i] = 0;
          labels[i] = 0;
          moving[i] = 0.0;
          if (o.annotated) {
            mask.fg[i] = 1;
            labels[i] = static_cast<std::uint8_t>(o.object_id);
            moving[i] = is_moving ? 1.0 : 0.0;
          }
        }
      }
      if (!o.annotated) continue;
      masks.push_back(std::move(mask));
      BoundingBox box{static_cast<int>(ox) - o.box_margin, static_cast<int>(oy) - o.box_margin,
                      o.width + 2 * o.box_margin, o.height + 2 * o.box_margin, o.object_id};
      if (box.intersects(w, h)) boxes.push_back(box.clipped(w, h));
    }

    seq.frames.emplace_back(t, w, h, std::move(color));
    seq.labels.push_back(std::move(labels));
    seq.masks.push_back(std::move(masks));
    seq.boxes.push_back(std::move(boxes));
    seq.planted_motion.push_back(MotionMap{t, GrayImage(w, h, std::move(moving))});
  }
  return seq;
}

void write_sequence(const Sequence& seq, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "masks");
  fs::create_directories(dir / "motion_gt");
  io::SequenceManifest manifest;
  manifest.sequence = "synthetic";
  json planted;
  planted["scene"] = json::parse(scene_to_json(seq.spec));
  planted["camera"] = json::array();
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "%05zu", t);
    const std::string stem = name;
    io::write_frame(dir / "frames" / (stem + ".png"), seq.frames[t]);
    io::write_label_png(dir / "masks" / (stem + ".png"), seq.spec.width, seq.spec.height,
                        seq.labels[t]);
    const auto& pm = seq.planted_motion[t].values;
    io::write_bmf(dir / "motion_gt" / (stem + ".bmf"), pm.width(), pm.height(), pm.values());
    manifest.frames.push_back({static_cast<int>(t), stem + ".png", seq.boxes[t]});
    const AffineTransform& c = seq.camera[t];
    planted["camera"].push_back({c.a, c.b, c.tx, c.c, c.d, c.ty});
  }
  io::write_manifest(dir / "manifest.json", manifest);
  io::write_text(dir / "planted.json", planted.dump(2) + "\n");
}

}  // namespace motionseg::synth
