#include "motionseg/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "motionseg/errors.hpp"

namespace motionseg::io {

using nlohmann::json;

namespace {

void require_exists(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw Error(ErrorCode::kMissingFile, "missing file: " + path.string());
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

Image8 read_png(const fs::path& path) {
  require_exists(path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::kDecode, "cannot decode PNG " + path.string() + ": " + msg);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = color ? 3 : 1;
  out.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::kDecode, "cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

void write_png(const fs::path& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw Error(ErrorCode::kInvalidParameter, "write_png: channels must be 1 or 3");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::kIo, "cannot write PNG " + path.string() + ": " + msg);
  }
}

std::uint8_t to_byte(double v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Frame frame_from_image(const Image8& image, int index) {
  std::vector<Rgb> color(static_cast<std::size_t>(image.width) *
                         static_cast<std::size_t>(image.height));
  for (std::size_t i = 0; i < color.size(); ++i) {
    if (image.channels == 3) {
      color[i] = {image.data[3 * i] / 255.0, image.data[3 * i + 1] / 255.0,
                  image.data[3 * i + 2] / 255.0};
    } else {
      const double v = image.data[i] / 255.0;
      color[i] = {v, v, v};
    }
  }
  return Frame(index, image.width, image.height, std::move(color));
}

Frame read_frame(const fs::path& path, int index) { return frame_from_image(read_png(path), index); }

void write_frame(const fs::path& path, const Frame& frame) {
  Image8 img;
  img.width = frame.width();
  img.height = frame.height();
  img.channels = 3;
  img.data.reserve(frame.color().size() * 3);
  for (const Rgb& c : frame.color()) {
    img.data.push_back(to_byte(c.r));
    img.data.push_back(to_byte(c.g));
    img.data.push_back(to_byte(c.b));
  }
  write_png(path, img);
}

void write_gray_png(const fs::path& path, const GrayImage& image) {
  Image8 img;
  img.width = image.width();
  img.height = image.height();
  img.channels = 1;
  img.data.reserve(image.size());
  for (double v : image.values()) img.data.push_back(to_byte(v));
  write_png(path, img);
}

void write_label_png(const fs::path& path, int width, int height,
                     std::span<const std::uint8_t> labels) {
  Image8 img;
  img.width = width;
  img.height = height;
  img.channels = 1;
  img.data.assign(labels.begin(), labels.end());
  write_png(path, img);
}

std::vector<BinaryMask> read_label_png(const fs::path& path) {
  const Image8 img = read_png(path);
  std::map<int, BinaryMask> masks;
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  for (std::size_t i = 0; i < n; ++i) {
    // color masks: any nonzero channel marks foreground, red carries the id
    const int id = img.data[i * static_cast<std::size_t>(img.channels)];
    bool fg = id != 0;
    if (img.channels == 3) fg = fg || img.data[3 * i + 1] != 0 || img.data[3 * i + 2] != 0;
    if (!fg) continue;
    const int key = id == 0 ? 1 : id;
    auto it = masks.find(key);
    if (it == masks.end()) it = masks.emplace(key, BinaryMask(img.width, img.height, key)).first;
    it->second.fg[i] = 1;
  }
  std::vector<BinaryMask> out;
  for (auto& [id, m] : masks) out.push_back(std::move(m));
  return out;
}

std::vector<std::uint8_t> encode_bmf(int width, int height, std::span<const double> values) {
  if (width <= 0 || height <= 0 ||
      values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kShape, "encode_bmf: value count does not match dimensions");
  }
  std::vector<std::uint8_t> out{'B', 'M', 'F', '1'};
  out.reserve(12 + 4 * values.size());
  put_u32(out, static_cast<std::uint32_t>(width));
  put_u32(out, static_cast<std::uint32_t>(height));
  for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

FloatMap decode_bmf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "BMF1", 4) != 0) {
    throw Error(ErrorCode::kDecode, "not a BMF1 float map");
  }
  FloatMap m;
  const std::uint32_t w = get_u32(bytes, 4);
  const std::uint32_t h = get_u32(bytes, 8);
  const std::uint64_t n = static_cast<std::uint64_t>(w) * h;
  if (w == 0 || h == 0 || bytes.size() != 12 + 4 * n) {
    throw Error(ErrorCode::kDecode, "BMF1 payload size does not match its header");
  }
  m.width = static_cast<int>(w);
  m.height = static_cast<int>(h);
  m.values.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    m.values[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
  }
  return m;
}

void write_bmf(const fs::path& path, int width, int height, std::span<const double> values) {
  const auto bytes = encode_bmf(width, height, values);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

FloatMap read_bmf(const fs::path& path) {
  require_exists(path);
  std::ifstream f(path, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_bmf(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  require_exists(path);
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace {

int line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

[[noreturn]] void malformed(const std::string& origin, const std::string& where,
                            const std::string& what) {
  throw Error(ErrorCode::kMalformedManifest, origin + ": " + where + ": " + what);
}

int get_int(const json& obj, const char* key, const std::string& origin, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number_integer()) {
    malformed(origin, where, std::string("\"") + key + "\" must be an integer");
  }
  return obj[key].get<int>();
}

}  // namespace

SequenceManifest parse_manifest(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedManifest,
                origin + ":" + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                    ": " + e.what());
  }
  if (!doc.is_object()) malformed(origin, "root", "expected an object");
  SequenceManifest m;
  if (!doc.contains("sequence") || !doc["sequence"].is_string()) {
    malformed(origin, "root", "\"sequence\" must be a string");
  }
  m.sequence = doc["sequence"].get<std::string>();
  if (!doc.contains("frames") || !doc["frames"].is_array()) {
    malformed(origin, "root", "\"frames\" must be an array");
  }
  const json& frames = doc["frames"];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string where = "frames[" + std::to_string(i) + "]";
    const json& f = frames[i];
    if (!f.is_object()) malformed(origin, where, "expected an object");
    FrameRecord rec;
    rec.index = get_int(f, "index", origin, where);
    if (rec.index < 0) malformed(origin, where, "negative index");
    if (!f.contains("file") || !f["file"].is_string()) {
      malformed(origin, where, "\"file\" must be a string");
    }
    rec.file = f["file"].get<std::string>();
    if (f.contains("boxes")) {
      if (!f["boxes"].is_array()) malformed(origin, where, "\"boxes\" must be an array");
      for (std::size_t k = 0; k < f["boxes"].size(); ++k) {
        const std::string bw = where + ".boxes[" + std::to_string(k) + "]";
        const json& b = f["boxes"][k];
        if (!b.is_object()) malformed(origin, bw, "expected an object");
        BoundingBox box;
        box.x = get_int(b, "x", origin, bw);
        box.y = get_int(b, "y", origin, bw);
        box.w = get_int(b, "w", origin, bw);
        box.h = get_int(b, "h", origin, bw);
        box.object_id = b.contains("object_id") ? get_int(b, "object_id", origin, bw) : 1;
        if (box.w < 1 || box.h < 1 || box.object_id < 1) {
          throw Error(ErrorCode::kInvalidAnnotation,
                      origin + ": " + bw + ": w, h and object_id must be positive");
        }
        rec.boxes.push_back(box);
      }
    }
    if (!m.frames.empty() && rec.index <= m.frames.back().index) {
      throw Error(ErrorCode::kNonMonotoneIndices,
                  origin + ": " + where + ": index " + std::to_string(rec.index) +
                      " does not follow " + std::to_string(m.frames.back().index));
    }
    m.frames.push_back(std::move(rec));
  }
  return m;
}

SequenceManifest read_manifest(const fs::path& path) {
  return parse_manifest(read_text(path), path.string());
}

std::string manifest_to_string(const SequenceManifest& manifest) {
  json doc;
  doc["sequence"] = manifest.sequence;
  doc["frames"] = json::array();
  for (const auto& f : manifest.frames) {
    json boxes = json::array();
    for (const auto& b : f.boxes) {
      boxes.push_back({{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"object_id", b.object_id}});
    }
    doc["frames"].push_back({{"index", f.index}, {"file", f.file}, {"boxes", boxes}});
  }
  return doc.dump(2) + "\n";
}

void write_manifest(const fs::path& path, const SequenceManifest& manifest) {
  write_text(path, manifest_to_string(manifest));
}

LoadedSequence load_sequence(const fs::path& manifest_path, const fs::path& frames_dir) {
  const SequenceManifest m = read_manifest(manifest_path);
  LoadedSequence seq;
  seq.name = m.sequence;
  for (const auto& rec : m.frames) {
    const fs::path p = frames_dir / rec.file;
    Frame frame = read_frame(p, rec.index);
    if (!seq.frames.empty() && (frame.width() != seq.frames.front().width() ||
                                frame.height() != seq.frames.front().height())) {
      throw Error(ErrorCode::kShape, p.string() + ": frame size differs from the first frame");
    }
    std::vector<BoundingBox> boxes;
    for (const auto& b : rec.boxes) {
      BoundingBox c;
      try {
        c = b.clipped(frame.width(), frame.height());
      } catch (const Error& e) {
        throw Error(e.code(), manifest_path.string() + ": frame " + std::to_string(rec.index) +
                                  ": " + e.what());
      }
      if (c != b) {
        seq.warnings.push_back("frame " + std::to_string(rec.index) + ": box of object " +
                               std::to_string(b.object_id) + " clipped to the frame");
      }
      boxes.push_back(c);
    }
    seq.frames.push_back(std::move(frame));
    seq.boxes.push_back(std::move(boxes));
    seq.file_names.push_back(rec.file);
  }
  return seq;
}

}  // namespace motionseg::io
