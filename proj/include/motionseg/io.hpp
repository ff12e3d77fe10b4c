#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "motionseg/compensation.hpp"
#include "motionseg/imaging.hpp"
#include "motionseg/metrics.hpp"

namespace motionseg::io {

namespace fs = std::filesystem;

struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> data;
};

/// Decodes 8/16-bit gray, gray+alpha, RGB, RGBA and palette PNGs into 8-bit
/// gray or RGB. Throws kMissingFile / kDecode.
Image8 read_png(const fs::path& path);
void write_png(const fs::path& path, const Image8& image);

Frame frame_from_image(const Image8& image, int index);
Frame read_frame(const fs::path& path, int index);
void write_frame(const fs::path& path, const Frame& frame);

/// round(255 * v)
std::uint8_t to_byte(double v) noexcept;
void write_gray_png(const fs::path& path, const GrayImage& image);

/// Mask PNG: pixel value = object id, 0 = background.
void write_label_png(const fs::path& path, int width, int height,
                     std::span<const std::uint8_t> labels);
std::vector<BinaryMask> read_label_png(const fs::path& path);

// Raw float map: "BMF1", u32 LE width, u32 LE height, width*height f32 LE.
struct FloatMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;
};

void write_bmf(const fs::path& path, int width, int height, std::span<const double> values);
FloatMap read_bmf(const fs::path& path);
std::vector<std::uint8_t> encode_bmf(int width, int height, std::span<const double> values);
FloatMap decode_bmf(std::span<const std::uint8_t> bytes);

struct FrameRecord {
  int index = 0;
  std::string file;
  std::vector<BoundingBox> boxes;
};

struct SequenceManifest {
  std::string sequence;
  std::vector<FrameRecord> frames;
};

SequenceManifest parse_manifest(const std::string& text, const std::string& origin = "<string>");
SequenceManifest read_manifest(const fs::path& path);
std::string manifest_to_string(const SequenceManifest& manifest);
void write_manifest(const fs::path& path, const SequenceManifest& manifest);

struct LoadedSequence {
  std::string name;
  std::vector<Frame> frames;
  std::vector<std::vector<BoundingBox>> boxes;
  std::vector<std::string> file_names;
  std::vector<std::string> warnings;
};

/// Boxes are clipped to the frame with a warning; a box disjoint from the
/// frame is kInvalidAnnotation.
LoadedSequence load_sequence(const fs::path& manifest_path, const fs::path& frames_dir);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace motionseg::io
