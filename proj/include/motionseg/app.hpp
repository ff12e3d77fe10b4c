#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "motionseg/affinity.hpp"
#include "motionseg/compensation.hpp"
#include "motionseg/loss.hpp"

namespace motionseg::app {

namespace fs = std::filesystem;

struct PipelineConfig {
  CompensationConfig compensation;
  AffinityConfig affinity;
  LossWeights weights;
  int boundary_tol = -1;  // -1: ceil(0.008 * diagonal)
  double fg_threshold = 0.5;
  int steps = 500;
  double lr = 0.1;
  bool write_png = true;
  bool write_raw = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Keys mirror the CLI flag names without the leading dashes.
nlohmann::json config_to_json(const PipelineConfig& cfg);
/// Applies the keys present in `j` on top of `base`. Unknown keys and wrong
/// types are kInvalidInput.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});

struct CommandInputs {
  fs::path frames_dir;
  fs::path manifest;
  fs::path out_dir;
  std::optional<fs::path> motion_dir;      // precomputed BMF maps
  std::optional<fs::path> confidence_dir;  // BMF or PNG confidence maps
  std::optional<fs::path> gt_dir;          // label PNGs named like the frames
  std::optional<fs::path> pred_dir;
  std::optional<fs::path> scene;           // synth scene JSON
};

/// Each command writes <out>/<name>_report.json and returns its contents.
nlohmann::json run_motion(const PipelineConfig& cfg, const CommandInputs& in);
nlohmann::json run_pseudomask(const PipelineConfig& cfg, const CommandInputs& in);
nlohmann::json run_loss(const PipelineConfig& cfg, const CommandInputs& in);
nlohmann::json run_optimize(const PipelineConfig& cfg, const CommandInputs& in);
nlohmann::json run_eval(const PipelineConfig& cfg, const CommandInputs& in);
nlohmann::json run_synth(const PipelineConfig& cfg, const CommandInputs& in,
                         std::optional<std::uint64_t> seed_override);

/// Seed handed to the RANSAC sampler for one frame.
std::uint64_t frame_seed(std::uint64_t seed, int index);

/// Five-digit zero-padded frame index, the stem of every per-frame output.
std::string frame_stem(int index);

}  // namespace motionseg::app
