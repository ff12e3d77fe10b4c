// Command-line front-end: motion | pseudomask | loss | optimize | eval | synth.
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "motionseg/app.hpp"
#include "motionseg/errors.hpp"
#include "motionseg/io.hpp"
#include "motionseg/parallel.hpp"

namespace ms = motionseg;
using nlohmann::json;

namespace {

struct Args {
  std::string config;
  std::string frames;
  std::string manifest;
  std::string out;
  std::string motion, confidence, gt, pred, scene;
  int threads = 0;
  std::map<std::string, std::string> overrides;
};

// Every config key becomes a --key flag. Values are read as JSON literals so
// the config loader performs the same type checks for flags and files.
void add_overrides(CLI::App* sub, Args& args) {
  static const json defaults = ms::app::config_to_json(ms::app::PipelineConfig{});
  for (const auto& [key, value] : defaults.items()) {
    const std::string type = value.is_boolean() ? "BOOL" : value.is_number_integer() || value.is_number_unsigned() ? "INT" : "FLOAT";
    sub->add_option_function<std::string>(
           "--" + key, [&args, key = key](const std::string& v) { args.overrides[key] = v; },
           "override config key '" + key + "' (default " + value.dump() + ")")
        ->type_name(type)
        ->group("Parameters");
  }
}

ms::app::PipelineConfig resolve_config(const Args& args) {
  ms::app::PipelineConfig cfg;
  if (!args.config.empty()) {
    json j;
    try {
      j = json::parse(ms::io::read_text(args.config));
    } catch (const json::parse_error& e) {
      throw ms::Error(ms::ErrorCode::kInvalidInput, args.config + ": " + e.what());
    }
    cfg = ms::app::config_from_json(j, cfg);
  }
  json flags = json::object();
  for (const auto& [key, text] : args.overrides) {
    try {
      flags[key] = json::parse(text);
    } catch (const json::parse_error&) {
      throw ms::Error(ms::ErrorCode::kInvalidInput, "--" + key + ": cannot parse '" + text + "'");
    }
  }
  cfg = ms::app::config_from_json(flags, cfg);
  cfg.validate();
  return cfg;
}

ms::app::CommandInputs inputs(const Args& args) {
  ms::app::CommandInputs in;
  in.frames_dir = args.frames;
  in.manifest = args.manifest;
  in.out_dir = args.out;
  auto opt = [](const std::string& s) -> std::optional<std::filesystem::path> {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
  };
  in.motion_dir = opt(args.motion);
  in.confidence_dir = opt(args.confidence);
  in.gt_dir = opt(args.gt);
  in.pred_dir = opt(args.pred);
  in.scene = opt(args.scene);
  if (in.manifest.empty() && !in.frames_dir.empty()) {
    // Accept both <frames>/manifest.json and the synth layout <seq>/manifest.json.
    in.manifest = in.frames_dir / "manifest.json";
    const auto parent = (in.frames_dir / ".." / "manifest.json").lexically_normal();
    if (!std::filesystem::exists(in.manifest) && std::filesystem::exists(parent)) in.manifest = parent;
  }
  return in;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-supervised mask toolkit"};
  app.require_subcommand(1);
  Args args;

  struct Command {
    const char* name;
    const char* help;
    bool sequence;
  };
  const Command commands[] = {
      {"motion", "compute compensated motion maps", true},
      {"pseudomask", "render pairwise-affinity pseudo masks", true},
      {"loss", "evaluate losses of given confidence maps", true},
      {"optimize", "fit per-frame confidence maps by gradient descent", true},
      {"eval", "score predicted masks against ground truth", false},
      {"synth", "generate a synthetic sequence", false},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", args.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory")->required();
    sub->add_option("--threads", args.threads, "worker threads (0 = runtime default)");
    add_overrides(sub, args);
    if (c.sequence || std::string(c.name) == "eval") {
      sub->add_option("--frames", args.frames, "frame image directory");
      sub->add_option("--manifest", args.manifest, "sequence manifest (default <frames>/manifest.json, then <frames>/../manifest.json)");
    }
    const std::string name = c.name;
    if (name == "pseudomask" || name == "loss" || name == "optimize" || name == "eval") {
      sub->add_option("--motion", args.motion, "directory of precomputed .bmf motion maps");
    }
    if (name == "loss") sub->add_option("--confidence", args.confidence, "confidence maps (.bmf or .png)")->required();
    if (name == "optimize" || name == "eval") sub->add_option("--gt", args.gt, "ground-truth label masks");
    if (name == "eval") sub->add_option("--pred", args.pred, "predicted label masks");
    if (name == "synth") sub->add_option("--scene", args.scene, "scene JSON");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (args.threads > 0) ms::set_thread_count(args.threads);
    const ms::app::PipelineConfig cfg = resolve_config(args);
    const ms::app::CommandInputs in = inputs(args);
    if (cmd != "synth" && cmd != "eval" && in.frames_dir.empty()) {
      throw ms::Error(ms::ErrorCode::kInvalidInput, "--frames is required");
    }
    if (cmd == "eval" && in.manifest.empty()) {
      throw ms::Error(ms::ErrorCode::kInvalidInput, "eval requires --manifest or --frames");
    }
    json report;
    if (cmd == "motion") report = ms::app::run_motion(cfg, in);
    else if (cmd == "pseudomask") report = ms::app::run_pseudomask(cfg, in);
    else if (cmd == "loss") report = ms::app::run_loss(cfg, in);
    else if (cmd == "optimize") report = ms::app::run_optimize(cfg, in);
    else if (cmd == "eval") report = ms::app::run_eval(cfg, in);
    else {
      std::optional<std::uint64_t> seed;
      if (args.overrides.count("seed")) seed = cfg.seed;
      report = ms::app::run_synth(cfg, in, seed);
    }
    json summary{{"command", cmd}, {"status", "ok"}, {"out", args.out}, {"warnings", report["warnings"]}};
    for (const char* k : {"jf_mean", "j_mean", "f_mean", "jaccard_mean", "total_sum", "foreground"}) {
      if (report.contains(k)) summary[k] = report[k];
    }
    std::cout << summary.dump() << "\n";
    return 0;
  } catch (const ms::Error& e) {
    json err{{"command", cmd},
             {"status", "error"},
             {"error", {{"code", ms::to_string(e.code())}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    if (!args.out.empty()) {
      try {
        ms::io::write_text(std::filesystem::path(args.out) / (cmd + "_report.json"), err.dump(2) + "\n");
      } catch (...) {
      }
    }
    return 2;
  } catch (const std::exception& e) {
    json err{{"command", cmd}, {"status", "error"}, {"error", {{"code", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 3;
  }
}
