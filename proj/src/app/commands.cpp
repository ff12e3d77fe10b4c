#include <algorithm>
#include <cstdio>
#include <exception>
#include <map>
#include <set>

#include "motionseg/app.hpp"
#include "motionseg/errors.hpp"
#include "motionseg/io.hpp"
#include "motionseg/metrics.hpp"
#include "motionseg/synthetic.hpp"

namespace motionseg::app {

using nlohmann::json;

std::uint64_t frame_seed(std::uint64_t seed, int index) {
  std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(index + 1));
  z = (z ^ (z >> 31)) * 0xBF58476D1CE4E5B9ULL;
  return z ^ (z >> 29);
}

std::string frame_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return buf;
}

namespace {

json affine_json(const AffineTransform& t) { return json::array({t.a, t.b, t.tx, t.c, t.d, t.ty}); }

json base_report(const char* command, const PipelineConfig& cfg, const io::LoadedSequence* seq) {
  json r;
  r["command"] = command;
  r["status"] = "ok";
  r["config"] = config_to_json(cfg);
  if (seq) {
    r["sequence"] = seq->name;
    r["warnings"] = seq->warnings;
  } else {
    r["warnings"] = json::array();
  }
  return r;
}

json finish(json report, const fs::path& out_dir, const char* command) {
  io::write_text(out_dir / (std::string(command) + "_report.json"), report.dump(2) + "\n");
  return report;
}


// Runs `body(i)` for every frame in parallel, rethrowing the first failure in
// frame order with the frame index attached.
template <typename Body>
void for_each_frame(const std::vector<Frame>& frames, Body body) {
  const std::size_t n = frames.size();
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      body(k);
    } catch (const Error& e) {
      errors[k] = std::make_exception_ptr(
          Error(e.code(), "frame " + std::to_string(frames[k].index()) + ": " + e.what()));
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct FrameMotion {
  MotionMap motion;
  json info;
};

std::vector<FrameMotion> compute_motion(const PipelineConfig& cfg, const io::LoadedSequence& seq,
                                        json& warnings) {
  const std::size_t n = seq.frames.size();
  const bool tm = cfg.compensation.use_temporal_matching;
  if (n < 2) {
    throw Error(ErrorCode::kInvalidInput, "motion needs at least 2 frames, got " + std::to_string(n));
  }
  if (tm && n < 3) {
    warnings.push_back("temporal matching needs 3 frames; using two-frame differences only");
  }

  std::vector<FrameMotion> out(n);
  for_each_frame(seq.frames, [&](std::size_t t) {
    const Frame& cur = seq.frames[t];
    const bool has_prev = t > 0;
    const bool has_next = t + 1 < n;
    const Frame& first_neighbor = has_prev ? seq.frames[t - 1] : seq.frames[t + 1];
    const Frame* next = (has_prev && has_next && tm) ? &seq.frames[t + 1] : nullptr;
    const PipelineMotion pm = motion_pipeline_detailed(
        first_neighbor, cur, next, seq.boxes[t], cfg.compensation, frame_seed(cfg.seed, cur.index()));

    json info;
    info["index"] = cur.index();
    info["boundary_fallback"] = !has_prev || (tm && !has_next);
    info["temporally_matched"] = next != nullptr;
    auto describe = [](const TwoFrameMotion& m, int neighbor) {
      return json{{"neighbor", neighbor},
                  {"transform", affine_json(m.transform)},
                  {"fell_back", m.fell_back},
                  {"correspondences", m.correspondences},
                  {"inliers", m.inliers},
                  {"warning", m.warning}};
    };
    info["compensation"] = json::array();
    info["compensation"].push_back(describe(pm.from_prev, first_neighbor.index()));
    if (pm.from_next) info["compensation"].push_back(describe(*pm.from_next, next->index()));
    double sum = 0.0;
    for (double v : pm.motion.values.values()) sum += v;
    info["mean_motion"] = sum / static_cast<double>(pm.motion.values.size());
    out[t] = FrameMotion{pm.motion, std::move(info)};
  });
  for (const auto& fm : out) {
    for (const auto& c : fm.info["compensation"]) {
      if (c["fell_back"].get<bool>()) {
        warnings.push_back("frame " + std::to_string(fm.info["index"].get<int>()) + ": " +
                           c["warning"].get<std::string>());
      }
    }
  }
  return out;
}

MotionMap load_motion(const fs::path& dir, const Frame& frame) {
  const fs::path p = dir / (frame_stem(frame.index()) + ".bmf");
  const io::FloatMap fm = io::read_bmf(p);
  if (fm.width != frame.width() || fm.height != frame.height()) {
    throw Error(ErrorCode::kShape, p.string() + ": map size differs from the frame");
  }
  std::vector<double> v(fm.values.begin(), fm.values.end());
  for (double x : v) {
    if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::kDecode, p.string() + ": value outside [0,1]");
  }
  return MotionMap{frame.index(), GrayImage(fm.width, fm.height, std::move(v))};
}

std::vector<MotionMap> obtain_motion(const PipelineConfig& cfg, const CommandInputs& in,
                                     const io::LoadedSequence& seq, json& report) {
  std::vector<MotionMap> maps;
  if (in.motion_dir) {
    report["motion_source"] = in.motion_dir->string();
    for (const auto& f : seq.frames) maps.push_back(load_motion(*in.motion_dir, f));
  } else {
    report["motion_source"] = "computed";
    for (auto& fm : compute_motion(cfg, seq, report["warnings"])) maps.push_back(std::move(fm.motion));
  }
  return maps;
}

ConfidenceMap load_confidence(const fs::path& dir, const Frame& frame) {
  const std::string stem = frame_stem(frame.index());
  std::vector<double> rho;
  int w = 0, h = 0;
  if (fs::exists(dir / (stem + ".bmf"))) {
    const io::FloatMap fm = io::read_bmf(dir / (stem + ".bmf"));
    w = fm.width;
    h = fm.height;
    rho.assign(fm.values.begin(), fm.values.end());
  } else {
    const io::Image8 img = io::read_png(dir / (stem + ".png"));
    w = img.width;
    h = img.height;
    for (int i = 0; i < w * h; ++i) rho.push_back(img.data[static_cast<std::size_t>(i * img.channels)] / 255.0);
  }
  if (w != frame.width() || h != frame.height()) {
    throw Error(ErrorCode::kShape, "confidence map " + stem + " differs in size from the frame");
  }
  return ConfidenceMap(frame.index(), w, h, std::move(rho));
}

BinaryMask union_mask(const std::vector<BinaryMask>& masks, int w, int h) {
  BinaryMask u(w, h);
  for (const auto& m : masks) {
    for (std::size_t i = 0; i < m.fg.size(); ++i) u.fg[i] |= m.fg[i];
  }
  return u;
}

void write_map(const PipelineConfig& cfg, const fs::path& dir, int index, const GrayImage& img) {
  const std::string stem = frame_stem(index);
  if (cfg.write_png) io::write_gray_png(dir / (stem + ".png"), img);
  if (cfg.write_raw) io::write_bmf(dir / (stem + ".bmf"), img.width(), img.height(), img.values());
}

io::LoadedSequence load(const PipelineConfig& cfg, const CommandInputs& in) {
  cfg.validate();
  return io::load_sequence(in.manifest, in.frames_dir);
}

}  // namespace

json run_motion(const PipelineConfig& cfg, const CommandInputs& in) {
  const io::LoadedSequence seq = load(cfg, in);
  json report = base_report("motion", cfg, &seq);
  const auto maps = compute_motion(cfg, seq, report["warnings"]);
  report["frames"] = json::array();
  for (const auto& fm : maps) {
    write_map(cfg, in.out_dir / "motion", fm.motion.frame_index, fm.motion.values);
    json info = fm.info;
    info["file"] = frame_stem(fm.motion.frame_index);
    report["frames"].push_back(std::move(info));
  }
  return finish(std::move(report), in.out_dir, "motion");
}

json run_pseudomask(const PipelineConfig& cfg, const CommandInputs& in) {
  const io::LoadedSequence seq = load(cfg, in);
  json report = base_report("pseudomask", cfg, &seq);
  const auto motion = obtain_motion(cfg, in, seq, report);
  std::vector<PairAffinitySet> sets(seq.frames.size());
  for_each_frame(seq.frames, [&](std::size_t t) {
    sets[t] = build_pair_set(seq.frames[t], motion[t], seq.boxes[t], cfg.affinity);
  });
  report["frames"] = json::array();
  for (std::size_t t = 0; t < sets.size(); ++t) {
    const auto& s = sets[t];
    std::size_t motion_pos = 0, color_pos = 0;
    for (const auto& p : s.pairs) {
      motion_pos += p.motion_bit ? 1 : 0;
      color_pos += p.color_bit ? 1 : 0;
    }
    const Frame& f = seq.frames[t];
    write_map(cfg, in.out_dir / "pseudomask", f.index(), render_pseudo_mask(s, f.width(), f.height()));
    report["frames"].push_back({{"index", f.index()},
                                {"file", frame_stem(f.index())},
                                {"pairs", s.total()},
                                {"positive_pairs", s.positive_count},
                                {"motion_positive", motion_pos},
                                {"color_positive", color_pos}});
  }
  return finish(std::move(report), in.out_dir, "pseudomask");
}

json run_loss(const PipelineConfig& cfg, const CommandInputs& in) {
  if (!in.confidence_dir) {
    throw Error(ErrorCode::kInvalidInput, "loss requires --confidence <dir>");
  }
  const io::LoadedSequence seq = load(cfg, in);
  json report = base_report("loss", cfg, &seq);
  const auto motion = obtain_motion(cfg, in, seq, report);
  std::vector<LossReport> losses(seq.frames.size());
  for_each_frame(seq.frames, [&](std::size_t t) {
    const ConfidenceMap rho = load_confidence(*in.confidence_dir, seq.frames[t]);
    const PairAffinitySet pairs = build_pair_set(seq.frames[t], motion[t], seq.boxes[t], cfg.affinity);
    losses[t] = total_loss(rho, pairs, seq.boxes[t], cfg.weights);
  });
  report["frames"] = json::array();
  double sum = 0.0, worst = 0.0;
  for (std::size_t t = 0; t < losses.size(); ++t) {
    const auto& l = losses[t];
    sum += l.total;
    worst = std::max(worst, l.total);
    report["frames"].push_back({{"index", seq.frames[t].index()},
                                {"affinity_loss", l.affinity_loss},
                                {"projection_loss", l.projection_loss},
                                {"positive_pairs", l.positive_pairs},
                                {"total", l.total}});
  }
  report["total_sum"] = sum;
  report["total_max"] = worst;
  return finish(std::move(report), in.out_dir, "loss");
}

json run_optimize(const PipelineConfig& cfg, const CommandInputs& in) {
  const io::LoadedSequence seq = load(cfg, in);
  json report = base_report("optimize", cfg, &seq);
  const auto motion = obtain_motion(cfg, in, seq, report);
  OptimizeOptions opts;
  opts.steps = cfg.steps;
  opts.lr = cfg.lr;
  opts.weights = cfg.weights;
  std::vector<OptimizeResult> results(seq.frames.size());
  for_each_frame(seq.frames, [&](std::size_t t) {
    results[t] = optimize_mask(seq.frames[t], motion[t], seq.boxes[t], cfg.affinity, opts);
  });

  report["frames"] = json::array();
  double j_sum = 0.0;
  std::size_t j_count = 0;
  for (std::size_t t = 0; t < results.size(); ++t) {
    const Frame& f = seq.frames[t];
    const auto& r = results[t];
    GrayImage conf(f.width(), f.height(), r.confidence.rho);
    write_map(cfg, in.out_dir / "confidence", f.index(), conf);
    const BinaryMask pred = threshold_mask(r.confidence.rho, f.width(), f.height(), 0.5);
    std::vector<std::uint8_t> labels(pred.fg.begin(), pred.fg.end());
    io::write_label_png(in.out_dir / "masks" / seq.file_names[t], f.width(), f.height(), labels);
    json fr{{"index", f.index()},
            {"file", frame_stem(f.index())},
            {"positive_pairs", r.pairs.positive_count},
            {"initial_loss", r.loss_history.front()},
            {"final_loss", r.loss_history.back()}};
    if (in.gt_dir) {
      const auto gts = io::read_label_png(*in.gt_dir / seq.file_names[t]);
      const double j = jaccard(pred, union_mask(gts, f.width(), f.height()));
      fr["jaccard"] = j;
      j_sum += j;
      ++j_count;
    }
    report["frames"].push_back(std::move(fr));
  }
  if (j_count > 0) report["jaccard_mean"] = j_sum / static_cast<double>(j_count);
  return finish(std::move(report), in.out_dir, "optimize");
}

json run_eval(const PipelineConfig& cfg, const CommandInputs& in) {
  if (!in.gt_dir) throw Error(ErrorCode::kInvalidInput, "eval requires --gt <dir>");
  if (!in.pred_dir && !in.motion_dir) {
    throw Error(ErrorCode::kInvalidInput, "eval requires --pred <dir> and/or --motion <dir>");
  }
  cfg.validate();
  const io::SequenceManifest manifest = io::read_manifest(in.manifest);
  json report = base_report("eval", cfg, nullptr);
  report["sequence"] = manifest.sequence;

  std::vector<BinaryMask> preds;
  std::vector<BinaryMask> gts;
  std::vector<int> entry_frame;
  std::vector<ForegroundScores> fg_scores;
  int tol = cfg.boundary_tol;
  for (const auto& rec : manifest.frames) {
    const auto gt = io::read_label_png(*in.gt_dir / rec.file);
    const io::Image8 gt_img = io::read_png(*in.gt_dir / rec.file);
    const int w = gt_img.width;
    const int h = gt_img.height;
    if (tol < 0) tol = default_boundary_tolerance(w, h);
    if (in.pred_dir) {
      const auto pred = io::read_label_png(*in.pred_dir / rec.file);
      std::map<int, const BinaryMask*> by_id;
      for (const auto& m : pred) by_id[m.object_id] = &m;
      for (const auto& g : gt) {
        const auto it = by_id.find(g.object_id);
        preds.push_back(it != by_id.end() ? *it->second : BinaryMask(w, h, g.object_id));
        gts.push_back(g);
        entry_frame.push_back(rec.index);
        if (it != by_id.end()) by_id.erase(it);
      }
      for (const auto& [id, m] : by_id) {
        report["warnings"].push_back("frame " + std::to_string(rec.index) + ": predicted object " +
                                     std::to_string(id) + " has no ground truth");
      }
    }
    if (in.motion_dir) {
      std::vector<Rgb> dummy(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
      const Frame shape(rec.index, w, h, std::move(dummy));
      fg_scores.push_back(foreground_pixel_scores(load_motion(*in.motion_dir, shape),
                                                  union_mask(gt, w, h), cfg.fg_threshold));
    }
  }
  report["boundary_tol"] = tol;
  if (in.pred_dir) {
    if (gts.empty()) throw Error(ErrorCode::kInvalidInput, "eval: no ground-truth objects found");
    const MetricsReport m = jf_score(preds, gts, tol);
    report["j_mean"] = m.j_mean;
    report["f_mean"] = m.f_mean;
    report["jf_mean"] = m.jf_mean;
    report["per_frame"] = json::array();
    for (std::size_t i = 0; i < m.per_frame.size(); ++i) {
      report["per_frame"].push_back({{"index", entry_frame[i]},
                                     {"object_id", m.per_frame[i].object_id},
                                     {"j", m.per_frame[i].j},
                                     {"f", m.per_frame[i].f}});
    }
  }
  if (!fg_scores.empty()) {
    ForegroundScores mean;
    for (const auto& s : fg_scores) {
      mean.precision += s.precision;
      mean.recall += s.recall;
      mean.f1 += s.f1;
    }
    const double n = static_cast<double>(fg_scores.size());
    report["foreground"] = {{"threshold", cfg.fg_threshold},
                            {"precision", mean.precision / n},
                            {"recall", mean.recall / n},
                            {"f1", mean.f1 / n}};
  }
  return finish(std::move(report), in.out_dir, "eval");
}

json run_synth(const PipelineConfig& cfg, const CommandInputs& in,
               std::optional<std::uint64_t> seed_override) {
  synth::SceneSpec spec;
  if (in.scene) {
    spec = synth::scene_from_json(io::read_text(*in.scene));
  } else {
    spec.objects.push_back(synth::ObjectSpec{});
    spec.objects.back().velocity_x = 3.0;
  }
  if (seed_override) spec.seed = *seed_override;
  const synth::Sequence seq = synth::generate(spec);
  synth::write_sequence(seq, in.out_dir);
  json report = base_report("synth", cfg, nullptr);
  report["scene"] = json::parse(synth::scene_to_json(spec));
  report["frames"] = static_cast<int>(seq.frames.size());
  report["camera"] = json::array();
  for (const auto& c : seq.camera) report["camera"].push_back(affine_json(c));
  return finish(std::move(report), in.out_dir, "synth");
}

}  // namespace motionseg::app
