// Serial reference vs OpenMP kernels on 480x270 inputs. The Arg is the
// thread count for the parallel variants.
#include <benchmark/benchmark.h>

#include "motionseg/affinity.hpp"
#include "motionseg/compensation.hpp"
#include "motionseg/features.hpp"
#include "motionseg/imaging.hpp"
#include "motionseg/loss.hpp"
#include "motionseg/parallel.hpp"
#include "motionseg/serial.hpp"
#include "motionseg/synthetic.hpp"
#include "support.hpp"

using namespace motionseg;

namespace {

constexpr int kW = 480;
constexpr int kH = 270;

const GrayImage& image() {
  static const GrayImage img = testing::random_gray(kW, kH, 1);
  return img;
}

const AffineTransform& transform() {
  static const AffineTransform t =
      AffineTransform::rotation_about(kW / 2.0, kH / 2.0, 2.0).then(AffineTransform::translation(3.5, -2.0));
  return t;
}

struct PairScene {
  Frame frame;
  MotionMap motion;
  std::vector<BoundingBox> boxes;
  ConfidenceMap rho;
};

const PairScene& pair_scene() {
  static const PairScene scene = [] {
    synth::SceneSpec s;
    s.width = kW;
    s.height = kH;
    s.frames = 2;
    synth::ObjectSpec o;
    o.width = 160;
    o.height = 120;
    o.start_x = 100;
    o.start_y = 60;
    o.velocity_x = 3;
    o.box_margin = 8;
    s.objects = {o};
    auto seq = synth::generate(s);
    std::vector<double> rho(static_cast<std::size_t>(kW * kH));
    const GrayImage noise = testing::random_gray(kW, kH, 5);
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = 0.05 + 0.9 * noise.values()[i];
    return PairScene{seq.frames[1], seq.planted_motion[1], seq.boxes[1], ConfidenceMap(1, kW, kH, rho)};
  }();
  return scene;
}

void threads(benchmark::State& state) { set_thread_count(static_cast<int>(state.range(0))); }

void BM_BlurSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::gaussian_blur(image(), 1.0));
}
void BM_BlurParallel(benchmark::State& state) {
  threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur(image(), 1.0));
}

void BM_WarpSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::warp_affine(image(), transform()));
}
void BM_WarpParallel(benchmark::State& state) {
  threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(warp_affine(image(), transform()));
}

void BM_MedianSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::median_filter(image(), 2));
}
void BM_MedianParallel(benchmark::State& state) {
  threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(median_filter(image(), 2));
}

void BM_CornerResponseSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::corner_response(image()));
}
void BM_CornerResponseParallel(benchmark::State& state) {
  threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(corner_response(image()));
}

void BM_PairSetSerial(benchmark::State& state) {
  const auto& s = pair_scene();
  for (auto _ : state) benchmark::DoNotOptimize(serial::build_pair_set(s.frame, s.motion, s.boxes, {}));
}
void BM_PairSetParallel(benchmark::State& state) {
  threads(state);
  const auto& s = pair_scene();
  for (auto _ : state) benchmark::DoNotOptimize(build_pair_set(s.frame, s.motion, s.boxes, {}));
}

void BM_AffinityLossSerial(benchmark::State& state) {
  const auto& s = pair_scene();
  const auto pairs = build_pair_set(s.frame, s.motion, s.boxes, {});
  for (auto _ : state) benchmark::DoNotOptimize(serial::affinity_loss(s.rho, pairs));
  state.counters["pairs"] = static_cast<double>(pairs.total());
}
void BM_AffinityLossParallel(benchmark::State& state) {
  threads(state);
  const auto& s = pair_scene();
  const auto pairs = build_pair_set(s.frame, s.motion, s.boxes, {});
  for (auto _ : state) benchmark::DoNotOptimize(affinity_loss(s.rho, pairs));
  state.counters["pairs"] = static_cast<double>(pairs.total());
}

void BM_MotionPipeline(benchmark::State& state) {
  threads(state);
  static const synth::Sequence seq = [] {
    synth::SceneSpec s;
    s.width = kW;
    s.height = kH;
    s.frames = 3;
    s.pan_x = 1.5;
    s.objects = {synth::ObjectSpec{}};
    s.objects[0].velocity_x = 4;
    return synth::generate(s);
  }();
  for (auto _ : state) {
    benchmark::DoNotOptimize(motion_pipeline(seq.frames[0], seq.frames[1], seq.frames[2], seq.boxes[1], {}, 0));
  }
}

}  // namespace

#define THREAD_ARGS ->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)

BENCHMARK(BM_BlurSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlurParallel) THREAD_ARGS;
BENCHMARK(BM_WarpSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WarpParallel) THREAD_ARGS;
BENCHMARK(BM_MedianSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MedianParallel) THREAD_ARGS;
BENCHMARK(BM_CornerResponseSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CornerResponseParallel) THREAD_ARGS;
BENCHMARK(BM_PairSetSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PairSetParallel) THREAD_ARGS;
BENCHMARK(BM_AffinityLossSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AffinityLossParallel) THREAD_ARGS;
BENCHMARK(BM_MotionPipeline) THREAD_ARGS;

BENCHMARK_MAIN();
