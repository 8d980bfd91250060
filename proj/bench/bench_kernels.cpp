// Parallel kernels against their serial references. The argument of the parallel
// variants is the OpenMP thread count.

#include <benchmark/benchmark.h>

#include <random>

#include "prp/correspondence.hpp"
#include "prp/frontend.hpp"
#include "prp/losses.hpp"
#include "prp/parallel.hpp"
#include "prp/reference/serial.hpp"
#include "prp/scene.hpp"

namespace {

using namespace prp;

const CameraIntrinsics& cam() {
  static const CameraIntrinsics c = CameraIntrinsics::from_hfov(44.0, 160, 120);
  return c;
}

const PoseSE3& pose_a() {
  static const PoseSE3 p = PoseSE3::look_at({2.0, -1.0, 1.1}, {0.0, 0.0, 0.3});
  return p;
}

const std::pair<RenderedView, RenderedView>& views() {
  static const auto v = [] {
    RenderedView a = render_view(default_scene(), cam(), pose_a());
    RenderedView b = render_view(default_scene(), cam(), PoseSE3::look_at({1.8, -1.4, 1.2}, {0.0, 0.0, 0.3}), 1);
    return std::make_pair(a, b);
  }();
  return v;
}

const Heatmap& heat() {
  static const Heatmap h = detect(views().first.image);
  return h;
}

const std::pair<DescriptorSet, DescriptorSet>& descriptors() {
  static const auto d = [] {
    const auto& [a, b] = views();
    return std::make_pair(describe(a.image, top_k(detect(a.image), 1000, 2), 128),
                          describe(b.image, top_k(detect(b.image), 1000, 2), 128));
  }();
  return d;
}

struct LossInput {
  DescriptorGrid a{15, 20, 128}, b{15, 20, 128};
  CellCorrespondence s;
};

const LossInput& loss_input() {
  static const LossInput in = [] {
    LossInput l;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < l.a.data.size(); ++i) l.a.data.data()[i] = n(rng);
    for (int i = 0; i < l.b.data.size(); ++i) l.b.data.data()[i] = n(rng);
    l.a.normalize();
    l.b.normalize();
    const auto& [va, vb] = views();
    l.s = cell_correspondence_prp(va, vb, 8, 4.0, PrPParams{});
    return l;
  }();
  return in;
}

template <typename F>
void parallel(benchmark::State& state, F&& f) {
  const int saved = max_threads();
  set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(f());
  set_num_threads(saved);
}

template <typename F>
void serial_run(benchmark::State& state, F&& f) {
  for (auto _ : state) benchmark::DoNotOptimize(f());
}

void BM_Render(benchmark::State& s) { parallel(s, [] { return render_view(default_scene(), cam(), pose_a()); }); }
void BM_RenderSerial(benchmark::State& s) {
  serial_run(s, [] { return serial::render_view(default_scene(), cam(), pose_a()); });
}

void BM_Dense(benchmark::State& s) {
  parallel(s, [] { return dense_correspondences(views().first, views().second, PrPParams{}); });
}
void BM_DenseSerial(benchmark::State& s) {
  serial_run(s, [] { return serial::dense_correspondences(views().first, views().second, PrPParams{}); });
}

void BM_Cells(benchmark::State& s) {
  parallel(s, [] { return cell_correspondence_prp(views().first, views().second, 8, 4.0, PrPParams{}); });
}
void BM_CellsSerial(benchmark::State& s) {
  serial_run(s, [] { return serial::cell_correspondence_prp(views().first, views().second, 8, 4.0, PrPParams{}); });
}

void BM_Detect(benchmark::State& s) {
  const GrayImage g = to_gray(views().first.image);
  parallel(s, [&] { return detect(g); });
}
void BM_DetectSerial(benchmark::State& s) {
  const GrayImage g = to_gray(views().first.image);
  serial_run(s, [&] { return serial::detect(g); });
}

void BM_Nms(benchmark::State& s) { parallel(s, [] { return nms(heat(), 4, 0.015); }); }
void BM_NmsSerial(benchmark::State& s) { serial_run(s, [] { return serial::nms(heat(), 4, 0.015); }); }

void BM_Mnn(benchmark::State& s) {
  parallel(s, [] { return match_mnn(descriptors().first.descriptors, descriptors().second.descriptors, 0.9); });
}
void BM_MnnSerial(benchmark::State& s) {
  serial_run(s,
             [] { return serial::match_mnn(descriptors().first.descriptors, descriptors().second.descriptors, 0.9); });
}

void BM_DescriptorLoss(benchmark::State& s) {
  const LossInput& in = loss_input();
  parallel(s, [&] { return descriptor_loss(in.a, in.b, in.s, DescriptorLossParams{}); });
}
void BM_DescriptorLossSerial(benchmark::State& s) {
  const LossInput& in = loss_input();
  serial_run(s, [&] { return serial::descriptor_loss(in.a, in.b, in.s, DescriptorLossParams{}); });
}

#define PRP_PAIR(name)                                                                    \
  BENCHMARK(BM_##name)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime(); \
  BENCHMARK(BM_##name##Serial)->Unit(benchmark::kMillisecond)->UseRealTime()

PRP_PAIR(Render);
PRP_PAIR(Dense);
PRP_PAIR(Cells);
PRP_PAIR(Detect);
PRP_PAIR(Nms);
PRP_PAIR(Mnn);
PRP_PAIR(DescriptorLoss);

}  // namespace

BENCHMARK_MAIN();
