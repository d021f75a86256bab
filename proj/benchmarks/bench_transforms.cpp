#include <random>

#include <benchmark/benchmark.h>

#include "wmadv/embedder.hpp"
#include "wmadv/imaging.hpp"
#include "wmadv/transforms.hpp"

namespace {

wmadv::ImageTensor random_image(int size, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 255.0);
  wmadv::ImageTensor img(size, size);
  for (const auto c : wmadv::kChannels) {
    auto& p = img.plane(c);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = dist(rng);
  }
  return wmadv::clamp_quantize(img);
}

void BM_Dct2(benchmark::State& state) {
  const auto img = random_image(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(wmadv::dct2(img.plane(wmadv::Channel::R)));
}
BENCHMARK(BM_Dct2)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Dwt2(benchmark::State& state) {
  const auto img = random_image(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(wmadv::dwt2(img.plane(wmadv::Channel::R), 3));
}
BENCHMARK(BM_Dwt2)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_EmbedDct(benchmark::State& state) {
  const auto host = random_image(256, 3);
  const auto wm = random_image(256, 4);
  wmadv::EmbedParams p;
  p.strength = wmadv::Strengths::dct_default();
  p.times = 5;
  for (auto _ : state) benchmark::DoNotOptimize(wmadv::embed_dct(host, wm, p));
}
BENCHMARK(BM_EmbedDct)->Unit(benchmark::kMillisecond);

// One round once the pair's forward transforms are cached.
void BM_DctPairEmbed(benchmark::State& state) {
  const wmadv::DctPair pair(random_image(256, 3), random_image(256, 4));
  wmadv::EmbedParams p;
  p.strength = wmadv::Strengths::dct_default();
  p.times = 5;
  for (auto _ : state) benchmark::DoNotOptimize(pair.embed(p));
}
BENCHMARK(BM_DctPairEmbed)->Unit(benchmark::kMillisecond);

void BM_EmbedDwt(benchmark::State& state) {
  const auto host = random_image(256, 5);
  const auto wm = random_image(64, 6);
  wmadv::EmbedParams p;
  p.strength = wmadv::Strengths::dwt_default();
  p.times = 25;
  for (auto _ : state) benchmark::DoNotOptimize(wmadv::embed_dwt(host, wm, p));
}
BENCHMARK(BM_EmbedDwt)->Unit(benchmark::kMillisecond);

void BM_EncodePng(benchmark::State& state) {
  const auto img = random_image(256, 7);
  for (auto _ : state) benchmark::DoNotOptimize(wmadv::encode_png(img));
}
BENCHMARK(BM_EncodePng)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
