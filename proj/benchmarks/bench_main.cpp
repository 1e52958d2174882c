#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "asu/audio.hpp"
#include "asu/corpus.hpp"
#include "asu/downstream.hpp"
#include "asu/metrics.hpp"
#include "asu/model.hpp"
#include "asu/rng.hpp"

namespace {

using namespace asu;

std::vector<float> tone(std::size_t n, double freq, int rate = 16000) {
  std::vector<float> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    out[t] = static_cast<float>(0.5 * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / rate));
  }
  return out;
}

EncoderConfig encoder_config(int layers, int dim) {
  EncoderConfig c;
  c.n_layers = layers;
  c.hidden_dim = dim;
  c.seed = 1;
  return c;
}

HeadConfig head_config(int dim, int width, int classes) {
  HeadConfig h;
  h.input_dim = dim;
  h.conv_channels = width;
  h.pooled_dim = width;
  h.fc_hidden = width;
  h.n_classes = classes;
  return h;
}

// args: hidden dim, seconds of audio
void BM_EncoderForward(benchmark::State& state) {
  const StubEncoder enc(encoder_config(12, static_cast<int>(state.range(0))));
  const auto clip = tone(static_cast<std::size_t>(state.range(1)) * 16000, 440.0);
  for (auto _ : state) benchmark::DoNotOptimize(enc.encode(clip, clip.size()));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_EncoderForward)->Args({64, 1})->Args({64, 6})->Args({256, 6})->Unit(benchmark::kMillisecond);

void BM_EncoderForwardLora(benchmark::State& state) {
  auto enc = std::make_shared<StubEncoder>(encoder_config(12, static_cast<int>(state.range(0))));
  const auto adapted = apply_lora(enc, LoraConfig{}, 2);
  const auto clip = tone(6 * 16000, 440.0);
  for (auto _ : state) benchmark::DoNotOptimize(adapted.encode(clip, clip.size()));
}
BENCHMARK(BM_EncoderForwardLora)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_HeadForwardBackward(benchmark::State& state) {
  const auto dim = static_cast<int>(state.range(0));
  Engine rng(3);
  HiddenStack stack;
  for (int l = 0; l < 12; ++l) {
    Matrix m(300, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
    stack.states.push_back(std::move(m));
  }
  stack.frame_mask.assign(300, 1);
  LayerWeights weights(12);
  ClassifierHead head(head_config(dim, 256, 4), 4);
  for (auto _ : state) {
    HeadTrace trace;
    const Matrix features = weighted_layer_average(stack, weights);
    Vector grad;
    softmax_cross_entropy(head.forward(features, stack.frame_mask, &trace), 1, &grad);
    benchmark::DoNotOptimize(weighted_layer_average_backward(stack, weights, head.backward(trace, grad)));
  }
}
BENCHMARK(BM_HeadForwardBackward)->Arg(64)->Arg(768)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  auto enc = std::make_shared<StubEncoder>(encoder_config(4, 32));
  std::optional<LoraConfig> lora;
  if (state.range(0) != 0) lora = LoraConfig{};
  AsuModel model(enc, head_config(32, 32, 4), lora, 5);
  std::vector<std::vector<float>> audio;
  std::vector<std::size_t> labels, idx;
  for (std::size_t i = 0; i < 8; ++i) {
    audio.push_back(tone(16000 + 800 * i, 300.0 + 100.0 * static_cast<double>(i % 4)));
    labels.push_back(i % 4);
    idx.push_back(i);
  }
  const auto batch = make_batch(audio, idx, labels);
  for (auto _ : state) {
    model.zero_grad();
    benchmark::DoNotOptimize(model.accumulate_batch(batch, nullptr));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Engine rng(4);
  std::vector<std::size_t> pred(n), label(n);
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = uniform_index(rng, 46);
    label[i] = uniform_index(rng, 46);
  }
  for (auto _ : state) benchmark::DoNotOptimize(compute_metrics(pred, label, 46));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Metrics)->Arg(1000)->Arg(100000);

void BM_Resample(benchmark::State& state) {
  const auto source = static_cast<int>(state.range(0));
  const auto clip = tone(static_cast<std::size_t>(source) * 5, 440.0, source);
  for (auto _ : state) benchmark::DoNotOptimize(resample(clip, source, 16000));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(clip.size()));
}
BENCHMARK(BM_Resample)->Arg(22050)->Arg(44100)->Arg(48000)->Unit(benchmark::kMillisecond);

void BM_Subsample(benchmark::State& state) {
  std::vector<UtteranceRecord> records;
  const std::vector<std::string> labels{"neutral", "happy", "sad", "angry"};
  for (std::size_t i = 0; i < 5500; ++i) {
    const auto id = "u" + std::to_string(i);
    records.push_back({id, id + ".wav", labels[i % 4], "spk", "Session1", 1.0, Origin::real});
  }
  const Manifest m(TaskKind::emotion, std::move(records));
  for (auto _ : state) benchmark::DoNotOptimize(subsample(m, 0.1, 7));
}
BENCHMARK(BM_Subsample)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
