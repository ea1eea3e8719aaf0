#include <benchmark/benchmark.h>

#include <cmath>

#include "van/ctc.hpp"
#include "van/model.hpp"
#include "van/nn/gemm.hpp"
#include "van/nn/ops.hpp"
#include "van/training.hpp"

namespace {

using van::nn::Tensor;
using van::nn::Var;

Tensor uniform_tensor(van::nn::Shape shape, van::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

void BM_Conv2d3x3(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  van::Rng rng(1);
  const Var input(uniform_tensor({40, 64, channels}, rng));
  const Var weights(uniform_tensor({3, 3, channels, channels}, rng));
  const Var bias(Tensor({channels}, 0.0));
  van::nn::NoGradGuard no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(van::nn::conv2d(input, weights, bias, {1, 1}, van::nn::Padding::Same));
  }
}
BENCHMARK(BM_Conv2d3x3)->Arg(16)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_CtcLossAndGradient(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  van::Rng rng(2);
  Tensor logits = uniform_tensor({frames, 11}, rng);
  for (std::size_t f = 0; f < frames; ++f) {
    double total = 0.0;
    for (std::size_t k = 0; k < 11; ++k) total += std::exp(logits.at(f, k));
    for (std::size_t k = 0; k < 11; ++k) logits.at(f, k) -= std::log(total);
  }
  van::ctc::Labels target;
  for (std::size_t i = 0; i < frames / 4; ++i) target.push_back(i % 10);
  for (auto _ : state) {
    Var lp(logits, true);
    van::nn::backward(van::ctc::loss(lp, target));
    benchmark::DoNotOptimize(lp.grad());
  }
}
BENCHMARK(BM_CtcLossAndGradient)->Arg(32)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_LstmStep(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  van::Rng rng(3);
  van::nn::LstmParams params{Var(uniform_tensor({width, 4 * width}, rng, -0.1, 0.1)),
                             Var(uniform_tensor({width, 4 * width}, rng, -0.1, 0.1)), Var(Tensor({4 * width}, 0.0))};
  const Var x(uniform_tensor({width}, rng));
  van::nn::LstmState s{Var(Tensor({width}, 0.0)), Var(Tensor({width}, 0.0))};
  van::nn::NoGradGuard no_grad;
  for (auto _ : state) {
    s = van::nn::lstm_step(x, s, params);
    benchmark::DoNotOptimize(s.h);
  }
}
BENCHMARK(BM_LstmStep)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_EncoderForwardDesk(benchmark::State& state) {
  const van::Alphabet alphabet = van::Alphabet::from_utf8("0123456789");
  van::VanModel model(van::ModelConfig::desk(), alphabet, 1);
  van::Rng rng(4);
  const Var image(uniform_tensor({160, 256, 1}, rng, 0.0, 1.0));
  van::nn::GemmPrecisionGuard precision(state.range(0) == 32 ? van::nn::GemmPrecision::Float32
                                                             : van::nn::GemmPrecision::Float64);
  van::nn::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.encoder().encode(image, van::Mode::Eval, nullptr));
}
BENCHMARK(BM_EncoderForwardDesk)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ParagraphTrainStepDesk(benchmark::State& state) {
  const van::Alphabet alphabet = van::Alphabet::from_utf8("0123456789");
  van::VanModel model(van::ModelConfig::desk(), alphabet, 1);
  van::Rng rng(5);
  const van::TrainingSample sample{"bench", uniform_tensor({160, 256, 1}, rng, 0.0, 1.0), {{1, 2, 3}, {4, 5}, {6, 7, 8}}};
  van::TrainConfig config;
  config.preprocess = model.config().preprocess();
  van::Adam adam(model.parameters(), config.adam);
  for (auto _ : state) benchmark::DoNotOptimize(van::train_step_paragraph(model, adam, {&sample}, config, rng));
}
BENCHMARK(BM_ParagraphTrainStepDesk)->Unit(benchmark::kMillisecond)->Iterations(5);

}  // namespace
BENCHMARK_MAIN();
