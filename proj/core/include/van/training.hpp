#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "van/ctc.hpp"
#include "van/data.hpp"
#include "van/metrics.hpp"
#include "van/model.hpp"
#include "van/nn/gemm.hpp"
#include "van/optim.hpp"
#include "van/stopping.hpp"

namespace van {

/// Raw image plus encoded line targets.
struct TrainingSample {
  std::string name;
  Image image;
  std::vector<ctc::Labels> targets;
};

std::vector<TrainingSample> encode_samples(const std::vector<ParagraphSample>& samples, const Alphabet& alphabet);

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 1;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1;
  StopConfig stop;
  bool augment = false;
  AugmentPolicy augment_policy;
  PreprocessConfig preprocess;
  nn::GemmPrecision precision = nn::GemmPrecision::Float32;

  void validate() const;
};

struct LossBreakdown {
  nn::Var total;
  double ctc = 0.0;
  double ce = 0.0;
};

/// One paragraph through the recurrent loop with the loss for the configured
/// stop strategy. `image` must already be preprocessed.
LossBreakdown paragraph_loss(const VanModel& model, const Image& image, const std::vector<ctc::Labels>& targets,
                             const StopConfig& stop, Mode mode, Rng* rng);

/// Per-frame CTC on a single line image.
LossBreakdown line_loss(const LineModel& model, const Image& image, const ctc::Labels& target, Mode mode, Rng* rng);

struct StepStats {
  std::size_t step = 0;
  double total = 0.0;  // mean over the samples used
  double ctc = 0.0;
  double ce = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;  // samples with infeasible CTC targets
};

/// Forward and backward on every sample of the batch (each scaled by 1/batch),
/// then one optimizer update.
StepStats train_step_paragraph(const VanModel& model, Adam& optimizer, const std::vector<const TrainingSample*>& batch,
                               const TrainConfig& config, Rng& rng);
StepStats train_step_line(const LineModel& model, Adam& optimizer, const std::vector<const TrainingSample*>& batch,
                          const TrainConfig& config, Rng& rng);

/// Return false to stop training early.
using StepCallback = std::function<bool(const StepStats&)>;

/// Shuffled mini-batches for up to config.max_steps updates; returns the number of steps taken.
std::size_t train_paragraphs(VanModel& model, const std::vector<TrainingSample>& samples, const TrainConfig& config,
                             const StepCallback& on_step = {});
std::size_t pretrain_line_model(LineModel& model, const std::vector<TrainingSample>& samples, const TrainConfig& config,
                                const StepCallback& on_step = {});

struct Prediction {
  std::string text;
  std::vector<std::string> lines;
  std::size_t line_count = 0;
  std::vector<nn::Tensor> alphas;      // one row per recorded attention step
  std::vector<nn::Tensor> stop_probs;  // learned strategy only
};

/// Recurrent prediction loop; `image` must already be preprocessed.
Prediction predict_paragraph(const VanModel& model, const Image& image, StopStrategy strategy, std::size_t l_max);
std::string predict_line(const LineModel& model, const Image& image);

struct EvaluationOptions {
  StopStrategy strategy = StopStrategy::Learned;
  std::size_t l_max = 30;
  PreprocessConfig preprocess;
  bool line_break_as_space = true;  // false joins lines without a separator for both sides
};

EvalReport evaluate_paragraphs(const VanModel& model, const std::vector<ParagraphSample>& samples,
                               const EvaluationOptions& options, std::vector<Prediction>* predictions = nullptr);

}  // namespace van
