#include "van/training.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "van/nn/ops.hpp"
#include "van/text.hpp"

namespace van {

using nn::Tensor;
using nn::Var;

std::vector<TrainingSample> encode_samples(const std::vector<ParagraphSample>& samples, const Alphabet& alphabet) {
  std::vector<TrainingSample> out;
  out.reserve(samples.size());
  for (const ParagraphSample& s : samples) {
    TrainingSample t{s.name, s.image, {}};
    for (const std::string& line : s.lines) t.targets.push_back(alphabet.encode(line));
    out.push_back(std::move(t));
  }
  return out;
}

void TrainConfig::validate() const {
  adam.validate();
  stop.validate();
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
}

LossBreakdown paragraph_loss(const VanModel& model, const Image& image, const std::vector<ctc::Labels>& targets,
                             const StopConfig& stop, Mode mode, Rng* rng) {
  const std::size_t n_lines = targets.size();
  if (stop.strategy == StopStrategy::Fixed && n_lines > stop.l_max) {
    throw std::invalid_argument("paragraph has " + std::to_string(n_lines) + " lines, more than l_max");
  }
  const Var features = model.encoder().encode(Var(image), mode, rng);
  const Var f_prime = model.attention().collapse_horizontal(features);
  AttentionState state = AttentionState::initial(features.shape()[0], model.config().attention.c_h);
  const std::size_t loop = stop.strategy == StopStrategy::Fixed ? stop.l_max : n_lines + 1;

  std::vector<Var> lattices, decisions;
  for (std::size_t t = 1; t <= loop; ++t) {
    const AttentionStep step = model.attention().step(features, f_prime, state);
    if (stop.strategy == StopStrategy::Learned) decisions.push_back(step.stop_probs);
    if (stop.strategy != StopStrategy::Learned || t <= n_lines) {
      DecoderOutput out = model.decoder().decode_line(step.line_features, state.decoder);
      lattices.push_back(out.log_probs);
      state.decoder = out.state;
    }
    state.coverage = update_coverage(state.coverage, step.alpha);
    state.alpha_prev = step.alpha;
  }

  LossBreakdown loss;
  switch (stop.strategy) {
    case StopStrategy::Fixed: loss.total = loss_fixed(lattices, targets, stop); break;
    case StopStrategy::Early: loss.total = loss_early(lattices, targets); break;
    case StopStrategy::Learned: {
      const Var ctc_part = ctc_sum(lattices, targets);
      const Var ce_part = stop_cross_entropy_sum(decisions);
      loss.ce = ce_part.value().item();
      loss.total = loss_learned(lattices, targets, decisions, stop);
      loss.ctc = ctc_part.value().item();
      return loss;
    }
  }
  loss.ctc = loss.total.value().item();
  return loss;
}

LossBreakdown line_loss(const LineModel& model, const Image& image, const ctc::Labels& target, Mode mode, Rng* rng) {
  LossBreakdown loss;
  loss.total = ctc::loss(model.forward(Var(image), mode, rng), target);
  loss.ctc = loss.total.value().item();
  return loss;
}

namespace {

Image training_view(const TrainingSample& sample, const TrainConfig& config, Rng& rng) {
  const Image source = config.augment ? augment(sample.image, rng, config.augment_policy) : sample.image;
  return preprocess(source, config.preprocess);
}

template <typename LossFn>
StepStats run_step(const ParameterStore& store, Adam& optimizer, const std::vector<const TrainingSample*>& batch,
                   const TrainConfig& config, Rng& rng, LossFn loss_fn) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  nn::GemmPrecisionGuard precision(config.precision);
  store.zero_grad();
  StepStats stats;
  std::vector<LossBreakdown> kept;
  for (const TrainingSample* sample : batch) {
    try {
      LossBreakdown loss = loss_fn(*sample, training_view(*sample, config, rng));
      nn::backward(nn::scale(loss.total, 1.0 / static_cast<double>(batch.size())));
      stats.total += loss.total.value().item();
      stats.ctc += loss.ctc;
      stats.ce += loss.ce;
      ++stats.used;
    } catch (const ctc::InfeasibleTarget&) {
      ++stats.skipped;
    }
  }
  if (stats.used > 0) {
    // Gradients were scaled by the full batch size; rescale when samples were skipped.
    if (stats.used != batch.size()) {
      const double fix = static_cast<double>(batch.size()) / static_cast<double>(stats.used);
      for (const auto& [name, var] : store.items())
        if (var.has_grad())
          for (double& g : var.node().grad.data()) g *= fix;
    }
    optimizer.step();
    const double n = static_cast<double>(stats.used);
    stats.total /= n;
    stats.ctc /= n;
    stats.ce /= n;
  }
  stats.step = optimizer.steps_taken();
  return stats;
}

template <typename StepFn>
std::size_t run_training(std::size_t n_samples, const TrainConfig& config, Rng& rng, StepFn step_fn,
                         const StepCallback& on_step) {
  if (n_samples == 0) throw std::invalid_argument("no training samples");
  std::vector<std::size_t> order(n_samples);
  std::size_t cursor = n_samples;
  std::size_t steps = 0;
  while (steps < config.max_steps) {
    std::vector<std::size_t> batch;
    while (batch.size() < std::min(config.batch_size, n_samples)) {
      if (cursor == n_samples) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n_samples - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    const StepStats stats = step_fn(batch);
    ++steps;
    if (on_step && !on_step(stats)) break;
  }
  return steps;
}

}  // namespace

StepStats train_step_paragraph(const VanModel& model, Adam& optimizer, const std::vector<const TrainingSample*>& batch,
                               const TrainConfig& config, Rng& rng) {
  return run_step(model.parameters(), optimizer, batch, config, rng,
                  [&](const TrainingSample& sample, const Image& image) {
                    return paragraph_loss(model, image, sample.targets, config.stop, Mode::Train, &rng);
                  });
}

StepStats train_step_line(const LineModel& model, Adam& optimizer, const std::vector<const TrainingSample*>& batch,
                          const TrainConfig& config, Rng& rng) {
  return run_step(model.parameters(), optimizer, batch, config, rng,
                  [&](const TrainingSample& sample, const Image& image) {
                    if (sample.targets.size() != 1) {
                      throw std::invalid_argument(sample.name + ": line samples need exactly one text line");
                    }
                    return line_loss(model, image, sample.targets[0], Mode::Train, &rng);
                  });
}

std::size_t train_paragraphs(VanModel& model, const std::vector<TrainingSample>& samples, const TrainConfig& config,
                             const StepCallback& on_step) {
  config.validate();
  Rng rng(config.seed);
  Adam optimizer(model.parameters(), config.adam);
  return run_training(
      samples.size(), config, rng,
      [&](const std::vector<std::size_t>& indices) {
        std::vector<const TrainingSample*> batch;
        for (std::size_t i : indices) batch.push_back(&samples[i]);
        return train_step_paragraph(model, optimizer, batch, config, rng);
      },
      on_step);
}

std::size_t pretrain_line_model(LineModel& model, const std::vector<TrainingSample>& samples, const TrainConfig& config,
                                const StepCallback& on_step) {
  config.validate();
  Rng rng(config.seed);
  Adam optimizer(model.parameters(), config.adam);
  return run_training(
      samples.size(), config, rng,
      [&](const std::vector<std::size_t>& indices) {
        std::vector<const TrainingSample*> batch;
        for (std::size_t i : indices) batch.push_back(&samples[i]);
        return train_step_line(model, optimizer, batch, config, rng);
      },
      on_step);
}

Prediction predict_paragraph(const VanModel& model, const Image& image, StopStrategy strategy, std::size_t l_max) {
  nn::NoGradGuard no_grad;
  const Var features = model.encoder().encode(Var(image), Mode::Eval, nullptr);
  const Var f_prime = model.attention().collapse_horizontal(features);
  AttentionState state = AttentionState::initial(features.shape()[0], model.config().attention.c_h);
  Prediction prediction;
  for (std::size_t t = 1;; ++t) {
    if (t > l_max) break;
    const AttentionStep step = model.attention().step(features, f_prime, state);
    if (strategy == StopStrategy::Learned) {
      prediction.stop_probs.push_back(step.stop_probs.value());
      if (should_stop(strategy, t, step.stop_probs.value(), "", l_max)) {
        prediction.alphas.push_back(step.alpha.value());
        break;
      }
    }
    DecoderOutput out = model.decoder().decode_line(step.line_features, state.decoder);
    const std::string line = best_path_decode(out.log_probs.value(), model.alphabet());
    if (strategy == StopStrategy::Early && should_stop(strategy, t, Tensor(), line, l_max)) break;
    state.decoder = out.state;
    state.coverage = update_coverage(state.coverage, step.alpha);
    state.alpha_prev = step.alpha;
    prediction.lines.push_back(line);
    if (strategy != StopStrategy::Fixed || !line.empty()) {
      prediction.alphas.push_back(step.alpha.value());
      ++prediction.line_count;
    }
  }
  prediction.text = assemble_paragraph(prediction.lines);
  return prediction;
}

std::string predict_line(const LineModel& model, const Image& image) {
  nn::NoGradGuard no_grad;
  return best_path_decode(model.forward(Var(image), Mode::Eval, nullptr).value(), model.alphabet());
}

EvalReport evaluate_paragraphs(const VanModel& model, const std::vector<ParagraphSample>& samples,
                               const EvaluationOptions& options, std::vector<Prediction>* predictions) {
  std::vector<TextPair> pairs;
  std::vector<std::pair<std::size_t, std::size_t>> counts;
  for (const ParagraphSample& sample : samples) {
    Prediction p = predict_paragraph(model, preprocess(sample.image, options.preprocess), options.strategy, options.l_max);
    std::string hyp = p.text, gt = assemble_paragraph(sample.lines);
    if (!options.line_break_as_space) {
      hyp.clear();
      for (const auto& line : p.lines) hyp += line;
      hyp = postprocess_text(hyp);
      gt.clear();
      for (const auto& line : sample.lines) gt += line;
      gt = postprocess_text(gt);
    }
    pairs.emplace_back(hyp, gt);
    counts.emplace_back(sample.lines.size(), p.line_count);
    if (predictions) predictions->push_back(std::move(p));
  }
  return evaluate(pairs, counts);
}

}  // namespace van
