#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "van/model.hpp"
#include "van/stopping.hpp"
#include "van/training.hpp"

namespace van {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration shared by every command.
struct RunConfig {
  std::string preset = "desk";
  std::string alphabet_path;
  StopStrategy stop_strategy = StopStrategy::Learned;
  std::size_t l_max = 30;
  double lambda = 1.0;
  double dropout_p_std = 0.5;
  double dropout_p_spatial = 0.25;
  double dropout_mode_prob = 0.5;
  double lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;
  std::size_t batch_size = 1;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1;
  std::uint64_t init_seed = 1;
  std::string train_dir;
  std::string eval_dir;
  std::string checkpoint_path = "van.ckpt";
  std::string init_checkpoint;
  std::string loss_csv;
  std::string output_dir = "predictions";
  std::size_t log_every = 10;
  bool augment = false;
  bool downscale = false;
  std::string precision = "f32";
  bool line_break_as_space = true;

  /// Applies one `key = value` assignment; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  /// Every key with its current value, one `key = value` line each, in a fixed order.
  std::string echo() const;

  ModelConfig model_config() const;
  TrainConfig train_config() const;
  EvaluationOptions evaluation_options() const;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string description;
};

const std::vector<ConfigKey>& config_keys();

/// Parses config text onto defaults. Errors carry `<origin>:<line>:`.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "config");
RunConfig load_run_config(const std::filesystem::path& path);

/// Model metadata stored alongside the run config in a checkpoint echo.
struct CheckpointMeta {
  std::string kind;  // "van" or "line"
  std::string alphabet;
  RunConfig run;
};

std::string make_checkpoint_echo(const std::string& kind, const Alphabet& alphabet, const RunConfig& run);
CheckpointMeta parse_checkpoint_echo(const std::string& echo);

}  // namespace van
