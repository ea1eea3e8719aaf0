#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "van/checkpoint.hpp"
#include "van/data.hpp"
#include "van/image.hpp"
#include "van/metrics.hpp"
#include "van/model.hpp"
#include "van/run_config.hpp"
#include "van/text.hpp"
#include "van/training.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

class DataFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string stop_strategy;
  std::string seed;
  std::string checkpoint;
  std::string train_dir;
  std::string eval_dir;
  std::string output_dir;
  std::string max_steps;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "key = value config file");
    app.add_option("--set", overrides, "override one config key (key=value), repeatable");
    app.add_option("--stop-strategy", stop_strategy, "fixed, early or learned");
    app.add_option("--seed", seed, "run seed");
    app.add_option("--checkpoint", checkpoint, "checkpoint path");
    app.add_option("--train-dir", train_dir, "training dataset directory");
    app.add_option("--eval-dir", eval_dir, "evaluation dataset directory");
    app.add_option("--output-dir", output_dir, "output directory");
    app.add_option("--max-steps", max_steps, "optimizer steps");
  }

  van::RunConfig resolve() const {
    van::RunConfig config = config_file.empty() ? van::RunConfig{} : van::load_run_config(config_file);
    for (const std::string& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw van::ConfigError("--set expects key=value, got '" + o + "'");
      try {
        config.set(o.substr(0, eq), o.substr(eq + 1));
      } catch (const van::ConfigError& e) {
        throw van::ConfigError(std::string("--set: ") + e.what());
      }
    }
    auto flag = [&](const std::string& value, const char* key) {
      if (!value.empty()) config.set(key, value);
    };
    flag(stop_strategy, "stop_strategy");
    flag(seed, "seed");
    flag(checkpoint, "checkpoint_path");
    flag(train_dir, "train_dir");
    flag(eval_dir, "eval_dir");
    flag(output_dir, "output_dir");
    flag(max_steps, "max_steps");
    config.validate();
    return config;
  }
};

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFailure("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

van::Dataset load_data(const std::string& dir, const van::RunConfig& config, const char* key) {
  if (dir.empty()) throw van::ConfigError(std::string(key) + " is not set");
  if (config.alphabet_path.empty()) return van::load_dataset(dir);
  std::string symbols = read_text_file(config.alphabet_path);
  while (!symbols.empty() && (symbols.back() == '\n' || symbols.back() == '\r')) symbols.pop_back();
  const van::Alphabet alphabet = van::Alphabet::from_utf8(symbols);
  return van::load_dataset(dir, &alphabet);
}

van::Checkpoint read_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw DataFailure("checkpoint not found: " + path);
  return van::load_checkpoint(path);
}

std::unique_ptr<van::VanModel> load_van(const std::string& path) {
  const van::Checkpoint ckpt = read_checkpoint(path);
  const van::CheckpointMeta meta = van::parse_checkpoint_echo(ckpt.config_echo);
  if (meta.kind != "van") throw DataFailure(path + " holds a " + meta.kind + " model, not a van model");
  auto model = std::make_unique<van::VanModel>(meta.run.model_config(), van::Alphabet::from_utf8(meta.alphabet), 0);
  van::apply_checkpoint(ckpt, model->parameters());
  return model;
}

class LossLog {
 public:
  LossLog(const fs::path& path, std::size_t total_steps, std::size_t log_every)
      : out_(path), total_(total_steps), every_(log_every) {
    if (!out_) throw DataFailure("cannot write " + path.string());
    out_ << "step,ctc_loss,ce_loss,total\n";
  }

  bool operator()(const van::StepStats& s) {
    char row[160];
    std::snprintf(row, sizeof row, "%zu,%.9g,%.9g,%.9g\n", s.step, s.ctc, s.ce, s.total);
    out_ << row;
    if (s.skipped > 0) std::cerr << "warning: step " << s.step << " skipped " << s.skipped << " infeasible sample(s)\n";
    if (every_ > 0 && (s.step % every_ == 0 || s.step == total_)) {
      std::fprintf(stderr, "step %zu/%zu  total %.5f  ctc %.5f  ce %.5f\n", s.step, total_, s.total, s.ctc, s.ce);
    }
    return true;
  }

 private:
  std::ofstream out_;
  std::size_t total_;
  std::size_t every_;
};

fs::path loss_csv_path(const van::RunConfig& config) {
  return config.loss_csv.empty() ? fs::path(config.checkpoint_path + ".loss.csv") : fs::path(config.loss_csv);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::vector<fs::path> collect_images(const std::vector<std::string>& inputs) {
  std::vector<fs::path> images;
  for (const std::string& input : inputs) {
    if (fs::is_directory(input)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(input))
        if (entry.path().extension() == ".pgm") found.push_back(entry.path());
      std::sort(found.begin(), found.end());
      images.insert(images.end(), found.begin(), found.end());
    } else if (fs::exists(input)) {
      images.emplace_back(input);
    } else {
      throw DataFailure("input not found: " + input);
    }
  }
  if (images.empty()) throw DataFailure("no .pgm images in the given inputs");
  return images;
}

int cmd_generate(const fs::path& out, std::size_t n, std::uint64_t seed, std::size_t lines, van::GeneratorConfig gen) {
  if (lines > 0) {
    gen.n_lines = {static_cast<long>(lines), static_cast<long>(lines)};
    if (lines == 1 && gen.image_height == van::GeneratorConfig{}.image_height) gen.image_height = 32;
  }
  gen.validate();
  const auto samples = van::generate_dataset(gen, n, seed);
  const van::Alphabet alphabet = van::Alphabet::from_utf8(gen.alphabet);
  van::write_dataset(out, samples, alphabet, &gen, seed);
  std::size_t total_lines = 0;
  for (const auto& s : samples) total_lines += s.lines.size();
  std::cout << "wrote " << samples.size() << " samples (" << total_lines << " lines) to " << out.string() << "\n"
            << "alphabet: " << alphabet.utf8() << " (" << alphabet.size() << " symbols)\n"
            << "image size: " << gen.image_height << "x" << gen.image_width << ", seed " << seed << "\n";
  return 0;
}

int cmd_pretrain(const van::RunConfig& config) {
  const van::Dataset data = load_data(config.train_dir, config, "train_dir");
  van::LineModel model(config.model_config(), data.alphabet, config.init_seed);
  van::TrainConfig train = config.train_config();
  train.preprocess = {config.downscale, 32, 8};
  const auto samples = van::encode_samples(data.samples, data.alphabet);
  for (const auto& s : samples)
    if (s.targets.size() != 1) throw DataFailure(s.name + ": pretraining needs single-line samples");

  ensure_parent(config.checkpoint_path);
  LossLog log(loss_csv_path(config), train.max_steps, config.log_every);
  const std::size_t steps = van::pretrain_line_model(model, samples, train, std::ref(log));
  van::save_checkpoint(config.checkpoint_path, model.parameters(),
                       van::make_checkpoint_echo("line", data.alphabet, config), config.seed);
  std::cout << "pretrained line model for " << steps << " steps; checkpoint " << config.checkpoint_path << "\n";
  return 0;
}

int cmd_train(const van::RunConfig& config) {
  const van::Dataset data = load_data(config.train_dir, config, "train_dir");
  van::VanModel model(config.model_config(), data.alphabet, config.init_seed);
  if (!config.init_checkpoint.empty()) {
    const van::Checkpoint ckpt = read_checkpoint(config.init_checkpoint);
    const van::CheckpointMeta meta = van::parse_checkpoint_echo(ckpt.config_echo);
    if (meta.alphabet != data.alphabet.utf8()) throw DataFailure("init_checkpoint alphabet differs from the dataset");
    if (meta.kind == "line") {
      van::LineModel line(meta.run.model_config(), data.alphabet, 0);
      van::apply_checkpoint(ckpt, line.parameters());
      van::transfer_weights(line, model);
      std::cerr << "transferred encoder and output projection from " << config.init_checkpoint << "\n";
    } else {
      van::apply_checkpoint(ckpt, model.parameters());
      std::cerr << "resumed parameters from " << config.init_checkpoint << "\n";
    }
  }
  const auto samples = van::encode_samples(data.samples, data.alphabet);
  const van::TrainConfig train = config.train_config();
  ensure_parent(config.checkpoint_path);
  LossLog log(loss_csv_path(config), train.max_steps, config.log_every);
  const std::size_t steps = van::train_paragraphs(model, samples, train, std::ref(log));
  van::save_checkpoint(config.checkpoint_path, model.parameters(),
                       van::make_checkpoint_echo("van", data.alphabet, config), config.seed);
  std::cout << "trained for " << steps << " steps; checkpoint " << config.checkpoint_path << "\n";
  return 0;
}

void print_report(const van::EvalReport& report) {
  std::cout << report.to_json() << "\n" << report.to_table();
}

int cmd_eval(const van::RunConfig& config, const std::string& hyp_dir) {
  if (!hyp_dir.empty()) {
    if (config.eval_dir.empty()) throw van::ConfigError("eval_dir is not set");
    const van::Dataset data = van::load_dataset(config.eval_dir);
    std::vector<van::TextPair> pairs;
    std::vector<std::pair<std::size_t, std::size_t>> counts;
    for (const auto& sample : data.samples) {
      const fs::path hyp_path = fs::path(hyp_dir) / (sample.name + ".txt");
      const auto hyp_lines = van::parse_transcription(read_text_file(hyp_path));
      auto join = [&](const std::vector<std::string>& lines) {
        if (config.line_break_as_space) return van::assemble_paragraph(lines);
        std::string s;
        for (const auto& l : lines) s += l;
        return van::postprocess_text(s);
      };
      pairs.emplace_back(join(hyp_lines), join(sample.lines));
      counts.emplace_back(sample.lines.size(), hyp_lines.size());
    }
    print_report(van::evaluate(pairs, counts));
    return 0;
  }
  const auto model = load_van(config.checkpoint_path);
  const van::Alphabet alphabet = model->alphabet();
  if (config.eval_dir.empty()) throw van::ConfigError("eval_dir is not set");
  const van::Dataset data = van::load_dataset(config.eval_dir, &alphabet);
  print_report(van::evaluate_paragraphs(*model, data.samples, config.evaluation_options()));
  return 0;
}

int cmd_predict(const van::RunConfig& config, const std::vector<std::string>& inputs) {
  const auto model = load_van(config.checkpoint_path);
  const auto options = config.evaluation_options();
  fs::create_directories(config.output_dir);
  for (const fs::path& image_path : collect_images(inputs)) {
    const van::Image image = van::preprocess(van::read_pgm(image_path), options.preprocess);
    const van::Prediction p = van::predict_paragraph(*model, image, options.strategy, options.l_max);
    std::ofstream out(fs::path(config.output_dir) / (image_path.stem().string() + ".txt"), std::ios::binary);
    for (const std::string& line : p.lines)
      if (!line.empty() || options.strategy != van::StopStrategy::Fixed) out << line << "\n";
    std::cout << image_path.stem().string() << "\t" << p.line_count << " lines\t" << p.text << "\n";
  }
  return 0;
}

int cmd_attention(const van::RunConfig& config, const std::vector<std::string>& inputs, bool heatmaps) {
  const auto model = load_van(config.checkpoint_path);
  const auto options = config.evaluation_options();
  fs::create_directories(config.output_dir);
  constexpr std::size_t kRowScale = 32;
  for (const fs::path& image_path : collect_images(inputs)) {
    const van::Image image = van::preprocess(van::read_pgm(image_path), options.preprocess);
    const van::Prediction p = van::predict_paragraph(*model, image, options.strategy, options.l_max);
    const std::string stem = image_path.stem().string();
    std::ofstream csv(fs::path(config.output_dir) / (stem + "_attention.csv"), std::ios::binary);
    for (std::size_t t = 0; t < p.alphas.size(); ++t) {
      const van::nn::Tensor& alpha = p.alphas[t];
      csv << t + 1;
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        char cell[32];
        std::snprintf(cell, sizeof cell, ",%.9g", alpha[i]);
        csv << cell;
      }
      csv << "\n";
      if (!heatmaps) continue;
      const std::size_t width = image.dim(1);
      van::Image heat({alpha.size() * kRowScale, width, 1});
      for (std::size_t r = 0; r < heat.dim(0); ++r)
        for (std::size_t c = 0; c < width; ++c) heat[r * width + c] = alpha[r / kRowScale];
      char name[64];
      std::snprintf(name, sizeof name, "_step%02zu.pgm", t + 1);
      van::write_pgm(fs::path(config.output_dir) / (stem + name), heat);
    }
    std::cout << stem << "\t" << p.alphas.size() << " attention rows\t" << p.line_count << " lines\n";
  }
  return 0;
}

std::string config_key_help() {
  std::ostringstream out;
  out << "\nConfig keys (key = value; defaults shown):\n";
  for (const van::ConfigKey& k : van::config_keys()) {
    std::string shown = k.default_value.empty() ? "\"\"" : k.default_value;
    out << "  " << k.name << " = " << shown << "\n      " << k.description << "\n";
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vertical attention network for paragraph text recognition"};
  app.footer(config_key_help());
  app.require_subcommand(1);

  std::size_t gen_n = 20, gen_lines = 0;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  van::GeneratorConfig gen;
  auto* generate = app.add_subcommand("generate", "write a synthetic dataset (PGM images, text sidecars, manifest)");
  generate->add_option("--out", gen_out, "output directory")->required();
  generate->add_option("--n", gen_n, "number of samples")->capture_default_str();
  generate->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  generate->add_option("--lines", gen_lines, "fixed number of lines per sample; 0 samples 2-5 (1 gives 32 px tall line images)")
      ->capture_default_str();
  generate->add_option("--alphabet", gen.alphabet, "characters to draw from")->capture_default_str();
  generate->add_option("--height", gen.image_height, "image height")->capture_default_str();
  generate->add_option("--width", gen.image_width, "image width")->capture_default_str();
  generate->add_option("--skew", gen.skew_degrees, "maximum per-line shear in degrees")->capture_default_str();
  generate->add_option("--noise", gen.noise_std, "gaussian noise standard deviation")->capture_default_str();

  ConfigOptions pretrain_opts, train_opts, eval_opts, predict_opts, attention_opts;
  auto* pretrain = app.add_subcommand("pretrain", "train the line-level model on single-line samples");
  pretrain_opts.attach(*pretrain);
  auto* train = app.add_subcommand("train", "train the paragraph model");
  train_opts.attach(*train);
  std::string hyp_dir;
  auto* eval = app.add_subcommand("eval", "report CER, WER and d_mean on a dataset");
  eval_opts.attach(*eval);
  eval->add_option("--hyp-dir", hyp_dir, "score existing <name>.txt predictions instead of running the model");
  std::vector<std::string> predict_inputs, attention_inputs;
  auto* predict = app.add_subcommand("predict", "write one transcription per image");
  predict_opts.attach(*predict);
  predict->add_option("inputs", predict_inputs, "PGM images or directories")->required();
  bool heatmaps = true;
  auto* attention = app.add_subcommand("attention", "export attention weights as CSV and heatmap images");
  attention_opts.attach(*attention);
  attention->add_option("inputs", attention_inputs, "PGM images or directories")->required();
  attention->add_flag("!--no-heatmaps", heatmaps, "write only the CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*generate) return cmd_generate(gen_out, gen_n, gen_seed, gen_lines, gen);
    if (*pretrain) return cmd_pretrain(pretrain_opts.resolve());
    if (*train) return cmd_train(train_opts.resolve());
    if (*eval) return cmd_eval(eval_opts.resolve(), hyp_dir);
    if (*predict) return cmd_predict(predict_opts.resolve(), predict_inputs);
    if (*attention) return cmd_attention(attention_opts.resolve(), attention_inputs, heatmaps);
  } catch (const van::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const van::DatasetError& e) {
    std::cerr << "data error:\n";
    for (const auto& problem : e.problems()) std::cerr << "  " << problem << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
