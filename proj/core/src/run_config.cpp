#include "van/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace van {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": not a valid number: '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  std::string s = out.str();
  // Shortest representation that round-trips.
  for (int p = 1; p <= 17; ++p) {
    std::ostringstream shorter;
    shorter.precision(p);
    shorter << v;
    if (std::stod(shorter.str()) == v) return shorter.str();
  }
  return s;
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

struct Field {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> assign;
  std::function<std::string(const RunConfig&)> show;
};

#define VAN_STRING_FIELD(name, doc) \
  {{#name, "", doc}, [](RunConfig& c, const std::string& v) { c.name = v; }, [](const RunConfig& c) { return c.name; }}
#define VAN_SIZE_FIELD(name, doc)                                                                      \
  {{#name, "", doc}, [](RunConfig& c, const std::string& v) { c.name = parse_number<std::size_t>(#name, v); }, \
   [](const RunConfig& c) { return std::to_string(c.name); }}
#define VAN_U64_FIELD(name, doc)                                                                          \
  {{#name, "", doc}, [](RunConfig& c, const std::string& v) { c.name = parse_number<std::uint64_t>(#name, v); }, \
   [](const RunConfig& c) { return std::to_string(c.name); }}
#define VAN_DOUBLE_FIELD(name, doc)                                                                 \
  {{#name, "", doc}, [](RunConfig& c, const std::string& v) { c.name = parse_number<double>(#name, v); }, \
   [](const RunConfig& c) { return format_double(c.name); }}
#define VAN_BOOL_FIELD(name, doc)                                                          \
  {{#name, "", doc}, [](RunConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }, \
   [](const RunConfig& c) { return format_bool(c.name); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f{
        VAN_STRING_FIELD(preset, "model size: paper or desk"),
        VAN_STRING_FIELD(alphabet_path, "UTF-8 file listing the charset; empty uses the dataset manifest"),
        {{"stop_strategy", "", "fixed, early or learned"},
         [](RunConfig& c, const std::string& v) {
           try {
             c.stop_strategy = parse_stop_strategy(v);
           } catch (const std::invalid_argument& e) {
             throw ConfigError(std::string("stop_strategy: ") + e.what());
           }
         },
         [](const RunConfig& c) { return std::string(to_string(c.stop_strategy)); }},
        VAN_SIZE_FIELD(l_max, "maximum number of line iterations"),
        VAN_DOUBLE_FIELD(lambda, "weight of the end-of-paragraph cross-entropy"),
        VAN_DOUBLE_FIELD(dropout_p_std, "standard dropout probability"),
        VAN_DOUBLE_FIELD(dropout_p_spatial, "spatial dropout probability"),
        VAN_DOUBLE_FIELD(dropout_mode_prob, "chance of choosing standard over spatial dropout"),
        VAN_DOUBLE_FIELD(lr, "Adam learning rate"),
        VAN_DOUBLE_FIELD(adam_beta1, "Adam first moment decay"),
        VAN_DOUBLE_FIELD(adam_beta2, "Adam second moment decay"),
        VAN_DOUBLE_FIELD(adam_eps, "Adam epsilon"),
        VAN_DOUBLE_FIELD(grad_clip, "global gradient norm clip, 0 disables"),
        VAN_SIZE_FIELD(batch_size, "samples per optimizer step"),
        VAN_SIZE_FIELD(max_steps, "optimizer steps to run"),
        VAN_U64_FIELD(seed, "seed for shuffling, dropout and augmentation"),
        VAN_U64_FIELD(init_seed, "seed for parameter initialization"),
        VAN_STRING_FIELD(train_dir, "training dataset directory"),
        VAN_STRING_FIELD(eval_dir, "evaluation dataset directory"),
        VAN_STRING_FIELD(checkpoint_path, "checkpoint written by training, read by eval/predict/attention"),
        VAN_STRING_FIELD(init_checkpoint, "line-model checkpoint to transfer weights from before training"),
        VAN_STRING_FIELD(loss_csv, "per-step loss CSV; empty writes next to the checkpoint"),
        VAN_STRING_FIELD(output_dir, "directory for predict and attention outputs"),
        VAN_SIZE_FIELD(log_every, "print a progress line every N steps, 0 silences"),
        VAN_BOOL_FIELD(augment, "apply data augmentation during training"),
        VAN_BOOL_FIELD(downscale, "halve input resolution before padding"),
        VAN_STRING_FIELD(precision, "training GEMM precision: f32 or f64"),
        VAN_BOOL_FIELD(line_break_as_space, "join lines with a space when scoring; false joins them directly"),
    };
    const RunConfig defaults;
    for (Field& field : f) field.key.default_value = field.show(defaults);
    return f;
  }();
  return table;
}

#undef VAN_STRING_FIELD
#undef VAN_SIZE_FIELD
#undef VAN_U64_FIELD
#undef VAN_DOUBLE_FIELD
#undef VAN_BOOL_FIELD

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const Field& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key.name == key) {
      f.assign(*this, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

void RunConfig::validate() const {
  try {
    ModelConfig::from_preset(preset);
    model_config().validate();
    train_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (precision != "f32" && precision != "f64") throw ConfigError("precision must be f32 or f64");
}

std::string RunConfig::echo() const {
  std::string out;
  for (const Field& f : fields()) out += f.key.name + " = " + f.show(*this) + "\n";
  return out;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m = ModelConfig::from_preset(preset);
  m.encoder.dropout.p_std = dropout_p_std;
  m.encoder.dropout.p_spatial = dropout_p_spatial;
  m.encoder.dropout.mode_prob = dropout_mode_prob;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.adam = AdamConfig{lr, adam_beta1, adam_beta2, adam_eps, grad_clip};
  t.batch_size = batch_size;
  t.max_steps = max_steps;
  t.seed = seed;
  t.stop = StopConfig{stop_strategy, l_max, lambda};
  t.augment = augment;
  t.preprocess = ModelConfig::from_preset(preset).preprocess(downscale);
  t.precision = precision == "f64" ? nn::GemmPrecision::Float64 : nn::GemmPrecision::Float32;
  return t;
}

EvaluationOptions RunConfig::evaluation_options() const {
  EvaluationOptions e;
  e.strategy = stop_strategy;
  e.l_max = l_max;
  e.preprocess = ModelConfig::from_preset(preset).preprocess(downscale);
  e.line_break_as_space = line_break_as_space;
  return e;
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::string> seen;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) throw ConfigError(where + "duplicate key '" + key + "'");
    seen.push_back(key);
    try {
      config.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.string());
}

std::string make_checkpoint_echo(const std::string& kind, const Alphabet& alphabet, const RunConfig& run) {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["alphabet"] = alphabet.utf8();
  j["config"] = run.echo();
  return j.dump();
}

CheckpointMeta parse_checkpoint_echo(const std::string& echo) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(echo);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  if (!j.contains("kind") || !j.contains("alphabet") || !j.contains("config")) {
    throw ConfigError("checkpoint metadata lacks kind/alphabet/config");
  }
  return {j["kind"].get<std::string>(), j["alphabet"].get<std::string>(),
          parse_run_config(j["config"].get<std::string>(), "checkpoint")};
}

}  // namespace van
