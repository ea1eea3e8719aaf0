#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "criteria.hpp"
#include "support/oracles.hpp"
#include "support/tiny_model.hpp"
#include "van/checkpoint.hpp"
#include "van/ctc.hpp"
#include "van/data.hpp"
#include "van/dropout.hpp"
#include "van/metrics.hpp"
#include "van/nn/grad_check.hpp"
#include "van/training.hpp"

namespace van::acceptance {

namespace {

namespace fs = std::filesystem;
using nn::Tensor;
using nn::Var;
using testing::random_tensor;

std::string format(const char* fmt, double a = 0, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}

double worst_of(const std::vector<nn::ParameterCheck>& checks) {
  double worst = 0.0;
  for (const auto& c : checks) worst = std::max(worst, c.max_relative_error);
  return worst;
}

std::vector<std::pair<std::string, Var>> with_prefix(const ParameterStore& store, const std::string& prefix) {
  std::vector<std::pair<std::string, Var>> out;
  for (const auto& item : store.items())
    if (item.first.rfind(prefix, 0) == 0) out.push_back(item);
  return out;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool directories_identical(const fs::path& a, const fs::path& b, std::size_t* files) {
  std::vector<fs::path> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.push_back(e.path().filename());
  for (const auto& e : fs::directory_iterator(b)) names_b.push_back(e.path().filename());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b) return false;
  for (const auto& name : names_a)
    if (read_bytes(a / name) != read_bytes(b / name)) return false;
  *files = names_a.size();
  return true;
}

}  // namespace

Outcome ctc_oracle_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> pick_n(1, 3), pick_t(1, 6), pick_u(0, 3);
  double worst = 0.0;
  std::size_t checked = 0;
  while (checked < 200) {
    const std::size_t n = pick_n(rng), frames = pick_t(rng), u = pick_u(rng);
    ctc::Labels target(u);
    for (auto& label : target) label = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    if (ctc::min_frames(target) > frames) continue;
    const Tensor probs = testing::random_distribution_rows(frames, n + 1, rng);
    const double dp = ctc::loss_value(testing::elementwise_log(probs), target);
    const double brute = -std::log(testing::enumerate_ctc_probability(probs, target));
    worst = std::max(worst, std::abs(dp - brute));
    ++checked;
  }
  // One frame, one label with probability 0.75.
  const Tensor hand({1, 2}, std::vector<double>{std::log(0.75), std::log(0.25)});
  const double hand_loss = ctc::loss_value(hand, {0});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = worst <= 1e-9 && std::abs(hand_loss - 0.287682) < 5e-7 && seconds < 60.0;
  return {pass, format("200 instances, max |dp - brute force| = %.2e; hand case %.6f; %.2f s", worst, hand_loss, seconds)};
}

Outcome gradient_suites() {
  std::mt19937_64 data(1002);
  std::ostringstream detail;
  bool pass = true;
  auto record = [&](const char* name, double err, double seconds) {
    pass = pass && err <= 1e-4 && seconds < 300.0;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s %.1e (%.1fs) ", name, err, seconds);
    detail << buf;
  };
  auto timed = [](auto fn) {
    const auto start = std::chrono::steady_clock::now();
    const double err = fn();
    return std::pair{err, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
  };

  {
    auto [err, s] = timed([&] {
      const Tensor logits = random_tensor({6, 4}, data, -2, 2);
      return nn::grad_check([](const Var& x) { return ctc::loss(nn::log_softmax(x), {0, 2, 2}); }, logits);
    });
    record("ctc", err, s);
  }

  const ModelConfig tiny = testing::tiny_model_config();
  const AttentionConfig& acfg = tiny.attention;
  ParameterStore attention_store;
  Rng init(1003);
  Attention attention(acfg, attention_store, init);
  const std::size_t h_f = 4, w_f = 4;
  {
    auto [err, s] = timed([&] {
      const Var f(random_tensor({h_f, w_f, acfg.c_f}, data));
      Tensor alpha_prev = random_tensor({h_f}, data, 0.1, 1.0);
      double total = 0.0;
      for (std::size_t i = 0; i < h_f; ++i) total += alpha_prev[i];
      for (std::size_t i = 0; i < h_f; ++i) alpha_prev[i] /= total;
      const Var coverage(random_tensor({h_f}, data, 0.1, 0.9));
      const Var hidden(random_tensor({acfg.c_h}, data, -0.5, 0.5));
      const Var probe_l(random_tensor({w_f, acfg.c_f}, data));
      const Var probe_d(random_tensor({2}, data));
      auto loss = [&] {
        AttentionState state{Var(alpha_prev), coverage, {hidden, Var(Tensor({acfg.c_h}, 0.0))}};
        const AttentionStep out = attention.step(f, attention.collapse_horizontal(f), state);
        return nn::add(nn::sum(nn::mul(out.line_features, probe_l)), nn::sum(nn::mul(out.stop_probs, probe_d)));
      };
      return worst_of(nn::grad_check_parameters(loss, attention_store.items()));
    });
    record("attention_step", err, s);
  }
  {
    auto [err, s] = timed([&] {
      const Var scores(random_tensor({h_f, acfg.c_u}, data));
      const Var hidden(random_tensor({acfg.c_h}, data, -0.5, 0.5));
      auto loss = [&] { return nn::log_clamped(nn::slice(attention.stop_head(scores, hidden), 0, 0, 1), 1e-12); };
      const double params = worst_of(nn::grad_check_parameters(loss, with_prefix(attention_store, "attention.stop.")));
      const double input = nn::grad_check(
          [&](const Var& x) { return nn::log_clamped(nn::slice(attention.stop_head(x, hidden), 0, 1, 1), 1e-12); },
          scores.value());
      return std::max(params, input);
    });
    record("stop_head", err, s);
  }

  ParameterStore encoder_store;
  Encoder encoder(tiny.encoder, encoder_store, init);
  {
    auto [err, s] = timed([&] {
      const Tensor x = random_tensor({6, 6, tiny.encoder.cb_channels[0]}, data);
      const std::size_t c = tiny.encoder.cb_channels[1];
      const Var probe(random_tensor({3, 3, c}, data));
      auto block = [&](const Var& in) { return nn::sum(nn::mul(encoder.conv_block(in, 2, Mode::Eval, nullptr), probe)); };
      const double params =
          worst_of(nn::grad_check_parameters([&] { return block(Var(x)); }, with_prefix(encoder_store, "encoder.cb2.")));
      return std::max(params, nn::grad_check(block, x));
    });
    record("cb", err, s);
  }
  {
    auto [err, s] = timed([&] {
      const std::size_t c = tiny.encoder.dscb_channels;
      const Tensor x = random_tensor({4, 5, c}, data);
      const Var probe(random_tensor({4, 5, c}, data));
      auto block = [&](const Var& in) { return nn::sum(nn::mul(encoder.dsc_block(in, 1, Mode::Eval, nullptr), probe)); };
      const double params =
          worst_of(nn::grad_check_parameters([&] { return block(Var(x)); }, with_prefix(encoder_store, "encoder.dscb1.")));
      return std::max(params, nn::grad_check(block, x));
    });
    record("dscb", err, s);
  }
  {
    auto [err, s] = timed([&] {
      const std::size_t in = 4, hidden = 3;
      ParameterStore store;
      nn::LstmParams params{store.add("wi", random_tensor({in, 4 * hidden}, data, -0.5, 0.5)),
                            store.add("wh", random_tensor({hidden, 4 * hidden}, data, -0.5, 0.5)),
                            store.add("b", random_tensor({4 * hidden}, data, -0.5, 0.5))};
      const Tensor x = random_tensor({in}, data);
      const Var h(random_tensor({hidden}, data)), c(random_tensor({hidden}, data));
      const Var probe_h(random_tensor({hidden}, data)), probe_c(random_tensor({hidden}, data));
      auto loss = [&](const Var& input) {
        const nn::LstmState next = nn::lstm_step(input, {h, c}, params);
        return nn::add(nn::sum(nn::mul(next.h, probe_h)), nn::sum(nn::mul(next.c, probe_c)));
      };
      const double p = worst_of(nn::grad_check_parameters([&] { return loss(Var(x)); }, store.items()));
      return std::max(p, nn::grad_check(loss, x));
    });
    record("lstm_step", err, s);
  }
  {
    auto [err, s] = timed([&] {
      VanModel model(tiny, Alphabet::from_utf8("abc"), 1004);
      const Tensor image = random_tensor({64, 32, 1}, data, 0.0, 1.0);
      const std::vector<ctc::Labels> targets{{0, 1}, {2}};
      StopConfig stop;
      auto loss = [&] { return paragraph_loss(model, image, targets, stop, Mode::Eval, nullptr).total; };
      return worst_of(nn::grad_check_parameters(loss, model.parameters().items(), 1e-7, 8));
    });
    record("tiny_van", err, s);
  }
  std::string text = detail.str();
  if (!text.empty()) text.pop_back();
  return {pass, "max rel err: " + text};
}

Outcome shape_contracts() {
  const ModelConfig paper = ModelConfig::paper();
  ParameterStore store;
  Rng rng(1005);
  Encoder encoder(paper.encoder, store, rng);
  std::mt19937_64 data(1006);
  nn::Shape shape;
  {
    nn::NoGradGuard no_grad;
    nn::GemmPrecisionGuard precision(nn::GemmPrecision::Float64);
    shape = encoder.encode(Var(random_tensor({480, 800, 1}, data, 0.0, 1.0)), Mode::Eval, nullptr).shape();
  }
  const auto rf = receptive_field(paper.encoder);
  const bool pass = shape == nn::Shape{15, 100, 256} && rf == std::pair<std::size_t, std::size_t>{961, 337};
  return {pass, "encode(480,800,1) -> " + nn::shape_string(shape) + "; receptive field (" + std::to_string(rf.first) +
                    ", " + std::to_string(rf.second) + ")"};
}

Outcome attention_invariants() {
  const AttentionConfig cfg = AttentionConfig::desk();
  ParameterStore store;
  Rng init(1007);
  Attention attention(cfg, store, init);
  std::mt19937_64 data(1008);
  const std::size_t h_f = 5, w_f = 32;
  double worst_sum = 0.0;
  std::size_t violations = 0;
  nn::NoGradGuard no_grad;
  for (int pass = 0; pass < 100; ++pass) {
    const Tensor f = random_tensor({h_f, w_f, cfg.c_f}, data, -3, 3);
    const Var features(f);
    const Var f_prime = attention.collapse_horizontal(features);
    AttentionState state = AttentionState::initial(h_f, cfg.c_h);
    state.decoder.h = Var(random_tensor({cfg.c_h}, data, -1, 1));
    for (int t = 0; t < 4; ++t) {
      const AttentionStep out = attention.step(features, f_prime, state);
      double total = 0.0;
      for (std::size_t i = 0; i < h_f; ++i) {
        violations += out.alpha.value()[i] < 0.0;
        total += out.alpha.value()[i];
      }
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
      const Var coverage = update_coverage(state.coverage, out.alpha);
      for (std::size_t i = 0; i < h_f; ++i) violations += coverage.value()[i] < 0.0 || coverage.value()[i] > 1.0;
      for (std::size_t w = 0; w < w_f; ++w)
        for (std::size_t c = 0; c < cfg.c_f; ++c) {
          double lo = f.at(0, w, c), hi = lo;
          for (std::size_t i = 1; i < h_f; ++i) lo = std::min(lo, f.at(i, w, c)), hi = std::max(hi, f.at(i, w, c));
          const double v = out.line_features.value().at(w, c);
          violations += v < lo - 1e-12 || v > hi + 1e-12;
        }
      state.coverage = coverage;
      state.alpha_prev = out.alpha;
      state.decoder.h = Var(random_tensor({cfg.c_h}, data, -1, 1));
    }
  }
  const bool pass = worst_sum <= 1e-6 && violations == 0;
  return {pass, format("100 passes x 4 steps; max |sum(alpha) - 1| = %.1e; bound violations %.0f", worst_sum,
                       static_cast<double>(violations))};
}

Outcome metrics_cases() {
  const std::size_t kitten = levenshtein_utf8("kitten", "sitting");
  // 1 error in 5 characters plus 0 in 15: pooled 1/20, per-sample mean (0.2 + 0) / 2.
  const std::vector<TextPair> pairs{{"abcdX", "abcde"}, {"fghijklmnopqrst", "fghijklmnopqrst"}};
  const double pooled = cer(pairs);
  const double mean_of_rates = (0.2 + 0.0) / 2.0;
  const double dm = d_mean({{3, 3}, {4, 2}, {2, 3}});
  const double dm_exact = d_mean({{5, 5}, {1, 1}});
  const bool pass = kitten == 3 && std::abs(pooled - 0.05) < 1e-12 && std::abs(mean_of_rates - 0.1) < 1e-12 &&
                    std::abs(dm - 1.0) < 1e-12 && dm_exact == 0.0;
  return {pass, "levenshtein(kitten, sitting) = " + std::to_string(kitten) +
                    format("; pooled CER %.3f vs per-sample mean %.3f; d_mean cases %.3f", pooled, mean_of_rates,
                           dm) +
                    format(" and %.3f", dm_exact)};
}

Outcome dropout_statistics() {
  const DropoutConfig cfg;
  Rng rng(1009);
  const int trials = 10000;
  const Var ones(Tensor({4, 4, 8}, 1.0));
  std::size_t std_zero = 0, std_total = 0, spatial_zero = 0, spatial_total = 0;
  for (int i = 0; i < trials; ++i) {
    const Tensor y = dropout(ones, DropoutMode::Standard, cfg.p_std, rng).value();
    for (std::size_t k = 0; k < y.size(); ++k) std_zero += y[k] == 0.0;
    std_total += y.size();
    const Tensor z = dropout(ones, DropoutMode::Spatial, cfg.p_spatial, rng).value();
    for (std::size_t c = 0; c < 8; ++c) spatial_zero += z[c] == 0.0;
    spatial_total += 8;
  }
  const double std_rate = static_cast<double>(std_zero) / std_total;
  const double spatial_rate = static_cast<double>(spatial_zero) / spatial_total;

  std::mt19937_64 data(1010);
  const Var x(random_tensor({5, 6, 4}, data));
  bool identity = true;
  for (int i = 0; i < 100; ++i) {
    identity = identity && mix_dropout(x, cfg, rng, false).value() == x.value();
    for (const Var& v : diffused_mix_dropout({x, x, x}, cfg, rng, false)) identity = identity && v.value() == x.value();
  }

  std::size_t counts[3] = {0, 0, 0};
  const Var small(Tensor({2, 2, 2}, 1.0));
  for (int i = 0; i < trials; ++i) {
    std::size_t chosen = 0;
    diffused_mix_dropout({small, small, small}, cfg, rng, true, &chosen);
    ++counts[chosen];
  }
  double worst_location = 0.0;
  for (std::size_t k = 0; k < 3; ++k)
    worst_location = std::max(worst_location, std::abs(static_cast<double>(counts[k]) / trials - 1.0 / 3.0));

  const bool pass = std::abs(std_rate - cfg.p_std) <= 0.02 && std::abs(spatial_rate - cfg.p_spatial) <= 0.02 &&
                    identity && worst_location <= 0.02;
  return {pass, format("standard %.4f (p=%.2f), ", std_rate, cfg.p_std) +
                    format("spatial %.4f (p=%.2f) over 10000 trials; ", spatial_rate, cfg.p_spatial) +
                    format("location max deviation %.4f over 3 sites; eval mode ", worst_location) +
                    (identity ? "bitwise identity" : "NOT identity")};
}

Outcome persistence() {
  const fs::path root = fs::temp_directory_path() / "van_acceptance_persistence";
  fs::remove_all(root);
  fs::create_directories(root);

  const Alphabet alphabet = Alphabet::from_utf8("0123456789");
  const ModelConfig desk = ModelConfig::desk();
  VanModel source(desk, alphabet, 1011);
  save_checkpoint(root / "model.ckpt", source.parameters(), "acceptance", 1011, StoredType::Float64);
  VanModel restored(desk, alphabet, 9999);
  apply_checkpoint(load_checkpoint(root / "model.ckpt"), restored.parameters());

  GeneratorConfig gen;
  const auto samples = generate_dataset(gen, 3, 1012);
  const Image image = preprocess(samples[0].image, desk.preprocess());
  const Prediction a = predict_paragraph(source, image, StopStrategy::Fixed, 3);
  const Prediction b = predict_paragraph(restored, image, StopStrategy::Fixed, 3);
  bool forward_equal = a.lines == b.lines && a.alphas.size() == b.alphas.size();
  for (std::size_t i = 0; forward_equal && i < a.alphas.size(); ++i) forward_equal = a.alphas[i] == b.alphas[i];
  {
    nn::NoGradGuard no_grad;
    const Tensor fa = source.encoder().encode(Var(image), Mode::Eval, nullptr).value();
    const Tensor fb = restored.encoder().encode(Var(image), Mode::Eval, nullptr).value();
    forward_equal = forward_equal && fa == fb;
  }

  const auto first = generate_dataset(gen, 20, 7);
  const auto second = generate_dataset(gen, 20, 7);
  write_dataset(root / "a", first, alphabet, &gen, 7);
  write_dataset(root / "b", second, alphabet, &gen, 7);
  std::size_t files = 0;
  const bool datasets_equal = directories_identical(root / "a", root / "b", &files);
  fs::remove_all(root);
  return {forward_equal && datasets_equal,
          std::string("f64 checkpoint round trip ") + (forward_equal ? "bit-exact" : "DIFFERS") +
              "; generate(n=20, seed=7) twice " + (datasets_equal ? "byte-identical" : "DIFFERS") + " (" +
              std::to_string(files) + " files)"};
}

}  // namespace van::acceptance
