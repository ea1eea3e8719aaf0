#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "support/oracles.hpp"
#include "support/tiny_model.hpp"
#include "van/checkpoint.hpp"
#include "van/model.hpp"
#include "van/optim.hpp"

namespace van {
namespace {

namespace fs = std::filesystem;
using nn::Tensor;
using nn::Var;
using van::testing::random_tensor;
using van::testing::tiny_model_config;

fs::path scratch_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "van_test_model";
  fs::create_directories(dir);
  return dir / name;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

TEST(ModelConfig, Presets) {
  EXPECT_EQ(ModelConfig::from_preset("paper").encoder.c_f, 256u);
  EXPECT_EQ(ModelConfig::from_preset("desk").encoder.c_f, 128u);
  EXPECT_THROW(ModelConfig::from_preset("huge"), std::invalid_argument);
  const PreprocessConfig p = ModelConfig::desk().preprocess();
  EXPECT_EQ(p.min_height, 160u);
  EXPECT_EQ(p.min_width, 256u);
  ModelConfig bad = ModelConfig::desk();
  bad.attention.c_f = 64;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Model, ParameterNamesAreStable) {
  const Alphabet alphabet = Alphabet::from_utf8("ab");
  VanModel van(tiny_model_config(), alphabet, 1);
  const auto names = van.parameters().names();
  auto has = [&](const std::string& n) { return std::find(names.begin(), names.end(), n) != names.end(); };
  EXPECT_EQ(names.front().rfind("encoder.", 0), 0u);
  EXPECT_TRUE(has("attention.stop.weight"));
  EXPECT_TRUE(has("decoder.output.weight"));
  EXPECT_TRUE(has("decoder.lstm.w_input"));
}

TEST(Model, SameSeedSameWeights) {
  const Alphabet alphabet = Alphabet::from_utf8("ab");
  VanModel a(tiny_model_config(), alphabet, 5), b(tiny_model_config(), alphabet, 5), c(tiny_model_config(), alphabet, 6);
  bool all_same = true, any_diff = false;
  for (std::size_t i = 0; i < a.parameters().items().size(); ++i) {
    all_same &= bit_equal(a.parameters().items()[i].second.value(), b.parameters().items()[i].second.value());
    any_diff |= !bit_equal(a.parameters().items()[i].second.value(), c.parameters().items()[i].second.value());
  }
  EXPECT_TRUE(all_same);
  EXPECT_TRUE(any_diff);
}

TEST(LineModel, OutputIsPerFrameLogDistribution) {
  const Alphabet alphabet = Alphabet::from_utf8("abc");
  LineModel line(tiny_model_config(), alphabet, 3);
  std::mt19937_64 rng(1);
  const Var out = line.forward(Var(random_tensor({32, 48, 1}, rng, 0.0, 1.0)), Mode::Eval, nullptr);
  ASSERT_EQ(out.shape(), (nn::Shape{6, 4}));
  for (std::size_t f = 0; f < 6; ++f) {
    double total = 0.0;
    for (std::size_t k = 0; k < 4; ++k) total += std::exp(out.value().at(f, k));
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(TransferWeights, CopiesEncoderAndOutputProjection) {
  const Alphabet alphabet = Alphabet::from_utf8("abc");
  LineModel line(tiny_model_config(), alphabet, 11);
  VanModel van(tiny_model_config(), alphabet, 12);
  const Tensor lstm_before = van.parameters().get("decoder.lstm.w_input").value();
  transfer_weights(line, van);

  std::mt19937_64 rng(2);
  const Tensor image = random_tensor({64, 32, 1}, rng, 0.0, 1.0);
  nn::NoGradGuard no_grad;
  const Tensor from_line = line.encoder().encode(Var(image), Mode::Eval, nullptr).value();
  const Tensor from_van = van.encoder().encode(Var(image), Mode::Eval, nullptr).value();
  EXPECT_TRUE(bit_equal(from_line, from_van));
  EXPECT_TRUE(bit_equal(line.parameters().get("output.weight").value(), van.parameters().get("decoder.output.weight").value()));
  EXPECT_TRUE(bit_equal(line.parameters().get("output.bias").value(), van.parameters().get("decoder.output.bias").value()));
  EXPECT_TRUE(bit_equal(lstm_before, van.parameters().get("decoder.lstm.w_input").value()));
}

TEST(TransferWeights, MismatchListsNames) {
  LineModel line(tiny_model_config(), Alphabet::from_utf8("abc"), 1);
  VanModel van(tiny_model_config(), Alphabet::from_utf8("abcd"), 1);
  try {
    transfer_weights(line, van);
    FAIL() << "expected a mismatch";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("output.weight"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("output.bias"), std::string::npos);
  }
}

TEST(Checkpoint, Float64RoundTripIsBitExact) {
  const Alphabet alphabet = Alphabet::from_utf8("ab");
  VanModel source(tiny_model_config(), alphabet, 21);
  const fs::path path = scratch_file("f64.ckpt");
  save_checkpoint(path, source.parameters(), "preset = tiny\n", 77, StoredType::Float64);

  const Checkpoint loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.seed, 77u);
  EXPECT_EQ(loaded.config_echo, "preset = tiny\n");
  ASSERT_EQ(loaded.tensors.size(), source.parameters().items().size());

  VanModel target(tiny_model_config(), alphabet, 22);
  apply_checkpoint(loaded, target.parameters());
  for (const auto& [name, var] : source.parameters().items()) {
    EXPECT_TRUE(bit_equal(var.value(), target.parameters().get(name).value())) << name;
  }
  std::mt19937_64 rng(3);
  const Tensor image = random_tensor({64, 32, 1}, rng, 0.0, 1.0);
  nn::NoGradGuard no_grad;
  EXPECT_TRUE(bit_equal(source.encoder().encode(Var(image), Mode::Eval, nullptr).value(),
                        target.encoder().encode(Var(image), Mode::Eval, nullptr).value()));
}

TEST(Checkpoint, Float32RoundTripIsClose) {
  const Alphabet alphabet = Alphabet::from_utf8("ab");
  VanModel source(tiny_model_config(), alphabet, 21);
  const fs::path path = scratch_file("f32.ckpt");
  save_checkpoint(path, source.parameters(), "", 1, StoredType::Float32);
  const Checkpoint loaded = load_checkpoint(path);
  for (const auto& [name, var] : source.parameters().items()) {
    const Tensor* t = loaded.find(name);
    ASSERT_NE(t, nullptr) << name;
    for (std::size_t i = 0; i < t->size(); ++i) EXPECT_NEAR((*t)[i], var.value()[i], 1e-6 * std::max(1.0, std::abs(var.value()[i])));
  }
  EXPECT_LT(fs::file_size(path), fs::file_size(scratch_file("f64.ckpt")));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const fs::path path = scratch_file("bad.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT";
  }
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  EXPECT_THROW(load_checkpoint(scratch_file("missing.ckpt")), std::runtime_error);

  const Alphabet alphabet = Alphabet::from_utf8("ab");
  VanModel source(tiny_model_config(), alphabet, 21);
  const fs::path good = scratch_file("trunc.ckpt");
  save_checkpoint(good, source.parameters(), "", 1);
  fs::resize_file(good, fs::file_size(good) / 2);
  EXPECT_THROW(load_checkpoint(good), std::runtime_error);
}

TEST(Checkpoint, ApplyReportsMissingAndMismatched) {
  VanModel source(tiny_model_config(), Alphabet::from_utf8("ab"), 1);
  const fs::path path = scratch_file("shape.ckpt");
  save_checkpoint(path, source.parameters(), "", 1);
  VanModel other(tiny_model_config(), Alphabet::from_utf8("abc"), 1);
  try {
    apply_checkpoint(load_checkpoint(path), other.parameters());
    FAIL() << "expected a shape mismatch";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("decoder.output.weight"), std::string::npos);
  }
  ParameterStore extra;
  extra.add("not.in.checkpoint", Tensor({2}, 0.0));
  EXPECT_THROW(apply_checkpoint(load_checkpoint(path), extra), std::invalid_argument);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore store;
  Var w = store.add("w", Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
  Adam adam(store, AdamConfig{0.1});
  w.node().grad_buffer() = Tensor({3}, std::vector<double>{4.0, -0.01, 0.0});
  adam.step();
  EXPECT_NEAR(w.value()[0], 0.9, 1e-6);
  EXPECT_NEAR(w.value()[1], -1.9, 1e-4);
  EXPECT_NEAR(w.value()[2], 0.5, 1e-12);
  EXPECT_FALSE(w.has_grad());
  EXPECT_EQ(adam.steps_taken(), 1u);
}

TEST(Adam, MinimizesQuadratic) {
  ParameterStore store;
  Var w = store.add("w", Tensor({2}, std::vector<double>{3.0, -4.0}));
  Adam adam(store, AdamConfig{0.05});
  const Tensor target({2}, std::vector<double>{1.0, 2.0});
  for (int i = 0; i < 2000; ++i) {
    Var diff = nn::sub(w, nn::constant(target));
    nn::backward(nn::sum(nn::mul(diff, diff)));
    adam.step();
  }
  EXPECT_NEAR(w.value()[0], 1.0, 1e-3);
  EXPECT_NEAR(w.value()[1], 2.0, 1e-3);
}

TEST(Adam, ClippingReportsUnclippedNorm) {
  ParameterStore store;
  Var w = store.add("w", Tensor({2}, 0.0));
  AdamConfig cfg{0.1};
  cfg.grad_clip = 1.0;
  Adam adam(store, cfg);
  w.node().grad_buffer() = Tensor({2}, std::vector<double>{3.0, 4.0});
  EXPECT_NEAR(adam.step(), 5.0, 1e-12);
  AdamConfig bad;
  bad.lr = -1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace van
