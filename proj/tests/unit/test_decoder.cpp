#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "van/decoder.hpp"
#include "van/nn/grad_check.hpp"

namespace van {
namespace {

using nn::Tensor;
using nn::Var;
using van::testing::random_tensor;

Tensor exp_of(const Tensor& t) {
  Tensor out = t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return out;
}

TEST(Alphabet, BlankIsLast) {
  const Alphabet alphabet = Alphabet::from_utf8("abé");
  EXPECT_EQ(alphabet.size(), 3u);
  EXPECT_EQ(alphabet.blank(), 3u);
  EXPECT_EQ(alphabet.classes(), 4u);
  EXPECT_EQ(alphabet.encode("béa"), (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(alphabet.decode({2, 0}), "éa");
  EXPECT_THROW(alphabet.encode("abz"), std::invalid_argument);
  EXPECT_THROW(Alphabet::from_utf8("aba"), std::invalid_argument);
}

struct DecoderFixture : ::testing::Test {
  ParameterStore store;
  Rng rng{7};
  Decoder decoder{6, 5, 4, store, rng};
  std::mt19937_64 data_rng{9};
};

TEST_F(DecoderFixture, RowsAreDistributions) {
  const DecoderOutput out = decoder.decode_line(Var(random_tensor({8, 6}, data_rng)), decoder.initial_state());
  ASSERT_EQ(out.log_probs.shape(), (nn::Shape{8, 4}));
  const Tensor probs = exp_of(out.log_probs.value());
  for (std::size_t t = 0; t < 8; ++t) {
    double row = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_GE(probs.at(t, k), 0.0);
      row += probs.at(t, k);
    }
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
  EXPECT_EQ(out.state.h.size(), 5u);
}

TEST_F(DecoderFixture, ZeroProjectionGivesUniform) {
  store.get("decoder.output.weight").mutable_value().fill(0.0);
  const DecoderOutput out = decoder.decode_line(Var(random_tensor({3, 6}, data_rng)), decoder.initial_state());
  const Tensor probs = exp_of(out.log_probs.value());
  for (std::size_t i = 0; i < probs.size(); ++i) EXPECT_NEAR(probs[i], 0.25, 1e-15);
}

TEST_F(DecoderFixture, StateCarriesAcrossLines) {
  const Var first(random_tensor({5, 6}, data_rng));
  const Var second(random_tensor({5, 6}, data_rng));
  const DecoderOutput a = decoder.decode_line(first, decoder.initial_state());
  const DecoderOutput carried = decoder.decode_line(second, a.state);
  const DecoderOutput reset = decoder.decode_line(second, decoder.initial_state());
  EXPECT_GT(nn::max_abs_diff(carried.log_probs.value(), reset.log_probs.value()), 1e-6);
  // Deterministic.
  EXPECT_EQ(decoder.decode_line(second, a.state).log_probs.value(), carried.log_probs.value());
}

TEST_F(DecoderFixture, MatchesScalarLstmOracle) {
  const Tensor x = random_tensor({4, 6}, data_rng);
  const DecoderOutput out = decoder.decode_line(Var(x), decoder.initial_state());
  Tensor h({5}, 0.0), c({5}, 0.0);
  const Tensor& w_out = store.get("decoder.output.weight").value();
  const Tensor& b_out = store.get("decoder.output.bias").value();
  for (std::size_t t = 0; t < 4; ++t) {
    Tensor xt({6});
    for (std::size_t i = 0; i < 6; ++i) xt[i] = x.at(t, i);
    Tensor h2, c2;
    van::testing::naive_lstm_step(xt, h, c, store.get("decoder.lstm.w_input").value(),
                                  store.get("decoder.lstm.w_hidden").value(), store.get("decoder.lstm.bias").value(), h2,
                                  c2);
    h = h2, c = c2;
    double logits[4], z = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      logits[k] = b_out[k];
      for (std::size_t i = 0; i < 5; ++i) logits[k] += h[i] * w_out.at(i, k);
      z += std::exp(logits[k]);
    }
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(out.log_probs.value().at(t, k), logits[k] - std::log(z), 1e-12);
  }
  EXPECT_LE(nn::max_abs_diff(out.state.h.value(), h), 1e-12);
  EXPECT_LE(nn::max_abs_diff(out.state.c.value(), c), 1e-12);
}

TEST_F(DecoderFixture, GradientCheck) {
  const Var x(random_tensor({3, 6}, data_rng));
  const Tensor probe = random_tensor({3, 4}, data_rng);
  auto loss = [&] { return nn::sum(nn::mul(decoder.decode_line(x, decoder.initial_state()).log_probs, Var(probe))); };
  for (const auto& check : nn::grad_check_parameters(loss, store.items())) {
    EXPECT_LE(check.max_relative_error, 1e-4) << check.name;
  }
}

TEST(BestPath, HandCases) {
  const Alphabet alphabet = Alphabet::from_utf8("ab");
  auto one_hot_lattice = [](std::vector<std::size_t> path) {
    Tensor t({path.size(), 3}, 0.1);
    for (std::size_t i = 0; i < path.size(); ++i) t.at(i, path[i]) = 0.8;
    return t;
  };
  EXPECT_EQ(best_path_decode(one_hot_lattice({0, 0, 2, 1}), alphabet), "ab");
  EXPECT_EQ(best_path_decode(one_hot_lattice({2, 2, 2}), alphabet), "");
  EXPECT_EQ(best_path_decode(one_hot_lattice({0, 2, 0}), alphabet), "aa");
  // Tie between a and blank goes to the lower index.
  EXPECT_EQ(best_path_decode(Tensor({1, 3}, std::vector<double>{0.4, 0.2, 0.4}), alphabet), "a");
}

TEST(BestPath, RandomLatticesAgainstOracle) {
  const Alphabet alphabet = Alphabet::from_utf8("xyz");
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t frames = 1 + rng() % 12;
    const Tensor lattice = van::testing::random_distribution_rows(frames, 4, rng);
    std::string expected;
    std::size_t previous = 99;
    for (std::size_t t = 0; t < frames; ++t) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < 4; ++k)
        if (lattice.at(t, k) > lattice.at(t, best)) best = k;
      if (best != previous && best != 3) expected += "xyz"[best];
      previous = best;
    }
    const std::string got = best_path_decode(lattice, alphabet);
    EXPECT_EQ(got, expected);
    EXPECT_LE(got.size(), frames);
  }
}

TEST(AssembleParagraph, JoinsAndPostprocesses) {
  EXPECT_EQ(assemble_paragraph({"ab", "cd"}), "ab cd");
  EXPECT_EQ(assemble_paragraph({"ab", "", "cd"}), "ab cd");
  EXPECT_EQ(assemble_paragraph({}), "");
  EXPECT_EQ(assemble_paragraph({"", ""}), "");
}

}  // namespace
}  // namespace van
