#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "van/nn/ops.hpp"
#include "van/parameters.hpp"

namespace van {

/// Ordered character set; the CTC blank is the extra class at index size().
class Alphabet {
 public:
  Alphabet() = default;
  /// One symbol per code point. Throws on duplicates.
  explicit Alphabet(std::u32string symbols);
  static Alphabet from_utf8(std::string_view symbols);

  std::size_t size() const { return symbols_.size(); }
  std::size_t blank() const { return symbols_.size(); }
  std::size_t classes() const { return symbols_.size() + 1; }
  const std::u32string& symbols() const { return symbols_; }
  std::string utf8() const;

  bool contains(char32_t symbol) const;
  std::size_t index_of(char32_t symbol) const;
  /// Throws std::invalid_argument naming the first character outside the alphabet.
  std::vector<std::size_t> encode(std::string_view utf8_text) const;
  std::string decode(const std::vector<std::size_t>& labels) const;

 private:
  std::u32string symbols_;
};

struct DecoderOutput {
  nn::Var log_probs;  // (W_f, N+1), log of the per-frame softmax
  nn::LstmState state;
};

class Decoder {
 public:
  Decoder(std::size_t c_f, std::size_t c_h, std::size_t classes, ParameterStore& store, Rng& init_rng,
          const std::string& prefix = "decoder.");

  std::size_t hidden_size() const { return c_h_; }
  nn::LstmState initial_state() const;

  /// LSTM over the frames of l_t (W_f, C_f) from `state`, then a per-frame
  /// projection to N+1 classes.
  DecoderOutput decode_line(const nn::Var& line_features, const nn::LstmState& state) const;

 private:
  std::size_t c_h_;
  nn::LstmParams lstm_;
  nn::Var output_weight_;
  nn::Var output_bias_;
};

/// Per-frame argmax (lowest index on ties), then the CTC collapse.
std::vector<std::size_t> best_path_labels(const nn::Tensor& lattice);
std::string best_path_decode(const nn::Tensor& lattice, const Alphabet& alphabet);

/// Joins lines with single spaces and post-processes the result.
std::string assemble_paragraph(const std::vector<std::string>& lines);

}  // namespace van
