#include "van/decoder.hpp"

#include <algorithm>
#include <stdexcept>

#include "van/ctc.hpp"
#include "van/text.hpp"

namespace van {

using nn::Tensor;
using nn::Var;

Alphabet::Alphabet(std::u32string symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_.find(symbols_[i], i + 1) != std::u32string::npos) {
      throw std::invalid_argument("alphabet: duplicate symbol '" + utf8_encode(symbols_[i]) + "'");
    }
  }
}

Alphabet Alphabet::from_utf8(std::string_view symbols) { return Alphabet(utf8_to_u32(symbols)); }

std::string Alphabet::utf8() const { return u32_to_utf8(symbols_); }

bool Alphabet::contains(char32_t symbol) const { return symbols_.find(symbol) != std::u32string::npos; }

std::size_t Alphabet::index_of(char32_t symbol) const {
  const std::size_t pos = symbols_.find(symbol);
  if (pos == std::u32string::npos) {
    throw std::invalid_argument("character '" + utf8_encode(symbol) + "' is not in the alphabet");
  }
  return pos;
}

std::vector<std::size_t> Alphabet::encode(std::string_view utf8_text) const {
  std::vector<std::size_t> labels;
  for (char32_t ch : utf8_to_u32(utf8_text)) labels.push_back(index_of(ch));
  return labels;
}

std::string Alphabet::decode(const std::vector<std::size_t>& labels) const {
  std::u32string out;
  for (std::size_t label : labels) {
    if (label >= symbols_.size()) throw std::out_of_range("label outside the alphabet");
    out.push_back(symbols_[label]);
  }
  return u32_to_utf8(out);
}

Decoder::Decoder(std::size_t c_f, std::size_t c_h, std::size_t classes, ParameterStore& store, Rng& init_rng,
                 const std::string& prefix)
    : c_h_(c_h) {
  if (c_f == 0 || c_h == 0 || classes < 2) throw std::invalid_argument("decoder: invalid sizes");
  Tensor bias({4 * c_h}, 0.0);
  for (std::size_t i = c_h; i < 2 * c_h; ++i) bias[i] = 1.0;
  lstm_.w_input = store.add(prefix + "lstm.w_input", fan_in_uniform({c_f, 4 * c_h}, c_f, init_rng));
  lstm_.w_hidden = store.add(prefix + "lstm.w_hidden", fan_in_uniform({c_h, 4 * c_h}, c_h, init_rng));
  lstm_.bias = store.add(prefix + "lstm.bias", std::move(bias));
  output_weight_ = store.add(prefix + "output.weight", fan_in_uniform({c_h, classes}, c_h, init_rng));
  output_bias_ = store.add(prefix + "output.bias", Tensor({classes}, 0.0));
}

nn::LstmState Decoder::initial_state() const { return {Var(Tensor({c_h_}, 0.0)), Var(Tensor({c_h_}, 0.0))}; }

DecoderOutput Decoder::decode_line(const Var& line_features, const nn::LstmState& state) const {
  auto [frames, final_state] = nn::lstm_sequence(line_features, state, lstm_);
  return {nn::log_softmax(nn::dense(frames, output_weight_, output_bias_)), final_state};
}

std::vector<std::size_t> best_path_labels(const Tensor& lattice) {
  if (lattice.rank() != 2) throw std::invalid_argument("best_path: lattice must be (T, N+1)");
  const std::size_t frames = lattice.dim(0), classes = lattice.dim(1);
  std::vector<std::size_t> path(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* row = lattice.data().data() + t * classes;
    path[t] = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
  }
  return ctc::collapse(path, classes - 1);
}

std::string best_path_decode(const Tensor& lattice, const Alphabet& alphabet) {
  if (lattice.rank() != 2 || lattice.dim(1) != alphabet.classes()) {
    throw std::invalid_argument("best_path_decode: lattice has " + nn::shape_string(lattice.shape()) +
                                " but the alphabet needs " + std::to_string(alphabet.classes()) + " classes");
  }
  return alphabet.decode(best_path_labels(lattice));
}

std::string assemble_paragraph(const std::vector<std::string>& lines) {
  std::string joined;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) joined += ' ';
    joined += lines[i];
  }
  return postprocess_text(joined);
}

}  // namespace van
