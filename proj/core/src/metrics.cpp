#include "van/metrics.hpp"

#include <cstdio>
#include <stdexcept>

#include "json.hpp"

#include "van/text.hpp"

namespace van {

namespace {

struct CodeRange {
  char32_t first;
  char32_t last;
};

constexpr CodeRange kPunctuation[] = {
#include "punctuation_table.inc"
};

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f' || c == 0x00A0 ||
         c == 0x3000;
}

template <typename Tokenize>
double pooled_error_rate(const std::vector<TextPair>& pairs, Tokenize tokenize, const char* what) {
  std::size_t edits = 0, total = 0;
  for (const auto& [hyp, gt] : pairs) {
    const auto h = tokenize(hyp);
    const auto g = tokenize(gt);
    edits += levenshtein(h, g);
    total += g.size();
  }
  if (total == 0) throw std::invalid_argument(std::string(what) + ": total ground-truth length is zero");
  return static_cast<double>(edits) / static_cast<double>(total);
}

}  // namespace

std::size_t levenshtein_utf8(std::string_view a, std::string_view b) {
  return levenshtein(utf8_to_u32(a), utf8_to_u32(b));
}

double cer(const std::vector<TextPair>& pairs) {
  return pooled_error_rate(pairs, [](const std::string& s) { return utf8_to_u32(s); }, "cer");
}

bool is_punctuation(char32_t code_point) {
  const auto* end = std::end(kPunctuation);
  const auto* it = std::upper_bound(std::begin(kPunctuation), end, code_point,
                                    [](char32_t c, const CodeRange& r) { return c < r.first; });
  return it != std::begin(kPunctuation) && code_point <= (it - 1)->last;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> tokens;
  std::u32string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(u32_to_utf8(current));
    current.clear();
  };
  for (char32_t c : utf8_to_u32(text)) {
    if (is_space(c)) {
      flush();
    } else if (is_punctuation(c)) {
      flush();
      tokens.push_back(utf8_encode(c));
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

double wer(const std::vector<TextPair>& pairs) {
  return pooled_error_rate(pairs, [](const std::string& s) { return tokenize_words(s); }, "wer");
}

double d_mean(const std::vector<std::pair<std::size_t, std::size_t>>& counts) {
  if (counts.empty()) throw std::invalid_argument("d_mean: no samples");
  double total = 0.0;
  for (const auto& [truth, predicted] : counts) {
    total += truth > predicted ? static_cast<double>(truth - predicted) : static_cast<double>(predicted - truth);
  }
  return total / static_cast<double>(counts.size());
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["cer"] = cer;
  j["wer"] = wer;
  j["d_mean"] = d_mean;
  j["n_samples"] = n_samples;
  j["total_gt_chars"] = total_gt_chars;
  return j.dump();
}

std::string EvalReport::to_table() const {
  char buffer[256];
  std::snprintf(buffer, sizeof buffer,
                "samples  %zu\ngt chars %zu\nCER      %.4f%%\nWER      %.4f%%\nd_mean   %.4f\n", n_samples,
                total_gt_chars, 100.0 * cer, 100.0 * wer, d_mean);
  return buffer;
}

EvalReport evaluate(const std::vector<TextPair>& pairs,
                    const std::vector<std::pair<std::size_t, std::size_t>>& line_counts) {
  if (pairs.size() != line_counts.size()) throw std::invalid_argument("evaluate: pairs and line counts differ in size");
  EvalReport report;
  report.cer = cer(pairs);
  report.wer = wer(pairs);
  report.d_mean = d_mean(line_counts);
  report.n_samples = pairs.size();
  for (const auto& pair : pairs) report.total_gt_chars += utf8_to_u32(pair.second).size();
  return report;
}

}  // namespace van
