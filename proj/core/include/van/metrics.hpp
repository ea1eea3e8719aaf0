#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace van {

/// Unit-cost edit distance between two sequences.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t substitute = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, substitute});
      diag = up;
    }
  }
  return row[b.size()];
}

/// Character-level distance on code points.
std::size_t levenshtein_utf8(std::string_view a, std::string_view b);

/// (hypothesis, ground truth)
using TextPair = std::pair<std::string, std::string>;

/// Edit distance summed over the corpus divided by the total ground-truth
/// length. Throws when the ground truth is empty.
double cer(const std::vector<TextPair>& pairs);

bool is_punctuation(char32_t code_point);

/// Whitespace split, then every punctuation character becomes its own token.
std::vector<std::string> tokenize_words(std::string_view text);

double wer(const std::vector<TextPair>& pairs);

/// Mean |n_true - n_predicted|. Throws on an empty list.
double d_mean(const std::vector<std::pair<std::size_t, std::size_t>>& counts);

struct EvalReport {
  double cer = 0.0;
  double wer = 0.0;
  double d_mean = 0.0;
  std::size_t n_samples = 0;
  std::size_t total_gt_chars = 0;

  /// Single-line JSON record.
  std::string to_json() const;
  /// Short aligned table for terminals.
  std::string to_table() const;
};

/// `line_counts` holds (true, predicted) per sample in the same order as `pairs`.
EvalReport evaluate(const std::vector<TextPair>& pairs,
                    const std::vector<std::pair<std::size_t, std::size_t>>& line_counts);

}  // namespace van
