#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "van/nn/var.hpp"

namespace van::ctc {

using Labels = std::vector<std::size_t>;

/// No alignment of the target fits in the lattice.
class InfeasibleTarget : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Merges runs of identical tokens, then removes blanks.
Labels collapse(const Labels& path, std::size_t blank);

/// Minimum lattice length for a target: its length plus one per adjacent repeat.
std::size_t min_frames(const Labels& target);

/// -ln p(target | lattice) for log_probs (T, N+1) with blank = N, via the
/// log-space forward recursion over the blank-interleaved target.
double loss_value(const nn::Tensor& log_probs, const Labels& target);

/// Same loss as a graph node; the gradient w.r.t. log_probs comes from the
/// forward-backward occupation probabilities.
nn::Var loss(const nn::Var& log_probs, const Labels& target);

/// Reference: enumerates all (N+1)^T paths. Refuses more than 1e7 paths.
double loss_bruteforce(const nn::Tensor& log_probs, const Labels& target);

}  // namespace van::ctc
