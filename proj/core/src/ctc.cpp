#include "van/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace van::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

struct Lattice {
  std::size_t frames;
  std::size_t classes;
  std::size_t blank;
  const double* log_probs;
  double at(std::size_t t, std::size_t k) const { return log_probs[t * classes + k]; }
};

Lattice view(const nn::Tensor& log_probs, const Labels& target) {
  if (log_probs.rank() != 2) throw std::invalid_argument("ctc: log_probs must be (T, N+1)");
  Lattice lat{log_probs.dim(0), log_probs.dim(1), log_probs.dim(1) - 1, log_probs.data().data()};
  for (std::size_t label : target) {
    if (label >= lat.blank) throw std::invalid_argument("ctc: target label " + std::to_string(label) + " out of range");
  }
  if (min_frames(target) > lat.frames) {
    throw InfeasibleTarget("target too long for lattice: needs " + std::to_string(min_frames(target)) +
                           " frames, have " + std::to_string(lat.frames));
  }
  return lat;
}

Labels interleave(const Labels& target, std::size_t blank) {
  Labels ext(2 * target.size() + 1, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

// Forward variables include the emission at t.
std::vector<double> forward_table(const Lattice& lat, const Labels& ext) {
  const std::size_t s_n = ext.size();
  std::vector<double> alpha(lat.frames * s_n, kNegInf);
  alpha[0] = lat.at(0, ext[0]);
  if (s_n > 1) alpha[1] = lat.at(0, ext[1]);
  for (std::size_t t = 1; t < lat.frames; ++t) {
    for (std::size_t s = 0; s < s_n; ++s) {
      double acc = alpha[(t - 1) * s_n + s];
      if (s >= 1) acc = log_add(acc, alpha[(t - 1) * s_n + s - 1]);
      if (s >= 2 && ext[s] != lat.blank && ext[s] != ext[s - 2]) acc = log_add(acc, alpha[(t - 1) * s_n + s - 2]);
      alpha[t * s_n + s] = acc == kNegInf ? kNegInf : acc + lat.at(t, ext[s]);
    }
  }
  return alpha;
}

// Backward variables also include the emission at t.
std::vector<double> backward_table(const Lattice& lat, const Labels& ext) {
  const std::size_t s_n = ext.size();
  const std::size_t last = lat.frames - 1;
  std::vector<double> beta(lat.frames * s_n, kNegInf);
  beta[last * s_n + s_n - 1] = lat.at(last, ext[s_n - 1]);
  if (s_n > 1) beta[last * s_n + s_n - 2] = lat.at(last, ext[s_n - 2]);
  for (std::size_t t = last; t-- > 0;) {
    for (std::size_t s = 0; s < s_n; ++s) {
      double acc = beta[(t + 1) * s_n + s];
      if (s + 1 < s_n) acc = log_add(acc, beta[(t + 1) * s_n + s + 1]);
      if (s + 2 < s_n && ext[s] != lat.blank && ext[s] != ext[s + 2]) acc = log_add(acc, beta[(t + 1) * s_n + s + 2]);
      beta[t * s_n + s] = acc == kNegInf ? kNegInf : acc + lat.at(t, ext[s]);
    }
  }
  return beta;
}

double total_log_likelihood(const Lattice& lat, const Labels& ext, const std::vector<double>& alpha) {
  const std::size_t s_n = ext.size();
  const std::size_t last = lat.frames - 1;
  double ll = alpha[last * s_n + s_n - 1];
  if (s_n > 1) ll = log_add(ll, alpha[last * s_n + s_n - 2]);
  return ll;
}

}  // namespace

Labels collapse(const Labels& path, std::size_t blank) {
  Labels out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0 && path[i] == path[i - 1]) continue;
    if (path[i] != blank) out.push_back(path[i]);
  }
  return out;
}

std::size_t min_frames(const Labels& target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

double loss_value(const nn::Tensor& log_probs, const Labels& target) {
  const Lattice lat = view(log_probs, target);
  const Labels ext = interleave(target, lat.blank);
  const double ll = total_log_likelihood(lat, ext, forward_table(lat, ext));
  if (ll == kNegInf) throw InfeasibleTarget("no valid path: target has zero probability");
  return -ll;
}

nn::Var loss(const nn::Var& log_probs, const Labels& target) {
  const Lattice lat = view(log_probs.value(), target);
  const Labels ext = interleave(target, lat.blank);
  std::vector<double> alpha = forward_table(lat, ext);
  const double ll = total_log_likelihood(lat, ext, alpha);
  if (ll == kNegInf) throw InfeasibleTarget("no valid path: target has zero probability");
  return nn::make_op(nn::Tensor::scalar(-ll), {log_probs},
                     [ext, alpha = std::move(alpha), ll](nn::detail::Node& self) {
                       nn::detail::Node& parent = *self.parents[0];
                       const nn::Tensor& lp = parent.value;
                       const Lattice lat{lp.dim(0), lp.dim(1), lp.dim(1) - 1, lp.data().data()};
                       const std::vector<double> beta = backward_table(lat, ext);
                       const std::size_t s_n = ext.size();
                       nn::Tensor& g = parent.grad_buffer();
                       const double scale = self.grad[0];
                       // d(-ll)/d log p_t(k) = -sum_{s: ext[s]=k} alpha_t(s) beta_t(s) / p_t(k) / exp(ll)
                       std::vector<double> occupancy(lat.classes);
                       for (std::size_t t = 0; t < lat.frames; ++t) {
                         std::fill(occupancy.begin(), occupancy.end(), kNegInf);
                         for (std::size_t s = 0; s < s_n; ++s) {
                           const double a = alpha[t * s_n + s], b = beta[t * s_n + s];
                           if (a == kNegInf || b == kNegInf) continue;
                           occupancy[ext[s]] = log_add(occupancy[ext[s]], a + b - lat.at(t, ext[s]));
                         }
                         for (std::size_t k = 0; k < lat.classes; ++k) {
                           if (occupancy[k] == kNegInf) continue;
                           g[t * lat.classes + k] -= scale * std::exp(occupancy[k] - ll);
                         }
                       }
                     });
}

double loss_bruteforce(const nn::Tensor& log_probs, const Labels& target) {
  if (log_probs.rank() != 2) throw std::invalid_argument("ctc: log_probs must be (T, N+1)");
  const std::size_t frames = log_probs.dim(0), classes = log_probs.dim(1), blank = classes - 1;
  double paths = 1.0;
  for (std::size_t t = 0; t < frames; ++t) paths *= static_cast<double>(classes);
  if (paths > 1e7) throw std::invalid_argument("ctc brute force: more than 1e7 paths");
  Labels path(frames, 0);
  double ll = kNegInf;
  while (true) {
    if (collapse(path, blank) == target) {
      double lp = 0.0;
      for (std::size_t t = 0; t < frames; ++t) lp += log_probs[t * classes + path[t]];
      ll = log_add(ll, lp);
    }
    std::size_t pos = 0;
    while (pos < frames && ++path[pos] == classes) path[pos++] = 0;
    if (pos == frames) break;
  }
  if (ll == kNegInf) throw InfeasibleTarget("no valid path");
  return -ll;
}

}  // namespace van::ctc
