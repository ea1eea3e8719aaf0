#include "van/nn/gemm.hpp"

#include <Eigen/Core>

#include <vector>

namespace van::nn {

namespace {

thread_local GemmPrecision g_precision = GemmPrecision::Float64;

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void eigen_gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a,
                const T* b, T beta, T* c) {
  using Index = Eigen::Index;
  const auto mi = static_cast<Index>(m), ni = static_cast<Index>(n), ki = static_cast<Index>(k);
  const Eigen::Map<const RowMatrix<T>> a_map(a, trans_a ? ki : mi, trans_a ? mi : ki);
  const Eigen::Map<const RowMatrix<T>> b_map(b, trans_b ? ni : ki, trans_b ? ki : ni);
  Eigen::Map<RowMatrix<T>> c_map(c, mi, ni);
  auto multiply = [&](const auto& lhs, const auto& rhs) {
    if (beta == T(0)) {
      c_map.noalias() = alpha * (lhs * rhs);
    } else {
      if (beta != T(1)) c_map *= beta;
      c_map.noalias() += alpha * (lhs * rhs);
    }
  };
  if (trans_a && trans_b) {
    multiply(a_map.transpose(), b_map.transpose());
  } else if (trans_a) {
    multiply(a_map.transpose(), b_map);
  } else if (trans_b) {
    multiply(a_map, b_map.transpose());
  } else {
    multiply(a_map, b_map);
  }
}

}  // namespace

GemmPrecision gemm_precision() { return g_precision; }
void set_gemm_precision(GemmPrecision precision) { g_precision = precision; }

GemmPrecisionGuard::GemmPrecisionGuard(GemmPrecision precision) : previous_(g_precision) { g_precision = precision; }
GemmPrecisionGuard::~GemmPrecisionGuard() { g_precision = previous_; }

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double beta, double* c) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = beta == 0.0 ? 0.0 : beta * c[i];
    return;
  }
  if (g_precision == GemmPrecision::Float64 || m * n * k < 4096) {
    eigen_gemm(trans_a, trans_b, m, n, k, alpha, a, b, beta, c);
    return;
  }
  thread_local std::vector<float> fa, fb, fc;
  fa.assign(a, a + m * k);
  fb.assign(b, b + k * n);
  fc.resize(m * n);
  eigen_gemm(trans_a, trans_b, m, n, k, static_cast<float>(alpha), fa.data(), fb.data(), 0.0f, fc.data());
  if (beta == 0.0) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = fc[i];
  } else {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = beta * c[i] + fc[i];
  }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
          const float* b, float beta, float* c) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = beta == 0.0f ? 0.0f : beta * c[i];
    return;
  }
  eigen_gemm(trans_a, trans_b, m, n, k, alpha, a, b, beta, c);
}

}  // namespace van::nn
