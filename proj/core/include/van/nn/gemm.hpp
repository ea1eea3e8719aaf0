#pragma once

#include <cstddef>

namespace van::nn {

/// Arithmetic used inside matrix products. Tensors always store doubles;
/// Float32 only narrows the operands handed to BLAS.
enum class GemmPrecision { Float64, Float32 };

GemmPrecision gemm_precision();
void set_gemm_precision(GemmPrecision precision);

class GemmPrecisionGuard {
 public:
  explicit GemmPrecisionGuard(GemmPrecision precision);
  ~GemmPrecisionGuard();
  GemmPrecisionGuard(const GemmPrecisionGuard&) = delete;
  GemmPrecisionGuard& operator=(const GemmPrecisionGuard&) = delete;

 private:
  GemmPrecision previous_;
};

/// Row-major C = alpha * op(A) * op(B) + beta * C with op(A): m x k, op(B): k x n.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double beta, double* c);
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
          const float* b, float beta, float* c);

}  // namespace van::nn
