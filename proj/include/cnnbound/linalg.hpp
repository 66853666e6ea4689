#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cnnbound/tensor.hpp"

namespace cnnbound {

RealMatrix matmul(const RealMatrix& a, const RealMatrix& b);
ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
RealMatrix transpose(const RealMatrix& a);
ComplexMatrix adjoint(const ComplexMatrix& a);
std::vector<double> matvec(const RealMatrix& a, std::span<const double> x);

double frobenius(const RealMatrix& a) noexcept;
double frobenius(const ComplexMatrix& a) noexcept;
double max_column_norm(const RealMatrix& a) noexcept;

/// Sum over columns of the column Euclidean norms.
double norm_21(const RealMatrix& a) noexcept;

/// Largest singular value.
///
/// Runs power iteration on the Gram matrix of the smaller side. For Gram
/// matrices up to `kSquaringLimit` rows the iteration is applied to repeated
/// squares of the Gram matrix, which reaches the dominant eigenspace even when
/// the top two singular values are nearly tied; the value is then read off as a
/// Rayleigh quotient of the original Gram matrix. Larger inputs use vector
/// iteration with a residual stopping rule (tolerance 1e-12, at most 10'000
/// steps).
double spectral_norm(const RealMatrix& a);
double spectral_norm(const ComplexMatrix& a);

inline constexpr std::size_t kSquaringLimit = 384;
inline constexpr double kPowerTolerance = 1e-12;
inline constexpr int kPowerMaxIterations = 10'000;

/// Two-dimensional DFT as the congruence F^T A F with F(i, j) = w^(i j) and
/// w = exp(2 pi i / d): out(u, v) = sum_{p,q} w^(u p + v q) A(p, q).
ComplexMatrix dft2(const RealMatrix& slice);

/// The d x d matrix F(i, j) = exp(2 pi i * i j / d).
ComplexMatrix dft_matrix(std::size_t d);

/// Sylvester Hadamard matrix of order D = 2^t.
RealMatrix hadamard_sylvester(std::size_t order);

double euclidean_norm(std::span<const double> v) noexcept;

} // namespace cnnbound
