#pragma once

#include <cstddef>
#include <vector>

#include "cnnbound/tensor.hpp"

namespace cnnbound {

/// A stride-1 convolutional layer with circular (wraparound) padding acting on
/// d x d inputs. Output channel o at pixel (a, b) is
///   sum_{p,q,i} kernel(p, q, i, o) * x((a + p) mod d, (b + q) mod d, i)
/// and feature maps are vectorized as index (a * d + b) * channels + channel.
struct ConvLayerSpec {
    RealTensor4 kernel;
    std::size_t input_size = 0;
};

/// Largest admissible side of a materialized operator (rows or columns).
inline constexpr std::size_t kMaterializeLimit = 4096;

/// The c_in x c_out frequency blocks P^(u,v), indexed u * d + v, built from
/// the kernel zero-padded to d x d.
std::vector<ComplexMatrix> frequency_blocks(const RealTensor4& kernel, std::size_t d);

/// Exact spectral norm of the layer's linear map: the largest spectral norm
/// among its frequency blocks.
double operator_norm_fft(const RealTensor4& kernel, std::size_t d);
inline double operator_norm_fft(const ConvLayerSpec& layer) {
    return operator_norm_fft(layer.kernel, layer.input_size);
}

/// Dense (d^2 c_out) x (d^2 c_in) matrix of the layer.
RealMatrix materialize_operator(const RealTensor4& kernel, std::size_t d);
inline RealMatrix materialize_operator(const ConvLayerSpec& layer) {
    return materialize_operator(layer.kernel, layer.input_size);
}

/// (2,1) norm of op(A)^T - op(B)^T, evaluated on materialized operators.
double operator_21_norm(const ConvLayerSpec& a, const ConvLayerSpec& b);

/// Same value as operator_21_norm without materializing: row (a, b, o) of
/// op(J) holds each entry of J(:, :, :, o) exactly once, so the norm is
/// d^2 * sum_o ||J(:, :, :, o)||.
double operator_21_norm_structured(const ConvLayerSpec& a, const ConvLayerSpec& b);

/// Frobenius norm of op(K); each kernel entry appears once in each of the d^2
/// output rows it touches, so this equals d * ||vec(K)||.
double operator_frobenius(const RealTensor4& kernel, std::size_t d);

} // namespace cnnbound
