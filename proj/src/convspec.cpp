#include "cnnbound/convspec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cnnbound/linalg.hpp"

namespace cnnbound {

namespace {

void check_fits(const RealTensor4& kernel, std::size_t d) {
    if (d == 0) throw ArgumentError("convolution input size must be positive");
    if (kernel.c_in() == 0 || kernel.c_out() == 0) throw ArgumentError("kernel has zero channels");
    if (kernel.k1() > d || kernel.k2() > d)
        throw ArgumentError("kernel size " + std::to_string(kernel.k1()) + "x" + std::to_string(kernel.k2()) +
                            " exceeds input size " + std::to_string(d));
}

} // namespace

std::vector<ComplexMatrix> frequency_blocks(const RealTensor4& kernel, std::size_t d) {
    check_fits(kernel, d);
    const std::size_t cin = kernel.c_in(), cout = kernel.c_out();
    std::vector<ComplexMatrix> blocks(d * d, ComplexMatrix(cin, cout));
    RealMatrix padded(d, d);
    for (std::size_t i = 0; i < cin; ++i) {
        for (std::size_t o = 0; o < cout; ++o) {
            std::fill(padded.storage().begin(), padded.storage().end(), 0.0);
            for (std::size_t p = 0; p < kernel.k1(); ++p)
                for (std::size_t q = 0; q < kernel.k2(); ++q) padded(p, q) = kernel(p, q, i, o);
            const ComplexMatrix spectrum = dft2(padded);
            for (std::size_t u = 0; u < d; ++u)
                for (std::size_t v = 0; v < d; ++v) blocks[u * d + v](i, o) = spectrum(u, v);
        }
    }
    return blocks;
}

double operator_norm_fft(const RealTensor4& kernel, std::size_t d) {
    if (!all_finite(kernel.data())) throw NumericError("operator_norm_fft: non-finite kernel entry");
    double best = 0.0;
    for (const ComplexMatrix& block : frequency_blocks(kernel, d)) best = std::max(best, spectral_norm(block));
    return best;
}

RealMatrix materialize_operator(const RealTensor4& kernel, std::size_t d) {
    check_fits(kernel, d);
    const std::size_t cin = kernel.c_in(), cout = kernel.c_out();
    if (d * d * cin > kMaterializeLimit || d * d * cout > kMaterializeLimit)
        throw CapacityError("materialize_operator: operator of size " + std::to_string(d * d * cout) + "x" +
                            std::to_string(d * d * cin) + " exceeds the " + std::to_string(kMaterializeLimit) +
                            " limit");
    RealMatrix op(d * d * cout, d * d * cin);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
            for (std::size_t p = 0; p < kernel.k1(); ++p)
                for (std::size_t q = 0; q < kernel.k2(); ++q) {
                    const std::size_t src = ((a + p) % d) * d + (b + q) % d;
                    for (std::size_t i = 0; i < cin; ++i)
                        for (std::size_t o = 0; o < cout; ++o)
                            op((a * d + b) * cout + o, src * cin + i) += kernel(p, q, i, o);
                }
    return op;
}

double operator_21_norm(const ConvLayerSpec& a, const ConvLayerSpec& b) {
    if (a.kernel.dims() != b.kernel.dims() || a.input_size != b.input_size)
        throw ArgumentError("operator_21_norm: layer shapes differ");
    return norm_21(transpose(materialize_operator(a.kernel - b.kernel, a.input_size)));
}

double operator_21_norm_structured(const ConvLayerSpec& a, const ConvLayerSpec& b) {
    if (a.kernel.dims() != b.kernel.dims() || a.input_size != b.input_size)
        throw ArgumentError("operator_21_norm_structured: layer shapes differ");
    const RealTensor4 diff = a.kernel - b.kernel;
    check_fits(diff, a.input_size);
    std::vector<double> col(diff.c_out(), 0.0);
    for (std::size_t p = 0; p < diff.k1(); ++p)
        for (std::size_t q = 0; q < diff.k2(); ++q)
            for (std::size_t i = 0; i < diff.c_in(); ++i)
                for (std::size_t o = 0; o < diff.c_out(); ++o) col[o] += diff(p, q, i, o) * diff(p, q, i, o);
    double total = 0.0;
    for (double v : col) total += std::sqrt(v);
    const auto d = static_cast<double>(a.input_size);
    return d * d * total;
}

double operator_frobenius(const RealTensor4& kernel, std::size_t d) {
    check_fits(kernel, d);
    double s = 0.0;
    for (double v : kernel.data()) s += v * v;
    return static_cast<double>(d) * std::sqrt(s);
}

} // namespace cnnbound
