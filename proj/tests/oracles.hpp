#pragma once

// Independent reference implementations used only by the tests. They share no
// code with the library beyond the container types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "cnnbound/rng.hpp"
#include "cnnbound/tensor.hpp"

namespace oracle {

using cnnbound::Complex;
using cnnbound::ComplexMatrix;
using cnnbound::RealMatrix;
using cnnbound::RealTensor4;

// Cyclic Jacobi rotations on a symmetric matrix; returns all eigenvalues.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    return ev;
}

inline double spectral_norm(const RealMatrix& m) {
    std::vector<std::vector<double>> g(m.cols(), std::vector<double>(m.cols(), 0.0));
    for (std::size_t i = 0; i < m.cols(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            for (std::size_t r = 0; r < m.rows(); ++r) g[i][j] += m(r, i) * m(r, j);
    const auto ev = jacobi_eigenvalues(g);
    return std::sqrt(std::max(0.0, *std::max_element(ev.begin(), ev.end())));
}

// The real embedding [[Re, -Im], [Im, Re]] has the same singular values, each
// repeated twice.
inline double spectral_norm(const ComplexMatrix& m) {
    RealMatrix r(2 * m.rows(), 2 * m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            r(i, j) = m(i, j).real();
            r(i, j + m.cols()) = -m(i, j).imag();
            r(i + m.rows(), j) = m(i, j).imag();
            r(i + m.rows(), j + m.cols()) = m(i, j).real();
        }
    return oracle::spectral_norm(r);
}

inline ComplexMatrix naive_dft2(const RealMatrix& a) {
    const std::size_t d = a.rows();
    ComplexMatrix out(d, d);
    for (std::size_t u = 0; u < d; ++u)
        for (std::size_t v = 0; v < d; ++v) {
            Complex s = 0.0;
            for (std::size_t p = 0; p < d; ++p)
                for (std::size_t q = 0; q < d; ++q)
                    s += a(p, q) * std::polar(1.0, 2.0 * std::numbers::pi * double(u * p + v * q) / double(d));
            out(u, v) = s;
        }
    return out;
}

inline std::vector<double> direct_conv(const RealTensor4& k, std::size_t d, const std::vector<double>& x) {
    const std::size_t cin = k.c_in(), cout = k.c_out();
    std::vector<double> y(d * d * cout, 0.0);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
            for (std::size_t o = 0; o < cout; ++o) {
                double s = 0.0;
                for (std::size_t p = 0; p < k.k1(); ++p)
                    for (std::size_t q = 0; q < k.k2(); ++q)
                        for (std::size_t i = 0; i < cin; ++i)
                            s += k(p, q, i, o) * x[(((a + p) % d) * d + (b + q) % d) * cin + i];
                y[(a * d + b) * cout + o] = s;
            }
    return y;
}

// Dense operator by probing the direct loop with basis vectors.
inline RealMatrix probe_operator(const RealTensor4& k, std::size_t d) {
    const std::size_t n_in = d * d * k.c_in(), n_out = d * d * k.c_out();
    RealMatrix m(n_out, n_in);
    std::vector<double> e(n_in, 0.0);
    for (std::size_t j = 0; j < n_in; ++j) {
        e[j] = 1.0;
        const auto col = direct_conv(k, d, e);
        for (std::size_t i = 0; i < n_out; ++i) m(i, j) = col[i];
        e[j] = 0.0;
    }
    return m;
}

inline double norm21_columns(const RealMatrix& m) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double c = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) c += m(i, j) * m(i, j);
        s += std::sqrt(c);
    }
    return s;
}

inline RealMatrix random_matrix(std::size_t r, std::size_t c, cnnbound::Rng& rng) {
    RealMatrix m(r, c);
    for (auto& v : m.data()) v = rng.normal();
    return m;
}

inline RealTensor4 random_kernel(std::size_t k, std::size_t cin, std::size_t cout, cnnbound::Rng& rng) {
    RealTensor4 t({k, k, cin, cout});
    for (auto& v : t.data()) v = rng.normal();
    return t;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

} // namespace oracle
