#include "cnnbound/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cnnbound/rng.hpp"

namespace cnnbound {

namespace {

inline double conj_of(double v) { return v; }
inline Complex conj_of(Complex v) { return std::conj(v); }
inline double real_of(double v) { return v; }
inline double real_of(Complex v) { return v.real(); }
inline double abs2(double v) { return v * v; }
inline double abs2(Complex v) { return std::norm(v); }

template <class T>
Matrix<T> matmul_impl(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                             std::to_string(b.rows()) + " differ");
    Matrix<T> out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        T* row = &out(i, 0);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T aik = a(i, k);
            if (aik == T{}) continue;
            const T* brow = &b(k, 0);
            for (std::size_t j = 0; j < n; ++j) row[j] += aik * brow[j];
        }
    }
    return out;
}

/// Gram matrix of the smaller side: A^H A when rows >= cols, else A A^H.
template <class T>
Matrix<T> gram(const Matrix<T>& a) {
    const bool use_cols = a.rows() >= a.cols();
    const std::size_t n = use_cols ? a.cols() : a.rows();
    Matrix<T> g(n, n);
    if (use_cols) {
        for (std::size_t r = 0; r < a.rows(); ++r) {
            const T* row = &a(r, 0);
            for (std::size_t i = 0; i < n; ++i) {
                const T ci = conj_of(row[i]);
                if (ci == T{}) continue;
                for (std::size_t j = 0; j < n; ++j) g(i, j) += ci * row[j];
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                T s{};
                for (std::size_t c = 0; c < a.cols(); ++c) s += a(i, c) * conj_of(a(j, c));
                g(i, j) = s;
                g(j, i) = conj_of(s);
            }
        }
    }
    return g;
}

template <class T>
double rayleigh(const Matrix<T>& g, const std::vector<T>& v) {
    const std::size_t n = g.rows();
    T num{};
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        T gv{};
        for (std::size_t j = 0; j < n; ++j) gv += g(i, j) * v[j];
        num += conj_of(v[i]) * gv;
        den += abs2(v[i]);
    }
    return den > 0.0 ? real_of(num) / den : 0.0;
}

template <class T>
double spectral_norm_by_squaring(const Matrix<T>& a) {
    const Matrix<T> g = gram(a);
    const std::size_t n = g.rows();
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += real_of(g(i, i));
    if (!(trace > 0.0)) return 0.0;

    Matrix<T> s = g;
    s *= T{1.0 / trace};
    for (int step = 0; step < 64; ++step) {
        Matrix<T> sq = matmul_impl(s, s);
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i) t += real_of(sq(i, i));
        if (!(t > 0.0)) break;
        sq *= T{1.0 / t};
        // keep the iterate Hermitian
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const T avg = 0.5 * (sq(i, j) + conj_of(sq(j, i)));
                sq(i, j) = avg;
                sq(j, i) = conj_of(avg);
            }
        double diff = 0.0;
        for (std::size_t i = 0; i < sq.size(); ++i) diff += abs2(sq.data()[i] - s.data()[i]);
        s = std::move(sq);
        if (std::sqrt(diff) <= 1e-15) break;
    }

    // s is now (close to) the normalized projector onto the dominant eigenspace.
    std::size_t best = 0;
    double best_norm = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
        double cn = 0.0;
        for (std::size_t i = 0; i < n; ++i) cn += abs2(s(i, j));
        if (cn > best_norm) {
            best_norm = cn;
            best = j;
        }
    }
    std::vector<T> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = s(i, best);
    for (int polish = 0; polish < 3; ++polish) {
        std::vector<T> w(n, T{});
        double wn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) w[i] += g(i, j) * v[j];
            wn += abs2(w[i]);
        }
        if (!(wn > 0.0)) break;
        wn = std::sqrt(wn);
        for (auto& x : w) x *= T{1.0 / wn};
        v = std::move(w);
    }
    return std::sqrt(std::max(rayleigh(g, v), 0.0));
}

template <class T>
double spectral_norm_by_vectors(const Matrix<T>& a) {
    // Iterate on whichever Gram side is smaller without forming it.
    const bool use_cols = a.rows() >= a.cols();
    const std::size_t n = use_cols ? a.cols() : a.rows();
    const std::size_t m = use_cols ? a.rows() : a.cols();
    auto apply = [&](const std::vector<T>& v) {
        std::vector<T> mid(m, T{});
        std::vector<T> out(n, T{});
        if (use_cols) {
            for (std::size_t r = 0; r < m; ++r) {
                T s{};
                for (std::size_t c = 0; c < n; ++c) s += a(r, c) * v[c];
                mid[r] = s;
            }
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < n; ++c) out[c] += conj_of(a(r, c)) * mid[r];
        } else {
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < m; ++c) mid[c] += conj_of(a(r, c)) * v[r];
            for (std::size_t r = 0; r < n; ++r) {
                T s{};
                for (std::size_t c = 0; c < m; ++c) s += a(r, c) * mid[c];
                out[r] = s;
            }
        }
        return out;
    };

    Rng rng(0x5EEDF00DULL);
    std::vector<T> v(n);
    double vn = 0.0;
    for (auto& x : v) {
        x = T{1.0 + 0.5 * rng.uniform()};
        vn += abs2(x);
    }
    vn = std::sqrt(vn);
    for (auto& x : v) x *= T{1.0 / vn};

    double rho = 0.0;
    for (int it = 0; it < kPowerMaxIterations; ++it) {
        std::vector<T> w = apply(v);
        T dot{};
        for (std::size_t i = 0; i < n; ++i) dot += conj_of(v[i]) * w[i];
        rho = real_of(dot);
        double res = 0.0, wn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            res += abs2(w[i] - rho * v[i]);
            wn += abs2(w[i]);
        }
        if (!(wn > 0.0)) return 0.0;
        if (std::sqrt(res) <= kPowerTolerance * rho) break;
        wn = std::sqrt(wn);
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] * (1.0 / wn);
    }
    return std::sqrt(std::max(rho, 0.0));
}

template <class T>
double spectral_norm_impl(const Matrix<T>& a) {
    if (a.empty()) throw DimensionError("spectral_norm: empty matrix");
    if (!all_finite(a.data())) throw NumericError("spectral_norm: non-finite entry");
    if (std::min(a.rows(), a.cols()) <= kSquaringLimit) return spectral_norm_by_squaring(a);
    return spectral_norm_by_vectors(a);
}

} // namespace

RealMatrix matmul(const RealMatrix& a, const RealMatrix& b) { return matmul_impl(a, b); }
ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) { return matmul_impl(a, b); }

RealMatrix transpose(const RealMatrix& a) {
    RealMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

ComplexMatrix adjoint(const ComplexMatrix& a) {
    ComplexMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = std::conj(a(i, j));
    return t;
}

std::vector<double> matvec(const RealMatrix& a, std::span<const double> x) {
    if (x.size() != a.cols())
        throw DimensionError("matvec: vector length " + std::to_string(x.size()) + " vs " +
                             std::to_string(a.cols()) + " columns");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        const double* row = &a(i, 0);
        for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

double frobenius(const RealMatrix& a) noexcept {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

double frobenius(const ComplexMatrix& a) noexcept {
    double s = 0.0;
    for (const Complex& v : a.data()) s += std::norm(v);
    return std::sqrt(s);
}

double max_column_norm(const RealMatrix& a) noexcept {
    double best = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, j) * a(i, j);
        best = std::max(best, std::sqrt(s));
    }
    return best;
}

double norm_21(const RealMatrix& a) noexcept {
    std::vector<double> col(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) col[j] += a(i, j) * a(i, j);
    double total = 0.0;
    for (double c : col) total += std::sqrt(c);
    return total;
}

double spectral_norm(const RealMatrix& a) { return spectral_norm_impl(a); }
double spectral_norm(const ComplexMatrix& a) { return spectral_norm_impl(a); }

ComplexMatrix dft_matrix(std::size_t d) {
    ComplexMatrix f(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            // reduce the exponent first so every entry is an exact root of unity
            const auto e = static_cast<double>((i * j) % d);
            f(i, j) = std::polar(1.0, 2.0 * std::numbers::pi * e / static_cast<double>(d));
        }
    return f;
}

ComplexMatrix dft2(const RealMatrix& slice) {
    if (slice.rows() != slice.cols())
        throw DimensionError("dft2: input must be square, got " + std::to_string(slice.rows()) + "x" +
                             std::to_string(slice.cols()));
    if (slice.empty()) throw DimensionError("dft2: empty input");
    const std::size_t d = slice.rows();
    const ComplexMatrix f = dft_matrix(d);
    ComplexMatrix a(d, d);
    for (std::size_t i = 0; i < slice.size(); ++i) a.data()[i] = slice.data()[i];
    // F is symmetric, so F^T A F = F A F.
    return matmul(matmul(f, a), f);
}

RealMatrix hadamard_sylvester(std::size_t order) {
    if (order == 0 || (order & (order - 1)) != 0)
        throw ArgumentError("hadamard_sylvester: order " + std::to_string(order) + " is not a power of two");
    RealMatrix h(1, 1, {1.0});
    while (h.rows() < order) {
        const std::size_t n = h.rows();
        RealMatrix next(2 * n, 2 * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                next(i, j) = h(i, j);
                next(i, j + n) = h(i, j);
                next(i + n, j) = h(i, j);
                next(i + n, j + n) = -h(i, j);
            }
        h = std::move(next);
    }
    return h;
}

double euclidean_norm(std::span<const double> v) noexcept {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace cnnbound
