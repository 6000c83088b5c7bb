#pragma once

// Seeded randomness and the small dense linear-algebra kernel shared by the
// rest of the library. Everything is 64-bit floating point.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wppg {

using Vec = std::vector<double>;

namespace detail {

// splitmix64 finalizer; also used to derive child stream keys.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace detail

/// Counter-based splitmix64 stream. A generator is identified by an immutable
/// key; draws advance a counter only, so deriving child streams by label is
/// independent of how many values the parent or any sibling has produced.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(detail::mix64(seed ^ detail::kGolden)) {}

    /// Child stream for a named subsystem ("env", "actor", "critic", ...).
    Rng split(std::string_view label, std::uint64_t index = 0) const {
        Rng child(0);
        child.key_ = detail::mix64(key_ ^ (detail::fnv1a(label) + detail::kGolden * (index + 1)));
        child.ctr_ = 0;
        child.has_spare_ = false;
        return child;
    }

    std::uint64_t next_u64() {
        ++ctr_;
        return detail::mix64(key_ + detail::kGolden * ctr_);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Index in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

    /// Standard normal via polar Box-Muller; both outputs are consumed.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// n i.i.d. standard-normal samples.
inline Vec gaussian(Rng& rng, std::size_t n) {
    if (n < 1) throw std::invalid_argument("gaussian: n must be >= 1");
    Vec out(n);
    for (double& x : out) x = rng.gaussian();
    return out;
}

/// Dense row-major matrix. Shape mismatches throw, never broadcast.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Mat(std::size_t r, std::size_t c, Vec d) : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != rows * cols) throw std::invalid_argument("Mat: data size does not match shape");
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
};

inline Vec mat_vec(const Mat& m, const Vec& v) {
    if (m.cols != v.size()) throw std::invalid_argument("mat_vec: inner dimensions disagree");
    Vec out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += r[j] * v[j];
        out[i] = acc;
    }
    return out;
}

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

/// Solve A x = b by Gaussian elimination with partial pivoting (A is small).
inline Vec solve_linear(Mat a, Vec b) {
    if (a.rows != a.cols || a.rows != b.size()) throw std::invalid_argument("solve_linear: shape mismatch");
    const std::size_t n = a.rows;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) < 1e-14) throw std::runtime_error("solve_linear: singular system");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    Vec x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t j = r + 1; j < n; ++j) acc -= a(r, j) * x[j];
        x[r] = acc / a(r, r);
    }
    return x;
}

/// C (m x n) = A (m x k) * B (k x n), accumulating into C.
inline void gemm_acc(const Mat& a, const Mat& b, Mat& c) {
    if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
        throw std::invalid_argument("gemm_acc: shape mismatch");
    const std::size_t m = a.rows, kk = a.cols, n = b.cols;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (std::size_t k = 0; k < kk; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

}  // namespace wppg
