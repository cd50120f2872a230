#pragma once

// Core types shared by every other header: row-major double matrices,
// point clouds, quadrature sets, modulation functions, feature maps,
// deterministic RNG, and input validation.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace frpe {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 6.28318530717958647692;

// ============================================================================
// allocation accounting
//
// Tests use this to assert that fast attention paths never materialize an
// L x L matrix. Only Matrix allocations are recorded; the peak is the largest
// single allocation (in elements) since the last reset.

namespace alloc_stats {

inline std::size_t& peak_matrix_elems() {
    thread_local std::size_t peak = 0;
    return peak;
}

inline void reset() { peak_matrix_elems() = 0; }

inline void record(std::size_t elems) {
    if (elems > peak_matrix_elems()) peak_matrix_elems() = elems;
}

}  // namespace alloc_stats

// ============================================================================
// Matrix: row-major dense matrix of doubles

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        alloc_stats::record(rows * cols);
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(p[i])) return false;
    }
    return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data(), m.size()); }

inline bool all_finite(const std::vector<double>& v) { return all_finite(v.data(), v.size()); }

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

// C = A^T * B
inline Matrix matmul_transa(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_transa: row counts differ");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.row(k);
        const double* bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            double* ci = c.row(i);
            const double aki = ak[i];
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

// C = A * B^T
inline Matrix matmul_transb(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_transb: column counts differ");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

inline double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double l2_norm(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return std::sqrt(s);
}

// ||a - b||_2 / max(||b||_2, tiny); b is the reference
inline double rel_l2_error(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("rel_l2_error: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        num += d * d;
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double rel_l2_error(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("rel_l2_error: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        num += d * d;
        den += b.data()[i] * b.data()[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// ============================================================================
// deterministic RNG
//
// Seeded operations promise bit-identical output for identical seed and
// parameters. std::mt19937_64 is pinned by the standard, but the std::*_
// distribution transforms are implementation-defined, so the few transforms
// needed are written out here.

struct RngSeed {
    std::uint64_t value = 0;
};

class Rng {
public:
    explicit Rng(RngSeed seed) : state_(seed.value ^ 0x9e3779b97f4a7c15ull) {
        // splitmix64 warmup decorrelates small consecutive seeds
        for (int i = 0; i < 4; ++i) next_u64();
    }

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller; 1 - u keeps the log argument in (0, 1]
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = kTwoPi * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    double exponential(double rate) { return -std::log(1.0 - uniform01()) / rate; }

    // uniform direction on the unit sphere in R^d, d in {1,2,3}
    void unit_vector(std::size_t d, double* out) {
        if (d == 1) {
            out[0] = uniform01() < 0.5 ? -1.0 : 1.0;
        } else if (d == 2) {
            const double t = kTwoPi * uniform01();
            out[0] = std::cos(t);
            out[1] = std::sin(t);
        } else if (d == 3) {
            // z uniform in [-1,1], azimuth uniform: area-exact, no rejection
            const double z = 1.0 - 2.0 * uniform01();
            const double t = kTwoPi * uniform01();
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            out[0] = r * std::cos(t);
            out[1] = r * std::sin(t);
            out[2] = z;
        } else {
            throw std::invalid_argument("unit_vector: d must be 1, 2, or 3");
        }
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// derive an independent stream from a base seed and an index
inline RngSeed derive_seed(RngSeed base, std::uint64_t index) {
    Rng r(RngSeed{base.value ^ (0xd1342543de82ef95ull * (index + 1))});
    return RngSeed{r.next_u64()};
}

// ============================================================================
// PointCloud

struct PointCloud {
    Matrix coords;  // L x d

    PointCloud() = default;

    explicit PointCloud(Matrix c) : coords(std::move(c)) {
        if (coords.rows() == 0) throw std::invalid_argument("point cloud: empty");
        if (coords.cols() < 1 || coords.cols() > 3)
            throw std::invalid_argument("point cloud: dim must be 1, 2, or 3");
        if (!all_finite(coords)) throw std::invalid_argument("non-finite input in point cloud");
    }

    std::size_t length() const { return coords.rows(); }
    std::size_t dim() const { return coords.cols(); }
};

// Per-column mean removal, then one global scale giving overall unit variance.
// A single scalar scale (not per-column) preserves the cloud's isotropy, which
// the radial mask construction depends on. Variance is the mean squared
// deviation over all L*d entries.
inline PointCloud normalize_coords(const PointCloud& cloud) {
    const std::size_t l = cloud.length(), d = cloud.dim();
    Matrix out(l, d);
    double maxabs = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < l; ++i) mean += cloud.coords(i, j);
        mean /= static_cast<double>(l);
        for (std::size_t i = 0; i < l; ++i) {
            const double c = cloud.coords(i, j) - mean;
            out(i, j) = c;
            maxabs = std::max(maxabs, std::abs(cloud.coords(i, j)));
        }
    }
    double var = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) var += out.data()[i] * out.data()[i];
    var /= static_cast<double>(l * d);
    if (var <= 1e-28 * (1.0 + maxabs * maxabs)) throw std::invalid_argument("zero variance");
    const double scale = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= scale;
    return PointCloud(std::move(out));
}

// ============================================================================
// QuadratureSet

struct QuadratureSet {
    Matrix freqs;                // S x d
    std::vector<double> coeffs;  // length S
    bool symmetric = false;      // rows come in (+xi, -xi) pairs with equal coeffs

    QuadratureSet() = default;

    QuadratureSet(Matrix f, std::vector<double> c, bool sym)
        : freqs(std::move(f)), coeffs(std::move(c)), symmetric(sym) {
        if (freqs.rows() == 0) throw std::invalid_argument("quadrature: empty");
        if (freqs.rows() != coeffs.size())
            throw std::invalid_argument("quadrature: coefficient count differs from frequency count");
        if (!all_finite(freqs) || !all_finite(coeffs))
            throw std::invalid_argument("non-finite input in quadrature");
        if (symmetric) validate_pairing();
    }

    std::size_t size() const { return freqs.rows(); }
    std::size_t dim() const { return freqs.cols(); }

private:
    // Symmetric sets pair row 2k+1 = -(row 2k) with equal coefficients.
    // An all-zero row is its own negation and may stand alone, which is how
    // the S=1 zero-frequency neutral mask stays representable.
    void validate_pairing() const {
        const std::size_t d = freqs.cols();
        std::size_t s = 0;
        while (s < freqs.rows()) {
            bool zero = true;
            for (std::size_t j = 0; j < d; ++j) zero = zero && freqs(s, j) == 0.0;
            if (zero) {
                ++s;
                continue;
            }
            if (s + 1 >= freqs.rows())
                throw std::invalid_argument("quadrature marked symmetric but frequencies are unpaired");
            for (std::size_t j = 0; j < d; ++j) {
                if (freqs(s + 1, j) != -freqs(s, j))
                    throw std::invalid_argument("quadrature marked symmetric but frequencies are unpaired");
            }
            if (coeffs[s + 1] != coeffs[s])
                throw std::invalid_argument("quadrature marked symmetric but pair coefficients differ");
            s += 2;
        }
    }
};

// ============================================================================
// ModulationFunction: F_f evaluated at a frequency

struct ModulationFunction {
    enum class Kind { laplace, constant_one };

    Kind kind = Kind::constant_one;
    double lambda = 1.0;

    static ModulationFunction laplace(double lambda) {
        if (!(lambda > 0.0)) throw std::invalid_argument("modulation: lambda must be positive");
        return ModulationFunction{Kind::laplace, lambda};
    }

    static ModulationFunction one() { return ModulationFunction{Kind::constant_one, 1.0}; }

    double eval(const double* xi, std::size_t d) const {
        if (kind == Kind::constant_one) return 1.0;
        double n2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) n2 += xi[j] * xi[j];
        return std::exp(-lambda * std::sqrt(n2));
    }
};

// ============================================================================
// FeatureMap

struct FeatureMap {
    enum class Kind { relu, positive_random };

    Kind kind = Kind::relu;
    std::size_t m = 0;  // feature count
    Matrix proj;        // m x d_qk, only for positive_random

    // elementwise max(x, 0); m equals the input width
    static FeatureMap relu(std::size_t d_qk) {
        if (d_qk == 0) throw std::invalid_argument("feature map: d_qk must be positive");
        return FeatureMap{Kind::relu, d_qk, Matrix()};
    }

    // phi(x) = exp(Wx - ||x||^2/2)/sqrt(m) with W ~ N(0,1)^{m x d_qk};
    // unbiased for the softmax kernel: E[phi(x)^T phi(y)] = exp(x^T y)
    static FeatureMap positive_random(std::size_t m, std::size_t d_qk, RngSeed seed) {
        if (m == 0 || d_qk == 0)
            throw std::invalid_argument("feature map: m and d_qk must be positive");
        Matrix w(m, d_qk);
        Rng rng(seed);
        for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
        return FeatureMap{Kind::positive_random, m, std::move(w)};
    }
};

// ============================================================================
// AttentionBatch

struct AttentionBatch {
    Matrix q;  // L x d_qk
    Matrix k;  // L x d_qk
    Matrix v;  // L x d_v
};

inline void validate_batch(const AttentionBatch& batch, const PointCloud& cloud) {
    const std::size_t l = cloud.length();
    if (batch.q.rows() != l || batch.k.rows() != l || batch.v.rows() != l)
        throw std::invalid_argument("length mismatch between batch and point cloud");
    if (batch.q.cols() != batch.k.cols())
        throw std::invalid_argument("length mismatch between Q and K widths");
    if (batch.q.cols() == 0 || batch.v.cols() == 0)
        throw std::invalid_argument("length mismatch: empty Q/K/V columns");
    if (!all_finite(batch.q) || !all_finite(batch.k) || !all_finite(batch.v))
        throw std::invalid_argument("non-finite input in attention batch");
}

}  // namespace frpe
