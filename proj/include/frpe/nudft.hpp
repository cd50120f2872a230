#pragma once

// Nonuniform discrete Fourier transforms between point clouds and frequency
// sets, in both directions:
//
//   forward:  gamma_s = sum_l u_l exp(-2*pi*i xi_s . r_l)
//   adjoint:  w_i     = sum_s b_s exp(+2*pi*i xi_s . r_i)
//
// nudft_forward / nudft_adjoint are exact O(L*S) sums and serve as oracles.
// nufft_forward / nufft_adjoint run a gridded type-3 scheme: rescale both
// domains, spread with a truncated Gaussian onto an oversampled uniform grid,
// FFT, interpolate at the targets with a second truncated Gaussian, and divide
// out both kernels' Fourier factors. Relative L2 error is <= 10 * epsilon.
// Small problems (S <= 64) dispatch to the direct sum unless forced.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "frpe/core.hpp"

namespace frpe {

// ============================================================================
// ComplexVector: split-storage complex vector

struct ComplexVector {
    std::vector<double> re;
    std::vector<double> im;

    ComplexVector() = default;
    explicit ComplexVector(std::size_t n) : re(n, 0.0), im(n, 0.0) {}
    ComplexVector(std::vector<double> r, std::vector<double> i)
        : re(std::move(r)), im(std::move(i)) {
        if (re.size() != im.size())
            throw std::invalid_argument("length mismatch between re and im parts");
    }

    static ComplexVector from_real(const std::vector<double>& r) {
        ComplexVector v;
        v.re = r;
        v.im.assign(r.size(), 0.0);
        return v;
    }

    std::size_t size() const { return re.size(); }
};

struct NufftAccuracy {
    double epsilon = 1e-6;           // target relative accuracy, in (0, 0.1]
    double oversampling = 2.0;       // grid oversampling factor, >= 2
    bool force_gridded = false;      // test hook: skip the small-S direct dispatch
    std::size_t max_grid_cells = std::size_t(1) << 26;  // complex cells, then "grid too large"
};

inline void validate_accuracy(const NufftAccuracy& acc) {
    if (!(acc.epsilon > 0.0) || acc.epsilon > 0.1)
        throw std::invalid_argument("epsilon out of range (0, 0.1]");
    if (!(acc.oversampling >= 2.0))
        throw std::invalid_argument("oversampling out of range [2, inf)");
}

// ============================================================================
// direct sums

namespace detail {

inline void check_transform_args(const PointCloud& cloud, const ComplexVector& coef,
                                 std::size_t expect, const Matrix& freqs) {
    if (coef.size() != expect)
        throw std::invalid_argument("length mismatch between coefficients and transform size");
    if (freqs.rows() == 0) throw std::invalid_argument("length mismatch: empty frequency set");
    if (freqs.cols() != cloud.dim())
        throw std::invalid_argument("length mismatch between frequency dim and cloud dim");
    if (!all_finite(freqs) || !all_finite(coef.re) || !all_finite(coef.im))
        throw std::invalid_argument("non-finite input");
}

}  // namespace detail

inline ComplexVector nudft_forward(const PointCloud& cloud, const ComplexVector& u,
                                   const Matrix& freqs) {
    detail::check_transform_args(cloud, u, cloud.length(), freqs);
    const std::size_t l = cloud.length(), s = freqs.rows(), d = cloud.dim();
    ComplexVector out(s);
    for (std::size_t k = 0; k < s; ++k) {
        const double* xi = freqs.row(k);
        double sre = 0.0, sim = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
            const double* r = cloud.coords.row(j);
            double dot = 0.0;
            for (std::size_t a = 0; a < d; ++a) dot += xi[a] * r[a];
            const double th = -kTwoPi * dot;
            const double c = std::cos(th), sn = std::sin(th);
            sre += u.re[j] * c - u.im[j] * sn;
            sim += u.re[j] * sn + u.im[j] * c;
        }
        out.re[k] = sre;
        out.im[k] = sim;
    }
    return out;
}

inline ComplexVector nudft_adjoint(const PointCloud& cloud, const ComplexVector& b,
                                   const Matrix& freqs) {
    detail::check_transform_args(cloud, b, freqs.rows(), freqs);
    const std::size_t l = cloud.length(), s = freqs.rows(), d = cloud.dim();
    ComplexVector out(l);
    for (std::size_t j = 0; j < l; ++j) {
        const double* r = cloud.coords.row(j);
        double sre = 0.0, sim = 0.0;
        for (std::size_t k = 0; k < s; ++k) {
            const double* xi = freqs.row(k);
            double dot = 0.0;
            for (std::size_t a = 0; a < d; ++a) dot += xi[a] * r[a];
            const double th = kTwoPi * dot;
            const double c = std::cos(th), sn = std::sin(th);
            sre += b.re[k] * c - b.im[k] * sn;
            sim += b.re[k] * sn + b.im[k] * c;
        }
        out.re[j] = sre;
        out.im[j] = sim;
    }
    return out;
}

// ============================================================================
// gridded type-3 engine

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// in-place power-of-two FFT, exponent sign given by `sign`;
// twiddles come from a caller-provided table tw[k] = exp(sign*2*pi*i*k/n)
inline void fft_pow2(std::complex<double>* a, std::size_t n,
                     const std::complex<double>* tw) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> w = tw[k * stride];
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

struct Type3Workspace {
    std::vector<std::complex<double>> grid;
    std::vector<std::complex<double>> line;
};

// Plan for out_t = sum_j c_j exp(isign * 2*pi*i * tgt_t . src_j).
// Geometry-dependent factors (centers, grids, kernels, phases) are computed
// once; execute() is O(n_src * (2w+1)^d + grid FFT + n_tgt * (2w+1)^d).
class Type3Plan {
public:
    Type3Plan(const Matrix& src, const Matrix& tgt, int isign, const NufftAccuracy& acc) {
        validate_accuracy(acc);
        if (src.cols() != tgt.cols())
            throw std::invalid_argument("length mismatch between source and target dims");
        dim_ = src.cols();
        n_src_ = src.rows();
        n_tgt_ = tgt.rows();
        isign_ = isign;
        width_ = static_cast<long>(std::ceil(std::log(1.0 / acc.epsilon)));
        width_ = std::max<long>(width_, 3);
        const double sigma_os = acc.oversampling;
        // balanced Gaussian width (in grid cells): truncation at w cells and
        // spectral aliasing at the oversampled band edge decay equally
        const double gamma2 =
            static_cast<double>(width_) / (2.0 * kPi * std::sqrt(1.0 - 1.0 / sigma_os));

        std::size_t cells = 1;
        for (std::size_t a = 0; a < dim_; ++a) {
            Axis& ax = axes_[a];
            double src_lo = src(0, a), src_hi = src(0, a);
            for (std::size_t j = 1; j < n_src_; ++j) {
                src_lo = std::min(src_lo, src(j, a));
                src_hi = std::max(src_hi, src(j, a));
            }
            double tgt_lo = tgt(0, a), tgt_hi = tgt(0, a);
            for (std::size_t t = 1; t < n_tgt_; ++t) {
                tgt_lo = std::min(tgt_lo, tgt(t, a));
                tgt_hi = std::max(tgt_hi, tgt(t, a));
            }
            ax.src_center = 0.5 * (src_lo + src_hi);
            ax.tgt_center = 0.5 * (tgt_lo + tgt_hi);
            const double half_x = std::max(0.5 * (src_hi - src_lo), 1e-12);
            const double half_om = std::max(0.5 * (tgt_hi - tgt_lo), 1e-12);
            ax.h = 1.0 / (2.0 * sigma_os * half_om);
            const double n_needed = 4.0 * sigma_os * sigma_os * half_x * half_om +
                                    2.0 * sigma_os * static_cast<double>(width_) + 4.0;
            std::size_t n_min = static_cast<std::size_t>(std::ceil(n_needed));
            n_min = std::max<std::size_t>({n_min, static_cast<std::size_t>(4 * width_ + 8), 16});
            ax.n = next_pow2(n_min);
            if (ax.n > acc.max_grid_cells || cells > acc.max_grid_cells / ax.n)
                throw std::runtime_error("grid too large");
            cells *= ax.n;
            ax.dxi = 1.0 / (ax.h * static_cast<double>(ax.n));
            ax.sig_x2 = gamma2 * ax.h * ax.h;          // sigma_x^2, spreading kernel
            ax.sig_xi2 = gamma2 * ax.dxi * ax.dxi;     // sigma_xi^2, interpolation kernel
            ax.twiddle.resize(ax.n);
            for (std::size_t k = 0; k < ax.n; ++k) {
                const double th = static_cast<double>(isign_) * kTwoPi *
                                  static_cast<double>(k) / static_cast<double>(ax.n);
                ax.twiddle[k] = {std::cos(th), std::sin(th)};
            }
        }
        total_cells_ = cells;

        build_spread_tables(src);
        build_interp_tables(tgt);
    }

    std::size_t total_cells() const { return total_cells_; }

    void execute(const ComplexVector& in, ComplexVector& out, Type3Workspace& ws) const {
        if (in.size() != n_src_)
            throw std::invalid_argument("length mismatch between strengths and plan");
        ws.grid.assign(total_cells_, {0.0, 0.0});
        spread(in, ws.grid.data());
        run_fft(ws);
        interpolate(ws.grid.data(), out);
    }

private:
    struct Axis {
        std::size_t n = 0;
        double h = 0.0, dxi = 0.0;
        double src_center = 0.0, tgt_center = 0.0;
        double sig_x2 = 0.0, sig_xi2 = 0.0;
        std::vector<std::complex<double>> twiddle;
    };

    // per-source spreading: grid offsets and separable kernel weights with the
    // interpolation kernel's inverse transform 1/phi_check(x) folded in
    void build_spread_tables(const Matrix& src) {
        const std::size_t k = 2 * static_cast<std::size_t>(width_) + 1;
        spread_w_.assign(n_src_ * dim_ * k, 0.0);
        spread_i0_.assign(n_src_ * dim_, 0);
        pre_.assign(n_src_, {0.0, 0.0});
        for (std::size_t j = 0; j < n_src_; ++j) {
            double dot = 0.0;
            for (std::size_t a = 0; a < dim_; ++a) {
                const Axis& ax = axes_[a];
                const double alpha = src(j, a) - ax.src_center;
                dot += ax.tgt_center * alpha;
                const long ic = static_cast<long>(std::lround(alpha / ax.h));
                const long lo = ic - width_;
                const long half = static_cast<long>(ax.n / 2);
                if (lo + half < 0 || ic + width_ + half >= static_cast<long>(ax.n))
                    throw std::runtime_error("grid too large: spread support left the grid");
                spread_i0_[j * dim_ + a] = lo + half;
                const double inv_norm = 1.0 / std::sqrt(kTwoPi * ax.sig_xi2);
                for (std::size_t q = 0; q < k; ++q) {
                    const double x = static_cast<double>(lo + static_cast<long>(q)) * ax.h;
                    const double dx = x - alpha;
                    const double psi = std::exp(-dx * dx / (2.0 * ax.sig_x2));
                    const double inv_phi =
                        inv_norm * std::exp(2.0 * kPi * kPi * ax.sig_xi2 * x * x);
                    spread_w_[(j * dim_ + a) * k + q] = psi * inv_phi;
                }
            }
            const double th = static_cast<double>(isign_) * kTwoPi * dot;
            pre_[j] = {std::cos(th), std::sin(th)};
        }
    }

    // per-target gathering: FFT-bin offsets, kernel weights with the
    // checkerboard sign folded in, and the final deconvolution/phase factor
    void build_interp_tables(const Matrix& tgt) {
        const std::size_t k = 2 * static_cast<std::size_t>(width_) + 1;
        interp_w_.assign(n_tgt_ * dim_ * k, 0.0);
        interp_i0_.assign(n_tgt_ * dim_, 0);
        post_.assign(n_tgt_, {0.0, 0.0});
        for (std::size_t t = 0; t < n_tgt_; ++t) {
            double dot = 0.0;
            double scale = 1.0;
            for (std::size_t a = 0; a < dim_; ++a) {
                const Axis& ax = axes_[a];
                const double beta = tgt(t, a) - ax.tgt_center;
                dot += tgt(t, a) * ax.src_center;
                const long kc = static_cast<long>(std::lround(beta / ax.dxi));
                const long lo = kc - width_;
                const long half = static_cast<long>(ax.n / 2);
                if (lo <= -half || kc + width_ >= half)
                    throw std::runtime_error("grid too large: target band left the grid");
                interp_i0_[t * dim_ + a] = lo;  // signed bin index
                for (std::size_t q = 0; q < k; ++q) {
                    const long bin = lo + static_cast<long>(q);
                    const double dxi = beta - static_cast<double>(bin) * ax.dxi;
                    double wq = std::exp(-dxi * dxi / (2.0 * ax.sig_xi2));
                    if (bin & 1L) wq = -wq;  // (-1)^k from the grid's half-shift
                    interp_w_[(t * dim_ + a) * k + q] = wq;
                }
                const double psi_hat = std::sqrt(kTwoPi * ax.sig_x2) *
                                       std::exp(-2.0 * kPi * kPi * ax.sig_x2 * beta * beta);
                scale /= static_cast<double>(ax.n) * psi_hat;
            }
            const double th = static_cast<double>(isign_) * kTwoPi * dot;
            post_[t] = {scale * std::cos(th), scale * std::sin(th)};
        }
    }

    void spread(const ComplexVector& in, std::complex<double>* grid) const {
        const std::size_t k = 2 * static_cast<std::size_t>(width_) + 1;
        const std::size_t n1 = dim_ > 1 ? axes_[1].n : 1;
        const std::size_t n2 = dim_ > 2 ? axes_[2].n : 1;
        for (std::size_t j = 0; j < n_src_; ++j) {
            const std::complex<double> cw =
                std::complex<double>(in.re[j], in.im[j]) * pre_[j];
            const double* w0 = &spread_w_[(j * dim_ + 0) * k];
            const long i0 = spread_i0_[j * dim_ + 0];
            if (dim_ == 1) {
                for (std::size_t q = 0; q < k; ++q)
                    grid[static_cast<std::size_t>(i0) + q] += cw * w0[q];
            } else if (dim_ == 2) {
                const double* w1 = &spread_w_[(j * dim_ + 1) * k];
                const long i1 = spread_i0_[j * dim_ + 1];
                for (std::size_t q0 = 0; q0 < k; ++q0) {
                    const std::complex<double> f0 = cw * w0[q0];
                    std::complex<double>* row =
                        grid + (static_cast<std::size_t>(i0) + q0) * n1 +
                        static_cast<std::size_t>(i1);
                    for (std::size_t q1 = 0; q1 < k; ++q1) row[q1] += f0 * w1[q1];
                }
            } else {
                const double* w1 = &spread_w_[(j * dim_ + 1) * k];
                const double* w2 = &spread_w_[(j * dim_ + 2) * k];
                const long i1 = spread_i0_[j * dim_ + 1];
                const long i2 = spread_i0_[j * dim_ + 2];
                for (std::size_t q0 = 0; q0 < k; ++q0) {
                    const std::complex<double> f0 = cw * w0[q0];
                    for (std::size_t q1 = 0; q1 < k; ++q1) {
                        const std::complex<double> f1 = f0 * w1[q1];
                        std::complex<double>* row =
                            grid + ((static_cast<std::size_t>(i0) + q0) * n1 +
                                    static_cast<std::size_t>(i1) + q1) *
                                       n2 +
                            static_cast<std::size_t>(i2);
                        for (std::size_t q2 = 0; q2 < k; ++q2) row[q2] += f1 * w2[q2];
                    }
                }
            }
        }
    }

    void run_fft(Type3Workspace& ws) const {
        std::complex<double>* grid = ws.grid.data();
        if (dim_ == 1) {
            fft_pow2(grid, axes_[0].n, axes_[0].twiddle.data());
            return;
        }
        if (dim_ == 2) {
            const std::size_t n0 = axes_[0].n, n1 = axes_[1].n;
            for (std::size_t i = 0; i < n0; ++i)
                fft_pow2(grid + i * n1, n1, axes_[1].twiddle.data());
            ws.line.resize(n0);
            for (std::size_t j = 0; j < n1; ++j) {
                for (std::size_t i = 0; i < n0; ++i) ws.line[i] = grid[i * n1 + j];
                fft_pow2(ws.line.data(), n0, axes_[0].twiddle.data());
                for (std::size_t i = 0; i < n0; ++i) grid[i * n1 + j] = ws.line[i];
            }
            return;
        }
        const std::size_t n0 = axes_[0].n, n1 = axes_[1].n, n2 = axes_[2].n;
        for (std::size_t i = 0; i < n0 * n1; ++i)
            fft_pow2(grid + i * n2, n2, axes_[2].twiddle.data());
        ws.line.resize(std::max(n0, n1));
        for (std::size_t i = 0; i < n0; ++i) {
            for (std::size_t j2 = 0; j2 < n2; ++j2) {
                std::complex<double>* plane = grid + i * n1 * n2;
                for (std::size_t j1 = 0; j1 < n1; ++j1) ws.line[j1] = plane[j1 * n2 + j2];
                fft_pow2(ws.line.data(), n1, axes_[1].twiddle.data());
                for (std::size_t j1 = 0; j1 < n1; ++j1) plane[j1 * n2 + j2] = ws.line[j1];
            }
        }
        for (std::size_t j1 = 0; j1 < n1; ++j1) {
            for (std::size_t j2 = 0; j2 < n2; ++j2) {
                for (std::size_t i = 0; i < n0; ++i) ws.line[i] = grid[(i * n1 + j1) * n2 + j2];
                fft_pow2(ws.line.data(), n0, axes_[0].twiddle.data());
                for (std::size_t i = 0; i < n0; ++i) grid[(i * n1 + j1) * n2 + j2] = ws.line[i];
            }
        }
    }

    std::size_t fft_index(std::size_t axis, long bin) const {
        const long n = static_cast<long>(axes_[axis].n);
        return static_cast<std::size_t>((bin % n + n) % n);
    }

    void interpolate(const std::complex<double>* grid, ComplexVector& out) const {
        const std::size_t k = 2 * static_cast<std::size_t>(width_) + 1;
        out.re.assign(n_tgt_, 0.0);
        out.im.assign(n_tgt_, 0.0);
        const std::size_t n1 = dim_ > 1 ? axes_[1].n : 1;
        const std::size_t n2 = dim_ > 2 ? axes_[2].n : 1;
        for (std::size_t t = 0; t < n_tgt_; ++t) {
            const double* w0 = &interp_w_[(t * dim_ + 0) * k];
            const long k0 = interp_i0_[t * dim_ + 0];
            std::complex<double> acc{0.0, 0.0};
            if (dim_ == 1) {
                for (std::size_t q = 0; q < k; ++q)
                    acc += grid[fft_index(0, k0 + static_cast<long>(q))] * w0[q];
            } else if (dim_ == 2) {
                const double* w1 = &interp_w_[(t * dim_ + 1) * k];
                const long k1 = interp_i0_[t * dim_ + 1];
                for (std::size_t q0 = 0; q0 < k; ++q0) {
                    const std::complex<double>* row =
                        grid + fft_index(0, k0 + static_cast<long>(q0)) * n1;
                    std::complex<double> s{0.0, 0.0};
                    for (std::size_t q1 = 0; q1 < k; ++q1)
                        s += row[fft_index(1, k1 + static_cast<long>(q1))] * w1[q1];
                    acc += s * w0[q0];
                }
            } else {
                const double* w1 = &interp_w_[(t * dim_ + 1) * k];
                const double* w2 = &interp_w_[(t * dim_ + 2) * k];
                const long k1 = interp_i0_[t * dim_ + 1];
                const long k2 = interp_i0_[t * dim_ + 2];
                for (std::size_t q0 = 0; q0 < k; ++q0) {
                    const std::size_t base0 = fft_index(0, k0 + static_cast<long>(q0)) * n1;
                    std::complex<double> s0{0.0, 0.0};
                    for (std::size_t q1 = 0; q1 < k; ++q1) {
                        const std::complex<double>* row =
                            grid + (base0 + fft_index(1, k1 + static_cast<long>(q1))) * n2;
                        std::complex<double> s1{0.0, 0.0};
                        for (std::size_t q2 = 0; q2 < k; ++q2)
                            s1 += row[fft_index(2, k2 + static_cast<long>(q2))] * w2[q2];
                        s0 += s1 * w1[q1];
                    }
                    acc += s0 * w0[q0];
                }
            }
            acc *= post_[t];
            out.re[t] = acc.real();
            out.im[t] = acc.imag();
        }
    }

    std::size_t dim_ = 0, n_src_ = 0, n_tgt_ = 0, total_cells_ = 0;
    int isign_ = -1;
    long width_ = 0;
    Axis axes_[3];
    std::vector<double> spread_w_, interp_w_;
    std::vector<long> spread_i0_, interp_i0_;
    std::vector<std::complex<double>> pre_, post_;
};

}  // namespace detail

// ============================================================================
// fast entry points

inline ComplexVector nufft_forward(const PointCloud& cloud, const ComplexVector& u,
                                   const Matrix& freqs, const NufftAccuracy& acc = {}) {
    validate_accuracy(acc);
    detail::check_transform_args(cloud, u, cloud.length(), freqs);
    if (freqs.rows() <= 64 && !acc.force_gridded) return nudft_forward(cloud, u, freqs);
    detail::Type3Plan plan(cloud.coords, freqs, -1, acc);
    detail::Type3Workspace ws;
    ComplexVector out;
    plan.execute(u, out, ws);
    return out;
}

inline ComplexVector nufft_adjoint(const PointCloud& cloud, const ComplexVector& b,
                                   const Matrix& freqs, const NufftAccuracy& acc = {}) {
    validate_accuracy(acc);
    detail::check_transform_args(cloud, b, freqs.rows(), freqs);
    if (freqs.rows() <= 64 && !acc.force_gridded) return nudft_adjoint(cloud, b, freqs);
    detail::Type3Plan plan(freqs, cloud.coords, +1, acc);
    detail::Type3Workspace ws;
    ComplexVector out;
    plan.execute(b, out, ws);
    return out;
}

}  // namespace frpe
