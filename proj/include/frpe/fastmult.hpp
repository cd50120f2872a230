#pragma once

// Fast mask-vector products. The relative-position mask
//
//   M_ij = sum_s a_s F_f(xi_s) cos(2*pi xi_s . (r_i - r_j))
//
// is never materialized: M u is computed as a forward nonuniform transform,
// a per-frequency modulation, and an adjoint transform,
//
//   w_i = sum_s a_s F_f(xi_s) F_P(xi_s) exp(2*pi*i xi_s . r_i),
//   F_P(xi) = sum_l u_l exp(-2*pi*i xi . r_l).
//
// Symmetric (+xi, -xi paired) quadrature makes the mask real; the imaginary
// residue of w is checked against a tolerance and dropped. Backends: direct
// O(L*S) sums, or the gridded O((L+S) log(L+S)) transforms from nudft.hpp.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "frpe/core.hpp"
#include "frpe/nudft.hpp"

namespace frpe {

enum class FastmultBackend { direct, gridded };

struct MaskSpec {
    QuadratureSet quad;
    ModulationFunction modulation;
};

// warmup blend coefficient: alpha ramps 0 -> 1 along a half-cosine
struct BlendSchedule {
    double alpha = 1.0;

    static BlendSchedule at_step(double step, double total) {
        if (!(total > 0.0)) throw std::invalid_argument("blend: total steps must be positive");
        const double t = std::min(step / total, 1.0);
        return BlendSchedule{0.5 * (1.0 - std::cos(kPi * t))};
    }
};

// ============================================================================
// FastmultEngine: plans one (cloud, mask) pair, then applies to many vectors.
// apply() is const and safe to call from several threads at once.

// reusable buffers for repeated apply calls; give each thread its own
struct FastmultScratch {
    std::vector<double> wim, bre, bim;
    ComplexVector cin, cmid, cout;
    detail::Type3Workspace ws;
};

class FastmultEngine {
public:
    FastmultEngine(const PointCloud& cloud, const MaskSpec& spec, FastmultBackend backend,
                   const NufftAccuracy& acc = {})
        : backend_(backend), acc_(acc) {
        validate_accuracy(acc);
        if (!spec.quad.symmetric)
            throw std::invalid_argument("complex mask: quadrature must be symmetric (+xi/-xi pairs)");
        if (spec.quad.dim() != cloud.dim())
            throw std::invalid_argument("length mismatch between quadrature dim and cloud dim");
        l_ = cloud.length();
        s_ = spec.quad.size();
        coeff_.resize(s_);
        for (std::size_t s = 0; s < s_; ++s)
            coeff_[s] = spec.quad.coeffs[s] * spec.modulation.eval(spec.quad.freqs.row(s),
                                                                   spec.quad.dim());
        const bool use_grid = backend_ == FastmultBackend::gridded &&
                              (s_ > 64 || acc_.force_gridded);
        if (use_grid) {
            fwd_plan_ = std::make_unique<detail::Type3Plan>(cloud.coords, spec.quad.freqs, -1, acc_);
            adj_plan_ = std::make_unique<detail::Type3Plan>(spec.quad.freqs, cloud.coords, +1, acc_);
            residue_tol_ = std::max(1e-10, 10.0 * acc_.epsilon);
        } else {
            // phase tables: cos/sin(2*pi xi_s . r_i), shared by both directions
            cos_ = Matrix(s_, l_);
            sin_ = Matrix(s_, l_);
            const std::size_t d = cloud.dim();
            for (std::size_t s = 0; s < s_; ++s) {
                const double* xi = spec.quad.freqs.row(s);
                for (std::size_t i = 0; i < l_; ++i) {
                    const double* r = cloud.coords.row(i);
                    double dot = 0.0;
                    for (std::size_t a = 0; a < d; ++a) dot += xi[a] * r[a];
                    cos_(s, i) = std::cos(kTwoPi * dot);
                    sin_(s, i) = std::sin(kTwoPi * dot);
                }
            }
            residue_tol_ = 1e-10;
        }
    }

    std::size_t length() const { return l_; }
    std::size_t quadrature_size() const { return s_; }

    std::vector<double> apply(const std::vector<double>& u) const {
        if (u.size() != l_)
            throw std::invalid_argument("length mismatch between input vector and cloud");
        FastmultScratch scratch;
        std::vector<double> w(l_);
        apply(u.data(), w.data(), scratch);
        return w;
    }

    // allocation-free form for tight loops: u and w hold length() doubles
    void apply(const double* u, double* w, FastmultScratch& scratch) const {
        if (!all_finite(u, l_)) throw std::invalid_argument("non-finite input");

        scratch.wim.assign(l_, 0.0);
        double* wim = scratch.wim.data();
        if (fwd_plan_) {
            scratch.cin.re.assign(u, u + l_);
            scratch.cin.im.assign(l_, 0.0);
            fwd_plan_->execute(scratch.cin, scratch.cmid, scratch.ws);
            for (std::size_t s = 0; s < s_; ++s) {
                scratch.cmid.re[s] *= coeff_[s];
                scratch.cmid.im[s] *= coeff_[s];
            }
            adj_plan_->execute(scratch.cmid, scratch.cout, scratch.ws);
            std::copy(scratch.cout.re.begin(), scratch.cout.re.end(), w);
            std::copy(scratch.cout.im.begin(), scratch.cout.im.end(), wim);
        } else {
            // forward: F_P(xi_s) = sum_i u_i (cos - i sin); modulate; adjoint
            std::fill(w, w + l_, 0.0);
            scratch.bre.assign(s_, 0.0);
            scratch.bim.assign(s_, 0.0);
            for (std::size_t s = 0; s < s_; ++s) {
                const double* cs = cos_.row(s);
                const double* sn = sin_.row(s);
                double re = 0.0, im = 0.0;
                for (std::size_t i = 0; i < l_; ++i) {
                    re += u[i] * cs[i];
                    im -= u[i] * sn[i];
                }
                scratch.bre[s] = coeff_[s] * re;
                scratch.bim[s] = coeff_[s] * im;
            }
            for (std::size_t s = 0; s < s_; ++s) {
                const double* cs = cos_.row(s);
                const double* sn = sin_.row(s);
                const double br = scratch.bre[s], bi = scratch.bim[s];
                for (std::size_t i = 0; i < l_; ++i) {
                    w[i] += br * cs[i] - bi * sn[i];
                    wim[i] += br * sn[i] + bi * cs[i];
                }
            }
        }

        // the mask is real under the symmetry precondition: check, then drop
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < l_; ++i) {
            num += wim[i] * wim[i];
            den += w[i] * w[i] + wim[i] * wim[i];
        }
        if (std::sqrt(num) > residue_tol_ * std::max(std::sqrt(den), 1e-30))
            throw std::runtime_error("imaginary residue exceeds tolerance: " +
                                     std::to_string(std::sqrt(num / std::max(den, 1e-300))));
    }

private:
    FastmultBackend backend_;
    NufftAccuracy acc_;
    std::size_t l_ = 0, s_ = 0;
    std::vector<double> coeff_;  // a_s * F_f(xi_s)
    Matrix cos_, sin_;
    std::unique_ptr<detail::Type3Plan> fwd_plan_, adj_plan_;
    double residue_tol_ = 1e-10;
};

inline std::vector<double> fastmult(const PointCloud& cloud, const MaskSpec& spec,
                                    const std::vector<double>& u,
                                    FastmultBackend backend = FastmultBackend::direct,
                                    const NufftAccuracy& acc = {}) {
    return FastmultEngine(cloud, spec, backend, acc).apply(u);
}

// dense oracle: builds the full L x L mask. The cos difference expands as
// cos a cos b + sin a sin b, so the build is two rank-S symmetric products
// instead of L^2 S cosine evaluations.
inline Matrix dense_quadrature_mask(const PointCloud& cloud, const MaskSpec& spec) {
    if (spec.quad.dim() != cloud.dim())
        throw std::invalid_argument("length mismatch between quadrature dim and cloud dim");
    const std::size_t l = cloud.length(), s = spec.quad.size(), d = cloud.dim();
    Matrix c(l, s), sn(l, s);
    std::vector<double> coeff(s);
    for (std::size_t k = 0; k < s; ++k) {
        coeff[k] = spec.quad.coeffs[k] * spec.modulation.eval(spec.quad.freqs.row(k), d);
        const double* xi = spec.quad.freqs.row(k);
        for (std::size_t i = 0; i < l; ++i) {
            const double* r = cloud.coords.row(i);
            double dot = 0.0;
            for (std::size_t a = 0; a < d; ++a) dot += xi[a] * r[a];
            c(i, k) = std::cos(kTwoPi * dot);
            sn(i, k) = std::sin(kTwoPi * dot);
        }
    }
    Matrix mask(l, l);
    for (std::size_t i = 0; i < l; ++i) {
        const double* ci = c.row(i);
        const double* si = sn.row(i);
        for (std::size_t j = 0; j < l; ++j) {
            const double* cj = c.row(j);
            const double* sj = sn.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < s; ++k)
                acc += coeff[k] * (ci[k] * cj[k] + si[k] * sj[k]);
            mask(i, j) = acc;
        }
    }
    return mask;
}

// closed-form continuous-limit mask value for F_f(xi) = exp(-lambda ||xi||)
inline double ideal_mask_value(const std::vector<double>& z, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("ideal mask: lambda must be positive");
    double n2 = 0.0;
    for (double x : z) n2 += x * x;
    const double q = lambda * lambda + 4.0 * kPi * kPi * n2;
    switch (z.size()) {
        case 1:
            return 2.0 * lambda / q;
        case 3:
            return 8.0 * kPi * lambda / (q * q);
        case 2:
            throw std::invalid_argument("no closed form wired for d = 2");
        default:
            throw std::invalid_argument("ideal mask: d must be 1, 2, or 3");
    }
}

// blended product: (1 - alpha) * (sum_l u_l) * 1_L + alpha * (M u).
// Equivalent to using the mask 1 + alpha (M - 1), ones = neutral mask.
inline std::vector<double> blended_fastmult(const PointCloud& cloud, const MaskSpec& spec,
                                            const std::vector<double>& u,
                                            const BlendSchedule& blend,
                                            FastmultBackend backend = FastmultBackend::direct,
                                            const NufftAccuracy& acc = {}) {
    if (!(blend.alpha >= 0.0 && blend.alpha <= 1.0))
        throw std::invalid_argument("blend: alpha must lie in [0, 1]");
    std::vector<double> w = fastmult(cloud, spec, u, backend, acc);
    double total = 0.0;
    for (double x : u) total += x;
    for (double& x : w) x = (1.0 - blend.alpha) * total + blend.alpha * x;
    return w;
}

}  // namespace frpe
