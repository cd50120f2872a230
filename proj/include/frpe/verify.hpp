#pragma once

// Runtime verification suite: every fast path checked against an independent
// slow path, plus the structural invariants. Each check reports a worst-case
// metric over a list of sequence lengths against its tolerance.

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "frpe/attention.hpp"
#include "frpe/core.hpp"
#include "frpe/encodings.hpp"
#include "frpe/fastmult.hpp"
#include "frpe/io.hpp"
#include "frpe/nudft.hpp"

namespace frpe {

struct CheckResult {
    std::string name;
    bool pass = false;
    double metric = 0.0;     // worst observed value
    double tolerance = 0.0;  // pass iff metric <= tolerance
};

struct VerifyOptions {
    std::vector<std::size_t> lengths{1, 2, 17, 64, 256};
    double epsilon = 1e-6;
    RngSeed seed{2024};
    bool inject_fault = false;  // test hook: corrupt one fastmult output
};

namespace detail {

struct VerifyContext {
    const VerifyOptions& opt;
    std::vector<CheckResult>& results;

    void report(const std::string& name, double metric, double tol) {
        results.push_back({name, metric <= tol, metric, tol});
    }

    PointCloud cloud(std::size_t l, std::size_t d, std::uint64_t salt,
                     double scale = 1.0) const {
        Rng rng(derive_seed(opt.seed, salt * 7919 + l * 13 + d));
        Matrix coords(l, d);
        for (std::size_t i = 0; i < coords.size(); ++i)
            coords.data()[i] = scale * rng.uniform01();
        return PointCloud{std::move(coords)};
    }

    std::vector<double> vec(std::size_t n, std::uint64_t salt) const {
        Rng rng(derive_seed(opt.seed, salt * 104729 + n));
        std::vector<double> u(n);
        for (double& x : u) x = rng.normal();
        return u;
    }
};

inline std::vector<double> dense_matvec(const Matrix& m, const std::vector<double>& u) {
    std::vector<double> out(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out[i] += m(i, j) * u[j];
    return out;
}

// --------------------------------------------------------------------------
// transform checks

inline void check_nudft_adjointness(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        for (std::size_t d : {std::size_t{1}, std::size_t{3}}) {
            PointCloud cloud = ctx.cloud(l, d, 11);
            const std::size_t s = 48;
            Rng rng(derive_seed(ctx.opt.seed, 900 + l + d));
            Matrix freqs(s, d);
            for (std::size_t i = 0; i < freqs.size(); ++i)
                freqs.data()[i] = 4.0 * rng.uniform(-1.0, 1.0);
            ComplexVector u = ComplexVector::from_real(ctx.vec(l, 12));
            ComplexVector b = ComplexVector::from_real(ctx.vec(s, 13));
            ComplexVector fu = nudft_forward(cloud, u, freqs);
            ComplexVector fb = nudft_adjoint(cloud, b, freqs);
            // <F u, b> = <u, F* b> where F* is the adjoint (conjugate pairing)
            double lhs_re = 0.0, lhs_im = 0.0, rhs_re = 0.0, rhs_im = 0.0, scale = 0.0;
            for (std::size_t k = 0; k < s; ++k) {
                lhs_re += fu.re[k] * b.re[k] + fu.im[k] * b.im[k];
                lhs_im += fu.im[k] * b.re[k] - fu.re[k] * b.im[k];
                scale += std::abs(fu.re[k]) + std::abs(fu.im[k]);
            }
            for (std::size_t i = 0; i < l; ++i) {
                rhs_re += u.re[i] * fb.re[i] + u.im[i] * fb.im[i];
                rhs_im += u.re[i] * fb.im[i] - u.im[i] * fb.re[i];
            }
            const double err = std::hypot(lhs_re - rhs_re, lhs_im + rhs_im) /
                               std::max(scale, 1e-30);
            worst = std::max(worst, err);
        }
    }
    ctx.report("nudft adjointness", worst, 1e-12);
}

inline void check_nufft_vs_direct(VerifyContext& ctx) {
    NufftAccuracy acc;
    acc.epsilon = ctx.opt.epsilon;
    acc.force_gridded = true;
    double worst_f = 0.0, worst_a = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        for (std::size_t d : {std::size_t{1}, std::size_t{3}}) {
            PointCloud cloud = ctx.cloud(l, d, 21);
            const std::size_t s = 80;
            Rng rng(derive_seed(ctx.opt.seed, 910 + l + d));
            Matrix freqs(s, d);
            for (std::size_t i = 0; i < freqs.size(); ++i)
                freqs.data()[i] = 6.0 * rng.uniform(-1.0, 1.0);
            ComplexVector u = ComplexVector::from_real(ctx.vec(l, 22));
            ComplexVector fast = nufft_forward(cloud, u, freqs, acc);
            ComplexVector slow = nudft_forward(cloud, u, freqs);
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < s; ++k) {
                num += (fast.re[k] - slow.re[k]) * (fast.re[k] - slow.re[k]) +
                       (fast.im[k] - slow.im[k]) * (fast.im[k] - slow.im[k]);
                den += slow.re[k] * slow.re[k] + slow.im[k] * slow.im[k];
            }
            worst_f = std::max(worst_f, std::sqrt(num / std::max(den, 1e-300)));

            ComplexVector b = ComplexVector::from_real(ctx.vec(s, 23));
            fast = nufft_adjoint(cloud, b, freqs, acc);
            slow = nudft_adjoint(cloud, b, freqs);
            num = den = 0.0;
            for (std::size_t i = 0; i < l; ++i) {
                num += (fast.re[i] - slow.re[i]) * (fast.re[i] - slow.re[i]) +
                       (fast.im[i] - slow.im[i]) * (fast.im[i] - slow.im[i]);
                den += slow.re[i] * slow.re[i] + slow.im[i] * slow.im[i];
            }
            worst_a = std::max(worst_a, std::sqrt(num / std::max(den, 1e-300)));
        }
    }
    const double tol = 10.0 * ctx.opt.epsilon;
    ctx.report("nufft forward vs direct", worst_f, tol);
    ctx.report("nufft adjoint vs direct", worst_a, tol);
}

// --------------------------------------------------------------------------
// fastmult checks

inline MaskSpec verify_mask_spec(const VerifyContext& ctx, std::size_t d, std::size_t s,
                                 std::uint64_t salt) {
    return MaskSpec{sample_cauchy_quadrature(d, s, 1.0, derive_seed(ctx.opt.seed, salt)),
                    ModulationFunction::laplace(1.0)};
}

inline void check_fastmult_vs_dense(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        for (std::size_t d : {std::size_t{1}, std::size_t{3}}) {
            PointCloud cloud = ctx.cloud(l, d, 31);
            MaskSpec spec = verify_mask_spec(ctx, d, 16, 31 + l + d);
            std::vector<double> u = ctx.vec(l, 32);
            std::vector<double> fast = fastmult(cloud, spec, u, FastmultBackend::direct);
            if (ctx.opt.inject_fault) fast[0] = -fast[0] - 1.0;
            std::vector<double> slow = dense_matvec(dense_quadrature_mask(cloud, spec), u);
            worst = std::max(worst, rel_l2_error(fast, slow));
        }
    }
    ctx.report("fastmult vs dense oracle", worst, 1e-10);
}

inline void check_fastmult_gridded_vs_dense(VerifyContext& ctx) {
    NufftAccuracy acc;
    acc.epsilon = ctx.opt.epsilon;
    acc.force_gridded = true;
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        for (std::size_t d : {std::size_t{1}, std::size_t{3}}) {
            PointCloud cloud = ctx.cloud(l, d, 41, 0.5);
            MaskSpec spec = verify_mask_spec(ctx, d, 16, 41 + l + d);
            std::vector<double> u = ctx.vec(l, 42);
            std::vector<double> fast = fastmult(cloud, spec, u, FastmultBackend::gridded, acc);
            std::vector<double> slow = dense_matvec(dense_quadrature_mask(cloud, spec), u);
            worst = std::max(worst, rel_l2_error(fast, slow));
        }
    }
    ctx.report("fastmult gridded vs dense oracle", worst,
               std::max(1e-10, 10.0 * ctx.opt.epsilon));
}

inline void check_fastmult_symmetry(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        PointCloud cloud = ctx.cloud(l, 3, 51);
        MaskSpec spec = verify_mask_spec(ctx, 3, 12, 51 + l);
        std::vector<double> u = ctx.vec(l, 52), v = ctx.vec(l, 53);
        std::vector<double> mu = fastmult(cloud, spec, u), mv = fastmult(cloud, spec, v);
        const double a = std::inner_product(u.begin(), u.end(), mv.begin(), 0.0);
        const double b = std::inner_product(v.begin(), v.end(), mu.begin(), 0.0);
        worst = std::max(worst, std::abs(a - b) / (std::abs(a) + std::abs(b) + 1.0));
    }
    ctx.report("fastmult symmetry", worst, 1e-12);
}

inline void check_fastmult_translation(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        PointCloud cloud = ctx.cloud(l, 3, 61);
        MaskSpec spec = verify_mask_spec(ctx, 3, 12, 61 + l);
        std::vector<double> u = ctx.vec(l, 62);
        PointCloud shifted = cloud;
        for (std::size_t i = 0; i < l; ++i)
            for (std::size_t a = 0; a < 3; ++a) shifted.coords(i, a) += 0.31 * (a + 1.0);
        std::vector<double> w0 = fastmult(cloud, spec, u);
        std::vector<double> w1 = fastmult(shifted, spec, u);
        worst = std::max(worst, rel_l2_error(w1, w0));
    }
    ctx.report("fastmult translation invariance", worst, 1e-12);
}

inline void check_fastmult_permutation(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        if (l < 2) continue;
        PointCloud cloud = ctx.cloud(l, 2, 71);
        MaskSpec spec = verify_mask_spec(ctx, 2, 12, 71 + l);
        std::vector<double> u = ctx.vec(l, 72);
        Rng rng(derive_seed(ctx.opt.seed, 73 + l));
        std::vector<std::size_t> perm(l);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = l; i > 1; --i) std::swap(perm[i - 1], perm[rng.next_u64() % i]);
        PointCloud pcloud = cloud;
        std::vector<double> pu(l);
        for (std::size_t i = 0; i < l; ++i) {
            pu[i] = u[perm[i]];
            for (std::size_t a = 0; a < 2; ++a) pcloud.coords(i, a) = cloud.coords(perm[i], a);
        }
        std::vector<double> w = fastmult(cloud, spec, u);
        std::vector<double> wp = fastmult(pcloud, spec, pu);
        std::vector<double> expect(l);
        for (std::size_t i = 0; i < l; ++i) expect[i] = w[perm[i]];
        worst = std::max(worst, rel_l2_error(wp, expect));
    }
    ctx.report("fastmult permutation equivariance", worst, 1e-12);
}

inline void check_neutral_mask(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        PointCloud cloud = ctx.cloud(l, 3, 81);
        Matrix zero(1, 3);
        MaskSpec spec{QuadratureSet{std::move(zero), {1.0}, true}, ModulationFunction::one()};
        std::vector<double> u = ctx.vec(l, 82);
        const double total = std::accumulate(u.begin(), u.end(), 0.0);
        std::vector<double> w = fastmult(cloud, spec, u);
        for (double x : w)
            worst = std::max(worst, std::abs(x - total) / (std::abs(total) + 1.0));
    }
    ctx.report("neutral mask uniform averaging", worst, 1e-12);
}

inline void check_blend_endpoints(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        PointCloud cloud = ctx.cloud(l, 1, 91);
        MaskSpec spec = verify_mask_spec(ctx, 1, 8, 91 + l);
        std::vector<double> u = ctx.vec(l, 92);
        const double total = std::accumulate(u.begin(), u.end(), 0.0);
        std::vector<double> full = fastmult(cloud, spec, u);
        std::vector<double> at0 = blended_fastmult(cloud, spec, u, BlendSchedule{0.0});
        std::vector<double> at1 = blended_fastmult(cloud, spec, u, BlendSchedule{1.0});
        for (double x : at0)
            worst = std::max(worst, std::abs(x - total) / (std::abs(total) + 1.0));
        worst = std::max(worst, rel_l2_error(at1, full));
    }
    ctx.report("blend endpoints", worst, 1e-12);
}

// --------------------------------------------------------------------------
// attention checks

inline AttentionBatch verify_batch(const VerifyContext& ctx, std::size_t l, std::size_t d_qk,
                                   std::size_t d_v, std::uint64_t salt) {
    Rng rng(derive_seed(ctx.opt.seed, salt * 31337 + l));
    AttentionBatch b;
    b.q = Matrix(l, d_qk);
    b.k = Matrix(l, d_qk);
    b.v = Matrix(l, d_v);
    for (std::size_t i = 0; i < b.q.size(); ++i) b.q.data()[i] = 0.1 + std::abs(rng.normal());
    for (std::size_t i = 0; i < b.k.size(); ++i) b.k.data()[i] = 0.1 + std::abs(rng.normal());
    for (std::size_t i = 0; i < b.v.size(); ++i) b.v.data()[i] = rng.normal();
    return b;
}

inline void check_masked_lowrank_vs_dense(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        for (std::size_t d : {std::size_t{1}, std::size_t{3}}) {
            PointCloud cloud = ctx.cloud(l, d, 101);
            MaskSpec spec = verify_mask_spec(ctx, d, 8, 101 + l + d);
            AttentionBatch batch = verify_batch(ctx, l, 4, 3, 102);
            FeatureMap fm = FeatureMap::relu(4);
            AttentionOutput fast = masked_lowrank_attention(batch, cloud, fm, spec);
            AttentionOutput slow =
                dense_masked_attention(batch, fm, dense_quadrature_mask(cloud, spec));
            worst = std::max(worst, rel_l2_error(fast.embeddings, slow.embeddings));
            worst = std::max(worst, rel_l2_error(fast.denominators, slow.denominators));
        }
    }
    ctx.report("masked low-rank vs dense attention", worst, 1e-10);
}

inline void check_performer_identity(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        AttentionBatch batch = verify_batch(ctx, l, 5, 2, 111);
        FeatureMap fm = FeatureMap::positive_random(7, 5, derive_seed(ctx.opt.seed, 112));
        Matrix ones(l, l);
        for (std::size_t i = 0; i < ones.size(); ++i) ones.data()[i] = 1.0;
        AttentionOutput fast = performer_attention(batch, fm);
        AttentionOutput slow = dense_masked_attention(batch, fm, ones);
        worst = std::max(worst, rel_l2_error(fast.embeddings, slow.embeddings));

        // neutral-mask low-rank path must collapse to the performer
        PointCloud cloud = ctx.cloud(l, 2, 113);
        Matrix zero(1, 2);
        MaskSpec spec{QuadratureSet{std::move(zero), {1.0}, true}, ModulationFunction::one()};
        AttentionOutput masked = masked_lowrank_attention(batch, cloud, fm, spec);
        worst = std::max(worst, rel_l2_error(masked.embeddings, fast.embeddings));
    }
    ctx.report("performer neutral-mask equivalence", worst, 1e-12);
}

inline void check_softmax_rows(VerifyContext& ctx) {
    double worst = 0.0;
    for (std::size_t l : ctx.opt.lengths) {
        AttentionBatch batch = verify_batch(ctx, l, 4, 3, 121);
        for (std::size_t i = 0; i < batch.v.size(); ++i) batch.v.data()[i] = 1.0;
        AttentionOutput out = dense_softmax_attention(batch);
        for (std::size_t i = 0; i < out.embeddings.size(); ++i)
            worst = std::max(worst, std::abs(out.embeddings.data()[i] - 1.0));
    }
    ctx.report("softmax attention row normalization", worst, 1e-12);
}

// --------------------------------------------------------------------------
// encoding checks

inline void check_rope_exactness(VerifyContext& ctx) {
    double worst = 0.0;
    Rng rng(derive_seed(ctx.opt.seed, 131));
    for (int inst = 0; inst < 20; ++inst) {
        const double theta = rng.uniform(0.05, 4.0);
        const std::size_t l = 16;
        Matrix coords(l, 1);
        for (std::size_t i = 0; i < l; ++i) coords(i, 0) = 3.0 * rng.uniform01();
        PointCloud cloud{std::move(coords)};
        MaskSpec spec{rope_quadrature(theta), ModulationFunction::one()};
        Matrix mask = dense_quadrature_mask(cloud, spec);
        for (std::size_t i = 0; i < l; ++i)
            for (std::size_t j = 0; j < l; ++j)
                worst = std::max(worst, std::abs(mask(i, j) - std::cos(theta * (cloud.coords(i, 0) -
                                                                                cloud.coords(j, 0)))));
    }
    ctx.report("rope mask exactness", worst, 1e-12);
}

inline void check_string_exactness(VerifyContext& ctx) {
    double worst = 0.0;
    Rng rng(derive_seed(ctx.opt.seed, 141));
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t p = 1 + inst % 4, d = 3, l = 10;
        Matrix omegas(p, d);
        for (std::size_t i = 0; i < omegas.size(); ++i) omegas.data()[i] = rng.uniform(-3.0, 3.0);
        Matrix coords(l, d);
        for (std::size_t i = 0; i < coords.size(); ++i) coords.data()[i] = 2.0 * rng.uniform01();
        PointCloud cloud{std::move(coords)};
        MaskSpec spec{string_quadrature(omegas), ModulationFunction::one()};
        Matrix mask = dense_quadrature_mask(cloud, spec);
        for (std::size_t i = 0; i < l; ++i)
            for (std::size_t j = 0; j < l; ++j) {
                double expect = 0.0;
                for (std::size_t k = 0; k < p; ++k) {
                    double dot = 0.0;
                    for (std::size_t a = 0; a < d; ++a)
                        dot += omegas(k, a) * (cloud.coords(i, a) - cloud.coords(j, a));
                    expect += std::cos(dot);
                }
                worst = std::max(worst, std::abs(mask(i, j) - expect / static_cast<double>(p)));
            }
    }
    ctx.report("string mask exactness", worst, 1e-12);
}

inline void check_cauchy_quadrature(VerifyContext& ctx) {
    // determinism and flat modulated weights
    double worst = 0.0;
    for (std::size_t d : {std::size_t{1}, std::size_t{2}, std::size_t{3}}) {
        QuadratureSet a = sample_cauchy_quadrature(d, 64, 1.0, derive_seed(ctx.opt.seed, 151));
        QuadratureSet b = sample_cauchy_quadrature(d, 64, 1.0, derive_seed(ctx.opt.seed, 151));
        for (std::size_t i = 0; i < a.freqs.size(); ++i)
            if (a.freqs.data()[i] != b.freqs.data()[i]) worst = 1.0;
        ModulationFunction mod = ModulationFunction::laplace(1.0);
        const double target = cauchy_mask_normalizer(d, 1.0) / 64.0;
        for (std::size_t k = 0; k < 64; ++k) {
            const double w = a.coeffs[k] * mod.eval(a.freqs.row(k), d);
            worst = std::max(worst, std::abs(w - target) / target);
        }
    }
    ctx.report("cauchy quadrature determinism and weights", worst, 1e-12);
}

inline void check_ideal_mask_forms(VerifyContext& ctx) {
    // closed forms vs an independent radial Simpson quadrature
    double worst = 0.0;
    const double lambda = 1.3;
    for (std::size_t d : {std::size_t{1}, std::size_t{3}}) {
        for (double r : {0.0, 0.4, 1.9}) {
            std::vector<double> z(d, 0.0);
            z[0] = r;
            const double b = kTwoPi * r;
            const double upper = 60.0 / lambda;
            const std::size_t n = 200000;
            const double h = upper / static_cast<double>(n);
            auto f = [&](double t) {
                const double damp = std::exp(-lambda * t);
                if (d == 1) return 2.0 * damp * std::cos(b * t);
                const double sinc = (b * t < 1e-8) ? 1.0 : std::sin(b * t) / (b * t);
                return 4.0 * kPi * t * t * damp * sinc;
            };
            double acc = f(0.0) + f(upper);
            for (std::size_t k = 1; k < n; ++k)
                acc += (k % 2 ? 4.0 : 2.0) * f(h * static_cast<double>(k));
            const double numeric = acc * h / 3.0;
            const double closed = ideal_mask_value(z, lambda);
            worst = std::max(worst, std::abs(closed - numeric) / (std::abs(closed) + 1e-6));
        }
    }
    ctx.report("ideal mask closed forms", worst, 1e-8);
}

inline void check_point_rope(VerifyContext& ctx) {
    double worst = 0.0;
    Rng rng(derive_seed(ctx.opt.seed, 161));
    const std::size_t l = 12, d_head = 12;
    Matrix coords(l, 3), q(l, d_head), k(l, d_head);
    for (std::size_t i = 0; i < coords.size(); ++i) coords.data()[i] = 2.0 * rng.uniform01();
    for (std::size_t i = 0; i < q.size(); ++i) {
        q.data()[i] = rng.normal();
        k.data()[i] = rng.normal();
    }
    PointCloud cloud{std::move(coords)};
    PointCloud shifted = cloud;
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t a = 0; a < 3; ++a) shifted.coords(i, a) += 1.1 * (a + 1.0);
    Matrix q0 = apply_point_rope(q, cloud), k0 = apply_point_rope(k, cloud);
    Matrix q1 = apply_point_rope(q, shifted), k1 = apply_point_rope(k, shifted);
    for (std::size_t i = 0; i < l; ++i) {
        double n0 = 0.0, n1 = 0.0;
        for (std::size_t a = 0; a < d_head; ++a) {
            n0 += q(i, a) * q(i, a);
            n1 += q0(i, a) * q0(i, a);
        }
        worst = std::max(worst, std::abs(std::sqrt(n1) - std::sqrt(n0)));
        for (std::size_t j = 0; j < l; ++j) {
            double dot0 = 0.0, dot1 = 0.0;
            for (std::size_t a = 0; a < d_head; ++a) {
                dot0 += q0(i, a) * k0(j, a);
                dot1 += q1(i, a) * k1(j, a);
            }
            worst = std::max(worst, std::abs(dot1 - dot0) / (std::abs(dot0) + 1.0));
        }
    }
    ctx.report("point rope invariances", worst, 1e-10);
}

}  // namespace detail

inline std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt = {}) {
    std::vector<CheckResult> results;
    detail::VerifyContext ctx{opt, results};
    detail::check_nudft_adjointness(ctx);
    detail::check_nufft_vs_direct(ctx);
    detail::check_fastmult_vs_dense(ctx);
    detail::check_fastmult_gridded_vs_dense(ctx);
    detail::check_fastmult_symmetry(ctx);
    detail::check_fastmult_translation(ctx);
    detail::check_fastmult_permutation(ctx);
    detail::check_neutral_mask(ctx);
    detail::check_blend_endpoints(ctx);
    detail::check_masked_lowrank_vs_dense(ctx);
    detail::check_performer_identity(ctx);
    detail::check_softmax_rows(ctx);
    detail::check_rope_exactness(ctx);
    detail::check_string_exactness(ctx);
    detail::check_cauchy_quadrature(ctx);
    detail::check_ideal_mask_forms(ctx);
    detail::check_point_rope(ctx);
    return results;
}

}  // namespace frpe
