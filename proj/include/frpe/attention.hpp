#pragma once

// Attention variants. Low-rank paths (performer_attention,
// masked_lowrank_attention) never materialize an L x L matrix; the dense
// routines exist as oracles and baselines.
//
// Masked low-rank attention combines a feature map phi with a
// relative-position mask M applied through fastmult:
//
//   out_i = phi(q_i)^T D1_i / max(phi(q_i)^T D2_i, eps)
//   D1(:, a*d_v + b) = M (phiK(:, a) . V(:, b)),   D2(:, a) = M phiK(:, a)
//
// so the mask acts once per combined column, m*d_v + m products in total,
// each O(L + S) via the gridded backend or O(L*S) direct.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <thread>
#include <vector>

#include "frpe/core.hpp"
#include "frpe/fastmult.hpp"

namespace frpe {

struct AttentionOutput {
    Matrix embeddings;                  // L x d_v
    std::vector<double> denominators;   // post-clamp, length L
    std::size_t clamped_rows = 0;       // rows whose raw denominator was below eps
};

struct MaskedAttentionOptions {
    FastmultBackend backend = FastmultBackend::direct;
    NufftAccuracy acc = {};
    double eps_denominator = 1e-8;
    std::size_t threads = 1;  // parallelism over mask-product columns
};

// phi applied row-wise: L x d_in -> L x m
inline Matrix apply_feature_map(const FeatureMap& fm, const Matrix& x) {
    if (x.rows() == 0 || x.cols() == 0)
        throw std::invalid_argument("feature map: empty input");
    if (fm.kind == FeatureMap::Kind::relu) {
        if (fm.m != x.cols())
            throw std::invalid_argument("length mismatch between feature map and input width");
        Matrix y(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i)
            y.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
        return y;
    }
    // positive_random: phi(x) = exp(Wx - ||x||^2/2)/sqrt(m)
    if (fm.proj.cols() != x.cols())
        throw std::invalid_argument("length mismatch between feature map and input width");
    Matrix y = matmul_transb(x, fm.proj);  // L x m, rows W x_i
    const double scale = 1.0 / std::sqrt(static_cast<double>(fm.m));
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double n2 = 0.0;
        const double* xi = x.row(i);
        for (std::size_t a = 0; a < x.cols(); ++a) n2 += xi[a] * xi[a];
        double* yi = y.row(i);
        for (std::size_t a = 0; a < fm.m; ++a) yi[a] = scale * std::exp(yi[a] - 0.5 * n2);
    }
    return y;
}

namespace detail {

inline void validate_batch_shapes(const AttentionBatch& batch) {
    if (batch.q.rows() == 0 || batch.q.rows() != batch.k.rows() ||
        batch.q.rows() != batch.v.rows())
        throw std::invalid_argument("length mismatch between Q, K, and V rows");
    if (batch.q.cols() != batch.k.cols())
        throw std::invalid_argument("length mismatch between Q and K widths");
    if (batch.q.cols() == 0 || batch.v.cols() == 0)
        throw std::invalid_argument("length mismatch: empty Q/K/V columns");
    if (!all_finite(batch.q) || !all_finite(batch.k) || !all_finite(batch.v))
        throw std::invalid_argument("non-finite input in attention batch");
}

// embeddings/denominators from factored numerator rows and raw denominators
inline AttentionOutput normalize_rows(Matrix num, std::vector<double> raw, double eps) {
    AttentionOutput out;
    out.denominators.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        double den = raw[i];
        if (den < eps) {
            den = eps;
            ++out.clamped_rows;
        }
        out.denominators[i] = den;
        double* row = num.row(i);
        for (std::size_t b = 0; b < num.cols(); ++b) row[b] /= den;
    }
    out.embeddings = std::move(num);
    return out;
}

}  // namespace detail

// dense softmax attention, numerically stabilized by the row maximum.
// Reported denominators are the stabilized sums exp(s_ij - max_j s_ij).
inline AttentionOutput dense_softmax_attention(const AttentionBatch& batch) {
    detail::validate_batch_shapes(batch);
    const std::size_t l = batch.q.rows(), dv = batch.v.cols();
    const double inv = 1.0 / std::sqrt(static_cast<double>(batch.q.cols()));
    Matrix scores = matmul_transb(batch.q, batch.k);  // L x L
    AttentionOutput out;
    out.embeddings = Matrix(l, dv);
    out.denominators.resize(l);
    for (std::size_t i = 0; i < l; ++i) {
        double* si = scores.row(i);
        double mx = -1e300;
        for (std::size_t j = 0; j < l; ++j) {
            si[j] *= inv;
            mx = std::max(mx, si[j]);
        }
        double den = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
            si[j] = std::exp(si[j] - mx);
            den += si[j];
        }
        out.denominators[i] = den;
        double* ei = out.embeddings.row(i);
        for (std::size_t j = 0; j < l; ++j) {
            const double w = si[j] / den;
            const double* vj = batch.v.row(j);
            for (std::size_t b = 0; b < dv; ++b) ei[b] += w * vj[b];
        }
    }
    return out;
}

// dense oracle for the masked low-rank path: A = (phiQ phiK^T) .* mask
inline AttentionOutput dense_masked_attention(const AttentionBatch& batch, const FeatureMap& fm,
                                              const Matrix& mask, double eps_denominator = 1e-8) {
    detail::validate_batch_shapes(batch);
    const std::size_t l = batch.q.rows();
    if (mask.rows() != l || mask.cols() != l)
        throw std::invalid_argument("length mismatch between mask and batch");
    Matrix phi_q = apply_feature_map(fm, batch.q);
    Matrix phi_k = apply_feature_map(fm, batch.k);
    Matrix a = matmul_transb(phi_q, phi_k);  // L x L
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] *= mask.data()[i];
    Matrix num = matmul(a, batch.v);
    std::vector<double> raw(l, 0.0);
    for (std::size_t i = 0; i < l; ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < l; ++j) raw[i] += ai[j];
    }
    return detail::normalize_rows(std::move(num), std::move(raw), eps_denominator);
}

// unmasked low-rank attention: phiQ (phiK^T V) / clamp(phiQ (phiK^T 1))
inline AttentionOutput performer_attention(const AttentionBatch& batch, const FeatureMap& fm,
                                           double eps_denominator = 1e-8) {
    detail::validate_batch_shapes(batch);
    const std::size_t l = batch.q.rows();
    Matrix phi_q = apply_feature_map(fm, batch.q);
    Matrix phi_k = apply_feature_map(fm, batch.k);
    Matrix kv = matmul_transa(phi_k, batch.v);  // m x d_v
    std::vector<double> ksum(fm.m, 0.0);
    for (std::size_t i = 0; i < l; ++i) {
        const double* ki = phi_k.row(i);
        for (std::size_t a = 0; a < fm.m; ++a) ksum[a] += ki[a];
    }
    Matrix num = matmul(phi_q, kv);  // L x d_v
    std::vector<double> raw(l, 0.0);
    for (std::size_t i = 0; i < l; ++i) {
        const double* qi = phi_q.row(i);
        for (std::size_t a = 0; a < fm.m; ++a) raw[i] += qi[a] * ksum[a];
    }
    return detail::normalize_rows(std::move(num), std::move(raw), eps_denominator);
}

// masked low-rank attention; one FastmultEngine serves all m*d_v + m columns.
inline AttentionOutput masked_lowrank_attention(const AttentionBatch& batch,
                                                const PointCloud& cloud, const FeatureMap& fm,
                                                const MaskSpec& spec,
                                                const MaskedAttentionOptions& options = {}) {
    validate_batch(batch, cloud);
    const std::size_t l = cloud.length(), dv = batch.v.cols();
    Matrix phi_q = apply_feature_map(fm, batch.q);
    Matrix phi_k = apply_feature_map(fm, batch.k);
    const std::size_t m = fm.m;

    // vectorized K-V outer products: V1(i, a*dv + b) = phiK(i,a) V(i,b)
    Matrix v1(l, m * dv);
    for (std::size_t i = 0; i < l; ++i) {
        const double* ki = phi_k.row(i);
        const double* vi = batch.v.row(i);
        double* out = v1.row(i);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < dv; ++b) out[a * dv + b] = ki[a] * vi[b];
    }

    FastmultEngine engine(cloud, spec, options.backend, options.acc);
    Matrix d1(l, m * dv), d2(l, m);
    const std::size_t total = m * dv + m;
    // buffers live outside the column loop; each worker reuses its own set
    auto run_column = [&](std::size_t c, std::vector<double>& in, std::vector<double>& w,
                          FastmultScratch& scratch) {
        const Matrix& src = c < m * dv ? v1 : phi_k;
        const std::size_t col = c < m * dv ? c : c - m * dv;
        for (std::size_t i = 0; i < l; ++i) in[i] = src(i, col);
        engine.apply(in.data(), w.data(), scratch);
        Matrix& dst = c < m * dv ? d1 : d2;
        for (std::size_t i = 0; i < l; ++i) dst(i, col) = w[i];
    };
    const std::size_t workers = std::max<std::size_t>(1, options.threads);
    if (workers == 1) {
        std::vector<double> in(l), w(l);
        FastmultScratch scratch;
        for (std::size_t c = 0; c < total; ++c) run_column(c, in, w, scratch);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t)
            pool.emplace_back([&, t] {
                std::vector<double> in(l), w(l);
                FastmultScratch scratch;
                for (std::size_t c = t; c < total; c += workers) run_column(c, in, w, scratch);
            });
        for (auto& th : pool) th.join();
    }

    // contract with phiQ: num(i,b) = sum_a phiQ(i,a) D1(i, a*dv+b)
    Matrix num(l, dv);
    std::vector<double> raw(l, 0.0);
    for (std::size_t i = 0; i < l; ++i) {
        const double* qi = phi_q.row(i);
        const double* d1i = d1.row(i);
        const double* d2i = d2.row(i);
        double* ni = num.row(i);
        for (std::size_t a = 0; a < m; ++a) {
            const double qa = qi[a];
            raw[i] += qa * d2i[a];
            const double* block = d1i + a * dv;
            for (std::size_t b = 0; b < dv; ++b) ni[b] += qa * block[b];
        }
    }
    return detail::normalize_rows(std::move(num), std::move(raw), options.eps_denominator);
}

}  // namespace frpe
