#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "frpe/attention.hpp"

using namespace frpe;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t l, std::size_t d) {
    Matrix coords(l, d);
    for (std::size_t i = 0; i < coords.size(); ++i) coords.data()[i] = rng.uniform01();
    return PointCloud{std::move(coords)};
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

AttentionBatch random_batch(Rng& rng, std::size_t l, std::size_t d_qk, std::size_t d_v) {
    return AttentionBatch{random_matrix(rng, l, d_qk), random_matrix(rng, l, d_qk),
                          random_matrix(rng, l, d_v)};
}

QuadratureSet random_symmetric_quad(Rng& rng, std::size_t s, std::size_t d) {
    Matrix freqs(s, d);
    std::vector<double> coeffs(s);
    for (std::size_t k = 0; k + 1 < s; k += 2) {
        for (std::size_t a = 0; a < d; ++a) {
            const double x = 2.0 * rng.uniform(-1.0, 1.0);
            freqs(k, a) = x;
            freqs(k + 1, a) = -x;
        }
        coeffs[k] = coeffs[k + 1] = rng.uniform(0.1, 1.0);
    }
    return QuadratureSet{std::move(freqs), std::move(coeffs), true};
}

// positive q entries so relu features never zero out a full row
AttentionBatch positive_batch(Rng& rng, std::size_t l, std::size_t d_qk, std::size_t d_v) {
    AttentionBatch b = random_batch(rng, l, d_qk, d_v);
    for (std::size_t i = 0; i < b.q.size(); ++i) b.q.data()[i] = 0.1 + std::abs(b.q.data()[i]);
    for (std::size_t i = 0; i < b.k.size(); ++i) b.k.data()[i] = 0.1 + std::abs(b.k.data()[i]);
    return b;
}

}  // namespace

TEST_CASE("softmax attention matches per-entry definition", "[attention]") {
    Rng rng{RngSeed{501}};
    const std::size_t l = 7, dqk = 3, dv = 2;
    AttentionBatch batch = random_batch(rng, l, dqk, dv);
    AttentionOutput out = dense_softmax_attention(batch);

    // independent, unstabilized computation (inputs are O(1): no overflow)
    for (std::size_t i = 0; i < l; ++i) {
        std::vector<double> w(l);
        double den = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
            double dot = 0.0;
            for (std::size_t a = 0; a < dqk; ++a) dot += batch.q(i, a) * batch.k(j, a);
            w[j] = std::exp(dot / std::sqrt(static_cast<double>(dqk)));
            den += w[j];
        }
        for (std::size_t b = 0; b < dv; ++b) {
            double expect = 0.0;
            for (std::size_t j = 0; j < l; ++j) expect += w[j] / den * batch.v(j, b);
            REQUIRE(out.embeddings(i, b) == Catch::Approx(expect).margin(1e-12));
        }
    }
}

TEST_CASE("softmax attention rows are stochastic", "[attention]") {
    Rng rng{RngSeed{502}};
    AttentionBatch batch = random_batch(rng, 33, 8, 4);
    batch.v = Matrix(33, 4);
    for (std::size_t i = 0; i < batch.v.size(); ++i) batch.v.data()[i] = 1.0;
    AttentionOutput out = dense_softmax_attention(batch);
    for (std::size_t i = 0; i < out.embeddings.size(); ++i)
        REQUIRE(out.embeddings.data()[i] == Catch::Approx(1.0).margin(1e-12));
    for (double d : out.denominators) REQUIRE(d > 0.0);
    REQUIRE(out.clamped_rows == 0);
}

TEST_CASE("softmax attention is stable under large score shifts", "[attention]") {
    Rng rng{RngSeed{503}};
    AttentionBatch batch = random_batch(rng, 9, 4, 3);
    for (std::size_t i = 0; i < batch.q.size(); ++i) batch.q.data()[i] *= 400.0;
    AttentionOutput out = dense_softmax_attention(batch);
    REQUIRE(all_finite(out.embeddings));
    for (double d : out.denominators) {
        REQUIRE(std::isfinite(d));
        REQUIRE(d >= 1.0);  // stabilized: the max-score term contributes exactly 1
    }
}

TEST_CASE("performer equals dense attention with all-ones mask", "[attention]") {
    Rng rng{RngSeed{504}};
    const std::size_t l = 29;
    Matrix ones(l, l);
    for (std::size_t i = 0; i < ones.size(); ++i) ones.data()[i] = 1.0;
    for (auto kind : {0, 1}) {
        AttentionBatch batch = random_batch(rng, l, 6, 3);
        FeatureMap fm = kind == 0 ? FeatureMap::relu(6)
                                  : FeatureMap::positive_random(10, 6, RngSeed{99});
        AttentionOutput fast = performer_attention(batch, fm);
        AttentionOutput slow = dense_masked_attention(batch, fm, ones);
        REQUIRE(rel_l2_error(fast.embeddings, slow.embeddings) < 1e-12);
        REQUIRE(rel_l2_error(fast.denominators, slow.denominators) < 1e-12);
        REQUIRE(fast.clamped_rows == slow.clamped_rows);
    }
}

TEST_CASE("masked low-rank matches dense masked oracle (direct)", "[attention]") {
    Rng rng{RngSeed{505}};
    for (std::size_t l : {std::size_t{1}, std::size_t{2}, std::size_t{17}, std::size_t{64}}) {
        for (std::size_t d : {std::size_t{1}, std::size_t{3}}) {
            PointCloud cloud = random_cloud(rng, l, d);
            AttentionBatch batch = positive_batch(rng, l, 4, 3);
            MaskSpec spec{random_symmetric_quad(rng, 8, d), ModulationFunction::laplace(1.0)};
            for (auto kind : {0, 1}) {
                FeatureMap fm = kind == 0 ? FeatureMap::relu(4)
                                          : FeatureMap::positive_random(6, 4, RngSeed{7 + l});
                AttentionOutput fast = masked_lowrank_attention(batch, cloud, fm, spec);
                AttentionOutput slow =
                    dense_masked_attention(batch, fm, dense_quadrature_mask(cloud, spec));
                REQUIRE(rel_l2_error(fast.embeddings, slow.embeddings) < 1e-10);
                REQUIRE(rel_l2_error(fast.denominators, slow.denominators) < 1e-10);
                REQUIRE(fast.clamped_rows == slow.clamped_rows);
            }
        }
    }
}

TEST_CASE("masked low-rank matches dense masked oracle (gridded)", "[attention]") {
    Rng rng{RngSeed{506}};
    MaskedAttentionOptions opt;
    opt.backend = FastmultBackend::gridded;
    opt.acc.epsilon = 1e-6;
    opt.acc.force_gridded = true;
    const std::size_t l = 40;
    PointCloud cloud = random_cloud(rng, l, 3);
    AttentionBatch batch = positive_batch(rng, l, 4, 2);
    MaskSpec spec{random_symmetric_quad(rng, 8, 3), ModulationFunction::laplace(1.0)};
    FeatureMap fm = FeatureMap::relu(4);
    AttentionOutput fast = masked_lowrank_attention(batch, cloud, fm, spec, opt);
    AttentionOutput slow = dense_masked_attention(batch, fm, dense_quadrature_mask(cloud, spec));
    REQUIRE(rel_l2_error(fast.embeddings, slow.embeddings) < 1e-5);
    REQUIRE(rel_l2_error(fast.denominators, slow.denominators) < 1e-5);
}

TEST_CASE("neutral mask reduces masked low-rank to performer", "[attention]") {
    Rng rng{RngSeed{507}};
    const std::size_t l = 31;
    PointCloud cloud = random_cloud(rng, l, 2);
    AttentionBatch batch = positive_batch(rng, l, 5, 3);
    Matrix zero(1, 2);
    MaskSpec spec{QuadratureSet{std::move(zero), {1.0}, true}, ModulationFunction::one()};
    FeatureMap fm = FeatureMap::relu(5);
    AttentionOutput masked = masked_lowrank_attention(batch, cloud, fm, spec);
    AttentionOutput plain = performer_attention(batch, fm);
    REQUIRE(rel_l2_error(masked.embeddings, plain.embeddings) < 1e-12);
    REQUIRE(rel_l2_error(masked.denominators, plain.denominators) < 1e-12);
}

TEST_CASE("thread count does not change masked low-rank output", "[attention]") {
    Rng rng{RngSeed{508}};
    const std::size_t l = 26;
    PointCloud cloud = random_cloud(rng, l, 3);
    AttentionBatch batch = positive_batch(rng, l, 4, 3);
    MaskSpec spec{random_symmetric_quad(rng, 6, 3), ModulationFunction::laplace(0.8)};
    FeatureMap fm = FeatureMap::relu(4);
    MaskedAttentionOptions serial, parallel;
    parallel.threads = 3;
    AttentionOutput a = masked_lowrank_attention(batch, cloud, fm, spec, serial);
    AttentionOutput b = masked_lowrank_attention(batch, cloud, fm, spec, parallel);
    for (std::size_t i = 0; i < a.embeddings.size(); ++i)
        REQUIRE(a.embeddings.data()[i] == b.embeddings.data()[i]);
    for (std::size_t i = 0; i < l; ++i) REQUIRE(a.denominators[i] == b.denominators[i]);
}

TEST_CASE("denominator clamp is applied and reported", "[attention]") {
    Rng rng{RngSeed{509}};
    const std::size_t l = 12;
    PointCloud cloud = random_cloud(rng, l, 1);
    AttentionBatch batch = positive_batch(rng, l, 3, 2);
    // two all-negative q rows produce zero relu features, hence zero denominators
    for (std::size_t a = 0; a < 3; ++a) {
        batch.q(4, a) = -1.0 - rng.uniform01();
        batch.q(9, a) = -2.0;
    }
    // near-zero frequencies keep the mask strictly positive, so only the
    // forced rows can fall under the clamp
    Matrix freqs(4, 1);
    freqs(0, 0) = 0.02;
    freqs(1, 0) = -0.02;
    freqs(2, 0) = 0.05;
    freqs(3, 0) = -0.05;
    MaskSpec spec{QuadratureSet{std::move(freqs), {0.5, 0.5, 0.5, 0.5}, true},
                  ModulationFunction::laplace(1.0)};
    FeatureMap fm = FeatureMap::relu(3);
    MaskedAttentionOptions opt;
    opt.eps_denominator = 1e-8;
    AttentionOutput out = masked_lowrank_attention(batch, cloud, fm, spec, opt);
    REQUIRE(out.clamped_rows == 2);
    REQUIRE(out.denominators[4] == 1e-8);
    REQUIRE(out.denominators[9] == 1e-8);
    for (std::size_t b = 0; b < 2; ++b) {
        REQUIRE(out.embeddings(4, b) == 0.0);
        REQUIRE(out.embeddings(9, b) == 0.0);
    }
    AttentionOutput oracle = dense_masked_attention(batch, fm, dense_quadrature_mask(cloud, spec),
                                                    opt.eps_denominator);
    REQUIRE(oracle.clamped_rows == 2);
}

TEST_CASE("low-rank paths never allocate an L x L matrix", "[attention]") {
    Rng rng{RngSeed{510}};
    const std::size_t l = 128;
    PointCloud cloud = random_cloud(rng, l, 3);
    AttentionBatch batch = positive_batch(rng, l, 8, 4);
    MaskSpec spec{random_symmetric_quad(rng, 8, 3), ModulationFunction::laplace(1.0)};
    FeatureMap fm = FeatureMap::relu(8);

    alloc_stats::reset();
    performer_attention(batch, fm);
    REQUIRE(alloc_stats::peak_matrix_elems() < l * l);

    alloc_stats::reset();
    masked_lowrank_attention(batch, cloud, fm, spec);
    REQUIRE(alloc_stats::peak_matrix_elems() < l * l);

    // sanity: the dense oracle does allocate the full matrix
    alloc_stats::reset();
    dense_masked_attention(batch, fm, dense_quadrature_mask(cloud, spec));
    REQUIRE(alloc_stats::peak_matrix_elems() >= l * l);
}

TEST_CASE("positive random features are unbiased for the softmax kernel", "[attention]") {
    Rng rng{RngSeed{511}};
    const std::size_t d = 4, m = 2048;
    Matrix xy(2, d);
    for (std::size_t a = 0; a < d; ++a) {
        xy(0, a) = 0.4 * rng.normal();
        xy(1, a) = 0.4 * rng.normal();
    }
    double dot = 0.0;
    for (std::size_t a = 0; a < d; ++a) dot += xy(0, a) * xy(1, a);
    const double target = std::exp(dot);

    FeatureMap fm = FeatureMap::positive_random(m, d, RngSeed{2026});
    Matrix phi = apply_feature_map(fm, xy);
    // phi(x)^T phi(y) = (1/m) sum_j t_j with iid t_j: use the sample SE
    std::vector<double> terms(m);
    double mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        terms[j] = phi(0, j) * phi(1, j) * static_cast<double>(m);
        mean += terms[j];
    }
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double t : terms) var += (t - mean) * (t - mean);
    var /= static_cast<double>(m - 1);
    const double se = std::sqrt(var / static_cast<double>(m));
    REQUIRE(std::abs(mean - target) <= 3.5 * se + 1e-12);
}

TEST_CASE("attention validation errors", "[attention]") {
    Rng rng{RngSeed{512}};
    PointCloud cloud = random_cloud(rng, 8, 2);
    AttentionBatch batch = positive_batch(rng, 8, 3, 2);
    MaskSpec spec{random_symmetric_quad(rng, 4, 2), ModulationFunction::one()};

    AttentionBatch short_batch = positive_batch(rng, 7, 3, 2);
    REQUIRE_THROWS_WITH(masked_lowrank_attention(short_batch, cloud, FeatureMap::relu(3), spec),
                        Catch::Matchers::ContainsSubstring("length mismatch"));
    REQUIRE_THROWS_WITH(masked_lowrank_attention(batch, cloud, FeatureMap::relu(5), spec),
                        Catch::Matchers::ContainsSubstring("length mismatch"));
    Matrix bad_mask(8, 7);
    REQUIRE_THROWS_WITH(dense_masked_attention(batch, FeatureMap::relu(3), bad_mask),
                        Catch::Matchers::ContainsSubstring("length mismatch"));
    AttentionBatch nan_batch = positive_batch(rng, 8, 3, 2);
    nan_batch.v(2, 1) = std::nan("");
    REQUIRE_THROWS_WITH(performer_attention(nan_batch, FeatureMap::relu(3)),
                        Catch::Matchers::ContainsSubstring("non-finite"));
}
