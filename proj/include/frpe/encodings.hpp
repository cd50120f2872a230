#pragma once

// Quadrature constructions for specific relative encodings.
//
// - sample_cauchy_quadrature: Monte Carlo rule whose modulated weights make
//   the quadrature mask an unbiased estimate of the continuous-limit mask
//   for F_f(xi) = exp(-lambda ||xi||) (a Cauchy-type kernel in distance).
// - rope_quadrature / string_quadrature: two-point (or 2p-point) rules whose
//   masks are exactly cos(theta dz) and (1/p) sum_k cos(omega_k . dz).
// - apply_point_rope: rotary encoding over 3D coordinates, one contiguous
//   block of pair rotations per spatial axis.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "frpe/core.hpp"

namespace frpe {

// normalization Z_d = int exp(-lambda ||xi||) d xi over R^d
inline double cauchy_mask_normalizer(std::size_t d, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("quadrature: lambda must be positive");
    switch (d) {
        case 1:
            return 2.0 / lambda;
        case 2:
            return kTwoPi / (lambda * lambda);
        case 3:
            return 8.0 * kPi / (lambda * lambda * lambda);
        default:
            throw std::invalid_argument("quadrature: d must be 1, 2, or 3");
    }
}

// S/2 iid draws from the normalized density exp(-lambda ||xi||)/Z_d, each
// mirrored to keep the mask real. Radius is a sum of d Exponential(lambda)
// variates (Gamma(d, lambda), the exact radial law of that density);
// direction is uniform on the sphere. Coefficients are importance weights
// a = Z_d / (S F_f(xi)), so every modulated weight equals Z_d / S.
inline QuadratureSet sample_cauchy_quadrature(std::size_t d, std::size_t s, double lambda,
                                              RngSeed seed) {
    if (s < 2 || s % 2 != 0)
        throw std::invalid_argument("quadrature size must be even and at least 2");
    const double z = cauchy_mask_normalizer(d, lambda);  // validates d and lambda
    Matrix freqs(s, d);
    std::vector<double> coeffs(s);
    Rng rng(seed);
    double dir[3];
    for (std::size_t k = 0; k + 1 < s; k += 2) {
        double radius = 0.0;
        for (std::size_t a = 0; a < d; ++a) radius += rng.exponential(lambda);
        rng.unit_vector(d, dir);
        for (std::size_t a = 0; a < d; ++a) {
            freqs(k, a) = radius * dir[a];
            freqs(k + 1, a) = -radius * dir[a];
        }
        const double coeff = z * std::exp(lambda * radius) / static_cast<double>(s);
        coeffs[k] = coeff;
        coeffs[k + 1] = coeff;
    }
    return QuadratureSet{std::move(freqs), std::move(coeffs), true};
}

// two-frequency rule with mask cos(theta (z_i - z_j)) exactly (1D clouds)
inline QuadratureSet rope_quadrature(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("non-finite input in rope quadrature");
    Matrix freqs(2, 1);
    freqs(0, 0) = theta / kTwoPi;
    freqs(1, 0) = -theta / kTwoPi;
    return QuadratureSet{std::move(freqs), {0.5, 0.5}, true};
}

// 2p-frequency rule with mask (1/p) sum_k cos(omega_k . dz); omegas is p x d
inline QuadratureSet string_quadrature(const Matrix& omegas) {
    if (omegas.rows() == 0 || omegas.cols() == 0 || omegas.cols() > 3)
        throw std::invalid_argument("string quadrature: omegas must be p x d with d in {1,2,3}");
    if (!all_finite(omegas)) throw std::invalid_argument("non-finite input in string quadrature");
    const std::size_t p = omegas.rows(), d = omegas.cols();
    Matrix freqs(2 * p, d);
    std::vector<double> coeffs(2 * p, 0.5 / static_cast<double>(p));
    for (std::size_t k = 0; k < p; ++k)
        for (std::size_t a = 0; a < d; ++a) {
            freqs(2 * k, a) = omegas(k, a) / kTwoPi;
            freqs(2 * k + 1, a) = -omegas(k, a) / kTwoPi;
        }
    return QuadratureSet{std::move(freqs), std::move(coeffs), true};
}

// ============================================================================
// rotary encoding over 3D point clouds

struct RopeConfig {
    std::vector<double> thetas;  // per-pair angles; empty = geometric from base
    double base = 10000.0;
};

// head width d_head splits into three axis blocks of width D = d_head/3;
// pair j of a block rotates by theta_j * coordinate along that block's axis.
// Default angles are the geometric ladder theta_j = base^(-2j/D).
inline Matrix apply_point_rope(const Matrix& x, const PointCloud& cloud,
                               const RopeConfig& config = {}) {
    const std::size_t d_head = x.cols();
    if (d_head == 0 || d_head % 6 != 0)
        throw std::invalid_argument("point rope: head width must be a positive multiple of 6");
    if (cloud.dim() != 3)
        throw std::invalid_argument("point rope: cloud must be 3-dimensional");
    if (x.rows() != cloud.length())
        throw std::invalid_argument("length mismatch between inputs and point cloud");
    if (!all_finite(x)) throw std::invalid_argument("non-finite input");
    const std::size_t block = d_head / 3, pairs = d_head / 6;

    std::vector<double> thetas = config.thetas;
    if (thetas.empty()) {
        if (!(config.base > 0.0))
            throw std::invalid_argument("point rope: base must be positive");
        thetas.resize(pairs);
        for (std::size_t j = 0; j < pairs; ++j)
            thetas[j] = std::pow(config.base,
                                 -2.0 * static_cast<double>(j) / static_cast<double>(block));
    } else if (thetas.size() != pairs) {
        throw std::invalid_argument("length mismatch between thetas and head width");
    }

    Matrix out(x.rows(), d_head);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row(i);
        const double* r = cloud.coords.row(i);
        double* oi = out.row(i);
        for (std::size_t axis = 0; axis < 3; ++axis) {
            const std::size_t off = axis * block;
            for (std::size_t j = 0; j < pairs; ++j) {
                const double angle = thetas[j] * r[axis];
                const double c = std::cos(angle), sn = std::sin(angle);
                const double a = xi[off + 2 * j], b = xi[off + 2 * j + 1];
                oi[off + 2 * j] = c * a - sn * b;
                oi[off + 2 * j + 1] = sn * a + c * b;
            }
        }
    }
    return out;
}

}  // namespace frpe
