#pragma once

// Benchmark and measurement studies behind the CLI subcommands. Each study
// returns a CsvTable; timing uses the median of repeated runs after one
// warmup execution.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "frpe/attention.hpp"
#include "frpe/core.hpp"
#include "frpe/encodings.hpp"
#include "frpe/fastmult.hpp"
#include "frpe/io.hpp"

namespace frpe {

struct RunConfig {
    std::vector<std::size_t> lengths{1024, 2048, 4096, 8192, 16384};
    std::size_t dim = 3;
    double lambda = 1.0;
    std::size_t quadrature_size = 8;
    std::vector<std::uint64_t> seeds{1};
    std::string feature_map = "relu";  // "relu" | "positive-random"
    std::size_t features = 16;         // m for positive-random
    std::string backend = "direct";    // "direct" | "gridded"
    double epsilon = 1e-6;
    double oversampling = 2.0;
    std::size_t repeats = 3;
    std::size_t threads = 1;
    bool normalize = false;
    bool gaussian_cloud = false;
    std::string cloud_path;   // optional point-cloud file; empty = synthetic
    std::string output_path;  // CSV destination; empty = stdout
    std::size_t d_qk = 16;
    std::size_t d_v = 16;
    // error-vs-s study
    std::vector<std::size_t> s_list{8, 16, 32, 64, 128, 256, 512, 1024};
    std::size_t error_length = 128;
    // kernel-shape study
    std::size_t kernel_seeds = 64;
    std::size_t kernel_pairs = 64;
    std::size_t kernel_distances = 17;
    double kernel_max_distance = 3.0;
    // verification
    bool inject_fault = false;
    double dense_cap_bytes = 2147483648.0;  // 2 GiB: largest dense L x L allowed
};

inline FastmultBackend parse_backend(const std::string& name) {
    if (name == "direct") return FastmultBackend::direct;
    if (name == "gridded") return FastmultBackend::gridded;
    throw std::invalid_argument("unknown backend: " + name + " (expected direct or gridded)");
}

inline FeatureMap make_feature_map(const RunConfig& cfg, RngSeed seed) {
    if (cfg.feature_map == "relu") return FeatureMap::relu(cfg.d_qk);
    if (cfg.feature_map == "positive-random")
        return FeatureMap::positive_random(cfg.features, cfg.d_qk, seed);
    throw std::invalid_argument("unknown feature map: " + cfg.feature_map +
                                " (expected relu or positive-random)");
}

inline NufftAccuracy make_accuracy(const RunConfig& cfg) {
    NufftAccuracy acc;
    acc.epsilon = cfg.epsilon;
    acc.oversampling = cfg.oversampling;
    validate_accuracy(acc);
    return acc;
}

// study clouds: file-backed (first l rows) or synthetic
inline PointCloud study_cloud(const RunConfig& cfg, std::size_t l, RngSeed seed) {
    PointCloud cloud = [&] {
        if (cfg.cloud_path.empty()) return synthetic_cloud(l, cfg.dim, seed, cfg.gaussian_cloud);
        PointCloud loaded = load_point_cloud(cfg.cloud_path);
        if (loaded.length() < l)
            throw std::invalid_argument("point cloud file has fewer rows than requested length");
        Matrix coords(l, loaded.dim());
        for (std::size_t i = 0; i < l; ++i)
            for (std::size_t a = 0; a < loaded.dim(); ++a) coords(i, a) = loaded.coords(i, a);
        return PointCloud{std::move(coords)};
    }();
    if (cfg.normalize && cloud.length() > 1) cloud = normalize_coords(cloud);
    return cloud;
}

// ============================================================================
// timing

struct TimingStats {
    double median_ms = 0.0;
    double p10_ms = 0.0;
    double p90_ms = 0.0;
};

namespace detail {

inline double percentile(std::vector<double> sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace detail

template <class Fn>
TimingStats time_median(Fn&& fn, std::size_t repeats) {
    repeats = std::max<std::size_t>(repeats, 3);
    fn();  // warmup, untimed
    std::vector<double> ms(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        ms[r] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    std::sort(ms.begin(), ms.end());
    return TimingStats{detail::percentile(ms, 0.5), detail::percentile(ms, 0.1),
                       detail::percentile(ms, 0.9)};
}

// ============================================================================
// bench-scaling: attention variants across sequence lengths

namespace detail {

inline AttentionBatch bench_batch(std::size_t l, std::size_t d_qk, std::size_t d_v,
                                  RngSeed seed) {
    Rng rng(seed);
    AttentionBatch b{Matrix(l, d_qk), Matrix(l, d_qk), Matrix(l, d_v)};
    for (std::size_t i = 0; i < b.q.size(); ++i) b.q.data()[i] = 0.1 + std::abs(rng.normal());
    for (std::size_t i = 0; i < b.k.size(); ++i) b.k.data()[i] = 0.1 + std::abs(rng.normal());
    for (std::size_t i = 0; i < b.v.size(); ++i) b.v.data()[i] = rng.normal();
    return b;
}

inline std::vector<std::string> timing_row(const std::string& method, std::size_t l,
                                           const TimingStats& t) {
    return {method, std::to_string(l), csv_num(t.median_ms), csv_num(t.p10_ms),
            csv_num(t.p90_ms), "ok"};
}

template <class Fn>
double time_once_ms(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

inline TimingStats stats_from(std::vector<double> ms) {
    std::sort(ms.begin(), ms.end());
    return TimingStats{percentile(ms, 0.5), percentile(ms, 0.1), percentile(ms, 0.9)};
}

}  // namespace detail

inline CsvTable bench_scaling(const RunConfig& cfg) {
    CsvTable table;
    table.header = {"method", "L", "median_ms", "p10_ms", "p90_ms", "status"};
    const RngSeed seed{cfg.seeds.empty() ? 1 : cfg.seeds.front()};
    const FastmultBackend backend = parse_backend(cfg.backend);
    const NufftAccuracy acc = make_accuracy(cfg);

    struct Case {
        std::size_t l = 0;
        PointCloud cloud;
        AttentionBatch batch;
        MaskSpec spec;
        FeatureMap fm;
        MaskedAttentionOptions opt;
        bool dense = false;  // dense timed at this length
        bool oom = false;    // dense capped at this length
        std::vector<double> dense_ms, perf_ms, fast_ms;
    };
    std::vector<Case> cases;
    bool dense_capped = false;
    for (std::size_t idx = 0; idx < cfg.lengths.size(); ++idx) {
        const std::size_t l = cfg.lengths[idx];
        Case c;
        c.l = l;
        c.cloud = study_cloud(cfg, l, derive_seed(seed, 2 * idx));
        c.batch = detail::bench_batch(l, cfg.d_qk, cfg.d_v, derive_seed(seed, 2 * idx + 1));
        c.spec = MaskSpec{sample_cauchy_quadrature(c.cloud.dim(), cfg.quadrature_size,
                                                   cfg.lambda, derive_seed(seed, 1000 + idx)),
                          ModulationFunction::laplace(cfg.lambda)};
        c.fm = make_feature_map(cfg, derive_seed(seed, 2000 + idx));
        c.opt.backend = backend;
        c.opt.acc = acc;
        c.opt.threads = cfg.threads;
        if (!dense_capped) {
            const double bytes = 8.0 * static_cast<double>(l) * static_cast<double>(l);
            if (bytes >= cfg.dense_cap_bytes) {
                c.oom = true;
                dense_capped = true;  // series stops at the first capped length
            } else {
                c.dense = true;
            }
        }
        cases.push_back(std::move(c));
    }

    // one untimed warmup per cell, then rounds interleaved across lengths and
    // methods so drifting machine load lands evenly on every cell instead of
    // on whichever cell happened to be measured during a burst
    for (Case& c : cases) {
        if (c.dense) dense_softmax_attention(c.batch);
        performer_attention(c.batch, c.fm);
        masked_lowrank_attention(c.batch, c.cloud, c.fm, c.spec, c.opt);
    }
    const std::size_t repeats = std::max<std::size_t>(cfg.repeats, 3);
    for (std::size_t r = 0; r < repeats; ++r)
        for (Case& c : cases) {
            if (c.dense)
                c.dense_ms.push_back(
                    detail::time_once_ms([&] { dense_softmax_attention(c.batch); }));
            c.perf_ms.push_back(
                detail::time_once_ms([&] { performer_attention(c.batch, c.fm); }));
            c.fast_ms.push_back(detail::time_once_ms(
                [&] { masked_lowrank_attention(c.batch, c.cloud, c.fm, c.spec, c.opt); }));
        }

    for (const Case& c : cases) {
        if (c.oom)
            table.rows.push_back({"dense_softmax", std::to_string(c.l), "", "", "",
                                  "OOM-capped"});
        else if (c.dense)
            table.rows.push_back(
                detail::timing_row("dense_softmax", c.l, detail::stats_from(c.dense_ms)));
        table.rows.push_back(
            detail::timing_row("performer", c.l, detail::stats_from(c.perf_ms)));
        table.rows.push_back(detail::timing_row("masked_lowrank_fastmult", c.l,
                                                detail::stats_from(c.fast_ms)));
    }
    return table;
}

// ============================================================================
// bench-fastmult: mask-product backends across sequence lengths

inline CsvTable bench_fastmult(const RunConfig& cfg) {
    CsvTable table;
    table.header = {"method", "L", "median_ms", "p10_ms", "p90_ms", "status"};
    const RngSeed seed{cfg.seeds.empty() ? 1 : cfg.seeds.front()};
    const NufftAccuracy acc = make_accuracy(cfg);
    NufftAccuracy forced = acc;
    forced.force_gridded = true;
    bool dense_capped = false;
    for (std::size_t idx = 0; idx < cfg.lengths.size(); ++idx) {
        const std::size_t l = cfg.lengths[idx];
        PointCloud cloud = study_cloud(cfg, l, derive_seed(seed, 3000 + idx));
        MaskSpec spec{sample_cauchy_quadrature(cloud.dim(), cfg.quadrature_size, cfg.lambda,
                                               derive_seed(seed, 4000 + idx)),
                      ModulationFunction::laplace(cfg.lambda)};
        Rng rng(derive_seed(seed, 5000 + idx));
        std::vector<double> u(l);
        for (double& x : u) x = rng.normal();

        if (!dense_capped) {
            const double bytes = 8.0 * static_cast<double>(l) * static_cast<double>(l);
            if (bytes >= cfg.dense_cap_bytes) {
                table.rows.push_back({"dense_mask_matvec", std::to_string(l), "", "", "",
                                      "OOM-capped"});
                dense_capped = true;
            } else {
                TimingStats t = time_median(
                    [&] {
                        Matrix mask = dense_quadrature_mask(cloud, spec);
                        std::vector<double> out(l, 0.0);
                        for (std::size_t i = 0; i < l; ++i) {
                            const double* mi = mask.row(i);
                            for (std::size_t j = 0; j < l; ++j) out[i] += mi[j] * u[j];
                        }
                    },
                    cfg.repeats);
                table.rows.push_back(detail::timing_row("dense_mask_matvec", l, t));
            }
        }
        {
            FastmultEngine engine(cloud, spec, FastmultBackend::direct, acc);
            TimingStats t = time_median([&] { engine.apply(u); }, cfg.repeats);
            table.rows.push_back(detail::timing_row("fastmult_direct", l, t));
        }
        {
            FastmultEngine engine(cloud, spec, FastmultBackend::gridded, forced);
            TimingStats t = time_median([&] { engine.apply(u); }, cfg.repeats);
            table.rows.push_back(detail::timing_row("fastmult_gridded", l, t));
        }
    }
    return table;
}

// ============================================================================
// error-vs-s: quadrature Monte-Carlo error against the ideal mask

struct SlopeFit {
    double slope = 0.0;
    double stderr_ = 0.0;
};

// OLS slope of y on x with standard error
inline SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 3 || y.size() != n) throw std::invalid_argument("slope fit needs >= 3 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - intercept - slope * x[i];
        rss += r * r;
    }
    return SlopeFit{slope, std::sqrt(rss / static_cast<double>(n - 2) / sxx)};
}

inline CsvTable error_vs_s(const RunConfig& cfg) {
    if (cfg.dim == 2)
        throw std::invalid_argument(
            "no closed form wired for d = 2: error-vs-s needs the ideal mask");
    CsvTable table;
    table.header = {"record", "S", "seed", "rel_error", "slope", "slope_stderr"};
    const RngSeed base{cfg.seeds.empty() ? 1 : cfg.seeds.front()};
    const std::size_t l = cfg.error_length;
    PointCloud cloud = study_cloud(cfg, l, derive_seed(base, 90001));
    Rng rng(derive_seed(base, 90002));
    std::vector<double> u(l);
    for (double& x : u) x = rng.normal();

    // ideal-mask product, the continuous-limit reference
    std::vector<double> reference(l, 0.0);
    std::vector<double> dz(cfg.dim);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < l; ++j) {
            for (std::size_t a = 0; a < cfg.dim; ++a)
                dz[a] = cloud.coords(i, a) - cloud.coords(j, a);
            reference[i] += ideal_mask_value(dz, cfg.lambda) * u[j];
        }

    std::vector<double> log_s, log_err;
    for (std::size_t s : cfg.s_list) {
        double mean = 0.0;
        for (std::uint64_t seed : cfg.seeds) {
            MaskSpec spec{sample_cauchy_quadrature(cfg.dim, s, cfg.lambda,
                                                   derive_seed(RngSeed{seed}, 7000 + s)),
                          ModulationFunction::laplace(cfg.lambda)};
            const double err =
                rel_l2_error(fastmult(cloud, spec, u, FastmultBackend::direct), reference);
            mean += err;
            table.rows.push_back({"data", std::to_string(s), std::to_string(seed),
                                  csv_num(err), "", ""});
        }
        mean /= static_cast<double>(cfg.seeds.size());
        log_s.push_back(std::log(static_cast<double>(s)));
        log_err.push_back(std::log(mean));
    }
    SlopeFit fit = fit_slope(log_s, log_err);
    table.rows.push_back({"summary", "", "", "", csv_num(fit.slope), csv_num(fit.stderr_)});
    return table;
}

// ============================================================================
// kernel-shape: estimated mask vs distance, against reference kernels

inline CsvTable kernel_shape(const RunConfig& cfg) {
    if (cfg.dim == 2)
        throw std::invalid_argument(
            "no closed form wired for d = 2: kernel-shape needs the ideal mask");
    if (cfg.kernel_distances < 3)
        throw std::invalid_argument("kernel-shape needs at least 3 distances");
    CsvTable table;
    table.header = {"distance", "mask_mean", "mask_std",
                    "ideal_mask_value", "rbf_reference", "laplace_reference"};
    const RngSeed base{cfg.seeds.empty() ? 1 : cfg.seeds.front()};
    const std::size_t nd = cfg.kernel_distances, ns = std::max<std::size_t>(cfg.kernel_seeds, 2);

    // distance grid: zero plus log-spaced points up to the maximum
    std::vector<double> dist(nd);
    dist[0] = 0.0;
    const double min_frac = 1.0 / 150.0;
    for (std::size_t k = 1; k < nd; ++k) {
        const double t = static_cast<double>(k - 1) / static_cast<double>(nd - 2);
        dist[k] = cfg.kernel_max_distance * std::pow(min_frac, 1.0 - t);
    }

    ModulationFunction mod = ModulationFunction::laplace(cfg.lambda);
    Matrix values(ns, nd);  // per-seed direction-averaged estimates
    std::vector<double> dir(3, 0.0), z(cfg.dim, 0.0);
    for (std::size_t i = 0; i < ns; ++i) {
        QuadratureSet quad = sample_cauchy_quadrature(cfg.dim, cfg.quadrature_size, cfg.lambda,
                                                      derive_seed(base, 8000 + i));
        std::vector<double> weights(quad.size());
        for (std::size_t s = 0; s < quad.size(); ++s)
            weights[s] = quad.coeffs[s] * mod.eval(quad.freqs.row(s), cfg.dim);
        Rng rng(derive_seed(base, 8800 + i));
        for (std::size_t k = 0; k < nd; ++k) {
            double mean = 0.0;
            for (std::size_t p = 0; p < cfg.kernel_pairs; ++p) {
                rng.unit_vector(cfg.dim, dir.data());  // random point-pair offset direction
                for (std::size_t a = 0; a < cfg.dim; ++a) z[a] = dist[k] * dir[a];
                double est = 0.0;
                for (std::size_t s = 0; s < quad.size(); ++s) {
                    double dot = 0.0;
                    for (std::size_t a = 0; a < cfg.dim; ++a) dot += quad.freqs(s, a) * z[a];
                    est += weights[s] * std::cos(kTwoPi * dot);
                }
                mean += est;
            }
            values(i, k) = mean / static_cast<double>(cfg.kernel_pairs);
        }
    }

    for (std::size_t k = 0; k < nd; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < ns; ++i) mean += values(i, k);
        mean /= static_cast<double>(ns);
        double var = 0.0;
        for (std::size_t i = 0; i < ns; ++i)
            var += (values(i, k) - mean) * (values(i, k) - mean);
        var /= static_cast<double>(ns - 1);
        std::vector<double> zk(cfg.dim, 0.0);
        zk[0] = dist[k];
        const double z0 = cauchy_mask_normalizer(cfg.dim, cfg.lambda);
        table.rows.push_back({csv_num(dist[k]), csv_num(mean), csv_num(std::sqrt(var)),
                              csv_num(ideal_mask_value(zk, cfg.lambda)),
                              csv_num(z0 * std::exp(-0.5 * dist[k] * dist[k] * cfg.lambda *
                                                    cfg.lambda)),
                              csv_num(z0 * std::exp(-cfg.lambda * dist[k]))});
    }
    return table;
}

}  // namespace frpe
