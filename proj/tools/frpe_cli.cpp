// Command-line benchmark and verification harness for the frpe library.
//
// Exit codes: 0 success, 1 check failure (or runtime failure), 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "frpe/frpe.hpp"

namespace {

using nlohmann::json;

struct Staged {
    std::size_t length = 0;
    std::vector<std::size_t> lengths;
    std::size_t dim = 3;
    double lambda = 1.0;
    std::size_t quadrature_size = 8;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds;
    std::string feature_map = "relu";
    std::size_t features = 16;
    std::string backend = "direct";
    double epsilon = 1e-6;
    double oversampling = 2.0;
    std::size_t repeats = 3;
    std::size_t threads = 1;
    bool normalize = false;
    bool gaussian = false;
    std::string cloud;
    std::string config_path;
    std::string output;
    std::size_t d_qk = 16;
    std::size_t d_v = 16;
    std::vector<std::size_t> s_list;
    std::size_t error_length = 128;
    std::size_t kernel_seeds = 64;
    std::size_t kernel_pairs = 64;
    std::size_t kernel_distances = 17;
    double kernel_max_distance = 3.0;
    bool inject_fault = false;

    std::map<std::string, CLI::Option*> opt;
    bool given(const std::string& name) const {
        auto it = opt.find(name);
        return it != opt.end() && it->second->count() > 0;
    }
};

void add_common_options(CLI::App* cmd, Staged& st) {
    st.opt["length"] = cmd->add_option("--length", st.length, "Single sequence length");
    st.opt["lengths"] =
        cmd->add_option("--lengths", st.lengths, "Comma-separated sequence lengths")
            ->delimiter(',');
    st.opt["length"]->excludes(st.opt["lengths"]);
    st.opt["dim"] = cmd->add_option("--dim", st.dim, "Point dimension (1, 2, or 3)");
    st.opt["lambda"] = cmd->add_option("--lambda", st.lambda, "Modulation decay rate");
    st.opt["quadrature_size"] =
        cmd->add_option("--quadrature-size,-S", st.quadrature_size, "Quadrature size S");
    st.opt["seed"] = cmd->add_option("--seed", st.seed, "Single RNG seed");
    st.opt["seeds"] =
        cmd->add_option("--seeds", st.seeds, "Comma-separated RNG seeds")->delimiter(',');
    st.opt["seed"]->excludes(st.opt["seeds"]);
    st.opt["feature_map"] = cmd->add_option("--feature-map", st.feature_map,
                                            "Feature map: relu or positive-random");
    st.opt["features"] =
        cmd->add_option("--features", st.features, "Feature count m (positive-random)");
    st.opt["backend"] =
        cmd->add_option("--backend", st.backend, "Mask product backend: direct or gridded");
    st.opt["epsilon"] =
        cmd->add_option("--epsilon", st.epsilon, "Gridded transform accuracy target");
    st.opt["oversampling"] =
        cmd->add_option("--oversampling", st.oversampling, "Grid oversampling factor (>= 2)");
    st.opt["repeats"] = cmd->add_option("--repeats", st.repeats, "Timed repetitions (>= 3)");
    st.opt["threads"] =
        cmd->add_option("--threads", st.threads, "Worker threads for mask-product columns");
    st.opt["normalize"] =
        cmd->add_flag("--normalize", st.normalize, "Center/scale coordinates first");
    st.opt["gaussian"] =
        cmd->add_flag("--gaussian", st.gaussian, "Gaussian synthetic cloud (default: uniform)");
    st.opt["cloud"] = cmd->add_option("--cloud", st.cloud, "Point cloud file (whitespace floats)");
    st.opt["config"] =
        cmd->add_option("--config", st.config_path, "JSON config file (flags override it)");
    st.opt["output"] = cmd->add_option("--output", st.output, "Output CSV path (default stdout)");
    st.opt["d_qk"] = cmd->add_option("--d-qk", st.d_qk, "Query/key width");
    st.opt["d_v"] = cmd->add_option("--d-v", st.d_v, "Value width");
    st.opt["s_list"] =
        cmd->add_option("--s-list", st.s_list, "Comma-separated quadrature sizes")->delimiter(',');
    st.opt["error_length"] =
        cmd->add_option("--error-length", st.error_length, "Sequence length for error-vs-s");
    st.opt["kernel_seeds"] =
        cmd->add_option("--kernel-seeds", st.kernel_seeds, "Quadrature redraws for kernel-shape");
    st.opt["kernel_pairs"] =
        cmd->add_option("--kernel-pairs", st.kernel_pairs, "Point-pair draws per distance");
    st.opt["kernel_distances"] =
        cmd->add_option("--kernel-distances", st.kernel_distances, "Distance grid size");
    st.opt["kernel_max_distance"] = cmd->add_option("--kernel-max-distance",
                                                    st.kernel_max_distance, "Largest distance");
    st.opt["inject_fault"] = cmd->add_flag("--inject-fault", st.inject_fault,
                                           "Test hook: corrupt one fastmult result");
}

template <class T>
void json_get(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

struct BuiltConfig {
    frpe::RunConfig cfg;
    std::set<std::string> set_keys;  // keys set by JSON or flags
    bool was_set(const std::string& k) const { return set_keys.count(k) > 0; }
};

BuiltConfig build_config(const Staged& st) {
    BuiltConfig built;
    frpe::RunConfig& cfg = built.cfg;

    if (!st.config_path.empty()) {
        std::ifstream in(st.config_path);
        if (!in) throw std::invalid_argument("cannot open config file: " + st.config_path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw std::invalid_argument("cannot parse config file " + st.config_path + ": " +
                                        e.what());
        }
        static const std::set<std::string> known = {
            "lengths", "dim", "lambda", "quadrature_size", "seeds", "feature_map",
            "features", "backend", "epsilon", "oversampling", "repeats", "threads",
            "normalize", "gaussian_cloud", "cloud_path", "output_path", "d_qk", "d_v",
            "s_list", "error_length", "kernel_seeds", "kernel_pairs", "kernel_distances",
            "kernel_max_distance", "inject_fault", "dense_cap_bytes"};
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!known.count(it.key()))
                throw std::invalid_argument("unknown config key: " + it.key());
            built.set_keys.insert(it.key());
        }
        json_get(j, "lengths", cfg.lengths);
        json_get(j, "dim", cfg.dim);
        json_get(j, "lambda", cfg.lambda);
        json_get(j, "quadrature_size", cfg.quadrature_size);
        json_get(j, "seeds", cfg.seeds);
        json_get(j, "feature_map", cfg.feature_map);
        json_get(j, "features", cfg.features);
        json_get(j, "backend", cfg.backend);
        json_get(j, "epsilon", cfg.epsilon);
        json_get(j, "oversampling", cfg.oversampling);
        json_get(j, "repeats", cfg.repeats);
        json_get(j, "threads", cfg.threads);
        json_get(j, "normalize", cfg.normalize);
        json_get(j, "gaussian_cloud", cfg.gaussian_cloud);
        json_get(j, "cloud_path", cfg.cloud_path);
        json_get(j, "output_path", cfg.output_path);
        json_get(j, "d_qk", cfg.d_qk);
        json_get(j, "d_v", cfg.d_v);
        json_get(j, "s_list", cfg.s_list);
        json_get(j, "error_length", cfg.error_length);
        json_get(j, "kernel_seeds", cfg.kernel_seeds);
        json_get(j, "kernel_pairs", cfg.kernel_pairs);
        json_get(j, "kernel_distances", cfg.kernel_distances);
        json_get(j, "kernel_max_distance", cfg.kernel_max_distance);
        json_get(j, "inject_fault", cfg.inject_fault);
        json_get(j, "dense_cap_bytes", cfg.dense_cap_bytes);
    }

    // flags override the config file
    auto mark = [&](const char* key) { built.set_keys.insert(key); };
    if (st.given("length")) {
        cfg.lengths = {st.length};
        mark("lengths");
    }
    if (st.given("lengths")) {
        cfg.lengths = st.lengths;
        mark("lengths");
    }
    if (st.given("dim")) {
        cfg.dim = st.dim;
        mark("dim");
    }
    if (st.given("lambda")) {
        cfg.lambda = st.lambda;
        mark("lambda");
    }
    if (st.given("quadrature_size")) {
        cfg.quadrature_size = st.quadrature_size;
        mark("quadrature_size");
    }
    if (st.given("seed")) {
        cfg.seeds = {st.seed};
        mark("seeds");
    }
    if (st.given("seeds")) {
        cfg.seeds = st.seeds;
        mark("seeds");
    }
    if (st.given("feature_map")) {
        cfg.feature_map = st.feature_map;
        mark("feature_map");
    }
    if (st.given("features")) {
        cfg.features = st.features;
        mark("features");
    }
    if (st.given("backend")) {
        cfg.backend = st.backend;
        mark("backend");
    }
    if (st.given("epsilon")) {
        cfg.epsilon = st.epsilon;
        mark("epsilon");
    }
    if (st.given("oversampling")) {
        cfg.oversampling = st.oversampling;
        mark("oversampling");
    }
    if (st.given("repeats")) {
        cfg.repeats = st.repeats;
        mark("repeats");
    }
    if (st.given("threads")) {
        cfg.threads = st.threads;
        mark("threads");
    }
    if (st.given("normalize")) {
        cfg.normalize = st.normalize;
        mark("normalize");
    }
    if (st.given("gaussian")) {
        cfg.gaussian_cloud = st.gaussian;
        mark("gaussian_cloud");
    }
    if (st.given("cloud")) {
        cfg.cloud_path = st.cloud;
        mark("cloud_path");
    }
    if (st.given("output")) {
        cfg.output_path = st.output;
        mark("output_path");
    }
    if (st.given("d_qk")) {
        cfg.d_qk = st.d_qk;
        mark("d_qk");
    }
    if (st.given("d_v")) {
        cfg.d_v = st.d_v;
        mark("d_v");
    }
    if (st.given("s_list")) {
        cfg.s_list = st.s_list;
        mark("s_list");
    }
    if (st.given("error_length")) {
        cfg.error_length = st.error_length;
        mark("error_length");
    }
    if (st.given("kernel_seeds")) {
        cfg.kernel_seeds = st.kernel_seeds;
        mark("kernel_seeds");
    }
    if (st.given("kernel_pairs")) {
        cfg.kernel_pairs = st.kernel_pairs;
        mark("kernel_pairs");
    }
    if (st.given("kernel_distances")) {
        cfg.kernel_distances = st.kernel_distances;
        mark("kernel_distances");
    }
    if (st.given("kernel_max_distance")) {
        cfg.kernel_max_distance = st.kernel_max_distance;
        mark("kernel_max_distance");
    }
    if (st.given("inject_fault")) {
        cfg.inject_fault = st.inject_fault;
        mark("inject_fault");
    }
    return built;
}

std::string config_comment(const frpe::RunConfig& cfg, const std::string& command) {
    json j;
    j["command"] = command;
    j["lengths"] = cfg.lengths;
    j["dim"] = cfg.dim;
    j["lambda"] = cfg.lambda;
    j["quadrature_size"] = cfg.quadrature_size;
    j["seeds"] = cfg.seeds;
    j["feature_map"] = cfg.feature_map;
    j["features"] = cfg.features;
    j["backend"] = cfg.backend;
    j["epsilon"] = cfg.epsilon;
    j["oversampling"] = cfg.oversampling;
    j["repeats"] = cfg.repeats;
    j["threads"] = cfg.threads;
    j["normalize"] = cfg.normalize;
    j["gaussian_cloud"] = cfg.gaussian_cloud;
    if (!cfg.cloud_path.empty()) j["cloud_path"] = cfg.cloud_path;
    j["d_qk"] = cfg.d_qk;
    j["d_v"] = cfg.d_v;
    if (command == "error-vs-s") {
        j["s_list"] = cfg.s_list;
        j["error_length"] = cfg.error_length;
    }
    if (command == "kernel-shape") {
        j["kernel_seeds"] = cfg.kernel_seeds;
        j["kernel_pairs"] = cfg.kernel_pairs;
        j["kernel_distances"] = cfg.kernel_distances;
        j["kernel_max_distance"] = cfg.kernel_max_distance;
    }
    return j.dump();
}

void emit_table(const frpe::RunConfig& cfg, frpe::CsvTable table, const std::string& command) {
    table.config_comment = config_comment(cfg, command);
    if (cfg.output_path.empty())
        frpe::write_csv(std::cout, table);
    else
        frpe::write_csv_file(cfg.output_path, table);
}

void warn_threads(const frpe::RunConfig& cfg) {
    if (cfg.threads > 1)
        std::cerr << "warning: timing rows were measured with threads=" << cfg.threads
                  << "; compare only against runs with the same thread count\n";
}

int print_check_table(const std::vector<frpe::CheckResult>& results) {
    std::size_t passed = 0;
    std::string first_failure;
    for (const auto& r : results) {
        std::printf("[%s] %-42s metric=%.3e  tol=%.1e\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.metric, r.tolerance);
        if (r.pass)
            ++passed;
        else if (first_failure.empty())
            first_failure = r.name;
    }
    std::printf("%zu/%zu checks passed\n", passed, results.size());
    if (!first_failure.empty()) {
        std::fflush(stdout);
        std::fprintf(stderr, "verification failed: %s\n", first_failure.c_str());
        return 1;
    }
    return 0;
}

int cmd_verify(const BuiltConfig& built) {
    frpe::VerifyOptions opt;
    if (built.was_set("lengths")) opt.lengths = built.cfg.lengths;
    opt.epsilon = built.cfg.epsilon;
    opt.seed = frpe::RngSeed{built.cfg.seeds.empty() ? 2024 : built.cfg.seeds.front()};
    opt.inject_fault = built.cfg.inject_fault;
    return print_check_table(frpe::run_verify_suite(opt));
}

int cmd_rope_check(const BuiltConfig& built) {
    frpe::VerifyOptions opt;
    opt.seed = frpe::RngSeed{built.cfg.seeds.empty() ? 2024 : built.cfg.seeds.front()};
    std::vector<frpe::CheckResult> results;
    frpe::detail::VerifyContext ctx{opt, results};
    frpe::detail::check_rope_exactness(ctx);
    frpe::detail::check_string_exactness(ctx);
    frpe::detail::check_point_rope(ctx);
    return print_check_table(results);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fourier relative-position attention: benchmarks and verification"};
    app.require_subcommand(1);

    Staged st_verify, st_bench, st_fm, st_err, st_kernel, st_rope;
    CLI::App* verify = app.add_subcommand("verify", "Run the oracle/invariant check suite");
    add_common_options(verify, st_verify);
    CLI::App* bench =
        app.add_subcommand("bench-scaling", "Time attention variants across lengths");
    add_common_options(bench, st_bench);
    CLI::App* bench_fm =
        app.add_subcommand("bench-fastmult", "Time mask-product backends across lengths");
    add_common_options(bench_fm, st_fm);
    CLI::App* err = app.add_subcommand("error-vs-s", "Quadrature error against the ideal mask");
    add_common_options(err, st_err);
    CLI::App* kernel =
        app.add_subcommand("kernel-shape", "Estimated mask shape against reference kernels");
    add_common_options(kernel, st_kernel);
    CLI::App* rope = app.add_subcommand("rope-check", "Rotary/string reduction exactness checks");
    add_common_options(rope, st_rope);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (verify->parsed()) return cmd_verify(build_config(st_verify));
        if (rope->parsed()) return cmd_rope_check(build_config(st_rope));
        if (bench->parsed()) {
            BuiltConfig built = build_config(st_bench);
            warn_threads(built.cfg);
            emit_table(built.cfg, frpe::bench_scaling(built.cfg), "bench-scaling");
            return 0;
        }
        if (bench_fm->parsed()) {
            BuiltConfig built = build_config(st_fm);
            warn_threads(built.cfg);
            emit_table(built.cfg, frpe::bench_fastmult(built.cfg), "bench-fastmult");
            return 0;
        }
        if (err->parsed()) {
            BuiltConfig built = build_config(st_err);
            if (!built.was_set("seeds")) {
                built.cfg.seeds.clear();  // default: 20 derived seeds
                for (std::uint64_t i = 0; i < 20; ++i) built.cfg.seeds.push_back(101 + i);
            }
            emit_table(built.cfg, frpe::error_vs_s(built.cfg), "error-vs-s");
            return 0;
        }
        if (kernel->parsed()) {
            BuiltConfig built = build_config(st_kernel);
            if (!built.was_set("quadrature_size")) built.cfg.quadrature_size = 1024;
            emit_table(built.cfg, frpe::kernel_shape(built.cfg), "kernel-shape");
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;  // unreachable with require_subcommand(1)
}
