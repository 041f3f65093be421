#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covtune/assimilation.hpp"
#include "covtune/chain.hpp"
#include "covtune/errors.hpp"
#include "covtune/io.hpp"
#include "covtune/kernels.hpp"
#include "covtune/obs_operator.hpp"
#include "covtune/shallow_water.hpp"
#include "covtune/twin.hpp"

namespace covtune {

using json = nlohmann::json;

namespace cfg {

inline void check_keys(const json& j, const std::string& ctx,
                       std::initializer_list<std::string_view> allowed) {
    require_config(j.is_object(), ctx + " must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (std::string_view k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        require_config(ok, "unknown key '" + item.key() + "' in " + ctx);
    }
}

template <typename T>
inline T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

template <typename T>
inline T get_required(const json& j, const std::string& ctx, const char* key) {
    require_config(j.contains(key), ctx + ": missing required key '" + key + "'");
    return j.at(key).get<T>();
}

} // namespace cfg

// ---- Section parsers. Each consumes one JSON object, validates its keys,
// applies documented defaults and returns the resolved runtime struct.

inline CorrelationKernel parse_kernel(const json& j, const std::string& ctx) {
    cfg::check_keys(j, ctx, {"kind", "length"});
    CorrelationKernel k;
    k.kind = kernel_kind_from_string(cfg::get_or<std::string>(j, "kind", "exponential"));
    k.length = cfg::get_or<double>(j, "length", 1.0);
    require_config(k.length > 0.0, ctx + ": length must be positive");
    return k;
}

inline json to_json(const CorrelationKernel& k) {
    return json{{"kind", to_string(k.kind)}, {"length", k.length}};
}

inline Window parse_window(const json& j) {
    cfg::check_keys(j, "window", {"row0", "col0", "rows", "cols"});
    Window w;
    w.row0 = cfg::get_or<int>(j, "row0", 50);
    w.col0 = cfg::get_or<int>(j, "col0", 60);
    w.rows = cfg::get_or<int>(j, "rows", 10);
    w.cols = cfg::get_or<int>(j, "cols", 10);
    return w;
}

inline json to_json(const Window& w) {
    return json{{"row0", w.row0}, {"col0", w.col0}, {"rows", w.rows}, {"cols", w.cols}};
}

inline SWConfig parse_solver(const json& j) {
    cfg::check_keys(j, "solver", {"nx", "ny", "dx", "dy", "dt", "g", "b"});
    SWConfig c;
    c.nx = cfg::get_or<int>(j, "nx", 100);
    c.ny = cfg::get_or<int>(j, "ny", 100);
    c.dx = cfg::get_or<double>(j, "dx", 1.0);
    c.dy = cfg::get_or<double>(j, "dy", 1.0);
    c.dt = cfg::get_or<double>(j, "dt", 1e-6);
    c.g = cfg::get_or<double>(j, "g", 1.0);
    c.b = cfg::get_or<double>(j, "b", 0.0);
    c.validate();
    return c;
}

inline json to_json(const SWConfig& c) {
    return json{{"nx", c.nx}, {"ny", c.ny}, {"dx", c.dx}, {"dy", c.dy},
                {"dt", c.dt}, {"g", c.g},   {"b", c.b}};
}

// Initial condition of the flow solver: still water plus a height cylinder.
struct InitConfig {
    double base_height = 1.0;
    double bump = 0.1;
    std::pair<int, int> center{50, 50};
    double radius = 10.0;
};

inline InitConfig parse_init(const json& j) {
    cfg::check_keys(j, "init", {"base_height", "bump", "center", "radius"});
    InitConfig c;
    c.base_height = cfg::get_or<double>(j, "base_height", 1.0);
    c.bump = cfg::get_or<double>(j, "bump", 0.1);
    if (j.contains("center")) {
        const auto arr = j.at("center");
        require_config(arr.is_array() && arr.size() == 2,
                       "init.center must be a [row, col] pair");
        c.center = {arr.at(0).get<int>(), arr.at(1).get<int>()};
    }
    c.radius = cfg::get_or<double>(j, "radius", 10.0);
    return c;
}

inline json to_json(const InitConfig& c) {
    return json{{"base_height", c.base_height},
                {"bump", c.bump},
                {"center", json::array({c.center.first, c.center.second})},
                {"radius", c.radius}};
}

// Truth for static experiments: a solver snapshot or an explicit vector.
struct TruthConfig {
    enum class Source { ShallowWater, Vector };
    Source source = Source::ShallowWater;
    SWConfig solver;
    InitConfig init;
    long long steps = 1500;
    std::vector<double> values;
};

inline TruthConfig parse_truth(const json& j) {
    cfg::check_keys(j, "truth", {"source", "solver", "init", "steps", "values"});
    TruthConfig t;
    const std::string source = cfg::get_or<std::string>(j, "source", "shallow_water");
    if (source == "shallow_water") {
        t.source = TruthConfig::Source::ShallowWater;
        if (j.contains("solver")) t.solver = parse_solver(j.at("solver"));
        if (j.contains("init")) t.init = parse_init(j.at("init"));
        t.steps = cfg::get_or<long long>(j, "steps", 1500);
        require_config(t.steps >= 0, "truth.steps must be nonnegative");
        require_config(!j.contains("values"),
                       "truth.values is only valid with source 'vector'");
    } else if (source == "vector") {
        t.source = TruthConfig::Source::Vector;
        t.values = cfg::get_required<std::vector<double>>(j, "truth", "values");
        require_config(!t.values.empty(), "truth.values must be nonempty");
        require_config(!j.contains("solver") && !j.contains("init") && !j.contains("steps"),
                       "solver settings are only valid with source 'shallow_water'");
    } else {
        throw config_error("truth.source must be 'shallow_water' or 'vector'");
    }
    return t;
}

inline json to_json(const TruthConfig& t) {
    if (t.source == TruthConfig::Source::Vector)
        return json{{"source", "vector"}, {"values", t.values}};
    return json{{"source", "shallow_water"},
                {"solver", to_json(t.solver)},
                {"init", to_json(t.init)},
                {"steps", t.steps}};
}

inline Eigen::VectorXd resolve_truth(const TruthConfig& t, const Window& window) {
    if (t.source == TruthConfig::Source::Vector) {
        require_config(static_cast<int>(t.values.size()) == window.size(),
                       "truth.values length must match the subdomain state size");
        return Eigen::Map<const Eigen::VectorXd>(t.values.data(),
                                                 static_cast<Eigen::Index>(t.values.size()));
    }
    const FlowState s0 = init_cylinder(t.solver, t.init.base_height, t.init.bump,
                                       t.init.center, t.init.radius);
    const FlowState s = integrate(s0, t.solver, t.steps);
    return extract_subdomain(s, window);
}

// Observation operator: generated from a seed or loaded from a pinned CSV.
struct OperatorConfig {
    bool from_file = false;
    std::string file;
    BinomialSelectionSpec spec;
};

inline OperatorConfig parse_operator(const json& j) {
    cfg::check_keys(j, "operator", {"file", "state_dim", "obs_dim", "p", "seed"});
    OperatorConfig c;
    if (j.contains("file")) {
        c.from_file = true;
        c.file = j.at("file").get<std::string>();
        require_config(j.size() == 1, "operator.file excludes generation keys");
        return c;
    }
    c.spec.state_dim = cfg::get_or<Eigen::Index>(j, "state_dim", 200);
    c.spec.obs_dim = cfg::get_or<Eigen::Index>(j, "obs_dim", 100);
    c.spec.p = cfg::get_or<double>(j, "p", 0.01);
    c.spec.seed = cfg::get_or<std::uint64_t>(j, "seed", 1);
    c.spec.validate();
    return c;
}

inline json to_json(const OperatorConfig& c) {
    if (c.from_file) return json{{"file", c.file}};
    return json{{"state_dim", c.spec.state_dim},
                {"obs_dim", c.spec.obs_dim},
                {"p", c.spec.p},
                {"seed", c.spec.seed}};
}

inline LinearObservationOperator resolve_operator(const OperatorConfig& c) {
    if (c.from_file) return load_operator_csv(c.file);
    return generate_h(c.spec);
}

inline NoiseModel parse_noise(const json& j) {
    cfg::check_keys(j, "noise",
                    {"mode", "sigma_b", "sigma_o", "mu_b", "mu_o", "kernel"});
    NoiseModel n;
    const std::string mode = cfg::get_or<std::string>(j, "mode", "state_independent");
    if (mode == "state_independent")
        n.mode = NoiseMode::StateIndependent;
    else if (mode == "state_dependent")
        n.mode = NoiseMode::StateDependent;
    else
        throw config_error("noise.mode must be 'state_independent' or 'state_dependent'");
    n.sigma_b = cfg::get_or<double>(j, "sigma_b", 0.1);
    n.sigma_o = cfg::get_or<double>(j, "sigma_o", 0.01);
    n.mu_b = cfg::get_or<double>(j, "mu_b", 0.10);
    n.mu_o = cfg::get_or<double>(j, "mu_o", 0.01);
    if (j.contains("kernel")) n.exact_kernel = parse_kernel(j.at("kernel"), "noise.kernel");
    else n.exact_kernel = CorrelationKernel{KernelKind::Balgovind, 2.0};
    n.validate();
    return n;
}

inline json to_json(const NoiseModel& n) {
    return json{{"mode", n.mode == NoiseMode::StateIndependent ? "state_independent"
                                                               : "state_dependent"},
                {"sigma_b", n.sigma_b},
                {"sigma_o", n.sigma_o},
                {"mu_b", n.mu_b},
                {"mu_o", n.mu_o},
                {"kernel", to_json(n.exact_kernel)}};
}

// First-guess covariance model. r_variance fixes the assumed observation
// error variance (R_A = r_variance * I); the default is sigma_o^2 in
// state-independent mode and the string "mean_exact" (mean of the exact
// diagonal) in state-dependent mode. use_exact_background replaces the
// kernel model by B_A,0 = B_E (the optimal-reference configuration).
struct AssumedConfig {
    CorrelationKernel kernel{KernelKind::Exponential, 3.0};
    double sigma = 0.05;
    bool use_exact_background = false;
    bool r_mean_exact = false;
    double r_variance = 0.0;
    bool r_variance_given = false;
};

inline AssumedConfig parse_assumed(const json& j) {
    cfg::check_keys(j, "assumed",
                    {"kernel", "sigma", "use_exact_background", "r_variance"});
    AssumedConfig c;
    if (j.contains("kernel")) c.kernel = parse_kernel(j.at("kernel"), "assumed.kernel");
    c.sigma = cfg::get_or<double>(j, "sigma", 0.05);
    require_config(c.sigma > 0.0, "assumed.sigma must be positive");
    c.use_exact_background = cfg::get_or<bool>(j, "use_exact_background", false);
    if (j.contains("r_variance")) {
        const json& rv = j.at("r_variance");
        if (rv.is_string()) {
            require_config(rv.get<std::string>() == "mean_exact",
                           "assumed.r_variance must be a number or 'mean_exact'");
            c.r_mean_exact = true;
        } else {
            c.r_variance = rv.get<double>();
            require_config(c.r_variance > 0.0, "assumed.r_variance must be positive");
            c.r_variance_given = true;
        }
    }
    return c;
}

inline json to_json(const AssumedConfig& c) {
    json j{{"kernel", to_json(c.kernel)},
           {"sigma", c.sigma},
           {"use_exact_background", c.use_exact_background}};
    if (c.r_mean_exact)
        j["r_variance"] = "mean_exact";
    else if (c.r_variance_given)
        j["r_variance"] = c.r_variance;
    return j;
}

inline TuningConfig parse_tuning(const json& j) {
    cfg::check_keys(j, "tuning", {"method", "alpha", "max_iters", "innovation_rel_tol"});
    TuningConfig t;
    t.method = method_from_string(cfg::get_required<std::string>(j, "tuning", "method"));
    t.alpha = cfg::get_or<double>(j, "alpha", 0.0);
    t.max_iters = cfg::get_or<int>(j, "max_iters", 10);
    t.innovation_rel_tol = cfg::get_or<double>(j, "innovation_rel_tol", 0.0);
    t.validate();
    return t;
}

inline json to_json(const TuningConfig& t) {
    return json{{"method", to_string(t.method)},
                {"alpha", t.alpha},
                {"max_iters", t.max_iters},
                {"innovation_rel_tol", t.innovation_rel_tol}};
}

// ---- Command-level configurations.

struct ScalarConfig {
    double B_A = 3.0;
    double B_E = 3.0;
    double R = 1.0;
    double H = 1.0;
    double alpha = 1.0;
    int iters = 10;
};

inline ScalarConfig parse_scalar_config(const json& j) {
    cfg::check_keys(j, "scalar", {"B_A", "B_E", "R", "H", "alpha", "iters"});
    ScalarConfig c;
    c.B_A = cfg::get_or<double>(j, "B_A", 3.0);
    c.B_E = cfg::get_or<double>(j, "B_E", 3.0);
    c.R = cfg::get_or<double>(j, "R", 1.0);
    c.H = cfg::get_or<double>(j, "H", 1.0);
    c.alpha = cfg::get_or<double>(j, "alpha", 1.0);
    c.iters = cfg::get_or<int>(j, "iters", 10);
    require_config(c.B_A > 0.0 && c.B_E > 0.0 && c.R > 0.0,
                   "scalar variances must be positive");
    require_config(c.H != 0.0, "scalar H must be nonzero");
    require_config(c.alpha >= 0.0 && c.alpha <= 1.0, "scalar alpha must lie in [0, 1]");
    require_config(c.iters >= 1, "scalar iters must be at least 1");
    return c;
}

inline json to_json(const ScalarConfig& c) {
    return json{{"B_A", c.B_A}, {"B_E", c.B_E}, {"R", c.R},
                {"H", c.H},     {"alpha", c.alpha}, {"iters", c.iters}};
}

struct StaticConfig {
    TruthConfig truth;
    Window window;
    OperatorConfig op;
    NoiseModel noise;
    AssumedConfig assumed;
    TuningConfig tuning;
    int trials = 200;
    std::uint64_t seed = 0;
    int threads = 1;
};

inline StaticConfig parse_static_config(const json& j) {
    cfg::check_keys(j, "static config",
                    {"truth", "window", "operator", "noise", "assumed", "tuning",
                     "trials", "seed", "threads", "out_dir"});
    StaticConfig c;
    if (j.contains("truth")) c.truth = parse_truth(j.at("truth"));
    if (j.contains("window")) c.window = parse_window(j.at("window"));
    if (j.contains("operator")) c.op = parse_operator(j.at("operator"));
    if (j.contains("noise")) c.noise = parse_noise(j.at("noise"));
    if (j.contains("assumed")) c.assumed = parse_assumed(j.at("assumed"));
    require_config(j.contains("tuning"), "static config: missing 'tuning' section");
    c.tuning = parse_tuning(j.at("tuning"));
    c.trials = cfg::get_or<int>(j, "trials", 200);
    require_config(c.trials >= 2, "trials must be at least 2");
    c.seed = cfg::get_or<std::uint64_t>(j, "seed", 0);
    c.threads = cfg::get_or<int>(j, "threads", 1);
    return c;
}

inline json to_json(const StaticConfig& c) {
    return json{{"truth", to_json(c.truth)},
                {"window", to_json(c.window)},
                {"operator", to_json(c.op)},
                {"noise", to_json(c.noise)},
                {"assumed", to_json(c.assumed)},
                {"tuning", to_json(c.tuning)},
                {"trials", c.trials},
                {"seed", c.seed},
                {"threads", c.threads}};
}

struct ChainSection {
    long long interval_steps = 2000;
    int cycles = 10;
    Placement placement = Placement::FirstStepOnly;
    int inner_iters = 10;
    double alpha = 0.0;
};

inline ChainSection parse_chain_section(const json& j) {
    cfg::check_keys(j, "chain",
                    {"interval_steps", "cycles", "placement", "inner_iters", "alpha"});
    ChainSection c;
    c.interval_steps = cfg::get_or<long long>(j, "interval_steps", 2000);
    c.cycles = cfg::get_or<int>(j, "cycles", 10);
    c.placement = placement_from_string(
        cfg::get_or<std::string>(j, "placement", "first_step_only"));
    c.inner_iters = cfg::get_or<int>(j, "inner_iters", 10);
    c.alpha = cfg::get_or<double>(j, "alpha", 0.0);
    require_config(c.interval_steps >= 1, "chain.interval_steps must be positive");
    require_config(c.cycles >= 1, "chain.cycles must be at least 1");
    require_config(c.inner_iters >= 1, "chain.inner_iters must be at least 1");
    require_config(c.alpha >= 0.0 && c.alpha <= 1.0, "chain.alpha must lie in [0, 1]");
    return c;
}

inline json to_json(const ChainSection& c) {
    return json{{"interval_steps", c.interval_steps},
                {"cycles", c.cycles},
                {"placement", to_string(c.placement)},
                {"inner_iters", c.inner_iters},
                {"alpha", c.alpha}};
}

struct DynamicConfig {
    SWConfig solver;
    InitConfig init;
    Window window;
    OperatorConfig op;
    NoiseModel noise;
    AssumedConfig assumed;
    ChainSection chain;
    int trials = 100;
    std::uint64_t seed = 0;
    int threads = 1;
};

inline DynamicConfig parse_dynamic_config(const json& j) {
    cfg::check_keys(j, "dynamic config",
                    {"solver", "init", "window", "operator", "noise", "assumed",
                     "chain", "trials", "seed", "threads", "out_dir"});
    DynamicConfig c;
    if (j.contains("solver")) c.solver = parse_solver(j.at("solver"));
    if (j.contains("init")) c.init = parse_init(j.at("init"));
    if (j.contains("window")) c.window = parse_window(j.at("window"));
    if (j.contains("operator")) c.op = parse_operator(j.at("operator"));
    if (j.contains("noise")) c.noise = parse_noise(j.at("noise"));
    if (j.contains("assumed")) c.assumed = parse_assumed(j.at("assumed"));
    if (j.contains("chain")) c.chain = parse_chain_section(j.at("chain"));
    c.trials = cfg::get_or<int>(j, "trials", 100);
    require_config(c.trials >= 1, "trials must be at least 1");
    c.seed = cfg::get_or<std::uint64_t>(j, "seed", 0);
    c.threads = cfg::get_or<int>(j, "threads", 1);
    require_config(!c.assumed.use_exact_background,
                   "dynamic config: use_exact_background is not supported");
    return c;
}

inline json to_json(const DynamicConfig& c) {
    return json{{"solver", to_json(c.solver)},
                {"init", to_json(c.init)},
                {"window", to_json(c.window)},
                {"operator", to_json(c.op)},
                {"noise", to_json(c.noise)},
                {"assumed", to_json(c.assumed)},
                {"chain", to_json(c.chain)},
                {"trials", c.trials},
                {"seed", c.seed},
                {"threads", c.threads}};
}

struct GenHConfig {
    BinomialSelectionSpec spec;
    std::string out_file = "H.csv";
};

inline GenHConfig parse_gen_h_config(const json& j) {
    cfg::check_keys(j, "gen-h config", {"operator", "out_file", "out_dir"});
    GenHConfig c;
    if (j.contains("operator")) {
        const OperatorConfig oc = parse_operator(j.at("operator"));
        require_config(!oc.from_file, "gen-h: operator must be a generation spec");
        c.spec = oc.spec;
    }
    c.out_file = cfg::get_or<std::string>(j, "out_file", "H.csv");
    return c;
}

inline json to_json(const GenHConfig& c) {
    return json{{"operator",
                 json{{"state_dim", c.spec.state_dim},
                      {"obs_dim", c.spec.obs_dim},
                      {"p", c.spec.p},
                      {"seed", c.spec.seed}}},
                {"out_file", c.out_file}};
}

inline json load_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw config_error("cannot parse " + path + ": " + e.what());
    }
}

} // namespace covtune
