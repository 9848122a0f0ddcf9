// Command-line front end: generate | simulate | fit | infer | mc | counterfactual.
// One JSON config drives every subcommand; --seed/--output/--format override.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "heenet/dataset.hpp"
#include "heenet/dgp.hpp"
#include "heenet/rng.hpp"
#include "heenet/estimator.hpp"
#include "heenet/inference.hpp"
#include "heenet/montecarlo.hpp"
#include "heenet/network.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace heenet;

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

[[noreturn]] void fail(const std::string& code, const std::string& message) {
    json err;
    err["error"]["code"] = code;
    err["error"]["message"] = message;
    std::cerr << err.dump() << "\n";
    std::exit(1);
}

json load_config(const std::string& path) {
    if (path.empty()) fail("config_missing", "subcommand requires --config <path>");
    std::ifstream in(path);
    if (!in) fail("config_unreadable", "cannot open config file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail("config_parse", std::string(e.what()));
    }
}

// schema helpers: every failure names the JSON pointer it came from
const json& need(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) fail("config_schema", "config " + where + "/" + key + ": missing");
    return j.at(key);
}

double need_number(const json& j, const std::string& key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number()) fail("config_schema", "config " + where + "/" + key + ": expected number");
    return v.get<double>();
}

template <typename T>
T opt(const json& j, const std::string& key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

struct CommonArgs {
    std::string config_path;
    std::string output;
    std::string format = "both";
    std::optional<std::uint64_t> seed;
};

fs::path output_dir(const CommonArgs& args) {
    if (!args.output.empty()) return args.output;
    if (const char* env = std::getenv("HEENET_OUTPUT_DIR")) return env;
    return ".";
}

bool want_csv(const CommonArgs& a) { return a.format == "csv" || a.format == "both"; }
bool want_json(const CommonArgs& a) { return a.format == "json" || a.format == "both"; }

GeneratorSpec parse_generator(const json& net) {
    GeneratorSpec gen;
    const std::string kind = opt<std::string>(net, "generator", "erdos_renyi");
    if (kind == "erdos_renyi") {
        gen.kind = GeneratorSpec::Kind::erdos_renyi;
        gen.p = need_number(net, "p", "/network");
        if (gen.p < 0.0 || gen.p > 1.0) fail("config_schema", "config /network/p: outside [0,1]");
    } else if (kind == "watts_strogatz") {
        gen.kind = GeneratorSpec::Kind::watts_strogatz;
        gen.mean_degree = static_cast<Index>(need_number(net, "mean_degree", "/network"));
        gen.omega = need_number(net, "omega", "/network");
    } else {
        fail("config_schema", "config /network/generator: unknown generator " + kind);
    }
    return gen;
}

StagePolicy parse_stage(const json& j, const std::string& where) {
    const std::string kind = opt<std::string>(j, "policy", "benchmark");
    if (kind == "benchmark") return StagePolicy::benchmark(opt(j, "c", 2.0));
    if (kind == "cv") {
        return StagePolicy::cv(opt(j, "folds", 10), opt(j, "path_size", 30),
                               opt(j, "min_ratio", 0.01));
    }
    if (kind == "fixed") return StagePolicy::fixed(need_number(j, "lambda", where));
    fail("config_schema", "config " + where + "/policy: unknown policy " + kind);
}

TuningPolicy parse_tuning(const json& cfg) {
    TuningPolicy tuning;
    if (cfg.contains("tuning")) {
        const json& t = cfg.at("tuning");
        if (t.contains("first_stage")) tuning.first = parse_stage(t.at("first_stage"), "/tuning/first_stage");
        if (t.contains("second_stage")) tuning.second = parse_stage(t.at("second_stage"), "/tuning/second_stage");
        tuning.cv_seed = opt<std::uint64_t>(t, "cv_seed", 0);
        tuning.penalize_gamma = opt(t, "penalize_gamma", true);
    }
    return tuning;
}

SolverConfig parse_solver(const json& cfg) {
    SolverConfig solver;
    if (cfg.contains("solver")) {
        const json& s = cfg.at("solver");
        solver.max_iterations = opt(s, "max_iterations", 10'000);
        solver.tolerance = opt(s, "tolerance", 1e-8);
        solver.standardize = opt(s, "standardize", true);
        if (solver.tolerance <= 0.0 || solver.max_iterations < 1) {
            fail("config_schema", "config /solver: tolerance > 0 and max_iterations >= 1 required");
        }
    }
    return solver;
}

InferenceConfig parse_inference(const json& cfg) {
    InferenceConfig icfg;
    if (cfg.contains("inference")) {
        const json& i = cfg.at("inference");
        icfg.ci_level = opt(i, "ci_level", 0.95);
        icfg.fdr_q = opt(i, "fdr_q", 0.05);
        icfg.lambda_node_c = opt(i, "lambda_node_c", 1.0);
        if (!(icfg.ci_level > 0.0 && icfg.ci_level < 1.0)) {
            fail("config_schema", "config /inference/ci_level: outside (0,1)");
        }
        if (!(icfg.fdr_q > 0.0 && icfg.fdr_q < 1.0)) {
            fail("config_schema", "config /inference/fdr_q: outside (0,1)");
        }
    }
    icfg.solver = parse_solver(cfg);
    return icfg;
}

Model parse_model(const std::string& m, const std::string& where) {
    if (m == "base") return Model::base;
    if (m == "cliques") return Model::cliques;
    if (m == "multinet") return Model::multinet;
    fail("config_schema", "config " + where + ": unknown model " + m);
}

StudyConfig parse_study(const json& cfg) {
    StudyConfig sc;
    const json mc = cfg.value("mc", json::object());
    const json& net = need(cfg, "network", "");
    const json& dgp = need(cfg, "dgp", "");

    sc.model = parse_model(opt<std::string>(dgp, "model", "base"), "/dgp/model");
    sc.n = static_cast<Index>(need_number(net, "n", "/network"));
    sc.generator = parse_generator(net);
    sc.embed_leader_block = opt(net, "leader_block", true);

    for (const auto& v : need(dgp, "leaders", "/dgp")) sc.leaders.push_back(v.get<Index>());
    const auto lv = need(dgp, "leader_values", "/dgp").get<std::vector<double>>();
    sc.leader_values = Eigen::Map<const Vector>(lv.data(), static_cast<Index>(lv.size()));
    const auto b0 = need(dgp, "beta0", "/dgp").get<std::vector<double>>();
    sc.beta0 = Eigen::Map<const Vector>(b0.data(), static_cast<Index>(b0.size()));
    sc.k = sc.beta0.size();
    sc.gamma0 = opt(dgp, "gamma0", 0.0);
    sc.q = opt<Index>(net, "count", sc.model == Model::multinet ? 2 : 1);
    sc.relevant_network = opt<Index>(dgp, "relevant_network", 0);
    sc.sigma = opt(dgp, "sigma", 1.0);
    sc.noise = opt<std::string>(dgp, "noise", "gaussian") == "uniform" ? NoiseLaw::uniform
                                                                       : NoiseLaw::gaussian;
    sc.replications = opt(mc, "replications", 200);
    const json icfg = cfg.value("inference", json::object());
    sc.ci_level = opt(icfg, "ci_level", 0.95);
    sc.fdr_q = opt(icfg, "fdr_q", 0.05);
    sc.lambda_node_c = opt(icfg, "lambda_node_c", 1.0);
    sc.tuning = parse_tuning(cfg);
    sc.solver = parse_solver(cfg);
    sc.k_powers = opt(cfg.value("fit", json::object()), "k_powers", 2);
    sc.master_seed = opt<std::uint64_t>(mc, "master_seed", 1);
    sc.redraw_network = opt(mc, "redraw_network", true);
    sc.parallel = opt(mc, "parallel", true);
    return sc;
}

// ---- generate ----

int cmd_generate(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    const json& net = need(cfg, "network", "");
    const Index n = static_cast<Index>(need_number(net, "n", "/network"));
    const GeneratorSpec gen = parse_generator(net);
    const std::uint64_t seed = args.seed.value_or(opt<std::uint64_t>(net, "seed", 1));
    const Index count = opt<Index>(net, "count", 1);
    std::vector<std::string> labels = opt(net, "labels", std::vector<std::string>{});
    for (Index j = static_cast<Index>(labels.size()); j < count; ++j) {
        labels.push_back("net" + std::to_string(j));
    }

    const fs::path dir = output_dir(args);
    fs::create_directories(dir);
    MultiNetwork multi;
    std::vector<std::string> files;
    for (Index j = 0; j < count; ++j) {
        AdjacencyMatrix M = gen.kind == GeneratorSpec::Kind::erdos_renyi
                                ? erdos_renyi(n, gen.p, derive_seed(seed, j))
                                : watts_strogatz(n, gen.mean_degree, gen.omega, derive_seed(seed, j));
        if (opt(net, "leader_block", false)) {
            const Index s = opt<Index>(net, "leader_block_size", 5);
            M = embed_leader_block(M, path_block(s));
        }
        const std::string file = "network_" + labels[j] + ".csv";
        write_edge_list(dir / file, M);
        files.push_back(file);
        multi.networks.push_back(std::move(M));
        multi.labels.push_back(labels[j]);
    }
    write_network_manifest(dir / "networks_manifest.csv", multi, files);
    std::cout << "wrote " << count << " network(s) to " << dir.string() << "\n";
    return 0;
}

// ---- simulate ----

// build networks + params once, shared by simulate and the mc-free paths
struct SimContext {
    StudyConfig sc;
    MultiNetwork multi;  // holds 1 network for base/cliques
    Matrix X;
    StructuralParams params;
};

SimContext make_sim_context(const json& cfg, std::optional<std::uint64_t> seed_override) {
    SimContext ctx;
    ctx.sc = parse_study(cfg);
    ctx.sc.validate();
    const std::uint64_t seed =
        seed_override.value_or(opt<std::uint64_t>(need(cfg, "dgp", ""), "seed", 1));

    const Index nets = ctx.sc.model == Model::multinet ? ctx.sc.q : 1;
    for (Index j = 0; j < nets; ++j) {
        const std::uint64_t net_seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(j));
        AdjacencyMatrix M = ctx.sc.generator.kind == GeneratorSpec::Kind::erdos_renyi
                                ? erdos_renyi(ctx.sc.n, ctx.sc.generator.p, net_seed)
                                : watts_strogatz(ctx.sc.n, ctx.sc.generator.mean_degree,
                                                 ctx.sc.generator.omega, net_seed);
        const bool carries = ctx.sc.model != Model::multinet || j == ctx.sc.relevant_network;
        if (ctx.sc.embed_leader_block && carries && ctx.sc.leaders.size() >= 2) {
            M = embed_block_at(M, ctx.sc.leaders,
                               path_block(static_cast<Index>(ctx.sc.leaders.size())));
        }
        ctx.multi.networks.push_back(std::move(M));
        ctx.multi.labels.push_back("net" + std::to_string(j));
    }

    ctx.X = draw_design(ctx.sc.n, ctx.sc.k, derive_seed(seed, 2000));
    ctx.params.beta0 = ctx.sc.beta0;
    ctx.params.sigma = ctx.sc.sigma;
    ctx.params.noise = ctx.sc.noise;
    ctx.params.eta0 = Vector::Zero(ctx.sc.n);
    for (std::size_t a = 0; a < ctx.sc.leaders.size(); ++a) {
        ctx.params.eta0[ctx.sc.leaders[a]] = ctx.sc.leader_values[static_cast<Index>(a)];
    }
    if (ctx.sc.model == Model::cliques) ctx.params.gamma0 = ctx.sc.gamma0;
    if (ctx.sc.model == Model::multinet) {
        std::vector<Vector> em(ctx.sc.q, Vector::Zero(ctx.sc.n));
        em[ctx.sc.relevant_network] = ctx.params.eta0;
        ctx.params.eta0_multi = em;
    }
    return ctx;
}

int cmd_simulate_impl(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    SimContext ctx = make_sim_context(cfg, args.seed);
    const std::uint64_t seed =
        args.seed.value_or(opt<std::uint64_t>(need(cfg, "dgp", ""), "seed", 1));
    const std::uint64_t noise_seed = derive_seed(seed, 3000);

    Vector D;
    switch (ctx.sc.model) {
        case Model::base:
            D = simulate_base(ctx.multi.networks[0], ctx.params, ctx.X, noise_seed);
            break;
        case Model::cliques:
            D = simulate_cliques(ctx.multi.networks[0], ctx.params, ctx.X, noise_seed);
            break;
        case Model::multinet:
            D = simulate_multinet(ctx.multi, ctx.params, ctx.X, noise_seed);
            break;
    }

    Dataset data;
    data.D = D;
    data.X = ctx.X;
    for (Index c = 0; c < ctx.X.cols(); ++c) data.x_labels.push_back("x" + std::to_string(c + 1));
    data.networks = ctx.multi;
    for (Index i = 0; i < ctx.sc.n; ++i) data.node_ids.push_back(std::to_string(i));

    const fs::path dir = output_dir(args);
    write_dataset(dir, data);

    json params;
    params["model"] = ctx.sc.model == Model::base      ? "base"
                      : ctx.sc.model == Model::cliques ? "cliques"
                                                       : "multinet";
    params["seed"] = seed;
    params["beta0"] = std::vector<double>(ctx.sc.beta0.data(), ctx.sc.beta0.data() + ctx.sc.beta0.size());
    params["leaders"] = ctx.sc.leaders;
    params["leader_values"] = std::vector<double>(
        ctx.sc.leader_values.data(), ctx.sc.leader_values.data() + ctx.sc.leader_values.size());
    if (ctx.sc.model == Model::cliques) params["gamma0"] = ctx.sc.gamma0;
    params["sigma"] = ctx.sc.sigma;
    std::ofstream out(dir / "params.json");
    out << params.dump(2) << "\n";
    std::cout << "wrote dataset (n=" << ctx.sc.n << ") to " << dir.string() << "\n";
    return 0;
}

// ---- fit / infer ----

struct FitContext {
    Dataset data;
    Model model = Model::base;
    FitResult fit;
};

FitContext run_fit(const json& cfg) {
    FitContext ctx;
    const json& data_cfg = need(cfg, "data", "");
    ctx.data = load_dataset(need(data_cfg, "manifest", "/data").get<std::string>());

    const json fit_cfg = cfg.value("fit", json::object());
    std::string model_name = opt<std::string>(fit_cfg, "model", "");
    if (model_name.empty()) {
        model_name = ctx.data.networks.count() > 1 ? "multinet" : "base";
    }
    ctx.model = parse_model(model_name, "/fit/model");

    const TuningPolicy tuning = parse_tuning(cfg);
    const SolverConfig solver = parse_solver(cfg);
    switch (ctx.model) {
        case Model::base:
            ctx.fit = fit_2slss(ctx.data.D, ctx.data.X, ctx.data.networks.networks[0], tuning, solver);
            break;
        case Model::cliques:
            ctx.fit = fit_2slss_cliques(ctx.data.D, ctx.data.X, ctx.data.networks.networks[0],
                                        opt(fit_cfg, "k_powers", 2), tuning, solver);
            break;
        case Model::multinet:
            ctx.fit = fit_2slss_multinet(ctx.data.D, ctx.data.X, ctx.data.networks, tuning, solver);
            break;
    }
    return ctx;
}

json fit_to_json(const FitContext& ctx) {
    const Index n = ctx.data.n();
    json j;
    j["lambda1"] = ctx.fit.lambda1;
    j["lambda2"] = ctx.fit.lambda2;
    if (ctx.model == Model::multinet) j["lambda2_group"] = ctx.fit.lambda2_group;
    j["kkt_stage1"] = ctx.fit.kkt1;
    j["kkt_stage2"] = ctx.fit.kkt2;
    j["sweeps_stage1"] = ctx.fit.sweeps1;
    j["sweeps_stage2"] = ctx.fit.sweeps2;
    j["isolated_nodes"] = ctx.fit.isolated;
    json beta = json::array();
    for (Index c = 0; c < ctx.data.X.cols(); ++c) {
        beta.push_back({{"id", ctx.data.x_labels[c]}, {"estimate", ctx.fit.beta_hat[c]}});
    }
    j["beta"] = beta;
    if (ctx.fit.gamma_hat) j["gamma"] = *ctx.fit.gamma_hat;
    json eta = json::array();
    for (Index idx = 0; idx < ctx.fit.eta_hat.size(); ++idx) {
        if (ctx.fit.eta_hat[idx] == 0.0) continue;
        const Index net = idx / n;
        const Index node = idx % n;
        eta.push_back({{"id", ctx.data.node_ids[node]},
                       {"network", ctx.data.networks.labels[net]},
                       {"estimate", ctx.fit.eta_hat[idx]}});
    }
    j["eta_selected"] = eta;
    return j;
}

std::string fit_to_csv(const FitContext& ctx) {
    const Index n = ctx.data.n();
    std::string out = "kind,network,id,estimate,selected\n";
    for (Index c = 0; c < ctx.data.X.cols(); ++c) {
        out += "beta,," + ctx.data.x_labels[c] + "," + fmt(ctx.fit.beta_hat[c]) + ",\n";
    }
    if (ctx.fit.gamma_hat) {
        out += "gamma,,gamma," + fmt(*ctx.fit.gamma_hat) + "," +
               (*ctx.fit.gamma_hat != 0.0 ? "1" : "0") + "\n";
    }
    for (Index idx = 0; idx < ctx.fit.eta_hat.size(); ++idx) {
        const Index net = idx / n;
        const Index node = idx % n;
        out += "eta," + ctx.data.networks.labels[net] + "," + ctx.data.node_ids[node] + "," +
               fmt(ctx.fit.eta_hat[idx]) + "," + (ctx.fit.eta_hat[idx] != 0.0 ? "1" : "0") + "\n";
    }
    return out;
}

int cmd_fit(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    const FitContext ctx = run_fit(cfg);
    const fs::path dir = output_dir(args);
    fs::create_directories(dir);
    if (want_csv(args)) {
        std::ofstream out(dir / "fit.csv");
        out << fit_to_csv(ctx);
    }
    if (want_json(args)) {
        std::ofstream out(dir / "fit.json");
        out << fit_to_json(ctx).dump(2) << "\n";
    }
    std::cout << "fit: " << ctx.fit.selected.size() << " selected coefficient(s), lambda2="
              << fmt(ctx.fit.lambda2) << "\n";
    return 0;
}

struct InferContext {
    FitContext fit_ctx;
    InferenceResult inf;
};

InferContext run_infer(const json& cfg) {
    InferContext ctx;
    ctx.fit_ctx = run_fit(cfg);
    const InferenceConfig icfg = parse_inference(cfg);
    const auto& d = ctx.fit_ctx.data;
    if (ctx.fit_ctx.model == Model::multinet) {
        ctx.inf = infer_fit(d.D, d.X, d.networks, ctx.fit_ctx.fit, icfg);
    } else {
        ctx.inf = infer_fit(d.D, d.X, d.networks.networks[0], ctx.fit_ctx.fit, icfg);
    }
    return ctx;
}

std::string infer_to_csv(const InferContext& ctx) {
    const auto& d = ctx.fit_ctx.data;
    const auto& inf = ctx.inf;
    const Index n = d.n();
    std::set<Index> rejected(inf.bh_rejections.begin(), inf.bh_rejections.end());
    std::string out = "id,network,estimate,se,ci_lo,ci_hi,p,bh_rejected\n";
    for (Index c = 0; c < d.X.cols(); ++c) {
        out += d.x_labels[c] + ",," + fmt(inf.b_hat[c]) + "," + fmt(inf.se_beta[c]) + "," +
               fmt(inf.beta_ci_lower[c]) + "," + fmt(inf.beta_ci_upper[c]) + "," +
               fmt(inf.p_beta[c]) + ",0\n";
    }
    if (inf.gamma_hat) {
        out += "gamma,," + fmt(*inf.gamma_hat) + "," + fmt(*inf.se_gamma) + "," +
               fmt(*inf.gamma_ci_lower) + "," + fmt(*inf.gamma_ci_upper) + "," +
               fmt(*inf.p_gamma) + ",0\n";
    }
    for (Index idx = 0; idx < inf.e_hat.size(); ++idx) {
        const Index net = idx / n;
        const Index node = idx % n;
        out += d.node_ids[node] + "," + d.networks.labels[net] + "," + fmt(inf.e_hat[idx]) + "," +
               fmt(inf.se_eta[idx]) + "," + fmt(inf.ci_lower[idx]) + "," + fmt(inf.ci_upper[idx]) +
               "," + fmt(inf.p_values[idx]) + "," + (rejected.count(idx) ? "1" : "0") + "\n";
    }
    return out;
}

json infer_to_json(const InferContext& ctx) {
    const auto& d = ctx.fit_ctx.data;
    const auto& inf = ctx.inf;
    const Index n = d.n();
    std::set<Index> rejected(inf.bh_rejections.begin(), inf.bh_rejections.end());
    json j;
    j["sigma2_hat"] = inf.sigma2_hat;
    j["ci_level"] = inf.ci_level;
    json beta = json::array();
    for (Index c = 0; c < d.X.cols(); ++c) {
        beta.push_back({{"id", d.x_labels[c]},
                        {"estimate", inf.b_hat[c]},
                        {"se", inf.se_beta[c]},
                        {"ci_lo", inf.beta_ci_lower[c]},
                        {"ci_hi", inf.beta_ci_upper[c]},
                        {"p", inf.p_beta[c]}});
    }
    j["beta"] = beta;
    if (inf.gamma_hat) {
        j["gamma"] = {{"estimate", *inf.gamma_hat}, {"se", *inf.se_gamma},
                      {"ci_lo", *inf.gamma_ci_lower}, {"ci_hi", *inf.gamma_ci_upper},
                      {"p", *inf.p_gamma}};
    }
    json eta = json::array();
    for (Index idx = 0; idx < inf.e_hat.size(); ++idx) {
        const Index net = idx / n;
        const Index node = idx % n;
        json row = {{"id", d.node_ids[node]},
                    {"network", d.networks.labels[net]},
                    {"estimate", inf.e_hat[idx]},
                    {"se", std::isfinite(inf.se_eta[idx]) ? json(inf.se_eta[idx]) : json("inf")},
                    {"p", inf.p_values[idx]},
                    {"bh_rejected", rejected.count(idx) > 0},
                    {"valid", static_cast<bool>(inf.valid[idx])}};
        if (std::isfinite(inf.ci_lower[idx])) row["ci_lo"] = inf.ci_lower[idx];
        if (std::isfinite(inf.ci_upper[idx])) row["ci_hi"] = inf.ci_upper[idx];
        eta.push_back(row);
    }
    j["eta"] = eta;
    return j;
}

int cmd_infer(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    const InferContext ctx = run_infer(cfg);
    const fs::path dir = output_dir(args);
    fs::create_directories(dir);
    if (want_csv(args)) {
        std::ofstream out(dir / "inference.csv");
        out << infer_to_csv(ctx);
    }
    if (want_json(args)) {
        std::ofstream out(dir / "inference.json");
        out << infer_to_json(ctx).dump(2) << "\n";
    }
    std::cout << "infer: " << ctx.inf.bh_rejections.size() << " BH rejection(s), sigma2_hat="
              << fmt(ctx.inf.sigma2_hat) << "\n";
    return 0;
}

// ---- mc ----

int cmd_mc(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    StudyConfig sc = parse_study(cfg);
    if (args.seed) sc.master_seed = *args.seed;
    const MCReport report = run_study(sc);
    const fs::path dir = output_dir(args);
    fs::create_directories(dir);
    if (want_csv(args)) {
        std::ofstream out(dir / "mc_report.csv");
        out << report_to_csv(report);
    }
    if (want_json(args)) {
        std::ofstream out(dir / "mc_report.json");
        out << report_to_json(report) << "\n";
    }
    std::cout << "mc: " << report.completed << "/" << sc.replications
              << " replications, avgcov_S=" << fmt(report.avgcov_S)
              << " power=" << fmt(report.power) << " fdr=" << fmt(report.fdr) << "\n";
    return 0;
}

// ---- counterfactual ----

int cmd_counterfactual(const CommonArgs& args) {
    const json cfg = load_config(args.config_path);
    const json cf_cfg = cfg.value("counterfactual", json::object());

    std::vector<Index> leaders;
    std::vector<std::string> leader_ids;
    const InferContext ctx = [&]() {
        if (cf_cfg.contains("leaders") && cf_cfg.at("leaders").is_array()) {
            InferContext c;
            c.fit_ctx = run_fit(cfg);
            return c;  // explicit leader list: no inference pass needed
        }
        return run_infer(cfg);  // leaders = BH-selected nodes
    }();
    const auto& d = ctx.fit_ctx.data;
    const Index n = d.n();

    if (cf_cfg.contains("leaders") && cf_cfg.at("leaders").is_array()) {
        std::map<std::string, Index> id_of;
        for (Index i = 0; i < n; ++i) id_of[d.node_ids[i]] = i;
        for (const auto& v : cf_cfg.at("leaders")) {
            const std::string id = v.is_string() ? v.get<std::string>()
                                                 : std::to_string(v.get<long>());
            const auto it = id_of.find(id);
            if (it == id_of.end()) fail("config_schema", "counterfactual leader id not in dataset: " + id);
            leaders.push_back(it->second);
        }
    } else {
        std::set<Index> nodes;
        for (Index idx : ctx.inf.bh_rejections) nodes.insert(idx % n);
        leaders.assign(nodes.begin(), nodes.end());
    }
    std::sort(leaders.begin(), leaders.end());
    leaders.erase(std::unique(leaders.begin(), leaders.end()), leaders.end());
    for (Index j : leaders) leader_ids.push_back(d.node_ids[j]);

    EpsilonPolicy policy;
    if (cf_cfg.contains("epsilon")) {
        const json& e = cf_cfg.at("epsilon");
        const std::string kind = opt<std::string>(e, "policy", "zero");
        if (kind == "resample") {
            policy.kind = EpsilonPolicy::Kind::resample;
            policy.seed = opt<std::uint64_t>(e, "seed", 0);
            policy.draws = opt(e, "draws", 100);
            policy.sigma2 = opt(e, "sigma2", 1.0);
        } else if (kind != "zero") {
            fail("config_schema", "config /counterfactual/epsilon/policy: unknown " + kind);
        }
    }
    if (args.seed) policy.seed = *args.seed;

    const Counterfactual cf =
        ctx.fit_ctx.model == Model::multinet
            ? counterfactual_participation(ctx.fit_ctx.fit, d.networks, d.X, leaders, policy)
            : counterfactual_participation(ctx.fit_ctx.fit, d.networks.networks[0], d.X, leaders,
                                           policy);

    const fs::path dir = output_dir(args);
    fs::create_directories(dir);
    if (want_csv(args)) {
        std::ofstream out(dir / "counterfactual.csv");
        out << "id,predicted_outcome\n";
        for (std::size_t a = 0; a < cf.follower_ids.size(); ++a) {
            out << d.node_ids[cf.follower_ids[a]] << "," << fmt(cf.follower_outcomes[a]) << "\n";
        }
    }
    if (want_json(args)) {
        json j;
        j["participation_rate"] = cf.participation_rate;
        j["leaders"] = leader_ids;
        j["followers"] = cf.follower_ids.size();
        std::ofstream out(dir / "counterfactual.json");
        out << j.dump(2) << "\n";
    }
    std::cout << "counterfactual: participation rate " << fmt(cf.participation_rate) << " over "
              << cf.follower_ids.size() << " non-leaders\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heterogeneous endogenous network effects toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    std::uint64_t seed_value = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "JSON config file");
        sub->add_option("--output", args.output, "output directory");
        sub->add_option("--format", args.format, "csv|json|both")
            ->check(CLI::IsMember({"csv", "json", "both"}));
        sub->add_option("--seed", seed_value, "seed override")
            ->each([&](const std::string&) { seed_given = true; });
    };

    auto* generate = app.add_subcommand("generate", "write network edge lists from a generator");
    auto* simulate = app.add_subcommand("simulate", "simulate outcomes into a dataset directory");
    auto* fit = app.add_subcommand("fit", "two-stage LASSO fit on a dataset");
    auto* infer = app.add_subcommand("infer", "fit plus de-biased inference and BH testing");
    auto* mc = app.add_subcommand("mc", "run a Monte-Carlo study");
    auto* cf = app.add_subcommand("counterfactual", "participation when leaders all join");
    for (auto* sub : {generate, simulate, fit, infer, mc, cf}) add_common(sub);

    CLI11_PARSE(app, argc, argv);
    if (seed_given) args.seed = seed_value;

    try {
        if (generate->parsed()) return cmd_generate(args);
        if (simulate->parsed()) return cmd_simulate_impl(args);
        if (fit->parsed()) return cmd_fit(args);
        if (infer->parsed()) return cmd_infer(args);
        if (mc->parsed()) return cmd_mc(args);
        if (cf->parsed()) return cmd_counterfactual(args);
    } catch (const std::exception& e) {
        fail("runtime", e.what());
    }
    return 0;
}
