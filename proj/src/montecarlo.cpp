#include "heenet/montecarlo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>
#include <omp.h>

#include "heenet/rng.hpp"

namespace heenet {

namespace {

// salts for per-replication seed streams
enum : std::uint64_t { kNetSalt = 101, kDesignSalt = 202, kNoiseSalt = 303, kTuneSalt = 404 };

AdjacencyMatrix make_network(const StudyConfig& cfg, std::uint64_t seed, Index which) {
    const std::uint64_t net_seed = derive_seed(seed, kNetSalt + static_cast<std::uint64_t>(which));
    AdjacencyMatrix M =
        cfg.generator.kind == GeneratorSpec::Kind::erdos_renyi
            ? erdos_renyi(cfg.n, cfg.generator.p, net_seed)
            : watts_strogatz(cfg.n, cfg.generator.mean_degree, cfg.generator.omega, net_seed);
    const bool carries_leaders =
        cfg.model != Model::multinet || which == cfg.relevant_network;
    if (cfg.embed_leader_block && carries_leaders && cfg.leaders.size() >= 2) {
        M = embed_block_at(M, cfg.leaders, path_block(static_cast<Index>(cfg.leaders.size())));
    }
    return M;
}

Vector full_eta0(const StudyConfig& cfg) {
    Vector eta0 = Vector::Zero(cfg.n);
    for (std::size_t a = 0; a < cfg.leaders.size(); ++a) {
        eta0[cfg.leaders[a]] = cfg.leader_values[static_cast<Index>(a)];
    }
    return eta0;
}

RepRecord run_replication(const StudyConfig& cfg, std::uint64_t rep_seed,
                          const std::vector<AdjacencyMatrix>* fixed_nets) {
    RepRecord rec;
    const Index n = cfg.n;
    const Index s = static_cast<Index>(cfg.leaders.size());

    const Matrix X = draw_design(n, cfg.k, derive_seed(rep_seed, kDesignSalt));
    const std::uint64_t noise_seed = derive_seed(rep_seed, kNoiseSalt);

    StructuralParams params;
    params.beta0 = cfg.beta0;
    params.sigma = cfg.sigma;
    params.noise = cfg.noise;
    params.eta0 = full_eta0(cfg);

    TuningPolicy tuning = cfg.tuning;
    tuning.cv_seed = derive_seed(rep_seed, kTuneSalt);

    InferenceConfig icfg;
    icfg.ci_level = cfg.ci_level;
    icfg.fdr_q = cfg.fdr_q;
    icfg.lambda_node_c = cfg.lambda_node_c;
    icfg.tau2_floor_ratio = cfg.tau2_floor_ratio;
    icfg.solver = cfg.solver;
    icfg.exec = Exec::serial;  // replication-level parallelism only

    Vector D;
    FitResult fit;
    InferenceResult inf;
    Vector eta_truth;  // full coefficient vector matching the eta block

    if (cfg.model == Model::multinet) {
        MultiNetwork multi;
        if (fixed_nets) {
            multi.networks = *fixed_nets;
        } else {
            for (Index j = 0; j < cfg.q; ++j) {
                multi.networks.push_back(make_network(cfg, rep_seed, j));
            }
        }
        for (Index j = 0; j < cfg.q; ++j) multi.labels.push_back("net" + std::to_string(j));
        std::vector<Vector> eta_multi(cfg.q, Vector::Zero(n));
        eta_multi[cfg.relevant_network] = params.eta0;
        params.eta0_multi = eta_multi;
        D = simulate_multinet(multi, params, X, noise_seed);
        fit = fit_2slss_multinet(D, X, multi, tuning, cfg.solver);
        inf = infer_fit(D, X, multi, fit, icfg);
        eta_truth = Vector::Zero(cfg.q * n);
        eta_truth.segment(cfg.relevant_network * n, n) = params.eta0;
    } else {
        AdjacencyMatrix M = fixed_nets ? (*fixed_nets)[0] : make_network(cfg, rep_seed, 0);
        if (cfg.model == Model::cliques) {
            params.gamma0 = cfg.gamma0;
            D = simulate_cliques(M, params, X, noise_seed);
            fit = fit_2slss_cliques(D, X, M, cfg.k_powers, tuning, cfg.solver);
        } else {
            D = simulate_base(M, params, X, noise_seed);
            fit = fit_2slss(D, X, M, tuning, cfg.solver);
        }
        inf = infer_fit(D, X, M, fit, icfg);
        eta_truth = params.eta0;
    }

    // leader coordinates inside the eta block
    std::vector<Index> leader_pos(cfg.leaders.begin(), cfg.leaders.end());
    if (cfg.model == Model::multinet) {
        for (auto& pos : leader_pos) pos += cfg.relevant_network * n;
    }
    std::set<Index> leader_set(leader_pos.begin(), leader_pos.end());

    // flagged columns carry an infinite CI: covered by convention, excluded
    // from the length averages
    rec.leader_covered.resize(s);
    rec.leader_length.resize(s);
    for (Index a = 0; a < s; ++a) {
        const Index j = leader_pos[a];
        const double truth = eta_truth[j];
        rec.leader_covered[a] = inf.ci_lower[j] <= truth && truth <= inf.ci_upper[j];
        rec.leader_length[a] = inf.ci_upper[j] - inf.ci_lower[j];
    }

    double sc_cov = 0.0, sc_len = 0.0;
    Index sc_count = 0, sc_len_count = 0, excluded = 0;
    for (Index j = 0; j < inf.e_hat.size(); ++j) {
        if (leader_set.count(j)) continue;
        ++sc_count;
        const double truth = eta_truth[j];
        sc_cov += (inf.ci_lower[j] <= truth && truth <= inf.ci_upper[j]) ? 1.0 : 0.0;
        if (inf.valid[j] && std::isfinite(inf.ci_upper[j] - inf.ci_lower[j])) {
            sc_len += inf.ci_upper[j] - inf.ci_lower[j];
            ++sc_len_count;
        }
        if (!inf.valid[j]) ++excluded;
    }
    rec.sc_cov_mean = sc_count > 0 ? sc_cov / static_cast<double>(sc_count) : 0.0;
    rec.sc_len_mean = sc_len_count > 0 ? sc_len / static_cast<double>(sc_len_count) : 0.0;
    rec.sc_len_count = sc_len_count;
    rec.excluded_columns = excluded;

    double bc = 0.0, bl = 0.0;
    for (Index c = 0; c < cfg.k; ++c) {
        bc += (inf.beta_ci_lower[c] <= cfg.beta0[c] && cfg.beta0[c] <= inf.beta_ci_upper[c]) ? 1.0
                                                                                             : 0.0;
        bl += inf.beta_ci_upper[c] - inf.beta_ci_lower[c];
    }
    rec.beta_cov = bc / static_cast<double>(cfg.k);
    rec.beta_len = bl / static_cast<double>(cfg.k);

    rec.rejections = inf.bh_rejections;
    rec.selected = fit.selected;

    if (cfg.model == Model::cliques) {
        rec.gamma_covered = *inf.gamma_ci_lower <= cfg.gamma0 && cfg.gamma0 <= *inf.gamma_ci_upper;
        rec.gamma_length = *inf.gamma_ci_upper - *inf.gamma_ci_lower;
        rec.gamma_rejected = *inf.p_gamma < 1.0 - cfg.ci_level;
    }

    rec.ok = true;
    return rec;
}

MCReport aggregate(const StudyConfig& cfg, const std::vector<RepRecord>& reps) {
    const Index n = cfg.n;
    const Index s = static_cast<Index>(cfg.leaders.size());
    MCReport rep;
    rep.leader_cov.assign(s, 0.0);
    rep.leader_length.assign(s, 0.0);

    std::vector<Index> leader_pos(cfg.leaders.begin(), cfg.leaders.end());
    if (cfg.model == Model::multinet) {
        for (auto& pos : leader_pos) pos += cfg.relevant_network * n;
    }
    std::set<Index> leader_set(leader_pos.begin(), leader_pos.end());

    int R_ok = 0;
    double power = 0.0, fdr = 0.0, select = 0.0;
    double sc_cov = 0.0, sc_len = 0.0, beta_cov = 0.0, beta_len = 0.0, excluded = 0.0;
    double gcov = 0.0, glen = 0.0, grej = 0.0;
    std::vector<Index> leader_len_count(s, 0);
    const Index nets = cfg.model == Model::multinet ? cfg.q : 1;
    std::vector<double> det_count(nets, 0.0), det_sum(nets, 0.0);

    for (const auto& r : reps) {
        if (!r.ok) {
            ++rep.replication_failures;
            rep.failure_reasons.push_back(r.reason);
            continue;
        }
        ++R_ok;
        for (Index a = 0; a < s; ++a) {
            rep.leader_cov[a] += r.leader_covered[a];
            if (std::isfinite(r.leader_length[a])) {
                rep.leader_length[a] += r.leader_length[a];
                ++leader_len_count[a];
            }
        }
        sc_cov += r.sc_cov_mean;
        sc_len += r.sc_len_mean;
        beta_cov += r.beta_cov;
        beta_len += r.beta_len;
        excluded += static_cast<double>(r.excluded_columns);

        Index true_hits = 0, false_hits = 0;
        for (Index j : r.rejections) {
            if (leader_set.count(j)) {
                ++true_hits;
            } else {
                ++false_hits;
            }
        }
        power += s > 0 ? static_cast<double>(true_hits) / static_cast<double>(s) : 0.0;
        const Index total = true_hits + false_hits;
        fdr += total > 0 ? static_cast<double>(false_hits) / static_cast<double>(total) : 0.0;

        const std::set<Index> sel(r.selected.begin(), r.selected.end());
        select += sel == leader_set ? 1.0 : 0.0;

        if (cfg.model == Model::cliques) {
            gcov += *r.gamma_covered;
            glen += *r.gamma_length;
            grej += *r.gamma_rejected;
        }
        if (cfg.model == Model::multinet) {
            for (Index net = 0; net < nets; ++net) {
                Index cnt = 0;
                for (Index j : r.rejections) {
                    if (j / n == net) ++cnt;
                }
                if (cnt > 0) {
                    det_count[net] += 1.0;
                    det_sum[net] += static_cast<double>(cnt);
                }
            }
        }
    }

    rep.completed = R_ok;
    if (R_ok > 0) {
        const double dR = static_cast<double>(R_ok);
        for (Index a = 0; a < s; ++a) {
            rep.leader_cov[a] /= dR;
            rep.leader_length[a] =
                leader_len_count[a] > 0 ? rep.leader_length[a] / leader_len_count[a] : 0.0;
        }
        rep.avgcov_S = s > 0 ? std::accumulate(rep.leader_cov.begin(), rep.leader_cov.end(), 0.0) /
                                   static_cast<double>(s)
                             : 0.0;
        rep.avglength_S =
            s > 0 ? std::accumulate(rep.leader_length.begin(), rep.leader_length.end(), 0.0) /
                        static_cast<double>(s)
                  : 0.0;
        rep.avgcov_Sc = sc_cov / dR;
        rep.avglength_Sc = sc_len / dR;
        rep.avgcov_beta = beta_cov / dR;
        rep.avglength_beta = beta_len / dR;
        rep.power = power / dR;
        rep.fdr = fdr / dR;
        rep.selection_prob = select / dR;
        rep.mean_excluded_columns = excluded / dR;
        if (cfg.model == Model::cliques) {
            rep.gamma_cov = gcov / dR;
            rep.gamma_length = glen / dR;
            rep.gamma_reject = grej / dR;
        }
        if (cfg.model == Model::multinet) {
            std::vector<double> prob(nets), avg(nets);
            for (Index net = 0; net < nets; ++net) {
                prob[net] = det_count[net] / dR;
                avg[net] = det_count[net] > 0 ? det_sum[net] / det_count[net] : 0.0;
            }
            rep.network_detect_prob = prob;
            rep.network_avg_detected = avg;
        }
    }
    return rep;
}

}  // namespace

void StudyConfig::validate() const {
    if (n < 2) throw std::invalid_argument("study: n must be >= 2");
    if (replications < 1) throw std::invalid_argument("study: replications must be >= 1");
    if (leader_values.size() != static_cast<Index>(leaders.size())) {
        throw std::invalid_argument("study: leaders/leader_values size mismatch");
    }
    std::set<Index> uniq(leaders.begin(), leaders.end());
    if (uniq.size() != leaders.size()) throw std::invalid_argument("study: duplicate leaders");
    for (Index j : leaders) {
        if (j < 0 || j >= n) throw std::invalid_argument("study: leader index out of range");
    }
    if (beta0.size() != k) throw std::invalid_argument("study: beta0 length != k");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw std::invalid_argument("study: ci_level");
    if (!(fdr_q > 0.0 && fdr_q < 1.0)) throw std::invalid_argument("study: fdr_q");
    if (model == Model::multinet && (q < 1 || relevant_network < 0 || relevant_network >= q)) {
        throw std::invalid_argument("study: bad multinet network indices");
    }
}

std::uint64_t seed_schedule(std::uint64_t master_seed, std::uint64_t r) {
    return derive_seed(master_seed, r);
}

StudyResult run_study_detailed(const StudyConfig& config) {
    config.validate();
    const int R = config.replications;

    // fixed-network mode draws the networks once, from the master seed
    std::optional<std::vector<AdjacencyMatrix>> fixed;
    if (!config.redraw_network) {
        fixed.emplace();
        const Index nets = config.model == Model::multinet ? config.q : 1;
        for (Index j = 0; j < nets; ++j) {
            fixed->push_back(make_network(config, derive_seed(config.master_seed, 0), j));
        }
    }
    const std::vector<AdjacencyMatrix>* fixed_ptr = fixed ? &*fixed : nullptr;

    std::vector<RepRecord> reps(R);
    auto run_one = [&](int r) {
        const std::uint64_t rep_seed = seed_schedule(config.master_seed, static_cast<std::uint64_t>(r) + 1);
        try {
            reps[r] = run_replication(config, rep_seed, fixed_ptr);
        } catch (const std::exception& e) {
            reps[r] = RepRecord{};
            reps[r].ok = false;
            reps[r].reason = e.what();
        }
    };

    if (config.parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int r = 0; r < R; ++r) run_one(r);
    } else {
        for (int r = 0; r < R; ++r) run_one(r);
    }

    StudyResult out;
    out.reps = std::move(reps);
    out.report = aggregate(config, out.reps);
    return out;
}

MCReport run_study(const StudyConfig& config) {
    return run_study_detailed(config).report;
}

namespace {

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{}) throw std::runtime_error("report: bad number '" + s + "'");
    return v;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

}  // namespace

std::string report_to_csv(const MCReport& r) {
    std::ostringstream out;
    out << "quantity,value\n";
    auto row = [&](const std::string& name, double v) { out << name << "," << fmt_double(v) << "\n"; };
    row("avgcov_S", r.avgcov_S);
    row("avgcov_Sc", r.avgcov_Sc);
    row("avgcov_beta", r.avgcov_beta);
    row("avglength_S", r.avglength_S);
    row("avglength_Sc", r.avglength_Sc);
    row("avglength_beta", r.avglength_beta);
    for (std::size_t a = 0; a < r.leader_cov.size(); ++a) {
        row("cov_leader_" + std::to_string(a + 1), r.leader_cov[a]);
    }
    for (std::size_t a = 0; a < r.leader_length.size(); ++a) {
        row("length_leader_" + std::to_string(a + 1), r.leader_length[a]);
    }
    row("power", r.power);
    row("fdr", r.fdr);
    row("selection_prob", r.selection_prob);
    row("completed", r.completed);
    row("replication_failures", r.replication_failures);
    row("mean_excluded_columns", r.mean_excluded_columns);
    if (r.gamma_cov) row("gamma_cov", *r.gamma_cov);
    if (r.gamma_length) row("gamma_length", *r.gamma_length);
    if (r.gamma_reject) row("gamma_reject", *r.gamma_reject);
    if (r.network_detect_prob) {
        for (std::size_t j = 0; j < r.network_detect_prob->size(); ++j) {
            row("detect_prob_net_" + std::to_string(j + 1), (*r.network_detect_prob)[j]);
        }
    }
    if (r.network_avg_detected) {
        for (std::size_t j = 0; j < r.network_avg_detected->size(); ++j) {
            row("avg_detected_net_" + std::to_string(j + 1), (*r.network_avg_detected)[j]);
        }
    }
    for (const auto& reason : r.failure_reasons) {
        out << "failure_reason," << csv_quote(reason) << "\n";
    }
    return out.str();
}

MCReport report_from_csv(const std::string& text) {
    MCReport r;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> lcov, llen, dprob, davg;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        const std::string key = line.substr(0, comma);
        std::string val = line.substr(comma + 1);
        if (key == "failure_reason") {
            if (val.size() >= 2 && val.front() == '"' && val.back() == '"') {
                val = val.substr(1, val.size() - 2);
                std::string unq;
                for (std::size_t i = 0; i < val.size(); ++i) {
                    if (val[i] == '"' && i + 1 < val.size() && val[i + 1] == '"') ++i;
                    unq += val[i];
                }
                val = unq;
            }
            r.failure_reasons.push_back(val);
            continue;
        }
        const double v = parse_double(val);
        if (key == "avgcov_S") r.avgcov_S = v;
        else if (key == "avgcov_Sc") r.avgcov_Sc = v;
        else if (key == "avgcov_beta") r.avgcov_beta = v;
        else if (key == "avglength_S") r.avglength_S = v;
        else if (key == "avglength_Sc") r.avglength_Sc = v;
        else if (key == "avglength_beta") r.avglength_beta = v;
        else if (key.starts_with("cov_leader_")) lcov.push_back(v);
        else if (key.starts_with("length_leader_")) llen.push_back(v);
        else if (key == "power") r.power = v;
        else if (key == "fdr") r.fdr = v;
        else if (key == "selection_prob") r.selection_prob = v;
        else if (key == "completed") r.completed = static_cast<int>(v);
        else if (key == "replication_failures") r.replication_failures = static_cast<int>(v);
        else if (key == "mean_excluded_columns") r.mean_excluded_columns = v;
        else if (key == "gamma_cov") r.gamma_cov = v;
        else if (key == "gamma_length") r.gamma_length = v;
        else if (key == "gamma_reject") r.gamma_reject = v;
        else if (key.starts_with("detect_prob_net_")) dprob.push_back(v);
        else if (key.starts_with("avg_detected_net_")) davg.push_back(v);
        else throw std::runtime_error("report: unknown quantity '" + key + "'");
    }
    r.leader_cov = lcov;
    r.leader_length = llen;
    if (!dprob.empty()) r.network_detect_prob = dprob;
    if (!davg.empty()) r.network_avg_detected = davg;
    return r;
}

std::string report_to_json(const MCReport& r) {
    nlohmann::json j;
    j["avgcov_S"] = r.avgcov_S;
    j["avgcov_Sc"] = r.avgcov_Sc;
    j["avgcov_beta"] = r.avgcov_beta;
    j["avglength_S"] = r.avglength_S;
    j["avglength_Sc"] = r.avglength_Sc;
    j["avglength_beta"] = r.avglength_beta;
    j["leader_cov"] = r.leader_cov;
    j["leader_length"] = r.leader_length;
    j["power"] = r.power;
    j["fdr"] = r.fdr;
    j["selection_prob"] = r.selection_prob;
    j["completed"] = r.completed;
    j["replication_failures"] = r.replication_failures;
    j["failure_reasons"] = r.failure_reasons;
    j["mean_excluded_columns"] = r.mean_excluded_columns;
    if (r.gamma_cov) j["gamma_cov"] = *r.gamma_cov;
    if (r.gamma_length) j["gamma_length"] = *r.gamma_length;
    if (r.gamma_reject) j["gamma_reject"] = *r.gamma_reject;
    if (r.network_detect_prob) j["network_detect_prob"] = *r.network_detect_prob;
    if (r.network_avg_detected) j["network_avg_detected"] = *r.network_avg_detected;
    return j.dump(2);
}

MCReport report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MCReport r;
    r.avgcov_S = j.at("avgcov_S");
    r.avgcov_Sc = j.at("avgcov_Sc");
    r.avgcov_beta = j.at("avgcov_beta");
    r.avglength_S = j.at("avglength_S");
    r.avglength_Sc = j.at("avglength_Sc");
    r.avglength_beta = j.at("avglength_beta");
    r.leader_cov = j.at("leader_cov").get<std::vector<double>>();
    r.leader_length = j.at("leader_length").get<std::vector<double>>();
    r.power = j.at("power");
    r.fdr = j.at("fdr");
    r.selection_prob = j.at("selection_prob");
    r.completed = j.at("completed");
    r.replication_failures = j.at("replication_failures");
    r.failure_reasons = j.at("failure_reasons").get<std::vector<std::string>>();
    r.mean_excluded_columns = j.at("mean_excluded_columns");
    if (j.contains("gamma_cov")) r.gamma_cov = j.at("gamma_cov").get<double>();
    if (j.contains("gamma_length")) r.gamma_length = j.at("gamma_length").get<double>();
    if (j.contains("gamma_reject")) r.gamma_reject = j.at("gamma_reject").get<double>();
    if (j.contains("network_detect_prob")) {
        r.network_detect_prob = j.at("network_detect_prob").get<std::vector<double>>();
    }
    if (j.contains("network_avg_detected")) {
        r.network_avg_detected = j.at("network_avg_detected").get<std::vector<double>>();
    }
    return r;
}

}  // namespace heenet
