#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "heenet/dgp.hpp"
#include "heenet/estimator.hpp"
#include "heenet/inference.hpp"
#include "heenet/network.hpp"

namespace heenet {

enum class Model { base, cliques, multinet };

struct GeneratorSpec {
    enum class Kind { erdos_renyi, watts_strogatz };
    Kind kind = Kind::erdos_renyi;
    double p = 0.1;            // ER link probability
    Index mean_degree = 6;     // WS
    double omega = 0.4;        // WS rewiring probability
};

struct StudyConfig {
    Model model = Model::base;
    Index n = 200;
    Index k = 1;
    GeneratorSpec generator;
    std::vector<Index> leaders;   // S0
    Vector leader_values;         // eta0 on S0
    Vector beta0;                 // k
    double gamma0 = 0.0;          // cliques
    Index q = 2;                  // multinet network count
    Index relevant_network = 0;   // multinet: network carrying S0
    double sigma = 1.0;
    NoiseLaw noise = NoiseLaw::gaussian;
    int replications = 200;
    double ci_level = 0.95;
    double fdr_q = 0.05;
    TuningPolicy tuning;
    SolverConfig solver;
    double lambda_node_c = 1.0;
    double tau2_floor_ratio = 3e-3;
    int k_powers = 2;
    std::uint64_t master_seed = 1;
    bool redraw_network = true;   // fresh network per replication
    bool embed_leader_block = true;  // path block among the leaders
    bool parallel = true;

    void validate() const;
};

struct MCReport {
    double avgcov_S = 0.0, avgcov_Sc = 0.0, avgcov_beta = 0.0;
    double avglength_S = 0.0, avglength_Sc = 0.0, avglength_beta = 0.0;
    std::vector<double> leader_cov, leader_length;
    double power = 0.0, fdr = 0.0, selection_prob = 0.0;
    int completed = 0;
    int replication_failures = 0;
    std::vector<std::string> failure_reasons;
    double mean_excluded_columns = 0.0;  // nodewise-flagged coefficients per replication
    std::optional<double> gamma_cov, gamma_length, gamma_reject;
    std::optional<std::vector<double>> network_detect_prob;
    std::optional<std::vector<double>> network_avg_detected;  // conditional on detection

    bool operator==(const MCReport&) const = default;
};

// per-replication record, kept so the aggregates are recomputable
struct RepRecord {
    bool ok = false;
    std::string reason;
    std::vector<Index> rejections;  // BH-rejected eta indices
    std::vector<Index> selected;    // second-stage support
    std::vector<std::uint8_t> leader_covered;
    std::vector<double> leader_length;
    double sc_cov_mean = 0.0;
    double sc_len_mean = 0.0;  // over finite-length columns
    Index sc_len_count = 0;
    double beta_cov = 0.0, beta_len = 0.0;
    Index excluded_columns = 0;
    std::optional<std::uint8_t> gamma_covered;
    std::optional<double> gamma_length;
    std::optional<std::uint8_t> gamma_rejected;
};

struct StudyResult {
    MCReport report;
    std::vector<RepRecord> reps;
};

// deterministic, injective replication seed
std::uint64_t seed_schedule(std::uint64_t master_seed, std::uint64_t r);

MCReport run_study(const StudyConfig& config);
StudyResult run_study_detailed(const StudyConfig& config);

// lossless serialization; CSV is one "quantity,value" row per scalar
std::string report_to_csv(const MCReport& report);
MCReport report_from_csv(const std::string& text);
std::string report_to_json(const MCReport& report);
MCReport report_from_json(const std::string& text);

}  // namespace heenet
