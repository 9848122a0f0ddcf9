#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "heenet/lasso.hpp"
#include "heenet/linalg.hpp"
#include "heenet/network.hpp"

namespace heenet {

struct StagePolicy {
    enum class Kind { benchmark, cv, fixed };
    Kind kind = Kind::benchmark;
    double c = 2.0;               // benchmark constant
    double fixed_lambda = 0.0;    // for Kind::fixed
    int cv_folds = 10;
    int cv_path_size = 30;
    double cv_path_min_ratio = 0.01;

    static StagePolicy benchmark(double c = 2.0) {
        StagePolicy p;
        p.kind = Kind::benchmark;
        p.c = c;
        return p;
    }
    static StagePolicy cv(int folds = 10, int path_size = 30, double min_ratio = 0.01) {
        StagePolicy p;
        p.kind = Kind::cv;
        p.cv_folds = folds;
        p.cv_path_size = path_size;
        p.cv_path_min_ratio = min_ratio;
        return p;
    }
    static StagePolicy fixed(double lambda) {
        StagePolicy p;
        p.kind = Kind::fixed;
        p.fixed_lambda = lambda;
        return p;
    }
};

struct TuningPolicy {
    StagePolicy first = StagePolicy::benchmark(2.0);
    StagePolicy second = StagePolicy::cv();
    std::uint64_t cv_seed = 0;
    bool penalize_gamma = true;  // cliques: L1-penalize the homogeneous term
};

struct FitResult {
    Vector beta_hat;                  // k
    Vector eta_hat;                   // n, or n*q grouped by network
    std::optional<double> gamma_hat;  // cliques only
    std::vector<Index> selected;      // indices into eta_hat with nonzero value
    Vector d_hat;                     // first-stage fitted outcomes
    Index q = 1;                      // number of networks eta_hat spans

    // tuning record
    double lambda1 = 0.0;        // first stage
    double lambda2 = 0.0;        // second stage (l1)
    double lambda2_group = 0.0;  // second stage (group), multinet

    // stage diagnostics
    double kkt1 = 0.0, kkt2 = 0.0;
    int sweeps1 = 0, sweeps2 = 0;
    std::vector<Index> isolated;  // nodes with identically-zero instrument columns

    std::vector<Index> selected_in_network(Index net, Index n) const;
};

// Instrument columns (M . X_c) for each covariate column, n x (n*k).
Matrix build_instruments(const AdjacencyMatrix& M, const Matrix& X);

struct FirstStage {
    Vector beta_tilde;   // k
    Vector eta_tilde;    // instrument coefficients
    Vector d_hat;        // fitted outcomes
    double kkt = 0.0;
    int sweeps = 0;
};

// LASSO of D on [X unpenalized | (M . X) penalized].
FirstStage first_stage(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       double lambda1, const SolverConfig& config = {});

// LASSO of D on [X unpenalized | (M . D_hat) penalized].
FitResult second_stage(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       const Vector& d_hat, double lambda, const SolverConfig& config = {});

// Full two-stage pipeline for the base model.
FitResult fit_2slss(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                    const TuningPolicy& tuning = {}, const SolverConfig& config = {});

// Cliques variant: the first stage adds M^i X and M^i (M . X) blocks up to
// k_powers; the second stage adds the spatial lag M D_hat whose coefficient
// is the homogeneous effect gamma.
FitResult fit_2slss_cliques(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                            int k_powers, const TuningPolicy& tuning = {},
                            const SolverConfig& config = {});

// Multiple networks: both stages use the sparse group LASSO with one group
// per network; lambda_group = lambda_l1 unless the policy fixes them apart.
FitResult fit_2slss_multinet(const Vector& D, const Matrix& X, const MultiNetwork& multi,
                             const TuningPolicy& tuning = {}, const SolverConfig& config = {});

struct Oracle2SLS {
    Vector beta;   // k
    Vector eta_S;  // |S|, ordered as S
};

// Known-support 2SLS with instruments [X, (M . X)_S] for [X, (M . D)_S].
Oracle2SLS oracle_2sls(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       const std::vector<Index>& S);

}  // namespace heenet
