#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "heenet/estimator.hpp"
#include "heenet/linalg.hpp"
#include "heenet/network.hpp"

namespace heenet {

struct Dataset {
    Vector D;                              // outcomes
    Matrix X;                              // covariates
    std::vector<std::string> x_labels;
    MultiNetwork networks;
    std::vector<std::string> node_ids;     // external id for each 0-based index
    bool binary_outcomes = false;
    Index duplicate_edges = 0;             // deduplicated rows across all networks

    Index n() const { return D.size(); }
};

// Manifest (JSON): outcomes/covariates CSV paths, per-network edge lists with
// labels, optional binary_outcomes flag. Edges use external ids and are
// symmetrized under the reported-by-either rule.
Dataset load_dataset(const std::filesystem::path& manifest_path);

void write_dataset(const std::filesystem::path& dir, const Dataset& data);

struct EpsilonPolicy {
    enum class Kind { zero, resample };
    Kind kind = Kind::zero;
    std::uint64_t seed = 0;
    int draws = 100;
    double sigma2 = 1.0;
};

struct Counterfactual {
    std::vector<Index> follower_ids;  // nodes outside L, in index order
    Vector follower_outcomes;         // predicted D_F (mean over draws)
    double participation_rate = 0.0;  // mean of D_F clipped to [0,1]
};

// Fixes D_L = 1 and solves the restricted system
// (I_FF - A_FF) D_F = A_FL 1 + X_F beta + eps_F with A = M . eta (or the sum
// over networks). eps_F is zero or averaged over seeded draws.
Counterfactual counterfactual_participation(const FitResult& fit, const AdjacencyMatrix& M,
                                            const Matrix& X, const std::vector<Index>& leaders,
                                            const EpsilonPolicy& policy = {});
Counterfactual counterfactual_participation(const FitResult& fit, const MultiNetwork& multi,
                                            const Matrix& X, const std::vector<Index>& leaders,
                                            const EpsilonPolicy& policy = {});

}  // namespace heenet
