#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "heenet/linalg.hpp"
#include "heenet/network.hpp"

namespace heenet {

enum class NoiseLaw { gaussian, uniform };

struct StructuralParams {
    Vector eta0;                                 // n, individual endogenous effects
    Vector beta0;                                // k, covariate effects
    std::optional<double> gamma0;                // homogeneous (clique) effect
    std::optional<std::vector<Vector>> eta0_multi;  // per-network effects, q vectors of n
    double sigma = 1.0;
    NoiseLaw noise = NoiseLaw::gaussian;
};

class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& what, double condition)
        : std::runtime_error(what), condition(condition) {}
    double condition;
};

// i.i.d. standard normal design, deterministic given seed
Matrix draw_design(Index n, Index k, std::uint64_t seed);

// i.i.d. noise with sd sigma; uniform law is scaled to match the variance
Vector draw_noise(Index n, double sigma, NoiseLaw law, std::uint64_t seed);

// D solves (I - M . eta0) D = X beta0 + eps, eps drawn from seed.
// Refuses when the 1-norm condition estimate of the system exceeds 1e8.
Vector simulate_base(const AdjacencyMatrix& M, const StructuralParams& params,
                     const Matrix& X, std::uint64_t seed, Vector* eps_out = nullptr);

// system matrix (I - M . eta0 - gamma0 M)
Vector simulate_cliques(const AdjacencyMatrix& M, const StructuralParams& params,
                        const Matrix& X, std::uint64_t seed, Vector* eps_out = nullptr);

// system matrix (I - sum_j M^j . eta0^j)
Vector simulate_multinet(const MultiNetwork& multi, const StructuralParams& params,
                         const Matrix& X, std::uint64_t seed, Vector* eps_out = nullptr);

}  // namespace heenet
