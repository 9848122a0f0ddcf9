#include "heenet/dgp.hpp"

#include <cmath>

#include "heenet/rng.hpp"

namespace heenet {

namespace {

constexpr double kConditionLimit = 1e8;

Vector solve_system(const Matrix& sys, const StructuralParams& params, const Matrix& X,
                    std::uint64_t seed, Vector* eps_out) {
    const Index n = sys.rows();
    if (X.rows() != n || X.cols() != params.beta0.size()) {
        throw std::invalid_argument("simulate: X dimensions do not match");
    }
    Eigen::PartialPivLU<Matrix> lu(sys);
    const double cond = lu.rcond() > 0.0 ? 1.0 / lu.rcond()
                                         : std::numeric_limits<double>::infinity();
    if (!(cond < kConditionLimit)) {
        throw SimulationError("simulate: system matrix condition estimate " +
                                  std::to_string(cond) + " exceeds 1e8",
                              cond);
    }
    const Vector eps = draw_noise(n, params.sigma, params.noise, seed);
    const Vector rhs = X * params.beta0 + eps;
    Vector d = lu.solve(rhs);
    // one refinement step, then verify the structural identity
    d += lu.solve(rhs - sys * d);
    const double resid = (sys * d - rhs).cwiseAbs().maxCoeff();
    if (resid > 1e-10 * (1.0 + d.cwiseAbs().maxCoeff())) {
        throw SimulationError("simulate: structural identity residual " + std::to_string(resid),
                              cond);
    }
    if (eps_out) *eps_out = eps;
    return d;
}

}  // namespace

Matrix draw_design(Index n, Index k, std::uint64_t seed) {
    if (n < 1 || k < 1) throw std::invalid_argument("draw_design: n, k must be >= 1");
    Rng rng(seed);
    Matrix X(n, k);
    for (Index j = 0; j < k; ++j) {
        for (Index i = 0; i < n; ++i) X(i, j) = rng.normal();
    }
    return X;
}

Vector draw_noise(Index n, double sigma, NoiseLaw law, std::uint64_t seed) {
    if (sigma <= 0.0) throw std::invalid_argument("draw_noise: sigma must be positive");
    Rng rng(seed);
    Vector eps(n);
    switch (law) {
        case NoiseLaw::gaussian:
            for (Index i = 0; i < n; ++i) eps[i] = sigma * rng.normal();
            break;
        case NoiseLaw::uniform: {
            // U[-sqrt(3) sigma, sqrt(3) sigma] has variance sigma^2
            const double half_width = std::sqrt(3.0) * sigma;
            for (Index i = 0; i < n; ++i) eps[i] = half_width * (2.0 * rng.uniform() - 1.0);
            break;
        }
    }
    return eps;
}

Vector simulate_base(const AdjacencyMatrix& M, const StructuralParams& params, const Matrix& X,
                     std::uint64_t seed, Vector* eps_out) {
    const Index n = M.size();
    if (params.eta0.size() != n) throw std::invalid_argument("simulate_base: eta0 length != n");
    if (params.eta0.cwiseAbs().maxCoeff() >= 1.0) {
        throw std::invalid_argument("simulate_base: ||eta0||_inf must be < 1");
    }
    const Matrix sys = Matrix::Identity(n, n) - col_scale(M, params.eta0);
    return solve_system(sys, params, X, seed, eps_out);
}

Vector simulate_cliques(const AdjacencyMatrix& M, const StructuralParams& params, const Matrix& X,
                        std::uint64_t seed, Vector* eps_out) {
    const Index n = M.size();
    if (params.eta0.size() != n) throw std::invalid_argument("simulate_cliques: eta0 length != n");
    const double gamma = params.gamma0.value_or(0.0);
    if ((params.eta0.array().abs() + std::abs(gamma)).maxCoeff() >= 1.0) {
        throw std::invalid_argument("simulate_cliques: ||eta0 + gamma0||_inf must be < 1");
    }
    const Matrix sys =
        Matrix::Identity(n, n) - col_scale(M, params.eta0) - gamma * M.dense();
    return solve_system(sys, params, X, seed, eps_out);
}

Vector simulate_multinet(const MultiNetwork& multi, const StructuralParams& params,
                         const Matrix& X, std::uint64_t seed, Vector* eps_out) {
    multi.validate();
    const Index n = multi.size();
    if (!params.eta0_multi || params.eta0_multi->size() != multi.networks.size()) {
        throw std::invalid_argument("simulate_multinet: eta0_multi missing or wrong count");
    }
    double total = 0.0;
    for (const auto& eta : *params.eta0_multi) {
        if (eta.size() != n) throw std::invalid_argument("simulate_multinet: eta length != n");
        total += eta.cwiseAbs().maxCoeff();
    }
    if (total >= 1.0) {
        throw std::invalid_argument("simulate_multinet: sum_j ||eta0^j||_inf must be < 1");
    }
    Matrix sys = Matrix::Identity(n, n);
    for (std::size_t j = 0; j < multi.networks.size(); ++j) {
        sys -= col_scale(multi.networks[j], (*params.eta0_multi)[j]);
    }
    return solve_system(sys, params, X, seed, eps_out);
}

}  // namespace heenet
