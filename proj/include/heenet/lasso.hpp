#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "heenet/linalg.hpp"

namespace heenet {

// Penalized least-squares problem
//
//   min_theta  (1/(2n)) ||y - Z theta||^2
//              + lambda_group * sum_g ||theta_g||_2
//              + lambda_l1    * ||theta_penalized||_1
//
// Columns with penalized[j] == false (e.g. the covariate block) are never
// shrunk. Groups, when present, partition a subset of the penalized columns.
struct PenalizedProblem {
    Matrix design;                             // n x p
    Vector response;                           // n
    std::vector<bool> penalized;               // p
    std::vector<std::vector<Index>> groups;    // disjoint subsets of penalized columns
    double lambda_l1 = 0.0;
    double lambda_group = 0.0;

    void validate() const;
};

struct SolverConfig {
    int max_iterations = 10'000;   // coordinate-descent sweeps
    double tolerance = 1e-8;       // max absolute coefficient change per sweep
    bool standardize = true;       // solution-invariant internal column scaling
    bool record_objective = false; // fill SolveInfo::objective_trace per sweep
};

struct SolveInfo {
    int sweeps = 0;
    double kkt = 0.0;
    bool converged = false;
    std::vector<double> objective_trace;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double kkt_attained)
        : std::runtime_error(what), kkt(kkt_attained) {}
    double kkt;
};

// sign(z) * max(|z| - gamma, 0)
inline double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

double penalized_objective(const PenalizedProblem& problem, const Vector& theta);

// Max violation of the stationarity subgradient conditions at theta;
// zero iff theta is optimal.
double kkt_residual(const PenalizedProblem& problem, const Vector& theta);

// Cyclic coordinate descent; requires groups absent or lambda_group == 0.
Vector lasso_fit(const PenalizedProblem& problem, const SolverConfig& config,
                 SolveInfo* info = nullptr,
                 const std::optional<Vector>& warm_start = std::nullopt);

// Block coordinate descent with a group-zero screening test and proximal
// inner updates (backtracking line search) inside active groups.
Vector sparse_group_lasso_fit(const PenalizedProblem& problem, const SolverConfig& config,
                              SolveInfo* info = nullptr,
                              const std::optional<Vector>& warm_start = std::nullopt);

// Smallest lambda_l1 at which every penalized coefficient is zero:
// ||Z_pen' (y - yhat_unpen) / n||_inf, with y first projected on the
// unpenalized block.
double lambda_max(const PenalizedProblem& problem);

// K-fold cross-validation over a decreasing lambda path (applied to
// lambda_l1; for grouped problems lambda_group follows the same value).
// Deterministic fold assignment from `seed`; smallest lambda among
// minimizers of the mean squared prediction error.
double cv_select_lambda(const PenalizedProblem& problem, int folds,
                        std::span<const double> path, std::uint64_t seed,
                        const SolverConfig& config = {});

// c * sqrt((log n + log q) / n)
double benchmark_lambda(double n, double q = 1.0, double c = 1.0);

// Geometric path of `count` values from lambda_hi down to lambda_hi * min_ratio.
std::vector<double> lambda_path(double lambda_hi, int count, double min_ratio);

}  // namespace heenet
