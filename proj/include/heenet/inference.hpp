#pragma once

#include <optional>
#include <vector>

#include "heenet/estimator.hpp"
#include "heenet/lasso.hpp"
#include "heenet/linalg.hpp"
#include "heenet/network.hpp"

namespace heenet {

// W = I - X (X'X)^- X', symmetric idempotent, WX = 0.
Matrix residual_projection(const Matrix& X);

struct NodewiseResult {
    Matrix theta;              // p x p approximate inverse of (1/p) G'G
    Vector tau2;               // per-column noise estimates
    std::vector<bool> failed;  // tau2 at or below the numerical floor
};

// Per-column LASSO regressions of G_j on G_{-j}; row j of theta is
// (-gamma_j interleaved, 1 at j) / tau2_j with
// tau2_j = G_j'(G_j - G_{-j} gamma_j) / rows(G).
NodewiseResult nodewise_inverse(const Matrix& G, double lambda_node,
                                Exec exec = Exec::parallel, const SolverConfig& config = {});
// Serial reference implementation (bit-identical to the parallel kernel).
NodewiseResult nodewise_inverse_serial(const Matrix& G, double lambda_node,
                                       const SolverConfig& config = {});

struct InferenceConfig {
    double ci_level = 0.95;
    double fdr_q = 0.05;
    double lambda_node_c = 1.0;    // nodewise benchmark constant
    double tau2_floor_ratio = 3e-3;  // flag columns with tau2 below this times
                                     // the design's median column energy
    SolverConfig solver;
    Exec exec = Exec::parallel;
};

struct InferenceResult {
    Vector e_hat;              // de-biased endogenous-effect estimates (n or n*q)
    Vector se_eta;
    Vector b_hat;              // de-biased covariate effects (k)
    Vector se_beta;
    double ci_level = 0.95;
    Vector ci_lower, ci_upper;          // eta block
    Vector beta_ci_lower, beta_ci_upper;
    Vector p_values;           // eta block
    Vector p_beta;
    std::vector<Index> bh_rejections;   // indices into the eta block
    double sigma2_hat = 0.0;
    std::vector<bool> valid;   // eta columns with usable inference
    std::optional<double> gamma_hat;    // cliques: de-biased homogeneous effect
    std::optional<double> se_gamma;
    std::optional<double> p_gamma;
    std::optional<double> gamma_ci_lower, gamma_ci_upper;
    Index q = 1;
};

// sigma^2 plug-in from second-stage residuals with degrees-of-freedom
// correction n - |S_hat| - k (gamma counted when present and nonzero).
double estimate_sigma2(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       const FitResult& fit);
double estimate_sigma2(const Vector& D, const Matrix& X, const MultiNetwork& multi,
                       const FitResult& fit);

struct Intervals {
    Vector lower, upper, p;
};
Intervals confidence_intervals(const Vector& e_hat, const Vector& se, double level);

// Benjamini-Hochberg step-up: reject hypotheses with p <= p_(i*) where i* is
// the largest i with p_(i) <= i q / m. Returns sorted indices.
std::vector<Index> bh_fdr(const Vector& p_values, double q);

// De-biased eta and standard errors for a base-model fit.
struct DebiasEta {
    Vector e_hat, se;
    std::vector<bool> valid;
};
DebiasEta debias_eta(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                     const FitResult& fit, double lambda_node,
                     const InferenceConfig& config = {});

struct DebiasBeta {
    Vector b_hat, se;
    std::vector<bool> valid;
};
DebiasBeta debias_beta(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       const FitResult& fit, double lambda_node,
                       const InferenceConfig& config = {});

// Full inference pipelines (de-bias + CIs + BH across the eta block).
InferenceResult infer_fit(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                          const FitResult& fit, const InferenceConfig& config = {});
InferenceResult infer_fit(const Vector& D, const Matrix& X, const MultiNetwork& multi,
                          const FitResult& fit, const InferenceConfig& config = {});

}  // namespace heenet
