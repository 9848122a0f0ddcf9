#include "heenet/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "heenet/stats.hpp"

namespace heenet {

namespace {

constexpr double kDefaultTau2Floor = 1e-12;

void nodewise_column(const Matrix& G, Index j, double lambda_node, double tau2_floor,
                     const SolverConfig& config, Matrix& theta, Vector& tau2,
                     std::vector<bool>& failed) {
    const Index p = G.cols();
    const double rows = static_cast<double>(G.rows());
    Vector gamma = Vector::Zero(std::max<Index>(p - 1, 0));
    if (p > 1) {
        PenalizedProblem sub;
        sub.design.resize(G.rows(), p - 1);
        Index c = 0;
        for (Index m = 0; m < p; ++m) {
            if (m != j) sub.design.col(c++) = G.col(m);
        }
        sub.response = G.col(j);
        sub.penalized.assign(p - 1, true);
        sub.lambda_l1 = lambda_node;
        try {
            gamma = lasso_fit(sub, config);
        } catch (const ConvergenceError&) {
            failed[j] = true;
            theta.row(j).setZero();
            tau2[j] = 0.0;
            return;
        }
        tau2[j] = G.col(j).dot(G.col(j) - sub.design * gamma) / rows;
    } else {
        tau2[j] = G.col(j).squaredNorm() / rows;
    }
    if (!(tau2[j] > tau2_floor)) {
        failed[j] = true;
        theta.row(j).setZero();
        return;
    }
    theta.row(j).setZero();
    theta(j, j) = 1.0 / tau2[j];
    Index c = 0;
    for (Index m = 0; m < p; ++m) {
        if (m != j) theta(j, m) = -gamma[c++] / tau2[j];
    }
}

NodewiseResult nodewise_with_floor(const Matrix& G, double lambda_node, double tau2_floor,
                                   Exec exec, const SolverConfig& config) {
    if (lambda_node < 0.0) throw std::invalid_argument("nodewise_inverse: negative lambda");
    const Index p = G.cols();
    NodewiseResult out;
    out.theta = Matrix::Zero(p, p);
    out.tau2 = Vector::Zero(p);
    out.failed.assign(p, false);
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (Index j = 0; j < p; ++j) {
            nodewise_column(G, j, lambda_node, tau2_floor, config, out.theta, out.tau2,
                            out.failed);
        }
    } else {
        for (Index j = 0; j < p; ++j) {
            nodewise_column(G, j, lambda_node, tau2_floor, config, out.theta, out.tau2,
                            out.failed);
        }
    }
    return out;
}

}  // namespace

Matrix residual_projection(const Matrix& X) {
    const Index n = X.rows();
    if (X.size() == 0 || X.isZero(0.0)) return Matrix::Identity(n, n);
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(X);
    return Matrix::Identity(n, n) - X * cod.solve(Matrix::Identity(n, n));
}

NodewiseResult nodewise_inverse_serial(const Matrix& G, double lambda_node,
                                       const SolverConfig& config) {
    return nodewise_with_floor(G, lambda_node, kDefaultTau2Floor, Exec::serial, config);
}

NodewiseResult nodewise_inverse(const Matrix& G, double lambda_node, Exec exec,
                                const SolverConfig& config) {
    return nodewise_with_floor(G, lambda_node, kDefaultTau2Floor, exec, config);
}

namespace {

struct BlockDebias {
    Vector e, se;
    std::vector<bool> valid;
};

// De-bias a second-stage coefficient block:
//   e    = coef + Theta Zhat' W (D - Z coef) / n,
//   se_j = sqrt([Theta (sum_i u_i^2 b_i b_i') Theta']_jj) * sqrt(dfc) / n,
// where Theta comes from nodewise regressions on the transformed design
// B = W Zhat (n observations), approximating ((1/n) B'B)^-1, b_i are B's
// rows, u = W(D - Z coef) and dfc = n / (n - |active| - k). The observed-Z
// residual makes the shrinkage-bias cancellation run through
// Xt' = (1/n) Zhat'W Z, which Theta inverts up to the Z/Zhat gap. Under
// homoskedasticity the meat collapses to sigma2 Omega / n; keeping the
// per-row residuals holds leader coverage at the nominal level because the
// plug-in error (M . (D - Dhat)) eta concentrates on leader neighbourhoods.
// Columns whose nodewise tau2 falls below a floor relative to the design's
// median column energy carry no usable information (near-zero instrumented
// columns) and are flagged out.
BlockDebias debias_block(const Vector& D, const Matrix& X, const Matrix& Z, const Matrix& Zhat,
                         const Vector& coef, double lambda_node, double dfc,
                         const InferenceConfig& config) {
    const Index n = D.size();
    const Index p = Z.cols();
    const double dn = static_cast<double>(n);

    const Matrix WZhat = project_out(X, Zhat);
    const Matrix Omega = WZhat.transpose() * WZhat / dn;

    Vector energies = Omega.diagonal();
    std::sort(energies.begin(), energies.end());
    const double median_energy = energies[p / 2];
    const double floor =
        std::max(kDefaultTau2Floor, config.tau2_floor_ratio * median_energy);

    NodewiseResult nw = nodewise_with_floor(WZhat, lambda_node, floor, config.exec, config.solver);

    const Vector wresid = project_out(X, Vector(D - Z * coef));
    const Vector score = WZhat.transpose() * wresid / dn;
    const Vector correction = nw.theta * score;

    Matrix weighted = WZhat;
    for (Index i = 0; i < n; ++i) weighted.row(i) *= wresid[i];
    const Matrix half = weighted * nw.theta.transpose();  // n x p

    BlockDebias out;
    out.e = coef + correction;
    out.se.resize(p);
    out.valid.assign(p, true);
    for (Index j = 0; j < p; ++j) {
        if (nw.failed[j]) {
            out.e[j] = coef[j];
            out.se[j] = std::numeric_limits<double>::infinity();
            out.valid[j] = false;
            continue;
        }
        out.se[j] = std::sqrt(half.col(j).squaredNorm() * dfc) / dn;
    }
    return out;
}

DebiasBeta debias_beta_general(const Vector& D, const Matrix& X, const Matrix& Z,
                               const Matrix& Zhat, const Vector& coef, double lambda_node,
                               double sigma2, const InferenceConfig& config) {
    const Index n = D.size();
    const Index k = X.cols();
    DebiasBeta out;
    out.b_hat.resize(k);
    out.se.resize(k);
    out.valid.assign(k, true);
    const Vector shrink_gap = Zhat * coef - Z * coef;  // (Zhat - Z) coef
    for (Index c = 0; c < k; ++c) {
        PenalizedProblem reg;
        reg.design = Z;
        reg.response = X.col(c);
        reg.penalized.assign(Z.cols(), true);
        reg.lambda_l1 = lambda_node;
        Vector gamma_beta;
        try {
            gamma_beta = lasso_fit(reg, config.solver);
        } catch (const ConvergenceError&) {
            out.valid[c] = false;
            out.b_hat[c] = std::numeric_limits<double>::quiet_NaN();
            out.se[c] = std::numeric_limits<double>::infinity();
            continue;
        }
        const Vector u = X.col(c) - Z * gamma_beta;
        const double denom = u.dot(X.col(c));
        if (std::abs(denom) <= 1e-12 * std::max(1.0, u.norm() * X.col(c).norm())) {
            out.valid[c] = false;
            out.b_hat[c] = std::numeric_limits<double>::quiet_NaN();
            out.se[c] = std::numeric_limits<double>::infinity();
            continue;
        }
        // caller adds beta_hat[c]; the correction is -u'(Zhat - Z)coef / u'X_c
        out.b_hat[c] = -u.dot(shrink_gap) / denom;
        out.se[c] = std::sqrt(sigma2 * u.squaredNorm()) / std::abs(denom);
    }
    return out;
}

double sigma2_core(const Vector& D, const Matrix& X, const Matrix& Z, const Vector& beta_hat,
                   const Vector& coef) {
    const Index n = D.size();
    Index active = 0;
    for (Index j = 0; j < coef.size(); ++j) {
        if (coef[j] != 0.0) ++active;
    }
    const Index df = n - active - X.cols();
    if (df <= 0) throw std::domain_error("estimate_sigma2: nonpositive degrees of freedom");
    const Vector resid = D - Z * coef - X * beta_hat;
    return resid.squaredNorm() / static_cast<double>(df);
}

struct EndogenousBlocks {
    Matrix Z, Zhat;
    Vector coef;
};

EndogenousBlocks blocks_single(const Vector& D, const AdjacencyMatrix& M, const FitResult& fit) {
    const Index n = M.size();
    EndogenousBlocks b;
    if (fit.gamma_hat) {
        b.Z.resize(n, 1 + n);
        b.Z << M.dense() * D, col_scale(M, D);
        b.Zhat.resize(n, 1 + n);
        b.Zhat << M.dense() * fit.d_hat, col_scale(M, fit.d_hat);
        b.coef.resize(1 + n);
        b.coef[0] = *fit.gamma_hat;
        b.coef.tail(n) = fit.eta_hat;
    } else {
        b.Z = col_scale(M, D);
        b.Zhat = col_scale(M, fit.d_hat);
        b.coef = fit.eta_hat;
    }
    return b;
}

EndogenousBlocks blocks_multi(const Vector& D, const MultiNetwork& multi, const FitResult& fit) {
    const Index n = multi.size();
    const Index q = multi.count();
    EndogenousBlocks b;
    b.Z.resize(n, q * n);
    b.Zhat.resize(n, q * n);
    for (Index j = 0; j < q; ++j) {
        b.Z.middleCols(j * n, n) = col_scale(multi.networks[j], D);
        b.Zhat.middleCols(j * n, n) = col_scale(multi.networks[j], fit.d_hat);
    }
    b.coef = fit.eta_hat;
    return b;
}

double df_correction(Index n, const Vector& coef, Index k) {
    Index active = 0;
    for (Index j = 0; j < coef.size(); ++j) {
        if (coef[j] != 0.0) ++active;
    }
    return static_cast<double>(n) / std::max<double>(1.0, static_cast<double>(n - active - k));
}

InferenceResult assemble(const Vector& D, const Matrix& X, const EndogenousBlocks& blocks,
                         const FitResult& fit, bool has_gamma, Index q,
                         const InferenceConfig& config) {
    const Index n = D.size();
    const Index pz = blocks.Z.cols();
    const double sigma2 = sigma2_core(D, X, blocks.Z, fit.beta_hat, blocks.coef);
    const double dfc = df_correction(n, blocks.coef, X.cols());

    // nodewise penalties at the sqrt(log p / n) benchmark over the n rows
    const double lambda_node = config.lambda_node_c *
                               std::sqrt(std::log(static_cast<double>(pz)) / static_cast<double>(n));

    const BlockDebias deb =
        debias_block(D, X, blocks.Z, blocks.Zhat, blocks.coef, lambda_node, dfc, config);
    DebiasBeta bb = debias_beta_general(D, X, blocks.Z, blocks.Zhat, blocks.coef, lambda_node,
                                        sigma2, config);
    for (Index c = 0; c < X.cols(); ++c) {
        if (bb.valid[c]) bb.b_hat[c] += fit.beta_hat[c];
    }

    InferenceResult res;
    res.q = q;
    res.sigma2_hat = sigma2;
    res.ci_level = config.ci_level;

    const Index eta_off = has_gamma ? 1 : 0;
    const Index eta_len = pz - eta_off;
    res.e_hat = deb.e.segment(eta_off, eta_len);
    res.se_eta = deb.se.segment(eta_off, eta_len);
    res.valid.assign(deb.valid.begin() + eta_off, deb.valid.end());

    const Intervals eta_ci = confidence_intervals(res.e_hat, res.se_eta, config.ci_level);
    res.ci_lower = eta_ci.lower;
    res.ci_upper = eta_ci.upper;
    res.p_values = eta_ci.p;
    res.bh_rejections = bh_fdr(res.p_values, config.fdr_q);

    res.b_hat = bb.b_hat;
    res.se_beta = bb.se;
    const Intervals beta_ci = confidence_intervals(res.b_hat, res.se_beta, config.ci_level);
    res.beta_ci_lower = beta_ci.lower;
    res.beta_ci_upper = beta_ci.upper;
    res.p_beta = beta_ci.p;

    if (has_gamma) {
        res.gamma_hat = deb.e[0];
        res.se_gamma = deb.se[0];
        Vector ge(1), gs(1);
        ge[0] = deb.e[0];
        gs[0] = deb.se[0];
        const Intervals gci = confidence_intervals(ge, gs, config.ci_level);
        res.gamma_ci_lower = gci.lower[0];
        res.gamma_ci_upper = gci.upper[0];
        res.p_gamma = gci.p[0];
    }
    return res;
}

}  // namespace

double estimate_sigma2(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       const FitResult& fit) {
    const EndogenousBlocks b = blocks_single(D, M, fit);
    return sigma2_core(D, X, b.Z, fit.beta_hat, b.coef);
}

double estimate_sigma2(const Vector& D, const Matrix& X, const MultiNetwork& multi,
                       const FitResult& fit) {
    const EndogenousBlocks b = blocks_multi(D, multi, fit);
    return sigma2_core(D, X, b.Z, fit.beta_hat, b.coef);
}

Intervals confidence_intervals(const Vector& e_hat, const Vector& se, double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("confidence_intervals: level outside (0,1)");
    }
    if (e_hat.size() != se.size()) {
        throw std::invalid_argument("confidence_intervals: length mismatch");
    }
    const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    Intervals out;
    out.lower.resize(e_hat.size());
    out.upper.resize(e_hat.size());
    out.p.resize(e_hat.size());
    for (Index j = 0; j < e_hat.size(); ++j) {
        if (se[j] == 0.0) {
            out.lower[j] = out.upper[j] = e_hat[j];
            out.p[j] = e_hat[j] == 0.0 ? 1.0 : 0.0;
        } else if (std::isinf(se[j])) {
            out.lower[j] = -std::numeric_limits<double>::infinity();
            out.upper[j] = std::numeric_limits<double>::infinity();
            out.p[j] = 1.0;
        } else {
            out.lower[j] = e_hat[j] - z * se[j];
            out.upper[j] = e_hat[j] + z * se[j];
            out.p[j] = normal_two_sided_p(e_hat[j] / se[j]);
        }
    }
    return out;
}

std::vector<Index> bh_fdr(const Vector& p_values, double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("bh_fdr: q outside (0,1)");
    const Index m = p_values.size();
    for (Index i = 0; i < m; ++i) {
        if (!(p_values[i] >= 0.0 && p_values[i] <= 1.0)) {
            throw std::invalid_argument("bh_fdr: p-value outside [0,1]");
        }
    }
    std::vector<Index> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return p_values[a] < p_values[b]; });
    double threshold = -1.0;
    for (Index i = m; i >= 1; --i) {
        if (p_values[order[i - 1]] <= static_cast<double>(i) * q / static_cast<double>(m)) {
            threshold = p_values[order[i - 1]];
            break;
        }
    }
    std::vector<Index> rejected;
    if (threshold >= 0.0) {
        for (Index j = 0; j < m; ++j) {
            if (p_values[j] <= threshold) rejected.push_back(j);
        }
    }
    return rejected;
}

DebiasEta debias_eta(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                     const FitResult& fit, double lambda_node, const InferenceConfig& config) {
    const Matrix Z = col_scale(M, D);
    const Matrix Zhat = col_scale(M, fit.d_hat);
    const double dfc = df_correction(D.size(), fit.eta_hat, X.cols());
    const BlockDebias deb =
        debias_block(D, X, Z, Zhat, fit.eta_hat, lambda_node, dfc, config);
    return DebiasEta{deb.e, deb.se, deb.valid};
}

DebiasBeta debias_beta(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       const FitResult& fit, double lambda_node, const InferenceConfig& config) {
    const Matrix Z = col_scale(M, D);
    const Matrix Zhat = col_scale(M, fit.d_hat);
    const double sigma2 = estimate_sigma2(D, X, M, fit);
    DebiasBeta bb =
        debias_beta_general(D, X, Z, Zhat, fit.eta_hat, lambda_node, sigma2, config);
    for (Index c = 0; c < X.cols(); ++c) {
        if (bb.valid[c]) bb.b_hat[c] += fit.beta_hat[c];
    }
    return bb;
}

InferenceResult infer_fit(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                          const FitResult& fit, const InferenceConfig& config) {
    const EndogenousBlocks b = blocks_single(D, M, fit);
    return assemble(D, X, b, fit, fit.gamma_hat.has_value(), 1, config);
}

InferenceResult infer_fit(const Vector& D, const Matrix& X, const MultiNetwork& multi,
                          const FitResult& fit, const InferenceConfig& config) {
    const EndogenousBlocks b = blocks_multi(D, multi, fit);
    return assemble(D, X, b, fit, false, multi.count(), config);
}

}  // namespace heenet
