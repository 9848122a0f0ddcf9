#include "heenet/estimator.hpp"

#include <cmath>

#include "heenet/rng.hpp"

namespace heenet {

namespace {

std::vector<Index> nonzero_indices(const Vector& v) {
    std::vector<Index> out;
    for (Index i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) out.push_back(i);
    }
    return out;
}

double resolve_lambda(const StagePolicy& policy, const PenalizedProblem& problem,
                      double n, double q, std::uint64_t cv_seed, const SolverConfig& config) {
    switch (policy.kind) {
        case StagePolicy::Kind::fixed:
            return policy.fixed_lambda;
        case StagePolicy::Kind::benchmark:
            return benchmark_lambda(n, q, policy.c);
        case StagePolicy::Kind::cv: {
            const double hi = lambda_max(problem);
            if (hi <= 0.0) return 0.0;
            const auto path = lambda_path(hi, policy.cv_path_size, policy.cv_path_min_ratio);
            return cv_select_lambda(problem, policy.cv_folds, path, cv_seed, config);
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace

std::vector<Index> FitResult::selected_in_network(Index net, Index n) const {
    std::vector<Index> out;
    for (Index idx : selected) {
        if (idx / n == net) out.push_back(idx % n);
    }
    return out;
}

Matrix build_instruments(const AdjacencyMatrix& M, const Matrix& X) {
    const Index n = M.size();
    const Index k = X.cols();
    if (X.rows() != n) throw std::invalid_argument("build_instruments: X rows != n");
    Matrix inst(n, n * k);
    for (Index c = 0; c < k; ++c) {
        inst.middleCols(c * n, n) = col_scale(M, X.col(c));
    }
    return inst;
}

FirstStage first_stage(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       double lambda1, const SolverConfig& config) {
    const Index n = M.size();
    const Index k = X.cols();
    const Matrix inst = build_instruments(M, X);

    PenalizedProblem problem;
    problem.design.resize(n, k + inst.cols());
    problem.design << X, inst;
    problem.response = D;
    problem.penalized.assign(k + inst.cols(), true);
    for (Index c = 0; c < k; ++c) problem.penalized[c] = false;
    problem.lambda_l1 = lambda1;

    SolveInfo info;
    const Vector theta = lasso_fit(problem, config, &info);

    FirstStage out;
    out.beta_tilde = theta.head(k);
    out.eta_tilde = theta.tail(inst.cols());
    out.d_hat = problem.design * theta;
    out.kkt = info.kkt;
    out.sweeps = info.sweeps;
    return out;
}

FitResult second_stage(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       const Vector& d_hat, double lambda, const SolverConfig& config) {
    const Index n = M.size();
    const Index k = X.cols();
    const Matrix Zhat = col_scale(M, d_hat);

    PenalizedProblem problem;
    problem.design.resize(n, k + n);
    problem.design << X, Zhat;
    problem.response = D;
    problem.penalized.assign(k + n, true);
    for (Index c = 0; c < k; ++c) problem.penalized[c] = false;
    problem.lambda_l1 = lambda;

    SolveInfo info;
    const Vector theta = lasso_fit(problem, config, &info);

    FitResult fit;
    fit.beta_hat = theta.head(k);
    fit.eta_hat = theta.tail(n);
    fit.selected = nonzero_indices(fit.eta_hat);
    fit.d_hat = d_hat;
    fit.lambda2 = lambda;
    fit.kkt2 = info.kkt;
    fit.sweeps2 = info.sweeps;
    fit.isolated = M.isolated_nodes();
    return fit;
}

FitResult fit_2slss(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                    const TuningPolicy& tuning, const SolverConfig& config) {
    const Index n = M.size();
    PenalizedProblem dummy;  // benchmark/fixed need no problem data
    double lambda1;
    if (tuning.first.kind == StagePolicy::Kind::cv) {
        const Matrix inst = build_instruments(M, X);
        PenalizedProblem p1;
        p1.design.resize(n, X.cols() + inst.cols());
        p1.design << X, inst;
        p1.response = D;
        p1.penalized.assign(p1.design.cols(), true);
        for (Index c = 0; c < X.cols(); ++c) p1.penalized[c] = false;
        lambda1 = resolve_lambda(tuning.first, p1, static_cast<double>(n), 1.0,
                                 derive_seed(tuning.cv_seed, 1), config);
    } else {
        lambda1 = resolve_lambda(tuning.first, dummy, static_cast<double>(n), 1.0, 0, config);
    }

    const FirstStage fs = first_stage(D, X, M, lambda1, config);

    const Matrix Zhat = col_scale(M, fs.d_hat);
    PenalizedProblem p2;
    p2.design.resize(n, X.cols() + n);
    p2.design << X, Zhat;
    p2.response = D;
    p2.penalized.assign(p2.design.cols(), true);
    for (Index c = 0; c < X.cols(); ++c) p2.penalized[c] = false;
    const double lambda2 = resolve_lambda(tuning.second, p2, static_cast<double>(n), 1.0,
                                          derive_seed(tuning.cv_seed, 2), config);

    FitResult fit = second_stage(D, X, M, fs.d_hat, lambda2, config);
    fit.lambda1 = lambda1;
    fit.kkt1 = fs.kkt;
    fit.sweeps1 = fs.sweeps;
    return fit;
}

FitResult fit_2slss_cliques(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                            int k_powers, const TuningPolicy& tuning,
                            const SolverConfig& config) {
    if (k_powers < 1) throw std::invalid_argument("fit_2slss_cliques: k_powers must be >= 1");
    const Index n = M.size();
    const Index k = X.cols();
    const Matrix inst = build_instruments(M, X);  // n x n*k

    // first stage design: [X | M X .. M^k X | (M.X) | M (M.X) .. M^k (M.X)]
    const Index p1_cols = k + k_powers * k + (k_powers + 1) * inst.cols();
    PenalizedProblem p1;
    p1.design.resize(n, p1_cols);
    p1.design.leftCols(k) = X;
    Index at = k;
    Matrix MX = X;
    for (int i = 1; i <= k_powers; ++i) {
        MX = M.dense() * MX;
        p1.design.middleCols(at, k) = MX;
        at += k;
    }
    Matrix Mi_inst = inst;
    p1.design.middleCols(at, inst.cols()) = Mi_inst;
    at += inst.cols();
    for (int i = 1; i <= k_powers; ++i) {
        Mi_inst = M.dense() * Mi_inst;
        p1.design.middleCols(at, inst.cols()) = Mi_inst;
        at += inst.cols();
    }
    p1.response = D;
    p1.penalized.assign(p1_cols, true);
    for (Index c = 0; c < k; ++c) p1.penalized[c] = false;

    const double lambda1 =
        tuning.first.kind == StagePolicy::Kind::cv
            ? resolve_lambda(tuning.first, p1, static_cast<double>(n), 1.0,
                             derive_seed(tuning.cv_seed, 1), config)
            : resolve_lambda(tuning.first, p1, static_cast<double>(n), 1.0, 0, config);
    p1.lambda_l1 = lambda1;

    SolveInfo info1;
    const Vector theta1 = lasso_fit(p1, config, &info1);

    // fitted outcomes from the leading terms: X b + M X g + (M . X) e
    const Vector d_hat = X * theta1.head(k) + p1.design.middleCols(k, k) * theta1.segment(k, k) +
                         inst * theta1.segment(k + k_powers * k, inst.cols());

    // second stage: [X | M d_hat | (M . d_hat)]
    const Vector lag_hat = M.dense() * d_hat;
    const Matrix Zhat = col_scale(M, d_hat);
    PenalizedProblem p2;
    p2.design.resize(n, k + 1 + n);
    p2.design << X, lag_hat, Zhat;
    p2.response = D;
    p2.penalized.assign(k + 1 + n, true);
    for (Index c = 0; c < k; ++c) p2.penalized[c] = false;
    if (!tuning.penalize_gamma) p2.penalized[k] = false;

    const double lambda2 = resolve_lambda(tuning.second, p2, static_cast<double>(n), 1.0,
                                          derive_seed(tuning.cv_seed, 2), config);
    p2.lambda_l1 = lambda2;

    SolveInfo info2;
    const Vector theta2 = lasso_fit(p2, config, &info2);

    FitResult fit;
    fit.beta_hat = theta2.head(k);
    fit.gamma_hat = theta2[k];
    fit.eta_hat = theta2.tail(n);
    fit.selected = nonzero_indices(fit.eta_hat);
    fit.d_hat = d_hat;
    fit.lambda1 = lambda1;
    fit.lambda2 = lambda2;
    fit.kkt1 = info1.kkt;
    fit.kkt2 = info2.kkt;
    fit.sweeps1 = info1.sweeps;
    fit.sweeps2 = info2.sweeps;
    fit.isolated = M.isolated_nodes();
    return fit;
}

FitResult fit_2slss_multinet(const Vector& D, const Matrix& X, const MultiNetwork& multi,
                             const TuningPolicy& tuning, const SolverConfig& config) {
    multi.validate();
    const Index n = multi.size();
    const Index k = X.cols();
    const Index q = multi.count();
    if (q < 1) throw std::invalid_argument("fit_2slss_multinet: no networks");

    // one group per network; block width is n for stage two and n*k for the
    // instrument stage when there are several covariates
    auto grouped_problem = [&](const std::vector<Matrix>& blocks) {
        const Index w = blocks.front().cols();
        PenalizedProblem p;
        p.design.resize(n, k + q * w);
        p.design.leftCols(k) = X;
        for (Index j = 0; j < q; ++j) {
            p.design.middleCols(k + j * w, w) = blocks[j];
        }
        p.response = D;
        p.penalized.assign(k + q * w, true);
        for (Index c = 0; c < k; ++c) p.penalized[c] = false;
        p.groups.resize(q);
        for (Index j = 0; j < q; ++j) {
            p.groups[j].resize(w);
            for (Index i = 0; i < w; ++i) p.groups[j][i] = k + j * w + i;
        }
        return p;
    };

    std::vector<Matrix> inst_blocks(q);
    for (Index j = 0; j < q; ++j) inst_blocks[j] = build_instruments(multi.networks[j], X);

    PenalizedProblem p1 = grouped_problem(inst_blocks);
    const double lambda1 = resolve_lambda(
        tuning.first, p1, static_cast<double>(n), static_cast<double>(q),
        derive_seed(tuning.cv_seed, 1), config);
    p1.lambda_l1 = lambda1;
    p1.lambda_group = lambda1;  // equal penalties per the estimator convention

    SolveInfo info1;
    const Vector theta1 = sparse_group_lasso_fit(p1, config, &info1);
    const Vector d_hat = p1.design * theta1;

    std::vector<Matrix> stage2_blocks(q);
    for (Index j = 0; j < q; ++j) stage2_blocks[j] = col_scale(multi.networks[j], d_hat);
    PenalizedProblem p2 = grouped_problem(stage2_blocks);
    const double lambda2 = resolve_lambda(
        tuning.second, p2, static_cast<double>(n), static_cast<double>(q),
        derive_seed(tuning.cv_seed, 2), config);
    p2.lambda_l1 = lambda2;
    p2.lambda_group = lambda2;

    SolveInfo info2;
    const Vector theta2 = sparse_group_lasso_fit(p2, config, &info2);

    FitResult fit;
    fit.beta_hat = theta2.head(k);
    fit.eta_hat = theta2.tail(q * n);
    fit.selected = nonzero_indices(fit.eta_hat);
    fit.d_hat = d_hat;
    fit.q = q;
    fit.lambda1 = lambda1;
    fit.lambda2 = lambda2;
    fit.lambda2_group = lambda2;
    fit.kkt1 = info1.kkt;
    fit.kkt2 = info2.kkt;
    fit.sweeps1 = info1.sweeps;
    fit.sweeps2 = info2.sweeps;
    for (Index j = 0; j < q; ++j) {
        for (Index i : multi.networks[j].isolated_nodes()) fit.isolated.push_back(j * n + i);
    }
    return fit;
}

Oracle2SLS oracle_2sls(const Vector& D, const Matrix& X, const AdjacencyMatrix& M,
                       const std::vector<Index>& S) {
    const Index n = M.size();
    const Index k = X.cols();
    const Index s = static_cast<Index>(S.size());

    if (s == 0) {
        Oracle2SLS out;
        out.beta = Eigen::CompleteOrthogonalDecomposition<Matrix>(X).solve(D);
        out.eta_S = Vector();
        return out;
    }

    const RankCheck rc = check_instrument_rank(M, X, S);
    if (!rc.full_rank) {
        throw std::domain_error("oracle_2sls: instrument rank condition fails for S");
    }

    Matrix inst(n, k + s * k);
    inst.leftCols(k) = X;
    Index c = k;
    for (Index col = 0; col < k; ++col) {
        const Matrix MX = col_scale(M, X.col(col));
        for (Index j : S) inst.col(c++) = MX.col(j);
    }
    Matrix regressors(n, k + s);
    regressors.leftCols(k) = X;
    const Matrix MD = col_scale(M, D);
    for (Index a = 0; a < s; ++a) regressors.col(k + a) = MD.col(S[a]);

    // project regressors on the instrument space, then least squares
    Eigen::CompleteOrthogonalDecomposition<Matrix> inst_cod(inst);
    const Matrix fitted = inst * inst_cod.solve(regressors);
    Eigen::CompleteOrthogonalDecomposition<Matrix> fit_cod(fitted);
    const Vector theta = fit_cod.solve(D);

    Oracle2SLS out;
    out.beta = theta.head(k);
    out.eta_S = theta.tail(s);
    return out;
}

}  // namespace heenet
