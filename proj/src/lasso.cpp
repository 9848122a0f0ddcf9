#include "heenet/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "heenet/rng.hpp"

namespace heenet {

namespace {

bool in_any_group(const std::vector<std::vector<Index>>& groups, Index j) {
    for (const auto& g : groups) {
        if (std::find(g.begin(), g.end(), j) != g.end()) return true;
    }
    return false;
}

void check_finite(const PenalizedProblem& problem) {
    if (!problem.design.allFinite() || !problem.response.allFinite()) {
        throw std::invalid_argument("penalized problem: non-finite entries");
    }
}

}  // namespace

void PenalizedProblem::validate() const {
    const Index p = design.cols();
    if (design.rows() != response.size()) {
        throw std::invalid_argument("penalized problem: design rows != response length");
    }
    if (static_cast<Index>(penalized.size()) != p) {
        throw std::invalid_argument("penalized problem: penalty mask length != columns");
    }
    if (lambda_l1 < 0.0 || lambda_group < 0.0) {
        throw std::invalid_argument("penalized problem: negative penalty");
    }
    std::vector<bool> seen(p, false);
    for (const auto& g : groups) {
        for (Index j : g) {
            if (j < 0 || j >= p) {
                throw std::invalid_argument("penalized problem: group index out of range");
            }
            if (!penalized[j]) {
                throw std::invalid_argument("penalized problem: unpenalized column in a group");
            }
            if (seen[j]) {
                throw std::invalid_argument("penalized problem: column in more than one group");
            }
            seen[j] = true;
        }
    }
}

double penalized_objective(const PenalizedProblem& problem, const Vector& theta) {
    const Index n = problem.design.rows();
    const Vector r = problem.response - problem.design * theta;
    double obj = 0.5 * r.squaredNorm() / static_cast<double>(n);
    for (Index j = 0; j < problem.design.cols(); ++j) {
        if (problem.penalized[j]) obj += problem.lambda_l1 * std::abs(theta[j]);
    }
    for (const auto& g : problem.groups) {
        double s = 0.0;
        for (Index j : g) s += theta[j] * theta[j];
        obj += problem.lambda_group * std::sqrt(s);
    }
    return obj;
}

double kkt_residual(const PenalizedProblem& problem, const Vector& theta) {
    problem.validate();
    const Index n = problem.design.rows();
    const Index p = problem.design.cols();
    if (theta.size() != p) {
        throw std::invalid_argument("kkt_residual: coefficient length != columns");
    }
    const Vector grad =
        -(problem.design.transpose() * (problem.response - problem.design * theta)) /
        static_cast<double>(n);

    std::vector<bool> grouped(p, false);
    for (const auto& g : problem.groups) {
        for (Index j : g) grouped[j] = true;
    }

    double viol = 0.0;
    for (Index j = 0; j < p; ++j) {
        if (grouped[j]) continue;
        if (!problem.penalized[j]) {
            viol = std::max(viol, std::abs(grad[j]));
        } else if (theta[j] != 0.0) {
            viol = std::max(viol, std::abs(grad[j] + problem.lambda_l1 * (theta[j] > 0 ? 1.0 : -1.0)));
        } else {
            viol = std::max(viol, std::max(std::abs(grad[j]) - problem.lambda_l1, 0.0));
        }
    }
    for (const auto& g : problem.groups) {
        double norm2 = 0.0;
        for (Index j : g) norm2 += theta[j] * theta[j];
        const double gnorm = std::sqrt(norm2);
        if (gnorm > 0.0) {
            for (Index j : g) {
                const double ggrad = grad[j] + problem.lambda_group * theta[j] / gnorm;
                if (theta[j] != 0.0) {
                    viol = std::max(viol, std::abs(ggrad + problem.lambda_l1 * (theta[j] > 0 ? 1.0 : -1.0)));
                } else {
                    viol = std::max(viol, std::max(std::abs(ggrad) - problem.lambda_l1, 0.0));
                }
            }
        } else {
            // whole group at zero: stationary iff the soft-thresholded score
            // fits inside the lambda_group ball
            double s = 0.0;
            for (Index j : g) {
                const double v = soft_threshold(grad[j], problem.lambda_l1);
                s += v * v;
            }
            viol = std::max(viol, std::max(std::sqrt(s) - problem.lambda_group, 0.0));
        }
    }
    return viol;
}

double lambda_max(const PenalizedProblem& problem) {
    problem.validate();
    const Index n = problem.design.rows();
    const Index p = problem.design.cols();
    std::vector<Index> unpen;
    for (Index j = 0; j < p; ++j) {
        if (!problem.penalized[j]) unpen.push_back(j);
    }
    Vector resid = problem.response;
    if (!unpen.empty()) {
        Matrix Xu(n, static_cast<Index>(unpen.size()));
        for (Index c = 0; c < Xu.cols(); ++c) Xu.col(c) = problem.design.col(unpen[c]);
        resid = project_out(Xu, resid);
    }
    double m = 0.0;
    for (Index j = 0; j < p; ++j) {
        if (problem.penalized[j]) {
            m = std::max(m, std::abs(problem.design.col(j).dot(resid)) / static_cast<double>(n));
        }
    }
    return m;
}

Vector lasso_fit(const PenalizedProblem& problem, const SolverConfig& config, SolveInfo* info,
                 const std::optional<Vector>& warm_start) {
    problem.validate();
    check_finite(problem);
    if (!problem.groups.empty() && problem.lambda_group != 0.0) {
        throw std::invalid_argument("lasso_fit: grouped penalty present, use sparse_group_lasso_fit");
    }
    const Index n = problem.design.rows();
    const Index p = problem.design.cols();
    const double dn = static_cast<double>(n);

    // Working copy with penalized columns scaled to unit RMS norm; thresholds
    // compensated per column so the minimizer of the original objective is
    // returned unchanged.
    Matrix Z = problem.design;
    Vector scale = Vector::Ones(p);
    Vector diag(p);
    Vector thresh = Vector::Zero(p);
    for (Index j = 0; j < p; ++j) {
        const double nrm = Z.col(j).norm();
        if (config.standardize && problem.penalized[j] && nrm > 0.0) {
            scale[j] = nrm / std::sqrt(dn);
            Z.col(j) /= scale[j];
        }
        diag[j] = Z.col(j).squaredNorm() / dn;
        if (problem.penalized[j]) thresh[j] = problem.lambda_l1 / scale[j];
    }

    Vector theta = Vector::Zero(p);  // working coordinates
    if (warm_start) {
        if (warm_start->size() != p) throw std::invalid_argument("lasso_fit: warm start length");
        theta = warm_start->cwiseProduct(scale);
    }
    for (Index j = 0; j < p; ++j) {
        if (diag[j] == 0.0) theta[j] = 0.0;
    }
    Vector r = problem.response - Z * theta;

    double check_tol = config.tolerance;
    bool converged = false;
    double kkt = std::numeric_limits<double>::quiet_NaN();
    int sweep = 0;
    Vector mapped(p);
    for (; sweep < config.max_iterations; ++sweep) {
        double max_delta = 0.0;
        for (Index j = 0; j < p; ++j) {
            if (diag[j] == 0.0) continue;
            const double rho = Z.col(j).dot(r) / dn + diag[j] * theta[j];
            const double next = problem.penalized[j] ? soft_threshold(rho, thresh[j]) / diag[j]
                                                     : rho / diag[j];
            const double delta = next - theta[j];
            if (delta != 0.0) {
                r -= Z.col(j) * delta;
                theta[j] = next;
                max_delta = std::max(max_delta, std::abs(delta) / scale[j]);
            }
        }
        if (config.record_objective && info) {
            mapped = theta.cwiseQuotient(scale);
            info->objective_trace.push_back(penalized_objective(problem, mapped));
        }
        if (max_delta <= check_tol) {
            mapped = theta.cwiseQuotient(scale);
            kkt = kkt_residual(problem, mapped);
            if (kkt <= 10.0 * config.tolerance) {
                converged = true;
                ++sweep;
                break;
            }
            check_tol = std::max(check_tol / 10.0, 1e-300);
        }
    }
    mapped = theta.cwiseQuotient(scale);
    if (!converged) {
        kkt = kkt_residual(problem, mapped);
        if (kkt <= 10.0 * config.tolerance) {
            converged = true;
        } else {
            throw ConvergenceError("lasso_fit: no convergence after " +
                                       std::to_string(config.max_iterations) +
                                       " sweeps (KKT residual " + std::to_string(kkt) + ")",
                                   kkt);
        }
    }
    if (info) {
        info->sweeps = sweep;
        info->kkt = kkt;
        info->converged = converged;
    }
    return mapped;
}

namespace {

// prox of t * (lambda_g ||.||_2 + lambda_1 ||.||_1)
Vector group_prox(const Vector& u, double t, double lambda_1, double lambda_g) {
    Vector w(u.size());
    for (Index i = 0; i < u.size(); ++i) w[i] = soft_threshold(u[i], t * lambda_1);
    const double nrm = w.norm();
    if (nrm == 0.0) return w;
    return w * std::max(1.0 - t * lambda_g / nrm, 0.0);
}

}  // namespace

Vector sparse_group_lasso_fit(const PenalizedProblem& problem, const SolverConfig& config,
                              SolveInfo* info, const std::optional<Vector>& warm_start) {
    problem.validate();
    check_finite(problem);
    const Index n = problem.design.rows();
    const Index p = problem.design.cols();
    const double dn = static_cast<double>(n);
    const Matrix& Z = problem.design;

    std::vector<bool> grouped(p, false);
    for (const auto& g : problem.groups) {
        for (Index j : g) grouped[j] = true;
    }

    Vector diag(p);
    for (Index j = 0; j < p; ++j) diag[j] = Z.col(j).squaredNorm() / dn;

    // per-group Gram blocks, scores and Lipschitz bounds
    const std::size_t ng = problem.groups.size();
    std::vector<Matrix> gram(ng);
    std::vector<Matrix> Zg(ng);
    std::vector<double> lips(ng);
    std::vector<double> step(ng);
    for (std::size_t gi = 0; gi < ng; ++gi) {
        const auto& g = problem.groups[gi];
        Matrix Zi(n, static_cast<Index>(g.size()));
        for (std::size_t c = 0; c < g.size(); ++c) Zi.col(static_cast<Index>(c)) = Z.col(g[c]);
        gram[gi] = Zi.transpose() * Zi / dn;
        Zg[gi] = std::move(Zi);
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram[gi], Eigen::EigenvaluesOnly);
        lips[gi] = std::max(es.eigenvalues().maxCoeff(), 1e-12);
        step[gi] = 1.0 / lips[gi];
    }

    Vector theta = Vector::Zero(p);
    if (warm_start) {
        if (warm_start->size() != p) {
            throw std::invalid_argument("sparse_group_lasso_fit: warm start length");
        }
        theta = *warm_start;
        for (Index j = 0; j < p; ++j) {
            if (diag[j] == 0.0) theta[j] = 0.0;
        }
    }
    Vector r = problem.response - Z * theta;

    const double inner_tol = config.tolerance / 10.0;
    const int inner_cap = 500;
    double check_tol = config.tolerance;
    bool converged = false;
    double kkt = std::numeric_limits<double>::quiet_NaN();
    int sweep = 0;
    for (; sweep < config.max_iterations; ++sweep) {
        double max_delta = 0.0;
        // ungrouped coordinates
        for (Index j = 0; j < p; ++j) {
            if (grouped[j] || diag[j] == 0.0) continue;
            const double rho = Z.col(j).dot(r) / dn + diag[j] * theta[j];
            const double next = problem.penalized[j]
                                    ? soft_threshold(rho, problem.lambda_l1) / diag[j]
                                    : rho / diag[j];
            const double delta = next - theta[j];
            if (delta != 0.0) {
                r -= Z.col(j) * delta;
                theta[j] = next;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        // group blocks
        for (std::size_t gi = 0; gi < ng; ++gi) {
            const auto& g = problem.groups[gi];
            const Index m = static_cast<Index>(g.size());
            Vector u(m);
            for (Index c = 0; c < m; ++c) u[c] = theta[g[c]];
            // score against the partial residual r + Z_g u
            const Vector cg = Zg[gi].transpose() * r / dn + gram[gi] * u;
            Vector st(m);
            for (Index c = 0; c < m; ++c) st[c] = soft_threshold(cg[c], problem.lambda_l1);
            if (st.norm() <= problem.lambda_group) {
                if (!u.isZero(0.0)) {
                    r += Zg[gi] * u;
                    max_delta = std::max(max_delta, u.cwiseAbs().maxCoeff());
                    for (Index c = 0; c < m; ++c) theta[g[c]] = 0.0;
                }
                continue;
            }
            // proximal gradient with backtracking on the smooth part
            // f(u) = u' Gram u / 2 - cg' u  (constants dropped)
            const Vector u_enter = u;
            double t = step[gi];
            for (int it = 0; it < inner_cap; ++it) {
                const Vector grad = gram[gi] * u - cg;
                const double fu = 0.5 * u.dot(gram[gi] * u) - cg.dot(u);
                Vector next;
                while (true) {
                    next = group_prox(u - t * grad, t, problem.lambda_l1, problem.lambda_group);
                    const Vector d = next - u;
                    const double fn = 0.5 * next.dot(gram[gi] * next) - cg.dot(next);
                    if (fn <= fu + grad.dot(d) + d.squaredNorm() / (2.0 * t) + 1e-15) break;
                    t *= 0.5;
                }
                const double change = (next - u).cwiseAbs().maxCoeff();
                u = next;
                if (change <= inner_tol) break;
            }
            step[gi] = t;
            const Vector d = u - u_enter;
            if (!d.isZero(0.0)) {
                r -= Zg[gi] * d;
                max_delta = std::max(max_delta, d.cwiseAbs().maxCoeff());
            }
            for (Index c = 0; c < m; ++c) theta[g[c]] = u[c];
        }
        if (config.record_objective && info) {
            info->objective_trace.push_back(penalized_objective(problem, theta));
        }
        if (max_delta <= check_tol) {
            kkt = kkt_residual(problem, theta);
            if (kkt <= 10.0 * config.tolerance) {
                converged = true;
                ++sweep;
                break;
            }
            check_tol = std::max(check_tol / 10.0, 1e-300);
        }
    }
    if (!converged) {
        kkt = kkt_residual(problem, theta);
        if (kkt <= 10.0 * config.tolerance) {
            converged = true;
        } else {
            throw ConvergenceError("sparse_group_lasso_fit: no convergence after " +
                                       std::to_string(config.max_iterations) +
                                       " sweeps (KKT residual " + std::to_string(kkt) + ")",
                                   kkt);
        }
    }
    if (info) {
        info->sweeps = sweep;
        info->kkt = kkt;
        info->converged = converged;
    }
    return theta;
}

double cv_select_lambda(const PenalizedProblem& problem, int folds,
                        std::span<const double> path, std::uint64_t seed,
                        const SolverConfig& config) {
    problem.validate();
    const Index n = problem.design.rows();
    if (folds < 2 || folds > n) {
        throw std::invalid_argument("cv_select_lambda: folds out of range");
    }
    if (path.empty()) {
        throw std::invalid_argument("cv_select_lambda: empty lambda path");
    }
    for (double l : path) {
        if (!std::isfinite(l) || l < 0.0) {
            throw std::invalid_argument("cv_select_lambda: invalid lambda in path");
        }
    }
    if (path.size() == 1) return path[0];

    const bool has_groups = !problem.groups.empty();

    std::vector<Index> perm(n);
    for (Index i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    rng.shuffle(perm);
    std::vector<int> fold_of(n);
    for (Index i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % folds);

    std::vector<double> mean_err(path.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<Index> train, test;
        for (Index i = 0; i < n; ++i) {
            (fold_of[i] == f ? test : train).push_back(i);
        }
        PenalizedProblem sub = problem;
        sub.design = problem.design(train, Eigen::all);
        sub.response = problem.response(train);
        const Matrix Ztest = problem.design(test, Eigen::all);
        const Vector ytest = problem.response(test);

        // fold fits run on a reduced sweep budget; a fit that cannot be
        // certified poisons its lambda (and everything deeper on the path,
        // which only gets harder) rather than the whole selection
        SolverConfig fold_config = config;
        fold_config.max_iterations = std::min(config.max_iterations, 2000);
        std::optional<Vector> warm;
        for (std::size_t li = 0; li < path.size(); ++li) {
            sub.lambda_l1 = path[li];
            if (has_groups) sub.lambda_group = path[li];
            try {
                const Vector theta = has_groups
                                         ? sparse_group_lasso_fit(sub, fold_config, nullptr, warm)
                                         : lasso_fit(sub, fold_config, nullptr, warm);
                warm = theta;
                mean_err[li] += (ytest - Ztest * theta).squaredNorm() /
                                static_cast<double>(test.size()) / static_cast<double>(folds);
            } catch (const ConvergenceError&) {
                for (std::size_t rest = li; rest < path.size(); ++rest) {
                    mean_err[rest] = std::numeric_limits<double>::infinity();
                }
                break;
            }
        }
    }

    double best_err = std::numeric_limits<double>::infinity();
    double best_lambda = path[0];
    for (std::size_t li = 0; li < path.size(); ++li) {
        if (mean_err[li] < best_err ||
            (mean_err[li] == best_err && path[li] < best_lambda)) {
            best_err = mean_err[li];
            best_lambda = path[li];
        }
    }
    return best_lambda;
}

double benchmark_lambda(double n, double q, double c) {
    if (n < 2.0) throw std::invalid_argument("benchmark_lambda: n must be >= 2");
    if (q < 1.0) throw std::invalid_argument("benchmark_lambda: q must be >= 1");
    return c * std::sqrt((std::log(n) + std::log(q)) / n);
}

std::vector<double> lambda_path(double lambda_hi, int count, double min_ratio) {
    if (count < 1 || lambda_hi <= 0.0 || min_ratio <= 0.0 || min_ratio > 1.0) {
        throw std::invalid_argument("lambda_path: bad arguments");
    }
    std::vector<double> path(count);
    if (count == 1) {
        path[0] = lambda_hi;
        return path;
    }
    const double step = std::log(min_ratio) / (count - 1);
    for (int i = 0; i < count; ++i) path[i] = lambda_hi * std::exp(step * i);
    return path;
}

}  // namespace heenet
