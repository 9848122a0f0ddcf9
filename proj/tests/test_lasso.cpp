#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "heenet/lasso.hpp"
#include "heenet/rng.hpp"
#include "test_util.hpp"

using namespace heenet;
using namespace heenet::testing;

TEST_CASE("soft_threshold") {
    CHECK(soft_threshold(3.0, 1.0) == 2.0);
    CHECK(soft_threshold(-0.5, 1.0) == 0.0);
    CHECK(soft_threshold(-2.5, 0.5) == -2.0);
    CHECK(soft_threshold(0.0, 0.0) == 0.0);
}

namespace {

PenalizedProblem make_problem(const Matrix& Z, const Vector& y, double l1 = 0.0,
                              double lg = 0.0) {
    PenalizedProblem p;
    p.design = Z;
    p.response = y;
    p.penalized.assign(Z.cols(), true);
    p.lambda_l1 = l1;
    p.lambda_group = lg;
    return p;
}

}  // namespace

TEST_CASE("lasso_fit: unpenalized limit recovers OLS on a square full-rank design") {
    const Index n = 8;
    const Matrix Z = 0.3 * random_matrix(n, n, 11) + 3.0 * Matrix::Identity(n, n);
    const Vector y = random_vector(n, 12);
    auto problem = make_problem(Z, y, 0.0);
    const Vector theta = lasso_fit(problem, {});
    const Vector ols = Z.fullPivLu().solve(y);
    CHECK((theta - ols).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lasso_fit: orthonormal design gives soft-thresholded OLS coefficients") {
    const Index n = 40, p = 10;
    const Matrix Z = orthonormal_design(n, p, 21);
    const Vector y = random_vector(n, 22);
    const double lambda = 0.3;
    const Vector theta = lasso_fit(make_problem(Z, y, lambda), {});
    const Vector ols = Z.transpose() * y / static_cast<double>(n);  // Z'Z/n = I
    for (Index j = 0; j < p; ++j) {
        CHECK(theta[j] == doctest::Approx(soft_threshold(ols[j], lambda)).epsilon(1e-7));
    }
}

TEST_CASE("lasso_fit: agrees with the proximal-gradient oracle on a 10x15 instance") {
    const Matrix Z = random_matrix(10, 15, 31);
    const Vector y = random_vector(10, 32);
    auto problem = make_problem(Z, y, 0.15);
    problem.penalized[0] = false;  // keep an unpenalized column in the mix
    const Vector theta = lasso_fit(problem, {});
    const Vector oracle = proximal_gradient_oracle(problem);
    CHECK((theta - oracle).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("lasso_fit: unpenalized block sees no shrinkage") {
    const Index n = 30;
    Matrix Z = random_matrix(n, 5, 41);
    const Vector y = random_vector(n, 42);
    auto problem = make_problem(Z, y, 10.0);  // far above lambda_max
    problem.penalized[0] = false;
    problem.penalized[1] = false;
    const Vector theta = lasso_fit(problem, {});
    for (Index j = 2; j < 5; ++j) CHECK(theta[j] == 0.0);
    // the unpenalized block solves its own least squares
    const Matrix Xu = Z.leftCols(2);
    const Vector ols = (Xu.transpose() * Xu).ldlt().solve(Xu.transpose() * y);
    CHECK((theta.head(2) - ols).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("lasso_fit rejects non-finite input and grouped penalties") {
    Matrix Z = random_matrix(5, 3, 51);
    Vector y = random_vector(5, 52);
    auto bad = make_problem(Z, y, 0.1);
    bad.design(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(lasso_fit(bad, {}), std::invalid_argument);

    auto grouped = make_problem(Z, y, 0.1, 0.2);
    grouped.groups = {{0, 1}};
    CHECK_THROWS_AS(lasso_fit(grouped, {}), std::invalid_argument);
}

TEST_CASE("sparse_group_lasso_fit: lambda_group = 0 matches lasso_fit") {
    const Matrix Z = random_matrix(12, 8, 61);
    const Vector y = random_vector(12, 62);
    auto plain = make_problem(Z, y, 0.2);
    auto grouped = plain;
    grouped.groups = {{0, 1, 2, 3}, {4, 5, 6, 7}};
    grouped.lambda_group = 0.0;
    const Vector a = lasso_fit(plain, {});
    const Vector b = sparse_group_lasso_fit(grouped, {});
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("sparse_group_lasso_fit: group-zero screening zeroes the whole block") {
    const Matrix Z = random_matrix(12, 4, 71);
    const Vector y = random_vector(12, 72);
    auto problem = make_problem(Z, y, 0.0);
    problem.groups = {{0, 1, 2, 3}};
    // threshold: ||Z'y/n||_2 with lambda_l1 = 0
    const double threshold = (Z.transpose() * y / 12.0).norm();
    problem.lambda_group = threshold * 1.01;
    const Vector theta = sparse_group_lasso_fit(problem, {});
    CHECK(theta.isZero(0.0));
}

TEST_CASE("sparse_group_lasso_fit: agrees with the composite-prox oracle") {
    const Matrix Z = random_matrix(12, 8, 81);
    const Vector y = 2.0 * random_vector(12, 82);
    auto problem = make_problem(Z, y, 0.1, 0.15);
    problem.groups = {{0, 1, 2, 3}, {4, 5, 6, 7}};
    const Vector theta = sparse_group_lasso_fit(problem, {});
    const Vector oracle = proximal_gradient_oracle(problem);
    CHECK((theta - oracle).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(kkt_residual(problem, theta) < 1e-7);
}

TEST_CASE("kkt_residual: zero at an OLS optimum, positive off it, zero above lambda_max") {
    const Index n = 20, p = 6;
    const Matrix Z = random_matrix(n, p, 91);
    const Vector y = random_vector(n, 92);
    auto problem = make_problem(Z, y, 0.0);
    const Vector ols = (Z.transpose() * Z).ldlt().solve(Z.transpose() * y);
    CHECK(kkt_residual(problem, ols) < 1e-10);

    Vector perturbed = ols;
    perturbed[2] += 0.1;
    CHECK(kkt_residual(problem, perturbed) > 1e-4);

    problem.lambda_l1 = (Z.transpose() * y / static_cast<double>(n)).cwiseAbs().maxCoeff();
    CHECK(kkt_residual(problem, Vector::Zero(p)) == 0.0);

    CHECK_THROWS_AS(kkt_residual(problem, Vector::Zero(p + 1)), std::invalid_argument);
}

TEST_CASE("lambda_max: orthogonal response gives zero; single-column formula; solver check") {
    const Index n = 30;
    SUBCASE("response orthogonal to penalized columns") {
        Matrix Z(n, 2);
        Z.col(0) = Vector::Ones(n);
        Vector y = random_vector(n, 101);
        y -= Vector::Constant(n, y.mean());
        Z.col(1) = y.cwiseAbs();  // anything; make col 0 the penalized one
        auto problem = make_problem(Z, y);
        problem.penalized = {true, false};
        // y has mean zero, so the all-ones penalized column is orthogonal to it
        const double lm = lambda_max(problem);
        // projecting out the unpenalized column changes y, so compute directly
        auto pure = make_problem(Matrix(Z.leftCols(1)), y);
        CHECK(lambda_max(pure) < 1e-12);
        CHECK(lm >= 0.0);
    }
    SUBCASE("single penalized column") {
        const Vector z = random_vector(n, 102);
        const Vector y = random_vector(n, 103);
        auto problem = make_problem(Matrix(z), y);
        CHECK(lambda_max(problem) ==
              doctest::Approx(std::abs(z.dot(y)) / static_cast<double>(n)));
    }
    SUBCASE("lasso_fit at lambda_max returns an all-zero penalized block") {
        Matrix Z(n, 4);
        Z.col(0) = Vector::Ones(n);
        Z.rightCols(3) = random_matrix(n, 3, 104);
        const Vector y = random_vector(n, 105);
        auto problem = make_problem(Z, y);
        problem.penalized = {false, true, true, true};
        problem.lambda_l1 = lambda_max(problem);
        const Vector theta = lasso_fit(problem, {});
        CHECK(theta.tail(3).isZero(0.0));
    }
}

TEST_CASE("cv_select_lambda: singleton path, determinism, pure-noise behaviour") {
    const Index n = 40;
    const Matrix Z = random_matrix(n, 10, 111);

    SUBCASE("path of length 1 returns that value") {
        const Vector y = random_vector(n, 112);
        const double path[] = {0.37};
        CHECK(cv_select_lambda(make_problem(Z, y), 5, path, 7) == 0.37);
    }
    SUBCASE("same seed twice gives identical selection") {
        const Vector y = random_vector(n, 113);
        const auto path = lambda_path(1.0, 10, 0.01);
        auto problem = make_problem(Z, y);
        CHECK(cv_select_lambda(problem, 5, path, 99) == cv_select_lambda(problem, 5, path, 99));
    }
    SUBCASE("pure-noise response selects lambda_max in a majority of seeded trials") {
        int picked_hi = 0;
        for (int t = 0; t < 50; ++t) {
            const Vector y = random_vector(n, 200 + t);
            auto problem = make_problem(Z, y);
            const double hi = lambda_max(problem);
            const double path[] = {hi, 0.001};
            if (cv_select_lambda(problem, 5, path, 300 + t) == hi) ++picked_hi;
        }
        CHECK(picked_hi > 25);
    }
    SUBCASE("errors") {
        const Vector y = random_vector(n, 114);
        const double path[] = {0.1};
        CHECK_THROWS_AS(cv_select_lambda(make_problem(Z, y), 1, path, 0), std::invalid_argument);
        const double bad[] = {std::numeric_limits<double>::quiet_NaN()};
        CHECK_THROWS_AS(cv_select_lambda(make_problem(Z, y), 5, bad, 0), std::invalid_argument);
    }
}

TEST_CASE("benchmark_lambda") {
    CHECK(benchmark_lambda(std::exp(2.0)) == doctest::Approx(std::sqrt(2.0) / std::exp(1.0)));
    CHECK(benchmark_lambda(200.0) == doctest::Approx(0.16276).epsilon(1e-4));
    CHECK(benchmark_lambda(100.0, 1.0, 2.0) == doctest::Approx(2.0 * benchmark_lambda(100.0)));
    CHECK(benchmark_lambda(100.0, 4.0) ==
          doctest::Approx(std::sqrt((std::log(100.0) + std::log(4.0)) / 100.0)));
    CHECK_THROWS_AS(benchmark_lambda(1.0), std::invalid_argument);
}

TEST_CASE("objective is non-increasing across sweeps") {
    for (int t = 0; t < 5; ++t) {
        const Matrix Z = random_matrix(15, 20, 400 + t);
        const Vector y = random_vector(15, 500 + t);
        auto problem = make_problem(Z, y, 0.1);
        SolverConfig cfg;
        cfg.record_objective = true;
        SolveInfo info;
        lasso_fit(problem, cfg, &info);
        for (std::size_t i = 1; i < info.objective_trace.size(); ++i) {
            CHECK(info.objective_trace[i] <= info.objective_trace[i - 1] + 1e-12);
        }

        auto grouped = problem;
        grouped.groups = {{0, 1, 2, 3, 4}, {5, 6, 7, 8}};
        grouped.lambda_group = 0.05;
        SolveInfo ginfo;
        sparse_group_lasso_fit(grouped, cfg, &ginfo);
        for (std::size_t i = 1; i < ginfo.objective_trace.size(); ++i) {
            CHECK(ginfo.objective_trace[i] <= ginfo.objective_trace[i - 1] + 1e-12);
        }
    }
}

TEST_CASE("full-rank solutions agree from different warm starts") {
    const Matrix Z = random_matrix(30, 10, 601);
    const Vector y = random_vector(30, 602);
    auto problem = make_problem(Z, y, 0.05);
    SolverConfig cfg;
    cfg.tolerance = 1e-10;
    const Vector cold = lasso_fit(problem, cfg);
    const Vector start = 5.0 * random_vector(10, 603);
    const Vector warm = lasso_fit(problem, cfg, nullptr, start);
    CHECK((cold - warm).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("path nesting on an orthonormal design") {
    const Index n = 50, p = 12;
    const Matrix Z = orthonormal_design(n, p, 611);
    const Vector y = random_vector(n, 612);
    auto problem = make_problem(Z, y);
    std::vector<Index> prev_support;
    std::optional<Vector> warm;
    bool first = true;
    for (double lambda : lambda_path(lambda_max(problem), 8, 0.05)) {
        problem.lambda_l1 = lambda;
        const Vector theta = lasso_fit(problem, {}, nullptr, warm);
        warm = theta;
        std::vector<Index> support;
        for (Index j = 0; j < p; ++j) {
            if (theta[j] != 0.0) support.push_back(j);
        }
        if (!first) {
            // the support can only grow as lambda decreases
            for (Index j : prev_support) {
                CHECK(std::find(support.begin(), support.end(), j) != support.end());
            }
        }
        prev_support = support;
        first = false;
    }
}

TEST_CASE("scaling consistency: response and lambda scaled together scale the solution") {
    const Matrix Z = random_matrix(25, 8, 621);
    const Vector y = random_vector(25, 622);
    const double lambda = 0.15;
    SolverConfig cfg;
    const Vector base = lasso_fit(make_problem(Z, y, lambda), cfg);
    // a power-of-two factor scales every float operation exactly, including
    // the stopping rule once the tolerance is scaled too
    const double a = 2.0;
    SolverConfig scaled_cfg;
    scaled_cfg.tolerance = cfg.tolerance * a;
    const Vector scaled = lasso_fit(make_problem(Z, Vector(a * y), a * lambda), scaled_cfg);
    CHECK((scaled - a * base).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("oracle equivalence across 20 random instances") {
    Rng meta(777);
    for (int t = 0; t < 20; ++t) {
        const Index n = 8 + static_cast<Index>(meta.below(8));    // <= 15
        const Index p = 10 + static_cast<Index>(meta.below(11));  // <= 20
        const Matrix Z = random_matrix(n, p, 700 + t);
        const Vector y = 1.5 * random_vector(n, 800 + t);
        auto problem = make_problem(Z, y, 0.12);
        problem.penalized[0] = (t % 3 != 0);
        if (t % 2 == 0) {
            // two groups over the first six penalized columns
            std::vector<Index> g1, g2;
            for (Index j = 0; j < p && g1.size() + g2.size() < 6; ++j) {
                if (!problem.penalized[j]) continue;
                (g1.size() < 3 ? g1 : g2).push_back(j);
            }
            problem.groups = {g1, g2};
            problem.lambda_group = 0.08;
            const Vector theta = sparse_group_lasso_fit(problem, {});
            CHECK((theta - proximal_gradient_oracle(problem)).cwiseAbs().maxCoeff() < 1e-4);
        } else {
            const Vector theta = lasso_fit(problem, {});
            CHECK((theta - proximal_gradient_oracle(problem)).cwiseAbs().maxCoeff() < 1e-4);
        }
    }
}

TEST_CASE("lambda_path endpoints") {
    const auto path = lambda_path(2.0, 5, 0.01);
    CHECK(path.front() == 2.0);
    CHECK(path.back() == doctest::Approx(0.02));
    CHECK(path.size() == 5);
    CHECK_THROWS_AS(lambda_path(0.0, 5, 0.01), std::invalid_argument);
}
