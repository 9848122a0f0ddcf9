#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "heenet/dgp.hpp"
#include "heenet/rng.hpp"
#include "test_util.hpp"

using namespace heenet;
using namespace heenet::testing;

namespace {

StructuralParams leader_params(Index n, std::initializer_list<Index> leaders, double value,
                               double beta = 3.0) {
    StructuralParams p;
    p.eta0 = Vector::Zero(n);
    for (Index j : leaders) p.eta0[j] = value;
    p.beta0 = Vector::Constant(1, beta);
    return p;
}

}  // namespace

TEST_CASE("simulate_base: no endogenous term means D = X beta + eps") {
    const Index n = 20;
    const auto M = erdos_renyi(n, 0.3, 1);
    const auto params = leader_params(n, {}, 0.0);
    const Matrix X = draw_design(n, 1, 2);
    Vector eps;
    const Vector D = simulate_base(M, params, X, 3, &eps);
    CHECK((D - X * params.beta0 - eps).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("simulate_base: two-node system solved exactly") {
    // path graph, eta = (0.5, 0), beta = 1, X = (1,1)', eps = 0:
    // d1 = 1 (node 2 has no influence), d2 = 1 + 0.5 d1 = 1.5
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = m(1, 0) = 1.0;
    const AdjacencyMatrix M(m, true);
    StructuralParams params;
    params.eta0 = Vector(2);
    params.eta0 << 0.5, 0.0;
    params.beta0 = Vector::Constant(1, 1.0);
    Matrix X = Matrix::Ones(2, 1);

    // independent 2x2 solve: (I - M.eta) D = X
    Matrix sys(2, 2);
    sys << 1.0, 0.0, -0.5, 1.0;
    const Vector expected = sys.inverse() * X.col(0);
    CHECK(expected[0] == doctest::Approx(1.0));
    CHECK(expected[1] == doctest::Approx(1.5));

    // solver path: subtract the drawn noise via eps_out to isolate the system
    Vector eps;
    const Vector D = simulate_base(M, params, X, 7, &eps);
    const Vector D_noise_free = D - sys.inverse() * eps;
    CHECK((D_noise_free - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("simulate_base: structural identity holds on every draw") {
    for (int t = 0; t < 20; ++t) {
        const Index n = 30;
        auto M = erdos_renyi(n, 0.15, 100 + t);
        M = embed_block_at(M, {0, 1, 2, 3, 4}, path_block(5));
        const auto params = leader_params(n, {0, 1, 2, 3, 4}, 0.5);
        const Matrix X = draw_design(n, 1, 200 + t);
        Vector eps;
        const Vector D = simulate_base(M, params, X, 300 + t, &eps);
        const Vector resid = D - col_scale(M, D) * params.eta0 - X * params.beta0 - eps;
        CHECK(resid.cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + D.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("Neumann-series agreement on small systems") {
    for (int t = 0; t < 20; ++t) {
        const Index n = 15 + t % 10;
        auto M = erdos_renyi(n, 0.2, 400 + t);
        M = embed_block_at(M, {0, 1, 2}, path_block(3));
        const auto params = leader_params(n, {0, 1, 2}, 0.3);
        const Matrix A = col_scale(M, params.eta0);
        // only valid when the series converges
        Eigen::JacobiSVD<Matrix> svd(A);
        if (svd.singularValues()(0) >= 0.95) continue;
        const Matrix X = draw_design(n, 1, 500 + t);
        Vector eps;
        const Vector D = simulate_base(M, params, X, 600 + t, &eps);
        Vector series = Vector::Zero(n);
        Vector term = X * params.beta0 + eps;
        for (int i = 0; i <= 50; ++i) {
            series += term;
            term = A * term;
        }
        CHECK((series - D).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("simulate_base: invariant violations and singular systems are refused") {
    const Index n = 10;
    const auto M = erdos_renyi(n, 0.5, 9);
    auto params = leader_params(n, {0}, 1.0);  // |eta| = 1 breaks Assumption 2
    const Matrix X = draw_design(n, 1, 10);
    CHECK_THROWS_AS(simulate_base(M, params, X, 11), std::invalid_argument);

    // ring of 5 leaders at eta = 0.5 puts an eigenvalue exactly at 1
    auto ring = embed_leader_block(erdos_renyi(20, 0.1, 12), ring_block(5));
    auto ring_params = leader_params(20, {0, 1, 2, 3, 4}, 0.5);
    CHECK_THROWS_AS(simulate_base(ring, ring_params, draw_design(20, 1, 13), 14),
                    SimulationError);
}

TEST_CASE("seed isolation: the seed changes the noise, not the system") {
    const Index n = 15;
    const auto M = erdos_renyi(n, 0.3, 21);
    const auto params = leader_params(n, {0, 1}, 0.4);
    const Matrix X = draw_design(n, 1, 22);
    Vector eps_a, eps_b;
    const Vector Da = simulate_base(M, params, X, 100, &eps_a);
    const Vector Db = simulate_base(M, params, X, 101, &eps_b);
    CHECK(eps_a != eps_b);
    // same system matrix: the noise-free parts agree
    const Matrix sys = Matrix::Identity(n, n) - col_scale(M, params.eta0);
    const Vector base_a = Da - sys.fullPivLu().solve(eps_a);
    const Vector base_b = Db - sys.fullPivLu().solve(eps_b);
    CHECK((base_a - base_b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("simulate_cliques") {
    const Index n = 25;
    const auto M = erdos_renyi(n, 0.15, 31);
    const Matrix X = draw_design(n, 1, 32);

    SUBCASE("gamma = 0 matches simulate_base under the same seed") {
        auto params = leader_params(n, {0, 1}, 0.4);
        const Vector base = simulate_base(M, params, X, 33);
        params.gamma0 = 0.0;
        const Vector cliq = simulate_cliques(M, params, X, 33);
        CHECK(base == cliq);
    }
    SUBCASE("eta = 0 reduces to the classical SAR draw") {
        auto params = leader_params(n, {}, 0.0);
        params.gamma0 = 0.05;
        Vector eps;
        const Vector D = simulate_cliques(M, params, X, 34, &eps);
        const Matrix sys = Matrix::Identity(n, n) - 0.05 * M.dense();
        const Vector direct = sys.fullPivLu().solve(X * params.beta0 + eps);
        CHECK((D - direct).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("structural identity") {
        auto params = leader_params(n, {0, 1, 2}, 0.3);
        params.gamma0 = 0.05;
        Vector eps;
        const Vector D = simulate_cliques(M, params, X, 35, &eps);
        const Vector resid = D - col_scale(M, D) * params.eta0 - 0.05 * (M.dense() * D) -
                             X * params.beta0 - eps;
        CHECK(resid.cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + D.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("simulate_multinet") {
    const Index n = 25;
    MultiNetwork multi;
    multi.networks = {erdos_renyi(n, 0.15, 41), erdos_renyi(n, 0.15, 42)};
    multi.labels = {"a", "b"};
    const Matrix X = draw_design(n, 1, 43);

    SUBCASE("q = 1 matches simulate_base") {
        MultiNetwork single;
        single.networks = {multi.networks[0]};
        single.labels = {"a"};
        auto params = leader_params(n, {0, 1}, 0.4);
        params.eta0_multi = std::vector<Vector>{params.eta0};
        const Vector a = simulate_multinet(single, params, X, 44);
        const Vector b = simulate_base(multi.networks[0], params, X, 44);
        CHECK(a == b);
    }
    SUBCASE("an all-zero network is inert") {
        auto params = leader_params(n, {0, 1}, 0.4);
        params.eta0_multi = std::vector<Vector>{params.eta0, Vector::Zero(n)};
        const Vector a = simulate_multinet(multi, params, X, 45);
        const Vector b = simulate_base(multi.networks[0], params, X, 45);
        CHECK(a == b);
    }
    SUBCASE("permuting the irrelevant network's edges leaves D unchanged") {
        auto params = leader_params(n, {0, 1}, 0.4);
        params.eta0_multi = std::vector<Vector>{params.eta0, Vector::Zero(n)};
        const Vector before = simulate_multinet(multi, params, X, 46);
        MultiNetwork permuted = multi;
        permuted.networks[1] = erdos_renyi(n, 0.15, 999);  // different irrelevant network
        const Vector after = simulate_multinet(permuted, params, X, 46);
        CHECK(before == after);
    }
    SUBCASE("structural identity") {
        auto params = leader_params(n, {0, 1}, 0.3);
        Vector eta2 = Vector::Zero(n);
        eta2[5] = 0.2;
        params.eta0_multi = std::vector<Vector>{params.eta0, eta2};
        Vector eps;
        const Vector D = simulate_multinet(multi, params, X, 47, &eps);
        const Vector resid = D - col_scale(multi.networks[0], D) * params.eta0 -
                             col_scale(multi.networks[1], D) * eta2 - X * params.beta0 - eps;
        CHECK(resid.cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + D.cwiseAbs().maxCoeff()));
    }
    SUBCASE("invertibility bound enforced") {
        auto params = leader_params(n, {0}, 0.6);
        Vector eta2 = Vector::Zero(n);
        eta2[1] = 0.5;  // 0.6 + 0.5 >= 1
        params.eta0_multi = std::vector<Vector>{params.eta0, eta2};
        CHECK_THROWS_AS(simulate_multinet(multi, params, X, 48), std::invalid_argument);
    }
}

TEST_CASE("draw_design: reproducibility and moments") {
    CHECK(draw_design(50, 2, 7) == draw_design(50, 2, 7));
    CHECK(draw_design(50, 2, 7) != draw_design(50, 2, 8));

    const Index n = 10'000;
    const Matrix X = draw_design(n, 1, 1234);
    const double mean = X.col(0).mean();
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    const double var = (X.col(0).array() - mean).square().sum() / (n - 1);
    CHECK(var > 0.9);
    CHECK(var < 1.1);
}

TEST_CASE("uniform noise law matches the requested variance") {
    const Index n = 50'000;
    const Vector eps = draw_noise(n, 2.0, NoiseLaw::uniform, 99);
    const double var = (eps.array() - eps.mean()).square().sum() / (n - 1);
    CHECK(var == doctest::Approx(4.0).epsilon(0.05));
    CHECK(eps.cwiseAbs().maxCoeff() <= std::sqrt(3.0) * 2.0);
}
