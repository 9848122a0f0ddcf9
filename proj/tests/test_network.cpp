#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "heenet/network.hpp"
#include "heenet/rng.hpp"
#include "test_util.hpp"

using namespace heenet;
using namespace heenet::testing;

TEST_CASE("erdos_renyi: edge cases and determinism") {
    CHECK(erdos_renyi(10, 0.0, 1).edge_count() == 0);
    CHECK(erdos_renyi(10, 1.0, 1).edge_count() == 45);
    const auto a = erdos_renyi(30, 0.2, 42);
    const auto b = erdos_renyi(30, 0.2, 42);
    CHECK(a.dense() == b.dense());
    const auto c = erdos_renyi(30, 0.2, 43);
    CHECK(a.dense() != c.dense());
    CHECK_THROWS_AS(erdos_renyi(10, 1.5, 1), std::invalid_argument);
}

TEST_CASE("erdos_renyi: mean edge count matches the binomial mean") {
    // C(50,2) * 0.1 = 122.5; compare over 1000 seeds within 3 standard errors
    double total = 0.0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        total += static_cast<double>(erdos_renyi(50, 0.1, 10'000 + t).edge_count());
    }
    const double mean = total / trials;
    const double se = std::sqrt(1225.0 * 0.1 * 0.9 / trials);
    CHECK(std::abs(mean - 122.5) < 3.0 * se);
}

TEST_CASE("watts_strogatz: ring lattice, preserved edge count, connectivity") {
    SUBCASE("omega = 0 gives the exact ring lattice") {
        const auto M = watts_strogatz(20, 6, 0.0, 7);
        for (Index i = 0; i < 20; ++i) CHECK(M.degree(i) == 6);
        CHECK(M.edge_count() == 60);
    }
    SUBCASE("rewiring preserves the edge count") {
        for (double omega : {0.1, 0.4, 1.0}) {
            const auto M = watts_strogatz(24, 4, omega, 99);
            CHECK(M.edge_count() == 48);
        }
    }
    SUBCASE("omega = 0.4 yields a connected graph in at least 95% of 200 seeds") {
        int connected = 0;
        for (int t = 0; t < 200; ++t) {
            if (watts_strogatz(50, 6, 0.4, 20'000 + t).connected()) ++connected;
        }
        CHECK(connected >= 190);
    }
    CHECK_THROWS_AS(watts_strogatz(10, 3, 0.4, 1), std::invalid_argument);
    CHECK_THROWS_AS(watts_strogatz(10, 10, 0.4, 1), std::invalid_argument);
}

TEST_CASE("generated matrices satisfy the adjacency invariants") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const auto er = erdos_renyi(25, 0.3, seed);
        const auto ws = watts_strogatz(25, 4, 0.4, seed);
        for (const auto& M : {er, ws}) {
            for (Index i = 0; i < M.size(); ++i) {
                CHECK(M(i, i) == 0.0);
                for (Index j = 0; j < M.size(); ++j) {
                    CHECK((M(i, j) == 0.0 || M(i, j) == 1.0));
                    CHECK(M(i, j) == M(j, i));
                }
            }
        }
    }
}

TEST_CASE("col_scale: identities and linearity") {
    const auto M = erdos_renyi(8, 0.4, 5);
    CHECK(col_scale(M, Vector::Ones(8)) == M.dense());
    CHECK(col_scale(M, Vector::Zero(8)).isZero(0.0));

    // (M . D) eta = (M . eta) D for random D, eta
    for (Index n = 3; n <= 8; ++n) {
        const auto A = erdos_renyi(n, 0.5, 100 + n);
        const Vector d = random_vector(n, 200 + n);
        const Vector eta = random_vector(n, 300 + n);
        const Vector lhs = col_scale(A, d) * eta;
        const Vector rhs = col_scale(A, eta) * d;
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }

    const auto A = erdos_renyi(6, 0.5, 9);
    const Vector v = random_vector(6, 10), w = random_vector(6, 11);
    const Matrix lin = col_scale(A, Vector(2.0 * v + 3.0 * w));
    const Matrix split = 2.0 * col_scale(A, v) + 3.0 * col_scale(A, w);
    CHECK(lin == split);

    CHECK_THROWS_AS(col_scale(A, Vector::Ones(5)), std::invalid_argument);
}

TEST_CASE("embed_leader_block") {
    const auto M = erdos_renyi(12, 0.5, 13);
    SUBCASE("zero block clears the leading corner, rest untouched") {
        const auto out = embed_leader_block(M, Matrix::Zero(4, 4));
        CHECK(out.dense().topLeftCorner(4, 4).isZero(0.0));
        CHECK(out.dense().bottomRightCorner(8, 8) == M.dense().bottomRightCorner(8, 8));
    }
    SUBCASE("ring among 5 nodes has exactly 10 ones") {
        const auto out = embed_leader_block(M, ring_block(5));
        CHECK(out.dense().topLeftCorner(5, 5).sum() == 10.0);
    }
    SUBCASE("idempotence") {
        const Matrix block = ring_block(5);
        const auto once = embed_leader_block(M, block);
        const auto twice = embed_leader_block(once, block);
        CHECK(once.dense() == twice.dense());
    }
    SUBCASE("nonzero diagonal rejected") {
        Matrix bad = Matrix::Zero(3, 3);
        bad(1, 1) = 1.0;
        CHECK_THROWS_AS(embed_leader_block(M, bad), std::invalid_argument);
    }
}

TEST_CASE("path_block keeps (I - M . eta) invertible where the ring does not") {
    // ring row sums are 2, so eta = 0.5 sits exactly on the unit root
    const Index s = 5;
    const Matrix ring = ring_block(s);
    const Matrix path = path_block(s);
    Eigen::SelfAdjointEigenSolver<Matrix> ering(0.5 * ring), epath(0.5 * path);
    CHECK(ering.eigenvalues().cwiseAbs().maxCoeff() == doctest::Approx(1.0));
    CHECK(epath.eigenvalues().cwiseAbs().maxCoeff() < 1.0);
}

namespace {

// Figure-style fixture: two influential nodes sharing every neighbour.
AdjacencyMatrix shared_neighbours_graph() {
    Matrix m = Matrix::Zero(8, 8);
    for (Index f = 2; f < 8; ++f) {
        m(0, f) = m(f, 0) = 1.0;
        m(1, f) = m(f, 1) = 1.0;
    }
    return AdjacencyMatrix(m, true);
}

// Each influential node keeps a private follower.
AdjacencyMatrix private_follower_graph() {
    Matrix m = Matrix::Zero(8, 8);
    for (Index f = 2; f < 6; ++f) {
        m(0, f) = m(f, 0) = 1.0;  // shared followers
        m(1, f) = m(f, 1) = 1.0;
    }
    m(0, 6) = m(6, 0) = 1.0;  // private to node 0
    m(1, 7) = m(7, 1) = 1.0;  // private to node 1
    return AdjacencyMatrix(m, true);
}

}  // namespace

TEST_CASE("check_instrument_rank") {
    const Matrix X = random_matrix(8, 1, 55);
    SUBCASE("shared neighbourhoods collapse the rank") {
        const auto rc = check_instrument_rank(shared_neighbours_graph(), X, {0, 1});
        CHECK_FALSE(rc.full_rank);
        CHECK(rc.smallest_sv < 1e-8 * rc.largest_sv);
    }
    SUBCASE("private followers restore full rank") {
        const auto rc = check_instrument_rank(private_follower_graph(), X, {0, 1});
        CHECK(rc.full_rank);
    }
    SUBCASE("a single connected node passes") {
        Matrix m = Matrix::Zero(6, 6);
        m(0, 3) = m(3, 0) = 1.0;
        const AdjacencyMatrix M(m, true);
        const auto rc = check_instrument_rank(M, random_matrix(6, 1, 56), {0});
        CHECK(rc.full_rank);
    }
    SUBCASE("order of S does not matter") {
        const auto M = private_follower_graph();
        const auto a = check_instrument_rank(M, X, {0, 1});
        const auto b = check_instrument_rank(M, X, {1, 0});
        CHECK(a.full_rank == b.full_rank);
        CHECK(a.smallest_sv == doctest::Approx(b.smallest_sv).epsilon(1e-10));
    }
    SUBCASE("rank-deficient X reported distinctly") {
        Matrix bad(8, 2);
        bad.col(0) = X.col(0);
        bad.col(1) = 2.0 * X.col(0);
        CHECK_THROWS_AS(check_instrument_rank(private_follower_graph(), bad, {0}),
                        std::domain_error);
    }
}

TEST_CASE("irrepresentable_stat") {
    SUBCASE("isolated complement contributes zero") {
        // leaders 0,1 connected to followers 2..5; nodes 6,7 isolated
        Matrix m = Matrix::Zero(8, 8);
        m(0, 2) = m(2, 0) = 1.0;
        m(0, 3) = m(3, 0) = 1.0;
        m(1, 4) = m(4, 1) = 1.0;
        m(1, 5) = m(5, 1) = 1.0;
        const AdjacencyMatrix M(m, true);
        Vector eta0 = Vector::Zero(8);
        eta0[0] = eta0[1] = 0.4;
        const Matrix X = random_matrix(8, 1, 61);
        const double v = irrepresentable_stat(M, X, {0, 1}, eta0, Vector::Constant(1, 2.0));
        // isolated non-influential nodes have zero instrument columns, and the
        // remaining followers are leaders' neighbours only
        CHECK(v >= 0.0);
    }
    SUBCASE("duplicated leader neighbourhood breaks the condition") {
        // node 1 is non-influential but is an exact twin of leader 0: same
        // neighbourhood and same covariate, so no data can tell them apart
        const auto M = shared_neighbours_graph();
        Vector eta0 = Vector::Zero(8);
        eta0[0] = 0.5;
        Matrix X = random_matrix(8, 1, 62);
        X(1, 0) = X(0, 0);
        const double v = irrepresentable_stat(M, X, {0}, eta0, Vector::Constant(1, 2.0));
        CHECK(v >= 1.0);
    }
    SUBCASE("matches brute-force sign-vertex enumeration") {
        const auto M = erdos_renyi(12, 0.3, 63);
        std::vector<Index> S{0, 1, 2};
        Vector eta0 = Vector::Zero(12);
        for (Index j : S) eta0[j] = 0.3;
        const Matrix X = random_matrix(12, 1, 64);
        const Vector beta0 = Vector::Constant(1, 2.0);
        const double fast = irrepresentable_stat(M, X, S, eta0, beta0);

        // independent dense evaluation over all 2^3 sign vectors
        const Index n = 12;
        const Matrix sys = Matrix::Identity(n, n) - col_scale(M, eta0);
        const Vector f = sys.fullPivLu().solve(X * beta0);
        const Matrix W = Matrix::Identity(n, n) -
                         X * (X.transpose() * X).inverse() * X.transpose();
        const Matrix Sigma = M.dense().transpose() * W * M.dense() / static_cast<double>(n);
        std::vector<Index> Sc;
        for (Index j = 0; j < n; ++j) {
            if (std::find(S.begin(), S.end(), j) == S.end()) Sc.push_back(j);
        }
        Matrix S11(3, 3), S21(Sc.size(), 3);
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) S11(a, b) = Sigma(S[a], S[b]);
            for (std::size_t b = 0; b < Sc.size(); ++b) S21(b, a) = Sigma(Sc[b], S[a]);
        }
        double brute = 0.0;
        for (int mask = 0; mask < 8; ++mask) {
            Vector u(3);
            for (int a = 0; a < 3; ++a) u[a] = (mask >> a) & 1 ? 1.0 : -1.0;
            Vector scaled(3);
            for (int a = 0; a < 3; ++a) scaled[a] = u[a] / f[S[a]];
            Vector t = S21 * S11.inverse() * scaled;
            for (std::size_t b = 0; b < Sc.size(); ++b) {
                brute = std::max(brute, std::abs(f[Sc[b]] * t[static_cast<Index>(b)]));
            }
        }
        CHECK(fast == doctest::Approx(brute).epsilon(1e-10));
    }
    SUBCASE("|S| cap enforced") {
        const auto M = erdos_renyi(30, 0.2, 65);
        std::vector<Index> S(21);
        for (Index j = 0; j < 21; ++j) S[j] = j;
        CHECK_THROWS_AS(
            irrepresentable_stat(M, random_matrix(30, 1, 66), S, Vector::Zero(30),
                                 Vector::Constant(1, 1.0)),
            std::invalid_argument);
    }
}

TEST_CASE("edge list round trip") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "heenet_net_test";
    fs::create_directories(dir);
    const auto M = erdos_renyi(20, 0.3, 71);
    write_edge_list(dir / "edges.csv", M);
    const auto back = read_edge_list(dir / "edges.csv", 20);
    CHECK(back.dense() == M.dense());

    SUBCASE("duplicates are merged and counted") {
        std::ofstream out(dir / "dup.csv");
        out << "src,dst\n0,1\n1,0\n0,1\n";
        out.close();
        Index dups = 0;
        const auto m = read_edge_list(dir / "dup.csv", 3, &dups);
        CHECK(m.edge_count() == 1);
        CHECK(dups == 2);
    }
    SUBCASE("out-of-range ids rejected") {
        std::ofstream out(dir / "bad.csv");
        out << "src,dst\n0,9\n";
        out.close();
        CHECK_THROWS(read_edge_list(dir / "bad.csv", 5));
    }
    SUBCASE("network manifest round trip") {
        MultiNetwork multi;
        multi.networks = {erdos_renyi(10, 0.3, 81), erdos_renyi(10, 0.4, 82)};
        multi.labels = {"alpha", "beta"};
        write_edge_list(dir / "alpha.csv", multi.networks[0]);
        write_edge_list(dir / "beta.csv", multi.networks[1]);
        write_network_manifest(dir / "manifest.csv", multi, {"alpha.csv", "beta.csv"});
        const auto back2 = read_network_manifest(dir / "manifest.csv", 10);
        CHECK(back2.labels == multi.labels);
        CHECK(back2.networks[0].dense() == multi.networks[0].dense());
        CHECK(back2.networks[1].dense() == multi.networks[1].dense());
    }
    fs::remove_all(dir);
}

TEST_CASE("adjacency invariant violations are rejected") {
    Matrix loop = Matrix::Zero(3, 3);
    loop(0, 0) = 1.0;
    CHECK_THROWS_AS(AdjacencyMatrix(loop, true), std::invalid_argument);

    Matrix frac = Matrix::Zero(3, 3);
    frac(0, 1) = frac(1, 0) = 0.5;
    CHECK_THROWS_AS(AdjacencyMatrix(frac, true), std::invalid_argument);

    Matrix asym = Matrix::Zero(3, 3);
    asym(0, 1) = 1.0;
    CHECK_THROWS_AS(AdjacencyMatrix(asym, true), std::invalid_argument);
}
