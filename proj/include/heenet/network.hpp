#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "heenet/linalg.hpp"

namespace heenet {

// n x n binary adjacency with a zero diagonal. Stored dense as doubles so it
// plugs straight into the linear algebra.
class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;
    // Validates {0,1} entries, zero diagonal, and symmetry when flagged.
    AdjacencyMatrix(Matrix entries, bool symmetric);

    Index size() const { return m_.rows(); }
    const Matrix& dense() const { return m_; }
    bool symmetric() const { return symmetric_; }
    double operator()(Index i, Index j) const { return m_(i, j); }

    Index edge_count() const;
    Index degree(Index i) const;
    std::vector<Index> isolated_nodes() const;
    bool connected() const;

private:
    Matrix m_;
    bool symmetric_ = true;
};

struct MultiNetwork {
    std::vector<AdjacencyMatrix> networks;
    std::vector<std::string> labels;

    Index size() const { return networks.empty() ? 0 : networks.front().size(); }
    Index count() const { return static_cast<Index>(networks.size()); }
    void validate() const;
};

// Each unordered pair linked independently with probability p.
AdjacencyMatrix erdos_renyi(Index n, double p, std::uint64_t seed);

// Ring lattice with mean_degree/2 neighbours per side, then each edge (i,j),
// i<j, rewired with probability omega to a uniform non-neighbour of i. Edge
// count is preserved; a rewiring with no eligible target leaves the edge.
AdjacencyMatrix watts_strogatz(Index n, Index mean_degree, double omega, std::uint64_t seed);

// column scaling: C[i][j] = M[i][j] * v[j], i.e. M * diag(v)
Matrix col_scale(const Matrix& M, const Vector& v);
Matrix col_scale(const AdjacencyMatrix& M, const Vector& v);

// Symmetric ring among s nodes (each linked to two others); s x s.
Matrix ring_block(Index s);
// Symmetric path among s nodes; keeps (I - M . eta) invertible for any
// uniform eta in (-1, 1), which the ring does not.
Matrix path_block(Index s);

// Replace the leading s x s principal submatrix of M with `block`.
AdjacencyMatrix embed_leader_block(const AdjacencyMatrix& M, const Matrix& block);
// Same, at arbitrary node positions (block row/col c maps to nodes[c]).
AdjacencyMatrix embed_block_at(const AdjacencyMatrix& M, const std::vector<Index>& nodes,
                               const Matrix& block);

struct RankCheck {
    bool full_rank = false;
    double smallest_sv = 0.0;
    double largest_sv = 0.0;
};

// Whether W (M . X) restricted to columns S has full column rank, where
// W projects out X. Throws if X itself is rank-deficient.
RankCheck check_instrument_rank(const AdjacencyMatrix& M, const Matrix& X,
                                const std::vector<Index>& S);

// Irrepresentable-condition statistic: max over sign vertices u of
// ||diag(f_Sc) Sigma_21 Sigma_11^-1 diag(f_S)^-1 u||_inf with
// Sigma = (1/n) M' W M and f = (I - M . eta0)^-1 X beta0.
// Diagnostic for simulation designs where the truth is known; |S| <= 20.
double irrepresentable_stat(const AdjacencyMatrix& M, const Matrix& X,
                            const std::vector<Index>& S, const Vector& eta0,
                            const Vector& beta0);

// Edge-list CSV: header "src,dst", one row per undirected edge, 0-based ids.
void write_edge_list(const std::filesystem::path& path, const AdjacencyMatrix& M);
AdjacencyMatrix read_edge_list(const std::filesystem::path& path, Index n,
                               Index* duplicates = nullptr);

// Manifest: one "label,path" row per network (paths relative to the manifest).
void write_network_manifest(const std::filesystem::path& path, const MultiNetwork& multi,
                            const std::vector<std::string>& files);
MultiNetwork read_network_manifest(const std::filesystem::path& path, Index n);

}  // namespace heenet
