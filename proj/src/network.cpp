#include "heenet/network.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "heenet/rng.hpp"

namespace heenet {

AdjacencyMatrix::AdjacencyMatrix(Matrix entries, bool symmetric)
    : m_(std::move(entries)), symmetric_(symmetric) {
    if (m_.rows() != m_.cols()) {
        throw std::invalid_argument("adjacency: matrix not square");
    }
    for (Index i = 0; i < m_.rows(); ++i) {
        if (m_(i, i) != 0.0) {
            throw std::invalid_argument("adjacency: nonzero diagonal");
        }
        for (Index j = 0; j < m_.cols(); ++j) {
            if (m_(i, j) != 0.0 && m_(i, j) != 1.0) {
                throw std::invalid_argument("adjacency: entries must be 0 or 1");
            }
            if (symmetric_ && m_(i, j) != m_(j, i)) {
                throw std::invalid_argument("adjacency: symmetry violated");
            }
        }
    }
}

Index AdjacencyMatrix::edge_count() const {
    const double s = m_.sum();
    return symmetric_ ? static_cast<Index>(s / 2.0 + 0.5) : static_cast<Index>(s + 0.5);
}

Index AdjacencyMatrix::degree(Index i) const {
    return static_cast<Index>(m_.row(i).sum() + 0.5);
}

std::vector<Index> AdjacencyMatrix::isolated_nodes() const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i) {
        if (m_.row(i).sum() == 0.0 && m_.col(i).sum() == 0.0) out.push_back(i);
    }
    return out;
}

bool AdjacencyMatrix::connected() const {
    const Index n = size();
    if (n == 0) return true;
    std::vector<char> seen(n, 0);
    std::vector<Index> stack{0};
    seen[0] = 1;
    Index count = 1;
    while (!stack.empty()) {
        const Index v = stack.back();
        stack.pop_back();
        for (Index j = 0; j < n; ++j) {
            if (!seen[j] && (m_(v, j) != 0.0 || m_(j, v) != 0.0)) {
                seen[j] = 1;
                ++count;
                stack.push_back(j);
            }
        }
    }
    return count == n;
}

void MultiNetwork::validate() const {
    if (networks.size() != labels.size()) {
        throw std::invalid_argument("multinetwork: labels/networks size mismatch");
    }
    std::set<std::string> uniq(labels.begin(), labels.end());
    if (uniq.size() != labels.size()) {
        throw std::invalid_argument("multinetwork: duplicate labels");
    }
    for (const auto& net : networks) {
        if (net.size() != size()) {
            throw std::invalid_argument("multinetwork: node counts differ");
        }
    }
}

AdjacencyMatrix erdos_renyi(Index n, double p, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("erdos_renyi: n must be >= 1");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("erdos_renyi: p outside [0,1]");
    Rng rng(seed);
    Matrix m = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (rng.uniform() < p) {
                m(i, j) = 1.0;
                m(j, i) = 1.0;
            }
        }
    }
    return AdjacencyMatrix(std::move(m), true);
}

AdjacencyMatrix watts_strogatz(Index n, Index mean_degree, double omega, std::uint64_t seed) {
    if (mean_degree % 2 != 0 || mean_degree <= 0 || mean_degree >= n) {
        throw std::invalid_argument("watts_strogatz: mean_degree must be even, positive and < n");
    }
    if (omega < 0.0 || omega > 1.0) {
        throw std::invalid_argument("watts_strogatz: omega outside [0,1]");
    }
    Rng rng(seed);
    Matrix m = Matrix::Zero(n, n);
    const Index half = mean_degree / 2;
    for (Index i = 0; i < n; ++i) {
        for (Index d = 1; d <= half; ++d) {
            const Index j = (i + d) % n;
            m(i, j) = 1.0;
            m(j, i) = 1.0;
        }
    }
    // Rewire each lattice edge with probability omega. The pair (i, d)
    // indexes every lattice edge exactly once, wrap-around included.
    for (Index i = 0; i < n; ++i) {
        for (Index d = 1; d <= half; ++d) {
            const Index j = (i + d) % n;
            if (m(i, j) == 0.0) continue;      // already rewired away
            if (rng.uniform() >= omega) continue;
            std::vector<Index> candidates;
            for (Index k = 0; k < n; ++k) {
                if (k != i && m(i, k) == 0.0) candidates.push_back(k);
            }
            if (candidates.empty()) continue;  // keep the edge
            const Index k = candidates[rng.below(candidates.size())];
            m(i, j) = 0.0;
            m(j, i) = 0.0;
            m(i, k) = 1.0;
            m(k, i) = 1.0;
        }
    }
    return AdjacencyMatrix(std::move(m), true);
}

Matrix col_scale(const Matrix& M, const Vector& v) {
    if (M.cols() != v.size()) throw std::invalid_argument("col_scale: dimension mismatch");
    return M * v.asDiagonal();
}

Matrix col_scale(const AdjacencyMatrix& M, const Vector& v) {
    return col_scale(M.dense(), v);
}

Matrix ring_block(Index s) {
    Matrix b = Matrix::Zero(s, s);
    if (s == 2) {
        b(0, 1) = b(1, 0) = 1.0;
        return b;
    }
    for (Index i = 0; i + 1 < s; ++i) {
        b(i, i + 1) = b(i + 1, i) = 1.0;
    }
    if (s >= 3) b(0, s - 1) = b(s - 1, 0) = 1.0;
    return b;
}

Matrix path_block(Index s) {
    Matrix b = Matrix::Zero(s, s);
    for (Index i = 0; i + 1 < s; ++i) {
        b(i, i + 1) = b(i + 1, i) = 1.0;
    }
    return b;
}

AdjacencyMatrix embed_leader_block(const AdjacencyMatrix& M, const Matrix& block) {
    const Index s = block.rows();
    std::vector<Index> nodes(s);
    for (Index i = 0; i < s; ++i) nodes[i] = i;
    return embed_block_at(M, nodes, block);
}

AdjacencyMatrix embed_block_at(const AdjacencyMatrix& M, const std::vector<Index>& nodes,
                               const Matrix& block) {
    const Index s = block.rows();
    if (block.cols() != s || static_cast<Index>(nodes.size()) != s || s > M.size()) {
        throw std::invalid_argument("embed_block: bad block shape");
    }
    for (Index i = 0; i < s; ++i) {
        if (block(i, i) != 0.0) {
            throw std::invalid_argument("embed_block: block has nonzero diagonal");
        }
        if (M.symmetric()) {
            for (Index j = 0; j < s; ++j) {
                if (block(i, j) != block(j, i)) {
                    throw std::invalid_argument("embed_block: block not symmetric");
                }
            }
        }
    }
    Matrix m = M.dense();
    for (Index i = 0; i < s; ++i) {
        for (Index j = 0; j < s; ++j) {
            m(nodes[i], nodes[j]) = block(i, j);
        }
    }
    return AdjacencyMatrix(std::move(m), M.symmetric());
}

RankCheck check_instrument_rank(const AdjacencyMatrix& M, const Matrix& X,
                                const std::vector<Index>& S) {
    const Index n = M.size();
    const Index k = X.cols();
    if (X.rows() != n) throw std::invalid_argument("check_instrument_rank: X rows != n");
    if (S.empty()) throw std::invalid_argument("check_instrument_rank: empty S");
    if (static_cast<Index>(S.size()) * k + k > n) {
        throw std::invalid_argument("check_instrument_rank: |S|*k + k exceeds n");
    }
    {
        Eigen::JacobiSVD<Matrix> xsvd(X);
        const auto& sv = xsvd.singularValues();
        if (sv.size() == 0 || sv(sv.size() - 1) <= 1e-10 * sv(0)) {
            throw std::domain_error("check_instrument_rank: covariate matrix X is rank-deficient");
        }
    }
    Matrix inst(n, static_cast<Index>(S.size()) * k);
    Index c = 0;
    for (Index col = 0; col < k; ++col) {
        const Matrix MX = col_scale(M, X.col(col));
        for (Index j : S) inst.col(c++) = MX.col(j);
    }
    const Matrix W_inst = project_out(X, inst);
    Eigen::JacobiSVD<Matrix> svd(W_inst);
    RankCheck out;
    out.largest_sv = svd.singularValues()(0);
    out.smallest_sv = svd.singularValues()(svd.singularValues().size() - 1);
    out.full_rank = out.smallest_sv > 1e-8 * out.largest_sv;
    return out;
}

double irrepresentable_stat(const AdjacencyMatrix& M, const Matrix& X,
                            const std::vector<Index>& S, const Vector& eta0,
                            const Vector& beta0) {
    const Index n = M.size();
    const std::size_t s = S.size();
    if (s == 0 || s > 20) {
        throw std::invalid_argument("irrepresentable_stat: |S| must be in [1, 20]");
    }
    const Matrix sys = Matrix::Identity(n, n) - col_scale(M, eta0);
    Eigen::PartialPivLU<Matrix> lu(sys);
    if (lu.rcond() < 1e-12) {
        throw std::domain_error("irrepresentable_stat: (I - M . eta0) numerically singular");
    }
    const Vector f = lu.solve(X * beta0);

    const Matrix WM = project_out(X, M.dense());
    const Matrix Sigma = M.dense().transpose() * WM / static_cast<double>(n);

    std::vector<char> in_S(n, 0);
    for (Index j : S) in_S[j] = 1;
    std::vector<Index> Sc;
    for (Index j = 0; j < n; ++j) {
        if (!in_S[j]) Sc.push_back(j);
    }
    if (Sc.empty()) return 0.0;

    Matrix S11(s, s), S21(Sc.size(), s);
    for (std::size_t a = 0; a < s; ++a) {
        for (std::size_t b = 0; b < s; ++b) S11(a, b) = Sigma(S[a], S[b]);
        for (std::size_t b = 0; b < Sc.size(); ++b) S21(b, a) = Sigma(Sc[b], S[a]);
    }
    Eigen::FullPivLU<Matrix> s11lu(S11);
    if (!s11lu.isInvertible()) {
        throw std::domain_error("irrepresentable_stat: Sigma_11 singular");
    }
    for (std::size_t a = 0; a < s; ++a) {
        if (f[S[a]] == 0.0) {
            throw std::domain_error("irrepresentable_stat: zero f entry on S");
        }
    }

    Matrix T = S21 * s11lu.inverse();  // |Sc| x s
    for (std::size_t b = 0; b < Sc.size(); ++b) T.row(b) *= f[Sc[b]];
    for (std::size_t a = 0; a < s; ++a) T.col(a) /= f[S[a]];

    // max over u in {-1,1}^s of ||T u||_inf; exact because the objective is a
    // max of |affine| functions of u, attained at a vertex. For each row the
    // maximizing vertex is the row's sign pattern, so the max is the largest
    // absolute row sum.
    double best = 0.0;
    for (Index b = 0; b < T.rows(); ++b) best = std::max(best, T.row(b).cwiseAbs().sum());
    return best;
}

void write_edge_list(const std::filesystem::path& path, const AdjacencyMatrix& M) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_edge_list: cannot open " + path.string());
    out << "src,dst\n";
    for (Index i = 0; i < M.size(); ++i) {
        for (Index j = i + 1; j < M.size(); ++j) {
            if (M(i, j) != 0.0) out << i << "," << j << "\n";
        }
    }
}

AdjacencyMatrix read_edge_list(const std::filesystem::path& path, Index n, Index* duplicates) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_edge_list: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("read_edge_list: empty file " + path.string());
    }
    Matrix m = Matrix::Zero(n, n);
    Index dups = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b)) {
            throw std::runtime_error("read_edge_list: malformed row at line " +
                                     std::to_string(lineno) + " in " + path.string());
        }
        long src, dst;
        try {
            src = std::stol(a);
            dst = std::stol(b);
        } catch (const std::exception&) {
            throw std::runtime_error("read_edge_list: non-integer id at line " +
                                     std::to_string(lineno) + " in " + path.string());
        }
        if (src < 0 || dst < 0 || src >= n || dst >= n) {
            throw std::runtime_error("read_edge_list: node id out of range at line " +
                                     std::to_string(lineno) + " in " + path.string());
        }
        if (src == dst) {
            throw std::runtime_error("read_edge_list: self loop at line " +
                                     std::to_string(lineno) + " in " + path.string());
        }
        if (m(src, dst) != 0.0) {
            ++dups;
        } else {
            m(src, dst) = 1.0;
            m(dst, src) = 1.0;
        }
    }
    if (duplicates) *duplicates = dups;
    return AdjacencyMatrix(std::move(m), true);
}

void write_network_manifest(const std::filesystem::path& path, const MultiNetwork& multi,
                            const std::vector<std::string>& files) {
    if (files.size() != multi.networks.size()) {
        throw std::invalid_argument("write_network_manifest: file list size mismatch");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_network_manifest: cannot open " + path.string());
    out << "label,path\n";
    for (std::size_t i = 0; i < files.size(); ++i) {
        out << multi.labels[i] << "," << files[i] << "\n";
    }
}

MultiNetwork read_network_manifest(const std::filesystem::path& path, Index n) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_network_manifest: cannot open " + path.string());
    std::string line;
    std::getline(in, line);  // header
    MultiNetwork multi;
    const auto dir = path.parent_path();
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error("read_network_manifest: malformed row in " + path.string());
        }
        std::string label = line.substr(0, comma);
        std::string file = line.substr(comma + 1);
        if (!file.empty() && file.back() == '\r') file.pop_back();
        multi.labels.push_back(label);
        multi.networks.push_back(read_edge_list(dir / file, n));
    }
    multi.validate();
    return multi;
}

}  // namespace heenet
