#include "heenet/dataset.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "heenet/rng.hpp"

namespace heenet {

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_csv_row(line));
    }
    if (rows.empty()) throw std::runtime_error("empty file " + path.string());
    return rows;
}

double to_number(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("non-numeric value '" + s + "' in " + where);
    }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open manifest " + manifest_path.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("manifest parse error: " + std::string(e.what()));
    }
    const auto dir = manifest_path.parent_path();

    Dataset data;
    data.binary_outcomes = manifest.value("binary_outcomes", false);

    // outcomes define the node order
    const auto outcome_rows = read_csv(dir / manifest.at("outcomes").get<std::string>());
    if (outcome_rows.front().size() != 2) {
        throw std::runtime_error("outcomes CSV must have columns id,outcome");
    }
    std::map<std::string, Index> id_of;
    std::vector<double> outcomes;
    for (std::size_t rix = 1; rix < outcome_rows.size(); ++rix) {
        const auto& row = outcome_rows[rix];
        if (row.size() != 2) throw std::runtime_error("ragged outcomes row");
        if (id_of.count(row[0])) throw std::runtime_error("duplicate node id " + row[0]);
        id_of[row[0]] = static_cast<Index>(data.node_ids.size());
        data.node_ids.push_back(row[0]);
        const double v = to_number(row[1], "outcomes");
        if (data.binary_outcomes && v != 0.0 && v != 1.0) {
            throw std::runtime_error("non-binary outcome for id " + row[0]);
        }
        outcomes.push_back(v);
    }
    const Index n = static_cast<Index>(outcomes.size());
    data.D = Eigen::Map<const Vector>(outcomes.data(), n);

    // covariates
    const auto cov_rows = read_csv(dir / manifest.at("covariates").get<std::string>());
    const auto& header = cov_rows.front();
    if (header.size() < 2) throw std::runtime_error("covariates CSV needs id plus columns");
    const Index k = static_cast<Index>(header.size()) - 1;
    for (Index c = 0; c < k; ++c) data.x_labels.push_back(header[c + 1]);
    data.X.resize(n, k);
    std::vector<bool> filled(n, false);
    for (std::size_t rix = 1; rix < cov_rows.size(); ++rix) {
        const auto& row = cov_rows[rix];
        if (static_cast<Index>(row.size()) != k + 1) {
            throw std::runtime_error("ragged covariates row for id " + row[0]);
        }
        const auto it = id_of.find(row[0]);
        if (it == id_of.end()) throw std::runtime_error("covariates: unknown id " + row[0]);
        for (Index c = 0; c < k; ++c) data.X(it->second, c) = to_number(row[c + 1], "covariates");
        filled[it->second] = true;
    }
    for (Index i = 0; i < n; ++i) {
        if (!filled[i]) throw std::runtime_error("missing covariates for id " + data.node_ids[i]);
    }

    // networks: reported-by-either symmetrization, duplicates merged
    for (const auto& net : manifest.at("networks")) {
        const std::string label = net.at("label");
        const auto rows = read_csv(dir / net.at("path").get<std::string>());
        Matrix m = Matrix::Zero(n, n);
        for (std::size_t rix = 1; rix < rows.size(); ++rix) {
            const auto& row = rows[rix];
            if (row.size() != 2) throw std::runtime_error("ragged edge row in " + label);
            const auto a = id_of.find(row[0]);
            const auto b = id_of.find(row[1]);
            if (a == id_of.end()) throw std::runtime_error("edge references unknown id " + row[0]);
            if (b == id_of.end()) throw std::runtime_error("edge references unknown id " + row[1]);
            if (a->second == b->second) {
                throw std::runtime_error("self loop for id " + row[0] + " in " + label);
            }
            if (m(a->second, b->second) != 0.0) {
                ++data.duplicate_edges;
            } else {
                m(a->second, b->second) = 1.0;
                m(b->second, a->second) = 1.0;
            }
        }
        data.networks.networks.emplace_back(std::move(m), true);
        data.networks.labels.push_back(label);
    }
    data.networks.validate();
    return data;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
    std::filesystem::create_directories(dir);
    const Index n = data.n();
    {
        std::ofstream out(dir / "outcomes.csv");
        out << "id,outcome\n";
        for (Index i = 0; i < n; ++i) {
            char buf[40];
            const auto res = std::to_chars(buf, buf + sizeof buf, data.D[i]);
            out << data.node_ids[i] << "," << std::string(buf, res.ptr) << "\n";
        }
    }
    {
        std::ofstream out(dir / "covariates.csv");
        out << "id";
        for (const auto& l : data.x_labels) out << "," << l;
        out << "\n";
        for (Index i = 0; i < n; ++i) {
            out << data.node_ids[i];
            for (Index c = 0; c < data.X.cols(); ++c) {
                char buf[40];
                const auto res = std::to_chars(buf, buf + sizeof buf, data.X(i, c));
                out << "," << std::string(buf, res.ptr);
            }
            out << "\n";
        }
    }
    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["outcomes"] = "outcomes.csv";
    manifest["covariates"] = "covariates.csv";
    manifest["binary_outcomes"] = data.binary_outcomes;
    manifest["networks"] = nlohmann::json::array();
    for (std::size_t j = 0; j < data.networks.networks.size(); ++j) {
        const std::string file = "network_" + data.networks.labels[j] + ".csv";
        std::ofstream out(dir / file);
        out << "src,dst\n";
        const auto& M = data.networks.networks[j];
        for (Index a = 0; a < n; ++a) {
            for (Index b = a + 1; b < n; ++b) {
                if (M(a, b) != 0.0) out << data.node_ids[a] << "," << data.node_ids[b] << "\n";
            }
        }
        manifest["networks"].push_back({{"label", data.networks.labels[j]}, {"path", file}});
    }
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

namespace {

Counterfactual restricted_solve(const Matrix& A, const Vector& xb, Index n,
                                const std::vector<Index>& leaders, const EpsilonPolicy& policy) {
    std::set<Index> lead(leaders.begin(), leaders.end());
    for (Index j : leaders) {
        if (j < 0 || j >= n) throw std::invalid_argument("counterfactual: leader out of range");
    }
    std::vector<Index> followers;
    for (Index i = 0; i < n; ++i) {
        if (!lead.count(i)) followers.push_back(i);
    }
    const Index nf = static_cast<Index>(followers.size());

    Matrix Aff(nf, nf);
    Vector leader_inflow = Vector::Zero(nf);
    for (Index a = 0; a < nf; ++a) {
        for (Index b = 0; b < nf; ++b) Aff(a, b) = A(followers[a], followers[b]);
        for (Index j : leaders) leader_inflow[a] += A(followers[a], j);  // D_L fixed at 1
    }
    const Matrix sys = Matrix::Identity(nf, nf) - Aff;
    Eigen::PartialPivLU<Matrix> lu(sys);
    if (lu.rcond() < 1e-12) {
        throw std::domain_error("counterfactual: restricted system singular");
    }

    Vector base = leader_inflow;
    for (Index a = 0; a < nf; ++a) base[a] += xb[followers[a]];

    Counterfactual out;
    out.follower_ids = followers;
    if (policy.kind == EpsilonPolicy::Kind::zero || nf == 0) {
        out.follower_outcomes = lu.solve(base);
        double rate = 0.0;
        for (Index a = 0; a < nf; ++a) {
            rate += std::clamp(out.follower_outcomes[a], 0.0, 1.0);
        }
        out.participation_rate = nf > 0 ? rate / static_cast<double>(nf) : 0.0;
    } else {
        Rng rng(policy.seed);
        const double sd = std::sqrt(policy.sigma2);
        Vector mean = Vector::Zero(nf);
        double rate = 0.0;
        for (int d = 0; d < policy.draws; ++d) {
            Vector rhs = base;
            for (Index a = 0; a < nf; ++a) rhs[a] += sd * rng.normal();
            const Vector sol = lu.solve(rhs);
            mean += sol;
            double draw_rate = 0.0;
            for (Index a = 0; a < nf; ++a) draw_rate += std::clamp(sol[a], 0.0, 1.0);
            rate += nf > 0 ? draw_rate / static_cast<double>(nf) : 0.0;
        }
        out.follower_outcomes = mean / static_cast<double>(policy.draws);
        out.participation_rate = rate / static_cast<double>(policy.draws);
    }
    return out;
}

}  // namespace

Counterfactual counterfactual_participation(const FitResult& fit, const AdjacencyMatrix& M,
                                            const Matrix& X, const std::vector<Index>& leaders,
                                            const EpsilonPolicy& policy) {
    const Index n = M.size();
    if (fit.eta_hat.size() != n) {
        throw std::invalid_argument("counterfactual: fit does not match network");
    }
    Matrix A = col_scale(M, fit.eta_hat);
    if (fit.gamma_hat) A += *fit.gamma_hat * M.dense();
    return restricted_solve(A, X * fit.beta_hat, n, leaders, policy);
}

Counterfactual counterfactual_participation(const FitResult& fit, const MultiNetwork& multi,
                                            const Matrix& X, const std::vector<Index>& leaders,
                                            const EpsilonPolicy& policy) {
    const Index n = multi.size();
    const Index q = multi.count();
    if (fit.eta_hat.size() != n * q) {
        throw std::invalid_argument("counterfactual: fit does not match networks");
    }
    Matrix A = Matrix::Zero(n, n);
    for (Index j = 0; j < q; ++j) {
        A += col_scale(multi.networks[j], fit.eta_hat.segment(j * n, n));
    }
    return restricted_solve(A, X * fit.beta_hat, n, leaders, policy);
}

}  // namespace heenet
