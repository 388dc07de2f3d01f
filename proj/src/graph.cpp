#include "iceseg/graph.hpp"

#include "iceseg/errors.hpp"
#include "iceseg/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace iceseg {

AdjacencyGraph AdjacencyGraph::from_edges(
    std::span<const std::pair<std::string, std::string>> edges, std::vector<std::string> unit_ids) {
    if (unit_ids.empty()) {
        throw DataError("adjacency: empty unit list");
    }
    AdjacencyGraph g;
    g.unit_ids_ = std::move(unit_ids);
    for (std::size_t i = 0; i < g.unit_ids_.size(); ++i) {
        if (!g.index_.emplace(g.unit_ids_[i], i).second) {
            throw DataError("adjacency: duplicate unit id '" + g.unit_ids_[i] + "'");
        }
    }
    std::vector<std::vector<int>> lists(g.unit_ids_.size());
    for (const auto &[a, b] : edges) {
        auto ia = g.index_.find(a);
        auto ib = g.index_.find(b);
        if (ia == g.index_.end()) {
            throw DataError("adjacency: unknown unit id '" + a + "'");
        }
        if (ib == g.index_.end()) {
            throw DataError("adjacency: unknown unit id '" + b + "'");
        }
        if (ia->second == ib->second) {
            throw DataError("adjacency: self-loop on unit '" + a + "'");
        }
        lists[ia->second].push_back(static_cast<int>(ib->second));
        lists[ib->second].push_back(static_cast<int>(ia->second));
    }
    g.finalize(std::move(lists));
    return g;
}

AdjacencyGraph AdjacencyGraph::from_index_edges(std::size_t n,
                                                std::span<const std::pair<int, int>> edges,
                                                std::vector<std::string> unit_ids) {
    if (unit_ids.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            unit_ids.push_back(std::to_string(i));
        }
    }
    if (unit_ids.size() != n) {
        throw std::invalid_argument("adjacency: unit id count does not match n");
    }
    std::vector<std::pair<std::string, std::string>> named;
    named.reserve(edges.size());
    for (const auto &[a, b] : edges) {
        if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
            throw DataError("adjacency: edge index out of range");
        }
        named.emplace_back(unit_ids[a], unit_ids[b]);
    }
    return from_edges(named, std::move(unit_ids));
}

void AdjacencyGraph::finalize(std::vector<std::vector<int>> lists) {
    offsets_.assign(1, 0);
    adjacency_.clear();
    for (auto &l : lists) {
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
        adjacency_.insert(adjacency_.end(), l.begin(), l.end());
        offsets_.push_back(adjacency_.size());
    }

    const std::size_t n = lists.size();
    component_.assign(n, -1);
    component_count_ = 0;
    std::vector<int> stack;
    for (std::size_t s = 0; s < n; ++s) {
        if (component_[s] >= 0) {
            continue;
        }
        component_[s] = component_count_;
        stack.push_back(static_cast<int>(s));
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int j : neighbors(i)) {
                if (component_[j] < 0) {
                    component_[j] = component_count_;
                    stack.push_back(j);
                }
            }
        }
        ++component_count_;
    }
}

bool AdjacencyGraph::has_edge(std::size_t i, std::size_t j) const {
    auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), static_cast<int>(j));
}

std::optional<std::size_t> AdjacencyGraph::index_of(const std::string &id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

bool AdjacencyGraph::has_isolated_unit() const noexcept {
    for (std::size_t i = 0; i < size(); ++i) {
        if (degree(i) == 0) {
            return true;
        }
    }
    return false;
}

std::vector<std::pair<int, int>> AdjacencyGraph::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(edge_count());
    for (std::size_t i = 0; i < size(); ++i) {
        for (int j : neighbors(i)) {
            if (static_cast<int>(i) < j) {
                out.emplace_back(static_cast<int>(i), j);
            }
        }
    }
    return out;
}

AdjacencyGraph build_graph(std::span<const std::pair<std::string, std::string>> edges,
                           std::vector<std::string> unit_ids) {
    return AdjacencyGraph::from_edges(edges, std::move(unit_ids));
}

AdjacencyGraph rook_lattice(int rows, int cols) {
    if (rows < 1 || cols < 1) {
        throw std::invalid_argument("rook_lattice: dimensions must be positive");
    }
    std::vector<std::string> ids;
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            ids.push_back("r" + std::to_string(r) + "c" + std::to_string(c));
            const int i = r * cols + c;
            if (c + 1 < cols) {
                edges.emplace_back(i, i + 1);
            }
            if (r + 1 < rows) {
                edges.emplace_back(i, i + cols);
            }
        }
    }
    const std::size_t n = ids.size();
    return AdjacencyGraph::from_index_edges(n, edges, std::move(ids));
}

AdjacencyGraph read_edge_list_csv(const std::filesystem::path &path,
                                  std::vector<std::string> unit_ids) {
    const CsvTable table = read_csv(path);
    const std::size_t src = table.column("src");
    const std::size_t dst = table.column("dst");
    std::vector<std::pair<std::string, std::string>> edges;
    const bool infer_units = unit_ids.empty();
    std::unordered_map<std::string, bool> seen;
    auto note = [&](const std::string &id) {
        if (infer_units && seen.emplace(id, true).second) {
            unit_ids.push_back(id);
        }
    };
    for (const auto &row : table.rows) {
        edges.emplace_back(row.fields[src], row.fields[dst]);
        note(row.fields[src]);
        note(row.fields[dst]);
    }
    try {
        return AdjacencyGraph::from_edges(edges, std::move(unit_ids));
    } catch (const DataError &e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_edge_list_csv(const AdjacencyGraph &graph, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "src,dst\n";
    const auto &ids = graph.unit_ids();
    for (const auto &[i, j] : graph.edges()) {
        out << ids[i] << ',' << ids[j] << '\n';
    }
}

AdjacencyGraph read_gal(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.find_first_not_of(" \t") != std::string::npos) {
                return true;
            }
        }
        return false;
    };
    auto fail = [&](const std::string &msg) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (!next_line()) {
        fail("empty GAL file");
    }
    // Header is either "<n>" or "0 <n> <shapefile> <id-field>".
    std::vector<std::string> header;
    {
        std::istringstream ss(line);
        for (std::string tok; ss >> tok;) {
            header.push_back(tok);
        }
    }
    long long n = -1;
    try {
        n = std::stoll(header.size() == 1 ? header[0] : header.at(1));
    } catch (const std::exception &) {
        fail("malformed GAL header");
    }
    if (n <= 0) {
        fail("GAL header declares no units");
    }
    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> nbrs;
    for (long long k = 0; k < n; ++k) {
        if (!next_line()) {
            fail("expected " + std::to_string(n) + " unit blocks, found " + std::to_string(k));
        }
        std::istringstream ss(line);
        std::string id;
        long long count = -1;
        if (!(ss >> id >> count) || count < 0) {
            fail("expected '<id> <neighbour count>'");
        }
        std::vector<std::string> list;
        if (count > 0) {
            if (!next_line()) {
                fail("missing neighbour line for unit '" + id + "'");
            }
            std::istringstream ns(line);
            for (std::string tok; ns >> tok;) {
                list.push_back(tok);
            }
            if (static_cast<long long>(list.size()) != count) {
                fail("unit '" + id + "' declares " + std::to_string(count) + " neighbours, lists " +
                     std::to_string(list.size()));
            }
        }
        ids.push_back(id);
        nbrs.push_back(std::move(list));
    }
    std::vector<std::pair<std::string, std::string>> edges;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (const auto &j : nbrs[i]) {
            edges.emplace_back(ids[i], j);
        }
    }
    try {
        return AdjacencyGraph::from_edges(edges, std::move(ids));
    } catch (const DataError &e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

AdjacencyGraph read_adjacency(const std::filesystem::path &path,
                              std::vector<std::string> unit_ids) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".gal") {
        AdjacencyGraph g = read_gal(path);
        if (unit_ids.empty()) {
            return g;
        }
        // Re-index to the caller's unit order.
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto &[i, j] : g.edges()) {
            edges.emplace_back(g.unit_ids()[i], g.unit_ids()[j]);
        }
        if (g.size() != unit_ids.size()) {
            throw DataError(path.string() + ": GAL unit count " + std::to_string(g.size()) +
                            " does not match " + std::to_string(unit_ids.size()) + " units");
        }
        return AdjacencyGraph::from_edges(edges, std::move(unit_ids));
    }
    return read_edge_list_csv(path, std::move(unit_ids));
}

double morans_i(std::span<const double> values, const AdjacencyGraph &graph) {
    const std::size_t n = graph.size();
    if (values.size() != n) {
        throw std::invalid_argument("morans_i: value count does not match graph size");
    }
    if (graph.edge_count() == 0) {
        throw std::invalid_argument("morans_i: graph has no edges");
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double denom = 0.0;
    for (double x : values) {
        denom += (x - mean) * (x - mean);
    }
    if (!(denom > 0.0)) {
        throw std::invalid_argument("morans_i: zero variance");
    }
    double num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j : graph.neighbors(i)) {
            acc += values[j] - mean;
        }
        num += (values[i] - mean) * acc;
    }
    const double s0 = 2.0 * static_cast<double>(graph.edge_count());
    return static_cast<double>(n) / s0 * num / denom;
}

MoranTest morans_i_permutation_test(std::span<const double> values, const AdjacencyGraph &graph,
                                    Rng &rng, int permutations) {
    if (permutations < 1) {
        throw std::invalid_argument("morans_i_permutation_test: permutations must be >= 1");
    }
    MoranTest result;
    result.statistic = morans_i(values, graph);
    result.permutations = permutations;
    std::vector<double> shuffled(values.begin(), values.end());
    int extreme = 0;
    for (int r = 0; r < permutations; ++r) {
        for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
            std::swap(shuffled[i], shuffled[j]);
        }
        if (morans_i(shuffled, graph) >= result.statistic) {
            ++extreme;
        }
    }
    result.p_value = (1.0 + extreme) / (1.0 + permutations);
    return result;
}

const char *to_string(CarKind kind) noexcept {
    switch (kind) {
    case CarKind::icar:
        return "icar";
    case CarKind::proper:
        return "proper";
    case CarKind::leroux:
        return "leroux";
    }
    return "?";
}

PrecisionMatrix car_precision(const AdjacencyGraph &graph, CarKind kind, double rho) {
    if (kind != CarKind::icar && !(rho >= 0.0 && rho <= 1.0)) {
        throw std::invalid_argument("car_precision: rho must lie in [0, 1]");
    }
    if (kind == CarKind::icar) {
        if (graph.has_isolated_unit()) {
            throw std::invalid_argument("car_precision: icar requires every unit to have a neighbour");
        }
        rho = 1.0;
    }
    const auto n = static_cast<Eigen::Index>(graph.size());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(graph.size() + 2 * graph.edge_count());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = static_cast<double>(graph.degree(i));
        double diag = 0.0;
        double off = 0.0;
        switch (kind) {
        case CarKind::icar:
            diag = d;
            off = -1.0;
            break;
        case CarKind::proper:
            diag = d;
            off = -rho;
            break;
        case CarKind::leroux:
            diag = rho * d + (1.0 - rho);
            off = -rho;
            break;
        }
        triplets.emplace_back(i, i, diag);
        if (off != 0.0) {
            for (int j : graph.neighbors(i)) {
                triplets.emplace_back(i, j, off);
            }
        }
    }
    PrecisionMatrix q;
    q.kind = kind;
    q.rho = rho;
    q.matrix.resize(n, n);
    q.matrix.setFromTriplets(triplets.begin(), triplets.end());
    q.matrix.makeCompressed();
    return q;
}

GmrfSampler::GmrfSampler(const PrecisionMatrix &precision) : n_(precision.size()) {
    if (precision.kind == CarKind::icar || (precision.kind == CarKind::leroux && precision.rho >= 1.0)) {
        throw NumericalError("sample_gmrf: intrinsic precision is not positive definite");
    }
    factor_.compute(precision.matrix);
    if (factor_.info() != Eigen::Success) {
        throw NumericalError("sample_gmrf: precision is not positive definite");
    }
    // Guard against near-singular factors that pass the sign check through rounding.
    const Eigen::VectorXd diag = factor_.matrixL().nestedExpression().diagonal();
    const double max_q = precision.matrix.diagonal().cwiseAbs().maxCoeff();
    if (diag.minCoeff() <= 1e-7 * std::sqrt(max_q)) {
        throw NumericalError("sample_gmrf: precision is numerically singular");
    }
}

std::vector<double> GmrfSampler::sample(double variance, Rng &rng) const {
    if (variance < 0.0) {
        throw std::invalid_argument("sample_gmrf: variance must be non-negative");
    }
    std::vector<double> out(n_, 0.0);
    if (variance == 0.0) {
        return out;
    }
    Eigen::VectorXd z(static_cast<Eigen::Index>(n_));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z[i] = standard_normal(rng);
    }
    // P Q P^T = L L^T, so x = P^T L^-T z has covariance Q^-1.
    const Eigen::VectorXd y = factor_.matrixU().solve(z);
    const Eigen::VectorXd x = factor_.permutationPinv() * y;
    const double scale = std::sqrt(variance);
    for (std::size_t i = 0; i < n_; ++i) {
        out[i] = scale * x[static_cast<Eigen::Index>(i)];
    }
    return out;
}

std::vector<double> sample_gmrf(const PrecisionMatrix &precision, double variance, Rng &rng) {
    if (variance == 0.0) {
        return std::vector<double>(precision.size(), 0.0);
    }
    return GmrfSampler(precision).sample(variance, rng);
}

} // namespace iceseg
