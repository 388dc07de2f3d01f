#pragma once

#include "iceseg/rng.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace iceseg {

/// Symmetric binary neighbourhood structure over n areal units, stored in CSR form.
/// Immutable after construction.
class AdjacencyGraph {
public:
    AdjacencyGraph() = default;

    /// Builds a graph from unit-id pairs. Duplicate and reversed pairs collapse into
    /// one undirected edge. Throws DataError on unknown ids, self-loops, duplicate
    /// unit ids or an empty unit list.
    static AdjacencyGraph from_edges(std::span<const std::pair<std::string, std::string>> edges,
                                     std::vector<std::string> unit_ids);

    /// Builds a graph from index pairs; ids default to "0".."n-1" when not supplied.
    static AdjacencyGraph from_index_edges(std::size_t n,
                                           std::span<const std::pair<int, int>> edges,
                                           std::vector<std::string> unit_ids = {});

    std::size_t size() const noexcept { return unit_ids_.size(); }
    std::span<const int> neighbors(std::size_t i) const noexcept {
        return {adjacency_.data() + offsets_[i], adjacency_.data() + offsets_[i + 1]};
    }
    std::size_t degree(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
    /// Number of undirected edges.
    std::size_t edge_count() const noexcept { return adjacency_.size() / 2; }
    bool has_edge(std::size_t i, std::size_t j) const;

    const std::vector<std::string> &unit_ids() const noexcept { return unit_ids_; }
    std::optional<std::size_t> index_of(const std::string &id) const;

    /// Connected-component label per unit, labels numbered 0.. in order of first unit.
    const std::vector<int> &components() const noexcept { return component_; }
    int component_count() const noexcept { return component_count_; }
    bool has_isolated_unit() const noexcept;

    /// Undirected edges (i < j) in ascending order.
    std::vector<std::pair<int, int>> edges() const;

private:
    void finalize(std::vector<std::vector<int>> lists);

    std::vector<std::string> unit_ids_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::size_t> offsets_{0};
    std::vector<int> adjacency_;
    std::vector<int> component_;
    int component_count_ = 0;
};

/// Same as AdjacencyGraph::from_edges.
AdjacencyGraph build_graph(std::span<const std::pair<std::string, std::string>> edges,
                           std::vector<std::string> unit_ids);

/// rows x cols rook lattice; unit ids are "r<row>c<col>".
AdjacencyGraph rook_lattice(int rows, int cols);

/// Edge-list CSV with header `src,dst`. When unit_ids is empty the unit order is the
/// order of first appearance in the file.
AdjacencyGraph read_edge_list_csv(const std::filesystem::path &path,
                                  std::vector<std::string> unit_ids = {});
void write_edge_list_csv(const AdjacencyGraph &graph, const std::filesystem::path &path);

/// GAL neighbour file: header line whose last numeric field before the optional
/// shapefile/id tokens is the unit count, then per unit a "<id> <k>" line followed by
/// a line listing k neighbour ids.
AdjacencyGraph read_gal(const std::filesystem::path &path);

/// Dispatches on extension: `.gal` goes to read_gal, everything else is edge-list CSV.
AdjacencyGraph read_adjacency(const std::filesystem::path &path,
                              std::vector<std::string> unit_ids = {});

/// Moran's I with binary weights. Throws std::invalid_argument on length mismatch,
/// an edgeless graph, or zero variance.
double morans_i(std::span<const double> values, const AdjacencyGraph &graph);

struct MoranTest {
    double statistic = 0.0;
    double p_value = 1.0; // one-sided (positive autocorrelation), (1 + #{I_perm >= I}) / (1 + R)
    int permutations = 0;
};

MoranTest morans_i_permutation_test(std::span<const double> values, const AdjacencyGraph &graph,
                                    Rng &rng, int permutations = 999);

enum class CarKind { icar, proper, leroux };

const char *to_string(CarKind kind) noexcept;

/// Joint precision of a CAR prior, up to the variance scale it is paired with.
///   icar       D - W
///   proper(p)  D - pW
///   leroux(p)  p(D - W) + (1 - p)I
struct PrecisionMatrix {
    CarKind kind = CarKind::icar;
    double rho = 1.0;
    Eigen::SparseMatrix<double> matrix;

    std::size_t size() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
    Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix); }
};

/// Throws std::invalid_argument for rho outside [0, 1], or an isolated unit under icar.
PrecisionMatrix car_precision(const AdjacencyGraph &graph, CarKind kind, double rho = 1.0);

/// Draws x ~ N(0, variance * Q^-1) from a cached sparse Cholesky factor of Q.
class GmrfSampler {
public:
    /// Throws NumericalError when Q is not positive definite (e.g. the icar kind).
    explicit GmrfSampler(const PrecisionMatrix &precision);

    std::vector<double> sample(double variance, Rng &rng) const;
    std::size_t size() const noexcept { return n_; }

private:
    std::size_t n_ = 0;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> factor_;
};

std::vector<double> sample_gmrf(const PrecisionMatrix &precision, double variance, Rng &rng);

} // namespace iceseg
