#pragma once

#include "iceseg/diagnostics.hpp"
#include "iceseg/graph.hpp"
#include "iceseg/ice.hpp"
#include "iceseg/model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace iceseg {

/// One of the four segregation scenarios. Logit-scale means, the conditional scale of the
/// proper-CAR field (covariance variance * (D - rho W)^-1) and the shared denominator.
struct ScenarioSpec {
    int id = 1;
    double mean1 = -1.72;
    double mean2 = -1.72;
    double variance = 0.2;
    double rho = 0.2;
    std::int64_t population = 150;
    int replicates = 100;

    /// Standard parameter binding for scenario 1-4; throws UsageError otherwise.
    static ScenarioSpec standard(int id, std::int64_t population, int replicates = 100);
    void validate() const;
};

struct SimulatedDataset {
    int scenario = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    std::vector<double> p1;
    std::vector<double> p2;
    std::vector<CountyObservation> observations;
    int redraws = 0; // counties whose binomial pair was redrawn because y1 + y2 > N

    std::vector<double> true_ice() const;
};

/// Draws logit(p_k) = mean_k + x_k with independent proper-CAR fields per group, then
/// binomial counts with denominator N. County names are left empty; ids follow the graph.
SimulatedDataset generate(const ScenarioSpec &scenario, const AdjacencyGraph &graph,
                          std::uint64_t seed, int replicate = 0);

/// Fallback experiment graph when no adjacency file is given: 12 x 13 rook lattice (n = 156).
AdjacencyGraph default_experiment_graph();

/// A model column of the result tables.
struct ModelChoice {
    Approach approach = Approach::bym;
    int clusters = 1;

    std::string label() const;
    /// Accepts bootstrap, bym, icar, leroux, local2, local3, local<q>.
    static ModelChoice parse(const std::string &name);
};

/// Paper column order M1..M6.
std::vector<ModelChoice> default_models();

struct ExperimentConfig {
    std::vector<int> scenarios{1, 2, 3, 4};
    std::vector<std::int64_t> populations{150, 500, 2000};
    std::vector<ModelChoice> models = default_models();
    int replicates = 100;
    std::uint64_t seed = 1;
    int iterations = 50000;
    int burn_in = 20000;
    int thin = 1;
    int bootstrap_replicates = 10000;
    double prior_shape = 1.0;
    double prior_rate = 0.01;
    int threads = 1;
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> adjacency;

    void validate() const;
    ModelSpec model_spec(const ModelChoice &m, std::uint64_t seed) const;
};

/// Key-value text: `key = value` lines, `#` comments. Keys: scenarios, N, models,
/// replicates, seed, out, iterations, burnin, thin, b, prior_a, prior_b, threads, adjacency.
ExperimentConfig read_experiment_config(const std::filesystem::path &path);

struct CellResult {
    int scenario = 0;
    std::int64_t population = 0;
    std::string model;
    EvalMetrics metrics;
    std::optional<double> mean_waic; // absent for the bootstrap
    double mean_statewide = 0.0;     // mean statewide point estimate over replicates
    int succeeded = 0;
    int failed = 0;
    std::vector<std::string> failures;
};

struct ExperimentResult {
    std::vector<CellResult> cells;

    const CellResult *find(int scenario, std::int64_t population, const std::string &model) const;
};

/// Summary of one model on one dataset, as produced by `fit`.
struct FitOutcome {
    IceSummary summary;
    std::optional<WaicResult> waic;
};

FitOutcome fit_dataset(std::span<const CountyObservation> data, const AdjacencyGraph &graph,
                       const ModelSpec &spec, int threads = 1);

/// Evaluates already-fitted summaries of one model against replicate truths.
EvalMetrics evaluate_summaries(std::span<const IceSummary> summaries,
                               std::span<const std::vector<double>> truths);

/// Generates, fits, summarises and evaluates every (scenario, N, model, replicate).
/// Tasks are seeded by their coordinates, so output is identical for any thread count.
/// A failed replicate is recorded in its cell and excluded from the metrics.
ExperimentResult run_experiment(const ExperimentConfig &config, const AdjacencyGraph &graph);

/// Wide table for one population: `metric,scenario,<model labels...>`, metric rows RMSE,
/// Coverage (percent), Width, WAIC; "NA" where a value does not exist.
std::string experiment_table_csv(const ExperimentResult &result, std::int64_t population,
                                 std::span<const ModelChoice> models);
/// Long table: one row per cell.
std::string experiment_cells_csv(const ExperimentResult &result);

} // namespace iceseg
