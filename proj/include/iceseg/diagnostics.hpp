#pragma once

#include "iceseg/mcmc.hpp"

#include <span>
#include <string>
#include <vector>

namespace iceseg {

struct WaicResult {
    double waic = 0.0;
    double lppd = 0.0;
    double p_waic = 0.0;
    std::vector<double> pointwise_lppd;
    std::vector<double> pointwise_p_waic;
};

/// WAIC from a draws x points log-likelihood matrix stored draw-major. lppd uses a
/// log-sum-exp per point; p_waic is the sum of per-point sample variances (divisor S-1).
/// Throws std::invalid_argument for fewer than 2 draws, no points, or non-finite input.
WaicResult waic(std::span<const double> loglik, std::size_t draws, std::size_t points);

/// WAIC of one fitted group.
WaicResult waic(const PosteriorDraws &draws);

/// Joint criterion over both groups: pointwise contributions concatenated (2n points).
WaicResult combine(const WaicResult &a, const WaicResult &b);

struct ReplicateEstimates {
    std::vector<double> estimate;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> truth;
};

struct EvalMetrics {
    double rmse = 0.0;
    double coverage = 0.0; // fraction in [0, 1]
    double width = 0.0;
    std::size_t pairs = 0; // (replicate, county) pairs evaluated
};

/// RMSE, coverage and mean interval width pooled over replicates and counties.
/// Throws std::invalid_argument on empty input or misaligned vectors.
EvalMetrics evaluate_replicates(std::span<const ReplicateEstimates> replicates);

/// Split R-hat over chains (each chain split in half).
double split_rhat(std::span<const std::vector<double>> chains);

/// Effective sample size from the multi-chain autocorrelation estimate with Geyer's
/// initial monotone positive sequence truncation.
double effective_sample_size(std::span<const std::vector<double>> chains);

struct ParameterConvergence {
    std::string parameter;
    double ess = 0.0;
    double split_rhat = 0.0;
};

/// ESS and split R-hat for every scalar parameter and per-unit probability in the
/// chains (all chains must come from the same model). Advisory only. Throws
/// std::invalid_argument with no chains or fewer than 100 retained draws.
std::vector<ParameterConvergence> convergence_summary(std::span<const PosteriorDraws> chains);

std::string convergence_csv(std::span<const ParameterConvergence> rows);

} // namespace iceseg
