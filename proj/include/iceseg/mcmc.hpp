#pragma once

#include "iceseg/graph.hpp"
#include "iceseg/model.hpp"
#include "iceseg/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace iceseg {

/// Post-burn-in acceptance rates per parameter block (NaN when the block is absent).
struct AcceptanceSummary {
    double v = 0.0;
    double u = 0.0;
    double beta = 0.0;
    double rho = 0.0;
};

/// Retained MCMC output for one proportion group. Per-unit quantities are stored
/// draw-major: element (s, i) lives at s * units + i.
struct PosteriorDraws {
    ModelSpec spec;
    std::uint64_t seed = 0;
    std::size_t draws = 0;
    std::size_t units = 0;
    int clusters = 1;
    std::vector<std::string> unit_ids;

    std::vector<double> beta; // draws x clusters
    std::vector<double> v;
    std::vector<double> u; // empty unless BYM/local
    std::vector<double> sigma2_v;
    std::vector<double> sigma2_u; // empty unless BYM/local
    std::vector<double> rho;      // empty unless Leroux
    std::vector<int> z;           // empty unless local; 0-based labels
    std::vector<double> p;
    std::vector<double> loglik; // includes log C(n, y)
    AcceptanceSummary acceptance;

    double p_at(std::size_t s, std::size_t i) const noexcept { return p[s * units + i]; }
    std::span<const double> p_draw(std::size_t s) const noexcept {
        return {p.data() + s * units, units};
    }
};

/// Test and diagnostic hooks; defaults reproduce the production sampler.
struct SamplerControls {
    bool adapt = true;
    std::optional<double> fixed_sigma2_v;
    std::optional<double> fixed_sigma2_u;
    std::optional<GroupState> initial;
};

/// Metropolis-within-Gibbs sampler for one binomial-logit group.
///
/// One sweep runs, in order: site-wise random-walk Metropolis on v; the same on u
/// (BYM/local); conjugate inverse-gamma draws of the variances; a logit-scale random
/// walk on the Leroux rho; random-walk Metropolis on the intercept(s) under a flat
/// prior truncated to |beta| <= 30 and, for the local model, the ordering constraint;
/// Gibbs draws of the cluster labels (local); and finally, for intrinsic structures,
/// re-centring v to mean zero with the shift moved into the intercepts.
///
/// Proposal scales adapt toward 0.44 acceptance (Robbins-Monro on log scale) while
/// `set_adapting(true)`; fit_group freezes them at the end of burn-in.
class GroupSampler {
public:
    /// Throws std::invalid_argument for isolated units under intrinsic structures,
    /// a bootstrap spec, or data/graph size mismatches.
    GroupSampler(std::span<const std::int64_t> y, std::span<const std::int64_t> n,
                 const AdjacencyGraph &graph, const ModelSpec &spec, SamplerControls controls = {});

    void sweep(Rng &rng);

    void update_v(Rng &rng);
    void update_u(Rng &rng);
    void update_variances(Rng &rng);
    void update_rho(Rng &rng);
    void update_intercepts(Rng &rng);
    void update_clusters(Rng &rng);
    void center();

    const GroupState &state() const noexcept { return state_; }
    void set_state(GroupState state);
    void set_adapting(bool on) noexcept { adapting_ = on && controls_.adapt; }
    void reset_acceptance() noexcept;
    AcceptanceSummary acceptance() const noexcept;

    /// v' Q v for the model's structure matrix at the current rho.
    double structure_quadratic_form() const;
    /// Rank of the structure matrix: n - #components for intrinsic models, n for Leroux.
    int structure_rank() const noexcept;
    /// Current linear predictor (cached, kept in sync with the state).
    std::span<const double> eta() const noexcept { return eta_; }

    /// Log full conditional of v_i at value x, up to a constant.
    double log_conditional_v(std::size_t i, double x) const;

private:
    void initialize();
    void refresh_eta();
    double leroux_log_target(double rho) const;
    void adapt(double &log_scale, bool accepted, std::int64_t visits) const;
    void check_finite(const char *block) const;

    std::vector<std::int64_t> y_;
    std::vector<std::int64_t> n_;
    const AdjacencyGraph *graph_;
    ModelSpec spec_;
    SamplerControls controls_;
    GroupState state_;
    std::vector<double> eta_;
    std::vector<double> laplacian_eigenvalues_; // Leroux log-determinant

    std::vector<double> log_scale_v_, log_scale_u_, log_scale_beta_;
    double log_scale_rho_ = std::log(0.5);
    std::int64_t sweeps_ = 0;
    bool adapting_ = false;

    std::int64_t acc_v_ = 0, tried_v_ = 0, acc_u_ = 0, tried_u_ = 0;
    std::int64_t acc_beta_ = 0, tried_beta_ = 0, acc_rho_ = 0, tried_rho_ = 0;
};

/// Runs spec.mcmc.iterations sweeps, discards burn-in, thins and stores draws.
/// Throws NumericalError if the likelihood becomes non-finite.
PosteriorDraws fit_group(std::span<const std::int64_t> y, std::span<const std::int64_t> n,
                         const AdjacencyGraph &graph, const ModelSpec &spec, Rng &rng,
                         const SamplerControls &controls = {});

/// Redraws every label from its exact categorical full conditional
/// p(z_i = k) proportional to Binomial(y_i | n_i, inv_logit(beta_k + phi_i)).
GroupState update_cluster_indicators(GroupState state, std::span<const std::int64_t> y,
                                     std::span<const std::int64_t> n, Rng &rng);

/// One random-walk Metropolis pass over the ordered intercepts with per-cluster
/// proposal scales. Order-violating proposals are rejected.
GroupState update_ordered_intercepts(GroupState state, std::span<const std::int64_t> y,
                                     std::span<const std::int64_t> n,
                                     std::span<const double> proposal_sd, Rng &rng);

struct IceFit {
    PosteriorDraws group1;
    PosteriorDraws group2;
};

/// Fits both groups independently with streams derived from spec.mcmc.seed. With
/// threads > 1 the groups run concurrently; results do not depend on threads.
IceFit fit_ice_model(std::span<const CountyObservation> data, const AdjacencyGraph &graph,
                     const ModelSpec &spec, int threads = 1);

/// Long-format dump: `group,parameter,unit,draw,value` (unit empty for scalars).
void write_draws_csv(const IceFit &fit, const std::filesystem::path &path);

} // namespace iceseg
