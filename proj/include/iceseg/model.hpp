#pragma once

#include "iceseg/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iceseg {

/// Per-county counts. Group 1 is high-income White (A), group 2 is low-income Black (P),
/// both drawn from the same denominator of residents with known income (T).
struct CountyObservation {
    std::string unit_id;
    std::string name;
    std::int64_t n_total = 0;
    std::int64_t y_group1 = 0;
    std::int64_t y_group2 = 0;

    /// Throws DataError describing the first violated invariant.
    void validate() const;
};

/// Observation CSV: `fips,name,n_total,y_white_high,y_black_low`. Validation errors name
/// the file, line and FIPS code.
std::vector<CountyObservation> read_observations(const std::filesystem::path &path);
void write_observations(std::span<const CountyObservation> data, const std::filesystem::path &path);
std::string observations_csv(std::span<const CountyObservation> data);

/// True when every county sits at a boundary (y == 0 or y == n) for the given group,
/// which leaves the flat-intercept posterior improper.
bool all_at_boundary(std::span<const CountyObservation> data, int group);

enum class Approach { bootstrap, icar, bym, leroux, local };

const char *to_string(Approach a) noexcept;
Approach parse_approach(std::string_view name);

struct McmcSettings {
    int iterations = 50000;
    int burn_in = 20000;
    int thin = 1;
    std::uint64_t seed = 0;

    int retained() const noexcept { return (iterations - burn_in) / thin; }
};

struct ModelSpec {
    Approach approach = Approach::bym;
    int clusters = 1;           // local only
    double prior_shape = 1.0;   // Inverse-Gamma(a, b) on every variance
    double prior_rate = 0.01;
    McmcSettings mcmc;
    int bootstrap_replicates = 10000;

    void validate() const;
    bool has_unstructured() const noexcept {
        return approach == Approach::bym || approach == Approach::local;
    }
    bool is_intrinsic() const noexcept { return approach != Approach::leroux; }
    /// Short label used in result tables, e.g. "M2-BYM", "M6-L3".
    std::string label() const;
};

/// Sampler state for one proportion group. Cluster labels in `z` are 0-based
/// (cluster k here is the paper's k+1); `z` is empty for global models and `u` is
/// empty unless the model has an unstructured effect.
struct GroupState {
    std::vector<double> beta;
    std::vector<double> v;
    std::vector<double> u;
    double sigma2_v = 0.1;
    double sigma2_u = 0.1;
    double rho = 0.5;
    std::vector<int> z;

    std::size_t size() const noexcept { return v.size(); }
    int clusters() const noexcept { return static_cast<int>(beta.size()); }
    double intercept(std::size_t i) const noexcept { return z.empty() ? beta[0] : beta[z[i]]; }
    double effect(std::size_t i) const noexcept { return v[i] + (u.empty() ? 0.0 : u[i]); }
    void validate() const;
};

double logit(double p);
double inv_logit(double x) noexcept;

/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

/// Per-unit linear predictor: beta_{z_i} + v_i (+ u_i). Throws std::invalid_argument
/// when the state does not match the graph.
std::vector<double> linear_predictor(const GroupState &state, const AdjacencyGraph &graph);

/// log C(n, y), via lgamma.
double log_binomial_coefficient(std::int64_t n, std::int64_t y);

/// Binomial log-pmf parameterised on the logit scale; excludes the binomial coefficient.
inline double binomial_kernel_logit(std::int64_t y, std::int64_t n, double eta) noexcept {
    return static_cast<double>(y) * eta - static_cast<double>(n) * softplus(eta);
}

/// Pointwise log C(n,y) + y log p + (n-y) log(1-p). Throws std::invalid_argument for
/// p outside (0,1), y > n or negative counts.
std::vector<double> binomial_loglik_pointwise(std::span<const std::int64_t> y,
                                              std::span<const std::int64_t> n,
                                              std::span<const double> p);

} // namespace iceseg
