#pragma once

#include "iceseg/mcmc.hpp"
#include "iceseg/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace iceseg {

struct IntervalEstimate {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct CountyIce {
    std::string unit_id;
    std::string name;
    IntervalEstimate ice;
    /// Group-wise point estimates (posterior medians, or raw proportions for the bootstrap).
    double p1 = 0.0;
    double p2 = 0.0;

    /// "privileged" (> 0), "deprived" (< 0) or "neutral".
    const char *sign() const noexcept;
};

struct IceSummary {
    std::string method; // e.g. "bootstrap", "bym", "local"
    std::string label;  // e.g. "M1-Bootstrap", "M6-L3"
    std::vector<CountyIce> counties;
    IntervalEstimate statewide;
};

/// Raw ICE (A - P) / T for one county.
double raw_ice(const CountyObservation &obs);

/// Linear-interpolation percentile on sorted data (R type 7):
/// h = (S - 1) q, result = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
double percentile_sorted(std::span<const double> sorted, double q);
/// Copies and sorts, then applies percentile_sorted.
double percentile(std::span<const double> values, double q);

/// Summarises draws as {median, 2.5%, 97.5%}.
IntervalEstimate summarize_draws(std::span<const double> values);

/// Within-county trinomial bootstrap: every replicate resamples each county's n residents
/// with replacement (categories group 1 / group 2 / neither). Point estimates are the raw
/// values; intervals are replicate (2.5, 97.5) percentiles widened if needed to contain the
/// point estimate. Statewide values are unweighted county means within each replicate.
/// Each county draws from its own stream derived from `seed`, so results do not depend on
/// `threads`.
IceSummary bootstrap_ice(std::span<const CountyObservation> data, int replicates,
                         std::uint64_t seed, int threads = 1);

/// ICE draws p1 - p2 per draw and county; per-county posterior medians and 95% intervals;
/// statewide summary of the within-draw county mean. Throws std::invalid_argument on
/// mismatched draw or unit counts.
IceSummary posterior_ice(const PosteriorDraws &group1, const PosteriorDraws &group2);

/// Copies county names from the observations (matched by unit id).
void attach_names(IceSummary &summary, std::span<const CountyObservation> data);

enum class SignTransition { unchanged, negative_to_positive, positive_to_negative };
const char *to_string(SignTransition t) noexcept;

struct SignChange {
    std::string unit_id;
    std::string name;
    double ice_t1 = 0.0;
    double ice_t2 = 0.0;
    SignTransition transition = SignTransition::unchanged;
    /// Direction of both group proportions between periods, e.g. "p1_up_p2_down",
    /// suffixed with "_p1_gt_p2" / "_p1_lt_p2" describing the later period.
    std::string movement;
};

/// One row per county in t1 order. Throws DataError when the county sets differ.
std::vector<SignChange> sign_change_report(const IceSummary &t1, const IceSummary &t2);

nlohmann::json to_json(const IceSummary &summary);
IceSummary ice_summary_from_json(const nlohmann::json &j, const std::string &source);
/// `fips,estimate,lower,upper,sign`
std::string ice_counties_csv(const IceSummary &summary);
std::string sign_changes_csv(std::span<const SignChange> changes);

} // namespace iceseg
