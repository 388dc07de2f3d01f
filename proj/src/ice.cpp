#include "iceseg/ice.hpp"

#include "iceseg/errors.hpp"
#include "iceseg/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace iceseg {

const char *CountyIce::sign() const noexcept {
    if (ice.estimate > 0.0) {
        return "privileged";
    }
    if (ice.estimate < 0.0) {
        return "deprived";
    }
    return "neutral";
}

double raw_ice(const CountyObservation &obs) {
    obs.validate();
    const double n = static_cast<double>(obs.n_total);
    return static_cast<double>(obs.y_group1) / n - static_cast<double>(obs.y_group2) / n;
}

double percentile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) {
        throw std::invalid_argument("percentile: empty input");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw std::invalid_argument("percentile: q must lie in [0, 1]");
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) {
        return sorted.back();
    }
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double percentile(std::span<const double> values, double q) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return percentile_sorted(sorted, q);
}

IntervalEstimate summarize_draws(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return {percentile_sorted(sorted, 0.5), percentile_sorted(sorted, 0.025),
            percentile_sorted(sorted, 0.975)};
}

namespace {

IntervalEstimate bootstrap_interval(double point, std::vector<double> &replicates) {
    std::sort(replicates.begin(), replicates.end());
    IntervalEstimate est{point, percentile_sorted(replicates, 0.025),
                         percentile_sorted(replicates, 0.975)};
    est.lower = std::min(est.lower, point);
    est.upper = std::max(est.upper, point);
    return est;
}

} // namespace

IceSummary bootstrap_ice(std::span<const CountyObservation> data, int replicates,
                         std::uint64_t seed, int threads) {
    if (replicates < 1) {
        throw std::invalid_argument("bootstrap_ice: replicates must be >= 1");
    }
    if (data.empty()) {
        throw std::invalid_argument("bootstrap_ice: no counties");
    }
    for (const auto &obs : data) {
        obs.validate();
    }
    const std::size_t counties = data.size();
    const auto reps = static_cast<std::size_t>(replicates);
    // county-major replicate ICE values
    std::vector<double> draws(counties * reps);

    auto run_county = [&](std::size_t i) {
        const auto &obs = data[i];
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
        const double n = static_cast<double>(obs.n_total);
        const double p1 = static_cast<double>(obs.y_group1) / n;
        const double p2 = static_cast<double>(obs.y_group2) / n;
        // group 2 conditional on not being in group 1
        const double p2_rest = p1 < 1.0 ? std::min(1.0, p2 / (1.0 - p1)) : 0.0;
        for (std::size_t b = 0; b < reps; ++b) {
            const auto a = binomial(obs.n_total, p1, rng);
            const auto p = binomial(obs.n_total - a, p2_rest, rng);
            draws[i * reps + b] = (static_cast<double>(a) - static_cast<double>(p)) / n;
        }
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(counties)));
    if (workers == 1) {
        for (std::size_t i = 0; i < counties; ++i) {
            run_county(i);
        }
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = static_cast<std::size_t>(w); i < counties;
                     i += static_cast<std::size_t>(workers)) {
                    run_county(i);
                }
            });
        }
        for (auto &t : pool) {
            t.join();
        }
    }

    IceSummary summary;
    summary.method = "bootstrap";
    summary.label = "M1-Bootstrap";
    std::vector<double> state_reps(reps, 0.0);
    double state_point = 0.0;
    std::vector<double> county_reps(reps);
    for (std::size_t i = 0; i < counties; ++i) {
        const auto &obs = data[i];
        const double point = raw_ice(obs);
        state_point += point;
        for (std::size_t b = 0; b < reps; ++b) {
            county_reps[b] = draws[i * reps + b];
            state_reps[b] += county_reps[b];
        }
        CountyIce c;
        c.unit_id = obs.unit_id;
        c.name = obs.name;
        c.ice = bootstrap_interval(point, county_reps);
        c.p1 = static_cast<double>(obs.y_group1) / static_cast<double>(obs.n_total);
        c.p2 = static_cast<double>(obs.y_group2) / static_cast<double>(obs.n_total);
        summary.counties.push_back(std::move(c));
    }
    const auto count = static_cast<double>(counties);
    for (auto &x : state_reps) {
        x /= count;
    }
    summary.statewide = bootstrap_interval(state_point / count, state_reps);
    return summary;
}

IceSummary posterior_ice(const PosteriorDraws &group1, const PosteriorDraws &group2) {
    if (group1.draws != group2.draws) {
        throw std::invalid_argument("posterior_ice: draw counts differ (" +
                                    std::to_string(group1.draws) + " vs " +
                                    std::to_string(group2.draws) + ")");
    }
    if (group1.units != group2.units) {
        throw std::invalid_argument("posterior_ice: unit counts differ");
    }
    if (group1.draws == 0) {
        throw std::invalid_argument("posterior_ice: no draws");
    }
    const std::size_t S = group1.draws;
    const std::size_t n = group1.units;
    IceSummary summary;
    summary.method = to_string(group1.spec.approach);
    summary.label = group1.spec.label();
    std::vector<double> state(S, 0.0);
    std::vector<double> ice(S), a(S), b(S);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < S; ++s) {
            a[s] = group1.p_at(s, i);
            b[s] = group2.p_at(s, i);
            ice[s] = a[s] - b[s];
            state[s] += ice[s];
        }
        CountyIce c;
        c.unit_id = i < group1.unit_ids.size() ? group1.unit_ids[i] : std::to_string(i);
        c.ice = summarize_draws(ice);
        c.p1 = percentile(a, 0.5);
        c.p2 = percentile(b, 0.5);
        summary.counties.push_back(std::move(c));
    }
    for (auto &x : state) {
        x /= static_cast<double>(n);
    }
    summary.statewide = summarize_draws(state);
    return summary;
}

void attach_names(IceSummary &summary, std::span<const CountyObservation> data) {
    std::unordered_map<std::string, const CountyObservation *> by_id;
    for (const auto &o : data) {
        by_id.emplace(o.unit_id, &o);
    }
    for (auto &c : summary.counties) {
        if (auto it = by_id.find(c.unit_id); it != by_id.end()) {
            c.name = it->second->name;
        }
    }
}

const char *to_string(SignTransition t) noexcept {
    switch (t) {
    case SignTransition::unchanged:
        return "unchanged";
    case SignTransition::negative_to_positive:
        return "negative_to_positive";
    case SignTransition::positive_to_negative:
        return "positive_to_negative";
    }
    return "?";
}

std::vector<SignChange> sign_change_report(const IceSummary &t1, const IceSummary &t2) {
    std::unordered_map<std::string, const CountyIce *> later;
    for (const auto &c : t2.counties) {
        later.emplace(c.unit_id, &c);
    }
    if (later.size() != t1.counties.size() || t2.counties.size() != t1.counties.size()) {
        throw DataError("sign_change_report: county sets differ (" +
                        std::to_string(t1.counties.size()) + " vs " +
                        std::to_string(t2.counties.size()) + " counties)");
    }
    auto direction = [](double before, double after) {
        if (after > before) {
            return "up";
        }
        if (after < before) {
            return "down";
        }
        return "flat";
    };
    std::vector<SignChange> out;
    for (const auto &a : t1.counties) {
        auto it = later.find(a.unit_id);
        if (it == later.end()) {
            throw DataError("sign_change_report: county " + a.unit_id + " missing from second summary");
        }
        const CountyIce &b = *it->second;
        SignChange row;
        row.unit_id = a.unit_id;
        row.name = a.name.empty() ? b.name : a.name;
        row.ice_t1 = a.ice.estimate;
        row.ice_t2 = b.ice.estimate;
        if (a.ice.estimate < 0.0 && b.ice.estimate > 0.0) {
            row.transition = SignTransition::negative_to_positive;
        } else if (a.ice.estimate > 0.0 && b.ice.estimate < 0.0) {
            row.transition = SignTransition::positive_to_negative;
        }
        row.movement = std::string("p1_") + direction(a.p1, b.p1) + "_p2_" + direction(a.p2, b.p2) +
                       (b.p1 > b.p2 ? "_p1_gt_p2" : b.p1 < b.p2 ? "_p1_lt_p2" : "_p1_eq_p2");
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

nlohmann::json interval_json(const IntervalEstimate &e) {
    return {{"estimate", e.estimate}, {"lower", e.lower}, {"upper", e.upper}};
}

IntervalEstimate interval_from_json(const nlohmann::json &j, const std::string &where) {
    IntervalEstimate e;
    for (const char *field : {"estimate", "lower", "upper"}) {
        if (!j.contains(field) || !j.at(field).is_number()) {
            throw DataError(where + ": missing numeric field '" + field + "'");
        }
    }
    e.estimate = j.at("estimate").get<double>();
    e.lower = j.at("lower").get<double>();
    e.upper = j.at("upper").get<double>();
    return e;
}

} // namespace

nlohmann::json to_json(const IceSummary &summary) {
    nlohmann::json counties = nlohmann::json::array();
    for (const auto &c : summary.counties) {
        auto j = interval_json(c.ice);
        j["fips"] = c.unit_id;
        j["name"] = c.name;
        j["p1"] = c.p1;
        j["p2"] = c.p2;
        j["sign"] = c.sign();
        counties.push_back(std::move(j));
    }
    return {{"method", summary.method},
            {"label", summary.label},
            {"statewide", interval_json(summary.statewide)},
            {"counties", std::move(counties)}};
}

IceSummary ice_summary_from_json(const nlohmann::json &j, const std::string &source) {
    IceSummary s;
    if (!j.is_object() || !j.contains("counties") || !j.at("counties").is_array()) {
        throw DataError(source + ": missing 'counties' array");
    }
    s.method = j.value("method", "");
    s.label = j.value("label", "");
    if (!j.contains("statewide")) {
        throw DataError(source + ": missing field 'statewide'");
    }
    s.statewide = interval_from_json(j.at("statewide"), source + " statewide");
    std::size_t idx = 0;
    for (const auto &c : j.at("counties")) {
        const std::string where = source + " county[" + std::to_string(idx++) + "]";
        if (!c.contains("fips") || !c.at("fips").is_string()) {
            throw DataError(where + ": missing field 'fips'");
        }
        CountyIce ci;
        ci.unit_id = c.at("fips").get<std::string>();
        ci.name = c.value("name", "");
        ci.ice = interval_from_json(c, where);
        ci.p1 = c.value("p1", 0.0);
        ci.p2 = c.value("p2", 0.0);
        s.counties.push_back(std::move(ci));
    }
    return s;
}

std::string ice_counties_csv(const IceSummary &summary) {
    std::ostringstream out;
    out << "fips,estimate,lower,upper,sign\n";
    for (const auto &c : summary.counties) {
        out << csv_escape(c.unit_id) << ',' << format_double(c.ice.estimate) << ','
            << format_double(c.ice.lower) << ',' << format_double(c.ice.upper) << ',' << c.sign()
            << '\n';
    }
    return out.str();
}

std::string sign_changes_csv(std::span<const SignChange> changes) {
    std::ostringstream out;
    out << "fips,name,transition,movement\n";
    for (const auto &c : changes) {
        if (c.transition == SignTransition::unchanged) {
            continue;
        }
        out << csv_escape(c.unit_id) << ',' << csv_escape(c.name) << ',' << to_string(c.transition)
            << ',' << c.movement << '\n';
    }
    return out.str();
}

} // namespace iceseg
