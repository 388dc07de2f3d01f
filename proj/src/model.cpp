#include "iceseg/model.hpp"

#include "iceseg/errors.hpp"
#include "iceseg/io.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace iceseg {

void CountyObservation::validate() const {
    auto fail = [&](const std::string &what) {
        throw DataError("county " + unit_id + ": " + what);
    };
    if (n_total < 1) {
        fail("n_total must be >= 1 (got " + std::to_string(n_total) + ")");
    }
    if (y_group1 < 0 || y_group1 > n_total) {
        fail("y_white_high=" + std::to_string(y_group1) + " outside [0, n_total=" +
             std::to_string(n_total) + "]");
    }
    if (y_group2 < 0 || y_group2 > n_total) {
        fail("y_black_low=" + std::to_string(y_group2) + " outside [0, n_total=" +
             std::to_string(n_total) + "]");
    }
    if (y_group1 + y_group2 > n_total) {
        fail("y_white_high + y_black_low = " + std::to_string(y_group1 + y_group2) +
             " exceeds n_total=" + std::to_string(n_total));
    }
}

std::vector<CountyObservation> read_observations(const std::filesystem::path &path) {
    const CsvTable table = read_csv(path);
    const auto c_fips = table.column("fips");
    const auto c_name = table.column("name");
    const auto c_n = table.column("n_total");
    const auto c_y1 = table.column("y_white_high");
    const auto c_y2 = table.column("y_black_low");
    std::vector<CountyObservation> out;
    out.reserve(table.rows.size());
    for (const auto &row : table.rows) {
        const std::string where = path.string() + ":" + std::to_string(row.line);
        CountyObservation obs;
        obs.unit_id = row.fields[c_fips];
        obs.name = row.fields[c_name];
        if (obs.unit_id.empty()) {
            throw DataError(where + ": empty fips");
        }
        obs.n_total = parse_integer(row.fields[c_n], where + " (fips " + obs.unit_id + ", n_total)");
        obs.y_group1 =
            parse_integer(row.fields[c_y1], where + " (fips " + obs.unit_id + ", y_white_high)");
        obs.y_group2 =
            parse_integer(row.fields[c_y2], where + " (fips " + obs.unit_id + ", y_black_low)");
        try {
            obs.validate();
        } catch (const DataError &e) {
            throw DataError(where + ": " + e.what());
        }
        out.push_back(std::move(obs));
    }
    if (out.empty()) {
        throw DataError(path.string() + ": no observations");
    }
    return out;
}

std::string observations_csv(std::span<const CountyObservation> data) {
    std::ostringstream out;
    out << "fips,name,n_total,y_white_high,y_black_low\n";
    for (const auto &o : data) {
        out << csv_escape(o.unit_id) << ',' << csv_escape(o.name) << ',' << o.n_total << ','
            << o.y_group1 << ',' << o.y_group2 << '\n';
    }
    return out.str();
}

void write_observations(std::span<const CountyObservation> data, const std::filesystem::path &path) {
    write_text_file(path, observations_csv(data));
}

bool all_at_boundary(std::span<const CountyObservation> data, int group) {
    for (const auto &o : data) {
        const auto y = group == 1 ? o.y_group1 : o.y_group2;
        if (y > 0 && y < o.n_total) {
            return false;
        }
    }
    return true;
}

const char *to_string(Approach a) noexcept {
    switch (a) {
    case Approach::bootstrap:
        return "bootstrap";
    case Approach::icar:
        return "icar";
    case Approach::bym:
        return "bym";
    case Approach::leroux:
        return "leroux";
    case Approach::local:
        return "local";
    }
    return "?";
}

Approach parse_approach(std::string_view name) {
    for (auto a : {Approach::bootstrap, Approach::icar, Approach::bym, Approach::leroux,
                   Approach::local}) {
        if (name == to_string(a)) {
            return a;
        }
    }
    throw UsageError("unknown model '" + std::string(name) +
                     "' (expected bootstrap, icar, bym, leroux or local)");
}

void ModelSpec::validate() const {
    if (approach == Approach::bootstrap) {
        if (bootstrap_replicates < 1) {
            throw std::invalid_argument("bootstrap replicates must be >= 1");
        }
        return;
    }
    if (clusters < 1) {
        throw std::invalid_argument("clusters must be >= 1");
    }
    if (approach != Approach::local && clusters != 1) {
        throw std::invalid_argument("clusters > 1 requires the local model");
    }
    if (!(prior_shape > 0.0) || !(prior_rate > 0.0)) {
        throw std::invalid_argument("inverse-gamma prior parameters must be positive");
    }
    if (mcmc.burn_in < 0 || mcmc.iterations <= mcmc.burn_in) {
        throw std::invalid_argument("mcmc: need iterations > burn_in >= 0");
    }
    if (mcmc.thin < 1) {
        throw std::invalid_argument("mcmc: thin must be >= 1");
    }
}

std::string ModelSpec::label() const {
    switch (approach) {
    case Approach::bootstrap:
        return "M1-Bootstrap";
    case Approach::bym:
        return "M2-BYM";
    case Approach::icar:
        return "M3-ICAR";
    case Approach::leroux:
        return "M4-Leroux";
    case Approach::local:
        if (clusters == 2) {
            return "M5-L2";
        }
        if (clusters == 3) {
            return "M6-L3";
        }
        return "L" + std::to_string(clusters);
    }
    return "?";
}

void GroupState::validate() const {
    if (beta.empty()) {
        throw std::invalid_argument("state: no intercept");
    }
    for (std::size_t k = 1; k < beta.size(); ++k) {
        if (!(beta[k - 1] < beta[k])) {
            throw std::invalid_argument("state: intercepts must be strictly increasing");
        }
    }
    if (!u.empty() && u.size() != v.size()) {
        throw std::invalid_argument("state: u and v differ in length");
    }
    if (!z.empty()) {
        if (z.size() != v.size()) {
            throw std::invalid_argument("state: z and v differ in length");
        }
        for (int k : z) {
            if (k < 0 || k >= clusters()) {
                throw std::invalid_argument("state: cluster label out of range");
            }
        }
    } else if (beta.size() != 1) {
        throw std::invalid_argument("state: multiple intercepts without cluster labels");
    }
    if (!(sigma2_v > 0.0) || !(sigma2_u > 0.0)) {
        throw std::invalid_argument("state: variances must be positive");
    }
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw std::invalid_argument("state: rho outside [0, 1]");
    }
}

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("logit: p must lie strictly inside (0, 1)");
    }
    return std::log(p) - std::log1p(-p);
}

double inv_logit(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) noexcept {
    if (x > 0.0) {
        return x + std::log1p(std::exp(-x));
    }
    return std::log1p(std::exp(x));
}

std::vector<double> linear_predictor(const GroupState &state, const AdjacencyGraph &graph) {
    const std::size_t n = graph.size();
    if (state.v.size() != n || (!state.u.empty() && state.u.size() != n) ||
        (!state.z.empty() && state.z.size() != n)) {
        throw std::invalid_argument("linear_predictor: state dimension does not match graph");
    }
    if (state.beta.empty()) {
        throw std::invalid_argument("linear_predictor: no intercept");
    }
    std::vector<double> eta(n);
    for (std::size_t i = 0; i < n; ++i) {
        eta[i] = state.intercept(i) + state.effect(i);
    }
    return eta;
}

double log_binomial_coefficient(std::int64_t n, std::int64_t y) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(y) + 1.0) -
           std::lgamma(static_cast<double>(n - y) + 1.0);
}

std::vector<double> binomial_loglik_pointwise(std::span<const std::int64_t> y,
                                              std::span<const std::int64_t> n,
                                              std::span<const double> p) {
    if (y.size() != n.size() || y.size() != p.size()) {
        throw std::invalid_argument("binomial_loglik_pointwise: length mismatch");
    }
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] > n[i]) {
            throw std::invalid_argument("binomial_loglik_pointwise: need 0 <= y <= n");
        }
        if (!(p[i] > 0.0 && p[i] < 1.0)) {
            throw std::invalid_argument("binomial_loglik_pointwise: p outside (0, 1)");
        }
        const double yi = static_cast<double>(y[i]);
        const double fi = static_cast<double>(n[i] - y[i]);
        out[i] = log_binomial_coefficient(n[i], y[i]) + (yi > 0 ? yi * std::log(p[i]) : 0.0) +
                 (fi > 0 ? fi * std::log1p(-p[i]) : 0.0);
    }
    return out;
}

} // namespace iceseg
