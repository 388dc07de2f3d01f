#include "iceseg/mcmc.hpp"

#include "iceseg/errors.hpp"
#include "iceseg/io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace iceseg {

namespace {

constexpr double target_acceptance = 0.44;
constexpr double intercept_bound = 30.0;
constexpr double min_log_scale = -9.2; // ~1e-4
constexpr double max_log_scale = 2.3;  // ~10

double clamp_probability(double p) {
    constexpr double hi = 1.0 - 0x1.0p-53;
    constexpr double lo = std::numeric_limits<double>::min();
    return std::clamp(p, lo, hi);
}

int sample_categorical(std::span<const double> log_weights, Rng &rng) {
    const double mx = *std::max_element(log_weights.begin(), log_weights.end());
    double total = 0.0;
    for (double w : log_weights) {
        total += std::exp(w - mx);
    }
    double r = uniform01(rng) * total;
    for (std::size_t k = 0; k < log_weights.size(); ++k) {
        r -= std::exp(log_weights[k] - mx);
        if (r < 0.0) {
            return static_cast<int>(k);
        }
    }
    return static_cast<int>(log_weights.size()) - 1;
}

void check_counts(std::span<const std::int64_t> y, std::span<const std::int64_t> n) {
    if (y.size() != n.size()) {
        throw std::invalid_argument("counts: y and n differ in length");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (n[i] < 0 || y[i] < 0 || y[i] > n[i]) {
            throw std::invalid_argument("counts: need 0 <= y <= n at unit " + std::to_string(i));
        }
    }
}

} // namespace

GroupSampler::GroupSampler(std::span<const std::int64_t> y, std::span<const std::int64_t> n,
                           const AdjacencyGraph &graph, const ModelSpec &spec,
                           SamplerControls controls)
    : y_(y.begin(), y.end()), n_(n.begin(), n.end()), graph_(&graph), spec_(spec),
      controls_(std::move(controls)) {
    if (spec_.approach == Approach::bootstrap) {
        throw std::invalid_argument("GroupSampler: bootstrap is not an MCMC model");
    }
    spec_.validate();
    check_counts(y_, n_);
    if (y_.size() != graph.size()) {
        throw std::invalid_argument("GroupSampler: data size does not match graph size");
    }
    if (spec_.is_intrinsic() && graph.has_isolated_unit()) {
        throw std::invalid_argument(
            "GroupSampler: intrinsic CAR structure requires every unit to have a neighbour");
    }
    if (spec_.approach == Approach::leroux) {
        // Leroux at rho = 1 is D - W and tolerates isolated units.
        const Eigen::MatrixXd laplacian = car_precision(graph, CarKind::leroux, 1.0).dense();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian, Eigen::EigenvaluesOnly);
        laplacian_eigenvalues_.assign(solver.eigenvalues().data(),
                                      solver.eigenvalues().data() + solver.eigenvalues().size());
        for (auto &l : laplacian_eigenvalues_) {
            l = std::max(l, 0.0);
        }
    }
    initialize();
    if (controls_.initial) {
        set_state(*controls_.initial);
    }
    if (controls_.fixed_sigma2_v) {
        state_.sigma2_v = *controls_.fixed_sigma2_v;
    }
    if (controls_.fixed_sigma2_u) {
        state_.sigma2_u = *controls_.fixed_sigma2_u;
    }
}

void GroupSampler::initialize() {
    const std::size_t n = y_.size();
    const double ysum = std::accumulate(y_.begin(), y_.end(), 0.0);
    const double nsum = std::accumulate(n_.begin(), n_.end(), 0.0);
    const double pooled = std::clamp(logit((ysum + 0.5) / (nsum + 1.0)), -intercept_bound + 1.0,
                                     intercept_bound - 1.0);

    state_ = GroupState{};
    state_.v.assign(n, 0.0);
    if (spec_.has_unstructured()) {
        state_.u.assign(n, 0.0);
    }
    state_.sigma2_v = 0.1;
    state_.sigma2_u = 0.1;
    state_.rho = spec_.approach == Approach::leroux ? 0.5 : 1.0;

    const int q = spec_.approach == Approach::local ? spec_.clusters : 1;
    if (spec_.approach == Approach::local) {
        std::vector<double> emp(n);
        for (std::size_t i = 0; i < n; ++i) {
            emp[i] = logit((static_cast<double>(y_[i]) + 0.5) / (static_cast<double>(n_[i]) + 1.0));
        }
        std::vector<double> sorted = emp;
        std::sort(sorted.begin(), sorted.end());
        state_.beta.resize(q);
        for (int k = 0; k < q; ++k) {
            const double pos = (k + 0.5) / q * static_cast<double>(n - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, n - 1);
            state_.beta[k] = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
            if (k > 0 && state_.beta[k] <= state_.beta[k - 1] + 1e-3) {
                state_.beta[k] = state_.beta[k - 1] + 1e-3;
            }
        }
        for (auto &b : state_.beta) {
            b = std::clamp(b, -intercept_bound + 1.0, intercept_bound - 1.0);
        }
        state_.z.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            for (int k = 1; k < q; ++k) {
                if (std::abs(emp[i] - state_.beta[k]) < std::abs(emp[i] - state_.beta[best])) {
                    best = k;
                }
            }
            state_.z[i] = best;
        }
    } else {
        state_.beta = {pooled};
    }

    log_scale_v_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double info = static_cast<double>(n_[i]) * 0.25 + 1.0;
        log_scale_v_[i] = std::clamp(std::log(2.0 / std::sqrt(info)), min_log_scale, max_log_scale);
    }
    log_scale_u_ = log_scale_v_;
    log_scale_beta_.assign(q, std::log(0.05));
    log_scale_rho_ = std::log(0.5);
    refresh_eta();
}

void GroupSampler::set_state(GroupState state) {
    state.validate();
    if (state.v.size() != y_.size() || state.u.empty() == spec_.has_unstructured() ||
        (spec_.approach == Approach::local) != !state.z.empty() ||
        (spec_.approach == Approach::local && state.clusters() != spec_.clusters)) {
        throw std::invalid_argument("GroupSampler::set_state: state does not match the model");
    }
    state_ = std::move(state);
    refresh_eta();
}

void GroupSampler::refresh_eta() {
    eta_.resize(state_.v.size());
    for (std::size_t i = 0; i < eta_.size(); ++i) {
        eta_[i] = state_.intercept(i) + state_.effect(i);
    }
}

void GroupSampler::adapt(double &log_scale, bool accepted, std::int64_t visits) const {
    if (!adapting_) {
        return;
    }
    const double gain = std::min(0.5, std::pow(static_cast<double>(visits + 1), -0.6));
    log_scale += gain * ((accepted ? 1.0 : 0.0) - target_acceptance);
    log_scale = std::clamp(log_scale, min_log_scale, max_log_scale);
}

double GroupSampler::log_conditional_v(std::size_t i, double x) const {
    double nb_sum = 0.0;
    for (int j : graph_->neighbors(i)) {
        nb_sum += state_.v[j];
    }
    const double d = static_cast<double>(graph_->degree(i));
    double prec, mean;
    if (spec_.approach == Approach::leroux) {
        const double denom = state_.rho * d + 1.0 - state_.rho;
        prec = denom / state_.sigma2_v;
        mean = state_.rho * nb_sum / denom;
    } else {
        prec = d / state_.sigma2_v;
        mean = nb_sum / d;
    }
    const double eta = eta_[i] - state_.v[i] + x;
    return binomial_kernel_logit(y_[i], n_[i], eta) - 0.5 * prec * (x - mean) * (x - mean);
}

void GroupSampler::update_v(Rng &rng) {
    const bool leroux = spec_.approach == Approach::leroux;
    for (std::size_t i = 0; i < state_.v.size(); ++i) {
        double nb_sum = 0.0;
        for (int j : graph_->neighbors(i)) {
            nb_sum += state_.v[j];
        }
        const double d = static_cast<double>(graph_->degree(i));
        double prec, mean;
        if (leroux) {
            const double denom = state_.rho * d + 1.0 - state_.rho;
            prec = denom / state_.sigma2_v;
            mean = state_.rho * nb_sum / denom;
        } else {
            prec = d / state_.sigma2_v;
            mean = nb_sum / d;
        }
        const double cur = state_.v[i];
        const double prop = cur + std::exp(log_scale_v_[i]) * standard_normal(rng);
        const double eta_prop = eta_[i] + (prop - cur);
        const double log_ratio =
            binomial_kernel_logit(y_[i], n_[i], eta_prop) - binomial_kernel_logit(y_[i], n_[i], eta_[i]) -
            0.5 * prec * ((prop - mean) * (prop - mean) - (cur - mean) * (cur - mean));
        const bool accept = std::log(uniform01(rng)) < log_ratio;
        if (accept) {
            state_.v[i] = prop;
            eta_[i] = eta_prop;
            ++acc_v_;
        }
        ++tried_v_;
        adapt(log_scale_v_[i], accept, sweeps_);
    }
}

void GroupSampler::update_u(Rng &rng) {
    if (state_.u.empty()) {
        return;
    }
    const double prec = 1.0 / state_.sigma2_u;
    for (std::size_t i = 0; i < state_.u.size(); ++i) {
        const double cur = state_.u[i];
        const double prop = cur + std::exp(log_scale_u_[i]) * standard_normal(rng);
        const double eta_prop = eta_[i] + (prop - cur);
        const double log_ratio = binomial_kernel_logit(y_[i], n_[i], eta_prop) -
                                 binomial_kernel_logit(y_[i], n_[i], eta_[i]) -
                                 0.5 * prec * (prop * prop - cur * cur);
        const bool accept = std::log(uniform01(rng)) < log_ratio;
        if (accept) {
            state_.u[i] = prop;
            eta_[i] = eta_prop;
            ++acc_u_;
        }
        ++tried_u_;
        adapt(log_scale_u_[i], accept, sweeps_);
    }
}

double GroupSampler::structure_quadratic_form() const {
    double edge_sum = 0.0;
    for (std::size_t i = 0; i < state_.v.size(); ++i) {
        for (int j : graph_->neighbors(i)) {
            if (static_cast<int>(i) < j) {
                const double diff = state_.v[i] - state_.v[j];
                edge_sum += diff * diff;
            }
        }
    }
    if (spec_.approach != Approach::leroux) {
        return edge_sum;
    }
    double sq = 0.0;
    for (double x : state_.v) {
        sq += x * x;
    }
    return state_.rho * edge_sum + (1.0 - state_.rho) * sq;
}

int GroupSampler::structure_rank() const noexcept {
    const int n = static_cast<int>(state_.v.size());
    if (spec_.approach == Approach::leroux) {
        return n;
    }
    return n - graph_->component_count();
}

void GroupSampler::update_variances(Rng &rng) {
    const double a = spec_.prior_shape;
    const double b = spec_.prior_rate;
    if (!controls_.fixed_sigma2_v) {
        state_.sigma2_v = inverse_gamma(a + 0.5 * structure_rank(),
                                        b + 0.5 * structure_quadratic_form(), rng);
    }
    if (!state_.u.empty() && !controls_.fixed_sigma2_u) {
        double sq = 0.0;
        for (double x : state_.u) {
            sq += x * x;
        }
        state_.sigma2_u =
            inverse_gamma(a + 0.5 * static_cast<double>(state_.u.size()), b + 0.5 * sq, rng);
    }
}

double GroupSampler::leroux_log_target(double rho) const {
    double logdet = 0.0;
    for (double l : laplacian_eigenvalues_) {
        logdet += std::log(rho * l + 1.0 - rho);
    }
    double edge_sum = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < state_.v.size(); ++i) {
        sq += state_.v[i] * state_.v[i];
        for (int j : graph_->neighbors(i)) {
            if (static_cast<int>(i) < j) {
                const double diff = state_.v[i] - state_.v[j];
                edge_sum += diff * diff;
            }
        }
    }
    const double quad = rho * edge_sum + (1.0 - rho) * sq;
    // Uniform(0,1) prior, random walk on logit(rho): Jacobian rho(1 - rho).
    return 0.5 * logdet - 0.5 * quad / state_.sigma2_v + std::log(rho) + std::log1p(-rho);
}

void GroupSampler::update_rho(Rng &rng) {
    if (spec_.approach != Approach::leroux) {
        return;
    }
    const double cur = state_.rho;
    const double prop = inv_logit(logit(cur) + std::exp(log_scale_rho_) * standard_normal(rng));
    bool accept = false;
    if (prop > 0.0 && prop < 1.0) {
        accept = std::log(uniform01(rng)) < leroux_log_target(prop) - leroux_log_target(cur);
    }
    if (accept) {
        state_.rho = prop;
        ++acc_rho_;
    }
    ++tried_rho_;
    adapt(log_scale_rho_, accept, sweeps_);
}

void GroupSampler::update_intercepts(Rng &rng) {
    const int q = state_.clusters();
    for (int k = 0; k < q; ++k) {
        const double cur = state_.beta[k];
        const double prop = cur + std::exp(log_scale_beta_[k]) * standard_normal(rng);
        const double lower = k > 0 ? state_.beta[k - 1] : -intercept_bound;
        const double upper = k + 1 < q ? state_.beta[k + 1] : intercept_bound;
        bool accept = false;
        if (prop > lower && prop < upper) {
            const double delta = prop - cur;
            double log_ratio = 0.0;
            for (std::size_t i = 0; i < eta_.size(); ++i) {
                if (!state_.z.empty() && state_.z[i] != k) {
                    continue;
                }
                log_ratio += binomial_kernel_logit(y_[i], n_[i], eta_[i] + delta) -
                             binomial_kernel_logit(y_[i], n_[i], eta_[i]);
            }
            accept = std::log(uniform01(rng)) < log_ratio;
            if (accept) {
                state_.beta[k] = prop;
                for (std::size_t i = 0; i < eta_.size(); ++i) {
                    if (state_.z.empty() || state_.z[i] == k) {
                        eta_[i] += delta;
                    }
                }
            }
        }
        if (accept) {
            ++acc_beta_;
        }
        ++tried_beta_;
        adapt(log_scale_beta_[k], accept, sweeps_);
    }
}

void GroupSampler::update_clusters(Rng &rng) {
    if (state_.z.empty()) {
        return;
    }
    const int q = state_.clusters();
    std::vector<double> logw(q);
    for (std::size_t i = 0; i < state_.z.size(); ++i) {
        const double phi = state_.effect(i);
        for (int k = 0; k < q; ++k) {
            logw[k] = binomial_kernel_logit(y_[i], n_[i], state_.beta[k] + phi);
        }
        const int k = sample_categorical(logw, rng);
        state_.z[i] = k;
        eta_[i] = state_.beta[k] + phi;
    }
}

void GroupSampler::center() {
    if (!spec_.is_intrinsic()) {
        return;
    }
    const int components = graph_->component_count();
    const auto &label = graph_->components();
    std::vector<double> sum(components, 0.0);
    std::vector<double> count(components, 0.0);
    for (std::size_t i = 0; i < state_.v.size(); ++i) {
        sum[label[i]] += state_.v[i];
        count[label[i]] += 1.0;
    }
    for (std::size_t i = 0; i < state_.v.size(); ++i) {
        state_.v[i] -= sum[label[i]] / count[label[i]];
    }
    if (components == 1) {
        // Likelihood-invariant move: eta is unchanged.
        const double shift = sum[0] / count[0];
        for (auto &b : state_.beta) {
            b += shift;
        }
    }
    refresh_eta();
}

void GroupSampler::check_finite(const char *block) const {
    for (std::size_t i = 0; i < eta_.size(); ++i) {
        if (!std::isfinite(eta_[i])) {
            std::ostringstream msg;
            msg << "sampler: non-finite linear predictor at unit " << i << " after " << block
                << " update (sweep " << sweeps_ << ", sigma2_v=" << state_.sigma2_v
                << ", sigma2_u=" << state_.sigma2_u << ")";
            throw NumericalError(msg.str());
        }
    }
}

void GroupSampler::sweep(Rng &rng) {
    update_v(rng);
    update_u(rng);
    update_variances(rng);
    update_rho(rng);
    update_intercepts(rng);
    update_clusters(rng);
    center();
    check_finite("sweep");
    ++sweeps_;
}

void GroupSampler::reset_acceptance() noexcept {
    acc_v_ = tried_v_ = acc_u_ = tried_u_ = 0;
    acc_beta_ = tried_beta_ = acc_rho_ = tried_rho_ = 0;
}

AcceptanceSummary GroupSampler::acceptance() const noexcept {
    auto rate = [](std::int64_t a, std::int64_t t) {
        return t > 0 ? static_cast<double>(a) / static_cast<double>(t)
                     : std::numeric_limits<double>::quiet_NaN();
    };
    return {rate(acc_v_, tried_v_), rate(acc_u_, tried_u_), rate(acc_beta_, tried_beta_),
            rate(acc_rho_, tried_rho_)};
}

PosteriorDraws fit_group(std::span<const std::int64_t> y, std::span<const std::int64_t> n,
                         const AdjacencyGraph &graph, const ModelSpec &spec, Rng &rng,
                         const SamplerControls &controls) {
    GroupSampler sampler(y, n, graph, spec, controls);
    const std::size_t units = graph.size();
    const int q = sampler.state().clusters();

    PosteriorDraws out;
    out.spec = spec;
    out.seed = spec.mcmc.seed;
    out.units = units;
    out.clusters = q;
    out.unit_ids = graph.unit_ids();
    const auto retained = static_cast<std::size_t>(spec.mcmc.retained());
    out.draws = retained;
    out.beta.reserve(retained * q);
    out.v.reserve(retained * units);
    out.sigma2_v.reserve(retained);
    if (spec.has_unstructured()) {
        out.u.reserve(retained * units);
        out.sigma2_u.reserve(retained);
    }
    if (spec.approach == Approach::leroux) {
        out.rho.reserve(retained);
    }
    if (spec.approach == Approach::local) {
        out.z.reserve(retained * units);
    }
    out.p.reserve(retained * units);
    out.loglik.reserve(retained * units);

    std::vector<double> log_coef(units);
    for (std::size_t i = 0; i < units; ++i) {
        log_coef[i] = log_binomial_coefficient(n[i], y[i]);
    }

    sampler.set_adapting(spec.mcmc.burn_in > 0);
    std::size_t stored = 0;
    for (int it = 0; it < spec.mcmc.iterations && stored < retained; ++it) {
        if (it == spec.mcmc.burn_in) {
            sampler.set_adapting(false);
            sampler.reset_acceptance();
        }
        sampler.sweep(rng);
        if (it < spec.mcmc.burn_in || (it - spec.mcmc.burn_in + 1) % spec.mcmc.thin != 0) {
            continue;
        }
        const GroupState &st = sampler.state();
        out.beta.insert(out.beta.end(), st.beta.begin(), st.beta.end());
        out.v.insert(out.v.end(), st.v.begin(), st.v.end());
        out.sigma2_v.push_back(st.sigma2_v);
        if (spec.has_unstructured()) {
            out.u.insert(out.u.end(), st.u.begin(), st.u.end());
            out.sigma2_u.push_back(st.sigma2_u);
        }
        if (spec.approach == Approach::leroux) {
            out.rho.push_back(st.rho);
        }
        if (spec.approach == Approach::local) {
            out.z.insert(out.z.end(), st.z.begin(), st.z.end());
        }
        const auto eta = sampler.eta();
        for (std::size_t i = 0; i < units; ++i) {
            out.p.push_back(clamp_probability(inv_logit(eta[i])));
            const double ll = log_coef[i] + binomial_kernel_logit(y[i], n[i], eta[i]);
            if (!std::isfinite(ll)) {
                throw NumericalError("sampler: non-finite log-likelihood at unit " +
                                     std::to_string(i) + ", iteration " + std::to_string(it));
            }
            out.loglik.push_back(ll);
        }
        ++stored;
    }
    out.draws = stored;
    out.acceptance = sampler.acceptance();
    return out;
}

GroupState update_cluster_indicators(GroupState state, std::span<const std::int64_t> y,
                                     std::span<const std::int64_t> n, Rng &rng) {
    if (state.beta.empty()) {
        throw std::invalid_argument("update_cluster_indicators: q must be >= 1");
    }
    for (std::size_t k = 1; k < state.beta.size(); ++k) {
        if (!(state.beta[k - 1] < state.beta[k])) {
            throw std::invalid_argument("update_cluster_indicators: intercepts must be increasing");
        }
    }
    check_counts(y, n);
    if (y.size() != state.v.size()) {
        throw std::invalid_argument("update_cluster_indicators: size mismatch");
    }
    state.z.resize(state.v.size(), 0);
    const int q = state.clusters();
    std::vector<double> logw(q);
    for (std::size_t i = 0; i < state.z.size(); ++i) {
        const double phi = state.effect(i);
        for (int k = 0; k < q; ++k) {
            logw[k] = binomial_kernel_logit(y[i], n[i], state.beta[k] + phi);
        }
        state.z[i] = sample_categorical(logw, rng);
    }
    return state;
}

GroupState update_ordered_intercepts(GroupState state, std::span<const std::int64_t> y,
                                     std::span<const std::int64_t> n,
                                     std::span<const double> proposal_sd, Rng &rng) {
    state.validate();
    check_counts(y, n);
    const int q = state.clusters();
    if (proposal_sd.size() != static_cast<std::size_t>(q) || y.size() != state.v.size()) {
        throw std::invalid_argument("update_ordered_intercepts: size mismatch");
    }
    for (int k = 0; k < q; ++k) {
        const double cur = state.beta[k];
        const double prop = cur + proposal_sd[k] * standard_normal(rng);
        const double lower = k > 0 ? state.beta[k - 1] : -intercept_bound;
        const double upper = k + 1 < q ? state.beta[k + 1] : intercept_bound;
        if (!(prop > lower && prop < upper)) {
            continue;
        }
        double log_ratio = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (!state.z.empty() && state.z[i] != k) {
                continue;
            }
            const double phi = state.effect(i);
            log_ratio += binomial_kernel_logit(y[i], n[i], prop + phi) -
                         binomial_kernel_logit(y[i], n[i], cur + phi);
        }
        if (std::log(uniform01(rng)) < log_ratio) {
            state.beta[k] = prop;
        }
    }
    return state;
}

IceFit fit_ice_model(std::span<const CountyObservation> data, const AdjacencyGraph &graph,
                     const ModelSpec &spec, int threads) {
    if (data.size() != graph.size()) {
        throw std::invalid_argument("fit_ice_model: data size does not match graph size");
    }
    std::vector<std::int64_t> n(data.size()), y1(data.size()), y2(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i].validate();
        if (data[i].unit_id != graph.unit_ids()[i]) {
            throw DataError("fit_ice_model: county " + data[i].unit_id +
                            " is not aligned with adjacency unit " + graph.unit_ids()[i]);
        }
        n[i] = data[i].n_total;
        y1[i] = data[i].y_group1;
        y2[i] = data[i].y_group2;
    }
    IceFit fit;
    auto run = [&](int group) {
        Rng rng(derive_seed(spec.mcmc.seed, {static_cast<std::uint64_t>(group)}));
        auto draws = fit_group(group == 1 ? y1 : y2, n, graph, spec, rng);
        (group == 1 ? fit.group1 : fit.group2) = std::move(draws);
    };
    if (threads > 1) {
        std::exception_ptr error;
        std::thread worker([&] {
            try {
                run(2);
            } catch (...) {
                error = std::current_exception();
            }
        });
        try {
            run(1);
        } catch (...) {
            worker.join();
            throw;
        }
        worker.join();
        if (error) {
            std::rethrow_exception(error);
        }
    } else {
        run(1);
        run(2);
    }
    return fit;
}

void write_draws_csv(const IceFit &fit, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "group,parameter,unit,draw,value\n";
    auto dump = [&](int group, const PosteriorDraws &d) {
        auto scalar = [&](const char *name, const std::vector<double> &xs) {
            for (std::size_t s = 0; s < xs.size(); ++s) {
                out << group << ',' << name << ",," << s << ',' << format_double(xs[s]) << '\n';
            }
        };
        auto per_unit = [&](const char *name, const auto &xs, double offset = 0.0) {
            if (xs.empty()) {
                return;
            }
            for (std::size_t s = 0; s < d.draws; ++s) {
                for (std::size_t i = 0; i < d.units; ++i) {
                    out << group << ',' << name << ',' << i << ',' << s << ','
                        << format_double(static_cast<double>(xs[s * d.units + i]) + offset) << '\n';
                }
            }
        };
        for (std::size_t s = 0; s < d.draws; ++s) {
            for (int k = 0; k < d.clusters; ++k) {
                out << group << ",beta" << k + 1 << ",," << s << ','
                    << format_double(d.beta[s * d.clusters + k]) << '\n';
            }
        }
        scalar("sigma2_v", d.sigma2_v);
        scalar("sigma2_u", d.sigma2_u);
        scalar("rho", d.rho);
        per_unit("v", d.v);
        per_unit("u", d.u);
        per_unit("z", d.z, 1.0); // 1-based cluster labels
        per_unit("p", d.p);
        per_unit("loglik", d.loglik);
    };
    dump(1, fit.group1);
    dump(2, fit.group2);
}

} // namespace iceseg
