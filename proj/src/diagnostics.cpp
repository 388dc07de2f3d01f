#include "iceseg/diagnostics.hpp"

#include "iceseg/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace iceseg {

WaicResult waic(std::span<const double> loglik, std::size_t draws, std::size_t points) {
    if (draws < 2) {
        throw std::invalid_argument("waic: need at least 2 draws");
    }
    if (points == 0) {
        throw std::invalid_argument("waic: need at least 1 point");
    }
    if (loglik.size() != draws * points) {
        throw std::invalid_argument("waic: matrix size does not match draws x points");
    }
    WaicResult r;
    r.pointwise_lppd.resize(points);
    r.pointwise_p_waic.resize(points);
    const double S = static_cast<double>(draws);
    for (std::size_t j = 0; j < points; ++j) {
        double mx = -std::numeric_limits<double>::infinity();
        double mean = 0.0;
        for (std::size_t s = 0; s < draws; ++s) {
            const double x = loglik[s * points + j];
            if (!std::isfinite(x)) {
                throw std::invalid_argument("waic: non-finite log-likelihood at draw " +
                                            std::to_string(s) + ", point " + std::to_string(j));
            }
            mx = std::max(mx, x);
            mean += x;
        }
        mean /= S;
        double sum_exp = 0.0;
        double ss = 0.0;
        for (std::size_t s = 0; s < draws; ++s) {
            const double x = loglik[s * points + j];
            sum_exp += std::exp(x - mx);
            ss += (x - mean) * (x - mean);
        }
        r.pointwise_lppd[j] = mx + std::log(sum_exp / S);
        r.pointwise_p_waic[j] = ss / (S - 1.0);
        r.lppd += r.pointwise_lppd[j];
        r.p_waic += r.pointwise_p_waic[j];
    }
    r.waic = -2.0 * (r.lppd - r.p_waic);
    return r;
}

WaicResult waic(const PosteriorDraws &draws) { return waic(draws.loglik, draws.draws, draws.units); }

WaicResult combine(const WaicResult &a, const WaicResult &b) {
    WaicResult r;
    r.lppd = a.lppd + b.lppd;
    r.p_waic = a.p_waic + b.p_waic;
    r.waic = -2.0 * (r.lppd - r.p_waic);
    r.pointwise_lppd = a.pointwise_lppd;
    r.pointwise_lppd.insert(r.pointwise_lppd.end(), b.pointwise_lppd.begin(), b.pointwise_lppd.end());
    r.pointwise_p_waic = a.pointwise_p_waic;
    r.pointwise_p_waic.insert(r.pointwise_p_waic.end(), b.pointwise_p_waic.begin(),
                              b.pointwise_p_waic.end());
    return r;
}

EvalMetrics evaluate_replicates(std::span<const ReplicateEstimates> replicates) {
    if (replicates.empty()) {
        throw std::invalid_argument("evaluate_replicates: no replicates");
    }
    const std::size_t counties = replicates.front().truth.size();
    double sq = 0.0, covered = 0.0, width = 0.0;
    std::size_t pairs = 0;
    for (const auto &r : replicates) {
        const std::size_t k = r.truth.size();
        if (k == 0 || k != counties || r.estimate.size() != k || r.lower.size() != k ||
            r.upper.size() != k) {
            throw std::invalid_argument("evaluate_replicates: dimension mismatch");
        }
        for (std::size_t i = 0; i < k; ++i) {
            const double err = r.estimate[i] - r.truth[i];
            sq += err * err;
            if (r.truth[i] >= r.lower[i] && r.truth[i] <= r.upper[i]) {
                covered += 1.0;
            }
            width += r.upper[i] - r.lower[i];
            ++pairs;
        }
    }
    const double m = static_cast<double>(pairs);
    return {std::sqrt(sq / m), covered / m, width / m, pairs};
}

namespace {

double mean_of(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) {
        ss += (v - m) * (v - m);
    }
    return ss / (static_cast<double>(x.size()) - 1.0);
}

void check_chains(std::span<const std::vector<double>> chains, std::size_t min_length) {
    if (chains.empty()) {
        throw std::invalid_argument("convergence: no chains");
    }
    const std::size_t len = chains.front().size();
    for (const auto &c : chains) {
        if (c.size() != len) {
            throw std::invalid_argument("convergence: chains differ in length");
        }
    }
    if (len < min_length) {
        throw std::invalid_argument("convergence: chains too short");
    }
}

} // namespace

double split_rhat(std::span<const std::vector<double>> chains) {
    check_chains(chains, 4);
    const std::size_t half = chains.front().size() / 2;
    std::vector<std::span<const double>> parts;
    for (const auto &c : chains) {
        parts.emplace_back(c.data(), half);
        parts.emplace_back(c.data() + c.size() - half, half);
    }
    const double n = static_cast<double>(half);
    const double m = static_cast<double>(parts.size());
    std::vector<double> means;
    double W = 0.0;
    for (auto p : parts) {
        means.push_back(mean_of(p));
        W += variance_of(p);
    }
    W /= m;
    const double grand = mean_of(means);
    double B = 0.0;
    for (double x : means) {
        B += (x - grand) * (x - grand);
    }
    B *= n / (m - 1.0);
    if (W <= 0.0) {
        return B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    const double var_plus = (n - 1.0) / n * W + B / n;
    return std::sqrt(var_plus / W);
}

double effective_sample_size(std::span<const std::vector<double>> chains) {
    check_chains(chains, 4);
    const std::size_t N = chains.front().size();
    const double n = static_cast<double>(N);
    const double M = static_cast<double>(chains.size());

    std::vector<double> means, vars;
    std::vector<std::vector<double>> centered;
    for (const auto &c : chains) {
        means.push_back(mean_of(c));
        vars.push_back(variance_of(c));
        std::vector<double> d(c.size());
        for (std::size_t t = 0; t < c.size(); ++t) {
            d[t] = c[t] - means.back();
        }
        centered.push_back(std::move(d));
    }
    const double W = mean_of(vars);
    double B = 0.0;
    if (chains.size() > 1) {
        const double grand = mean_of(means);
        for (double x : means) {
            B += (x - grand) * (x - grand);
        }
        B *= n / (M - 1.0);
    }
    const double var_plus = (n - 1.0) / n * W + B / n;
    if (!(var_plus > 0.0)) {
        return M * n;
    }

    // Biased autocovariance estimator per chain (divisor N), averaged across chains.
    auto rho_at = [&](std::size_t lag) {
        double acov = 0.0;
        for (const auto &d : centered) {
            double s = 0.0;
            for (std::size_t t = 0; t + lag < N; ++t) {
                s += d[t] * d[t + lag];
            }
            acov += s / n;
        }
        acov /= M;
        return 1.0 - (W * (n - 1.0) / n - acov) / var_plus;
    };

    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < N; ++k) {
        double pair = rho_at(2 * k) + rho_at(2 * k + 1);
        if (pair < 0.0) {
            break;
        }
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / std::log10(M * n));
    return M * n / tau;
}

std::vector<ParameterConvergence> convergence_summary(std::span<const PosteriorDraws> chains) {
    if (chains.empty()) {
        throw std::invalid_argument("convergence_summary: no chains");
    }
    const auto &first = chains.front();
    for (const auto &c : chains) {
        if (c.draws < 100) {
            throw std::invalid_argument("convergence_summary: need at least 100 retained draws");
        }
        if (c.draws != first.draws || c.units != first.units || c.clusters != first.clusters) {
            throw std::invalid_argument("convergence_summary: chains are not comparable");
        }
    }
    std::vector<ParameterConvergence> out;
    auto add = [&](std::string name, auto extract) {
        std::vector<std::vector<double>> series;
        for (const auto &c : chains) {
            std::vector<double> x(c.draws);
            for (std::size_t s = 0; s < c.draws; ++s) {
                x[s] = extract(c, s);
            }
            series.push_back(std::move(x));
        }
        out.push_back({std::move(name), effective_sample_size(series), split_rhat(series)});
    };
    for (int k = 0; k < first.clusters; ++k) {
        add("beta" + std::to_string(k + 1),
            [k](const PosteriorDraws &c, std::size_t s) { return c.beta[s * c.clusters + k]; });
    }
    add("sigma2_v", [](const PosteriorDraws &c, std::size_t s) { return c.sigma2_v[s]; });
    if (!first.sigma2_u.empty()) {
        add("sigma2_u", [](const PosteriorDraws &c, std::size_t s) { return c.sigma2_u[s]; });
    }
    if (!first.rho.empty()) {
        add("rho", [](const PosteriorDraws &c, std::size_t s) { return c.rho[s]; });
    }
    for (std::size_t i = 0; i < first.units; ++i) {
        const std::string id = i < first.unit_ids.size() ? first.unit_ids[i] : std::to_string(i);
        add("p[" + id + "]", [i](const PosteriorDraws &c, std::size_t s) { return c.p_at(s, i); });
    }
    return out;
}

std::string convergence_csv(std::span<const ParameterConvergence> rows) {
    std::ostringstream out;
    out << "parameter,ess,split_rhat\n";
    for (const auto &r : rows) {
        out << csv_escape(r.parameter) << ',' << format_double(r.ess) << ','
            << format_double(r.split_rhat) << '\n';
    }
    return out.str();
}

} // namespace iceseg
