#include "iceseg/simstudy.hpp"

#include "iceseg/errors.hpp"
#include "iceseg/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace iceseg {

ScenarioSpec ScenarioSpec::standard(int id, std::int64_t population, int replicates) {
    ScenarioSpec s;
    s.id = id;
    s.population = population;
    s.replicates = replicates;
    switch (id) {
    case 1:
        s.mean1 = s.mean2 = -1.72;
        s.variance = 0.2;
        s.rho = 0.2;
        break;
    case 2:
        s.mean1 = s.mean2 = -1.72;
        s.variance = 0.2;
        s.rho = 0.65;
        break;
    case 3:
        s.mean1 = -1.72;
        s.mean2 = -0.4;
        s.variance = 0.4;
        s.rho = 0.2;
        break;
    case 4:
        s.mean1 = -1.72;
        s.mean2 = -0.4;
        s.variance = 0.4;
        s.rho = 0.65;
        break;
    default:
        throw UsageError("unknown scenario " + std::to_string(id) + " (expected 1-4)");
    }
    return s;
}

void ScenarioSpec::validate() const {
    if (id < 1 || id > 4) {
        throw UsageError("unknown scenario " + std::to_string(id) + " (expected 1-4)");
    }
    if (population < 1) {
        throw std::invalid_argument("scenario: population must be positive");
    }
    if (!(variance >= 0.0)) {
        throw std::invalid_argument("scenario: variance must be non-negative");
    }
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw std::invalid_argument("scenario: rho must lie in [0, 1)");
    }
    if (replicates < 1) {
        throw std::invalid_argument("scenario: replicates must be >= 1");
    }
}

std::vector<double> SimulatedDataset::true_ice() const {
    std::vector<double> out(p1.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        out[i] = p1[i] - p2[i];
    }
    return out;
}

SimulatedDataset generate(const ScenarioSpec &scenario, const AdjacencyGraph &graph,
                          std::uint64_t seed, int replicate) {
    scenario.validate();
    if (graph.size() < 2) {
        throw std::invalid_argument("generate: graph needs at least 2 units");
    }
    SimulatedDataset ds;
    ds.scenario = scenario.id;
    ds.replicate = replicate;
    ds.seed = seed;
    Rng rng(seed);

    std::vector<double> x1, x2;
    if (scenario.variance > 0.0) {
        const GmrfSampler sampler(car_precision(graph, CarKind::proper, scenario.rho));
        x1 = sampler.sample(scenario.variance, rng);
        x2 = sampler.sample(scenario.variance, rng);
    } else {
        x1.assign(graph.size(), 0.0);
        x2.assign(graph.size(), 0.0);
    }
    const std::size_t n = graph.size();
    ds.p1.resize(n);
    ds.p2.resize(n);
    ds.observations.resize(n);
    const auto N = scenario.population;
    for (std::size_t i = 0; i < n; ++i) {
        ds.p1[i] = inv_logit(scenario.mean1 + x1[i]);
        ds.p2[i] = inv_logit(scenario.mean2 + x2[i]);
        auto &obs = ds.observations[i];
        obs.unit_id = graph.unit_ids()[i];
        obs.n_total = N;
        for (;;) {
            obs.y_group1 = binomial(N, ds.p1[i], rng);
            obs.y_group2 = binomial(N, ds.p2[i], rng);
            if (obs.y_group1 + obs.y_group2 <= N) {
                break;
            }
            ++ds.redraws;
        }
    }
    return ds;
}

AdjacencyGraph default_experiment_graph() { return rook_lattice(12, 13); }

std::string ModelChoice::label() const {
    ModelSpec s;
    s.approach = approach;
    s.clusters = clusters;
    return s.label();
}

ModelChoice ModelChoice::parse(const std::string &name) {
    if (name.rfind("local", 0) == 0) {
        const std::string digits = name.substr(5);
        int q = 1;
        if (!digits.empty()) {
            try {
                q = std::stoi(digits);
            } catch (const std::exception &) {
                throw UsageError("unknown model '" + name + "'");
            }
        }
        if (q < 1) {
            throw UsageError("local model needs at least one cluster: '" + name + "'");
        }
        return {Approach::local, q};
    }
    return {parse_approach(name), 1};
}

std::vector<ModelChoice> default_models() {
    return {{Approach::bootstrap, 1}, {Approach::bym, 1},   {Approach::icar, 1},
            {Approach::leroux, 1},    {Approach::local, 2}, {Approach::local, 3}};
}

void ExperimentConfig::validate() const {
    if (scenarios.empty()) {
        throw UsageError("experiment: empty scenario list");
    }
    for (int s : scenarios) {
        ScenarioSpec::standard(s, 1);
    }
    if (populations.empty()) {
        throw UsageError("experiment: empty N list");
    }
    for (auto p : populations) {
        if (p < 1) {
            throw UsageError("experiment: N must be positive");
        }
    }
    if (models.empty()) {
        throw UsageError("experiment: empty model list");
    }
    if (replicates < 1) {
        throw UsageError("experiment: replicates must be >= 1");
    }
    if (threads < 1) {
        throw UsageError("experiment: threads must be >= 1");
    }
    for (const auto &m : models) {
        model_spec(m, 0).validate();
    }
}

ModelSpec ExperimentConfig::model_spec(const ModelChoice &m, std::uint64_t model_seed) const {
    ModelSpec spec;
    spec.approach = m.approach;
    spec.clusters = m.clusters;
    spec.prior_shape = prior_shape;
    spec.prior_rate = prior_rate;
    spec.mcmc = {iterations, burn_in, thin, model_seed};
    spec.bootstrap_replicates = bootstrap_replicates;
    return spec;
}

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

} // namespace

ExperimentConfig read_experiment_config(const std::filesystem::path &path) {
    std::istringstream in(read_text_file(path));
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(where + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto integer = [&] { return parse_integer(value, where + " (" + key + ")"); };
        if (key == "scenarios") {
            cfg.scenarios.clear();
            for (const auto &s : split_list(value)) {
                cfg.scenarios.push_back(static_cast<int>(parse_integer(s, where)));
            }
        } else if (key == "N") {
            cfg.populations.clear();
            for (const auto &s : split_list(value)) {
                cfg.populations.push_back(parse_integer(s, where));
            }
        } else if (key == "models") {
            cfg.models.clear();
            for (const auto &s : split_list(value)) {
                cfg.models.push_back(ModelChoice::parse(s));
            }
        } else if (key == "replicates") {
            cfg.replicates = static_cast<int>(integer());
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(integer());
        } else if (key == "out") {
            cfg.output_dir = value;
        } else if (key == "iterations") {
            cfg.iterations = static_cast<int>(integer());
        } else if (key == "burnin") {
            cfg.burn_in = static_cast<int>(integer());
        } else if (key == "thin") {
            cfg.thin = static_cast<int>(integer());
        } else if (key == "b") {
            cfg.bootstrap_replicates = static_cast<int>(integer());
        } else if (key == "prior_a") {
            cfg.prior_shape = parse_double(value, where);
        } else if (key == "prior_b") {
            cfg.prior_rate = parse_double(value, where);
        } else if (key == "threads") {
            cfg.threads = static_cast<int>(integer());
        } else if (key == "adjacency") {
            cfg.adjacency = std::filesystem::path(value);
        } else {
            throw UsageError(where + ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

const CellResult *ExperimentResult::find(int scenario, std::int64_t population,
                                         const std::string &model) const {
    for (const auto &c : cells) {
        if (c.scenario == scenario && c.population == population && c.model == model) {
            return &c;
        }
    }
    return nullptr;
}

FitOutcome fit_dataset(std::span<const CountyObservation> data, const AdjacencyGraph &graph,
                       const ModelSpec &spec, int threads) {
    spec.validate();
    FitOutcome out;
    if (spec.approach == Approach::bootstrap) {
        out.summary = bootstrap_ice(data, spec.bootstrap_replicates, spec.mcmc.seed, threads);
        return out;
    }
    const IceFit fit = fit_ice_model(data, graph, spec, threads);
    out.summary = posterior_ice(fit.group1, fit.group2);
    attach_names(out.summary, data);
    out.waic = combine(waic(fit.group1), waic(fit.group2));
    return out;
}

EvalMetrics evaluate_summaries(std::span<const IceSummary> summaries,
                               std::span<const std::vector<double>> truths) {
    if (summaries.size() != truths.size()) {
        throw std::invalid_argument("evaluate_summaries: summary and truth counts differ");
    }
    std::vector<ReplicateEstimates> reps;
    for (std::size_t r = 0; r < summaries.size(); ++r) {
        ReplicateEstimates e;
        for (const auto &c : summaries[r].counties) {
            e.estimate.push_back(c.ice.estimate);
            e.lower.push_back(c.ice.lower);
            e.upper.push_back(c.ice.upper);
        }
        e.truth = truths[r];
        reps.push_back(std::move(e));
    }
    return evaluate_replicates(reps);
}

namespace {

struct ReplicateOutcome {
    bool ok = false;
    std::string error;
    ReplicateEstimates estimates;
    std::optional<double> waic;
    double statewide = 0.0;
};

} // namespace

ExperimentResult run_experiment(const ExperimentConfig &config, const AdjacencyGraph &graph) {
    config.validate();
    struct Task {
        int scenario;
        std::int64_t population;
        int replicate;
    };
    std::vector<Task> tasks;
    for (int s : config.scenarios) {
        for (auto N : config.populations) {
            for (int r = 0; r < config.replicates; ++r) {
                tasks.push_back({s, N, r});
            }
        }
    }
    const std::size_t models = config.models.size();
    std::vector<ReplicateOutcome> outcomes(tasks.size() * models);

    auto run_task = [&](std::size_t t) {
        const Task &task = tasks[t];
        const std::uint64_t data_seed =
            derive_seed(config.seed, {0, static_cast<std::uint64_t>(task.scenario),
                                      static_cast<std::uint64_t>(task.population),
                                      static_cast<std::uint64_t>(task.replicate)});
        const ScenarioSpec spec =
            ScenarioSpec::standard(task.scenario, task.population, config.replicates);
        SimulatedDataset ds;
        std::string data_error;
        try {
            ds = generate(spec, graph, data_seed, task.replicate);
        } catch (const std::exception &e) {
            data_error = std::string("generate: ") + e.what();
        }
        const auto truth = ds.true_ice();
        for (std::size_t m = 0; m < models; ++m) {
            auto &slot = outcomes[t * models + m];
            if (!data_error.empty()) {
                slot.error = data_error;
                continue;
            }
            const std::uint64_t model_seed =
                derive_seed(config.seed, {1, static_cast<std::uint64_t>(task.scenario),
                                          static_cast<std::uint64_t>(task.population),
                                          static_cast<std::uint64_t>(task.replicate), m});
            try {
                const FitOutcome fit =
                    fit_dataset(ds.observations, graph, config.model_spec(config.models[m], model_seed));
                for (const auto &c : fit.summary.counties) {
                    slot.estimates.estimate.push_back(c.ice.estimate);
                    slot.estimates.lower.push_back(c.ice.lower);
                    slot.estimates.upper.push_back(c.ice.upper);
                }
                slot.estimates.truth = truth;
                if (fit.waic) {
                    slot.waic = fit.waic->waic;
                }
                slot.statewide = fit.summary.statewide.estimate;
                slot.ok = true;
            } catch (const std::exception &e) {
                slot.error = e.what();
            }
        }
    };

    const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(tasks.size())));
    if (workers == 1) {
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            run_task(t);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < tasks.size(); t = next++) {
                    run_task(t);
                }
            });
        }
        for (auto &th : pool) {
            th.join();
        }
    }

    ExperimentResult result;
    for (int s : config.scenarios) {
        for (auto N : config.populations) {
            for (std::size_t m = 0; m < models; ++m) {
                CellResult cell;
                cell.scenario = s;
                cell.population = N;
                cell.model = config.models[m].label();
                std::vector<ReplicateEstimates> reps;
                double waic_sum = 0.0;
                int waic_count = 0;
                double state_sum = 0.0;
                for (std::size_t t = 0; t < tasks.size(); ++t) {
                    if (tasks[t].scenario != s || tasks[t].population != N) {
                        continue;
                    }
                    const auto &o = outcomes[t * models + m];
                    if (!o.ok) {
                        ++cell.failed;
                        cell.failures.push_back("replicate " + std::to_string(tasks[t].replicate) +
                                                ": " + o.error);
                        continue;
                    }
                    ++cell.succeeded;
                    reps.push_back(o.estimates);
                    state_sum += o.statewide;
                    if (o.waic) {
                        waic_sum += *o.waic;
                        ++waic_count;
                    }
                }
                if (!reps.empty()) {
                    cell.metrics = evaluate_replicates(reps);
                    cell.mean_statewide = state_sum / static_cast<double>(reps.size());
                }
                if (waic_count > 0) {
                    cell.mean_waic = waic_sum / waic_count;
                }
                result.cells.push_back(std::move(cell));
            }
        }
    }
    return result;
}

std::string experiment_table_csv(const ExperimentResult &result, std::int64_t population,
                                 std::span<const ModelChoice> models) {
    std::vector<int> scenarios;
    for (const auto &c : result.cells) {
        if (c.population == population &&
            std::find(scenarios.begin(), scenarios.end(), c.scenario) == scenarios.end()) {
            scenarios.push_back(c.scenario);
        }
    }
    std::ostringstream out;
    out << "metric,scenario";
    for (const auto &m : models) {
        out << ',' << m.label();
    }
    out << '\n';
    auto row = [&](const char *metric, auto value) {
        for (int s : scenarios) {
            out << metric << ',' << s;
            for (const auto &m : models) {
                const CellResult *c = result.find(s, population, m.label());
                out << ',';
                if (c == nullptr || c->succeeded == 0) {
                    out << "NA";
                    continue;
                }
                const auto v = value(*c);
                out << (v ? format_double(*v) : std::string("NA"));
            }
            out << '\n';
        }
    };
    row("RMSE", [](const CellResult &c) { return std::optional<double>(c.metrics.rmse); });
    row("Coverage",
        [](const CellResult &c) { return std::optional<double>(100.0 * c.metrics.coverage); });
    row("Width", [](const CellResult &c) { return std::optional<double>(c.metrics.width); });
    row("WAIC", [](const CellResult &c) { return c.mean_waic; });
    return out.str();
}

std::string experiment_cells_csv(const ExperimentResult &result) {
    std::ostringstream out;
    out << "scenario,N,model,rmse,coverage,width,waic,statewide,replicates_ok,replicates_failed\n";
    for (const auto &c : result.cells) {
        out << c.scenario << ',' << c.population << ',' << c.model << ','
            << (c.succeeded ? format_double(c.metrics.rmse) : "NA") << ','
            << (c.succeeded ? format_double(c.metrics.coverage) : "NA") << ','
            << (c.succeeded ? format_double(c.metrics.width) : "NA") << ','
            << (c.mean_waic ? format_double(*c.mean_waic) : "NA") << ','
            << (c.succeeded ? format_double(c.mean_statewide) : "NA") << ',' << c.succeeded << ','
            << c.failed << '\n';
    }
    return out.str();
}

} // namespace iceseg
