#include "iceseg/cli.hpp"

#include "iceseg/diagnostics.hpp"
#include "iceseg/errors.hpp"
#include "iceseg/graph.hpp"
#include "iceseg/ice.hpp"
#include "iceseg/io.hpp"
#include "iceseg/mcmc.hpp"
#include "iceseg/model.hpp"
#include "iceseg/simstudy.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace iceseg {

namespace {

std::string absolute_string(const std::string &p) {
    return p.empty() ? p : fs::absolute(fs::path(p)).lexically_normal().string();
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string file_digest(const std::string &path) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a(read_text_file(path));
    return ss.str();
}

void ensure_dir(const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw UsageError("cannot create output directory " + dir.string());
    }
}

void write_json(const fs::path &path, const json &j) { write_text_file(path, j.dump(2) + "\n"); }

/// Records everything needed to re-run the command: the normalised argument vector,
/// input digests and the software version.
void write_manifest(const fs::path &out_dir, const std::string &command,
                    const std::vector<std::string> &argv, const std::vector<std::string> &inputs,
                    std::optional<std::uint64_t> seed) {
    json in = json::object();
    for (const auto &p : inputs) {
        if (!p.empty()) {
            in[p] = file_digest(p);
        }
    }
    json j = {{"command", command}, {"argv", argv},   {"inputs", in},
              {"version", version_string}, {"timestamp", utc_timestamp()}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    write_json(out_dir / "manifest.json", j);
}

json spec_json(const ModelSpec &spec) {
    return {{"model", to_string(spec.approach)},
            {"label", spec.label()},
            {"clusters", spec.clusters},
            {"prior_a", spec.prior_shape},
            {"prior_b", spec.prior_rate},
            {"iterations", spec.mcmc.iterations},
            {"burnin", spec.mcmc.burn_in},
            {"thin", spec.mcmc.thin},
            {"seed", spec.mcmc.seed},
            {"bootstrap_replicates", spec.bootstrap_replicates}};
}

json nan_to_null(double x) { return std::isnan(x) ? json(nullptr) : json(x); }

json acceptance_json(const AcceptanceSummary &a) {
    return {{"v", nan_to_null(a.v)},
            {"u", nan_to_null(a.u)},
            {"beta", nan_to_null(a.beta)},
            {"rho", nan_to_null(a.rho)}};
}

json waic_json(const WaicResult &w) {
    return {{"waic", w.waic}, {"lppd", w.lppd}, {"p_waic", w.p_waic},
            {"points", w.pointwise_lppd.size()}};
}

// --- option bundles -------------------------------------------------------

struct ModelOptions {
    std::string model = "bym";
    int clusters = 1;
    int iterations = 50000;
    int burn_in = 20000;
    int thin = 1;
    int bootstrap = 10000;
    double prior_a = 1.0;
    double prior_b = 0.01;
    int threads = 1;

    void add_to(CLI::App *cmd, bool with_model) {
        if (with_model) {
            cmd->add_option("--model", model, "bootstrap|icar|bym|leroux|local")
                ->check(CLI::IsMember({"bootstrap", "icar", "bym", "leroux", "local"}));
            cmd->add_option("--clusters", clusters, "cluster count for the local model")
                ->check(CLI::PositiveNumber);
        }
        cmd->add_option("--iters", iterations, "MCMC iterations")->check(CLI::PositiveNumber);
        cmd->add_option("--burnin", burn_in, "burn-in iterations")->check(CLI::NonNegativeNumber);
        cmd->add_option("--thin", thin, "thinning interval")->check(CLI::PositiveNumber);
        cmd->add_option("--b", bootstrap, "bootstrap replicates")->check(CLI::PositiveNumber);
        cmd->add_option("--prior-a", prior_a, "inverse-gamma shape")->check(CLI::PositiveNumber);
        cmd->add_option("--prior-b", prior_b, "inverse-gamma scale")->check(CLI::PositiveNumber);
        cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    }

    ModelSpec spec(std::uint64_t seed) const {
        ModelSpec s;
        s.approach = parse_approach(model);
        s.clusters = s.approach == Approach::local ? clusters : 1;
        if (s.approach != Approach::local && clusters != 1) {
            throw UsageError("--clusters applies only to --model local");
        }
        s.prior_shape = prior_a;
        s.prior_rate = prior_b;
        s.mcmc = {iterations, burn_in, thin, seed};
        s.bootstrap_replicates = bootstrap;
        if (s.approach != Approach::bootstrap && iterations <= burn_in) {
            throw UsageError("--iters must exceed --burnin");
        }
        return s;
    }

    std::vector<std::string> argv(bool with_model) const {
        std::vector<std::string> a;
        if (with_model) {
            a.insert(a.end(), {"--model", model, "--clusters", std::to_string(clusters)});
        }
        a.insert(a.end(), {"--iters", std::to_string(iterations), "--burnin", std::to_string(burn_in),
                           "--thin", std::to_string(thin), "--b", std::to_string(bootstrap),
                           "--prior-a", format_double(prior_a), "--prior-b", format_double(prior_b),
                           "--threads", std::to_string(threads)});
        return a;
    }
};

AdjacencyGraph load_graph(const std::string &path, const std::vector<CountyObservation> &data) {
    std::vector<std::string> ids;
    for (const auto &o : data) {
        ids.push_back(o.unit_id);
    }
    if (path.empty()) {
        // Bootstrap needs no neighbourhood structure.
        return AdjacencyGraph::from_edges({}, ids);
    }
    return read_adjacency(path, ids);
}

// --- commands -------------------------------------------------------------

struct FitCommand {
    std::string data, adjacency, out;
    std::optional<std::uint64_t> seed;
    bool dump_draws = false;
    ModelOptions model;

    int run(std::ostream &out_stream, std::ostream &err) const {
        const ModelSpec spec = model.spec(*seed);
        spec.validate();
        const auto obs = read_observations(data);
        if (spec.approach != Approach::bootstrap && adjacency.empty()) {
            throw UsageError("--adjacency is required for model " + model.model);
        }
        const AdjacencyGraph graph = load_graph(adjacency, obs);
        for (int g : {1, 2}) {
            if (spec.approach != Approach::bootstrap && all_at_boundary(obs, g)) {
                err << "warning: every county has y = 0 or y = n for group " << g
                    << "; the flat-intercept posterior may be improper\n";
            }
        }
        ensure_dir(out);
        const fs::path dir(out);

        json summary_json;
        json waic_doc = {{"model", spec.label()}};
        std::string convergence = "group,parameter,ess,split_rhat\n";
        if (spec.approach == Approach::bootstrap) {
            IceSummary summary = bootstrap_ice(obs, spec.bootstrap_replicates, spec.mcmc.seed,
                                               model.threads);
            summary_json = to_json(summary);
            write_text_file(dir / "ice_counties.csv", ice_counties_csv(summary));
            waic_doc["waic"] = nullptr;
            out_stream << summary.label << " statewide ICE " << format_double(summary.statewide.estimate)
                       << " (" << format_double(summary.statewide.lower) << ", "
                       << format_double(summary.statewide.upper) << ")\n";
        } else {
            const IceFit fit = fit_ice_model(obs, graph, spec, model.threads);
            IceSummary summary = posterior_ice(fit.group1, fit.group2);
            attach_names(summary, obs);
            summary_json = to_json(summary);
            summary_json["sampler"] = {{"group1", acceptance_json(fit.group1.acceptance)},
                                       {"group2", acceptance_json(fit.group2.acceptance)}};
            write_text_file(dir / "ice_counties.csv", ice_counties_csv(summary));
            const WaicResult w1 = waic(fit.group1);
            const WaicResult w2 = waic(fit.group2);
            const WaicResult joint = combine(w1, w2);
            waic_doc["waic"] = joint.waic;
            waic_doc["lppd"] = joint.lppd;
            waic_doc["p_waic"] = joint.p_waic;
            waic_doc["group1"] = waic_json(w1);
            waic_doc["group2"] = waic_json(w2);
            if (fit.group1.draws >= 100) {
                std::ostringstream cs;
                for (int g : {1, 2}) {
                    const PosteriorDraws &d = g == 1 ? fit.group1 : fit.group2;
                    for (const auto &row : convergence_summary(std::span(&d, 1))) {
                        cs << g << ',' << csv_escape(row.parameter) << ',' << format_double(row.ess)
                           << ',' << format_double(row.split_rhat) << '\n';
                    }
                }
                convergence += cs.str();
            } else {
                err << "warning: fewer than 100 retained draws; convergence.csv left empty\n";
            }
            if (dump_draws) {
                write_draws_csv(fit, dir / "draws.csv");
            }
            out_stream << summary.label << " statewide ICE " << format_double(summary.statewide.estimate)
                       << " (" << format_double(summary.statewide.lower) << ", "
                       << format_double(summary.statewide.upper) << "), WAIC "
                       << format_double(joint.waic) << "\n";
        }
        summary_json["spec"] = spec_json(spec);
        write_json(dir / "ice_summary.json", summary_json);
        write_json(dir / "waic.json", waic_doc);
        write_text_file(dir / "convergence.csv", convergence);
        write_manifest(dir, "fit", argv(), {data, adjacency}, seed);
        return exit_ok;
    }

    std::vector<std::string> argv() const {
        std::vector<std::string> a{"fit", "--data", data};
        if (!adjacency.empty()) {
            a.insert(a.end(), {"--adjacency", adjacency});
        }
        a.insert(a.end(), {"--seed", std::to_string(*seed), "--out", out});
        auto m = model.argv(true);
        a.insert(a.end(), m.begin(), m.end());
        if (dump_draws) {
            a.push_back("--dump-draws");
        }
        return a;
    }
};

struct SimulateCommand {
    int scenario = 1;
    std::int64_t population = 150;
    int replicates = 1;
    std::optional<std::uint64_t> seed;
    std::string adjacency, out;

    int run(std::ostream &out_stream) const {
        if (scenario < 1 || scenario > 4) {
            throw UsageError("--scenario must be 1, 2, 3 or 4 (got " + std::to_string(scenario) + ")");
        }
        const ScenarioSpec spec = ScenarioSpec::standard(scenario, population, replicates);
        spec.validate();
        const AdjacencyGraph graph =
            adjacency.empty() ? default_experiment_graph() : read_adjacency(adjacency);
        ensure_dir(out);
        const fs::path dir(out);
        write_edge_list_csv(graph, dir / "adjacency.csv");
        std::ostringstream truths;
        truths << "replicate,fips,p1,p2,ice\n";
        int redraws = 0;
        for (int r = 1; r <= replicates; ++r) {
            const auto ds = generate(spec, graph,
                                     derive_seed(*seed, {static_cast<std::uint64_t>(scenario),
                                                         static_cast<std::uint64_t>(population),
                                                         static_cast<std::uint64_t>(r)}),
                                     r);
            redraws += ds.redraws;
            std::ostringstream name;
            name << "replicate_" << std::setw(3) << std::setfill('0') << r << ".csv";
            write_observations(ds.observations, dir / name.str());
            for (std::size_t i = 0; i < ds.p1.size(); ++i) {
                truths << r << ',' << csv_escape(ds.observations[i].unit_id) << ','
                       << format_double(ds.p1[i]) << ',' << format_double(ds.p2[i]) << ','
                       << format_double(ds.p1[i] - ds.p2[i]) << '\n';
            }
        }
        write_text_file(dir / "truths.csv", truths.str());
        write_json(dir / "simulation.json", {{"scenario", scenario},
                                              {"N", population},
                                              {"replicates", replicates},
                                              {"mean1", spec.mean1},
                                              {"mean2", spec.mean2},
                                              {"variance", spec.variance},
                                              {"rho", spec.rho},
                                              {"units", graph.size()},
                                              {"redraws", redraws}});
        write_manifest(dir, "simulate", argv(), {adjacency}, seed);
        out_stream << "wrote " << replicates << " replicate(s) of scenario " << scenario << " to "
                   << out << "\n";
        return exit_ok;
    }

    std::vector<std::string> argv() const {
        std::vector<std::string> a{"simulate", "--scenario", std::to_string(scenario), "--n",
                                   std::to_string(population), "--replicates",
                                   std::to_string(replicates), "--seed", std::to_string(*seed),
                                   "--out", out};
        if (!adjacency.empty()) {
            a.insert(a.end(), {"--adjacency", adjacency});
        }
        return a;
    }
};

struct EvaluateCommand {
    std::string config_path, sim_dir, out, models;
    std::vector<std::string> summaries;
    std::optional<std::uint64_t> seed;
    ModelOptions model;
    bool models_given = false;

    int run(std::ostream &out_stream) const {
        const int modes = !config_path.empty() + !sim_dir.empty();
        if (modes != 1) {
            throw UsageError("evaluate needs exactly one of --config or --sim-dir");
        }
        if (!config_path.empty()) {
            return run_config(out_stream);
        }
        return run_sim_dir(out_stream);
    }

    int run_config(std::ostream &out_stream) const {
        ExperimentConfig cfg = read_experiment_config(config_path);
        if (!out.empty()) {
            cfg.output_dir = out;
        }
        if (cfg.output_dir.empty()) {
            throw UsageError("experiment output directory missing (set 'out' or --out)");
        }
        if (model.threads > 1) {
            cfg.threads = model.threads;
        }
        const AdjacencyGraph graph =
            cfg.adjacency ? read_adjacency(*cfg.adjacency) : default_experiment_graph();
        const ExperimentResult result = run_experiment(cfg, graph);
        write_outputs(result, cfg.populations, cfg.models, cfg.output_dir, out_stream);
        std::vector<std::string> inputs{absolute_string(config_path)};
        if (cfg.adjacency) {
            inputs.push_back(cfg.adjacency->string());
        }
        write_manifest(cfg.output_dir, "evaluate", argv(), inputs, cfg.seed);
        return exit_ok;
    }

    int run_sim_dir(std::ostream &out_stream) const {
        const fs::path dir(sim_dir);
        const fs::path truths_path = dir / "truths.csv";
        if (!fs::exists(truths_path)) {
            throw DataError("missing truths file " + truths_path.string());
        }
        if (out.empty()) {
            throw UsageError("--out is required");
        }
        const CsvTable truths_table = read_csv(truths_path);
        const auto c_rep = truths_table.column("replicate");
        const auto c_ice = truths_table.column("ice");
        std::map<long long, std::vector<double>> truths;
        for (const auto &row : truths_table.rows) {
            const auto r = parse_integer(row.fields[c_rep], truths_path.string());
            truths[r].push_back(parse_double(row.fields[c_ice], truths_path.string()));
        }
        std::vector<std::vector<double>> truth_list;
        for (auto &[r, t] : truths) {
            truth_list.push_back(t);
        }
        const json sim = json::parse(read_text_file(dir / "simulation.json"));
        const int scenario = sim.at("scenario").get<int>();
        const auto population = sim.at("N").get<std::int64_t>();

        ExperimentResult result;
        std::vector<ModelChoice> columns;
        if (!summaries.empty()) {
            if (summaries.size() != truth_list.size()) {
                throw DataError("--summaries lists " + std::to_string(summaries.size()) +
                                " files but the simulation has " + std::to_string(truth_list.size()) +
                                " replicates");
            }
            std::vector<IceSummary> loaded;
            for (const auto &p : summaries) {
                loaded.push_back(ice_summary_from_json(json::parse(read_text_file(p)), p));
            }
            CellResult cell;
            cell.scenario = scenario;
            cell.population = population;
            cell.model = loaded.front().label;
            cell.metrics = evaluate_summaries(loaded, truth_list);
            cell.succeeded = static_cast<int>(loaded.size());
            result.cells.push_back(cell);
            ModelChoice label_only;
            for (const auto &m : default_models()) {
                if (m.label() == cell.model) {
                    label_only = m;
                }
            }
            columns.push_back(label_only);
        } else {
            if (!models_given) {
                throw UsageError("--sim-dir needs --models or --summaries");
            }
            if (!seed) {
                throw UsageError("--seed is required when fitting models");
            }
            std::stringstream ss(models);
            for (std::string m; std::getline(ss, m, ',');) {
                if (!m.empty()) {
                    columns.push_back(ModelChoice::parse(m));
                }
            }
            if (columns.empty()) {
                throw UsageError("empty model list");
            }
            const auto first = read_observations(dir / "replicate_001.csv");
            const AdjacencyGraph graph = load_graph((dir / "adjacency.csv").string(), first);
            ExperimentConfig cfg;
            cfg.iterations = model.iterations;
            cfg.burn_in = model.burn_in;
            cfg.thin = model.thin;
            cfg.bootstrap_replicates = model.bootstrap;
            cfg.prior_shape = model.prior_a;
            cfg.prior_rate = model.prior_b;
            for (std::size_t m = 0; m < columns.size(); ++m) {
                CellResult cell;
                cell.scenario = scenario;
                cell.population = population;
                cell.model = columns[m].label();
                std::vector<IceSummary> fitted;
                double waic_sum = 0.0;
                int waic_count = 0;
                for (std::size_t r = 0; r < truth_list.size(); ++r) {
                    std::ostringstream name;
                    name << "replicate_" << std::setw(3) << std::setfill('0') << r + 1 << ".csv";
                    const auto obs = read_observations(dir / name.str());
                    const auto fit = fit_dataset(
                        obs, graph, cfg.model_spec(columns[m], derive_seed(*seed, {r, m})),
                        model.threads);
                    fitted.push_back(fit.summary);
                    if (fit.waic) {
                        waic_sum += fit.waic->waic;
                        ++waic_count;
                    }
                }
                cell.metrics = evaluate_summaries(fitted, truth_list);
                cell.succeeded = static_cast<int>(fitted.size());
                if (waic_count > 0) {
                    cell.mean_waic = waic_sum / waic_count;
                }
                result.cells.push_back(cell);
            }
        }
        write_outputs(result, {population}, columns, out, out_stream);
        write_manifest(out, "evaluate", argv(), {absolute_string(truths_path.string())}, seed);
        return exit_ok;
    }

    static void write_outputs(const ExperimentResult &result, const std::vector<std::int64_t> &ns,
                              const std::vector<ModelChoice> &columns, const fs::path &dir,
                              std::ostream &out_stream) {
        ensure_dir(dir);
        for (auto N : ns) {
            const std::string name = "table_N" + std::to_string(N) + ".csv";
            write_text_file(dir / name, experiment_table_csv(result, N, columns));
            out_stream << "wrote " << (dir / name).string() << "\n";
        }
        write_text_file(dir / "cells.csv", experiment_cells_csv(result));
        for (const auto &c : result.cells) {
            for (const auto &f : c.failures) {
                out_stream << "scenario " << c.scenario << " N=" << c.population << " " << c.model
                           << " failed " << f << "\n";
            }
        }
    }

    std::vector<std::string> argv() const {
        std::vector<std::string> a{"evaluate"};
        if (!config_path.empty()) {
            a.insert(a.end(), {"--config", config_path});
        }
        if (!sim_dir.empty()) {
            a.insert(a.end(), {"--sim-dir", sim_dir});
        }
        if (!out.empty()) {
            a.insert(a.end(), {"--out", out});
        }
        if (models_given) {
            a.insert(a.end(), {"--models", models});
        }
        if (!summaries.empty()) {
            a.push_back("--summaries");
            a.insert(a.end(), summaries.begin(), summaries.end());
        }
        if (seed) {
            a.insert(a.end(), {"--seed", std::to_string(*seed)});
        }
        auto m = model.argv(false);
        a.insert(a.end(), m.begin(), m.end());
        return a;
    }
};

struct ReportCommand {
    std::string t1, t2, geojson, out;

    int run(std::ostream &out_stream) const {
        const IceSummary a = ice_summary_from_json(json::parse(read_text_file(t1)), t1);
        const IceSummary b = ice_summary_from_json(json::parse(read_text_file(t2)), t2);
        const auto changes = sign_change_report(a, b);
        ensure_dir(out);
        const fs::path dir(out);
        write_text_file(dir / "sign_changes.csv", sign_changes_csv(changes));
        int up = 0, down = 0;
        for (const auto &c : changes) {
            up += c.transition == SignTransition::negative_to_positive;
            down += c.transition == SignTransition::positive_to_negative;
        }
        if (!geojson.empty()) {
            json gj;
            try {
                gj = json::parse(read_text_file(geojson));
            } catch (const json::parse_error &e) {
                throw DataError(geojson + ": malformed GeoJSON: " + e.what());
            }
            if (!gj.is_object() || !gj.contains("features") || !gj["features"].is_array()) {
                throw DataError(geojson + ": malformed GeoJSON: no 'features' array");
            }
            std::map<std::string, const SignChange *> by_id;
            for (const auto &c : changes) {
                by_id.emplace(c.unit_id, &c);
            }
            std::size_t idx = 0;
            for (auto &feature : gj["features"]) {
                const std::string where = geojson + ": feature " + std::to_string(idx++);
                if (!feature.is_object() || !feature.contains("properties") ||
                    !feature["properties"].is_object()) {
                    throw DataError(where + " has no properties object");
                }
                auto &props = feature["properties"];
                std::string key;
                for (const char *k : {"GEOID", "fips"}) {
                    if (props.contains(k)) {
                        key = props[k].is_string() ? props[k].get<std::string>() : props[k].dump();
                        break;
                    }
                }
                if (key.empty()) {
                    throw DataError(where + " has no GEOID or fips property");
                }
                auto it = by_id.find(key);
                if (it == by_id.end()) {
                    props["ice_t1"] = nullptr;
                    props["ice_t2"] = nullptr;
                    props["transition"] = nullptr;
                    continue;
                }
                props["ice_t1"] = it->second->ice_t1;
                props["ice_t2"] = it->second->ice_t2;
                props["transition"] = to_string(it->second->transition);
            }
            write_text_file(dir / "ice_joined.geojson", gj.dump() + "\n");
        }
        write_manifest(dir, "report", argv(), {t1, t2, geojson}, std::nullopt);
        out_stream << up << " negative->positive, " << down << " positive->negative\n";
        return exit_ok;
    }

    std::vector<std::string> argv() const {
        std::vector<std::string> a{"report", "--t1", t1, "--t2", t2, "--out", out};
        if (!geojson.empty()) {
            a.insert(a.end(), {"--geojson", geojson});
        }
        return a;
    }
};

int classify(const std::exception &e, std::ostream &err) {
    if (dynamic_cast<const UsageError *>(&e) != nullptr) {
        err << "usage error: " << e.what() << "\n";
        return exit_usage;
    }
    if (dynamic_cast<const NumericalError *>(&e) != nullptr) {
        err << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    }
    if (dynamic_cast<const DataError *>(&e) != nullptr ||
        dynamic_cast<const std::invalid_argument *>(&e) != nullptr ||
        dynamic_cast<const json::exception *>(&e) != nullptr) {
        err << "data error: " << e.what() << "\n";
        return exit_data;
    }
    err << "error: " << e.what() << "\n";
    return exit_data;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Spatial estimation of the Index of Concentration at the Extremes", "iceseg"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version_string);

    FitCommand fit;
    auto *fit_cmd = app.add_subcommand("fit", "fit one model to observed county counts");
    fit_cmd->add_option("--data", fit.data, "observation CSV")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--adjacency", fit.adjacency, "edge-list CSV or .gal file")
        ->check(CLI::ExistingFile);
    fit_cmd->add_option("--seed", fit.seed, "random seed")->required();
    fit_cmd->add_option("--out", fit.out, "output directory")->required();
    fit_cmd->add_flag("--dump-draws", fit.dump_draws, "also write draws.csv");
    fit.model.add_to(fit_cmd, true);

    SimulateCommand sim;
    auto *sim_cmd = app.add_subcommand("simulate", "generate simulated scenario data");
    sim_cmd->add_option("--scenario", sim.scenario, "scenario 1-4")->required();
    sim_cmd->add_option("--n", sim.population, "per-county denominator N")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--replicates", sim.replicates, "replicate count")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", sim.seed, "random seed")->required();
    sim_cmd->add_option("--adjacency", sim.adjacency, "edge-list CSV or .gal file")
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--out", sim.out, "output directory")->required();

    EvaluateCommand eval;
    auto *eval_cmd = app.add_subcommand("evaluate", "run or score the simulation comparison");
    eval_cmd->add_option("--config", eval.config_path, "experiment config file")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--sim-dir", eval.sim_dir, "directory written by simulate");
    auto *models_opt = eval_cmd->add_option("--models", eval.models, "comma-separated models");
    eval_cmd->add_option("--summaries", eval.summaries, "fit ice_summary.json per replicate");
    eval_cmd->add_option("--seed", eval.seed, "random seed for model fits");
    eval_cmd->add_option("--out", eval.out, "output directory");
    eval.model.add_to(eval_cmd, false);

    ReportCommand report;
    auto *report_cmd = app.add_subcommand("report", "compare two ICE summaries");
    report_cmd->add_option("--t1", report.t1, "earlier ice_summary.json")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--t2", report.t2, "later ice_summary.json")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--geojson", report.geojson, "GeoJSON to annotate")->check(CLI::ExistingFile);
    report_cmd->add_option("--out", report.out, "output directory")->required();

    std::string manifest;
    auto *replay_cmd = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    replay_cmd->add_option("--manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForVersion &) {
        out << version_string << "\n";
        return exit_ok;
    } catch (const CLI::ParseError &e) {
        err << "usage error: " << e.what() << "\n";
        if (auto *sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
            err << sub->help();
        }
        return exit_usage;
    }

    try {
        if (*fit_cmd) {
            fit.data = absolute_string(fit.data);
            fit.adjacency = absolute_string(fit.adjacency);
            fit.out = absolute_string(fit.out);
            return fit.run(out, err);
        }
        if (*sim_cmd) {
            sim.adjacency = absolute_string(sim.adjacency);
            sim.out = absolute_string(sim.out);
            return sim.run(out);
        }
        if (*eval_cmd) {
            eval.config_path = absolute_string(eval.config_path);
            eval.sim_dir = absolute_string(eval.sim_dir);
            eval.out = absolute_string(eval.out);
            eval.models_given = models_opt->count() > 0;
            if (eval.models_given && eval.models.empty()) {
                throw UsageError("empty model list");
            }
            for (auto &s : eval.summaries) {
                s = absolute_string(s);
            }
            return eval.run(out);
        }
        if (*report_cmd) {
            report.t1 = absolute_string(report.t1);
            report.t2 = absolute_string(report.t2);
            report.geojson = absolute_string(report.geojson);
            report.out = absolute_string(report.out);
            return report.run(out);
        }
        if (*replay_cmd) {
            const json m = json::parse(read_text_file(manifest));
            if (!m.contains("argv") || !m["argv"].is_array()) {
                throw DataError(manifest + ": no argv recorded");
            }
            return run_cli(m["argv"].get<std::vector<std::string>>(), out, err);
        }
    } catch (const std::exception &e) {
        return classify(e, err);
    }
    return exit_usage;
}

} // namespace iceseg
