// Command-line driver: ensemble simulation, PDE solvers, rate functionals,
// rare-event estimation. Subcommands share --config/--seed/--replicas/
// --threads/--out/--format; run metadata (resolved thread count, schema
// version) goes to a sidecar run_meta.json so result files stay bit-identical
// across thread counts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sep/harness.hpp"
#include "sep/rates.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::string format = "json";
    std::optional<std::uint64_t> seed;
    std::optional<long> replicas;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file")->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--format", args.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", args.seed, "override base seed");
    cmd->add_option("--replicas", args.replicas, "override replica count");
    cmd->add_option("--threads", args.threads, "override worker count (0 = hardware)");
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config '" + path + "'");
    json j;
    in >> j;
    return j;
}

sep::RunConfig load_run_config(const CommonArgs& args, const json& j) {
    sep::RunConfig cfg = sep::RunConfig::from_json(j);
    if (args.seed) cfg.base_seed = *args.seed;
    if (args.replicas) cfg.replicas = *args.replicas;
    if (args.threads) cfg.threads = *args.threads;
    return cfg;
}

void write_meta(const CommonArgs& args, const sep::RunConfig* cfg) {
    json meta{{"schema_version", 1},
              {"threads_resolved", sep::resolve_threads(cfg ? cfg->threads : 0)},
              {"format", args.format}};
    if (const char* env = std::getenv("SEP_THREADS")) meta["threads_env"] = env;
    sep::write_file((fs::path(args.out_dir) / "run_meta.json").string(), meta.dump(2) + "\n");
}

void write_stats(const CommonArgs& args, const sep::EnsembleStats& stats) {
    fs::create_directories(args.out_dir);
    sep::write_file((fs::path(args.out_dir) / "stats.json").string(),
                    stats.to_json().dump(2) + "\n");
    if (args.format == "csv") {
        sep::write_file((fs::path(args.out_dir) / "stats.csv").string(), stats.to_csv());
        std::string series = sep::series_csv(stats);
        // only replica-resolved runs produce series rows
        if (series.find('\n') != series.size() - 1) {
            sep::write_file((fs::path(args.out_dir) / "series.csv").string(), series);
        }
    }
}

int run_simulate(const CommonArgs& args, const char* required_engine) {
    json j = load_json(args.config_path);
    sep::RunConfig cfg = load_run_config(args, j);
    if (required_engine && cfg.engine.to_json().at("kind") != required_engine) {
        throw std::runtime_error(std::string("this subcommand expects a '") + required_engine +
                                 "' engine in the config");
    }
    sep::EnsembleStats stats = sep::run_ensemble(cfg);
    write_stats(args, stats);
    write_meta(args, &cfg);
    std::cout << "wrote " << (fs::path(args.out_dir) / "stats.json").string() << "\n";
    return 0;
}

// hydro config:
//   {"problem":"heat","phi":{field json or profile},"times":[...]}
//   {"problem":"lattice_mean","n_sites":N,"phi":{profile},"times":[...]}
//   {"problem":"controlled","g":{field},"control":{...},"phi":{profile},
//    "horizon":T,"nodes":K}
int run_hydro(const CommonArgs& args) {
    json j = load_json(args.config_path);
    fs::create_directories(args.out_dir);
    const std::string problem = j.at("problem").get<std::string>();
    if (problem == "heat" || problem == "controlled") {
        sep::DensityPath path;
        if (problem == "heat") {
            sep::FourierField phi = sep::FourierField::from_json(j.at("phi"));
            path = sep::heat_path(phi, j.at("times").get<std::vector<double>>());
        } else {
            sep::FourierField g = sep::FourierField::from_json(j.at("g"));
            sep::ControlField control = sep::ControlField::from_json(j.at("control"));
            sep::Profile phi = sep::Profile::from_json(j.at("phi"));
            double horizon = j.at("horizon").get<double>();
            int nodes = j.value("nodes", 65);
            sep::FourierField phi_field = sep::FourierField::from_function(
                [&](double u) { return phi(u); }, j.value("band", 32));
            std::vector<double> times;
            for (int i = 0; i < nodes; ++i) times.push_back(horizon * i / (nodes - 1));
            sep::DensityPath rho = sep::heat_path(phi_field, times);
            path = sep::solve_controlled(g, control, rho, horizon);
        }
        json coeffs = json::array();
        for (std::size_t i = 0; i < path.times.size(); ++i) {
            coeffs.push_back({{"t", path.times[i]}, {"field", path.fields[i].to_json()}});
        }
        json out{{"problem", problem},
                 {"mass", sep::conservation_integral(path)},
                 {"path", coeffs}};
        sep::write_file((fs::path(args.out_dir) / "hydro.json").string(), out.dump(2) + "\n");
        if (args.format == "csv") {
            sep::write_file((fs::path(args.out_dir) / "hydro.csv").string(),
                            sep::density_path_csv(path));
        }
    } else if (problem == "lattice_mean") {
        int n = j.at("n_sites").get<int>();
        sep::Profile phi = sep::Profile::from_json(j.at("phi"));
        std::ostringstream csv;
        csv.precision(17);
        csv << "t,x,value\n";
        json out = json::array();
        for (double t : j.at("times").get<std::vector<double>>()) {
            std::vector<double> m = sep::exact_lattice_mean(n, phi, t);
            out.push_back({{"t", t}, {"mean", m}});
            for (int x = 0; x < n; ++x) csv << t << ',' << x << ',' << m[static_cast<std::size_t>(x)] << '\n';
        }
        sep::write_file((fs::path(args.out_dir) / "lattice_mean.json").string(),
                        json{{"n_sites", n}, {"means", out}}.dump(2) + "\n");
        if (args.format == "csv") {
            sep::write_file((fs::path(args.out_dir) / "lattice_mean.csv").string(), csv.str());
        }
    } else {
        throw std::runtime_error("hydro: unknown problem '" + problem + "'");
    }
    write_meta(args, nullptr);
    std::cout << "wrote hydro outputs to " << args.out_dir << "\n";
    return 0;
}

// replacement config: RunConfig template (without n_sites) plus
// {"n_list":[...], "control":{...}, "alpha":0.5}
int run_replacement(const CommonArgs& args) {
    json j = load_json(args.config_path);
    std::vector<int> n_list = j.at("n_list").get<std::vector<int>>();
    std::ostringstream csv;
    csv.precision(17);
    csv << "n_sites,mean_discrepancy,se,replicas\n";
    json rows = json::array();
    for (int n : n_list) {
        json cj = j;
        cj.erase("n_list");
        cj["n_sites"] = n;
        cj["observables"] = json::array({{{"kind", "replacement"},
                                          {"control", j.at("control")},
                                          {"name", "replacement"}}});
        sep::RunConfig cfg = load_run_config(args, cj);
        sep::EnsembleStats stats = sep::run_ensemble(cfg);
        const sep::ComponentStats& c = stats.by_name("replacement").components.at(0);
        rows.push_back({{"n_sites", n}, {"mean", c.mean}, {"se", c.se}});
        csv << n << ',' << c.mean << ',' << c.se << ',' << cfg.replicas << '\n';
    }
    fs::create_directories(args.out_dir);
    sep::write_file((fs::path(args.out_dir) / "replacement.json").string(),
                    json{{"rows", rows}}.dump(2) + "\n");
    if (args.format == "csv") {
        sep::write_file((fs::path(args.out_dir) / "replacement.csv").string(), csv.str());
    }
    write_meta(args, nullptr);
    std::cout << "wrote replacement trend to " << args.out_dir << "\n";
    return 0;
}

sep::DensityPath path_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "fields") {
        sep::DensityPath path;
        path.times = j.at("times").get<std::vector<double>>();
        for (const json& f : j.at("fields")) path.fields.push_back(sep::FourierField::from_json(f));
        return path;
    }
    if (kind == "heat") {
        return sep::heat_path(sep::FourierField::from_json(j.at("phi")),
                              j.at("times").get<std::vector<double>>());
    }
    if (kind == "controlled") {
        sep::FourierField g = sep::FourierField::from_json(j.at("g"));
        sep::ControlField control = sep::ControlField::from_json(j.at("control"));
        sep::DensityPath rho = path_from_json(j.at("rho"));
        return sep::solve_controlled(g, control, rho, j.at("horizon").get<double>());
    }
    throw std::runtime_error("path: unknown kind '" + kind + "'");
}

int run_rates(const CommonArgs& args) {
    json j = load_json(args.config_path);
    const std::string functional = j.at("functional").get<std::string>();
    sep::RateResult result;
    if (functional == "i_ini") {
        result = sep::i_ini_variational(sep::FourierField::from_json(j.at("nu")),
                                        sep::Profile::from_json(j.at("phi")),
                                        j.at("band").get<int>());
    } else if (functional == "i_dyn") {
        sep::DensityPath w = path_from_json(j.at("w"));
        sep::DensityPath rho = path_from_json(j.at("rho"));
        std::vector<double> grid = j.at("time_grid").get<std::vector<double>>();
        sep::SusceptibilityPath chi = sep::SusceptibilityPath::from_density(rho, grid);
        result = sep::i_dyn_variational(w, chi, j.at("band").get<int>(), grid);
    } else if (functional == "j_ini") {
        result = sep::j_ini_variational(sep::FourierField::from_json(j.at("p")),
                                        sep::Profile::from_json(j.at("phi")),
                                        j.value("grid_points", 1024));
    } else if (functional == "j_dyn") {
        result = sep::j_dyn_variational(path_from_json(j.at("w")), j.at("band").get<int>(),
                                        j.at("time_grid").get<std::vector<double>>());
    } else {
        throw std::runtime_error("rates: unknown functional '" + functional + "'");
    }
    fs::create_directories(args.out_dir);
    sep::write_file((fs::path(args.out_dir) / "rate.json").string(),
                    result.to_json().dump(2) + "\n");
    write_meta(args, nullptr);
    std::cout << "wrote rate result to " << args.out_dir << "\n";
    return 0;
}

int run_estimate(const CommonArgs& args) {
    json j = load_json(args.config_path);
    sep::RunConfig cfg = load_run_config(args, j.at("run"));
    sep::EventSpec event = sep::EventSpec::from_json(j.at("event"));
    std::optional<sep::TiltChoice> tilt;
    if (j.contains("tilt") && !j.at("tilt").is_null()) {
        tilt = sep::TiltChoice::from_json(j.at("tilt"));
    }
    sep::IsEstimate est = sep::estimate_event(cfg, event, tilt);
    fs::create_directories(args.out_dir);
    sep::write_file((fs::path(args.out_dir) / "estimate.json").string(),
                    est.to_json().dump(2) + "\n");
    write_meta(args, &cfg);
    std::cout << est.to_json().dump(2) << "\n";
    return 0;
}

int run_curve(const CommonArgs& args) {
    json j = load_json(args.config_path);
    sep::RunConfig cfg = load_run_config(args, j.at("run"));
    sep::EventSpec event = sep::EventSpec::from_json(j.at("event"));
    std::optional<sep::TiltChoice> tilt;
    if (j.contains("tilt") && !j.at("tilt").is_null()) {
        tilt = sep::TiltChoice::from_json(j.at("tilt"));
    }
    sep::CurveResult curve =
        sep::mdp_curve(cfg, j.at("n_list").get<std::vector<int>>(), event, tilt);
    fs::create_directories(args.out_dir);
    sep::write_file((fs::path(args.out_dir) / "curve.json").string(),
                    curve.to_json().dump(2) + "\n");
    if (args.format == "csv") {
        sep::write_file((fs::path(args.out_dir) / "curve.csv").string(), curve.to_csv());
    }
    write_meta(args, &cfg);
    std::cout << "wrote curve to " << args.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"simple exclusion process toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    CLI::App* simulate = app.add_subcommand("simulate", "run an observable ensemble");
    CLI::App* tilted = app.add_subcommand("tilted", "run a tilted-engine ensemble");
    CLI::App* martingale =
        app.add_subcommand("martingale", "martingale mean-1 ensemble (simulate alias)");
    CLI::App* hydro = app.add_subcommand("hydro", "deterministic PDE solvers");
    CLI::App* replacement =
        app.add_subcommand("replacement", "replacement-statistic trend over lattice sizes");
    CLI::App* rates = app.add_subcommand("rates", "evaluate a rate functional");
    CLI::App* estimate = app.add_subcommand("estimate", "naive + importance-sampled event probability");
    CLI::App* curve = app.add_subcommand("curve", "scaled log-probability table over sizes");
    for (CLI::App* cmd : {simulate, tilted, martingale, hydro, replacement, rates, estimate, curve}) {
        add_common(cmd, args);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return run_simulate(args, nullptr);
        if (tilted->parsed()) return run_simulate(args, "tilted");
        if (martingale->parsed()) return run_simulate(args, nullptr);
        if (hydro->parsed()) return run_hydro(args);
        if (replacement->parsed()) return run_replacement(args);
        if (rates->parsed()) return run_rates(args);
        if (estimate->parsed()) return run_estimate(args);
        if (curve->parsed()) return run_curve(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
