#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sep/control_field.hpp"
#include "sep/fields.hpp"
#include "sep/profile.hpp"
#include "sep/rates.hpp"

namespace sep {

// ---------------------------------------------------------------- run config

struct InitialLaw {
    enum class Kind { Product, Equilibrium, Canonical, Perturbed };
    Kind kind = Kind::Product;
    Profile phi = Profile::constant(0.5);
    double alpha = 0.5;    // equilibrium
    int k_particles = 0;   // canonical
    Profile g;             // perturbed: marginal phi + (a_N/N) g

    nlohmann::json to_json() const;
    static InitialLaw from_json(const nlohmann::json& j);
};

struct EngineSpec {
    enum class Kind { Symmetric, Tilted };
    Kind kind = Kind::Symmetric;
    ControlField control;  // tilted only

    nlohmann::json to_json() const;
    static EngineSpec from_json(const nlohmann::json& j);
};

struct ObservableSpec {
    enum class Kind {
        SiteMean,         // eta(x) per site at `time` (N components)
        Density,          // (1/N) sum eta at `time`
        PairMean,         // (1/N) sum eta(x) eta(x+1) at `time`
        Theta,            // theta_t(e_mode) at `times`
        ThetaMgf,         // exp((a_N^2/N) theta_t(e_mode)) at `time`
        Empirical,        // mu_t(e_mode) at `time`
        Martingale,       // M_t for c_scale * e_mode at `times`
        MartingaleField,  // M_t for the control field at `times`
        PairIntegral,     // int (1/N) sum eta eta G ds over [0, horizon]
        Replacement,      // | pair integral - hydrodynamic target |
        Count,            // particle count at the horizon
    };
    Kind kind = Kind::Theta;
    std::string name;  // output key; defaulted when empty
    int mode = 0;
    double time = 0.0;
    std::vector<double> times;
    double c_scale = 1.0;
    ControlField control;

    std::string default_name() const;
    nlohmann::json to_json() const;
    static ObservableSpec from_json(const nlohmann::json& j);
};

struct RunConfig {
    int schema_version = 1;
    int n_sites = 0;
    double beta = 0.75;  // a_N = N^beta, beta in (1/2, 1)
    double horizon = 0.0;
    InitialLaw initial;
    EngineSpec engine;
    std::vector<ObservableSpec> observables;
    long replicas = 1;
    std::uint64_t base_seed = 0;
    int threads = 0;  // 0 = hardware concurrency
    bool store_raw = false;

    double a_n() const;
    // Throws std::invalid_argument enumerating every invalid field.
    void validate() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

// Replica stream layout: sampling uses stream 4r + 2*phase, dynamics uses
// 4r + 2*phase + 1 (phase 0 = plain run, phase 1 = tilted branch).
SeedSpec sampling_seed(const RunConfig& cfg, long replica, int phase = 0);
SeedSpec dynamics_seed(const RunConfig& cfg, long replica, int phase = 0);

// Thread count resolution: SEP_THREADS env var > config > hardware.
int resolve_threads(int configured);

// ---------------------------------------------------------------- results

struct ComponentStats {
    std::string label;
    double mean = 0.0;
    double variance = 0.0;
    double se = 0.0;
};

struct ObservableStats {
    std::string name;
    long replicas = 0;
    std::vector<ComponentStats> components;
    std::vector<std::vector<double>> raw;  // per replica, when store_raw
};

struct EnsembleStats {
    nlohmann::json config;  // echo of the run config
    std::vector<ObservableStats> observables;

    const ObservableStats& by_name(const std::string& name) const;
    nlohmann::json to_json() const;
    static EnsembleStats from_json(const nlohmann::json& j);
    std::string to_csv() const;  // observable,label,replicas,mean,variance,se
};

EnsembleStats run_ensemble(const RunConfig& cfg);

// ---------------------------------------------------------------- rare events

struct EventSpec {
    bool always = false;  // event that is identically true (weight checks)
    int mode = 1;
    double time = 0.0;
    double threshold = 0.0;
    bool above = true;  // theta_time(e_mode) >= threshold, else <=

    bool holds(double theta) const { return always || (above ? theta >= threshold : theta <= threshold); }
    std::string describe() const;
    nlohmann::json to_json() const;
    static EventSpec from_json(const nlohmann::json& j);
};

struct TiltChoice {
    Profile g;             // initial perturbation
    ControlField control;  // dynamic tilt F

    nlohmann::json to_json() const;
    static TiltChoice from_json(const nlohmann::json& j);
};

struct IsEstimate {
    std::string event;
    long replicas = 0;
    double naive_p = 0.0, naive_se = 0.0;
    bool has_is = false;
    double is_p = 0.0, is_se = 0.0;
    double mean_weight = 0.0, mean_weight_se = 0.0;
    double ess = 0.0;
    bool degenerate = false;  // all weights collapsed

    nlohmann::json to_json() const;
};

// Naive estimator from the symmetric ensemble, plus (when a tilt is given)
// the importance-sampled estimator from sample_perturbed + run_tilted with
// exact weights (dP/dP^N_g)(eta_0) / M_T^N(F).
IsEstimate estimate_event(const RunConfig& cfg, const EventSpec& event,
                          const std::optional<TiltChoice>& tilt);

// ---------------------------------------------------------------- MDP curve

struct CurveRow {
    int n_sites = 0;
    double a_n = 0.0;
    double p_naive = 0.0, se_naive = 0.0;
    double p_is = 0.0, se_is = 0.0, ess = 0.0;
    double scaled_log_naive = 0.0;  // (N/a_N^2) log p
    double scaled_log_is = 0.0;
};

struct CurveResult {
    std::vector<CurveRow> rows;
    double candidate_cost = 0.0;  // rates-module cost of the supplied tilt

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// The scaled logs are reported as data; no convergence claim is made at
// desk-scale sizes (the MDP speed a_N^2/N is asymptotic).
CurveResult mdp_curve(const RunConfig& base, const std::vector<int>& n_list,
                      const EventSpec& event, const std::optional<TiltChoice>& tilt);

// ---------------------------------------------------------------- exports

void write_file(const std::string& path, const std::string& content);
std::string density_path_csv(const DensityPath& path, int grid_points = 256);

// Per-replica series (theta and martingale observables) as CSV with columns
// replica,mode,t,value. Requires the ensemble to have been run with
// store_raw; observables without a mode/time structure are skipped.
std::string series_csv(const EnsembleStats& stats);

}  // namespace sep
