#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <cstdlib>

#include "sep/harness.hpp"
#include "sep/sampling.hpp"

using namespace sep;
using nlohmann::json;

namespace {

RunConfig basic_config() {
    RunConfig cfg;
    cfg.n_sites = 64;
    cfg.beta = 0.75;
    cfg.horizon = 0.004;
    cfg.initial.kind = InitialLaw::Kind::Product;
    cfg.initial.phi = Profile::cosine(0.5, 0.25, 1);
    cfg.replicas = 200;
    cfg.base_seed = 7;
    cfg.threads = 1;
    ObservableSpec theta;
    theta.kind = ObservableSpec::Kind::Theta;
    theta.mode = 1;
    theta.times = {0.0, 0.002, 0.004};
    cfg.observables.push_back(theta);
    return cfg;
}

}  // namespace

TEST_CASE("run config JSON round trip") {
    RunConfig cfg = basic_config();
    ObservableSpec mart;
    mart.kind = ObservableSpec::Kind::Martingale;
    mart.mode = -1;
    mart.c_scale = 2.0;
    mart.times = {0.001, 0.004};
    cfg.observables.push_back(mart);
    cfg.engine.kind = EngineSpec::Kind::Tilted;
    cfg.engine.control = ControlField(FourierField::mode(-1, 1.0));

    json j = cfg.to_json();
    RunConfig back = RunConfig::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.n_sites == cfg.n_sites);
    CHECK(back.observables.size() == cfg.observables.size());
}

TEST_CASE("run config validation enumerates problems") {
    RunConfig cfg = basic_config();
    cfg.beta = 0.4;
    cfg.replicas = 0;
    cfg.observables[0].times = {0.01, 0.002};  // beyond horizon and out of order
    try {
        cfg.validate();
        FAIL("expected validation to throw");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("beta") != std::string::npos);
        CHECK(msg.find("replicas") != std::string::npos);
        CHECK(msg.find("beyond the horizon") != std::string::npos);
        CHECK(msg.find("non-monotone") != std::string::npos);
    }
}

TEST_CASE("single-replica ensemble reproduces a direct simulation bit-exactly") {
    RunConfig cfg = basic_config();
    cfg.replicas = 1;
    cfg.store_raw = true;
    EnsembleStats stats = run_ensemble(cfg);

    // the same draws through the public ops, using the documented stream layout
    Configuration init = sample_product(cfg.n_sites, cfg.initial.phi, sampling_seed(cfg, 0, 0));
    Trajectory traj = run_symmetric(init, cfg.horizon, dynamics_seed(cfg, 0, 0));
    auto series = fluctuation_series(traj, 1, cfg.initial.phi, cfg.a_n(),
                                     {0.0, 0.002, 0.004});
    const ObservableStats& theta = stats.observables.at(0);
    for (std::size_t k = 0; k < 3; ++k) {
        const FluctuationSeries& s = series[2];  // mode +1
        CHECK(s.mode == 1);
        CHECK(theta.raw.at(0).at(k) == s.values.at(k));
    }
}

TEST_CASE("ensemble results are identical across thread counts") {
    RunConfig cfg = basic_config();
    cfg.replicas = 600;
    cfg.threads = 1;
    json a = run_ensemble(cfg).to_json();
    cfg.threads = 4;
    json b = run_ensemble(cfg).to_json();
    // config echoes differ in the threads field only; results must be identical
    a.erase("config");
    b.erase("config");
    CHECK(a.dump() == b.dump());
}

TEST_CASE("doubling the replica count shrinks the standard error like 1/sqrt(R)") {
    RunConfig cfg = basic_config();
    cfg.replicas = 400;
    double se1 = run_ensemble(cfg).observables.at(0).components.at(2).se;
    cfg.replicas = 800;
    double se2 = run_ensemble(cfg).observables.at(0).components.at(2).se;
    double ratio = se2 / se1;
    CHECK(ratio > 0.55);
    CHECK(ratio < 0.9);
}

TEST_CASE("ensemble martingale observable has mean one") {
    RunConfig cfg;
    cfg.n_sites = 48;
    cfg.horizon = 0.003;
    cfg.initial.kind = InitialLaw::Kind::Product;
    cfg.initial.phi = Profile::cosine(0.5, 0.2, 1);
    cfg.replicas = 3000;
    cfg.base_seed = 11;
    cfg.threads = 0;
    ObservableSpec mart;
    mart.kind = ObservableSpec::Kind::Martingale;
    mart.mode = 1;
    mart.c_scale = 1.0;
    mart.times = {0.001, 0.003};
    cfg.observables.push_back(mart);
    EnsembleStats stats = run_ensemble(cfg);
    for (const ComponentStats& c : stats.observables.at(0).components) {
        CHECK(std::abs(c.mean - 1.0) < 3.0 * c.se);
    }
}

TEST_CASE("equilibrium ensemble observables: density, pairs, count conservation") {
    RunConfig cfg;
    cfg.n_sites = 64;
    cfg.horizon = 0.01;
    cfg.initial.kind = InitialLaw::Kind::Equilibrium;
    cfg.initial.alpha = 0.5;
    cfg.replicas = 2000;
    cfg.base_seed = 13;
    ObservableSpec density;
    density.kind = ObservableSpec::Kind::Density;
    density.time = 0.01;
    ObservableSpec pair;
    pair.kind = ObservableSpec::Kind::PairMean;
    pair.time = 0.01;
    ObservableSpec count;
    count.kind = ObservableSpec::Kind::Count;
    cfg.observables = {density, pair, count};
    EnsembleStats stats = run_ensemble(cfg);
    const ComponentStats& d = stats.by_name("density@0.01").components.at(0);
    const ComponentStats& p = stats.by_name("pair_mean@0.01").components.at(0);
    CHECK(std::abs(d.mean - 0.5) < 3.0 * d.se);
    CHECK(std::abs(p.mean - 0.25) < 3.0 * p.se);
    // the count observable has zero variance given the initial law's mean drift;
    // its mean matches alpha N within noise
    const ComponentStats& c = stats.by_name("count").components.at(0);
    CHECK(std::abs(c.mean - 32.0) < 3.0 * c.se + 1e-12);
}

TEST_CASE("ensemble stats JSON round trip is field-identical") {
    RunConfig cfg = basic_config();
    cfg.replicas = 50;
    cfg.store_raw = true;
    EnsembleStats stats = run_ensemble(cfg);
    json j = stats.to_json();
    EnsembleStats back = EnsembleStats::from_json(j);
    CHECK(back.to_json().dump() == j.dump());
    CHECK(stats.to_csv().rfind("observable,label,replicas,mean,variance,se\n", 0) == 0);
}

TEST_CASE("series export carries one row per replica, mode and time") {
    RunConfig cfg = basic_config();
    cfg.replicas = 10;
    cfg.store_raw = true;
    EnsembleStats stats = run_ensemble(cfg);
    std::string csv = series_csv(stats);
    CHECK(csv.rfind("replica,mode,t,value\n", 0) == 0);
    long rows = std::count(csv.begin(), csv.end(), '\n') - 1;
    CHECK(rows == 10 * 3);  // 10 replicas x 3 grid times, one theta mode
}

TEST_CASE("estimate_event: always-true event and trivial tilt") {
    RunConfig cfg;
    cfg.n_sites = 32;
    cfg.horizon = 0.002;
    cfg.initial.kind = InitialLaw::Kind::Product;
    cfg.initial.phi = Profile::constant(0.5);
    cfg.replicas = 400;
    cfg.base_seed = 17;
    EventSpec event;
    event.always = true;
    event.time = 0.002;

    TiltChoice trivial;
    trivial.g = Profile::constant(0.0);
    trivial.control = ControlField();
    IsEstimate est = estimate_event(cfg, event, trivial);
    CHECK(est.naive_p == 1.0);
    CHECK(est.is_p == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(est.mean_weight == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(est.ess == doctest::Approx(static_cast<double>(cfg.replicas)).epsilon(1e-9));
    CHECK_FALSE(est.degenerate);
}

TEST_CASE("estimate_event: weight identity under a real tilt") {
    RunConfig cfg;
    cfg.n_sites = 48;
    cfg.horizon = 0.004;
    cfg.initial.kind = InitialLaw::Kind::Product;
    cfg.initial.phi = Profile::constant(0.5);
    cfg.replicas = 2000;
    cfg.base_seed = 19;
    EventSpec event;
    event.always = true;
    event.time = 0.004;

    TiltChoice tilt;
    tilt.g = Profile::cosine(0.0, 0.3, 1);
    tilt.control = ControlField(FourierField::mode(1, 0.8));
    IsEstimate est = estimate_event(cfg, event, tilt);
    CHECK(std::abs(est.mean_weight - 1.0) < 3.0 * est.mean_weight_se);
    CHECK(est.ess > 100.0);
    CHECK(est.ess <= static_cast<double>(cfg.replicas) + 1e-9);
    CHECK_FALSE(est.degenerate);
}

TEST_CASE("estimate_event: naive and importance-sampled estimates agree") {
    RunConfig cfg;
    cfg.n_sites = 64;
    cfg.horizon = 0.004;
    cfg.initial.kind = InitialLaw::Kind::Product;
    cfg.initial.phi = Profile::constant(0.5);
    cfg.replicas = 3000;
    cfg.base_seed = 23;
    EventSpec event;
    event.mode = 1;
    event.time = 0.004;
    event.threshold = 0.25;

    TiltChoice tilt;
    tilt.g = Profile::cosine(0.0, 0.7, 1);
    tilt.control = ControlField(FourierField::mode(1, 3.0));
    IsEstimate est = estimate_event(cfg, event, tilt);
    CHECK(est.naive_p > 0.005);
    CHECK(est.naive_p < 0.2);
    double band = 3.0 * std::sqrt(est.naive_se * est.naive_se + est.is_se * est.is_se);
    CHECK(std::abs(est.naive_p - est.is_p) < band);
}

TEST_CASE("importance sampling agrees with naive across a 3x2 battery") {
    // three thresholds x two sizes, all with naive probability above 0.01
    for (int n : {48, 96}) {
        const double sd = std::sqrt(n / (8.0 * std::pow(n, 1.5)));  // theta scale at phi=1/2
        int idx = 0;
        for (double mult : {0.0, 1.0, 1.8}) {
            RunConfig cfg;
            cfg.n_sites = n;
            cfg.horizon = 0.003;
            cfg.initial.kind = InitialLaw::Kind::Product;
            cfg.initial.phi = Profile::constant(0.5);
            cfg.replicas = 2500;
            cfg.base_seed = 500 + static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(idx++);
            EventSpec event;
            event.mode = 1;
            event.time = 0.003;
            event.threshold = mult * sd;

            TiltChoice tilt;
            tilt.g = Profile::cosine(0.0, 0.2, 1);
            tilt.control = ControlField(FourierField::mode(1, 0.8 * mult));
            IsEstimate est = estimate_event(cfg, event, tilt);
            CHECK(est.naive_p >= 0.01);
            double band = 3.0 * std::sqrt(est.naive_se * est.naive_se + est.is_se * est.is_se);
            CHECK(std::abs(est.naive_p - est.is_p) <= band);
            CHECK(std::abs(est.mean_weight - 1.0) <= 3.0 * est.mean_weight_se);
        }
    }
}

TEST_CASE("mdp_curve: always-true event gives zero scaled logs") {
    RunConfig cfg;
    cfg.n_sites = 32;
    cfg.horizon = 0.002;
    cfg.initial.kind = InitialLaw::Kind::Product;
    cfg.initial.phi = Profile::constant(0.5);
    cfg.replicas = 100;
    cfg.base_seed = 29;
    EventSpec event;
    event.always = true;
    event.time = 0.002;
    CurveResult curve = mdp_curve(cfg, {16, 32}, event, std::nullopt);
    CHECK(curve.candidate_cost == 0.0);
    for (const CurveRow& row : curve.rows) {
        CHECK(row.p_naive == 1.0);
        CHECK(row.scaled_log_naive == 0.0);
    }
}

TEST_CASE("mdp_curve: finite negative scaled logs on a moderate event") {
    RunConfig cfg;
    cfg.n_sites = 32;
    cfg.horizon = 0.003;
    cfg.initial.kind = InitialLaw::Kind::Product;
    cfg.initial.phi = Profile::constant(0.5);
    cfg.replicas = 1500;
    cfg.base_seed = 31;
    EventSpec event;
    event.mode = 1;
    event.time = 0.003;
    event.threshold = 0.18;

    TiltChoice tilt;
    tilt.g = Profile::cosine(0.0, 0.5, 1);
    tilt.control = ControlField(FourierField::mode(1, 2.0));
    CurveResult curve = mdp_curve(cfg, {32, 64}, event, tilt);
    CHECK(curve.candidate_cost > 0.0);
    for (const CurveRow& row : curve.rows) {
        CHECK(std::isfinite(row.scaled_log_naive));
        CHECK(row.scaled_log_naive < 0.0);
        CHECK(std::isfinite(row.scaled_log_is));
        CHECK(row.scaled_log_is < 0.0);
    }
    std::string csv = curve.to_csv();
    CHECK(csv.rfind("n_sites,a_n,", 0) == 0);
}

TEST_CASE("SEP_THREADS environment override wins") {
    setenv("SEP_THREADS", "3", 1);
    CHECK(resolve_threads(8) == 3);
    unsetenv("SEP_THREADS");
    CHECK(resolve_threads(8) == 8);
}
