#include "sep/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "sep/dynamics.hpp"
#include "sep/sampling.hpp"

namespace sep {

using nlohmann::json;

// ---------------------------------------------------------------- config io

json InitialLaw::to_json() const {
    switch (kind) {
        case Kind::Product:
            return {{"law", "product"}, {"phi", phi.to_json()}};
        case Kind::Equilibrium:
            return {{"law", "equilibrium"}, {"alpha", alpha}};
        case Kind::Canonical:
            return {{"law", "canonical"}, {"k_particles", k_particles}};
        case Kind::Perturbed:
            return {{"law", "perturbed"}, {"phi", phi.to_json()}, {"g", g.to_json()}};
    }
    return {};
}

InitialLaw InitialLaw::from_json(const json& j) {
    InitialLaw law;
    const std::string kind = j.at("law").get<std::string>();
    if (kind == "product") {
        law.kind = Kind::Product;
        law.phi = Profile::from_json(j.at("phi"));
    } else if (kind == "equilibrium") {
        law.kind = Kind::Equilibrium;
        law.alpha = j.at("alpha").get<double>();
    } else if (kind == "canonical") {
        law.kind = Kind::Canonical;
        law.k_particles = j.at("k_particles").get<int>();
    } else if (kind == "perturbed") {
        law.kind = Kind::Perturbed;
        law.phi = Profile::from_json(j.at("phi"));
        law.g = Profile::from_json(j.at("g"));
    } else {
        throw std::invalid_argument("InitialLaw: unknown law '" + kind + "'");
    }
    return law;
}

json EngineSpec::to_json() const {
    if (kind == Kind::Symmetric) return {{"kind", "symmetric"}};
    return {{"kind", "tilted"}, {"control", control.to_json()}};
}

EngineSpec EngineSpec::from_json(const json& j) {
    EngineSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "symmetric") {
        spec.kind = Kind::Symmetric;
    } else if (kind == "tilted") {
        spec.kind = Kind::Tilted;
        spec.control = ControlField::from_json(j.value("control", json()));
    } else {
        throw std::invalid_argument("EngineSpec: unknown kind '" + kind + "'");
    }
    return spec;
}

namespace {

const char* kind_name(ObservableSpec::Kind k) {
    switch (k) {
        case ObservableSpec::Kind::SiteMean: return "site_mean";
        case ObservableSpec::Kind::Density: return "density";
        case ObservableSpec::Kind::PairMean: return "pair_mean";
        case ObservableSpec::Kind::Theta: return "theta";
        case ObservableSpec::Kind::ThetaMgf: return "theta_mgf";
        case ObservableSpec::Kind::Empirical: return "empirical";
        case ObservableSpec::Kind::Martingale: return "martingale";
        case ObservableSpec::Kind::MartingaleField: return "martingale_field";
        case ObservableSpec::Kind::PairIntegral: return "pair_integral";
        case ObservableSpec::Kind::Replacement: return "replacement";
        case ObservableSpec::Kind::Count: return "count";
    }
    return "?";
}

ObservableSpec::Kind kind_from_name(const std::string& s) {
    using K = ObservableSpec::Kind;
    for (K k : {K::SiteMean, K::Density, K::PairMean, K::Theta, K::ThetaMgf, K::Empirical,
                K::Martingale, K::MartingaleField, K::PairIntegral, K::Replacement, K::Count}) {
        if (s == kind_name(k)) return k;
    }
    throw std::invalid_argument("ObservableSpec: unknown kind '" + s + "'");
}

}  // namespace

std::string ObservableSpec::default_name() const {
    std::ostringstream os;
    os << kind_name(kind);
    switch (kind) {
        case Kind::Theta:
        case Kind::ThetaMgf:
        case Kind::Empirical:
            os << "[n=" << mode << "]";
            break;
        case Kind::Martingale:
            os << "[n=" << mode << ",c=" << c_scale << "]";
            break;
        case Kind::SiteMean:
        case Kind::Density:
        case Kind::PairMean:
            os << "@" << time;
            break;
        default:
            break;
    }
    return os.str();
}

json ObservableSpec::to_json() const {
    json j{{"kind", kind_name(kind)}};
    if (!name.empty()) j["name"] = name;
    switch (kind) {
        case Kind::SiteMean:
        case Kind::Density:
        case Kind::PairMean:
            j["time"] = time;
            break;
        case Kind::Theta:
            j["mode"] = mode;
            j["times"] = times;
            break;
        case Kind::ThetaMgf:
            j["mode"] = mode;
            j["time"] = time;
            break;
        case Kind::Empirical:
            j["mode"] = mode;
            j["time"] = time;
            break;
        case Kind::Martingale:
            j["mode"] = mode;
            j["c_scale"] = c_scale;
            j["times"] = times;
            break;
        case Kind::MartingaleField:
            j["control"] = control.to_json();
            j["times"] = times;
            break;
        case Kind::PairIntegral:
        case Kind::Replacement:
            j["control"] = control.to_json();
            break;
        case Kind::Count:
            break;
    }
    return j;
}

ObservableSpec ObservableSpec::from_json(const json& j) {
    ObservableSpec spec;
    spec.kind = kind_from_name(j.at("kind").get<std::string>());
    spec.name = j.value("name", std::string());
    spec.mode = j.value("mode", 0);
    spec.time = j.value("time", 0.0);
    if (j.contains("times")) spec.times = j.at("times").get<std::vector<double>>();
    spec.c_scale = j.value("c_scale", 1.0);
    if (j.contains("control")) spec.control = ControlField::from_json(j.at("control"));
    return spec;
}

double RunConfig::a_n() const { return std::pow(static_cast<double>(n_sites), beta); }

void RunConfig::validate() const {
    std::vector<std::string> problems;
    if (n_sites < 2) problems.push_back("n_sites must be >= 2");
    if (!(beta > 0.5 && beta < 1.0)) problems.push_back("beta must lie in (1/2, 1)");
    if (horizon < 0.0) problems.push_back("horizon must be >= 0");
    if (replicas < 1) problems.push_back("replicas must be >= 1");
    if (schema_version != 1) problems.push_back("unsupported schema_version");
    if (initial.kind == InitialLaw::Kind::Canonical &&
        (initial.k_particles < 1 || initial.k_particles > n_sites - 1)) {
        problems.push_back("canonical k_particles outside [1, n_sites-1]");
    }
    if (initial.kind == InitialLaw::Kind::Equilibrium &&
        !(initial.alpha > 0.0 && initial.alpha < 1.0)) {
        problems.push_back("equilibrium alpha outside (0,1)");
    }
    std::vector<std::string> names;
    for (const ObservableSpec& o : observables) {
        std::string n = o.name.empty() ? o.default_name() : o.name;
        for (const std::string& seen : names) {
            if (seen == n) problems.push_back("duplicate observable name '" + n + "'");
        }
        names.push_back(n);
        double latest = o.time;
        for (double t : o.times) latest = std::max(latest, t);
        if (latest > horizon) {
            problems.push_back("observable '" + n + "' samples beyond the horizon");
        }
        double prev = 0.0;
        bool ordered = true;
        for (double t : o.times) {
            if (t < 0.0) problems.push_back("observable '" + n + "' has a negative time");
            if (t < prev) ordered = false;
            prev = t;
        }
        if (!ordered) {
            problems.push_back("observable '" + n + "' has a non-monotone time grid");
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid RunConfig:";
        for (const std::string& p : problems) msg += "\n  - " + p;
        throw std::invalid_argument(msg);
    }
}

json RunConfig::to_json() const {
    json obs = json::array();
    for (const ObservableSpec& o : observables) obs.push_back(o.to_json());
    return {{"schema_version", schema_version},
            {"n_sites", n_sites},
            {"beta", beta},
            {"horizon", horizon},
            {"initial", initial.to_json()},
            {"engine", engine.to_json()},
            {"observables", obs},
            {"replicas", replicas},
            {"base_seed", base_seed},
            {"threads", threads},
            {"store_raw", store_raw}};
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig cfg;
    cfg.schema_version = j.value("schema_version", 1);
    cfg.n_sites = j.at("n_sites").get<int>();
    cfg.beta = j.value("beta", 0.75);
    cfg.horizon = j.value("horizon", 0.0);
    if (j.contains("initial")) cfg.initial = InitialLaw::from_json(j.at("initial"));
    if (j.contains("engine")) cfg.engine = EngineSpec::from_json(j.at("engine"));
    if (j.contains("observables")) {
        for (const json& o : j.at("observables")) {
            cfg.observables.push_back(ObservableSpec::from_json(o));
        }
    }
    cfg.replicas = j.value("replicas", 1L);
    cfg.base_seed = j.value("base_seed", static_cast<std::uint64_t>(0));
    cfg.threads = j.value("threads", 0);
    cfg.store_raw = j.value("store_raw", false);
    return cfg;
}

SeedSpec sampling_seed(const RunConfig& cfg, long replica, int phase) {
    return {cfg.base_seed, static_cast<std::uint64_t>(4 * replica + 2 * phase)};
}

SeedSpec dynamics_seed(const RunConfig& cfg, long replica, int phase) {
    return {cfg.base_seed, static_cast<std::uint64_t>(4 * replica + 2 * phase + 1)};
}

int resolve_threads(int configured) {
    if (const char* env = std::getenv("SEP_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    if (configured > 0) return configured;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// ---------------------------------------------------------------- stats core

namespace {

constexpr long kChunk = 64;

inline void neumaier_add(double& sum, double& comp, double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
        comp += (sum - t) + v;
    } else {
        comp += (v - t) + sum;
    }
    sum = t;
}

struct RunnerResult {
    long count = 0;
    std::vector<double> mean, variance, se;
    std::vector<std::vector<double>> raw;
};

// Deterministic parallel map-reduce: replicas are split into fixed chunks of
// kChunk, each chunk is reduced sequentially with compensated summation, and
// chunk partials are merged in chunk order. The result is bit-identical for
// any thread count.
RunnerResult run_replicas(long replicas, int threads, std::size_t width, bool store_raw,
                          const std::function<void(long, double*)>& eval) {
    const long chunks = (replicas + kChunk - 1) / kChunk;
    struct Partial {
        std::vector<double> sum, comp, sq, sqc;
    };
    std::vector<Partial> parts(static_cast<std::size_t>(chunks));

    RunnerResult out;
    out.count = replicas;
    if (store_raw) {
        out.raw.assign(static_cast<std::size_t>(replicas), std::vector<double>(width, 0.0));
    }

    std::atomic<long> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        std::vector<double> buf(width);
        try {
            while (true) {
                long c = next.fetch_add(1);
                if (c >= chunks) break;
                Partial& part = parts[static_cast<std::size_t>(c)];
                part.sum.assign(width, 0.0);
                part.comp.assign(width, 0.0);
                part.sq.assign(width, 0.0);
                part.sqc.assign(width, 0.0);
                long lo = c * kChunk;
                long hi = std::min(replicas, lo + kChunk);
                for (long r = lo; r < hi; ++r) {
                    eval(r, buf.data());
                    for (std::size_t i = 0; i < width; ++i) {
                        neumaier_add(part.sum[i], part.comp[i], buf[i]);
                        neumaier_add(part.sq[i], part.sqc[i], buf[i] * buf[i]);
                    }
                    if (store_raw) out.raw[static_cast<std::size_t>(r)] = buf;
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };

    int pool = static_cast<int>(std::max<long>(1, std::min<long>(threads, chunks)));
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(pool));
    for (int i = 0; i < pool; ++i) workers.emplace_back(worker);
    for (std::thread& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<double> sum(width, 0.0), comp(width, 0.0), sq(width, 0.0), sqc(width, 0.0);
    for (long c = 0; c < chunks; ++c) {
        const Partial& part = parts[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < width; ++i) {
            neumaier_add(sum[i], comp[i], part.sum[i] + part.comp[i]);
            neumaier_add(sq[i], sqc[i], part.sq[i] + part.sqc[i]);
        }
    }

    out.mean.resize(width);
    out.variance.resize(width);
    out.se.resize(width);
    const double r = static_cast<double>(replicas);
    for (std::size_t i = 0; i < width; ++i) {
        double s = sum[i] + comp[i];
        double q = sq[i] + sqc[i];
        double m = s / r;
        double var = replicas > 1 ? std::max(0.0, (q - s * m) / (r - 1.0)) : 0.0;
        out.mean[i] = m;
        out.variance[i] = var;
        out.se[i] = std::sqrt(var / r);
    }
    return out;
}

// ---------------------------------------------------------------- observables

struct ReplicaProbe {
    std::unique_ptr<PathObserver> observer;
    std::function<void(double*)> finalize;
};

class ObservableRuntime {
public:
    virtual ~ObservableRuntime() = default;
    virtual std::size_t width() const = 0;
    virtual std::vector<std::string> labels() const = 0;
    virtual ReplicaProbe probe() const = 0;

    std::string name;
};

std::vector<std::string> time_labels(const std::vector<double>& times) {
    std::vector<std::string> out;
    out.reserve(times.size());
    for (double t : times) {
        std::ostringstream os;
        os << "t=" << t;
        out.push_back(os.str());
    }
    return out;
}

class SiteMeanRuntime : public ObservableRuntime {
public:
    SiteMeanRuntime(int n, double t) : n_(n), t_(t) {}
    std::size_t width() const override { return static_cast<std::size_t>(n_); }
    std::vector<std::string> labels() const override {
        std::vector<std::string> out;
        for (int x = 0; x < n_; ++x) out.push_back("x=" + std::to_string(x));
        return out;
    }
    ReplicaProbe probe() const override {
        auto buf = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n_), 0.0);
        int n = n_;
        ReplicaProbe p;
        p.observer = std::make_unique<SnapshotObserver>(
            std::vector<double>{t_}, [buf, n](std::size_t, double, const Configuration& c) {
                for (int x = 0; x < n; ++x) (*buf)[static_cast<std::size_t>(x)] = c.occupied(x);
            });
        p.finalize = [buf, n](double* out) {
            for (int x = 0; x < n; ++x) out[x] = (*buf)[static_cast<std::size_t>(x)];
        };
        return p;
    }

private:
    int n_;
    double t_;
};

class ScalarSnapshotRuntime : public ObservableRuntime {
public:
    using Eval = std::function<double(const Configuration&)>;
    ScalarSnapshotRuntime(double t, std::string label, Eval eval)
        : t_(t), label_(std::move(label)), eval_(std::move(eval)) {}
    std::size_t width() const override { return 1; }
    std::vector<std::string> labels() const override { return {label_}; }
    ReplicaProbe probe() const override {
        auto buf = std::make_shared<double>(0.0);
        Eval eval = eval_;
        ReplicaProbe p;
        p.observer = std::make_unique<SnapshotObserver>(
            std::vector<double>{t_},
            [buf, eval](std::size_t, double, const Configuration& c) { *buf = eval(c); });
        p.finalize = [buf](double* out) { out[0] = *buf; };
        return p;
    }

private:
    double t_;
    std::string label_;
    Eval eval_;
};

class ThetaRuntime : public ObservableRuntime {
public:
    ThetaRuntime(int n, int mode, std::vector<double> times, const LatticeMean& mean, double a_n)
        : n_(n), times_(std::move(times)), a_n_(a_n) {
        row_.resize(static_cast<std::size_t>(n));
        for (int x = 0; x < n; ++x) {
            row_[static_cast<std::size_t>(x)] = basis_eval(mode, static_cast<double>(x) / n);
        }
        msum_.reserve(times_.size());
        for (double t : times_) msum_.push_back(mean.weighted_sum(mode, t));
    }
    std::size_t width() const override { return times_.size(); }
    std::vector<std::string> labels() const override { return time_labels(times_); }
    ReplicaProbe probe() const override {
        auto sums = std::make_shared<std::vector<double>>(times_.size(), 0.0);
        const std::vector<double>* row = &row_;
        int n = n_;
        ReplicaProbe p;
        p.observer = std::make_unique<SnapshotObserver>(
            times_, [sums, row, n](std::size_t k, double, const Configuration& c) {
                double s = 0.0;
                for (int x = 0; x < n; ++x) {
                    if (c.occupied(x)) s += (*row)[static_cast<std::size_t>(x)];
                }
                (*sums)[k] = s;
            });
        const std::vector<double>* msum = &msum_;
        double a = a_n_;
        p.finalize = [sums, msum, a](double* out) {
            for (std::size_t k = 0; k < sums->size(); ++k) {
                out[k] = ((*sums)[k] - (*msum)[k]) / a;
            }
        };
        return p;
    }

protected:
    int n_;
    std::vector<double> times_;
    double a_n_;
    std::vector<double> row_, msum_;
};

class ThetaMgfRuntime : public ThetaRuntime {
public:
    ThetaMgfRuntime(int n, int mode, double time, const LatticeMean& mean, double a_n)
        : ThetaRuntime(n, mode, {time}, mean, a_n), scale_(a_n * a_n / n) {}
    ReplicaProbe probe() const override {
        ReplicaProbe p = ThetaRuntime::probe();
        auto inner = std::move(p.finalize);
        double scale = scale_;
        p.finalize = [inner, scale](double* out) {
            inner(out);
            out[0] = std::exp(scale * out[0]);
        };
        return p;
    }

private:
    double scale_;
};

class EmpiricalRuntime : public ObservableRuntime {
public:
    EmpiricalRuntime(int n, int mode, double time) : n_(n), mode_(mode), t_(time) {}
    std::size_t width() const override { return 1; }
    std::vector<std::string> labels() const override { return {"t=" + std::to_string(t_)}; }
    ReplicaProbe probe() const override {
        auto buf = std::make_shared<double>(0.0);
        int n = n_, mode = mode_;
        ReplicaProbe p;
        p.observer = std::make_unique<SnapshotObserver>(
            std::vector<double>{t_},
            [buf, n, mode](std::size_t, double, const Configuration& c) {
                *buf = empirical_measure(c, FourierField::mode(mode, 1.0));
            });
        p.finalize = [buf](double* out) { out[0] = *buf; };
        return p;
    }

private:
    int n_, mode_;
    double t_;
};

class MartingaleRuntime : public ObservableRuntime {
public:
    MartingaleRuntime(std::shared_ptr<const MartingaleTables> tables) : tables_(std::move(tables)) {}
    std::size_t width() const override { return tables_->grid().size(); }
    std::vector<std::string> labels() const override { return time_labels(tables_->grid()); }
    ReplicaProbe probe() const override {
        auto obs = std::make_unique<MartingaleObserver>(*tables_);
        MartingaleObserver* raw = obs.get();
        ReplicaProbe p;
        p.observer = std::move(obs);
        p.finalize = [raw](double* out) {
            const MartingaleSeries& s = raw->series();
            for (std::size_t k = 0; k < s.values.size(); ++k) out[k] = s.values[k];
        };
        return p;
    }

private:
    std::shared_ptr<const MartingaleTables> tables_;
};

class PairIntegralRuntime : public ObservableRuntime {
public:
    PairIntegralRuntime(const ControlField& g, int n, double target)
        : g_(g), n_(n), target_(target) {}
    std::size_t width() const override { return 1; }
    std::vector<std::string> labels() const override { return {"value"}; }
    ReplicaProbe probe() const override {
        auto obs = std::make_unique<PairIntegralObserver>(g_, n_);
        PairIntegralObserver* raw = obs.get();
        double target = target_;
        bool absolute = absolute_;
        ReplicaProbe p;
        p.observer = std::move(obs);
        p.finalize = [raw, target, absolute](double* out) {
            out[0] = absolute ? std::abs(raw->total() - target) : raw->total();
        };
        return p;
    }
    void set_absolute(bool v) { absolute_ = v; }

private:
    ControlField g_;
    int n_;
    double target_;
    bool absolute_ = false;
};

class CountRuntime : public ObservableRuntime {
public:
    explicit CountRuntime(double horizon) : t_(horizon) {}
    std::size_t width() const override { return 1; }
    std::vector<std::string> labels() const override { return {"count"}; }
    ReplicaProbe probe() const override {
        auto buf = std::make_shared<double>(0.0);
        ReplicaProbe p;
        p.observer = std::make_unique<SnapshotObserver>(
            std::vector<double>{t_}, [buf](std::size_t, double, const Configuration& c) {
                *buf = static_cast<double>(c.particle_count());
            });
        p.finalize = [buf](double* out) { out[0] = *buf; };
        return p;
    }

private:
    double t_;
};

class MultiObserver : public PathObserver {
public:
    explicit MultiObserver(std::vector<PathObserver*> children) : children_(std::move(children)) {}
    void begin(const Configuration& c) override {
        for (PathObserver* o : children_) o->begin(c);
    }
    void advance(double a, double b, const Configuration& c) override {
        for (PathObserver* o : children_) o->advance(a, b, c);
    }
    void apply_event(double t, int e, const Configuration& c) override {
        for (PathObserver* o : children_) o->apply_event(t, e, c);
    }
    void finish(double h, const Configuration& c) override {
        for (PathObserver* o : children_) o->finish(h, c);
    }

private:
    std::vector<PathObserver*> children_;
};

Profile centering_profile(const RunConfig& cfg) {
    switch (cfg.initial.kind) {
        case InitialLaw::Kind::Product:
        case InitialLaw::Kind::Perturbed:
            return cfg.initial.phi;
        case InitialLaw::Kind::Equilibrium:
            return Profile::constant(cfg.initial.alpha);
        case InitialLaw::Kind::Canonical:
            return Profile::constant(static_cast<double>(cfg.initial.k_particles) / cfg.n_sites);
    }
    return Profile::constant(0.5);
}

Configuration sample_initial(const RunConfig& cfg, long replica, int phase) {
    SeedSpec seed = sampling_seed(cfg, replica, phase);
    switch (cfg.initial.kind) {
        case InitialLaw::Kind::Product:
            return sample_product(cfg.n_sites, cfg.initial.phi, seed);
        case InitialLaw::Kind::Equilibrium:
            return sample_equilibrium(cfg.n_sites, cfg.initial.alpha, seed);
        case InitialLaw::Kind::Canonical:
            return sample_canonical(cfg.n_sites, cfg.initial.k_particles, seed);
        case InitialLaw::Kind::Perturbed:
            return sample_perturbed(cfg.n_sites, cfg.initial.phi, cfg.initial.g, cfg.a_n(), seed);
    }
    throw std::logic_error("sample_initial: unreachable");
}

// Hydrodynamic path of the centering profile, for replacement targets.
DensityPath hydrodynamic_path(const Profile& phi, double horizon, int band = 32) {
    FourierField phi_field =
        FourierField::from_function([&phi](double u) { return phi(u); }, band);
    std::vector<double> times;
    const int nodes = 65;
    for (int i = 0; i < nodes; ++i) times.push_back(horizon * i / (nodes - 1));
    return heat_path(phi_field, std::move(times));
}

std::vector<std::unique_ptr<ObservableRuntime>> build_runtimes(const RunConfig& cfg,
                                                               const LatticeMean& mean) {
    std::vector<std::unique_ptr<ObservableRuntime>> out;
    const int n = cfg.n_sites;
    const double a = cfg.a_n();
    for (const ObservableSpec& spec : cfg.observables) {
        std::unique_ptr<ObservableRuntime> rt;
        switch (spec.kind) {
            case ObservableSpec::Kind::SiteMean:
                rt = std::make_unique<SiteMeanRuntime>(n, spec.time);
                break;
            case ObservableSpec::Kind::Density:
                rt = std::make_unique<ScalarSnapshotRuntime>(
                    spec.time, "t=" + std::to_string(spec.time), [n](const Configuration& c) {
                        return static_cast<double>(c.particle_count()) / n;
                    });
                break;
            case ObservableSpec::Kind::PairMean:
                rt = std::make_unique<ScalarSnapshotRuntime>(
                    spec.time, "t=" + std::to_string(spec.time), [n](const Configuration& c) {
                        int pairs = 0;
                        for (int x = 0; x < n; ++x) {
                            int y = x + 1 == n ? 0 : x + 1;
                            if (c.occupied(x) && c.occupied(y)) ++pairs;
                        }
                        return static_cast<double>(pairs) / n;
                    });
                break;
            case ObservableSpec::Kind::Theta:
                rt = std::make_unique<ThetaRuntime>(n, spec.mode, spec.times, mean, a);
                break;
            case ObservableSpec::Kind::ThetaMgf:
                rt = std::make_unique<ThetaMgfRuntime>(n, spec.mode, spec.time, mean, a);
                break;
            case ObservableSpec::Kind::Empirical:
                rt = std::make_unique<EmpiricalRuntime>(n, spec.mode, spec.time);
                break;
            case ObservableSpec::Kind::Martingale: {
                FourierField f = FourierField::mode(spec.mode, spec.c_scale);
                auto tables = std::make_shared<MartingaleTables>(ControlField(std::move(f)),
                                                                 mean, a, spec.times);
                rt = std::make_unique<MartingaleRuntime>(std::move(tables));
                break;
            }
            case ObservableSpec::Kind::MartingaleField: {
                auto tables =
                    std::make_shared<MartingaleTables>(spec.control, mean, a, spec.times);
                rt = std::make_unique<MartingaleRuntime>(std::move(tables));
                break;
            }
            case ObservableSpec::Kind::PairIntegral:
                rt = std::make_unique<PairIntegralRuntime>(spec.control, n, 0.0);
                break;
            case ObservableSpec::Kind::Replacement: {
                DensityPath rho = hydrodynamic_path(centering_profile(cfg), cfg.horizon);
                double target = pair_replacement_target(spec.control, rho, cfg.horizon);
                auto pr = std::make_unique<PairIntegralRuntime>(spec.control, n, target);
                pr->set_absolute(true);
                rt = std::move(pr);
                break;
            }
            case ObservableSpec::Kind::Count:
                rt = std::make_unique<CountRuntime>(cfg.horizon);
                break;
        }
        rt->name = spec.name.empty() ? spec.default_name() : spec.name;
        out.push_back(std::move(rt));
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- results io

const ObservableStats& EnsembleStats::by_name(const std::string& name) const {
    for (const ObservableStats& o : observables) {
        if (o.name == name) return o;
    }
    throw std::invalid_argument("EnsembleStats: no observable named '" + name + "'");
}

json EnsembleStats::to_json() const {
    json obs = json::array();
    for (const ObservableStats& o : observables) {
        json comps = json::array();
        for (const ComponentStats& c : o.components) {
            comps.push_back({{"label", c.label},
                             {"mean", c.mean},
                             {"variance", c.variance},
                             {"se", c.se}});
        }
        json entry{{"name", o.name}, {"replicas", o.replicas}, {"components", comps}};
        if (!o.raw.empty()) entry["raw"] = o.raw;
        obs.push_back(std::move(entry));
    }
    return {{"schema_version", 1}, {"config", config}, {"observables", obs}};
}

EnsembleStats EnsembleStats::from_json(const json& j) {
    EnsembleStats stats;
    stats.config = j.value("config", json());
    for (const json& o : j.at("observables")) {
        ObservableStats os;
        os.name = o.at("name").get<std::string>();
        os.replicas = o.at("replicas").get<long>();
        for (const json& c : o.at("components")) {
            os.components.push_back({c.at("label").get<std::string>(),
                                     c.at("mean").get<double>(),
                                     c.at("variance").get<double>(), c.at("se").get<double>()});
        }
        if (o.contains("raw")) os.raw = o.at("raw").get<std::vector<std::vector<double>>>();
        stats.observables.push_back(std::move(os));
    }
    return stats;
}

std::string EnsembleStats::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "observable,label,replicas,mean,variance,se\n";
    for (const ObservableStats& o : observables) {
        for (const ComponentStats& c : o.components) {
            os << o.name << ',' << c.label << ',' << o.replicas << ',' << c.mean << ','
               << c.variance << ',' << c.se << '\n';
        }
    }
    return os.str();
}

// ---------------------------------------------------------------- ensemble

EnsembleStats run_ensemble(const RunConfig& cfg) {
    cfg.validate();
    const double a = cfg.a_n();
    LatticeMean mean(cfg.n_sites, centering_profile(cfg));

    std::optional<TiltTables> tilt;
    if (cfg.engine.kind == EngineSpec::Kind::Tilted) {
        tilt.emplace(cfg.engine.control, cfg.n_sites, a, cfg.horizon);
    }

    auto runtimes = build_runtimes(cfg, mean);
    std::vector<std::size_t> offsets;
    std::size_t width = 0;
    for (const auto& rt : runtimes) {
        offsets.push_back(width);
        width += rt->width();
    }

    auto eval = [&](long replica, double* out) {
        Configuration init = sample_initial(cfg, replica, 0);
        std::vector<ReplicaProbe> probes;
        probes.reserve(runtimes.size());
        std::vector<PathObserver*> raw;
        for (const auto& rt : runtimes) {
            probes.push_back(rt->probe());
            if (probes.back().observer) raw.push_back(probes.back().observer.get());
        }
        MultiObserver multi(std::move(raw));
        if (cfg.horizon > 0.0) {
            run_engine(init, cfg.horizon, dynamics_seed(cfg, replica, 0),
                       tilt ? &*tilt : nullptr, &multi, false);
        } else {
            multi.begin(init);
            multi.finish(0.0, init);
        }
        for (std::size_t i = 0; i < probes.size(); ++i) {
            probes[i].finalize(out + offsets[i]);
        }
    };

    RunnerResult rr =
        run_replicas(cfg.replicas, resolve_threads(cfg.threads), width, cfg.store_raw, eval);

    EnsembleStats stats;
    stats.config = cfg.to_json();
    for (std::size_t i = 0; i < runtimes.size(); ++i) {
        ObservableStats os;
        os.name = runtimes[i]->name;
        os.replicas = cfg.replicas;
        std::vector<std::string> labels = runtimes[i]->labels();
        for (std::size_t k = 0; k < runtimes[i]->width(); ++k) {
            std::size_t idx = offsets[i] + k;
            os.components.push_back({labels[k], rr.mean[idx], rr.variance[idx], rr.se[idx]});
        }
        if (cfg.store_raw) {
            os.raw.reserve(rr.raw.size());
            for (const std::vector<double>& row : rr.raw) {
                os.raw.emplace_back(row.begin() + static_cast<long>(offsets[i]),
                                    row.begin() + static_cast<long>(offsets[i] + runtimes[i]->width()));
            }
        }
        stats.observables.push_back(std::move(os));
    }
    return stats;
}

// ---------------------------------------------------------------- rare events

std::string EventSpec::describe() const {
    if (always) return "always";
    std::ostringstream os;
    os << "theta_" << time << "(e_" << mode << (above ? ") >= " : ") <= ") << threshold;
    return os.str();
}

json EventSpec::to_json() const {
    if (always) return {{"kind", "always"}};
    return {{"kind", "threshold"},
            {"mode", mode},
            {"time", time},
            {"threshold", threshold},
            {"direction", above ? "above" : "below"}};
}

EventSpec EventSpec::from_json(const json& j) {
    EventSpec e;
    std::string kind = j.value("kind", std::string("threshold"));
    if (kind == "always") {
        e.always = true;
        e.time = j.value("time", 0.0);
        return e;
    }
    e.mode = j.at("mode").get<int>();
    e.time = j.at("time").get<double>();
    e.threshold = j.at("threshold").get<double>();
    e.above = j.value("direction", std::string("above")) != "below";
    return e;
}

json TiltChoice::to_json() const {
    return {{"g", g.to_json()}, {"control", control.to_json()}};
}

TiltChoice TiltChoice::from_json(const json& j) {
    TiltChoice t;
    t.g = Profile::from_json(j.at("g"));
    t.control = ControlField::from_json(j.at("control"));
    return t;
}

json IsEstimate::to_json() const {
    json j{{"event", event},
           {"replicas", replicas},
           {"naive", {{"p", naive_p}, {"se", naive_se}}}};
    if (has_is) {
        j["is"] = {{"p", is_p},
                   {"se", is_se},
                   {"mean_weight", mean_weight},
                   {"mean_weight_se", mean_weight_se},
                   {"ess", ess},
                   {"degenerate", degenerate}};
    }
    return j;
}

IsEstimate estimate_event(const RunConfig& cfg, const EventSpec& event,
                          const std::optional<TiltChoice>& tilt) {
    cfg.validate();
    const int n = cfg.n_sites;
    const double a = cfg.a_n();
    const double t_event = event.time;
    if (!(t_event > 0.0) && !event.always) {
        throw std::invalid_argument("estimate_event: event time must be positive");
    }
    if (t_event > cfg.horizon) {
        throw std::invalid_argument("estimate_event: event time beyond the horizon");
    }
    if (cfg.initial.kind != InitialLaw::Kind::Product) {
        throw std::invalid_argument("estimate_event: initial law must be product");
    }
    const Profile& phi = cfg.initial.phi;
    LatticeMean mean(n, phi);

    std::vector<double> row(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) {
        row[static_cast<std::size_t>(x)] = basis_eval(event.mode, static_cast<double>(x) / n);
    }
    const double msum = mean.weighted_sum(event.mode, t_event);
    auto theta_of = [&](const Configuration& c) {
        double s = 0.0;
        for (int x = 0; x < n; ++x) {
            if (c.occupied(x)) s += row[static_cast<std::size_t>(x)];
        }
        return (s - msum) / a;
    };

    IsEstimate est;
    est.event = event.describe();
    est.replicas = cfg.replicas;
    const int threads = resolve_threads(cfg.threads);

    // naive branch: symmetric dynamics from the plain product law
    auto naive_eval = [&](long r, double* out) {
        Configuration init = sample_initial(cfg, r, 0);
        double theta = 0.0;
        SnapshotObserver snap(std::vector<double>{t_event},
                              [&](std::size_t, double, const Configuration& c) { theta = theta_of(c); });
        run_engine(init, t_event, dynamics_seed(cfg, r, 0), nullptr, &snap, false);
        out[0] = event.holds(theta) ? 1.0 : 0.0;
    };
    RunnerResult naive = run_replicas(cfg.replicas, threads, 1, false, naive_eval);
    est.naive_p = naive.mean[0];
    est.naive_se = naive.se[0];

    if (!tilt) return est;
    est.has_is = true;

    // per-site log likelihood ratios log dP/dP^N_g as a function of eta_0(x)
    std::vector<double> lr_occupied(static_cast<std::size_t>(n)), lr_empty(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) {
        double u = static_cast<double>(x) / n;
        double p0 = phi(u);
        double p1 = p0 + a / n * tilt->g(u);
        if (!(p1 > 0.0 && p1 < 1.0)) {
            throw std::invalid_argument("estimate_event: perturbed marginal " +
                                        std::to_string(p1) + " at site " + std::to_string(x) +
                                        " outside (0,1)");
        }
        lr_occupied[static_cast<std::size_t>(x)] = std::log(p0) - std::log(p1);
        lr_empty[static_cast<std::size_t>(x)] = std::log(1.0 - p0) - std::log(1.0 - p1);
    }

    TiltTables tilt_tables(tilt->control, n, a, t_event);
    MartingaleTables mart_tables(tilt->control, mean, a, {t_event});

    RunConfig is_cfg = cfg;
    is_cfg.initial.kind = InitialLaw::Kind::Perturbed;
    is_cfg.initial.g = tilt->g;

    auto is_eval = [&](long r, double* out) {
        Configuration init = sample_initial(is_cfg, r, 1);
        double log_ratio = 0.0;
        for (int x = 0; x < n; ++x) {
            log_ratio += init.occupied(x) ? lr_occupied[static_cast<std::size_t>(x)]
                                          : lr_empty[static_cast<std::size_t>(x)];
        }
        double theta = 0.0;
        SnapshotObserver snap(std::vector<double>{t_event},
                              [&](std::size_t, double, const Configuration& c) { theta = theta_of(c); });
        MartingaleObserver mart(mart_tables);
        std::vector<PathObserver*> obs{&snap, &mart};
        MultiObserver multi(std::move(obs));
        run_engine(init, t_event, dynamics_seed(cfg, r, 1), &tilt_tables, &multi, false);
        double log_m = std::log(mart.series().values.at(0));
        double w = std::exp(log_ratio - log_m);
        out[0] = w;
        out[1] = event.holds(theta) ? w : 0.0;
    };
    RunnerResult is = run_replicas(cfg.replicas, threads, 2, false, is_eval);
    est.is_p = is.mean[1];
    est.is_se = is.se[1];
    est.mean_weight = is.mean[0];
    est.mean_weight_se = is.se[0];
    const double r = static_cast<double>(cfg.replicas);
    double sum_w = is.mean[0] * r;
    double sum_w2 = is.variance[0] * (r - 1.0) + r * is.mean[0] * is.mean[0];
    est.ess = sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0;
    est.degenerate = !(est.ess > 1e-9 * r) || !std::isfinite(sum_w2);
    return est;
}

// ---------------------------------------------------------------- MDP curve

json CurveResult::to_json() const {
    json rows_json = json::array();
    for (const CurveRow& row : rows) {
        json r{{"n_sites", row.n_sites},
               {"a_n", row.a_n},
               {"p_naive", row.p_naive},
               {"se_naive", row.se_naive},
               {"p_is", row.p_is},
               {"se_is", row.se_is},
               {"ess", row.ess}};
        r["scaled_log_naive"] =
            std::isfinite(row.scaled_log_naive) ? json(row.scaled_log_naive) : json();
        r["scaled_log_is"] = std::isfinite(row.scaled_log_is) ? json(row.scaled_log_is) : json();
        rows_json.push_back(std::move(r));
    }
    return {{"rows", rows_json}, {"candidate_cost", candidate_cost}};
}

std::string CurveResult::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "n_sites,a_n,p_naive,se_naive,p_is,se_is,ess,scaled_log_naive,scaled_log_is,candidate_cost\n";
    for (const CurveRow& row : rows) {
        os << row.n_sites << ',' << row.a_n << ',' << row.p_naive << ',' << row.se_naive << ','
           << row.p_is << ',' << row.se_is << ',' << row.ess << ',';
        if (std::isfinite(row.scaled_log_naive)) os << row.scaled_log_naive;
        os << ',';
        if (std::isfinite(row.scaled_log_is)) os << row.scaled_log_is;
        os << ',' << candidate_cost << '\n';
    }
    return os.str();
}

CurveResult mdp_curve(const RunConfig& base, const std::vector<int>& n_list,
                      const EventSpec& event, const std::optional<TiltChoice>& tilt) {
    CurveResult out;

    if (tilt) {
        // rates-module cost of the candidate path generated by (g, F)
        const int band = 16;
        const int nodes = 65;
        const double horizon = std::max(event.time, 1e-12);
        std::vector<double> times;
        for (int i = 0; i < nodes; ++i) times.push_back(horizon * i / (nodes - 1));
        FourierField g_field = FourierField::from_function(
            [&](double u) { return tilt->g(u); }, band);
        FourierField phi_field = FourierField::from_function(
            [&](double u) { return base.initial.phi(u); }, band);
        DensityPath rho = heat_path(phi_field, times);
        DensityPath w = solve_controlled(g_field, tilt->control, rho, horizon);
        SusceptibilityPath chi = SusceptibilityPath::from_density(rho, times);
        out.candidate_cost = mdp_cost(w, g_field, base.initial.phi, chi, band, times);
    } else {
        out.candidate_cost = 0.0;  // W == 0 candidate
    }

    for (int n : n_list) {
        RunConfig cfg = base;
        cfg.n_sites = n;
        cfg.horizon = std::max(cfg.horizon, event.time);
        IsEstimate est = estimate_event(cfg, event, tilt);
        CurveRow row;
        row.n_sites = n;
        row.a_n = cfg.a_n();
        row.p_naive = est.naive_p;
        row.se_naive = est.naive_se;
        row.p_is = est.is_p;
        row.se_is = est.is_se;
        row.ess = est.ess;
        double scale = n / (cfg.a_n() * cfg.a_n());
        row.scaled_log_naive = est.naive_p > 0.0
                                   ? scale * std::log(est.naive_p)
                                   : std::numeric_limits<double>::quiet_NaN();
        row.scaled_log_is = (est.has_is && est.is_p > 0.0)
                                ? scale * std::log(est.is_p)
                                : std::numeric_limits<double>::quiet_NaN();
        out.rows.push_back(row);
    }
    return out;
}

// ---------------------------------------------------------------- exports

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::string series_csv(const EnsembleStats& stats) {
    std::ostringstream os;
    os.precision(17);
    os << "replica,mode,t,value\n";
    if (!stats.config.contains("observables")) return os.str();
    const json& specs = stats.config.at("observables");
    for (std::size_t i = 0; i < stats.observables.size() && i < specs.size(); ++i) {
        const json& spec = specs[i];
        const std::string kind = spec.value("kind", std::string());
        if (kind != "theta" && kind != "martingale") continue;
        const ObservableStats& obs = stats.observables[i];
        if (obs.raw.empty() || !spec.contains("times")) continue;
        const int mode = spec.value("mode", 0);
        std::vector<double> times = spec.at("times").get<std::vector<double>>();
        for (std::size_t r = 0; r < obs.raw.size(); ++r) {
            for (std::size_t k = 0; k < times.size() && k < obs.raw[r].size(); ++k) {
                os << r << ',' << mode << ',' << times[k] << ',' << obs.raw[r][k] << '\n';
            }
        }
    }
    return os.str();
}

std::string density_path_csv(const DensityPath& path, int grid_points) {
    std::ostringstream os;
    os.precision(17);
    os << "t,u,value\n";
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        for (int j = 0; j < grid_points; ++j) {
            double u = static_cast<double>(j) / grid_points;
            os << path.times[i] << ',' << u << ',' << path.fields[i].value(u) << '\n';
        }
    }
    return os.str();
}

}  // namespace sep
