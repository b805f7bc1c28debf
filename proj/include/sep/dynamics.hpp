#pragma once

#include <cstdint>
#include <vector>

#include "sep/control_field.hpp"
#include "sep/lattice.hpp"
#include "sep/rng.hpp"

namespace sep {

// One accepted swap. Times are macroscopic (the engine's rates carry the
// N^2 factor) and strictly increasing within a trajectory.
struct Event {
    double time;
    std::int32_t edge;
};

// Piecewise-constant path: replaying events from the initial configuration
// reproduces the state at any t in [0, horizon]. The particle count is
// constant along the trajectory.
struct Trajectory {
    Configuration initial;
    std::vector<Event> events;
    double horizon = 0.0;
};

// Configuration after applying all events with time <= t. Throws when t is
// outside [0, horizon].
Configuration state_at(const Trajectory& traj, double t);

// Streaming consumer of a piecewise-constant path. The driver owns the
// configuration and applies swaps; observers see, in order:
//   begin(c0); { advance(t0,t1,c); apply_event(t1,edge,c_before); }* ;
//   advance(t_last,T,c); finish(T,c).
// The configuration passed to advance is constant on [t_from, t_to).
class PathObserver {
public:
    virtual ~PathObserver() = default;
    virtual void begin(const Configuration& /*c0*/) {}
    virtual void advance(double /*t_from*/, double /*t_to*/, const Configuration& /*c*/) {}
    virtual void apply_event(double /*t*/, int /*edge*/, const Configuration& /*before*/) {}
    virtual void finish(double /*horizon*/, const Configuration& /*c*/) {}
};

// Drives an observer over a stored trajectory.
void replay(const Trajectory& traj, PathObserver& obs);

// Active-edge set (edges x with eta(x) != eta(x+1)) with O(1) membership
// updates and uniform index access. A swap at x can only change the
// activity of edges x-1 and x+1, which keeps maintenance O(1) per event.
class ActiveEdges {
public:
    void rebuild(const Configuration& c);
    int size() const { return static_cast<int>(list_.size()); }
    int at(int i) const { return list_[static_cast<std::size_t>(i)]; }
    bool contains(int edge) const { return pos_[static_cast<std::size_t>(edge)] >= 0; }
    void update(int edge, bool active);

private:
    std::vector<std::int32_t> list_;
    std::vector<std::int32_t> pos_;  // index in list_, or -1
};

// Per-edge tilt exponent tables for a control F: exponent(x, sgn, t) =
// (a_N/N) * sgn * (F_t(x/N) - F_t((x+1)/N)). Built once per (F, N, horizon)
// and shared read-only across replicas.
class TiltTables {
public:
    TiltTables(const ControlField& field, int n_sites, double a_n, double horizon);

    double exponent(int edge, int sgn, double t) const {
        double d = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            d += weights_[i].value(t) * delta_[i][static_cast<std::size_t>(edge)];
        }
        return a_over_n_ * sgn * d;
    }

    // max over t in [0, horizon] and all edges of |exponent|; dominates every
    // instantaneous rate exponent, so thinning acceptance ratios stay <= 1.
    double exponent_bound() const { return bound_; }

    int n_sites() const { return n_; }
    double a_over_n() const { return a_over_n_; }

private:
    int n_;
    double a_over_n_;
    double bound_ = 0.0;
    std::vector<TimeWeight> weights_;
    std::vector<std::vector<double>> delta_;
};

// N^2 * exp((a_N/N) (eta(x+1) - eta(x)) (F_t(x/N) - F_t((x+1)/N))).
// Inactive edges get exponent 0 and rate N^2; their swap is a no-op.
double tilted_swap_rate(const Configuration& c, int x, double t, const ControlField& F,
                        double a_n, int n_sites);

// Exact continuous-time sample of the diffusively rescaled symmetric
// exclusion process: every active edge swaps at rate N^2; swaps across
// inactive edges are no-ops and generate no events.
Trajectory run_symmetric(const Configuration& initial, double horizon, SeedSpec seed);

// Time-inhomogeneous tilted process with edge rates tilted_swap_rate,
// sampled exactly by thinning against the envelope
// N^2 exp(sup |exponent|) per active edge.
Trajectory run_tilted(const Configuration& initial, double horizon, const ControlField& F,
                      double a_n, SeedSpec seed);

// Core loop shared by both engines and the ensemble harness. tilt may be
// null (symmetric dynamics); obs may be null; with store_events = false the
// returned trajectory has an empty event list (streaming mode).
Trajectory run_engine(const Configuration& initial, double horizon, SeedSpec seed,
                      const TiltTables* tilt, PathObserver* obs, bool store_events);

}  // namespace sep
