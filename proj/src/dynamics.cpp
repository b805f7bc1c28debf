#include "sep/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sep {

Configuration state_at(const Trajectory& traj, double t) {
    if (t < 0.0 || t > traj.horizon) {
        throw std::invalid_argument("state_at: time " + std::to_string(t) + " outside [0, " +
                                    std::to_string(traj.horizon) + "]");
    }
    Configuration c = traj.initial;
    for (const Event& e : traj.events) {
        if (e.time > t) break;
        c.swap_edge(e.edge);
    }
    return c;
}

void replay(const Trajectory& traj, PathObserver& obs) {
    Configuration c = traj.initial;
    obs.begin(c);
    double t = 0.0;
    for (const Event& e : traj.events) {
        obs.advance(t, e.time, c);
        obs.apply_event(e.time, e.edge, c);
        c.swap_edge(e.edge);
        t = e.time;
    }
    obs.advance(t, traj.horizon, c);
    obs.finish(traj.horizon, c);
}

void ActiveEdges::rebuild(const Configuration& c) {
    const int n = c.n_sites();
    pos_.assign(static_cast<std::size_t>(n), -1);
    list_.clear();
    for (int x = 0; x < n; ++x) {
        if (c.edge_active(x)) {
            pos_[static_cast<std::size_t>(x)] = static_cast<std::int32_t>(list_.size());
            list_.push_back(x);
        }
    }
}

void ActiveEdges::update(int edge, bool active) {
    std::int32_t& p = pos_[static_cast<std::size_t>(edge)];
    if (active == (p >= 0)) return;
    if (active) {
        p = static_cast<std::int32_t>(list_.size());
        list_.push_back(static_cast<std::int32_t>(edge));
    } else {
        std::int32_t last = list_.back();
        list_[static_cast<std::size_t>(p)] = last;
        pos_[static_cast<std::size_t>(last)] = p;
        list_.pop_back();
        p = -1;
    }
}

TiltTables::TiltTables(const ControlField& field, int n_sites, double a_n, double horizon)
    : n_(n_sites), a_over_n_(a_n / n_sites) {
    for (const ControlField::Term& term : field.terms()) {
        weights_.push_back(term.time);
        std::vector<double>& d = delta_.emplace_back(static_cast<std::size_t>(n_sites));
        for (int x = 0; x < n_sites; ++x) {
            int y = x + 1 == n_sites ? 0 : x + 1;
            d[static_cast<std::size_t>(x)] =
                term.space.value(static_cast<double>(x) / n_sites) -
                term.space.value(static_cast<double>(y) / n_sites);
        }
    }
    // Two rigorous bounds on |F_t(x/N) - F_t((x+1)/N)|: the spatial
    // oscillation, and the mean-value bound sup|dF/du| / N (tighter for
    // large N). Take the smaller.
    double osc = field.osc_bound(0.0, horizon);
    double grad = field.sup_abs_deriv_bound(0.0, horizon) / n_sites;
    bound_ = a_over_n_ * std::min(osc, grad);
}

double tilted_swap_rate(const Configuration& c, int x, double t, const ControlField& F,
                        double a_n, int n_sites) {
    const double nsq = static_cast<double>(n_sites) * n_sites;
    int y = x + 1 == n_sites ? 0 : x + 1;
    int sgn = static_cast<int>(c.occupied(y)) - static_cast<int>(c.occupied(x));
    if (sgn == 0) return nsq;
    double du = static_cast<double>(x) / n_sites;
    double dv = static_cast<double>(y) / n_sites;
    return nsq * std::exp(a_n / n_sites * sgn * (F.value(t, du) - F.value(t, dv)));
}

Trajectory run_engine(const Configuration& initial, double horizon, SeedSpec seed,
                      const TiltTables* tilt, PathObserver* obs, bool store_events) {
    if (horizon <= 0.0) {
        throw std::invalid_argument("run_engine: horizon must be positive, got " +
                                    std::to_string(horizon));
    }
    const int n = initial.n_sites();
    const double nsq = static_cast<double>(n) * n;

    Configuration c = initial;
    ActiveEdges active;
    active.rebuild(c);
    CounterRng rng(seed);

    const double envelope = tilt ? nsq * std::exp(tilt->exponent_bound()) : nsq;

    Trajectory traj{initial, {}, horizon};
    if (obs) obs->begin(c);

    double t = 0.0;
    while (active.size() > 0) {
        double total = envelope * active.size();
        double tnext = t + rng.next_exponential(total);
        if (tnext > horizon) break;
        int x = active.at(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(active.size()))));
        if (tilt) {
            int y = x + 1 == n ? 0 : x + 1;
            int sgn = static_cast<int>(c.occupied(y)) - static_cast<int>(c.occupied(x));
            double rate = nsq * std::exp(tilt->exponent(x, sgn, tnext));
            if (rng.next_double() * envelope >= rate) {
                t = tnext;  // thinned: clock moves, state does not
                continue;
            }
        }
        if (obs) {
            obs->advance(t, tnext, c);
            obs->apply_event(tnext, x, c);
        }
        c.swap_edge(x);
        int left = x == 0 ? n - 1 : x - 1;
        int right = x + 1 == n ? 0 : x + 1;
        active.update(left, c.edge_active(left));
        if (right != left) active.update(right, c.edge_active(right));
        if (store_events) traj.events.push_back({tnext, static_cast<std::int32_t>(x)});
        t = tnext;
    }
    if (obs) {
        obs->advance(t, horizon, c);
        obs->finish(horizon, c);
    }
    return traj;
}

Trajectory run_symmetric(const Configuration& initial, double horizon, SeedSpec seed) {
    return run_engine(initial, horizon, seed, nullptr, nullptr, true);
}

Trajectory run_tilted(const Configuration& initial, double horizon, const ControlField& F,
                      double a_n, SeedSpec seed) {
    TiltTables tables(F, initial.n_sites(), a_n, horizon);
    return run_engine(initial, horizon, seed, &tables, nullptr, true);
}

}  // namespace sep
