#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sep/dynamics.hpp"
#include "sep/pde.hpp"
#include "sep/sampling.hpp"

using namespace sep;

namespace {

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

bool ks_pass_1pct(const std::vector<double>& a, const std::vector<double>& b) {
    double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
    return ks_statistic(a, b) <= 1.628 * std::sqrt((n + m) / (n * m));
}

// Independent reference for time-homogeneous tilted dynamics: full rate
// recomputation and proportional selection, no thinning.
Trajectory direct_rate_tilted(const Configuration& initial, double horizon,
                              const ControlField& field, double a_n, SeedSpec seed) {
    const int n = initial.n_sites();
    Configuration c = initial;
    CounterRng rng(seed);
    Trajectory traj{initial, {}, horizon};
    double t = 0.0;
    while (true) {
        std::vector<int> edges = c.active_edges();
        if (edges.empty()) break;
        std::vector<double> rates;
        double total = 0.0;
        for (int e : edges) {
            double r = tilted_swap_rate(c, e, t, field, a_n, n);
            rates.push_back(r);
            total += r;
        }
        t += rng.next_exponential(total);
        if (t > horizon) break;
        double u = rng.next_double() * total;
        std::size_t pick = 0;
        double acc = 0.0;
        for (std::size_t k = 0; k < rates.size(); ++k) {
            acc += rates[k];
            if (u < acc) {
                pick = k;
                break;
            }
        }
        c.swap_edge(edges[pick]);
        traj.events.push_back({t, static_cast<std::int32_t>(edges[pick])});
    }
    return traj;
}

}  // namespace

TEST_CASE("full configuration is frozen") {
    Configuration full = make_configuration(4, {0, 1, 2, 3});
    Trajectory traj = run_symmetric(full, 1.0, {1, 1});
    CHECK(traj.events.empty());
    CHECK(state_at(traj, 1.0) == full);
}

TEST_CASE("run_symmetric rejects nonpositive horizons") {
    Configuration c = make_configuration(4, {0});
    CHECK_THROWS(run_symmetric(c, 0.0, {1, 1}));
}

TEST_CASE("event times are strictly increasing and the count is conserved") {
    Configuration init = sample_equilibrium(64, 0.5, {3, 0});
    Trajectory traj = run_symmetric(init, 0.01, {3, 1});
    CHECK(traj.events.size() > 100);
    double prev = 0.0;
    for (const Event& e : traj.events) {
        CHECK(e.time > prev);
        prev = e.time;
    }
    for (double t : {0.0, 0.004, 0.01}) {
        CHECK(state_at(traj, t).particle_count() == init.particle_count());
    }
}

TEST_CASE("state_at boundaries and errors") {
    Configuration init = make_configuration(8, {0, 3, 5});
    Trajectory traj = run_symmetric(init, 0.005, {9, 2});
    CHECK(state_at(traj, 0.0) == init);
    if (!traj.events.empty()) {
        // between consecutive events the path is constant
        double t0 = traj.events[0].time;
        double t1 = traj.events.size() > 1 ? traj.events[1].time : traj.horizon;
        Configuration mid = state_at(traj, 0.5 * (t0 + t1));
        CHECK(mid == init.swapped(traj.events[0].edge));
    }
    CHECK_THROWS(state_at(traj, -1e-9));
    CHECK_THROWS(state_at(traj, 0.005 + 1e-9));
}

TEST_CASE("engines are reproducible from SeedSpec") {
    Configuration init = sample_equilibrium(32, 0.5, {5, 0});
    Trajectory a = run_symmetric(init, 0.01, {5, 1});
    Trajectory b = run_symmetric(init, 0.01, {5, 1});
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == b.events[i].time);
        CHECK(a.events[i].edge == b.events[i].edge);
    }
}

TEST_CASE("single particle performs a rate-2N^2 random walk") {
    const int n = 32;
    const double horizon = 0.001;
    const int replicas = 10000;
    double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
    for (int r = 0; r < replicas; ++r) {
        Configuration init = make_configuration(n, {n / 2});
        Trajectory traj = run_symmetric(init, horizon, {101, static_cast<std::uint64_t>(r)});
        int pos = n / 2;
        long disp = 0;
        for (const Event& e : traj.events) {
            if (e.edge == pos) {
                ++disp;
                pos = pos + 1 == n ? 0 : pos + 1;
            } else {
                int left = pos == 0 ? n - 1 : pos - 1;
                REQUIRE(e.edge == left);
                --disp;
                pos = left;
            }
        }
        double d = static_cast<double>(disp);
        sum += d;
        sum2 += d * d;
        sum4 += d * d * d * d;
    }
    double var = (sum2 - sum * sum / replicas) / (replicas - 1);
    double m4 = sum4 / replicas;
    double se_var = std::sqrt(std::max(0.0, m4 - var * var) / replicas);
    double target = 2.0 * n * n * horizon;  // lattice units
    CHECK(std::abs(var - target) < 3.0 * se_var);
}

TEST_CASE("Monte Carlo site means solve the lattice heat equation") {
    const int n = 16;
    const double t = 0.004;
    const int replicas = 30000;
    Profile phi = Profile::cosine(0.5, 0.25, 1);
    std::vector<double> sum(n, 0.0);
    for (int r = 0; r < replicas; ++r) {
        Configuration init = sample_product(n, phi, {202, static_cast<std::uint64_t>(2 * r)});
        Trajectory traj = run_symmetric(init, t, {202, static_cast<std::uint64_t>(2 * r + 1)});
        Configuration final = state_at(traj, t);
        for (int x = 0; x < n; ++x) {
            if (final.occupied(x)) sum[static_cast<std::size_t>(x)] += 1.0;
        }
    }
    std::vector<double> exact = exact_lattice_mean(n, phi, t);
    for (int x = 0; x < n; ++x) {
        double mean = sum[static_cast<std::size_t>(x)] / replicas;
        double se = std::sqrt(exact[static_cast<std::size_t>(x)] *
                              (1.0 - exact[static_cast<std::size_t>(x)]) / replicas);
        CHECK(std::abs(mean - exact[static_cast<std::size_t>(x)]) < 3.0 * se);
    }
}

TEST_CASE("equilibrium is invariant: site and pair statistics") {
    const int n = 32;
    const double t = 0.02;
    const int replicas = 4000;
    double site_sum = 0.0, pair_sum = 0.0;
    for (int r = 0; r < replicas; ++r) {
        Configuration init = sample_equilibrium(n, 0.5, {303, static_cast<std::uint64_t>(2 * r)});
        Trajectory traj = run_symmetric(init, t, {303, static_cast<std::uint64_t>(2 * r + 1)});
        Configuration final = state_at(traj, t);
        site_sum += static_cast<double>(final.particle_count()) / n;
        int pairs = 0;
        for (int x = 0; x < n; ++x) {
            int y = x + 1 == n ? 0 : x + 1;
            if (final.occupied(x) && final.occupied(y)) ++pairs;
        }
        pair_sum += static_cast<double>(pairs) / n;
    }
    double site_mean = site_sum / replicas;
    double pair_mean = pair_sum / replicas;
    // aggregated over sites, so the replica-level spread is ~0.5/sqrt(n)
    CHECK(std::abs(site_mean - 0.5) < 3.0 * 0.5 / std::sqrt(static_cast<double>(n) * replicas));
    CHECK(std::abs(pair_mean - 0.25) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n) * replicas));
}

TEST_CASE("tilted_swap_rate closed forms") {
    const int n = 8;
    const double a_n = std::pow(n, 0.75);
    Configuration c = make_configuration(n, {1});  // eta(1) = 1
    ControlField zero;
    CHECK(tilted_swap_rate(c, 0, 0.1, zero, a_n, n) == doctest::Approx(64.0));

    ControlField f(FourierField::mode(1, 0.5));
    // edge 0: eta(0)=0, eta(1)=1 -> sgn = +1, exponent (a/n)(F(0) - F(1/8))
    double delta = 0.5 * (std::cos(0.0) - std::cos(2.0 * M_PI / 8));
    double expected = 64.0 * std::exp(a_n / n * delta);
    CHECK(tilted_swap_rate(c, 0, 0.0, f, a_n, n) == doctest::Approx(expected).epsilon(1e-12));

    // inactive edge: eta(2) = eta(3) = 0 -> rate N^2
    CHECK(tilted_swap_rate(c, 2, 0.0, f, a_n, n) == doctest::Approx(64.0));
}

TEST_CASE("run_tilted with F = 0 matches run_symmetric in law") {
    const int n = 16;
    const double horizon = 0.05;
    const int replicas = 5000;
    ControlField zero;
    std::vector<double> first_sym, first_tilt;
    for (int r = 0; r < replicas; ++r) {
        Configuration init = sample_equilibrium(n, 0.5, {404, static_cast<std::uint64_t>(2 * r)});
        Trajectory a = run_symmetric(init, horizon, {404, static_cast<std::uint64_t>(2 * r + 1)});
        Trajectory b = run_tilted(init, horizon, zero, std::pow(n, 0.75),
                                  {405, static_cast<std::uint64_t>(2 * r + 1)});
        if (!a.events.empty()) first_sym.push_back(a.events[0].time);
        if (!b.events.empty()) first_tilt.push_back(b.events[0].time);
    }
    CHECK(ks_pass_1pct(first_sym, first_tilt));
}

TEST_CASE("thinned tilted engine matches a direct-rate reference in law") {
    const int n = 12;
    const double horizon = 0.02;
    const double a_n = std::pow(n, 0.75);
    const int replicas = 4000;
    ControlField field(FourierField::mode(1, 0.9));

    std::vector<double> first_thin, first_direct, count_thin, count_direct;
    for (int r = 0; r < replicas; ++r) {
        Configuration init = sample_equilibrium(n, 0.5, {505, static_cast<std::uint64_t>(3 * r)});
        Trajectory a = run_tilted(init, horizon, field, a_n,
                                  {505, static_cast<std::uint64_t>(3 * r + 1)});
        Trajectory b = direct_rate_tilted(init, horizon, field, a_n,
                                          {505, static_cast<std::uint64_t>(3 * r + 2)});
        if (!a.events.empty()) first_thin.push_back(a.events[0].time);
        if (!b.events.empty()) first_direct.push_back(b.events[0].time);
        count_thin.push_back(static_cast<double>(a.events.size()));
        count_direct.push_back(static_cast<double>(b.events.size()));
    }
    CHECK(ks_pass_1pct(first_thin, first_direct));
    CHECK(ks_pass_1pct(count_thin, count_direct));

    // matched means as a second route
    double mean_thin = 0.0, mean_direct = 0.0, var_thin = 0.0, var_direct = 0.0;
    for (double c : count_thin) mean_thin += c;
    for (double c : count_direct) mean_direct += c;
    mean_thin /= replicas;
    mean_direct /= replicas;
    for (double c : count_thin) var_thin += (c - mean_thin) * (c - mean_thin);
    for (double c : count_direct) var_direct += (c - mean_direct) * (c - mean_direct);
    var_thin /= replicas - 1;
    var_direct /= replicas - 1;
    double se = std::sqrt(var_thin / replicas + var_direct / replicas);
    CHECK(std::abs(mean_thin - mean_direct) < 3.0 * se);
}

TEST_CASE("tilted trajectories conserve the particle count") {
    const int n = 24;
    ControlField field(FourierField::mode(-1, 1.5));
    Configuration init = sample_equilibrium(n, 0.4, {606, 0});
    Trajectory traj = run_tilted(init, 0.01, field, std::pow(n, 0.8), {606, 1});
    for (double t : {0.0, 0.005, 0.01}) {
        CHECK(state_at(traj, t).particle_count() == init.particle_count());
    }
}
