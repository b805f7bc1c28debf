#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sep/fields.hpp"
#include "sep/sampling.hpp"

using namespace sep;

namespace {

struct MeanSe {
    double mean;
    double se;
};

MeanSe mean_se(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    double m = s / static_cast<double>(v.size());
    double q = 0.0;
    for (double x : v) q += (x - m) * (x - m);
    double var = q / (static_cast<double>(v.size()) - 1.0);
    return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

double variance(const std::vector<double>& v) {
    MeanSe ms = mean_se(v);
    return ms.se * ms.se * static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("empirical_measure closed cases") {
    Configuration full = make_configuration(6, {0, 1, 2, 3, 4, 5});
    CHECK(empirical_measure(full, FourierField::mode(0, 1.0)) == doctest::Approx(1.0));
    // discrete orthogonality: sum of cos over the full lattice vanishes
    CHECK(std::abs(empirical_measure(full, FourierField::mode(1, 1.0))) < 1e-14);

    Configuration alternating = make_configuration(6, {0, 2, 4});
    CHECK(empirical_measure(alternating, FourierField::mode(0, 1.0)) == doctest::Approx(0.5));
}

TEST_CASE("fluctuation_field exact centering and scaling") {
    const int n = 32;
    Configuration c = sample_equilibrium(n, 0.5, {17, 4});
    std::vector<double> self_mean(n);
    for (int x = 0; x < n; ++x) self_mean[static_cast<std::size_t>(x)] = c.occupied(x) ? 1.0 : 0.0;
    FourierField f = FourierField::mode(1, 1.0);
    CHECK(std::abs(fluctuation_field(c, self_mean, f, 10.0)) < 1e-14);

    std::vector<double> mean(n, 0.5);
    double v1 = fluctuation_field(c, mean, f, 10.0);
    double v2 = fluctuation_field(c, mean, f, 20.0);
    CHECK(v1 == doctest::Approx(2.0 * v2).epsilon(1e-14));
    CHECK_THROWS(fluctuation_field(c, std::vector<double>(n - 1, 0.5), f, 10.0));
}

TEST_CASE("fluctuation field is linear in the test function") {
    const int n = 64;
    Configuration c = sample_equilibrium(n, 0.3, {18, 9});
    std::vector<double> mean(n, 0.3);
    FourierField f = FourierField::mode(1, 1.0, 3);
    FourierField g = FourierField::mode(-2, 1.0, 3);
    FourierField combo(3);
    combo += f;
    combo *= 2.5;
    FourierField gg = g;
    gg *= -1.25;
    combo += gg;
    double lhs = fluctuation_field(c, mean, combo, 7.0);
    double rhs = 2.5 * fluctuation_field(c, mean, f, 7.0) -
                 1.25 * fluctuation_field(c, mean, g, 7.0);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("fluctuation variance at time zero matches the product-law value") {
    // Var theta_0(e_0) = N / (4 a_N^2) at phi = 1/2
    const int n = 1024;
    const double a_n = std::pow(n, 0.75);
    const int replicas = 20000;
    LatticeMean mean(n, Profile::constant(0.5));
    std::vector<double> mean0 = mean.at(0.0);
    FourierField e0 = FourierField::mode(0, 1.0);
    std::vector<double> vals;
    vals.reserve(replicas);
    for (int r = 0; r < replicas; ++r) {
        Configuration c = sample_product(n, Profile::constant(0.5), {19, static_cast<std::uint64_t>(r)});
        vals.push_back(fluctuation_field(c, mean0, e0, a_n));
    }
    double target = n / (4.0 * a_n * a_n);
    CHECK(target == doctest::Approx(0.0078125));
    double var = variance(vals);
    CHECK(std::abs(var - target) < 4.0 * target * std::sqrt(2.0 / replicas));
}

TEST_CASE("fluctuation_series is constant on a frozen trajectory") {
    const int n = 16;
    std::vector<int> all;
    for (int x = 0; x < n; ++x) all.push_back(x);
    Trajectory traj = run_symmetric(make_configuration(n, all), 0.01, {20, 1});
    auto series = fluctuation_series(traj, 2, Profile::constant(0.999), std::pow(n, 0.75),
                                     {0.0, 0.002, 0.01});
    for (const FluctuationSeries& s : series) {
        // constant mean (flat profile) and no events: theta frozen in time
        for (double v : s.values) CHECK(v == doctest::Approx(s.values[0]).epsilon(1e-12));
    }
}

TEST_CASE("equilibrium fluctuation variance is stationary across modes and time") {
    const int n = 128;
    const double alpha = 0.5;
    const double a_n = std::pow(n, 0.75);
    const int replicas = 3000;
    const std::vector<double> grid{0.002, 0.006};
    std::vector<std::vector<double>> plus(grid.size()), minus(grid.size());
    for (int r = 0; r < replicas; ++r) {
        Configuration init = sample_equilibrium(n, alpha, {21, static_cast<std::uint64_t>(2 * r)});
        Trajectory traj = run_symmetric(init, 0.006, {21, static_cast<std::uint64_t>(2 * r + 1)});
        auto series = fluctuation_series(traj, 1, Profile::constant(alpha), a_n,
                                         std::vector<double>(grid));
        for (const FluctuationSeries& s : series) {
            if (s.mode == 0) continue;
            for (std::size_t k = 0; k < grid.size(); ++k) {
                (s.mode == 1 ? plus : minus)[k].push_back(s.values[k]);
            }
        }
    }
    const double target = (n / (a_n * a_n)) * alpha * (1.0 - alpha) * 0.5;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double vp = variance(plus[k]);
        double vm = variance(minus[k]);
        double band = 4.0 * target * std::sqrt(2.0 / replicas);
        CHECK(std::abs(vp - target) < band);
        CHECK(std::abs(vm - target) < band);
        CHECK(std::abs(vp - vm) < 2.0 * band);
    }
}

TEST_CASE("pair_time_integral closed cases") {
    const int n = 16;
    std::vector<int> all;
    for (int x = 0; x < n; ++x) all.push_back(x);
    const double horizon = 0.01;
    ControlField ones(FourierField::mode(0, 1.0));

    Trajectory full = run_symmetric(make_configuration(n, all), horizon, {22, 1});
    CHECK(pair_time_integral(full, ones) == doctest::Approx(horizon).epsilon(1e-12));

    Trajectory single = run_symmetric(make_configuration(n, {3}), horizon, {22, 2});
    CHECK(pair_time_integral(single, ones) == doctest::Approx(0.0));
}

TEST_CASE("pair_time_integral matches T alpha^2 at equilibrium") {
    const int n = 64;
    const double alpha = 0.5, horizon = 0.01;
    const int replicas = 2000;
    ControlField ones(FourierField::mode(0, 1.0));
    std::vector<double> vals;
    for (int r = 0; r < replicas; ++r) {
        Configuration init = sample_equilibrium(n, alpha, {23, static_cast<std::uint64_t>(2 * r)});
        Trajectory traj = run_symmetric(init, horizon, {23, static_cast<std::uint64_t>(2 * r + 1)});
        vals.push_back(pair_time_integral(traj, ones));
    }
    MeanSe ms = mean_se(vals);
    CHECK(std::abs(ms.mean - horizon * alpha * alpha) < 3.0 * ms.se);
}

TEST_CASE("pair_time_integral is additive over time splits") {
    const int n = 32;
    const double horizon = 0.01, split = 0.004;
    ControlField ones(FourierField::mode(0, 1.0));
    Configuration init = sample_equilibrium(n, 0.5, {24, 0});
    Trajectory traj = run_symmetric(init, horizon, {24, 1});

    Trajectory head{init, {}, split};
    Trajectory tail{state_at(traj, split), {}, horizon - split};
    for (const Event& e : traj.events) {
        if (e.time <= split) {
            head.events.push_back(e);
        } else {
            tail.events.push_back({e.time - split, e.edge});
        }
    }
    double whole = pair_time_integral(traj, ones);
    double parts = pair_time_integral(head, ones) + pair_time_integral(tail, ones);
    CHECK(whole == doctest::Approx(parts).epsilon(1e-11));
}

TEST_CASE("block_average closed cases and range") {
    const int n = 20;
    std::vector<int> all, even;
    for (int x = 0; x < n; ++x) {
        all.push_back(x);
        if (x % 2 == 0) even.push_back(x);
    }
    Configuration full = make_configuration(n, all);
    Configuration alternating = make_configuration(n, even);
    Configuration empty = make_configuration(n, {});
    for (double delta : {0.1, 0.25, 0.4}) {
        for (int x : {0, 7, 19}) {
            CHECK(block_average(full, x, delta) == doctest::Approx(1.0));
            CHECK(block_average(empty, x, delta) == doctest::Approx(0.0));
            double b = block_average(alternating, x, delta);
            int w = static_cast<int>(std::floor(delta * n));
            CHECK(std::abs(b - 0.5) <= 1.0 / (2.0 * w + 1.0) + 1e-12);
            CHECK(b >= 0.0);
            CHECK(b <= 1.0);
        }
    }
    CHECK_THROWS(block_average(full, 0, 0.0));
    CHECK_THROWS(block_average(full, 0, 0.5));
}

TEST_CASE("replacement discrepancy closed cases and trend") {
    const double horizon = 0.01;
    ControlField zero;
    ControlField ones(FourierField::mode(0, 1.0));
    std::vector<double> times;
    for (int i = 0; i <= 32; ++i) times.push_back(horizon * i / 32);

    {
        const int n = 64;
        DensityPath rho = heat_path(FourierField::mode(0, 0.5), times);
        Configuration init = sample_equilibrium(n, 0.5, {25, 0});
        Trajectory traj = run_symmetric(init, horizon, {25, 1});
        CHECK(replacement_discrepancy(traj, zero, rho) == doctest::Approx(0.0));
    }

    // near-deterministic high-density limit
    {
        const int n = 256;
        DensityPath rho = heat_path(FourierField::mode(0, 0.999), times);
        Configuration init = sample_product(n, Profile::constant(0.999), {26, 0});
        Trajectory traj = run_symmetric(init, horizon, {26, 1});
        CHECK(replacement_discrepancy(traj, ones, rho) < 0.03 * horizon);
    }

    // mean discrepancy decreases with N at equilibrium
    double prev = 1e9;
    for (int n : {32, 128, 512}) {
        DensityPath rho = heat_path(FourierField::mode(0, 0.5), times);
        const int replicas = n >= 512 ? 150 : 400;
        std::vector<double> vals;
        for (int r = 0; r < replicas; ++r) {
            Configuration init =
                sample_equilibrium(n, 0.5, {27, static_cast<std::uint64_t>(2 * r)});
            Trajectory traj =
                run_symmetric(init, horizon, {27, static_cast<std::uint64_t>(2 * r + 1)});
            vals.push_back(replacement_discrepancy(traj, ones, rho));
        }
        double mean = mean_se(vals).mean;
        CHECK(mean < prev);
        prev = mean;
    }
}

TEST_CASE("martingale with zero scale is identically one") {
    const int n = 32;
    Configuration init = sample_equilibrium(n, 0.5, {28, 0});
    Trajectory traj = run_symmetric(init, 0.005, {28, 1});
    MartingaleSeries s = martingale_series(traj, FourierField::mode(1, 1.0), 0.0,
                                           Profile::constant(0.5), std::pow(n, 0.75),
                                           {0.0, 0.002, 0.005});
    for (double v : s.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.values[0] == 1.0);
}

TEST_CASE("martingale on a frozen trajectory is identically one") {
    // all-ones configuration: the generator part vanishes and the explicit
    // time-derivative part cancels against Y_t/Y_0 exactly
    const int n = 24;
    std::vector<int> all;
    for (int x = 0; x < n; ++x) all.push_back(x);
    Trajectory traj = run_symmetric(make_configuration(n, all), 0.01, {29, 1});
    REQUIRE(traj.events.empty());
    MartingaleSeries s = martingale_series(traj, FourierField::mode(1, 1.0), 1.0,
                                           Profile::constant(0.999), std::pow(n, 0.75),
                                           {0.0, 0.003, 0.01});
    for (double v : s.values) CHECK(std::abs(v - 1.0) < 1e-12);
}

TEST_CASE("exponential martingale has mean one (nonequilibrium start)") {
    const int n = 64;
    const double a_n = std::pow(n, 0.75);
    const double horizon = 0.005;
    const std::vector<double> grid{0.001, 0.003, 0.005};
    const int replicas = 4000;
    Profile phi = Profile::cosine(0.5, 0.25, 1);
    LatticeMean mean(n, phi);
    FourierField e1 = FourierField::mode(1, 1.0);

    std::vector<std::vector<double>> vals(grid.size());
    for (int r = 0; r < replicas; ++r) {
        Configuration init = sample_product(n, phi, {30, static_cast<std::uint64_t>(2 * r)});
        Trajectory traj = run_symmetric(init, horizon, {30, static_cast<std::uint64_t>(2 * r + 1)});
        MartingaleSeries s = martingale_series(traj, e1, 1.0, mean, a_n,
                                               std::vector<double>(grid));
        for (std::size_t k = 0; k < grid.size(); ++k) vals[k].push_back(s.values[k]);
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
        MeanSe ms = mean_se(vals[k]);
        CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.se);
    }
}

TEST_CASE("martingale mean one across sizes, modes and scales") {
    struct Combo {
        int n;
        int mode;
        double c;
    };
    for (const Combo combo : {Combo{32, 2, 0.5}, Combo{96, -1, 1.0}}) {
        const double a_n = std::pow(combo.n, 0.75);
        const double horizon = 0.004;
        const int replicas = 1500;
        Profile phi = Profile::cosine(0.5, 0.2, 1);
        LatticeMean mean(combo.n, phi);
        FourierField f = FourierField::mode(combo.mode, 1.0);
        std::vector<double> vals;
        for (int r = 0; r < replicas; ++r) {
            Configuration init =
                sample_product(combo.n, phi, {40, static_cast<std::uint64_t>(2 * r)});
            Trajectory traj =
                run_symmetric(init, horizon, {40, static_cast<std::uint64_t>(2 * r + 1)});
            MartingaleSeries s = martingale_series(traj, f, combo.c, mean, a_n, {horizon});
            vals.push_back(s.values[0]);
        }
        MeanSe ms = mean_se(vals);
        CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.se);
    }
}

TEST_CASE("field martingale with constant control matches the static form") {
    const int n = 32;
    const double a_n = std::pow(n, 0.75);
    Profile phi = Profile::cosine(0.5, 0.2, 1);
    LatticeMean mean(n, phi);
    Configuration init = sample_product(n, phi, {31, 0});
    Trajectory traj = run_symmetric(init, 0.004, {31, 1});

    FourierField f(2);
    f.set_coeff(1, 0.8);
    f.set_coeff(-2, 0.3);
    MartingaleSeries a = martingale_series(traj, f, 1.0, mean, a_n, {0.0, 0.002, 0.004});

    ControlField split;  // same F as two constant terms: exercises the general path
    split.add_term(TimeWeight{}, FourierField::mode(1, 0.8));
    split.add_term(TimeWeight{}, FourierField::mode(-2, 0.3));
    MartingaleSeries b = martingale_field_series(traj, split, mean, a_n, {0.0, 0.002, 0.004});

    REQUIRE(a.values.size() == b.values.size());
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        CHECK(a.values[k] == doctest::Approx(b.values[k]).epsilon(1e-9));
        CHECK(a.compensator[k] == doctest::Approx(b.compensator[k]).epsilon(1e-8));
    }
}

TEST_CASE("field martingale with decaying control has mean one") {
    const int n = 48;
    const double a_n = std::pow(n, 0.75);
    const double horizon = 0.004;
    const std::vector<double> grid{0.002, 0.004};
    const int replicas = 3000;
    Profile phi = Profile::constant(0.5);
    LatticeMean mean(n, phi);
    ControlField field = ControlField::separable(TimeWeight{1.0, 200.0},
                                                 FourierField::mode(-1, 1.0));

    std::vector<std::vector<double>> vals(grid.size());
    for (int r = 0; r < replicas; ++r) {
        Configuration init = sample_product(n, phi, {32, static_cast<std::uint64_t>(2 * r)});
        Trajectory traj = run_symmetric(init, horizon, {32, static_cast<std::uint64_t>(2 * r + 1)});
        MartingaleSeries s = martingale_field_series(traj, field, mean, a_n,
                                                     std::vector<double>(grid));
        for (std::size_t k = 0; k < grid.size(); ++k) vals[k].push_back(s.values[k]);
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
        MeanSe ms = mean_se(vals[k]);
        CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.se);
    }
}

TEST_CASE("under the tilted law the inverse martingale has mean one") {
    const int n = 48;
    const double a_n = std::pow(n, 0.8);
    const double horizon = 0.005;
    const int replicas = 3000;
    Profile phi = Profile::constant(0.5);
    LatticeMean mean(n, phi);
    ControlField field(FourierField::mode(-1, 1.2));

    std::vector<double> inv;
    for (int r = 0; r < replicas; ++r) {
        Configuration init = sample_product(n, phi, {33, static_cast<std::uint64_t>(2 * r)});
        Trajectory traj = run_tilted(init, horizon, field, a_n,
                                     {33, static_cast<std::uint64_t>(2 * r + 1)});
        MartingaleSeries s = martingale_field_series(traj, field, mean, a_n, {horizon});
        inv.push_back(1.0 / s.values[0]);
    }
    MeanSe ms = mean_se(inv);
    CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.se);
}

TEST_CASE("reversing the control flips the sign of the tilted drift") {
    const int n = 64;
    const double a_n = std::pow(n, 0.8);
    const double horizon = 0.008;
    const int replicas = 1000;
    Profile phi = Profile::constant(0.5);
    LatticeMean mean(n, phi);
    auto drift = [&](double amplitude, std::uint64_t salt) {
        ControlField field(FourierField::mode(-1, amplitude));
        std::vector<double> vals;
        for (int r = 0; r < replicas; ++r) {
            Configuration init = sample_product(n, phi, {salt, static_cast<std::uint64_t>(2 * r)});
            Trajectory traj = run_tilted(init, horizon, field, a_n,
                                         {salt, static_cast<std::uint64_t>(2 * r + 1)});
            auto series = fluctuation_series(traj, 1, mean, a_n, {horizon});
            for (const FluctuationSeries& s : series) {
                if (s.mode == -1) vals.push_back(s.values[0]);
            }
        }
        return mean_se(vals);
    };
    MeanSe forward = drift(1.0, 35);
    MeanSe backward = drift(-1.0, 36);
    CHECK(forward.mean > 3.0 * forward.se);
    CHECK(backward.mean < -3.0 * backward.se);
    // antisymmetric to leading order
    double gap = std::abs(forward.mean + backward.mean);
    CHECK(gap < 3.0 * std::sqrt(forward.se * forward.se + backward.se * backward.se) +
                    0.1 * std::abs(forward.mean));
}

TEST_CASE("initial log moment generating function matches the variance formula") {
    // log E exp((a_N^2/N) theta_0(e_1)) ~= (a_N^2 / 2N) * int e_1^2 phi(1-phi)
    const int n = 256;
    const double a_n = std::pow(n, 0.75);
    const int replicas = 100000;
    const double scale = a_n * a_n / n;
    LatticeMean mean(n, Profile::constant(0.5));
    std::vector<double> mean0 = mean.at(0.0);
    FourierField e1 = FourierField::mode(1, 1.0);
    double sum = 0.0;
    for (int r = 0; r < replicas; ++r) {
        Configuration c = sample_product(n, Profile::constant(0.5), {34, static_cast<std::uint64_t>(r)});
        sum += std::exp(scale * fluctuation_field(c, mean0, e1, a_n));
    }
    double log_mgf = std::log(sum / replicas);
    double target = 0.5 * scale * (0.5 * 0.25);  // int e_1^2 phi(1-phi) = 1/8
    CHECK(std::abs(log_mgf - target) < 0.1 * target);
}
