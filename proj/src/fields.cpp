#include "sep/fields.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sep/quadrature.hpp"

namespace sep {

namespace {

constexpr long kMartingaleRefresh = 4096;
constexpr long kPairRefresh = 65536;

// Occupancy of `site` after the swap at edge x (sites x and y = x+1 swap).
inline bool occ_after(const Configuration& before, int x, int y, int site) {
    if (site == x) return before.occupied(y);
    if (site == y) return before.occupied(x);
    return before.occupied(site);
}

void check_grid(const std::vector<double>& grid, double horizon) {
    double prev = 0.0;
    for (double g : grid) {
        if (g < 0.0 || g > horizon) {
            throw std::invalid_argument("time grid point " + std::to_string(g) +
                                        " outside [0, " + std::to_string(horizon) + "]");
        }
        if (g < prev) throw std::invalid_argument("time grid must be nondecreasing");
        prev = g;
    }
}

}  // namespace

// ---------------------------------------------------------------- state functionals

double empirical_measure(const Configuration& c, const FourierField& f) {
    const int n = c.n_sites();
    double s = 0.0;
    for (int x = 0; x < n; ++x) {
        if (c.occupied(x)) s += f.value(static_cast<double>(x) / n);
    }
    return s / n;
}

double fluctuation_field(const Configuration& c, std::span<const double> mean,
                         const FourierField& f, double a_n) {
    const int n = c.n_sites();
    if (static_cast<int>(mean.size()) != n) {
        throw std::invalid_argument("fluctuation_field: mean has length " +
                                    std::to_string(mean.size()) + ", expected " +
                                    std::to_string(n));
    }
    double s = 0.0;
    for (int x = 0; x < n; ++x) {
        double centered = (c.occupied(x) ? 1.0 : 0.0) - mean[static_cast<std::size_t>(x)];
        s += centered * f.value(static_cast<double>(x) / n);
    }
    return s / a_n;
}

double block_average(const Configuration& c, int site, double delta) {
    if (!(delta > 0.0 && delta < 0.5)) {
        throw std::invalid_argument("block_average: delta = " + std::to_string(delta) +
                                    " outside (0, 1/2)");
    }
    const int n = c.n_sites();
    const int w = static_cast<int>(std::floor(delta * n));
    int count = 0;
    for (int j = -w; j <= w; ++j) {
        if (c.occupied(wrap(site + j, n))) ++count;
    }
    return static_cast<double>(count) / (2 * w + 1);
}

// ---------------------------------------------------------------- LatticeBasis

LatticeBasis::LatticeBasis(int n_sites, int band) : n_(n_sites), band_(band) {
    rows_.resize(2 * static_cast<std::size_t>(band) + 1);
    for (int m = -band; m <= band; ++m) {
        std::vector<double>& row = rows_[static_cast<std::size_t>(m + band)];
        row.resize(static_cast<std::size_t>(n_sites));
        for (int x = 0; x < n_sites; ++x) {
            row[static_cast<std::size_t>(x)] = basis_eval(m, static_cast<double>(x) / n_sites);
        }
    }
}

const std::vector<double>& LatticeBasis::row(int mode) const {
    return rows_[static_cast<std::size_t>(mode + band_)];
}

// ---------------------------------------------------------------- SnapshotObserver

SnapshotObserver::SnapshotObserver(
    std::vector<double> grid, std::function<void(std::size_t, double, const Configuration&)> fn)
    : grid_(std::move(grid)), fn_(std::move(fn)) {}

void SnapshotObserver::begin(const Configuration&) { next_ = 0; }

void SnapshotObserver::advance(double, double t_to, const Configuration& c) {
    while (next_ < grid_.size() && grid_[next_] < t_to) {
        fn_(next_, grid_[next_], c);
        ++next_;
    }
}

void SnapshotObserver::finish(double horizon, const Configuration& c) {
    while (next_ < grid_.size() && grid_[next_] <= horizon) {
        fn_(next_, grid_[next_], c);
        ++next_;
    }
}

// ---------------------------------------------------------------- PairIntegralObserver

PairIntegralObserver::PairIntegralObserver(const ControlField& g, int n_sites) : n_(n_sites) {
    for (const ControlField::Term& term : g.terms()) {
        weights_.push_back(term.time);
        std::vector<double>& f = fvals_.emplace_back(static_cast<std::size_t>(n_sites));
        for (int x = 0; x < n_sites; ++x) {
            f[static_cast<std::size_t>(x)] = term.space.value(static_cast<double>(x) / n_sites);
        }
    }
    pair_sum_.assign(weights_.size(), 0.0);
}

void PairIntegralObserver::refresh(const Configuration& c) {
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        double q = 0.0;
        for (int x = 0; x < n_; ++x) {
            int y = x + 1 == n_ ? 0 : x + 1;
            if (c.occupied(x) && c.occupied(y)) q += fvals_[i][static_cast<std::size_t>(x)];
        }
        pair_sum_[i] = q;
    }
    events_since_refresh_ = 0;
}

void PairIntegralObserver::begin(const Configuration& c) {
    total_ = 0.0;
    refresh(c);
}

void PairIntegralObserver::advance(double t_from, double t_to, const Configuration& c) {
    if (events_since_refresh_ >= kPairRefresh) refresh(c);
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        total_ += pair_sum_[i] * weights_[i].integral(t_from, t_to) / n_;
    }
}

void PairIntegralObserver::apply_event(double, int edge, const Configuration& before) {
    const int x = edge;
    const int y = x + 1 == n_ ? 0 : x + 1;
    // the pair across the swapped edge itself is unchanged; only the two
    // flanking pairs can change
    int flank[2] = {wrap(x - 1, n_), wrap(x + 1, n_)};
    int m = (flank[0] == flank[1]) ? 1 : 2;
    for (int j = 0; j < m; ++j) {
        int e = flank[j];
        int e1 = e + 1 == n_ ? 0 : e + 1;
        int before_pair = before.occupied(e) && before.occupied(e1) ? 1 : 0;
        int after_pair = occ_after(before, x, y, e) && occ_after(before, x, y, e1) ? 1 : 0;
        if (before_pair != after_pair) {
            double d = static_cast<double>(after_pair - before_pair);
            for (std::size_t i = 0; i < weights_.size(); ++i) {
                pair_sum_[i] += d * fvals_[i][static_cast<std::size_t>(e)];
            }
        }
    }
    ++events_since_refresh_;
}

// ---------------------------------------------------------------- MartingaleTables

MartingaleTables::MartingaleTables(const ControlField& field, const LatticeMean& mean, double a_n,
                                   std::vector<double> grid)
    : n_(mean.n_sites()), a_over_n_(a_n / mean.n_sites()), grid_(std::move(grid)) {
    for (const ControlField::Term& term : field.terms()) {
        weights_.push_back(term.time);
        std::vector<double>& f = fvals_.emplace_back(static_cast<std::size_t>(n_));
        std::vector<double>& d = delta_.emplace_back(static_cast<std::size_t>(n_));
        for (int x = 0; x < n_; ++x) {
            int y = x + 1 == n_ ? 0 : x + 1;
            f[static_cast<std::size_t>(x)] = term.space.value(static_cast<double>(x) / n_);
            d[static_cast<std::size_t>(x)] =
                term.space.value(static_cast<double>(x) / n_) -
                term.space.value(static_cast<double>(y) / n_);
        }
    }

    // closed-form mean sums sum_x m_t(x) F_t(x/N) at the grid times
    auto mean_sum = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            const ControlField::Term& term = field.terms()[i];
            s += weights_[i].value(t) * mean.weighted_sum(term.space, t);
        }
        return s;
    };
    msum_grid_.reserve(grid_.size());
    for (double g : grid_) msum_grid_.push_back(mean_sum(g));
    msum0_ = mean_sum(0.0);

    fast_ = weights_.size() == 1 && weights_[0].lambda == 0.0;
    if (fast_) {
        double kappa = a_over_n_ * weights_[0].scale;
        exp_plus_.resize(static_cast<std::size_t>(n_));
        exp_minus_.resize(static_cast<std::size_t>(n_));
        for (int x = 0; x < n_; ++x) {
            exp_plus_[static_cast<std::size_t>(x)] = std::expm1(kappa * delta_[0][static_cast<std::size_t>(x)]);
            exp_minus_[static_cast<std::size_t>(x)] = std::expm1(-kappa * delta_[0][static_cast<std::size_t>(x)]);
        }
    }
}

// ---------------------------------------------------------------- MartingaleObserver

MartingaleObserver::MartingaleObserver(const MartingaleTables& tables) : tb_(tables) {}

void MartingaleObserver::refresh_gsum(const Configuration& c) {
    double g = 0.0;
    const std::vector<double>& ep = tb_.expm1_plus();
    const std::vector<double>& em = tb_.expm1_minus();
    for (int j = 0; j < active_.size(); ++j) {
        int e = active_.at(j);
        int e1 = e + 1 == tb_.n_sites() ? 0 : e + 1;
        int sgn = static_cast<int>(c.occupied(e1)) - static_cast<int>(c.occupied(e));
        g += sgn > 0 ? ep[static_cast<std::size_t>(e)] : em[static_cast<std::size_t>(e)];
    }
    gsum_ = g;
    events_since_refresh_ = 0;
}

void MartingaleObserver::begin(const Configuration& c) {
    const std::size_t terms = tb_.term_count();
    s_eta_.assign(terms, 0.0);
    const int n = tb_.n_sites();
    for (std::size_t i = 0; i < terms; ++i) {
        const std::vector<double>& f = tb_.fvals(i);
        double s = 0.0;
        for (int x = 0; x < n; ++x) {
            if (c.occupied(x)) s += f[static_cast<std::size_t>(x)];
        }
        s_eta_[i] = s;
    }
    active_.rebuild(c);
    if (tb_.fast_path()) refresh_gsum(c);

    double sy = 0.0;
    for (std::size_t i = 0; i < terms; ++i) sy += tb_.weight(i).value(0.0) * s_eta_[i];
    log_y0_ = tb_.a_over_n() * (sy - tb_.mean_sum_initial());

    d_acc_ = 0.0;
    a_acc_ = 0.0;
    mark_ = 0.0;
    next_grid_ = 0;
    series_.times.clear();
    series_.values.clear();
    series_.compensator.clear();
}

double MartingaleObserver::generator_sum(double t, const Configuration& c) const {
    const int n = tb_.n_sites();
    const std::size_t terms = tb_.term_count();
    double h[8];
    double* hw = h;
    std::vector<double> hbig;
    if (terms > 8) {
        hbig.resize(terms);
        hw = hbig.data();
    }
    for (std::size_t i = 0; i < terms; ++i) hw[i] = tb_.weight(i).value(t);
    double g = 0.0;
    for (int j = 0; j < active_.size(); ++j) {
        int e = active_.at(j);
        int e1 = e + 1 == n ? 0 : e + 1;
        int sgn = static_cast<int>(c.occupied(e1)) - static_cast<int>(c.occupied(e));
        double d = 0.0;
        for (std::size_t i = 0; i < terms; ++i) {
            d += hw[i] * tb_.delta(i)[static_cast<std::size_t>(e)];
        }
        g += std::expm1(tb_.a_over_n() * sgn * d);
    }
    return g * n * n;
}

void MartingaleObserver::accumulate(double t_from, double t_to, const Configuration& c) {
    if (t_to <= t_from) return;
    const double nsq = static_cast<double>(tb_.n_sites()) * tb_.n_sites();
    if (tb_.fast_path()) {
        d_acc_ += nsq * gsum_ * (t_to - t_from);
        return;  // h is constant, so the d_t F part vanishes
    }
    // two-point Gauss on the (tiny) interval; the integrand is analytic and
    // nearly constant over inter-event gaps, so this is exact to roundoff
    const double mid = 0.5 * (t_from + t_to);
    const double half = 0.5 * (t_to - t_from);
    const double offset = half / std::sqrt(3.0);
    d_acc_ += half * (generator_sum(mid - offset, c) + generator_sum(mid + offset, c));
    for (std::size_t i = 0; i < tb_.term_count(); ++i) {
        a_acc_ += s_eta_[i] * (tb_.weight(i).value(t_to) - tb_.weight(i).value(t_from));
    }
}

void MartingaleObserver::record(double t) {
    double sy = 0.0;
    for (std::size_t i = 0; i < tb_.term_count(); ++i) {
        sy += tb_.weight(i).value(t) * s_eta_[i];
    }
    double log_y = tb_.a_over_n() * (sy - tb_.mean_sum_at_grid(next_grid_));
    double comp = tb_.a_over_n() *
                      (a_acc_ - (tb_.mean_sum_at_grid(next_grid_) - tb_.mean_sum_initial())) +
                  d_acc_;
    series_.times.push_back(t);
    series_.values.push_back(std::exp(log_y - log_y0_ - comp));
    series_.compensator.push_back(comp);
}

void MartingaleObserver::advance(double, double t_to, const Configuration& c) {
    if (tb_.fast_path() && events_since_refresh_ >= kMartingaleRefresh) refresh_gsum(c);
    const std::vector<double>& grid = tb_.grid();
    while (next_grid_ < grid.size() && grid[next_grid_] < t_to) {
        accumulate(mark_, grid[next_grid_], c);
        mark_ = grid[next_grid_];
        record(mark_);
        ++next_grid_;
    }
    accumulate(mark_, t_to, c);
    mark_ = t_to;
}

void MartingaleObserver::finish(double horizon, const Configuration& c) {
    const std::vector<double>& grid = tb_.grid();
    while (next_grid_ < grid.size() && grid[next_grid_] <= horizon) {
        accumulate(mark_, grid[next_grid_], c);
        mark_ = grid[next_grid_];
        record(mark_);
        ++next_grid_;
    }
}

void MartingaleObserver::apply_event(double, int edge, const Configuration& before) {
    const int n = tb_.n_sites();
    const int x = edge;
    const int y = x + 1 == n ? 0 : x + 1;
    const int sgn = static_cast<int>(before.occupied(y)) - static_cast<int>(before.occupied(x));
    if (sgn == 0) return;

    for (std::size_t i = 0; i < tb_.term_count(); ++i) {
        s_eta_[i] += sgn * tb_.delta(i)[static_cast<std::size_t>(x)];
    }

    int touched[3] = {wrap(x - 1, n), x, wrap(x + 1, n)};
    const bool fast = tb_.fast_path();
    for (int j = 0; j < 3; ++j) {
        int e = touched[j];
        bool seen = false;
        for (int k = 0; k < j; ++k) seen = seen || touched[k] == e;
        if (seen) continue;
        int e1 = e + 1 == n ? 0 : e + 1;
        int sgn_before =
            static_cast<int>(before.occupied(e1)) - static_cast<int>(before.occupied(e));
        int sgn_after = static_cast<int>(occ_after(before, x, y, e1)) -
                        static_cast<int>(occ_after(before, x, y, e));
        if (fast && sgn_before != sgn_after) {
            const std::vector<double>& ep = tb_.expm1_plus();
            const std::vector<double>& em = tb_.expm1_minus();
            if (sgn_before != 0) {
                gsum_ -= sgn_before > 0 ? ep[static_cast<std::size_t>(e)]
                                        : em[static_cast<std::size_t>(e)];
            }
            if (sgn_after != 0) {
                gsum_ += sgn_after > 0 ? ep[static_cast<std::size_t>(e)]
                                       : em[static_cast<std::size_t>(e)];
            }
        }
        if (e != x) active_.update(e, sgn_after != 0);
    }
    ++events_since_refresh_;
}

// ---------------------------------------------------------------- trajectory ops

std::vector<FluctuationSeries> fluctuation_series(const Trajectory& traj, int band,
                                                  const LatticeMean& mean, double a_n,
                                                  std::vector<double> grid) {
    check_grid(grid, traj.horizon);
    const int n = traj.initial.n_sites();
    LatticeBasis basis(n, band);
    const int modes = 2 * band + 1;

    std::vector<std::vector<double>> sums(static_cast<std::size_t>(modes),
                                          std::vector<double>(grid.size(), 0.0));
    SnapshotObserver obs(grid, [&](std::size_t k, double, const Configuration& c) {
        for (int m = -band; m <= band; ++m) {
            const std::vector<double>& row = basis.row(m);
            double s = 0.0;
            for (int x = 0; x < n; ++x) {
                if (c.occupied(x)) s += row[static_cast<std::size_t>(x)];
            }
            sums[static_cast<std::size_t>(m + band)][k] = s;
        }
    });
    replay(traj, obs);

    std::vector<FluctuationSeries> out;
    out.reserve(static_cast<std::size_t>(modes));
    for (int m = -band; m <= band; ++m) {
        FluctuationSeries series;
        series.mode = m;
        series.times = grid;
        series.values.resize(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) {
            double centered =
                sums[static_cast<std::size_t>(m + band)][k] - mean.weighted_sum(m, grid[k]);
            series.values[k] = centered / a_n;
        }
        out.push_back(std::move(series));
    }
    return out;
}

std::vector<FluctuationSeries> fluctuation_series(const Trajectory& traj, int band,
                                                  const Profile& phi, double a_n,
                                                  std::vector<double> grid) {
    LatticeMean mean(traj.initial.n_sites(), phi);
    return fluctuation_series(traj, band, mean, a_n, std::move(grid));
}

double pair_time_integral(const Trajectory& traj, const ControlField& g) {
    PairIntegralObserver obs(g, traj.initial.n_sites());
    replay(traj, obs);
    return obs.total();
}

double pair_replacement_target(const ControlField& g, const DensityPath& rho, double horizon) {
    static const QuadratureRule rule = gauss_legendre(8);
    const int p = 512;
    auto space_integral = [&](double s) {
        FourierField rho_s = rho.at(s);
        FourierField g_s = g.space_at(s);
        double acc = 0.0;
        for (int j = 0; j < p; ++j) {
            double u = static_cast<double>(j) / p;
            double r = rho_s.value(u);
            acc += r * r * g_s.value(u);
        }
        return acc / p;
    };

    double target = 0.0;
    for (std::size_t i = 0; i + 1 < rho.times.size(); ++i) {
        double a = std::max(rho.times[i], 0.0);
        double b = std::min(rho.times[i + 1], horizon);
        if (b <= a) continue;
        target += integrate(rule, a, b, space_integral);
    }
    return target;
}

double replacement_discrepancy(const Trajectory& traj, const ControlField& g,
                               const DensityPath& rho) {
    return std::abs(pair_time_integral(traj, g) -
                    pair_replacement_target(g, rho, traj.horizon));
}

MartingaleSeries martingale_series(const Trajectory& traj, const FourierField& f, double c_scale,
                                   const LatticeMean& mean, double a_n,
                                   std::vector<double> grid) {
    check_grid(grid, traj.horizon);
    FourierField scaled = f;
    scaled *= c_scale;
    MartingaleTables tables(ControlField(std::move(scaled)), mean, a_n, std::move(grid));
    MartingaleObserver obs(tables);
    replay(traj, obs);
    return obs.series();
}

MartingaleSeries martingale_series(const Trajectory& traj, const FourierField& f, double c_scale,
                                   const Profile& phi, double a_n, std::vector<double> grid) {
    LatticeMean mean(traj.initial.n_sites(), phi);
    return martingale_series(traj, f, c_scale, mean, a_n, std::move(grid));
}

MartingaleSeries martingale_field_series(const Trajectory& traj, const ControlField& field,
                                         const LatticeMean& mean, double a_n,
                                         std::vector<double> grid) {
    check_grid(grid, traj.horizon);
    MartingaleTables tables(field, mean, a_n, std::move(grid));
    MartingaleObserver obs(tables);
    replay(traj, obs);
    return obs.series();
}

MartingaleSeries martingale_field_series(const Trajectory& traj, const ControlField& field,
                                         const Profile& phi, double a_n,
                                         std::vector<double> grid) {
    LatticeMean mean(traj.initial.n_sites(), phi);
    return martingale_field_series(traj, field, mean, a_n, std::move(grid));
}

}  // namespace sep
