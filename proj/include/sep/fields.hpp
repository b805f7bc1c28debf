#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sep/control_field.hpp"
#include "sep/dynamics.hpp"
#include "sep/fourier.hpp"
#include "sep/pde.hpp"
#include "sep/profile.hpp"

namespace sep {

// ---------------------------------------------------------------- state functionals

// mu(f) = (1/N) sum_x eta(x) f(x/N).
double empirical_measure(const Configuration& c, const FourierField& f);

// theta(f) = (1/a_N) sum_x (eta(x) - mean(x)) f(x/N). The mean must be the
// exact lattice mean (length N, entries in [0,1]).
double fluctuation_field(const Configuration& c, std::span<const double> mean,
                         const FourierField& f, double a_n);

// Window average over j in [-floor(delta N), floor(delta N)] around site x,
// normalized by the window size 2 floor(delta N) + 1 so the result stays in
// [0,1]. Requires 0 < delta < 1/2.
double block_average(const Configuration& c, int site, double delta);

// ---------------------------------------------------------------- shared tables

// Basis rows e_n(x/N) for |n| <= band; built once and shared across replicas.
class LatticeBasis {
public:
    LatticeBasis(int n_sites, int band);
    int n_sites() const { return n_; }
    int band() const { return band_; }
    const std::vector<double>& row(int mode) const;

private:
    int n_, band_;
    std::vector<std::vector<double>> rows_;
};

// ---------------------------------------------------------------- observers

// Calls fn(grid_index, grid_time, config) with the configuration at each grid
// time (events at exactly the grid time are already applied).
class SnapshotObserver : public PathObserver {
public:
    SnapshotObserver(std::vector<double> grid,
                     std::function<void(std::size_t, double, const Configuration&)> fn);

    void begin(const Configuration& c) override;
    void advance(double t_from, double t_to, const Configuration& c) override;
    void finish(double horizon, const Configuration& c) override;

private:
    std::vector<double> grid_;
    std::function<void(std::size_t, double, const Configuration&)> fn_;
    std::size_t next_ = 0;
};

// Exact accumulation of int_0^T (1/N) sum_x eta_s(x) eta_s(x+1) G_s(x/N) ds:
// pair sums are piecewise constant between events and the time weights
// integrate in closed form, so there is no quadrature error.
class PairIntegralObserver : public PathObserver {
public:
    PairIntegralObserver(const ControlField& g, int n_sites);

    void begin(const Configuration& c) override;
    void advance(double t_from, double t_to, const Configuration& c) override;
    void apply_event(double t, int edge, const Configuration& before) override;

    double total() const { return total_; }

private:
    void refresh(const Configuration& c);

    int n_;
    std::vector<TimeWeight> weights_;
    std::vector<std::vector<double>> fvals_;  // per term: f_i(x/N)
    std::vector<double> pair_sum_;            // per term: sum_x eta(x)eta(x+1) f_i(x/N)
    double total_ = 0.0;
    long events_since_refresh_ = 0;
};

// Shared per-(F, N, grid) data for martingale accumulation: per-edge spatial
// differences, closed-form lattice mean sums at grid times, and expm1 tables
// for the time-constant fast path.
class MartingaleTables {
public:
    MartingaleTables(const ControlField& field, const LatticeMean& mean, double a_n,
                     std::vector<double> grid);

    int n_sites() const { return n_; }
    double a_over_n() const { return a_over_n_; }
    const std::vector<double>& grid() const { return grid_; }
    bool fast_path() const { return fast_; }

    std::size_t term_count() const { return weights_.size(); }
    const TimeWeight& weight(std::size_t i) const { return weights_[i]; }
    const std::vector<double>& fvals(std::size_t i) const { return fvals_[i]; }
    const std::vector<double>& delta(std::size_t i) const { return delta_[i]; }

    // sum_x m_t(x) F_t(x/N) at grid index k (closed form from LatticeMean).
    double mean_sum_at_grid(std::size_t k) const { return msum_grid_[k]; }
    double mean_sum_initial() const { return msum0_; }

    // fast path: expm1(+/- kappa * delta(x)) with kappa = (a_N/N) * h.
    const std::vector<double>& expm1_plus() const { return exp_plus_; }
    const std::vector<double>& expm1_minus() const { return exp_minus_; }

private:
    int n_;
    double a_over_n_;
    bool fast_;
    std::vector<double> grid_;
    std::vector<TimeWeight> weights_;
    std::vector<std::vector<double>> fvals_, delta_;
    std::vector<double> msum_grid_;
    double msum0_;
    std::vector<double> exp_plus_, exp_minus_;
};

struct MartingaleSeries {
    std::vector<double> times;
    std::vector<double> values;       // M_t, positive, M_0 = 1
    std::vector<double> compensator;  // int_0^t (d_s + L_N) Y / Y ds
};

// Exact-compensator exponential martingale tracker for
// Y_t = exp((a_N^2/N) theta_t(F_t)). Between events the configuration is
// frozen: the generator part is summed in closed form (time-constant F) or
// by two-point Gauss quadrature on the tiny inter-event interval; the
// explicit time-derivative part telescopes exactly through the closed-form
// lattice mean.
class MartingaleObserver : public PathObserver {
public:
    explicit MartingaleObserver(const MartingaleTables& tables);

    void begin(const Configuration& c) override;
    void advance(double t_from, double t_to, const Configuration& c) override;
    void apply_event(double t, int edge, const Configuration& before) override;
    void finish(double horizon, const Configuration& c) override;

    const MartingaleSeries& series() const { return series_; }

private:
    void accumulate(double t_from, double t_to, const Configuration& c);
    void record(double t);
    double generator_sum(double t, const Configuration& c) const;
    void refresh_gsum(const Configuration& c);

    const MartingaleTables& tb_;
    MartingaleSeries series_;
    std::vector<double> s_eta_;  // per term: sum_x eta(x) f_i(x/N)
    ActiveEdges active_;
    double gsum_ = 0.0;  // fast path: sum_active expm1(exponent)
    double d_acc_ = 0.0;
    double a_acc_ = 0.0;
    double log_y0_ = 0.0;
    double mark_ = 0.0;
    std::size_t next_grid_ = 0;
    long events_since_refresh_ = 0;
};

// ---------------------------------------------------------------- trajectory ops

struct FluctuationSeries {
    int mode = 0;
    std::vector<double> times;
    std::vector<double> values;
};

// theta_t(e_n) for |n| <= band at the grid times, centered with the exact
// lattice mean.
std::vector<FluctuationSeries> fluctuation_series(const Trajectory& traj, int band,
                                                  const LatticeMean& mean, double a_n,
                                                  std::vector<double> grid);
std::vector<FluctuationSeries> fluctuation_series(const Trajectory& traj, int band,
                                                  const Profile& phi, double a_n,
                                                  std::vector<double> grid);

double pair_time_integral(const Trajectory& traj, const ControlField& g);

// int_0^T int_T rho_s^2 G_s du ds, the hydrodynamic target of the
// replacement statistic.
double pair_replacement_target(const ControlField& g, const DensityPath& rho, double horizon);

// | pair_time_integral - pair_replacement_target |.
double replacement_discrepancy(const Trajectory& traj, const ControlField& g,
                               const DensityPath& rho);

// M_t for Y_t = exp((a_N^2/N) theta_t(c e_n .. any test function f)).
MartingaleSeries martingale_series(const Trajectory& traj, const FourierField& f, double c_scale,
                                   const LatticeMean& mean, double a_n,
                                   std::vector<double> grid);
MartingaleSeries martingale_series(const Trajectory& traj, const FourierField& f, double c_scale,
                                   const Profile& phi, double a_n, std::vector<double> grid);

// Same construction with a time-dependent control F.
MartingaleSeries martingale_field_series(const Trajectory& traj, const ControlField& field,
                                         const LatticeMean& mean, double a_n,
                                         std::vector<double> grid);
MartingaleSeries martingale_field_series(const Trajectory& traj, const ControlField& field,
                                         const Profile& phi, double a_n,
                                         std::vector<double> grid);

}  // namespace sep
