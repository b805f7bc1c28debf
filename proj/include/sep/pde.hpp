#pragma once

#include <vector>

#include "sep/control_field.hpp"
#include "sep/fourier.hpp"
#include "sep/profile.hpp"

namespace sep {

// Heat semigroup on the torus in the e_n basis: mode n decays by
// exp(-(2 n pi)^2 t). Exact for band-limited data; throws on t < 0.
FourierField solve_heat(const FourierField& phi, double t);

// Time-sampled field path on [0,T]; fields are linearly interpolated in
// coefficient space between grid times.
struct DensityPath {
    std::vector<double> times;
    std::vector<FourierField> fields;

    FourierField at(double t) const;
    double horizon() const { return times.empty() ? 0.0 : times.back(); }
};

DensityPath heat_path(const FourierField& phi, std::vector<double> times);

// \int_T field du per grid time (the mode-0 coefficient); constant along
// heat and controlled paths.
std::vector<double> conservation_integral(const DensityPath& path);

// Exact solution of the lattice first-moment equation
//   d/dt m(x) = N^2 (m(x+1) + m(x-1) - 2 m(x)),   m_0(x) = phi(x/N),
// by discrete Fourier diagonalization of the circulant: lattice mode k
// decays at rate 4 N^2 sin^2(pi k / N). The trigonometric basis functions
// restricted to the lattice are exact eigenvectors, so weighted sums
// sum_x m_t(x) e_n(x/N) are available in closed form too.
class LatticeMean {
public:
    LatticeMean(int n_sites, const Profile& phi);

    int n_sites() const { return n_; }
    const std::vector<double>& initial() const { return m0_; }

    // Decay rate of lattice mode k (N-periodic in k).
    double mode_rate(int k) const;

    // m_t(x) for all sites.
    std::vector<double> at(double t) const;

    // sum_x m_t(x) e_n(x/N), exact in t.
    double weighted_sum(int mode, double t) const;
    double weighted_sum(const FourierField& f, double t) const;

private:
    // projection of m_0 on the lattice-restricted basis function e_n
    double projection(int mode) const;

    int n_;
    std::vector<double> m0_;
    std::vector<double> cos_amp_, sin_amp_;  // lattice DFT of m0, k = 0..n/2
};

// Convenience wrapper: E[eta_t(x)] per site.
std::vector<double> exact_lattice_mean(int n_sites, const Profile& phi, double t);

struct ControlledSolveOptions {
    int band = 64;          // spatial truncation of the flux term
    int grid_points = 1024; // collocation grid for chi * dF/du
    double max_step = 2.5e-4;
};

// Mild solution of the controlled equation
//   d/dt rho^{F,g} = d^2/du^2 rho^{F,g} - 2 d/du ( chi_t(u) dF_t/du ),
//   rho^{F,g}_0 = g,   chi_t = rho_t (1 - rho_t)
// with the susceptibility built from the externally supplied hydrodynamic
// path rho, so the equation is linear with known forcing. The Laplacian is
// integrated exactly per mode; the forcing enters through quadratic-in-time
// interpolation with closed-form exponential weights. Output is sampled on
// rho's time grid restricted to [0, horizon].
DensityPath solve_controlled(const FourierField& g, const ControlField& F, const DensityPath& rho,
                             double horizon, const ControlledSolveOptions& opts = {});

}  // namespace sep
