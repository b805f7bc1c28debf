#pragma once

#include <limits>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sep/fourier.hpp"
#include "sep/pde.hpp"
#include "sep/profile.hpp"

namespace sep {

// Signed fluctuation path: same representation as a density path.
using SignedPath = DensityPath;

// chi_s(u) = rho_s(u)(1 - rho_s(u)) sampled on a (time, space) grid with
// linear interpolation in time.
struct SusceptibilityPath {
    std::vector<double> times;
    int grid_points = 0;
    std::vector<std::vector<double>> values;  // per time, at u_j = j / grid_points

    static SusceptibilityPath from_density(const DensityPath& rho,
                                           const std::vector<double>& times,
                                           int grid_points = 1024);

    std::vector<double> row_at(double t) const;
};

struct RateResult {
    double value = 0.0;
    bool infinite = false;  // tagged +infinity sentinel (value is set to +inf)
    int band = 0;

    // optimizer: one field for the static functionals, one per time node for
    // the dynamic ones
    std::vector<double> time_nodes;
    std::vector<FourierField> optimizer;

    // diagnostics
    double refined_value = std::numeric_limits<double>::quiet_NaN();  // half time resolution
    double condition = std::numeric_limits<double>::quiet_NaN();      // Gram rcond
    double cross_check = std::numeric_limits<double>::quiet_NaN();    // oracle gap

    nlohmann::json to_json() const;
};

// sup_f { nu(f) - (1/2) int phi(1-phi) f^2 } over f in span{e_n : |n| <= band}.
// nu is the signed density of the candidate; the supremum is an exact
// finite-dimensional concave quadratic solved through the Gram system.
RateResult i_ini_variational(const FourierField& nu, const Profile& phi, int band);

// sup_F { W_T(F_T) - W_0(F_0) - int W_s((d_s + d_uu) F_s) ds
//         - int int chi (d_u F)^2 du ds }
// over F = sum a_{n,k} T_k(s) e_n(u) with hat functions T_k on time_grid.
RateResult i_dyn_variational(const SignedPath& w, const SusceptibilityPath& chi, int band,
                             const std::vector<double>& time_grid);

// sup_{f1,f2} { nu(f1 - f2) + int f2 - int log(phi e^{f1} + (1-phi) e^{f2}) }
// for the density p; decouples pointwise into the Bernoulli relative entropy
// int [ p log(p/phi) + (1-p) log((1-p)/(1-phi)) ] du, evaluated by
// quadrature and cross-checked by pointwise numerical maximization.
RateResult j_ini_variational(const FourierField& p, const Profile& phi, int grid_points = 1024);

// As i_dyn_variational but with chi built from W's own density; returns the
// tagged +infinity sentinel when the density leaves [0,1].
RateResult j_dyn_variational(const DensityPath& w, int band, const std::vector<double>& time_grid);

// I_ini(nu0) + I_dyn(W). Requires W_0 to agree with nu0.
double mdp_cost(const SignedPath& w, const FourierField& nu0, const Profile& phi,
                const SusceptibilityPath& chi, int band, const std::vector<double>& time_grid);

}  // namespace sep
