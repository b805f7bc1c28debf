#include "sep/rates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

namespace sep {

namespace {

constexpr int kSpaceGrid = 1024;

std::vector<double> sample_weight(const Profile& phi, int p) {
    std::vector<double> w(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        double v = phi(static_cast<double>(j) / p);
        if (!(v > 0.0 && v < 1.0)) {
            throw std::invalid_argument("rate functional: phi(" + std::to_string(j) + "/" +
                                        std::to_string(p) + ") = " + std::to_string(v) +
                                        " outside (0,1)");
        }
        w[static_cast<std::size_t>(j)] = v * (1.0 - v);
    }
    return w;
}

}  // namespace

SusceptibilityPath SusceptibilityPath::from_density(const DensityPath& rho,
                                                    const std::vector<double>& times,
                                                    int grid_points) {
    SusceptibilityPath chi;
    chi.times = times;
    chi.grid_points = grid_points;
    chi.values.reserve(times.size());
    for (double t : times) {
        FourierField f = rho.at(t);
        std::vector<double> row(static_cast<std::size_t>(grid_points));
        for (int j = 0; j < grid_points; ++j) {
            double r = f.value(static_cast<double>(j) / grid_points);
            row[static_cast<std::size_t>(j)] = r * (1.0 - r);
        }
        chi.values.push_back(std::move(row));
    }
    return chi;
}

std::vector<double> SusceptibilityPath::row_at(double t) const {
    if (times.empty()) throw std::invalid_argument("SusceptibilityPath: empty");
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return values.front();
    if (it == times.end()) return values.back();
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    std::size_t lo = hi - 1;
    double span = times[hi] - times[lo];
    double w = span > 0.0 ? (t - times[lo]) / span : 1.0;
    std::vector<double> row(values[lo].size());
    for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = (1.0 - w) * values[lo][j] + w * values[hi][j];
    }
    return row;
}

nlohmann::json RateResult::to_json() const {
    nlohmann::json opt = nlohmann::json::array();
    for (const FourierField& f : optimizer) opt.push_back(f.to_json());
    nlohmann::json j{{"infinite", infinite},
                     {"band", band},
                     {"time_nodes", time_nodes},
                     {"optimizer", opt}};
    j["value"] = infinite ? nlohmann::json() : nlohmann::json(value);
    auto put_opt = [&](const char* key, double v) {
        if (std::isfinite(v)) j["diagnostics"][key] = v;
    };
    put_opt("refined_value", refined_value);
    put_opt("condition", condition);
    put_opt("cross_check", cross_check);
    return j;
}

RateResult i_ini_variational(const FourierField& nu, const Profile& phi, int band) {
    if (band < nu.band()) {
        for (int n = -nu.band(); n <= nu.band(); ++n) {
            if (std::abs(n) > band && nu.coeff(n) != 0.0) {
                throw std::invalid_argument("i_ini_variational: band " + std::to_string(band) +
                                            " < highest mode of nu");
            }
        }
    }
    const int m = 2 * band + 1;
    const int p = kSpaceGrid;
    std::vector<double> weight = sample_weight(phi, p);

    // basis rows on the quadrature grid
    Eigen::MatrixXd e(m, p);
    for (int n = -band; n <= band; ++n) {
        for (int j = 0; j < p; ++j) {
            e(n + band, j) = basis_eval(n, static_cast<double>(j) / p);
        }
    }

    Eigen::MatrixXd gram(m, m);
    for (int a = 0; a < m; ++a) {
        for (int b = a; b < m; ++b) {
            double s = 0.0;
            for (int j = 0; j < p; ++j) s += weight[static_cast<std::size_t>(j)] * e(a, j) * e(b, j);
            gram(a, b) = gram(b, a) = s / p;
        }
    }

    Eigen::VectorXd v(m);
    for (int n = -band; n <= band; ++n) v(n + band) = nu.coeff(n) * basis_norm_sq(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    double lmin = eig.eigenvalues().minCoeff();
    double lmax = eig.eigenvalues().maxCoeff();
    if (!(lmin > 0.0)) {
        throw std::runtime_error("i_ini_variational: Gram matrix not positive definite");
    }

    Eigen::VectorXd a = eig.eigenvectors() *
                        (eig.eigenvectors().transpose() * v).cwiseQuotient(eig.eigenvalues());

    RateResult r;
    r.band = band;
    r.value = 0.5 * v.dot(a);
    r.condition = lmin / lmax;
    FourierField opt(band);
    for (int n = -band; n <= band; ++n) opt.set_coeff(n, a(n + band));
    r.optimizer.push_back(std::move(opt));
    return r;
}

namespace {

// Discrete quadratic sup_a { l . a - a^T H a } for the dynamic functionals.
// Unknowns are mode coefficients (n != 0) at every time node; mode 0 carries
// no gradient penalty and is handled separately through its linear part.
struct DynAssembly {
    Eigen::SparseMatrix<double> h;
    Eigen::VectorXd l;
    double mode0_linear_max = 0.0;
    double scale = 0.0;  // magnitude reference for tolerances
};

int slot_of(int n, int band) { return n < 0 ? n + band : n + band - 1; }
int mode_of(int slot, int band) { return slot < band ? slot - band : slot - band + 1; }

DynAssembly assemble_dyn(const SignedPath& w, const SusceptibilityPath& chi, int band,
                         const std::vector<double>& grid) {
    if (grid.size() < 2) throw std::invalid_argument("dyn rate: need at least 2 time nodes");
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        if (!(grid[k + 1] > grid[k])) {
            throw std::invalid_argument("dyn rate: time grid must be strictly increasing");
        }
    }
    const int m = 2 * band;               // mode slots, n != 0
    const int nodes = static_cast<int>(grid.size());
    const int dim = m * nodes;
    const int p = chi.grid_points;

    // W resampled on the grid: wt(n_slotted, k) = W_{t_k}(e_n)
    Eigen::MatrixXd wt(m, nodes);
    Eigen::VectorXd w0(nodes);
    for (int k = 0; k < nodes; ++k) {
        FourierField f = w.at(grid[static_cast<std::size_t>(k)]);
        for (int s = 0; s < m; ++s) {
            int n = mode_of(s, band);
            wt(s, k) = f.coeff(n) * basis_norm_sq(n);
        }
        w0(k) = f.coeff(0) * basis_norm_sq(0);
    }

    DynAssembly out;
    out.scale = std::max(wt.cwiseAbs().maxCoeff(), w0.cwiseAbs().maxCoeff());

    // derivative basis rows on the space grid
    Eigen::MatrixXd de(m, p);
    for (int s = 0; s < m; ++s) {
        int n = mode_of(s, band);
        for (int j = 0; j < p; ++j) {
            de(s, j) = basis_deriv(n, static_cast<double>(j) / p);
        }
    }

    // linear part
    Eigen::VectorXd l = Eigen::VectorXd::Zero(dim);
    std::vector<double> l0(static_cast<std::size_t>(nodes), 0.0);
    auto idx = [m](int k, int s) { return k * m + s; };
    for (int s = 0; s < m; ++s) {
        int n = mode_of(s, band);
        double omega = 2.0 * M_PI * std::abs(n);
        omega *= omega;
        l(idx(nodes - 1, s)) += wt(s, nodes - 1);
        l(idx(0, s)) -= wt(s, 0);
        for (int k = 0; k + 1 < nodes; ++k) {
            double dt = grid[static_cast<std::size_t>(k + 1)] - grid[static_cast<std::size_t>(k)];
            double wa = wt(s, k), wb = wt(s, k + 1);
            // -int W (dT_k/ds): hats give +/- the interval average
            l(idx(k, s)) += 0.5 * (wa + wb);
            l(idx(k + 1, s)) -= 0.5 * (wa + wb);
            // +omega int W T_k (from -W(d_uu F) with e_n'' = -omega e_n)
            l(idx(k, s)) += omega * dt * (wa / 3.0 + wb / 6.0);
            l(idx(k + 1, s)) += omega * dt * (wa / 6.0 + wb / 3.0);
        }
    }
    // mode-0 linear part (no quadratic penalty; nonzero means the sup is +inf)
    l0[static_cast<std::size_t>(nodes - 1)] += w0(nodes - 1);
    l0[0] -= w0(0);
    for (int k = 0; k + 1 < nodes; ++k) {
        double avg = 0.5 * (w0(k) + w0(k + 1));
        l0[static_cast<std::size_t>(k)] += avg;
        l0[static_cast<std::size_t>(k + 1)] -= avg;
    }
    for (double v : l0) out.mode0_linear_max = std::max(out.mode0_linear_max, std::abs(v));
    out.l = std::move(l);

    // quadratic part: 2-point Gauss per interval is exact for the cubic
    // integrand (chi linear in t) x (hat product quadratic in t)
    const double gl = 1.0 / std::sqrt(3.0);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(nodes) * 4 * m * m * 2);
    Eigen::MatrixXd q(m, m);
    for (int k = 0; k + 1 < nodes; ++k) {
        double a = grid[static_cast<std::size_t>(k)], b = grid[static_cast<std::size_t>(k + 1)];
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int node = 0; node < 2; ++node) {
            double t = mid + (node == 0 ? -gl : gl) * half;
            double wq = half;  // GL weight 1 on [-1,1], scaled
            std::vector<double> chi_t = chi.row_at(t);
            for (double v : chi_t) {
                if (v < -1e-12) {
                    throw std::invalid_argument(
                        "dyn rate: susceptibility is negative (" + std::to_string(v) +
                        "); the quadratic form would be indefinite");
                }
            }
            for (int s1 = 0; s1 < m; ++s1) {
                for (int s2 = s1; s2 < m; ++s2) {
                    double acc = 0.0;
                    for (int j = 0; j < p; ++j) {
                        acc += chi_t[static_cast<std::size_t>(j)] * de(s1, j) * de(s2, j);
                    }
                    q(s1, s2) = q(s2, s1) = acc / p;
                }
            }
            double ta = (b - t) / (b - a), tb = (t - a) / (b - a);
            double hat[2] = {ta, tb};
            for (int alpha = 0; alpha < 2; ++alpha) {
                for (int beta = 0; beta < 2; ++beta) {
                    double f = wq * hat[alpha] * hat[beta];
                    for (int s1 = 0; s1 < m; ++s1) {
                        for (int s2 = 0; s2 < m; ++s2) {
                            trips.emplace_back(idx(k + alpha, s1), idx(k + beta, s2),
                                               f * q(s1, s2));
                        }
                    }
                }
            }
        }
    }
    out.h.resize(dim, dim);
    out.h.setFromTriplets(trips.begin(), trips.end());
    return out;
}

RateResult solve_dyn(const SignedPath& w, const SusceptibilityPath& chi, int band,
                     const std::vector<double>& grid) {
    DynAssembly sys = assemble_dyn(w, chi, band, grid);
    const int m = 2 * band;
    const int nodes = static_cast<int>(grid.size());

    RateResult r;
    r.band = band;
    r.time_nodes = grid;

    if (sys.mode0_linear_max > 1e-8 * (1.0 + sys.scale)) {
        // unpenalized direction with nonzero gradient: mass is not conserved
        r.infinite = true;
        r.value = std::numeric_limits<double>::infinity();
        return r;
    }

    // tiny ridge for factorization robustness; the value is evaluated from
    // the functional itself, so it stays a valid lower estimate of the sup
    double trace = 0.0;
    for (int i = 0; i < sys.h.rows(); ++i) trace += sys.h.coeff(i, i);
    double ridge = 1e-14 * (trace / sys.h.rows() + 1.0);
    Eigen::SparseMatrix<double> hr = sys.h;
    for (int i = 0; i < hr.rows(); ++i) hr.coeffRef(i, i) += ridge;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(hr);
    Eigen::VectorXd a;
    if (solver.info() == Eigen::Success) {
        a = solver.solve(0.5 * sys.l);
    }
    if (solver.info() != Eigen::Success || !a.allFinite()) {
        r.infinite = true;
        r.value = std::numeric_limits<double>::infinity();
        return r;
    }

    Eigen::VectorXd ha = sys.h * a;
    double residual = (ha - 0.5 * sys.l).cwiseAbs().maxCoeff();
    if (residual > 1e-6 * (sys.l.cwiseAbs().maxCoeff() + 1e-30)) {
        // l has a component outside range(H): the band-limited sup already
        // diverges, so the functional is +infinity
        r.infinite = true;
        r.value = std::numeric_limits<double>::infinity();
        return r;
    }

    r.value = sys.l.dot(a) - a.dot(ha);
    r.optimizer.reserve(static_cast<std::size_t>(nodes));
    for (int k = 0; k < nodes; ++k) {
        FourierField f(band);
        for (int s = 0; s < m; ++s) f.set_coeff(mode_of(s, band), a(k * m + s));
        r.optimizer.push_back(std::move(f));
    }
    return r;
}

std::vector<double> halve_grid(const std::vector<double>& grid) {
    std::vector<double> half;
    for (std::size_t k = 0; k < grid.size(); k += 2) half.push_back(grid[k]);
    if (half.back() != grid.back()) half.push_back(grid.back());
    return half;
}

}  // namespace

RateResult i_dyn_variational(const SignedPath& w, const SusceptibilityPath& chi, int band,
                             const std::vector<double>& time_grid) {
    RateResult r = solve_dyn(w, chi, band, time_grid);
    if (!r.infinite && time_grid.size() >= 5) {
        r.refined_value = solve_dyn(w, chi, band, halve_grid(time_grid)).value;
    }
    return r;
}

RateResult j_ini_variational(const FourierField& p, const Profile& phi, int grid_points) {
    const int n = grid_points;
    std::vector<double> pv(static_cast<std::size_t>(n)), fv(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        double u = static_cast<double>(j) / n;
        double pj = p.value(u);
        if (pj < -1e-9 || pj > 1.0 + 1e-9) {
            throw std::invalid_argument("j_ini_variational: density " + std::to_string(pj) +
                                        " at u = " + std::to_string(u) + " outside [0,1]");
        }
        pv[static_cast<std::size_t>(j)] = std::clamp(pj, 0.0, 1.0);
        double ph = phi(u);
        if (!(ph > 0.0 && ph < 1.0)) {
            throw std::invalid_argument("j_ini_variational: phi outside (0,1)");
        }
        fv[static_cast<std::size_t>(j)] = ph;
    }

    auto entropy = [](double q, double ph) {
        double s = 0.0;
        if (q > 0.0) s += q * std::log(q / ph);
        if (q < 1.0) s += (1.0 - q) * std::log((1.0 - q) / (1.0 - ph));
        return s;
    };

    double value = 0.0;
    for (int j = 0; j < n; ++j) {
        value += entropy(pv[static_cast<std::size_t>(j)], fv[static_cast<std::size_t>(j)]);
    }
    value /= n;

    // cross-check: pointwise 1-D concave maximization (gauge f2 = 0) against
    // the closed-form entropy on a subsample
    double max_gap = 0.0;
    for (int j = 0; j < n; j += std::max(1, n / 64)) {
        double q = pv[static_cast<std::size_t>(j)], ph = fv[static_cast<std::size_t>(j)];
        if (q < 1e-12 || q > 1.0 - 1e-12) continue;
        double f1 = 0.0;
        for (int it = 0; it < 60; ++it) {
            double d = ph * std::exp(f1) + (1.0 - ph);
            double grad = q - ph * std::exp(f1) / d;
            double hess = -ph * (1.0 - ph) * std::exp(f1) / (d * d);
            double step = grad / hess;
            f1 -= step;
            if (std::abs(step) < 1e-14) break;
        }
        double obj = q * f1 - std::log(ph * std::exp(f1) + 1.0 - ph);
        max_gap = std::max(max_gap, std::abs(obj - entropy(q, ph)));
    }

    RateResult r;
    r.value = value;
    r.cross_check = max_gap;
    r.band = p.band();
    return r;
}

RateResult j_dyn_variational(const DensityPath& w, int band,
                             const std::vector<double>& time_grid) {
    // +infinity sentinel when any density leaves [0,1]
    const int p = kSpaceGrid;
    for (const FourierField& f : w.fields) {
        for (int j = 0; j < p; ++j) {
            double v = f.value(static_cast<double>(j) / p);
            if (v < -1e-9 || v > 1.0 + 1e-9) {
                RateResult r;
                r.infinite = true;
                r.value = std::numeric_limits<double>::infinity();
                r.band = band;
                return r;
            }
        }
    }
    SusceptibilityPath chi;
    chi.times = time_grid;
    chi.grid_points = p;
    for (double t : time_grid) {
        FourierField f = w.at(t);
        std::vector<double> row(static_cast<std::size_t>(p));
        for (int j = 0; j < p; ++j) {
            double v = std::clamp(f.value(static_cast<double>(j) / p), 0.0, 1.0);
            row[static_cast<std::size_t>(j)] = v * (1.0 - v);
        }
        chi.values.push_back(std::move(row));
    }
    RateResult r = solve_dyn(w, chi, band, time_grid);
    if (!r.infinite && time_grid.size() >= 5) {
        r.refined_value = solve_dyn(w, chi, band, halve_grid(time_grid)).value;
    }
    return r;
}

double mdp_cost(const SignedPath& w, const FourierField& nu0, const Profile& phi,
                const SusceptibilityPath& chi, int band, const std::vector<double>& time_grid) {
    FourierField diff = w.fields.front() - nu0;
    double gap = diff.sup_abs_bound();
    double scale = 1.0 + nu0.sup_abs_bound();
    if (gap > 1e-8 * scale) {
        throw std::invalid_argument("mdp_cost: W_0 does not match nu0 (gap " +
                                    std::to_string(gap) + ")");
    }
    RateResult ini = i_ini_variational(nu0, phi, band);
    RateResult dyn = i_dyn_variational(w, chi, band, time_grid);
    if (ini.infinite || dyn.infinite) return std::numeric_limits<double>::infinity();
    return ini.value + dyn.value;
}

}  // namespace sep
