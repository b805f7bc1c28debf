#include "sep/pde.hpp"

#include "sep/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sep {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// I_k(omega, dt) = int_0^dt exp(-omega (dt - s)) s^k ds for k = 0,1,2.
// Series I_k = dt^{k+1} sum_j (-z)^j k! / (k+j+1)! with z = omega dt for
// small z, recursion I_{k} = (dt^k - k I_{k-1}) / omega otherwise.
void duhamel_weights(double omega, double dt, double out[3]) {
    double z = omega * dt;
    if (z < 0.5) {
        for (int k = 0; k < 3; ++k) {
            double kfact = (k == 2) ? 2.0 : 1.0;
            double term = kfact;
            for (int i = 1; i <= k + 1; ++i) term /= i;  // k!/(k+1)!
            double sum = term;
            for (int j = 1; j < 40; ++j) {
                term *= -z / (k + j + 1);
                sum += term;
                if (std::abs(term) < 1e-18 * std::abs(sum)) break;
            }
            out[k] = sum * std::pow(dt, k + 1);
        }
        return;
    }
    out[0] = -std::expm1(-z) / omega;
    out[1] = (dt - out[0]) / omega;
    out[2] = (dt * dt - 2.0 * out[1]) / omega;
}
}  // namespace

FourierField solve_heat(const FourierField& phi, double t) {
    if (t < 0.0) throw std::invalid_argument("solve_heat: negative time " + std::to_string(t));
    FourierField out(phi.band());
    for (int n = -phi.band(); n <= phi.band(); ++n) {
        double w = kTwoPi * std::abs(n);
        out.set_coeff(n, phi.coeff(n) * std::exp(-w * w * t));
    }
    return out;
}

FourierField DensityPath::at(double t) const {
    if (times.empty()) throw std::invalid_argument("DensityPath::at: empty path");
    const double lo = times.front(), hi = times.back();
    const double slack = 1e-12 * std::max(1.0, std::abs(hi));
    if (t < lo - slack || t > hi + slack) {
        throw std::invalid_argument("DensityPath::at: time " + std::to_string(t) +
                                    " outside [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + "]");
    }
    t = std::clamp(t, lo, hi);
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return fields.front();
    if (it == times.end()) return fields.back();
    std::size_t hi_idx = static_cast<std::size_t>(it - times.begin());
    std::size_t lo_idx = hi_idx - 1;
    double span = times[hi_idx] - times[lo_idx];
    if (span <= 0.0) return fields[hi_idx];
    double w = (t - times[lo_idx]) / span;
    FourierField a = fields[lo_idx];
    a *= 1.0 - w;
    FourierField b = fields[hi_idx];
    b *= w;
    return a + b;
}

DensityPath heat_path(const FourierField& phi, std::vector<double> times) {
    DensityPath path;
    path.fields.reserve(times.size());
    for (double t : times) path.fields.push_back(solve_heat(phi, t));
    path.times = std::move(times);
    return path;
}

std::vector<double> conservation_integral(const DensityPath& path) {
    std::vector<double> masses;
    masses.reserve(path.fields.size());
    for (const FourierField& f : path.fields) masses.push_back(f.integral());
    return masses;
}

LatticeMean::LatticeMean(int n_sites, const Profile& phi) : n_(n_sites), m0_(n_sites) {
    if (n_sites < 2) throw std::invalid_argument("LatticeMean: n_sites must be >= 2");
    for (int x = 0; x < n_; ++x) m0_[x] = phi(static_cast<double>(x) / n_);

    int half = n_ / 2;
    cos_amp_.assign(half + 1, 0.0);
    sin_amp_.assign(half + 1, 0.0);
    for (int k = 0; k <= half; ++k) {
        double cs = 0.0, sn = 0.0;
        for (int x = 0; x < n_; ++x) {
            double arg = kTwoPi * k * x / n_;
            cs += m0_[x] * std::cos(arg);
            sn += m0_[x] * std::sin(arg);
        }
        bool self_paired = (k == 0) || (2 * k == n_);
        cos_amp_[k] = (self_paired ? 1.0 : 2.0) * cs / n_;
        sin_amp_[k] = (self_paired ? 0.0 : 2.0 * sn / n_);
    }
}

double LatticeMean::mode_rate(int k) const {
    double s = std::sin(std::numbers::pi * k / n_);
    return 4.0 * static_cast<double>(n_) * n_ * s * s;
}

std::vector<double> LatticeMean::at(double t) const {
    int half = n_ / 2;
    std::vector<double> m(n_, 0.0);
    for (int k = 0; k <= half; ++k) {
        if (cos_amp_[k] == 0.0 && sin_amp_[k] == 0.0) continue;
        double decay = std::exp(-mode_rate(k) * t);
        double ak = cos_amp_[k] * decay, bk = sin_amp_[k] * decay;
        for (int x = 0; x < n_; ++x) {
            double arg = kTwoPi * k * x / n_;
            m[x] += ak * std::cos(arg) + bk * std::sin(arg);
        }
    }
    return m;
}

double LatticeMean::projection(int mode) const {
    // Fold e_mode restricted to the lattice onto the stored half spectrum.
    int half = n_ / 2;
    bool is_cos = mode >= 0;
    int k = wrap(std::abs(mode), n_);
    double sign = 1.0;
    if (k > half) {
        k = n_ - k;
        if (!is_cos) sign = -1.0;
    }
    bool self_paired = (k == 0) || (2 * k == n_);
    if (is_cos) {
        return sign * cos_amp_[k] * (self_paired ? n_ : n_ / 2.0);
    }
    if (self_paired) return 0.0;  // sin vanishes identically on the lattice
    return sign * sin_amp_[k] * (n_ / 2.0);
}

double LatticeMean::weighted_sum(int mode, double t) const {
    return projection(mode) * std::exp(-mode_rate(std::abs(mode)) * t);
}

double LatticeMean::weighted_sum(const FourierField& f, double t) const {
    double s = 0.0;
    for (int n = -f.band(); n <= f.band(); ++n) {
        double c = f.coeff(n);
        if (c != 0.0) s += c * weighted_sum(n, t);
    }
    return s;
}

std::vector<double> exact_lattice_mean(int n_sites, const Profile& phi, double t) {
    if (t < 0.0) {
        throw std::invalid_argument("exact_lattice_mean: negative time " + std::to_string(t));
    }
    return LatticeMean(n_sites, phi).at(t);
}

DensityPath solve_controlled(const FourierField& g, const ControlField& F, const DensityPath& rho,
                             double horizon, const ControlledSolveOptions& opts) {
    if (rho.times.empty()) throw std::invalid_argument("solve_controlled: empty density path");
    const double slack = 1e-12 * std::max(1.0, horizon);
    if (rho.times.front() > slack || rho.times.back() < horizon - slack) {
        throw std::invalid_argument("solve_controlled: density path does not cover [0, horizon]");
    }

    int band = std::max(g.band(), opts.band);
    const int p = opts.grid_points;

    // Source mode vector psi(s) = coefficients of -2 d/du (chi_s dF_s/du).
    auto source_at = [&](double s) {
        FourierField rho_s = rho.at(s);
        FourierField dF = F.space_at(s).differentiated();
        std::vector<double> q(p);
        for (int j = 0; j < p; ++j) {
            double u = static_cast<double>(j) / p;
            double r = rho_s.value(u);
            q[j] = r * (1.0 - r) * dF.value(u);
        }
        FourierField qf = FourierField::from_grid(q, band);
        qf = qf.differentiated();
        qf *= -2.0;
        return qf;
    };

    // march with exact mode decay + Duhamel quadrature of the forcing
    FourierField state(band);
    state += g;

    DensityPath out;
    out.times.push_back(0.0);
    out.fields.push_back(state);

    double t = 0.0;
    bool no_force = F.terms().empty();
    for (std::size_t i = 0; i < rho.times.size(); ++i) {
        double target = std::min(rho.times[i], horizon);
        if (target <= t + slack) continue;
        int substeps = std::max(1, static_cast<int>(std::ceil((target - t) / opts.max_step)));
        for (int s = 0; s < substeps; ++s) {
            double a = t + (target - t) * s / substeps;
            double b = t + (target - t) * (s + 1) / substeps;
            double dt = b - a;
            FourierField next(band);
            if (no_force) {
                for (int n = -band; n <= band; ++n) {
                    double w = kTwoPi * std::abs(n);
                    next.set_coeff(n, state.coeff(n) * std::exp(-w * w * dt));
                }
            } else {
                FourierField psi_a = source_at(a);
                FourierField psi_m = source_at(0.5 * (a + b));
                FourierField psi_b = source_at(b);
                for (int n = -band; n <= band; ++n) {
                    double w = kTwoPi * std::abs(n);
                    double omega = w * w;
                    double pa = psi_a.coeff(n), pm = psi_m.coeff(n), pb = psi_b.coeff(n);
                    // quadratic interpolant p(s) = pa + d1 s + d2 s^2 on [0, dt]
                    double d2 = 2.0 * (pa - 2.0 * pm + pb) / (dt * dt);
                    double d1 = (-3.0 * pa + 4.0 * pm - pb) / dt;
                    double iw[3];
                    duhamel_weights(omega, dt, iw);
                    next.set_coeff(n, state.coeff(n) * std::exp(-omega * dt) + pa * iw[0] +
                                          d1 * iw[1] + d2 * iw[2]);
                }
            }
            state = next;
        }
        t = target;
        out.times.push_back(target);
        out.fields.push_back(state);
        if (target >= horizon - slack) break;
    }
    return out;
}

}  // namespace sep
