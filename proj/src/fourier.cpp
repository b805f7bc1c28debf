#include "sep/fourier.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace sep {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

double basis_eval(int n, double u) {
    if (n == 0) return 1.0;
    if (n > 0) return std::cos(kTwoPi * n * u);
    return std::sin(kTwoPi * (-n) * u);
}

double basis_deriv(int n, double u) {
    if (n == 0) return 0.0;
    if (n > 0) return -kTwoPi * n * std::sin(kTwoPi * n * u);
    return kTwoPi * (-n) * std::cos(kTwoPi * (-n) * u);
}

double basis_norm_sq(int n) { return n == 0 ? 1.0 : 0.5; }

FourierField::FourierField(int band) : band_(band) {
    if (band < 0) throw std::invalid_argument("FourierField: band must be >= 0");
    c_.assign(2 * static_cast<std::size_t>(band) + 1, 0.0);
}

FourierField FourierField::mode(int n, double amplitude, int band) {
    int b = band < 0 ? std::abs(n) : band;
    if (b < std::abs(n)) throw std::invalid_argument("FourierField::mode: band < |n|");
    FourierField f(b);
    f.set_coeff(n, amplitude);
    return f;
}

FourierField FourierField::from_grid(std::span<const double> values, int band) {
    const int p = static_cast<int>(values.size());
    if (p < 2 * band + 1) {
        throw std::invalid_argument("FourierField::from_grid: grid of " + std::to_string(p) +
                                    " points cannot resolve band " + std::to_string(band));
    }
    FourierField f(band);
    double mean = 0.0;
    for (double v : values) mean += v;
    f.set_coeff(0, mean / p);
    for (int n = 1; n <= band; ++n) {
        double cs = 0.0, sn = 0.0;
        for (int j = 0; j < p; ++j) {
            double arg = kTwoPi * n * j / p;
            cs += values[j] * std::cos(arg);
            sn += values[j] * std::sin(arg);
        }
        f.set_coeff(n, 2.0 * cs / p);
        f.set_coeff(-n, 2.0 * sn / p);
    }
    return f;
}

FourierField FourierField::from_function(const std::function<double(double)>& f, int band,
                                         int grid_points) {
    std::vector<double> values(grid_points);
    for (int j = 0; j < grid_points; ++j) values[j] = f(static_cast<double>(j) / grid_points);
    return from_grid(values, band);
}

double FourierField::coeff(int n) const {
    if (std::abs(n) > band_) return 0.0;
    return c_[static_cast<std::size_t>(n + band_)];
}

void FourierField::set_coeff(int n, double value) {
    if (std::abs(n) > band_) {
        throw std::invalid_argument("FourierField::set_coeff: mode " + std::to_string(n) +
                                    " outside band " + std::to_string(band_));
    }
    c_[static_cast<std::size_t>(n + band_)] = value;
}

double FourierField::value(double u) const {
    double s = c_[static_cast<std::size_t>(band_)];
    for (int n = 1; n <= band_; ++n) {
        double arg = kTwoPi * n * u;
        s += coeff(n) * std::cos(arg) + coeff(-n) * std::sin(arg);
    }
    return s;
}

double FourierField::derivative(double u) const {
    double s = 0.0;
    for (int n = 1; n <= band_; ++n) {
        double arg = kTwoPi * n * u;
        s += kTwoPi * n * (-coeff(n) * std::sin(arg) + coeff(-n) * std::cos(arg));
    }
    return s;
}

FourierField FourierField::differentiated() const {
    FourierField d(band_);
    for (int n = 1; n <= band_; ++n) {
        d.set_coeff(-n, -kTwoPi * n * coeff(n));
        d.set_coeff(n, kTwoPi * n * coeff(-n));
    }
    return d;
}

FourierField FourierField::second_derivative() const {
    FourierField d(band_);
    for (int n = -band_; n <= band_; ++n) {
        double w = kTwoPi * std::abs(n);
        d.set_coeff(n, -w * w * coeff(n));
    }
    return d;
}

std::vector<double> FourierField::sample(int grid_points) const {
    std::vector<double> v(grid_points);
    for (int j = 0; j < grid_points; ++j) v[j] = value(static_cast<double>(j) / grid_points);
    return v;
}

double FourierField::inner(const FourierField& g) const {
    int b = std::min(band_, g.band_);
    double s = 0.0;
    for (int n = -b; n <= b; ++n) s += coeff(n) * g.coeff(n) * basis_norm_sq(n);
    return s;
}

double FourierField::sup_abs_bound() const {
    double s = 0.0;
    for (double v : c_) s += std::abs(v);
    return s;
}

double FourierField::sup_abs_deriv_bound() const {
    double s = 0.0;
    for (int n = -band_; n <= band_; ++n) s += kTwoPi * std::abs(n) * std::abs(coeff(n));
    return s;
}

FourierField& FourierField::operator+=(const FourierField& g) {
    if (g.band_ > band_) {
        FourierField wide(g.band_);
        for (int n = -band_; n <= band_; ++n) wide.set_coeff(n, coeff(n));
        *this = wide;
    }
    for (int n = -g.band_; n <= g.band_; ++n) set_coeff(n, coeff(n) + g.coeff(n));
    return *this;
}

FourierField& FourierField::operator-=(const FourierField& g) {
    FourierField neg = g;
    neg *= -1.0;
    return *this += neg;
}

FourierField& FourierField::operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
}

nlohmann::json FourierField::to_json() const {
    return {{"band", band_}, {"coefficients", c_}};
}

FourierField FourierField::from_json(const nlohmann::json& j) {
    FourierField f(j.at("band").get<int>());
    auto c = j.at("coefficients").get<std::vector<double>>();
    if (c.size() != f.c_.size()) {
        throw std::invalid_argument("FourierField::from_json: coefficient count mismatch");
    }
    f.c_ = std::move(c);
    return f;
}

}  // namespace sep
