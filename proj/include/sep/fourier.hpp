#pragma once

#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sep {

// Trigonometric basis on the torus: e_0 = 1, e_n(u) = cos(2*n*pi*u) for
// n >= 1 and e_{-n}(u) = sin(2*n*pi*u) for n >= 1.
double basis_eval(int n, double u);
double basis_deriv(int n, double u);
// \int_T e_n^2 du: 1 for n = 0, 1/2 otherwise.
double basis_norm_sq(int n);

// Band-limited real function on the torus stored as coefficients on
// {e_n : |n| <= band}. Doubles as a density field, a signed fluctuation
// field and a test function; grid views are produced on demand by sample().
class FourierField {
public:
    explicit FourierField(int band = 0);

    // amplitude * e_n, band defaults to |n|.
    static FourierField mode(int n, double amplitude = 1.0, int band = -1);

    // Projection of uniform grid samples at u_j = j/P (exact for inputs that
    // are band-limited below P/2).
    static FourierField from_grid(std::span<const double> values, int band);

    static FourierField from_function(const std::function<double(double)>& f, int band,
                                      int grid_points = 1024);

    int band() const { return band_; }

    double coeff(int n) const;
    void set_coeff(int n, double value);

    double value(double u) const;
    double derivative(double u) const;

    // d/du in coefficient space: cos_n -> -2*n*pi*sin_n, sin_n -> 2*n*pi*cos_n.
    FourierField differentiated() const;
    // d^2/du^2 is diagonal: coefficient n scales by -(2*n*pi)^2.
    FourierField second_derivative() const;

    std::vector<double> sample(int grid_points) const;

    // \int_T f du (the mode-0 coefficient).
    double integral() const { return coeff(0); }
    // \int_T f g du by orthogonality.
    double inner(const FourierField& g) const;

    // sup_u |f(u)| <= sum |c_n|; cheap rigorous bound used for rate envelopes.
    double sup_abs_bound() const;
    // sup_u |f'(u)| <= sum 2*pi*|n|*|c_n|.
    double sup_abs_deriv_bound() const;

    FourierField& operator+=(const FourierField& g);
    FourierField& operator-=(const FourierField& g);
    FourierField& operator*=(double s);
    friend FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
    friend FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
    friend FourierField operator*(double s, FourierField f) { return f *= s; }

    nlohmann::json to_json() const;
    static FourierField from_json(const nlohmann::json& j);

private:
    int band_;
    std::vector<double> c_;  // index n + band_
};

using TestFunction = FourierField;

}  // namespace sep
