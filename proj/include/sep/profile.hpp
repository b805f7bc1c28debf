#pragma once

#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace sep {

// Real-valued function on the continuum torus [0,1). Used both for initial
// density profiles (range (0,1) enforced by the samplers) and for the
// unconstrained perturbation profiles of the tilted initial law.
//
// Run configs specify profiles either as named closed forms
//   {"type":"constant","value":v}
//   {"type":"cosine","mean":m,"amplitude":a,"mode":n,"phase":p}   (phase optional)
// or as grid values with periodic linear interpolation
//   {"type":"grid","values":[...]}.
class Profile {
public:
    Profile() : rep_(Constant{0.0}) {}

    static Profile constant(double value) { return Profile(Constant{value}); }

    // mean + amplitude * cos(2*pi*mode*u + phase)
    static Profile cosine(double mean, double amplitude, int mode, double phase = 0.0) {
        return Profile(Cosine{mean, amplitude, phase, mode});
    }

    // Periodic linear interpolation of values at u = k / values.size().
    static Profile grid(std::vector<double> values);

    double operator()(double u) const;

    nlohmann::json to_json() const;
    static Profile from_json(const nlohmann::json& j);

private:
    struct Constant {
        double value;
    };
    struct Cosine {
        double mean, amplitude, phase;
        int mode;
    };
    struct Grid {
        std::vector<double> values;
    };
    using Rep = std::variant<Constant, Cosine, Grid>;

    explicit Profile(Rep rep) : rep_(std::move(rep)) {}

    Rep rep_;
};

}  // namespace sep
