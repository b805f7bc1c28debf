#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sep/fourier.hpp"

namespace sep {

// h(t) = scale * exp(-lambda * t). Closed forms for the derivative and the
// time integral keep every compensator and pair-integral accumulation exact.
struct TimeWeight {
    double scale = 1.0;
    double lambda = 0.0;

    double value(double t) const;
    double dt(double t) const;
    double integral(double t0, double t1) const;
    double max_abs(double t0, double t1) const;  // |h| is monotone in t

    nlohmann::json to_json() const;
    static TimeWeight from_json(const nlohmann::json& j);
};

// Space-time control F(t,u) = sum_i h_i(t) f_i(u) with band-limited f_i.
// Smooth in u by construction, C^1 in t, with exact spatial and temporal
// derivatives. Houses both the tilt controls and time-dependent test
// functions G(t,u).
class ControlField {
public:
    ControlField() = default;

    // Time-constant field F(t,u) = f(u).
    explicit ControlField(FourierField space) { add_term(TimeWeight{}, std::move(space)); }

    static ControlField separable(TimeWeight w, FourierField space) {
        ControlField f;
        f.add_term(w, std::move(space));
        return f;
    }

    void add_term(TimeWeight w, FourierField space) {
        terms_.push_back({w, std::move(space)});
    }

    struct Term {
        TimeWeight time;
        FourierField space;
    };
    const std::vector<Term>& terms() const { return terms_; }
    bool time_constant() const;

    double value(double t, double u) const;
    double du(double t, double u) const;
    double dt(double t, double u) const;

    FourierField space_at(double t) const;
    FourierField dt_space_at(double t) const;

    // Rigorous bounds over [t0,t1] x T, used for the thinning envelope.
    double osc_bound(double t0, double t1) const;        // max_u F - min_u F
    double sup_abs_deriv_bound(double t0, double t1) const;  // sup |dF/du|

    nlohmann::json to_json() const;
    static ControlField from_json(const nlohmann::json& j);

private:
    std::vector<Term> terms_;
};

}  // namespace sep
