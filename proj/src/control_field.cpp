#include "sep/control_field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sep {

double TimeWeight::value(double t) const { return scale * std::exp(-lambda * t); }

double TimeWeight::dt(double t) const { return -lambda * scale * std::exp(-lambda * t); }

double TimeWeight::integral(double t0, double t1) const {
    if (lambda == 0.0) return scale * (t1 - t0);
    // scale * (exp(-lambda t0) - exp(-lambda t1)) / lambda, stable for small lambda*(t1-t0)
    return scale * std::exp(-lambda * t0) * -std::expm1(-lambda * (t1 - t0)) / lambda;
}

double TimeWeight::max_abs(double t0, double t1) const {
    return std::max(std::abs(value(t0)), std::abs(value(t1)));
}

nlohmann::json TimeWeight::to_json() const {
    return {{"scale", scale}, {"lambda", lambda}};
}

TimeWeight TimeWeight::from_json(const nlohmann::json& j) {
    return TimeWeight{j.value("scale", 1.0), j.value("lambda", 0.0)};
}

bool ControlField::time_constant() const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const Term& t) { return t.time.lambda == 0.0; });
}

double ControlField::value(double t, double u) const {
    double s = 0.0;
    for (const Term& term : terms_) s += term.time.value(t) * term.space.value(u);
    return s;
}

double ControlField::du(double t, double u) const {
    double s = 0.0;
    for (const Term& term : terms_) s += term.time.value(t) * term.space.derivative(u);
    return s;
}

double ControlField::dt(double t, double u) const {
    double s = 0.0;
    for (const Term& term : terms_) s += term.time.dt(t) * term.space.value(u);
    return s;
}

FourierField ControlField::space_at(double t) const {
    FourierField f(0);
    for (const Term& term : terms_) {
        FourierField g = term.space;
        g *= term.time.value(t);
        f += g;
    }
    return f;
}

FourierField ControlField::dt_space_at(double t) const {
    FourierField f(0);
    for (const Term& term : terms_) {
        FourierField g = term.space;
        g *= term.time.dt(t);
        f += g;
    }
    return f;
}

double ControlField::osc_bound(double t0, double t1) const {
    double s = 0.0;
    for (const Term& term : terms_) {
        // mode 0 is constant in u and does not contribute to the oscillation
        FourierField g = term.space;
        g.set_coeff(0, 0.0);
        s += term.time.max_abs(t0, t1) * 2.0 * g.sup_abs_bound();
    }
    return s;
}

double ControlField::sup_abs_deriv_bound(double t0, double t1) const {
    double s = 0.0;
    for (const Term& term : terms_) {
        s += term.time.max_abs(t0, t1) * term.space.sup_abs_deriv_bound();
    }
    return s;
}

nlohmann::json ControlField::to_json() const {
    nlohmann::json terms = nlohmann::json::array();
    for (const Term& term : terms_) {
        terms.push_back({{"time", term.time.to_json()}, {"space", term.space.to_json()}});
    }
    return {{"terms", terms}};
}

ControlField ControlField::from_json(const nlohmann::json& j) {
    ControlField f;
    if (j.is_null()) return f;
    for (const auto& term : j.at("terms")) {
        FourierField space = term.contains("mode")
                                 ? FourierField::mode(term.at("mode").get<int>(),
                                                      term.value("amplitude", 1.0))
                                 : FourierField::from_json(term.at("space"));
        TimeWeight w = term.contains("time") ? TimeWeight::from_json(term.at("time"))
                                             : TimeWeight{};
        f.add_term(w, std::move(space));
    }
    return f;
}

}  // namespace sep
