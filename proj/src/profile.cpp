#include "sep/profile.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sep {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_unit(double u) {
    double v = u - std::floor(u);
    return v >= 1.0 ? 0.0 : v;  // guards u == -1e-17 style inputs
}
}  // namespace

Profile Profile::grid(std::vector<double> values) {
    if (values.size() < 2) {
        throw std::invalid_argument("Profile::grid: need at least 2 values");
    }
    return Profile(Grid{std::move(values)});
}

double Profile::operator()(double u) const {
    return std::visit(
        [u](const auto& rep) -> double {
            using T = std::decay_t<decltype(rep)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return rep.value;
            } else if constexpr (std::is_same_v<T, Cosine>) {
                return rep.mean + rep.amplitude * std::cos(kTwoPi * rep.mode * u + rep.phase);
            } else {
                double v = wrap_unit(u) * static_cast<double>(rep.values.size());
                auto k = static_cast<std::size_t>(v);
                if (k >= rep.values.size()) k = rep.values.size() - 1;
                double frac = v - static_cast<double>(k);
                std::size_t k1 = k + 1 == rep.values.size() ? 0 : k + 1;
                return rep.values[k] * (1.0 - frac) + rep.values[k1] * frac;
            }
        },
        rep_);
}

nlohmann::json Profile::to_json() const {
    return std::visit(
        [](const auto& rep) -> nlohmann::json {
            using T = std::decay_t<decltype(rep)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return {{"type", "constant"}, {"value", rep.value}};
            } else if constexpr (std::is_same_v<T, Cosine>) {
                return {{"type", "cosine"},
                        {"mean", rep.mean},
                        {"amplitude", rep.amplitude},
                        {"mode", rep.mode},
                        {"phase", rep.phase}};
            } else {
                return {{"type", "grid"}, {"values", rep.values}};
            }
        },
        rep_);
}

Profile Profile::from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "constant") {
        return constant(j.at("value").get<double>());
    }
    if (type == "cosine") {
        return cosine(j.at("mean").get<double>(), j.at("amplitude").get<double>(),
                      j.at("mode").get<int>(), j.value("phase", 0.0));
    }
    if (type == "grid") {
        return grid(j.at("values").get<std::vector<double>>());
    }
    throw std::invalid_argument("Profile::from_json: unknown type '" + type + "'");
}

}  // namespace sep
