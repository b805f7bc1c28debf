#include "sep/lattice.hpp"

#include <stdexcept>
#include <string>

namespace sep {

Configuration::Configuration(int n_sites) : n_(n_sites), count_(0) {
    if (n_sites < 2) {
        throw std::invalid_argument("Configuration: n_sites must be >= 2, got " +
                                    std::to_string(n_sites));
    }
    words_.assign((static_cast<unsigned>(n_sites) + 63) / 64, 0ULL);
}

Configuration Configuration::from_sites(int n_sites, const std::vector<int>& occupied) {
    Configuration c(n_sites);
    for (int x : occupied) {
        if (x < 0 || x >= n_sites) {
            throw std::invalid_argument("make_configuration: site index " + std::to_string(x) +
                                        " outside [0, " + std::to_string(n_sites) + ")");
        }
        if (c.occupied(x)) {
            throw std::invalid_argument("make_configuration: duplicate site index " +
                                        std::to_string(x));
        }
        c.set_occupied(x, true);
    }
    return c;
}

void Configuration::set_occupied(int x, bool value) {
    if (x < 0 || x >= n_) {
        throw std::invalid_argument("Configuration::set_occupied: index " + std::to_string(x) +
                                    " outside [0, " + std::to_string(n_) + ")");
    }
    if (occupied(x) != value) {
        flip(x);
        count_ += value ? 1 : -1;
    }
}

std::vector<int> Configuration::active_edges() const {
    std::vector<int> edges;
    for (int x = 0; x < n_; ++x) {
        if (edge_active(x)) edges.push_back(x);
    }
    return edges;
}

}  // namespace sep
