#include "sep/sampling.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace sep {

namespace {

Configuration sample_with_marginals(int n_sites, const std::vector<double>& p, CounterRng& rng,
                                    const char* who) {
    Configuration c(n_sites);
    for (int x = 0; x < n_sites; ++x) {
        if (!(p[x] > 0.0 && p[x] < 1.0)) {
            throw std::invalid_argument(std::string(who) + ": marginal " + std::to_string(p[x]) +
                                        " at site " + std::to_string(x) + " outside (0,1)");
        }
        if (rng.next_bernoulli(p[x])) c.set_occupied(x, true);
    }
    return c;
}

}  // namespace

Configuration sample_product(int n_sites, const Profile& phi, SeedSpec seed) {
    std::vector<double> p(n_sites);
    for (int x = 0; x < n_sites; ++x) p[x] = phi(static_cast<double>(x) / n_sites);
    CounterRng rng(seed);
    return sample_with_marginals(n_sites, p, rng, "sample_product");
}

Configuration sample_equilibrium(int n_sites, double alpha, SeedSpec seed) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("sample_equilibrium: alpha = " + std::to_string(alpha) +
                                    " outside (0,1)");
    }
    return sample_product(n_sites, Profile::constant(alpha), seed);
}

Configuration sample_canonical(int n_sites, int k_particles, SeedSpec seed) {
    if (k_particles < 1 || k_particles > n_sites - 1) {
        throw std::invalid_argument("sample_canonical: k = " + std::to_string(k_particles) +
                                    " outside [1, " + std::to_string(n_sites - 1) + "]");
    }
    std::vector<int> sites(n_sites);
    for (int x = 0; x < n_sites; ++x) sites[x] = x;
    CounterRng rng(seed);
    // Fisher-Yates; the first k entries end up a uniform k-subset.
    for (int i = n_sites - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(sites[i], sites[j]);
    }
    Configuration c(n_sites);
    for (int i = 0; i < k_particles; ++i) c.set_occupied(sites[i], true);
    return c;
}

Configuration sample_perturbed(int n_sites, const Profile& phi, const Profile& g, double a_n,
                               SeedSpec seed) {
    std::vector<double> p(n_sites);
    for (int x = 0; x < n_sites; ++x) {
        double u = static_cast<double>(x) / n_sites;
        p[x] = phi(u) + a_n / n_sites * g(u);
    }
    CounterRng rng(seed);
    return sample_with_marginals(n_sites, p, rng, "sample_perturbed");
}

}  // namespace sep
