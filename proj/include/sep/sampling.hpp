#pragma once

#include "sep/lattice.hpp"
#include "sep/profile.hpp"
#include "sep/rng.hpp"

namespace sep {

// Independent sites with P(eta(x) = 1) = phi(x/N). Every profile value must
// lie strictly inside (0,1); a violating site is reported and rejected.
Configuration sample_product(int n_sites, const Profile& phi, SeedSpec seed);

// Product Bernoulli(alpha) measure (the global invariant law).
Configuration sample_equilibrium(int n_sites, double alpha, SeedSpec seed);

// Uniform over configurations with exactly k particles (the invariant law
// conditioned on the conserved count): place k particles, then a full
// Fisher-Yates shuffle. Requires 1 <= k <= n_sites - 1.
Configuration sample_canonical(int n_sites, int k_particles, SeedSpec seed);

// Independent sites with perturbed marginals phi(x/N) + (a_N/N) g(x/N); all
// perturbed marginals must stay inside (0,1).
Configuration sample_perturbed(int n_sites, const Profile& phi, const Profile& g, double a_n,
                               SeedSpec seed);

}  // namespace sep
