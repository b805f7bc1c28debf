#pragma once

#include <cstdint>
#include <vector>

namespace sep {

// Site indices live on the discrete torus {0, ..., n-1}; all arithmetic is
// mod n, e.g. (n-1)+1 == 0.
inline int wrap(int x, int n) {
    int m = x % n;
    return m < 0 ? m + n : m;
}

// Hard-core particle configuration on the N-site torus. Occupancies are a
// packed bit vector (bit x = eta(x)); the particle count is cached and is
// invariant under edge swaps. Value semantics; the simulation engine is the
// only mutator once a replica is running.
class Configuration {
public:
    explicit Configuration(int n_sites);

    // Builds a configuration with exactly the given sites occupied.
    // Throws std::invalid_argument on n_sites < 2, an out-of-range index,
    // or a duplicate index.
    static Configuration from_sites(int n_sites, const std::vector<int>& occupied);

    int n_sites() const { return n_; }
    int particle_count() const { return count_; }

    bool occupied(int x) const {
        return (words_[static_cast<unsigned>(x) >> 6] >> (x & 63)) & 1ULL;
    }

    void set_occupied(int x, bool value);

    // Exchanges the values at x and x+1 (mod N). Swapping twice restores the
    // configuration; the particle count never changes.
    void swap_edge(int x) {
        int y = x + 1 == n_ ? 0 : x + 1;
        bool bx = occupied(x), by = occupied(y);
        if (bx != by) {
            flip(x);
            flip(y);
        }
    }

    Configuration swapped(int x) const {
        Configuration c = *this;
        c.swap_edge(x);
        return c;
    }

    // Edge x is active when eta(x) != eta(x+1); only active edges move mass.
    bool edge_active(int x) const {
        int y = x + 1 == n_ ? 0 : x + 1;
        return occupied(x) != occupied(y);
    }

    // All x with eta(x) != eta(x+1). Domain walls come in pairs on a torus,
    // so the result always has even length.
    std::vector<int> active_edges() const;

    bool operator==(const Configuration&) const = default;

private:
    void flip(int x) { words_[static_cast<unsigned>(x) >> 6] ^= 1ULL << (x & 63); }

    int n_ = 0;
    int count_ = 0;
    std::vector<std::uint64_t> words_;
};

inline Configuration make_configuration(int n_sites, const std::vector<int>& occupied) {
    return Configuration::from_sites(n_sites, occupied);
}

}  // namespace sep
