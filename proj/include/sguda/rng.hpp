#pragma once

#include <cstdint>
#include <vector>

#include "sguda/tensor.hpp"

namespace sguda {

// xoshiro256++ seeded through splitmix64. Fully specified here so streams are
// reproducible across platforms; the platform default RNG is never used.
// Reference: Blackman & Vigna, "Scrambled linear pseudorandom number generators".
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // uniform in [0, 1), 53-bit resolution
    double uniform();
    // uniform integer in [0, n), unbiased via rejection; n must be > 0
    std::uint64_t uniform_int(std::uint64_t n);
    // standard normal via Box-Muller (pairs cached)
    double normal();

    Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev);

    std::vector<std::size_t> permutation(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream; consumes one draw from this stream.
    Rng fork();

  private:
    std::uint64_t state_[4];
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sguda
