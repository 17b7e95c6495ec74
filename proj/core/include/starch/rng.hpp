#pragma once

#include <cstdint>
#include <random>

namespace starch {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent stream seed from a master seed and a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Thin wrapper over mt19937_64 with the draws the library needs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double student_t(double df);
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace starch
