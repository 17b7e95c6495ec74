#include "starch/rng.hpp"

#include <cmath>

namespace starch {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// t = Z / sqrt(V / df) with V ~ chi2(df) = 2 Gamma(df / 2).
double Rng::student_t(double df) {
    const double z = normal();
    const double v = 2.0 * std::gamma_distribution<double>(0.5 * df, 1.0)(engine_);
    return z / std::sqrt(v / df);
}

}  // namespace starch
