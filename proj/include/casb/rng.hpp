#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace casb {

// Deterministic random source. mt19937_64 is fully specified by the standard,
// but the <random> distributions are not, so every variate here is derived
// with a fixed algorithm. A seed therefore reproduces the same stream on any
// platform and compiler.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::uniform_index: n must be positive");
        return static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller, no caching.
    double normal() {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Marsaglia-Tsang; unit scale. Shapes below one are boosted through the
    // Gamma(shape+1) identity.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("Rng::gamma: shape must be positive");
        if (shape < 1.0) {
            const double u = 1.0 - uniform01();  // (0, 1]
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = 1.0 - uniform01();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    double beta(double a, double b) {
        const double ga = gamma(a);
        const double gb = gamma(b);
        const double sum = ga + gb;
        if (sum <= 0.0) return 0.5;  // both gammas underflowed
        return ga / sum;
    }

    std::vector<double> dirichlet(std::span<const double> concentration) {
        std::vector<double> out(concentration.size());
        double total = 0.0;
        for (std::size_t i = 0; i < concentration.size(); ++i) {
            out[i] = gamma(concentration[i]);
            total += out[i];
        }
        if (total <= 0.0) {
            const double u = 1.0 / static_cast<double>(out.size());
            for (double& e : out) e = u;
            return out;
        }
        for (double& e : out) e /= total;
        return out;
    }

    // Draw an index proportional to probs (need not be normalized exactly).
    std::size_t categorical(std::span<const double> probs) {
        if (probs.empty()) throw std::invalid_argument("Rng::categorical: empty support");
        double total = 0.0;
        for (double p : probs) total += p;
        double r = uniform01() * total;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            r -= probs[i];
            if (r < 0.0) return i;
        }
        return probs.size() - 1;
    }

    // First k positions of a partial Fisher-Yates shuffle of 0..n-1,
    // in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) k = n;
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + uniform_index(n - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

private:
    std::mt19937_64 engine_;
};

// splitmix64 mix; gives independent substreams (per restart, per chain) from
// one user-facing seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace casb
