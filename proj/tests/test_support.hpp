#pragma once

// Shared helpers for the test suites: randomized instances and states with
// controlled sizes, built on the library Rng so everything stays seeded.

#include <cstdint>
#include <vector>

#include "casb/rng.hpp"
#include "casb/types.hpp"

namespace test_support {

struct Instance {
    casb::InteractionMatrix data;
    casb::Corpus corpus;
    casb::Hyperparams hp;
};

struct InstanceBounds {
    std::size_t max_items = 6;
    std::size_t max_users = 6;
    std::size_t max_clusters = 3;
    std::size_t max_vocab = 4;
    std::size_t max_count = 5;
    double observe_prob = 0.6;
    bool use_content = true;
};

inline Instance random_instance(std::uint64_t seed, const InstanceBounds& bounds = {}) {
    casb::Rng rng(seed);
    const std::size_t d = 1 + rng.uniform_index(bounds.max_items);
    const std::size_t u = 1 + rng.uniform_index(bounds.max_users);
    const std::size_t k = 1 + rng.uniform_index(bounds.max_clusters);
    const std::size_t f = 1 + rng.uniform_index(bounds.max_vocab);

    std::vector<casb::LinkObservation> entries;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < u; ++j) {
            if (!rng.bernoulli(bounds.observe_prob)) continue;
            entries.push_back({i, j, static_cast<std::uint8_t>(rng.bernoulli(0.5) ? 1 : 0)});
        }
    }

    std::vector<std::vector<casb::TermCount>> rows(d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t l = 0; l < f; ++l) {
            if (rng.bernoulli(0.5)) {
                rows[i].push_back({l, 1 + rng.uniform_index(bounds.max_count)});
            }
        }
    }

    casb::Hyperparams hp;
    hp.num_clusters = k;
    hp.alpha = 0.5 + 2.5 * rng.uniform01();
    hp.beta = 0.5 + 2.5 * rng.uniform01();
    hp.gamma = {0.1 + 1.5 * rng.uniform01()};
    hp.use_content = bounds.use_content;

    return Instance{
        casb::InteractionMatrix(d, u, std::move(entries)),
        casb::Corpus(d, f, std::move(rows)),
        hp,
    };
}

// A valid but arbitrary variational state (not a coordinate-ascent fixed
// point), for exercising single updates and the ELBO.
inline casb::VariationalState random_state(const Instance& inst, std::uint64_t seed) {
    casb::Rng rng(seed);
    const std::size_t k = inst.hp.num_clusters;
    const std::size_t f = inst.corpus.vocab_size();
    const std::vector<double> ones(k, 1.0);
    casb::VariationalState state;
    state.phi = casb::Matrix(inst.data.num_items(), k);
    state.varphi = casb::Matrix(inst.data.num_users(), k);
    for (std::size_t i = 0; i < state.phi.rows(); ++i) {
        const auto row = rng.dirichlet(ones);
        for (std::size_t x = 0; x < k; ++x) state.phi(i, x) = row[x];
    }
    for (std::size_t j = 0; j < state.varphi.rows(); ++j) {
        const auto row = rng.dirichlet(ones);
        for (std::size_t x = 0; x < k; ++x) state.varphi(j, x) = row[x];
    }
    state.q_alpha = casb::Matrix(k, k);
    state.q_beta = casb::Matrix(k, k);
    for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t y = 0; y < k; ++y) {
            state.q_alpha(x, y) = 0.2 + 4.0 * rng.uniform01();
            state.q_beta(x, y) = 0.2 + 4.0 * rng.uniform01();
        }
    }
    state.lambda = casb::Matrix(k, f);
    for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t l = 0; l < f; ++l) state.lambda(x, l) = 0.2 + 3.0 * rng.uniform01();
    }
    return state;
}

}  // namespace test_support
