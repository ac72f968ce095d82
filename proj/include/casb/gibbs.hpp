#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "casb/matrix.hpp"
#include "casb/rng.hpp"
#include "casb/types.hpp"
#include "casb/vi.hpp"

// Gibbs sampler over the concrete latent variables (z, w, Q, P), built
// directly from the complete conditionals. It is a correctness oracle for
// small instances, not a production inference path; label switching is
// handled by cooccurrence summaries instead of relabeling.
namespace casb::gibbs {

struct GibbsConfig {
    std::size_t burn_in = 1000;
    std::size_t samples = 2000;
    std::size_t thin = 1;
    std::uint64_t seed = 0;
};

// Concrete (non-variational) state.
struct GibbsState {
    std::vector<std::size_t> item_clusters;    // z
    std::vector<std::size_t> user_communities; // w
    Matrix q;  // K x K, entries in (0,1)
    Matrix p;  // K x F, rows on the simplex
};

struct GibbsSummary {
    Matrix item_cooccurrence;  // D x D posterior same-cluster frequencies
    Matrix user_cooccurrence;  // U x U
    std::vector<std::size_t> item_mode;  // labels from the most frequent sample
    std::vector<std::size_t> user_mode;
    std::size_t retained = 0;
};

inline GibbsState init_state(const InteractionMatrix& data, const Corpus& corpus,
                             const Hyperparams& hp, Rng& rng) {
    const std::size_t k = hp.num_clusters;
    const std::size_t f = corpus.vocab_size();
    GibbsState state;
    state.item_clusters.resize(data.num_items());
    for (auto& z : state.item_clusters) z = rng.uniform_index(k);
    state.user_communities.resize(data.num_users());
    for (auto& w : state.user_communities) w = rng.uniform_index(k);
    state.q = Matrix(k, k);
    for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t y = 0; y < k; ++y) state.q(x, y) = rng.beta(hp.alpha, hp.beta);
    }
    state.p = Matrix(k, f);
    if (f > 0) {
        std::vector<double> gamma_row(f);
        for (std::size_t l = 0; l < f; ++l) gamma_row[l] = hp.gamma_at(l);
        for (std::size_t x = 0; x < k; ++x) {
            const auto row = rng.dirichlet(gamma_row);
            for (std::size_t l = 0; l < f; ++l) state.p(x, l) = row[l];
        }
    }
    return state;
}

// One systematic scan: all z, all w, then the Beta grid, then the Dirichlet
// rows. Observed zeros enter the negative product; unobserved pairs never
// contribute (same convention as the variational updates).
inline void sweep(GibbsState& state, const InteractionMatrix& data, const Corpus& corpus,
                  const Hyperparams& hp, Rng& rng) {
    const std::size_t k = hp.num_clusters;
    const std::size_t d = data.num_items();
    const std::size_t u = data.num_users();
    const std::size_t f = corpus.vocab_size();

    Matrix log_q(k, k), log_1mq(k, k);
    for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t y = 0; y < k; ++y) {
            const double q = state.q(x, y);
            log_q(x, y) = std::log(std::max(q, 1e-300));
            log_1mq(x, y) = std::log(std::max(1.0 - q, 1e-300));
        }
    }
    Matrix log_p(k, f);
    if (hp.use_content) {
        for (std::size_t x = 0; x < k; ++x) {
            for (std::size_t l = 0; l < f; ++l) {
                log_p(x, l) = std::log(std::max(state.p(x, l), 1e-300));
            }
        }
    }

    std::vector<double> scores(k);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t x = 0; x < k; ++x) {
            double s = 0.0;
            if (hp.use_content) {
                for (const auto& tc : corpus.row(i)) {
                    s += static_cast<double>(tc.count) * log_p(x, tc.term);
                }
            }
            for (const auto& e : data.item_row(i)) {
                const std::size_t y = state.user_communities[e.user];
                s += e.response ? log_q(x, y) : log_1mq(x, y);
            }
            scores[x] = s;
        }
        vi::detail::softmax_in_place(scores);
        state.item_clusters[i] = rng.categorical(scores);
    }

    for (std::size_t j = 0; j < u; ++j) {
        for (std::size_t y = 0; y < k; ++y) {
            double s = 0.0;
            for (const auto& e : data.user_column(j)) {
                const std::size_t x = state.item_clusters[e.item];
                s += e.response ? log_q(x, y) : log_1mq(x, y);
            }
            scores[y] = s;
        }
        vi::detail::softmax_in_place(scores);
        state.user_communities[j] = rng.categorical(scores);
    }

    Matrix pos(k, k), neg(k, k);
    for (const auto& e : data.entries()) {
        Matrix& target = e.response ? pos : neg;
        target(state.item_clusters[e.item], state.user_communities[e.user]) += 1.0;
    }
    for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t y = 0; y < k; ++y) {
            state.q(x, y) = rng.beta(hp.alpha + pos(x, y), hp.beta + neg(x, y));
        }
    }

    if (hp.use_content && f > 0) {
        Matrix counts(k, f);
        for (std::size_t x = 0; x < k; ++x) {
            for (std::size_t l = 0; l < f; ++l) counts(x, l) = hp.gamma_at(l);
        }
        for (std::size_t i = 0; i < d; ++i) {
            const std::size_t x = state.item_clusters[i];
            for (const auto& tc : corpus.row(i)) {
                counts(x, tc.term) += static_cast<double>(tc.count);
            }
        }
        for (std::size_t x = 0; x < k; ++x) {
            const auto row = rng.dirichlet(counts.row(x));
            for (std::size_t l = 0; l < f; ++l) state.p(x, l) = row[l];
        }
    }
}

// Burn-in, then thinned collection. Cooccurrence frequencies are averaged
// over retained samples; mode labels come from the most frequent retained
// (z, w) sample, ties resolved toward the lexicographically smallest.
inline GibbsSummary run(const InteractionMatrix& data, const Corpus& corpus,
                        const Hyperparams& hp, const GibbsConfig& config) {
    if (config.samples < 1) throw std::invalid_argument("run: samples must be at least 1");
    if (config.thin < 1) throw std::invalid_argument("run: thin must be at least 1");
    const ValidationReport report = validate(data, &corpus, hp);
    if (!report.ok()) {
        throw std::invalid_argument("run: invalid inputs: " + report.joined_errors());
    }

    const std::size_t d = data.num_items();
    const std::size_t u = data.num_users();
    Rng rng(config.seed);
    GibbsState state = init_state(data, corpus, hp, rng);
    for (std::size_t b = 0; b < config.burn_in; ++b) sweep(state, data, corpus, hp, rng);

    GibbsSummary summary;
    summary.item_cooccurrence = Matrix(d, d);
    summary.user_cooccurrence = Matrix(u, u);
    using SampleKey = std::pair<std::vector<std::size_t>, std::vector<std::size_t>>;
    std::map<SampleKey, std::size_t> frequency;
    for (std::size_t s = 0; s < config.samples; ++s) {
        for (std::size_t t = 0; t < config.thin; ++t) sweep(state, data, corpus, hp, rng);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t i2 = i; i2 < d; ++i2) {
                if (state.item_clusters[i] == state.item_clusters[i2]) {
                    summary.item_cooccurrence(i, i2) += 1.0;
                    if (i2 != i) summary.item_cooccurrence(i2, i) += 1.0;
                }
            }
        }
        for (std::size_t j = 0; j < u; ++j) {
            for (std::size_t j2 = j; j2 < u; ++j2) {
                if (state.user_communities[j] == state.user_communities[j2]) {
                    summary.user_cooccurrence(j, j2) += 1.0;
                    if (j2 != j) summary.user_cooccurrence(j2, j) += 1.0;
                }
            }
        }
        ++frequency[SampleKey(state.item_clusters, state.user_communities)];
    }
    const double n = static_cast<double>(config.samples);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t i2 = 0; i2 < d; ++i2) summary.item_cooccurrence(i, i2) /= n;
    }
    for (std::size_t j = 0; j < u; ++j) {
        for (std::size_t j2 = 0; j2 < u; ++j2) summary.user_cooccurrence(j, j2) /= n;
    }

    const SampleKey* mode = nullptr;
    std::size_t mode_count = 0;
    for (const auto& [key, count] : frequency) {
        if (count > mode_count) {  // map order makes ties deterministic
            mode = &key;
            mode_count = count;
        }
    }
    summary.item_mode = mode->first;
    summary.user_mode = mode->second;
    summary.retained = config.samples;
    return summary;
}

}  // namespace casb::gibbs
