#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "casb/matrix.hpp"
#include "casb/rng.hpp"
#include "casb/types.hpp"

// Samples complete datasets from the generative story with known ground
// truth: uniform cluster labels, Bernoulli links through a block interest
// matrix, multinomial content per item. Missing pairs follow a Bernoulli
// observation model so the link likelihood is untouched.
namespace casb::synth {

struct SynthSpec {
    std::size_t num_items = 0;
    std::size_t num_users = 0;
    std::size_t num_clusters = 2;
    std::size_t vocab_size = 0;
    std::size_t words_per_doc_min = 100;  // equal min/max means a fixed count
    std::size_t words_per_doc_max = 100;
    double observation_rate = 1.0;  // probability a pair is shown at all
    double q_in = 0.9;              // block pattern used when q_matrix is unset
    double q_out = 0.1;
    std::optional<Matrix> q_matrix;  // explicit K x K interest probabilities
    std::optional<Matrix> p_rows;    // explicit K x F simplex rows; default is
                                     // disjoint vocabulary blocks per cluster
    std::uint64_t seed = 0;
};

struct SynthDataset {
    InteractionMatrix data;
    Corpus corpus;
    std::vector<std::size_t> true_item_clusters;
    std::vector<std::size_t> true_user_communities;
    Matrix true_q;
    Matrix true_p;
};

namespace detail {

inline Matrix build_q(const SynthSpec& spec) {
    const std::size_t k = spec.num_clusters;
    if (spec.q_matrix) {
        const Matrix& q = *spec.q_matrix;
        if (q.rows() != k || q.cols() != k) {
            throw std::invalid_argument("generate: q_matrix must be K x K");
        }
        for (double v : q.values()) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::invalid_argument("generate: q entries must lie in [0, 1]");
            }
        }
        return q;
    }
    if (!(spec.q_in >= 0.0 && spec.q_in <= 1.0 && spec.q_out >= 0.0 && spec.q_out <= 1.0)) {
        throw std::invalid_argument("generate: q_in and q_out must lie in [0, 1]");
    }
    Matrix q(k, k, spec.q_out);
    for (std::size_t x = 0; x < k; ++x) q(x, x) = spec.q_in;
    return q;
}

inline Matrix build_p(const SynthSpec& spec) {
    const std::size_t k = spec.num_clusters;
    const std::size_t f = spec.vocab_size;
    if (spec.p_rows) {
        const Matrix& p = *spec.p_rows;
        if (p.rows() != k || p.cols() != f) {
            throw std::invalid_argument("generate: p_rows must be K x F");
        }
        for (std::size_t x = 0; x < k; ++x) {
            double total = 0.0;
            for (double v : p.row(x)) {
                if (!(v >= 0.0)) {
                    throw std::invalid_argument("generate: p entries must be nonnegative");
                }
                total += v;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw std::invalid_argument("generate: p rows must sum to one");
            }
        }
        return p;
    }
    if (f == 0) return Matrix(k, 0);
    if (f < k) {
        throw std::invalid_argument("generate: disjoint vocabularies require F >= K");
    }
    // Cluster x owns vocabulary slots [x*F/K, (x+1)*F/K), uniformly.
    Matrix p(k, f);
    for (std::size_t x = 0; x < k; ++x) {
        const std::size_t lo = x * f / k;
        const std::size_t hi = (x + 1) * f / k;
        const double mass = 1.0 / static_cast<double>(hi - lo);
        for (std::size_t l = lo; l < hi; ++l) p(x, l) = mass;
    }
    return p;
}

}  // namespace detail

inline SynthDataset generate(const SynthSpec& spec) {
    if (spec.num_clusters < 1) throw std::invalid_argument("generate: K must be at least 1");
    if (!(spec.observation_rate >= 0.0 && spec.observation_rate <= 1.0)) {
        throw std::invalid_argument("generate: observation_rate must lie in [0, 1]");
    }
    if (spec.words_per_doc_min > spec.words_per_doc_max) {
        throw std::invalid_argument("generate: words_per_doc range is inverted");
    }
    const Matrix q = detail::build_q(spec);
    const Matrix p = detail::build_p(spec);
    const std::size_t k = spec.num_clusters;
    const std::size_t f = spec.vocab_size;
    Rng rng(spec.seed);

    std::vector<std::size_t> z(spec.num_items);
    for (auto& v : z) v = rng.uniform_index(k);
    std::vector<std::size_t> w(spec.num_users);
    for (auto& v : w) v = rng.uniform_index(k);

    std::vector<LinkObservation> entries;
    for (std::size_t i = 0; i < spec.num_items; ++i) {
        for (std::size_t j = 0; j < spec.num_users; ++j) {
            if (!rng.bernoulli(spec.observation_rate)) continue;
            const bool positive = rng.bernoulli(q(z[i], w[j]));
            entries.push_back({i, j, static_cast<std::uint8_t>(positive ? 1 : 0)});
        }
    }

    std::vector<std::vector<TermCount>> rows(spec.num_items);
    if (f > 0) {
        std::vector<std::size_t> counts(f);
        for (std::size_t i = 0; i < spec.num_items; ++i) {
            std::size_t n = spec.words_per_doc_min;
            if (spec.words_per_doc_max > spec.words_per_doc_min) {
                n += rng.uniform_index(spec.words_per_doc_max - spec.words_per_doc_min + 1);
            }
            std::fill(counts.begin(), counts.end(), 0);
            const auto p_row = p.row(z[i]);
            for (std::size_t t = 0; t < n; ++t) ++counts[rng.categorical(p_row)];
            for (std::size_t l = 0; l < f; ++l) {
                if (counts[l] > 0) rows[i].push_back({l, counts[l]});
            }
        }
    }

    return SynthDataset{
        InteractionMatrix(spec.num_items, spec.num_users, std::move(entries)),
        Corpus(spec.num_items, f, std::move(rows)),
        std::move(z),
        std::move(w),
        q,
        p,
    };
}

// Adjusted Rand index between two labelings of the same elements. Returns 1
// exactly when the partitions coincide; degenerate cases where the chance
// correction has zero range return 1 (both partitions trivially agree).
inline double ari(std::span<const std::size_t> labels_a, std::span<const std::size_t> labels_b) {
    if (labels_a.size() != labels_b.size()) {
        throw std::invalid_argument("ari: labelings must have equal length");
    }
    const std::size_t n = labels_a.size();
    if (n < 2) return 1.0;
    std::size_t ka = 0, kb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ka = std::max(ka, labels_a[i] + 1);
        kb = std::max(kb, labels_b[i] + 1);
    }
    Matrix contingency(ka, kb);
    std::vector<double> row_sums(ka, 0.0), col_sums(kb, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        contingency(labels_a[i], labels_b[i]) += 1.0;
        row_sums[labels_a[i]] += 1.0;
        col_sums[labels_b[i]] += 1.0;
    }
    auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
    double index = 0.0;
    for (double v : contingency.values()) index += choose2(v);
    double sum_a = 0.0, sum_b = 0.0;
    for (double v : row_sums) sum_a += choose2(v);
    for (double v : col_sums) sum_b += choose2(v);
    const double total_pairs = choose2(static_cast<double>(n));
    const double expected = sum_a * sum_b / total_pairs;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace casb::synth
