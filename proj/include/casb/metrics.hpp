#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "casb/rng.hpp"
#include "casb/types.hpp"

// Cluster-quality evaluations computed from hard assignments and raw data:
// two-cluster misplacement counts, author entropies, Jaccard coreadership,
// and word-cloud weights.
namespace casb::metrics {

// Best-case two-cluster misclassification count against binary ground truth:
// min(g1 + c2, c1 + g2), symmetric under relabeling either side.
inline std::size_t misplaced_papers(std::span<const std::size_t> assignments,
                                    std::span<const std::size_t> ground_truth) {
    if (assignments.size() != ground_truth.size()) {
        throw std::invalid_argument("misplaced_papers: length mismatch");
    }
    std::size_t g[2] = {0, 0};
    std::size_t c[2] = {0, 0};
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] > 1) {
            throw std::invalid_argument("misplaced_papers: requires exactly 2 clusters");
        }
        if (ground_truth[i] > 1) {
            throw std::invalid_argument("misplaced_papers: ground truth must be binary");
        }
        if (ground_truth[i] == 0) {
            ++g[assignments[i]];
        } else {
            ++c[assignments[i]];
        }
    }
    return std::min(g[0] + c[1], c[0] + g[1]);
}

struct AuthorEntropy {
    std::vector<std::size_t> authors;  // indices into the input list, >= 2 documents each
    std::vector<double> entropy;       // bits, aligned with authors
    double mean = 0.0;
};

// Base-2 entropy of each author's distribution over clusters, restricted to
// authors with at least two documents; authors below the cutoff are skipped,
// not an error.
inline AuthorEntropy author_entropy(const std::vector<std::vector<std::size_t>>& author_docs,
                                    std::span<const std::size_t> assignments, std::size_t k) {
    if (k < 1) throw std::invalid_argument("author_entropy: K must be at least 1");
    AuthorEntropy result;
    std::vector<double> mass(k);
    for (std::size_t a = 0; a < author_docs.size(); ++a) {
        const auto& docs = author_docs[a];
        if (docs.size() < 2) continue;
        std::fill(mass.begin(), mass.end(), 0.0);
        for (std::size_t doc : docs) {
            if (doc >= assignments.size()) {
                throw std::invalid_argument("author_entropy: document index out of range");
            }
            const std::size_t cluster = assignments[doc];
            if (cluster >= k) {
                throw std::invalid_argument("author_entropy: assignment out of range");
            }
            mass[cluster] += 1.0;
        }
        const double total = static_cast<double>(docs.size());
        double h = 0.0;
        for (double m : mass) {
            if (m > 0.0) {
                const double p = m / total;
                h -= p * std::log2(p);
            }
        }
        result.authors.push_back(a);
        result.entropy.push_back(h);
    }
    if (!result.entropy.empty()) {
        double sum = 0.0;
        for (double h : result.entropy) sum += h;
        result.mean = sum / static_cast<double>(result.entropy.size());
    }
    return result;
}

// Jaccard similarity of two sorted, duplicate-free id sets. Two empty sets
// give 0 by convention.
inline double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::size_t inter = 0;
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] == b[ib]) {
            ++inter;
            ++ia;
            ++ib;
        } else if (a[ia] < b[ib]) {
            ++ia;
        } else {
            ++ib;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// Per-item reader sets: users with a positive link, sorted ascending.
inline std::vector<std::vector<std::size_t>> reader_sets(const InteractionMatrix& data) {
    std::vector<std::vector<std::size_t>> sets(data.num_items());
    for (const auto& e : data.entries()) {
        if (e.response == 1) sets[e.item].push_back(e.user);
    }
    return sets;  // entries() is (item, user) sorted, so each set is sorted
}

struct CoreadershipResult {
    std::size_t pairs_evaluated = 0;    // sampled documents that kept a partner
    std::size_t pairs_same_cluster = 0;
    double proportion = 0.0;
    bool empty = false;  // every sampled document was discarded
};

// Samples documents, pairs each with a random high-coreadership partner
// (Jaccard at or above the threshold), and reports the fraction of pairs
// sharing a cluster. Documents with no qualifying partner are discarded per
// the held-out-user protocol.
inline CoreadershipResult coreadership_similarity(const InteractionMatrix& data,
                                                  std::span<const std::size_t> assignments,
                                                  double threshold, std::size_t sample_size,
                                                  std::uint64_t seed) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument("coreadership_similarity: threshold must lie in (0, 1]");
    }
    if (assignments.size() != data.num_items()) {
        throw std::invalid_argument("coreadership_similarity: assignment length mismatch");
    }
    const std::size_t d = data.num_items();
    const auto readers = reader_sets(data);
    Rng rng(seed);
    const auto sampled = rng.sample_without_replacement(d, std::min(sample_size, d));

    CoreadershipResult result;
    std::vector<std::size_t> partners;
    for (std::size_t doc : sampled) {
        partners.clear();
        for (std::size_t other = 0; other < d; ++other) {
            if (other == doc) continue;
            if (jaccard(readers[doc], readers[other]) >= threshold) partners.push_back(other);
        }
        if (partners.empty()) continue;
        const std::size_t partner = partners[rng.uniform_index(partners.size())];
        ++result.pairs_evaluated;
        if (assignments[doc] == assignments[partner]) ++result.pairs_same_cluster;
    }
    if (result.pairs_evaluated == 0) {
        result.empty = true;
        return result;
    }
    result.proportion = static_cast<double>(result.pairs_same_cluster) /
                        static_cast<double>(result.pairs_evaluated);
    return result;
}

// Per-term document lists (presence, not counts), for word-cloud weighting.
inline std::vector<std::vector<std::size_t>> term_document_sets(const Corpus& corpus) {
    std::vector<std::vector<std::size_t>> sets(corpus.vocab_size());
    for (std::size_t i = 0; i < corpus.num_items(); ++i) {
        for (const auto& tc : corpus.row(i)) sets[tc.term].push_back(i);
    }
    return sets;
}

struct WordWeight {
    std::size_t term = 0;
    double weight = 0.0;
};

// For every word present in more than min_doc_count documents, the weight of
// the word in cluster i is the proportion of documents containing it that
// fall in cluster i; weights per word sum to one. Returns one list per
// cluster, sorted by descending weight (ties by term index).
inline std::vector<std::vector<WordWeight>> word_cloud_weights(
    const std::vector<std::vector<std::size_t>>& word_docs,
    std::span<const std::size_t> assignments, std::size_t k, std::size_t min_doc_count) {
    if (k < 1) throw std::invalid_argument("word_cloud_weights: K must be at least 1");
    if (min_doc_count < 1) {
        throw std::invalid_argument("word_cloud_weights: min_doc_count must be at least 1");
    }
    std::vector<std::vector<WordWeight>> clouds(k);
    std::vector<double> mass(k);
    for (std::size_t term = 0; term < word_docs.size(); ++term) {
        const auto& docs = word_docs[term];
        if (docs.size() <= min_doc_count) continue;
        std::fill(mass.begin(), mass.end(), 0.0);
        for (std::size_t doc : docs) {
            if (doc >= assignments.size() || assignments[doc] >= k) {
                throw std::invalid_argument("word_cloud_weights: invalid document or cluster");
            }
            mass[assignments[doc]] += 1.0;
        }
        const double total = static_cast<double>(docs.size());
        for (std::size_t x = 0; x < k; ++x) {
            if (mass[x] > 0.0) clouds[x].push_back({term, mass[x] / total});
        }
    }
    for (auto& cloud : clouds) {
        std::stable_sort(cloud.begin(), cloud.end(), [](const auto& a, const auto& b) {
            return a.weight != b.weight ? a.weight > b.weight : a.term < b.term;
        });
    }
    return clouds;
}

struct HoldoutResult {
    InteractionMatrix train;
    std::vector<std::size_t> heldout_users;      // original ids, ascending
    std::vector<std::size_t> kept_user_old_ids;  // new user index -> original id
};

// Removes every link of num_heldout uniformly sampled users and reindexes the
// remaining users contiguously.
inline HoldoutResult holdout_users(const InteractionMatrix& data, std::size_t num_heldout,
                                   std::uint64_t seed) {
    const std::size_t u = data.num_users();
    if (num_heldout >= u && !(num_heldout == 0 && u == 0)) {
        throw std::invalid_argument("holdout_users: num_heldout must be below the user count");
    }
    Rng rng(seed);
    auto heldout = rng.sample_without_replacement(u, num_heldout);
    std::sort(heldout.begin(), heldout.end());

    std::vector<bool> held(u, false);
    for (std::size_t j : heldout) held[j] = true;
    std::vector<std::size_t> new_index(u, 0);
    std::vector<std::size_t> kept;
    kept.reserve(u - num_heldout);
    for (std::size_t j = 0; j < u; ++j) {
        if (!held[j]) {
            new_index[j] = kept.size();
            kept.push_back(j);
        }
    }
    std::vector<LinkObservation> entries;
    for (const auto& e : data.entries()) {
        if (!held[e.user]) entries.push_back({e.item, new_index[e.user], e.response});
    }
    return HoldoutResult{
        InteractionMatrix(data.num_items(), kept.size(), std::move(entries)),
        std::move(heldout),
        std::move(kept),
    };
}

}  // namespace casb::metrics
