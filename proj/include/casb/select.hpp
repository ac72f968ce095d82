#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "casb/types.hpp"
#include "casb/vi.hpp"

// Model-order selection: fit each K in a range and keep the largest K whose
// ELBO improved on the previous K by at least the threshold (5% by default).
// ELBOs are negative, so the relative increase divides by |previous ELBO|.
namespace casb::select {

struct KTableRow {
    std::size_t k = 0;
    double elbo = 0.0;
    double rel_increase = std::numeric_limits<double>::quiet_NaN();  // NaN for the first row
};

struct KSelection {
    std::size_t chosen_k = 0;
    std::vector<KTableRow> table;
};

// The bare rule, isolated so the denominator convention can be revised in one
// place. elbos[i] belongs to K = k_min + i. Falls back to k_min when no K
// qualifies.
inline std::size_t apply_rule(std::span<const double> elbos, std::size_t k_min,
                              double min_rel_increase = 0.05) {
    if (elbos.empty()) throw std::invalid_argument("apply_rule: empty table");
    std::size_t chosen = k_min;
    for (std::size_t i = 1; i < elbos.size(); ++i) {
        const double prev = elbos[i - 1];
        const double denom = std::max(std::abs(prev), 1e-300);
        const double rel = (elbos[i] - prev) / denom;
        if (rel >= min_rel_increase) chosen = k_min + i;
    }
    return chosen;
}

inline KSelection select_k(const InteractionMatrix& data, const Corpus& corpus,
                           const Hyperparams& hp_template, const vi::FitConfig& config,
                           std::size_t k_min, std::size_t k_max,
                           double min_rel_increase = 0.05) {
    if (k_min < 1 || k_min >= k_max) {
        throw std::invalid_argument("select_k: need 1 <= k_min < k_max");
    }
    KSelection result;
    std::vector<double> elbos;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        Hyperparams hp = hp_template;
        hp.num_clusters = k;
        const FitResult fit = vi::fit(data, corpus, hp, config);
        KTableRow row;
        row.k = k;
        row.elbo = fit.final_elbo();
        if (!elbos.empty()) {
            const double prev = elbos.back();
            row.rel_increase = (row.elbo - prev) / std::max(std::abs(prev), 1e-300);
        }
        elbos.push_back(row.elbo);
        result.table.push_back(row);
    }
    result.chosen_k = apply_rule(elbos, k_min, min_rel_increase);
    return result;
}

}  // namespace casb::select
