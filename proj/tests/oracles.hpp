#pragma once

// Independent reference implementations used to cross-check the library:
// dense brute-force block updates, a straight-line ELBO expansion, an
// exhaustive-enumeration posterior, and closed-form digamma values from
// harmonic sums. Everything here works on dense long double arrays and never
// calls into the code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "casb/matrix.hpp"
#include "casb/types.hpp"

namespace oracle {

using LD = long double;

inline constexpr LD kEulerMascheroni =
    0.57721566490153286060651209008240243104215933593992L;

// Digamma from scratch in long double: recurrence up to 20, then the
// asymptotic series. Kept separate from the library implementation.
inline LD digamma(LD x) {
    LD acc = 0.0L;
    while (x < 20.0L) {
        acc -= 1.0L / x;
        x += 1.0L;
    }
    const LD inv = 1.0L / x;
    const LD inv2 = inv * inv;
    const LD series =
        inv2 * (1.0L / 12.0L -
                inv2 * (1.0L / 120.0L -
                        inv2 * (1.0L / 252.0L -
                                inv2 * (1.0L / 240.0L -
                                        inv2 * (1.0L / 132.0L - inv2 * 691.0L / 32760.0L)))));
    return acc + std::log(x) - 0.5L * inv - series;
}

// Psi(n) = -gamma + sum_{k=1}^{n-1} 1/k, evaluated by the harmonic sum.
inline LD digamma_integer(unsigned n) {
    LD h = 0.0L;
    for (unsigned k = 1; k < n; ++k) h += 1.0L / static_cast<LD>(k);
    return -kEulerMascheroni + h;
}

// Psi(n + 1/2) = -gamma - 2 ln 2 + 2 sum_{k=1}^{n} 1/(2k-1).
inline LD digamma_half_integer(unsigned n) {
    LD h = 0.0L;
    for (unsigned k = 1; k <= n; ++k) h += 1.0L / static_cast<LD>(2 * k - 1);
    return -kEulerMascheroni - 2.0L * std::log(2.0L) + 2.0L * h;
}

// Dense mirror of a problem instance plus a variational state.
struct DenseInstance {
    std::size_t D = 0, U = 0, K = 0, F = 0;
    std::vector<std::vector<int>> y;        // D x U; -1 missing, else 0/1
    std::vector<std::vector<LD>> docs;      // D x F counts
    LD alpha = 1.0L, beta = 1.0L;
    std::vector<LD> gamma;                  // length F
    bool use_content = true;
    std::vector<std::vector<LD>> phi, varphi;  // D x K, U x K
    std::vector<std::vector<LD>> qa, qb;       // K x K
    std::vector<std::vector<LD>> lam;          // K x F
};

inline DenseInstance densify(const casb::InteractionMatrix& data, const casb::Corpus& corpus,
                             const casb::Hyperparams& hp, const casb::VariationalState& state) {
    DenseInstance inst;
    inst.D = data.num_items();
    inst.U = data.num_users();
    inst.K = hp.num_clusters;
    inst.F = corpus.vocab_size();
    inst.y.assign(inst.D, std::vector<int>(inst.U, -1));
    for (const auto& e : data.entries()) inst.y[e.item][e.user] = e.response;
    inst.docs.assign(inst.D, std::vector<LD>(inst.F, 0.0L));
    for (std::size_t i = 0; i < inst.D; ++i) {
        for (const auto& tc : corpus.row(i)) {
            inst.docs[i][tc.term] = static_cast<LD>(tc.count);
        }
    }
    inst.alpha = hp.alpha;
    inst.beta = hp.beta;
    inst.gamma.resize(inst.F);
    for (std::size_t l = 0; l < inst.F; ++l) inst.gamma[l] = hp.gamma_at(l);
    inst.use_content = hp.use_content;
    auto copy = [](const casb::Matrix& m) {
        std::vector<std::vector<LD>> out(m.rows(), std::vector<LD>(m.cols()));
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
        }
        return out;
    };
    inst.phi = copy(state.phi);
    inst.varphi = copy(state.varphi);
    inst.qa = copy(state.q_alpha);
    inst.qb = copy(state.q_beta);
    inst.lam = copy(state.lambda);
    return inst;
}

inline LD e_log_q(const DenseInstance& inst, std::size_t x, std::size_t y) {
    return digamma(inst.qa[x][y]) - digamma(inst.qa[x][y] + inst.qb[x][y]);
}
inline LD e_log_1mq(const DenseInstance& inst, std::size_t x, std::size_t y) {
    return digamma(inst.qb[x][y]) - digamma(inst.qa[x][y] + inst.qb[x][y]);
}
inline LD e_log_p(const DenseInstance& inst, std::size_t x, std::size_t l) {
    LD total = 0.0L;
    for (std::size_t m = 0; m < inst.F; ++m) total += inst.lam[x][m];
    return digamma(inst.lam[x][l]) - digamma(total);
}

// Unnormalized log conditional of the item-membership update evaluated
// densely, normalized by explicit summation.
inline std::vector<std::vector<LD>> dense_update_phi(const DenseInstance& inst) {
    std::vector<std::vector<LD>> out(inst.D, std::vector<LD>(inst.K, 0.0L));
    for (std::size_t i = 0; i < inst.D; ++i) {
        std::vector<LD> score(inst.K, 0.0L);
        for (std::size_t x = 0; x < inst.K; ++x) {
            LD s = 0.0L;
            if (inst.use_content) {
                for (std::size_t l = 0; l < inst.F; ++l) {
                    if (inst.docs[i][l] != 0.0L) s += inst.docs[i][l] * e_log_p(inst, x, l);
                }
            }
            for (std::size_t j = 0; j < inst.U; ++j) {
                if (inst.y[i][j] == 1) {
                    for (std::size_t yy = 0; yy < inst.K; ++yy) {
                        s += inst.varphi[j][yy] * e_log_q(inst, x, yy);
                    }
                } else if (inst.y[i][j] == 0) {
                    for (std::size_t yy = 0; yy < inst.K; ++yy) {
                        s += inst.varphi[j][yy] * e_log_1mq(inst, x, yy);
                    }
                }
            }
            score[x] = s;
        }
        LD m = score[0];
        for (LD v : score) m = std::max(m, v);
        LD total = 0.0L;
        for (std::size_t x = 0; x < inst.K; ++x) {
            out[i][x] = std::exp(score[x] - m);
            total += out[i][x];
        }
        for (std::size_t x = 0; x < inst.K; ++x) out[i][x] /= total;
    }
    return out;
}

inline std::vector<std::vector<LD>> dense_update_varphi(const DenseInstance& inst) {
    std::vector<std::vector<LD>> out(inst.U, std::vector<LD>(inst.K, 0.0L));
    for (std::size_t j = 0; j < inst.U; ++j) {
        std::vector<LD> score(inst.K, 0.0L);
        for (std::size_t yy = 0; yy < inst.K; ++yy) {
            LD s = 0.0L;
            for (std::size_t i = 0; i < inst.D; ++i) {
                if (inst.y[i][j] == 1) {
                    for (std::size_t x = 0; x < inst.K; ++x) {
                        s += inst.phi[i][x] * e_log_q(inst, x, yy);
                    }
                } else if (inst.y[i][j] == 0) {
                    for (std::size_t x = 0; x < inst.K; ++x) {
                        s += inst.phi[i][x] * e_log_1mq(inst, x, yy);
                    }
                }
            }
            score[yy] = s;
        }
        LD m = score[0];
        for (LD v : score) m = std::max(m, v);
        LD total = 0.0L;
        for (std::size_t yy = 0; yy < inst.K; ++yy) {
            out[j][yy] = std::exp(score[yy] - m);
            total += out[j][yy];
        }
        for (std::size_t yy = 0; yy < inst.K; ++yy) out[j][yy] /= total;
    }
    return out;
}

// Naive O(D U K^2) double loop over all observed pairs.
struct DenseBetaGrid {
    std::vector<std::vector<LD>> alpha, beta;
};

inline DenseBetaGrid dense_update_q(const DenseInstance& inst) {
    DenseBetaGrid grid;
    grid.alpha.assign(inst.K, std::vector<LD>(inst.K, inst.alpha));
    grid.beta.assign(inst.K, std::vector<LD>(inst.K, inst.beta));
    for (std::size_t x = 0; x < inst.K; ++x) {
        for (std::size_t yy = 0; yy < inst.K; ++yy) {
            for (std::size_t i = 0; i < inst.D; ++i) {
                for (std::size_t j = 0; j < inst.U; ++j) {
                    if (inst.y[i][j] == 1) {
                        grid.alpha[x][yy] += inst.phi[i][x] * inst.varphi[j][yy];
                    } else if (inst.y[i][j] == 0) {
                        grid.beta[x][yy] += inst.phi[i][x] * inst.varphi[j][yy];
                    }
                }
            }
        }
    }
    return grid;
}

inline std::vector<std::vector<LD>> dense_update_lambda(const DenseInstance& inst) {
    std::vector<std::vector<LD>> lam(inst.K, std::vector<LD>(inst.F, 0.0L));
    for (std::size_t x = 0; x < inst.K; ++x) {
        for (std::size_t l = 0; l < inst.F; ++l) {
            lam[x][l] = inst.gamma[l];
            if (inst.use_content) {
                for (std::size_t i = 0; i < inst.D; ++i) {
                    lam[x][l] += inst.phi[i][x] * inst.docs[i][l];
                }
            }
        }
    }
    return lam;
}

inline LD log_beta_fn(LD a, LD b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Term-by-term expansion of the evidence lower bound, one straight-line
// block per expectation, sharing no code with the library version.
inline LD dense_elbo(const DenseInstance& inst) {
    LD total = 0.0L;

    // expected link log-likelihood
    for (std::size_t i = 0; i < inst.D; ++i) {
        for (std::size_t j = 0; j < inst.U; ++j) {
            if (inst.y[i][j] < 0) continue;
            for (std::size_t x = 0; x < inst.K; ++x) {
                for (std::size_t yy = 0; yy < inst.K; ++yy) {
                    const LD w = inst.phi[i][x] * inst.varphi[j][yy];
                    total += w * (inst.y[i][j] == 1 ? e_log_q(inst, x, yy)
                                                    : e_log_1mq(inst, x, yy));
                }
            }
        }
    }

    // expected content log-likelihood
    if (inst.use_content) {
        for (std::size_t i = 0; i < inst.D; ++i) {
            for (std::size_t x = 0; x < inst.K; ++x) {
                for (std::size_t l = 0; l < inst.F; ++l) {
                    if (inst.docs[i][l] != 0.0L) {
                        total += inst.phi[i][x] * inst.docs[i][l] * e_log_p(inst, x, l);
                    }
                }
            }
        }
    }

    // uniform priors on z and w
    const LD log_k = std::log(static_cast<LD>(inst.K));
    for (std::size_t i = 0; i < inst.D; ++i) {
        for (std::size_t x = 0; x < inst.K; ++x) total += inst.phi[i][x] * (-log_k);
    }
    for (std::size_t j = 0; j < inst.U; ++j) {
        for (std::size_t yy = 0; yy < inst.K; ++yy) total += inst.varphi[j][yy] * (-log_k);
    }

    // Beta prior on Q
    for (std::size_t x = 0; x < inst.K; ++x) {
        for (std::size_t yy = 0; yy < inst.K; ++yy) {
            total += -log_beta_fn(inst.alpha, inst.beta) +
                     (inst.alpha - 1.0L) * e_log_q(inst, x, yy) +
                     (inst.beta - 1.0L) * e_log_1mq(inst, x, yy);
        }
    }

    // Dirichlet prior on P
    if (inst.use_content) {
        LD gamma_sum = 0.0L;
        LD log_b_gamma = 0.0L;
        for (std::size_t l = 0; l < inst.F; ++l) {
            gamma_sum += inst.gamma[l];
            log_b_gamma += std::lgamma(inst.gamma[l]);
        }
        log_b_gamma -= std::lgamma(gamma_sum);
        for (std::size_t x = 0; x < inst.K; ++x) {
            total += -log_b_gamma;
            for (std::size_t l = 0; l < inst.F; ++l) {
                total += (inst.gamma[l] - 1.0L) * e_log_p(inst, x, l);
            }
        }
    }

    // minus E[log q(z)] and E[log q(w)]
    for (std::size_t i = 0; i < inst.D; ++i) {
        for (std::size_t x = 0; x < inst.K; ++x) {
            if (inst.phi[i][x] > 0.0L) total -= inst.phi[i][x] * std::log(inst.phi[i][x]);
        }
    }
    for (std::size_t j = 0; j < inst.U; ++j) {
        for (std::size_t yy = 0; yy < inst.K; ++yy) {
            if (inst.varphi[j][yy] > 0.0L) {
                total -= inst.varphi[j][yy] * std::log(inst.varphi[j][yy]);
            }
        }
    }

    // minus E[log q(Q)]
    for (std::size_t x = 0; x < inst.K; ++x) {
        for (std::size_t yy = 0; yy < inst.K; ++yy) {
            total -= -log_beta_fn(inst.qa[x][yy], inst.qb[x][yy]) +
                     (inst.qa[x][yy] - 1.0L) * e_log_q(inst, x, yy) +
                     (inst.qb[x][yy] - 1.0L) * e_log_1mq(inst, x, yy);
        }
    }

    // minus E[log q(P)]
    if (inst.use_content) {
        for (std::size_t x = 0; x < inst.K; ++x) {
            LD lam_sum = 0.0L;
            LD log_b_lam = 0.0L;
            for (std::size_t l = 0; l < inst.F; ++l) {
                lam_sum += inst.lam[x][l];
                log_b_lam += std::lgamma(inst.lam[x][l]);
            }
            log_b_lam -= std::lgamma(lam_sum);
            LD e_log_q_p = -log_b_lam;
            for (std::size_t l = 0; l < inst.F; ++l) {
                e_log_q_p += (inst.lam[x][l] - 1.0L) * e_log_p(inst, x, l);
            }
            total -= e_log_q_p;
        }
    }

    return total;
}

// Exhaustive posterior over all K^D * K^U assignments with Q and P integrated
// out analytically (Beta-Bernoulli and Dirichlet-multinomial marginals).
struct EnumeratedPosterior {
    std::vector<std::vector<LD>> item_cooccurrence;  // D x D
    std::vector<std::vector<LD>> user_cooccurrence;  // U x U
};

inline EnumeratedPosterior enumerate_posterior(const casb::InteractionMatrix& data,
                                               const casb::Corpus& corpus,
                                               const casb::Hyperparams& hp) {
    const std::size_t D = data.num_items();
    const std::size_t U = data.num_users();
    const std::size_t K = hp.num_clusters;
    const std::size_t F = corpus.vocab_size();

    std::vector<std::vector<int>> y(D, std::vector<int>(U, -1));
    for (const auto& e : data.entries()) y[e.item][e.user] = e.response;
    std::vector<std::vector<LD>> docs(D, std::vector<LD>(F, 0.0L));
    for (std::size_t i = 0; i < D; ++i) {
        for (const auto& tc : corpus.row(i)) docs[i][tc.term] = static_cast<LD>(tc.count);
    }
    std::vector<LD> gamma(F);
    for (std::size_t l = 0; l < F; ++l) gamma[l] = hp.gamma_at(l);

    std::size_t total_assignments = 1;
    for (std::size_t i = 0; i < D + U; ++i) total_assignments *= K;

    std::vector<LD> log_weight(total_assignments);
    std::vector<std::vector<std::size_t>> zs(total_assignments, std::vector<std::size_t>(D));
    std::vector<std::vector<std::size_t>> ws(total_assignments, std::vector<std::size_t>(U));

    const LD log_b_prior = log_beta_fn(hp.alpha, hp.beta);
    LD gamma_sum = 0.0L, log_b_gamma = 0.0L;
    for (std::size_t l = 0; l < F; ++l) {
        gamma_sum += gamma[l];
        log_b_gamma += std::lgamma(gamma[l]);
    }
    if (F > 0) log_b_gamma -= std::lgamma(gamma_sum);

    for (std::size_t code = 0; code < total_assignments; ++code) {
        std::size_t rest = code;
        auto& z = zs[code];
        auto& w = ws[code];
        for (std::size_t i = 0; i < D; ++i) {
            z[i] = rest % K;
            rest /= K;
        }
        for (std::size_t j = 0; j < U; ++j) {
            w[j] = rest % K;
            rest /= K;
        }
        LD lw = 0.0L;
        std::vector<std::vector<LD>> n1(K, std::vector<LD>(K, 0.0L));
        std::vector<std::vector<LD>> n0(K, std::vector<LD>(K, 0.0L));
        for (std::size_t i = 0; i < D; ++i) {
            for (std::size_t j = 0; j < U; ++j) {
                if (y[i][j] == 1) n1[z[i]][w[j]] += 1.0L;
                if (y[i][j] == 0) n0[z[i]][w[j]] += 1.0L;
            }
        }
        for (std::size_t x = 0; x < K; ++x) {
            for (std::size_t yy = 0; yy < K; ++yy) {
                lw += log_beta_fn(hp.alpha + n1[x][yy], hp.beta + n0[x][yy]) - log_b_prior;
            }
        }
        if (hp.use_content && F > 0) {
            std::vector<std::vector<LD>> counts(K, gamma);
            for (std::size_t i = 0; i < D; ++i) {
                for (std::size_t l = 0; l < F; ++l) counts[z[i]][l] += docs[i][l];
            }
            for (std::size_t x = 0; x < K; ++x) {
                LD s = 0.0L, lb = 0.0L;
                for (std::size_t l = 0; l < F; ++l) {
                    s += counts[x][l];
                    lb += std::lgamma(counts[x][l]);
                }
                lb -= std::lgamma(s);
                lw += lb - log_b_gamma;
            }
        }
        log_weight[code] = lw;
    }

    LD max_lw = log_weight[0];
    for (LD v : log_weight) max_lw = std::max(max_lw, v);
    LD norm = 0.0L;
    std::vector<LD> weight(total_assignments);
    for (std::size_t code = 0; code < total_assignments; ++code) {
        weight[code] = std::exp(log_weight[code] - max_lw);
        norm += weight[code];
    }

    EnumeratedPosterior post;
    post.item_cooccurrence.assign(D, std::vector<LD>(D, 0.0L));
    post.user_cooccurrence.assign(U, std::vector<LD>(U, 0.0L));
    for (std::size_t code = 0; code < total_assignments; ++code) {
        const LD p = weight[code] / norm;
        for (std::size_t i = 0; i < D; ++i) {
            for (std::size_t i2 = 0; i2 < D; ++i2) {
                if (zs[code][i] == zs[code][i2]) post.item_cooccurrence[i][i2] += p;
            }
        }
        for (std::size_t j = 0; j < U; ++j) {
            for (std::size_t j2 = 0; j2 < U; ++j2) {
                if (ws[code][j] == ws[code][j2]) post.user_cooccurrence[j][j2] += p;
            }
        }
    }
    return post;
}

// The label permutation of b that best matches a: perm[b_label] = a_label.
inline std::vector<std::size_t> best_permutation(std::span<const std::size_t> a,
                                                 std::span<const std::size_t> b,
                                                 std::size_t k) {
    std::vector<std::size_t> perm(k), best_perm(k);
    for (std::size_t i = 0; i < k; ++i) perm[i] = best_perm[i] = i;
    std::size_t best_matches = 0;
    do {
        std::size_t matches = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == perm[b[i]]) ++matches;
        }
        if (matches > best_matches || (matches == best_matches && perm == best_perm)) {
            best_matches = matches;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best_perm;
}

// Agreement of two labelings maximized over all K! label permutations of the
// second one. Returns the matched fraction.
inline double best_permutation_agreement(std::span<const std::size_t> a,
                                         std::span<const std::size_t> b, std::size_t k) {
    if (a.empty()) return 1.0;
    const auto perm = best_permutation(a, b, k);
    std::size_t matches = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == perm[b[i]]) ++matches;
    }
    return static_cast<double>(matches) / static_cast<double>(a.size());
}

}  // namespace oracle
