#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "casb/matrix.hpp"
#include "casb/rng.hpp"
#include "casb/special_functions.hpp"
#include "casb/types.hpp"

// Mean-field coordinate ascent for the content-augmented blockmodel. Four
// block updates (item memberships, user memberships, Beta grid, Dirichlet
// rows), an exact ELBO, and a multi-restart driver.
namespace casb::vi {

struct FitConfig {
    std::size_t max_sweeps = 500;
    double rel_tol = 1e-6;  // relative ELBO change per sweep
    std::size_t num_restarts = 5;
    std::uint64_t seed = 0;
    bool deterministic_mode = true;  // fixed reduction order (always honored here)
    std::size_t threads = 1;
};

// Expectation tables shared by the block updates: E[ln q], E[ln(1-q)] over
// the K x K Beta grid and E[ln p] over the K x F Dirichlet rows.
struct Expectations {
    Matrix log_q;
    Matrix log_1mq;
    Matrix log_p;  // empty when the content term is disabled
};

inline Expectations expectations(const VariationalState& state, bool use_content = true) {
    const std::size_t k = state.num_clusters();
    Expectations ex;
    ex.log_q = Matrix(k, k);
    ex.log_1mq = Matrix(k, k);
    for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t y = 0; y < k; ++y) {
            const auto [lq, l1mq] = expected_log_q(state.q_alpha(x, y), state.q_beta(x, y));
            ex.log_q(x, y) = lq;
            ex.log_1mq(x, y) = l1mq;
        }
    }
    const std::size_t f = state.lambda.cols();
    if (use_content && f > 0) {
        ex.log_p = Matrix(k, f);
        for (std::size_t x = 0; x < k; ++x) {
            const auto row = expected_log_p(state.lambda.row(x));
            for (std::size_t l = 0; l < f; ++l) ex.log_p(x, l) = row[l];
        }
    }
    return ex;
}

namespace detail {

// Log-space normalization: subtract the row max, exponentiate, divide.
inline void softmax_in_place(std::span<double> row) {
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    double total = 0.0;
    for (double& v : row) {
        v = std::exp(v - m);
        total += v;
    }
    for (double& v : row) v /= total;
}

// Runs fn(i) for i in [0, n). Rows write to disjoint memory, so the result
// does not depend on the thread count.
template <typename Fn>
inline void for_each_row(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || n < 2 * threads) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

}  // namespace detail

// One coordinate step for the item memberships. Per item i and cluster x the
// log score is
//   sum_l d_il E[ln p_xl]                       (content, when enabled)
// + sum_{j: Y_ij=1} sum_y varphi_jy E[ln q_xy]
// + sum_{j: Y_ij=0} sum_y varphi_jy E[ln(1-q_xy)]
// and the row is the log-space softmax of the scores. Unobserved pairs
// contribute nothing.
inline Matrix update_phi(const VariationalState& state, const InteractionMatrix& data,
                         const Corpus& corpus, const Hyperparams& hp,
                         std::size_t threads = 1) {
    state.check(data.num_items(), data.num_users(), corpus.vocab_size());
    const std::size_t d = data.num_items();
    const std::size_t k = state.num_clusters();
    const Expectations ex = expectations(state, hp.use_content);
    Matrix phi(d, k);
    detail::for_each_row(d, threads, [&](std::size_t i) {
        std::vector<double> pos(k, 0.0), neg(k, 0.0);
        for (const auto& e : data.item_row(i)) {
            auto v = state.varphi.row(e.user);
            auto& acc = e.response ? pos : neg;
            for (std::size_t y = 0; y < k; ++y) acc[y] += v[y];
        }
        auto out = phi.row(i);
        for (std::size_t x = 0; x < k; ++x) {
            double s = 0.0;
            if (hp.use_content) {
                for (const auto& tc : corpus.row(i)) {
                    s += static_cast<double>(tc.count) * ex.log_p(x, tc.term);
                }
            }
            for (std::size_t y = 0; y < k; ++y) {
                s += pos[y] * ex.log_q(x, y) + neg[y] * ex.log_1mq(x, y);
            }
            out[x] = s;
        }
        detail::softmax_in_place(out);
    });
    return phi;
}

// Coordinate step for the user memberships; mirror of update_phi without a
// content term. Only observed zeros enter the negative product -- unobserved
// pairs never contribute.
inline Matrix update_varphi(const VariationalState& state, const InteractionMatrix& data,
                            const Hyperparams& hp, std::size_t threads = 1) {
    state.check(data.num_items(), data.num_users(), state.lambda.cols());
    (void)hp;
    const std::size_t u = data.num_users();
    const std::size_t k = state.num_clusters();
    const Expectations ex = expectations(state, /*use_content=*/false);
    Matrix varphi(u, k);
    detail::for_each_row(u, threads, [&](std::size_t j) {
        std::vector<double> pos(k, 0.0), neg(k, 0.0);
        for (const auto& e : data.user_column(j)) {
            auto v = state.phi.row(e.item);
            auto& acc = e.response ? pos : neg;
            for (std::size_t x = 0; x < k; ++x) acc[x] += v[x];
        }
        auto out = varphi.row(j);
        for (std::size_t y = 0; y < k; ++y) {
            double s = 0.0;
            for (std::size_t x = 0; x < k; ++x) {
                s += pos[x] * ex.log_q(x, y) + neg[x] * ex.log_1mq(x, y);
            }
            out[y] = s;
        }
        detail::softmax_in_place(out);
    });
    return varphi;
}

// Conjugate step for the Beta grid: prior plus expected positive / negative
// counts over observed pairs. Entries are accumulated in their stored
// (item, user) order, so the reduction is deterministic.
inline std::pair<Matrix, Matrix> update_q(const VariationalState& state,
                                          const InteractionMatrix& data,
                                          const Hyperparams& hp) {
    state.check(data.num_items(), data.num_users(), state.lambda.cols());
    const std::size_t k = state.num_clusters();
    Matrix a(k, k, hp.alpha);
    Matrix b(k, k, hp.beta);
    for (const auto& e : data.entries()) {
        auto pi = state.phi.row(e.item);
        auto pj = state.varphi.row(e.user);
        Matrix& target = e.response ? a : b;
        for (std::size_t x = 0; x < k; ++x) {
            const double w = pi[x];
            if (w == 0.0) continue;
            for (std::size_t y = 0; y < k; ++y) target(x, y) += w * pj[y];
        }
    }
    return {std::move(a), std::move(b)};
}

// Conjugate step for the Dirichlet rows: prior plus membership-weighted
// counts. With the content term disabled the rows stay at the prior, keeping
// the blockmodel reduction independent of corpus contents.
inline Matrix update_lambda(const VariationalState& state, const Corpus& corpus,
                            const Hyperparams& hp) {
    state.check(corpus.num_items(), state.varphi.rows(), corpus.vocab_size());
    const std::size_t k = state.num_clusters();
    const std::size_t f = corpus.vocab_size();
    Matrix lambda(k, f);
    for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t l = 0; l < f; ++l) lambda(x, l) = hp.gamma_at(l);
    }
    if (!hp.use_content) return lambda;
    for (std::size_t i = 0; i < corpus.num_items(); ++i) {
        auto pi = state.phi.row(i);
        for (const auto& tc : corpus.row(i)) {
            const double c = static_cast<double>(tc.count);
            for (std::size_t x = 0; x < k; ++x) lambda(x, tc.term) += pi[x] * c;
        }
    }
    return lambda;
}

// Evidence lower bound, expanded in closed form. With the content term
// disabled the Dirichlet block drops out of the model entirely. The constant
// multinomial coefficients of the content likelihood are omitted (they do not
// depend on any latent variable).
inline double elbo(const VariationalState& state, const InteractionMatrix& data,
                   const Corpus& corpus, const Hyperparams& hp) {
    state.check(data.num_items(), data.num_users(), corpus.vocab_size());
    const std::size_t k = state.num_clusters();
    const Expectations ex = expectations(state, hp.use_content);

    double link_ll = 0.0;
    for (const auto& e : data.entries()) {
        auto pi = state.phi.row(e.item);
        auto pj = state.varphi.row(e.user);
        const Matrix& table = e.response ? ex.log_q : ex.log_1mq;
        double s = 0.0;
        for (std::size_t x = 0; x < k; ++x) {
            const double w = pi[x];
            if (w == 0.0) continue;
            double inner = 0.0;
            for (std::size_t y = 0; y < k; ++y) inner += pj[y] * table(x, y);
            s += w * inner;
        }
        link_ll += s;
    }

    double content_ll = 0.0;
    if (hp.use_content) {
        for (std::size_t i = 0; i < corpus.num_items(); ++i) {
            auto pi = state.phi.row(i);
            for (const auto& tc : corpus.row(i)) {
                const double c = static_cast<double>(tc.count);
                for (std::size_t x = 0; x < k; ++x) {
                    content_ll += pi[x] * c * ex.log_p(x, tc.term);
                }
            }
        }
    }

    const double log_k = std::log(static_cast<double>(k));
    double categorical_terms = 0.0;
    for (std::size_t i = 0; i < state.phi.rows(); ++i) {
        categorical_terms += -log_k + detail::entropy(state.phi.row(i));
    }
    for (std::size_t j = 0; j < state.varphi.rows(); ++j) {
        categorical_terms += -log_k + detail::entropy(state.varphi.row(j));
    }

    // Beta block: E[ln p(Q)] - E[ln q(Q)] with both densities evaluated via
    // the same expectations, so the block vanishes exactly at the prior.
    double beta_terms = 0.0;
    for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t y = 0; y < k; ++y) {
            const double a = state.q_alpha(x, y);
            const double b = state.q_beta(x, y);
            const double elq = ex.log_q(x, y);
            const double el1mq = ex.log_1mq(x, y);
            const double log_prior =
                -log_beta(hp.alpha, hp.beta) + (hp.alpha - 1.0) * elq + (hp.beta - 1.0) * el1mq;
            const double log_var = -log_beta(a, b) + (a - 1.0) * elq + (b - 1.0) * el1mq;
            beta_terms += log_prior - log_var;
        }
    }

    double dirichlet_terms = 0.0;
    if (hp.use_content && corpus.vocab_size() > 0) {
        const std::size_t f = corpus.vocab_size();
        std::vector<double> gamma_row(f);
        for (std::size_t l = 0; l < f; ++l) gamma_row[l] = hp.gamma_at(l);
        const double log_b_prior = dirichlet_log_beta(gamma_row);
        for (std::size_t x = 0; x < k; ++x) {
            auto lam = state.lambda.row(x);
            double log_prior = -log_b_prior;
            double log_var = -dirichlet_log_beta(lam);
            for (std::size_t l = 0; l < f; ++l) {
                const double elp = ex.log_p(x, l);
                log_prior += (gamma_row[l] - 1.0) * elp;
                log_var += (lam[l] - 1.0) * elp;
            }
            dirichlet_terms += log_prior - log_var;
        }
    }

    return link_ll + content_ll + categorical_terms + beta_terms + dirichlet_terms;
}

// Argmax per row; ties break toward the lowest cluster index.
inline std::vector<std::size_t> hard_assignments(const Matrix& memberships) {
    std::vector<std::size_t> out(memberships.rows(), 0);
    for (std::size_t i = 0; i < memberships.rows(); ++i) {
        auto row = memberships.row(i);
        std::size_t best = 0;
        for (std::size_t x = 1; x < row.size(); ++x) {
            if (row[x] > row[best]) best = x;
        }
        out[i] = best;
    }
    return out;
}

// Random restart state: membership rows are a half/half blend of the uniform
// row and a flat-Dirichlet draw, which breaks the uniform saddle without
// starting near a simplex corner. The Beta grid and Dirichlet rows then come
// from one conjugate step.
inline VariationalState init_state(const InteractionMatrix& data, const Corpus& corpus,
                                   const Hyperparams& hp, Rng& rng) {
    const std::size_t k = hp.num_clusters;
    const std::vector<double> ones(k, 1.0);
    auto draw_rows = [&](Matrix& m) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            const auto g = rng.dirichlet(ones);
            auto row = m.row(i);
            double total = 0.0;
            for (std::size_t x = 0; x < k; ++x) {
                row[x] = 0.5 / static_cast<double>(k) + 0.5 * g[x];
                total += row[x];
            }
            for (std::size_t x = 0; x < k; ++x) row[x] /= total;
        }
    };
    VariationalState state;
    state.phi = Matrix(data.num_items(), k);
    state.varphi = Matrix(data.num_users(), k);
    draw_rows(state.phi);
    draw_rows(state.varphi);
    state.q_alpha = Matrix(k, k, hp.alpha);
    state.q_beta = Matrix(k, k, hp.beta);
    state.lambda = Matrix(k, corpus.vocab_size());
    for (std::size_t x = 0; x < k; ++x) {
        for (std::size_t l = 0; l < corpus.vocab_size(); ++l) {
            state.lambda(x, l) = hp.gamma_at(l);
        }
    }
    std::tie(state.q_alpha, state.q_beta) = update_q(state, data, hp);
    state.lambda = update_lambda(state, corpus, hp);
    return state;
}

// Coordinate ascent with restarts. Sweep order phi -> varphi -> Q -> lambda;
// the ELBO is recorded after each full sweep and the best restart by final
// ELBO wins. Fully deterministic given the seed.
inline FitResult fit(const InteractionMatrix& data, const Corpus& corpus,
                     const Hyperparams& hp, const FitConfig& config) {
    const ValidationReport report = validate(data, &corpus, hp);
    if (!report.ok()) {
        throw std::invalid_argument("fit: invalid inputs: " + report.joined_errors());
    }
    if (config.max_sweeps < 1) throw std::invalid_argument("fit: max_sweeps must be at least 1");
    if (!(config.rel_tol > 0.0)) throw std::invalid_argument("fit: rel_tol must be positive");
    if (config.num_restarts < 1) {
        throw std::invalid_argument("fit: num_restarts must be at least 1");
    }

    std::optional<FitResult> best;
    for (std::size_t restart = 0; restart < config.num_restarts; ++restart) {
        Rng rng(derive_seed(config.seed, restart));
        VariationalState state = init_state(data, corpus, hp, rng);
        std::vector<double> trace;
        trace.reserve(config.max_sweeps);
        bool converged = false;
        for (std::size_t sweep = 0; sweep < config.max_sweeps; ++sweep) {
            state.phi = update_phi(state, data, corpus, hp, config.threads);
            state.varphi = update_varphi(state, data, hp, config.threads);
            std::tie(state.q_alpha, state.q_beta) = update_q(state, data, hp);
            state.lambda = update_lambda(state, corpus, hp);
            trace.push_back(elbo(state, data, corpus, hp));
            if (trace.size() >= 2) {
                const double prev = trace[trace.size() - 2];
                const double cur = trace.back();
                const double rel = std::abs(cur - prev) / std::max(std::abs(prev), 1e-12);
                if (rel < config.rel_tol) {
                    converged = true;
                    break;
                }
            }
        }
        FitResult result;
        result.item_assignments = hard_assignments(state.phi);
        result.user_assignments = hard_assignments(state.varphi);
        result.state = std::move(state);
        result.elbo_trace = std::move(trace);
        result.converged = converged;
        result.sweeps_run = result.elbo_trace.size();
        result.seed = config.seed;
        if (!best || result.final_elbo() > best->final_elbo()) {
            best = std::move(result);
        }
    }
    return *best;
}

// Cold-start membership for an unseen item: softmax of the content log score
// alone. The trained Beta grid plays no role because the item has no links.
inline std::vector<double> infer_new_item(std::span<const TermCount> content,
                                          const VariationalState& state,
                                          const Hyperparams& hp) {
    (void)hp;
    const std::size_t k = state.num_clusters();
    const std::size_t f = state.lambda.cols();
    for (const auto& tc : content) {
        if (tc.term >= f) {
            throw std::invalid_argument("infer_new_item: vocabulary size mismatch");
        }
    }
    std::vector<double> scores(k, 0.0);
    if (f > 0) {
        for (std::size_t x = 0; x < k; ++x) {
            const auto elp = expected_log_p(state.lambda.row(x));
            double s = 0.0;
            for (const auto& tc : content) {
                s += static_cast<double>(tc.count) * elp[tc.term];
            }
            scores[x] = s;
        }
    }
    detail::softmax_in_place(scores);
    return scores;
}

}  // namespace casb::vi
