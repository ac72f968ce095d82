#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "casb/matrix.hpp"

namespace casb {

// One observed user-item response. Pairs that were never shown carry no
// likelihood term and are simply absent from the entry list.
struct LinkObservation {
    std::size_t item = 0;
    std::size_t user = 0;
    std::uint8_t response = 0;  // 0 or 1

    friend bool operator==(const LinkObservation&, const LinkObservation&) = default;
};

// Sparse ternary interaction matrix over items x users. Immutable after
// construction; keeps both an item-major and a user-major ordering so the
// inference sweeps can group entries either way.
class InteractionMatrix {
public:
    InteractionMatrix(std::size_t num_items, std::size_t num_users,
                      std::vector<LinkObservation> entries)
        : num_items_(num_items), num_users_(num_users), by_item_(std::move(entries)) {
        for (const auto& e : by_item_) {
            if (e.item >= num_items_ || e.user >= num_users_) {
                throw std::invalid_argument("InteractionMatrix: entry index out of range");
            }
            if (e.response > 1) {
                throw std::invalid_argument("InteractionMatrix: response must be 0 or 1");
            }
        }
        std::sort(by_item_.begin(), by_item_.end(), [](const auto& a, const auto& b) {
            return a.item != b.item ? a.item < b.item : a.user < b.user;
        });
        for (std::size_t n = 1; n < by_item_.size(); ++n) {
            if (by_item_[n].item == by_item_[n - 1].item &&
                by_item_[n].user == by_item_[n - 1].user) {
                std::ostringstream msg;
                msg << "InteractionMatrix: duplicate pair (" << by_item_[n].item << ", "
                    << by_item_[n].user << ")";
                throw std::invalid_argument(msg.str());
            }
        }
        by_user_ = by_item_;
        std::sort(by_user_.begin(), by_user_.end(), [](const auto& a, const auto& b) {
            return a.user != b.user ? a.user < b.user : a.item < b.item;
        });
        item_offsets_.assign(num_items_ + 1, 0);
        for (const auto& e : by_item_) ++item_offsets_[e.item + 1];
        for (std::size_t i = 0; i < num_items_; ++i) item_offsets_[i + 1] += item_offsets_[i];
        user_offsets_.assign(num_users_ + 1, 0);
        for (const auto& e : by_user_) ++user_offsets_[e.user + 1];
        for (std::size_t j = 0; j < num_users_; ++j) user_offsets_[j + 1] += user_offsets_[j];
    }

    std::size_t num_items() const noexcept { return num_items_; }
    std::size_t num_users() const noexcept { return num_users_; }
    std::size_t num_entries() const noexcept { return by_item_.size(); }

    // All observed pairs, sorted by (item, user).
    std::span<const LinkObservation> entries() const noexcept { return by_item_; }

    std::span<const LinkObservation> item_row(std::size_t item) const {
        return {by_item_.data() + item_offsets_[item],
                item_offsets_[item + 1] - item_offsets_[item]};
    }

    std::span<const LinkObservation> user_column(std::size_t user) const {
        return {by_user_.data() + user_offsets_[user],
                user_offsets_[user + 1] - user_offsets_[user]};
    }

    friend bool operator==(const InteractionMatrix& a, const InteractionMatrix& b) {
        return a.num_items_ == b.num_items_ && a.num_users_ == b.num_users_ &&
               a.by_item_ == b.by_item_;
    }

private:
    std::size_t num_items_;
    std::size_t num_users_;
    std::vector<LinkObservation> by_item_;
    std::vector<LinkObservation> by_user_;
    std::vector<std::size_t> item_offsets_;
    std::vector<std::size_t> user_offsets_;
};

struct TermCount {
    std::size_t term = 0;
    std::size_t count = 0;  // strictly positive when stored

    friend bool operator==(const TermCount&, const TermCount&) = default;
};

// Sparse nonnegative feature counts, one row per item.
class Corpus {
public:
    Corpus(std::size_t num_items, std::size_t vocab_size,
           std::vector<std::vector<TermCount>> rows)
        : num_items_(num_items), vocab_size_(vocab_size), rows_(std::move(rows)) {
        if (rows_.size() != num_items_) {
            throw std::invalid_argument("Corpus: row count must equal num_items");
        }
        row_totals_.assign(num_items_, 0);
        for (std::size_t i = 0; i < num_items_; ++i) {
            auto& row = rows_[i];
            std::sort(row.begin(), row.end(),
                      [](const auto& a, const auto& b) { return a.term < b.term; });
            for (std::size_t n = 0; n < row.size(); ++n) {
                if (row[n].term >= vocab_size_) {
                    throw std::invalid_argument("Corpus: term index out of range");
                }
                if (row[n].count == 0) {
                    throw std::invalid_argument("Corpus: stored counts must be positive");
                }
                if (n > 0 && row[n].term == row[n - 1].term) {
                    throw std::invalid_argument("Corpus: duplicate term in row");
                }
                row_totals_[i] += row[n].count;
            }
        }
    }

    static Corpus empty(std::size_t num_items, std::size_t vocab_size) {
        return Corpus(num_items, vocab_size, std::vector<std::vector<TermCount>>(num_items));
    }

    std::size_t num_items() const noexcept { return num_items_; }
    std::size_t vocab_size() const noexcept { return vocab_size_; }

    std::span<const TermCount> row(std::size_t item) const { return rows_[item]; }
    std::size_t row_total(std::size_t item) const { return row_totals_[item]; }  // N_i

    std::size_t total_tokens() const {
        std::size_t t = 0;
        for (auto n : row_totals_) t += n;
        return t;
    }

    friend bool operator==(const Corpus& a, const Corpus& b) {
        return a.num_items_ == b.num_items_ && a.vocab_size_ == b.vocab_size_ &&
               a.rows_ == b.rows_;
    }

private:
    std::size_t num_items_;
    std::size_t vocab_size_;
    std::vector<std::vector<TermCount>> rows_;
    std::vector<std::size_t> row_totals_;
};

// Model hyperparameters. gamma of length one broadcasts over the vocabulary.
struct Hyperparams {
    std::size_t num_clusters = 2;  // K, shared by items and users
    double alpha = 1.0;            // Beta prior on interest probabilities
    double beta = 1.0;
    std::vector<double> gamma{0.1};  // Dirichlet prior on content distributions
    bool use_content = true;

    double gamma_at(std::size_t term) const {
        return gamma.size() == 1 ? gamma.front() : gamma[term];
    }
};

// Mean-field state: every factor's free parameters.
struct VariationalState {
    Matrix phi;      // D x K item memberships, rows on the simplex
    Matrix varphi;   // U x K user memberships
    Matrix q_alpha;  // K x K Beta parameters
    Matrix q_beta;   // K x K
    Matrix lambda;   // K x F Dirichlet parameters

    std::size_t num_clusters() const noexcept { return q_alpha.rows(); }

    // Throws std::invalid_argument on any violated invariant.
    void check(std::size_t num_items, std::size_t num_users, std::size_t vocab_size) const {
        const std::size_t k = num_clusters();
        if (k == 0) throw std::invalid_argument("VariationalState: K must be at least 1");
        if (phi.rows() != num_items || phi.cols() != k) {
            throw std::invalid_argument("VariationalState: phi has wrong shape");
        }
        if (varphi.rows() != num_users || varphi.cols() != k) {
            throw std::invalid_argument("VariationalState: varphi has wrong shape");
        }
        if (q_alpha.rows() != k || q_alpha.cols() != k || q_beta.rows() != k ||
            q_beta.cols() != k) {
            throw std::invalid_argument("VariationalState: Beta parameter grids have wrong shape");
        }
        if (lambda.rows() != k || lambda.cols() != vocab_size) {
            throw std::invalid_argument("VariationalState: lambda has wrong shape");
        }
        auto check_stochastic = [](const Matrix& m, const char* name) {
            for (std::size_t i = 0; i < m.rows(); ++i) {
                double sum = 0.0;
                for (double v : m.row(i)) {
                    if (!(v >= 0.0)) {
                        throw std::invalid_argument(std::string("VariationalState: ") + name +
                                                    " has a negative entry");
                    }
                    sum += v;
                }
                if (std::abs(sum - 1.0) > 1e-12) {
                    throw std::invalid_argument(std::string("VariationalState: ") + name +
                                                " row does not sum to one");
                }
            }
        };
        check_stochastic(phi, "phi");
        check_stochastic(varphi, "varphi");
        auto check_positive = [](const Matrix& m, const char* name) {
            for (double v : m.values()) {
                if (!(v > 0.0)) {
                    throw std::invalid_argument(std::string("VariationalState: ") + name +
                                                " must be strictly positive");
                }
            }
        };
        check_positive(q_alpha, "q_alpha");
        check_positive(q_beta, "q_beta");
        check_positive(lambda, "lambda");
    }

    friend bool operator==(const VariationalState&, const VariationalState&) = default;
};

struct FitResult {
    VariationalState state;
    std::vector<std::size_t> item_assignments;
    std::vector<std::size_t> user_assignments;
    std::vector<double> elbo_trace;  // one entry per completed sweep
    bool converged = false;
    std::size_t sweeps_run = 0;
    std::uint64_t seed = 0;

    double final_elbo() const { return elbo_trace.empty() ? 0.0 : elbo_trace.back(); }

    friend bool operator==(const FitResult&, const FitResult&) = default;
};

enum class Severity { error, warning };

struct ValidationIssue {
    Severity severity = Severity::error;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const {
        return std::none_of(issues.begin(), issues.end(),
                            [](const auto& i) { return i.severity == Severity::error; });
    }
    bool empty() const { return issues.empty(); }

    std::vector<std::string> errors() const {
        std::vector<std::string> out;
        for (const auto& i : issues)
            if (i.severity == Severity::error) out.push_back(i.message);
        return out;
    }
    std::vector<std::string> warnings() const {
        std::vector<std::string> out;
        for (const auto& i : issues)
            if (i.severity == Severity::warning) out.push_back(i.message);
        return out;
    }

    std::string joined_errors() const {
        std::string out;
        for (const auto& i : issues) {
            if (i.severity != Severity::error) continue;
            if (!out.empty()) out += "; ";
            out += i.message;
        }
        return out;
    }
};

// Cross-checks a dataset against its hyperparameters. Degenerate items
// (no links, no words) are legal and only produce warnings: an item with no
// links is still placed through its content, and vice versa; with neither it
// keeps the uniform prior posterior.
inline ValidationReport validate(const InteractionMatrix& data, const Corpus* corpus,
                                 const Hyperparams& hp) {
    ValidationReport report;
    auto error = [&](std::string msg) {
        report.issues.push_back({Severity::error, std::move(msg)});
    };
    auto warning = [&](std::string msg) {
        report.issues.push_back({Severity::warning, std::move(msg)});
    };

    if (corpus != nullptr && corpus->num_items() != data.num_items()) {
        std::ostringstream msg;
        msg << "dimension mismatch: corpus has " << corpus->num_items()
            << " items, interactions have " << data.num_items();
        error(msg.str());
    }
    if (hp.num_clusters < 1) error("K must be at least 1");
    if (!(hp.alpha > 0.0)) error("alpha must be positive");
    if (!(hp.beta > 0.0)) error("beta must be positive");
    if (hp.gamma.empty()) {
        error("gamma must be nonempty");
    } else {
        for (double g : hp.gamma) {
            if (!(g > 0.0)) {
                error("gamma entries must be positive");
                break;
            }
        }
        if (corpus != nullptr && hp.gamma.size() != 1 &&
            hp.gamma.size() != corpus->vocab_size()) {
            std::ostringstream msg;
            msg << "dimension mismatch: gamma has " << hp.gamma.size()
                << " entries, vocabulary has " << corpus->vocab_size();
            error(msg.str());
        }
    }

    // Index bounds are construction-time invariants; re-assert them here so a
    // report from validate() is a complete statement about the inputs.
    for (const auto& e : data.entries()) {
        if (e.item >= data.num_items() || e.user >= data.num_users() || e.response > 1) {
            error("interaction entry out of range");
            break;
        }
    }
    if (corpus != nullptr) {
        for (std::size_t i = 0; i < corpus->num_items(); ++i) {
            for (const auto& tc : corpus->row(i)) {
                if (tc.term >= corpus->vocab_size() || tc.count == 0) {
                    error("corpus entry out of range");
                    i = corpus->num_items();
                    break;
                }
            }
        }
    }

    for (std::size_t i = 0; i < data.num_items(); ++i) {
        const bool no_links = data.item_row(i).empty();
        const bool no_words =
            corpus == nullptr || i >= corpus->num_items() || corpus->row(i).empty();
        if (no_links) {
            std::ostringstream msg;
            msg << "item " << i << " has no observed links";
            warning(msg.str());
        }
        if (corpus != nullptr && i < corpus->num_items() && no_words) {
            std::ostringstream msg;
            msg << "item " << i << " has empty content";
            warning(msg.str());
        }
    }
    return report;
}

}  // namespace casb
