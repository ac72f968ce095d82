#include <doctest.h>

#include <cmath>
#include <vector>

#include "casb/gibbs.hpp"
#include "casb/synth.hpp"
#include "casb/vi.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using casb::Corpus;
using casb::Hyperparams;
using casb::InteractionMatrix;
namespace gibbs = casb::gibbs;

TEST_CASE("K = 1 leaves assignments unchanged") {
    const auto inst = test_support::random_instance(12);
    Hyperparams hp = inst.hp;
    hp.num_clusters = 1;
    casb::Rng rng(3);
    auto state = gibbs::init_state(inst.data, inst.corpus, hp, rng);
    const auto z = state.item_clusters;
    const auto w = state.user_communities;
    for (int s = 0; s < 20; ++s) gibbs::sweep(state, inst.data, inst.corpus, hp, rng);
    CHECK(state.item_clusters == z);
    CHECK(state.user_communities == w);
}

TEST_CASE("with no data the Beta grid samples from its prior") {
    InteractionMatrix data(2, 2, {});
    Corpus corpus = Corpus::empty(2, 2);
    Hyperparams hp;
    hp.num_clusters = 2;
    hp.alpha = 2.0;
    hp.beta = 5.0;
    casb::Rng rng(17);
    auto state = gibbs::init_state(data, corpus, hp, rng);
    const int n = 4000;
    double sum = 0.0;
    for (int s = 0; s < n; ++s) {
        gibbs::sweep(state, data, corpus, hp, rng);
        sum += state.q(0, 0);
    }
    const double mean = sum / n;
    const double expect = 2.0 / 7.0;
    const double variance = 2.0 * 5.0 / (7.0 * 7.0 * 8.0);
    const double se = std::sqrt(variance / n);
    CHECK(std::abs(mean - expect) < 3.0 * se);
}

TEST_CASE("with no data the Dirichlet rows sample from their prior") {
    InteractionMatrix data(2, 1, {});
    Corpus corpus = Corpus::empty(2, 3);
    Hyperparams hp;
    hp.num_clusters = 2;
    hp.gamma = {1.0, 2.0, 3.0};
    casb::Rng rng(23);
    auto state = gibbs::init_state(data, corpus, hp, rng);
    const int n = 4000;
    std::vector<double> mean(3, 0.0);
    for (int s = 0; s < n; ++s) {
        gibbs::sweep(state, data, corpus, hp, rng);
        for (std::size_t l = 0; l < 3; ++l) mean[l] += state.p(0, l);
    }
    for (std::size_t l = 0; l < 3; ++l) mean[l] /= n;
    CHECK(mean[0] == doctest::Approx(1.0 / 6.0).epsilon(0.06));
    CHECK(mean[1] == doctest::Approx(2.0 / 6.0).epsilon(0.06));
    CHECK(mean[2] == doctest::Approx(3.0 / 6.0).epsilon(0.06));
}

TEST_CASE("a single retained sample gives a 0/1 cooccurrence matrix") {
    const auto inst = test_support::random_instance(31);
    gibbs::GibbsConfig config;
    config.burn_in = 0;
    config.samples = 1;
    const auto summary = gibbs::run(inst.data, inst.corpus, inst.hp, config);
    for (double v : summary.item_cooccurrence.values()) CHECK((v == 0.0 || v == 1.0));
    for (std::size_t i = 0; i < summary.item_cooccurrence.rows(); ++i) {
        CHECK(summary.item_cooccurrence(i, i) == 1.0);
    }
}

TEST_CASE("Gibbs cooccurrence matches the exhaustively enumerated posterior") {
    // Small enough to enumerate quickly in unit tests; the acceptance suite
    // runs the full-size check.
    casb::synth::SynthSpec spec;
    spec.num_items = 3;
    spec.num_users = 2;
    spec.num_clusters = 2;
    spec.vocab_size = 2;
    spec.words_per_doc_min = spec.words_per_doc_max = 4;
    spec.q_in = 0.8;
    spec.q_out = 0.3;
    spec.seed = 41;
    const auto dataset = casb::synth::generate(spec);
    Hyperparams hp;
    hp.num_clusters = 2;

    const auto exact = oracle::enumerate_posterior(dataset.data, dataset.corpus, hp);
    gibbs::GibbsConfig config;
    config.burn_in = 500;
    config.samples = 12000;
    config.seed = 5;
    const auto summary = gibbs::run(dataset.data, dataset.corpus, hp, config);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t i2 = 0; i2 < 3; ++i2) {
            CHECK(std::abs(summary.item_cooccurrence(i, i2) -
                           static_cast<double>(exact.item_cooccurrence[i][i2])) < 0.05);
        }
    }
    for (std::size_t j = 0; j < 2; ++j) {
        for (std::size_t j2 = 0; j2 < 2; ++j2) {
            CHECK(std::abs(summary.user_cooccurrence(j, j2) -
                           static_cast<double>(exact.user_cooccurrence[j][j2])) < 0.05);
        }
    }
}

TEST_CASE("two chains agree on a well-separated instance") {
    casb::synth::SynthSpec spec;
    spec.num_items = 10;
    spec.num_users = 6;
    spec.num_clusters = 2;
    spec.vocab_size = 4;
    spec.words_per_doc_min = spec.words_per_doc_max = 25;
    spec.q_in = 0.95;
    spec.q_out = 0.05;
    spec.seed = 8;
    const auto dataset = casb::synth::generate(spec);
    Hyperparams hp;
    hp.num_clusters = 2;
    gibbs::GibbsConfig config;
    config.burn_in = 500;
    config.samples = 4000;
    config.seed = 100;
    const auto a = gibbs::run(dataset.data, dataset.corpus, hp, config);
    config.seed = 200;
    const auto b = gibbs::run(dataset.data, dataset.corpus, hp, config);
    for (std::size_t i = 0; i < a.item_cooccurrence.rows(); ++i) {
        for (std::size_t i2 = 0; i2 < a.item_cooccurrence.cols(); ++i2) {
            CHECK(std::abs(a.item_cooccurrence(i, i2) - b.item_cooccurrence(i, i2)) < 0.05);
        }
    }
}

TEST_CASE("mode assignments recover a planted instance up to permutation") {
    casb::synth::SynthSpec spec;
    spec.num_items = 12;
    spec.num_users = 8;
    spec.num_clusters = 2;
    spec.vocab_size = 6;
    spec.words_per_doc_min = spec.words_per_doc_max = 30;
    spec.q_in = 0.9;
    spec.q_out = 0.05;
    spec.seed = 21;
    const auto dataset = casb::synth::generate(spec);
    Hyperparams hp;
    hp.num_clusters = 2;
    gibbs::GibbsConfig config;
    config.burn_in = 1000;
    config.samples = 3000;
    config.seed = 9;
    const auto summary = gibbs::run(dataset.data, dataset.corpus, hp, config);
    CHECK(oracle::best_permutation_agreement(summary.item_mode, dataset.true_item_clusters,
                                             2) == 1.0);
    CHECK(oracle::best_permutation_agreement(summary.user_mode,
                                             dataset.true_user_communities, 2) == 1.0);
}

TEST_CASE("VI and Gibbs agree on a well-separated instance") {
    casb::synth::SynthSpec spec;
    spec.num_items = 12;
    spec.num_users = 8;
    spec.num_clusters = 2;
    spec.vocab_size = 6;
    spec.words_per_doc_min = spec.words_per_doc_max = 30;
    spec.q_in = 0.9;
    spec.q_out = 0.05;
    spec.seed = 33;
    const auto dataset = casb::synth::generate(spec);
    Hyperparams hp;
    hp.num_clusters = 2;

    casb::vi::FitConfig fit_config;
    fit_config.num_restarts = 5;
    const auto fit = casb::vi::fit(dataset.data, dataset.corpus, hp, fit_config);

    gibbs::GibbsConfig gibbs_config;
    gibbs_config.burn_in = 1000;
    gibbs_config.samples = 3000;
    gibbs_config.seed = 4;
    const auto summary = gibbs::run(dataset.data, dataset.corpus, hp, gibbs_config);

    CHECK(oracle::best_permutation_agreement(fit.item_assignments, summary.item_mode, 2) ==
          1.0);
    CHECK(oracle::best_permutation_agreement(fit.user_assignments, summary.user_mode, 2) ==
          1.0);
}

TEST_CASE("run validates its configuration") {
    const auto inst = test_support::random_instance(3);
    gibbs::GibbsConfig config;
    config.samples = 0;
    CHECK_THROWS_AS(gibbs::run(inst.data, inst.corpus, inst.hp, config), std::invalid_argument);
    config.samples = 1;
    config.thin = 0;
    CHECK_THROWS_AS(gibbs::run(inst.data, inst.corpus, inst.hp, config), std::invalid_argument);
}
