// Command-line front end: fit, generate, select-k, evaluate, gibbs-check.
// Human-readable summaries go to stdout; machine-readable output is JSON.
// Exit codes: 0 success, 1 I/O failure, 2 validation or usage error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "casb/casb.hpp"

namespace {

using nlohmann::json;

struct FitFlags {
    std::string interactions;
    std::string corpus;
    std::string out;
    std::size_t k = 2;
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 0.1;
    std::size_t restarts = 5;
    std::uint64_t seed = 0;
    double tol = 1e-6;
    std::size_t max_sweeps = 500;
    std::size_t threads = 1;
};

json fit_config_echo(const FitFlags& flags, bool use_content) {
    return json{
        {"k", flags.k},
        {"alpha", flags.alpha},
        {"beta", flags.beta},
        {"gamma", flags.gamma},
        {"restarts", flags.restarts},
        {"seed", flags.seed},
        {"tol", flags.tol},
        {"max_sweeps", flags.max_sweeps},
        {"content", use_content},
    };
}

int run_fit(const FitFlags& flags) {
    const auto data = casb::io::read_interactions(flags.interactions);
    const bool use_content = !flags.corpus.empty();
    casb::Corpus corpus = use_content ? casb::io::read_corpus(flags.corpus)
                                      : casb::Corpus::empty(data.num_items(), 0);

    casb::Hyperparams hp;
    hp.num_clusters = flags.k;
    hp.alpha = flags.alpha;
    hp.beta = flags.beta;
    hp.gamma = {flags.gamma};
    hp.use_content = use_content;

    casb::vi::FitConfig config;
    config.max_sweeps = flags.max_sweeps;
    config.rel_tol = flags.tol;
    config.num_restarts = flags.restarts;
    config.seed = flags.seed;
    config.threads = flags.threads;

    const auto result = casb::vi::fit(data, corpus, hp, config);
    casb::io::write_result(result, flags.out, fit_config_echo(flags, use_content));
    std::cout << "final ELBO: " << result.final_elbo() << "\n"
              << "sweeps: " << result.sweeps_run
              << (result.converged ? " (converged)" : " (sweep limit)") << "\n"
              << "result written to " << flags.out << "\n";
    return 0;
}

struct GenerateFlags {
    std::size_t num_items = 100;
    std::size_t num_users = 50;
    std::size_t k = 2;
    std::size_t vocab_size = 20;
    std::size_t words_per_doc = 100;
    double obs_rate = 1.0;
    double q_in = 0.9;
    double q_out = 0.1;
    std::uint64_t seed = 0;
    std::string out_prefix;
};

int run_generate(const GenerateFlags& flags) {
    casb::synth::SynthSpec spec;
    spec.num_items = flags.num_items;
    spec.num_users = flags.num_users;
    spec.num_clusters = flags.k;
    spec.vocab_size = flags.vocab_size;
    spec.words_per_doc_min = spec.words_per_doc_max = flags.words_per_doc;
    spec.observation_rate = flags.obs_rate;
    spec.q_in = flags.q_in;
    spec.q_out = flags.q_out;
    spec.seed = flags.seed;
    const auto dataset = casb::synth::generate(spec);

    const std::string prefix = flags.out_prefix;
    casb::io::write_interactions(dataset.data, prefix + ".interactions.txt");
    casb::io::write_corpus(dataset.corpus, prefix + ".corpus.txt");
    casb::io::write_labels(dataset.true_item_clusters, prefix + ".item-labels.txt");
    casb::io::write_labels(dataset.true_user_communities, prefix + ".user-labels.txt");
    std::cout << "wrote " << prefix << ".interactions.txt (" << dataset.data.num_entries()
              << " observed pairs), " << prefix << ".corpus.txt, " << prefix
              << ".item-labels.txt, " << prefix << ".user-labels.txt\n";
    return 0;
}

struct SelectFlags {
    FitFlags fit;
    std::size_t k_min = 2;
    std::size_t k_max = 8;
    double threshold = 0.05;
};

int run_select_k(const SelectFlags& flags) {
    const auto data = casb::io::read_interactions(flags.fit.interactions);
    const bool use_content = !flags.fit.corpus.empty();
    casb::Corpus corpus = use_content ? casb::io::read_corpus(flags.fit.corpus)
                                      : casb::Corpus::empty(data.num_items(), 0);
    casb::Hyperparams hp;
    hp.alpha = flags.fit.alpha;
    hp.beta = flags.fit.beta;
    hp.gamma = {flags.fit.gamma};
    hp.use_content = use_content;

    casb::vi::FitConfig config;
    config.max_sweeps = flags.fit.max_sweeps;
    config.rel_tol = flags.fit.tol;
    config.num_restarts = flags.fit.restarts;
    config.seed = flags.fit.seed;
    config.threads = flags.fit.threads;

    const auto selection =
        casb::select::select_k(data, corpus, hp, config, flags.k_min, flags.k_max,
                               flags.threshold);

    json table = json::array();
    for (const auto& row : selection.table) {
        json entry{{"k", row.k}, {"elbo", row.elbo}};
        if (std::isnan(row.rel_increase)) {
            entry["rel_increase"] = nullptr;
        } else {
            entry["rel_increase"] = row.rel_increase;
        }
        table.push_back(entry);
    }
    const json out{{"chosen_k", selection.chosen_k},
                   {"threshold", flags.threshold},
                   {"table", table}};
    if (!flags.fit.out.empty()) {
        auto stream = casb::io::detail::open_output(flags.fit.out);
        stream << out.dump(2) << '\n';
    }
    std::cout << "chosen K: " << selection.chosen_k << "\n";
    for (const auto& row : selection.table) {
        std::cout << "  K=" << row.k << "  elbo=" << row.elbo;
        if (!std::isnan(row.rel_increase)) std::cout << "  rel_increase=" << row.rel_increase;
        std::cout << "\n";
    }
    return 0;
}

struct EvaluateFlags {
    std::string result;
    std::string interactions;
    std::string corpus;
    std::string truth;
    std::string authors;
    std::string out;
    std::string csv_out;
    bool word_clouds = false;
    std::size_t min_doc_count = 50;
    std::size_t coread_sample = 3000;
    double coread_threshold = 0.5;
    std::size_t holdout = 0;
    std::string holdout_prefix;
    std::uint64_t seed = 0;
};

// Author file: one "author_token doc_index" pair per line. Authors keep their
// first-appearance order; duplicate pairs collapse.
std::vector<std::vector<std::size_t>> read_author_docs(const std::filesystem::path& path,
                                                       std::size_t num_items) {
    auto in = casb::io::detail::open_input(path);
    std::string raw;
    std::size_t line = 0;
    std::map<std::string, std::size_t> author_index;
    std::vector<std::vector<std::size_t>> docs;
    while (std::getline(in, raw)) {
        ++line;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        const auto first = raw.find_first_not_of(" \t");
        if (first == std::string::npos || raw[first] == '#') continue;
        std::istringstream stream(raw);
        std::string author;
        long long doc = -1;
        if (!(stream >> author >> doc) || doc < 0) {
            throw casb::io::ParseError(line, "expected 'author doc_index'");
        }
        std::string extra;
        if (stream >> extra) throw casb::io::ParseError(line, "unexpected trailing field");
        if (static_cast<std::size_t>(doc) >= num_items) {
            throw casb::io::ParseError(line, "document index out of range");
        }
        auto [it, inserted] = author_index.try_emplace(author, docs.size());
        if (inserted) docs.emplace_back();
        auto& list = docs[it->second];
        if (std::find(list.begin(), list.end(), static_cast<std::size_t>(doc)) == list.end()) {
            list.push_back(static_cast<std::size_t>(doc));
        }
    }
    return docs;
}

int run_evaluate(const EvaluateFlags& flags) {
    const auto result = casb::io::read_result(flags.result);
    const std::size_t k = result.state.num_clusters();
    const auto& assignments = result.item_assignments;

    json report;
    report["k"] = k;
    report["num_items"] = assignments.size();

    std::optional<casb::InteractionMatrix> data;
    if (!flags.interactions.empty()) {
        data = casb::io::read_interactions(flags.interactions);
        if (data->num_items() != assignments.size()) {
            throw std::invalid_argument("evaluate: interactions do not match the result file");
        }
    }

    if (!flags.truth.empty()) {
        const auto truth = casb::io::read_labels(flags.truth);
        if (truth.size() != assignments.size()) {
            throw std::invalid_argument("evaluate: ground-truth label count mismatch");
        }
        report["item_ari"] = casb::synth::ari(assignments, truth);
        if (k == 2) {
            bool binary = true;
            for (std::size_t v : truth) {
                if (v > 1) binary = false;
            }
            if (binary) {
                report["misplaced_papers"] =
                    casb::metrics::misplaced_papers(assignments, truth);
            }
        }
    }

    if (!flags.authors.empty()) {
        const auto author_docs = read_author_docs(flags.authors, assignments.size());
        const auto entropy = casb::metrics::author_entropy(author_docs, assignments, k);
        report["author_entropy"] = {{"mean", entropy.mean},
                                    {"authors_used", entropy.authors.size()}};
    }

    if (data) {
        const auto coread = casb::metrics::coreadership_similarity(
            *data, assignments, flags.coread_threshold, flags.coread_sample, flags.seed);
        report["coreadership"] = {{"pairs_evaluated", coread.pairs_evaluated},
                                  {"pairs_same_cluster", coread.pairs_same_cluster},
                                  {"proportion", coread.proportion},
                                  {"empty", coread.empty}};
    }

    if (flags.word_clouds) {
        if (flags.corpus.empty()) {
            throw std::invalid_argument("evaluate: --word-clouds requires --corpus");
        }
        const auto corpus = casb::io::read_corpus(flags.corpus);
        if (corpus.num_items() != assignments.size()) {
            throw std::invalid_argument("evaluate: corpus does not match the result file");
        }
        const auto clouds = casb::metrics::word_cloud_weights(
            casb::metrics::term_document_sets(corpus), assignments, k, flags.min_doc_count);
        json clouds_json = json::array();
        for (const auto& cloud : clouds) {
            json entries = json::array();
            for (const auto& w : cloud) {
                entries.push_back({{"term", w.term}, {"weight", w.weight}});
            }
            clouds_json.push_back(entries);
        }
        report["word_clouds"] = clouds_json;
    }

    if (flags.holdout > 0) {
        if (!data) throw std::invalid_argument("evaluate: --holdout requires --interactions");
        if (flags.holdout_prefix.empty()) {
            throw std::invalid_argument("evaluate: --holdout requires --holdout-prefix");
        }
        const auto split = casb::metrics::holdout_users(*data, flags.holdout, flags.seed);
        casb::io::write_interactions(split.train, flags.holdout_prefix + ".train.txt");
        report["holdout"] = {{"heldout_users", split.heldout_users},
                             {"train_file", flags.holdout_prefix + ".train.txt"},
                             {"train_users", split.train.num_users()}};
    }

    if (!flags.out.empty()) {
        auto stream = casb::io::detail::open_output(flags.out);
        stream << report.dump(2) << '\n';
    }
    if (!flags.csv_out.empty()) {
        auto stream = casb::io::detail::open_output(flags.csv_out);
        stream << "metric,key,value\n";
        for (const auto& [key, value] : report.items()) {
            if (value.is_object()) {
                for (const auto& [inner, v] : value.items()) {
                    if (v.is_primitive()) {
                        stream << key << ',' << inner << ',' << v.dump() << '\n';
                    }
                }
            } else if (value.is_primitive()) {
                stream << key << ",," << value.dump() << '\n';
            }
        }
    }

    std::cout << report.dump(2) << "\n";
    return 0;
}

struct GibbsFlags {
    std::string interactions;
    std::string corpus;
    std::string out;
    std::size_t k = 2;
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 0.1;
    std::size_t burn_in = 1000;
    std::size_t samples = 2000;
    std::size_t thin = 1;
    std::uint64_t seed = 0;
};

int run_gibbs_check(const GibbsFlags& flags) {
    const auto data = casb::io::read_interactions(flags.interactions);
    const bool use_content = !flags.corpus.empty();
    casb::Corpus corpus = use_content ? casb::io::read_corpus(flags.corpus)
                                      : casb::Corpus::empty(data.num_items(), 0);
    casb::Hyperparams hp;
    hp.num_clusters = flags.k;
    hp.alpha = flags.alpha;
    hp.beta = flags.beta;
    hp.gamma = {flags.gamma};
    hp.use_content = use_content;

    casb::gibbs::GibbsConfig config;
    config.burn_in = flags.burn_in;
    config.samples = flags.samples;
    config.thin = flags.thin;
    config.seed = flags.seed;

    const auto summary = casb::gibbs::run(data, corpus, hp, config);

    auto matrix_json = [](const casb::Matrix& m) {
        json rows = json::array();
        for (std::size_t i = 0; i < m.rows(); ++i) {
            json row = json::array();
            for (double v : m.row(i)) row.push_back(v);
            rows.push_back(row);
        }
        return rows;
    };
    const json out{{"retained", summary.retained},
                   {"item_mode", summary.item_mode},
                   {"user_mode", summary.user_mode},
                   {"item_cooccurrence", matrix_json(summary.item_cooccurrence)},
                   {"user_cooccurrence", matrix_json(summary.user_cooccurrence)}};
    if (!flags.out.empty()) {
        auto stream = casb::io::detail::open_output(flags.out);
        stream << out.dump(2) << '\n';
    }
    std::cout << "retained samples: " << summary.retained << "\n";
    std::cout << "item mode:";
    for (std::size_t v : summary.item_mode) std::cout << ' ' << v;
    std::cout << "\nuser mode:";
    for (std::size_t v : summary.user_mode) std::cout << ' ' << v;
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"content-augmented stochastic blockmodel toolkit"};
    app.require_subcommand(1);

    FitFlags fit_flags;
    auto* fit = app.add_subcommand("fit", "run variational inference and write a result file");
    fit->add_option("--interactions", fit_flags.interactions, "interaction file")->required();
    fit->add_option("--corpus", fit_flags.corpus,
                    "corpus file; omit to disable the content term");
    fit->add_option("--k", fit_flags.k, "number of clusters/communities")->required();
    fit->add_option("--alpha", fit_flags.alpha, "Beta prior alpha");
    fit->add_option("--beta", fit_flags.beta, "Beta prior beta");
    fit->add_option("--gamma", fit_flags.gamma, "symmetric Dirichlet prior");
    fit->add_option("--restarts", fit_flags.restarts, "number of restarts");
    fit->add_option("--seed", fit_flags.seed, "random seed");
    fit->add_option("--tol", fit_flags.tol, "relative ELBO stopping tolerance");
    fit->add_option("--max-sweeps", fit_flags.max_sweeps, "sweep limit");
    fit->add_option("--threads", fit_flags.threads, "worker parallelism cap");
    fit->add_option("--out", fit_flags.out, "result file (JSON)")->required();

    GenerateFlags gen_flags;
    auto* gen = app.add_subcommand("generate", "sample a synthetic dataset with ground truth");
    gen->add_option("--num-items", gen_flags.num_items, "number of items");
    gen->add_option("--num-users", gen_flags.num_users, "number of users");
    gen->add_option("--k", gen_flags.k, "number of planted clusters");
    gen->add_option("--vocab-size", gen_flags.vocab_size, "vocabulary size");
    gen->add_option("--words-per-doc", gen_flags.words_per_doc, "tokens per document");
    gen->add_option("--obs-rate", gen_flags.obs_rate, "probability a pair is observed");
    gen->add_option("--q-in", gen_flags.q_in, "within-block positive probability");
    gen->add_option("--q-out", gen_flags.q_out, "cross-block positive probability");
    gen->add_option("--seed", gen_flags.seed, "random seed");
    gen->add_option("--out-prefix", gen_flags.out_prefix, "output file prefix")->required();

    SelectFlags sel_flags;
    auto* sel = app.add_subcommand("select-k", "sweep K and apply the 5% ELBO rule");
    sel->add_option("--interactions", sel_flags.fit.interactions, "interaction file")
        ->required();
    sel->add_option("--corpus", sel_flags.fit.corpus, "corpus file");
    sel->add_option("--k-min", sel_flags.k_min, "smallest K");
    sel->add_option("--k-max", sel_flags.k_max, "largest K");
    sel->add_option("--threshold", sel_flags.threshold, "relative increase threshold");
    sel->add_option("--alpha", sel_flags.fit.alpha, "Beta prior alpha");
    sel->add_option("--beta", sel_flags.fit.beta, "Beta prior beta");
    sel->add_option("--gamma", sel_flags.fit.gamma, "symmetric Dirichlet prior");
    sel->add_option("--restarts", sel_flags.fit.restarts, "number of restarts per K");
    sel->add_option("--seed", sel_flags.fit.seed, "random seed");
    sel->add_option("--tol", sel_flags.fit.tol, "relative ELBO stopping tolerance");
    sel->add_option("--max-sweeps", sel_flags.fit.max_sweeps, "sweep limit");
    sel->add_option("--threads", sel_flags.fit.threads, "worker parallelism cap");
    sel->add_option("--out", sel_flags.fit.out, "table file (JSON)");

    EvaluateFlags eval_flags;
    auto* eval = app.add_subcommand("evaluate", "compute cluster-quality metrics");
    eval->add_option("--result", eval_flags.result, "result file from fit")->required();
    eval->add_option("--interactions", eval_flags.interactions, "interaction file");
    eval->add_option("--corpus", eval_flags.corpus, "corpus file");
    eval->add_option("--truth", eval_flags.truth, "ground-truth labels file");
    eval->add_option("--authors", eval_flags.authors, "author-document pairs file");
    eval->add_flag("--word-clouds", eval_flags.word_clouds, "emit word-cloud weights");
    eval->add_option("--min-doc-count", eval_flags.min_doc_count,
                     "word-cloud document-count cutoff");
    eval->add_option("--coread-sample", eval_flags.coread_sample,
                     "documents sampled for coreadership");
    eval->add_option("--coread-threshold", eval_flags.coread_threshold,
                     "Jaccard similarity threshold");
    eval->add_option("--holdout", eval_flags.holdout, "number of users to hold out");
    eval->add_option("--holdout-prefix", eval_flags.holdout_prefix,
                     "prefix for the holdout training file");
    eval->add_option("--seed", eval_flags.seed, "random seed for sampled metrics");
    eval->add_option("--out", eval_flags.out, "report file (JSON)");
    eval->add_option("--csv-out", eval_flags.csv_out, "flat report file (CSV)");

    GibbsFlags gibbs_flags;
    auto* gibbs = app.add_subcommand("gibbs-check", "run the Gibbs sampling oracle");
    gibbs->add_option("--interactions", gibbs_flags.interactions, "interaction file")
        ->required();
    gibbs->add_option("--corpus", gibbs_flags.corpus, "corpus file");
    gibbs->add_option("--k", gibbs_flags.k, "number of clusters/communities")->required();
    gibbs->add_option("--alpha", gibbs_flags.alpha, "Beta prior alpha");
    gibbs->add_option("--beta", gibbs_flags.beta, "Beta prior beta");
    gibbs->add_option("--gamma", gibbs_flags.gamma, "symmetric Dirichlet prior");
    gibbs->add_option("--burn-in", gibbs_flags.burn_in, "burn-in sweeps");
    gibbs->add_option("--samples", gibbs_flags.samples, "retained samples");
    gibbs->add_option("--thin", gibbs_flags.thin, "sweeps per retained sample");
    gibbs->add_option("--seed", gibbs_flags.seed, "random seed");
    gibbs->add_option("--out", gibbs_flags.out, "summary file (JSON)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (fit->parsed()) return run_fit(fit_flags);
        if (gen->parsed()) return run_generate(gen_flags);
        if (sel->parsed()) return run_select_k(sel_flags);
        if (eval->parsed()) return run_evaluate(eval_flags);
        if (gibbs->parsed()) return run_gibbs_check(gibbs_flags);
    } catch (const casb::io::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const casb::io::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const casb::io::FileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
