#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "casb/matrix.hpp"
#include "casb/types.hpp"

// Plain-text sparse formats for interactions, corpora and labels, and a
// JSON result format. All integers are zero-indexed; '#'-prefixed lines are
// comments; LF and CRLF both parse. Writers are deterministic so identical
// inputs produce identical bytes.
namespace casb::io {

struct ParseError : std::runtime_error {
    std::size_t line;
    ParseError(std::size_t line_number, const std::string& message)
        : std::runtime_error("line " + std::to_string(line_number) + ": " + message),
          line(line_number) {}
};

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& message) : std::runtime_error(message) {}
};

struct FileError : std::runtime_error {
    explicit FileError(const std::string& message) : std::runtime_error(message) {}
};

namespace detail {

// Yields (line_number, content) pairs with comments and blank lines skipped
// and trailing CR stripped.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& out, std::size_t& line_number) {
        std::string raw;
        while (std::getline(in_, raw)) {
            ++line_;
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
            const auto first = raw.find_first_not_of(" \t");
            if (first == std::string::npos) continue;
            if (raw[first] == '#') continue;
            out = raw;
            line_number = line_;
            return true;
        }
        return false;
    }

private:
    std::istream& in_;
    std::size_t line_ = 0;
};

inline std::vector<std::uint64_t> parse_fields(const std::string& text, std::size_t expected,
                                               std::size_t line, const char* what) {
    std::istringstream stream(text);
    std::vector<std::uint64_t> out;
    std::string token;
    while (stream >> token) {
        try {
            std::size_t consumed = 0;
            if (!token.empty() && (token[0] == '-' || token[0] == '+')) {
                throw std::invalid_argument("sign");
            }
            const unsigned long long value = std::stoull(token, &consumed);
            if (consumed != token.size()) throw std::invalid_argument("trailing");
            out.push_back(value);
        } catch (const std::exception&) {
            throw ParseError(line, std::string(what) + ": expected a nonnegative integer, got '" +
                                       token + "'");
        }
    }
    if (out.size() != expected) {
        throw ParseError(line, std::string(what) + ": expected " + std::to_string(expected) +
                                   " fields, got " + std::to_string(out.size()));
    }
    return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string() + " for reading");
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
    if (!out) throw FileError("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace detail

// Format: header "D U", then one "item user response" line per observed pair.
inline InteractionMatrix read_interactions(std::istream& in) {
    detail::LineReader reader(in);
    std::string text;
    std::size_t line = 0;
    if (!reader.next(text, line)) throw ParseError(1, "missing 'D U' header");
    const auto header = detail::parse_fields(text, 2, line, "header");
    const std::size_t d = header[0];
    const std::size_t u = header[1];

    std::vector<LinkObservation> entries;
    std::unordered_set<std::uint64_t> seen;
    while (reader.next(text, line)) {
        const auto fields = detail::parse_fields(text, 3, line, "entry");
        if (fields[0] >= d) throw ParseError(line, "item index out of range");
        if (fields[1] >= u) throw ParseError(line, "user index out of range");
        if (fields[2] > 1) throw ParseError(line, "response must be 0 or 1");
        const std::uint64_t key = fields[0] * static_cast<std::uint64_t>(u) + fields[1];
        if (!seen.insert(key).second) {
            throw ParseError(line, "duplicate pair (" + std::to_string(fields[0]) + ", " +
                                       std::to_string(fields[1]) + ")");
        }
        entries.push_back({static_cast<std::size_t>(fields[0]),
                           static_cast<std::size_t>(fields[1]),
                           static_cast<std::uint8_t>(fields[2])});
    }
    return InteractionMatrix(d, u, std::move(entries));
}

inline InteractionMatrix read_interactions(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_interactions(in);
}

inline void write_interactions(const InteractionMatrix& data, std::ostream& out) {
    out << data.num_items() << ' ' << data.num_users() << '\n';
    for (const auto& e : data.entries()) {
        out << e.item << ' ' << e.user << ' ' << static_cast<unsigned>(e.response) << '\n';
    }
}

inline void write_interactions(const InteractionMatrix& data,
                               const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_interactions(data, out);
}

// Format: header "D F NNZ", then one "doc term count" line per nonzero, with
// counts strictly positive and NNZ matching the body exactly.
inline Corpus read_corpus(std::istream& in) {
    detail::LineReader reader(in);
    std::string text;
    std::size_t line = 0;
    if (!reader.next(text, line)) throw ParseError(1, "missing 'D F NNZ' header");
    const auto header = detail::parse_fields(text, 3, line, "header");
    const std::size_t d = header[0];
    const std::size_t f = header[1];
    const std::size_t nnz = header[2];

    std::vector<std::vector<TermCount>> rows(d);
    std::unordered_set<std::uint64_t> seen;
    std::size_t body = 0;
    std::size_t last_line = line;
    while (reader.next(text, line)) {
        last_line = line;
        const auto fields = detail::parse_fields(text, 3, line, "entry");
        if (fields[0] >= d) throw ParseError(line, "document index out of range");
        if (fields[1] >= f) throw ParseError(line, "term index out of range");
        if (fields[2] == 0) throw ParseError(line, "counts must be positive");
        const std::uint64_t key = fields[0] * static_cast<std::uint64_t>(f) + fields[1];
        if (!seen.insert(key).second) {
            throw ParseError(line, "duplicate (document, term) pair");
        }
        ++body;
        if (body > nnz) throw ParseError(line, "more entries than the NNZ header declares");
        rows[fields[0]].push_back(
            {static_cast<std::size_t>(fields[1]), static_cast<std::size_t>(fields[2])});
    }
    if (body != nnz) {
        throw ParseError(last_line, "NNZ mismatch: header declares " + std::to_string(nnz) +
                                        ", body has " + std::to_string(body));
    }
    return Corpus(d, f, std::move(rows));
}

inline Corpus read_corpus(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_corpus(in);
}

inline void write_corpus(const Corpus& corpus, std::ostream& out) {
    std::size_t nnz = 0;
    for (std::size_t i = 0; i < corpus.num_items(); ++i) nnz += corpus.row(i).size();
    out << corpus.num_items() << ' ' << corpus.vocab_size() << ' ' << nnz << '\n';
    for (std::size_t i = 0; i < corpus.num_items(); ++i) {
        for (const auto& tc : corpus.row(i)) {
            out << i << ' ' << tc.term << ' ' << tc.count << '\n';
        }
    }
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_corpus(corpus, out);
}

// One nonnegative integer label per line.
inline std::vector<std::size_t> read_labels(std::istream& in) {
    detail::LineReader reader(in);
    std::string text;
    std::size_t line = 0;
    std::vector<std::size_t> labels;
    while (reader.next(text, line)) {
        const auto fields = detail::parse_fields(text, 1, line, "label");
        labels.push_back(fields[0]);
    }
    return labels;
}

inline std::vector<std::size_t> read_labels(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_labels(in);
}

inline void write_labels(std::span<const std::size_t> labels, std::ostream& out) {
    for (std::size_t v : labels) out << v << '\n';
}

inline void write_labels(std::span<const std::size_t> labels,
                         const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_labels(labels, out);
}

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (double v : m.row(i)) row.push_back(v);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t expected_rows,
                               std::size_t expected_cols, const char* name) {
    if (!j.is_array() || j.size() != expected_rows) {
        throw SchemaError(std::string("result: ") + name + " has wrong row count");
    }
    Matrix m(expected_rows, expected_cols);
    for (std::size_t i = 0; i < expected_rows; ++i) {
        const auto& row = j[i];
        if (!row.is_array() || row.size() != expected_cols) {
            throw SchemaError(std::string("result: ") + name + " has a wrong-length row");
        }
        for (std::size_t c = 0; c < expected_cols; ++c) {
            if (!row[c].is_number()) {
                throw SchemaError(std::string("result: ") + name + " holds a non-number");
            }
            m(i, c) = row[c].get<double>();
        }
    }
    return m;
}

}  // namespace detail

inline constexpr int kResultSchemaVersion = 1;

// JSON result file: assignments, all variational parameter matrices, the
// ELBO trace, the seed and an optional config echo. Doubles are serialized
// with their shortest round-trip representation, so read(write(x)) == x.
inline void write_result(const FitResult& result, std::ostream& out,
                         const nlohmann::json& config_echo = nlohmann::json::object()) {
    nlohmann::json j;
    j["schema_version"] = kResultSchemaVersion;
    j["num_items"] = result.state.phi.rows();
    j["num_users"] = result.state.varphi.rows();
    j["num_clusters"] = result.state.num_clusters();
    j["vocab_size"] = result.state.lambda.cols();
    j["seed"] = result.seed;
    j["converged"] = result.converged;
    j["sweeps_run"] = result.sweeps_run;
    j["elbo_trace"] = result.elbo_trace;
    j["item_assignments"] = result.item_assignments;
    j["user_assignments"] = result.user_assignments;
    j["state"] = {
        {"phi", detail::matrix_to_json(result.state.phi)},
        {"varphi", detail::matrix_to_json(result.state.varphi)},
        {"q_alpha", detail::matrix_to_json(result.state.q_alpha)},
        {"q_beta", detail::matrix_to_json(result.state.q_beta)},
        {"lambda", detail::matrix_to_json(result.state.lambda)},
    };
    j["config"] = config_echo;
    out << j.dump(2) << '\n';
}

inline void write_result(const FitResult& result, const std::filesystem::path& path,
                         const nlohmann::json& config_echo = nlohmann::json::object()) {
    auto out = detail::open_output(path);
    write_result(result, out, config_echo);
}

inline FitResult read_result(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("result: invalid JSON: ") + e.what());
    }
    try {
        if (!j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
            throw SchemaError("result: missing schema_version");
        }
        if (j["schema_version"].get<int>() != kResultSchemaVersion) {
            throw SchemaError("result: unsupported schema_version " +
                              j["schema_version"].dump());
        }
        const auto d = j.at("num_items").get<std::size_t>();
        const auto u = j.at("num_users").get<std::size_t>();
        const auto k = j.at("num_clusters").get<std::size_t>();
        const auto f = j.at("vocab_size").get<std::size_t>();
        FitResult result;
        const auto& state = j.at("state");
        result.state.phi = detail::matrix_from_json(state.at("phi"), d, k, "phi");
        result.state.varphi = detail::matrix_from_json(state.at("varphi"), u, k, "varphi");
        result.state.q_alpha = detail::matrix_from_json(state.at("q_alpha"), k, k, "q_alpha");
        result.state.q_beta = detail::matrix_from_json(state.at("q_beta"), k, k, "q_beta");
        result.state.lambda = detail::matrix_from_json(state.at("lambda"), k, f, "lambda");
        result.item_assignments = j.at("item_assignments").get<std::vector<std::size_t>>();
        result.user_assignments = j.at("user_assignments").get<std::vector<std::size_t>>();
        result.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
        result.converged = j.at("converged").get<bool>();
        result.sweeps_run = j.at("sweeps_run").get<std::size_t>();
        result.seed = j.at("seed").get<std::uint64_t>();

        result.state.check(d, u, f);
        if (result.item_assignments.size() != d || result.user_assignments.size() != u) {
            throw std::invalid_argument("result: assignment length mismatch");
        }
        for (std::size_t v : result.item_assignments) {
            if (v >= k) throw std::invalid_argument("result: item assignment out of range");
        }
        for (std::size_t v : result.user_assignments) {
            if (v >= k) throw std::invalid_argument("result: user assignment out of range");
        }
        return result;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("result: ") + e.what());
    }
}

inline FitResult read_result(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_result(in);
}

inline nlohmann::json read_result_config(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("result: invalid JSON: ") + e.what());
    }
    return j.value("config", nlohmann::json::object());
}

}  // namespace casb::io
