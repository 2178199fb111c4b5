#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctpe/corpus.hpp"
#include "ctpe/error.hpp"
#include "ctpe/io.hpp"
#include "ctpe/rng.hpp"

// Frozen word embedding tables (random or pretrained word2vec text format),
// padded sequence matrices fed to the encoder, and the TF-IDF index used for
// similarity-guided negative sampling and the tfidf baseline.

namespace ctpe {

// sorted unique tokens over all coupled pairs (f and b sides)
inline std::vector<std::string> vocabulary(const CorpusStore& store) {
    std::set<std::string> seen;
    for (const auto& [id, pair] : store.pairs) {
        seen.insert(pair.f.begin(), pair.f.end());
        seen.insert(pair.b.begin(), pair.b.end());
    }
    return {seen.begin(), seen.end()};
}

struct EmbeddingTable {
    std::size_t dim = 0;
    std::vector<std::string> tokens;                 // sorted, row order
    std::vector<double> data;                        // tokens.size() x dim, row-major
    std::map<std::string, std::size_t> index;

    const double* row(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? nullptr : data.data() + it->second * dim;
    }

    // stable content hash; checked when a checkpoint or embedding store is
    // reused with a different table
    std::uint64_t fingerprint() const {
        io::Fnv1a h;
        h.feed_u64(dim);
        h.feed_u64(tokens.size());
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            h.feed_string(tokens[t]);
            for (std::size_t d = 0; d < dim; ++d) h.feed_f64(data[t * dim + d]);
        }
        return h.state;
    }
};

// uniform values in [-0.5/dim, 0.5/dim), the usual scale for frozen random
// lookup tables; tokens are filled in sorted order so the table depends only
// on (vocabulary, dim, seed)
inline EmbeddingTable random_table(std::vector<std::string> sorted_tokens, std::size_t dim,
                                   std::uint64_t seed) {
    if (dim == 0) throw ConfigError("embedding dim must be positive");
    EmbeddingTable table;
    table.dim = dim;
    table.tokens = std::move(sorted_tokens);
    table.data.resize(table.tokens.size() * dim);
    Rng rng(derive_seed(seed, /*stream=*/0x7ab1e));
    const double scale = 1.0 / static_cast<double>(dim);
    for (double& v : table.data) v = (rng.unit() - 0.5) * scale;
    for (std::size_t t = 0; t < table.tokens.size(); ++t) table.index[table.tokens[t]] = t;
    return table;
}

namespace detail {

inline std::vector<std::string> fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline bool parse_f64(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

inline bool parse_size(const std::string& s, std::size_t& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last;
}

}  // namespace detail

// word2vec text format: optional "count dim" header, then one token and dim
// decimal values per line. Values reload bit-for-bit (from_chars). On a
// repeated token the first row wins.
inline EmbeddingTable load_word2vec(const std::string& path) {
    auto in = io::open_in(path);
    std::string line;
    std::size_t line_no = 0;

    std::map<std::string, std::vector<double>> rows;
    std::size_t dim = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        auto f = detail::fields(line);
        if (f.empty()) continue;
        if (first_content_line) {
            first_content_line = false;
            std::size_t count = 0, d = 0;
            if (f.size() == 2 && detail::parse_size(f[0], count) && detail::parse_size(f[1], d)) {
                if (d == 0) throw ParseError("header declares dim 0", line_no);
                dim = d;
                continue;
            }
        }
        if (f.size() < 2) throw ParseError("expected a token and its values", line_no);
        if (dim == 0) dim = f.size() - 1;
        if (f.size() - 1 != dim)
            throw DimMismatch("token '" + f[0] + "' has " + std::to_string(f.size() - 1) +
                              " values, expected " + std::to_string(dim) + " (line " +
                              std::to_string(line_no) + ")");
        std::vector<double> values(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            if (!detail::parse_f64(f[k + 1], values[k]))
                throw ParseError("bad number '" + f[k + 1] + "'", line_no);
        }
        rows.emplace(f[0], std::move(values));  // emplace keeps the first occurrence
    }
    if (rows.empty()) throw DataError("no embedding rows in " + path);

    EmbeddingTable table;
    table.dim = dim;
    table.tokens.reserve(rows.size());
    table.data.reserve(rows.size() * dim);
    for (auto& [token, values] : rows) {
        table.index[token] = table.tokens.size();
        table.tokens.push_back(token);
        table.data.insert(table.data.end(), values.begin(), values.end());
    }
    return table;
}

// shortest round-trip decimals, so load_word2vec(save_word2vec(t)) == t
inline void save_word2vec(const EmbeddingTable& table, const std::string& path) {
    auto os = io::open_out(path);
    os << table.tokens.size() << " " << table.dim << "\n";
    for (std::size_t t = 0; t < table.tokens.size(); ++t) {
        os << table.tokens[t];
        for (std::size_t d = 0; d < table.dim; ++d)
            os << " " << io::format_double(table.data[t * table.dim + d]);
        os << "\n";
    }
}

// ---------------------------------------------------------------------------
// sequence matrices

// dim x l, column-major, zero padded past valid_len. OOV tokens are skipped
// without consuming a column; at most l in-vocabulary tokens are used.
struct SequenceMatrix {
    std::size_t dim = 0;
    std::size_t l = 0;
    std::size_t valid_len = 0;
    std::vector<double> data;

    double at(std::size_t r, std::size_t c) const { return data[c * dim + r]; }
    double* col(std::size_t c) { return data.data() + c * dim; }
    const double* col(std::size_t c) const { return data.data() + c * dim; }
};

inline SequenceMatrix build_sequence(const std::vector<std::string>& tokens,
                                     const EmbeddingTable& table, std::size_t l) {
    if (l == 0) throw ConfigError("sequence length l must be positive");
    SequenceMatrix m;
    m.dim = table.dim;
    m.l = l;
    m.data.assign(table.dim * l, 0.0);
    for (const auto& token : tokens) {
        if (m.valid_len == l) break;
        const double* r = table.row(token);
        if (!r) continue;
        std::copy(r, r + table.dim, m.col(m.valid_len));
        ++m.valid_len;
    }
    return m;
}

// ---------------------------------------------------------------------------
// TF-IDF over the concatenated pair text f (+) b

struct TfIdfIndex {
    std::vector<std::string> doc_ids;  // sorted; slot order
    std::vector<std::vector<std::pair<std::uint32_t, double>>> vectors;  // sorted by term id
    std::vector<double> norms;
    std::map<std::string, std::size_t> slot_of;

    // raw term frequency, idf = ln(N / df), no smoothing
    static TfIdfIndex build(const CorpusStore& store, std::optional<Split> only = std::nullopt) {
        TfIdfIndex idx;
        std::vector<std::map<std::string, std::size_t>> tf;
        for (const auto& [id, pair] : store.pairs) {
            if (only && store.documents.at(id).split != *only) continue;
            idx.doc_ids.push_back(id);
            std::map<std::string, std::size_t> counts;
            for (const auto& t : pair.f) ++counts[t];
            for (const auto& t : pair.b) ++counts[t];
            tf.push_back(std::move(counts));
        }
        const double n = static_cast<double>(idx.doc_ids.size());

        std::map<std::string, std::uint32_t> term_id;
        std::map<std::string, std::size_t> df;
        for (const auto& counts : tf)
            for (const auto& [term, c] : counts) ++df[term];
        std::uint32_t next = 0;
        for (const auto& [term, d] : df) term_id[term] = next++;

        idx.vectors.resize(tf.size());
        idx.norms.resize(tf.size());
        for (std::size_t i = 0; i < tf.size(); ++i) {
            double sq = 0.0;
            for (const auto& [term, c] : tf[i]) {
                const double w =
                    static_cast<double>(c) * std::log(n / static_cast<double>(df.at(term)));
                idx.vectors[i].emplace_back(term_id.at(term), w);
                sq += w * w;
            }
            idx.norms[i] = std::sqrt(sq);
            idx.slot_of[idx.doc_ids[i]] = i;
        }
        return idx;
    }

    double cosine(std::size_t i, std::size_t j) const {
        if (norms[i] == 0.0 || norms[j] == 0.0) return 0.0;
        const auto& a = vectors[i];
        const auto& b = vectors[j];
        double dot = 0.0;
        std::size_t p = 0, q = 0;
        while (p < a.size() && q < b.size()) {
            if (a[p].first < b[q].first)
                ++p;
            else if (b[q].first < a[p].first)
                ++q;
            else
                dot += a[p++].second * b[q++].second;
        }
        return dot / (norms[i] * norms[j]);
    }

    // slots of the k most similar documents to slot i (i excluded); ties
    // break toward the smaller document id, i.e. the smaller slot
    std::vector<std::size_t> top_k(std::size_t i, std::size_t k) const {
        std::vector<std::pair<double, std::size_t>> scored;
        scored.reserve(doc_ids.size() - 1);
        for (std::size_t j = 0; j < doc_ids.size(); ++j) {
            if (j == i) continue;
            scored.emplace_back(cosine(i, j), j);
        }
        std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
            return x.first > y.first;  // slots already ascend, stable keeps that within ties
        });
        if (scored.size() > k) scored.resize(k);
        std::vector<std::size_t> out;
        out.reserve(scored.size());
        for (const auto& [s, j] : scored) out.push_back(j);
        return out;
    }
};

// mean of the in-vocabulary token vectors; the "avg" baseline representation
inline std::vector<double> average_vector(const std::vector<std::string>& tokens,
                                          const EmbeddingTable& table) {
    std::vector<double> sum(table.dim, 0.0);
    std::size_t hit = 0;
    for (const auto& t : tokens) {
        const double* r = table.row(t);
        if (!r) continue;
        for (std::size_t d = 0; d < table.dim; ++d) sum[d] += r[d];
        ++hit;
    }
    if (hit == 0) throw AllTokensOOV("no token is covered by the embedding table");
    for (double& v : sum) v /= static_cast<double>(hit);
    return sum;
}

}  // namespace ctpe
