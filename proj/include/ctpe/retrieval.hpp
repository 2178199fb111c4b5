#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ctpe/embedding.hpp"
#include "ctpe/encoder.hpp"
#include "ctpe/error.hpp"
#include "ctpe/io.hpp"
#include "ctpe/representation.hpp"

// Ranking: the coupled-pair similarity (cross cosine of the two towers) plus
// the single-vector baselines, and the line-oriented run file shared with the
// evaluation module.

namespace ctpe {

struct ScoredDoc {
    std::string id;
    double score = 0.0;
};

struct RankedList {
    std::string query_id;
    std::vector<ScoredDoc> items;  // descending score, ties by ascending id
};

// sim(d_i, d_j) = cos(v_fi, v_bj) + cos(v_fj, v_bi); symmetric, in [-2, 2]
inline double pair_similarity(const DocEmbedding& a, const DocEmbedding& b) {
    if (a.v_f.size() != b.v_f.size())
        throw ShapeMismatch("pair similarity across different embedding dimensions");
    return cosine(a.v_f, b.v_b) + cosine(b.v_f, a.v_b);
}

namespace detail {

inline void sort_and_cut(RankedList& list, std::size_t n) {
    std::sort(list.items.begin(), list.items.end(), [](const ScoredDoc& x, const ScoredDoc& y) {
        if (x.score != y.score) return x.score > y.score;
        return x.id < y.id;
    });
    if (list.items.size() > n) list.items.resize(n);
}

}  // namespace detail

// Top-N candidates for one query document. Candidates default to the
// candidate split; the query document itself is never a candidate.
inline RankedList top_n(const DocEmbedding& query, const EmbeddingStore& store, std::size_t n,
                        std::optional<Split> candidate_split = Split::candidate) {
    if (n == 0) throw ConfigError("topN must be >= 1");
    RankedList list;
    list.query_id = query.doc_id;
    for (const auto& [id, cand] : store.docs) {
        if (id == query.doc_id) continue;
        if (candidate_split && cand.split != *candidate_split) continue;
        list.items.push_back({id, pair_similarity(query, cand)});
    }
    detail::sort_and_cut(list, n);
    return list;
}

// cross-store variant: refuses rankings across different models/tables
inline RankedList top_n(const EmbeddingStore& query_store, const std::string& query_id,
                        const EmbeddingStore& candidate_store, std::size_t n,
                        std::optional<Split> candidate_split = Split::candidate) {
    if (query_store.encoder_fingerprint != candidate_store.encoder_fingerprint ||
        query_store.table_fingerprint != candidate_store.table_fingerprint)
        throw FingerprintMismatch(
            "query and candidate stores come from different models or tables");
    auto it = query_store.docs.find(query_id);
    if (it == query_store.docs.end()) throw UnknownId(query_id);
    return top_n(it->second, candidate_store, n, candidate_split);
}

// all test-split queries ranked against the candidate split, in parallel
inline std::vector<RankedList> rank_all(const EmbeddingStore& store, std::size_t n,
                                        std::size_t threads = 1) {
    std::vector<const DocEmbedding*> queries;
    for (const auto& [id, e] : store.docs)
        if (e.split == Split::test) queries.push_back(&e);
    std::vector<RankedList> out(queries.size());
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, queries.size()));
    if (workers == 1) {
        for (std::size_t q = 0; q < queries.size(); ++q)
            out[q] = top_n(*queries[q], store, n, Split::candidate);
        return out;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t q = w; q < queries.size(); q += workers)
                out[q] = top_n(*queries[q], store, n, Split::candidate);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

// ---------------------------------------------------------------------------
// single-vector baselines

struct VectorDoc {
    std::string id;
    Split split = Split::candidate;
    std::vector<double> v;
};

// avg baseline: mean word vector over the full document f (+) b
inline std::map<std::string, VectorDoc> avg_vectors(const CorpusStore& store,
                                                    const EmbeddingTable& table,
                                                    std::ostream* warnings = &std::cerr) {
    std::map<std::string, VectorDoc> out;
    for (const auto& [id, pair] : store.pairs) {
        std::vector<std::string> all = pair.f;
        all.insert(all.end(), pair.b.begin(), pair.b.end());
        try {
            VectorDoc d{id, store.documents.at(id).split, average_vector(all, table)};
            if (norm(d.v) == 0.0) throw ZeroVector("zero average vector");
            out.emplace(id, std::move(d));
        } catch (const DataError& e) {
            if (warnings) *warnings << "warning: no baseline vector for document " << id << ": "
                                    << e.what() << "\n";
        }
    }
    return out;
}

// cosine ranking over single-vector documents (avg baseline)
inline RankedList baseline_top_n(const std::string& query_id,
                                 const std::map<std::string, VectorDoc>& vectors, std::size_t n,
                                 std::optional<Split> candidate_split = Split::candidate) {
    if (n == 0) throw ConfigError("topN must be >= 1");
    auto it = vectors.find(query_id);
    if (it == vectors.end()) throw UnknownId(query_id);
    RankedList list;
    list.query_id = query_id;
    for (const auto& [id, cand] : vectors) {
        if (id == query_id) continue;
        if (candidate_split && cand.split != *candidate_split) continue;
        list.items.push_back({id, cosine(it->second.v, cand.v)});
    }
    detail::sort_and_cut(list, n);
    return list;
}

// tfidf baseline: sparse cosine over the same index used for sampling
inline RankedList baseline_top_n(const std::string& query_id, const TfIdfIndex& index,
                                 const CorpusStore& store, std::size_t n,
                                 std::optional<Split> candidate_split = Split::candidate) {
    if (n == 0) throw ConfigError("topN must be >= 1");
    auto slot = index.slot_of.find(query_id);
    if (slot == index.slot_of.end()) throw UnknownId(query_id);
    RankedList list;
    list.query_id = query_id;
    for (std::size_t j = 0; j < index.doc_ids.size(); ++j) {
        const auto& id = index.doc_ids[j];
        if (id == query_id) continue;
        if (candidate_split && store.documents.at(id).split != *candidate_split) continue;
        list.items.push_back({id, index.cosine(slot->second, j)});
    }
    detail::sort_and_cut(list, n);
    return list;
}

// ---------------------------------------------------------------------------
// run file: `query_id candidate_id rank score` lines

inline void save_run(const std::vector<RankedList>& runs, std::ostream& os) {
    for (const auto& list : runs) {
        for (std::size_t r = 0; r < list.items.size(); ++r) {
            os << list.query_id << " " << list.items[r].id << " " << (r + 1) << " "
               << io::format_double(list.items[r].score) << "\n";
        }
    }
}

inline void save_run(const std::vector<RankedList>& runs, const std::string& path) {
    auto os = io::open_out(path);
    save_run(runs, os);
}

inline std::vector<RankedList> load_run(std::istream& is) {
    std::vector<RankedList> runs;
    std::map<std::string, std::size_t> slot;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
            if (j > i) f.push_back(line.substr(i, j - i));
            i = j;
        }
        if (f.empty()) continue;
        if (f.size() != 4)
            throw MalformedRun("expected 'query cand rank score' on line " +
                               std::to_string(line_no));
        std::size_t rank = 0;
        double score = 0.0;
        auto rank_res = std::from_chars(f[2].data(), f[2].data() + f[2].size(), rank);
        auto score_res = std::from_chars(f[3].data(), f[3].data() + f[3].size(), score);
        if (rank_res.ec != std::errc() || rank_res.ptr != f[2].data() + f[2].size() ||
            score_res.ec != std::errc() || score_res.ptr != f[3].data() + f[3].size())
            throw MalformedRun("bad rank or score on line " + std::to_string(line_no));
        auto it = slot.find(f[0]);
        if (it == slot.end()) {
            it = slot.emplace(f[0], runs.size()).first;
            runs.push_back(RankedList{f[0], {}});
        }
        auto& list = runs[it->second];
        if (rank != list.items.size() + 1)
            throw MalformedRun("rank " + std::to_string(rank) + " out of order on line " +
                               std::to_string(line_no));
        list.items.push_back({f[1], score});
    }
    return runs;
}

inline std::vector<RankedList> load_run(const std::string& path) {
    auto is = io::open_in(path);
    return load_run(is);
}

}  // namespace ctpe
