#pragma once

#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ctpe/corpus.hpp"
#include "ctpe/embedding.hpp"
#include "ctpe/encoder.hpp"
#include "ctpe/error.hpp"
#include "ctpe/io.hpp"

// Document representations: v_i = (v_f, v_b), one vector per tower, persisted
// in a fingerprinted binary store so retrieval can refuse cross-model input.

namespace ctpe {

struct DocEmbedding {
    std::string doc_id;
    Split split = Split::candidate;
    std::vector<double> v_f;
    std::vector<double> v_b;
};

struct EmbeddingStore {
    std::size_t dim = 0;  // 4*n_f with the default four widths
    std::uint64_t encoder_fingerprint = 0;
    std::uint64_t table_fingerprint = 0;
    std::map<std::string, DocEmbedding> docs;
    std::size_t skipped = 0;
};

inline DocEmbedding embed_document(const TwinEncoder& twin, const EmbeddingTable& table,
                                   const CoupledPair& pair, Split split, std::size_t l) {
    auto mf = build_sequence(pair.f, table, l);
    auto mb = build_sequence(pair.b, table, l);
    if (mf.valid_len == 0 || mb.valid_len == 0)
        throw AllTokensOOV("document " + pair.doc_id + " has a side with no in-vocabulary token");
    DocEmbedding e;
    e.doc_id = pair.doc_id;
    e.split = split;
    e.v_f = forward(twin.former, mf);  // throws SequenceTooShort below the widest window
    e.v_b = forward(twin.latter, mb);
    return e;
}

// One embedding per pair; documents whose sides cannot be encoded (OOV-only,
// too short, or a dead all-zero output) are skipped with a warning.
inline EmbeddingStore embed_corpus(const TwinEncoder& twin, const EmbeddingTable& table,
                                   const CorpusStore& store, std::size_t l,
                                   std::ostream* warnings = &std::cerr) {
    EmbeddingStore out;
    out.dim = twin.former.out_dim();
    out.encoder_fingerprint = twin.fingerprint();
    out.table_fingerprint = table.fingerprint();
    for (const auto& [id, pair] : store.pairs) {
        try {
            auto e = embed_document(twin, table, pair, store.documents.at(id).split, l);
            if (norm(e.v_f) == 0.0 || norm(e.v_b) == 0.0)
                throw ZeroVector("document " + id + " encodes to a zero vector");
            out.docs.emplace(id, std::move(e));
        } catch (const DataError& e) {
            ++out.skipped;
            if (warnings) *warnings << "warning: not embedding document " << id << ": " << e.what()
                                    << "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// store file

inline void save_embedding_store(const EmbeddingStore& store, const std::string& path) {
    auto os = io::open_out(path, /*binary=*/true);
    io::write_string(os, "ctpe-embeddings-v1");
    io::write_u64(os, store.dim);
    io::write_u64(os, store.encoder_fingerprint);
    io::write_u64(os, store.table_fingerprint);
    io::write_u64(os, store.docs.size());
    io::Fnv1a h;
    for (const auto& [id, e] : store.docs) {
        io::write_string(os, id);
        io::write_u32(os, e.split == Split::candidate ? 0u : 1u);
        io::write_f64_vec(os, e.v_f);
        io::write_f64_vec(os, e.v_b);
        h.feed_string(id);
        for (double v : e.v_f) h.feed_f64(v);
        for (double v : e.v_b) h.feed_f64(v);
    }
    io::write_u64(os, h.state);
}

inline EmbeddingStore load_embedding_store(const std::string& path) {
    auto is = io::open_in(path, /*binary=*/true);
    if (io::read_string(is) != "ctpe-embeddings-v1")
        throw DataError("not a ctpe embedding store: " + path);
    EmbeddingStore store;
    store.dim = io::read_u64(is);
    store.encoder_fingerprint = io::read_u64(is);
    store.table_fingerprint = io::read_u64(is);
    const std::uint64_t count = io::read_u64(is);
    io::Fnv1a h;
    for (std::uint64_t i = 0; i < count; ++i) {
        DocEmbedding e;
        e.doc_id = io::read_string(is);
        e.split = io::read_u32(is) == 0 ? Split::candidate : Split::test;
        e.v_f = io::read_f64_vec(is);
        e.v_b = io::read_f64_vec(is);
        if (e.v_f.size() != store.dim || e.v_b.size() != store.dim)
            throw DataError("embedding store record has wrong dimension: " + e.doc_id);
        h.feed_string(e.doc_id);
        for (double v : e.v_f) h.feed_f64(v);
        for (double v : e.v_b) h.feed_f64(v);
        const std::string id = e.doc_id;
        if (!store.docs.emplace(id, std::move(e)).second) throw DuplicateId(id);
    }
    if (io::read_u64(is) != h.state)
        throw FingerprintMismatch("embedding store is corrupt: " + path);
    return store;
}

}  // namespace ctpe
