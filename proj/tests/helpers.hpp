#pragma once

// Small shared fixtures for the test binaries.

#include <gtest/gtest.h>

#include <fstream>
#include <initializer_list>
#include <string>
#include <tuple>
#include <vector>

#include "ctpe/corpus.hpp"

namespace helpers {

inline std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = testing::TempDir() + name;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << content;
    return path;
}

inline std::vector<std::string> toks(std::initializer_list<const char*> xs) {
    return {xs.begin(), xs.end()};
}

// store with hand-placed pairs, bypassing the file loader
inline ctpe::CorpusStore make_store(
    const std::vector<std::tuple<std::string, std::vector<std::string>, std::vector<std::string>,
                                 ctpe::Split>>& docs) {
    ctpe::CorpusStore store;
    store.part_names = {"f", "b"};
    for (const auto& [id, f, b, split] : docs) {
        ctpe::TokenizedDocument doc;
        doc.id = id;
        doc.part_tokens = {f, b};
        doc.split = split;
        ctpe::CoupledPair pair{id, f, b};
        store.documents.emplace(id, std::move(doc));
        store.pairs.emplace(id, std::move(pair));
        if (split == ctpe::Split::candidate)
            ++store.candidate_count;
        else
            ++store.test_count;
    }
    return store;
}

}  // namespace helpers
