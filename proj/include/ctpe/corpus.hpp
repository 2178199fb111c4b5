#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctpe/error.hpp"
#include "ctpe/io.hpp"
#include "ctpe/text.hpp"

// Corpus handling: the five-step text preprocessing, document segmentation
// into coupled (former, latter) text pairs, and the JSON-lines corpus format.

namespace ctpe {

enum class Split { candidate, test };

inline std::string split_name(Split s) { return s == Split::candidate ? "candidate" : "test"; }

inline Split split_from_name(const std::string& s) {
    if (s == "candidate") return Split::candidate;
    if (s == "test") return Split::test;
    throw DataError("unknown split: " + s);
}

struct TokenizedDocument {
    std::string id;
    std::vector<std::vector<std::string>> part_tokens;  // aligned with corpus part order
    Split split = Split::candidate;
    std::vector<std::string> groundtruth;

    std::size_t token_count() const {
        std::size_t n = 0;
        for (const auto& p : part_tokens) n += p.size();
        return n;
    }

    // token offsets at which each part begins
    std::vector<std::size_t> boundaries() const {
        std::vector<std::size_t> b;
        b.reserve(part_tokens.size());
        std::size_t off = 0;
        for (const auto& p : part_tokens) {
            b.push_back(off);
            off += p.size();
        }
        return b;
    }

    std::vector<std::string> all_tokens() const {
        std::vector<std::string> out;
        out.reserve(token_count());
        for (const auto& p : part_tokens) out.insert(out.end(), p.begin(), p.end());
        return out;
    }
};

enum class SegmentationMode { meaningful, percent };

struct SegmentationSpec {
    SegmentationMode mode = SegmentationMode::meaningful;
    std::size_t part_boundary = 1;  // meaningful: index of the part that starts the latter side
    double percent = 0.5;           // percent: fraction in (0,1)

    void validate() const {
        if (mode == SegmentationMode::percent && !(percent > 0.0 && percent < 1.0))
            throw ConfigError("segmentation percent must lie in (0,1)");
        if (mode == SegmentationMode::meaningful && part_boundary < 1)
            throw UnknownBoundary("part boundary 0 would leave the former side empty");
    }
};

struct CoupledPair {
    std::string doc_id;
    std::vector<std::string> f;  // former part
    std::vector<std::string> b;  // latter part
};

struct CorpusStore {
    std::vector<std::string> part_names;
    SegmentationSpec segmentation;
    std::size_t l_max = 200;
    std::map<std::string, TokenizedDocument> documents;
    std::map<std::string, CoupledPair> pairs;
    std::size_t candidate_count = 0;
    std::size_t test_count = 0;
    std::size_t dropped_count = 0;
};

// ---------------------------------------------------------------------------
// preprocessing

namespace detail {

// Step 2. '<' opens a tag only when a matching '>' follows; otherwise the
// character is kept and removed later as punctuation.
inline std::string strip_html_tags(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '<') {
            std::size_t close = s.find('>', i + 1);
            if (close != std::string::npos) {
                i = close + 1;
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

// Step 3. Named and numeric entities. Decoded characters are lowercased so
// the step-1 guarantee survives numeric escapes like &#65;.
inline std::string restore_html_escapes(const std::string& s) {
    struct Named {
        const char* name;
        char32_t cp;
    };
    static constexpr Named named[] = {
        {"amp", '&'},   {"lt", '<'},    {"gt", '>'},   {"quot", '"'},
        {"apos", '\''}, {"nbsp", ' '},  {"ndash", 0x2013}, {"mdash", 0x2014},
    };
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            ++i;
            continue;
        }
        std::size_t semi = s.find(';', i + 1);
        if (semi == std::string::npos || semi - i > 10) {
            out.push_back(s[i]);
            ++i;
            continue;
        }
        std::string body = s.substr(i + 1, semi - i - 1);
        std::optional<char32_t> cp;
        if (!body.empty() && body[0] == '#') {
            char32_t v = 0;
            bool ok = body.size() > 1;
            if (body.size() > 2 && (body[1] == 'x' || body[1] == 'X')) {
                for (std::size_t k = 2; k < body.size() && ok; ++k) {
                    char c = body[k];
                    int d = (c >= '0' && c <= '9')   ? c - '0'
                            : (c >= 'a' && c <= 'f') ? c - 'a' + 10
                            : (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                                     : -1;
                    if (d < 0) ok = false;
                    else v = v * 16 + static_cast<char32_t>(d);
                }
            } else {
                for (std::size_t k = 1; k < body.size() && ok; ++k) {
                    if (body[k] < '0' || body[k] > '9') ok = false;
                    else v = v * 10 + static_cast<char32_t>(body[k] - '0');
                }
            }
            if (ok && v > 0 && v <= 0x10FFFF) cp = v;
        } else {
            for (const auto& n : named) {
                if (body == n.name) {
                    cp = n.cp;
                    break;
                }
            }
        }
        if (cp) {
            text::encode(text::to_lower(*cp), out);
            i = semi + 1;
        } else {
            out.push_back(s[i]);
            ++i;
        }
    }
    return out;
}

// Steps 4+5. Tokens are maximal alphanumeric runs; tokens without a letter
// are dropped.
inline std::vector<std::string> split_and_filter(const std::string& s) {
    std::vector<std::string> tokens;
    std::string cur;
    bool has_letter = false;
    auto flush = [&] {
        if (!cur.empty() && has_letter) tokens.push_back(cur);
        cur.clear();
        has_letter = false;
    };
    for (std::size_t i = 0; i < s.size();) {
        char32_t cp = text::decode(s, i);
        if (text::is_alnum(cp)) {
            text::encode(cp, cur);
            if (text::is_alpha(cp)) has_letter = true;
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

}  // namespace detail

// The five preprocessing steps, in order: lowercase, remove HTML labels,
// restore HTML escapes, split with punctuation, remove tokens without letters.
inline std::vector<std::string> preprocess_text(const std::string& raw) {
    std::string s = text::lowercase(raw);
    s = detail::strip_html_tags(s);
    s = detail::restore_html_escapes(s);
    return detail::split_and_filter(s);
}

// Splits on terminal punctuation (., !, ?) before preprocessing; used by
// sentence-level embedding backends.
inline std::vector<std::string> split_sentences(const std::string& raw) {
    std::vector<std::string> sentences;
    std::string cur;
    auto flush = [&] {
        std::size_t b = cur.find_first_not_of(" \t\r\n");
        std::size_t e = cur.find_last_not_of(" \t\r\n");
        if (b != std::string::npos) sentences.push_back(cur.substr(b, e - b + 1));
        cur.clear();
    };
    for (char c : raw) {
        if (c == '.' || c == '!' || c == '?') {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return sentences;
}

// ---------------------------------------------------------------------------
// segmentation

namespace detail {

// floor(percent * n), snapping values within 1e-9 of the next integer so
// fractions like 0.6 * 75 land on 45 rather than 44.
inline std::size_t percent_split_point(double percent, std::size_t n) {
    double x = percent * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::floor(x));
    if (static_cast<double>(k + 1) - x < 1e-9) ++k;
    return k;
}

}  // namespace detail

inline CoupledPair segment(const TokenizedDocument& doc, const SegmentationSpec& spec,
                           std::size_t l_max) {
    spec.validate();
    std::vector<std::string> tokens = doc.all_tokens();
    std::size_t split_point = 0;
    if (spec.mode == SegmentationMode::meaningful) {
        const auto bounds = doc.boundaries();
        if (spec.part_boundary >= bounds.size())
            throw UnknownBoundary("document " + doc.id + " has no part seam " +
                                  std::to_string(spec.part_boundary));
        split_point = bounds[spec.part_boundary];
    } else {
        split_point = detail::percent_split_point(spec.percent, tokens.size());
    }
    if (split_point == 0 || split_point >= tokens.size())
        throw EmptySide("document " + doc.id + " segments with an empty side");

    CoupledPair pair;
    pair.doc_id = doc.id;
    std::size_t f_len = std::min(split_point, l_max);
    std::size_t b_len = std::min(tokens.size() - split_point, l_max);
    pair.f.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(f_len));
    pair.b.assign(tokens.begin() + static_cast<std::ptrdiff_t>(split_point),
                  tokens.begin() + static_cast<std::ptrdiff_t>(split_point + b_len));
    return pair;
}

// ---------------------------------------------------------------------------
// corpus file (raw JSON-lines) loading

namespace detail {

inline void index_document(CorpusStore& store, TokenizedDocument doc, std::ostream* warnings) {
    const std::string id = doc.id;
    try {
        CoupledPair pair = segment(doc, store.segmentation, store.l_max);
        if (doc.split == Split::candidate)
            ++store.candidate_count;
        else
            ++store.test_count;
        store.pairs.emplace(id, std::move(pair));
        store.documents.emplace(id, std::move(doc));
    } catch (const EmptySide&) {
        ++store.dropped_count;
        if (warnings) *warnings << "warning: dropping document " << id << " (empty side)\n";
    }
}

}  // namespace detail

// Raw corpus: UTF-8 JSON lines with fields id, parts (name -> text),
// optional groundtruth, split ("candidate"|"test"). An optional first line
// {"part_order": [...]} pins the part order; otherwise the order of keys in
// the first document (or the part_order argument) is used.
inline CorpusStore load_corpus(const std::string& path, const SegmentationSpec& spec,
                               std::size_t l_max, std::vector<std::string> part_order = {},
                               std::ostream* warnings = &std::cerr) {
    spec.validate();
    if (l_max == 0) throw ConfigError("l_max must be positive");

    CorpusStore store;
    store.segmentation = spec;
    store.l_max = l_max;
    store.part_names = std::move(part_order);

    auto in = io::open_in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!j.is_object()) throw ParseError("expected a JSON object", line_no);

        if (line_no == 1 && j.contains("part_order") && !j.contains("id")) {
            if (store.part_names.empty())
                store.part_names = j["part_order"].get<std::vector<std::string>>();
            continue;
        }
        if (!j.contains("id") || !j["id"].is_string())
            throw ParseError("missing string field 'id'", line_no);
        if (!j.contains("parts") || !j["parts"].is_object())
            throw ParseError("missing object field 'parts'", line_no);

        if (store.part_names.empty()) {
            for (auto it = j["parts"].begin(); it != j["parts"].end(); ++it)
                store.part_names.push_back(it.key());
        }

        TokenizedDocument doc;
        doc.id = j["id"].get<std::string>();
        if (doc.id.empty()) throw ParseError("empty document id", line_no);
        if (store.documents.count(doc.id) || store.pairs.count(doc.id))
            throw DuplicateId(doc.id);

        doc.part_tokens.resize(store.part_names.size());
        for (std::size_t p = 0; p < store.part_names.size(); ++p) {
            const auto& name = store.part_names[p];
            if (j["parts"].contains(name)) {
                if (!j["parts"][name].is_string())
                    throw ParseError("part '" + name + "' is not a string", line_no);
                doc.part_tokens[p] = preprocess_text(j["parts"][name].get<std::string>());
            }
        }
        if (j.contains("split")) doc.split = split_from_name(j["split"].get<std::string>());
        if (j.contains("groundtruth"))
            doc.groundtruth = j["groundtruth"].get<std::vector<std::string>>();

        detail::index_document(store, std::move(doc), warnings);
    }
    return store;
}

// Re-derives every pair from the kept documents under a new segmentation;
// used by the position sweep. Documents whose new pair has an empty side are
// dropped from the store.
inline void resegment(CorpusStore& store, const SegmentationSpec& spec,
                      std::ostream* warnings = &std::cerr) {
    spec.validate();
    store.segmentation = spec;
    store.pairs.clear();
    store.candidate_count = 0;
    store.test_count = 0;
    std::vector<std::string> drop;
    for (const auto& [id, doc] : store.documents) {
        try {
            store.pairs.emplace(id, segment(doc, spec, store.l_max));
            if (doc.split == Split::candidate)
                ++store.candidate_count;
            else
                ++store.test_count;
        } catch (const EmptySide&) {
            ++store.dropped_count;
            if (warnings) *warnings << "warning: dropping document " << id << " (empty side)\n";
            drop.push_back(id);
        }
    }
    for (const auto& id : drop) store.documents.erase(id);
}

// ---------------------------------------------------------------------------
// processed-store serialization (JSON lines, sorted by id, deterministic)

inline void save_store(const CorpusStore& store, std::ostream& os) {
    nlohmann::json header;
    header["format"] = "ctpe-corpus-v1";
    header["part_order"] = store.part_names;
    header["l_max"] = store.l_max;
    header["segmentation"]["mode"] =
        store.segmentation.mode == SegmentationMode::meaningful ? "meaningful" : "percent";
    if (store.segmentation.mode == SegmentationMode::meaningful)
        header["segmentation"]["part_boundary"] = store.segmentation.part_boundary;
    else
        header["segmentation"]["percent"] = store.segmentation.percent;
    header["counts"] = {{"candidate", store.candidate_count},
                        {"test", store.test_count},
                        {"dropped", store.dropped_count}};
    os << header.dump() << "\n";
    for (const auto& [id, doc] : store.documents) {
        const auto& pair = store.pairs.at(id);
        nlohmann::json j;
        j["id"] = id;
        j["parts"] = doc.part_tokens;
        j["split"] = split_name(doc.split);
        if (!doc.groundtruth.empty()) j["groundtruth"] = doc.groundtruth;
        j["f"] = pair.f;
        j["b"] = pair.b;
        os << j.dump() << "\n";
    }
}

inline void save_store(const CorpusStore& store, const std::string& path) {
    auto os = io::open_out(path);
    save_store(store, os);
}

inline CorpusStore load_store(const std::string& path) {
    auto in = io::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty corpus store: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid store header: ") + e.what(), 1);
    }
    if (!header.contains("format") || header["format"] != "ctpe-corpus-v1")
        throw DataError("not a ctpe corpus store: " + path);

    CorpusStore store;
    store.part_names = header["part_order"].get<std::vector<std::string>>();
    store.l_max = header["l_max"].get<std::size_t>();
    if (header["segmentation"]["mode"] == "meaningful") {
        store.segmentation.mode = SegmentationMode::meaningful;
        store.segmentation.part_boundary = header["segmentation"]["part_boundary"].get<std::size_t>();
    } else {
        store.segmentation.mode = SegmentationMode::percent;
        store.segmentation.percent = header["segmentation"]["percent"].get<double>();
    }
    store.dropped_count = header["counts"]["dropped"].get<std::size_t>();

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid store record: ") + e.what(), line_no);
        }
        TokenizedDocument doc;
        doc.id = j["id"].get<std::string>();
        if (store.documents.count(doc.id)) throw DuplicateId(doc.id);
        doc.part_tokens = j["parts"].get<std::vector<std::vector<std::string>>>();
        doc.split = split_from_name(j["split"].get<std::string>());
        if (j.contains("groundtruth"))
            doc.groundtruth = j["groundtruth"].get<std::vector<std::string>>();
        CoupledPair pair;
        pair.doc_id = doc.id;
        pair.f = j["f"].get<std::vector<std::string>>();
        pair.b = j["b"].get<std::vector<std::string>>();
        if (doc.split == Split::candidate)
            ++store.candidate_count;
        else
            ++store.test_count;
        const std::string id = doc.id;
        store.pairs.emplace(id, std::move(pair));
        store.documents.emplace(id, std::move(doc));
    }
    return store;
}

}  // namespace ctpe
