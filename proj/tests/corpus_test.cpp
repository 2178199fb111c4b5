#include "ctpe/corpus.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "ctpe/rng.hpp"

using namespace ctpe;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = testing::TempDir() + name;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << content;
    return path;
}

std::vector<std::string> toks(std::initializer_list<const char*> xs) {
    return {xs.begin(), xs.end()};
}

TokenizedDocument make_doc(std::string id, std::vector<std::vector<std::string>> parts,
                           Split split = Split::candidate) {
    TokenizedDocument d;
    d.id = std::move(id);
    d.part_tokens = std::move(parts);
    d.split = split;
    return d;
}

// --- preprocessing: hand-worked examples frozen as expectations -------------

TEST(Preprocess, EntityBetweenWords) {
    EXPECT_EQ(preprocess_text("Deep&amp;Learning 2019"), toks({"deep", "learning"}));
}

TEST(Preprocess, HtmlTagsRemoved) {
    EXPECT_EQ(preprocess_text("<p>Graph-based IR</p>"), toks({"graph", "based", "ir"}));
}

TEST(Preprocess, EscapedTagsAreNotTags) {
    // escapes are restored after tag removal, so &lt;b&gt; survives as text
    EXPECT_EQ(preprocess_text("&lt;b&gt;Bold&lt;/b&gt;"), toks({"b", "bold", "b"}));
}

TEST(Preprocess, NumberOnlyTokensDropped) {
    EXPECT_EQ(preprocess_text("word2vec 2nd 123 x1"), toks({"word2vec", "2nd", "x1"}));
}

TEST(Preprocess, ApostropheSplits) {
    EXPECT_EQ(preprocess_text("don't stop"), toks({"don", "t", "stop"}));
}

TEST(Preprocess, AccentedLowercase) {
    EXPECT_EQ(preprocess_text("Café RÉSUMÉ"), toks({"café", "résumé"}));
}

TEST(Preprocess, LoneAngleBracketIsPunctuation) {
    EXPECT_EQ(preprocess_text("a < b"), toks({"a", "b"}));
}

TEST(Preprocess, TagRemovalJoinsAdjacentText) {
    EXPECT_EQ(preprocess_text("line<BR>next"), toks({"linenext"}));
}

TEST(Preprocess, NumericEntitiesLowercased) {
    EXPECT_EQ(preprocess_text("&#65;&#97; &#x42;"), toks({"aa", "b"}));
}

TEST(Preprocess, UnknownOrUnterminatedEntitiesKeptAsText) {
    EXPECT_EQ(preprocess_text("&unknown; &amp"), toks({"unknown", "amp"}));
}

TEST(Preprocess, WhitespaceVarietiesSeparate) {
    EXPECT_EQ(preprocess_text("one\ttwo\nthree four"), toks({"one", "two", "three", "four"}));
}

TEST(Preprocess, Idempotent) {
    // re-running the pipeline on its own (space-joined) output is a no-op
    Rng rng(20240817);
    const std::string alphabet = "abcXYZ012 .,&<>#;!-\"'";
    for (int trial = 0; trial < 200; ++trial) {
        std::string s;
        const std::size_t n = rng.index(40);
        for (std::size_t k = 0; k < n; ++k) s.push_back(alphabet[rng.index(alphabet.size())]);
        const auto once = preprocess_text(s);
        std::string joined;
        for (const auto& t : once) {
            if (!joined.empty()) joined.push_back(' ');
            joined += t;
        }
        EXPECT_EQ(preprocess_text(joined), once) << "input: " << s;
    }
}

TEST(Preprocess, EveryTokenHasALetterAndNoUpperAscii) {
    Rng rng(77);
    const std::string alphabet = "aB9 .&;<>\xc3\xa9";  // includes U+00E9
    for (int trial = 0; trial < 200; ++trial) {
        std::string s;
        const std::size_t n = rng.index(60);
        for (std::size_t k = 0; k < n; ++k) s.push_back(alphabet[rng.index(alphabet.size())]);
        for (const auto& t : preprocess_text(s)) {
            bool has_letter = false;
            for (std::size_t i = 0; i < t.size();) {
                char32_t cp = text::decode(t, i);
                EXPECT_TRUE(text::is_alnum(cp)) << t;
                EXPECT_FALSE(cp >= 'A' && cp <= 'Z') << t;
                has_letter = has_letter || text::is_alpha(cp);
            }
            EXPECT_TRUE(has_letter) << t;
        }
    }
}

TEST(Sentences, SplitOnTerminators) {
    EXPECT_EQ(split_sentences("Hello world. How are you? Fine!"),
              toks({"Hello world", "How are you", "Fine"}));
    EXPECT_EQ(split_sentences("No terminator"), toks({"No terminator"}));
    EXPECT_EQ(split_sentences("Dots... only"), toks({"Dots", "only"}));
    EXPECT_TRUE(split_sentences("...").empty());
}

// --- segmentation ------------------------------------------------------------

TEST(Segment, MeaningfulUsesPartSeam) {
    auto doc = make_doc("d", {toks({"graph", "based"}), toks({"ir", "method"})});
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    auto pair = segment(doc, spec, 200);
    EXPECT_EQ(pair.f, toks({"graph", "based"}));
    EXPECT_EQ(pair.b, toks({"ir", "method"}));
}

TEST(Segment, SeamOutOfRangeThrows) {
    auto doc = make_doc("d", {toks({"a"}), toks({"b"})});
    SegmentationSpec spec{SegmentationMode::meaningful, 2, 0.5};
    EXPECT_THROW(segment(doc, spec, 200), UnknownBoundary);
}

TEST(Segment, EmptyLatterThrows) {
    auto doc = make_doc("d", {toks({"a"}), {}});
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    EXPECT_THROW(segment(doc, spec, 200), EmptySide);
}

TEST(Segment, PercentFloor) {
    auto doc = make_doc("d", {toks({"a", "b", "c", "d", "e"})});
    SegmentationSpec spec{SegmentationMode::percent, 1, 0.4};
    auto pair = segment(doc, spec, 200);
    EXPECT_EQ(pair.f, toks({"a", "b"}));
    EXPECT_EQ(pair.b, toks({"c", "d", "e"}));
}

TEST(Segment, PercentSnapsFloatDust) {
    // 0.29 * 100 evaluates to 28.999999999999996 in binary64; the split point
    // must still land on 29
    std::vector<std::string> words(100, "w");
    auto doc = make_doc("d", {words});
    SegmentationSpec spec{SegmentationMode::percent, 1, 0.29};
    auto pair = segment(doc, spec, 200);
    EXPECT_EQ(pair.f.size(), 29u);
    EXPECT_EQ(pair.b.size(), 71u);
}

TEST(Segment, PercentExactFractionsComplementary) {
    for (std::size_t n = 2; n <= 60; ++n) {
        std::vector<std::string> words;
        for (std::size_t k = 0; k < n; ++k) words.push_back("w" + std::to_string(k));
        auto doc = make_doc("d", {words});
        for (std::size_t k = 1; k < n; ++k) {
            SegmentationSpec spec{SegmentationMode::percent, 1,
                                  static_cast<double>(k) / static_cast<double>(n)};
            auto pair = segment(doc, spec, 1000);
            ASSERT_EQ(pair.f.size(), k) << "n=" << n << " k=" << k;
            ASSERT_EQ(pair.b.size(), n - k);
            std::vector<std::string> joined = pair.f;
            joined.insert(joined.end(), pair.b.begin(), pair.b.end());
            ASSERT_EQ(joined, words);
        }
    }
}

TEST(Segment, LmaxTruncatesEachSide) {
    std::vector<std::string> words;
    for (int k = 0; k < 10; ++k) words.push_back("w" + std::to_string(k));
    auto doc = make_doc("d", {words});
    SegmentationSpec spec{SegmentationMode::percent, 1, 0.5};
    auto pair = segment(doc, spec, 3);
    EXPECT_EQ(pair.f, toks({"w0", "w1", "w2"}));
    EXPECT_EQ(pair.b, toks({"w5", "w6", "w7"}));
}

TEST(Segment, PercentValidation) {
    auto doc = make_doc("d", {toks({"a", "b"})});
    SegmentationSpec spec{SegmentationMode::percent, 1, 1.0};
    EXPECT_THROW(segment(doc, spec, 200), ConfigError);
    spec.percent = 0.0;
    EXPECT_THROW(segment(doc, spec, 200), ConfigError);
}

// --- raw corpus loading ------------------------------------------------------

const char* kRawCorpus =
    "{\"part_order\": [\"title\", \"abstract\"]}\n"
    "{\"id\": \"d1\", \"parts\": {\"title\": \"Deep &amp; Shallow Learning\", \"abstract\": "
    "\"We study both.\"}, \"split\": \"candidate\", \"groundtruth\": [\"g1\"]}\n"
    "{\"id\": \"d2\", \"parts\": {\"abstract\": \"<p>Graph-based IR</p> 123\", \"title\": "
    "\"Graph IR\"}, \"split\": \"test\"}\n"
    "{\"id\": \"d3\", \"parts\": {\"title\": \"Only title here\"}, \"split\": \"candidate\"}\n";

TEST(LoadCorpus, ParsesSegmentsAndDrops) {
    auto path = write_temp("corpus_basic.jsonl", kRawCorpus);
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    std::ostringstream warnings;
    auto store = load_corpus(path, spec, 200, {}, &warnings);

    EXPECT_EQ(store.part_names, toks({"title", "abstract"}));
    EXPECT_EQ(store.documents.size(), 2u);
    EXPECT_EQ(store.candidate_count, 1u);
    EXPECT_EQ(store.test_count, 1u);
    EXPECT_EQ(store.dropped_count, 1u);  // d3 has an empty latter side
    EXPECT_NE(warnings.str().find("d3"), std::string::npos);

    const auto& p1 = store.pairs.at("d1");
    EXPECT_EQ(p1.f, toks({"deep", "shallow", "learning"}));
    EXPECT_EQ(p1.b, toks({"we", "study", "both"}));
    const auto& p2 = store.pairs.at("d2");
    EXPECT_EQ(p2.f, toks({"graph", "ir"}));
    EXPECT_EQ(p2.b, toks({"graph", "based", "ir"}));
    EXPECT_EQ(store.documents.at("d1").groundtruth, toks({"g1"}));
    EXPECT_EQ(store.documents.at("d2").split, Split::test);
}

TEST(LoadCorpus, PartOrderFromFirstDocumentWhenNoHeader) {
    auto path = write_temp(
        "corpus_noheader.jsonl",
        "{\"id\": \"a\", \"parts\": {\"body\": \"tail words\", \"head\": \"front words\"}}\n");
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    auto store = load_corpus(path, spec, 200, {}, nullptr);
    EXPECT_EQ(store.part_names, toks({"body", "head"}));  // key order of first doc
    EXPECT_EQ(store.pairs.at("a").f, toks({"tail", "words"}));
}

TEST(LoadCorpus, ExplicitPartOrderWins) {
    auto path = write_temp(
        "corpus_explicit.jsonl",
        "{\"id\": \"a\", \"parts\": {\"body\": \"tail words\", \"head\": \"front words\"}}\n");
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    auto store = load_corpus(path, spec, 200, {"head", "body"}, nullptr);
    EXPECT_EQ(store.pairs.at("a").f, toks({"front", "words"}));
}

TEST(LoadCorpus, DuplicateIdThrows) {
    auto path = write_temp("corpus_dup.jsonl",
                           "{\"id\": \"x\", \"parts\": {\"t\": \"one two\", \"b\": \"three\"}}\n"
                           "{\"id\": \"x\", \"parts\": {\"t\": \"four\", \"b\": \"five\"}}\n");
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    EXPECT_THROW(load_corpus(path, spec, 200, {}, nullptr), DuplicateId);
}

TEST(LoadCorpus, BadJsonReportsLine) {
    auto path = write_temp("corpus_bad.jsonl",
                           "{\"id\": \"x\", \"parts\": {\"t\": \"one two\", \"b\": \"three\"}}\n"
                           "not json\n");
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    try {
        load_corpus(path, spec, 200, {}, nullptr);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line_number, 2u);
    }
}

TEST(LoadCorpus, MissingFileThrows) {
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    EXPECT_THROW(load_corpus("/nonexistent/corpus.jsonl", spec, 200, {}, nullptr), DataError);
}

// --- store round trip --------------------------------------------------------

TEST(Store, RoundTripAndDeterminism) {
    auto path = write_temp("corpus_rt.jsonl", kRawCorpus);
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    auto store = load_corpus(path, spec, 200, {}, nullptr);

    std::ostringstream a, b;
    save_store(store, a);
    save_store(store, b);
    EXPECT_EQ(a.str(), b.str());  // byte-identical on repeat

    auto saved = write_temp("corpus_rt.store", a.str());
    auto loaded = load_store(saved);
    EXPECT_EQ(loaded.part_names, store.part_names);
    EXPECT_EQ(loaded.l_max, store.l_max);
    EXPECT_EQ(loaded.documents.size(), store.documents.size());
    EXPECT_EQ(loaded.candidate_count, store.candidate_count);
    EXPECT_EQ(loaded.test_count, store.test_count);
    EXPECT_EQ(loaded.dropped_count, store.dropped_count);
    for (const auto& [id, pair] : store.pairs) {
        EXPECT_EQ(loaded.pairs.at(id).f, pair.f);
        EXPECT_EQ(loaded.pairs.at(id).b, pair.b);
        EXPECT_EQ(loaded.documents.at(id).part_tokens, store.documents.at(id).part_tokens);
        EXPECT_EQ(loaded.documents.at(id).split, store.documents.at(id).split);
        EXPECT_EQ(loaded.documents.at(id).groundtruth, store.documents.at(id).groundtruth);
    }

    std::ostringstream c;
    save_store(loaded, c);
    EXPECT_EQ(c.str(), a.str());  // save(load(save(x))) == save(x)
}

TEST(Store, ResegmentSwapsMode) {
    auto path = write_temp("corpus_reseg.jsonl", kRawCorpus);
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    auto store = load_corpus(path, spec, 200, {}, nullptr);

    SegmentationSpec pct{SegmentationMode::percent, 1, 0.5};
    resegment(store, pct, nullptr);
    // d1 has 6 tokens total -> 3/3
    EXPECT_EQ(store.pairs.at("d1").f, toks({"deep", "shallow", "learning"}));
    EXPECT_EQ(store.pairs.at("d1").b, toks({"we", "study", "both"}));
    // d2 has 5 tokens -> floor(2.5)=2
    EXPECT_EQ(store.pairs.at("d2").f, toks({"graph", "ir"}));
    EXPECT_EQ(store.pairs.at("d2").b, toks({"graph", "based", "ir"}));
    EXPECT_EQ(store.candidate_count, 1u);
    EXPECT_EQ(store.test_count, 1u);
}

TEST(Store, ResegmentDropsNewEmptySides) {
    auto path = write_temp(
        "corpus_reseg2.jsonl",
        "{\"id\": \"tiny\", \"parts\": {\"t\": \"one\", \"b\": \"two\"}}\n");
    SegmentationSpec spec{SegmentationMode::meaningful, 1, 0.5};
    auto store = load_corpus(path, spec, 200, {}, nullptr);
    ASSERT_EQ(store.documents.size(), 1u);

    SegmentationSpec pct{SegmentationMode::percent, 1, 0.2};  // floor(0.4) = 0 -> empty former
    resegment(store, pct, nullptr);
    EXPECT_TRUE(store.documents.empty());
    EXPECT_TRUE(store.pairs.empty());
    EXPECT_EQ(store.dropped_count, 1u);
}

}  // namespace
