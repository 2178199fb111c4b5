#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctpe/error.hpp"
#include "ctpe/evaluation.hpp"
#include "ctpe/io.hpp"
#include "ctpe/rng.hpp"

namespace ctpe {

// Desk-scale corpus generator. Each topic owns an exclusive vocabulary; a
// shared pool plays the role of stopwords and sits on the top Zipf ranks of
// every topic. Noise swaps a token for another topic's exclusive vocabulary.
// Each document also carries a "theme": a small subset of its topic vocabulary
// that a theme_rate fraction of tokens is drawn from. Both halves of a
// document share the theme, so coupled pairs are lexically coherent beyond
// their topic — the signal pair training is supposed to pick up.
// Collocations add an order-sensitive channel: all topics emit the same
// content unigrams cw0..cwC-1, but topic t always follows cw_a with
// cw_{(a+t+1) mod C}. Bag-of-words views see identical unigram mass, so only
// an encoder that reads adjacent-token windows can decode them.
// Bursts make stopwords heavy-tailed per side: each side picks a few habit
// stopwords and repeats them, burying frequency-weighted document vectors in
// topic-free variance while presence-level features stay untouched.
// A lead fraction below one front-loads the topical content: tokens past the
// lead are boilerplate drawn from the side's habits, the way prose trails off
// into sign-offs and filler after the informative opening.
// Emitted tokens survive preprocessing unchanged (lowercase alphanumeric).
struct SyntheticSpec {
    std::size_t topics = 4;
    std::size_t vocab_per_topic = 40;
    std::size_t shared_vocab = 6;  // 0 makes topic vocabularies fully disjoint
    std::size_t candidates_per_topic = 100;
    std::size_t test_per_topic = 10;
    std::size_t former_min = 36;  // token count of the "abstract" part
    std::size_t former_max = 40;
    std::size_t latter_min = 36;  // token count of the "body" part
    std::size_t latter_max = 40;
    double noise = 0.3;
    std::size_t theme_size = 3;    // distinct topic words per document theme
    double theme_rate = 0.65;      // fraction of tokens drawn from the theme
    double theme_zipf = 2.5;       // concentration of the theme word selection
    std::size_t colloc_vocab = 16; // shared content pool the collocations draw on
    double colloc_rate = 0.0;      // chance a draw emits a two-token collocation
    std::size_t burst_types = 2;   // stopword habits per side (0 = plain zipf draws)
    double burst_rate = 0.0;       // fraction of tokens drawn from the side's habits
    double lead_frac = 0.55;       // fraction of each side that is topical; the rest repeats habits
    double zipf_exponent = 1.0;
    std::uint64_t seed = 42;

    void validate() const {
        if (topics < 1 || vocab_per_topic < 1 || candidates_per_topic < 1 || test_per_topic < 1)
            throw ConfigError("synthetic counts must be at least 1");
        if (former_min < 1 || former_min > former_max)
            throw ConfigError("bad former length range");
        if (latter_min < 1 || latter_min > latter_max)
            throw ConfigError("bad latter length range");
        if (!(noise >= 0.0 && noise < 1.0)) throw ConfigError("noise must be in [0, 1)");
        if (topics == 1 && noise > 0.0)
            throw ConfigError("noise needs a second topic to draw from");
        if (!(theme_rate >= 0.0 && theme_rate < 1.0))
            throw ConfigError("theme rate must be in [0, 1)");
        if (theme_size < 1) throw ConfigError("theme size must be at least 1");
        if (theme_rate > 0.0 && theme_size > vocab_per_topic)
            throw ConfigError("theme size cannot exceed the topic vocabulary");
        if (theme_zipf <= 0.0) throw ConfigError("theme zipf must be positive");
        if (!(colloc_rate >= 0.0 && colloc_rate < 1.0))
            throw ConfigError("collocation rate must be in [0, 1)");
        if (colloc_rate > 0.0 && colloc_vocab < topics + 1)
            throw ConfigError("collocation pool needs at least topics + 1 tokens");
        if (!(burst_rate >= 0.0 && burst_rate < 1.0))
            throw ConfigError("burst rate must be in [0, 1)");
        if (burst_rate > 0.0 && (burst_types < 1 || burst_types > shared_vocab))
            throw ConfigError("burst types must fit the shared vocabulary");
        if (!(lead_frac > 0.0 && lead_frac <= 1.0))
            throw ConfigError("lead fraction must be in (0, 1]");
        if (lead_frac < 1.0 && (burst_types < 1 || burst_types > shared_vocab))
            throw ConfigError("boilerplate tails need burst types within the shared vocabulary");
        if (zipf_exponent <= 0.0) throw ConfigError("zipf exponent must be positive");
    }
};

struct SyntheticCorpus {
    std::string corpus_jsonl;  // raw documents, ready for the preprocessor
    std::string qrels;         // groundtruth: same-topic candidates per test doc
};

namespace detail {

// cumulative Zipf weights: rank r (1-based) carries 1/r^s
struct ZipfTable {
    std::vector<double> cum;

    explicit ZipfTable(std::size_t ranks, double s) {
        cum.reserve(ranks);
        double total = 0.0;
        for (std::size_t r = 1; r <= ranks; ++r) {
            total += 1.0 / std::pow(static_cast<double>(r), s);
            cum.push_back(total);
        }
    }

    std::size_t draw(Rng& rng) const {
        const double x = rng.unit() * cum.back();
        auto it = std::upper_bound(cum.begin(), cum.end(), x);
        const auto idx = static_cast<std::size_t>(it - cum.begin());
        return std::min(idx, cum.size() - 1);
    }
};

}  // namespace detail

inline SyntheticCorpus generate(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, 0x515e7));

    const std::size_t full_ranks = spec.shared_vocab + spec.vocab_per_topic;
    detail::ZipfTable full_table(full_ranks, spec.zipf_exponent);
    detail::ZipfTable exclusive_table(spec.vocab_per_topic, spec.zipf_exponent);

    // rank -> token for a topic: shared pool first, then the exclusive block
    auto token_at = [&spec](std::size_t topic, std::size_t rank) {
        if (rank < spec.shared_vocab) return "sw" + std::to_string(rank);
        return "t" + std::to_string(topic) + "w" + std::to_string(rank - spec.shared_vocab);
    };

    // Zipf-weighted distinct exclusive ranks; the document's recurring words
    detail::ZipfTable theme_table(spec.vocab_per_topic, spec.theme_zipf);
    auto draw_theme = [&](std::vector<std::size_t>& theme) {
        theme.clear();
        if (spec.theme_rate <= 0.0) return;
        while (theme.size() < spec.theme_size) {
            const std::size_t r = theme_table.draw(rng);
            if (std::find(theme.begin(), theme.end(), r) == theme.end()) theme.push_back(r);
        }
    };

    // habits are uniform on purpose: concentrated picks would collapse into
    // one near-constant direction instead of per-side variance
    auto draw_burst_set = [&](std::vector<std::size_t>& habits) {
        habits.clear();
        if (spec.burst_rate <= 0.0 && spec.lead_frac >= 1.0) return;
        while (habits.size() < spec.burst_types) {
            const std::size_t r = rng.below(spec.shared_vocab);
            if (std::find(habits.begin(), habits.end(), r) == habits.end()) habits.push_back(r);
        }
    };

    auto draw_token = [&](std::size_t topic, const std::vector<std::size_t>& theme,
                          const std::vector<std::size_t>& habits) {
        if (spec.noise > 0.0 && rng.unit() < spec.noise) {
            std::size_t other = rng.below(spec.topics - 1);
            if (other >= topic) ++other;
            return token_at(other, spec.shared_vocab + exclusive_table.draw(rng));
        }
        if (!habits.empty() && rng.unit() < spec.burst_rate)
            return token_at(topic, habits[rng.index(habits.size())]);
        if (!theme.empty() && rng.unit() < spec.theme_rate)
            return token_at(topic, spec.shared_vocab + theme[rng.index(theme.size())]);
        return token_at(topic, full_table.draw(rng));
    };

    // disjoint pair sets: the offset b - a mod C identifies the topic
    auto draw_colloc = [&](std::size_t topic, std::string& text) {
        std::size_t t = topic;
        if (spec.noise > 0.0 && rng.unit() < spec.noise) {
            t = rng.below(spec.topics - 1);
            if (t >= topic) ++t;
        }
        const std::size_t a = rng.below(spec.colloc_vocab);
        const std::size_t b = (a + t + 1) % spec.colloc_vocab;
        text += "cw" + std::to_string(a) + " cw" + std::to_string(b);
    };

    std::vector<std::size_t> habits;  // per-side stopword habits
    auto draw_text = [&](std::size_t topic, const std::vector<std::size_t>& theme,
                         std::size_t lo, std::size_t hi) {
        draw_burst_set(habits);
        const std::size_t len = lo + rng.below(hi - lo + 1);
        const auto lead = static_cast<std::size_t>(
            std::ceil(static_cast<double>(len) * spec.lead_frac));
        std::string text;
        for (std::size_t k = 0; k < len;) {
            if (k) text += ' ';
            if (k >= lead) {  // boilerplate tail: the side's habits on repeat
                text += token_at(topic, habits[rng.index(habits.size())]);
                k += 1;
            } else if (spec.colloc_rate > 0.0 && k + 1 < len && rng.unit() < spec.colloc_rate) {
                draw_colloc(topic, text);
                k += 2;
            } else {
                text += draw_token(topic, theme, habits);
                k += 1;
            }
        }
        return text;
    };

    std::ostringstream corpus;
    corpus << nlohmann::ordered_json{{"part_order", {"abstract", "body"}}}.dump() << "\n";
    std::vector<std::size_t> theme;
    auto emit = [&](const std::string& id, std::size_t topic, const char* split) {
        draw_theme(theme);
        nlohmann::ordered_json j;
        j["id"] = id;
        j["split"] = split;
        j["parts"] = {{"abstract", draw_text(topic, theme, spec.former_min, spec.former_max)},
                      {"body", draw_text(topic, theme, spec.latter_min, spec.latter_max)}};
        corpus << j.dump() << "\n";
    };

    Judgments judgments;
    judgments.universe = spec.topics * spec.candidates_per_topic;
    for (std::size_t t = 0; t < spec.topics; ++t) {
        const std::string prefix = "t" + std::to_string(t);
        for (std::size_t i = 0; i < spec.candidates_per_topic; ++i)
            emit(prefix + "c" + std::to_string(i), t, "candidate");
        for (std::size_t i = 0; i < spec.test_per_topic; ++i) {
            const std::string id = prefix + "q" + std::to_string(i);
            emit(id, t, "test");
            auto& rel = judgments.relevant[id];
            for (std::size_t c = 0; c < spec.candidates_per_topic; ++c)
                rel.insert(prefix + "c" + std::to_string(c));
        }
    }

    SyntheticCorpus out;
    out.corpus_jsonl = corpus.str();
    std::ostringstream qs;
    save_qrels(judgments, qs);
    out.qrels = qs.str();
    return out;
}

inline void generate_files(const SyntheticSpec& spec, const std::string& corpus_path,
                           const std::string& qrels_path) {
    auto corpus = generate(spec);
    {
        auto os = io::open_out(corpus_path);
        os << corpus.corpus_jsonl;
    }
    {
        auto os = io::open_out(qrels_path);
        os << corpus.qrels;
    }
}

}  // namespace ctpe
