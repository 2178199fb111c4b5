#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ctpe/corpus.hpp"
#include "ctpe/embedding.hpp"
#include "ctpe/encoder.hpp"
#include "ctpe/error.hpp"
#include "ctpe/rng.hpp"

// Training loop: per-epoch negative resampling, the margin ranking loss over
// coupled/uncoupled text pairs, hand-assembled gradients through both towers,
// Adam updates, and patience-based early stopping.

namespace ctpe {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

enum class NegativeMode { uniform, tfidf };

inline std::string sampling_name(NegativeMode m) {
    return m == NegativeMode::uniform ? "uniform" : "tfidf";
}

inline NegativeMode sampling_from_name(const std::string& s) {
    if (s == "uniform") return NegativeMode::uniform;
    if (s == "tfidf") return NegativeMode::tfidf;
    throw ConfigError("unknown sampling mode: " + s);
}

struct TrainConfig {
    std::size_t l = 200;
    std::size_t n_f = 1024;
    std::vector<std::size_t> widths = {1, 2, 3, 5};
    double margin = 0.1;
    double learning_rate = 0.001;
    std::size_t batch_size = 200;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    NegativeMode sampling = NegativeMode::uniform;
    std::size_t tfidf_pool = 100;  // |T_k| for tfidf sampling
    std::uint64_t seed = 42;

    void validate() const {
        if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
        if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (tfidf_pool < 1) throw ConfigError("tfidf pool size must be >= 1");
        validate_widths(widths, l);
    }
};

// Eq. 1 as implemented: L = max(0, M - (cos_pos - cos_neg))
inline double hinge_loss(double cos_pos, double cos_neg, double margin) {
    return std::max(0.0, margin - (cos_pos - cos_neg));
}

// ---------------------------------------------------------------------------
// negative sampling

struct NegativeDraw {
    std::string other_id;
    bool former_from_other = false;  // true -> (f_j, b_i); false -> (f_i, b_j)
    bool from_topk = false;          // which branch the tfidf coin picked
};

struct SamplerContext {
    std::vector<std::string> doc_ids;             // sorted
    std::vector<std::vector<std::size_t>> pools;  // tfidf: top-k slots per doc
};

inline SamplerContext make_sampler(const CorpusStore& store, NegativeMode mode,
                                   const TfIdfIndex* index, std::size_t pool_size) {
    SamplerContext ctx;
    for (const auto& [id, pair] : store.pairs) ctx.doc_ids.push_back(id);
    if (ctx.doc_ids.size() < 2)
        throw CorpusTooSmall("negative sampling needs at least 2 documents, have " +
                             std::to_string(ctx.doc_ids.size()));
    if (mode == NegativeMode::tfidf) {
        if (!index) throw ConfigError("tfidf sampling requires a tf-idf index");
        if (index->doc_ids != ctx.doc_ids)
            throw InternalError("tf-idf index does not cover the training corpus");
        ctx.pools.resize(ctx.doc_ids.size());
        for (std::size_t i = 0; i < ctx.doc_ids.size(); ++i)
            ctx.pools[i] = index->top_k(i, pool_size);
    }
    return ctx;
}

// One fresh draw per document: uniform picks d_j from D\{d_i}; tfidf flips a
// coin between the top-k pool and D\{d_i}; a second coin picks the uncoupled
// shape (f_i,b_j) vs (f_j,b_i).
inline std::map<std::string, NegativeDraw> sample_negatives(const SamplerContext& ctx,
                                                            NegativeMode mode,
                                                            std::uint64_t seed) {
    const std::size_t n = ctx.doc_ids.size();
    Rng rng(seed);
    std::map<std::string, NegativeDraw> out;
    for (std::size_t i = 0; i < n; ++i) {
        NegativeDraw d;
        bool pooled = mode == NegativeMode::tfidf && rng.coin();
        if (pooled) {
            const auto& pool = ctx.pools[i];
            d.other_id = ctx.doc_ids[pool[rng.index(pool.size())]];
            d.from_topk = true;
        } else {
            std::size_t j = rng.index(n - 1);
            if (j >= i) ++j;
            d.other_id = ctx.doc_ids[j];
        }
        d.former_from_other = rng.coin();
        out.emplace(ctx.doc_ids[i], d);
    }
    return out;
}

inline std::map<std::string, NegativeDraw> sample_negatives(const CorpusStore& store,
                                                            NegativeMode mode,
                                                            const TfIdfIndex* index,
                                                            std::uint64_t seed,
                                                            std::size_t pool_size = 100) {
    return sample_negatives(make_sampler(store, mode, index, pool_size), mode, seed);
}

// ---------------------------------------------------------------------------
// batch gradients

struct PairSample {
    const std::vector<std::string>* pos_f = nullptr;
    const std::vector<std::string>* pos_b = nullptr;
    const std::vector<std::string>* neg_f = nullptr;
    const std::vector<std::string>* neg_b = nullptr;
    std::string doc_id;  // for skip diagnostics
};

struct PairBatch {
    std::vector<PairSample> samples;
};

struct BatchResult {
    EncoderParams grad_former;
    EncoderParams grad_latter;
    double mean_loss = 0.0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;
};

namespace detail {

struct SideEval {
    std::vector<double> out;
    ForwardTrace trace;
    std::vector<double> grad;  // accumulated d(loss)/d(out)
};

}  // namespace detail

// Mean gradient of the hinge loss over the batch. Both f-sides (positive and
// negative) flow through the former tower and both b-sides through the
// latter. Samples with an un-encodable side (all tokens OOV, or shorter than
// the widest window) are skipped and counted.
inline BatchResult batch_gradients(const TwinEncoder& twin, const PairBatch& batch,
                                   const EmbeddingTable& table, const TrainConfig& config,
                                   std::ostream* skip_log = nullptr) {
    BatchResult res;
    res.grad_former = zero_like(twin.former);
    res.grad_latter = zero_like(twin.latter);
    double loss_sum = 0.0;

    for (const auto& s : batch.samples) {
        // distinct sides per tower; the negative often aliases a positive side.
        // insertion-ordered so gradient accumulation never depends on where the
        // token vectors happen to live in memory
        using SideList = std::vector<std::pair<const std::vector<std::string>*, detail::SideEval>>;
        SideList former_sides, latter_sides;
        former_sides.reserve(2);
        latter_sides.reserve(2);
        auto eval_side = [&](SideList& sides, const EncoderParams& tower,
                             const std::vector<std::string>* tokens) -> detail::SideEval* {
            for (auto& [key, ev] : sides)
                if (key == tokens) return &ev;
            auto m = build_sequence(*tokens, table, config.l);
            if (m.valid_len < tower.max_width()) return nullptr;
            detail::SideEval ev;
            ev.out = forward(tower, m, &ev.trace);
            ev.grad.assign(ev.out.size(), 0.0);
            return &sides.emplace_back(tokens, std::move(ev)).second;
        };

        auto* pf = eval_side(former_sides, twin.former, s.pos_f);
        auto* pb = eval_side(latter_sides, twin.latter, s.pos_b);
        auto* nf = eval_side(former_sides, twin.former, s.neg_f);
        auto* nb = eval_side(latter_sides, twin.latter, s.neg_b);
        if (!pf || !pb || !nf || !nb) {
            ++res.skipped;
            if (skip_log)
                *skip_log << "warning: skipping sample for document " << s.doc_id
                          << " (side too short or fully out of vocabulary)\n";
            continue;
        }

        bool zero = false;
        for (auto* ev : {pf, pb, nf, nb})
            if (norm(ev->out) == 0.0) zero = true;
        if (zero) {
            // all-dead encoder output; cosine undefined, treat like a skip
            ++res.skipped;
            if (skip_log)
                *skip_log << "warning: skipping sample for document " << s.doc_id
                          << " (zero encoder output)\n";
            continue;
        }

        auto pos = cosine_with_grad(pf->out, pb->out);
        auto neg = cosine_with_grad(nf->out, nb->out);
        const double loss = hinge_loss(pos.value, neg.value, config.margin);
        loss_sum += loss;
        ++res.evaluated;
        if (loss > 0.0) {
            // dL/dcos_pos = -1, dL/dcos_neg = +1
            for (std::size_t k = 0; k < pf->grad.size(); ++k) {
                pf->grad[k] -= pos.du[k];
                pb->grad[k] -= pos.dv[k];
                nf->grad[k] += neg.du[k];
                nb->grad[k] += neg.dv[k];
            }
        }
        for (auto& [tokens, ev] : former_sides)
            backward(twin.former, ev.trace, ev.grad, res.grad_former);
        for (auto& [tokens, ev] : latter_sides)
            backward(twin.latter, ev.trace, ev.grad, res.grad_latter);
    }

    if (res.evaluated > 0) {
        const double inv = 1.0 / static_cast<double>(res.evaluated);
        for (auto* g : {&res.grad_former, &res.grad_latter})
            for (auto& b : g->blocks) {
                for (auto& v : b.kernels) v *= inv;
                for (auto& v : b.bias) v *= inv;
            }
        res.mean_loss = loss_sum * inv;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    std::uint64_t t = 0;
    TwinEncoder m;  // first moments, shaped like the parameters
    TwinEncoder v;  // second moments
};

inline AdamState make_adam(const TwinEncoder& twin) {
    AdamState s;
    s.m.former = zero_like(twin.former);
    s.m.latter = zero_like(twin.latter);
    s.v = s.m;
    return s;
}

namespace detail {

inline void adam_tensor(std::vector<double>& theta, const std::vector<double>& g,
                        std::vector<double>& m, std::vector<double>& v, double ln, double bc1,
                        double bc2) {
    if (theta.size() != g.size()) throw ShapeMismatch("gradient tensor shape differs");
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        theta[i] -= ln * mhat / (std::sqrt(vhat) + kAdamEps);
    }
}

inline void adam_tower(EncoderParams& params, const EncoderParams& grads, EncoderParams& m,
                       EncoderParams& v, double ln, double bc1, double bc2) {
    if (params.blocks.size() != grads.blocks.size())
        throw ShapeMismatch("gradient block count differs");
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        adam_tensor(params.blocks[b].kernels, grads.blocks[b].kernels, m.blocks[b].kernels,
                    v.blocks[b].kernels, ln, bc1, bc2);
        adam_tensor(params.blocks[b].bias, grads.blocks[b].bias, m.blocks[b].bias,
                    v.blocks[b].bias, ln, bc1, bc2);
    }
}

}  // namespace detail

// one bias-corrected Adam step over both towers
inline void adam_step(AdamState& state, TwinEncoder& twin, const TwinEncoder& grads, double ln) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
    detail::adam_tower(twin.former, grads.former, state.m.former, state.v.former, ln, bc1, bc2);
    detail::adam_tower(twin.latter, grads.latter, state.m.latter, state.v.latter, ln, bc1, bc2);
}

// ---------------------------------------------------------------------------
// training loop

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double seconds = 0.0;
    std::size_t skipped = 0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t stopped_epoch = 0;
    std::size_t best_epoch = 0;
    double best_loss = 0.0;
    std::string stop_reason;  // no_training | max_epochs | early_stop
};

// Alg. flow per epoch: resample negatives, shuffle documents, walk batches
// with gradient + Adam. Keeps the parameters of the best-mean-loss epoch;
// stops after `patience` epochs without strict improvement. max_epochs = 0
// returns the freshly initialized twin (the untrained ablation).
inline std::pair<TwinEncoder, TrainReport> train(const CorpusStore& store,
                                                 const EmbeddingTable& table,
                                                 const TrainConfig& config,
                                                 std::ostream* log = nullptr) {
    config.validate();
    TwinEncoder twin =
        init_twin(table.dim, config.l, config.n_f, config.widths, derive_seed(config.seed, 1));
    TrainReport report;
    if (config.max_epochs == 0) {
        report.stop_reason = "no_training";
        return {std::move(twin), std::move(report)};
    }

    const TfIdfIndex index =
        config.sampling == NegativeMode::tfidf ? TfIdfIndex::build(store) : TfIdfIndex{};
    SamplerContext sampler = make_sampler(
        store, config.sampling, config.sampling == NegativeMode::tfidf ? &index : nullptr,
        config.tfidf_pool);

    AdamState adam = make_adam(twin);
    TwinEncoder best = twin;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t stale = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        auto negatives =
            sample_negatives(sampler, config.sampling, derive_seed(config.seed, 1000 + epoch));
        std::vector<std::string> order = sampler.doc_ids;
        Rng shuffler(derive_seed(config.seed, 2000000 + epoch));
        shuffler.shuffle(order);

        double loss_sum = 0.0;
        std::size_t evaluated = 0, skipped = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            PairBatch batch;
            batch.samples.reserve(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                const auto& id = order[k];
                const auto& pos = store.pairs.at(id);
                const auto& draw = negatives.at(id);
                const auto& other = store.pairs.at(draw.other_id);
                PairSample s;
                s.doc_id = id;
                s.pos_f = &pos.f;
                s.pos_b = &pos.b;
                if (draw.former_from_other) {
                    s.neg_f = &other.f;
                    s.neg_b = &pos.b;
                } else {
                    s.neg_f = &pos.f;
                    s.neg_b = &other.b;
                }
                batch.samples.push_back(s);
            }
            auto res = batch_gradients(twin, batch, table, config, log);
            skipped += res.skipped;
            if (res.evaluated == 0) continue;  // nothing to learn from
            loss_sum += res.mean_loss * static_cast<double>(res.evaluated);
            evaluated += res.evaluated;
            TwinEncoder grads;
            grads.former = std::move(res.grad_former);
            grads.latter = std::move(res.grad_latter);
            adam_step(adam, twin, grads, config.learning_rate);
        }
        if (evaluated == 0)
            throw CorpusTooSmall("no trainable sample in the corpus (every side skipped)");

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = loss_sum / static_cast<double>(evaluated);
        rec.skipped = skipped;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(rec);
        if (log)
            *log << "epoch " << epoch << " mean_loss " << io::format_double(rec.mean_loss)
                 << " seconds " << io::format_double(rec.seconds) << "\n";

        report.stopped_epoch = epoch;
        if (rec.mean_loss < best_loss) {
            best_loss = rec.mean_loss;
            best = twin;
            best_epoch = epoch;
            stale = 0;
        } else {
            ++stale;
            if (stale >= config.patience) {
                report.stop_reason = "early_stop";
                break;
            }
        }
    }
    if (report.stop_reason.empty()) report.stop_reason = "max_epochs";
    report.best_epoch = best_epoch;
    report.best_loss = best_loss;
    return {std::move(best), std::move(report)};
}

}  // namespace ctpe
