// command-line front end for the coupled text pair embedding pipeline:
//   generate | preprocess | train | embed | retrieve | evaluate | sweep-pos
// every command is deterministic for a given seed and writes a manifest
// describing its inputs, configuration, and fingerprinted outputs

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctpe/corpus.hpp"
#include "ctpe/embedding.hpp"
#include "ctpe/encoder.hpp"
#include "ctpe/evaluation.hpp"
#include "ctpe/representation.hpp"
#include "ctpe/retrieval.hpp"
#include "ctpe/synthetic.hpp"
#include "ctpe/trainer.hpp"

namespace {

using nlohmann::ordered_json;

std::string file_fingerprint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ctpe::DataError("cannot reopen output for fingerprinting: " + path);
    ctpe::io::Fnv1a hash;
    char buf[1 << 16];
    while (f.read(buf, sizeof buf) || f.gcount() > 0)
        hash.feed(buf, static_cast<std::size_t>(f.gcount()));
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << hash.state;
    return os.str();
}

// run manifest: command, config snapshot, paths, seed, timing, fingerprints.
// timing is informational only; artifact files themselves stay byte-stable.
struct Manifest {
    ordered_json doc;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    explicit Manifest(const std::string& command) {
        doc["command"] = command;
        doc["inputs"] = ordered_json::object();
        doc["outputs"] = ordered_json::object();
    }

    void config(ordered_json snapshot) { doc["config"] = std::move(snapshot); }
    void input(const std::string& name, const std::string& path) { doc["inputs"][name] = path; }
    void output(const std::string& name, const std::string& path) {
        doc["outputs"][name] = {{"path", path}, {"fingerprint", file_fingerprint(path)}};
    }
    void note(const std::string& key, ordered_json value) { doc[key] = std::move(value); }

    void write(const std::string& path) {
        if (path.empty()) return;
        const auto elapsed = std::chrono::duration<double>(
            std::chrono::steady_clock::now() - start);
        doc["elapsed_seconds"] = elapsed.count();
        auto os = ctpe::io::open_out(path);
        os << doc.dump(2) << "\n";
    }
};

std::string default_manifest(const std::string& primary_output) {
    return primary_output.empty() ? std::string() : primary_output + ".manifest.json";
}

// ---------------------------------------------------------------------------
// `key = value` configuration files; flags mirror the keys and win on conflict

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::pair<std::string, std::string>> load_config_pairs(const std::string& path) {
    auto is = ctpe::io::open_in(path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ctpe::ConfigError("expected 'key = value' in " + path + " (line " +
                                    std::to_string(line_no) + ")");
        const auto key = trim(stripped.substr(0, eq));
        const auto value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ctpe::ConfigError("empty key in " + path + " (line " +
                                    std::to_string(line_no) + ")");
        out.emplace_back(key, value);
    }
    return out;
}

void apply_config(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    for (const auto& [key, value] : load_config_pairs(path)) {
        auto* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr)
            throw ctpe::ConfigError("unknown config key '" + key + "' in " + path);
        if (opt->count() > 0) continue;  // command-line flag overrides the file
        opt->add_result(value);
        try {
            opt->run_callback();
        } catch (const CLI::ParseError& e) {
            throw ctpe::ConfigError("bad value for config key '" + key + "' in " + path + ": " +
                                    e.what());
        }
    }
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
    ctpe::SyntheticSpec spec;
    std::string corpus = "corpus.jsonl";
    std::string qrels = "qrels.txt";
    std::string manifest;
    std::string config_path;
};

void add_generate(CLI::App& app, GenerateOpts& o) {
    auto* cmd = app.add_subcommand("generate", "generate a synthetic topic corpus plus qrels");
    cmd->add_option("--config", o.config_path, "read key = value options from a file");
    cmd->add_option("--topics", o.spec.topics, "number of topics")->capture_default_str();
    cmd->add_option("--vocab-per-topic", o.spec.vocab_per_topic, "exclusive tokens per topic")
        ->capture_default_str();
    cmd->add_option("--shared-vocab", o.spec.shared_vocab,
                    "stopword-like tokens shared by all topics (0 = disjoint)")
        ->capture_default_str();
    cmd->add_option("--candidates", o.spec.candidates_per_topic, "candidate documents per topic")
        ->capture_default_str();
    cmd->add_option("--test-docs", o.spec.test_per_topic, "test documents per topic")
        ->capture_default_str();
    cmd->add_option("--former-min", o.spec.former_min, "minimum abstract length")
        ->capture_default_str();
    cmd->add_option("--former-max", o.spec.former_max, "maximum abstract length")
        ->capture_default_str();
    cmd->add_option("--latter-min", o.spec.latter_min, "minimum body length")
        ->capture_default_str();
    cmd->add_option("--latter-max", o.spec.latter_max, "maximum body length")
        ->capture_default_str();
    cmd->add_option("--noise", o.spec.noise, "fraction of tokens drawn off-topic")
        ->capture_default_str();
    cmd->add_option("--theme-size", o.spec.theme_size, "distinct theme words per document")
        ->capture_default_str();
    cmd->add_option("--theme-rate", o.spec.theme_rate,
                    "fraction of tokens drawn from the document theme (0 disables)")
        ->capture_default_str();
    cmd->add_option("--theme-zipf", o.spec.theme_zipf, "concentration of theme word selection")
        ->capture_default_str();
    cmd->add_option("--colloc-vocab", o.spec.colloc_vocab,
                    "content tokens shared by the topic collocations")
        ->capture_default_str();
    cmd->add_option("--colloc-rate", o.spec.colloc_rate,
                    "chance a draw emits a two-token topic collocation (0 disables)")
        ->capture_default_str();
    cmd->add_option("--burst-types", o.spec.burst_types, "habit stopwords per side")
        ->capture_default_str();
    cmd->add_option("--burst-rate", o.spec.burst_rate,
                    "fraction of tokens drawn from the side's habit stopwords (0 disables)")
        ->capture_default_str();
    cmd->add_option("--lead-frac", o.spec.lead_frac,
                    "fraction of each side that is topical; the rest repeats habits (1 disables)")
        ->capture_default_str();
    cmd->add_option("--zipf", o.spec.zipf_exponent, "zipf exponent of token frequencies")
        ->capture_default_str();
    cmd->add_option("--seed", o.spec.seed, "generator seed")->capture_default_str();
    cmd->add_option("--corpus", o.corpus, "output corpus JSON-lines path")->capture_default_str();
    cmd->add_option("--qrels", o.qrels, "output qrels path")->capture_default_str();
    cmd->add_option("--manifest", o.manifest, "manifest path (default <corpus>.manifest.json)");
    cmd->callback([cmd, &o] {
        apply_config(cmd, o.config_path);
        Manifest m("generate");
        ctpe::generate_files(o.spec, o.corpus, o.qrels);
        m.config({{"topics", o.spec.topics},
                  {"vocab_per_topic", o.spec.vocab_per_topic},
                  {"shared_vocab", o.spec.shared_vocab},
                  {"candidates_per_topic", o.spec.candidates_per_topic},
                  {"test_per_topic", o.spec.test_per_topic},
                  {"former_min", o.spec.former_min},
                  {"former_max", o.spec.former_max},
                  {"latter_min", o.spec.latter_min},
                  {"latter_max", o.spec.latter_max},
                  {"noise", o.spec.noise},
                  {"theme_size", o.spec.theme_size},
                  {"theme_rate", o.spec.theme_rate},
                  {"theme_zipf", o.spec.theme_zipf},
                  {"colloc_vocab", o.spec.colloc_vocab},
                  {"colloc_rate", o.spec.colloc_rate},
                  {"burst_types", o.spec.burst_types},
                  {"burst_rate", o.spec.burst_rate},
                  {"lead_frac", o.spec.lead_frac},
                  {"zipf_exponent", o.spec.zipf_exponent},
                  {"seed", o.spec.seed}});
        m.output("corpus", o.corpus);
        m.output("qrels", o.qrels);
        m.write(o.manifest.empty() ? default_manifest(o.corpus) : o.manifest);
        const auto docs =
            o.spec.topics * (o.spec.candidates_per_topic + o.spec.test_per_topic);
        std::cerr << "generated " << docs << " documents across " << o.spec.topics
                  << " topics -> " << o.corpus << ", " << o.qrels << "\n";
    });
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessOpts {
    std::string input;
    std::string output = "corpus.bin";
    std::string mode = "meaningful";
    std::size_t boundary = 1;
    double percent = 0.5;
    std::size_t l_max = 200;
    std::vector<std::string> parts;
    std::string manifest;
    std::string config_path;
};

ctpe::SegmentationSpec segmentation_from(const std::string& mode, std::size_t boundary,
                                         double percent) {
    ctpe::SegmentationSpec seg;
    if (mode == "meaningful") {
        seg.mode = ctpe::SegmentationMode::meaningful;
        seg.part_boundary = boundary;
    } else if (mode == "percent") {
        seg.mode = ctpe::SegmentationMode::percent;
        seg.percent = percent;
    } else {
        throw ctpe::ConfigError("unknown segmentation mode: " + mode);
    }
    return seg;
}

void add_preprocess(CLI::App& app, PreprocessOpts& o) {
    auto* cmd =
        app.add_subcommand("preprocess", "tokenize, segment, and index a raw JSON-lines corpus");
    cmd->add_option("--config", o.config_path, "read key = value options from a file");
    cmd->add_option("--input", o.input, "raw corpus JSON-lines")->required();
    cmd->add_option("--output", o.output, "output corpus store")->capture_default_str();
    cmd->add_option("--mode", o.mode, "segmentation mode")
        ->check(CLI::IsMember({"meaningful", "percent"}))
        ->capture_default_str();
    cmd->add_option("--boundary", o.boundary, "part index that starts the latter side")
        ->capture_default_str();
    cmd->add_option("--percent", o.percent, "split position as a fraction in (0,1)")
        ->capture_default_str();
    cmd->add_option("--l-max", o.l_max, "maximum tokens kept per side")->capture_default_str();
    cmd->add_option("--parts", o.parts, "explicit part order (comma separated)")
        ->delimiter(',');
    cmd->add_option("--manifest", o.manifest, "manifest path (default <output>.manifest.json)");
    cmd->callback([cmd, &o] {
        apply_config(cmd, o.config_path);
        Manifest m("preprocess");
        auto seg = segmentation_from(o.mode, o.boundary, o.percent);
        auto store = ctpe::load_corpus(o.input, seg, o.l_max, o.parts, &std::cerr);
        ctpe::save_store(store, o.output);
        m.config({{"mode", o.mode},
                  {"boundary", o.boundary},
                  {"percent", o.percent},
                  {"l_max", o.l_max},
                  {"parts", store.part_names}});
        m.input("raw", o.input);
        m.output("corpus", o.output);
        m.note("documents", store.documents.size());
        m.note("dropped", store.dropped_count);
        m.write(o.manifest.empty() ? default_manifest(o.output) : o.manifest);
        std::cerr << "kept " << store.documents.size() << " documents ("
                  << store.candidate_count << " candidates, " << store.test_count
                  << " test), dropped " << store.dropped_count << "\n";
    });
}

// ---------------------------------------------------------------------------
// train (flags shared with sweep-pos)

struct TrainingFlags {
    std::string backend = "random";  // random | pretrained
    std::string vectors;             // word2vec text file for the pretrained backend
    std::size_t dim = 100;           // random-backend embedding dimension
    ctpe::TrainConfig config;
    std::string sampling = "uniform";
};

void add_training_flags(CLI::App* cmd, TrainingFlags& t) {
    cmd->add_option("--backend", t.backend, "word embedding source")
        ->check(CLI::IsMember({"random", "pretrained"}))
        ->capture_default_str();
    cmd->add_option("--vectors", t.vectors, "word2vec text file (pretrained backend)");
    cmd->add_option("--dim", t.dim, "embedding dimension (random backend)")
        ->capture_default_str();
    cmd->add_option("--l", t.config.l, "sequence length per side")->capture_default_str();
    cmd->add_option("--n-f", t.config.n_f, "filters per window width")->capture_default_str();
    cmd->add_option("--widths", t.config.widths, "convolution window widths")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--margin", t.config.margin, "ranking loss margin M")->capture_default_str();
    cmd->add_option("--lr", t.config.learning_rate, "learning rate")->capture_default_str();
    cmd->add_option("--batch", t.config.batch_size, "batch size")->capture_default_str();
    cmd->add_option("--epochs", t.config.max_epochs, "maximum epochs (0 = untrained)")
        ->capture_default_str();
    cmd->add_option("--patience", t.config.patience, "epochs without improvement before stopping")
        ->capture_default_str();
    cmd->add_option("--sampling", t.sampling, "negative sampling mode")
        ->check(CLI::IsMember({"uniform", "tfidf"}))
        ->capture_default_str();
    cmd->add_option("--tfidf-pool", t.config.tfidf_pool, "tf-idf candidate pool size")
        ->capture_default_str();
    cmd->add_option("--seed", t.config.seed, "master seed")->capture_default_str();
}

ordered_json training_snapshot(const TrainingFlags& t) {
    return {{"backend", t.backend},
            {"vectors", t.vectors},
            {"dim", t.dim},
            {"l", t.config.l},
            {"n_f", t.config.n_f},
            {"widths", t.config.widths},
            {"margin", t.config.margin},
            {"learning_rate", t.config.learning_rate},
            {"batch_size", t.config.batch_size},
            {"max_epochs", t.config.max_epochs},
            {"patience", t.config.patience},
            {"sampling", t.sampling},
            {"tfidf_pool", t.config.tfidf_pool},
            {"seed", t.config.seed}};
}

ctpe::EmbeddingTable make_table(const TrainingFlags& t, const ctpe::CorpusStore& store) {
    if (t.backend == "pretrained") {
        if (t.vectors.empty())
            throw ctpe::ConfigError("--backend pretrained requires --vectors");
        return ctpe::load_word2vec(t.vectors);
    }
    return ctpe::random_table(ctpe::vocabulary(store), t.dim, t.config.seed);
}

struct TrainOpts {
    std::string corpus;
    TrainingFlags training;
    std::string model = "ctpe.ckpt";
    std::string table = "table.vec";
    std::string log;  // empty = stderr
    std::string manifest;
    std::string config_path;
};

void add_train(CLI::App& app, TrainOpts& o) {
    auto* cmd = app.add_subcommand("train", "train the twin convolutional encoder");
    cmd->add_option("--config", o.config_path, "read key = value options from a file");
    cmd->add_option("--corpus", o.corpus, "tokenized corpus store")->required();
    add_training_flags(cmd, o.training);
    cmd->add_option("--model", o.model, "output checkpoint path")->capture_default_str();
    cmd->add_option("--table", o.table, "output word embedding table (word2vec text)")
        ->capture_default_str();
    cmd->add_option("--log", o.log, "epoch log path (default stderr)");
    cmd->add_option("--manifest", o.manifest, "manifest path (default <model>.manifest.json)");
    cmd->callback([cmd, &o] {
        apply_config(cmd, o.config_path);
        Manifest m("train");
        o.training.config.sampling = ctpe::sampling_from_name(o.training.sampling);
        auto store = ctpe::load_store(o.corpus);
        auto table = make_table(o.training, store);

        std::ofstream log_file;
        std::ostream* log = &std::cerr;
        if (!o.log.empty()) {
            log_file.open(o.log);
            if (!log_file) throw ctpe::DataError("cannot open log file: " + o.log);
            log = &log_file;
        }
        auto [twin, report] = ctpe::train(store, table, o.training.config, log);
        if (log_file.is_open()) log_file.close();

        ctpe::save_checkpoint(o.model, twin, table.fingerprint());
        ctpe::save_word2vec(table, o.table);

        m.config(training_snapshot(o.training));
        m.input("corpus", o.corpus);
        if (!o.training.vectors.empty()) m.input("vectors", o.training.vectors);
        m.output("model", o.model);
        m.output("table", o.table);
        if (!o.log.empty()) m.output("log", o.log);
        m.note("report", {{"epochs", report.epochs.size()},
                          {"stopped_epoch", report.stopped_epoch},
                          {"best_epoch", report.best_epoch},
                          {"best_loss", report.best_loss},
                          {"stop_reason", report.stop_reason}});
        m.write(o.manifest.empty() ? default_manifest(o.model) : o.manifest);
        std::cerr << "trained " << report.epochs.size() << " epochs, best epoch "
                  << report.best_epoch << " (mean loss " << report.best_loss << ", "
                  << report.stop_reason << ") -> " << o.model << "\n";
    });
}

// ---------------------------------------------------------------------------
// embed

struct EmbedOpts {
    std::string corpus;
    std::string model;
    std::string table;
    std::string output = "embeddings.bin";
    std::string manifest;
    std::string config_path;
};

void add_embed(CLI::App& app, EmbedOpts& o) {
    auto* cmd = app.add_subcommand("embed", "encode every document pair with a checkpoint");
    cmd->add_option("--config", o.config_path, "read key = value options from a file");
    cmd->add_option("--corpus", o.corpus, "tokenized corpus store")->required();
    cmd->add_option("--model", o.model, "encoder checkpoint")->required();
    cmd->add_option("--table", o.table, "word embedding table (word2vec text)")->required();
    cmd->add_option("--output", o.output, "output embedding store")->capture_default_str();
    cmd->add_option("--manifest", o.manifest, "manifest path (default <output>.manifest.json)");
    cmd->callback([cmd, &o] {
        apply_config(cmd, o.config_path);
        Manifest m("embed");
        auto store = ctpe::load_store(o.corpus);
        auto table = ctpe::load_word2vec(o.table);
        auto ckpt = ctpe::load_checkpoint(o.model);
        if (ckpt.table_fingerprint != table.fingerprint())
            throw ctpe::FingerprintMismatch(
                "checkpoint was trained against a different embedding table");
        auto emb = ctpe::embed_corpus(ckpt.twin, table, store, ckpt.twin.former.l, &std::cerr);
        ctpe::save_embedding_store(emb, o.output);
        m.input("corpus", o.corpus);
        m.input("model", o.model);
        m.input("table", o.table);
        m.output("embeddings", o.output);
        m.note("documents", emb.docs.size());
        m.note("skipped", emb.skipped);
        m.write(o.manifest.empty() ? default_manifest(o.output) : o.manifest);
        std::cerr << "embedded " << emb.docs.size() << " documents (skipped " << emb.skipped
                  << ") -> " << o.output << "\n";
    });
}

// ---------------------------------------------------------------------------
// retrieve

struct RetrieveOpts {
    std::string embeddings;
    std::string baseline;  // "", "avg", "tfidf"
    std::string corpus;
    std::string table;
    std::size_t topn = 20;
    std::size_t threads = 1;
    std::string output = "run.txt";
    std::string manifest;
    std::string config_path;
};

void add_retrieve(CLI::App& app, RetrieveOpts& o) {
    auto* cmd = app.add_subcommand(
        "retrieve", "rank candidates for every test document (pair similarity or baseline)");
    cmd->add_option("--config", o.config_path, "read key = value options from a file");
    cmd->add_option("--embeddings", o.embeddings, "embedding store (pair-similarity mode)");
    cmd->add_option("--baseline", o.baseline, "single-vector baseline instead of pair scoring")
        ->check(CLI::IsMember({"avg", "tfidf"}));
    cmd->add_option("--corpus", o.corpus, "tokenized corpus store (baselines)");
    cmd->add_option("--table", o.table, "word embedding table (avg baseline)");
    cmd->add_option("--topn", o.topn, "results per query")->capture_default_str();
    cmd->add_option("--threads", o.threads, "worker threads")->capture_default_str();
    cmd->add_option("--output", o.output, "output run file")->capture_default_str();
    cmd->add_option("--manifest", o.manifest, "manifest path (default <output>.manifest.json)");
    cmd->callback([cmd, &o] {
        apply_config(cmd, o.config_path);
        Manifest m("retrieve");
        std::vector<ctpe::RankedList> run;
        if (o.baseline.empty()) {
            if (o.embeddings.empty())
                throw ctpe::ConfigError("pair-similarity retrieval requires --embeddings");
            auto store = ctpe::load_embedding_store(o.embeddings);
            run = ctpe::rank_all(store, o.topn, o.threads);
            m.input("embeddings", o.embeddings);
        } else if (o.baseline == "avg") {
            if (o.corpus.empty() || o.table.empty())
                throw ctpe::ConfigError("avg baseline requires --corpus and --table");
            auto store = ctpe::load_store(o.corpus);
            auto table = ctpe::load_word2vec(o.table);
            auto vectors = ctpe::avg_vectors(store, table, &std::cerr);
            for (const auto& [id, doc] : vectors)
                if (doc.split == ctpe::Split::test)
                    run.push_back(ctpe::baseline_top_n(id, vectors, o.topn));
            m.input("corpus", o.corpus);
            m.input("table", o.table);
        } else {  // tfidf
            if (o.corpus.empty()) throw ctpe::ConfigError("tfidf baseline requires --corpus");
            auto store = ctpe::load_store(o.corpus);
            auto index = ctpe::TfIdfIndex::build(store);
            for (const auto& id : index.doc_ids)
                if (store.documents.at(id).split == ctpe::Split::test)
                    run.push_back(ctpe::baseline_top_n(id, index, store, o.topn));
            m.input("corpus", o.corpus);
        }
        ctpe::save_run(run, o.output);
        m.config({{"baseline", o.baseline.empty() ? "pair" : o.baseline},
                  {"topn", o.topn},
                  {"threads", o.threads}});
        m.output("run", o.output);
        m.note("queries", run.size());
        m.write(o.manifest.empty() ? default_manifest(o.output) : o.manifest);
        std::cerr << "ranked " << run.size() << " queries -> " << o.output << "\n";
    });
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
    std::string run;
    std::string qrels;
    std::size_t topn = 20;
    std::size_t cutoff = 0;
    std::size_t universe = 0;
    std::string report;  // empty = stdout
    std::string json;
    std::string manifest;
    std::string config_path;
};

void add_evaluate(CLI::App& app, EvaluateOpts& o) {
    auto* cmd = app.add_subcommand("evaluate", "score a run file against qrels");
    cmd->add_option("--config", o.config_path, "read key = value options from a file");
    cmd->add_option("--run", o.run, "run file")->required();
    cmd->add_option("--qrels", o.qrels, "relevance judgments")->required();
    cmd->add_option("--topn", o.topn, "cutoff for P/R/F1")->capture_default_str();
    cmd->add_option("--cutoff", o.cutoff, "rank cutoff for AP/NDCG/bpref (0 = full ranking)")
        ->capture_default_str();
    cmd->add_option("--universe", o.universe,
                    "candidate pool size for bpref (0 = derive from inputs)")
        ->capture_default_str();
    cmd->add_option("--report", o.report, "text report path (default stdout)");
    cmd->add_option("--json", o.json, "machine-readable report path");
    cmd->add_option("--manifest", o.manifest, "manifest path (default <report>.manifest.json)");
    cmd->callback([cmd, &o] {
        apply_config(cmd, o.config_path);
        Manifest m("evaluate");
        auto runs = ctpe::load_run(o.run);
        auto judgments = ctpe::load_qrels(o.qrels);
        if (o.universe != 0) judgments.universe = o.universe;
        auto report = ctpe::evaluate_run(runs, judgments, o.topn, o.cutoff);
        const auto text = ctpe::render_text(report);
        if (o.report.empty()) {
            std::cout << text;
        } else {
            auto os = ctpe::io::open_out(o.report);
            os << text;
        }
        if (!o.json.empty()) {
            auto os = ctpe::io::open_out(o.json);
            os << ctpe::report_json(report).dump(2) << "\n";
        }
        m.config({{"topn", o.topn}, {"cutoff", o.cutoff}, {"universe", report.universe}});
        m.input("run", o.run);
        m.input("qrels", o.qrels);
        if (!o.report.empty()) m.output("report", o.report);
        if (!o.json.empty()) m.output("json", o.json);
        std::string manifest_path = o.manifest;
        if (manifest_path.empty() && !o.report.empty()) manifest_path = default_manifest(o.report);
        if (manifest_path.empty() && !o.json.empty()) manifest_path = default_manifest(o.json);
        m.write(manifest_path);
    });
}

// ---------------------------------------------------------------------------
// sweep-pos

struct SweepOpts {
    std::string corpus;
    std::string qrels;
    std::vector<double> positions = {0.2, 0.4, 0.6, 0.8};
    bool no_meaningful = false;
    std::size_t boundary = 1;
    TrainingFlags training;
    std::size_t topn = 20;
    std::size_t threads = 1;
    std::string output;  // summary table path; empty = stdout
    std::string json;
    std::string report_dir;  // optional per-position text reports
    std::string manifest;
    std::string config_path;
};

std::string position_label(double p) {
    const double pct = p * 100.0;
    std::ostringstream os;
    if (std::abs(pct - std::round(pct)) < 1e-9)
        os << static_cast<long long>(std::llround(pct)) << "%";
    else
        os << std::fixed << std::setprecision(1) << pct << "%";
    return os.str();
}

void add_sweep(CLI::App& app, SweepOpts& o) {
    auto* cmd = app.add_subcommand(
        "sweep-pos", "retrain and evaluate across segmentation positions plus the part seam");
    cmd->add_option("--config", o.config_path, "read key = value options from a file");
    cmd->add_option("--corpus", o.corpus, "tokenized corpus store")->required();
    cmd->add_option("--qrels", o.qrels, "relevance judgments")->required();
    cmd->add_option("--positions", o.positions, "percent split positions")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_flag("--no-meaningful", o.no_meaningful, "skip the part-seam row");
    cmd->add_option("--boundary", o.boundary, "part index that starts the latter side")
        ->capture_default_str();
    add_training_flags(cmd, o.training);
    cmd->add_option("--topn", o.topn, "results per query")->capture_default_str();
    cmd->add_option("--threads", o.threads, "worker threads for retrieval")
        ->capture_default_str();
    cmd->add_option("--output", o.output, "summary table path (default stdout)");
    cmd->add_option("--json", o.json, "machine-readable summary path");
    cmd->add_option("--report-dir", o.report_dir, "directory for per-position text reports");
    cmd->add_option("--manifest", o.manifest, "manifest path (default <output>.manifest.json)");
    cmd->callback([cmd, &o] {
        apply_config(cmd, o.config_path);
        Manifest m("sweep-pos");
        o.training.config.sampling = ctpe::sampling_from_name(o.training.sampling);
        const auto base = ctpe::load_store(o.corpus);
        const auto judgments_base = ctpe::load_qrels(o.qrels);

        struct Row {
            std::string label;
            ctpe::QueryMetrics mean;
            std::size_t documents = 0;
        };
        std::vector<Row> rows;
        ordered_json json_rows = ordered_json::array();

        auto run_position = [&](const std::string& label, const ctpe::SegmentationSpec& seg) {
            ctpe::CorpusStore store = base;
            ctpe::resegment(store, seg, &std::cerr);
            auto table = make_table(o.training, store);
            auto [twin, report] = ctpe::train(store, table, o.training.config, &std::cerr);
            auto emb =
                ctpe::embed_corpus(twin, table, store, o.training.config.l, &std::cerr);
            auto run = ctpe::rank_all(emb, o.topn, o.threads);
            auto judgments = judgments_base;
            if (judgments.universe == 0) judgments.universe = store.candidate_count;
            auto metrics = ctpe::evaluate_run(run, judgments, o.topn);
            rows.push_back({label, metrics.mean, store.documents.size()});
            ordered_json r = {{"position", label},       {"p", metrics.mean.p},
                              {"r", metrics.mean.r},     {"f1", metrics.mean.f1},
                              {"map", metrics.mean.ap},  {"ndcg", metrics.mean.ndcg},
                              {"bpref", metrics.mean.bpref}};
            json_rows.push_back(std::move(r));
            if (!o.report_dir.empty()) {
                std::string name = label;
                for (auto& c : name)
                    if (c == '%') c = 'p';
                auto os = ctpe::io::open_out(o.report_dir + "/pos_" + name + ".txt");
                os << ctpe::render_text(metrics);
            }
            std::cerr << "position " << label << ": map "
                      << ctpe::io::format_double(metrics.mean.ap) << " over "
                      << store.documents.size() << " documents\n";
        };

        auto positions = o.positions;
        std::sort(positions.begin(), positions.end());
        for (double p : positions) {
            ctpe::SegmentationSpec seg;
            seg.mode = ctpe::SegmentationMode::percent;
            seg.percent = p;
            run_position(position_label(p), seg);
        }
        const bool seams = base.part_names.size() > o.boundary;
        if (!o.no_meaningful) {
            if (seams) {
                ctpe::SegmentationSpec seg;
                seg.mode = ctpe::SegmentationMode::meaningful;
                seg.part_boundary = o.boundary;
                run_position("m", seg);
            } else {
                std::cerr << "warning: corpus has no part seam at boundary " << o.boundary
                          << "; skipping the meaningful row\n";
            }
        }

        std::ostringstream table;
        table << std::left << std::setw(8) << "pos" << std::right;
        for (const char* h : {"P", "R", "F1", "MAP", "NDCG", "bpref"})
            table << std::setw(9) << h;
        table << "\n";
        for (const auto& row : rows) {
            table << std::left << std::setw(8) << row.label << std::right << std::fixed
                  << std::setprecision(4) << std::setw(9) << row.mean.p << std::setw(9)
                  << row.mean.r << std::setw(9) << row.mean.f1 << std::setw(9) << row.mean.ap
                  << std::setw(9) << row.mean.ndcg << std::setw(9) << row.mean.bpref << "\n";
        }
        if (o.output.empty()) {
            std::cout << table.str();
        } else {
            auto os = ctpe::io::open_out(o.output);
            os << table.str();
        }
        if (!o.json.empty()) {
            auto os = ctpe::io::open_out(o.json);
            os << json_rows.dump(2) << "\n";
        }

        m.config(training_snapshot(o.training));
        m.doc["config"]["positions"] = o.positions;
        m.doc["config"]["boundary"] = o.boundary;
        m.doc["config"]["topn"] = o.topn;
        m.input("corpus", o.corpus);
        m.input("qrels", o.qrels);
        if (!o.output.empty()) m.output("table", o.output);
        if (!o.json.empty()) m.output("json", o.json);
        std::string manifest_path = o.manifest;
        if (manifest_path.empty() && !o.output.empty()) manifest_path = default_manifest(o.output);
        m.write(manifest_path);
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coupled text pair embeddings: unsupervised document "
                 "representation via former/latter coupling"};
    app.require_subcommand(1);

    GenerateOpts generate_opts;
    PreprocessOpts preprocess_opts;
    TrainOpts train_opts;
    EmbedOpts embed_opts;
    RetrieveOpts retrieve_opts;
    EvaluateOpts evaluate_opts;
    SweepOpts sweep_opts;

    add_generate(app, generate_opts);
    add_preprocess(app, preprocess_opts);
    add_train(app, train_opts);
    add_embed(app, embed_opts);
    add_retrieve(app, retrieve_opts);
    add_evaluate(app, evaluate_opts);
    add_sweep(app, sweep_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ctpe::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case ctpe::ErrorKind::config: return 2;
            case ctpe::ErrorKind::data: return 3;
            case ctpe::ErrorKind::internal: return 4;
        }
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
