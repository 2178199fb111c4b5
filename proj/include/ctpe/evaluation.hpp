#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctpe/error.hpp"
#include "ctpe/io.hpp"
#include "ctpe/retrieval.hpp"

namespace ctpe {

// per-query relevant ids plus the candidate pool size they were judged
// against; the pool size feeds bpref's judged-nonrelevant denominator
struct Judgments {
    std::map<std::string, std::set<std::string>> relevant;
    std::size_t universe = 0;  // 0 = derive from run + judgments at evaluation time
};

// qrels lines: `query_id candidate_id 1` (0 lines are judged-nonrelevant, ignored
// here because evaluation treats the whole candidate pool as judged)
inline Judgments load_qrels(std::istream& is) {
    Judgments j;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto f = detail::fields(line);
        if (f.empty()) continue;
        std::size_t grade = 0;
        if (f.size() != 3 || !detail::parse_size(f[2], grade))
            throw ParseError("expected 'query candidate grade'", line_no);
        if (grade != 0) j.relevant[f[0]].insert(f[1]);
    }
    if (j.relevant.empty()) throw EmptyJudgments("no relevant pairs in qrels");
    return j;
}

inline Judgments load_qrels(const std::string& path) {
    auto is = io::open_in(path);
    return load_qrels(is);
}

inline void save_qrels(const Judgments& j, std::ostream& os) {
    for (const auto& [query, rel] : j.relevant)
        for (const auto& id : rel) os << query << ' ' << id << " 1\n";
}

inline void save_qrels(const Judgments& j, const std::string& path) {
    auto os = io::open_out(path);
    save_qrels(j, os);
}

struct PrfResult {
    double p = 0.0;
    double r = 0.0;
    double f1 = 0.0;
};

// P@n divides by n even when the ranking is shorter; short runs pay for it
inline PrfResult prf_at_n(const std::vector<std::string>& ranked,
                          const std::set<std::string>& rel, std::size_t n) {
    if (rel.empty()) throw EmptyJudgments("no relevant documents for query");
    if (n == 0) throw ConfigError("top-n must be at least 1");
    std::size_t hits = 0;
    for (std::size_t k = 0; k < ranked.size() && k < n; ++k)
        if (rel.count(ranked[k])) ++hits;
    PrfResult out;
    out.p = static_cast<double>(hits) / static_cast<double>(n);
    out.r = static_cast<double>(hits) / static_cast<double>(rel.size());
    out.f1 = (out.p + out.r) == 0.0 ? 0.0 : 2.0 * out.p * out.r / (out.p + out.r);
    return out;
}

// AP = (1/|rel|) sum over relevant hits at rank k of precision@k;
// cutoff 0 scores the full ranking
inline double average_precision(const std::vector<std::string>& ranked,
                                const std::set<std::string>& rel, std::size_t cutoff = 0) {
    if (rel.empty()) throw EmptyJudgments("no relevant documents for query");
    const std::size_t limit = cutoff == 0 ? ranked.size() : std::min(cutoff, ranked.size());
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < limit; ++k) {
        if (rel.count(ranked[k])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(rel.size());
}

// binary gains, discount 1/log2(rank+1) from rank 1; the ideal ranking packs
// min(|rel|, n) relevant documents at the top; n = 0 means n = |ranking|
inline double ndcg(const std::vector<std::string>& ranked, const std::set<std::string>& rel,
                   std::size_t n = 0) {
    if (rel.empty()) throw EmptyJudgments("no relevant documents for query");
    const std::size_t effective_n = n == 0 ? ranked.size() : n;
    if (effective_n == 0) return 0.0;
    double dcg = 0.0;
    for (std::size_t k = 0; k < ranked.size() && k < effective_n; ++k)
        if (rel.count(ranked[k])) dcg += 1.0 / std::log2(static_cast<double>(k + 2));
    double idcg = 0.0;
    const std::size_t ideal = std::min(rel.size(), effective_n);
    for (std::size_t k = 0; k < ideal; ++k) idcg += 1.0 / std::log2(static_cast<double>(k + 2));
    return dcg / idcg;
}

// bpref = (1/R) sum over relevant hits of 1 - min(nonrel_above, R)/min(R, N_nonrel);
// complete judgment: every ranked non-relevant candidate counts as judged nonrelevant
inline double bpref(const std::vector<std::string>& ranked, const std::set<std::string>& rel,
                    std::size_t judged_nonrel_count, std::size_t cutoff = 0) {
    if (rel.empty()) throw EmptyJudgments("no relevant documents for query");
    const double denom =
        static_cast<double>(std::min<std::size_t>(rel.size(), judged_nonrel_count));
    const std::size_t limit = cutoff == 0 ? ranked.size() : std::min(cutoff, ranked.size());
    std::size_t nonrel_above = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < limit; ++k) {
        if (rel.count(ranked[k])) {
            const auto capped = std::min<std::size_t>(nonrel_above, rel.size());
            sum += denom == 0.0 ? 1.0 : 1.0 - static_cast<double>(capped) / denom;
        } else {
            ++nonrel_above;
        }
    }
    return sum / static_cast<double>(rel.size());
}

// explicit-judgment variant: only ids in judged_nonrel count against a hit
inline double bpref(const std::vector<std::string>& ranked, const std::set<std::string>& rel,
                    const std::set<std::string>& judged_nonrel, std::size_t cutoff = 0) {
    if (rel.empty()) throw EmptyJudgments("no relevant documents for query");
    const double denom = static_cast<double>(std::min(rel.size(), judged_nonrel.size()));
    const std::size_t limit = cutoff == 0 ? ranked.size() : std::min(cutoff, ranked.size());
    std::size_t nonrel_above = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < limit; ++k) {
        if (rel.count(ranked[k])) {
            const auto capped = std::min<std::size_t>(nonrel_above, rel.size());
            sum += denom == 0.0 ? 1.0 : 1.0 - static_cast<double>(capped) / denom;
        } else if (judged_nonrel.count(ranked[k])) {
            ++nonrel_above;
        }
    }
    return sum / static_cast<double>(rel.size());
}

struct QueryMetrics {
    double p = 0.0;
    double r = 0.0;
    double f1 = 0.0;
    double ap = 0.0;
    double ndcg = 0.0;
    double bpref = 0.0;
};

struct MetricsReport {
    std::size_t top_n = 20;
    std::size_t rank_cutoff = 0;  // 0 = AP/NDCG/bpref score the full ranking
    std::size_t universe = 0;     // candidate pool size used for bpref
    std::size_t missing = 0;      // judged queries absent from the run (scored 0)
    std::map<std::string, QueryMetrics> per_query;
    QueryMetrics mean;
};

inline MetricsReport evaluate_run(const std::vector<RankedList>& run, const Judgments& judgments,
                                  std::size_t top_n = 20, std::size_t rank_cutoff = 0) {
    if (judgments.relevant.empty()) throw EmptyJudgments("no judged queries");
    std::map<std::string, const RankedList*> by_query;
    for (const auto& list : run) {
        if (!judgments.relevant.count(list.query_id))
            throw UnknownQuery("run query '" + list.query_id + "' has no judgments");
        by_query[list.query_id] = &list;
    }

    MetricsReport report;
    report.top_n = top_n;
    report.rank_cutoff = rank_cutoff;
    report.universe = judgments.universe;
    if (report.universe == 0) {
        std::set<std::string> ids;
        for (const auto& [query, rel] : judgments.relevant) ids.insert(rel.begin(), rel.end());
        for (const auto& list : run)
            for (const auto& item : list.items) ids.insert(item.id);
        report.universe = ids.size();
    }

    for (const auto& [query, rel] : judgments.relevant) {
        if (rel.empty()) throw EmptyJudgments("query '" + query + "' has an empty relevant set");
        QueryMetrics qm;
        auto it = by_query.find(query);
        if (it == by_query.end()) {
            ++report.missing;
        } else {
            std::vector<std::string> ranked;
            ranked.reserve(it->second->items.size());
            for (const auto& item : it->second->items) ranked.push_back(item.id);
            auto prf = prf_at_n(ranked, rel, top_n);
            qm.p = prf.p;
            qm.r = prf.r;
            qm.f1 = prf.f1;
            qm.ap = average_precision(ranked, rel, rank_cutoff);
            qm.ndcg = ndcg(ranked, rel, rank_cutoff);
            const std::size_t nonrel =
                report.universe > rel.size() ? report.universe - rel.size() : 0;
            qm.bpref = bpref(ranked, rel, nonrel, rank_cutoff);
        }
        report.mean.p += qm.p;
        report.mean.r += qm.r;
        report.mean.f1 += qm.f1;
        report.mean.ap += qm.ap;
        report.mean.ndcg += qm.ndcg;
        report.mean.bpref += qm.bpref;
        report.per_query.emplace(query, qm);
    }
    const double q = static_cast<double>(report.per_query.size());
    report.mean.p /= q;
    report.mean.r /= q;
    report.mean.f1 /= q;
    report.mean.ap /= q;
    report.mean.ndcg /= q;
    report.mean.bpref /= q;
    return report;
}

inline MetricsReport evaluate_run_file(const std::string& run_path, const Judgments& judgments,
                                       std::size_t top_n = 20, std::size_t rank_cutoff = 0) {
    return evaluate_run(load_run(run_path), judgments, top_n, rank_cutoff);
}

// aligned-column text report; the summary row is labeled "all" trec_eval-style
inline std::string render_text(const MetricsReport& r) {
    std::ostringstream os;
    os << "queries " << r.per_query.size() << "  top_n " << r.top_n << "  rank_cutoff "
       << (r.rank_cutoff == 0 ? std::string("full") : std::to_string(r.rank_cutoff))
       << "  universe " << r.universe << "  missing " << r.missing << "\n";
    const char* headers[] = {"P", "R", "F1", "AP", "NDCG", "bpref"};
    os << std::left << std::setw(24) << "query" << std::right;
    for (const char* h : headers) os << std::setw(9) << h;
    os << "\n";
    auto row = [&os](const std::string& name, const QueryMetrics& m) {
        os << std::left << std::setw(24) << name << std::right << std::fixed
           << std::setprecision(4) << std::setw(9) << m.p << std::setw(9) << m.r << std::setw(9)
           << m.f1 << std::setw(9) << m.ap << std::setw(9) << m.ndcg << std::setw(9) << m.bpref
           << "\n";
    };
    for (const auto& [query, m] : r.per_query) row(query, m);
    row("all", r.mean);
    return os.str();
}

inline nlohmann::ordered_json report_json(const MetricsReport& r) {
    auto metrics = [](const QueryMetrics& m) {
        nlohmann::ordered_json o;
        o["p"] = m.p;
        o["r"] = m.r;
        o["f1"] = m.f1;
        o["ap"] = m.ap;
        o["ndcg"] = m.ndcg;
        o["bpref"] = m.bpref;
        return o;
    };
    nlohmann::ordered_json j;
    j["top_n"] = r.top_n;
    j["rank_cutoff"] = r.rank_cutoff;
    j["universe"] = r.universe;
    j["missing"] = r.missing;
    j["mean"] = metrics(r.mean);
    auto per = nlohmann::ordered_json::object();
    for (const auto& [query, m] : r.per_query) per[query] = metrics(m);
    j["per_query"] = per;
    return j;
}

}  // namespace ctpe
