#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mailrank::evalkit {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Graded judgments on the 4-point scale; unjudged pairs count as grade 0.
class Qrels {
  public:
    void add(const std::string& query_id, const std::string& email_id, int grade) {
        if (grade < 0 || grade > 3)
            throw EvalError("grade out of range for " + query_id + "/" + email_id);
        grades_[query_id][email_id] = grade;
    }

    static Qrels load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw EvalError("cannot read qrels file " + path);
        Qrels q;
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::istringstream ls(line);
            std::string qid, eid;
            int grade;
            if (line.empty() || line[0] == '#') continue;
            if (!(ls >> qid >> eid >> grade))
                throw EvalError("malformed qrels line " + std::to_string(lineno) + " in " + path);
            q.add(qid, eid, grade);
        }
        return q;
    }

    bool has_query(const std::string& query_id) const { return grades_.count(query_id) > 0; }

    int grade(const std::string& query_id, const std::string& email_id) const {
        auto it = grades_.find(query_id);
        if (it == grades_.end()) return 0;
        auto jt = it->second.find(email_id);
        return jt == it->second.end() ? 0 : jt->second;
    }

    /// Number of relevant (grade >= 1) emails for the query.
    int relevant_count(const std::string& query_id) const {
        auto it = grades_.find(query_id);
        if (it == grades_.end()) return 0;
        int n = 0;
        for (const auto& [id, g] : it->second)
            if (g >= 1) ++n;
        return n;
    }

    std::vector<std::string> query_ids() const {
        std::vector<std::string> out;
        for (const auto& [q, g] : grades_) out.push_back(q);
        return out;
    }

  private:
    std::map<std::string, std::map<std::string, int>> grades_;
};

/// DCG@K: sum of (2^rel - 1) / log2(1 + i) over the first K positions.
inline double dcg_at_k(const std::vector<int>& grades_in_rank_order, int k) {
    if (k < 1) throw std::invalid_argument("K must be >= 1");
    double dcg = 0.0;
    size_t n = std::min(static_cast<size_t>(k), grades_in_rank_order.size());
    for (size_t i = 0; i < n; ++i) {
        double gain = std::pow(2.0, grades_in_rank_order[i]) - 1.0;
        dcg += gain / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg;
}

/// NDCG@K: DCG normalized by the ideal reordering of the same retrieved
/// list; 0 when the list holds no relevant document at all.
inline double ndcg_at_k(const std::vector<int>& grades_in_rank_order, int k) {
    double dcg = dcg_at_k(grades_in_rank_order, k);
    std::vector<int> ideal = grades_in_rank_order;
    std::sort(ideal.begin(), ideal.end(), std::greater<int>());
    double ideal_dcg = dcg_at_k(ideal, k);
    return ideal_dcg == 0.0 ? 0.0 : dcg / ideal_dcg;
}

struct PRF {
    double recall = 0.0;
    double precision = 0.0;
    double f_measure = 0.0;
};

/// Binarized (grade >= 1) precision/recall/F over a retrieved list.
/// The query must exist in the qrels.
inline PRF precision_recall_f(const std::vector<std::string>& retrieved_ids,
                              const Qrels& qrels, const std::string& query_id) {
    if (!qrels.has_query(query_id))
        throw EvalError("query '" + query_id + "' not present in qrels");
    int relevant_total = qrels.relevant_count(query_id);
    int relevant_retrieved = 0;
    for (const auto& id : retrieved_ids)
        if (qrels.grade(query_id, id) >= 1) ++relevant_retrieved;
    PRF out;
    out.recall = relevant_total == 0 ? 0.0
                                     : static_cast<double>(relevant_retrieved) / relevant_total;
    out.precision = retrieved_ids.empty()
                        ? 0.0
                        : static_cast<double>(relevant_retrieved) / retrieved_ids.size();
    double denom = out.recall + out.precision;
    out.f_measure = denom == 0.0 ? 0.0 : 2.0 * out.recall * out.precision / denom;
    return out;
}

/// One system's output: ranked email ids per query.
struct Run {
    std::string name;
    std::map<std::string, std::vector<std::string>> by_query;

    static Run load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw EvalError("cannot read run file " + path);
        Run r;
        r.name = path;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::string qid, eid, score, tag;
            int rank;
            if (!(ls >> qid >> eid >> rank >> score)) continue;
            if (ls >> tag && r.name == path) r.name = tag;
            r.by_query[qid].push_back(eid);
        }
        return r;
    }
};

struct QueryMetrics {
    std::map<int, double> ndcg;  // K -> value
    PRF prf;
};

struct RunReport {
    std::string name;
    std::map<std::string, QueryMetrics> per_query;
    QueryMetrics macro;  // per-query metrics averaged across queries
    std::vector<std::string> warnings;
};

struct MetricReport {
    std::vector<int> ks;
    std::vector<RunReport> runs;

    std::string render_table() const {
        std::ostringstream out;
        out << "method";
        for (int k : ks) out << "\tNDCG@" << k;
        out << "\trecall\tprecision\tf_measure\n";
        for (const auto& run : runs) {
            out << run.name;
            char buf[32];
            for (int k : ks) {
                std::snprintf(buf, sizeof buf, "%.4f", run.macro.ndcg.at(k));
                out << "\t" << buf;
            }
            std::snprintf(buf, sizeof buf, "%.4f", run.macro.prf.recall);
            out << "\t" << buf;
            std::snprintf(buf, sizeof buf, "%.4f", run.macro.prf.precision);
            out << "\t" << buf;
            std::snprintf(buf, sizeof buf, "%.4f", run.macro.prf.f_measure);
            out << "\t" << buf << "\n";
        }
        return out.str();
    }

    /// Machine-readable key-value lines: method<TAB>query<TAB>metric<TAB>value.
    std::string render_kv() const {
        std::ostringstream out;
        char buf[32];
        auto emit = [&](const std::string& run, const std::string& query,
                        const std::string& metric, double v) {
            std::snprintf(buf, sizeof buf, "%.6f", v);
            out << run << "\t" << query << "\t" << metric << "\t" << buf << "\n";
        };
        for (const auto& run : runs) {
            for (const auto& [q, qm] : run.per_query) {
                for (const auto& [k, v] : qm.ndcg) emit(run.name, q, "ndcg@" + std::to_string(k), v);
                emit(run.name, q, "recall", qm.prf.recall);
                emit(run.name, q, "precision", qm.prf.precision);
                emit(run.name, q, "f_measure", qm.prf.f_measure);
            }
            for (const auto& [k, v] : run.macro.ndcg)
                emit(run.name, "macro", "ndcg@" + std::to_string(k), v);
            emit(run.name, "macro", "recall", run.macro.prf.recall);
            emit(run.name, "macro", "precision", run.macro.prf.precision);
            emit(run.name, "macro", "f_measure", run.macro.prf.f_measure);
        }
        return out.str();
    }
};

/// Evaluates each run against the qrels at the requested cutoffs. Queries a
/// run mentions but the qrels lack are skipped with a warning.
inline RunReport evaluate_run(const Run& run, const Qrels& qrels, const std::vector<int>& ks) {
    RunReport report;
    report.name = run.name;
    for (const auto& [qid, ids] : run.by_query) {
        if (!qrels.has_query(qid)) {
            report.warnings.push_back("query '" + qid + "' not in qrels; skipped");
            continue;
        }
        QueryMetrics qm;
        std::vector<int> grades;
        grades.reserve(ids.size());
        for (const auto& id : ids) grades.push_back(qrels.grade(qid, id));
        for (int k : ks) qm.ndcg[k] = ndcg_at_k(grades, k);
        qm.prf = precision_recall_f(ids, qrels, qid);
        report.per_query[qid] = std::move(qm);
    }
    size_t n = report.per_query.size();
    for (int k : ks) report.macro.ndcg[k] = 0.0;
    if (n > 0) {
        for (const auto& [q, qm] : report.per_query) {
            for (int k : ks) report.macro.ndcg[k] += qm.ndcg.at(k);
            report.macro.prf.recall += qm.prf.recall;
            report.macro.prf.precision += qm.prf.precision;
            report.macro.prf.f_measure += qm.prf.f_measure;
        }
        for (int k : ks) report.macro.ndcg[k] /= static_cast<double>(n);
        report.macro.prf.recall /= static_cast<double>(n);
        report.macro.prf.precision /= static_cast<double>(n);
        report.macro.prf.f_measure /= static_cast<double>(n);
    }
    return report;
}

inline MetricReport evaluate_runs(const std::vector<std::string>& run_files,
                                  const std::string& qrels_file,
                                  const std::vector<int>& ks) {
    Qrels qrels = Qrels::load(qrels_file);
    MetricReport report;
    report.ks = ks;
    for (const auto& path : run_files)
        report.runs.push_back(evaluate_run(Run::load(path), qrels, ks));
    return report;
}

/// queries.tsv: query_id <TAB> query text.
inline std::vector<std::pair<std::string, std::string>> load_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EvalError("cannot read queries file " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw EvalError("malformed queries line: " + line);
        out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
}

}  // namespace mailrank::evalkit
