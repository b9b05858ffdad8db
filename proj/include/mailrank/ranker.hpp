#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mailrank/engine.hpp"
#include "mailrank/netexpert.hpp"

namespace mailrank::ranker {

/// dot(a,b) / (|a||b|); 0 when either norm is 0.
inline double cosine(const indexing::WeightedVector& a, const indexing::WeightedVector& b) {
    double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

struct ScoredEmail {
    int email_idx = -1;
    std::string email_id;
    double t_score = 0.0;
    double c_score = 0.0;
    double s_score = 0.0;
    double score = 0.0;
    std::int64_t date = 0;
};

struct RetrievedSet {
    std::set<std::string> emails;       // E_R
    std::set<std::string> via_subject;  // thread subject carried the words
    std::set<std::string> via_content;  // one document carried all the words
};

struct SearchOptions {
    std::string query;
    bool expand = true;
    double sscore_epsilon = 0.0;
    std::string baseline;  // empty = full scoring pipeline
    std::string clue;      // clues baseline; defaults to the last query word
    const netexpert::ExpertAnswer* network = nullptr;
};

struct RankResult {
    std::vector<ScoredEmail> ranked;
    RetrievedSet retrieved;
    std::vector<int> matched_threads;       // T_R
    std::vector<int> matched_docs;          // ED_I
    queryexp::ExpandedQuery expanded;
};

namespace detail {

inline bool rank_order(const ScoredEmail& a, const ScoredEmail& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.date != b.date) return a.date > b.date;
    return a.email_id < b.email_id;
}

// Sim(ed_j, Q): dot over the query's terms, divided by the document's
// full-vector norm and the query norm.
inline double doc_similarity(const Mailbox& m, int node,
                             const indexing::WeightedVector& query_vec,
                             double query_norm) {
    if (query_norm == 0.0) return 0.0;
    double doc_norm = m.index.doc_norm(node);
    if (doc_norm == 0.0) return 0.0;
    double dot = 0.0;
    for (const auto& [t, qw] : query_vec.components)
        dot += qw * m.index.tf_idf(t, node);
    return dot / (doc_norm * query_norm);
}

}  // namespace detail

/// Subject score: 1 iff the email's thread matched the query.
inline double tscore(const EmailEntry& e, const std::set<int>& matched_threads) {
    return matched_threads.count(e.thread_id) ? 1.0 : 0.0;
}

/// Level-decayed content score: sum of 0.5^j * Sim(ed_j, Q) over the email's
/// documents, main body first.
inline double cscore(const Mailbox& m, const EmailEntry& e,
                     const indexing::WeightedVector& query_vec, double query_norm) {
    double total = 0.0;
    double decay = 1.0;
    for (threadstore::NodeId n : e.nodes) {
        total += decay * detail::doc_similarity(m, n, query_vec, query_norm);
        decay *= 0.5;
    }
    return total;
}

/// Sender score: cosine between the sender profile and the query at sender
/// granularity. Network expertise, when supplied, overrides the sender's
/// components on the query terms.
inline double sscore(const Mailbox& m, const EmailEntry& e,
                     const indexing::WeightedVector& query_vec,
                     const netexpert::ExpertAnswer* network) {
    if (e.sender.empty()) return 0.0;
    double qnorm = query_vec.norm();
    if (qnorm == 0.0) return 0.0;

    double dot = 0.0;
    double norm_sq_adjust = 0.0;
    bool any_override = false;
    for (const auto& [t, qw] : query_vec.components) {
        double local = m.senders.tf_idf(e.sender, t);
        double w = local;
        if (network) {
            if (auto nw = network->weight(t, e.sender)) {
                w = *nw;
                any_override = true;
                norm_sq_adjust += w * w - local * local;
            }
        }
        dot += qw * w;
    }
    double base_norm = m.senders.sender_norm(e.sender);
    double norm_sq = base_norm * base_norm + (any_override ? norm_sq_adjust : 0.0);
    if (norm_sq <= 0.0 || dot == 0.0) return 0.0;
    return dot / (std::sqrt(norm_sq) * qnorm);
}

/// The combined score: SScore * (CScore + TScore).
inline double combine(double s, double c, double t, double epsilon = 0.0) {
    return (s + epsilon) * (c + t);
}

/// Full retrieval: ED_I from the index, T_R plus descendants from the thread
/// store, and the retrieved email set they imply.
inline RankResult rank(const Mailbox& m, const SearchOptions& opt) {
    auto q = queryexp::tokenize(opt.query);
    if (q.empty()) throw std::invalid_argument("empty query");

    RankResult r;
    r.expanded = queryexp::expand_query(q, m.index.vocabulary(), opt.expand);
    r.matched_docs = m.index.retrieve_docs(r.expanded);
    auto rr = m.threads.retrieve(r.expanded, r.matched_docs);
    r.matched_threads = rr.thread_ids;

    std::set<int> content_nodes(r.matched_docs.begin(), r.matched_docs.end());
    for (const auto& [doc, below] : rr.descendants)
        content_nodes.insert(below.begin(), below.end());

    std::set<int> email_set;
    for (int n : content_nodes)
        for (int idx : m.node_emails[static_cast<size_t>(n)]) {
            email_set.insert(idx);
            r.retrieved.via_content.insert(m.emails[static_cast<size_t>(idx)].id);
        }
    std::set<int> thread_set(rr.thread_ids.begin(), rr.thread_ids.end());
    for (int t : rr.thread_ids)
        for (const auto& id : m.threads.thread(t).email_ids) {
            auto it = m.email_by_id.find(id);
            if (it == m.email_by_id.end()) continue;
            email_set.insert(it->second);
            r.retrieved.via_subject.insert(id);
        }
    for (int idx : email_set) r.retrieved.emails.insert(m.emails[static_cast<size_t>(idx)].id);

    auto doc_query = m.index.query_vector(q);
    double doc_query_norm = doc_query.norm();
    auto sender_query = m.senders.query_vector(q);

    for (int idx : email_set) {
        const auto& e = m.emails[static_cast<size_t>(idx)];
        ScoredEmail se;
        se.email_idx = idx;
        se.email_id = e.id;
        se.date = e.date;
        se.t_score = tscore(e, thread_set);
        se.c_score = cscore(m, e, doc_query, doc_query_norm);
        // the epsilon option shifts the sender score additively; storing the
        // shifted value keeps the final score a pure product
        se.s_score = sscore(m, e, sender_query, opt.network) + opt.sscore_epsilon;
        se.score = combine(se.s_score, se.c_score, se.t_score);
        r.ranked.push_back(std::move(se));
    }
    std::sort(r.ranked.begin(), r.ranked.end(), detail::rank_order);
    return r;
}

inline const std::vector<std::string>& baseline_methods() {
    static const std::vector<std::string> kMethods = {
        "date", "thread_date", "subject_alpha", "sender_alpha", "clues"};
    return kMethods;
}

/// Reorders an already-retrieved set by one of the reference strategies.
inline std::vector<ScoredEmail> baseline_rank(const Mailbox& m, const std::string& method,
                                              const std::vector<ScoredEmail>& retrieved,
                                              const queryexp::Query& q,
                                              const std::string& clue_word = "") {
    std::vector<ScoredEmail> out = retrieved;
    auto by_date = [](const ScoredEmail& a, const ScoredEmail& b) {
        if (a.date != b.date) return a.date > b.date;
        return a.email_id < b.email_id;
    };
    if (method == "date") {
        std::sort(out.begin(), out.end(), by_date);
    } else if (method == "thread_date") {
        std::map<int, std::int64_t> newest;  // thread -> max date
        for (const auto& se : out) {
            const auto& e = m.emails[static_cast<size_t>(se.email_idx)];
            auto [it, fresh] = newest.emplace(e.thread_id, se.date);
            if (!fresh) it->second = std::max(it->second, se.date);
        }
        std::sort(out.begin(), out.end(), [&](const ScoredEmail& a, const ScoredEmail& b) {
            int ta = m.emails[static_cast<size_t>(a.email_idx)].thread_id;
            int tb = m.emails[static_cast<size_t>(b.email_idx)].thread_id;
            if (ta != tb) {
                if (newest[ta] != newest[tb]) return newest[ta] > newest[tb];
                return ta < tb;
            }
            return by_date(a, b);
        });
    } else if (method == "subject_alpha" || method == "sender_alpha") {
        bool subject = method == "subject_alpha";
        std::sort(out.begin(), out.end(), [&](const ScoredEmail& a, const ScoredEmail& b) {
            const auto& ea = m.emails[static_cast<size_t>(a.email_idx)];
            const auto& eb = m.emails[static_cast<size_t>(b.email_idx)];
            const std::string& ka = subject ? ea.raw_subject : ea.sender;
            const std::string& kb = subject ? eb.raw_subject : eb.sender;
            if (ka != kb) return ka > kb;  // descending alphabetical
            return by_date(a, b);
        });
    } else if (method == "clues") {
        std::string clue = clue_word;
        if (clue.empty() && !q.words.empty()) clue = q.words.back();
        std::vector<std::pair<double, ScoredEmail>> scored;
        for (const auto& se : out) {
            const auto& e = m.emails[static_cast<size_t>(se.email_idx)];
            // blocks = blank-line paragraphs of the main body
            std::vector<std::string> blocks;
            {
                const std::string& body = m.main_body_text(se.email_idx);
                std::string cur;
                std::istringstream in(body);
                std::string line;
                auto flush = [&] {
                    if (!corpus::trim(cur).empty()) blocks.push_back(cur);
                    cur.clear();
                };
                while (std::getline(in, line)) {
                    if (corpus::trim(line).empty()) flush();
                    else cur += line + "\n";
                }
                flush();
            }
            double co_occur = 0.0, total = 0.0;
            for (const auto& block : blocks) {
                auto toks = queryexp::tokenize_text(block);
                bool has_clue =
                    std::find(toks.begin(), toks.end(), clue) != toks.end();
                for (const auto& t : toks)
                    for (const auto& w : q.words)
                        if (t == w) {
                            if (has_clue) co_occur += 1.0;
                        }
            }
            for (threadstore::NodeId n : e.nodes) {
                auto toks = queryexp::tokenize_text(m.threads.node(n).text);
                for (const auto& t : toks)
                    for (const auto& w : q.words)
                        if (t == w) total += 1.0;
            }
            double ratio = total > 0.0 ? co_occur / total : 0.0;
            scored.emplace_back(ratio, se);
        }
        std::sort(scored.begin(), scored.end(),
                  [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return by_date(a.second, b.second);
                  });
        out.clear();
        for (auto& [ratio, se] : scored) {
            se.score = ratio;
            out.push_back(se);
        }
    } else {
        std::string valid;
        for (const auto& name : baseline_methods()) valid += (valid.empty() ? "" : ", ") + name;
        throw std::invalid_argument("unknown baseline '" + method + "' (valid: " + valid + ")");
    }
    return out;
}

inline std::string format_date(std::int64_t epoch) {
    std::int64_t days = epoch / 86400;
    std::int64_t rem = epoch % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    // civil-from-days, proleptic Gregorian
    std::int64_t z = days + 719468;
    std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    std::int64_t doe = z - era * 146097;
    std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t y = yoe + era * 400;
    std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    std::int64_t mp = (5 * doy + 2) / 153;
    std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
    std::int64_t mo = mp + (mp < 10 ? 3 : -9);
    y += mo <= 2;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04lld-%02lld-%02lld %02lld:%02lld",
                  static_cast<long long>(y), static_cast<long long>(mo),
                  static_cast<long long>(d), static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60));
    return buf;
}

/// Human-readable result table, identical bytes for identical inputs.
inline std::string format_results(const Mailbox& m, const std::vector<ScoredEmail>& ranked,
                                  int limit) {
    std::ostringstream out;
    size_t n = ranked.size();
    if (limit > 0) n = std::min(n, static_cast<size_t>(limit));
    for (size_t i = 0; i < n; ++i) {
        const auto& se = ranked[i];
        const auto& e = m.emails[static_cast<size_t>(se.email_idx)];
        char score[32];
        std::snprintf(score, sizeof score, "%.6f", se.score);
        out << (i + 1) << "\t" << score << "\t" << format_date(se.date) << "\t"
            << (e.sender.empty() ? "-" : e.sender) << "\t"
            << (e.raw_subject.empty() ? "-" : e.raw_subject) << "\n";
    }
    return out.str();
}

/// TREC-style run lines: query_id email_id rank score tag.
inline std::string format_run(const std::string& query_id,
                              const std::vector<ScoredEmail>& ranked,
                              const std::string& tag) {
    std::ostringstream out;
    for (size_t i = 0; i < ranked.size(); ++i) {
        char score[32];
        std::snprintf(score, sizeof score, "%.6f", ranked[i].score);
        out << query_id << " " << ranked[i].email_id << " " << (i + 1) << " " << score
            << " " << tag << "\n";
    }
    return out.str();
}

}  // namespace mailrank::ranker
