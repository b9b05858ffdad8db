#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mailrank/corpus.hpp"
#include "mailrank/queryexp.hpp"

namespace mailrank::threadstore {

using NodeId = int;

/// One deduplicated email document inside a thread tree. A node may be the
/// main body of several emails (duplicate deliveries, bare forwards).
struct ThreadNode {
    NodeId id = -1;
    NodeId parent = -1;
    std::vector<NodeId> children;
    std::string fingerprint;
    std::string text;
    std::vector<std::string> main_body_of;
};

struct Thread {
    int id = -1;
    std::string subject;                  // normalized
    std::vector<NodeId> roots;
    std::vector<NodeId> nodes;            // insertion order
    std::vector<std::string> email_ids;   // member emails, insertion order
};

/// Longest tree path matching an email's documents oldest-quotation-first.
struct MatchPath {
    std::vector<NodeId> nodes;

    size_t length() const { return nodes.size(); }
};

struct AdditionOutcome {
    enum class Case {
        NewThread,             // no thread carried the subject yet
        AllQuotationsMatched,  // every quotation found; main body inserted
        SomeQuotationsMatched, // prefix found; remainder chain inserted
        AllDocumentsMatched,   // nothing inserted (delayed/duplicate email)
        NoDocumentMatched,     // subject known, content disjoint; new thread
    };
    Case kind = Case::NewThread;
    int thread_id = -1;
    std::vector<NodeId> inserted;     // newly stored documents, for indexing
    std::vector<NodeId> level_nodes;  // email level j -> node holding ed_j
};

inline const char* to_string(AdditionOutcome::Case c) {
    switch (c) {
        case AdditionOutcome::Case::NewThread: return "NewThread";
        case AdditionOutcome::Case::AllQuotationsMatched: return "AllQuotationsMatched";
        case AdditionOutcome::Case::SomeQuotationsMatched: return "SomeQuotationsMatched";
        case AdditionOutcome::Case::AllDocumentsMatched: return "AllDocumentsMatched";
        case AdditionOutcome::Case::NoDocumentMatched: return "NoDocumentMatched";
    }
    return "?";
}

namespace detail {

inline std::set<std::string> shingles(const std::string& fingerprint) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : fingerprint) {
        if (c == ' ') {
            if (!cur.empty()) words.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(cur);
    std::set<std::string> out;
    if (words.size() < 3) {
        out.insert(words.begin(), words.end());
        return out;
    }
    for (size_t i = 0; i + 3 <= words.size(); ++i)
        out.insert(words[i] + '\x1f' + words[i + 1] + '\x1f' + words[i + 2]);
    return out;
}

inline double shingle_jaccard(const std::string& a, const std::string& b) {
    auto sa = shingles(a), sb = shingles(b);
    if (sa.empty() && sb.empty()) return 0.0;
    size_t inter = 0;
    for (const auto& s : sa) inter += sb.count(s);
    size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline constexpr double kFuzzyThreshold = 0.9;

}  // namespace detail

/// Thread trees over deduplicated documents, grouped by normalized subject.
/// Writers must be serialized; reads may run concurrently between writes.
class ThreadStore {
  public:
    const ThreadNode& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
    const Thread& thread(int id) const { return threads_[static_cast<size_t>(id)]; }
    size_t node_count() const { return nodes_.size(); }
    size_t thread_count() const { return threads_.size(); }
    int thread_of_node(NodeId id) const { return node_thread_[static_cast<size_t>(id)]; }
    const std::vector<ThreadNode>& nodes() const { return nodes_; }
    const std::vector<Thread>& threads() const { return threads_; }

    std::vector<int> find_threads_by_subject(const std::string& normalized) const {
        auto it = by_subject_.find(normalized);
        return it == by_subject_.end() ? std::vector<int>{} : it->second;
    }

    /// Longest path whose node contents equal the email's documents taken
    /// oldest-quotation-first. Content match is fingerprint equality with a
    /// shingle-Jaccard fallback when no exact match exists.
    MatchPath longest_match_path(int thread_id, const corpus::Email& e) const {
        MatchPath path;
        if (e.documents.empty()) return path;
        const Thread& th = threads_[static_cast<size_t>(thread_id)];
        const auto& fp_map = thread_fp_[static_cast<size_t>(thread_id)];

        const size_t n_e = e.documents.size();
        auto doc_at = [&](size_t oldest_first) -> const corpus::EmailDocument& {
            return e.documents[n_e - 1 - oldest_first];
        };

        auto best_fuzzy = [&](const std::vector<NodeId>& pool,
                              const std::string& fp) -> NodeId {
            NodeId best_id = -1;
            double best_score = 0.0;
            for (NodeId id : pool) {
                double s = detail::shingle_jaccard(nodes_[static_cast<size_t>(id)].fingerprint, fp);
                if (s < detail::kFuzzyThreshold) continue;
                if (best_id == -1 || s > best_score || (s == best_score && id < best_id)) {
                    best_score = s;
                    best_id = id;
                }
            }
            return best_id;
        };

        NodeId start = -1;
        if (auto it = fp_map.find(doc_at(0).fingerprint); it != fp_map.end())
            start = it->second;
        else
            start = best_fuzzy(th.nodes, doc_at(0).fingerprint);
        if (start == -1) return path;

        path.nodes.push_back(start);
        NodeId cur = start;
        for (size_t i = 1; i < n_e; ++i) {
            const auto& want = doc_at(i);
            const auto& children = nodes_[static_cast<size_t>(cur)].children;
            NodeId next = -1;
            for (NodeId ch : children) {
                if (nodes_[static_cast<size_t>(ch)].fingerprint == want.fingerprint) {
                    next = ch;
                    break;
                }
            }
            if (next == -1) next = best_fuzzy(children, want.fingerprint);
            if (next == -1) break;
            path.nodes.push_back(next);
            cur = next;
        }
        return path;
    }

    /// Function1: insert the email's not-yet-stored documents into the best
    /// matching thread (or a new one) and report what happened.
    AdditionOutcome add_email(const corpus::Email& e) {
        AdditionOutcome out;
        const size_t n_e = e.documents.size();
        if (n_e == 0) {
            out.kind = AdditionOutcome::Case::AllDocumentsMatched;
            return out;
        }

        auto candidates = find_threads_by_subject(e.norm_subject);
        if (candidates.empty())
            return create_thread(e, AdditionOutcome::Case::NewThread);

        int best_thread = -1;
        MatchPath best;
        for (int t : candidates) {
            MatchPath p = longest_match_path(t, e);
            if (best_thread == -1 || p.length() > best.length()) {
                best = std::move(p);
                best_thread = t;
            }
        }
        const size_t n_p = best.length();
        if (n_p == 0)
            return create_thread(e, AdditionOutcome::Case::NoDocumentMatched);

        Thread& th = threads_[static_cast<size_t>(best_thread)];
        out.thread_id = best_thread;
        out.level_nodes.resize(n_e, -1);
        for (size_t i = 0; i < n_p; ++i)
            out.level_nodes[n_e - 1 - i] = best.nodes[i];

        if (n_p == n_e) {
            out.kind = AdditionOutcome::Case::AllDocumentsMatched;
        } else {
            out.kind = n_p == n_e - 1 ? AdditionOutcome::Case::AllQuotationsMatched
                                      : AdditionOutcome::Case::SomeQuotationsMatched;
            NodeId cur = best.nodes.back();
            auto& fp_map = thread_fp_[static_cast<size_t>(best_thread)];
            for (size_t i = n_p; i < n_e; ++i) {
                const auto& doc = e.documents[n_e - 1 - i];
                NodeId id;
                if (auto it = fp_map.find(doc.fingerprint); it != fp_map.end()) {
                    id = it->second;  // already stored elsewhere in the thread
                } else {
                    id = create_node(best_thread, cur, doc);
                    out.inserted.push_back(id);
                }
                out.level_nodes[n_e - 1 - i] = id;
                cur = id;
            }
        }
        register_email(th, e, out.level_nodes.front());
        return out;
    }

    /// Function2: threads whose subject contains every query word (or an
    /// accepted variant), plus the strict descendants of each indexed match.
    struct RetrieveResult {
        std::vector<int> thread_ids;
        std::map<NodeId, std::vector<NodeId>> descendants;
    };

    RetrieveResult retrieve(const queryexp::ExpandedQuery& q,
                            const std::vector<NodeId>& indexed_docs) const {
        RetrieveResult r;
        for (const Thread& th : threads_) {
            auto toks = queryexp::tokenize_text(th.subject, /*keep_stopwords=*/true);
            std::set<std::string> token_set(toks.begin(), toks.end());
            bool all = !q.original.words.empty();
            for (const auto& w : q.original.words) {
                bool hit = token_set.count(w) > 0;
                if (!hit) {
                    if (auto it = q.variants.find(w); it != q.variants.end())
                        for (const auto& v : it->second)
                            if (token_set.count(v)) {
                                hit = true;
                                break;
                            }
                }
                if (!hit) {
                    all = false;
                    break;
                }
            }
            if (all) r.thread_ids.push_back(th.id);
        }
        for (NodeId d : indexed_docs) r.descendants[d] = descendants_of(d);
        return r;
    }

    std::vector<NodeId> descendants_of(NodeId id) const {
        std::vector<NodeId> out;
        std::deque<NodeId> frontier(nodes_[static_cast<size_t>(id)].children.begin(),
                                    nodes_[static_cast<size_t>(id)].children.end());
        while (!frontier.empty()) {
            NodeId n = frontier.front();
            frontier.pop_front();
            out.push_back(n);
            const auto& ch = nodes_[static_cast<size_t>(n)].children;
            frontier.insert(frontier.end(), ch.begin(), ch.end());
        }
        return out;
    }

    /// Rebuild from persisted state.
    void restore(std::vector<ThreadNode> nodes, std::vector<Thread> threads,
                 std::vector<int> node_thread) {
        nodes_ = std::move(nodes);
        threads_ = std::move(threads);
        node_thread_ = std::move(node_thread);
        by_subject_.clear();
        thread_fp_.assign(threads_.size(), {});
        for (const Thread& th : threads_) {
            by_subject_[th.subject].push_back(th.id);
            auto& fp_map = thread_fp_[static_cast<size_t>(th.id)];
            for (NodeId n : th.nodes)
                fp_map.emplace(nodes_[static_cast<size_t>(n)].fingerprint, n);
        }
    }

  private:
    NodeId create_node(int thread_id, NodeId parent, const corpus::EmailDocument& doc) {
        NodeId id = static_cast<NodeId>(nodes_.size());
        ThreadNode n;
        n.id = id;
        n.parent = parent;
        n.fingerprint = doc.fingerprint;
        n.text = doc.text;
        nodes_.push_back(std::move(n));
        node_thread_.push_back(thread_id);
        Thread& th = threads_[static_cast<size_t>(thread_id)];
        th.nodes.push_back(id);
        if (parent == -1) th.roots.push_back(id);
        else nodes_[static_cast<size_t>(parent)].children.push_back(id);
        thread_fp_[static_cast<size_t>(thread_id)].emplace(doc.fingerprint, id);
        return id;
    }

    void register_email(Thread& th, const corpus::Email& e, NodeId main_body_node) {
        if (std::find(th.email_ids.begin(), th.email_ids.end(), e.email_id) ==
            th.email_ids.end())
            th.email_ids.push_back(e.email_id);
        auto& owners = nodes_[static_cast<size_t>(main_body_node)].main_body_of;
        if (std::find(owners.begin(), owners.end(), e.email_id) == owners.end())
            owners.push_back(e.email_id);
    }

    AdditionOutcome create_thread(const corpus::Email& e, AdditionOutcome::Case kind) {
        int tid = static_cast<int>(threads_.size());
        Thread th;
        th.id = tid;
        th.subject = e.norm_subject;
        threads_.push_back(std::move(th));
        thread_fp_.emplace_back();
        by_subject_[e.norm_subject].push_back(tid);

        AdditionOutcome out;
        out.kind = kind;
        out.thread_id = tid;
        const size_t n_e = e.documents.size();
        out.level_nodes.resize(n_e, -1);
        NodeId cur = -1;
        auto& fp_map = thread_fp_[static_cast<size_t>(tid)];
        for (size_t i = 0; i < n_e; ++i) {
            const auto& doc = e.documents[n_e - 1 - i];
            NodeId id;
            if (auto it = fp_map.find(doc.fingerprint); it != fp_map.end()) {
                id = it->second;  // an email quoting the same content twice
            } else {
                id = create_node(tid, cur, doc);
                out.inserted.push_back(id);
            }
            out.level_nodes[n_e - 1 - i] = id;
            cur = id;
        }
        register_email(threads_[static_cast<size_t>(tid)], e, out.level_nodes.front());
        return out;
    }

    std::vector<ThreadNode> nodes_;
    std::vector<Thread> threads_;
    std::vector<int> node_thread_;
    std::unordered_map<std::string, std::vector<int>> by_subject_;
    std::vector<std::unordered_map<std::string, NodeId>> thread_fp_;
};

}  // namespace mailrank::threadstore
