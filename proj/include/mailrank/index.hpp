#pragma once

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mailrank/queryexp.hpp"

namespace mailrank::indexing {

/// Sparse non-negative vector keyed by term.
struct WeightedVector {
    std::map<std::string, double> components;

    double at(const std::string& term) const {
        auto it = components.find(term);
        return it == components.end() ? 0.0 : it->second;
    }

    double dot(const WeightedVector& other) const {
        double sum = 0.0;
        const auto& small = components.size() <= other.components.size() ? *this : other;
        const auto& large = components.size() <= other.components.size() ? other : *this;
        for (const auto& [t, w] : small.components) sum += w * large.at(t);
        return sum;
    }

    double norm() const {
        double sum = 0.0;
        for (const auto& [t, w] : components) sum += w * w;
        return std::sqrt(sum);
    }
};

struct ConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Inverted index plus term statistics over distinct thread-node documents.
/// Build phase is exclusive; queries are read-only.
class IndexStore {
  public:
    /// Indexes a newly stored document. Returns false (and changes nothing)
    /// when the doc id was indexed before.
    bool index_document(int doc_id, const std::string& text) {
        if (forward_.count(doc_id)) return false;
        auto tokens = queryexp::tokenize_text(text);
        auto& vec = forward_[doc_id];
        for (const auto& t : tokens) ++vec[t];
        doc_len_[doc_id] = static_cast<int>(tokens.size());
        for (const auto& [t, tf] : vec) postings_[t].emplace_back(doc_id, tf);
        ++total_docs_;
        norms_.clear();
        return true;
    }

    int total_docs() const { return total_docs_; }

    int doc_freq(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? 0 : static_cast<int>(it->second.size());
    }

    int term_freq(const std::string& term, int doc_id) const {
        auto it = forward_.find(doc_id);
        if (it == forward_.end()) return 0;
        auto jt = it->second.find(term);
        return jt == it->second.end() ? 0 : jt->second;
    }

    int doc_length(int doc_id) const {
        auto it = doc_len_.find(doc_id);
        return it == doc_len_.end() ? 0 : it->second;
    }

    /// TF * log10(N / DF); zero when the term is absent from the document.
    double tf_idf(const std::string& term, int doc_id) const {
        int tf = term_freq(term, doc_id);
        if (tf == 0) return 0.0;
        int df = doc_freq(term);
        if (df == 0)
            throw ConsistencyError("DF=0 with TF>0 for term '" + term + "'");
        return tf * std::log10(static_cast<double>(total_docs_) / df);
    }

    /// Documents containing, for every original query word, at least one of
    /// its variants. Sorted ascending for determinism.
    std::vector<int> retrieve_docs(const queryexp::ExpandedQuery& q) const {
        std::vector<int> result;
        bool first = true;
        for (const auto& w : q.original.words) {
            std::set<int> docs;
            auto add_term = [&](const std::string& t) {
                if (auto it = postings_.find(t); it != postings_.end())
                    for (const auto& [doc, tf] : it->second) docs.insert(doc);
            };
            add_term(w);
            if (auto it = q.variants.find(w); it != q.variants.end())
                for (const auto& v : it->second) add_term(v);
            if (first) {
                result.assign(docs.begin(), docs.end());
                first = false;
            } else {
                std::vector<int> keep;
                for (int d : result)
                    if (docs.count(d)) keep.push_back(d);
                result = std::move(keep);
            }
            if (result.empty()) break;
        }
        if (first) result.clear();  // empty query retrieves nothing
        return result;
    }

    template <typename Terms>
    WeightedVector doc_vector(int doc_id, const Terms& terms) const {
        WeightedVector v;
        for (const auto& t : terms) {
            double w = term_freq(t, doc_id) == 0 ? 0.0 : tf_idf(t, doc_id);
            if (w != 0.0) v.components[t] = w;
        }
        return v;
    }

    /// Query vector at document granularity: query TF times IDF.
    WeightedVector query_vector(const queryexp::Query& q) const {
        std::map<std::string, int> tf;
        for (const auto& w : q.words) ++tf[w];
        WeightedVector v;
        for (const auto& [t, n] : tf) {
            int df = doc_freq(t);
            if (df == 0 || total_docs_ == 0) continue;
            double w = n * std::log10(static_cast<double>(total_docs_) / df);
            if (w != 0.0) v.components[t] = w;
        }
        return v;
    }

    /// Full-vector norm of a document under the current statistics. Served
    /// from the norm table when refresh_norms()/restore() filled it;
    /// computed on the fly otherwise, so concurrent readers never mutate.
    double doc_norm(int doc_id) const {
        if (auto it = norms_.find(doc_id); it != norms_.end()) return it->second;
        return compute_norm(doc_id);
    }

    /// Recomputes the norm table; call after a build phase, before
    /// concurrent queries.
    void refresh_norms() {
        norms_.clear();
        for (const auto& [doc, len] : doc_len_) norms_[doc] = compute_norm(doc);
    }

    std::vector<std::string> vocabulary() const {
        std::vector<std::string> terms;
        terms.reserve(postings_.size());
        for (const auto& [t, p] : postings_) terms.push_back(t);
        std::sort(terms.begin(), terms.end());
        return terms;
    }

    const std::unordered_map<std::string, std::vector<std::pair<int, int>>>& postings() const {
        return postings_;
    }
    const std::unordered_map<int, std::map<std::string, int>>& forward() const {
        return forward_;
    }

    void restore(std::unordered_map<std::string, std::vector<std::pair<int, int>>> postings,
                 std::unordered_map<int, int> doc_len,
                 std::unordered_map<int, double> norms = {}) {
        postings_ = std::move(postings);
        doc_len_ = std::move(doc_len);
        forward_.clear();
        total_docs_ = static_cast<int>(doc_len_.size());
        for (const auto& [doc, len] : doc_len_) forward_[doc];  // empty docs count too
        for (auto& [t, list] : postings_) {
            std::sort(list.begin(), list.end());
            for (const auto& [doc, tf] : list) forward_[doc][t] = tf;
        }
        norms_ = std::move(norms);
        if (norms_.empty()) refresh_norms();
    }

  private:
    double compute_norm(int doc_id) const {
        auto fw = forward_.find(doc_id);
        if (fw == forward_.end()) return 0.0;
        double sum = 0.0;
        for (const auto& [t, tf] : fw->second) {
            double w = tf * std::log10(static_cast<double>(total_docs_) / doc_freq(t));
            sum += w * w;
        }
        return std::sqrt(sum);
    }

    std::unordered_map<std::string, std::vector<std::pair<int, int>>> postings_;
    std::unordered_map<int, std::map<std::string, int>> forward_;
    std::unordered_map<int, int> doc_len_;
    int total_docs_ = 0;
    std::unordered_map<int, double> norms_;  // filled by refresh_norms/restore
};

/// Per-sender aggregated term statistics: all of one sender's emails act as
/// a single pseudo-document, so IDF runs at sender granularity.
class SenderProfiles {
  public:
    void add_email(const std::string& sender, const std::vector<std::string>& tokens) {
        auto& prof = tf_[sender];
        ++email_count_[sender];
        for (const auto& t : tokens) {
            int& n = prof[t];
            if (n == 0) ++sender_df_[t];
            ++n;
        }
        norms_.clear();
    }

    int sender_count() const { return static_cast<int>(tf_.size()); }

    int doc_freq(const std::string& term) const {
        auto it = sender_df_.find(term);
        return it == sender_df_.end() ? 0 : it->second;
    }

    int term_freq(const std::string& sender, const std::string& term) const {
        auto it = tf_.find(sender);
        if (it == tf_.end()) return 0;
        auto jt = it->second.find(term);
        return jt == it->second.end() ? 0 : jt->second;
    }

    int email_count(const std::string& sender) const {
        auto it = email_count_.find(sender);
        return it == email_count_.end() ? 0 : it->second;
    }

    double tf_idf(const std::string& sender, const std::string& term) const {
        int tf = term_freq(sender, term);
        if (tf == 0) return 0.0;
        int df = doc_freq(term);
        return tf * std::log10(static_cast<double>(sender_count()) / df);
    }

    template <typename Terms>
    WeightedVector sender_vector(const std::string& sender, const Terms& terms) const {
        WeightedVector v;
        for (const auto& t : terms) {
            double w = tf_idf(sender, t);
            if (w != 0.0) v.components[t] = w;
        }
        return v;
    }

    WeightedVector query_vector(const queryexp::Query& q) const {
        std::map<std::string, int> tf;
        for (const auto& w : q.words) ++tf[w];
        WeightedVector v;
        for (const auto& [t, n] : tf) {
            int df = doc_freq(t);
            if (df == 0 || sender_count() == 0) continue;
            double w = n * std::log10(static_cast<double>(sender_count()) / df);
            if (w != 0.0) v.components[t] = w;
        }
        return v;
    }

    double sender_norm(const std::string& sender) const {
        if (auto it = norms_.find(sender); it != norms_.end()) return it->second;
        return compute_norm(sender);
    }

    void refresh_norms() {
        norms_.clear();
        for (const auto& [s, prof] : tf_) norms_[s] = compute_norm(s);
    }

    bool known(const std::string& sender) const { return tf_.count(sender) > 0; }

    std::vector<std::string> senders() const {
        std::vector<std::string> out;
        out.reserve(tf_.size());
        for (const auto& [s, prof] : tf_) out.push_back(s);
        std::sort(out.begin(), out.end());
        return out;
    }

    const std::map<std::string, int>* profile(const std::string& sender) const {
        auto it = tf_.find(sender);
        return it == tf_.end() ? nullptr : &it->second;
    }

    const std::unordered_map<std::string, std::map<std::string, int>>& profiles() const {
        return tf_;
    }
    const std::unordered_map<std::string, int>& email_counts() const { return email_count_; }

    void restore(std::unordered_map<std::string, std::map<std::string, int>> tf,
                 std::unordered_map<std::string, int> email_count) {
        tf_ = std::move(tf);
        email_count_ = std::move(email_count);
        sender_df_.clear();
        for (const auto& [s, prof] : tf_)
            for (const auto& [t, n] : prof) ++sender_df_[t];
        refresh_norms();
    }

  private:
    double compute_norm(const std::string& sender) const {
        auto prof = tf_.find(sender);
        if (prof == tf_.end()) return 0.0;
        double sum = 0.0;
        for (const auto& [t, tf] : prof->second) {
            double w = tf * std::log10(static_cast<double>(sender_count()) / doc_freq(t));
            sum += w * w;
        }
        return std::sqrt(sum);
    }

    std::unordered_map<std::string, std::map<std::string, int>> tf_;
    std::unordered_map<std::string, int> email_count_;
    std::unordered_map<std::string, int> sender_df_;
    std::unordered_map<std::string, double> norms_;  // filled by refresh_norms
};

}  // namespace mailrank::indexing
