#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mailrank/corpus.hpp"
#include "mailrank/levenshtein.hpp"
#include "mailrank/porter.hpp"

namespace mailrank::queryexp {

/// Fixed stopword list, applied to bodies and queries alike. Subjects keep
/// stopwords so that subject containment stays literal.
inline const std::set<std::string>& stopwords() {
    static const std::set<std::string> kStop = {
        "a",  "an",  "and",  "are", "as",   "at",   "be",  "been", "by",
        "for", "from", "in",  "is",  "it",   "its",  "of",  "on",   "or",
        "that", "the", "this", "to",  "was",  "were", "will", "with"};
    return kStop;
}

/// Casefolds, splits on non-alphanumeric runs, drops single-digit tokens,
/// and (unless keep_stopwords) drops stopwords.
inline std::vector<std::string> tokenize_text(std::string_view text,
                                              bool keep_stopwords = false) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        bool single_digit = cur.size() == 1 && cur[0] >= '0' && cur[0] <= '9';
        if (!single_digit && (keep_stopwords || !stopwords().count(cur)))
            out.push_back(cur);
        cur.clear();
    };
    for (char raw : text) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            cur.push_back(corpus::ascii_lower(raw));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

struct Query {
    std::string raw;
    std::vector<std::string> words;  // normalized, stopword-filtered

    bool empty() const { return words.empty(); }
};

inline Query tokenize(std::string_view raw) {
    Query q;
    q.raw = std::string(raw);
    q.words = tokenize_text(raw);
    return q;
}

struct ExpandedQuery {
    Query original;
    // original word -> accepted vocabulary variants (includes the word
    // itself when it is in the vocabulary)
    std::map<std::string, std::set<std::string>> variants;

    /// Does `term` satisfy word `w`? True for the literal word even when it
    /// is absent from the vocabulary.
    bool matches(const std::string& w, const std::string& term) const {
        if (term == w) return true;
        auto it = variants.find(w);
        return it != variants.end() && it->second.count(term) > 0;
    }
};

inline constexpr int kEditThreshold = 2;
inline constexpr size_t kEditMinLength = 5;

/// A vocabulary term is a variant of `word` when it shares the word's Porter
/// stem, lies within edit distance 2 of its surface form, or lies within
/// edit distance 2 of its stem (misspelled inflections such as
/// "requeriments" only meet the word at the stem level). Distance routes are
/// gated to lengths >= 5 and never apply to stopwords.
template <typename Vocab>
std::set<std::string> expand(const std::string& word, const Vocab& vocabulary) {
    std::set<std::string> out;
    if (stopwords().count(word)) return out;
    const std::string word_stem = porter_stem(word);
    const bool word_gate = word.size() >= kEditMinLength;
    for (const auto& cand : vocabulary) {
        if (cand == word) {
            out.insert(cand);
            continue;
        }
        if (stopwords().count(cand)) continue;
        const std::string cand_stem = porter_stem(cand);
        if (cand_stem == word_stem) {
            out.insert(cand);
            continue;
        }
        if (!word_gate || cand.size() < kEditMinLength) continue;
        if (levenshtein_at_most(word, cand, kEditThreshold)) {
            out.insert(cand);
            continue;
        }
        if (word_stem.size() >= kEditMinLength && cand_stem.size() >= kEditMinLength &&
            levenshtein_at_most(word_stem, cand_stem, kEditThreshold))
            out.insert(cand);
    }
    return out;
}

template <typename Vocab>
ExpandedQuery expand_query(const Query& q, const Vocab& vocabulary, bool enabled = true) {
    ExpandedQuery eq;
    eq.original = q;
    for (const auto& w : q.words) {
        if (eq.variants.count(w)) continue;
        if (enabled) {
            eq.variants[w] = expand(w, vocabulary);
        } else {
            std::set<std::string> self;
            for (const auto& cand : vocabulary)
                if (cand == w) self.insert(cand);
            eq.variants[w] = std::move(self);
        }
    }
    return eq;
}

}  // namespace mailrank::queryexp
