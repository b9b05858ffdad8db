#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mailrank/corpus.hpp"
#include "mailrank/index.hpp"
#include "mailrank/threadstore.hpp"

namespace mailrank {

/// What the store keeps per email after ingestion. Document texts live in
/// the thread nodes; `nodes[j]` is the node holding the email's level-j
/// document.
struct EmailEntry {
    std::string id;
    std::string sender;
    std::vector<std::string> recipients;
    std::int64_t date = 0;
    std::string date_raw;
    std::string raw_subject;
    std::string norm_subject;
    std::string folder;
    std::vector<threadstore::NodeId> nodes;
    int thread_id = -1;
};

struct IngestStats {
    size_t emails = 0;
    size_t duplicates = 0;
    size_t documents = 0;  // newly stored (distinct) documents
    size_t parse_errors = 0;
};

/// The whole searchable state: parsed emails, thread trees, inverted index,
/// sender profiles. Single writer; became immutable once a search starts.
class Mailbox {
  public:
    std::vector<EmailEntry> emails;
    threadstore::ThreadStore threads;
    indexing::IndexStore index;
    indexing::SenderProfiles senders;
    std::vector<std::vector<int>> node_emails;  // node -> indices into emails
    std::unordered_map<std::string, int> email_by_id;

    /// Threads, indexes and profiles one parsed email. Returns false when an
    /// email with the same identity is already stored.
    bool ingest_email(const corpus::Email& e, size_t* new_documents = nullptr) {
        if (email_by_id.count(e.email_id)) return false;
        auto outcome = threads.add_email(e);
        for (threadstore::NodeId n : outcome.inserted)
            index.index_document(n, threads.node(n).text);
        if (new_documents) *new_documents = outcome.inserted.size();

        if (!e.sender.empty()) {
            auto tokens = queryexp::tokenize_text(e.documents.front().text);
            auto subject_tokens = queryexp::tokenize_text(e.norm_subject);
            tokens.insert(tokens.end(), subject_tokens.begin(), subject_tokens.end());
            senders.add_email(e.sender, tokens);
        }

        EmailEntry rec;
        rec.id = e.email_id;
        rec.sender = e.sender;
        rec.recipients = e.recipients;
        rec.date = e.date;
        rec.date_raw = e.date_raw;
        rec.raw_subject = e.raw_subject;
        rec.norm_subject = e.norm_subject;
        rec.folder = e.folder;
        rec.nodes = outcome.level_nodes;
        rec.thread_id = outcome.thread_id;
        int idx = static_cast<int>(emails.size());
        emails.push_back(std::move(rec));
        email_by_id[e.email_id] = idx;

        if (node_emails.size() < threads.node_count())
            node_emails.resize(threads.node_count());
        std::vector<threadstore::NodeId> seen;
        for (threadstore::NodeId n : outcome.level_nodes) {
            if (std::find(seen.begin(), seen.end(), n) != seen.end()) continue;
            seen.push_back(n);
            node_emails[static_cast<size_t>(n)].push_back(idx);
        }
        return true;
    }

    IngestStats ingest_directory(const std::filesystem::path& dir,
                                 const std::vector<std::string>& folders,
                                 std::vector<std::string>* errors = nullptr) {
        IngestStats stats;
        for (const auto& file : corpus::list_maildir(dir, folders)) {
            corpus::Email e;
            try {
                e = corpus::parse_email(corpus::read_file(file), file.string());
            } catch (const corpus::ParseError& ex) {
                ++stats.parse_errors;
                if (errors) errors->push_back(ex.what());
                continue;
            }
            e.folder = corpus::folder_of(file);
            size_t new_docs = 0;
            if (ingest_email(e, &new_docs)) {
                ++stats.emails;
                stats.documents += new_docs;
            } else {
                ++stats.duplicates;
            }
        }
        index.refresh_norms();
        senders.refresh_norms();
        return stats;
    }

    const EmailEntry* find_email(const std::string& id) const {
        auto it = email_by_id.find(id);
        return it == email_by_id.end() ? nullptr : &emails[static_cast<size_t>(it->second)];
    }

    /// Distinct senders seen in this mailbox (the user's contact list).
    std::vector<std::string> contacts() const {
        std::vector<std::string> out = senders.senders();
        return out;
    }

    /// Main-body text of an email (its level-0 node).
    const std::string& main_body_text(int email_idx) const {
        static const std::string kEmpty;
        const auto& rec = emails[static_cast<size_t>(email_idx)];
        if (rec.nodes.empty()) return kEmpty;
        return threads.node(rec.nodes.front()).text;
    }

    void rebuild_node_emails() {
        node_emails.assign(threads.node_count(), {});
        for (size_t i = 0; i < emails.size(); ++i) {
            std::vector<threadstore::NodeId> seen;
            for (threadstore::NodeId n : emails[i].nodes) {
                if (std::find(seen.begin(), seen.end(), n) != seen.end()) continue;
                seen.push_back(n);
                node_emails[static_cast<size_t>(n)].push_back(static_cast<int>(i));
            }
        }
        email_by_id.clear();
        for (size_t i = 0; i < emails.size(); ++i)
            email_by_id[emails[i].id] = static_cast<int>(i);
    }
};

}  // namespace mailrank
