#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mailrank/engine.hpp"

namespace mailrank::persist {

struct StoreError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kMagic = "mailrank-store";
inline constexpr int kVersion = 1;

inline nlohmann::json to_json(const Mailbox& m) {
    nlohmann::json j;
    j["magic"] = kMagic;
    j["version"] = kVersion;

    auto& emails = j["emails"] = nlohmann::json::array();
    for (const auto& e : m.emails) {
        emails.push_back({{"id", e.id},
                          {"sender", e.sender},
                          {"recipients", e.recipients},
                          {"date", e.date},
                          {"date_raw", e.date_raw},
                          {"subject", e.raw_subject},
                          {"norm_subject", e.norm_subject},
                          {"folder", e.folder},
                          {"nodes", e.nodes},
                          {"thread", e.thread_id}});
    }

    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (const auto& n : m.threads.nodes()) {
        nodes.push_back({{"id", n.id},
                         {"parent", n.parent},
                         {"children", n.children},
                         {"fp", n.fingerprint},
                         {"text", n.text},
                         {"main_body_of", n.main_body_of}});
    }

    auto& threads = j["threads"] = nlohmann::json::array();
    nlohmann::json node_thread = nlohmann::json::array();
    for (size_t i = 0; i < m.threads.node_count(); ++i)
        node_thread.push_back(m.threads.thread_of_node(static_cast<int>(i)));
    j["node_thread"] = std::move(node_thread);
    for (const auto& t : m.threads.threads()) {
        threads.push_back({{"id", t.id},
                           {"subject", t.subject},
                           {"roots", t.roots},
                           {"nodes", t.nodes},
                           {"emails", t.email_ids}});
    }

    nlohmann::json postings = nlohmann::json::object();
    for (const auto& [term, list] : m.index.postings()) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [doc, tf] : list) entries.push_back({doc, tf});
        postings[term] = std::move(entries);
    }
    nlohmann::json doc_len = nlohmann::json::object();
    nlohmann::json norms = nlohmann::json::object();
    for (size_t i = 0; i < m.threads.node_count(); ++i) {
        int id = static_cast<int>(i);
        doc_len[std::to_string(id)] = m.index.doc_length(id);
        norms[std::to_string(id)] = m.index.doc_norm(id);
    }
    j["index"] = {{"postings", std::move(postings)},
                  {"total_docs", m.index.total_docs()},
                  {"doc_len", std::move(doc_len)},
                  {"norms", std::move(norms)}};

    nlohmann::json senders = nlohmann::json::object();
    for (const auto& [s, prof] : m.senders.profiles()) {
        nlohmann::json terms = nlohmann::json::object();
        for (const auto& [t, tf] : prof) terms[t] = tf;
        senders[s] = {{"terms", std::move(terms)},
                      {"emails", m.senders.email_counts().at(s)}};
    }
    j["senders"] = std::move(senders);
    return j;
}

inline Mailbox from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("magic", "") != kMagic)
        throw StoreError("not a mailrank store file");
    if (j.value("version", 0) != kVersion)
        throw StoreError("unsupported store version " + std::to_string(j.value("version", 0)));

    Mailbox m;
    std::vector<threadstore::ThreadNode> nodes;
    for (const auto& n : j.at("nodes")) {
        threadstore::ThreadNode tn;
        tn.id = n.at("id").get<int>();
        tn.parent = n.at("parent").get<int>();
        tn.children = n.at("children").get<std::vector<int>>();
        tn.fingerprint = n.at("fp").get<std::string>();
        tn.text = n.at("text").get<std::string>();
        tn.main_body_of = n.at("main_body_of").get<std::vector<std::string>>();
        nodes.push_back(std::move(tn));
    }
    std::vector<threadstore::Thread> threads;
    for (const auto& t : j.at("threads")) {
        threadstore::Thread th;
        th.id = t.at("id").get<int>();
        th.subject = t.at("subject").get<std::string>();
        th.roots = t.at("roots").get<std::vector<int>>();
        th.nodes = t.at("nodes").get<std::vector<int>>();
        th.email_ids = t.at("emails").get<std::vector<std::string>>();
        threads.push_back(std::move(th));
    }
    m.threads.restore(std::move(nodes), std::move(threads),
                      j.at("node_thread").get<std::vector<int>>());

    for (const auto& e : j.at("emails")) {
        EmailEntry rec;
        rec.id = e.at("id").get<std::string>();
        rec.sender = e.at("sender").get<std::string>();
        rec.recipients = e.at("recipients").get<std::vector<std::string>>();
        rec.date = e.at("date").get<std::int64_t>();
        rec.date_raw = e.at("date_raw").get<std::string>();
        rec.raw_subject = e.at("subject").get<std::string>();
        rec.norm_subject = e.at("norm_subject").get<std::string>();
        rec.folder = e.at("folder").get<std::string>();
        rec.nodes = e.at("nodes").get<std::vector<int>>();
        rec.thread_id = e.at("thread").get<int>();
        m.emails.push_back(std::move(rec));
    }

    const auto& idx = j.at("index");
    std::unordered_map<std::string, std::vector<std::pair<int, int>>> postings;
    for (const auto& [term, entries] : idx.at("postings").items()) {
        auto& list = postings[term];
        for (const auto& entry : entries)
            list.emplace_back(entry.at(0).get<int>(), entry.at(1).get<int>());
    }
    std::unordered_map<int, int> doc_len;
    for (const auto& [id, len] : idx.at("doc_len").items())
        doc_len[std::stoi(id)] = len.get<int>();
    std::unordered_map<int, double> norms;
    for (const auto& [id, n] : idx.at("norms").items())
        norms[std::stoi(id)] = n.get<double>();
    m.index.restore(std::move(postings), std::move(doc_len), std::move(norms));

    std::unordered_map<std::string, std::map<std::string, int>> sender_tf;
    std::unordered_map<std::string, int> sender_emails;
    for (const auto& [s, prof] : j.at("senders").items()) {
        auto& terms = sender_tf[s];
        for (const auto& [t, tf] : prof.at("terms").items()) terms[t] = tf.get<int>();
        sender_emails[s] = prof.at("emails").get<int>();
    }
    m.senders.restore(std::move(sender_tf), std::move(sender_emails));

    m.rebuild_node_emails();
    return m;
}

inline void save(const Mailbox& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StoreError("cannot write store file " + path);
    out << to_json(m).dump() << "\n";
    if (!out) throw StoreError("short write to store file " + path);
}

inline Mailbox load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot read store file " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw StoreError("store file is not valid JSON: " + path);
    return from_json(j);
}

inline bool exists(const std::string& path) {
    std::ifstream in(path);
    return in.good();
}

}  // namespace mailrank::persist
