// mailrank: ingest a maildir, search it, evaluate ranking methods, and run
// or feed the sender-expertise server.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "mailrank/engine.hpp"
#include "mailrank/evalkit.hpp"
#include "mailrank/netexpert.hpp"
#include "mailrank/persist.hpp"
#include "mailrank/ranker.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

mailrank::Mailbox load_store(const std::string& path) {
    if (path.empty())
        throw mailrank::persist::StoreError(
            "no store path given (use --store or MAILRANK_STORE)");
    return mailrank::persist::load(path);
}

struct SearchPrintOptions {
    int top_k = 10;
    std::string run_out;
    std::string query_id = "q1";
    std::string tag = "era";
};

// Runs one query end to end and prints results plus recommendations; the
// expertise round-trip overlaps the local retrieval.
int run_search(const mailrank::Mailbox& box, mailrank::ranker::SearchOptions opts,
               const std::string& global_addr, const SearchPrintOptions& print_opts) {
    using namespace mailrank;

    std::future<netexpert::ExpertAnswer> pending;
    if (!global_addr.empty()) {
        auto q = queryexp::tokenize(opts.query);
        pending = std::async(std::launch::async, [global_addr, q] {
            auto [host, port] = netexpert::parse_address(global_addr);
            netexpert::Client client(host, port);
            return client.query_experts(q.words);
        });
    }

    ranker::RankResult result = ranker::rank(box, opts);

    netexpert::ExpertAnswer answer;
    bool have_network = false;
    if (pending.valid()) {
        try {
            answer = pending.get();
            have_network = true;
        } catch (const netexpert::NetError& e) {
            std::cerr << "warning: expertise server unreachable (" << e.what()
                      << "); falling back to local scoring\n";
        }
    }
    if (have_network && !answer.empty()) {
        opts.network = &answer;
        result = ranker::rank(box, opts);
    }

    std::vector<ranker::ScoredEmail> ranked = result.ranked;
    if (!opts.baseline.empty()) {
        auto q = queryexp::tokenize(opts.query);
        ranked = ranker::baseline_rank(box, opts.baseline, ranked, q, opts.clue);
    }

    std::cout << ranker::format_results(box, ranked, print_opts.top_k);
    if (have_network) {
        auto recs = netexpert::recommend(answer, box.contacts());
        if (!recs.empty()) {
            std::cout << "recommended senders:\n";
            for (size_t i = 0; i < recs.size(); ++i) {
                char w[32];
                std::snprintf(w, sizeof w, "%.6f", recs[i].combined_weight);
                std::cout << (i + 1) << "\t" << recs[i].user << "\t" << w << "\n";
            }
        }
    }
    if (!print_opts.run_out.empty()) {
        std::ofstream out(print_opts.run_out);
        if (!out) {
            std::cerr << "error: cannot write run file " << print_opts.run_out << "\n";
            return 1;
        }
        out << ranker::format_run(print_opts.query_id, ranked,
                                  opts.baseline.empty() ? print_opts.tag : opts.baseline);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace mailrank;

    CLI::App app{"email retrieval ranking over maildir-style corpora"};
    app.require_subcommand(1);

    std::string store_path;
    const char* env_store = std::getenv("MAILRANK_STORE");
    if (env_store) store_path = env_store;

    // ---- ingest ----
    auto* ingest = app.add_subcommand("ingest", "parse, thread and index a maildir tree");
    std::string maildir;
    std::string folders_csv = "inbox,sent_items";
    ingest->add_option("--maildir", maildir, "root of the maildir tree")->required();
    ingest->add_option("--store", store_path, "store file path")
        ->envname("MAILRANK_STORE")
        ->required();
    ingest->add_option("--folders", folders_csv,
                       "comma-separated folder names to ingest (empty = all)");
    ingest->callback([&] {
        if (!std::filesystem::is_directory(maildir))
            throw CLI::ValidationError("--maildir", "not a readable directory: " + maildir);
        Mailbox box;
        if (persist::exists(store_path)) box = persist::load(store_path);
        std::vector<std::string> errors;
        auto stats = box.ingest_directory(maildir, split_csv(folders_csv), &errors);
        persist::save(box, store_path);
        std::cout << box.emails.size() << " emails, " << box.threads.node_count()
                  << " documents, " << box.threads.thread_count() << " threads\n";
        if (stats.duplicates > 0)
            std::cerr << "note: " << stats.duplicates << " duplicate emails skipped\n";
        for (const auto& e : errors) std::cerr << "warning: " << e << "\n";
    });

    // ---- search ----
    auto* search = app.add_subcommand("search", "rank emails for a query");
    ranker::SearchOptions sopts;
    SearchPrintOptions print_opts;
    std::string global_addr;
    bool interactive = false;
    bool no_expand = false;
    search->add_option("--store", store_path, "store file path")->envname("MAILRANK_STORE");
    search->add_option("--query", sopts.query, "query text");
    search->add_option("--top", print_opts.top_k, "results to display (0 = all)");
    search->add_option("--global", global_addr, "expertise server host:port");
    search->add_option("--baseline", sopts.baseline,
                       "rank by a baseline: date, thread_date, subject_alpha, "
                       "sender_alpha, clues");
    search->add_option("--clue", sopts.clue, "clue word for the clues baseline");
    search->add_option("--run-out", print_opts.run_out, "write a run file here");
    search->add_option("--query-id", print_opts.query_id, "query id for the run file");
    search->add_option("--sscore-epsilon", sopts.sscore_epsilon,
                       "additive smoothing on the sender score");
    search->add_flag("--no-expand", no_expand, "disable query expansion");
    search->add_flag("--interactive", interactive, "query loop on stdin");
    search->callback([&] {
        sopts.expand = !no_expand;
        Mailbox box = load_store(store_path);
        if (interactive) {
            std::string line;
            std::cout << "query> " << std::flush;
            while (std::getline(std::cin, line)) {
                if (!corpus::trim(line).empty()) {
                    auto opts = sopts;
                    opts.query = line;
                    try {
                        run_search(box, opts, global_addr, print_opts);
                    } catch (const std::exception& e) {
                        std::cerr << "error: " << e.what() << "\n";
                    }
                }
                std::cout << "query> " << std::flush;
            }
            return;
        }
        if (corpus::trim(sopts.query).empty())
            throw CLI::ValidationError("--query", "empty query");
        int rc = run_search(box, sopts, global_addr, print_opts);
        if (rc != 0) throw CLI::RuntimeError(rc);
    });

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "compare ranking methods against qrels");
    std::string queries_file, qrels_file, ks_csv = "1,5,10";
    std::string methods_csv = "era,date,thread_date,subject_alpha,sender_alpha,clues";
    std::string report_out, run_dir, eval_clue;
    bool eval_no_expand = false;
    eval->add_option("--store", store_path, "store file path")->envname("MAILRANK_STORE");
    eval->add_option("--queries", queries_file, "tab-separated query file")->required();
    eval->add_option("--qrels", qrels_file, "tab-separated graded judgments")->required();
    eval->add_option("--k", ks_csv, "comma-separated NDCG cutoffs");
    eval->add_option("--methods", methods_csv, "comma-separated methods to compare");
    eval->add_option("--report-out", report_out, "write key-value metrics here");
    eval->add_option("--run-dir", run_dir, "write per-method run files here");
    eval->add_option("--clue", eval_clue, "clue word for the clues baseline");
    eval->add_flag("--no-expand", eval_no_expand, "disable query expansion");
    eval->callback([&] {
        Mailbox box = load_store(store_path);
        auto queries = evalkit::load_queries(queries_file);
        auto qrels = evalkit::Qrels::load(qrels_file);
        std::vector<int> ks;
        for (const auto& k : split_csv(ks_csv)) ks.push_back(std::stoi(k));
        auto methods = split_csv(methods_csv);

        evalkit::MetricReport report;
        report.ks = ks;
        for (const auto& method : methods) {
            if (method != "era") {
                const auto& valid = ranker::baseline_methods();
                if (std::find(valid.begin(), valid.end(), method) == valid.end()) {
                    std::string all = "era";
                    for (const auto& v : valid) all += ", " + v;
                    throw CLI::ValidationError("--methods", "unknown method '" + method +
                                                                "' (valid: " + all + ")");
                }
            }
            evalkit::Run run;
            run.name = method;
            if (!run_dir.empty())  // truncate any stale run file
                std::ofstream(run_dir + "/" + method + ".run", std::ios::trunc);
            for (const auto& [qid, text] : queries) {
                ranker::SearchOptions opts;
                opts.query = text;
                opts.expand = !eval_no_expand;
                opts.clue = eval_clue;
                ranker::RankResult result;
                try {
                    result = ranker::rank(box, opts);
                } catch (const std::invalid_argument&) {
                    continue;  // empty query line
                }
                auto ranked = result.ranked;
                if (method != "era") {
                    auto q = queryexp::tokenize(text);
                    ranked = ranker::baseline_rank(box, method, ranked, q, eval_clue);
                }
                auto& ids = run.by_query[qid];
                for (const auto& se : ranked) ids.push_back(se.email_id);
                if (!run_dir.empty()) {
                    std::ofstream out(run_dir + "/" + method + ".run", std::ios::app);
                    out << ranker::format_run(qid, ranked, method);
                }
            }
            report.runs.push_back(evalkit::evaluate_run(run, qrels, ks));
        }
        std::cout << report.render_table();
        for (const auto& r : report.runs)
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
        if (!report_out.empty()) {
            std::ofstream out(report_out);
            out << report.render_kv();
        }
    });

    // ---- serve ----
    auto* serve = app.add_subcommand("serve", "run the sender-expertise server");
    int port = 0;
    std::string expert_store;
    serve->add_option("--port", port, "TCP port (0 = ephemeral)")->required();
    serve->add_option("--store", expert_store, "profile persistence file");
    serve->callback([&] {
        netexpert::Server server(expert_store);
        int bound = server.start(port);
        std::cout << "listening on " << bound << "\n" << std::flush;
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
    });

    // ---- publish ----
    auto* publish = app.add_subcommand(
        "publish", "send the owner's public-folder term profile to the server");
    std::string server_addr, public_folders_csv = "sent_items", owner;
    publish->add_option("--store", store_path, "store file path")->envname("MAILRANK_STORE");
    publish->add_option("--server", server_addr, "expertise server host:port")->required();
    publish->add_option("--public-folders", public_folders_csv,
                        "folders whose emails may be shared");
    publish->add_option("--user", owner, "published identity (default: inferred owner)");
    publish->callback([&] {
        Mailbox box = load_store(store_path);
        auto public_folders = split_csv(public_folders_csv);
        auto in_public = [&](const EmailEntry& e) {
            for (const auto& f : public_folders)
                if (e.folder == f) return true;
            return false;
        };
        if (owner.empty()) {
            // the most frequent sender of the public folders is the owner
            std::map<std::string, int> freq;
            for (const auto& e : box.emails)
                if (!e.sender.empty() && in_public(e)) ++freq[e.sender];
            if (freq.empty())
                for (const auto& e : box.emails)
                    if (!e.sender.empty()) ++freq[e.sender];
            for (const auto& [s, n] : freq)
                if (owner.empty() || n > freq[owner]) owner = s;
            if (owner.empty())
                throw CLI::ValidationError("--user", "cannot infer owner from an empty mailbox");
        }
        // term frequencies over the owner's public emails; IDF at sender
        // granularity from the full local statistics
        std::map<std::string, int> tf;
        for (size_t i = 0; i < box.emails.size(); ++i) {
            const auto& e = box.emails[i];
            if (e.sender != owner || !in_public(e)) continue;
            auto tokens = queryexp::tokenize_text(box.main_body_text(static_cast<int>(i)));
            auto stoks = queryexp::tokenize_text(e.norm_subject);
            tokens.insert(tokens.end(), stoks.begin(), stoks.end());
            for (const auto& t : tokens) ++tf[t];
        }
        std::map<std::string, double> weights;
        for (const auto& [t, n] : tf) {
            int df = box.senders.doc_freq(t);
            if (df == 0) continue;
            double w = n * std::log10(static_cast<double>(box.senders.sender_count()) / df);
            if (w > 0.0) weights[t] = w;
        }
        auto [host, p] = netexpert::parse_address(server_addr);
        netexpert::Client client(host, p);
        client.publish(owner, weights);
        std::cout << "published " << weights.size() << " terms for " << owner << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
