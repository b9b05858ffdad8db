#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mailrank/ranker.hpp"
#include "support/gen.hpp"
#include "support/oracle.hpp"

using namespace mailrank;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

corpus::Email simple_email(const std::string& id, const std::string& sender,
                           const std::string& subject, const std::string& body,
                           std::int64_t date) {
    std::string text = "Message-ID: " + id + "\nFrom: " + sender +
                       "\nSubject: " + subject + "\n\n" + body + "\n";
    auto e = corpus::parse_email(text);
    e.date = date;
    return e;
}

}  // namespace

TEST_CASE("cosine basics", "[ranker]") {
    indexing::WeightedVector a{{{"x", 2.0}, {"y", 2.0}}};
    indexing::WeightedVector same = a;
    indexing::WeightedVector disjoint{{{"z", 1.0}}};
    indexing::WeightedVector half{{{"x", 1.0}}};
    CHECK_THAT(ranker::cosine(a, same), WithinRel(1.0, 1e-12));
    CHECK(ranker::cosine(a, disjoint) == 0.0);
    CHECK_THAT(ranker::cosine({{{"x", 1.0}, {"y", 1.0}}}, half),
               WithinRel(1.0 / std::sqrt(2.0), 1e-12));
    CHECK(ranker::cosine({}, a) == 0.0);
}

TEST_CASE("combined score follows the product form", "[ranker]") {
    CHECK_THAT(ranker::combine(0.5, 0.3, 1.0), WithinRel(0.65, 1e-12));
    CHECK(ranker::combine(0.0, 0.9, 1.0) == 0.0);
    CHECK(ranker::combine(0.7, 0.0, 0.0) == 0.0);
    CHECK_THAT(ranker::combine(0.0, 0.9, 1.0, 0.1), WithinRel(0.19, 1e-12));
}

TEST_CASE("subject-matched email ranks first", "[ranker]") {
    Mailbox box;
    box.ingest_email(simple_email("<1>", "ann@x", "conference call",
                                  "we will dial in tomorrow", 100));
    box.ingest_email(simple_email("<2>", "bob@x", "lunch",
                                  "conference call materials attached here", 200));
    box.ingest_email(simple_email("<3>", "cat@x", "other", "nothing relevant", 300));

    auto r = ranker::rank(box, {.query = "conference call"});
    REQUIRE(r.ranked.size() >= 2);
    CHECK(r.ranked[0].email_id == "<1>");
    CHECK(r.ranked[0].t_score == 1.0);
    CHECK(r.retrieved.via_subject.count("<1>") == 1);
    CHECK(r.retrieved.via_content.count("<2>") == 1);
    CHECK(r.retrieved.emails.count("<3>") == 0);
}

TEST_CASE("query words scattered across quotation levels do not retrieve", "[ranker]") {
    Mailbox box;
    // the pathological email: "conference" in its own text, "call" only in
    // the quotation
    std::string body =
        "please join the conference in houston\n"
        "\n"
        "-----Original Message-----\n"
        "From: Someone\n"
        "To: Other\n"
        "Subject: phones\n"
        "\n"
        "i will call about the budget later\n";
    auto e = corpus::parse_email(
        "Message-ID: <path>\nFrom: ann@x\nSubject: travel plans\n\n" + body);
    e.date = 100;
    box.ingest_email(e);
    box.ingest_email(simple_email("<good>", "bob@x", "notes",
                                  "the conference call is at three", 200));

    auto r = ranker::rank(box, {.query = "conference call"});
    CHECK(r.retrieved.via_content.count("<good>") == 1);
    CHECK(r.retrieved.via_content.count("<path>") == 0);
    CHECK(r.retrieved.emails.count("<path>") == 0);

    // a whole-body index would have matched it
    std::string whole;
    for (const auto& d : e.documents) whole += d.text + " ";
    auto toks = queryexp::tokenize_text(whole);
    bool has_conference = std::count(toks.begin(), toks.end(), "conference") > 0;
    bool has_call = std::count(toks.begin(), toks.end(), "call") > 0;
    CHECK((has_conference && has_call));
}

TEST_CASE("empty query is an error, zero hits is not", "[ranker]") {
    Mailbox box;
    box.ingest_email(simple_email("<1>", "ann@x", "hello", "world", 1));
    CHECK_THROWS_AS(ranker::rank(box, {.query = "   "}), std::invalid_argument);
    auto r = ranker::rank(box, {.query = "nonexistent"});
    CHECK(r.ranked.empty());
}

TEST_CASE("thread members inherit retrieval through descendants", "[ranker]") {
    Mailbox box;
    box.ingest_email(simple_email("<root>", "ann@x", "plans",
                                  "the secret keyword hides here", 100));
    std::string reply_text =
        "Message-ID: <reply>\nFrom: bob@x\nSubject: Re: plans\n\n"
        "sounds good\n\n> the secret keyword hides here\n";
    auto reply = corpus::parse_email(reply_text);
    reply.date = 200;
    box.ingest_email(reply);

    auto r = ranker::rank(box, {.query = "secret keyword"});
    CHECK(r.retrieved.emails.count("<root>") == 1);
    // the reply quotes the matching content, so it is relevant too
    CHECK(r.retrieved.emails.count("<reply>") == 1);
}

TEST_CASE("content score halves per quotation level", "[ranker]") {
    Mailbox box;
    box.ingest_email(simple_email("<o>", "ann@x", "exposure recap",
                                  "netting exposure details", 100));
    auto reply = corpus::parse_email(
        "Message-ID: <r>\nFrom: bob@x\nSubject: Re: exposure recap\n\n"
        "thanks\n\n> netting exposure details\n");
    reply.date = 200;
    box.ingest_email(reply);
    auto grandreply = corpus::parse_email(
        "Message-ID: <g>\nFrom: cat@x\nSubject: Re: exposure recap\n\n"
        "agreed\n\n> thanks\n> > netting exposure details\n");
    grandreply.date = 300;
    box.ingest_email(grandreply);

    auto r = ranker::rank(box, {.query = "netting"});
    double c_o = -1, c_r = -1, c_g = -1;
    for (const auto& se : r.ranked) {
        if (se.email_id == "<o>") c_o = se.c_score;
        if (se.email_id == "<r>") c_r = se.c_score;
        if (se.email_id == "<g>") c_g = se.c_score;
    }
    REQUIRE(c_o > 0.0);
    // the reply's own text has no query term; its only contribution is the
    // quoted document at level 1, then level 2
    CHECK_THAT(c_r, Catch::Matchers::WithinRel(0.5 * c_o, 1e-12));
    CHECK_THAT(c_g, Catch::Matchers::WithinRel(0.25 * c_o, 1e-12));
}

TEST_CASE("scores match the brute-force oracle", "[ranker][oracle]") {
    std::mt19937 rng(909);
    int non_trivial = 0;
    for (int iter = 0; iter < 40; ++iter) {
        auto corpus = testgen::make_random_corpus(rng);
        auto box = testgen::ingest(corpus);
        std::uniform_int_distribution<size_t> pick(0, testgen::word_pool().size() - 1);
        std::string query = testgen::word_pool()[pick(rng)];
        if (iter % 2 == 0) query += " " + testgen::word_pool()[pick(rng)];

        auto expected = oracle::rank(corpus, query);
        ranker::RankResult got;
        got = ranker::rank(box, {.query = query, .expand = false});

        REQUIRE(got.ranked.size() == expected.size());
        for (const auto& se : got.ranked) {
            auto it = expected.find(se.email_id);
            REQUIRE(it != expected.end());
            INFO("email " << se.email_id << " query '" << query << "' iter " << iter);
            CHECK_THAT(se.t_score, WithinAbs(it->second.t, 1e-12));
            CHECK_THAT(se.c_score, WithinAbs(it->second.c, 1e-9) ||
                                       WithinRel(it->second.c, 1e-9));
            CHECK_THAT(se.s_score, WithinAbs(it->second.s, 1e-9) ||
                                       WithinRel(it->second.s, 1e-9));
            CHECK_THAT(se.score, WithinAbs(it->second.total, 1e-9) ||
                                     WithinRel(it->second.total, 1e-9));
        }
        if (!got.ranked.empty()) ++non_trivial;
    }
    CHECK(non_trivial > 10);  // the generator must actually produce hits
}

TEST_CASE("ranking is deterministic", "[ranker]") {
    std::mt19937 rng(77);
    auto corpus = testgen::make_random_corpus(rng);
    auto box = testgen::ingest(corpus);
    auto r1 = ranker::rank(box, {.query = "alpha bravo"});
    auto r2 = ranker::rank(box, {.query = "alpha bravo"});
    CHECK(ranker::format_results(box, r1.ranked, 0) ==
          ranker::format_results(box, r2.ranked, 0));
}

TEST_CASE("raising tscore never lowers an email", "[ranker][property]") {
    std::mt19937 rng(31337);
    for (int iter = 0; iter < 20; ++iter) {
        auto corpus = testgen::make_random_corpus(rng);
        auto box = testgen::ingest(corpus);
        auto r = ranker::rank(box, {.query = "alpha"});
        if (r.ranked.size() < 2) continue;
        for (size_t i = 0; i < r.ranked.size(); ++i) {
            if (r.ranked[i].t_score != 0.0) continue;
            auto boosted = r.ranked;
            boosted[i].t_score = 1.0;
            boosted[i].score = boosted[i].s_score * (boosted[i].c_score + 1.0);
            auto id = boosted[i].email_id;
            std::sort(boosted.begin(), boosted.end(), [](const auto& a, const auto& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.date != b.date) return a.date > b.date;
                return a.email_id < b.email_id;
            });
            size_t old_pos = i, new_pos = 0;
            for (size_t k = 0; k < boosted.size(); ++k)
                if (boosted[k].email_id == id) new_pos = k;
            CHECK(new_pos <= old_pos);
        }
    }
}

TEST_CASE("every retrieved email can justify its retrieval", "[ranker][property]") {
    std::mt19937 rng(555);
    for (int iter = 0; iter < 25; ++iter) {
        auto corpus = testgen::make_random_corpus(rng);
        auto box = testgen::ingest(corpus);
        std::uniform_int_distribution<size_t> pick(0, testgen::word_pool().size() - 1);
        std::string query = testgen::word_pool()[pick(rng)] + " " +
                            testgen::word_pool()[pick(rng)];
        auto r = ranker::rank(box, {.query = query});
        const auto& words = r.expanded.original.words;

        std::set<std::string> reunion = r.retrieved.via_subject;
        reunion.insert(r.retrieved.via_content.begin(), r.retrieved.via_content.end());
        CHECK(reunion == r.retrieved.emails);
        for (const auto& se : r.ranked)
            CHECK(se.score == se.s_score * (se.c_score + se.t_score));

        auto doc_satisfies = [&](const std::string& text) {
            auto toks = queryexp::tokenize_text(text);
            std::set<std::string> tokset(toks.begin(), toks.end());
            for (const auto& w : words) {
                bool hit = false;
                for (const auto& t : tokset)
                    if (r.expanded.matches(w, t)) hit = true;
                if (!hit) return false;
            }
            return true;
        };

        for (const auto& id : r.retrieved.via_content) {
            const auto* e = box.find_email(id);
            REQUIRE(e != nullptr);
            // some document of the email, or a descendant it spawned,
            // carries every query word; direct owners must satisfy it via
            // one of their own documents' nodes or an ancestor match
            bool ok = false;
            for (auto n : e->nodes) {
                // check the node itself and every ancestor (content the
                // email physically contains or quotes)
                for (int cur = n; cur != -1; cur = box.threads.node(cur).parent)
                    if (doc_satisfies(box.threads.node(cur).text)) ok = true;
            }
            INFO("email " << id << " query '" << query << "'");
            CHECK(ok);
        }
        for (const auto& id : r.retrieved.via_subject) {
            const auto* e = box.find_email(id);
            REQUIRE(e != nullptr);
            auto toks = queryexp::tokenize_text(
                box.threads.thread(e->thread_id).subject, true);
            std::set<std::string> tokset(toks.begin(), toks.end());
            bool all = true;
            for (const auto& w : words) {
                bool hit = false;
                for (const auto& t : tokset)
                    if (r.expanded.matches(w, t)) hit = true;
                all = all && hit;
            }
            CHECK(all);
        }
        // emails outside E_R justify nothing: no single owned document has
        // all the words and the thread subject lacks them
        for (const auto& e : box.emails) {
            if (r.retrieved.emails.count(e.id)) continue;
            for (auto n : e.nodes) CHECK_FALSE(doc_satisfies(box.threads.node(n).text));
        }
    }
}

TEST_CASE("date baseline is reverse chronological", "[ranker][baseline]") {
    Mailbox box;
    box.ingest_email(simple_email("<1>", "ann@x", "x report", "report one", 100));
    box.ingest_email(simple_email("<2>", "bob@x", "y report", "report two", 300));
    box.ingest_email(simple_email("<3>", "cat@x", "z report", "report three", 200));
    auto r = ranker::rank(box, {.query = "report"});
    auto by_date = ranker::baseline_rank(box, "date", r.ranked, queryexp::tokenize("report"));
    REQUIRE(by_date.size() == 3);
    CHECK(by_date[0].email_id == "<2>");
    CHECK(by_date[1].email_id == "<3>");
    CHECK(by_date[2].email_id == "<1>");
}

TEST_CASE("thread_date groups threads by their newest email", "[ranker][baseline]") {
    auto reply = [](const std::string& id, const std::string& sender,
                    const std::string& subject, const std::string& own,
                    const std::string& quoted, std::int64_t date) {
        std::string text = "Message-ID: " + id + "\nFrom: " + sender +
                           "\nSubject: Re: " + subject + "\n\n" + own + "\n\n> " +
                           quoted + "\n";
        auto e = corpus::parse_email(text);
        e.date = date;
        return e;
    };
    Mailbox box;
    // thread A: old start, no recent activity
    box.ingest_email(simple_email("<a1>", "ann@x", "alpha report", "report alpha today", 100));
    box.ingest_email(reply("<a2>", "ann@x", "alpha report", "more report text",
                           "report alpha today", 150));
    // thread B: started later, newest overall
    box.ingest_email(simple_email("<b1>", "bob@x", "beta report", "report beta", 120));
    box.ingest_email(reply("<b2>", "bob@x", "beta report", "extra report lines",
                           "report beta", 400));
    auto r = ranker::rank(box, {.query = "report"});
    auto ranked =
        ranker::baseline_rank(box, "thread_date", r.ranked, queryexp::tokenize("report"));
    REQUIRE(ranked.size() == 4);
    CHECK(ranked[0].email_id == "<b2>");
    CHECK(ranked[1].email_id == "<b1>");
    CHECK(ranked[2].email_id == "<a2>");
    CHECK(ranked[3].email_id == "<a1>");
}

TEST_CASE("alphabetical baselines sort descending", "[ranker][baseline]") {
    Mailbox box;
    box.ingest_email(simple_email("<1>", "zoe@x", "apples", "shared word", 100));
    box.ingest_email(simple_email("<2>", "amy@x", "zebras", "shared word", 200));
    auto r = ranker::rank(box, {.query = "shared word"});
    auto by_subject =
        ranker::baseline_rank(box, "subject_alpha", r.ranked, queryexp::tokenize("shared"));
    CHECK(by_subject[0].email_id == "<2>");  // "zebras" > "apples"
    auto by_sender =
        ranker::baseline_rank(box, "sender_alpha", r.ranked, queryexp::tokenize("shared"));
    CHECK(by_sender[0].email_id == "<1>");  // zoe@x > amy@x
}

TEST_CASE("clues baseline falls back to date order when the clue is absent",
          "[ranker][baseline]") {
    Mailbox box;
    box.ingest_email(simple_email("<1>", "ann@x", "m", "politics word here", 100));
    box.ingest_email(simple_email("<2>", "bob@x", "n", "politics again now", 300));
    auto r = ranker::rank(box, {.query = "politics"});
    auto ranked = ranker::baseline_rank(box, "clues", r.ranked,
                                        queryexp::tokenize("politics"), "nosuchclue");
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].email_id == "<2>");
    CHECK(ranked[1].email_id == "<1>");
}

TEST_CASE("clues baseline prefers co-occurring blocks", "[ranker][baseline]") {
    Mailbox box;
    box.ingest_email(simple_email(
        "<hit>", "ann@x", "m", "bush spoke about politics today\n\nother paragraph", 100));
    box.ingest_email(simple_email(
        "<miss>", "bob@x", "n", "bush the plant\n\npolitics in another paragraph", 300));
    auto r = ranker::rank(box, {.query = "bush"});
    auto ranked = ranker::baseline_rank(box, "clues", r.ranked,
                                        queryexp::tokenize("bush"), "politics");
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].email_id == "<hit>");  // despite being older
}

TEST_CASE("unknown baseline name is rejected", "[ranker][baseline]") {
    Mailbox box;
    box.ingest_email(simple_email("<1>", "ann@x", "m", "body", 100));
    auto r = ranker::rank(box, {.query = "body"});
    CHECK_THROWS_AS(
        ranker::baseline_rank(box, "bogus", r.ranked, queryexp::tokenize("body")),
        std::invalid_argument);
}

TEST_CASE("sender score separates senders by their vocabulary", "[ranker]") {
    Mailbox box;
    box.ingest_email(simple_email("<1>", "expert@x", "na",
                                  "netting netting netting all day", 100));
    box.ingest_email(simple_email("<2>", "other@x", "nb", "lunch plans and chatter", 200));
    box.ingest_email(simple_email("<3>", "expert@x", "nc", "netting again", 300));
    auto r = ranker::rank(box, {.query = "netting"});
    REQUIRE(r.ranked.size() >= 2);
    double s_expert = 0.0, s_other = -1.0;
    for (const auto& se : r.ranked) {
        if (se.email_id == "<1>") s_expert = se.s_score;
        if (se.email_id == "<2>") s_other = se.s_score;
    }
    CHECK(s_expert > 0.0);
    // "<2>" only appears if retrieved; it should not be
    CHECK(s_other == -1.0);
}
