#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <thread>

#include "mailrank/engine.hpp"
#include "mailrank/netexpert.hpp"
#include "mailrank/ranker.hpp"

using namespace mailrank;
using namespace mailrank::netexpert;
using Catch::Matchers::WithinRel;

TEST_CASE("store publish and replace semantics", "[netexpert]") {
    ExpertiseStore store;
    CHECK(store.publish("ann@x", {{"netting", 0.9}, {"gas", 0.4}}));
    CHECK(store.user_count() == 1);
    auto ans = store.experts({"netting"});
    REQUIRE(ans.per_term["netting"].size() == 1);
    CHECK(ans.per_term["netting"][0].first == "ann@x");

    // re-publish with disjoint terms: old terms are gone
    CHECK(store.publish("ann@x", {{"power", 1.5}}));
    CHECK(store.experts({"netting"}).per_term["netting"].empty());
    CHECK(store.experts({"power"}).per_term["power"].size() == 1);

    CHECK_FALSE(store.publish("bad@x", {{"term", -0.1}}));
    CHECK(store.user_count() == 1);
}

TEST_CASE("experts are sorted descending and zero weights hidden", "[netexpert]") {
    ExpertiseStore store;
    store.publish("a@x", {{"t", 0.9}});
    store.publish("b@x", {{"t", 0.5}});
    store.publish("c@x", {{"t", 0.0}});
    auto ans = store.experts({"t", "unknown"});
    REQUIRE(ans.per_term["t"].size() == 2);
    CHECK(ans.per_term["t"][0].first == "a@x");
    CHECK(ans.per_term["t"][1].first == "b@x");
    CHECK(ans.per_term["unknown"].empty());
}

TEST_CASE("server round-trips published weights exactly", "[netexpert][server]") {
    Server server;
    int port = server.start(0);
    REQUIRE(port > 0);

    Client client("127.0.0.1", port);
    std::map<std::string, double> terms = {{"netting", 0.123456789012345},
                                           {"collateral", 2.5}};
    client.publish("ann@x", terms);
    auto ans = client.query_experts({"netting", "collateral"});
    REQUIRE(ans.per_term["netting"].size() == 1);
    CHECK(ans.per_term["netting"][0].second == terms["netting"]);
    CHECK(ans.per_term["collateral"][0].second == 2.5);
    server.stop();
}

TEST_CASE("malformed messages keep the connection open", "[netexpert][server]") {
    Server server;
    int port = server.start(0);
    Client client("127.0.0.1", port);

    auto resp = client.request({{"type", "bogus"}});
    CHECK(resp.value("type", "") == "error");
    resp = client.request({{"no_type", 1}});
    CHECK(resp.value("type", "") == "error");
    resp = client.request({{"type", "publish"}, {"user", "x"},
                           {"terms", {{"t", -1.0}}}});
    CHECK(resp.value("type", "") == "error");

    // still usable afterwards
    client.publish("ann@x", {{"ok", 1.0}});
    CHECK(client.query_experts({"ok"}).per_term["ok"].size() == 1);
    server.stop();
}

TEST_CASE("concurrent publishes are both stored", "[netexpert][server]") {
    Server server;
    int port = server.start(0);
    std::thread t1([&] {
        Client c("127.0.0.1", port);
        for (int i = 0; i < 20; ++i) c.publish("one@x", {{"alpha", 1.0 + i}});
    });
    std::thread t2([&] {
        Client c("127.0.0.1", port);
        for (int i = 0; i < 20; ++i) c.publish("two@x", {{"alpha", 2.0 + i}});
    });
    t1.join();
    t2.join();
    auto ans = server.store().experts({"alpha"});
    CHECK(ans.per_term["alpha"].size() == 2);
    server.stop();
}

TEST_CASE("store persistence round-trip", "[netexpert]") {
    namespace fs = std::filesystem;
    auto path = (fs::temp_directory_path() / "mailrank_experts_test.json").string();
    {
        ExpertiseStore store;
        store.publish("ann@x", {{"netting", 0.75}});
        store.save(path);
    }
    ExpertiseStore loaded;
    loaded.load(path);
    auto ans = loaded.experts({"netting"});
    REQUIRE(ans.per_term["netting"].size() == 1);
    CHECK(ans.per_term["netting"][0].second == 0.75);
    fs::remove(path);
}

TEST_CASE("recommendations exclude contacts and require full coverage", "[netexpert]") {
    ExpertAnswer ans;
    ans.per_term["netting"] = {{"known@x", 0.9}, {"new@x", 0.8}, {"partial@x", 0.7}};
    ans.per_term["master"] = {{"known@x", 0.5}, {"new@x", 0.6}};

    auto recs = recommend(ans, {"known@x"});
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].user == "new@x");
    CHECK_THAT(recs[0].combined_weight, WithinRel(1.4, 1e-12));

    auto all_known = recommend(ans, {"known@x", "new@x", "partial@x"});
    CHECK(all_known.empty());
}

TEST_CASE("network override changes only listed senders", "[netexpert][ranker]") {
    Mailbox box;
    auto mk = [](const std::string& id, const std::string& sender,
                 const std::string& body, std::int64_t date) {
        auto e = corpus::parse_email("Message-ID: " + id + "\nFrom: " + sender +
                                     "\nSubject: s" + id + "\n\n" + body + "\n");
        e.date = date;
        return e;
    };
    box.ingest_email(mk("<1>", "quiet@x", "one tank note", 100));
    box.ingest_email(mk("<2>", "loud@x", "tank tank tank tank reports", 200));
    box.ingest_email(mk("<3>", "other@x", "nothing here", 300));

    auto local = ranker::rank(box, {.query = "tank"});

    // empty answer: identical scores
    ExpertAnswer empty;
    auto with_empty = ranker::rank(box, {.query = "tank", .network = &empty});
    REQUIRE(local.ranked.size() == with_empty.ranked.size());
    for (size_t i = 0; i < local.ranked.size(); ++i)
        CHECK(local.ranked[i].score == with_empty.ranked[i].score);

    // boost the quiet sender: its email must improve, others keep their score
    ExpertAnswer boost;
    boost.per_term["tank"] = {{"quiet@x", 50.0}};
    auto boosted = ranker::rank(box, {.query = "tank", .network = &boost});
    double quiet_local = 0, quiet_boosted = 0, loud_local = 0, loud_boosted = 0;
    for (const auto& se : local.ranked) {
        if (se.email_id == "<1>") quiet_local = se.s_score;
        if (se.email_id == "<2>") loud_local = se.s_score;
    }
    for (const auto& se : boosted.ranked) {
        if (se.email_id == "<1>") quiet_boosted = se.s_score;
        if (se.email_id == "<2>") loud_boosted = se.s_score;
    }
    CHECK(quiet_boosted > quiet_local);
    CHECK(loud_boosted == loud_local);
}

TEST_CASE("address parsing accepts several forms", "[netexpert]") {
    CHECK(parse_address("localhost:9000") == std::make_pair(std::string("localhost"), 9000));
    CHECK(parse_address(":9000") == std::make_pair(std::string("127.0.0.1"), 9000));
    CHECK(parse_address("9000") == std::make_pair(std::string("127.0.0.1"), 9000));
}
