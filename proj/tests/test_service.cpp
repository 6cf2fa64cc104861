#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "qbe/service.hpp"

using namespace qbe;
using fixtures::code_of;
using nlohmann::json;

namespace {

// Builds the two Why(X) examples of the trip session step by step.
std::string trip_session(SessionStore& store) {
    const std::string db_id = store.add_database(fixtures::trip_db());
    const std::string id = store.create_session(db_id);
    store.add_example(id, {"Argentina", "Brazil"});
    for (const char* t : {"f", "e", "c", "a"}) store.add_step(id, 0, 0, t);
    store.complete_draft(id, 0, 0);
    for (const char* t : {"a", "c", "b"}) store.add_step(id, 0, 1, t);
    store.complete_draft(id, 0, 1);
    store.add_example(id, {"Peru", "Paraguay"});
    for (const char* t : {"d", "e", "c", "h"}) store.add_step(id, 1, 0, t);
    store.complete_draft(id, 1, 0);
    return id;
}

struct Running {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit Running(SessionStore& store) {
        install_routes(server, store);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~Running() {
        server.stop();
        thread.join();
    }
};

json parse(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

}  // namespace

TEST_CASE("a scripted trip session infers the intended query") {
    SessionStore store;
    const auto id = trip_session(store);
    const auto v = store.infer(id);
    CHECK(v.query_text == fixtures::q_real_text());
    CHECK(v.kind == SemiringKind::WhyX);
    CHECK(v.preview.size() == 6);

    const Session s = store.get(id);
    REQUIRE(s.last_inferred);
    CHECK(s.last_inferred->revision + 1 == s.revision);
    const auto ex = compile_explanations(
        {{{"Argentina", "Brazil"}, {{{"Argentina", "Brazil"}, {"f", "e", "c", "a"}}, {{"Argentina", "Brazil"}, {"a", "c", "b"}}}},
         {{"Peru", "Paraguay"}, {{{"Peru", "Paraguay"}, {"d", "e", "c", "h"}}}}},
        s.db);
    CHECK(oracle::consistent(parse_query(v.query_text), ex));
}

TEST_CASE("identical histories infer identical queries") {
    SessionStore a, b;
    CHECK(a.infer(trip_session(a)).query_text == b.infer(trip_session(b)).query_text);
}

TEST_CASE("proposals through the store") {
    SessionStore store;
    const std::string id = store.create_session(store.add_database(fixtures::trip_db()));
    store.add_example(id, {"Argentina", "Brazil"});
    std::set<Annotation> first;
    for (const auto& p : store.proposals(id, 0, 0)) first.insert(p.annotation);
    CHECK(first == std::set<Annotation>{"a", "b", "c", "f", "h"});
    store.add_step(id, 0, 0, "f");
    std::set<Annotation> second;
    for (const auto& p : store.proposals(id, 0, 0)) second.insert(p.annotation);
    CHECK(second == std::set<Annotation>{"a", "b", "c", "d", "e", "f", "h"});
}

TEST_CASE("revisions, guards and error codes") {
    SessionStore store;
    const std::string id = store.create_session(store.add_database(fixtures::trip_db()));
    CHECK(store.get(id).revision == 0);
    store.add_example(id, {"Argentina", "Brazil"});
    CHECK(store.get(id).revision == 1);
    CHECK(code_of([&] { store.add_example(id, {"Peru", "Paraguay"}, 0); }) == ErrorCode::RevisionConflict);
    CHECK(store.get(id).revision == 1);
    CHECK(code_of([&] { store.infer(id); }) == ErrorCode::IncompleteExplanations);
    CHECK(code_of([&] { store.add_step(id, 0, 0, "zz"); }) == ErrorCode::UnknownAnnotation);
    CHECK(code_of([&] { store.add_step(id, 3, 0, "a"); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { store.add_step(id, 0, 2, "a"); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { store.add_example(id, {"Peru"}); }) == ErrorCode::SchemaMismatch);
    CHECK(code_of([&] { store.get("nope"); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { store.create_session("nope"); }) == ErrorCode::NotFound);

    const std::size_t d = store.add_draft(id, 0);
    CHECK(code_of([&] { store.complete_draft(id, 0, d); }) == ErrorCode::EmptyExplanations);
    store.add_step(id, 0, d, "a");
    store.complete_draft(id, 0, d);
    CHECK(code_of([&] { store.add_step(id, 0, d, "b"); }) == ErrorCode::InvalidArgument);
    store.delete_draft(id, 0, d);
    CHECK(store.get(id).examples[0].drafts.empty());
    store.delete_example(id, 0);
    CHECK(store.get(id).examples.empty());
}

TEST_CASE("an unsatisfiable example is named") {
    SessionStore store;
    const std::string id = store.create_session(store.add_database(fixtures::trip_db()));
    store.add_example(id, {"Argentina", "Brazil"});
    for (const char* t : {"a", "b"}) store.add_step(id, 0, 0, t);
    store.complete_draft(id, 0, 0);
    // Two explanations of different sizes cannot come from one query.
    store.add_example(id, {"Peru", "Paraguay"});
    for (const char* t : {"d", "d"}) store.add_step(id, 1, 0, t);
    store.complete_draft(id, 1, 0);
    store.add_step(id, 1, 1, "h");
    store.complete_draft(id, 1, 1);
    try {
        store.infer(id);
        FAIL("expected NoConsistentQuery");
    } catch (const InferenceError& e) {
        CHECK(e.code() == ErrorCode::NoConsistentQuery);
        CHECK(e.example_index() == std::optional<std::size_t>{1});
    }
}

TEST_CASE("snapshots round-trip") {
    SessionStore store;
    const auto id = trip_session(store);
    store.infer(id);
    const Session before = store.get(id);
    const json snap = store.snapshot(id);
    const Session decoded = session_from_json(json::parse(snap.dump()));
    CHECK(same_state(before, decoded));

    const std::string copy = store.create_session_from(snap);
    CHECK(copy != id);
    CHECK(same_state(before, store.get(copy)));

    const std::string other = store.create_session(store.get(id).db_id);
    store.restore(other, snap);
    const Session restored = store.get(other);
    CHECK(restored.examples == before.examples);
    CHECK(restored.last_inferred == before.last_inferred);
    CHECK(restored.revision > before.revision);
}

TEST_CASE("a snapshot directory survives a restart") {
    const auto dir = std::filesystem::temp_directory_path() / "qbe_service_snapshots";
    std::filesystem::remove_all(dir);
    StoreOptions opts;
    opts.snapshot_dir = dir;
    std::string id;
    Session before;
    {
        SessionStore store(opts);
        id = trip_session(store);
        store.infer(id);
        before = store.get(id);
    }
    SessionStore reopened(opts);
    CHECK(same_state(reopened.get(id), before));
    CHECK(reopened.infer(id).query_text == fixtures::q_real_text());
    std::filesystem::remove_all(dir);
}

TEST_CASE("the HTTP API replays the trip session") {
    SessionStore store;
    Running srv(store);
    httplib::Client cli("127.0.0.1", srv.port);

    httplib::MultipartFormDataItems upload = {
        {"manifest", read_file(fixtures::path("trip/schema.txt")), "schema.txt", "text/plain"},
        {"route", read_file(fixtures::path("trip/route.csv")), "route.csv", "text/csv"},
    };
    auto r = cli.Post("/databases", upload);
    REQUIRE(r);
    CHECK(r->status == 201);
    const std::string db_id = parse(r)["db_id"];
    CHECK(parse(cli.Get("/databases/" + db_id))["rows"]["route"].size() == 8);

    r = cli.Post("/sessions", json{{"db_id", db_id}}.dump(), "application/json");
    CHECK(r->status == 201);
    const std::string sid = parse(r)["session_id"];
    const std::string base = "/sessions/" + sid;

    r = cli.Post(base + "/examples", json{{"tuple", {"Argentina", "Brazil"}}}.dump(), "application/json");
    CHECK(parse(r)["example_index"] == 0);
    r = cli.Get(base + "/examples/0/drafts/0/proposals");
    const json proposals = parse(r);
    std::set<std::string> offered;
    for (const auto& p : proposals["proposals"]) offered.insert(p["annotation"].get<std::string>());
    CHECK(offered == std::set<std::string>{"a", "b", "c", "f", "h"});

    auto step = [&](int i, int j, const char* t) {
        auto res = cli.Post(base + "/examples/" + std::to_string(i) + "/drafts/" + std::to_string(j) + "/steps",
                            json{{"annotation", t}}.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
    };
    auto complete = [&](int i, int j) {
        auto res = cli.Post(base + "/examples/" + std::to_string(i) + "/drafts/" + std::to_string(j) + "/complete",
                            "", "application/json");
        REQUIRE(res);
        CHECK(res->status == 200);
    };
    for (const char* t : {"f", "e", "c", "a"}) step(0, 0, t);
    complete(0, 0);
    for (const char* t : {"a", "c", "b"}) step(0, 1, t);
    complete(0, 1);
    cli.Post(base + "/examples", json{{"tuple", "Peru,Paraguay"}}.dump(), "application/json");
    for (const char* t : {"d", "e", "c", "h"}) step(1, 0, t);
    complete(1, 0);

    r = cli.Post(base + "/infer", "", "application/json");
    REQUIRE(r);
    CHECK(r->status == 200);
    const json inferred = parse(r);
    CHECK(inferred["query_text"] == fixtures::q_real_text());
    CHECK(inferred["semiring"] == "why");
    CHECK(inferred["preview"].size() == 6);
    CHECK(inferred["stats"].contains("candidates"));
    CHECK(inferred["stats"].contains("matchings"));
    CHECK(inferred["stats"].contains("millis"));

    r = cli.Post(base + "/evaluate", json{{"query_text", "ans(x, y) :- route(x, y)."}}.dump(), "application/json");
    CHECK(parse(r)["rows"].size() == 8);

    const json view = parse(cli.Get(base));
    CHECK(view["examples"].size() == 2);
    CHECK(view["last_inferred"]["query_text"] == fixtures::q_real_text());

    const std::string snap = cli.Get(base + "/snapshot")->body;
    r = cli.Put(base + "/snapshot", snap, "application/json");
    CHECK(r->status == 200);
}

TEST_CASE("HTTP errors are structured") {
    SessionStore store;
    Running srv(store);
    httplib::Client cli("127.0.0.1", srv.port);
    const std::string db_id = store.add_database(fixtures::trip_db());
    const std::string sid = store.create_session(db_id);
    const std::string base = "/sessions/" + sid;

    auto r = cli.Get("/sessions/nope");
    CHECK(r->status == 404);
    CHECK(parse(r)["error"]["code"] == "NotFound");

    r = cli.Post(base + "/infer", "", "application/json");
    CHECK(r->status == 409);
    CHECK(parse(r)["error"]["code"] == "IncompleteExplanations");

    r = cli.Post(base + "/examples", "{not json", "application/json");
    CHECK(r->status == 400);
    CHECK(parse(r)["error"]["code"] == "SyntaxError");

    r = cli.Post(base + "/examples", json{{"tuple", {"Argentina", "Brazil"}}, {"revision", 7}}.dump(),
                 "application/json");
    CHECK(r->status == 409);
    CHECK(parse(r)["error"]["code"] == "RevisionConflict");

    r = cli.Post(base + "/evaluate", json{{"query_text", "ans(x) :- nope(x)."}}.dump(), "application/json");
    CHECK(r->status == 400);
    CHECK(parse(r)["error"]["code"] == "UnknownRelation");

    httplib::MultipartFormDataItems bad = {
        {"manifest", "route(A, B)\n", "schema.txt", "text/plain"},
        {"route", "A,B\nx,y,z\n", "route.csv", "text/csv"},
    };
    r = cli.Post("/databases", bad);
    CHECK(r->status == 400);
    CHECK(parse(r)["error"]["code"] == "SchemaMismatch");
}
