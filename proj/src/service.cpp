#include "qbe/service.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <httplib.h>

#include "qbe/io.hpp"

namespace qbe {

using nlohmann::json;

bool operator==(const InferenceView& a, const InferenceView& b) {
    if (a.query_text != b.query_text || a.kind != b.kind || a.candidates != b.candidates ||
        a.matchings != b.matchings || a.millis != b.millis || a.revision != b.revision ||
        a.preview.size() != b.preview.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.preview.size(); ++i) {
        if (a.preview[i].tuple != b.preview[i].tuple ||
            !(a.preview[i].provenance == b.preview[i].provenance)) {
            return false;
        }
    }
    return true;
}

bool same_state(const Session& a, const Session& b) {
    const bool dbs = a.db == b.db || (a.db && b.db && *a.db == *b.db);
    return dbs && a.db_id == b.db_id && a.examples == b.examples &&
           a.last_inferred == b.last_inferred && a.revision == b.revision;
}

json database_to_json(const AnnotatedDatabase& db) {
    json schema = json::object(), rows = json::object();
    for (const auto& [rel, attrs] : db.schema().relations()) {
        schema[rel] = attrs;
        json list = json::array();
        for (const auto& row : db.rows(rel)) {
            list.push_back({{"annotation", row.annotation}, {"values", row.values}});
        }
        rows[rel] = std::move(list);
    }
    return {{"schema", schema}, {"rows", rows}};
}

AnnotatedDatabase database_from_json(const json& j) {
    Schema schema;
    for (const auto& [rel, attrs] : j.at("schema").items()) {
        schema.add(rel, attrs.get<std::vector<std::string>>());
    }
    AnnotatedDatabase db(schema);
    for (const auto& [rel, list] : j.at("rows").items()) {
        for (const auto& row : list) {
            db.insert(rel, row.at("values").get<Tuple>(), row.at("annotation").get<std::string>());
        }
    }
    return db;
}

namespace {

json rows_to_json(const std::vector<OutputRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"tuple", r.tuple}, {"provenance", format_polynomial(r.provenance)}});
    }
    return out;
}

json inference_to_json(const InferenceView& v) {
    return {{"query_text", v.query_text},
            {"semiring", std::string(to_string(v.kind))},
            {"preview", rows_to_json(v.preview)},
            {"stats", {{"candidates", v.candidates}, {"matchings", v.matchings}, {"millis", v.millis}}},
            {"revision", v.revision}};
}

InferenceView inference_from_json(const json& j) {
    InferenceView v;
    v.query_text = j.at("query_text").get<std::string>();
    v.kind = parse_semiring(j.at("semiring").get<std::string>());
    for (const auto& r : j.at("preview")) {
        v.preview.push_back(
            {r.at("tuple").get<Tuple>(), parse_polynomial(r.at("provenance").get<std::string>(), v.kind)});
    }
    const auto& st = j.at("stats");
    v.candidates = st.at("candidates").get<std::size_t>();
    v.matchings = st.at("matchings").get<std::uint64_t>();
    v.millis = st.at("millis").get<double>();
    v.revision = j.at("revision").get<std::uint64_t>();
    return v;
}

json examples_to_json(const std::vector<ExampleState>& examples) {
    json out = json::array();
    for (const auto& e : examples) {
        json drafts = json::array();
        for (const auto& d : e.drafts) {
            json dj = {{"chosen", d.chosen}, {"complete", d.complete}};
            if (!d.chosen.empty()) dj["monomial"] = format_monomial(monomial_from_bag(d.chosen));
            drafts.push_back(std::move(dj));
        }
        out.push_back({{"tuple", e.tuple}, {"drafts", std::move(drafts)}});
    }
    return out;
}

json session_view(const Session& s) {
    json schema = json::object();
    for (const auto& [rel, attrs] : s.db->schema().relations()) schema[rel] = attrs;
    return {{"session_id", s.id},
            {"db_id", s.db_id},
            {"revision", s.revision},
            {"schema", schema},
            {"examples", examples_to_json(s.examples)},
            {"last_inferred", s.last_inferred ? inference_to_json(*s.last_inferred) : json()}};
}

}  // namespace

json session_to_json(const Session& s) {
    json j = session_view(s);
    j.erase("schema");
    j["database"] = database_to_json(*s.db);
    return j;
}

Session session_from_json(const json& j) {
    try {
        Session s;
        s.id = j.value("session_id", "");
        s.db_id = j.at("db_id").get<std::string>();
        s.revision = j.at("revision").get<std::uint64_t>();
        s.db = std::make_shared<const AnnotatedDatabase>(database_from_json(j.at("database")));
        for (const auto& e : j.at("examples")) {
            ExampleState es;
            es.tuple = e.at("tuple").get<Tuple>();
            for (const auto& d : e.at("drafts")) {
                es.drafts.push_back(
                    {d.at("chosen").get<std::vector<Annotation>>(), d.at("complete").get<bool>()});
            }
            s.examples.push_back(std::move(es));
        }
        if (j.contains("last_inferred") && !j.at("last_inferred").is_null()) {
            s.last_inferred = inference_from_json(j.at("last_inferred"));
        }
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SyntaxError, std::string("malformed snapshot: ") + e.what());
    }
}

SessionStore::SessionStore(StoreOptions options) : options_(std::move(options)) {
    if (!options_.snapshot_dir) return;
    std::filesystem::create_directories(*options_.snapshot_dir);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(*options_.snapshot_dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        Session s = session_from_json(json::parse(read_file(path)));
        if (s.id.empty()) s.id = path.stem().string();
        auto [it, fresh] = databases_.emplace(s.db_id, s.db);
        if (!fresh) s.db = it->second;
        auto entry = std::make_shared<Entry>();
        entry->session = std::move(s);
        sessions_[entry->session.id] = std::move(entry);
    }
}

std::string SessionStore::fresh_id(const char* prefix) {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::ostringstream os;
    os << prefix << std::hex << ++counter_ << '-' << (rng() & 0xffffffffffULL);
    return os.str();
}

std::string SessionStore::add_database(std::shared_ptr<const AnnotatedDatabase> db) {
    std::unique_lock lock(mutex_);
    std::string id = fresh_id("db");
    databases_[id] = std::move(db);
    return id;
}

std::shared_ptr<const AnnotatedDatabase> SessionStore::database(const std::string& db_id) const {
    std::shared_lock lock(mutex_);
    auto it = databases_.find(db_id);
    if (it == databases_.end()) throw Error(ErrorCode::NotFound, "no database '" + db_id + "'");
    return it->second;
}

std::string SessionStore::create_session(const std::string& db_id) {
    auto db = database(db_id);
    auto entry = std::make_shared<Entry>();
    std::unique_lock lock(mutex_);
    entry->session.id = fresh_id("s");
    entry->session.db_id = db_id;
    entry->session.db = std::move(db);
    sessions_[entry->session.id] = entry;
    lock.unlock();
    persist(entry->session);
    return entry->session.id;
}

std::string SessionStore::create_session_from(const json& snapshot) {
    Session s = session_from_json(snapshot);
    auto entry = std::make_shared<Entry>();
    std::unique_lock lock(mutex_);
    s.id = fresh_id("s");
    auto [it, fresh] = databases_.emplace(s.db_id, s.db);
    if (!fresh) {
        if (*it->second == *s.db) {
            s.db = it->second;
        } else {
            s.db_id = fresh_id("db");
            databases_[s.db_id] = s.db;
        }
    }
    entry->session = std::move(s);
    sessions_[entry->session.id] = entry;
    lock.unlock();
    persist(entry->session);
    return entry->session.id;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::NotFound, "no session '" + id + "'");
    return it->second;
}

Session SessionStore::get(const std::string& id) const {
    auto entry = find(id);
    std::shared_lock lock(entry->mutex);
    return entry->session;
}

std::vector<std::string> SessionStore::session_ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
}

template <class F>
auto SessionStore::mutate(const std::string& id, std::optional<std::uint64_t> expected, F&& f) {
    auto entry = find(id);
    std::unique_lock lock(entry->mutex);
    Session& s = entry->session;
    if (expected && *expected != s.revision) {
        throw Error(ErrorCode::RevisionConflict, "session is at revision " + std::to_string(s.revision) +
                                                     ", request expected " + std::to_string(*expected));
    }
    auto result = f(s);
    ++s.revision;
    persist(s);
    return result;
}

void SessionStore::persist(const Session& s) const {
    if (!options_.snapshot_dir) return;
    const auto path = *options_.snapshot_dir / (s.id + ".json");
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << session_to_json(s).dump();
        if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

namespace {

ExampleState& example_at(Session& s, std::size_t i) {
    if (i >= s.examples.size()) {
        throw Error(ErrorCode::NotFound, "no example " + std::to_string(i));
    }
    return s.examples[i];
}

const ExampleState& example_at(const Session& s, std::size_t i) {
    return example_at(const_cast<Session&>(s), i);
}

DraftState& draft_at(ExampleState& e, std::size_t j) {
    if (j >= e.drafts.size()) throw Error(ErrorCode::NotFound, "no draft " + std::to_string(j));
    return e.drafts[j];
}

}  // namespace

std::size_t SessionStore::add_example(const std::string& id, const Tuple& tuple,
                                      std::optional<std::uint64_t> expected) {
    return mutate(id, expected, [&](Session& s) {
        if (tuple.empty()) throw Error(ErrorCode::InvalidArgument, "empty example tuple");
        for (const auto& e : s.examples) {
            if (e.tuple.size() != tuple.size()) {
                throw Error(ErrorCode::SchemaMismatch, "example tuple has arity " +
                                                           std::to_string(tuple.size()) + ", expected " +
                                                           std::to_string(e.tuple.size()));
            }
            if (e.tuple == tuple) {
                throw Error(ErrorCode::InvalidArgument, "example (" + format_tuple(tuple) + ") already exists");
            }
        }
        s.examples.push_back({tuple, {}});
        return s.examples.size() - 1;
    });
}

void SessionStore::delete_example(const std::string& id, std::size_t example,
                                  std::optional<std::uint64_t> expected) {
    mutate(id, expected, [&](Session& s) {
        example_at(s, example);
        s.examples.erase(s.examples.begin() + static_cast<std::ptrdiff_t>(example));
        return 0;
    });
}

std::size_t SessionStore::add_draft(const std::string& id, std::size_t example,
                                    std::optional<std::uint64_t> expected) {
    return mutate(id, expected, [&](Session& s) {
        auto& e = example_at(s, example);
        e.drafts.emplace_back();
        return e.drafts.size() - 1;
    });
}

void SessionStore::delete_draft(const std::string& id, std::size_t example, std::size_t draft,
                                std::optional<std::uint64_t> expected) {
    mutate(id, expected, [&](Session& s) {
        auto& e = example_at(s, example);
        draft_at(e, draft);
        e.drafts.erase(e.drafts.begin() + static_cast<std::ptrdiff_t>(draft));
        return 0;
    });
}

std::vector<Proposal> SessionStore::proposals(const std::string& id, std::size_t example,
                                              std::size_t draft) const {
    auto entry = find(id);
    std::shared_lock lock(entry->mutex);
    const Session& s = entry->session;
    const auto& e = example_at(s, example);
    if (draft > e.drafts.size()) throw Error(ErrorCode::NotFound, "no draft " + std::to_string(draft));
    ExplanationDraft d{e.tuple, draft < e.drafts.size() ? e.drafts[draft].chosen : std::vector<Annotation>{}};
    return propose_explanation_tuples(d, *s.db);
}

void SessionStore::add_step(const std::string& id, std::size_t example, std::size_t draft,
                            const Annotation& annotation, std::optional<std::uint64_t> expected) {
    mutate(id, expected, [&](Session& s) {
        auto& e = example_at(s, example);
        if (draft > e.drafts.size()) throw Error(ErrorCode::NotFound, "no draft " + std::to_string(draft));
        if (!s.db->contains(annotation)) {
            throw Error(ErrorCode::UnknownAnnotation, "unknown annotation '" + annotation + "'");
        }
        if (draft == e.drafts.size()) e.drafts.emplace_back();
        auto& d = e.drafts[draft];
        if (d.complete) throw Error(ErrorCode::InvalidArgument, "draft is already complete");
        d.chosen.push_back(annotation);
        return 0;
    });
}

void SessionStore::complete_draft(const std::string& id, std::size_t example, std::size_t draft,
                                  std::optional<std::uint64_t> expected) {
    mutate(id, expected, [&](Session& s) {
        auto& d = draft_at(example_at(s, example), draft);
        if (d.chosen.empty()) throw Error(ErrorCode::EmptyExplanations, "draft has no tuples");
        d.complete = true;
        return 0;
    });
}

InferenceView SessionStore::infer(const std::string& id, std::optional<std::uint64_t> expected) {
    return mutate(id, expected, [&](Session& s) {
        if (s.examples.empty()) throw Error(ErrorCode::IncompleteExplanations, "session has no examples");
        std::vector<ExampleDrafts> input;
        for (std::size_t i = 0; i < s.examples.size(); ++i) {
            ExampleDrafts ed{s.examples[i].tuple, {}};
            for (const auto& d : s.examples[i].drafts) {
                if (d.complete) ed.drafts.push_back({ed.tuple, d.chosen});
            }
            if (ed.drafts.empty()) {
                throw InferenceError(ErrorCode::IncompleteExplanations,
                                     "example " + std::to_string(i) + " has no completed explanation", i);
            }
            input.push_back(std::move(ed));
        }
        const KExample ex = compile_explanations(input, s.db);
        InferOptions opts = options_.infer;
        opts.limits.deadline = std::chrono::steady_clock::now() + options_.infer_timeout;

        InferResult r;
        try {
            r = qbe::infer(ex, opts);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoConsistentQuery) throw;
            // Blame the first example that is unsatisfiable on its own.
            std::optional<std::size_t> culprit;
            for (const auto& row : ex.output) {
                KExample one = ex;
                one.output = {row};
                try {
                    qbe::infer(one, opts);
                } catch (const Error& inner) {
                    if (inner.code() != ErrorCode::NoConsistentQuery) throw;
                    for (std::size_t i = 0; i < s.examples.size(); ++i) {
                        if (s.examples[i].tuple == row.tuple) culprit = i;
                    }
                    break;
                }
            }
            throw InferenceError(ErrorCode::NoConsistentQuery, e.what(), culprit);
        }
        InferenceView v;
        v.query_text = format_query(r.query);
        v.kind = r.kind;
        v.preview = evaluate_with_provenance(r.query, *s.db);
        if (v.kind != SemiringKind::NX) {
            for (auto& row : v.preview) row.provenance = project(row.provenance, v.kind);
        }
        v.candidates = r.candidates.size();
        v.matchings = r.stats.selections;
        v.millis = r.millis;
        v.revision = s.revision;
        s.last_inferred = v;
        return v;
    });
}

std::vector<OutputRow> SessionStore::evaluate(const std::string& id, const std::string& query_text,
                                              SemiringKind kind) const {
    std::shared_ptr<const AnnotatedDatabase> db;
    {
        auto entry = find(id);
        std::shared_lock lock(entry->mutex);
        db = entry->session.db;
    }
    const ConjunctiveQuery q = parse_query(query_text, &db->schema());
    auto rows = evaluate_with_provenance(q, *db);
    if (kind != SemiringKind::NX) {
        for (auto& row : rows) row.provenance = project(row.provenance, kind);
    }
    return rows;
}

json SessionStore::snapshot(const std::string& id) const { return session_to_json(get(id)); }

void SessionStore::restore(const std::string& id, const json& snapshot) {
    Session incoming = session_from_json(snapshot);
    {
        std::unique_lock lock(mutex_);
        auto [it, fresh] = databases_.emplace(incoming.db_id, incoming.db);
        if (!fresh && *it->second == *incoming.db) incoming.db = it->second;
        if (!fresh && it->second != incoming.db) {
            incoming.db_id = fresh_id("db");
            databases_[incoming.db_id] = incoming.db;
        }
    }
    mutate(id, std::nullopt, [&](Session& s) {
        const std::uint64_t next = std::max(s.revision, incoming.revision);
        s.db_id = incoming.db_id;
        s.db = incoming.db;
        s.examples = std::move(incoming.examples);
        s.last_inferred = std::move(incoming.last_inferred);
        s.revision = next;  // mutate() bumps it past both histories
        return 0;
    });
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::RevisionConflict:
        case ErrorCode::IncompleteExplanations: return 409;
        case ErrorCode::NoConsistentQuery: return 422;
        case ErrorCode::LimitExceeded:
        case ErrorCode::InstanceTooLarge:
        case ErrorCode::DerivationExplosion: return 503;
        default: return 400;
    }
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, const Error& e) {
    json err = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    if (const auto* ie = dynamic_cast<const InferenceError*>(&e); ie && ie->example_index()) {
        err["example_index"] = *ie->example_index();
    }
    reply(res, http_status(e.code()), {{"error", err}});
}

json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SyntaxError, std::string("request body is not JSON: ") + e.what());
    }
}

std::optional<std::uint64_t> expected_revision(const httplib::Request& req, const json& body) {
    if (body.is_object() && body.contains("revision")) return body.at("revision").get<std::uint64_t>();
    if (req.has_header("If-Match")) {
        try {
            return std::stoull(req.get_header_value("If-Match"));
        } catch (const std::exception&) {
            throw Error(ErrorCode::SyntaxError, "If-Match must be a revision number");
        }
    }
    return std::nullopt;
}

std::size_t index_of(const httplib::Request& req, std::size_t group) {
    return static_cast<std::size_t>(std::stoull(req.matches[static_cast<int>(group)].str()));
}

Tuple tuple_of(const json& body) {
    if (!body.contains("tuple")) throw Error(ErrorCode::InvalidArgument, "missing 'tuple'");
    const auto& t = body.at("tuple");
    if (t.is_string()) return split_csv_line(t.get<std::string>());
    return t.get<Tuple>();
}

std::string string_field(const json& body, const char* name) {
    if (!body.contains(name) || !body.at(name).is_string()) {
        throw Error(ErrorCode::InvalidArgument, std::string("missing string field '") + name + "'");
    }
    return body.at(name).get<std::string>();
}

AnnotatedDatabase database_from_request(const httplib::Request& req) {
    std::string manifest;
    std::map<std::string, std::string> csv;
    if (req.is_multipart_form_data()) {
        for (const auto& [name, file] : req.files) {
            if (name == "manifest" || name == "schema") {
                manifest = file.content;
                continue;
            }
            std::string rel = file.filename.empty() ? name : std::filesystem::path(file.filename).stem().string();
            csv[rel] = file.content;
        }
    } else {
        const json body = body_of(req);
        manifest = string_field(body, "manifest");
        if (body.contains("relations")) {
            for (const auto& [rel, text] : body.at("relations").items()) csv[rel] = text.get<std::string>();
        }
    }
    if (manifest.empty()) throw Error(ErrorCode::InvalidArgument, "missing schema manifest");
    return load_database(manifest, csv);
}

json proposals_to_json(const std::vector<Proposal>& proposals, const AnnotatedDatabase& db) {
    json out = json::array();
    for (const auto& p : proposals) {
        out.push_back({{"annotation", p.annotation},
                       {"relation", p.relation},
                       {"tuple", db.tuple_of(p.annotation)},
                       {"shared_positions", p.shared_positions}});
    }
    return out;
}

template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            reply_error(res, e);
        } catch (const json::exception& e) {
            reply_error(res, Error(ErrorCode::SyntaxError, e.what()));
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", {{"code", "Internal"}, {"message", e.what()}}}});
        }
    };
}

}  // namespace

void install_routes(httplib::Server& server, SessionStore& store) {
    const std::string S = "/sessions/([^/]+)";
    const std::string D = S + "/examples/(\\d+)/drafts/(\\d+)";

    server.Post("/databases", guarded([&](const httplib::Request& req, httplib::Response& res) {
        auto db = std::make_shared<const AnnotatedDatabase>(database_from_request(req));
        const std::size_t size = db->size();
        reply(res, 201, {{"db_id", store.add_database(std::move(db))}, {"tuples", size}});
    }));
    server.Get("/databases/([^/]+)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, database_to_json(*store.database(req.matches[1].str())));
    }));
    server.Post("/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        const std::string id = body.contains("snapshot") ? store.create_session_from(body.at("snapshot"))
                                                         : store.create_session(string_field(body, "db_id"));
        reply(res, 201, {{"session_id", id}});
    }));
    server.Get(S, guarded([&](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, session_view(store.get(req.matches[1].str())));
    }));
    server.Post(S + "/examples", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        const std::string id = req.matches[1].str();
        const std::size_t i = store.add_example(id, tuple_of(body), expected_revision(req, body));
        reply(res, 201, {{"example_index", i}, {"revision", store.get(id).revision}});
    }));
    server.Delete(S + "/examples/(\\d+)", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1].str();
        store.delete_example(id, index_of(req, 2), expected_revision(req, body_of(req)));
        reply(res, 200, {{"revision", store.get(id).revision}});
    }));
    server.Post(S + "/examples/(\\d+)/drafts", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1].str();
        const std::size_t j = store.add_draft(id, index_of(req, 2), expected_revision(req, body_of(req)));
        reply(res, 201, {{"draft_index", j}, {"revision", store.get(id).revision}});
    }));
    server.Delete(D, guarded([&](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1].str();
        store.delete_draft(id, index_of(req, 2), index_of(req, 3), expected_revision(req, body_of(req)));
        reply(res, 200, {{"revision", store.get(id).revision}});
    }));
    server.Get(D + "/proposals", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1].str();
        const auto proposals = store.proposals(id, index_of(req, 2), index_of(req, 3));
        reply(res, 200, {{"proposals", proposals_to_json(proposals, *store.get(id).db)}});
    }));
    server.Post(D + "/steps", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        const std::string id = req.matches[1].str();
        store.add_step(id, index_of(req, 2), index_of(req, 3), string_field(body, "annotation"),
                       expected_revision(req, body));
        reply(res, 200, {{"revision", store.get(id).revision}});
    }));
    server.Post(D + "/complete", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1].str();
        store.complete_draft(id, index_of(req, 2), index_of(req, 3), expected_revision(req, body_of(req)));
        reply(res, 200, {{"revision", store.get(id).revision}});
    }));
    server.Post(S + "/infer", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const InferenceView v = store.infer(req.matches[1].str(), expected_revision(req, body_of(req)));
        reply(res, 200, inference_to_json(v));
    }));
    server.Post(S + "/evaluate", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const json body = body_of(req);
        const SemiringKind kind =
            body.contains("provenance") ? parse_semiring(body.at("provenance").get<std::string>())
                                        : SemiringKind::NX;
        const auto rows = store.evaluate(req.matches[1].str(), string_field(body, "query_text"), kind);
        reply(res, 200, {{"semiring", std::string(to_string(kind))}, {"rows", rows_to_json(rows)}});
    }));
    server.Get(S + "/snapshot", guarded([&](const httplib::Request& req, httplib::Response& res) {
        reply(res, 200, store.snapshot(req.matches[1].str()));
    }));
    server.Put(S + "/snapshot", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const std::string id = req.matches[1].str();
        store.restore(id, body_of(req));
        reply(res, 200, {{"revision", store.get(id).revision}});
    }));
}

}  // namespace qbe
