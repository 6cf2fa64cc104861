#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "qbe/assist.hpp"
#include "qbe/pipeline.hpp"

namespace httplib {
class Server;
}

namespace qbe {

struct DraftState {
    std::vector<Annotation> chosen;
    bool complete = false;

    friend bool operator==(const DraftState&, const DraftState&) = default;
};

struct ExampleState {
    Tuple tuple;
    std::vector<DraftState> drafts;

    friend bool operator==(const ExampleState&, const ExampleState&) = default;
};

struct InferenceView {
    std::string query_text;
    SemiringKind kind = SemiringKind::NX;
    std::vector<OutputRow> preview;  // full output of the query, polynomials in `kind`
    std::size_t candidates = 0;
    std::uint64_t matchings = 0;
    double millis = 0;
    std::uint64_t revision = 0;  // revision whose inputs produced it

    friend bool operator==(const InferenceView& a, const InferenceView& b);
};

struct Session {
    std::string id;
    std::string db_id;
    std::shared_ptr<const AnnotatedDatabase> db;
    std::vector<ExampleState> examples;
    std::optional<InferenceView> last_inferred;
    std::uint64_t revision = 0;
};

/// Equal contents, ignoring the id.
bool same_state(const Session& a, const Session& b);

nlohmann::json database_to_json(const AnnotatedDatabase& db);
AnnotatedDatabase database_from_json(const nlohmann::json& j);

/// Lossless; the database is embedded.
nlohmann::json session_to_json(const Session& s);
Session session_from_json(const nlohmann::json& j);

/// Inference failure that could be pinned to one example.
class InferenceError : public Error {
public:
    InferenceError(ErrorCode code, const std::string& message, std::optional<std::size_t> example)
        : Error(code, message), example_(example) {}
    std::optional<std::size_t> example_index() const { return example_; }

private:
    std::optional<std::size_t> example_;
};

struct StoreOptions {
    std::optional<std::filesystem::path> snapshot_dir;
    std::chrono::milliseconds infer_timeout{30'000};
    InferOptions infer;
};

/// In-memory sessions. Mutations of one session are serialized and bump its
/// revision; reads take a shared lock and see a consistent state. An
/// `expected_revision` that does not match throws RevisionConflict.
class SessionStore {
public:
    explicit SessionStore(StoreOptions options = {});

    std::string add_database(std::shared_ptr<const AnnotatedDatabase> db);
    std::shared_ptr<const AnnotatedDatabase> database(const std::string& db_id) const;

    std::string create_session(const std::string& db_id);
    /// New session holding the snapshot's state.
    std::string create_session_from(const nlohmann::json& snapshot);
    Session get(const std::string& id) const;
    std::vector<std::string> session_ids() const;

    std::size_t add_example(const std::string& id, const Tuple& tuple,
                            std::optional<std::uint64_t> expected_revision = {});
    void delete_example(const std::string& id, std::size_t example,
                        std::optional<std::uint64_t> expected_revision = {});
    std::size_t add_draft(const std::string& id, std::size_t example,
                          std::optional<std::uint64_t> expected_revision = {});
    void delete_draft(const std::string& id, std::size_t example, std::size_t draft,
                      std::optional<std::uint64_t> expected_revision = {});
    /// `draft` may equal the number of drafts, which opens a new one.
    std::vector<Proposal> proposals(const std::string& id, std::size_t example,
                                    std::size_t draft) const;
    void add_step(const std::string& id, std::size_t example, std::size_t draft,
                  const Annotation& annotation, std::optional<std::uint64_t> expected_revision = {});
    void complete_draft(const std::string& id, std::size_t example, std::size_t draft,
                        std::optional<std::uint64_t> expected_revision = {});

    /// Compiles completed drafts, infers and stores the result with its full
    /// output. Throws IncompleteExplanations, LimitExceeded, InferenceError.
    InferenceView infer(const std::string& id, std::optional<std::uint64_t> expected_revision = {});
    std::vector<OutputRow> evaluate(const std::string& id, const std::string& query_text,
                                    SemiringKind kind = SemiringKind::NX) const;

    nlohmann::json snapshot(const std::string& id) const;
    void restore(const std::string& id, const nlohmann::json& snapshot);

private:
    struct Entry {
        mutable std::shared_mutex mutex;
        Session session;
    };

    std::shared_ptr<Entry> find(const std::string& id) const;
    template <class F>
    auto mutate(const std::string& id, std::optional<std::uint64_t> expected, F&& f);
    void persist(const Session& s) const;
    std::string fresh_id(const char* prefix);

    StoreOptions options_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<const AnnotatedDatabase>> databases_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t counter_ = 0;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);

/// Registers every endpoint on `server`. The store must outlive the server.
void install_routes(httplib::Server& server, SessionStore& store);

}  // namespace qbe
