// Command-line front end: infer, eval, experiment, serve.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "qbe/io.hpp"
#include "qbe/pipeline.hpp"
#include "qbe/service.hpp"
#include "qbe/synth.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFormat = 2;
constexpr int kNoQuery = 3;
constexpr int kLimit = 4;

int exit_code(qbe::ErrorCode code) {
    switch (code) {
        case qbe::ErrorCode::NoConsistentQuery: return kNoQuery;
        case qbe::ErrorCode::LimitExceeded:
        case qbe::ErrorCode::InstanceTooLarge:
        case qbe::ErrorCode::DerivationExplosion: return kLimit;
        default: return kFormat;
    }
}

std::optional<qbe::SemiringKind> semiring_option(const std::string& name) {
    if (name == "auto") return std::nullopt;
    return qbe::parse_semiring(name);
}

struct InferArgs {
    std::string db, examples, semiring = "auto", stats_file;
    bool all = false;
    double timeout = 0;
};

int run_infer(const InferArgs& a) {
    auto db = std::make_shared<const qbe::AnnotatedDatabase>(qbe::load_database_dir(a.db));
    const auto blocks = qbe::parse_examples(qbe::read_file(a.examples));
    const qbe::KExample ex = qbe::make_example(db, blocks, semiring_option(a.semiring));
    qbe::InferOptions opts;
    if (a.timeout > 0) {
        opts.limits.deadline = std::chrono::steady_clock::now() +
                               std::chrono::milliseconds(static_cast<long long>(a.timeout * 1000));
    }
    const qbe::InferResult r = qbe::infer(ex, opts);
    const std::string chosen = qbe::format_query(r.query);
    std::cout << chosen << '\n';
    if (a.all) {
        for (const auto& q : r.candidates) {
            const std::string text = qbe::format_query(q);
            if (text != chosen) std::cout << text << '\n';
        }
    }
    if (!a.stats_file.empty()) {
        nlohmann::json j = {{"semiring", std::string(qbe::to_string(r.kind))},
                            {"candidates", r.candidates.size()},
                            {"selections", r.stats.selections},
                            {"built", r.stats.candidates},
                            {"verified", r.stats.verified},
                            {"consistency_checks", r.stats.consistency_checks},
                            {"millis", r.millis}};
        std::ofstream(a.stats_file) << j.dump(2) << '\n';
    }
    return kOk;
}

int run_eval(const std::string& dir, const std::string& query_file, const std::string& provenance) {
    const qbe::AnnotatedDatabase db = qbe::load_database_dir(dir);
    const qbe::ConjunctiveQuery q = qbe::parse_query(qbe::read_file(query_file), &db.schema());
    const qbe::SemiringKind kind = qbe::parse_semiring(provenance);
    for (auto& row : qbe::evaluate_with_provenance(q, db)) {
        auto poly = kind == qbe::SemiringKind::NX ? row.provenance : qbe::project(row.provenance, kind);
        std::cout << qbe::format_tuple(row.tuple) << '\t' << qbe::format_polynomial(poly) << '\n';
    }
    return kOk;
}

struct ExperimentArgs {
    std::size_t queries = 10, max_examples = 20, runs = 3, rows = 340, relations = 3;
    std::string atoms = "2-5", semiring = "nx", report;
    bool self_joins = true;
    std::uint64_t seed = 1;
};

int run_experiment_cmd(const ExperimentArgs& a) {
    qbe::ExperimentConfig c;
    c.queries = a.queries;
    c.max_examples = a.max_examples;
    c.runs = a.runs;
    c.seed = a.seed;
    c.kind = qbe::parse_semiring(a.semiring);
    c.database.rows_per_relation = a.rows;
    c.database.relations = a.relations;
    c.query.self_joins = a.self_joins;
    const auto dash = a.atoms.find('-');
    try {
        c.query.min_atoms = std::stoul(a.atoms.substr(0, dash));
        c.query.max_atoms = dash == std::string::npos ? c.query.min_atoms : std::stoul(a.atoms.substr(dash + 1));
    } catch (const std::exception&) {
        throw qbe::Error(qbe::ErrorCode::InvalidArgument, "--atoms expects N or LO-HI");
    }
    if (c.query.min_atoms == 0 || c.query.min_atoms > c.query.max_atoms) {
        throw qbe::Error(qbe::ErrorCode::InvalidArgument, "--atoms range is empty");
    }
    const qbe::ExperimentReport report = qbe::run_experiment(c);
    const std::string jsonl = qbe::report_jsonl(report);
    if (a.report.empty()) {
        std::cout << jsonl;
    } else {
        std::ofstream(a.report) << jsonl;
    }
    std::size_t converged = 0;
    for (const auto& q : report.queries) {
        std::cerr << "query " << q.query_id << ": " << q.source_text << "  worst-of-" << a.runs << "="
                  << (q.worst_to_converge ? std::to_string(*q.worst_to_converge) : "none")
                  << " recall=" << q.worst_recall << (q.always_consistent ? "" : " INCONSISTENT") << '\n';
        converged += q.worst_to_converge ? 1 : 0;
    }
    std::cerr << converged << "/" << report.queries.size() << " queries converged\n";
    return kOk;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int run_serve(const std::string& host, int port, const std::string& snapshot_dir, double timeout) {
    qbe::StoreOptions opts;
    if (!snapshot_dir.empty()) opts.snapshot_dir = snapshot_dir;
    opts.infer_timeout = std::chrono::milliseconds(static_cast<long long>(timeout * 1000));
    qbe::SessionStore store(opts);
    httplib::Server server;
    // Plain SO_REUSEADDR: a port held by another process must fail to bind.
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    qbe::install_routes(server, store);
    if (!server.bind_to_port(host, port)) {
        std::cerr << "error: cannot bind " << host << ":" << port << '\n';
        return kFormat;
    }
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on " << host << ":" << port << '\n';
    server.listen_after_bind();
    g_server = nullptr;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Infer conjunctive queries from explained examples"};
    app.require_subcommand(1);

    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "Infer a query from a database and explained examples");
    infer->add_option("--db", ia.db, "Database directory (schema.txt + <relation>.csv)")->required();
    infer->add_option("--examples", ia.examples, "Examples file")->required();
    infer->add_option("--semiring", ia.semiring, "auto|nx|why|trio|bx|posbool");
    infer->add_flag("--all-candidates", ia.all, "Also print the other minimal candidates");
    infer->add_option("--emit-stats", ia.stats_file, "Write search statistics as JSON");
    infer->add_option("--timeout", ia.timeout, "Wall-clock limit in seconds");

    std::string eval_db, eval_query, eval_prov = "nx";
    auto* eval = app.add_subcommand("eval", "Evaluate a query with provenance");
    eval->add_option("--db", eval_db, "Database directory")->required();
    eval->add_option("--query", eval_query, "Query file")->required();
    eval->add_option("--provenance", eval_prov, "nx|why|trio|bx|posbool");

    ExperimentArgs ea;
    auto* exp = app.add_subcommand("experiment", "Convergence experiment on synthetic data");
    exp->add_option("--queries", ea.queries);
    exp->add_option("--atoms", ea.atoms, "N or LO-HI");
    exp->add_option("--self-joins", ea.self_joins);
    exp->add_option("--max-examples", ea.max_examples);
    exp->add_option("--runs", ea.runs);
    exp->add_option("--rows", ea.rows, "Rows per relation");
    exp->add_option("--relations", ea.relations);
    exp->add_option("--semiring", ea.semiring);
    exp->add_option("--seed", ea.seed);
    exp->add_option("--report", ea.report, "JSONL output file (stdout if absent)");

    std::string host = "127.0.0.1", snapshot_dir;
    int port = 8080;
    double serve_timeout = 30;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--snapshot-dir", snapshot_dir);
    serve->add_option("--timeout", serve_timeout, "Inference timeout in seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kFormat;
    }

    try {
        if (*infer) return run_infer(ia);
        if (*eval) return run_eval(eval_db, eval_query, eval_prov);
        if (*exp) return run_experiment_cmd(ea);
        if (*serve) return run_serve(host, port, snapshot_dir, serve_timeout);
    } catch (const qbe::Error& e) {
        std::cerr << "error [" << qbe::to_string(e.code()) << "]: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFormat;
    }
    return kOk;
}
