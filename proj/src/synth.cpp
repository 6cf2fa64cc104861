#include "qbe/synth.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>

#include <json.hpp>

#include "qbe/minimize.hpp"

namespace qbe {

namespace {

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

}  // namespace

std::shared_ptr<AnnotatedDatabase> random_database(const DatabaseSpec& spec, Rng& rng) {
    Schema schema;
    std::vector<std::string> names;
    for (std::size_t r = 1; r <= spec.relations; ++r) {
        std::vector<std::string> attrs;
        const std::size_t arity = uniform(rng, spec.min_arity, spec.max_arity);
        for (std::size_t a = 1; a <= arity; ++a) attrs.push_back("A" + std::to_string(a));
        names.push_back("R" + std::to_string(r));
        schema.add(names.back(), std::move(attrs));
    }
    auto db = std::make_shared<AnnotatedDatabase>(schema);
    for (std::size_t r = 0; r < names.size(); ++r) {
        const std::size_t arity = schema.arity(names[r]);
        for (std::size_t row = 1; row <= spec.rows_per_relation; ++row) {
            Tuple t;
            for (std::size_t p = 0; p < arity; ++p) {
                const bool skewed = spec.skewed_column && r == 0 && p + 1 == arity;
                const std::size_t v = uniform(rng, 0, skewed ? 2 : spec.domain - 1);
                t.push_back((skewed ? "s" : "v") + std::to_string(v));
            }
            db->insert(names[r], std::move(t), names[r] + "_" + std::to_string(row));
        }
    }
    return db;
}

ConjunctiveQuery random_query(const Schema& schema, const QuerySpec& spec, Rng& rng) {
    std::vector<std::string> relations;
    for (const auto& [name, _] : schema.relations()) relations.push_back(name);
    const std::size_t atoms = uniform(rng, spec.min_atoms, spec.max_atoms);
    std::vector<std::string> unused = relations;
    std::shuffle(unused.begin(), unused.end(), rng);
    ConjunctiveQuery q;
    q.head.relation = "ans";
    std::vector<std::string> vars;
    auto fresh = [&] {
        vars.push_back("y" + std::to_string(vars.size() + 1));
        return vars.back();
    };
    for (std::size_t i = 0; i < atoms; ++i) {
        std::string rel;
        if (spec.self_joins || unused.empty()) {
            rel = relations[uniform(rng, 0, relations.size() - 1)];
        } else {
            rel = unused.back();
            unused.pop_back();
        }
        Atom atom{rel, {}};
        const std::size_t arity = schema.arity(rel);
        std::vector<std::string> terms(arity);
        if (i > 0) {
            // Join on one position, sometimes two.
            terms[uniform(rng, 0, arity - 1)] = vars[uniform(rng, 0, vars.size() - 1)];
            if (arity > 1 && chance(rng, 0.15)) {
                terms[uniform(rng, 0, arity - 1)] = vars[uniform(rng, 0, vars.size() - 1)];
            }
        }
        for (auto& t : terms) {
            if (t.empty()) t = fresh();
        }
        for (auto& t : terms) atom.terms.push_back(Term::variable(t));
        q.body.push_back(std::move(atom));
    }
    std::vector<std::string> pool = q.variables();
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t k = uniform(rng, 1, std::min(spec.max_head, pool.size()));
    for (std::size_t j = 0; j < k; ++j) q.head.terms.push_back(Term::variable(pool[j]));
    return q;
}

std::vector<ExampleRow> sample_examples(const ConjunctiveQuery& q, const AnnotatedDatabase& db,
                                        std::size_t count, std::size_t max_monomials,
                                        SemiringKind kind, Rng& rng) {
    const auto support = evaluate_support(q, db);
    std::vector<Tuple> tuples(support.begin(), support.end());
    std::shuffle(tuples.begin(), tuples.end(), rng);
    if (tuples.size() > count) tuples.resize(count);
    std::vector<ExampleRow> out;
    for (const auto& t : tuples) {
        std::map<std::vector<Annotation>, std::uint64_t> bags;
        for (auto& d : enumerate_derivations(q, db, &t)) {
            std::sort(d.images.begin(), d.images.end());
            ++bags[d.images];
        }
        std::vector<Monomial> all;
        for (const auto& [bag, n] : bags) {
            Monomial m = monomial_from_bag(bag);
            m.coefficient = n;
            all.push_back(std::move(m));
        }
        std::shuffle(all.begin(), all.end(), rng);
        if (all.size() > max_monomials) all.resize(max_monomials);
        ProvenancePolynomial poly = canonicalize({all, SemiringKind::NX});
        if (kind != SemiringKind::NX) poly = project(poly, kind);
        out.push_back({t, std::move(poly)});
    }
    return out;
}

double output_recall(const ConjunctiveQuery& inferred, const ConjunctiveQuery& source,
                     const AnnotatedDatabase& db) {
    const auto want = evaluate_support(source, db);
    if (want.empty()) return 1;
    const auto got = evaluate_support(inferred, db);
    std::size_t hit = 0;
    for (const auto& t : want) hit += got.count(t);
    return static_cast<double>(hit) / static_cast<double>(want.size());
}

namespace {

std::size_t constant_count(const ConjunctiveQuery& q) {
    std::size_t n = 0;
    for (const auto& a : q.body) {
        for (const auto& t : a.terms) n += t.is_variable() ? 0 : 1;
    }
    return n;
}

std::map<std::string, std::size_t> relation_counts(const ConjunctiveQuery& q) {
    std::map<std::string, std::size_t> out;
    for (const auto& a : q.body) ++out[a.relation];
    return out;
}

}  // namespace

std::string classify_difference(const ConjunctiveQuery& inferred, const ConjunctiveQuery& source) {
    if (canonical_text(inferred) == canonical_text(source)) return "converged";
    const auto ri = relation_counts(inferred), rs = relation_counts(source);
    for (const auto& [rel, n] : rs) {
        auto it = ri.find(rel);
        if (n > 1 && (it == ri.end() || it->second < n)) return "missed_self_join";
    }
    if (constant_count(inferred) > constant_count(source)) return "extra_constant";
    if (inferred.body.size() != source.body.size()) return "different_size";
    const std::size_t vi = unique_variable_count(inferred), vs = unique_variable_count(source);
    if (vi < vs) return "extra_join";
    if (vi > vs) return "missing_join";
    return "other";
}

namespace {

// A source is usable if it is syntactically minimal and has enough output.
std::optional<ConjunctiveQuery> pick_source(const AnnotatedDatabase& db, const QuerySpec& spec,
                                            std::size_t min_output, Rng& rng) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        ConjunctiveQuery q = random_query(db.schema(), spec, rng);
        if (!is_syntactically_minimal(q)) continue;
        if (evaluate_support(q, db).size() < min_output) continue;
        return canonical_form(q);
    }
    return std::nullopt;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    ExperimentReport report;
    for (std::size_t qi = 0; qi < config.queries; ++qi) {
        Rng rng(config.seed * 1'000'003 + qi);
        auto db = random_database(config.database, rng);
        auto source = pick_source(*db, config.query, config.max_examples * 2, rng);
        if (!source) continue;
        const std::string source_text = format_query(*source);
        QueryRecord qr;
        qr.query_id = qi;
        qr.source_text = source_text;
        bool all_converged = true;
        std::size_t worst = 0;
        for (std::size_t run = 0; run < config.runs; ++run) {
            Rng run_rng(config.seed * 7'919 + qi * 104'729 + run);
            const auto rows = sample_examples(*source, *db, config.max_examples, config.max_monomials,
                                              config.kind, run_rng);
            RunRecord rec;
            rec.query_id = qi;
            rec.run = run;
            rec.source_text = source_text;
            rec.kind = config.kind;
            const auto run_start = std::chrono::steady_clock::now();
            double recall_seen = -1;
            for (std::size_t s = 1; s <= rows.size(); ++s) {
                KExample ex;
                ex.input = db;
                ex.kind = config.kind;
                ex.output.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(s));
                StepRecord step;
                step.examples = s;
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    InferResult r = infer(ex, config.infer);
                    step.query_text = format_query(r.query);
                    step.consistent = is_consistent(r.query, ex);
                    step.diff_class = classify_difference(r.query, *source);
                    if (step.diff_class == "converged") {
                        step.recall = 1;
                    } else if (s >= config.recall_at) {
                        step.recall = output_recall(r.query, *source, *db);
                    }
                } catch (const Error& e) {
                    step.consistent = e.code() != ErrorCode::NoConsistentQuery;
                    step.diff_class = "error:" + std::string(to_string(e.code()));
                }
                step.millis =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
                qr.always_consistent = qr.always_consistent && step.consistent;
                const bool converged = step.diff_class == "converged";
                if (s == config.recall_at || (converged && recall_seen < 0)) {
                    if (recall_seen < 0) recall_seen = step.recall;
                }
                rec.steps.push_back(step);
                if (converged) {
                    rec.examples_to_converge = s;
                    break;
                }
            }
            rec.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                   run_start)
                             .count();
            if (recall_seen < 0) recall_seen = rec.steps.empty() ? 0 : rec.steps.back().recall;
            qr.worst_recall = std::min(qr.worst_recall, recall_seen);
            if (rec.examples_to_converge) {
                worst = std::max(worst, *rec.examples_to_converge);
            } else {
                all_converged = false;
            }
            report.runs.push_back(std::move(rec));
        }
        if (all_converged) qr.worst_to_converge = worst;
        report.queries.push_back(std::move(qr));
    }
    return report;
}

std::string report_jsonl(const ExperimentReport& report) {
    std::string out;
    for (const auto& run : report.runs) {
        nlohmann::json j;
        j["query_id"] = run.query_id;
        j["run"] = run.run;
        j["source"] = run.source_text;
        j["semiring"] = std::string(to_string(run.kind));
        j["examples_to_converge"] =
            run.examples_to_converge ? nlohmann::json(*run.examples_to_converge) : nlohmann::json();
        nlohmann::json diffs = nlohmann::json::array();
        for (const auto& s : run.steps) {
            diffs.push_back({{"examples", s.examples},
                             {"class", s.diff_class},
                             {"consistent", s.consistent},
                             {"recall", s.recall},
                             {"query", s.query_text},
                             {"millis", s.millis}});
        }
        j["per_step_diff_class"] = std::move(diffs);
        j["millis"] = run.millis;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::optional<KExample> random_small_example(const SmallExampleSpec& spec, Rng& rng) {
    DatabaseSpec dbs;
    dbs.relations = spec.relations;
    dbs.min_arity = dbs.max_arity = 2;
    dbs.rows_per_relation = spec.rows;
    dbs.domain = spec.domain;
    auto db = random_database(dbs, rng);
    QuerySpec qs;
    qs.min_atoms = 1;
    qs.max_atoms = spec.max_degree;
    qs.max_head = spec.max_head;
    ConjunctiveQuery q = random_query(db->schema(), qs, rng);
    const auto rows = evaluate_with_provenance(q, *db);
    if (rows.empty()) return std::nullopt;
    const std::size_t m = uniform(rng, 1, spec.max_monomials);
    std::map<Tuple, ProvenancePolynomial> chosen;
    const auto annotations = db->annotations();
    for (std::size_t i = 0; i < m; ++i) {
        const auto& row = rows[uniform(rng, 0, rows.size() - 1)];
        Monomial mono = row.provenance.monomials[uniform(rng, 0, row.provenance.monomials.size() - 1)];
        if (chance(rng, spec.perturb)) {
            auto occ = mono.occurrences();
            occ[uniform(rng, 0, occ.size() - 1)] = annotations[uniform(rng, 0, annotations.size() - 1)];
            const std::uint64_t c = mono.coefficient;
            mono = monomial_from_bag(occ);
            mono.coefficient = std::min<std::uint64_t>(c, 2);
        }
        auto& poly = chosen[row.tuple];
        auto same = std::find_if(poly.monomials.begin(), poly.monomials.end(),
                                 [&](const Monomial& x) { return x.same_factors(mono); });
        if (same == poly.monomials.end()) poly.monomials.push_back(std::move(mono));
    }
    KExample ex;
    ex.input = db;
    ex.kind = spec.kind;
    for (auto& [t, poly] : chosen) {
        poly = canonicalize(poly);
        if (spec.kind != SemiringKind::NX) poly = project(poly, spec.kind);
        ex.output.push_back({t, std::move(poly)});
    }
    return ex;
}

}  // namespace qbe
