#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qbe/pipeline.hpp"

namespace qbe {

using Rng = std::mt19937_64;

struct DatabaseSpec {
    std::size_t relations = 3;
    std::size_t min_arity = 2;
    std::size_t max_arity = 3;
    std::size_t rows_per_relation = 340;
    std::size_t domain = 60;
    bool skewed_column = false;  // last attribute of the first relation takes 3 values
};

/// Relations R1..Rr with attributes A1..An; tokens `<relation>_<row>`.
std::shared_ptr<AnnotatedDatabase> random_database(const DatabaseSpec& spec, Rng& rng);

struct QuerySpec {
    std::size_t min_atoms = 2;
    std::size_t max_atoms = 5;
    bool self_joins = true;
    std::size_t max_head = 2;
};

/// Connected query without constants; every atom shares a variable with an
/// earlier one.
ConjunctiveQuery random_query(const Schema& schema, const QuerySpec& spec, Rng& rng);

/// `count` distinct output tuples in random order, each with up to
/// `max_monomials` randomly chosen monomials of its provenance, in `kind`.
std::vector<ExampleRow> sample_examples(const ConjunctiveQuery& q, const AnnotatedDatabase& db,
                                        std::size_t count, std::size_t max_monomials,
                                        SemiringKind kind, Rng& rng);

/// |inferred support ∩ source support| / |source support|.
double output_recall(const ConjunctiveQuery& inferred, const ConjunctiveQuery& source,
                     const AnnotatedDatabase& db);

/// How a non-converged query differs from the source: extra_constant,
/// extra_join, missing_join, missed_self_join, different_size or other.
std::string classify_difference(const ConjunctiveQuery& inferred, const ConjunctiveQuery& source);

struct ExperimentConfig {
    std::size_t queries = 10;
    QuerySpec query;
    DatabaseSpec database;
    std::size_t max_examples = 20;
    std::size_t max_monomials = 3;
    std::size_t runs = 3;
    std::size_t recall_at = 5;
    SemiringKind kind = SemiringKind::NX;
    std::uint64_t seed = 1;
    InferOptions infer;
};

struct StepRecord {
    std::size_t examples = 0;
    std::string query_text;  // empty when inference failed
    std::string diff_class;  // "converged" once equal to the source
    bool consistent = true;
    double recall = 0;
    double millis = 0;
};

struct RunRecord {
    std::size_t query_id = 0;
    std::size_t run = 0;
    std::string source_text;
    SemiringKind kind = SemiringKind::NX;
    std::optional<std::size_t> examples_to_converge;
    std::vector<StepRecord> steps;
    double millis = 0;
};

struct QueryRecord {
    std::size_t query_id = 0;
    std::string source_text;
    std::optional<std::size_t> worst_to_converge;  // worst of the runs; empty if any run failed
    double worst_recall = 1;                      // lowest recall at `recall_at` examples
    bool always_consistent = true;
};

struct ExperimentReport {
    std::vector<RunRecord> runs;
    std::vector<QueryRecord> queries;
};

/// Per query: build a database and source query, then per run add sampled
/// examples one at a time and infer after each. Deterministic for a seed.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// One JSON object per run, newline separated.
std::string report_jsonl(const ExperimentReport& report);

struct SmallExampleSpec {
    std::size_t max_degree = 4;     // n
    std::size_t max_monomials = 3;  // m
    std::size_t max_head = 3;       // k
    std::size_t relations = 2;
    std::size_t domain = 4;
    std::size_t rows = 8;
    double perturb = 0.35;  // chance of swapping an annotation for a random one
    SemiringKind kind = SemiringKind::NX;
};

/// Tiny random instance drawn from a random query's output and then possibly
/// perturbed; nullopt if the drawn query produced no output.
std::optional<KExample> random_small_example(const SmallExampleSpec& spec, Rng& rng);

}  // namespace qbe
