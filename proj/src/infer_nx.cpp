#include "qbe/infer_nx.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace qbe {

void Limits::check_deadline() const {
    if (deadline && std::chrono::steady_clock::now() > *deadline) {
        throw Error(ErrorCode::LimitExceeded, "inference deadline exceeded");
    }
}

Limits Limits::with_timeout(std::chrono::milliseconds timeout) {
    Limits l;
    l.deadline = std::chrono::steady_clock::now() + timeout;
    return l;
}

std::vector<ExamplePair> split_pairs(const KExample& ex) {
    std::vector<ExamplePair> out;
    for (std::size_t r = 0; r < ex.output.size(); ++r) {
        for (std::size_t m = 0; m < ex.output[r].provenance.monomials.size(); ++m) {
            out.push_back({r, m});
        }
    }
    return out;
}

std::size_t distinct_values(const KExample& ex, const ExamplePair& pair) {
    const auto& row = ex.output[pair.row];
    std::set<Value> values(row.tuple.begin(), row.tuple.end());
    for (const auto& f : row.provenance.monomials[pair.monomial].factors) {
        const auto& t = ex.input->tuple_of(f.token);
        values.insert(t.begin(), t.end());
    }
    return values.size();
}

std::pair<std::size_t, std::size_t> pick_seed_pair(const KExample& ex) {
    const auto pairs = split_pairs(ex);
    if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "example has no monomials");
    if (pairs.size() == 1) return {0, 0};
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> score(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) score[i] = distinct_values(ex, pairs[i]);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    return {std::min(order[0], order[1]), std::max(order[0], order[1])};
}

std::vector<std::size_t> CoverEdge::label() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < witnesses.size(); ++j) {
        if (covers(j)) out.push_back(j);
    }
    return out;
}

const CoverEdge* CoverGraph::find(std::size_t l, std::size_t r) const {
    auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(l, r),
                               [](const CoverEdge& e, const std::pair<std::size_t, std::size_t>& key) {
                                   return std::make_pair(e.left, e.right) < key;
                               });
    if (it == edges.end() || it->left != l || it->right != r) return nullptr;
    return &*it;
}

namespace {

std::vector<Annotation> occurrences(const Monomial& m) {
    std::vector<Annotation> out;
    for (const auto& f : m.factors) out.insert(out.end(), f.exponent, f.token);
    return out;
}

}  // namespace

CoverGraph build_cover_graph(const Tuple& t1, const Monomial& m1, const Tuple& t2,
                             const Monomial& m2, const AnnotatedDatabase& db) {
    if (m1.degree() != m2.degree()) {
        throw Error(ErrorCode::DegreeMismatch, "monomials of degree " + std::to_string(m1.degree()) +
                                                   " and " + std::to_string(m2.degree()));
    }
    if (t1.size() != t2.size()) throw Error(ErrorCode::SchemaMismatch, "output tuples differ in arity");
    CoverGraph g;
    g.k = t1.size();
    g.left = occurrences(m1);
    g.right = occurrences(m2);
    for (const auto& a : g.left) g.left_relation.push_back(db.relation_of(a));
    for (const auto& a : g.right) g.right_relation.push_back(db.relation_of(a));
    for (std::size_t l = 0; l < g.left.size(); ++l) {
        const Tuple& u = db.tuple_of(g.left[l]);
        for (std::size_t r = 0; r < g.right.size(); ++r) {
            if (g.left_relation[l] != g.right_relation[r]) continue;
            const Tuple& v = db.tuple_of(g.right[r]);
            CoverEdge e{l, r, std::vector<std::vector<std::size_t>>(g.k)};
            for (std::size_t j = 0; j < g.k; ++j) {
                for (std::size_t p = 0; p < u.size(); ++p) {
                    if (u[p] == t1[j] && v[p] == t2[j]) e.witnesses[j].push_back(p);
                }
            }
            g.edges.push_back(std::move(e));
        }
    }
    return g;
}

namespace {

// Runs of equal tokens; occurrences inside one run are interchangeable.
std::vector<std::size_t> run_ids(const std::vector<Annotation>& nodes) {
    std::vector<std::size_t> ids(nodes.size());
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        ids[i] = nodes[i] == nodes[i - 1] ? ids[i - 1] : i;
    }
    return ids;
}

// Used occurrences of a run form its prefix and their partners increase.
bool canonical_side(const std::vector<std::size_t>& ids, const std::vector<long>& partner) {
    for (std::size_t i = 1; i < ids.size(); ++i) {
        if (ids[i] != ids[i - 1]) continue;
        if (partner[i] >= 0 && partner[i - 1] < 0) return false;
        if (partner[i] >= 0 && partner[i] < partner[i - 1]) return false;
    }
    return true;
}

class MatchingEnumerator {
public:
    MatchingEnumerator(const CoverGraph& g, const Limits& limits, InferStats& stats,
                       const std::function<bool(const CoverSelection&)>& visit)
        : g_(g), limits_(limits), stats_(stats), visit_(visit) {
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
            if (!g.edges[e].label().empty()) useful_.push_back(e);
        }
        left_ids_ = run_ids(g.left);
        right_ids_ = run_ids(g.right);
        left_partner_.assign(g.left.size(), -1);
        right_partner_.assign(g.right.size(), -1);
    }

    void run() {
        if (g_.k == 0) return;
        const std::size_t max_edges = std::min(g_.k, std::min(g_.left.size(), g_.right.size()));
        for (std::size_t size = 1; size <= max_edges && !stopped_; ++size) {
            target_ = size;
            choose(0);
        }
    }

private:
    void choose(std::size_t start) {
        if (stopped_) return;
        if (++steps_ % 1024 == 0) limits_.check_deadline();
        if (chosen_.size() == target_) {
            if (!covers_all()) return;
            if (!canonical_side(left_ids_, left_partner_) ||
                !canonical_side(right_ids_, right_partner_)) {
                return;
            }
            sel_.edges = chosen_;
            sel_.cover.assign(g_.k, {0, 0});
            uses_.assign(chosen_.size(), 0);
            assign(0);
            return;
        }
        for (std::size_t i = start; i < useful_.size() && !stopped_; ++i) {
            const auto& e = g_.edges[useful_[i]];
            if (left_partner_[e.left] >= 0 || right_partner_[e.right] >= 0) continue;
            left_partner_[e.left] = static_cast<long>(e.right);
            right_partner_[e.right] = static_cast<long>(e.left);
            chosen_.push_back(useful_[i]);
            choose(i + 1);
            chosen_.pop_back();
            left_partner_[e.left] = -1;
            right_partner_[e.right] = -1;
        }
    }

    bool covers_all() const {
        for (std::size_t j = 0; j < g_.k; ++j) {
            bool any = std::any_of(chosen_.begin(), chosen_.end(),
                                   [&](std::size_t e) { return g_.edges[e].covers(j); });
            if (!any) return false;
        }
        return true;
    }

    void assign(std::size_t j) {
        if (stopped_) return;
        if (j == g_.k) {
            if (std::find(uses_.begin(), uses_.end(), 0) != uses_.end()) return;
            if (++stats_.selections > limits_.selection_budget) {
                throw Error(ErrorCode::LimitExceeded,
                            "cover selection budget of " + std::to_string(limits_.selection_budget) +
                                " exhausted");
            }
            if (stats_.selections % 256 == 0) limits_.check_deadline();
            if (!visit_(sel_)) stopped_ = true;
            return;
        }
        // Attributes still to be assigned must be able to reach every unused edge.
        std::size_t unused = static_cast<std::size_t>(std::count(uses_.begin(), uses_.end(), 0));
        if (unused > g_.k - j) return;
        for (std::size_t c = 0; c < chosen_.size() && !stopped_; ++c) {
            const auto& e = g_.edges[chosen_[c]];
            for (std::size_t p : e.witnesses[j]) {
                sel_.cover[j] = {chosen_[c], p};
                ++uses_[c];
                assign(j + 1);
                --uses_[c];
                if (stopped_) return;
            }
        }
    }

    const CoverGraph& g_;
    const Limits& limits_;
    InferStats& stats_;
    const std::function<bool(const CoverSelection&)>& visit_;
    std::vector<std::size_t> useful_;
    std::vector<std::size_t> left_ids_, right_ids_;
    std::vector<long> left_partner_, right_partner_;
    std::vector<std::size_t> chosen_;
    std::vector<std::size_t> uses_;
    CoverSelection sel_;
    std::size_t target_ = 0;
    std::uint64_t steps_ = 0;
    bool stopped_ = false;
};

}  // namespace

void enumerate_covering_matchings(const CoverGraph& g, const Limits& limits, InferStats& stats,
                                  const std::function<bool(const CoverSelection&)>& visit) {
    MatchingEnumerator(g, limits, stats, visit).run();
}

std::vector<CoverSelection> enumerate_covering_matchings(const CoverGraph& g, const Limits& limits) {
    std::vector<CoverSelection> out;
    InferStats stats;
    enumerate_covering_matchings(g, limits, stats, [&](const CoverSelection& s) {
        out.push_back(s);
        return true;
    });
    return out;
}

ConjunctiveQuery build_query_from_matching(const CoverGraph& g, const CoverSelection& sel,
                                           const AnnotatedDatabase& db) {
    ConjunctiveQuery q;
    q.head.relation = "ans";
    std::vector<Atom> atoms(g.left.size());
    for (std::size_t l = 0; l < g.left.size(); ++l) {
        atoms[l].relation = g.left_relation[l];
        atoms[l].terms.assign(db.schema().arity(g.left_relation[l]), Term{});
    }
    std::map<std::pair<std::size_t, std::size_t>, std::string> head_vars;
    for (std::size_t j = 0; j < sel.cover.size(); ++j) {
        const auto [edge, position] = sel.cover[j];
        auto [it, inserted] = head_vars.emplace(sel.cover[j], "x" + std::to_string(j + 1));
        if (inserted) atoms[g.edges[edge].left].terms[position] = Term::variable(it->second);
        q.head.terms.push_back(Term::variable(it->second));
    }
    std::size_t fresh = 0;
    for (auto& atom : atoms) {
        for (auto& t : atom.terms) {
            if (t.text.empty()) t = Term::variable("z" + std::to_string(++fresh));
        }
    }
    q.body = std::move(atoms);
    return q;
}

bool verify_candidate(const ConjunctiveQuery& q, const Tuple& t, const Monomial& m,
                      const AnnotatedDatabase& db) {
    return count_bag_derivations(q, t, m, db, m.coefficient) >= m.coefficient;
}

namespace {

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b, std::uint64_t cap) {
    if (a == 0 || b == 0) return 0;
    if (a > cap / b) return cap + 1;
    return std::min(a * b, cap + 1);
}

struct NaiveItem {
    const Tuple* tuple;
    std::vector<Annotation> occurrences;
    std::size_t group;
};

class NaiveSearch {
public:
    NaiveSearch(const KExample& ex, std::vector<NaiveItem> items, std::size_t n, std::size_t k)
        : ex_(ex), items_(std::move(items)), n_(n), k_(k) {}

    std::optional<ConjunctiveQuery> run() {
        perm_.resize(items_.size());
        // Relabelling every permutation at once preserves consistency, so the
        // first item's order can stay fixed.
        perm_[0] = items_[0].occurrences;
        relations_.clear();
        for (const auto& a : perm_[0]) relations_.push_back(ex_.input->relation_of(a));
        if (!search(1)) return std::nullopt;
        return build();
    }

private:
    bool search(std::size_t i) {
        if (i == items_.size()) return find_cover().has_value();
        std::vector<Annotation> p = items_[i].occurrences;
        std::sort(p.begin(), p.end());
        do {
            if (!relations_match(p)) continue;
            if (!distinct_from_copies(i, p)) continue;
            perm_[i] = p;
            if (search(i + 1)) return true;
        } while (std::next_permutation(p.begin(), p.end()));
        return false;
    }

    bool relations_match(const std::vector<Annotation>& p) const {
        for (std::size_t j = 0; j < n_; ++j) {
            if (ex_.input->relation_of(p[j]) != relations_[j]) return false;
        }
        return true;
    }

    bool distinct_from_copies(std::size_t i, const std::vector<Annotation>& p) const {
        for (std::size_t h = 0; h < i; ++h) {
            if (items_[h].group == items_[i].group && perm_[h] == p) return false;
        }
        return true;
    }

    // First (position, attribute) witness per head attribute, or nothing.
    std::optional<std::vector<std::pair<std::size_t, std::size_t>>> find_cover() const {
        std::vector<std::pair<std::size_t, std::size_t>> cover;
        for (std::size_t a = 0; a < k_; ++a) {
            bool found = false;
            for (std::size_t j = 0; j < n_ && !found; ++j) {
                const std::size_t arity = ex_.input->schema().arity(relations_[j]);
                for (std::size_t p = 0; p < arity && !found; ++p) {
                    bool all = true;
                    for (std::size_t i = 0; i < items_.size() && all; ++i) {
                        all = (*items_[i].tuple)[a] == ex_.input->tuple_of(perm_[i][j])[p];
                    }
                    if (all) {
                        cover.emplace_back(j, p);
                        found = true;
                    }
                }
            }
            if (!found) return std::nullopt;
        }
        return cover;
    }

    ConjunctiveQuery build() const {
        const auto cover = *find_cover();
        ConjunctiveQuery q;
        q.head.relation = "ans";
        for (std::size_t j = 0; j < n_; ++j) {
            Atom atom{relations_[j], {}};
            atom.terms.assign(ex_.input->schema().arity(relations_[j]), Term{});
            q.body.push_back(std::move(atom));
        }
        std::map<std::pair<std::size_t, std::size_t>, std::string> names;
        for (std::size_t a = 0; a < k_; ++a) {
            auto [it, inserted] = names.emplace(cover[a], "x" + std::to_string(a + 1));
            if (inserted) q.body[cover[a].first].terms[cover[a].second] = Term::variable(it->second);
            q.head.terms.push_back(Term::variable(it->second));
        }
        std::size_t fresh = 0;
        for (auto& atom : q.body) {
            for (auto& t : atom.terms) {
                if (t.text.empty()) t = Term::variable("z" + std::to_string(++fresh));
            }
        }
        return q;
    }

    const KExample& ex_;
    std::vector<NaiveItem> items_;
    std::size_t n_, k_;
    std::vector<std::vector<Annotation>> perm_;
    std::vector<std::string> relations_;
};

}  // namespace

std::optional<ConjunctiveQuery> naive_find_consistent(const KExample& ex, const Limits& limits) {
    std::vector<NaiveItem> items;
    std::size_t group = 0;
    for (const auto& row : ex.output) {
        for (const auto& m : row.provenance.monomials) {
            for (std::uint64_t c = 0; c < m.coefficient; ++c) {
                items.push_back({&row.tuple, occurrences(m), group});
            }
            ++group;
        }
    }
    if (items.empty()) return std::nullopt;
    const std::size_t n = items.front().occurrences.size();
    for (const auto& it : items) {
        if (it.occurrences.size() != n) return std::nullopt;
    }
    std::uint64_t fact = 1;
    for (std::size_t i = 2; i <= n; ++i) fact = saturating_mul(fact, i, limits.naive_cap);
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < items.size(); ++i) total = saturating_mul(total, fact, limits.naive_cap);
    if (total > limits.naive_cap) {
        throw Error(ErrorCode::InstanceTooLarge,
                    "n!^m exceeds the permutation cap " + std::to_string(limits.naive_cap));
    }
    return NaiveSearch(ex, std::move(items), n, ex.arity()).run();
}

std::vector<ConjunctiveQuery> find_consistent_nx(const KExample& ex, const NxOptions& options,
                                                 InferStats* stats_out) {
    if (ex.kind != SemiringKind::NX && ex.kind != SemiringKind::BX) {
        throw Error(ErrorCode::KindMismatch, "N[X] inference needs an nx or bx example");
    }
    options.limits.check_deadline();
    InferStats local;
    InferStats& stats = stats_out ? *stats_out : local;
    std::vector<ConjunctiveQuery> out;
    const auto pairs = split_pairs(ex);
    if (pairs.empty()) return out;
    auto monomial = [&](const ExamplePair& p) -> const Monomial& {
        return ex.output[p.row].provenance.monomials[p.monomial];
    };
    const std::size_t n = monomial(pairs.front()).degree();
    for (const auto& p : pairs) {
        if (monomial(p).degree() != n) return out;
    }
    const auto [s1, s2] = options.seed ? *options.seed : pick_seed_pair(ex);
    const auto& p1 = pairs.at(s1);
    const auto& p2 = pairs.at(s2);
    const CoverGraph g = build_cover_graph(ex.output[p1.row].tuple, monomial(p1),
                                           ex.output[p2.row].tuple, monomial(p2), *ex.input);

    // Seed pairs first; afterwards the most recent failure is retried first.
    std::vector<std::size_t> check_order{s1};
    if (s2 != s1) check_order.push_back(s2);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (i != s1 && i != s2) check_order.push_back(i);
    }
    std::set<std::string> seen;
    enumerate_covering_matchings(g, options.limits, stats, [&](const CoverSelection& sel) {
        ConjunctiveQuery q = build_query_from_matching(g, sel, *ex.input);
        ++stats.candidates;
        if (!seen.insert(canonical_text(q)).second) return true;
        for (std::size_t c = 0; c < check_order.size(); ++c) {
            const auto& p = pairs[check_order[c]];
            ++stats.consistency_checks;
            if (!monomial_realized(q, ex.output[p.row].tuple, monomial(p), *ex.input, ex.kind)) {
                std::rotate(check_order.begin(), check_order.begin() + c,
                            check_order.begin() + c + 1);
                return true;
            }
        }
        ++stats.verified;
        out.push_back(std::move(q));
        return options.exhaustive &&
               (options.max_candidates == 0 || out.size() < options.max_candidates);
    });
    return out;
}

std::optional<ConjunctiveQuery> find_consistent_nx(const KExample& ex) {
    auto found = find_consistent_nx(ex, NxOptions{});
    if (found.empty()) return std::nullopt;
    return std::move(found.front());
}

}  // namespace qbe
