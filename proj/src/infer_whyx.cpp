#include "qbe/infer_whyx.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace qbe {

std::string WhyCandidate::key() const {
    std::string out;
    for (const auto& a : contributing) {
        out += a.relation;
        out += '[';
        for (std::size_t p = 0; p < a.mask.size(); ++p) {
            if (p) out += ',';
            out += std::to_string(a.mask[p]);
        }
        out += ']';
    }
    return out;
}

std::size_t WhyCandidate::size() const {
    std::size_t n = contributing.size();
    for (const auto& [_, c] : free) n += c;
    return n;
}

ConjunctiveQuery WhyCandidate::to_query(const Schema& schema, std::size_t k) const {
    std::vector<std::size_t> root(k);
    std::iota(root.begin(), root.end(), 0);
    auto find = [&](std::size_t j) {
        while (root[j] != j) j = root[j] = root[root[j]];
        return j;
    };
    for (const auto& a : contributing) {
        for (std::uint64_t m : a.mask) {
            std::size_t first = k;
            for (std::size_t j = 0; j < k; ++j) {
                if (!(m >> j & 1)) continue;
                if (first == k) {
                    first = j;
                } else {
                    std::size_t ra = find(first), rb = find(j);
                    root[std::max(ra, rb)] = std::min(ra, rb);
                }
            }
        }
    }
    auto head_var = [&](std::size_t j) { return Term::variable("x" + std::to_string(find(j) + 1)); };
    ConjunctiveQuery q;
    q.head.relation = "ans";
    for (std::size_t j = 0; j < k; ++j) q.head.terms.push_back(head_var(j));
    std::size_t fresh = 0;
    auto fresh_var = [&] { return Term::variable("z" + std::to_string(++fresh)); };
    for (const auto& a : contributing) {
        Atom atom{a.relation, {}};
        for (std::uint64_t m : a.mask) {
            if (m == 0) {
                atom.terms.push_back(fresh_var());
            } else {
                std::size_t j = 0;
                while (!(m >> j & 1)) ++j;
                atom.terms.push_back(head_var(j));
            }
        }
        q.body.push_back(std::move(atom));
    }
    for (const auto& [relation, count] : free) {
        for (std::size_t c = 0; c < count; ++c) {
            Atom atom{relation, {}};
            for (std::size_t p = 0; p < schema.arity(relation); ++p) atom.terms.push_back(fresh_var());
            q.body.push_back(std::move(atom));
        }
    }
    return q;
}

std::size_t why_size_bound(const KExample& ex) {
    std::set<std::string> relations;
    std::size_t n = 0;
    for (const auto& row : ex.output) {
        for (const auto& m : row.provenance.monomials) {
            const auto support = m.support();
            n = std::max(n, support.size());
            for (const auto& a : support) relations.insert(ex.input->relation_of(a));
        }
    }
    if (n == 0) return ex.arity();
    return ex.arity() + relations.size() * (n - 1);
}

namespace {

struct WhyEdge {
    std::size_t left = 0;
    std::size_t right = 0;
    std::vector<std::vector<std::size_t>> witnesses;  // per head attribute
};

struct SubGraph {
    std::vector<std::size_t> edges;
    std::vector<std::pair<std::size_t, std::size_t>> cover;  // attribute -> (edge, position)
};

// Edge subsets of size <= k (no disjointness) with every attribute assignment
// that uses each chosen edge; ordered by size, then edge indices.
class SubGraphEnumerator {
public:
    SubGraphEnumerator(const std::vector<WhyEdge>& edges, std::size_t k, const Limits& limits,
                       std::uint64_t& counter, const std::function<void(const SubGraph&)>& visit)
        : edges_(edges), k_(k), limits_(limits), counter_(counter), visit_(visit) {
        for (std::size_t e = 0; e < edges.size(); ++e) {
            bool any = std::any_of(edges[e].witnesses.begin(), edges[e].witnesses.end(),
                                   [](const auto& w) { return !w.empty(); });
            if (any) useful_.push_back(e);
        }
    }

    void run() {
        for (std::size_t size = 1; size <= std::min(k_, useful_.size()); ++size) {
            target_ = size;
            choose(0);
        }
    }

private:
    void choose(std::size_t start) {
        if (chosen_.size() == target_) {
            for (std::size_t j = 0; j < k_; ++j) {
                bool any = std::any_of(chosen_.begin(), chosen_.end(),
                                       [&](std::size_t e) { return !edges_[e].witnesses[j].empty(); });
                if (!any) return;
            }
            sel_.edges = chosen_;
            sel_.cover.assign(k_, {0, 0});
            uses_.assign(chosen_.size(), 0);
            assign(0);
            return;
        }
        for (std::size_t i = start; i < useful_.size(); ++i) {
            chosen_.push_back(useful_[i]);
            choose(i + 1);
            chosen_.pop_back();
        }
    }

    void assign(std::size_t j) {
        if (j == k_) {
            if (std::find(uses_.begin(), uses_.end(), 0) != uses_.end()) return;
            if (++counter_ > limits_.selection_budget) {
                throw Error(ErrorCode::LimitExceeded,
                            "sub-graph budget of " + std::to_string(limits_.selection_budget) +
                                " exhausted");
            }
            if (counter_ % 256 == 0) limits_.check_deadline();
            visit_(sel_);
            return;
        }
        auto unused = static_cast<std::size_t>(std::count(uses_.begin(), uses_.end(), 0));
        if (unused > k_ - j) return;
        for (std::size_t c = 0; c < chosen_.size(); ++c) {
            for (std::size_t p : edges_[chosen_[c]].witnesses[j]) {
                sel_.cover[j] = {chosen_[c], p};
                ++uses_[c];
                assign(j + 1);
                --uses_[c];
            }
        }
    }

    const std::vector<WhyEdge>& edges_;
    std::size_t k_;
    const Limits& limits_;
    std::uint64_t& counter_;
    const std::function<void(const SubGraph&)>& visit_;
    std::vector<std::size_t> useful_;
    std::vector<std::size_t> chosen_;
    std::vector<std::size_t> uses_;
    SubGraph sel_;
    std::size_t target_ = 0;
};

// Left side of one step: pseudo-atoms of the first monomial, or the
// contributing atoms of a stored candidate.
struct LeftItem {
    std::string relation;
    std::size_t arity = 0;
    const Tuple* values = nullptr;           // pseudo-atom
    const ContributingAtom* atom = nullptr;  // query atom
};

class WhySearch {
public:
    WhySearch(const KExample& ex, const WhyOptions& options, WhyStats& stats)
        : ex_(ex), db_(*ex.input), options_(options), stats_(stats), k_(ex.arity()) {}

    std::vector<ConjunctiveQuery> run() {
        if (k_ == 0 || k_ > 64) throw Error(ErrorCode::InvalidArgument, "head arity must be 1..64");
        pairs_ = split_pairs(ex_);
        if (pairs_.empty()) return {};
        bound_ = why_size_bound(ex_);
        presence();

        const auto& first = pairs_[0];
        const auto first_occ = monomial(0).support();
        std::vector<LeftItem> left;
        for (const auto& a : first_occ) {
            const auto& rel = db_.relation_of(a);
            left.push_back({rel, db_.schema().arity(rel), &db_.tuple_of(a), nullptr});
        }
        std::map<std::string, WhyCandidate> current;
        const std::size_t second = pairs_.size() > 1 ? 1 : 0;
        step(left, ex_.output[first.row].tuple, {}, second, current);
        for (std::size_t i = second + 1; i < pairs_.size(); ++i) {
            std::map<std::string, WhyCandidate> next;
            for (const auto& [_, cand] : current) {
                std::vector<LeftItem> items;
                for (const auto& a : cand.contributing) {
                    items.push_back({a.relation, a.mask.size(), nullptr, &a});
                }
                step(items, {}, cand.free, i, next);
            }
            current = std::move(next);
            if (current.empty()) return {};
        }

        std::vector<ConjunctiveQuery> out;
        ConsistencyChecker checker(ex_);
        for (const auto& [_, cand] : current) {
            ConjunctiveQuery q = cand.to_query(db_.schema(), k_);
            if (checker(q)) {
                out.push_back(std::move(q));
            } else {
                ++stats_.final_rejected;
            }
        }
        return out;
    }

private:
    const Monomial& monomial(std::size_t i) const {
        return ex_.output[pairs_[i].row].provenance.monomials[pairs_[i].monomial];
    }

    // present_[i]: relations occurring in every monomial up to i.
    void presence() {
        std::set<std::string> all;
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            std::set<std::string> here;
            for (const auto& a : monomial(i).support()) here.insert(db_.relation_of(a));
            if (i == 0) {
                all = here;
            } else {
                std::set<std::string> both;
                std::set_intersection(all.begin(), all.end(), here.begin(), here.end(),
                                      std::inserter(both, both.end()));
                all = std::move(both);
            }
            present_.push_back(all);
        }
    }

    void step(const std::vector<LeftItem>& left, const Tuple& t_left,
              const std::map<std::string, std::size_t>& old_free, std::size_t i,
              std::map<std::string, WhyCandidate>& out) {
        const Tuple& t = ex_.output[pairs_[i].row].tuple;
        const auto right = monomial(i).support();
        std::vector<WhyEdge> edges;
        for (std::size_t l = 0; l < left.size(); ++l) {
            for (std::size_t r = 0; r < right.size(); ++r) {
                if (db_.relation_of(right[r]) != left[l].relation) continue;
                const Tuple& v = db_.tuple_of(right[r]);
                WhyEdge e{l, r, std::vector<std::vector<std::size_t>>(k_)};
                for (std::size_t j = 0; j < k_; ++j) {
                    for (std::size_t p = 0; p < left[l].arity; ++p) {
                        bool carries = left[l].values ? (*left[l].values)[p] == t_left[j]
                                                      : (left[l].atom->mask[p] >> j & 1) != 0;
                        if (carries && v[p] == t[j]) e.witnesses[j].push_back(p);
                    }
                }
                edges.push_back(std::move(e));
            }
        }
        std::uint64_t counter = 0;
        std::function<void(const SubGraph&)> visit = [&](const SubGraph& sg) {
            ++stats_.subgraphs;
            WhyCandidate cand = build(left, right, edges, sg, old_free);
            if (cand.size() > bound_) {
                ++stats_.over_bound;
                return;
            }
            for (const auto& [relation, count] : cand.free) {
                if (count > 0 && !present_[i].count(relation)) return;
            }
            if (ex_.kind == SemiringKind::TrioX) {
                ConjunctiveQuery q = cand.to_query(db_.schema(), k_);
                if (!monomial_realized(q, t, monomial(i), db_, ex_.kind)) return;
                if (left.front().values && !monomial_realized(q, t_left, monomial(0), db_, ex_.kind)) {
                    return;
                }
            }
            ++stats_.candidates;
            auto [it, inserted] = out.try_emplace(cand.key(), cand);
            if (!inserted) {
                for (const auto& [relation, count] : cand.free) {
                    auto& slot = it->second.free[relation];
                    slot = std::max(slot, count);
                }
            }
            stats_.peak_map_size = std::max(stats_.peak_map_size, out.size());
        };
        SubGraphEnumerator(edges, k_, options_.limits, counter, visit).run();
    }

    WhyCandidate build(const std::vector<LeftItem>& left, const std::vector<Annotation>& right,
                       const std::vector<WhyEdge>& edges, const SubGraph& sg,
                       const std::map<std::string, std::size_t>& old_free) const {
        WhyCandidate cand;
        std::map<std::size_t, ContributingAtom> by_edge;
        for (std::size_t e : sg.edges) {
            const auto& item = left[edges[e].left];
            by_edge[e] = ContributingAtom{item.relation, std::vector<std::uint64_t>(item.arity, 0)};
        }
        for (std::size_t j = 0; j < k_; ++j) {
            const auto [e, p] = sg.cover[j];
            by_edge[e].mask[p] |= std::uint64_t{1} << j;
        }
        for (auto& [_, atom] : by_edge) cand.contributing.push_back(std::move(atom));
        std::sort(cand.contributing.begin(), cand.contributing.end());

        std::vector<bool> left_used(left.size(), false), right_used(right.size(), false);
        for (std::size_t e : sg.edges) {
            left_used[edges[e].left] = true;
            right_used[edges[e].right] = true;
        }
        cand.free = old_free;
        for (std::size_t l = 0; l < left.size(); ++l) {
            if (!left_used[l]) ++cand.free[left[l].relation];
        }
        std::map<std::string, std::size_t> unmatched;
        for (std::size_t r = 0; r < right.size(); ++r) {
            if (!right_used[r]) ++unmatched[db_.relation_of(right[r])];
        }
        for (const auto& [relation, count] : unmatched) {
            auto& slot = cand.free[relation];
            slot = std::max(slot, count);
        }
        for (auto it = cand.free.begin(); it != cand.free.end();) {
            it = it->second == 0 ? cand.free.erase(it) : std::next(it);
        }
        return cand;
    }

    const KExample& ex_;
    const AnnotatedDatabase& db_;
    const WhyOptions& options_;
    WhyStats& stats_;
    std::size_t k_;
    std::vector<ExamplePair> pairs_;
    std::vector<std::set<std::string>> present_;
    std::size_t bound_ = 0;
};

bool fresh_only(const ConjunctiveQuery& q, std::size_t i) {
    std::map<std::string, std::size_t> uses;
    for (const auto& t : q.head.terms) {
        if (t.is_variable()) ++uses[t.text];
    }
    for (const auto& atom : q.body) {
        for (const auto& t : atom.terms) {
            if (t.is_variable()) ++uses[t.text];
        }
    }
    return std::all_of(q.body[i].terms.begin(), q.body[i].terms.end(),
                       [&](const Term& t) { return t.is_variable() && uses[t.text] == 1; });
}

}  // namespace

std::vector<ConjunctiveQuery> find_consistent_whyx(const KExample& ex, const WhyOptions& options,
                                                   WhyStats* stats) {
    if (ex.kind != SemiringKind::WhyX && ex.kind != SemiringKind::PosBool &&
        ex.kind != SemiringKind::TrioX) {
        throw Error(ErrorCode::KindMismatch, "Why(X) inference needs a why, trio or posbool example");
    }
    options.limits.check_deadline();
    WhyStats local;
    return WhySearch(ex, options, stats ? *stats : local).run();
}

std::vector<ConjunctiveQuery> whyx_tight_fit(const std::vector<ConjunctiveQuery>& candidates,
                                             const KExample& ex, const LatticeOptions& options) {
    ConsistencyChecker checker(ex);
    std::vector<ConjunctiveQuery> out;
    std::set<std::string> seen;
    for (ConjunctiveQuery q : candidates) {
        for (std::size_t i = q.body.size(); i-- > 0;) {
            if (q.body.size() == 1 || !fresh_only(q, i)) continue;
            ConjunctiveQuery smaller = q;
            smaller.body.erase(smaller.body.begin() + static_cast<std::ptrdiff_t>(i));
            if (checker(smaller)) q = std::move(smaller);
        }
        for (auto& r : explore_equating_lattice(q, ex, options)) {
            if (seen.insert(canonical_text(r)).second) out.push_back(std::move(r));
        }
    }
    // Keep only the tightest: drop a query when another one is strictly
    // included in it (onto mappings characterize inclusion here).
    std::vector<ConjunctiveQuery> tight;
    for (std::size_t i = 0; i < out.size(); ++i) {
        bool looser = false;
        for (std::size_t j = 0; j < out.size() && !looser; ++j) {
            if (i == j) continue;
            looser = containment_mapping(out[i], out[j], true) &&
                     !containment_mapping(out[j], out[i], true);
        }
        if (!looser) tight.push_back(out[i]);
    }
    return tight;
}

namespace {

// Exponent vectors with every entry >= 1 summing to `total`.
void compositions(std::size_t parts, std::size_t total, std::vector<std::uint64_t>& cur,
                  std::vector<std::vector<std::uint64_t>>& out) {
    if (cur.size() + 1 == parts) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (std::size_t e = 1; e + (parts - cur.size() - 1) <= total; ++e) {
        cur.push_back(e);
        compositions(parts, total - e, cur, out);
        cur.pop_back();
    }
}

}  // namespace

std::optional<ConjunctiveQuery> exhaustive_whyx_oracle(const KExample& ex, const Limits& limits) {
    const auto pairs = split_pairs(ex);
    if (pairs.empty()) return std::nullopt;
    std::vector<std::vector<Annotation>> supports;
    std::size_t n = 0;
    for (const auto& p : pairs) {
        supports.push_back(ex.output[p.row].provenance.monomials[p.monomial].support());
        n = std::max(n, supports.back().size());
    }
    const std::size_t bound = why_size_bound(ex);
    std::uint64_t tried = 0;
    for (std::size_t length = n; length <= bound; ++length) {
        std::vector<std::vector<std::vector<std::uint64_t>>> options(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            std::vector<std::uint64_t> cur;
            compositions(supports[i].size(), length, cur, options[i]);
        }
        std::vector<std::size_t> pick(pairs.size(), 0);
        while (true) {
            if (++tried > limits.oracle_cap) {
                throw Error(ErrorCode::InstanceTooLarge,
                            "more than " + std::to_string(limits.oracle_cap) + " expansions");
            }
            limits.check_deadline();
            KExample nx;
            nx.input = ex.input;
            nx.kind = SemiringKind::NX;
            std::map<std::size_t, std::size_t> row_of;
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                Monomial m;
                for (std::size_t f = 0; f < supports[i].size(); ++f) {
                    m.factors.push_back({supports[i][f], options[i][pick[i]][f]});
                }
                auto [it, inserted] = row_of.emplace(pairs[i].row, nx.output.size());
                if (inserted) {
                    nx.output.push_back({ex.output[pairs[i].row].tuple, {{}, SemiringKind::NX}});
                }
                nx.output[it->second].provenance.monomials.push_back(std::move(m));
            }
            for (auto& row : nx.output) row.provenance = canonicalize(row.provenance);
            NxOptions nx_options;
            nx_options.limits = limits;
            auto found = find_consistent_nx(nx, nx_options);
            if (!found.empty()) return found.front();
            std::size_t d = 0;
            while (d < pick.size() && ++pick[d] == options[d].size()) pick[d++] = 0;
            if (d == pick.size()) break;
        }
    }
    return std::nullopt;
}

std::vector<ConjunctiveQuery> find_consistent_triox(const KExample& ex, const WhyOptions& options) {
    if (ex.kind != SemiringKind::TrioX) throw Error(ErrorCode::KindMismatch, "expected a trio example");
    return find_consistent_whyx(ex, options);
}

std::vector<ConjunctiveQuery> find_consistent_bx(const KExample& ex, const Limits& limits) {
    if (ex.kind != SemiringKind::BX) throw Error(ErrorCode::KindMismatch, "expected a bx example");
    NxOptions options;
    options.exhaustive = true;
    options.limits = limits;
    return find_consistent_nx(ex, options);
}

std::vector<ConjunctiveQuery> find_consistent_posbool(const KExample& ex, const WhyOptions& options) {
    if (ex.kind != SemiringKind::PosBool) {
        throw Error(ErrorCode::KindMismatch, "expected a posbool example");
    }
    return find_consistent_whyx(ex, options);
}

}  // namespace qbe
