#include "qbe/minimize.hpp"

#include <algorithm>
#include <set>

namespace qbe {

std::string EquatingSet::find(const std::string& var) const {
    auto it = parent_.find(var);
    if (it == parent_.end() || it->second == var) return var;
    std::string root = find(it->second);
    it->second = root;
    return root;
}

std::optional<std::string> EquatingSet::constant_of(const std::string& var) const {
    auto it = pinned_.find(find(var));
    if (it == pinned_.end()) return std::nullopt;
    return it->second;
}

bool EquatingSet::unite(const std::string& a, const std::string& b) {
    std::string ra = find(a), rb = find(b);
    if (ra == rb) return true;
    auto ca = pinned_.find(ra), cb = pinned_.find(rb);
    if (ca != pinned_.end() && cb != pinned_.end() && ca->second != cb->second) return false;
    std::optional<std::string> constant;
    if (ca != pinned_.end()) constant = ca->second;
    if (cb != pinned_.end()) constant = cb->second;
    pinned_.erase(ra);
    pinned_.erase(rb);
    // The smallest name roots the class, so keys stay canonical.
    if (rb < ra) std::swap(ra, rb);
    parent_[ra] = ra;
    parent_[rb] = ra;
    if (constant) pinned_[ra] = *constant;
    return true;
}

bool EquatingSet::pin(const std::string& var, const std::string& constant) {
    std::string r = find(var);
    auto it = pinned_.find(r);
    if (it != pinned_.end()) return it->second == constant;
    pinned_[r] = constant;
    return true;
}

bool EquatingSet::implies(const EquatingSet& other) const {
    for (const auto& [v, _] : other.parent_) {
        if (!same_class(v, other.find(v))) return false;
    }
    for (const auto& [root, c] : other.pinned_) {
        if (constant_of(root) != c) return false;
    }
    return true;
}

std::string EquatingSet::key() const {
    std::string out;
    for (const auto& [v, _] : parent_) {
        std::string r = find(v);
        if (r != v) out += v + '>' + r + ';';
    }
    for (const auto& [r, c] : pinned_) out += r + '=' + c + ';';
    return out;
}

std::vector<std::pair<std::string, std::string>> EquatingSet::pairs() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [v, _] : parent_) {
        std::string r = find(v);
        if (r != v) out.emplace_back(r, v);
    }
    for (const auto& [r, c] : pinned_) out.emplace_back(r, "'" + c + "'");
    return out;
}

ConjunctiveQuery apply_homomorphism(const ConjunctiveQuery& q, const EquatingSet& h) {
    std::map<std::string, std::string> representative;  // root -> chosen variable
    for (const auto& t : q.head.terms) {
        if (t.is_variable()) representative.emplace(h.find(t.text), t.text);
    }
    auto map_term = [&](const Term& t) {
        if (!t.is_variable()) return t;
        if (auto c = h.constant_of(t.text)) return Term::constant(*c);
        std::string root = h.find(t.text);
        auto it = representative.find(root);
        return Term::variable(it != representative.end() ? it->second : root);
    };
    ConjunctiveQuery out;
    out.head.relation = q.head.relation;
    for (const auto& t : q.head.terms) out.head.terms.push_back(map_term(t));
    for (const auto& atom : q.body) {
        Atom a{atom.relation, {}};
        for (const auto& t : atom.terms) a.terms.push_back(map_term(t));
        out.body.push_back(std::move(a));
    }
    return out;
}

namespace {

constexpr std::uint64_t kWitnessCap = 100'000;

bool holds(const EquatingSet& s, const Equating& e) {
    if (e.constant) return s.constant_of(e.var) == e.other;
    return s.same_class(e.var, e.other);
}

bool add(EquatingSet& s, const Equating& e) {
    return e.constant ? s.pin(e.var, e.other) : s.unite(e.var, e.other);
}

}  // namespace

std::vector<Equating> candidate_equatings(const ConjunctiveQuery& q, const KExample& ex) {
    const auto vars = q.variables();
    const std::size_t nv = vars.size();
    std::vector<std::vector<bool>> meet(nv, std::vector<bool>(nv, true));
    std::vector<std::optional<std::set<Value>>> common(nv);
    bool constrained = false;
    for (const auto& row : ex.output) {
        for (const auto& m : row.provenance.monomials) {
            auto derivations = witnessing_derivations(q, row.tuple, m, *ex.input, ex.kind, kWitnessCap);
            if (derivations.empty()) return {};
            if (derivations.size() >= kWitnessCap) continue;
            constrained = true;
            std::vector<std::set<Value>> values(nv);
            for (const auto& d : derivations) {
                for (std::size_t i = 0; i < nv; ++i) values[i].insert(d.binding.at(vars[i]));
            }
            for (std::size_t i = 0; i < nv; ++i) {
                if (!common[i]) {
                    common[i] = values[i];
                } else {
                    std::set<Value> both;
                    std::set_intersection(common[i]->begin(), common[i]->end(), values[i].begin(),
                                          values[i].end(), std::inserter(both, both.end()));
                    common[i] = std::move(both);
                }
                for (std::size_t j = i + 1; j < nv; ++j) {
                    if (!meet[i][j]) continue;
                    bool any = std::any_of(values[i].begin(), values[i].end(),
                                           [&](const Value& v) { return values[j].count(v) > 0; });
                    if (!any) meet[i][j] = false;
                }
            }
        }
    }
    std::vector<Equating> out;
    if (!constrained) return out;
    for (std::size_t i = 0; i < nv; ++i) {
        for (std::size_t j = i + 1; j < nv; ++j) {
            if (meet[i][j]) out.push_back({vars[i], vars[j], false});
        }
    }
    for (std::size_t i = 0; i < nv; ++i) {
        if (!common[i]) continue;
        for (const auto& c : *common[i]) out.push_back({vars[i], c, true});
    }
    return out;
}

namespace {

class LatticeWalk {
public:
    LatticeWalk(const ConjunctiveQuery& q, const KExample& ex, const LatticeOptions& options,
                LatticeStats& stats)
        : q_(q), ex_(ex), options_(options), stats_(stats), checker_(ex) {}

    std::vector<ConjunctiveQuery> run() {
        const auto cands = candidate_equatings(q_, ex_);
        std::vector<EquatingSet> maximal;
        for (std::size_t s = 0; s < cands.size(); ++s) {
            bool determined = std::any_of(maximal.begin(), maximal.end(),
                                          [&](const EquatingSet& m) { return holds(m, cands[s]); });
            if (determined) continue;
            EquatingSet set;
            if (!add(set, cands[s]) || !consistent(set)) continue;
            for (std::size_t step = 1; step < cands.size(); ++step) {
                const auto& c = cands[(s + step) % cands.size()];
                if (holds(set, c)) continue;
                EquatingSet next = set;
                if (!add(next, c)) continue;
                if (consistent(next)) set = std::move(next);
            }
            bool known = std::any_of(maximal.begin(), maximal.end(),
                                     [&](const EquatingSet& m) { return m.key() == set.key(); });
            if (!known) maximal.push_back(std::move(set));
        }
        std::vector<ConjunctiveQuery> out;
        std::set<std::string> seen;
        for (const auto& m : maximal) {
            ConjunctiveQuery r = apply_homomorphism(q_, m);
            if (seen.insert(canonical_text(r)).second) {
                out.push_back(std::move(r));
                stats_.maximal.push_back(m);
            }
        }
        if (out.empty()) {
            out.push_back(q_);
            stats_.maximal.emplace_back();
        }
        return out;
    }

private:
    bool consistent(const EquatingSet& set) {
        const std::string key = set.key();
        if (options_.memoize) {
            auto it = memo_.find(key);
            if (it != memo_.end()) {
                ++stats_.memo_hits;
                return it->second;
            }
            for (const auto& bad : inconsistent_) {
                if (set.implies(bad)) {
                    ++stats_.pruned_supersets;
                    if (stats_.skipped.size() < options_.skipped_sample) stats_.skipped.push_back(set);
                    memo_.emplace(key, false);
                    return false;
                }
            }
        }
        options_.limits.check_deadline();
        ++stats_.consistency_checks;
        ConjunctiveQuery candidate = apply_homomorphism(q_, set);
        bool ok = true;
        try {
            validate_query(candidate, &ex_.input->schema());
        } catch (const Error&) {
            ok = false;
        }
        ok = ok && checker_(candidate);
        if (options_.memoize) {
            memo_.emplace(key, ok);
            if (!ok) inconsistent_.push_back(set);
        }
        return ok;
    }

    const ConjunctiveQuery& q_;
    const KExample& ex_;
    const LatticeOptions& options_;
    LatticeStats& stats_;
    ConsistencyChecker checker_;
    std::map<std::string, bool> memo_;
    std::vector<EquatingSet> inconsistent_;
};

}  // namespace

std::vector<ConjunctiveQuery> explore_equating_lattice(const ConjunctiveQuery& q, const KExample& ex,
                                                       const LatticeOptions& options,
                                                       LatticeStats* stats) {
    LatticeStats local;
    return LatticeWalk(q, ex, options, stats ? *stats : local).run();
}

namespace {

class HomSearch {
public:
    HomSearch(const ConjunctiveQuery& from, const ConjunctiveQuery& to, bool onto)
        : from_(from), to_(to), onto_(onto), hits_(to.body.size(), 0) {}

    bool run() {
        if (from_.head.relation != to_.head.relation ||
            from_.head.terms.size() != to_.head.terms.size()) {
            return false;
        }
        if (onto_ && from_.body.size() < to_.body.size()) return false;
        for (std::size_t i = 0; i < from_.head.terms.size(); ++i) {
            if (!bind(from_.head.terms[i], to_.head.terms[i])) return false;
        }
        return step(0);
    }

private:
    bool bind(const Term& f, const Term& t) {
        if (!f.is_variable()) return f == t;
        auto [it, inserted] = map_.emplace(f.text, t);
        if (inserted) {
            trail_.push_back(f.text);
            return true;
        }
        return it->second == t;
    }

    bool step(std::size_t i) {
        if (i == from_.body.size()) {
            return !onto_ || std::find(hits_.begin(), hits_.end(), 0) == hits_.end();
        }
        if (onto_) {
            auto missing = static_cast<std::size_t>(std::count(hits_.begin(), hits_.end(), 0));
            if (missing > from_.body.size() - i) return false;
        }
        const Atom& a = from_.body[i];
        for (std::size_t j = 0; j < to_.body.size(); ++j) {
            const Atom& b = to_.body[j];
            if (a.relation != b.relation || a.terms.size() != b.terms.size()) continue;
            const std::size_t mark = trail_.size();
            bool ok = true;
            for (std::size_t p = 0; p < a.terms.size() && ok; ++p) ok = bind(a.terms[p], b.terms[p]);
            if (ok) {
                ++hits_[j];
                if (step(i + 1)) return true;
                --hits_[j];
            }
            while (trail_.size() > mark) {
                map_.erase(trail_.back());
                trail_.pop_back();
            }
        }
        return false;
    }

    const ConjunctiveQuery& from_;
    const ConjunctiveQuery& to_;
    bool onto_;
    std::vector<std::size_t> hits_;
    std::map<std::string, Term> map_;
    std::vector<std::string> trail_;
};

}  // namespace

bool containment_mapping(const ConjunctiveQuery& from, const ConjunctiveQuery& to, bool onto) {
    return HomSearch(from, to, onto).run();
}

bool is_syntactically_minimal(const ConjunctiveQuery& q) {
    if (q.body.size() <= 1) return true;
    for (std::size_t i = 0; i < q.body.size(); ++i) {
        ConjunctiveQuery smaller = q;
        smaller.body.erase(smaller.body.begin() + static_cast<std::ptrdiff_t>(i));
        if (containment_mapping(q, smaller, false)) return false;
    }
    return true;
}

ConjunctiveQuery select_output_query(const std::vector<ConjunctiveQuery>& candidates) {
    if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidate queries");
    std::vector<ConjunctiveQuery> pool;
    for (const auto& c : candidates) {
        if (is_syntactically_minimal(c)) pool.push_back(canonical_form(c));
    }
    if (pool.empty()) {
        for (const auto& c : candidates) pool.push_back(canonical_form(c));
    }
    std::size_t best = 0;
    std::string best_text = format_query(pool[0]);
    for (std::size_t i = 1; i < pool.size(); ++i) {
        const std::size_t vi = unique_variable_count(pool[i]);
        const std::size_t vb = unique_variable_count(pool[best]);
        std::string text = format_query(pool[i]);
        if (vi < vb || (vi == vb && text < best_text)) {
            best = i;
            best_text = std::move(text);
        }
    }
    return pool[best];
}

}  // namespace qbe
