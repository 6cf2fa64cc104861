#include <algorithm>
#include <functional>
#include <unordered_map>

#include "qbe/relational.hpp"

namespace qbe {

namespace {

struct CompiledTerm {
    int var = -1;                    // variable id, or -1 for a constant
    const Value* constant = nullptr;
};

struct CompiledAtom {
    const std::string* relation = nullptr;
    std::vector<CompiledTerm> terms;
};

struct CompiledQuery {
    std::vector<CompiledTerm> head;
    std::vector<CompiledAtom> body;
    std::vector<std::string> names;
};

CompiledQuery compile(const ConjunctiveQuery& q) {
    CompiledQuery c;
    std::map<std::string, int> ids;
    auto term = [&](const Term& t) {
        CompiledTerm ct;
        if (t.is_variable()) {
            auto [it, inserted] = ids.emplace(t.text, static_cast<int>(ids.size()));
            if (inserted) c.names.push_back(t.text);
            ct.var = it->second;
        } else {
            ct.constant = &t.text;
        }
        return ct;
    };
    for (const auto& t : q.head.terms) c.head.push_back(term(t));
    for (const auto& atom : q.body) {
        CompiledAtom ca;
        ca.relation = &atom.relation;
        for (const auto& t : atom.terms) ca.terms.push_back(term(t));
        c.body.push_back(std::move(ca));
    }
    return c;
}

using Binding = std::vector<const Value*>;

// Binds head terms to `target`; false if the target cannot match the head.
bool bind_head(const CompiledQuery& c, const Tuple& target, Binding& binding) {
    if (target.size() != c.head.size()) return false;
    for (std::size_t i = 0; i < c.head.size(); ++i) {
        const auto& t = c.head[i];
        if (t.var < 0) {
            if (*t.constant != target[i]) return false;
        } else if (binding[t.var]) {
            if (*binding[t.var] != target[i]) return false;
        } else {
            binding[t.var] = &target[i];
        }
    }
    return true;
}

// Tries to unify `atom` with `values`, recording newly bound variables.
bool unify(const CompiledAtom& atom, const Tuple& values, Binding& binding, std::vector<int>& newly) {
    if (values.size() != atom.terms.size()) return false;
    for (std::size_t p = 0; p < atom.terms.size(); ++p) {
        const auto& t = atom.terms[p];
        if (t.var < 0) {
            if (*t.constant != values[p]) return false;
        } else if (const Value* v = binding[t.var]) {
            if (*v != values[p]) return false;
        } else {
            binding[t.var] = &values[p];
            newly.push_back(t.var);
        }
    }
    return true;
}

void undo(Binding& binding, std::vector<int>& newly, std::size_t mark) {
    while (newly.size() > mark) {
        binding[newly.back()] = nullptr;
        newly.pop_back();
    }
}

// Backtracking join over the whole database, atoms in written order.
class Joiner {
public:
    using Visit = std::function<bool(const std::vector<const Row*>&, const Binding&)>;

    Joiner(const CompiledQuery& c, const AnnotatedDatabase& db) : c_(c), db_(db) {}

    void run(Binding binding, const Visit& visit) {
        binding_ = std::move(binding);
        rows_.assign(c_.body.size(), nullptr);
        visit_ = &visit;
        step(0);
    }

private:
    bool step(std::size_t i) {
        if (i == c_.body.size()) return (*visit_)(rows_, binding_);
        const auto& atom = c_.body[i];
        const auto& rows = db_.rows(*atom.relation);
        const std::vector<std::size_t>* candidates = nullptr;
        for (std::size_t p = 0; p < atom.terms.size(); ++p) {
            const auto& t = atom.terms[p];
            const Value* v = t.var < 0 ? t.constant : binding_[t.var];
            if (!v) continue;
            const auto& hits = db_.rows_with(*atom.relation, p, *v);
            if (!candidates || hits.size() < candidates->size()) candidates = &hits;
        }
        auto attempt = [&](const Row& row) {
            std::size_t mark = newly_.size();
            bool keep_going = true;
            if (unify(atom, row.values, binding_, newly_)) {
                rows_[i] = &row;
                keep_going = step(i + 1);
            }
            undo(binding_, newly_, mark);
            return keep_going;
        };
        if (candidates) {
            for (std::size_t r : *candidates) {
                if (!attempt(rows[r])) return false;
            }
        } else {
            for (const auto& row : rows) {
                if (!attempt(row)) return false;
            }
        }
        return true;
    }

    const CompiledQuery& c_;
    const AnnotatedDatabase& db_;
    Binding binding_;
    std::vector<int> newly_;
    std::vector<const Row*> rows_;
    const Visit* visit_ = nullptr;
};

Tuple head_image(const CompiledQuery& c, const Binding& binding) {
    Tuple out;
    out.reserve(c.head.size());
    for (const auto& t : c.head) out.push_back(t.var < 0 ? *t.constant : *binding[t.var]);
    return out;
}

[[noreturn]] void explode(std::uint64_t cap) {
    throw Error(ErrorCode::DerivationExplosion,
                "more than " + std::to_string(cap) + " derivations");
}

}  // namespace

std::vector<Derivation> enumerate_derivations(const ConjunctiveQuery& query,
                                              const AnnotatedDatabase& db, const Tuple* target,
                                              std::uint64_t cap) {
    validate_query(query, &db.schema());
    const CompiledQuery c = compile(query);
    Binding binding(c.names.size(), nullptr);
    std::vector<Derivation> out;
    if (target && !bind_head(c, *target, binding)) return out;
    Joiner::Visit visit = [&](const std::vector<const Row*>& rows, const Binding& b) {
        if (out.size() >= cap) explode(cap);
        Derivation d;
        for (const Row* r : rows) d.images.push_back(r->annotation);
        for (std::size_t v = 0; v < c.names.size(); ++v) d.binding.emplace(c.names[v], *b[v]);
        out.push_back(std::move(d));
        return true;
    };
    Joiner(c, db).run(std::move(binding), visit);
    std::sort(out.begin(), out.end(),
              [](const Derivation& a, const Derivation& b) { return a.images < b.images; });
    return out;
}

std::vector<OutputRow> evaluate_with_provenance(const ConjunctiveQuery& query,
                                                const AnnotatedDatabase& db, std::uint64_t cap) {
    validate_query(query, &db.schema());
    const CompiledQuery c = compile(query);
    std::map<Tuple, std::map<std::vector<Annotation>, std::uint64_t>> acc;
    std::uint64_t count = 0;
    Joiner::Visit visit = [&](const std::vector<const Row*>& rows, const Binding& b) {
        if (++count > cap) explode(cap);
        std::vector<Annotation> bag;
        bag.reserve(rows.size());
        for (const Row* r : rows) bag.push_back(r->annotation);
        std::sort(bag.begin(), bag.end());
        ++acc[head_image(c, b)][std::move(bag)];
        return true;
    };
    Joiner(c, db).run(Binding(c.names.size(), nullptr), visit);
    std::vector<OutputRow> out;
    out.reserve(acc.size());
    for (auto& [tuple, bags] : acc) {
        ProvenancePolynomial poly;
        for (auto& [bag, n] : bags) {
            Monomial m = monomial_from_bag(bag);
            m.coefficient = n;
            poly.monomials.push_back(std::move(m));
        }
        out.push_back({tuple, canonicalize(poly)});
    }
    return out;
}

namespace {

// Support evaluation: head-connected atoms are joined first; once every head
// variable is bound, the rest only needs one witness, and that check is memoized.
class SupportEvaluator {
public:
    SupportEvaluator(const CompiledQuery& c, const AnnotatedDatabase& db) : c_(c), db_(db) {
        order_atoms();
    }

    std::set<Tuple> run() {
        binding_.assign(c_.names.size(), nullptr);
        step(0);
        return std::move(out_);
    }

private:
    void order_atoms() {
        std::vector<bool> bound(c_.names.size(), false);
        std::vector<bool> head_var(c_.names.size(), false);
        for (const auto& t : c_.head) {
            if (t.var >= 0) head_var[t.var] = true;
        }
        std::vector<bool> placed(c_.body.size(), false);
        for (std::size_t step = 0; step < c_.body.size(); ++step) {
            int best = -1;
            std::tuple<int, int, int> best_score{-1, -1, -1};
            for (std::size_t i = 0; i < c_.body.size(); ++i) {
                if (placed[i]) continue;
                int bound_terms = 0, head_terms = 0, connected = 0;
                for (const auto& t : c_.body[i].terms) {
                    if (t.var < 0) {
                        ++bound_terms;
                    } else {
                        if (bound[t.var]) ++bound_terms, connected = 1;
                        if (head_var[t.var] && !bound[t.var]) ++head_terms;
                    }
                }
                std::tuple<int, int, int> score{head_terms > 0 || connected ? 1 : 0, head_terms,
                                                bound_terms};
                if (score > best_score) best_score = score, best = static_cast<int>(i);
            }
            placed[best] = true;
            order_.push_back(static_cast<std::size_t>(best));
            for (const auto& t : c_.body[best].terms) {
                if (t.var >= 0) bound[t.var] = true;
            }
        }
        head_vars_.clear();
        for (const auto& t : c_.head) {
            if (t.var >= 0) head_vars_.push_back(t.var);
        }
    }

    bool head_bound() const {
        return std::all_of(head_vars_.begin(), head_vars_.end(),
                           [&](int v) { return binding_[v] != nullptr; });
    }

    template <typename F>
    bool for_each_match(std::size_t k, F&& f) {
        const auto& atom = c_.body[order_[k]];
        const auto& rows = db_.rows(*atom.relation);
        const std::vector<std::size_t>* candidates = nullptr;
        for (std::size_t p = 0; p < atom.terms.size(); ++p) {
            const auto& t = atom.terms[p];
            const Value* v = t.var < 0 ? t.constant : binding_[t.var];
            if (!v) continue;
            const auto& hits = db_.rows_with(*atom.relation, p, *v);
            if (!candidates || hits.size() < candidates->size()) candidates = &hits;
        }
        auto attempt = [&](const Row& row) {
            std::size_t mark = newly_.size();
            bool go = true;
            if (unify(atom, row.values, binding_, newly_)) go = f();
            undo(binding_, newly_, mark);
            return go;
        };
        if (candidates) {
            for (std::size_t r : *candidates) {
                if (!attempt(rows[r])) return false;
            }
        } else {
            for (const auto& row : rows) {
                if (!attempt(row)) return false;
            }
        }
        return true;
    }

    // Returns true when some completion exists from atom k on.
    bool exists(std::size_t k) {
        if (k == order_.size()) return true;
        bool found = false;
        for_each_match(k, [&] {
            found = exists(k + 1);
            return !found;
        });
        return found;
    }

    std::string memo_key(std::size_t k) const {
        std::string key = std::to_string(k);
        std::set<int> seen;
        for (std::size_t j = k; j < order_.size(); ++j) {
            for (const auto& t : c_.body[order_[j]].terms) {
                if (t.var >= 0 && binding_[t.var] && seen.insert(t.var).second) {
                    key += '\x1f';
                    key += std::to_string(t.var);
                    key += '=';
                    key += *binding_[t.var];
                }
            }
        }
        return key;
    }

    void step(std::size_t k) {
        if (head_bound()) {
            auto key = memo_key(k);
            auto it = memo_.find(key);
            bool ok = it != memo_.end() ? it->second : memo_.emplace(key, exists(k)).first->second;
            if (ok) out_.insert(head_image(c_, binding_));
            return;
        }
        for_each_match(k, [&] {
            step(k + 1);
            return true;
        });
    }

    const CompiledQuery& c_;
    const AnnotatedDatabase& db_;
    std::vector<std::size_t> order_;
    std::vector<int> head_vars_;
    Binding binding_;
    std::vector<int> newly_;
    std::unordered_map<std::string, bool> memo_;
    std::set<Tuple> out_;
};

// Derivations restricted to a pool of annotated tuples: bag mode consumes each
// token exactly as often as its exponent, set mode requires every token used.
class PoolCounter {
public:
    struct Entry {
        const std::string* relation;
        const Tuple* values;
        std::uint64_t remaining;  // bag mode: uses left; set mode: times used
        const Annotation* token;
    };
    using Visit = std::function<void(const std::vector<std::size_t>&, const Binding&)>;

    PoolCounter(const CompiledQuery& c, std::vector<Entry> pool, bool bag_mode, std::uint64_t limit)
        : c_(c), pool_(std::move(pool)), bag_mode_(bag_mode), limit_(limit) {}

    std::uint64_t run(const Tuple& target, const Visit* visit = nullptr) {
        visit_ = visit;
        images_.assign(c_.body.size(), 0);
        binding_.assign(c_.names.size(), nullptr);
        if (!bind_head(c_, target, binding_)) return 0;
        order_atoms();
        if (!bag_mode_ && pool_.size() > c_.body.size()) return 0;
        unused_ = bag_mode_ ? 0 : pool_.size();
        step(0);
        return count_;
    }

private:
    void order_atoms() {
        std::vector<bool> bound(c_.names.size(), false);
        for (std::size_t v = 0; v < binding_.size(); ++v) bound[v] = binding_[v] != nullptr;
        std::vector<bool> placed(c_.body.size(), false);
        order_.clear();
        for (std::size_t s = 0; s < c_.body.size(); ++s) {
            int best = -1, best_score = -1;
            for (std::size_t i = 0; i < c_.body.size(); ++i) {
                if (placed[i]) continue;
                int score = 0;
                for (const auto& t : c_.body[i].terms) {
                    if (t.var < 0 || bound[t.var]) ++score;
                }
                if (score > best_score) best_score = score, best = static_cast<int>(i);
            }
            placed[best] = true;
            order_.push_back(static_cast<std::size_t>(best));
            for (const auto& t : c_.body[best].terms) {
                if (t.var >= 0) bound[t.var] = true;
            }
        }
    }

    void step(std::size_t k) {
        if (count_ >= limit_) return;
        if (k == order_.size()) {
            if (unused_ == 0) {
                ++count_;
                if (visit_) (*visit_)(images_, binding_);
            }
            return;
        }
        if (!bag_mode_ && unused_ > order_.size() - k) return;
        const auto& atom = c_.body[order_[k]];
        for (std::size_t ei = 0; ei < pool_.size(); ++ei) {
            auto& e = pool_[ei];
            if (*e.relation != *atom.relation) continue;
            images_[order_[k]] = ei;
            if (bag_mode_ && e.remaining == 0) continue;
            std::size_t mark = newly_.size();
            if (unify(atom, *e.values, binding_, newly_)) {
                if (bag_mode_) {
                    --e.remaining;
                } else if (e.remaining++ == 0) {
                    --unused_;
                }
                step(k + 1);
                if (bag_mode_) {
                    ++e.remaining;
                } else if (--e.remaining == 0) {
                    ++unused_;
                }
            }
            undo(binding_, newly_, mark);
            if (count_ >= limit_) return;
        }
    }

    const CompiledQuery& c_;
    std::vector<Entry> pool_;
    bool bag_mode_;
    std::uint64_t limit_;
    std::vector<std::size_t> order_;
    Binding binding_;
    std::vector<int> newly_;
    std::size_t unused_ = 0;
    std::uint64_t count_ = 0;
    std::vector<std::size_t> images_;
    const Visit* visit_ = nullptr;
};

std::vector<PoolCounter::Entry> bag_pool(const Monomial& bag, const AnnotatedDatabase& db) {
    std::vector<PoolCounter::Entry> pool;
    for (const auto& f : bag.factors) {
        const auto& ref = db.locate(f.token);
        pool.push_back({&ref.relation, &db.tuple_of(f.token), f.exponent, &f.token});
    }
    return pool;
}

std::vector<PoolCounter::Entry> set_pool(const std::vector<Annotation>& tokens,
                                         const AnnotatedDatabase& db) {
    std::vector<PoolCounter::Entry> pool;
    for (const auto& token : tokens) {
        const auto& ref = db.locate(token);
        pool.push_back({&ref.relation, &db.tuple_of(token), 0, &token});
    }
    return pool;
}

}  // namespace

std::set<Tuple> evaluate_support(const ConjunctiveQuery& query, const AnnotatedDatabase& db) {
    validate_query(query, &db.schema());
    const CompiledQuery c = compile(query);
    return SupportEvaluator(c, db).run();
}

std::uint64_t count_bag_derivations(const ConjunctiveQuery& query, const Tuple& target,
                                    const Monomial& bag, const AnnotatedDatabase& db,
                                    std::uint64_t limit) {
    if (limit == 0) return 0;
    if (bag.degree() != query.body.size()) return 0;
    const CompiledQuery c = compile(query);
    return PoolCounter(c, bag_pool(bag, db), true, limit).run(target);
}

std::uint64_t count_set_derivations(const ConjunctiveQuery& query, const Tuple& target,
                                    const std::vector<Annotation>& support,
                                    const AnnotatedDatabase& db, std::uint64_t limit) {
    if (limit == 0) return 0;
    const CompiledQuery c = compile(query);
    std::vector<Annotation> tokens = support;
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return PoolCounter(c, set_pool(tokens, db), false, limit).run(target);
}

void KExample::validate() const {
    if (!input) throw Error(ErrorCode::InvalidArgument, "example has no input database");
    for (const auto& row : output) {
        if (row.tuple.size() != output.front().tuple.size()) {
            throw Error(ErrorCode::SchemaMismatch, "example tuples of different arity");
        }
        if (row.provenance.kind != kind) {
            throw Error(ErrorCode::KindMismatch, "example polynomial kind differs from example kind");
        }
        validate_shape(row.provenance);
        for (const auto& m : row.provenance.monomials) {
            for (const auto& f : m.factors) input->locate(f.token);
        }
    }
}

bool monomial_realized(const ConjunctiveQuery& query, const Tuple& tuple, const Monomial& monomial,
                       const AnnotatedDatabase& db, SemiringKind kind) {
    const std::uint64_t need = keeps_coefficients(kind) ? monomial.coefficient : 1;
    if (keeps_exponents(kind)) {
        return count_bag_derivations(query, tuple, monomial, db, need) >= need;
    }
    return count_set_derivations(query, tuple, monomial.support(), db, need) >= need;
}

bool is_consistent(const ConjunctiveQuery& query, const KExample& example) {
    const auto& db = *example.input;
    for (const auto& atom : query.body) {
        if (!db.schema().contains(atom.relation) ||
            db.schema().arity(atom.relation) != atom.terms.size()) {
            return false;
        }
    }
    for (const auto& row : example.output) {
        if (row.tuple.size() != query.head.terms.size()) return false;
        for (const auto& m : row.provenance.monomials) {
            if (!monomial_realized(query, row.tuple, m, db, example.kind)) return false;
        }
    }
    return true;
}

std::vector<Derivation> witnessing_derivations(const ConjunctiveQuery& query, const Tuple& target,
                                               const Monomial& monomial,
                                               const AnnotatedDatabase& db, SemiringKind kind,
                                               std::uint64_t cap) {
    std::vector<Derivation> out;
    if (cap == 0) return out;
    const CompiledQuery c = compile(query);
    const bool bag_mode = keeps_exponents(kind);
    if (bag_mode && monomial.degree() != query.body.size()) return out;
    const std::vector<Annotation> support = monomial.support();
    auto pool = bag_mode ? bag_pool(monomial, db) : set_pool(support, db);
    const auto& entries = pool;
    PoolCounter::Visit visit = [&](const std::vector<std::size_t>& images, const Binding& b) {
        Derivation d;
        for (std::size_t i : images) d.images.push_back(*entries[i].token);
        for (std::size_t v = 0; v < c.names.size(); ++v) d.binding.emplace(c.names[v], *b[v]);
        out.push_back(std::move(d));
    };
    PoolCounter counter(c, pool, bag_mode, cap);
    counter.run(target, &visit);
    return out;
}

ConsistencyChecker::ConsistencyChecker(const KExample& example) : example_(example) {
    for (std::size_t r = 0; r < example.output.size(); ++r) {
        for (std::size_t m = 0; m < example.output[r].provenance.monomials.size(); ++m) {
            order_.emplace_back(r, m);
        }
    }
}

bool ConsistencyChecker::operator()(const ConjunctiveQuery& query) {
    ++checks_;
    const auto& db = *example_.input;
    for (const auto& atom : query.body) {
        if (!db.schema().contains(atom.relation) ||
            db.schema().arity(atom.relation) != atom.terms.size()) {
            return false;
        }
    }
    for (std::size_t i = 0; i < order_.size(); ++i) {
        const auto [r, m] = order_[i];
        const auto& row = example_.output[r];
        if (row.tuple.size() != query.head.terms.size() ||
            !monomial_realized(query, row.tuple, row.provenance.monomials[m], db, example_.kind)) {
            std::rotate(order_.begin(), order_.begin() + i, order_.begin() + i + 1);
            return false;
        }
    }
    return true;
}

}  // namespace qbe
