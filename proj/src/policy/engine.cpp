#include "capsule/policy/engine.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "capsule/errors.hpp"

namespace capsule::policy {

void sign_assertion(Assertion& a, const crypto::SigningKey& issuer_key) {
    a.capsule_signed = false;
    a.lineage.clear();
    a.signature = issuer_key.sign(a.canonical());
}

void countersign_assertion(Assertion& a, const Assertion& original,
                           const crypto::SigningKey& capsule_key) {
    a.capsule_signed = true;
    a.lineage = original.lineage.empty() ? crypto::sha256(original.canonical())
                                         : original.lineage;
    a.signature = capsule_key.sign(a.canonical());
}

bool verify_assertion(const Assertion& a, const KeyStore& keys) {
    if (a.signature.empty()) return false;
    if (a.capsule_signed) {
        if (!keys.capsule_key) return false;
        return crypto::verify_signature(*keys.capsule_key, a.canonical(), a.signature);
    }
    const Bytes* key = keys.find(a.issuer);
    if (!key) return false;
    return crypto::verify_signature(*key, a.canonical(), a.signature);
}

ClauseSet to_datalog(const PolicyDatabase& db, const std::vector<Assertion>& supporting,
                     const ResolveEnv& env) {
    ClauseSet out;
    auto convert = [&](const Assertion& a, size_t index, bool from_supporting) {
        if (env.keys && !verify_assertion(a, *env.keys))
            throw SignatureError("assertion " + std::to_string(index) +
                                 (from_supporting ? " (supporting)" : "") +
                                 " has an invalid signature");
        Clause c;
        c.head.speaker = Term::principal(a.issuer);
        c.head.pred = a.fact.pred;
        if (a.fact.delegate) {
            Literal d;
            d.speaker = *a.fact.delegate;
            d.pred = a.fact.pred;
            c.delegated = std::move(d);
        }
        for (const auto& cond : a.conditions) {
            Literal l;
            l.speaker = Term::principal(a.issuer);
            l.pred = cond;
            c.body.push_back(std::move(l));
        }
        c.constraint = a.constraint;
        c.state = a.state;
        c.source_index = index;
        c.from_supporting = from_supporting;
        out.clauses.push_back(std::move(c));
    };
    for (size_t i = 0; i < db.assertions.size(); ++i)
        convert(db.assertions[i], i, false);
    for (size_t i = 0; i < supporting.size(); ++i)
        convert(supporting[i], db.assertions.size() + i, true);
    return out;
}

namespace {

// Follows variable bindings to a representative term.
Term walk(const Term& t, const Binding& b) {
    Term cur = t;
    while (cur.kind == Term::Kind::Variable) {
        auto it = b.find(cur.name);
        if (it == b.end()) return cur;
        cur = it->second;
    }
    return cur;
}

bool unify_terms(const Term& a, const Term& b, Binding& binding) {
    Term x = walk(a, binding);
    Term y = walk(b, binding);
    if (x.kind == Term::Kind::Variable && y.kind == Term::Kind::Variable) {
        if (x.name == y.name) return true;
        if (x.var_type != y.var_type) return false;
        binding[x.name] = y;
        return true;
    }
    if (x.kind == Term::Kind::Variable) {
        if (x.var_type != y.type()) return false;
        binding[x.name] = y;
        return true;
    }
    if (y.kind == Term::Kind::Variable) {
        if (y.var_type != x.type()) return false;
        binding[y.name] = x;
        return true;
    }
    return x == y;
}

bool unify_literal(const Literal& pat, const Literal& goal, Binding& binding) {
    if (pat.pred.name != goal.pred.name) return false;
    if (pat.pred.args.size() != goal.pred.args.size()) return false;
    if (!unify_terms(pat.speaker, goal.speaker, binding)) return false;
    for (size_t i = 0; i < pat.pred.args.size(); ++i)
        if (!unify_terms(pat.pred.args[i], goal.pred.args[i], binding)) return false;
    return true;
}

// Canonical string of a literal under a binding with variables numbered by
// first occurrence. Used for ancestor-loop pruning.
std::string canonical_goal(const Literal& l, const Binding& b) {
    std::string out;
    std::map<std::string, int> var_ids;
    auto term_str = [&](const Term& t0) {
        Term t = walk(t0, b);
        if (t.kind == Term::Kind::Variable) {
            auto [it, _] = var_ids.emplace(t.name, int(var_ids.size()));
            return "_" + std::to_string(it->second);
        }
        return print_term(t);
    };
    out += term_str(l.speaker);
    out += "|" + l.pred.name + "(";
    for (const auto& a : l.pred.args) out += term_str(a) + ",";
    out += ")";
    return out;
}

struct ProofAcc {
    std::vector<size_t> used;
    std::vector<MatchedState> matched;
};

class Resolver {
public:
    Resolver(const ClauseSet& cs, const ResolveEnv& env) : cs_(cs), env_(env) {}

    bool prove(const Literal& goal, bool allow_delegation, Binding& binding,
               ProofAcc& acc, std::multiset<std::string>& ancestors,
               const std::function<bool(Binding&)>& k) {
        std::string key = canonical_goal(goal, binding) +
                          (allow_delegation ? "+d" : "-d");
        if (ancestors.count(key)) return false;
        if (ancestors.size() > 256) return false;
        ancestors.insert(key);
        bool ok = false;
        for (const auto& clause : cs_.clauses) {
            if (clause.delegated && !allow_delegation) continue;
            auto [rc, rename_back] = rename(clause);
            Binding trial = binding;
            if (!unify_literal(rc.head, goal, trial)) continue;

            // subgoals: the reified delegation body first (provable without a
            // further delegation step), then the conditions left to right.
            std::vector<std::pair<Literal, bool>> subgoals;
            if (rc.delegated) subgoals.emplace_back(*rc.delegated, false);
            for (const auto& l : rc.body) subgoals.emplace_back(l, true);

            ok = solve_list(subgoals, 0, trial, acc, ancestors, [&](Binding& done) {
                if (rc.constraint &&
                    !eval_constraint(*rc.constraint, done,
                                     rc.state ? &*rc.state : nullptr, env_))
                    return false;
                acc.used.push_back(clause.source_index);
                size_t pushed_state = 0;
                if (clause.state) {
                    MatchedState ms;
                    ms.db_index = clause.source_index;
                    ms.state = *clause.state;
                    // report bindings under the assertion's original names
                    for (const auto& [renamed, orig] : rename_back) {
                        Term v = walk(Term::variable(renamed, BaseType::Number), done);
                        if (v.is_const()) ms.binding[orig] = v;
                    }
                    acc.matched.push_back(std::move(ms));
                    pushed_state = 1;
                }
                // this goal is proven; goals explored by the continuation are
                // siblings, not descendants, so it must not prune them
                ancestors.erase(ancestors.find(key));
                if (k(done)) return true;
                ancestors.insert(key);
                acc.used.pop_back();
                if (pushed_state) acc.matched.pop_back();
                return false;
            });
            if (ok) {
                binding = std::move(trial);
                break;
            }
        }
        if (!ok) ancestors.erase(ancestors.find(key));
        return ok;
    }

private:
    bool solve_list(const std::vector<std::pair<Literal, bool>>& goals, size_t idx,
                    Binding& binding, ProofAcc& acc,
                    std::multiset<std::string>& ancestors,
                    const std::function<bool(Binding&)>& k) {
        if (idx == goals.size()) return k(binding);
        return prove(goals[idx].first, goals[idx].second, binding, acc, ancestors,
                     [&](Binding& b) {
                         return solve_list(goals, idx + 1, b, acc, ancestors, k);
                     });
    }

    // Standardize a clause apart by renaming its variables. Returns the
    // renamed clause and the fresh-name -> original-name map.
    std::pair<Clause, std::map<std::string, std::string>> rename(const Clause& c) {
        ++counter_;
        std::map<std::string, std::string> rename_back;
        auto rn_term = [&](const Term& t) {
            if (t.kind != Term::Kind::Variable) return t;
            std::string fresh = t.name + "@" + std::to_string(counter_);
            rename_back[fresh] = t.name;
            return Term::variable(fresh, t.var_type);
        };
        auto rn_pred = [&](Predicate p) {
            for (auto& a : p.args) a = rn_term(a);
            return p;
        };
        auto rn_lit = [&](Literal l) {
            l.speaker = rn_term(l.speaker);
            l.pred = rn_pred(std::move(l.pred));
            return l;
        };
        Clause out = c;
        out.head = rn_lit(out.head);
        if (out.delegated) out.delegated = rn_lit(*out.delegated);
        for (auto& l : out.body) l = rn_lit(l);
        auto rn_ref = [&](NumRef& r) {
            if (r.kind == NumRef::Kind::Variable) {
                std::string fresh = r.name + "@" + std::to_string(counter_);
                rename_back[fresh] = r.name;
                r.name = fresh;
            }
        };
        std::function<void(Constraint&)> rn_con = [&](Constraint& con) {
            for (auto& o : con.operands) rn_ref(o);
            for (auto& ch : con.children) {
                ch = std::make_shared<Constraint>(*ch);
                rn_con(*ch);
            }
        };
        if (out.constraint) rn_con(*out.constraint);
        if (out.state)
            for (auto& u : out.state->updates) {
                rn_ref(u.expr.first);
                for (auto& [sign, ref] : u.expr.rest) rn_ref(ref);
            }
        return {std::move(out), std::move(rename_back)};
    }

    const ClauseSet& cs_;
    const ResolveEnv& env_;
    uint64_t counter_ = 0;
};

int64_t resolve_numref(const NumRef& r, const Binding& binding, const StateSpec* state,
                       const ResolveEnv& env) {
    switch (r.kind) {
        case NumRef::Kind::Literal: return r.value;
        case NumRef::Kind::Variable: {
            Term t = walk(Term::variable(r.name, BaseType::Number), binding);
            if (t.kind != Term::Kind::ConstNumber)
                throw Error("constraint variable 'n?" + r.name + "' is unbound");
            return t.num;
        }
        case NumRef::Kind::Name:
            if (state) {
                if (const int64_t* v = state->find(r.name)) return *v;
            }
            if (r.name == "CurrentTime") {
                if (!env.current_time)
                    throw Error("CurrentTime is not available in this context");
                return *env.current_time;
            }
            throw Error("unbound state variable '" + r.name + "'");
    }
    throw Error("bad constraint operand");
}

}  // namespace

bool eval_constraint(const Constraint& c, const Binding& binding,
                     const StateSpec* state, const ResolveEnv& env) {
    auto val = [&](const NumRef& r) { return resolve_numref(r, binding, state, env); };
    switch (c.op) {
        case Constraint::Op::LessThan: return val(c.operands[0]) < val(c.operands[1]);
        case Constraint::Op::GreaterThan: return val(c.operands[0]) > val(c.operands[1]);
        case Constraint::Op::Equals: return val(c.operands[0]) == val(c.operands[1]);
        case Constraint::Op::Between: {
            int64_t t = val(c.operands[0]);
            return val(c.operands[1]) <= t && t <= val(c.operands[2]);
        }
        case Constraint::Op::And:
            return eval_constraint(*c.children[0], binding, state, env) &&
                   eval_constraint(*c.children[1], binding, state, env);
        case Constraint::Op::Or:
            return eval_constraint(*c.children[0], binding, state, env) ||
                   eval_constraint(*c.children[1], binding, state, env);
    }
    return false;
}

int64_t eval_update_expr(const UpdateExpr& e, const Binding& binding,
                         const StateSpec& state) {
    ResolveEnv env;
    int64_t acc = resolve_numref(e.first, binding, &state, env);
    for (const auto& [sign, ref] : e.rest)
        acc += sign * resolve_numref(ref, binding, &state, env);
    return acc;
}

Decision resolve(const PolicyDatabase& db, const std::vector<Assertion>& supporting,
                 const std::string& query_issuer, const Predicate& query,
                 const ResolveEnv& env) {
    for (const auto& a : query.args)
        if (!a.is_const()) throw Error("query is not ground");

    ClauseSet cs = to_datalog(db, supporting, env);
    Resolver r(cs, env);

    Literal goal;
    goal.speaker = Term::principal(query_issuer);
    goal.pred = query;

    Binding binding;
    ProofAcc acc;
    std::multiset<std::string> ancestors;
    bool ok = r.prove(goal, true, binding, acc, ancestors,
                      [](Binding&) { return true; });

    Decision d;
    d.granted = ok;
    if (!ok) {
        d.reason = "no derivation of " + query_issuer + " says " +
                   print_predicate(query);
        return d;
    }
    for (size_t idx : acc.used) {
        d.proof_indices.push_back(idx);
        d.proof.push_back(idx < db.assertions.size()
                              ? db.assertions[idx]
                              : supporting[idx - db.assertions.size()]);
    }
    d.matched_state = std::move(acc.matched);
    return d;
}

void apply_state_updates(PolicyDatabase& db, const MatchedState& matched,
                         const crypto::SigningKey& capsule_key) {
    if (matched.db_index >= db.assertions.size())
        throw Error("matched stateful assertion is not in the policy database");
    const Assertion& original = db.assertions[matched.db_index];
    if (!original.state) throw Error("matched assertion carries no state");

    StateSpec next = *original.state;
    for (const auto& u : matched.state.updates) {
        int64_t v = eval_update_expr(u.expr, matched.binding, matched.state);
        if (v < 0)
            throw Error("state update would drive '" + u.var + "' below zero");
        next.set(u.var, v);
    }

    Assertion replacement = original;
    replacement.state = std::move(next);
    countersign_assertion(replacement, original, capsule_key);
    db.replace(matched.db_index, std::move(replacement));
}

std::pair<Assertion, Assertion> split_constraint(const Assertion& a,
                                                 int64_t transfer_amount) {
    if (!a.state) throw Error("assertion carries no state to split");
    // The decomposable variable is the target of an update rule (a budget or
    // count consumed across invocations).
    const StateSpec::Update* upd = nullptr;
    for (const auto& u : a.state->updates) {
        upd = &u;
        break;
    }
    if (!upd) throw Error("assertion state is not decomposable (no update rule)");
    const int64_t* cur = a.state->find(upd->var);
    if (!cur) throw Error("decomposable variable has no binding");
    if (transfer_amount < 0 || transfer_amount > *cur)
        throw Error("transfer amount out of range [0, " + std::to_string(*cur) + "]");

    Assertion retained = a;
    Assertion transferred = a;
    retained.state->set(upd->var, *cur - transfer_amount);
    transferred.state->set(upd->var, transfer_amount);
    retained.signature.clear();
    transferred.signature.clear();
    return {std::move(retained), std::move(transferred)};
}

}  // namespace capsule::policy
