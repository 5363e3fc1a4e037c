#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capsule/crypto.hpp"
#include "capsule/policy/ast.hpp"

namespace capsule::policy {

// name -> DER public key. Used to verify assertion signatures.
struct KeyStore {
    std::map<std::string, Bytes> principals;
    // Capsule identity key; accepted as countersigner of state-updated
    // descendants of user-signed assertions.
    std::optional<Bytes> capsule_key;

    const Bytes* find(const std::string& name) const {
        auto it = principals.find(name);
        return it == principals.end() ? nullptr : &it->second;
    }
};

void sign_assertion(Assertion& a, const crypto::SigningKey& issuer_key);
// Re-sign a framework-modified assertion with the capsule identity key,
// recording the lineage digest of the original.
void countersign_assertion(Assertion& a, const Assertion& original,
                           const crypto::SigningKey& capsule_key);
bool verify_assertion(const Assertion& a, const KeyStore& keys);

// One Datalog clause: head holds when the delegation body (if any) is
// derivable without further delegation, every condition literal is
// derivable, and the constraint evaluates true under the binding.
struct Literal {
    Term speaker;  // constant principal or principal variable
    Predicate pred;
};

struct Clause {
    Literal head;                     // speaker is always the issuer constant
    std::optional<Literal> delegated; // reified vouching body
    std::vector<Literal> body;        // conditions, speaker = issuer
    std::optional<Constraint> constraint;
    std::optional<StateSpec> state;
    size_t source_index = 0;          // index into db (or supporting, offset by db size)
    bool from_supporting = false;
};

struct ClauseSet {
    std::vector<Clause> clauses;
};

// Environment injected by the base layer at resolution start.
struct ResolveEnv {
    const KeyStore* keys = nullptr;  // nullptr skips signature verification
    std::optional<int64_t> current_time;
};

// Translates db + supporting assertions into clauses. Signature-invalid
// assertions are rejected with their index.
ClauseSet to_datalog(const PolicyDatabase& db, const std::vector<Assertion>& supporting,
                     const ResolveEnv& env);

using Binding = std::map<std::string, Term>;

struct MatchedState {
    size_t db_index;       // assertion position in the database
    StateSpec state;       // the spec as matched
    Binding binding;       // variable values from the proof
};

struct Decision {
    bool granted = false;
    std::string reason;                  // set when denied
    std::vector<Assertion> proof;        // assertions used, in use order
    std::vector<size_t> proof_indices;   // db indices (supporting offset by db size)
    std::vector<MatchedState> matched_state;

    explicit operator bool() const { return granted; }
};

// Top-down resolution of a ground query `issuer says fact` against
// db ∪ supporting. Deterministic: first proof in database order wins.
Decision resolve(const PolicyDatabase& db, const std::vector<Assertion>& supporting,
                 const std::string& query_issuer, const Predicate& query,
                 const ResolveEnv& env = {});

// Applies the Update rules of a matched stateful assertion: the old
// assertion is removed, the state-updated replacement is countersigned by
// the capsule key and inserted in its place, and the version bumps.
// Throws Error if an update would drive a state variable below zero.
void apply_state_updates(PolicyDatabase& db, const MatchedState& matched,
                         const crypto::SigningKey& capsule_key);

// Splits a decomposable stateful constraint (a budget) for exo-leasing.
// Both results carry the structure of `a` with only the state binding
// changed; signatures are cleared for the caller to countersign.
std::pair<Assertion, Assertion> split_constraint(const Assertion& a,
                                                 int64_t transfer_amount);

// Evaluates a constraint under a variable binding, the assertion's state
// bindings, and the environment. Throws Error on an unresolvable name.
bool eval_constraint(const Constraint& c, const Binding& binding,
                     const StateSpec* state, const ResolveEnv& env);

int64_t eval_update_expr(const UpdateExpr& e, const Binding& binding,
                         const StateSpec& state);

}  // namespace capsule::policy
