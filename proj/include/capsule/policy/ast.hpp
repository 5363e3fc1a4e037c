#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "capsule/bytes.hpp"

namespace capsule::policy {

enum class BaseType : uint8_t { Principal = 0, Number = 1, String = 2 };

// A term is a constant (principal name, string, integer) or a typed variable.
struct Term {
    enum class Kind : uint8_t { ConstPrincipal, ConstString, ConstNumber, Variable };

    Kind kind = Kind::ConstPrincipal;
    std::string name;         // principal constant or variable name
    std::string str;          // string constant
    int64_t num = 0;          // integer constant
    BaseType var_type = BaseType::Principal;

    static Term principal(std::string n);
    static Term string_const(std::string s);
    static Term number(int64_t n);
    static Term variable(std::string n, BaseType t);

    bool is_const() const { return kind != Kind::Variable; }
    BaseType type() const;
    bool operator==(const Term&) const = default;
};

struct Predicate {
    std::string name;
    std::vector<Term> args;
    bool operator==(const Predicate&) const = default;
};

// A fact is a predicate, optionally wrapped in a single "can say" delegation.
// The delegate may itself be a variable (e.g. any service may certify its
// own machines). Nesting deeper than one level is rejected at parse time.
struct Fact {
    std::optional<Term> delegate;
    Predicate pred;
    bool is_delegation() const { return delegate.has_value(); }
    bool operator==(const Fact&) const = default;
};

// Numeric operand inside a constraint or update expression: an integer
// literal, a numeric variable (n?x), or a named reference resolved against
// the matched assertion's state bindings or the evaluation environment
// (e.g. Limit, CurrentTime).
struct NumRef {
    enum class Kind : uint8_t { Literal, Variable, Name };
    Kind kind = Kind::Literal;
    int64_t value = 0;
    std::string name;
    bool operator==(const NumRef&) const = default;
};

struct Constraint {
    enum class Op : uint8_t { LessThan, GreaterThan, Equals, Between, And, Or };
    Op op = Op::LessThan;
    std::vector<NumRef> operands;               // comparison operands
    std::vector<std::shared_ptr<Constraint>> children;  // for And/Or
    bool operator==(const Constraint& o) const;
};

// expr over state variables, argument variables, literals, with + and -.
struct UpdateExpr {
    // first operand, then (sign, operand) pairs; sign +1 or -1.
    NumRef first;
    std::vector<std::pair<int, NumRef>> rest;
    bool operator==(const UpdateExpr&) const = default;
};

struct StateSpec {
    std::vector<std::pair<std::string, int64_t>> bindings;  // ordered
    struct Update {
        std::string var;
        UpdateExpr expr;
        bool operator==(const Update&) const = default;
    };
    std::vector<Update> updates;

    const int64_t* find(const std::string& var) const;
    void set(const std::string& var, int64_t value);
    bool operator==(const StateSpec&) const = default;
};

// One policy statement: issuer P, fact F, conditional facts CF,
// constraint C, optional state S, plus the signature over the canonical
// encoding of everything else.
struct Assertion {
    std::string issuer;
    Fact fact;
    std::vector<Predicate> conditions;
    std::optional<Constraint> constraint;
    std::optional<StateSpec> state;

    Bytes signature;
    // Set when the framework's capsule identity countersigned a state-updated
    // descendant of a user-signed assertion; lineage is the digest of the
    // original canonical encoding.
    bool capsule_signed = false;
    Bytes lineage;

    // Canonical encoding of all fields except the signature itself.
    Bytes canonical() const;
    // Full encoding including signature metadata.
    Bytes encode() const;
    static Assertion decode(Decoder& dec);

    std::string print() const;
    bool same_statement(const Assertion& o) const;
    bool operator==(const Assertion&) const = default;
};

struct PolicyDatabase {
    std::vector<Assertion> assertions;
    uint64_t version = 0;

    // Appends unless a byte-identical assertion is already present.
    void add(Assertion a);
    void replace(size_t index, Assertion a);
    void remove(size_t index);

    Bytes encode() const;
    static PolicyDatabase decode(const Bytes& b);

    std::string print() const;
};

std::string print_fact(const Fact& f);
std::string print_predicate(const Predicate& p);
std::string print_term(const Term& t);
std::string print_constraint(const Constraint& c);

void encode_term(Encoder& enc, const Term& t);
Term decode_term(Decoder& dec);
void encode_fact(Encoder& enc, const Fact& f);
Fact decode_fact(Decoder& dec);

}  // namespace capsule::policy
