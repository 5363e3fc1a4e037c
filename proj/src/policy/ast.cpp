#include "capsule/policy/ast.hpp"

#include <algorithm>
#include <sstream>

#include "capsule/errors.hpp"

namespace capsule::policy {

Term Term::principal(std::string n) {
    Term t;
    t.kind = Kind::ConstPrincipal;
    t.name = std::move(n);
    return t;
}

Term Term::string_const(std::string s) {
    Term t;
    t.kind = Kind::ConstString;
    t.str = std::move(s);
    return t;
}

Term Term::number(int64_t n) {
    Term t;
    t.kind = Kind::ConstNumber;
    t.num = n;
    return t;
}

Term Term::variable(std::string n, BaseType ty) {
    Term t;
    t.kind = Kind::Variable;
    t.name = std::move(n);
    t.var_type = ty;
    return t;
}

BaseType Term::type() const {
    switch (kind) {
        case Kind::ConstPrincipal: return BaseType::Principal;
        case Kind::ConstString: return BaseType::String;
        case Kind::ConstNumber: return BaseType::Number;
        case Kind::Variable: return var_type;
    }
    return BaseType::Principal;
}

bool Constraint::operator==(const Constraint& o) const {
    if (op != o.op || operands != o.operands) return false;
    if (children.size() != o.children.size()) return false;
    for (size_t i = 0; i < children.size(); ++i)
        if (!(*children[i] == *o.children[i])) return false;
    return true;
}

const int64_t* StateSpec::find(const std::string& var) const {
    for (const auto& [k, v] : bindings)
        if (k == var) return &v;
    return nullptr;
}

void StateSpec::set(const std::string& var, int64_t value) {
    for (auto& [k, v] : bindings) {
        if (k == var) {
            v = value;
            return;
        }
    }
    bindings.emplace_back(var, value);
}

// ---- encoding ----

void encode_term(Encoder& enc, const Term& t) {
    enc.put_u8(uint8_t(t.kind));
    switch (t.kind) {
        case Term::Kind::ConstPrincipal: enc.put_string(t.name); break;
        case Term::Kind::ConstString: enc.put_string(t.str); break;
        case Term::Kind::ConstNumber: enc.put_i64(t.num); break;
        case Term::Kind::Variable:
            enc.put_string(t.name);
            enc.put_u8(uint8_t(t.var_type));
            break;
    }
}

Term decode_term(Decoder& dec) {
    Term t;
    t.kind = Term::Kind(dec.get_u8());
    switch (t.kind) {
        case Term::Kind::ConstPrincipal: t.name = dec.get_string(); break;
        case Term::Kind::ConstString: t.str = dec.get_string(); break;
        case Term::Kind::ConstNumber: t.num = dec.get_i64(); break;
        case Term::Kind::Variable:
            t.name = dec.get_string();
            t.var_type = BaseType(dec.get_u8());
            break;
        default: throw DecodeError("bad term kind");
    }
    return t;
}

static void encode_predicate(Encoder& enc, const Predicate& p) {
    enc.put_string(p.name);
    enc.put_u32(uint32_t(p.args.size()));
    for (const auto& a : p.args) encode_term(enc, a);
}

static Predicate decode_predicate(Decoder& dec) {
    Predicate p;
    p.name = dec.get_string();
    uint32_t n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i) p.args.push_back(decode_term(dec));
    return p;
}

void encode_fact(Encoder& enc, const Fact& f) {
    enc.put_u8(f.delegate ? 1 : 0);
    if (f.delegate) encode_term(enc, *f.delegate);
    encode_predicate(enc, f.pred);
}

Fact decode_fact(Decoder& dec) {
    Fact f;
    if (dec.get_u8()) f.delegate = decode_term(dec);
    f.pred = decode_predicate(dec);
    return f;
}

static void encode_numref(Encoder& enc, const NumRef& r) {
    enc.put_u8(uint8_t(r.kind));
    if (r.kind == NumRef::Kind::Literal)
        enc.put_i64(r.value);
    else
        enc.put_string(r.name);
}

static NumRef decode_numref(Decoder& dec) {
    NumRef r;
    r.kind = NumRef::Kind(dec.get_u8());
    if (r.kind == NumRef::Kind::Literal)
        r.value = dec.get_i64();
    else
        r.name = dec.get_string();
    return r;
}

static void encode_constraint(Encoder& enc, const Constraint& c) {
    enc.put_u8(uint8_t(c.op));
    enc.put_u32(uint32_t(c.operands.size()));
    for (const auto& o : c.operands) encode_numref(enc, o);
    enc.put_u32(uint32_t(c.children.size()));
    for (const auto& ch : c.children) encode_constraint(enc, *ch);
}

static Constraint decode_constraint(Decoder& dec) {
    Constraint c;
    c.op = Constraint::Op(dec.get_u8());
    uint32_t n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i) c.operands.push_back(decode_numref(dec));
    n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i)
        c.children.push_back(std::make_shared<Constraint>(decode_constraint(dec)));
    return c;
}

static void encode_state(Encoder& enc, const StateSpec& s) {
    enc.put_u32(uint32_t(s.bindings.size()));
    for (const auto& [k, v] : s.bindings) {
        enc.put_string(k);
        enc.put_i64(v);
    }
    enc.put_u32(uint32_t(s.updates.size()));
    for (const auto& u : s.updates) {
        enc.put_string(u.var);
        encode_numref(enc, u.expr.first);
        enc.put_u32(uint32_t(u.expr.rest.size()));
        for (const auto& [sign, ref] : u.expr.rest) {
            enc.put_u8(sign > 0 ? 0 : 1);
            encode_numref(enc, ref);
        }
    }
}

static StateSpec decode_state(Decoder& dec) {
    StateSpec s;
    uint32_t n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i) {
        std::string k = dec.get_string();
        int64_t v = dec.get_i64();
        s.bindings.emplace_back(std::move(k), v);
    }
    n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i) {
        StateSpec::Update u;
        u.var = dec.get_string();
        u.expr.first = decode_numref(dec);
        uint32_t m = dec.get_u32();
        for (uint32_t j = 0; j < m; ++j) {
            int sign = dec.get_u8() == 0 ? 1 : -1;
            u.expr.rest.emplace_back(sign, decode_numref(dec));
        }
        s.updates.push_back(std::move(u));
    }
    return s;
}

Bytes Assertion::canonical() const {
    Encoder enc;
    enc.put_string(issuer);
    encode_fact(enc, fact);
    enc.put_u32(uint32_t(conditions.size()));
    for (const auto& c : conditions) encode_predicate(enc, c);
    enc.put_u8(constraint ? 1 : 0);
    if (constraint) encode_constraint(enc, *constraint);
    enc.put_u8(state ? 1 : 0);
    if (state) encode_state(enc, *state);
    enc.put_u8(capsule_signed ? 1 : 0);
    enc.put_bytes(lineage);
    return enc.take();
}

Bytes Assertion::encode() const {
    Encoder enc;
    enc.put_bytes(canonical());
    enc.put_bytes(signature);
    return enc.take();
}

Assertion Assertion::decode(Decoder& dec) {
    Bytes canon = dec.get_bytes();
    Bytes sig = dec.get_bytes();
    Decoder inner(canon);
    Assertion a;
    a.issuer = inner.get_string();
    a.fact = decode_fact(inner);
    uint32_t n = inner.get_u32();
    for (uint32_t i = 0; i < n; ++i) a.conditions.push_back(decode_predicate(inner));
    if (inner.get_u8()) a.constraint = decode_constraint(inner);
    if (inner.get_u8()) a.state = decode_state(inner);
    a.capsule_signed = inner.get_u8() != 0;
    a.lineage = inner.get_bytes();
    inner.expect_done();
    a.signature = std::move(sig);
    return a;
}

bool Assertion::same_statement(const Assertion& o) const {
    return issuer == o.issuer && fact == o.fact && conditions == o.conditions &&
           ((!constraint && !o.constraint) ||
            (constraint && o.constraint && *constraint == *o.constraint)) &&
           state == o.state;
}

// ---- printing ----

std::string print_term(const Term& t) {
    switch (t.kind) {
        case Term::Kind::ConstPrincipal: return t.name;
        case Term::Kind::ConstString: return "\"" + t.str + "\"";
        case Term::Kind::ConstNumber: return std::to_string(t.num);
        case Term::Kind::Variable:
            switch (t.var_type) {
                case BaseType::Principal: return "p?" + t.name;
                case BaseType::Number: return "n?" + t.name;
                case BaseType::String: return "s?" + t.name;
            }
    }
    return "?";
}

std::string print_predicate(const Predicate& p) {
    std::string out = p.name + "(";
    for (size_t i = 0; i < p.args.size(); ++i) {
        if (i) out += ", ";
        out += print_term(p.args[i]);
    }
    return out + ")";
}

std::string print_fact(const Fact& f) {
    if (f.delegate)
        return print_term(*f.delegate) + " can say " + print_predicate(f.pred);
    return print_predicate(f.pred);
}

static std::string print_numref(const NumRef& r) {
    switch (r.kind) {
        case NumRef::Kind::Literal: return std::to_string(r.value);
        case NumRef::Kind::Variable: return "n?" + r.name;
        case NumRef::Kind::Name: return r.name;
    }
    return "?";
}

std::string print_constraint(const Constraint& c) {
    switch (c.op) {
        case Constraint::Op::LessThan:
            return print_numref(c.operands[0]) + " < " + print_numref(c.operands[1]);
        case Constraint::Op::GreaterThan:
            return print_numref(c.operands[0]) + " > " + print_numref(c.operands[1]);
        case Constraint::Op::Equals:
            return print_numref(c.operands[0]) + " = " + print_numref(c.operands[1]);
        case Constraint::Op::Between:
            return "between(" + print_numref(c.operands[0]) + ", " +
                   print_numref(c.operands[1]) + ", " + print_numref(c.operands[2]) + ")";
        case Constraint::Op::And:
            return "(" + print_constraint(*c.children[0]) + " and " +
                   print_constraint(*c.children[1]) + ")";
        case Constraint::Op::Or:
            return "(" + print_constraint(*c.children[0]) + " or " +
                   print_constraint(*c.children[1]) + ")";
    }
    return "?";
}

static std::string print_update_expr(const UpdateExpr& e) {
    std::string out = print_numref(e.first);
    for (const auto& [sign, ref] : e.rest)
        out += std::string(sign > 0 ? " + " : " - ") + print_numref(ref);
    return out;
}

std::string Assertion::print() const {
    std::string out = issuer + " says " + print_fact(fact);
    for (size_t i = 0; i < conditions.size(); ++i)
        out += (i == 0 ? " if " : ", ") + print_predicate(conditions[i]);
    if (constraint) out += " where " + print_constraint(*constraint);
    if (state) {
        out += " state (";
        for (size_t i = 0; i < state->bindings.size(); ++i) {
            if (i) out += ", ";
            out += state->bindings[i].first + " = " +
                   std::to_string(state->bindings[i].second);
        }
        for (const auto& u : state->updates)
            out += ", update(" + u.var + ", " + print_update_expr(u.expr) + ")";
        out += ")";
    }
    return out;
}

// ---- database ----

void PolicyDatabase::add(Assertion a) {
    Bytes enc = a.encode();
    for (const auto& existing : assertions)
        if (existing.encode() == enc) return;
    assertions.push_back(std::move(a));
    ++version;
}

void PolicyDatabase::replace(size_t index, Assertion a) {
    if (index >= assertions.size()) throw Error("assertion index out of range");
    assertions[index] = std::move(a);
    ++version;
}

void PolicyDatabase::remove(size_t index) {
    if (index >= assertions.size()) throw Error("assertion index out of range");
    assertions.erase(assertions.begin() + long(index));
    ++version;
}

Bytes PolicyDatabase::encode() const {
    Encoder enc;
    enc.put_u64(version);
    enc.put_u32(uint32_t(assertions.size()));
    for (const auto& a : assertions) enc.put_bytes(a.encode());
    return enc.take();
}

PolicyDatabase PolicyDatabase::decode(const Bytes& b) {
    Decoder dec(b);
    PolicyDatabase db;
    db.version = dec.get_u64();
    uint32_t n = dec.get_u32();
    for (uint32_t i = 0; i < n; ++i) {
        Bytes one = dec.get_bytes();
        Decoder d2(one);
        db.assertions.push_back(Assertion::decode(d2));
    }
    dec.expect_done();
    return db;
}

std::string PolicyDatabase::print() const {
    std::string out;
    for (const auto& a : assertions) out += a.print() + "\n";
    return out;
}

}  // namespace capsule::policy
