#include "capsule/policy/parser.hpp"

#include <cctype>
#include <functional>
#include <map>
#include <set>

#include "capsule/errors.hpp"

namespace capsule::policy {

namespace {

struct Token {
    enum class Kind { Ident, Variable, Number, String, Punct, End };
    Kind kind = Kind::End;
    std::string text;       // ident name, punct char, string body
    int64_t num = 0;
    BaseType var_type = BaseType::Principal;
    int line = 0, col = 0;
};

class Lexer {
public:
    Lexer(std::string_view src, int line) : src_(src), line_(line) {}

    Token next() {
        skip_ws();
        Token t;
        t.line = line_;
        t.col = int(pos_) + 1;
        if (pos_ >= src_.size()) return t;
        char c = src_[pos_];
        if (std::isalpha(uint8_t(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(uint8_t(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            std::string word(src_.substr(start, pos_ - start));
            // p?x / n?x / s?x typed variables
            if (pos_ < src_.size() && src_[pos_] == '?' && word.size() == 1 &&
                (word == "p" || word == "n" || word == "s")) {
                ++pos_;
                size_t vstart = pos_;
                while (pos_ < src_.size() &&
                       (std::isalnum(uint8_t(src_[pos_])) || src_[pos_] == '_'))
                    ++pos_;
                if (vstart == pos_) fail("expected variable name after '?'", t);
                t.kind = Token::Kind::Variable;
                t.text = std::string(src_.substr(vstart, pos_ - vstart));
                t.var_type = word == "p"   ? BaseType::Principal
                             : word == "n" ? BaseType::Number
                                           : BaseType::String;
                return t;
            }
            t.kind = Token::Kind::Ident;
            t.text = std::move(word);
            return t;
        }
        if (std::isdigit(uint8_t(c)) || (c == '-' && pos_ + 1 < src_.size() &&
                                         std::isdigit(uint8_t(src_[pos_ + 1])))) {
            size_t start = pos_;
            if (c == '-') ++pos_;
            while (pos_ < src_.size() && std::isdigit(uint8_t(src_[pos_]))) ++pos_;
            t.kind = Token::Kind::Number;
            t.num = std::stoll(std::string(src_.substr(start, pos_ - start)));
            return t;
        }
        if (c == '"') {
            ++pos_;
            std::string body;
            while (pos_ < src_.size() && src_[pos_] != '"') body += src_[pos_++];
            if (pos_ >= src_.size()) fail("unterminated string", t);
            ++pos_;
            t.kind = Token::Kind::String;
            t.text = std::move(body);
            return t;
        }
        static const std::string puncts = "(),<>=+-";
        if (puncts.find(c) != std::string::npos) {
            ++pos_;
            t.kind = Token::Kind::Punct;
            t.text = std::string(1, c);
            return t;
        }
        fail(std::string("unexpected character '") + c + "'", t);
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(uint8_t(src_[pos_]))) ++pos_;
    }
    [[noreturn]] void fail(const std::string& msg, const Token& t) {
        throw ParseError(msg, t.line, int(pos_) + 1);
        (void)t;
    }
    std::string_view src_;
    size_t pos_ = 0;
    int line_;
};

class LineParser {
public:
    LineParser(std::string_view line, int lineno) : lex_(line, lineno) {
        advance();
    }

    Assertion parse() {
        Assertion a;
        a.issuer = expect_principal_name("issuer principal");
        expect_keyword("says");
        a.fact = parse_fact(false);
        if (is_keyword("if")) {
            advance();
            while (true) {
                a.conditions.push_back(parse_condition());
                if (is_punct(",")) {
                    advance();
                    continue;
                }
                break;
            }
        }
        if (is_keyword("where")) {
            advance();
            a.constraint = parse_constraint();
        }
        if (is_keyword("state")) {
            advance();
            a.state = parse_state();
        }
        if (cur_.kind != Token::Kind::End)
            fail("unexpected trailing token '" + cur_.text + "'");
        validate_variable_scope(a);
        return a;
    }

private:
    void advance() { cur_ = lex_.next(); }

    bool is_keyword(std::string_view kw) const {
        return cur_.kind == Token::Kind::Ident && cur_.text == kw;
    }
    bool is_punct(std::string_view p) const {
        return cur_.kind == Token::Kind::Punct && cur_.text == p;
    }
    void expect_keyword(std::string_view kw) {
        if (!is_keyword(kw)) fail(std::string("expected '") + std::string(kw) + "'");
        advance();
    }
    void expect_punct(std::string_view p) {
        if (!is_punct(p)) fail(std::string("expected '") + std::string(p) + "'");
        advance();
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, cur_.line, cur_.col);
    }

    std::string expect_principal_name(const std::string& what) {
        if (cur_.kind != Token::Kind::Ident || !std::isupper(uint8_t(cur_.text[0])))
            fail("expected " + what + " (capitalized name)");
        std::string name = cur_.text;
        advance();
        return name;
    }

    // fact := Name "(" terms ")" | principal-or-var "can say" fact
    Fact parse_fact(bool inside_delegation) {
        Fact f;
        if (cur_.kind == Token::Kind::Variable) {
            if (cur_.var_type != BaseType::Principal)
                fail("delegate variable must be a principal variable");
            Term delegate = Term::variable(cur_.text, BaseType::Principal);
            advance();
            expect_keyword("can");
            expect_keyword("say");
            return finish_delegation(std::move(delegate), inside_delegation);
        }
        if (cur_.kind != Token::Kind::Ident || !std::isupper(uint8_t(cur_.text[0])))
            fail("expected predicate or principal name");
        std::string name = cur_.text;
        advance();
        if (is_keyword("can")) {
            advance();
            expect_keyword("say");
            return finish_delegation(Term::principal(name), inside_delegation);
        }
        f.pred = parse_predicate_body(std::move(name));
        return f;
    }

    Fact finish_delegation(Term delegate, bool inside_delegation) {
        if (inside_delegation)
            fail("recursive delegation ('can say' inside 'can say') is not supported");
        Fact inner = parse_fact(true);
        if (inner.is_delegation())
            fail("recursive delegation ('can say' inside 'can say') is not supported");
        Fact f;
        f.delegate = std::move(delegate);
        f.pred = std::move(inner.pred);
        return f;
    }

    Predicate parse_condition() {
        Fact f = parse_fact(false);
        if (f.is_delegation()) fail("'can say' is not allowed in a condition");
        return std::move(f.pred);
    }

    Predicate parse_predicate_body(std::string name) {
        Predicate p;
        p.name = std::move(name);
        expect_punct("(");
        while (true) {
            p.args.push_back(parse_term());
            if (is_punct(",")) {
                advance();
                continue;
            }
            break;
        }
        expect_punct(")");
        return p;
    }

    Term parse_term() {
        switch (cur_.kind) {
            case Token::Kind::Variable: {
                Term t = Term::variable(cur_.text, cur_.var_type);
                advance();
                return t;
            }
            case Token::Kind::Number: {
                Term t = Term::number(cur_.num);
                advance();
                return t;
            }
            case Token::Kind::String: {
                Term t = Term::string_const(cur_.text);
                advance();
                return t;
            }
            case Token::Kind::Ident: {
                if (!std::isupper(uint8_t(cur_.text[0])))
                    fail("constant names must be capitalized");
                Term t = Term::principal(cur_.text);
                advance();
                return t;
            }
            default: fail("expected term");
        }
    }

    // constraint := comparison | "(" constraint ("and"|"or") constraint ")"
    Constraint parse_constraint() {
        if (is_punct("(")) {
            advance();
            Constraint left = parse_constraint();
            Constraint::Op op;
            if (is_keyword("and"))
                op = Constraint::Op::And;
            else if (is_keyword("or"))
                op = Constraint::Op::Or;
            else
                fail("expected 'and' or 'or'");
            advance();
            Constraint right = parse_constraint();
            expect_punct(")");
            Constraint c;
            c.op = op;
            c.children.push_back(std::make_shared<Constraint>(std::move(left)));
            c.children.push_back(std::make_shared<Constraint>(std::move(right)));
            return c;
        }
        if (is_keyword("between")) {
            advance();
            expect_punct("(");
            Constraint c;
            c.op = Constraint::Op::Between;
            c.operands.push_back(parse_numref());
            expect_punct(",");
            c.operands.push_back(parse_numref());
            expect_punct(",");
            c.operands.push_back(parse_numref());
            expect_punct(")");
            return c;
        }
        Constraint c;
        c.operands.push_back(parse_numref());
        if (is_punct("<"))
            c.op = Constraint::Op::LessThan;
        else if (is_punct(">"))
            c.op = Constraint::Op::GreaterThan;
        else if (is_punct("="))
            c.op = Constraint::Op::Equals;
        else
            fail("expected comparison operator");
        advance();
        c.operands.push_back(parse_numref());
        return c;
    }

    NumRef parse_numref() {
        NumRef r;
        if (cur_.kind == Token::Kind::Number) {
            r.kind = NumRef::Kind::Literal;
            r.value = cur_.num;
            advance();
            return r;
        }
        if (cur_.kind == Token::Kind::Variable) {
            if (cur_.var_type != BaseType::Number)
                fail("only numeric variables may appear in constraints");
            r.kind = NumRef::Kind::Variable;
            r.name = cur_.text;
            advance();
            return r;
        }
        if (cur_.kind == Token::Kind::Ident) {
            r.kind = NumRef::Kind::Name;
            r.name = cur_.text;
            advance();
            return r;
        }
        fail("expected number, numeric variable, or state variable");
    }

    StateSpec parse_state() {
        StateSpec s;
        expect_punct("(");
        bool seen_update = false;
        while (true) {
            if (is_keyword("update")) {
                seen_update = true;
                advance();
                expect_punct("(");
                StateSpec::Update u;
                if (cur_.kind != Token::Kind::Ident) fail("expected state variable");
                u.var = cur_.text;
                advance();
                expect_punct(",");
                u.expr.first = parse_numref();
                while (is_punct("+") || is_punct("-")) {
                    int sign = cur_.text == "+" ? 1 : -1;
                    advance();
                    u.expr.rest.emplace_back(sign, parse_numref());
                }
                expect_punct(")");
                s.updates.push_back(std::move(u));
            } else {
                if (seen_update) fail("state bindings must precede updates");
                if (cur_.kind != Token::Kind::Ident) fail("expected state variable");
                std::string var = cur_.text;
                advance();
                expect_punct("=");
                if (cur_.kind != Token::Kind::Number)
                    fail("state variables must be bound to integers");
                s.bindings.emplace_back(std::move(var), cur_.num);
                advance();
            }
            if (is_punct(",")) {
                advance();
                continue;
            }
            break;
        }
        expect_punct(")");
        for (const auto& u : s.updates)
            if (!s.find(u.var)) fail("update target '" + u.var + "' has no binding");
        return s;
    }

    // Every variable used in the constraint or state updates must be bound
    // by the fact or a condition.
    void validate_variable_scope(const Assertion& a) const {
        std::set<std::string> bound;
        auto collect = [&](const Predicate& p) {
            for (const auto& t : p.args)
                if (t.kind == Term::Kind::Variable) bound.insert(t.name);
        };
        collect(a.fact.pred);
        if (a.fact.delegate && a.fact.delegate->kind == Term::Kind::Variable)
            bound.insert(a.fact.delegate->name);
        for (const auto& c : a.conditions) collect(c);

        auto check_ref = [&](const NumRef& r) {
            if (r.kind == NumRef::Kind::Variable && !bound.count(r.name))
                fail("variable 'n?" + r.name + "' is not bound by the fact or conditions");
        };
        std::function<void(const Constraint&)> walk = [&](const Constraint& c) {
            for (const auto& o : c.operands) check_ref(o);
            for (const auto& ch : c.children) walk(*ch);
        };
        if (a.constraint) walk(*a.constraint);
        if (a.state)
            for (const auto& u : a.state->updates) {
                check_ref(u.expr.first);
                for (const auto& [sign, ref] : u.expr.rest) check_ref(ref);
            }
    }

    Lexer lex_;
    Token cur_;
};

// Arity and term types are fixed per predicate name within one database.
class SignatureChecker {
public:
    void check(const Assertion& a, int lineno) {
        check_pred(a.fact.pred, lineno);
        for (const auto& c : a.conditions) check_pred(c, lineno);
    }

private:
    void check_pred(const Predicate& p, int lineno) {
        std::vector<BaseType> types;
        for (const auto& t : p.args) types.push_back(t.type());
        auto it = sigs_.find(p.name);
        if (it == sigs_.end()) {
            sigs_.emplace(p.name, std::move(types));
            return;
        }
        if (it->second.size() != types.size())
            throw TypeError("predicate " + p.name + " used with arity " +
                            std::to_string(types.size()) + " but declared with " +
                            std::to_string(it->second.size()) + " (line " +
                            std::to_string(lineno) + ")");
        for (size_t i = 0; i < types.size(); ++i)
            if (it->second[i] != types[i])
                throw TypeError("predicate " + p.name + " argument " +
                                std::to_string(i + 1) + " type mismatch (line " +
                                std::to_string(lineno) + ")");
    }

    std::map<std::string, std::vector<BaseType>> sigs_;
};

}  // namespace

Assertion parse_assertion(std::string_view line) {
    return LineParser(line, 1).parse();
}

PolicyDatabase parse_policy(std::string_view text) {
    PolicyDatabase db;
    SignatureChecker sigs;
    std::string pending;
    int lineno = 0;
    int start_line = 1;

    auto flush = [&]() {
        std::string_view sv(pending);
        size_t i = sv.find_first_not_of(" \t\r\n");
        if (i == std::string_view::npos) {
            pending.clear();
            return;
        }
        Assertion a = LineParser(pending, start_line).parse();
        sigs.check(a, start_line);
        db.assertions.push_back(std::move(a));
        pending.clear();
    };

    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                           : eol - pos);
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        // strip trailing whitespace, detect continuation
        size_t end = line.find_last_not_of(" \t\r");
        line = (end == std::string_view::npos) ? std::string_view{}
                                               : line.substr(0, end + 1);
        if (!line.empty() && line.back() == '\\') {
            if (pending.empty()) start_line = lineno;
            pending += std::string(line.substr(0, line.size() - 1));
            pending += ' ';
        } else {
            if (pending.empty()) start_line = lineno;
            pending += std::string(line);
            flush();
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    if (!pending.empty()) flush();
    return db;
}

}  // namespace capsule::policy
