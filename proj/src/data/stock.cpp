#include "capsule/data/stock.hpp"

#include <numeric>
#include <sstream>

#include "capsule/errors.hpp"

namespace capsule::data {

namespace {

struct SexprLexer {
    explicit SexprLexer(const std::string& s) : s_(s) {}

    std::string next() {
        while (pos_ < s_.size() && std::isspace(uint8_t(s_[pos_]))) ++pos_;
        if (pos_ >= s_.size()) return "";
        if (s_[pos_] == '(' || s_[pos_] == ')') return std::string(1, s_[pos_++]);
        size_t start = pos_;
        while (pos_ < s_.size() && !std::isspace(uint8_t(s_[pos_])) &&
               s_[pos_] != '(' && s_[pos_] != ')')
            ++pos_;
        return s_.substr(start, pos_ - start);
    }

    const std::string& s_;
    size_t pos_ = 0;
};

bool is_var(const std::string& t) {
    return t == "LP" || t == "MA" || t == "POS" || t == "POSAV";
}

bool is_int(const std::string& t) {
    if (t.empty()) return false;
    size_t i = (t[0] == '-') ? 1 : 0;
    if (i == t.size()) return false;
    for (; i < t.size(); ++i)
        if (!std::isdigit(uint8_t(t[i]))) return false;
    return true;
}

std::shared_ptr<PredNode> parse_node(SexprLexer& lex, const std::string& tok);

std::shared_ptr<PredNode> parse_list(SexprLexer& lex) {
    std::string op = lex.next();
    auto node = std::make_shared<PredNode>();
    if (op == "and" || op == "or" || op == "not") {
        node->kind = op == "and"  ? PredNode::Kind::And
                     : op == "or" ? PredNode::Kind::Or
                                  : PredNode::Kind::Not;
    } else if (op == "<" || op == "<=" || op == ">" || op == ">=" || op == "=") {
        node->kind = PredNode::Kind::Cmp;
        node->op = op;
    } else if (op == "+" || op == "-") {
        node->kind = PredNode::Kind::Arith;
        node->op = op;
    } else {
        throw DataLayerError("strategy: unknown operator '" + op + "'");
    }
    for (std::string tok = lex.next(); tok != ")"; tok = lex.next()) {
        if (tok.empty()) throw DataLayerError("strategy: unbalanced parentheses");
        node->children.push_back(parse_node(lex, tok));
    }
    size_t n = node->children.size();
    bool ok = (node->kind == PredNode::Kind::Not && n == 1) ||
              (node->kind == PredNode::Kind::Cmp && n == 2) ||
              (node->kind == PredNode::Kind::Arith && n == 2) ||
              ((node->kind == PredNode::Kind::And || node->kind == PredNode::Kind::Or) &&
               n >= 2);
    if (!ok) throw DataLayerError("strategy: wrong operand count for " + op);
    return node;
}

std::shared_ptr<PredNode> parse_node(SexprLexer& lex, const std::string& tok) {
    if (tok == "(") return parse_list(lex);
    auto node = std::make_shared<PredNode>();
    if (is_var(tok)) {
        node->kind = PredNode::Kind::Var;
        node->var = tok;
    } else if (is_int(tok)) {
        node->kind = PredNode::Kind::Lit;
        node->lit = std::stoll(tok);
    } else {
        throw DataLayerError("strategy: bad token '" + tok + "'");
    }
    return node;
}

int64_t eval_num(const PredNode& n, const TradingVars& v) {
    switch (n.kind) {
        case PredNode::Kind::Lit:
            return n.lit;
        case PredNode::Kind::Var:
            if (n.var == "LP") return v.lp;
            if (n.var == "MA") return v.ma;
            if (n.var == "POS") return v.pos;
            return v.posav;
        case PredNode::Kind::Arith: {
            int64_t a = eval_num(*n.children[0], v);
            int64_t b = eval_num(*n.children[1], v);
            return n.op == "+" ? a + b : a - b;
        }
        default:
            throw DataLayerError("strategy: boolean node in numeric position");
    }
}

}  // namespace

std::shared_ptr<PredNode> parse_pred_tree(const std::string& sexpr) {
    SexprLexer lex(sexpr);
    std::string tok = lex.next();
    if (tok.empty()) throw DataLayerError("strategy: empty predicate");
    auto node = parse_node(lex, tok);
    if (!lex.next().empty())
        throw DataLayerError("strategy: trailing tokens after predicate");
    if (node->kind == PredNode::Kind::Var || node->kind == PredNode::Kind::Lit ||
        node->kind == PredNode::Kind::Arith)
        throw DataLayerError("strategy: predicate must be boolean");
    return node;
}

bool eval_pred_tree(const PredNode& n, const TradingVars& v) {
    switch (n.kind) {
        case PredNode::Kind::And:
            for (const auto& c : n.children)
                if (!eval_pred_tree(*c, v)) return false;
            return true;
        case PredNode::Kind::Or:
            for (const auto& c : n.children)
                if (eval_pred_tree(*c, v)) return true;
            return false;
        case PredNode::Kind::Not:
            return !eval_pred_tree(*n.children[0], v);
        case PredNode::Kind::Cmp: {
            int64_t a = eval_num(*n.children[0], v);
            int64_t b = eval_num(*n.children[1], v);
            if (n.op == "<") return a < b;
            if (n.op == "<=") return a <= b;
            if (n.op == ">") return a > b;
            if (n.op == ">=") return a >= b;
            return a == b;
        }
        default:
            throw DataLayerError("strategy: numeric node in boolean position");
    }
}

std::string print_pred_tree(const PredNode& n) {
    switch (n.kind) {
        case PredNode::Kind::Lit:
            return std::to_string(n.lit);
        case PredNode::Kind::Var:
            return n.var;
        default: {
            std::string op;
            switch (n.kind) {
                case PredNode::Kind::And: op = "and"; break;
                case PredNode::Kind::Or: op = "or"; break;
                case PredNode::Kind::Not: op = "not"; break;
                default: op = n.op; break;
            }
            std::string out = "(" + op;
            for (const auto& c : n.children) out += " " + print_pred_tree(*c);
            return out + ")";
        }
    }
}

TradingStrategy TradingStrategy::parse(const std::string& text) {
    TradingStrategy s;
    std::stringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto sp = line.find(' ');
        if (sp == std::string::npos)
            throw DataLayerError("strategy: bad line '" + line + "'");
        std::string key = line.substr(0, sp);
        std::string val = line.substr(sp + 1);
        if (key == "symbols") {
            std::stringstream ss(val);
            std::string sym;
            while (std::getline(ss, sym, ',')) s.symbols.insert(sym);
        } else if (key == "quantity") {
            s.quantity = std::stoll(val);
        } else if (key == "ma_window") {
            s.ma_window = std::stoi(val);
        } else if (key == "entry") {
            s.buy_entry = parse_pred_tree(val);
        } else if (key == "exit") {
            s.buy_exit = parse_pred_tree(val);
        } else {
            throw DataLayerError("strategy: unknown key '" + key + "'");
        }
    }
    if (s.symbols.empty() || !s.buy_entry || !s.buy_exit)
        throw DataLayerError("strategy: symbols, entry and exit are required");
    if (s.quantity <= 0 || s.ma_window <= 0)
        throw DataLayerError("strategy: quantity and ma_window must be positive");
    return s;
}

std::string TradingStrategy::print() const {
    std::string syms;
    for (const auto& sym : symbols) syms += (syms.empty() ? "" : ",") + sym;
    return "symbols " + syms + "\nquantity " + std::to_string(quantity) +
           "\nma_window " + std::to_string(ma_window) + "\nentry " +
           print_pred_tree(*buy_entry) + "\nexit " + print_pred_tree(*buy_exit) + "\n";
}

std::string Order::print() const {
    switch (side) {
        case Side::None:
            return "NONE";
        case Side::Buy:
            return "BUY " + symbol + " " + std::to_string(quantity);
        default:
            return "SELL " + symbol + " " + std::to_string(quantity);
    }
}

StockLayer::StockLayer(const Bytes& initial_data)
    : strategy_(TradingStrategy::parse(to_string(initial_data))),
      strategy_text_(to_string(initial_data)) {}

TradingVars StockLayer::vars(const std::string& symbol) const {
    TradingVars v;
    auto it = positions_.find(symbol);
    if (it == positions_.end()) return v;
    const Position& p = it->second;
    v.pos = p.pos;
    v.posav = p.posav;
    if (!p.history.empty()) {
        v.lp = p.history.back();
        int64_t sum = std::accumulate(p.history.begin(), p.history.end(), int64_t(0));
        v.ma = sum / int64_t(p.history.size());
    }
    return v;
}

Order StockLayer::ticker_event(const std::string& symbol, int64_t price) {
    if (price <= 0) throw DataLayerError("non-positive price");
    if (!strategy_.symbols.count(symbol)) return Order{};

    Position& p = positions_[symbol];
    p.history.push_back(price);
    while (int(p.history.size()) > strategy_.ma_window) p.history.pop_front();

    TradingVars v = vars(symbol);
    Order order;
    if (p.pos > 0) {
        if (eval_pred_tree(*strategy_.buy_exit, v)) {
            order = Order{Order::Side::Sell, symbol, p.pos};
            p.pos = 0;
            p.posav = 0;
        }
    } else {
        if (eval_pred_tree(*strategy_.buy_entry, v)) {
            order = Order{Order::Side::Buy, symbol, strategy_.quantity};
            p.pos = strategy_.quantity;
            p.posav = price;  // fill at the event price
        }
    }
    if (order.side != Order::Side::None) match_buffer_.push_back(order.print());
    return order;
}

std::vector<std::string> StockLayer::retrieve_matches() {
    std::vector<std::string> out = std::move(match_buffer_);
    match_buffer_.clear();
    return out;
}

Bytes StockLayer::invoke(const std::string& op, const Args& args, OpContext& ctx) {
    if (op == "TickerEvent") {
        if (args.size() != 2 || args[0].kind != policy::Term::Kind::ConstString ||
            args[1].kind != policy::Term::Kind::ConstNumber)
            throw DataLayerError("TickerEvent expects (symbol, price)");
        return to_bytes(ticker_event(args[0].str, args[1].num).print());
    }
    if (op == "RetrieveMatches") {
        if (!ctx.is_owner) throw DataLayerError("RetrieveMatches is owner-only");
        std::string out;
        for (const auto& m : retrieve_matches()) out += m + "\n";
        return to_bytes(out);
    }
    throw InvocationError("unknown operation " + op);
}

Bytes StockLayer::serialize() const {
    Encoder enc;
    enc.put_string(strategy_text_);
    enc.put_u32(uint32_t(positions_.size()));
    for (const auto& [sym, p] : positions_) {
        enc.put_string(sym);
        enc.put_i64(p.pos);
        enc.put_i64(p.posav);
        enc.put_u32(uint32_t(p.history.size()));
        for (int64_t price : p.history) enc.put_i64(price);
    }
    enc.put_u32(uint32_t(match_buffer_.size()));
    for (const auto& m : match_buffer_) enc.put_string(m);
    return enc.take();
}

std::unique_ptr<StockLayer> StockLayer::restore(const Bytes& serialized) {
    Decoder dec(serialized);
    std::string text = dec.get_string();
    auto layer = std::make_unique<StockLayer>(to_bytes(text));
    uint32_t npos = dec.get_u32();
    for (uint32_t i = 0; i < npos; ++i) {
        std::string sym = dec.get_string();
        Position p;
        p.pos = dec.get_i64();
        p.posav = dec.get_i64();
        uint32_t nh = dec.get_u32();
        for (uint32_t j = 0; j < nh; ++j) p.history.push_back(dec.get_i64());
        layer->positions_[sym] = std::move(p);
    }
    uint32_t nm = dec.get_u32();
    for (uint32_t i = 0; i < nm; ++i) layer->match_buffer_.push_back(dec.get_string());
    dec.expect_done();
    return layer;
}

}  // namespace capsule::data
