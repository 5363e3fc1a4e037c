#pragma once

#include <deque>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "capsule/data/layer.hpp"

namespace capsule::data {

// Boolean predicate tree over the trading variables LP (latest price),
// MA (moving average), POS (shares held), POSAV (average fill price),
// with integer arithmetic, comparisons, and and/or/not. Written as
// s-expressions, e.g. (and (> POS 0) (>= LP (+ POSAV 2))).
struct PredNode {
    enum class Kind { And, Or, Not, Cmp, Var, Lit, Arith };
    Kind kind = Kind::Lit;
    std::string op;  // cmp: < <= > >= = ; arith: + -
    int64_t lit = 0;
    std::string var;
    std::vector<std::shared_ptr<PredNode>> children;
};

struct TradingVars {
    int64_t lp = 0;
    int64_t ma = 0;
    int64_t pos = 0;
    int64_t posav = 0;
};

std::shared_ptr<PredNode> parse_pred_tree(const std::string& sexpr);
bool eval_pred_tree(const PredNode& n, const TradingVars& v);
std::string print_pred_tree(const PredNode& n);

struct TradingStrategy {
    std::set<std::string> symbols;
    std::shared_ptr<PredNode> buy_entry;
    std::shared_ptr<PredNode> buy_exit;
    int64_t quantity = 100;
    int ma_window = 20;

    static TradingStrategy parse(const std::string& text);
    std::string print() const;
};

struct Order {
    enum class Side { None, Buy, Sell };
    Side side = Side::None;
    std::string symbol;
    int64_t quantity = 0;

    std::string print() const;
};

// Query-idiom capsule: evaluates the owner's private strategy against a
// public ticker stream; buffered orders are released only to the owner.
//
// Per tick: the price enters the symbol's history (MA = floor mean of the
// last min(count, ma_window) prices, current tick included); with an open
// position the exit tree runs and sells everything, otherwise the entry
// tree runs and buys `quantity`; fills are immediate at the event price
// and POSAV tracks the volume-weighted fill average.
class StockLayer : public DataLayer {
public:
    explicit StockLayer(const Bytes& initial_data);

    std::string kind() const override { return "stock"; }
    Bytes invoke(const std::string& op, const Args& args, OpContext& ctx) override;
    Bytes serialize() const override;
    static std::unique_ptr<StockLayer> restore(const Bytes& serialized);

    Order ticker_event(const std::string& symbol, int64_t price);
    std::vector<std::string> retrieve_matches();

    const TradingStrategy& strategy() const { return strategy_; }
    const std::string& strategy_text() const { return strategy_text_; }
    TradingVars vars(const std::string& symbol) const;

private:
    struct Position {
        int64_t pos = 0;
        int64_t posav = 0;
        std::deque<int64_t> history;
    };

    TradingStrategy strategy_;
    std::string strategy_text_;  // the protected asset under confinement
    std::map<std::string, Position> positions_;
    std::vector<std::string> match_buffer_;
};

}  // namespace capsule::data
