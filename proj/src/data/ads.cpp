#include "capsule/data/ads.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "capsule/errors.hpp"

namespace capsule::data {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep)) out.push_back(part);
    return out;
}

std::map<std::string, double> parse_weight_list(const std::string& s) {
    std::map<std::string, double> out;
    for (const auto& pair : split(s, ',')) {
        if (pair.empty()) continue;
        auto eq = pair.find('=');
        if (eq == std::string::npos)
            throw DataLayerError("ads: bad weight pair '" + pair + "'");
        out[pair.substr(0, eq)] = std::stod(pair.substr(eq + 1));
    }
    return out;
}

std::string format_vector(const std::vector<std::pair<std::string, double>>& v) {
    char buf[64];
    std::string out;
    for (const auto& [cat, val] : v) {
        snprintf(buf, sizeof(buf), "%.6f", val);
        out += (out.empty() ? "" : ",") + cat + "=" + buf;
    }
    return out;
}

}  // namespace

std::vector<AdCandidate> parse_ad_spec(const std::string& spec) {
    std::vector<AdCandidate> ads;
    for (const auto& entry : split(spec, ';')) {
        if (entry.empty()) continue;
        auto colon = entry.find(':');
        if (colon == std::string::npos)
            throw DataLayerError("ads: bad candidate '" + entry + "'");
        AdCandidate ad;
        ad.id = entry.substr(0, colon);
        ad.category_weights = parse_weight_list(entry.substr(colon + 1));
        ads.push_back(std::move(ad));
    }
    return ads;
}

AdsLayer::AdsLayer(const Bytes& initial_data) {
    std::stringstream in(to_string(initial_data));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        parse_line(line);
    }
    std::set<std::string> cats;
    for (const auto& [kw, row] : db_)
        for (const auto& [cat, w] : row) {
            if (w < 0) throw DataLayerError("ads: negative db weight");
            cats.insert(cat);
        }
    categories_.assign(cats.begin(), cats.end());
}

void AdsLayer::parse_line(const std::string& line) {
    std::stringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "param") {
        std::string name;
        ss >> name;
        if (name == "v_min")
            ss >> v_min_;
        else if (name == "sigma")
            ss >> sigma_;
        else if (name == "q_max")
            ss >> q_max_;
        else if (name == "queries_used")
            ss >> queries_used_;
        else
            throw DataLayerError("ads: unknown param '" + name + "'");
    } else if (tag == "db") {
        std::string kw, cat;
        double w;
        if (!(ss >> kw >> cat >> w)) throw DataLayerError("ads: bad db line");
        db_[kw][cat] = w;
    } else if (tag == "hist") {
        std::string site, weights;
        int64_t visits;
        if (!(ss >> site >> visits >> weights))
            throw DataLayerError("ads: bad hist line");
        if (visits < 1) throw DataLayerError("ads: visits must be >= 1");
        Site s;
        s.visits = visits;
        s.keyword_weights = parse_weight_list(weights);
        double sum = 0;
        for (auto& [kw, w] : s.keyword_weights) sum += w;
        if (sum <= 0) throw DataLayerError("ads: page weights must be positive");
        for (auto& [kw, w] : s.keyword_weights) w /= sum;
        auto it = history_.find(site);
        if (it == history_.end())
            history_[site] = std::move(s);
        else {
            // Revisit of a known site: visits accumulate, weights refresh.
            it->second.visits += visits;
            it->second.keyword_weights = std::move(s.keyword_weights);
        }
    } else if (tag == "click") {
        std::string page, ad;
        int clicked;
        if (!(ss >> page >> ad >> clicked)) throw DataLayerError("ads: bad click line");
        clicks_.emplace_back(page, ad, clicked);
    } else {
        throw DataLayerError("ads: unknown line tag '" + tag + "'");
    }
}

int64_t AdsLayer::total_visits() const {
    int64_t v = 0;
    for (const auto& [site, s] : history_) v += s.visits;
    return v;
}

std::vector<std::pair<std::string, double>> AdsLayer::interest_vector() const {
    std::map<std::string, double> u;
    for (const auto& cat : categories_) u[cat] = 0.0;
    double total = double(total_visits());
    if (total > 0) {
        for (const auto& [site, s] : history_)
            for (const auto& [kw, wk] : s.keyword_weights) {
                auto row = db_.find(kw);
                if (row == db_.end()) continue;
                for (const auto& [cat, dbw] : row->second)
                    u[cat] += double(s.visits) * wk * dbw;
            }
        for (auto& [cat, val] : u) val /= total;
    }
    std::vector<std::pair<std::string, double>> out;
    for (const auto& cat : categories_) out.emplace_back(cat, u[cat]);
    return out;
}

std::string AdsLayer::choose_ad(const std::vector<AdCandidate>& ads) const {
    if (ads.empty()) throw DataLayerError("ads: empty candidate list");
    for (const auto& ad : ads)
        for (const auto& [cat, w] : ad.category_weights)
            if (w < 0) throw DataLayerError("ads: negative candidate weight");
    auto u = interest_vector();
    std::map<std::string, double> uc(u.begin(), u.end());
    size_t best = 0;
    double best_score = -1;
    for (size_t i = 0; i < ads.size(); ++i) {
        double score = 0;
        for (const auto& [cat, w] : ads[i].category_weights) {
            auto it = uc.find(cat);
            if (it != uc.end()) score += w * it->second;
        }
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return ads[best].id;
}

double AdsLayer::laplace_noise(std::mt19937_64& rng, double sigma) {
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    double u = uni(rng);
    return -sigma * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::fabs(u));
}

std::vector<std::pair<std::string, double>> AdsLayer::perturbed_interest_raw() {
    if (total_visits() < v_min_)
        throw DataLayerError("ads: history below the v_min visit floor");
    auto u = interest_vector();
    for (auto& [cat, val] : u) val = std::max(0.0, val + laplace_noise(rng_, sigma_));
    return u;
}

std::vector<std::pair<std::string, double>> AdsLayer::perturbed_interest() {
    auto u = perturbed_interest_raw();
    double sum = 0;
    for (const auto& [cat, val] : u) sum += val;
    for (auto& [cat, val] : u)
        val = sum > 0 ? val / sum : (u.empty() ? 0.0 : 1.0 / double(u.size()));
    return u;
}

void AdsLayer::update_history(const std::string& entries) {
    for (const auto& entry : split(entries, ';')) {
        if (entry.empty()) continue;
        parse_line("hist " + entry);
    }
}

void AdsLayer::ensure_rng(OpContext& ctx) {
    if (rng_seeded_ || !ctx.trust) return;
    Bytes b = ctx.trust->random_bytes(8);
    uint64_t seed = 0;
    for (uint8_t byte : b) seed = (seed << 8) | byte;
    rng_.seed(seed);
    rng_seeded_ = true;
}

Bytes AdsLayer::invoke(const std::string& op, const Args& args, OpContext& ctx) {
    if (op == "ChooseAd") {
        if (args.empty() || args[0].kind != policy::Term::Kind::ConstString)
            throw DataLayerError("ChooseAd expects an ad spec string");
        return to_bytes(choose_ad(parse_ad_spec(args[0].str)));
    }
    if (op == "GetInterestVector") {
        ensure_rng(ctx);
        queries_used_++;
        return to_bytes(format_vector(perturbed_interest()));
    }
    if (op == "UpdateHistory") {
        if (!ctx.is_owner) throw DataLayerError("UpdateHistory is owner-only");
        if (args.empty() || args[0].kind != policy::Term::Kind::ConstString)
            throw DataLayerError("UpdateHistory expects an entries string");
        update_history(args[0].str);
        return to_bytes(std::string("ok"));
    }
    throw InvocationError("unknown operation " + op);
}

std::string AdsLayer::history_text() const {
    std::string out;
    for (const auto& [site, s] : history_) {
        std::string weights;
        char buf[64];
        for (const auto& [kw, w] : s.keyword_weights) {
            snprintf(buf, sizeof(buf), "%.6f", w);
            weights += (weights.empty() ? "" : ",") + kw + "=" + buf;
        }
        out += "hist " + site + " " + std::to_string(s.visits) + " " + weights + "\n";
    }
    return out;
}

Bytes AdsLayer::serialize() const {
    std::string out;
    char buf[64];
    snprintf(buf, sizeof(buf), "%.9g", sigma_);
    out += "param v_min " + std::to_string(v_min_) + "\n";
    out += "param sigma " + std::string(buf) + "\n";
    out += "param q_max " + std::to_string(q_max_) + "\n";
    out += "param queries_used " + std::to_string(queries_used_) + "\n";
    for (const auto& [kw, row] : db_)
        for (const auto& [cat, w] : row) {
            snprintf(buf, sizeof(buf), "%.9g", w);
            out += "db " + kw + " " + cat + " " + buf + "\n";
        }
    out += history_text();
    for (const auto& [page, ad, c] : clicks_)
        out += "click " + page + " " + ad + " " + std::to_string(c) + "\n";
    return to_bytes(out);
}

std::unique_ptr<DataLayer> AdsLayer::filter(const std::string& criterion) const {
    auto copy = std::make_unique<AdsLayer>(serialize());
    for (auto it = copy->history_.begin(); it != copy->history_.end();)
        if (it->first.find(criterion) == std::string::npos)
            it = copy->history_.erase(it);
        else
            ++it;
    return copy;
}

Bytes AdsLayer::aggregate_payload() const { return to_bytes(history_text()); }

}  // namespace capsule::data
