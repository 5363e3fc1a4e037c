#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "capsule/data/layer.hpp"

namespace capsule::data {

struct AdCandidate {
    std::string id;
    std::map<std::string, double> category_weights;  // C_{i,c}
};

// Parses "ad1:cars=0.5,sports=0.5;ad2:news=1" into candidates in order.
std::vector<AdCandidate> parse_ad_spec(const std::string& spec);

// Analytics-idiom capsule over private browsing history. Ad selection runs
// inside the capsule and reveals only the chosen ad; the interest vector
// leaves only through a Laplace-perturbed, budgeted query.
//
// Configuration lines (initial_data):
//   param v_min <int> | param sigma <float> | param q_max <int>
//   db <keyword> <category> <weight>
//   hist <site> <visits> <k1=w1,k2=w2,...>
//   click <page> <ad> <0|1>
class AdsLayer : public DataLayer {
public:
    explicit AdsLayer(const Bytes& initial_data);

    std::string kind() const override { return "ads"; }
    Bytes invoke(const std::string& op, const Args& args, OpContext& ctx) override;
    Bytes serialize() const override;
    std::unique_ptr<DataLayer> filter(const std::string& criterion) const override;
    Bytes aggregate_payload() const override;

    // U_c = Σ_i Σ_k (V_i · WK_{i,k} · DB_{k,c}) / Σ_i V_i, over the
    // categories of the keyword→category table, in sorted category order.
    std::vector<std::pair<std::string, double>> interest_vector() const;

    // Highest score S_i = Σ_c C_{i,c}·U_c wins; ties break to the lowest
    // index in the candidate list.
    std::string choose_ad(const std::vector<AdCandidate>& ads) const;

    // Per-coordinate Laplace noise of scale sigma, clamped at zero.
    // Pre-normalization form, where the privacy bound is literal.
    std::vector<std::pair<std::string, double>> perturbed_interest_raw();
    // Clamped and renormalized to sum 1 (uniform if everything clamps).
    std::vector<std::pair<std::string, double>> perturbed_interest();

    void update_history(const std::string& entries);

    int64_t total_visits() const;
    double sigma() const { return sigma_; }
    int64_t v_min() const { return v_min_; }
    int64_t q_max() const { return q_max_; }
    int64_t queries_used() const { return queries_used_; }
    void seed_rng(uint64_t seed) { rng_.seed(seed); rng_seeded_ = true; }

    static double laplace_noise(std::mt19937_64& rng, double sigma);

    std::string history_text() const;  // the protected asset under confinement

private:
    struct Site {
        int64_t visits = 0;
        std::map<std::string, double> keyword_weights;  // normalized to sum 1
    };

    void parse_line(const std::string& line);
    void ensure_rng(OpContext& ctx);

    int64_t v_min_ = 100;
    double sigma_ = 1.0;
    int64_t q_max_ = 5;
    int64_t queries_used_ = 0;

    std::map<std::string, std::map<std::string, double>> db_;  // keyword -> cat -> w
    std::vector<std::string> categories_;                      // sorted
    std::map<std::string, Site> history_;
    std::vector<std::tuple<std::string, std::string, int>> clicks_;

    std::mt19937_64 rng_{0x61647321ull};
    bool rng_seeded_ = false;
};

}  // namespace capsule::data
