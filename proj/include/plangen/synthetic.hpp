#pragma once

// Synthetic stage-structured corpus generator: recipes whose instructions are
// drawn from disjoint per-stage vocabularies and led by a stage verb, so the
// rule-based tagger recovers the generating plan exactly.

#include <array>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "plangen/recipe.hpp"
#include "plangen/stage.hpp"

namespace plangen {

struct SyntheticCorpusSpec {
    std::array<std::vector<std::string>, kNumStages> stage_pools;
    // Leading token per stage; for the six verb stages a lexicon lemma, for
    // 'general' a token with no lexicon entry.
    std::array<std::string, kNumStages> stage_verbs;
    // Row-stochastic, 7 rows x 8 columns; column 7 is the end symbol.
    std::array<std::array<double, kNumStages + 1>, kNumStages> transitions;
    std::array<double, kNumStages> initial;
    int min_instruction_tokens = 3;
    int max_instruction_tokens = 8;
    int recipe_count = 100;
    uint64_t seed = 1;

    void validate() const {
        for (int s = 0; s < kNumStages; ++s) {
            double row = 0;
            for (double p : transitions[s]) {
                if (p < 0) throw std::invalid_argument("synthetic spec: negative transition");
                row += p;
            }
            if (std::abs(row - 1.0) > 1e-9)
                throw std::invalid_argument("synthetic spec: transition row does not sum to 1");
        }
        std::set<std::string> seen;
        for (const auto& pool : stage_pools) {
            if (pool.empty()) throw std::invalid_argument("synthetic spec: empty stage pool");
            for (const auto& w : pool)
                if (!seen.insert(w).second)
                    throw std::invalid_argument("synthetic spec: pools not disjoint: " + w);
        }
        if (min_instruction_tokens < 2 || max_instruction_tokens < min_instruction_tokens)
            throw std::invalid_argument("synthetic spec: bad instruction length range");
        if (recipe_count < 1) throw std::invalid_argument("synthetic spec: recipe_count < 1");
    }
};

inline SyntheticCorpusSpec default_synthetic_spec(int recipe_count, uint64_t seed) {
    SyntheticCorpusSpec spec;
    spec.recipe_count = recipe_count;
    spec.seed = seed;
    spec.stage_verbs = {"peel", "mix", "pour", "fry", "cool", "serve", "proceed"};
    static const std::array<std::string, kNumStages> prefixes = {
        "prep", "mixy", "trans", "cooky", "post", "fin", "gen"};
    static const std::array<std::string, 10> suffixes = {
        "alpha", "bravo", "coral", "delta", "ember",
        "flint", "grove", "haze",  "iris",  "jade"};
    for (int s = 0; s < kNumStages; ++s)
        for (const auto& suf : suffixes)
            spec.stage_pools[s].push_back(prefixes[s] + suf);

    // Mild forward drift through the stages plus an end probability.
    for (int s = 0; s < kNumStages; ++s) {
        auto& row = spec.transitions[s];
        row.fill(0.10);
        row[kNumStages] = 0.15;  // end
        row[(s + 1) % kNumStages] += 0.15;
        double sum = 0;
        for (double p : row) sum += p;
        for (auto& p : row) p /= sum;
    }
    spec.initial.fill(1.0 / kNumStages);
    return spec;
}

inline std::vector<std::pair<RecipeRecord, ContentPlan>> generate_synthetic_corpus(
    const SyntheticCorpusSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    auto sample_index = [&](const auto& weights) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double r = u(rng), acc = 0;
        int last = static_cast<int>(weights.size()) - 1;
        for (int i = 0; i <= last; ++i) {
            acc += weights[i];
            if (r < acc) return i;
        }
        return last;
    };

    std::vector<std::pair<RecipeRecord, ContentPlan>> out;
    out.reserve(spec.recipe_count);
    for (int n = 0; n < spec.recipe_count; ++n) {
        ContentPlan plan;
        int stage = sample_index(spec.initial);
        plan.push_back(static_cast<StageLabel>(stage));
        while (static_cast<int>(plan.size()) < kMaxPlanLength) {
            int next = sample_index(spec.transitions[stage]);
            if (next == kNumStages) break;
            stage = next;
            plan.push_back(static_cast<StageLabel>(stage));
        }

        RecipeRecord r;
        r.id = "synth" + std::to_string(n);
        r.title = {"synthetic", "recipe", spec.stage_pools[n % kNumStages][n % 10]};
        std::uniform_int_distribution<int> ingr_count(2, 4);
        int ni = ingr_count(rng);
        for (int i = 0; i < ni; ++i) {
            int s = sample_index(spec.initial);
            std::uniform_int_distribution<size_t> pick(0, spec.stage_pools[s].size() - 1);
            r.ingredients.push_back({spec.stage_pools[s][pick(rng)]});
        }
        std::uniform_int_distribution<int> len_dist(spec.min_instruction_tokens,
                                                    spec.max_instruction_tokens);
        for (StageLabel c : plan) {
            int s = stage_index(c);
            std::vector<std::string> instr = {spec.stage_verbs[s]};
            int len = len_dist(rng);
            std::uniform_int_distribution<size_t> pick(0, spec.stage_pools[s].size() - 1);
            while (static_cast<int>(instr.size()) < len)
                instr.push_back(spec.stage_pools[s][pick(rng)]);
            r.instructions.push_back(std::move(instr));
        }
        out.emplace_back(std::move(r), std::move(plan));
    }
    return out;
}

}  // namespace plangen
