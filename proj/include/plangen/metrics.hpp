#pragma once

// Evaluation metrics: BLEU, ROUGE-L, plan match, ingredient coverage and
// hallucinated-extra rate, aggregated into a per-corpus report.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "plangen/decoder.hpp"
#include "plangen/recipe.hpp"
#include "plangen/stage.hpp"
#include "plangen/tagger.hpp"

namespace plangen {

struct EvalReport {
    double bleu = 0, rouge_l = 0, plan_match = 0, coverage = 0, extra = 0;  // percent
    size_t example_count = 0;
    std::string notes = "single-reference BLEU (eps-smoothed); ROUGE-L F1; macro-averaged";
};

struct IngredientList {
    // Deduplicated, lowercased ingredient surface forms as token sequences.
    std::vector<std::vector<std::string>> entries;
};

namespace detail {

inline std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
    std::map<std::vector<std::string>, int> counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[{tokens.begin() + i, tokens.begin() + i + n}];
    return counts;
}

inline bool contains_subsequence(const std::vector<std::string>& haystack,
                                 const std::vector<std::string>& needle) {
    if (needle.empty() || haystack.size() < needle.size()) return false;
    for (size_t i = 0; i + needle.size() <= haystack.size(); ++i)
        if (std::equal(needle.begin(), needle.end(), haystack.begin() + i)) return true;
    return false;
}

}  // namespace detail

// Geometric mean of clipped n-gram precisions with epsilon smoothing for
// zero counts, times the brevity penalty.
inline double bleu(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int max_n = 4) {
    if (reference.empty()) throw std::invalid_argument("bleu: empty reference");
    if (candidate.empty()) return 0.0;
    constexpr double kEps = 1e-9;
    double log_prec_sum = 0;
    int used_orders = 0;
    for (int n = 1; n <= max_n; ++n) {
        auto cand_grams = detail::ngram_counts(candidate, n);
        if (cand_grams.empty()) break;  // candidate shorter than n
        auto ref_grams = detail::ngram_counts(reference, n);
        double clipped = 0, total = 0;
        for (const auto& [gram, cnt] : cand_grams) {
            total += cnt;
            auto it = ref_grams.find(gram);
            if (it != ref_grams.end()) clipped += std::min(cnt, it->second);
        }
        log_prec_sum += std::log(std::max(clipped / total, kEps));
        ++used_orders;
    }
    double bp = std::exp(std::min(
        0.0, 1.0 - static_cast<double>(reference.size()) / static_cast<double>(candidate.size())));
    return bp * std::exp(log_prec_sum / used_orders);
}

inline double rouge_l(const std::vector<std::string>& candidate,
                      const std::vector<std::string>& reference) {
    if (candidate.empty() || reference.empty())
        throw std::invalid_argument("rouge_l: empty input");
    size_t n = candidate.size(), m = reference.size();
    std::vector<size_t> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (candidate[i - 1] == reference[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    double lcs = static_cast<double>(prev[m]);
    if (lcs == 0) return 0.0;
    double p = lcs / static_cast<double>(n);
    double r = lcs / static_cast<double>(m);
    return 2 * p * r / (p + r);
}

// Positional agreement over min length, divided by the target plan length.
inline double plan_match(const ContentPlan& realized, const ContentPlan& target) {
    if (realized.empty() || target.empty())
        throw std::invalid_argument("plan_match: empty plan");
    size_t matches = 0;
    for (size_t i = 0; i < std::min(realized.size(), target.size()); ++i)
        if (realized[i] == target[i]) ++matches;
    return 100.0 * static_cast<double>(matches) / static_cast<double>(target.size());
}

// Case-insensitive token-boundary substring match against the generated
// text; "extra" counts matched global-list ingredients that are not inputs.
inline std::pair<double, double> ingredient_coverage(
    const std::vector<std::string>& generated,
    const std::vector<std::vector<std::string>>& input_ingredients,
    const IngredientList& global) {
    if (input_ingredients.empty())
        throw std::invalid_argument("ingredient_coverage: empty input ingredient list");
    std::vector<std::string> text;
    text.reserve(generated.size());
    for (const auto& t : generated) {
        std::string lower;
        for (unsigned char c : t) lower.push_back(static_cast<char>(std::tolower(c)));
        text.push_back(std::move(lower));
    }
    size_t covered = 0;
    for (const auto& ing : input_ingredients)
        if (detail::contains_subsequence(text, ing)) ++covered;
    size_t extra = 0;
    for (const auto& ing : global.entries) {
        if (std::find(input_ingredients.begin(), input_ingredients.end(), ing) !=
            input_ingredients.end())
            continue;
        if (detail::contains_subsequence(text, ing)) ++extra;
    }
    double denom = static_cast<double>(input_ingredients.size());
    return {100.0 * static_cast<double>(covered) / denom,
            100.0 * static_cast<double>(extra) / denom};
}

inline EvalReport evaluate_generation(const std::vector<GenerationResult>& outputs,
                                      const std::vector<RecipeRecord>& references,
                                      const std::vector<ContentPlan>& targets,
                                      const IngredientList& global,
                                      const VerbLexicon& lexicon) {
    if (outputs.empty() || outputs.size() != references.size() ||
        outputs.size() != targets.size())
        throw std::invalid_argument("evaluate_generation: misaligned inputs");
    EvalReport report;
    report.example_count = outputs.size();
    for (size_t i = 0; i < outputs.size(); ++i) {
        std::vector<std::string> cand;
        for (const auto& instr : outputs[i].instructions)
            cand.insert(cand.end(), instr.begin(), instr.end());
        std::vector<std::string> ref;
        for (const auto& instr : references[i].instructions)
            ref.insert(ref.end(), instr.begin(), instr.end());

        report.bleu += 100.0 * bleu(cand, ref);
        report.rouge_l += cand.empty() ? 0.0 : 100.0 * rouge_l(cand, ref);

        ContentPlan realized;
        for (const auto& instr : outputs[i].instructions)
            realized.push_back(tag_instruction(instr, lexicon));
        report.plan_match += realized.empty() ? 0.0 : plan_match(realized, targets[i]);

        auto [cov, extra] = ingredient_coverage(cand, references[i].ingredients, global);
        report.coverage += cov;
        report.extra += extra;
    }
    double n = static_cast<double>(outputs.size());
    report.bleu /= n;
    report.rouge_l /= n;
    report.plan_match /= n;
    report.coverage /= n;
    report.extra /= n;
    return report;
}

}  // namespace plangen
