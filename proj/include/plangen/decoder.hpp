#pragma once

// Plan-aware decoding: per-step re-ranking of the sequence generator's top-S
// candidates by the stage classifier under the active plan stage, plus
// unguided (greedy / top-k / beam) and lexically constrained baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "plangen/classifier.hpp"
#include "plangen/lm.hpp"
#include "plangen/stage.hpp"
#include "plangen/token.hpp"

namespace plangen {

struct DecodeConfig {
    double alpha = 0.2;          // weight of the classifier term
    int top_s = 5;               // candidate set size
    int max_tokens = 200;        // generation budget (tokens past the prompt)
    int max_instructions = kMaxPlanLength;
    double classifier_floor = 1e-9;
    uint64_t seed = 1;

    void validate() const {
        if (alpha < 0 || alpha > 1) throw std::invalid_argument("decode: alpha must be in [0,1]");
        if (top_s < 1) throw std::invalid_argument("decode: S must be >= 1");
        if (max_tokens < 1) throw std::invalid_argument("decode: max_tokens must be >= 1");
    }
};

struct DecodeState {
    std::vector<int> tokens;      // prompt + generated, as vocabulary ids
    size_t instruction_start = 0; // k: first token of the current instruction
    size_t plan_cursor = 0;       // j: index of the active plan stage
    int instructions_done = 0;
    bool finished = false;
};

struct GenerationResult {
    std::vector<int> tokens;  // generated tokens only (prompt excluded)
    std::vector<std::vector<std::string>> instructions;
    std::vector<double> step_scores;
    size_t realized_plan_length = 0;
    size_t satisfied_constraints = 0;
};

namespace detail {

inline bool is_separator(const Vocabulary& vocab, const LanguageModel& lm, int token) {
    return token == lm.end_id() || vocab.is_special_id(token);
}

// Classifier probability of the active stage for the current partial
// instruction; the prior when the partial is still empty.
inline double stage_prob(const StageClassifier& clf, const std::vector<std::string>& partial,
                         StageLabel stage) {
    auto dist = partial.empty() ? clf.prior() : clf.classify(partial);
    return dist[stage_index(stage)];
}

inline std::vector<std::string> partial_instruction(const Vocabulary& vocab,
                                                    const DecodeState& state) {
    std::vector<std::string> out;
    for (size_t i = state.instruction_start; i < state.tokens.size(); ++i) {
        int id = state.tokens[i];
        if (id >= 0 && static_cast<size_t>(id) < vocab.size() && !vocab.is_special_id(id))
            out.push_back(vocab.token(id));
    }
    return out;
}

}  // namespace detail

struct StepChoice {
    int token = -1;
    double score = 0;  // log-space combined score
};

// One re-ranking step: argmax over the LM's top-S candidates of
// (1-alpha)*log p_g(y) + alpha*log p_f(c_j | partial + y). Separator and end
// candidates are scored with the classifier probability of the unmodified
// partial instruction. Ties break toward the lower token id.
inline StepChoice plan_aware_step(const LanguageModel& lm, const StageClassifier& clf,
                                   const Vocabulary& vocab, const DecodeState& state,
                                   const ContentPlan& plan, const DecodeConfig& config) {
    if (state.finished) throw std::logic_error("plan_aware_step: state already finished");
    if (state.plan_cursor >= plan.size())
        throw std::logic_error("plan_aware_step: plan exhausted");
    StageLabel stage = plan[state.plan_cursor];
    auto candidates = top_s(lm, state.tokens, config.top_s);
    std::vector<std::string> partial = detail::partial_instruction(vocab, state);

    int best_token = -1;
    double best_score = 0;
    for (const auto& cand : candidates) {
        double pf;
        if (detail::is_separator(vocab, lm, cand.token)) {
            pf = detail::stage_prob(clf, partial, stage);
        } else {
            partial.push_back(vocab.token(cand.token));
            pf = detail::stage_prob(clf, partial, stage);
            partial.pop_back();
        }
        double score = (1.0 - config.alpha) * std::log(cand.prob) +
                       config.alpha * std::log(std::max(pf, config.classifier_floor));
        if (best_token < 0 || score > best_score ||
            (score == best_score && cand.token < best_token)) {
            best_token = cand.token;
            best_score = score;
        }
    }
    return {best_token, best_score};
}

inline DecodeState advance_state(DecodeState state, int token, const Vocabulary& vocab,
                                 const LanguageModel& lm, size_t plan_length,
                                 int max_instructions = kMaxPlanLength) {
    state.tokens.push_back(token);
    int instr_next = vocab.id(special::kInstrNext);
    int instr_end = vocab.id(special::kInstrEnd);
    if (token == instr_next) {
        state.plan_cursor += 1;
        state.instruction_start = state.tokens.size();
        state.instructions_done += 1;
        if (state.plan_cursor >= plan_length || state.instructions_done >= max_instructions)
            state.finished = true;
    } else if (token == instr_end || token == lm.end_id()) {
        state.instructions_done += 1;
        state.finished = true;
    }
    return state;
}

namespace detail {

inline GenerationResult finalize(const Vocabulary& vocab, const LanguageModel& lm,
                                 const std::vector<int>& generated,
                                 std::vector<double> step_scores) {
    GenerationResult result;
    result.tokens = generated;
    result.step_scores = std::move(step_scores);
    std::vector<std::string> cur;
    int instr_next = vocab.id(special::kInstrNext);
    int instr_end = vocab.id(special::kInstrEnd);
    for (int tok : generated) {
        if (tok == instr_next || tok == instr_end || tok == lm.end_id()) {
            if (!cur.empty()) result.instructions.push_back(std::move(cur));
            cur.clear();
            if (tok != instr_next) break;
        } else if (tok >= 0 && static_cast<size_t>(tok) < vocab.size() &&
                   !vocab.is_special_id(tok)) {
            cur.push_back(vocab.token(tok));
        }
    }
    if (!cur.empty()) result.instructions.push_back(std::move(cur));
    result.realized_plan_length = result.instructions.size();
    return result;
}

inline void check_prompt(const Vocabulary& vocab, const std::vector<int>& prompt) {
    if (prompt.empty() || prompt.back() != vocab.id(special::kInstrStart))
        throw std::invalid_argument("generate: prompt must end with <INSTR_START>");
}

}  // namespace detail

inline GenerationResult generate(const LanguageModel& lm, const StageClassifier& clf,
                                 const Vocabulary& vocab, const ContentPlan& plan,
                                 const std::vector<int>& prompt, const DecodeConfig& config) {
    config.validate();
    if (plan.empty() || plan.size() > kMaxPlanLength)
        throw std::invalid_argument("generate: plan length must be in [1,15]");
    detail::check_prompt(vocab, prompt);

    DecodeState state;
    state.tokens = prompt;
    state.instruction_start = prompt.size();
    std::vector<double> scores;
    while (!state.finished &&
           static_cast<int>(state.tokens.size() - prompt.size()) < config.max_tokens) {
        StepChoice chosen = plan_aware_step(lm, clf, vocab, state, plan, config);
        scores.push_back(chosen.score);
        state = advance_state(std::move(state), chosen.token, vocab, lm, plan.size(),
                              config.max_instructions);
    }
    std::vector<int> generated(state.tokens.begin() + prompt.size(), state.tokens.end());
    return detail::finalize(vocab, lm, generated, std::move(scores));
}

enum class BaselineStrategy { Greedy, TopK, Beam };

inline GenerationResult generate_baseline(const LanguageModel& lm, const Vocabulary& vocab,
                                          const std::vector<int>& prompt,
                                          const DecodeConfig& config,
                                          BaselineStrategy strategy, int k_or_width = 5) {
    config.validate();
    detail::check_prompt(vocab, prompt);
    int instr_next = vocab.id(special::kInstrNext);
    int instr_end = vocab.id(special::kInstrEnd);

    if (strategy == BaselineStrategy::Greedy || strategy == BaselineStrategy::TopK) {
        std::mt19937_64 rng(config.seed);
        std::vector<int> tokens = prompt;
        std::vector<double> scores;
        int instructions = 0;
        while (static_cast<int>(tokens.size() - prompt.size()) < config.max_tokens) {
            int chosen;
            double logp;
            if (strategy == BaselineStrategy::Greedy) {
                auto best = top_s(lm, tokens, 1);
                chosen = best[0].token;
                logp = std::log(best[0].prob);
            } else {
                auto cands = top_s(lm, tokens, k_or_width);
                double sum = 0;
                for (const auto& c : cands) sum += c.prob;
                std::uniform_real_distribution<double> u(0.0, sum);
                double r = u(rng), acc = 0;
                chosen = cands.back().token;
                logp = std::log(cands.back().prob);
                for (const auto& c : cands) {
                    acc += c.prob;
                    if (r < acc) {
                        chosen = c.token;
                        logp = std::log(c.prob);
                        break;
                    }
                }
            }
            tokens.push_back(chosen);
            scores.push_back(logp);
            if (chosen == instr_next && ++instructions >= config.max_instructions) break;
            if (chosen == instr_end || chosen == lm.end_id()) break;
        }
        std::vector<int> generated(tokens.begin() + prompt.size(), tokens.end());
        return detail::finalize(vocab, lm, generated, std::move(scores));
    }

    // Length-normalized beam search.
    struct Hyp {
        std::vector<int> generated;
        double logprob = 0;
        int instructions = 0;
        bool done = false;
        double norm_score() const {
            return generated.empty() ? -1e18
                                     : logprob / static_cast<double>(generated.size());
        }
    };
    auto better = [](const Hyp& a, const Hyp& b) {
        double sa = a.norm_score(), sb = b.norm_score();
        if (sa != sb) return sa > sb;
        return a.generated < b.generated;
    };
    std::vector<Hyp> active = {{}};
    std::vector<Hyp> completed;
    for (int step = 0; step < config.max_tokens && !active.empty(); ++step) {
        std::vector<Hyp> pool;
        for (const auto& hyp : active) {
            std::vector<int> ctx = prompt;
            ctx.insert(ctx.end(), hyp.generated.begin(), hyp.generated.end());
            for (const auto& cand : top_s(lm, ctx, k_or_width)) {
                Hyp next = hyp;
                next.generated.push_back(cand.token);
                next.logprob += std::log(cand.prob);
                if (cand.token == instr_next) {
                    if (++next.instructions >= config.max_instructions) next.done = true;
                } else if (cand.token == instr_end || cand.token == lm.end_id()) {
                    next.done = true;
                }
                pool.push_back(std::move(next));
            }
        }
        std::sort(pool.begin(), pool.end(), better);
        active.clear();
        for (auto& hyp : pool) {
            if (hyp.done) {
                completed.push_back(std::move(hyp));
            } else if (static_cast<int>(active.size()) < k_or_width) {
                active.push_back(std::move(hyp));
            }
            if (static_cast<int>(active.size()) == k_or_width) break;
        }
    }
    const Hyp* best = nullptr;
    for (const auto& hyp : completed)
        if (!best || better(hyp, *best)) best = &hyp;
    for (const auto& hyp : active)
        if (!best || better(hyp, *best)) best = &hyp;
    if (!best) return {};
    std::vector<double> scores(best->generated.size(), 0.0);
    return detail::finalize(vocab, lm, best->generated, std::move(scores));
}

// Beam search with a per-constraint satisfaction bonus; the final hypothesis
// is chosen by satisfied-constraint count first, then score.
inline GenerationResult generate_lexically_constrained(
    const LanguageModel& lm, const Vocabulary& vocab, const std::vector<int>& prompt,
    const std::vector<std::vector<int>>& constraints, int beam_width,
    const DecodeConfig& config) {
    config.validate();
    detail::check_prompt(vocab, prompt);
    if (constraints.empty())
        throw std::invalid_argument("generate_lexically_constrained: no constraints");
    if (constraints.size() > 64)
        throw std::invalid_argument("generate_lexically_constrained: more than 64 constraints");
    constexpr double kBonus = 5.0;
    int instr_next = vocab.id(special::kInstrNext);
    int instr_end = vocab.id(special::kInstrEnd);

    auto newly_satisfied = [&](const std::vector<int>& generated, uint64_t mask) {
        uint64_t add = 0;
        for (size_t c = 0; c < constraints.size(); ++c) {
            if (mask & (uint64_t(1) << c)) continue;
            const auto& pat = constraints[c];
            if (pat.empty() || generated.size() < pat.size()) continue;
            if (std::equal(pat.begin(), pat.end(), generated.end() - pat.size()))
                add |= uint64_t(1) << c;
        }
        return add;
    };

    struct Hyp {
        std::vector<int> generated;
        double score = 0;
        uint64_t mask = 0;
        int instructions = 0;
        bool done = false;
        int satisfied() const { return __builtin_popcountll(mask); }
    };
    auto better_search = [](const Hyp& a, const Hyp& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.generated < b.generated;
    };
    auto better_final = [&](const Hyp& a, const Hyp& b) {
        if (a.satisfied() != b.satisfied()) return a.satisfied() > b.satisfied();
        return better_search(a, b);
    };

    std::vector<Hyp> active = {{}};
    std::vector<Hyp> completed;
    for (int step = 0; step < config.max_tokens && !active.empty(); ++step) {
        std::vector<Hyp> pool;
        for (const auto& hyp : active) {
            std::vector<int> ctx = prompt;
            ctx.insert(ctx.end(), hyp.generated.begin(), hyp.generated.end());
            for (const auto& cand : top_s(lm, ctx, beam_width)) {
                Hyp next = hyp;
                next.generated.push_back(cand.token);
                next.score += std::log(cand.prob);
                uint64_t add = newly_satisfied(next.generated, next.mask);
                next.mask |= add;
                next.score += kBonus * __builtin_popcountll(add);
                if (cand.token == instr_next) {
                    if (++next.instructions >= config.max_instructions) next.done = true;
                } else if (cand.token == instr_end || cand.token == lm.end_id()) {
                    next.done = true;
                }
                pool.push_back(std::move(next));
            }
        }
        std::sort(pool.begin(), pool.end(), better_search);
        active.clear();
        for (auto& hyp : pool) {
            if (hyp.done) {
                completed.push_back(std::move(hyp));
            } else if (static_cast<int>(active.size()) < beam_width) {
                active.push_back(std::move(hyp));
            }
            if (static_cast<int>(active.size()) == beam_width) break;
        }
    }
    const Hyp* best = nullptr;
    for (const auto& hyp : completed)
        if (!best || better_final(hyp, *best)) best = &hyp;
    for (const auto& hyp : active)
        if (!best || better_final(hyp, *best)) best = &hyp;
    if (!best) return {};
    auto result =
        detail::finalize(vocab, lm, best->generated, std::vector<double>(best->generated.size(), 0.0));
    result.satisfied_constraints = static_cast<size_t>(best->satisfied());
    return result;
}

}  // namespace plangen
