#pragma once

// Content planner: autoregressive log-linear model over stage sequences with
// an explicit END symbol, conditioned on bag-of-token input features, plus
// beam-search plan prediction and the match-rate evaluation suite.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "plangen/recipe.hpp"
#include "plangen/stage.hpp"
#include "plangen/token.hpp"

namespace plangen {

inline constexpr int kNumPlanSymbols = kNumStages + 1;  // stages + END
inline constexpr int kEndSymbol = kNumStages;
inline constexpr int kHistoryBos = kNumStages;  // BOS slot in history one-hots
inline constexpr int kTitleBuckets = 4;
inline constexpr int kIngrBuckets = 4;
inline constexpr int kPositionBuckets = kMaxPlanLength + 1;

struct InputFeatures {
    std::vector<int> token_ids;  // sorted, unique, known vocab ids only
    int title_bucket = 0;
    int ingredient_bucket = 0;
};

inline InputFeatures featurize_input(const RecipeRecord& recipe,
                                     const Vocabulary& feature_vocab) {
    InputFeatures f;
    auto add = [&](const std::vector<std::string>& toks) {
        for (const auto& t : toks) {
            int id = feature_vocab.id(t);
            if (id != Vocabulary::kUnkId) f.token_ids.push_back(id);
        }
    };
    add(recipe.title);
    for (const auto& ing : recipe.ingredients) add(ing);
    std::sort(f.token_ids.begin(), f.token_ids.end());
    f.token_ids.erase(std::unique(f.token_ids.begin(), f.token_ids.end()),
                      f.token_ids.end());
    f.title_bucket = std::min(static_cast<int>(recipe.title.size()), kTitleBuckets - 1);
    f.ingredient_bucket =
        std::min(static_cast<int>(recipe.ingredients.size()), kIngrBuckets - 1);
    return f;
}

struct PlannerHyper {
    double learning_rate = 0.5;
    int epochs = 150;
    double l2 = 1e-4;
    int history_k = 2;
    uint64_t seed = 1;
};

struct PlannerReport {
    double unigram = 0, bigram = 0, trigram = 0, exact = 0;  // percent
    std::array<size_t, kMaxPlanLength + 1> predicted_lengths{};
    std::array<size_t, kMaxPlanLength + 1> reference_lengths{};
    size_t example_count = 0;
    std::string averaging = "micro (n-gram), macro (exact)";
};

class PlanModel {
public:
    PlanModel(int history_k, Vocabulary feature_vocab)
        : history_k_(history_k), vocab_(std::move(feature_vocab)) {
        if (history_k_ < 0) throw std::invalid_argument("PlanModel: history_k < 0");
        dim_ = 1 + static_cast<size_t>(history_k_) * (kNumStages + 1) + kPositionBuckets +
               kTitleBuckets + kIngrBuckets + vocab_.size();
        weights_.assign(static_cast<size_t>(kNumPlanSymbols) * dim_, 0.0);
    }

    int history_k() const { return history_k_; }
    size_t dim() const { return dim_; }
    const Vocabulary& feature_vocab() const { return vocab_; }

    double& weight(int symbol, size_t feature) { return weights_[symbol * dim_ + feature]; }
    double weight(int symbol, size_t feature) const { return weights_[symbol * dim_ + feature]; }

    // Active feature indices for the state (history suffix, position, input).
    std::vector<size_t> active_features(const ContentPlan& prefix,
                                        const InputFeatures& features) const {
        std::vector<size_t> idx;
        idx.reserve(4 + history_k_ + features.token_ids.size());
        size_t base = 0;
        idx.push_back(base);  // bias
        base += 1;
        int pos = static_cast<int>(prefix.size());
        for (int h = 1; h <= history_k_; ++h) {
            int sym = pos - h >= 0 ? stage_index(prefix[pos - h]) : kHistoryBos;
            idx.push_back(base + static_cast<size_t>(sym));
            base += kNumStages + 1;
        }
        idx.push_back(base + static_cast<size_t>(std::min(pos, kMaxPlanLength)));
        base += kPositionBuckets;
        idx.push_back(base + static_cast<size_t>(features.title_bucket));
        base += kTitleBuckets;
        idx.push_back(base + static_cast<size_t>(features.ingredient_bucket));
        base += kIngrBuckets;
        for (int id : features.token_ids)
            if (id >= 0 && static_cast<size_t>(id) < vocab_.size())
                idx.push_back(base + static_cast<size_t>(id));
        return idx;
    }

    std::array<double, kNumPlanSymbols> next_log_probs(const ContentPlan& prefix,
                                                       const InputFeatures& features) const {
        return log_softmax(active_features(prefix, features));
    }

    double plan_logprob(const ContentPlan& plan, const InputFeatures& features) const {
        if (plan.empty()) throw std::invalid_argument("plan_logprob: empty plan");
        if (plan.size() > kMaxPlanLength)
            throw std::invalid_argument("plan_logprob: plan longer than 15");
        double total = 0;
        ContentPlan prefix;
        for (StageLabel s : plan) {
            total += next_log_probs(prefix, features)[stage_index(s)];
            prefix.push_back(s);
        }
        total += next_log_probs(prefix, features)[kEndSymbol];
        return total;
    }

    // Beam search over stage symbols; END completes a hypothesis; no length
    // normalization. Falls back to the best max_len hypothesis when nothing
    // completes.
    ContentPlan predict(const InputFeatures& features, int beam_width,
                        int max_len = kMaxPlanLength) const {
        if (beam_width < 1) throw std::invalid_argument("predict_plan: beam_width < 1");
        struct Hyp {
            ContentPlan plan;
            double score = 0;
        };
        auto better = [](const Hyp& a, const Hyp& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.plan < b.plan;
        };
        std::vector<Hyp> active = {{{}, 0.0}};
        Hyp best_complete;
        bool have_complete = false;
        for (int step = 0; step < max_len && !active.empty(); ++step) {
            std::vector<Hyp> pool;
            pool.reserve(active.size() * kNumPlanSymbols);
            for (const auto& hyp : active) {
                auto lp = next_log_probs(hyp.plan, features);
                for (int sym = 0; sym < kNumPlanSymbols; ++sym) {
                    Hyp next{hyp.plan, hyp.score + lp[sym]};
                    if (sym != kEndSymbol) next.plan.push_back(static_cast<StageLabel>(sym));
                    else if (next.plan.empty()) continue;  // plans have length >= 1
                    pool.push_back(std::move(next));
                }
            }
            std::sort(pool.begin(), pool.end(), better);
            active.clear();
            for (const auto& hyp : pool) {
                if (hyp.plan.size() == static_cast<size_t>(step)) {
                    // ended in END this step
                    if (!have_complete || better(hyp, best_complete)) {
                        best_complete = hyp;
                        have_complete = true;
                    }
                } else if (static_cast<int>(active.size()) < beam_width) {
                    active.push_back(hyp);
                }
                if (static_cast<int>(active.size()) == beam_width) break;
            }
        }
        // Hypotheses that reached max_len still end with the END symbol; give
        // them their completion term so they compete on full plan probability.
        for (const auto& hyp : active) {
            if (hyp.plan.empty()) continue;
            Hyp done{hyp.plan, hyp.score + next_log_probs(hyp.plan, features)[kEndSymbol]};
            if (!have_complete || better(done, best_complete)) {
                best_complete = std::move(done);
                have_complete = true;
            }
        }
        if (have_complete) return best_complete.plan;
        if (active.empty()) throw std::logic_error("predict_plan: no hypotheses");
        return active.front().plan;
    }

    void save(std::ostream& os) const {
        os << "plangen-planner v1\n";
        os << "history_k\t" << history_k_ << '\n';
        os << "dim\t" << dim_ << '\n';
        os << "vocab_begin\n";
        vocab_.save(os);
        os << "vocab_end\n";
        for (int sym = 0; sym < kNumPlanSymbols; ++sym)
            for (size_t f = 0; f < dim_; ++f) {
                double w = weight(sym, f);
                if (w != 0.0) {
                    char buf[48];
                    std::snprintf(buf, sizeof buf, "w\t%d\t%zu\t%.17g\n", sym, f, w);
                    os << buf;
                }
            }
    }

    static PlanModel load(std::istream& is) {
        std::string line;
        if (!std::getline(is, line) || line != "plangen-planner v1")
            throw std::runtime_error("planner model: bad format tag");
        int history_k = -1;
        size_t dim = 0;
        if (!std::getline(is, line) || line.rfind("history_k\t", 0) != 0)
            throw std::runtime_error("planner model: missing history_k");
        history_k = std::stoi(line.substr(10));
        if (!std::getline(is, line) || line.rfind("dim\t", 0) != 0)
            throw std::runtime_error("planner model: missing dim");
        dim = std::stoul(line.substr(4));
        if (!std::getline(is, line) || line != "vocab_begin")
            throw std::runtime_error("planner model: missing vocabulary");
        std::string vocab_text;
        while (std::getline(is, line) && line != "vocab_end") vocab_text += line + "\n";
        std::istringstream vs(vocab_text);
        PlanModel model(history_k, Vocabulary::load(vs));
        if (model.dim_ != dim) throw std::runtime_error("planner model: dimension mismatch");
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            int sym;
            size_t f;
            double w;
            if (std::sscanf(line.c_str(), "w\t%d\t%zu\t%lg", &sym, &f, &w) != 3)
                throw std::runtime_error("planner model: bad weight line: " + line);
            model.weight(sym, f) = w;
        }
        return model;
    }

private:
    std::array<double, kNumPlanSymbols> log_softmax(const std::vector<size_t>& active) const {
        std::array<double, kNumPlanSymbols> logits{};
        for (int sym = 0; sym < kNumPlanSymbols; ++sym) {
            double z = 0;
            const double* row = weights_.data() + static_cast<size_t>(sym) * dim_;
            for (size_t f : active) z += row[f];
            logits[sym] = z;
        }
        double max_l = *std::max_element(logits.begin(), logits.end());
        double sum = 0;
        for (double l : logits) sum += std::exp(l - max_l);
        double log_z = max_l + std::log(sum);
        for (auto& l : logits) l -= log_z;
        return logits;
    }

    int history_k_;
    size_t dim_ = 0;
    Vocabulary vocab_;
    std::vector<double> weights_;
};

// Full-batch gradient descent on the regularized negative log-likelihood of
// next-symbol predictions (teacher forcing, explicit END target). The step
// size is halved whenever a step would increase the loss, so the per-epoch
// loss is non-increasing.
inline PlanModel train_planner(const std::vector<std::pair<InputFeatures, ContentPlan>>& data,
                               const Vocabulary& feature_vocab,
                               const PlannerHyper& hyper = {}) {
    if (data.empty()) throw std::invalid_argument("train_planner: empty data");
    for (const auto& [f, plan] : data)
        if (plan.empty() || plan.size() > kMaxPlanLength)
            throw std::invalid_argument("train_planner: plan length must be in [1,15]");

    PlanModel model(hyper.history_k, feature_vocab);
    const size_t dim = model.dim();

    struct Example {
        std::vector<size_t> active;
        int target;
    };
    std::vector<Example> examples;
    for (const auto& [features, plan] : data) {
        ContentPlan prefix;
        for (StageLabel s : plan) {
            examples.push_back({model.active_features(prefix, features), stage_index(s)});
            prefix.push_back(s);
        }
        examples.push_back({model.active_features(prefix, features), kEndSymbol});
    }
    const double n = static_cast<double>(examples.size());

    auto eval = [&](const std::vector<double>& w, std::vector<double>* grad) {
        double loss = 0;
        if (grad) std::fill(grad->begin(), grad->end(), 0.0);
        for (const auto& ex : examples) {
            std::array<double, kNumPlanSymbols> logits{};
            for (int sym = 0; sym < kNumPlanSymbols; ++sym) {
                const double* row = w.data() + static_cast<size_t>(sym) * dim;
                double z = 0;
                for (size_t f : ex.active) z += row[f];
                logits[sym] = z;
            }
            double max_l = *std::max_element(logits.begin(), logits.end());
            double sum = 0;
            for (double l : logits) sum += std::exp(l - max_l);
            double log_z = max_l + std::log(sum);
            loss -= (logits[ex.target] - log_z) / n;
            if (grad) {
                for (int sym = 0; sym < kNumPlanSymbols; ++sym) {
                    double p = std::exp(logits[sym] - log_z);
                    double g = (p - (sym == ex.target ? 1.0 : 0.0)) / n;
                    double* row = grad->data() + static_cast<size_t>(sym) * dim;
                    for (size_t f : ex.active) row[f] += g;
                }
            }
        }
        for (size_t i = 0; i < w.size(); ++i) {
            loss += hyper.l2 * w[i] * w[i];
            if (grad) (*grad)[i] += 2.0 * hyper.l2 * w[i];
        }
        if (!std::isfinite(loss)) throw std::runtime_error("train_planner: non-finite loss");
        return loss;
    };

    std::vector<double> w(static_cast<size_t>(kNumPlanSymbols) * dim, 0.0);
    std::vector<double> grad(w.size(), 0.0);
    double lr = hyper.learning_rate;
    double prev_loss = eval(w, &grad);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::vector<double> candidate(w.size());
        double loss = prev_loss;
        int halvings = 0;
        while (true) {
            for (size_t i = 0; i < w.size(); ++i) candidate[i] = w[i] - lr * grad[i];
            loss = eval(candidate, nullptr);
            if (loss <= prev_loss + 1e-12 || halvings >= 40) break;
            lr *= 0.5;
            ++halvings;
        }
        if (loss > prev_loss + 1e-12) break;  // no improving step found
        w.swap(candidate);
        prev_loss = eval(w, &grad);
    }
    for (int sym = 0; sym < kNumPlanSymbols; ++sym)
        for (size_t f = 0; f < dim; ++f)
            model.weight(sym, f) = w[static_cast<size_t>(sym) * dim + f];
    return model;
}

inline double plan_logprob(const PlanModel& model, const ContentPlan& plan,
                           const InputFeatures& features) {
    return model.plan_logprob(plan, features);
}

inline ContentPlan predict_plan(const PlanModel& model, const InputFeatures& features,
                                int beam_width, int max_len = kMaxPlanLength) {
    return model.predict(features, beam_width, max_len);
}

namespace detail {

inline std::map<std::vector<int>, int> plan_ngrams(const ContentPlan& plan, int n) {
    std::map<std::vector<int>, int> counts;
    for (size_t i = 0; i + n <= plan.size(); ++i) {
        std::vector<int> gram;
        for (int j = 0; j < n; ++j) gram.push_back(stage_index(plan[i + j]));
        ++counts[gram];
    }
    return counts;
}

}  // namespace detail

inline PlannerReport evaluate_planner(
    const PlanModel& model,
    const std::vector<std::pair<InputFeatures, ContentPlan>>& testset,
    int beam_width = 5) {
    if (testset.empty()) throw std::invalid_argument("evaluate_planner: empty test set");
    PlannerReport report;
    report.example_count = testset.size();

    std::array<double, 3> clipped{}, total{};
    double exact_sum = 0;
    for (const auto& [features, reference] : testset) {
        ContentPlan predicted = model.predict(features, beam_width);
        for (int n = 1; n <= 3; ++n) {
            auto pred_grams = detail::plan_ngrams(predicted, n);
            auto ref_grams = detail::plan_ngrams(reference, n);
            for (const auto& [gram, cnt] : pred_grams) {
                total[n - 1] += cnt;
                auto it = ref_grams.find(gram);
                if (it != ref_grams.end()) clipped[n - 1] += std::min(cnt, it->second);
            }
        }
        size_t matches = 0;
        for (size_t i = 0; i < std::min(predicted.size(), reference.size()); ++i)
            if (predicted[i] == reference[i]) ++matches;
        exact_sum += 100.0 * static_cast<double>(matches) / static_cast<double>(reference.size());

        ++report.predicted_lengths[std::min(predicted.size(), size_t(kMaxPlanLength))];
        ++report.reference_lengths[std::min(reference.size(), size_t(kMaxPlanLength))];
    }
    auto rate = [&](int i) { return total[i] > 0 ? 100.0 * clipped[i] / total[i] : 0.0; };
    report.unigram = rate(0);
    report.bigram = rate(1);
    report.trigram = rate(2);
    report.exact = exact_sum / static_cast<double>(testset.size());
    return report;
}

}  // namespace plangen
