#pragma once

// Partial-sequence stage classifier: a smoothed count-based linear classifier
// over unigram and bigram token features, returning a full 7-way distribution.

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "plangen/recipe.hpp"
#include "plangen/stage.hpp"
#include "plangen/token.hpp"

namespace plangen {

struct PartialInstruction {
    std::vector<std::string> tokens;
    StageLabel label;
};

// Emits, per instruction, the full instruction plus (truncations_per_instruction - 1)
// uniform-random prefixes of length >= min_prefix, all carrying the
// instruction's silver stage label.
inline std::vector<PartialInstruction> make_partial_dataset(
    const std::vector<RecipeRecord>& corpus, const std::vector<ContentPlan>& plans,
    int truncations_per_instruction = 7, int min_prefix = 1, uint64_t seed = 1) {
    if (corpus.size() != plans.size())
        throw std::invalid_argument("make_partial_dataset: corpus/plan count mismatch");
    std::mt19937_64 rng(seed);
    std::vector<PartialInstruction> out;
    for (size_t r = 0; r < corpus.size(); ++r) {
        if (corpus[r].instructions.size() != plans[r].size())
            throw std::invalid_argument("make_partial_dataset: plan length mismatch at record " +
                                        std::to_string(r));
        for (size_t i = 0; i < corpus[r].instructions.size(); ++i) {
            const auto& instr = corpus[r].instructions[i];
            StageLabel label = plans[r][i];
            out.push_back({instr, label});
            int max_prefix = static_cast<int>(instr.size());
            if (max_prefix <= min_prefix) continue;
            std::uniform_int_distribution<int> len_dist(min_prefix, max_prefix);
            for (int t = 1; t < truncations_per_instruction; ++t) {
                int len = len_dist(rng);
                out.push_back({{instr.begin(), instr.begin() + len}, label});
            }
        }
    }
    return out;
}

struct ClassifierHyper {
    double smoothing = 1e-3;  // additive, applied to per-class relative frequencies
};

class StageClassifier {
public:
    // Fitted from per-class relative feature frequencies, so duplicating the
    // training set leaves the model unchanged.
    static StageClassifier train(const std::vector<PartialInstruction>& data,
                                 ClassifierHyper hyper = {}, uint64_t seed = 1) {
        (void)seed;  // training is count-based and has no randomness
        if (data.empty()) throw std::invalid_argument("train_classifier: empty data");
        StageClassifier clf;
        clf.smoothing_ = hyper.smoothing;

        std::array<double, kNumStages> class_counts{};
        std::array<std::map<std::string, double>, kNumStages> uni_counts, bi_counts;
        std::array<double, kNumStages> uni_totals{}, bi_totals{};
        for (const auto& ex : data) {
            int c = stage_index(ex.label);
            class_counts[c] += 1;
            auto feats = features(ex.tokens);
            for (const auto& u : feats.first) {
                uni_counts[c][u] += 1;
                uni_totals[c] += 1;
                clf.known_unigrams_.insert(u);
            }
            for (const auto& b : feats.second) {
                bi_counts[c][b] += 1;
                bi_totals[c] += 1;
                clf.known_bigrams_.insert(b);
            }
        }
        double total = static_cast<double>(data.size());
        for (int c = 0; c < kNumStages; ++c) {
            // Priors come from relative class frequencies plus a floor so
            // absent classes keep nonzero mass.
            double rel = class_counts[c] / total;
            clf.prior_[c] = (rel + hyper.smoothing) / (1.0 + hyper.smoothing * kNumStages);
            for (const auto& [f, n] : uni_counts[c])
                clf.uni_freq_[c][f] = uni_totals[c] > 0 ? n / uni_totals[c] : 0.0;
            for (const auto& [f, n] : bi_counts[c])
                clf.bi_freq_[c][f] = bi_totals[c] > 0 ? n / bi_totals[c] : 0.0;
        }
        return clf;
    }

    // Normalized 7-way distribution for a (partial) instruction. Special
    // separation tokens are stripped; inputs with no known features fall back
    // to the class prior.
    std::array<double, kNumStages> classify(const std::vector<std::string>& partial) const {
        std::vector<std::string> content;
        for (const auto& t : partial)
            if (!special::is_special(t)) content.push_back(t);
        if (content.empty())
            throw std::invalid_argument("classify: empty partial instruction");
        return scores_for(content);
    }

    std::array<double, kNumStages> prior() const {
        std::array<double, kNumStages> p = prior_;
        double sum = 0;
        for (double x : p) sum += x;
        for (auto& x : p) x /= sum;
        return p;
    }

    double evaluate(const std::vector<PartialInstruction>& labeled) const {
        if (labeled.empty()) throw std::invalid_argument("evaluate_classifier: empty data");
        size_t correct = 0;
        for (const auto& ex : labeled) {
            auto dist = classify(ex.tokens);
            int best = 0;
            for (int c = 1; c < kNumStages; ++c)
                if (dist[c] > dist[best]) best = c;
            if (best == stage_index(ex.label)) ++correct;
        }
        return 100.0 * static_cast<double>(correct) / static_cast<double>(labeled.size());
    }

    void save(std::ostream& os) const {
        os << "plangen-classifier v1\n";
        os << "smoothing\t" << format(smoothing_) << '\n';
        for (int c = 0; c < kNumStages; ++c)
            os << "prior\t" << to_string(static_cast<StageLabel>(c)) << '\t'
               << format(prior_[c]) << '\n';
        for (int c = 0; c < kNumStages; ++c)
            for (const auto& [f, v] : uni_freq_[c])
                os << "uni\t" << to_string(static_cast<StageLabel>(c)) << '\t' << f << '\t'
                   << format(v) << '\n';
        for (int c = 0; c < kNumStages; ++c)
            for (const auto& [f, v] : bi_freq_[c])
                os << "bi\t" << to_string(static_cast<StageLabel>(c)) << '\t' << f << '\t'
                   << format(v) << '\n';
    }

    static StageClassifier load(std::istream& is) {
        StageClassifier clf;
        std::string line;
        if (!std::getline(is, line) || line != "plangen-classifier v1")
            throw std::runtime_error("classifier model: bad format tag");
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::vector<std::string> parts = split_tabs(line);
            if (parts[0] == "smoothing" && parts.size() == 2) {
                clf.smoothing_ = std::stod(parts[1]);
            } else if (parts[0] == "prior" && parts.size() == 3) {
                clf.prior_[stage_index(stage_from_string(parts[1]))] = std::stod(parts[2]);
            } else if (parts[0] == "uni" && parts.size() == 4) {
                int c = stage_index(stage_from_string(parts[1]));
                clf.uni_freq_[c][parts[2]] = std::stod(parts[3]);
                clf.known_unigrams_.insert(parts[2]);
            } else if (parts[0] == "bi" && parts.size() == 4) {
                int c = stage_index(stage_from_string(parts[1]));
                clf.bi_freq_[c][parts[2]] = std::stod(parts[3]);
                clf.known_bigrams_.insert(parts[2]);
            } else {
                throw std::runtime_error("classifier model: bad line: " + line);
            }
        }
        return clf;
    }

private:
    static std::pair<std::vector<std::string>, std::vector<std::string>> features(
        const std::vector<std::string>& tokens) {
        std::vector<std::string> unis, bis;
        for (const auto& t : tokens)
            if (!special::is_special(t)) unis.push_back(t);
        for (size_t i = 0; i + 1 < unis.size(); ++i)
            bis.push_back(unis[i] + "\x1f" + unis[i + 1]);
        return {std::move(unis), std::move(bis)};
    }

    std::array<double, kNumStages> scores_for(const std::vector<std::string>& content) const {
        auto [unis, bis] = features(content);
        std::array<double, kNumStages> log_score{};
        for (int c = 0; c < kNumStages; ++c) log_score[c] = std::log(prior_[c]);

        double uni_denom = 1.0 + smoothing_ * static_cast<double>(known_unigrams_.size());
        double bi_denom = 1.0 + smoothing_ * static_cast<double>(known_bigrams_.size());
        auto accumulate = [&](const std::vector<std::string>& feats,
                              const std::unordered_set<std::string>& known,
                              const std::array<std::map<std::string, double>, kNumStages>& freq,
                              double denom) {
            for (const auto& f : feats) {
                if (!known.count(f)) continue;  // unseen features carry no evidence
                for (int c = 0; c < kNumStages; ++c) {
                    auto it = freq[c].find(f);
                    double rel = it == freq[c].end() ? 0.0 : it->second;
                    log_score[c] += std::log((rel + smoothing_) / denom);
                }
            }
        };
        accumulate(unis, known_unigrams_, uni_freq_, uni_denom);
        accumulate(bis, known_bigrams_, bi_freq_, bi_denom);

        double max_ls = log_score[0];
        for (double s : log_score) max_ls = std::max(max_ls, s);
        std::array<double, kNumStages> dist{};
        double sum = 0;
        for (int c = 0; c < kNumStages; ++c) {
            dist[c] = std::exp(log_score[c] - max_ls);
            sum += dist[c];
        }
        for (auto& d : dist) d /= sum;
        return dist;
    }

    static std::vector<std::string> split_tabs(const std::string& line) {
        std::vector<std::string> parts;
        size_t start = 0;
        while (true) {
            size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                parts.push_back(line.substr(start));
                break;
            }
            parts.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        return parts;
    }

    static std::string format(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    double smoothing_ = 0.1;
    std::array<double, kNumStages> prior_{};
    std::array<std::map<std::string, double>, kNumStages> uni_freq_, bi_freq_;
    std::unordered_set<std::string> known_unigrams_, known_bigrams_;
};

inline StageClassifier train_classifier(const std::vector<PartialInstruction>& data,
                                        ClassifierHyper hyper = {}, uint64_t seed = 1) {
    return StageClassifier::train(data, hyper, seed);
}

}  // namespace plangen
