#pragma once

// Sequence generator abstraction and the built-in interpolated
// absolute-discounting n-gram implementation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "plangen/token.hpp"

namespace plangen {

// Next-token distribution provider. Distributions cover the vocabulary plus,
// when end_id() >= 0, one trailing end-of-sequence entry at that index.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;
    virtual std::vector<double> next_distribution(const std::vector<int>& context) const = 0;
    virtual size_t distribution_size() const = 0;
    virtual int end_id() const { return -1; }
};

struct ScoredToken {
    int token = 0;
    double prob = 0;
};

// The S highest-probability tokens, descending; ties broken by ascending
// token id. Probabilities are the raw LM values.
inline std::vector<ScoredToken> top_s(const LanguageModel& model,
                                      const std::vector<int>& context, int s = 5) {
    auto dist = model.next_distribution(context);
    if (s < 1 || static_cast<size_t>(s) > dist.size())
        throw std::invalid_argument("top_s: S out of range");
    std::vector<ScoredToken> all(dist.size());
    for (size_t i = 0; i < dist.size(); ++i) all[i] = {static_cast<int>(i), dist[i]};
    std::partial_sort(all.begin(), all.begin() + s, all.end(),
                      [](const ScoredToken& a, const ScoredToken& b) {
                          if (a.prob != b.prob) return a.prob > b.prob;
                          return a.token < b.token;
                      });
    all.resize(s);
    return all;
}

class NGramLM : public LanguageModel {
public:
    NGramLM(Vocabulary vocab, int order, double discount)
        : vocab_(std::move(vocab)), order_(order), discount_(discount) {
        if (order_ < 1) throw std::invalid_argument("NGramLM: order < 1");
        if (discount_ <= 0 || discount_ >= 1)
            throw std::invalid_argument("NGramLM: discount must be in (0,1)");
        contexts_.resize(order_);
    }

    const Vocabulary& vocab() const { return vocab_; }
    int order() const { return order_; }
    double discount() const { return discount_; }
    // The end-of-sequence marker occupies one slot past the vocabulary.
    int end_id() const override { return static_cast<int>(vocab_.size()); }
    size_t distribution_size() const override { return vocab_.size() + 1; }

    void add_sequence(const std::vector<int>& tokens) {
        std::vector<int> padded;
        padded.reserve(tokens.size() + order_);
        for (int i = 0; i < order_ - 1; ++i) padded.push_back(kBos);
        padded.insert(padded.end(), tokens.begin(), tokens.end());
        padded.push_back(end_id());
        for (size_t i = static_cast<size_t>(order_ - 1); i < padded.size(); ++i) {
            for (int n = 1; n <= order_; ++n) {
                std::vector<int> ctx(padded.begin() + i - (n - 1), padded.begin() + i);
                auto& node = contexts_[n - 1][ctx];
                ++node.total;
                ++node.counts[padded[i]];
            }
        }
    }

    // Interpolated absolute discounting with a uniform floor at the unigram
    // level; contexts with zero count back off entirely to the next order.
    std::vector<double> next_distribution(const std::vector<int>& context) const override {
        size_t v = distribution_size();
        std::vector<double> dist(v);
        for (size_t w = 0; w < v; ++w) dist[w] = prob(context, static_cast<int>(w), order_);
        return dist;
    }

    double token_prob(const std::vector<int>& context, int token) const {
        return prob(context, token, order_);
    }

    void save(std::ostream& os) const {
        os << "plangen-ngramlm v1\n";
        os << "order\t" << order_ << '\n';
        char buf[64];
        std::snprintf(buf, sizeof buf, "discount\t%.17g\n", discount_);
        os << buf;
        os << "vocab_begin\n";
        vocab_.save(os);
        os << "vocab_end\n";
        for (int n = 1; n <= order_; ++n) {
            for (const auto& [ctx, node] : contexts_[n - 1]) {
                for (const auto& [tok, cnt] : node.counts) {
                    os << "c\t" << n << '\t';
                    for (size_t i = 0; i < ctx.size(); ++i) os << (i ? " " : "") << ctx[i];
                    os << '\t' << tok << '\t' << cnt << '\n';
                }
            }
        }
    }

    static NGramLM load(std::istream& is) {
        std::string line;
        if (!std::getline(is, line) || line != "plangen-ngramlm v1")
            throw std::runtime_error("lm model: bad format tag");
        if (!std::getline(is, line) || line.rfind("order\t", 0) != 0)
            throw std::runtime_error("lm model: missing order");
        int order = std::stoi(line.substr(6));
        if (!std::getline(is, line) || line.rfind("discount\t", 0) != 0)
            throw std::runtime_error("lm model: missing discount");
        double discount = std::stod(line.substr(9));
        if (!std::getline(is, line) || line != "vocab_begin")
            throw std::runtime_error("lm model: missing vocabulary");
        std::string vocab_text;
        while (std::getline(is, line) && line != "vocab_end") vocab_text += line + "\n";
        std::istringstream vs(vocab_text);
        NGramLM lm(Vocabulary::load(vs), order, discount);
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::string tag, ctx_field;
            int n, tok;
            long long cnt;
            if (!std::getline(ls, tag, '\t') || tag != "c")
                throw std::runtime_error("lm model: bad line: " + line);
            std::string n_field;
            std::getline(ls, n_field, '\t');
            std::getline(ls, ctx_field, '\t');
            ls >> tok >> cnt;
            n = std::stoi(n_field);
            std::vector<int> ctx;
            std::istringstream cs(ctx_field);
            int id;
            while (cs >> id) ctx.push_back(id);
            auto& node = lm.contexts_[n - 1][ctx];
            node.counts[tok] = cnt;
            node.total += cnt;
        }
        return lm;
    }

    static constexpr int kBos = -1;

private:
    struct Node {
        long long total = 0;
        std::map<int, long long> counts;
    };

    double prob(const std::vector<int>& context, int token, int n) const {
        if (n == 1) {
            auto it = contexts_[0].find({});
            double v = static_cast<double>(distribution_size());
            if (it == contexts_[0].end() || it->second.total == 0) return 1.0 / v;
            const Node& node = it->second;
            double total = static_cast<double>(node.total);
            double types = static_cast<double>(node.counts.size());
            auto ct = node.counts.find(token);
            double c = ct == node.counts.end() ? 0.0 : static_cast<double>(ct->second);
            return std::max(c - discount_, 0.0) / total + discount_ * types / total / v;
        }
        std::vector<int> ctx = suffix(context, n - 1);
        auto it = contexts_[n - 1].find(ctx);
        if (it == contexts_[n - 1].end() || it->second.total == 0)
            return prob(context, token, n - 1);
        const Node& node = it->second;
        double total = static_cast<double>(node.total);
        double types = static_cast<double>(node.counts.size());
        auto ct = node.counts.find(token);
        double c = ct == node.counts.end() ? 0.0 : static_cast<double>(ct->second);
        return std::max(c - discount_, 0.0) / total +
               discount_ * types / total * prob(context, token, n - 1);
    }

    std::vector<int> suffix(const std::vector<int>& context, int len) const {
        std::vector<int> ctx;
        ctx.reserve(len);
        for (int i = len; i >= 1; --i) {
            long long pos = static_cast<long long>(context.size()) - i;
            ctx.push_back(pos < 0 ? kBos : context[static_cast<size_t>(pos)]);
        }
        return ctx;
    }

    Vocabulary vocab_;
    int order_;
    double discount_;
    // contexts_[n-1]: (n-1)-token context -> successor counts
    std::vector<std::map<std::vector<int>, Node>> contexts_;
};

inline NGramLM train_lm(const std::vector<std::vector<int>>& corpus, Vocabulary vocab,
                        int order = 4, double discount = 0.75) {
    if (corpus.empty()) throw std::invalid_argument("train_lm: empty corpus");
    NGramLM lm(std::move(vocab), order, discount);
    for (const auto& seq : corpus) lm.add_sequence(seq);
    return lm;
}

inline double perplexity(const LanguageModel& model,
                         const std::vector<std::vector<int>>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("perplexity: empty corpus");
    double log_sum = 0;
    size_t n_tokens = 0;
    for (const auto& seq : corpus) {
        std::vector<int> ctx;
        for (int tok : seq) {
            log_sum += std::log(model.next_distribution(ctx)[tok]);
            ctx.push_back(tok);
            ++n_tokens;
        }
        if (model.end_id() >= 0) {
            log_sum += std::log(model.next_distribution(ctx)[model.end_id()]);
            ++n_tokens;
        }
    }
    return std::exp(-log_sum / static_cast<double>(n_tokens));
}

}  // namespace plangen
