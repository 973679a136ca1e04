#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "plangen/lm.hpp"
#include "plangen/recipe.hpp"
#include "plangen/synthetic.hpp"

using namespace plangen;

namespace {

Vocabulary tiny_vocab(const std::vector<std::string>& words) {
    Vocabulary v;
    for (const auto& w : words) v.add(w);
    return v;
}

// Direct evaluation of interpolated absolute discounting, written
// independently of NGramLM for cross-checking.
double oracle_prob(const std::vector<std::vector<int>>& corpus, int order, double discount,
                   size_t dist_size, int eos, std::vector<int> context, int token, int n) {
    std::function<double(int)> p = [&](int m) -> double {
        std::map<std::vector<int>, std::map<int, long long>> counts;
        for (const auto& seq : corpus) {
            std::vector<int> padded(order - 1, NGramLM::kBos);
            padded.insert(padded.end(), seq.begin(), seq.end());
            padded.push_back(eos);
            for (size_t i = order - 1; i < padded.size(); ++i) {
                std::vector<int> ctx(padded.begin() + i - (m - 1), padded.begin() + i);
                ++counts[ctx][padded[i]];
            }
        }
        if (m == 1) {
            auto& node = counts[{}];
            long long total = 0;
            for (auto& [t, c] : node) total += c;
            if (total == 0) return 1.0 / dist_size;
            long long c = node.count(token) ? node[token] : 0;
            return std::max(double(c) - discount, 0.0) / total +
                   discount * node.size() / total / dist_size;
        }
        std::vector<int> ctx;
        for (int i = m - 1; i >= 1; --i) {
            long long pos = (long long)context.size() - i;
            ctx.push_back(pos < 0 ? NGramLM::kBos : context[pos]);
        }
        auto it = counts.find(ctx);
        if (it == counts.end()) return p(m - 1);
        long long total = 0;
        for (auto& [t, c] : it->second) total += c;
        if (total == 0) return p(m - 1);
        long long c = it->second.count(token) ? it->second[token] : 0;
        return std::max(double(c) - discount, 0.0) / total +
               discount * it->second.size() / total * p(m - 1);
    };
    return p(n);
}

}  // namespace

TEST_CASE("order-1 model reduces to smoothed unigram frequencies") {
    auto vocab = tiny_vocab({"a", "b"});
    int a = vocab.id("a"), b = vocab.id("b");
    auto lm = train_lm({{a, b, a}}, vocab, 1, 0.75);
    auto d1 = lm.next_distribution({});
    auto d2 = lm.next_distribution({b, b, a});
    REQUIRE(d1.size() == d2.size());
    for (size_t i = 0; i < d1.size(); ++i) CHECK(d1[i] == doctest::Approx(d2[i]));
}

TEST_CASE("bigram counts dominate: p(b|a) > p(a|a) on 'a b a b'") {
    auto vocab = tiny_vocab({"a", "b"});
    int a = vocab.id("a"), b = vocab.id("b");
    auto lm = train_lm({{a, b, a, b}}, vocab, 2, 0.75);
    auto dist = lm.next_distribution({a});
    CHECK(dist[b] > dist[a]);
    // exact hand values: c(a)=2 (successors b,b); p(b|a)=(2-.75)/2+.75*1/2*p1(b)
    double p1b = oracle_prob({{a, b, a, b}}, 2, 0.75, lm.distribution_size(), lm.end_id(),
                             {a}, b, 1);
    CHECK(dist[b] == doctest::Approx((2 - 0.75) / 2 + 0.75 * 1.0 / 2 * p1b).epsilon(1e-12));
}

TEST_CASE("probabilities match an independent evaluation on a hand corpus") {
    auto vocab = tiny_vocab({"x", "y", "z"});
    int x = vocab.id("x"), y = vocab.id("y"), z = vocab.id("z");
    std::vector<std::vector<int>> corpus = {{x, y, z}, {x, y, y}, {z, x, y}};
    auto lm = train_lm(corpus, vocab, 3, 0.6);
    std::vector<std::vector<int>> contexts = {{}, {x}, {x, y}, {y, y}, {z, x}, {y, z, x}};
    for (const auto& ctx : contexts) {
        auto dist = lm.next_distribution(ctx);
        for (int t = 0; t < (int)dist.size(); ++t) {
            double expect = oracle_prob(corpus, 3, 0.6, lm.distribution_size(), lm.end_id(),
                                        ctx, t, 3);
            CHECK(dist[t] == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("normalization and positivity sweep") {
    auto corpus = generate_synthetic_corpus(default_synthetic_spec(100, 3));
    std::vector<RecipeRecord> recipes;
    for (auto& [r, p] : corpus) recipes.push_back(r);
    auto vocab = build_vocabulary(recipes, 1);
    std::vector<std::vector<int>> seqs;
    for (const auto& r : recipes) seqs.push_back(vocab.encode(serialize_with_tokens(r)));
    auto lm = train_lm(seqs, vocab, 4, 0.75);

    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> len(0, 6), tok(0, (int)vocab.size() - 1);
    for (int i = 0; i < 1000; ++i) {
        std::vector<int> ctx;
        for (int j = len(rng); j > 0; --j) ctx.push_back(tok(rng));
        auto dist = lm.next_distribution(ctx);
        double sum = 0;
        for (double p : dist) {
            CHECK(p > 0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("unseen long contexts back off to the longest seen suffix") {
    auto vocab = tiny_vocab({"a", "b", "c"});
    int a = vocab.id("a"), b = vocab.id("b"), c = vocab.id("c");
    auto lm = train_lm({{a, b, c, a, b}}, vocab, 3, 0.75);
    // (c, c, b) unseen as trigram context; longest seen suffix path applies
    auto d1 = lm.next_distribution({c, c, a, b});
    auto d2 = lm.next_distribution({b, b, a, b});  // same suffix (a, b)
    for (size_t i = 0; i < d1.size(); ++i) CHECK(d1[i] == doctest::Approx(d2[i]));
}

TEST_CASE("top_s returns the S best tokens with id tie-breaking") {
    auto vocab = tiny_vocab({"a", "b", "c", "d"});
    auto lm = train_lm({{vocab.id("a"), vocab.id("b")}}, vocab, 2, 0.75);
    auto dist = lm.next_distribution({vocab.id("a")});

    auto full = top_s(lm, {vocab.id("a")}, (int)dist.size());
    // brute-force sort oracle
    std::vector<std::pair<double, int>> sorted;
    for (int t = 0; t < (int)dist.size(); ++t) sorted.push_back({-dist[t], t});
    std::sort(sorted.begin(), sorted.end());
    for (size_t i = 0; i < full.size(); ++i) {
        CHECK(full[i].token == sorted[i].second);
        CHECK(full[i].prob == doctest::Approx(-sorted[i].first));
    }

    auto one = top_s(lm, {vocab.id("a")}, 1);
    CHECK(one[0].token == sorted[0].second);
    CHECK_THROWS(top_s(lm, {}, 0));
    CHECK_THROWS(top_s(lm, {}, (int)dist.size() + 1));
}

TEST_CASE("perplexity limits") {
    struct Uniform : LanguageModel {
        size_t v;
        explicit Uniform(size_t v) : v(v) {}
        std::vector<double> next_distribution(const std::vector<int>&) const override {
            return std::vector<double>(v, 1.0 / v);
        }
        size_t distribution_size() const override { return v; }
    };
    Uniform uni(12);
    CHECK(perplexity(uni, {{0, 1, 2, 3}}) == doctest::Approx(12.0));

    // near-memorizing model on a one-sequence corpus
    auto vocab = tiny_vocab({"a", "b", "c"});
    std::vector<int> seq = {vocab.id("a"), vocab.id("b"), vocab.id("c")};
    std::vector<std::vector<int>> corpus(50, seq);
    auto lm = train_lm(corpus, vocab, 3, 0.05);
    CHECK(perplexity(lm, {seq}) < 1.3);

    CHECK_THROWS(perplexity(lm, {}));
}

TEST_CASE("held-out perplexity is at least training perplexity on synthetic data") {
    auto corpus = generate_synthetic_corpus(default_synthetic_spec(300, 77));
    std::vector<RecipeRecord> recipes;
    for (auto& [r, p] : corpus) recipes.push_back(r);
    auto vocab = build_vocabulary(recipes, 1);
    std::vector<std::vector<int>> train, heldout;
    for (size_t i = 0; i < recipes.size(); ++i) {
        auto seq = vocab.encode(serialize_with_tokens(recipes[i]));
        (i < 250 ? train : heldout).push_back(seq);
    }
    auto lm = train_lm(train, vocab, 4, 0.75);
    CHECK(perplexity(lm, train) <= perplexity(lm, heldout));
}

TEST_CASE("retraining on the same corpus gives identical distributions") {
    auto vocab = tiny_vocab({"a", "b", "c"});
    std::vector<std::vector<int>> corpus = {
        {vocab.id("a"), vocab.id("b")}, {vocab.id("b"), vocab.id("c")}};
    auto lm1 = train_lm(corpus, vocab, 2, 0.75);
    auto lm2 = train_lm(corpus, vocab, 2, 0.75);
    auto d1 = lm1.next_distribution({vocab.id("b")});
    auto d2 = lm2.next_distribution({vocab.id("b")});
    for (size_t i = 0; i < d1.size(); ++i) CHECK(d1[i] == d2[i]);
}

TEST_CASE("lm round-trips through serialization") {
    auto vocab = tiny_vocab({"a", "b", "c"});
    std::vector<std::vector<int>> corpus = {
        {vocab.id("a"), vocab.id("b"), vocab.id("c")}, {vocab.id("c"), vocab.id("b")}};
    auto lm = train_lm(corpus, vocab, 3, 0.7);
    std::stringstream ss;
    lm.save(ss);
    auto loaded = NGramLM::load(ss);
    std::vector<std::vector<int>> contexts = {{}, {vocab.id("a")}, {vocab.id("a"), vocab.id("b")}};
    for (const auto& ctx : contexts) {
        auto d1 = lm.next_distribution(ctx);
        auto d2 = loaded.next_distribution(ctx);
        REQUIRE(d1.size() == d2.size());
        for (size_t i = 0; i < d1.size(); ++i) CHECK(d1[i] == doctest::Approx(d2[i]).epsilon(1e-15));
    }
}

TEST_CASE("train_lm input validation") {
    auto vocab = tiny_vocab({"a"});
    CHECK_THROWS(train_lm({}, vocab, 2, 0.75));
    CHECK_THROWS(NGramLM(vocab, 0, 0.75));
    CHECK_THROWS(NGramLM(vocab, 2, 0.0));
    CHECK_THROWS(NGramLM(vocab, 2, 1.0));
}
