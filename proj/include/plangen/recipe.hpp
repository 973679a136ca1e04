#pragma once

// Recipe records: ingestion, filtering/truncation, serialization with the
// special separation tokens, vocabulary building and corpus splits.

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "plangen/token.hpp"

namespace plangen {

struct RecipeRecord {
    std::string id;
    std::vector<std::string> title;
    std::vector<std::vector<std::string>> ingredients;
    std::vector<std::vector<std::string>> instructions;

    bool content_equal(const RecipeRecord& o) const {
        return title == o.title && ingredients == o.ingredients &&
               instructions == o.instructions;
    }
};

struct PreprocessConfig {
    int min_instruction_tokens = 3;
    int max_instructions = 15;
    bool lowercase = true;
};

class CorpusError : public std::runtime_error {
public:
    CorpusError(const std::string& msg, size_t line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    size_t line() const { return line_; }

private:
    size_t line_;
};

class SerializationError : public std::runtime_error {
public:
    SerializationError(const std::string& msg, const std::string& token)
        : std::runtime_error(msg + ": " + token), token_(token) {}
    const std::string& token() const { return token_; }

private:
    std::string token_;
};

inline int content_token_count(const std::vector<std::string>& tokens) {
    int n = 0;
    for (const auto& t : tokens)
        if (!is_punct_token(t)) ++n;
    return n;
}

// Drops instructions shorter than the minimum word count, truncates to the
// first max_instructions, and discards records left without instructions or
// without ingredients.
inline std::optional<RecipeRecord> filter_and_truncate(RecipeRecord recipe,
                                                       const PreprocessConfig& config) {
    std::vector<std::vector<std::string>> kept;
    for (auto& instr : recipe.instructions) {
        if (content_token_count(instr) >= config.min_instruction_tokens)
            kept.push_back(std::move(instr));
        if (static_cast<int>(kept.size()) == config.max_instructions) break;
    }
    if (kept.empty() || recipe.ingredients.empty()) return std::nullopt;
    recipe.instructions = std::move(kept);
    return recipe;
}

inline std::vector<RecipeRecord> load_corpus(const std::string& path,
                                             const PreprocessConfig& config) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    std::vector<RecipeRecord> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(std::string("malformed JSON: ") + e.what(), lineno);
        }
        if (j.contains("provenance")) continue;
        if (!j.contains("title") || !j["title"].is_string())
            throw CorpusError("missing or non-string field \"title\"", lineno);
        if (!j.contains("ingredients") || !j["ingredients"].is_array())
            throw CorpusError("missing or non-array field \"ingredients\"", lineno);
        if (!j.contains("instructions") || !j["instructions"].is_array())
            throw CorpusError("missing or non-array field \"instructions\"", lineno);

        RecipeRecord r;
        r.id = j.value("id", std::to_string(lineno));
        r.title = tokenize(j["title"].get<std::string>(), config.lowercase);
        for (const auto& ing : j["ingredients"]) {
            if (!ing.is_string()) throw CorpusError("non-string ingredient", lineno);
            r.ingredients.push_back(tokenize(ing.get<std::string>(), config.lowercase));
        }
        for (const auto& ins : j["instructions"]) {
            if (!ins.is_string()) throw CorpusError("non-string instruction", lineno);
            r.instructions.push_back(tokenize(ins.get<std::string>(), config.lowercase));
        }
        if (auto filtered = filter_and_truncate(std::move(r), config))
            out.push_back(std::move(*filtered));
    }
    return out;
}

inline std::vector<std::string> serialize_with_tokens(const RecipeRecord& recipe) {
    std::vector<std::string> out;
    out.push_back(special::kTitleStart);
    out.insert(out.end(), recipe.title.begin(), recipe.title.end());
    out.push_back(special::kTitleEnd);
    out.push_back(special::kIngrStart);
    for (size_t i = 0; i < recipe.ingredients.size(); ++i) {
        if (i) out.push_back(special::kIngrNext);
        out.insert(out.end(), recipe.ingredients[i].begin(), recipe.ingredients[i].end());
    }
    out.push_back(special::kIngrEnd);
    out.push_back(special::kInstrStart);
    for (size_t i = 0; i < recipe.instructions.size(); ++i) {
        if (i) out.push_back(special::kInstrNext);
        out.insert(out.end(), recipe.instructions[i].begin(), recipe.instructions[i].end());
    }
    out.push_back(special::kInstrEnd);
    return out;
}

// Inverse of serialize_with_tokens on its image; strict about the token
// structure and names the offending token on errors.
inline RecipeRecord parse_serialized(const std::vector<std::string>& tokens,
                                     std::string id = "") {
    RecipeRecord r;
    r.id = std::move(id);
    size_t pos = 0;
    auto expect = [&](const char* tok) {
        if (pos >= tokens.size() || tokens[pos] != tok)
            throw SerializationError("expected special token", tok);
        ++pos;
    };
    auto read_segment = [&](std::vector<std::string>& dst, const char* end_tok) {
        while (pos < tokens.size() && tokens[pos] != end_tok) {
            if (special::is_special(tokens[pos]))
                throw SerializationError("missing special token", end_tok);
            dst.push_back(tokens[pos++]);
        }
        expect(end_tok);
    };
    auto read_list = [&](std::vector<std::vector<std::string>>& dst,
                         const char* next_tok, const char* end_tok) {
        std::vector<std::string> cur;
        while (true) {
            if (pos >= tokens.size()) throw SerializationError("expected special token", end_tok);
            const std::string& t = tokens[pos];
            if (t == end_tok) {
                ++pos;
                dst.push_back(std::move(cur));
                return;
            }
            if (t == next_tok) {
                ++pos;
                dst.push_back(std::move(cur));
                cur.clear();
                continue;
            }
            if (special::is_special(t)) throw SerializationError("unexpected special token", t);
            cur.push_back(t);
            ++pos;
        }
    };

    expect(special::kTitleStart);
    read_segment(r.title, special::kTitleEnd);
    expect(special::kIngrStart);
    read_list(r.ingredients, special::kIngrNext, special::kIngrEnd);
    expect(special::kInstrStart);
    read_list(r.instructions, special::kInstrNext, special::kInstrEnd);
    if (pos != tokens.size())
        throw SerializationError("trailing tokens after", special::kInstrEnd);
    return r;
}

// Tokens with frequency >= min_count receive ids; everything else maps to
// the unknown id. Insertion order is lexicographic for determinism.
inline Vocabulary build_vocabulary(const std::vector<RecipeRecord>& corpus, int min_count = 1) {
    if (corpus.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
    std::map<std::string, int> counts;
    auto count_all = [&](const std::vector<std::string>& toks) {
        for (const auto& t : toks) ++counts[t];
    };
    for (const auto& r : corpus) {
        count_all(r.title);
        for (const auto& ing : r.ingredients) count_all(ing);
        for (const auto& ins : r.instructions) count_all(ins);
    }
    Vocabulary v;
    for (const auto& [tok, n] : counts)
        if (n >= min_count && !special::is_special(tok)) v.add(tok);
    return v;
}

// Deterministic shuffle-then-partition; sizes by floor, remainder handed to
// the earliest splits in (train, val, test) order.
inline std::array<std::vector<RecipeRecord>, 3> split_corpus(
    const std::vector<RecipeRecord>& corpus, std::array<double, 3> ratios,
    uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split_corpus: ratios must sum to 1");
    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    size_t n = corpus.size();
    std::array<size_t, 3> sizes;
    size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        sizes[i] = static_cast<size_t>(static_cast<double>(n) * ratios[i]);
        assigned += sizes[i];
    }
    for (int i = 0; assigned < n; i = (i + 1) % 3) {
        ++sizes[i];
        ++assigned;
    }

    std::array<std::vector<RecipeRecord>, 3> out;
    size_t pos = 0;
    for (int i = 0; i < 3; ++i)
        for (size_t k = 0; k < sizes[i]; ++k) out[i].push_back(corpus[order[pos++]]);
    return out;
}

}  // namespace plangen
