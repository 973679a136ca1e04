#pragma once

// Tokenization, special separation tokens and the shared vocabulary.

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace plangen {

namespace special {

inline constexpr const char* kTitleStart = "<TITLE_START>";
inline constexpr const char* kTitleEnd   = "<TITLE_END>";
inline constexpr const char* kIngrStart  = "<INGR_START>";
inline constexpr const char* kIngrNext   = "<INGR_NEXT>";
inline constexpr const char* kIngrEnd    = "<INGR_END>";
inline constexpr const char* kInstrStart = "<INSTR_START>";
inline constexpr const char* kInstrNext  = "<INSTR_NEXT>";
inline constexpr const char* kInstrEnd   = "<INSTR_END>";

inline const std::array<std::string, 8>& all() {
    static const std::array<std::string, 8> tokens = {
        kTitleStart, kTitleEnd, kIngrStart, kIngrNext,
        kIngrEnd,    kInstrStart, kInstrNext, kInstrEnd};
    return tokens;
}

inline bool is_special(std::string_view token) {
    for (const auto& t : all())
        if (token == t) return true;
    return false;
}

}  // namespace special

inline bool is_punct_token(std::string_view token) {
    if (token.empty()) return false;
    return std::all_of(token.begin(), token.end(),
                       [](unsigned char c) { return std::ispunct(c); });
}

// Lowercase, whitespace split, punctuation characters detached as
// single-character tokens.
inline std::vector<std::string> tokenize(std::string_view text, bool lowercase = true) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c)) {
            flush();
            out.emplace_back(1, static_cast<char>(c));
        } else {
            cur.push_back(lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        }
    }
    flush();
    return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

// Token <-> id bijection. Id 0 is reserved for the unknown token, ids 1..8
// for the special separation tokens.
class Vocabulary {
public:
    static constexpr int kUnkId = 0;

    Vocabulary() {
        add_("<unk>");
        for (const auto& t : special::all()) add_(t);
    }

    int add(const std::string& token) {
        auto it = token_to_id_.find(token);
        if (it != token_to_id_.end()) return it->second;
        return add_(token);
    }

    int id(std::string_view token) const {
        auto it = token_to_id_.find(std::string(token));
        return it == token_to_id_.end() ? kUnkId : it->second;
    }

    bool contains(std::string_view token) const {
        return token_to_id_.count(std::string(token)) > 0;
    }

    const std::string& token(int id) const {
        if (id < 0 || id >= static_cast<int>(id_to_token_.size()))
            throw std::out_of_range("Vocabulary: bad token id " + std::to_string(id));
        return id_to_token_[id];
    }

    size_t size() const { return id_to_token_.size(); }

    bool is_special_id(int id) const { return id >= 1 && id <= 8; }

    std::vector<int> encode(const std::vector<std::string>& tokens) const {
        std::vector<int> ids;
        ids.reserve(tokens.size());
        for (const auto& t : tokens) ids.push_back(id(t));
        return ids;
    }

    std::vector<std::string> decode(const std::vector<int>& ids) const {
        std::vector<std::string> tokens;
        tokens.reserve(ids.size());
        for (int i : ids) tokens.push_back(token(i));
        return tokens;
    }

    void save(std::ostream& os) const {
        for (size_t i = 0; i < id_to_token_.size(); ++i)
            os << id_to_token_[i] << '\t' << i << '\n';
    }

    static Vocabulary load(std::istream& is) {
        Vocabulary v;
        std::string line;
        size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw std::runtime_error("vocabulary: missing tab at line " + std::to_string(lineno));
            std::string tok = line.substr(0, tab);
            int id = std::stoi(line.substr(tab + 1));
            if (id < static_cast<int>(v.size())) {
                if (v.token(id) != tok)
                    throw std::runtime_error("vocabulary: reserved id mismatch at line " + std::to_string(lineno));
                continue;
            }
            if (id != static_cast<int>(v.size()))
                throw std::runtime_error("vocabulary: non-contiguous id at line " + std::to_string(lineno));
            v.add_(tok);
        }
        return v;
    }

private:
    int add_(const std::string& token) {
        int id = static_cast<int>(id_to_token_.size());
        id_to_token_.push_back(token);
        token_to_id_.emplace(token, id);
        return id;
    }

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

}  // namespace plangen
