#pragma once

// Rule-based stage tagging: suffix-stripping lemmatizer, stage verb lexicon,
// main-verb extraction and per-instruction / per-recipe tagging.

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "plangen/recipe.hpp"
#include "plangen/stage.hpp"
#include "plangen/token.hpp"

namespace plangen {

namespace detail {

inline const std::unordered_map<std::string, std::string>& lemma_exceptions() {
    // Irregular or gemination-ambiguous forms the suffix rules get wrong.
    static const std::unordered_map<std::string, std::string> table = {
        {"adding", "add"},       {"added", "add"},      {"adds", "add"},
        {"baking", "bake"},      {"baked", "bake"},
        {"making", "make"},      {"made", "make"},
        {"taking", "take"},      {"took", "take"},      {"taken", "take"},
        {"cutting", "cut"},      {"cuts", "cut"},
        {"setting", "set"},      {"sets", "set"},
        {"letting", "let"},      {"lets", "let"},
        {"putting", "put"},      {"puts", "put"},
        {"shaking", "shake"},    {"shaken", "shake"},   {"shook", "shake"},
        {"tossing", "toss"},     {"tossed", "toss"},    {"tosses", "toss"},
        {"pressing", "press"},   {"pressed", "press"},  {"presses", "press"},
        {"dressing", "dress"},   {"dressed", "dress"},
        {"left", "leave"},       {"leaving", "leave"},
        {"freezing", "freeze"},  {"froze", "freeze"},   {"frozen", "freeze"},
        {"heating", "heat"},     {"heated", "heat"},    {"heats", "heat"},
        {"beating", "beat"},     {"beaten", "beat"},    {"beats", "beat"},
        {"smoking", "smoke"},    {"smoked", "smoke"},
        {"grating", "grate"},    {"grated", "grate"},
        {"coating", "coat"},     {"coated", "coat"},    {"coats", "coat"},
        {"scraping", "scrape"},  {"scraped", "scrape"},
        {"whisking", "whisk"},   {"whisks", "whisk"},
        {"greasing", "grease"},  {"greased", "grease"},
        {"wrapping", "wrap"},    {"wrapped", "wrap"},   {"wraps", "wrap"},
        {"chopping", "chop"},    {"chopped", "chop"},   {"chops", "chop"},
        {"dipping", "dip"},      {"dipped", "dip"},     {"dips", "dip"},
        {"topping", "top"},      {"topped", "top"},     {"tops", "top"},
        {"rubbing", "rub"},      {"rubbed", "rub"},     {"rubs", "rub"},
        {"patting", "pat"},      {"patted", "pat"},     {"pats", "pat"},
        {"stirring", "stir"},    {"stirred", "stir"},   {"stirs", "stir"},
    };
    return table;
}

inline bool restores_e(char c) {
    // Stems where dropping a vocalic suffix removed a silent 'e'.
    return c == 'c' || c == 's' || c == 'u' || c == 'v' || c == 'z' || c == 'g';
}

}  // namespace detail

inline std::string lemmatize(const std::string& token) {
    const auto& ex = detail::lemma_exceptions();
    if (auto it = ex.find(token); it != ex.end()) return it->second;

    auto ends_with = [&](const char* suf) {
        size_t n = std::char_traits<char>::length(suf);
        return token.size() >= n && token.compare(token.size() - n, n, suf) == 0;
    };
    auto finish = [](std::string stem) {
        if (stem.size() >= 3 && stem[stem.size() - 1] == stem[stem.size() - 2] &&
            stem.back() != 's' && stem.back() != 'l')
            stem.pop_back();
        else if (!stem.empty() && detail::restores_e(stem.back()))
            stem.push_back('e');
        return stem;
    };

    if (ends_with("ing") && token.size() >= 5)
        return finish(token.substr(0, token.size() - 3));
    if (ends_with("ed") && token.size() >= 4)
        return finish(token.substr(0, token.size() - 2));
    if (ends_with("shes") || ends_with("ches") || ends_with("xes") ||
        ends_with("ses") || ends_with("zes") || ends_with("oes"))
        return token.substr(0, token.size() - 2);
    if (ends_with("s") && token.size() >= 3 && !ends_with("ss") && !ends_with("us"))
        return token.substr(0, token.size() - 1);
    return token;
}

class VerbLexicon {
public:
    VerbLexicon() : boundaries_(default_boundaries()) {}

    explicit VerbLexicon(std::set<std::string> clause_boundaries)
        : boundaries_(std::move(clause_boundaries)) {}

    void add(const std::string& lemma, StageLabel stage) {
        if (stage == StageLabel::General)
            throw std::invalid_argument("lexicon: 'general' holds no lemmas (fallback stage): " + lemma);
        auto [it, inserted] = lemmas_.emplace(lemma, stage);
        if (!inserted && it->second != stage)
            throw std::invalid_argument("lexicon: lemma assigned to two stages: " + lemma);
    }

    std::optional<StageLabel> stage_of(const std::string& lemma) const {
        auto it = lemmas_.find(lemma);
        if (it == lemmas_.end()) return std::nullopt;
        return it->second;
    }

    bool is_clause_boundary(const std::string& token) const {
        return is_punct_token(token) || boundaries_.count(token) > 0;
    }

    size_t size() const { return lemmas_.size(); }

    static std::set<std::string> default_boundaries() {
        return {"and", "or", "then", "until", "while", "before", "after", "so"};
    }

    // One "lemma<TAB>stage" per line; '#' comments allowed.
    static VerbLexicon load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
        VerbLexicon lex;
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw std::runtime_error("lexicon: missing tab at line " + std::to_string(lineno));
            lex.add(line.substr(0, tab), stage_from_string(line.substr(tab + 1)));
        }
        return lex;
    }

    void save(std::ostream& os) const {
        std::map<std::string, StageLabel> sorted(lemmas_.begin(), lemmas_.end());
        for (const auto& [lemma, stage] : sorted)
            os << lemma << '\t' << to_string(stage) << '\n';
    }

private:
    std::unordered_map<std::string, StageLabel> lemmas_;
    std::set<std::string> boundaries_;
};

// First lexicon verb of the first clause segment; verbs in later clauses are
// discarded.
inline std::optional<std::string> extract_main_verb(const std::vector<std::string>& tokens,
                                                    const VerbLexicon& lexicon) {
    for (const auto& raw : tokens) {
        std::string tok;
        tok.reserve(raw.size());
        for (unsigned char c : raw) tok.push_back(static_cast<char>(std::tolower(c)));
        if (lexicon.is_clause_boundary(tok)) break;
        std::string lemma = lemmatize(tok);
        if (lexicon.stage_of(lemma)) return lemma;
    }
    return std::nullopt;
}

inline StageLabel tag_instruction(const std::vector<std::string>& instruction,
                                  const VerbLexicon& lexicon) {
    if (instruction.empty())
        throw std::invalid_argument("tag_instruction: empty instruction");
    if (auto verb = extract_main_verb(instruction, lexicon))
        return *lexicon.stage_of(*verb);
    return StageLabel::General;
}

inline ContentPlan tag_recipe(const RecipeRecord& recipe, const VerbLexicon& lexicon) {
    ContentPlan plan;
    plan.reserve(recipe.instructions.size());
    for (const auto& instr : recipe.instructions)
        plan.push_back(tag_instruction(instr, lexicon));
    return plan;
}

}  // namespace plangen
