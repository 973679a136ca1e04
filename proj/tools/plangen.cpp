// plangen: plan-guided recipe text generation pipeline.
//
// Subcommands: preprocess, tag, train-planner, train-classifier, train-lm,
// plan, classify, generate, evaluate, synth. Exit codes: 0 success,
// 1 runtime error (single-line message on stderr), 2 usage error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plangen/classifier.hpp"
#include "plangen/decoder.hpp"
#include "plangen/lm.hpp"
#include "plangen/metrics.hpp"
#include "plangen/planner.hpp"
#include "plangen/recipe.hpp"
#include "plangen/stage.hpp"
#include "plangen/synthetic.hpp"
#include "plangen/tagger.hpp"

using nlohmann::json;
using namespace plangen;

namespace {

constexpr const char* kToolVersion = "plangen 0.1.0";

struct Globals {
    uint64_t seed = 1;
    int jobs = 1;
    std::string config_hash;
};

// FNV-1a over the canonical invocation string; recorded in every artifact.
std::string hash_invocation(int argc, char** argv) {
    uint64_t h = 1469598103934665603ull;
    for (int i = 1; i < argc; ++i)
        for (const char* p = argv[i]; *p; ++p) {
            h ^= static_cast<unsigned char>(*p);
            h *= 1099511628211ull;
        }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json provenance_json(const Globals& g) {
    return json{{"provenance",
                 {{"tool", kToolVersion}, {"seed", g.seed}, {"config", g.config_hash}}}};
}

std::string provenance_comment(const Globals& g) {
    return "# provenance tool=" + std::string(kToolVersion) +
           " seed=" + std::to_string(g.seed) + " config=" + g.config_hash + "\n";
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    return in;
}

json record_to_json(const RecipeRecord& r) {
    json j;
    j["id"] = r.id;
    j["title"] = join_tokens(r.title);
    j["ingredients"] = json::array();
    for (const auto& ing : r.ingredients) j["ingredients"].push_back(join_tokens(ing));
    j["instructions"] = json::array();
    for (const auto& ins : r.instructions) j["instructions"].push_back(join_tokens(ins));
    return j;
}

void write_corpus(const std::string& path, const std::vector<RecipeRecord>& corpus,
                  const Globals& g) {
    auto out = open_out(path);
    out << provenance_json(g).dump() << '\n';
    for (const auto& r : corpus) out << record_to_json(r).dump() << '\n';
}

void write_plans(const std::string& path,
                 const std::vector<std::pair<std::string, ContentPlan>>& plans,
                 const Globals& g) {
    auto out = open_out(path);
    out << provenance_json(g).dump() << '\n';
    for (const auto& [id, plan] : plans) {
        json j;
        j["id"] = id;
        j["plan"] = json::array();
        for (StageLabel s : plan) j["plan"].push_back(to_string(s));
        out << j.dump() << '\n';
    }
}

std::map<std::string, ContentPlan> load_plans(const std::string& path) {
    auto in = open_in(path);
    std::map<std::string, ContentPlan> plans;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw std::runtime_error(path + ": malformed JSON at line " +
                                     std::to_string(lineno));
        if (j.contains("provenance")) continue;
        ContentPlan plan;
        for (const auto& s : j.at("plan")) plan.push_back(stage_from_string(s.get<std::string>()));
        plans[j.at("id").get<std::string>()] = std::move(plan);
    }
    return plans;
}

ContentPlan plan_for(const std::map<std::string, ContentPlan>& plans, const std::string& id) {
    auto it = plans.find(id);
    if (it == plans.end()) throw std::runtime_error("no plan found for record id: " + id);
    return it->second;
}

std::vector<int> make_prompt(const RecipeRecord& r, const Vocabulary& vocab) {
    auto toks = serialize_with_tokens(r);
    auto ids = vocab.encode(toks);
    int start = vocab.id(special::kInstrStart);
    auto it = std::find(ids.begin(), ids.end(), start);
    return {ids.begin(), it + 1};
}

// ---------------------------------------------------------------- preprocess

struct PreprocessArgs {
    std::string input, output, vocab_out;
    int min_words = 3, max_instructions = 15, min_count = 1;
    std::string split;  // "train.jsonl,val.jsonl,test.jsonl"
    std::vector<double> ratios = {0.8, 0.1, 0.1};
};

int run_preprocess(const PreprocessArgs& a, const Globals& g) {
    PreprocessConfig cfg;
    cfg.min_instruction_tokens = a.min_words;
    cfg.max_instructions = a.max_instructions;
    auto corpus = load_corpus(a.input, cfg);
    write_corpus(a.output, corpus, g);
    if (!a.vocab_out.empty()) {
        auto vocab = build_vocabulary(corpus, a.min_count);
        auto out = open_out(a.vocab_out);
        out << provenance_comment(g);
        vocab.save(out);
    }
    if (!a.split.empty()) {
        std::vector<std::string> paths;
        std::stringstream ss(a.split);
        std::string part;
        while (std::getline(ss, part, ',')) paths.push_back(part);
        if (paths.size() != 3 || a.ratios.size() != 3)
            throw std::runtime_error("--split needs three comma-separated paths and three ratios");
        auto splits = split_corpus(corpus, {a.ratios[0], a.ratios[1], a.ratios[2]}, g.seed);
        for (int i = 0; i < 3; ++i) write_corpus(paths[i], splits[i], g);
    }
    std::cerr << "preprocess: kept " << corpus.size() << " records\n";
    return 0;
}

// ----------------------------------------------------------------------- tag

int run_tag(const std::string& input, const std::string& lexicon_path,
            const std::string& output, const Globals& g) {
    auto corpus = load_corpus(input, {});
    auto lexicon = VerbLexicon::load(lexicon_path);
    std::vector<std::pair<std::string, ContentPlan>> plans;
    for (const auto& r : corpus) plans.push_back({r.id, tag_recipe(r, lexicon)});
    write_plans(output, plans, g);
    std::cerr << "tag: labelled " << plans.size() << " records\n";
    return 0;
}

// ------------------------------------------------------------------ training

int run_train_planner(const std::string& input, const std::string& plan_path,
                      const std::string& output, const PlannerHyper& hyper, int min_count,
                      const Globals& g) {
    auto corpus = load_corpus(input, {});
    auto plans = load_plans(plan_path);
    // feature vocabulary from titles and ingredients only
    std::vector<RecipeRecord> inputs;
    for (auto r : corpus) {
        r.instructions = {{"x", "x", "x"}};  // ignored by featurize_input
        inputs.push_back(std::move(r));
    }
    std::map<std::string, int> counts;
    for (const auto& r : corpus) {
        for (const auto& t : r.title) ++counts[t];
        for (const auto& ing : r.ingredients)
            for (const auto& t : ing) ++counts[t];
    }
    Vocabulary feats;
    for (const auto& [tok, n] : counts)
        if (n >= min_count && !special::is_special(tok)) feats.add(tok);

    std::vector<std::pair<InputFeatures, ContentPlan>> data;
    for (const auto& r : corpus) {
        auto plan = plan_for(plans, r.id);
        if (plan.empty() || plan.size() > size_t(kMaxPlanLength)) continue;
        data.push_back({featurize_input(r, feats), std::move(plan)});
    }
    auto model = train_planner(data, feats, hyper);
    auto out = open_out(output);
    model.save(out);
    out << provenance_comment(g);
    std::cerr << "train-planner: " << data.size() << " examples, dim " << model.dim() << "\n";
    return 0;
}

int run_train_classifier(const std::string& input, const std::string& plan_path,
                         const std::string& output, double smoothing, int truncations,
                         const Globals& g) {
    auto corpus = load_corpus(input, {});
    auto plan_map = load_plans(plan_path);
    std::vector<ContentPlan> plans;
    for (const auto& r : corpus) plans.push_back(plan_for(plan_map, r.id));
    auto dataset = make_partial_dataset(corpus, plans, truncations, 1, g.seed);
    ClassifierHyper hyper;
    hyper.smoothing = smoothing;
    auto clf = StageClassifier::train(dataset, hyper);
    auto out = open_out(output);
    clf.save(out);
    out << provenance_comment(g);
    std::cerr << "train-classifier: " << dataset.size() << " partial instructions\n";
    return 0;
}

int run_train_lm(const std::string& input, const std::string& output, int order,
                 double discount, int min_count, const Globals& g) {
    auto corpus = load_corpus(input, {});
    auto vocab = build_vocabulary(corpus, min_count);
    std::vector<std::vector<int>> seqs;
    for (const auto& r : corpus) seqs.push_back(vocab.encode(serialize_with_tokens(r)));
    auto lm = train_lm(seqs, vocab, order, discount);
    auto out = open_out(output);
    lm.save(out);
    out << provenance_comment(g);
    std::cerr << "train-lm: order " << order << ", vocab " << vocab.size() << ", "
              << seqs.size() << " sequences\n";
    return 0;
}

// ---------------------------------------------------------- plan / classify

int run_plan(const std::string& model_path, const std::string& input,
             const std::string& output, int beam, const Globals& g) {
    auto in = open_in(model_path);
    auto model = PlanModel::load(in);
    auto corpus = load_corpus(input, {});
    std::vector<std::pair<std::string, ContentPlan>> plans;
    for (const auto& r : corpus) {
        auto features = featurize_input(r, model.feature_vocab());
        plans.push_back({r.id, model.predict(features, beam)});
    }
    write_plans(output, plans, g);
    std::cerr << "plan: predicted " << plans.size() << " plans\n";
    return 0;
}

int run_classify(const std::string& model_path, const std::string& input,
                 const std::string& output, const Globals& g) {
    auto min = open_in(model_path);
    auto clf = StageClassifier::load(min);
    auto in = open_in(input);
    auto out = open_out(output);
    out << provenance_json(g).dump() << '\n';
    std::string line;
    size_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tokens = tokenize(line);
        json j;
        j["text"] = line;
        auto dist = clf.classify(tokens);
        json probs;
        for (int s = 0; s < kNumStages; ++s)
            probs[to_string(static_cast<StageLabel>(s))] = dist[s];
        j["probs"] = probs;
        out << j.dump() << '\n';
        ++count;
    }
    std::cerr << "classify: " << count << " lines\n";
    return 0;
}

// ------------------------------------------------------------------ generate

struct GenerateArgs {
    std::string lm_path, classifier_path, lexicon_path, input, output;
    std::string plan_file, planner_path;
    bool auto_plan = false;
    std::string strategy = "plan";  // plan | greedy | topk | beam
    double alpha = 0.2;
    int top_s = 5;
    int max_tokens = 200;
    int beam = 5;
};

int run_generate(const GenerateArgs& a, const Globals& g) {
    auto lmin = open_in(a.lm_path);
    auto lm = NGramLM::load(lmin);
    const Vocabulary& vocab = lm.vocab();
    auto lexicon = VerbLexicon::load(a.lexicon_path);
    auto corpus = load_corpus(a.input, {});

    DecodeConfig cfg;
    cfg.alpha = a.alpha;
    cfg.top_s = a.top_s;
    cfg.max_tokens = a.max_tokens;
    cfg.seed = g.seed;

    std::map<std::string, ContentPlan> plans;
    std::optional<StageClassifier> clf;
    std::optional<PlanModel> planner;
    if (a.strategy == "plan") {
        if (a.classifier_path.empty())
            throw std::runtime_error("generate: --classifier is required for plan-aware decoding");
        auto cin_ = open_in(a.classifier_path);
        clf = StageClassifier::load(cin_);
        if (a.auto_plan) {
            if (a.planner_path.empty())
                throw std::runtime_error("generate: --auto-plan requires --planner");
            auto pin = open_in(a.planner_path);
            planner = PlanModel::load(pin);
        } else if (!a.plan_file.empty()) {
            plans = load_plans(a.plan_file);
        } else {
            throw std::runtime_error("generate: need --plan-file or --auto-plan");
        }
    }

    auto out = open_out(a.output);
    out << provenance_json(g).dump() << '\n';
    for (const auto& r : corpus) {
        auto prompt = make_prompt(r, vocab);
        GenerationResult result;
        ContentPlan plan;
        if (a.strategy == "plan") {
            plan = planner ? planner->predict(featurize_input(r, planner->feature_vocab()), 5)
                           : plan_for(plans, r.id);
            result = generate(lm, *clf, vocab, plan, prompt, cfg);
        } else if (a.strategy == "greedy") {
            result = generate_baseline(lm, vocab, prompt, cfg, BaselineStrategy::Greedy);
        } else if (a.strategy == "topk") {
            result = generate_baseline(lm, vocab, prompt, cfg, BaselineStrategy::TopK, a.beam);
        } else if (a.strategy == "beam") {
            result = generate_baseline(lm, vocab, prompt, cfg, BaselineStrategy::Beam, a.beam);
        } else {
            throw std::runtime_error("generate: unknown strategy: " + a.strategy);
        }

        json j;
        j["id"] = r.id;
        j["instructions"] = json::array();
        for (const auto& ins : result.instructions)
            j["instructions"].push_back(join_tokens(ins));
        j["realized_plan"] = json::array();
        for (const auto& ins : result.instructions)
            j["realized_plan"].push_back(to_string(tag_instruction(ins, lexicon)));
        j["scores"] = result.step_scores;
        out << j.dump() << '\n';
    }
    std::cerr << "generate: " << corpus.size() << " records, strategy " << a.strategy << "\n";
    return 0;
}

// ------------------------------------------------------------------ evaluate

int run_evaluate(const std::string& outputs_path, const std::string& refs_path,
                 const std::string& plans_path, const std::string& ingredients_path,
                 const std::string& lexicon_path, const std::string& report_path,
                 const Globals& g) {
    auto refs = load_corpus(refs_path, {});
    auto plan_map = load_plans(plans_path);
    auto lexicon = VerbLexicon::load(lexicon_path);

    std::map<std::string, GenerationResult> generated;
    {
        auto in = open_in(outputs_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            if (j.contains("provenance")) continue;
            GenerationResult r;
            for (const auto& ins : j.at("instructions"))
                r.instructions.push_back(tokenize(ins.get<std::string>()));
            r.realized_plan_length = r.instructions.size();
            generated[j.at("id").get<std::string>()] = std::move(r);
        }
    }

    IngredientList global;
    {
        auto in = open_in(ingredients_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto entry = tokenize(line);
            if (entry.empty()) continue;
            if (std::find(global.entries.begin(), global.entries.end(), entry) ==
                global.entries.end())
                global.entries.push_back(entry);
        }
    }

    std::vector<GenerationResult> outputs;
    std::vector<RecipeRecord> references;
    std::vector<ContentPlan> targets;
    for (const auto& r : refs) {
        auto it = generated.find(r.id);
        if (it == generated.end())
            throw std::runtime_error("evaluate: no generated output for record id: " + r.id);
        outputs.push_back(it->second);
        references.push_back(r);
        targets.push_back(plan_for(plan_map, r.id));
    }
    auto report = evaluate_generation(outputs, references, targets, global, lexicon);

    json j = provenance_json(g);
    j["bleu"] = report.bleu;
    j["rouge_l"] = report.rouge_l;
    j["plan_match"] = report.plan_match;
    j["coverage"] = report.coverage;
    j["extra"] = report.extra;
    j["example_count"] = report.example_count;
    j["notes"] = report.notes;
    auto out = open_out(report_path);
    out << j.dump(2) << '\n';

    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%-12s %8s %8s %11s %9s %7s\n"
                  "%-12zu %8.2f %8.2f %11.2f %9.2f %7.2f\n",
                  "examples", "BLEU", "ROUGE-L", "plan-match", "coverage", "extra",
                  report.example_count, report.bleu, report.rouge_l, report.plan_match,
                  report.coverage, report.extra);
    std::cout << buf;
    return 0;
}

// --------------------------------------------------------------------- synth

int run_synth(int count, const std::string& output, const std::string& plans_out,
              const Globals& g) {
    auto corpus = generate_synthetic_corpus(default_synthetic_spec(count, g.seed));
    std::vector<RecipeRecord> records;
    std::vector<std::pair<std::string, ContentPlan>> plans;
    for (auto& [r, p] : corpus) {
        records.push_back(r);
        plans.push_back({r.id, p});
    }
    write_corpus(output, records, g);
    if (!plans_out.empty()) write_plans(plans_out, plans, g);
    std::cerr << "synth: wrote " << records.size() << " records\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plan-guided recipe text generation toolkit"};
    app.require_subcommand(1);
    app.set_config("--config");

    Globals g;
    g.config_hash = hash_invocation(argc, argv);
    app.add_option("--seed", g.seed, "global random seed")->capture_default_str();
    app.add_option("--jobs", g.jobs, "worker count for map-style subcommands")
        ->capture_default_str();

    // preprocess
    PreprocessArgs pre;
    auto* sp = app.add_subcommand("preprocess", "filter and normalize a recipe corpus");
    sp->add_option("--input", pre.input)->required();
    sp->add_option("--output", pre.output)->required();
    sp->add_option("--vocab-out", pre.vocab_out, "also write a vocabulary file");
    sp->add_option("--min-words", pre.min_words)->capture_default_str();
    sp->add_option("--max-instructions", pre.max_instructions)->capture_default_str();
    sp->add_option("--min-count", pre.min_count)->capture_default_str();
    sp->add_option("--split", pre.split, "train,val,test output paths");
    sp->add_option("--ratios", pre.ratios, "split ratios")->expected(3);

    // tag
    std::string tag_input, tag_lexicon, tag_output;
    auto* st = app.add_subcommand("tag", "label instructions with silver stage plans");
    st->add_option("--input", tag_input)->required();
    st->add_option("--lexicon", tag_lexicon)->required();
    st->add_option("--output", tag_output)->required();

    // train-planner
    std::string tp_input, tp_plans, tp_output;
    PlannerHyper tp_hyper;
    int tp_min_count = 1;
    auto* stp = app.add_subcommand("train-planner", "train the content planner");
    stp->add_option("--input", tp_input)->required();
    stp->add_option("--plans", tp_plans)->required();
    stp->add_option("--output", tp_output)->required();
    stp->add_option("--epochs", tp_hyper.epochs)->capture_default_str();
    stp->add_option("--lr", tp_hyper.learning_rate)->capture_default_str();
    stp->add_option("--l2", tp_hyper.l2)->capture_default_str();
    stp->add_option("--history-k", tp_hyper.history_k)->capture_default_str();
    stp->add_option("--min-count", tp_min_count)->capture_default_str();

    // train-classifier
    std::string tc_input, tc_plans, tc_output;
    double tc_smoothing = 1e-3;
    int tc_truncations = 7;
    auto* stc = app.add_subcommand("train-classifier", "train the stage classifier");
    stc->add_option("--input", tc_input)->required();
    stc->add_option("--plans", tc_plans)->required();
    stc->add_option("--output", tc_output)->required();
    stc->add_option("--smoothing", tc_smoothing)->capture_default_str();
    stc->add_option("--truncations", tc_truncations)->capture_default_str();

    // train-lm
    std::string tl_input, tl_output;
    int tl_order = 4, tl_min_count = 1;
    double tl_discount = 0.75;
    auto* stl = app.add_subcommand("train-lm", "train the n-gram language model");
    stl->add_option("--input", tl_input)->required();
    stl->add_option("--output", tl_output)->required();
    stl->add_option("--order", tl_order)->capture_default_str();
    stl->add_option("--discount", tl_discount)->capture_default_str();
    stl->add_option("--min-count", tl_min_count)->capture_default_str();

    // plan
    std::string pl_model, pl_input, pl_output;
    int pl_beam = 5;
    auto* spl = app.add_subcommand("plan", "predict content plans with a trained planner");
    spl->add_option("--model", pl_model)->required();
    spl->add_option("--input", pl_input)->required();
    spl->add_option("--output", pl_output)->required();
    spl->add_option("--beam", pl_beam)->capture_default_str();

    // classify
    std::string cl_model, cl_input, cl_output;
    auto* scl = app.add_subcommand("classify", "stage probabilities for text lines");
    scl->add_option("--model", cl_model)->required();
    scl->add_option("--input", cl_input)->required();
    scl->add_option("--output", cl_output)->required();

    // generate
    GenerateArgs gen;
    auto* sg = app.add_subcommand("generate", "decode instructions from prompts");
    sg->add_option("--lm", gen.lm_path)->required();
    sg->add_option("--classifier", gen.classifier_path);
    sg->add_option("--lexicon", gen.lexicon_path)->required();
    sg->add_option("--input", gen.input)->required();
    sg->add_option("--output", gen.output)->required();
    sg->add_option("--plan-file", gen.plan_file);
    sg->add_flag("--auto-plan", gen.auto_plan, "predict plans with --planner");
    sg->add_option("--planner", gen.planner_path);
    sg->add_option("--strategy", gen.strategy, "plan | greedy | topk | beam")
        ->capture_default_str();
    sg->add_option("--alpha", gen.alpha)->capture_default_str();
    sg->add_option("--top-s", gen.top_s)->capture_default_str();
    sg->add_option("--max-tokens", gen.max_tokens)->capture_default_str();
    sg->add_option("--beam", gen.beam, "width for topk/beam baselines")->capture_default_str();

    // evaluate
    std::string ev_outputs, ev_refs, ev_plans, ev_ingredients, ev_lexicon, ev_report;
    auto* se = app.add_subcommand("evaluate", "score generated recipes");
    se->add_option("--outputs", ev_outputs)->required();
    se->add_option("--references", ev_refs)->required();
    se->add_option("--plans", ev_plans)->required();
    se->add_option("--ingredients", ev_ingredients)->required();
    se->add_option("--lexicon", ev_lexicon)->required();
    se->add_option("--report", ev_report)->required();

    // synth
    int sy_count = 100;
    std::string sy_output, sy_plans;
    auto* ss = app.add_subcommand("synth", "generate a synthetic stage-structured corpus");
    ss->add_option("--count", sy_count)->capture_default_str();
    ss->add_option("--output", sy_output)->required();
    ss->add_option("--plans-out", sy_plans);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sp) return run_preprocess(pre, g);
        if (*st) return run_tag(tag_input, tag_lexicon, tag_output, g);
        if (*stp) {
            tp_hyper.seed = g.seed;
            return run_train_planner(tp_input, tp_plans, tp_output, tp_hyper, tp_min_count, g);
        }
        if (*stc)
            return run_train_classifier(tc_input, tc_plans, tc_output, tc_smoothing,
                                        tc_truncations, g);
        if (*stl) return run_train_lm(tl_input, tl_output, tl_order, tl_discount,
                                      tl_min_count, g);
        if (*spl) return run_plan(pl_model, pl_input, pl_output, pl_beam, g);
        if (*scl) return run_classify(cl_model, cl_input, cl_output, g);
        if (*sg) return run_generate(gen, g);
        if (*se) return run_evaluate(ev_outputs, ev_refs, ev_plans, ev_ingredients,
                                     ev_lexicon, ev_report, g);
        if (*ss) return run_synth(sy_count, sy_output, sy_plans, g);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}
