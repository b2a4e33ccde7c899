#include "ctalab/app.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <optional>
#include <thread>

#include "ctalab/analysis.hpp"
#include "ctalab/annotation.hpp"
#include "ctalab/augment.hpp"
#include "ctalab/toy.hpp"

namespace ctalab::app {

namespace fs = std::filesystem;

// ---- configuration ------------------------------------------------------------

static fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
    PipelineConfig c;
    c.raw = j;
    c.hash = sha256_hex(j.dump());
    c.seed = j.value("seed", std::uint64_t{0});

    const json paths = j.value("paths", json::object());
    c.corpus = resolve(base_dir, paths.value("corpus", std::string("posts.jsonl")));
    c.workdir = resolve(base_dir, paths.value("workdir", std::string("out")));
    c.prompts = resolve(base_dir, paths.value("prompts", std::string("prompts")));
    c.cache = paths.contains("cache") ? resolve(base_dir, paths["cache"].get<std::string>()) : c.workdir / "cache";
    c.logs = paths.contains("logs") ? resolve(base_dir, paths["logs"].get<std::string>()) : c.workdir / "logs";
    c.reports = paths.contains("reports") ? resolve(base_dir, paths["reports"].get<std::string>()) : c.workdir / "reports";
    for (const auto& p : j.value("parties", json::array())) c.party_registry.insert(p.get<std::string>());
    auto scheme = j.value("token_scheme", std::string("whitespace"));
    if (scheme == "whitespace") c.token_scheme = corpus::TokenScheme::whitespace;
    else if (scheme == "approx_llm") c.token_scheme = corpus::TokenScheme::approx_llm;
    else throw Error(ErrorKind::invalid_argument, "config: unknown token_scheme '" + scheme + "'");

    const json sampling = j.value("sampling", json::object());
    if (sampling.contains("fraction")) {
        const auto& f = sampling["fraction"];
        c.sample_fraction = Fraction::parse(f.is_string() ? f.get<std::string>() : f.dump());
    }

    const json ann = j.value("annotation", json::object());
    auto& s = c.annotation;
    s.votes_per_doc = ann.value("k", std::size_t{3});
    s.max_rounds = ann.value("max_rounds", 2);
    s.extra_votes = ann.value("extra_votes", std::size_t{2});
    s.adjudicator_id = ann.value("adjudicator", std::string{});
    s.admin_token = ann.value("admin_token", std::string{});
    s.seed = c.seed;
    if (ann.contains("quiz_file")) s.quiz = annotation::quiz_from_json(read_json_file(resolve(base_dir, ann["quiz_file"])));
    if (ann.contains("quiz_threshold")) s.quiz.pass_threshold = ann["quiz_threshold"].get<double>();
    if (!(s.quiz.pass_threshold > 0 && s.quiz.pass_threshold <= 1))
        throw Error(ErrorKind::invalid_argument, "config: quiz_threshold must lie in (0, 1]");
    for (const auto& r : ann.value("roster", json::array())) {
        service::RosterEntry e;
        if (r.is_string()) {
            e.annotator_id = r.get<std::string>();
        } else {
            e.annotator_id = r.at("id").get<std::string>();
            e.token = r.value("token", std::string{});
            e.quiz_passed = r.value("quiz_passed", false);
            e.native_speaker = r.value("native_speaker", true);
        }
        s.roster.push_back(std::move(e));
    }
    if (ann.contains("ui_dir")) s.ui_dir = resolve(base_dir, ann["ui_dir"].get<std::string>());
    c.host = ann.value("host", c.host);
    c.port = ann.value("port", c.port);
    s.votes_log = c.votes_path();
    s.quiz_log = c.quiz_log_path();

    const json ep = j.value("endpoints", json::object());
    c.classify_endpoint = llm::endpoint_from_json(ep.value("classify", json::object()));
    c.synth_endpoint = llm::endpoint_from_json(ep.value("synth", json::object()));
    c.synth_per_doc = j.value("synth", json::object()).value("per_doc", 3);

    c.split_ratio = j.value("split", json::object()).value("ratio", 0.8);
    c.folds = j.value("cv", json::object()).value("folds", std::size_t{5});
    const json tr = j.value("trainer", json::object());
    c.hyper = trainer::hyperparams_from_json(tr);
    if (!tr.contains("seed")) c.hyper.seed = c.seed;
    c.features.dimension = tr.value("dimension", c.features.dimension);
    c.features.char_min = tr.value("char_min", c.features.char_min);
    c.features.char_max = tr.value("char_max", c.features.char_max);
    if (c.features.dimension == 0 || c.features.char_min < 1 || c.features.char_max < c.features.char_min)
        throw Error(ErrorKind::invalid_argument, "config: invalid feature hashing settings");
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::invalid_argument, "config file " + path.string() + " not found");
    json j;
    try {
        j = read_json_file(path);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, "config " + path.string() + ": " + e.what());
    }
    auto c = config_from_json(j, fs::absolute(path).parent_path());
    c.config_path = path;
    if (!fs::exists(c.corpus)) throw Error(ErrorKind::invalid_argument, "config: corpus " + c.corpus.string() + " not found");
    if (!fs::is_directory(c.prompts))
        throw Error(ErrorKind::invalid_argument, "config: prompts directory " + c.prompts.string() + " not found");
    return c;
}

json provenance(const PipelineConfig& cfg, const std::string& command) {
    return {{"config_hash", cfg.hash}, {"seed", cfg.seed}, {"command", command}};
}

std::unique_ptr<service::AnnotationService> make_service(const PipelineConfig& cfg) {
    auto store = corpus::ingest_corpus(cfg.corpus, cfg.party_registry, cfg.token_scheme);
    if (!fs::exists(cfg.sample_path()))
        throw Error(ErrorKind::not_found, "no sample plan at " + cfg.sample_path().string() + "; run 'sample' first");
    auto plan = annotation::sample_plan_from_json(read_json_file(cfg.sample_path()));
    return std::make_unique<service::AnnotationService>(cfg.annotation, std::move(store), std::move(plan));
}

// ---- evaluation helper ----------------------------------------------------------

metrics::EvalReport evaluate_with_breakdown(const std::map<std::string, Label>& truth,
                                            const std::map<std::string, Label>& predicted,
                                            const std::vector<corpus::TextDocument>& docs) {
    std::vector<Label> t, p;
    std::map<std::size_t, std::pair<std::vector<Label>, std::vector<Label>>> by_stratum;
    std::map<std::string, const corpus::TextDocument*> doc_index;
    for (const auto& d : docs) doc_index[d.doc_id] = &d;
    for (const auto& [id, label] : predicted) {
        auto it = truth.find(id);
        if (it == truth.end()) continue;
        t.push_back(it->second);
        p.push_back(label);
        if (auto d = doc_index.find(id); d != doc_index.end()) {
            auto& slot = by_stratum[stratum_index(d->second->stratum())];
            slot.first.push_back(it->second);
            slot.second.push_back(label);
        }
    }
    if (t.empty()) throw Error(ErrorKind::empty_input, "no predicted document has a ground-truth label");
    auto report = metrics::evaluate_predictions(t, p);
    for (const auto& [idx, lists] : by_stratum) {
        auto r = metrics::evaluate_predictions(lists.first, lists.second);
        report.breakdown.push_back({std::string(to_string(kStrata[idx].post_type)),
                                    std::string(to_string(kStrata[idx].text_type)), r.kappa, r.f1_macro, r.f1_binary,
                                    r.precision, r.recall, r.n()});
    }
    return report;
}

// ---- command helpers --------------------------------------------------------------

namespace {

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

struct Context {
    PipelineConfig cfg;
    std::ostream& out;
    std::string command;

    void ensure_dirs() const {
        fs::create_directories(cfg.workdir);
        fs::create_directories(cfg.reports);
        fs::create_directories(cfg.logs);
    }
    void write_report(const std::string& name, json body) const {
        body["provenance"] = provenance(cfg, command);
        write_json_file(cfg.reports / name, body);
    }
    corpus::CorpusStore store() const { return corpus::ingest_corpus(cfg.corpus, cfg.party_registry, cfg.token_scheme); }
    std::map<std::string, Label> decisions() const {
        if (!fs::exists(cfg.decisions_path()))
            throw Error(ErrorKind::not_found, "no decisions at " + cfg.decisions_path().string() + "; run 'aggregate' first");
        std::map<std::string, Label> m;
        for (const auto& d : annotation::read_decisions(cfg.decisions_path())) m[d.doc_id] = d.label;
        return m;
    }
    trainer::DatasetSplit split() const {
        if (!fs::exists(cfg.split_path())) throw Error(ErrorKind::not_found, "no split; run 'split' first");
        return trainer::split_from_json(read_json_file(cfg.split_path()));
    }
    std::vector<augment::SyntheticDocument> synthetics() const {
        return fs::exists(cfg.synthetics_path()) ? augment::read_synthetics(cfg.synthetics_path())
                                                 : std::vector<augment::SyntheticDocument>{};
    }
};

void record_run_metadata(const PipelineConfig& cfg, const std::string& command, const std::string& started) {
    auto path = cfg.reports / "run_metadata.json";
    json meta = fs::exists(path) ? read_json_file(path) : json::object();
    meta[command] = {{"started_at", started}, {"finished_at", service::utc_now()}, {"config_hash", cfg.hash}};
    write_json_file(path, meta);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void cmd_ingest(Context& ctx) {
    auto store = ctx.store();
    corpus::write_documents(ctx.cfg.documents_path(), store.documents());
    ctx.write_report("ingest.json", {{"posts", store.post_count(PostType::post)},
                                     {"stories", store.post_count(PostType::story)},
                                     {"documents", store.documents().size()}});
    ctx.out << "ingested " << store.posts().size() << " posts into " << store.documents().size() << " documents\n";
}

void cmd_stats(Context& ctx) {
    auto csv = corpus::stats_csv(corpus::corpus_stats(ctx.store()));
    write_text_file(ctx.cfg.reports / "corpus_stats.csv", csv);
    ctx.out << csv;
}

void cmd_sample(Context& ctx, const std::string& fraction_override) {
    auto fraction = fraction_override.empty() ? ctx.cfg.sample_fraction : Fraction::parse(fraction_override);
    auto plan = annotation::draw_stratified_sample(ctx.store().documents(), fraction, ctx.cfg.seed);
    auto j = annotation::to_json(plan);
    j["provenance"] = provenance(ctx.cfg, ctx.command);
    write_json_file(ctx.cfg.sample_path(), j);
    ctx.out << "sampled " << plan.size() << " documents (fraction " << fraction.str() << ")\n";
}

void cmd_serve(Context& ctx, int port, const std::string& port_file, bool exit_when_complete) {
    auto svc = make_service(ctx.cfg);
    g_stop = false;
    auto old_int = std::signal(SIGINT, on_signal);
    auto old_term = std::signal(SIGTERM, on_signal);
    int bound = svc->start(ctx.cfg.host, port);
    if (!port_file.empty()) write_text_file(port_file, std::to_string(bound) + "\n");
    ctx.out << "annotation service listening on " << ctx.cfg.host << ":" << bound << std::endl;
    while (!g_stop) {
        if (exit_when_complete) {
            auto p = svc->progress().body;
            if (p["pending"].get<std::size_t>() == 0 && p["awaiting_adjudicator"].get<std::size_t>() == 0) break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    svc->stop();
    std::signal(SIGINT, old_int);
    std::signal(SIGTERM, old_term);
    ctx.out << "annotation service stopped\n";
}

void cmd_aggregate(Context& ctx) {
    const auto& a = ctx.cfg.annotation;
    auto votes = annotation::read_votes(ctx.cfg.votes_path());
    auto result = annotation::aggregate_labels(votes, a.adjudicator_id, a.max_rounds);
    annotation::write_decisions(ctx.cfg.decisions_path(), result.decisions);

    json agreement = {{"alpha", nullptr}, {"kappa_adjudicator", nullptr}};
    try {
        agreement = annotation::to_json(annotation::agreement_report(votes, result.decisions, a.adjudicator_id));
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::undefined_agreement) throw;
        agreement["note"] = e.what();
    }
    std::map<std::string, std::size_t> methods;
    std::size_t positives = 0;
    for (const auto& d : result.decisions) {
        ++methods[std::string(annotation::to_string(d.method))];
        positives += d.label == Label::positive;
    }
    ctx.write_report("agreement.json", {{"agreement", agreement},
                                        {"decisions", result.decisions.size()},
                                        {"positive", positives},
                                        {"methods", methods},
                                        {"votes", votes.size()},
                                        {"disagreement_queue", result.disagreement_queue}});
    auto balance = annotation::class_balance(result.decisions, ctx.store().documents());
    write_text_file(ctx.cfg.reports / "class_balance.csv", annotation::class_balance_csv(balance));
    if (!result.disagreement_queue.empty())
        log_warning(std::to_string(result.disagreement_queue.size()) + " documents still await another round");
    ctx.out << "decided " << result.decisions.size() << " documents (" << positives << " positive)\n";
}

std::vector<corpus::TextDocument> scoped_docs(const Context& ctx, const std::string& scope) {
    auto docs = ctx.store().documents();
    if (scope == "all") return docs;
    if (scope != "labeled") throw Error(ErrorKind::invalid_argument, "scope must be 'labeled' or 'all'");
    auto truth = ctx.decisions();
    std::vector<corpus::TextDocument> out;
    for (auto& d : docs)
        if (truth.contains(d.doc_id)) out.push_back(std::move(d));
    return out;
}

void cmd_classify(Context& ctx, const std::string& mode_s, const std::string& scope, std::string out_path) {
    auto mode = llm::prompt_mode_from_string(mode_s);
    auto lib = llm::PromptLibrary::load(ctx.cfg.prompts);
    const auto& tmpl = lib.get("cta", mode);
    auto docs = scoped_docs(ctx, scope);
    llm::ChatGateway gateway(ctx.cfg.classify_endpoint, llm::ResponseCache(ctx.cfg.cache));
    auto records = llm::classify_corpus(docs, gateway, tmpl);
    if (out_path.empty()) out_path = (ctx.cfg.workdir / ("classifications_" + mode_s + ".jsonl")).string();
    std::vector<json> rows;
    std::map<std::string, std::size_t> counts;
    std::size_t failed = 0;
    for (const auto& r : records) {
        rows.push_back(llm::to_json(r));
        ++counts[std::string(llm::to_string(r.parsed_label))];
        failed += r.error.has_value();
    }
    write_jsonl(out_path, rows);
    ctx.write_report("classify_" + mode_s + ".json", {{"model", ctx.cfg.classify_endpoint.model_name},
                                                      {"mode", mode_s},
                                                      {"documents", records.size()},
                                                      {"parsed", counts},
                                                      {"request_failures", failed}});
    ctx.out << "classified " << records.size() << " documents -> " << out_path << "\n";
}

void cmd_exclude_leakage(Context& ctx, const std::string& scope) {
    auto lib = llm::PromptLibrary::load(ctx.cfg.prompts);
    auto split = llm::exclude_fewshot_leakage(scoped_docs(ctx, scope), lib.get("cta", llm::PromptMode::few_shot));
    std::vector<std::string> excluded;
    for (const auto& d : split.excluded) excluded.push_back(d.doc_id);
    json j = {{"excluded", excluded}, {"n_excluded", excluded.size()}, {"n_kept", split.kept.size()},
              {"provenance", provenance(ctx.cfg, ctx.command)}};
    write_json_file(ctx.cfg.leakage_path(), j);
    ctx.out << "excluded " << excluded.size() << " documents containing few-shot phrases\n";
}

void cmd_split(Context& ctx, double ratio) {
    std::vector<trainer::LabeledDoc> docs;
    for (const auto& [id, l] : ctx.decisions()) docs.push_back({id, l});
    auto split = trainer::split_train_test(docs, ratio > 0 ? ratio : ctx.cfg.split_ratio, ctx.cfg.seed);
    auto j = trainer::to_json(split);
    j["provenance"] = provenance(ctx.cfg, ctx.command);
    write_json_file(ctx.cfg.split_path(), j);
    ctx.out << "split: " << split.train.size() << " train / " << split.test.size() << " test\n";
}

void cmd_synth(Context& ctx) {
    auto split = ctx.split();
    auto store = ctx.store();
    std::unordered_map<std::string, Label> truth;
    std::vector<corpus::TextDocument> positives;
    for (const auto& id : split.train) {
        auto l = split.labels.at(id);
        if (l != Label::positive) continue;
        const auto* d = store.find_document(id);
        if (!d) throw Error(ErrorKind::not_found, "split document " + id + " is not in the corpus");
        truth[id] = l;
        positives.push_back(*d);
    }
    auto lib = llm::PromptLibrary::load(ctx.cfg.prompts);
    llm::ChatGateway gateway(ctx.cfg.synth_endpoint, llm::ResponseCache(ctx.cfg.cache));
    auto result = augment::generate_synthetics(positives, truth, gateway, lib.get("synth", llm::PromptMode::few_shot),
                                               ctx.cfg.synth_per_doc);
    augment::write_synthetics(ctx.cfg.synthetics_path(), result.synthetics);
    json failures = json::array();
    for (const auto& f : result.failures)
        failures.push_back({{"parent_doc_id", f.parent_doc_id}, {"generation_index", f.generation_index}, {"reason", f.reason}});
    ctx.write_report("synth_report.json", {{"parents", positives.size()},
                                           {"generated", result.synthetics.size()},
                                           {"failures", failures},
                                           {"warnings", result.warnings}});
    ctx.out << "generated " << result.synthetics.size() << " synthetic documents from " << positives.size()
            << " positives\n";
}

void cmd_folds(Context& ctx, std::size_t k) {
    auto plan = trainer::make_fold_plan(ctx.split(), ctx.synthetics(), k > 0 ? k : ctx.cfg.folds, ctx.cfg.seed);
    auto j = trainer::to_json(plan);
    j["provenance"] = provenance(ctx.cfg, ctx.command);
    write_json_file(ctx.cfg.folds_path(), j);
    ctx.out << "fold plan: " << plan.k() << " folds\n";
}

void cmd_train(Context& ctx, const std::string& model_name) {
    auto store = ctx.store();
    auto split = ctx.split();
    auto synths = ctx.synthetics();
    if (!fs::exists(ctx.cfg.folds_path())) throw Error(ErrorKind::not_found, "no fold plan; run 'folds' first");
    auto plan = trainer::fold_plan_from_json(read_json_file(ctx.cfg.folds_path()));

    std::unordered_map<std::string, std::string> doc_texts, synth_texts;
    for (const auto& d : store.documents()) doc_texts[d.doc_id] = d.text;
    for (const auto& s : synths) synth_texts[s.synth_id] = s.text;

    auto cv = trainer::cross_validate(plan, doc_texts, synth_texts, ctx.cfg.hyper, ctx.cfg.features);
    auto cv_json = trainer::to_json(cv);
    cv_json["hyperparams"] = trainer::to_json(ctx.cfg.hyper);
    ctx.write_report("cv_report.json", cv_json);

    std::vector<trainer::TrainingExample> examples;
    for (const auto& id : split.train) {
        auto it = doc_texts.find(id);
        if (it == doc_texts.end()) throw Error(ErrorKind::not_found, "training document " + id + " is not in the corpus");
        examples.push_back({it->second, split.labels.at(id)});
    }
    for (const auto& s : synths) examples.push_back({s.text, Label::positive});
    auto model = trainer::train_baseline(examples, ctx.cfg.hyper, ctx.cfg.features);
    write_json_file(ctx.cfg.model_path(), trainer::model_to_json(model));

    std::vector<trainer::PredictionRecord> test_preds, all_preds;
    for (const auto& id : split.test) {
        auto p = trainer::predict(model, doc_texts.at(id));
        test_preds.push_back({id, p.label, p.score, model_name});
    }
    for (const auto& d : store.documents()) {
        auto p = trainer::predict(model, d.text);
        all_preds.push_back({d.doc_id, p.label, p.score, model_name});
    }
    trainer::write_predictions(ctx.cfg.predictions_path(), test_preds);
    trainer::write_predictions(ctx.cfg.predictions_all_path(), all_preds);
    ctx.out << "cv mean macro F1 " << fmt("%.4f", cv.mean_f1_macro) << " (std " << fmt("%.4f", cv.std_f1_macro)
            << "); final model trained on " << examples.size() << " examples\n";
}

void cmd_evaluate(Context& ctx, const std::string& preds, const std::string& classifications, std::string name,
                  const std::string& truth_path, bool exclude_leakage) {
    if (preds.empty() == classifications.empty())
        throw Error(ErrorKind::invalid_argument, "evaluate needs exactly one of --preds or --classifications");
    std::map<std::string, Label> truth;
    if (!truth_path.empty()) {
        for (const auto& d : annotation::read_decisions(truth_path)) truth[d.doc_id] = d.label;
    } else {
        truth = ctx.decisions();
    }
    auto store = ctx.store();
    std::map<std::string, Label> predicted;
    std::size_t unparseable = 0;
    std::string model = name, prompt = "-";
    if (!preds.empty()) {
        std::set<std::string> known;
        for (const auto& d : store.documents()) known.insert(d.doc_id);
        for (const auto& p : trainer::import_external_predictions(preds, known)) {
            predicted[p.doc_id] = p.label;
            model = p.model_name;
        }
        if (name.empty()) name = fs::path(preds).stem().string();
    } else {
        for_each_jsonl(classifications, [&](const json& j, std::size_t) {
            auto r = llm::classification_from_json(j);
            model = r.model_name;
            prompt = r.mode.empty() ? r.template_id : r.mode;
            if (r.parsed_label == llm::ParsedLabel::unparseable) {
                ++unparseable;
                return;
            }
            predicted[r.doc_id] = r.parsed_label == llm::ParsedLabel::positive ? Label::positive : Label::negative;
        });
        if (name.empty()) name = fs::path(classifications).stem().string();
    }
    std::size_t leaked = 0;
    if (exclude_leakage) {
        if (!fs::exists(ctx.cfg.leakage_path())) throw Error(ErrorKind::not_found, "no leakage list; run 'exclude-leakage' first");
        const json leakage = read_json_file(ctx.cfg.leakage_path());
        for (const auto& id : leakage.at("excluded")) leaked += predicted.erase(id.get<std::string>());
    }
    std::size_t without_truth = 0;
    for (const auto& [id, l] : predicted) without_truth += !truth.contains(id);
    auto report = evaluate_with_breakdown(truth, predicted, store.documents());
    ctx.write_report("eval_" + name + ".json", {{"model", model},
                                                {"prompt", prompt},
                                                {"metrics", metrics::to_json(report)},
                                                {"excluded_unparseable", unparseable},
                                                {"excluded_leakage", leaked},
                                                {"without_ground_truth", without_truth}});
    write_text_file(ctx.cfg.reports / ("eval_" + name + ".csv"),
                    metrics::eval_csv_header() + "\n" + metrics::eval_csv_row(model, prompt, report));
    ctx.out << "kappa " << fmt("%.4f", report.kappa) << ", macro F1 " << fmt("%.4f", report.f1_macro)
            << ", binary F1 " << fmt("%.4f", report.f1_binary) << " over " << report.n() << " documents\n";
}

void cmd_import(Context& ctx, const std::string& file, const std::string& name) {
    std::set<std::string> known;
    const auto store = ctx.store();
    for (const auto& d : store.documents()) known.insert(d.doc_id);
    auto records = trainer::import_external_predictions(file, known);
    if (!name.empty())
        for (auto& r : records) r.model_name = name;
    auto dest = ctx.cfg.workdir / ("predictions_" + (name.empty() ? fs::path(file).stem().string() : name) + ".jsonl");
    trainer::write_predictions(dest, records);
    ctx.out << "imported " << records.size() << " predictions -> " << dest.string() << "\n";
}

void cmd_analyze(Context& ctx, std::string preds, const std::string& pooling_s, bool use_truth) {
    auto store = ctx.store();
    std::map<std::string, bool> doc_labels;
    if (use_truth) {
        for (const auto& [id, l] : ctx.decisions()) doc_labels[id] = l == Label::positive;
    } else {
        if (preds.empty()) preds = ctx.cfg.predictions_all_path().string();
        std::set<std::string> known;
        for (const auto& d : store.documents()) known.insert(d.doc_id);
        for (const auto& p : trainer::import_external_predictions(preds, known)) doc_labels[p.doc_id] = p.label == Label::positive;
    }
    analysis::Pooling pooling;
    if (pooling_s == "pooled") pooling = analysis::Pooling::party_and_frontrunner;
    else if (pooling_s == "party_only") pooling = analysis::Pooling::party_accounts_only;
    else throw Error(ErrorKind::invalid_argument, "pooling must be 'pooled' or 'party_only'");

    auto agg = analysis::aggregate_to_posts(doc_labels, store);
    auto by_type = analysis::prevalence_table(agg.labels, analysis::GroupBy::post_type, pooling);
    auto by_party = analysis::prevalence_table(agg.labels, analysis::GroupBy::party, pooling);
    auto crossed = analysis::prevalence_table(agg.labels, analysis::GroupBy::party_post_type, pooling);
    auto strata = analysis::stratum_prevalence(doc_labels, store);
    std::optional<analysis::AssociationReport> tests;
    json association;
    try {
        tests = analysis::association_tests(agg.labels, pooling);
        association = analysis::to_json(*tests);
    } catch (const Error& e) {
        // too few posts or groups for a contingency table; prevalence is still reported
        if (e.kind() != ErrorKind::invalid_argument && e.kind() != ErrorKind::empty_input) throw;
        log_warning(std::string("association tests skipped: ") + e.what());
        association = {{"skipped", e.what()}};
    }

    write_text_file(ctx.cfg.reports / "prevalence_post_type.csv", analysis::prevalence_csv(by_type));
    write_text_file(ctx.cfg.reports / "prevalence_party.csv", analysis::prevalence_csv(by_party));
    write_text_file(ctx.cfg.reports / "prevalence_party_post_type.csv", analysis::prevalence_csv(crossed));
    write_text_file(ctx.cfg.reports / "prevalence_strata.csv", analysis::prevalence_csv(strata));
    if (tests) write_text_file(ctx.cfg.reports / "association_tests.csv", analysis::association_csv(*tests));
    ctx.write_report("analysis.json", {{"label_source", use_truth ? std::string("decisions") : fs::path(preds).filename().string()},
                                       {"pooling", analysis::to_string(pooling)},
                                       {"posts_aggregated", agg.labels.size()},
                                       {"unlabeled_posts", agg.unlabeled_posts},
                                       {"textless_posts", agg.textless_posts},
                                       {"prevalence_post_type", analysis::to_json(by_type)},
                                       {"prevalence_party", analysis::to_json(by_party)},
                                       {"prevalence_party_post_type", analysis::to_json(crossed)},
                                       {"prevalence_strata", analysis::to_json(strata)},
                                       {"association", association}});
    for (const auto& r : by_type.rows) ctx.out << r.keys[0] << ": " << fmt("%.2f", r.pct) << "% CTA\n";
    if (tests)
        ctx.out << "post vs story chi2(" << tests->post_vs_story.df << ") = "
                << fmt("%.2f", tests->post_vs_story.statistic) << ", V = " << fmt("%.2f", tests->post_vs_story.cramers_v)
                << "\n";
}

void cmd_make_toy(std::ostream& out, const fs::path& dir) {
    auto toy = toy::make_toy_corpus();
    fs::create_directories(dir);
    std::vector<json> posts, truth;
    for (const auto& p : toy.posts) posts.push_back(corpus::to_json(p));
    for (const auto& [id, cta] : toy.truth) truth.push_back({{"doc_id", id}, {"label", cta}});
    write_jsonl(dir / "posts.jsonl", posts);
    write_jsonl(dir / "truth.jsonl", truth);
    out << "wrote " << posts.size() << " posts and " << truth.size() << " labels to " << dir.string() << "\n";
}

}  // namespace

// ---- entry point --------------------------------------------------------------

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"CTA detection pipeline toolkit", "ctalab"};
    app.require_subcommand(1, 1);
    std::string config_path = "ctalab.json";
    app.add_option("-c,--config", config_path, "pipeline config file")->capture_default_str();

    auto* ingest = app.add_subcommand("ingest", "validate posts.jsonl and emit documents.jsonl");
    auto* stats = app.add_subcommand("stats", "corpus statistics by post and text type");
    auto* sample = app.add_subcommand("sample", "draw the stratified annotation sample");
    std::string fraction;
    sample->add_option("--fraction", fraction, "override the sampling fraction (e.g. 0.2 or 1/5)");

    auto* serve = app.add_subcommand("serve", "run the annotation HTTP service");
    int port = -1;
    std::string port_file;
    bool exit_when_complete = false;
    serve->add_option("--port", port, "listen port (0 picks a free port)");
    serve->add_option("--port-file", port_file, "write the bound port to this file");
    serve->add_flag("--exit-when-complete", exit_when_complete, "stop once every sampled document is decided");

    auto* aggregate = app.add_subcommand("aggregate", "majority decisions and agreement from the vote log");

    auto* classify = app.add_subcommand("classify-llm", "classify documents through the chat endpoint");
    std::string mode = "few_shot", scope = "labeled", classify_out;
    classify->add_option("--mode", mode, "few_shot or zero_shot")->capture_default_str();
    classify->add_option("--scope", scope, "labeled or all")->capture_default_str();
    classify->add_option("--out", classify_out, "output JSONL path");

    auto* leakage = app.add_subcommand("exclude-leakage", "list documents containing few-shot phrases");
    std::string leak_scope = "labeled";
    leakage->add_option("--scope", leak_scope, "labeled or all")->capture_default_str();

    auto* synth = app.add_subcommand("synth", "generate synthetic positives from the training split");
    auto* split = app.add_subcommand("split", "stratified train/test split of the decisions");
    double ratio = -1;
    split->add_option("--ratio", ratio, "training share");
    auto* folds = app.add_subcommand("folds", "stratified k-fold plan over the training split");
    std::size_t k = 0;
    folds->add_option("-k,--folds", k, "number of folds");

    auto* train = app.add_subcommand("train", "cross-validate and train the baseline classifier");
    std::string model_name = "baseline";
    train->add_option("--name", model_name, "model name written to predictions")->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "metrics against the ground-truth decisions");
    std::string preds, classifications, eval_name, truth_path;
    bool exclude = false;
    evaluate->add_option("--preds", preds, "predictions.jsonl");
    evaluate->add_option("--classifications", classifications, "classify-llm output");
    evaluate->add_option("--name", eval_name, "report name");
    evaluate->add_option("--truth", truth_path, "decisions.jsonl (default: the pipeline's)");
    evaluate->add_flag("--exclude-leakage", exclude, "drop documents listed by exclude-leakage");

    auto* import = app.add_subcommand("import-preds", "validate and import external predictions");
    std::string import_file, import_name;
    import->add_option("--file", import_file, "predictions.jsonl")->required();
    import->add_option("--name", import_name, "model name");

    auto* analyze = app.add_subcommand("analyze", "post-level prevalence and association tests");
    std::string analyze_preds, pooling = "pooled";
    bool use_truth = false;
    analyze->add_option("--preds", analyze_preds, "document predictions (default predictions_all.jsonl)");
    analyze->add_option("--pooling", pooling, "pooled or party_only")->capture_default_str();
    analyze->add_flag("--use-decisions", use_truth, "use annotated decisions instead of predictions");

    auto* make_toy = app.add_subcommand("make-toy", "write the synthetic toy corpus");
    std::string toy_dir = "data/toy";
    make_toy->add_option("--out", toy_dir, "output directory")->capture_default_str();

    std::vector<std::string> argv_store = {"ctalab"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    std::string command;
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        command = app.get_subcommands().front()->get_name();
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        if (code != 0)
            err << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << "\n";
        return code;
    }

    try {
        if (*make_toy) {
            cmd_make_toy(out, toy_dir);
            return 0;
        }
        Context ctx{load_config(config_path), out, command};
        ctx.ensure_dirs();
        const auto started = service::utc_now();
        if (*ingest) cmd_ingest(ctx);
        else if (*stats) cmd_stats(ctx);
        else if (*sample) cmd_sample(ctx, fraction);
        else if (*serve) cmd_serve(ctx, port >= 0 ? port : ctx.cfg.port, port_file, exit_when_complete);
        else if (*aggregate) cmd_aggregate(ctx);
        else if (*classify) cmd_classify(ctx, mode, scope, classify_out);
        else if (*leakage) cmd_exclude_leakage(ctx, leak_scope);
        else if (*synth) cmd_synth(ctx);
        else if (*split) cmd_split(ctx, ratio);
        else if (*folds) cmd_folds(ctx, k);
        else if (*train) cmd_train(ctx, model_name);
        else if (*evaluate) cmd_evaluate(ctx, preds, classifications, eval_name, truth_path, exclude);
        else if (*import) cmd_import(ctx, import_file, import_name);
        else if (*analyze) cmd_analyze(ctx, analyze_preds, pooling, use_truth);
        record_run_metadata(ctx.cfg, command, started);
        return 0;
    } catch (const Error& e) {
        err << json{{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}, {"command", command}}}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << json{{"error", {{"kind", "internal"}, {"message", e.what()}, {"command", command}}}}.dump() << "\n";
        return 1;
    }
}

int run_command(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_command(args, std::cout, std::cerr);
}

}  // namespace ctalab::app
