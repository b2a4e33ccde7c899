#include "ctalab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>

#include "ctalab/kernels.hpp"

namespace ctalab::trainer {

// ---- splitting --------------------------------------------------------------

static std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9)); }

DatasetSplit split_train_test(const std::vector<LabeledDoc>& docs, double ratio, std::uint64_t seed) {
    if (!(ratio > 0 && ratio < 1)) throw Error(ErrorKind::invalid_argument, "split ratio must lie in (0, 1)");
    DatasetSplit split;
    split.seed = seed;
    split.ratio = ratio;
    std::vector<std::string> by_class[2];
    for (const auto& d : docs) {
        if (!split.labels.emplace(d.doc_id, d.label).second)
            throw Error(ErrorKind::conflict, "duplicate doc_id " + d.doc_id + " in split input");
        by_class[static_cast<int>(d.label)].push_back(d.doc_id);
    }
    if (by_class[0].empty() || by_class[1].empty())
        throw Error(ErrorKind::invalid_argument, "stratified split needs both classes present");
    for (int c = 0; c < 2; ++c) {
        auto& ids = by_class[c];
        std::sort(ids.begin(), ids.end());
        std::mt19937_64 rng(mix_seed(seed, std::string("split:") + std::string(to_string(static_cast<Label>(c)))));
        std::shuffle(ids.begin(), ids.end(), rng);
        auto n_train = std::min(ids.size(), round_half_up(ratio * static_cast<double>(ids.size())));
        split.train.insert(split.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.insert(split.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::vector<std::string> FoldPlan::training_ids(std::size_t f) const {
    std::vector<std::string> out;
    for (std::size_t g = 0; g < folds.size(); ++g)
        if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
    std::sort(out.begin(), out.end());
    return out;
}

FoldPlan make_fold_plan(const DatasetSplit& split, const std::vector<augment::SyntheticDocument>& synthetics,
                        std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorKind::invalid_argument, "need at least two folds");
    FoldPlan plan;
    plan.seed = seed;
    plan.folds.resize(k);
    plan.synthetic_ids.resize(k);

    std::vector<std::string> by_class[2];
    for (const auto& id : split.train) {
        auto it = split.labels.find(id);
        if (it == split.labels.end()) throw Error(ErrorKind::integrity, "training id " + id + " has no label");
        by_class[static_cast<int>(it->second)].push_back(id);
        plan.labels.emplace(id, it->second);
    }
    std::map<std::string, std::size_t> fold_of;
    std::size_t offset = 0;
    for (int c = 0; c < 2; ++c) {
        auto& ids = by_class[c];
        std::sort(ids.begin(), ids.end());
        std::mt19937_64 rng(mix_seed(seed, std::string("fold:") + std::string(to_string(static_cast<Label>(c)))));
        std::shuffle(ids.begin(), ids.end(), rng);
        for (const auto& id : ids) {
            auto f = offset++ % k;
            plan.folds[f].push_back(id);
            fold_of[id] = f;
        }
    }
    for (auto& f : plan.folds) std::sort(f.begin(), f.end());

    std::set<std::string> test(split.test.begin(), split.test.end());
    for (const auto& s : synthetics) {
        if (test.contains(s.parent_doc_id))
            throw Error(ErrorKind::integrity,
                        "synthetic " + s.synth_id + " derives from test document " + s.parent_doc_id);
        auto it = fold_of.find(s.parent_doc_id);
        if (it == fold_of.end())
            throw Error(ErrorKind::integrity,
                        "synthetic " + s.synth_id + " has parent " + s.parent_doc_id + " outside the training set");
        for (std::size_t f = 0; f < k; ++f)
            if (f != it->second) plan.synthetic_ids[f].push_back(s.synth_id);
    }
    for (auto& l : plan.synthetic_ids) std::sort(l.begin(), l.end());
    return plan;
}

// ---- model ------------------------------------------------------------------

ClassWeights compute_class_weights(std::span<const Label> labels) {
    std::size_t pos = 0;
    for (auto l : labels) pos += l == Label::positive;
    std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw Error(ErrorKind::invalid_argument, "class weights need both classes present");
    double n = static_cast<double>(labels.size());
    return {n / (2.0 * static_cast<double>(neg)), n / (2.0 * static_cast<double>(pos))};
}

json to_json(const Hyperparams& h) {
    return {{"learning_rate", h.learning_rate}, {"epochs", h.epochs},           {"l2", h.l2},
            {"tolerance", h.tolerance},         {"max_halvings", h.max_halvings}, {"seed", h.seed}};
}

Hyperparams hyperparams_from_json(const json& j) {
    Hyperparams h;
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.epochs = j.value("epochs", h.epochs);
    h.l2 = j.value("l2", h.l2);
    h.tolerance = j.value("tolerance", h.tolerance);
    h.max_halvings = j.value("max_halvings", h.max_halvings);
    h.seed = j.value("seed", h.seed);
    if (h.epochs < 0 || h.l2 < 0 || !(h.learning_rate > 0))
        throw Error(ErrorKind::invalid_argument, "invalid trainer hyperparameters");
    return h;
}

BaselineModel train_baseline(const std::vector<TrainingExample>& examples, const Hyperparams& hyper,
                             const features::FeatureConfig& feature_cfg,
                             std::optional<ClassWeights> class_weights) {
    std::vector<Label> labels;
    labels.reserve(examples.size());
    for (const auto& e : examples) labels.push_back(e.label);
    BaselineModel model;
    model.features = feature_cfg;
    model.hyper = hyper;
    model.class_weights = class_weights ? *class_weights : compute_class_weights(labels);
    const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), Label::positive));
    const auto n_neg = static_cast<double>(labels.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::invalid_argument, "training data needs both classes");

    std::vector<features::SparseVector> rows;
    rows.reserve(examples.size());
    for (const auto& e : examples) rows.push_back(features::featurize(e.text, feature_cfg));
    features::FeatureMatrix x(rows, feature_cfg.dimension);
    std::vector<double> targets(examples.size()), sample_weights(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        targets[i] = labels[i] == Label::positive ? 1.0 : 0.0;
        sample_weights[i] = model.class_weights.of(labels[i]);
    }
    kernels::Problem problem{x, targets, sample_weights, hyper.l2};
    auto eval = hyper.parallel_kernel ? kernels::loss_and_gradient_parallel : kernels::loss_and_gradient_serial;

    model.weights.assign(feature_cfg.dimension, 0.0);
    model.bias = std::log(n_pos / n_neg);
    std::vector<double> grad(feature_cfg.dimension), cand(feature_cfg.dimension), cand_grad(feature_cfg.dimension);
    kernels::Gradient g{grad, 0};
    kernels::Gradient cg{cand_grad, 0};
    double loss = eval(problem, model.weights, model.bias, g);
    if (!std::isfinite(loss)) throw Error(ErrorKind::divergence, "non-finite loss at epoch 0");
    model.loss_history.push_back(loss);

    double lr = hyper.learning_rate;
    for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
        double cand_loss = 0, cand_bias = 0;
        bool accepted = false;
        for (int h = 0; h <= hyper.max_halvings; ++h) {
            for (std::size_t j = 0; j < cand.size(); ++j) cand[j] = model.weights[j] - lr * grad[j];
            cand_bias = model.bias - lr * g.bias;
            cand_loss = eval(problem, cand, cand_bias, cg);
            if (std::isfinite(cand_loss) && cand_loss <= loss) {
                accepted = true;
                break;
            }
            lr /= 2;
        }
        if (!accepted) {
            if (!std::isfinite(cand_loss))
                throw Error(ErrorKind::divergence, "non-finite loss at epoch " + std::to_string(epoch));
            break;  // no descent step left at machine precision
        }
        std::swap(model.weights, cand);
        std::swap(grad, cand_grad);
        g.weights = grad;
        cg.weights = cand_grad;
        g.bias = cg.bias;
        model.bias = cand_bias;
        model.epochs_run = epoch;
        model.loss_history.push_back(cand_loss);
        double improvement = loss - cand_loss;
        loss = cand_loss;
        if (improvement < hyper.tolerance) break;
    }
    for (double w : model.weights)
        if (!std::isfinite(w)) throw Error(ErrorKind::divergence, "non-finite weights after training");
    return model;
}

Prediction predict(const BaselineModel& model, const features::SparseVector& x) {
    double m = model.bias;
    for (std::size_t k = 0; k < x.nnz(); ++k) m += model.weights[x.index[k]] * x.value[k];
    Prediction p;
    p.score = std::clamp(kernels::sigmoid(m), 0.0, 1.0);
    p.label = p.score >= 0.5 ? Label::positive : Label::negative;
    return p;
}

Prediction predict(const BaselineModel& model, std::string_view text) {
    return predict(model, features::featurize(text, model.features));
}

json model_to_json(const BaselineModel& model) {
    json weights = json::array();
    for (std::size_t j = 0; j < model.weights.size(); ++j)
        if (model.weights[j] != 0.0) weights.push_back(json::array({j, model.weights[j]}));
    return {{"format", "ctalab-baseline"},
            {"version", 1},
            {"hashing",
             {{"dimension", model.features.dimension},
              {"char_min", model.features.char_min},
              {"char_max", model.features.char_max},
              {"hash", "fnv1a64"},
              {"lowercase", true},
              {"word_unigrams", true}}},
            {"bias", model.bias},
            {"class_weights", {{"negative", model.class_weights.negative}, {"positive", model.class_weights.positive}}},
            {"hyperparams", to_json(model.hyper)},
            {"epochs_run", model.epochs_run},
            {"final_loss", model.loss_history.empty() ? 0.0 : model.loss_history.back()},
            {"weights", std::move(weights)}};
}

BaselineModel model_from_json(const json& j) {
    if (j.value("format", std::string{}) != "ctalab-baseline" || j.value("version", 0) != 1)
        throw Error(ErrorKind::parse, "not a ctalab-baseline v1 model file");
    BaselineModel m;
    const auto& h = j.at("hashing");
    m.features.dimension = h.at("dimension").get<std::uint32_t>();
    m.features.char_min = h.at("char_min").get<int>();
    m.features.char_max = h.at("char_max").get<int>();
    m.bias = j.at("bias").get<double>();
    m.class_weights.negative = j.at("class_weights").at("negative").get<double>();
    m.class_weights.positive = j.at("class_weights").at("positive").get<double>();
    m.hyper = hyperparams_from_json(j.at("hyperparams"));
    m.epochs_run = j.value("epochs_run", 0);
    m.weights.assign(m.features.dimension, 0.0);
    for (const auto& w : j.at("weights")) {
        auto idx = w.at(0).get<std::size_t>();
        if (idx >= m.weights.size()) throw Error(ErrorKind::parse, "weight index out of range");
        m.weights[idx] = w.at(1).get<double>();
    }
    return m;
}

// ---- cross-validation ---------------------------------------------------------

CrossValidationReport cross_validate(const FoldPlan& plan,
                                     const std::unordered_map<std::string, std::string>& doc_texts,
                                     const std::unordered_map<std::string, std::string>& synthetic_texts,
                                     const Hyperparams& hyper, const features::FeatureConfig& feature_cfg) {
    const auto k = static_cast<std::ptrdiff_t>(plan.k());
    if (k < 2) throw Error(ErrorKind::invalid_argument, "fold plan has fewer than two folds");
    auto text_of = [&](const std::unordered_map<std::string, std::string>& m, const std::string& id) -> const std::string& {
        auto it = m.find(id);
        if (it == m.end()) throw Error(ErrorKind::not_found, "no text for " + id);
        return it->second;
    };
    auto label_of = [&](const std::string& id) {
        auto it = plan.labels.find(id);
        if (it == plan.labels.end()) throw Error(ErrorKind::not_found, "no label for " + id);
        return it->second;
    };

    CrossValidationReport out;
    out.folds.resize(plan.k());
    std::vector<std::exception_ptr> errors(plan.k());
    Hyperparams inner = hyper;
    inner.parallel_kernel = false;

#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t f = 0; f < k; ++f) {
        try {
            auto& fr = out.folds[f];
            fr.fold = static_cast<std::size_t>(f);
            std::vector<TrainingExample> train;
            for (const auto& id : plan.training_ids(f)) train.push_back({text_of(doc_texts, id), label_of(id)});
            fr.n_train = train.size();
            for (const auto& sid : plan.synthetic_ids[f]) train.push_back({text_of(synthetic_texts, sid), Label::positive});
            fr.n_synthetic = plan.synthetic_ids[f].size();
            fr.n_validation = plan.folds[f].size();

            std::vector<Label> truth, predicted;
            for (const auto& id : plan.folds[f]) truth.push_back(label_of(id));
            bool train_ok = std::any_of(train.begin(), train.end(), [](auto& e) { return e.label == Label::positive; }) &&
                            std::any_of(train.begin(), train.end(), [](auto& e) { return e.label == Label::negative; });
            bool val_ok = std::count(truth.begin(), truth.end(), Label::positive) > 0 &&
                          std::count(truth.begin(), truth.end(), Label::negative) > 0;
            if (!train_ok || !val_ok) {
                fr.degenerate = true;
                continue;
            }
            auto model = train_baseline(train, inner, feature_cfg);
            for (const auto& id : plan.folds[f]) predicted.push_back(predict(model, text_of(doc_texts, id)).label);
            fr.report = metrics::evaluate_predictions(truth, predicted);
        } catch (...) {
            errors[f] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<double> scores;
    for (const auto& fr : out.folds) {
        if (fr.degenerate) {
            out.warnings.push_back("fold " + std::to_string(fr.fold + 1) +
                                   " has a single class and is excluded from the mean");
            log_warning(out.warnings.back());
        } else {
            scores.push_back(fr.report->f1_macro);
        }
    }
    if (!scores.empty()) {
        double mean = 0;
        for (double s : scores) mean += s;
        mean /= static_cast<double>(scores.size());
        double var = 0;
        for (double s : scores) var += (s - mean) * (s - mean);
        out.mean_f1_macro = mean;
        out.std_f1_macro = std::sqrt(var / static_cast<double>(scores.size()));
    }
    return out;
}

json to_json(const CrossValidationReport& r) {
    json folds = json::array();
    for (const auto& f : r.folds) {
        json jf = {{"fold", f.fold + 1},
                   {"n_train", f.n_train},
                   {"n_synthetic", f.n_synthetic},
                   {"n_validation", f.n_validation},
                   {"degenerate", f.degenerate}};
        jf["report"] = f.report ? metrics::to_json(*f.report) : json(nullptr);
        folds.push_back(std::move(jf));
    }
    return {{"folds", folds},
            {"mean_f1_macro", r.mean_f1_macro},
            {"std_f1_macro", r.std_f1_macro},
            {"warnings", r.warnings}};
}

// ---- predictions ------------------------------------------------------------

json to_json(const PredictionRecord& p) {
    return {{"doc_id", p.doc_id}, {"label", p.label == Label::positive}, {"score", p.score}, {"model_name", p.model_name}};
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& preds) {
    std::vector<json> rows;
    for (const auto& p : preds) rows.push_back(to_json(p));
    write_jsonl(path, rows);
}

std::vector<PredictionRecord> import_external_predictions(const std::filesystem::path& path,
                                                          const std::set<std::string>& known_doc_ids) {
    std::vector<PredictionRecord> out;
    std::set<std::string> seen;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        auto where = path.filename().string() + ":" + std::to_string(line) + ": ";
        PredictionRecord p;
        try {
            p.doc_id = j.at("doc_id").get<std::string>();
            p.label = label_from_json(j.at("label"));
            p.score = j.contains("score") ? j.at("score").get<double>() : (p.label == Label::positive ? 1.0 : 0.0);
            p.model_name = j.value("model_name", std::string("external"));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::parse, where + e.what());
        }
        if (!(p.score >= 0 && p.score <= 1)) throw Error(ErrorKind::parse, where + "score outside [0, 1]");
        if (!known_doc_ids.contains(p.doc_id)) throw Error(ErrorKind::not_found, where + "unknown doc_id " + p.doc_id);
        if (!seen.insert(p.doc_id).second) throw Error(ErrorKind::conflict, where + "duplicate doc_id " + p.doc_id);
        out.push_back(std::move(p));
    });
    return out;
}

json to_json(const DatasetSplit& s) {
    json labels = json::object();
    for (const auto& [id, l] : s.labels) labels[id] = to_string(l);
    return {{"seed", s.seed}, {"ratio", s.ratio}, {"train", s.train}, {"test", s.test}, {"labels", labels}};
}

DatasetSplit split_from_json(const json& j) {
    DatasetSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.ratio = j.at("ratio").get<double>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    for (const auto& [id, l] : j.at("labels").items()) s.labels[id] = label_from_json(l);
    return s;
}

json to_json(const FoldPlan& p) {
    json folds = json::array();
    for (std::size_t f = 0; f < p.k(); ++f)
        folds.push_back({{"fold", f + 1}, {"validation", p.folds[f]}, {"synthetic_training", p.synthetic_ids[f]}});
    json labels = json::object();
    for (const auto& [id, l] : p.labels) labels[id] = to_string(l);
    return {{"seed", p.seed}, {"k", p.k()}, {"folds", folds}, {"labels", labels}};
}

FoldPlan fold_plan_from_json(const json& j) {
    FoldPlan p;
    p.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& f : j.at("folds")) {
        p.folds.push_back(f.at("validation").get<std::vector<std::string>>());
        p.synthetic_ids.push_back(f.at("synthetic_training").get<std::vector<std::string>>());
    }
    for (const auto& [id, l] : j.at("labels").items()) p.labels[id] = label_from_json(l);
    return p;
}

}  // namespace ctalab::trainer
