#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctalab/augment.hpp"
#include "ctalab/features.hpp"
#include "ctalab/metrics.hpp"

namespace ctalab::trainer {

struct LabeledDoc {
    std::string doc_id;
    Label label = Label::negative;
};

struct DatasetSplit {
    std::vector<std::string> train;  // sorted
    std::vector<std::string> test;   // sorted
    std::map<std::string, Label> labels;
    std::uint64_t seed = 0;
    double ratio = 0.8;
};

// Per class, ids are sorted, permuted by a seed-derived stream, and the first
// round_half_up(ratio * n_class) go to training.
DatasetSplit split_train_test(const std::vector<LabeledDoc>& docs, double ratio, std::uint64_t seed);

struct FoldPlan {
    std::vector<std::vector<std::string>> folds;           // validation ids per fold, sorted
    std::vector<std::vector<std::string>> synthetic_ids;   // training additions per fold, sorted
    std::map<std::string, Label> labels;
    std::uint64_t seed = 0;

    std::size_t k() const { return folds.size(); }
    // Training ids for fold f: every fold except f.
    std::vector<std::string> training_ids(std::size_t f) const;
};

// Stratified k-fold over the training portion. A synthetic is attached to
// fold f only if its parent sits in f's training portion. Parents in the test
// set, or missing from the split, raise an integrity error.
FoldPlan make_fold_plan(const DatasetSplit& split, const std::vector<augment::SyntheticDocument>& synthetics,
                        std::size_t k, std::uint64_t seed);

struct ClassWeights {
    double negative = 1;
    double positive = 1;
    double of(Label l) const { return l == Label::positive ? positive : negative; }
};

// Balanced heuristic w_c = N / (2 * n_c).
ClassWeights compute_class_weights(std::span<const Label> labels);

struct Hyperparams {
    double learning_rate = 0.1;
    int epochs = 200;
    double l2 = 1e-4;
    double tolerance = 1e-6;
    int max_halvings = 60;
    std::uint64_t seed = 0;
    bool parallel_kernel = true;
};

json to_json(const Hyperparams& h);
Hyperparams hyperparams_from_json(const json& j);

struct BaselineModel {
    features::FeatureConfig features;
    std::vector<double> weights;
    double bias = 0;
    ClassWeights class_weights;
    Hyperparams hyper;
    int epochs_run = 0;
    std::vector<double> loss_history;
};

struct TrainingExample {
    std::string text;
    Label label = Label::negative;
};

// Full-batch gradient descent on the class-weighted logistic loss. The step
// is halved whenever it would raise the loss; training stops once the
// improvement drops below the tolerance or the epoch budget is spent. Weights
// start at zero and the bias at the log prior odds of the training labels.
BaselineModel train_baseline(const std::vector<TrainingExample>& examples, const Hyperparams& hyper,
                             const features::FeatureConfig& feature_cfg = {},
                             std::optional<ClassWeights> class_weights = std::nullopt);

struct Prediction {
    Label label = Label::negative;
    double score = 0.5;
};

Prediction predict(const BaselineModel& model, std::string_view text);
Prediction predict(const BaselineModel& model, const features::SparseVector& x);

json model_to_json(const BaselineModel& model);
BaselineModel model_from_json(const json& j);

struct FoldReport {
    std::size_t fold = 0;
    std::size_t n_train = 0;
    std::size_t n_synthetic = 0;
    std::size_t n_validation = 0;
    bool degenerate = false;
    std::optional<metrics::EvalReport> report;
};

struct CrossValidationReport {
    std::vector<FoldReport> folds;
    double mean_f1_macro = 0;
    double std_f1_macro = 0;  // population standard deviation
    std::vector<std::string> warnings;
};

// Folds train concurrently (one OpenMP task per fold), each single-threaded.
CrossValidationReport cross_validate(const FoldPlan& plan,
                                     const std::unordered_map<std::string, std::string>& doc_texts,
                                     const std::unordered_map<std::string, std::string>& synthetic_texts,
                                     const Hyperparams& hyper, const features::FeatureConfig& feature_cfg = {});
json to_json(const CrossValidationReport& r);

struct PredictionRecord {
    std::string doc_id;
    Label label = Label::negative;
    double score = 0;
    std::string model_name;
};

json to_json(const PredictionRecord& p);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& preds);
std::vector<PredictionRecord> import_external_predictions(const std::filesystem::path& path,
                                                          const std::set<std::string>& known_doc_ids);

json to_json(const DatasetSplit& s);
DatasetSplit split_from_json(const json& j);
json to_json(const FoldPlan& p);
FoldPlan fold_plan_from_json(const json& j);

}  // namespace ctalab::trainer
