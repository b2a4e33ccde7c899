#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ctalab/corpus.hpp"
#include "ctalab/features.hpp"
#include "ctalab/llm_gateway.hpp"
#include "ctalab/metrics.hpp"
#include "ctalab/service.hpp"
#include "ctalab/trainer.hpp"

namespace ctalab::app {

// Parsed pipeline configuration. Relative paths resolve against the config
// file's directory. Secrets (API keys) come from the environment only.
struct PipelineConfig {
    std::filesystem::path config_path;
    json raw;
    std::string hash;  // sha256 of the canonical JSON
    std::uint64_t seed = 0;

    std::filesystem::path corpus;
    std::filesystem::path workdir;
    std::filesystem::path prompts;
    std::filesystem::path cache;
    std::filesystem::path logs;
    std::filesystem::path reports;
    std::set<std::string> party_registry;
    corpus::TokenScheme token_scheme = corpus::TokenScheme::whitespace;

    Fraction sample_fraction{1, 5};
    service::ServiceConfig annotation;
    std::string host = "127.0.0.1";
    int port = 8080;

    llm::ModelEndpointConfig classify_endpoint;
    llm::ModelEndpointConfig synth_endpoint;
    int synth_per_doc = 3;

    double split_ratio = 0.8;
    std::size_t folds = 5;
    trainer::Hyperparams hyper;
    features::FeatureConfig features;

    std::filesystem::path documents_path() const { return workdir / "documents.jsonl"; }
    std::filesystem::path sample_path() const { return workdir / "sample.json"; }
    std::filesystem::path votes_path() const { return logs / "annotations.jsonl"; }
    std::filesystem::path quiz_log_path() const { return logs / "quiz_results.jsonl"; }
    std::filesystem::path decisions_path() const { return workdir / "decisions.jsonl"; }
    std::filesystem::path leakage_path() const { return workdir / "leakage.json"; }
    std::filesystem::path synthetics_path() const { return workdir / "synthetics.jsonl"; }
    std::filesystem::path split_path() const { return workdir / "split.json"; }
    std::filesystem::path folds_path() const { return workdir / "folds.json"; }
    std::filesystem::path model_path() const { return workdir / "model.json"; }
    std::filesystem::path predictions_path() const { return workdir / "predictions.jsonl"; }
    std::filesystem::path predictions_all_path() const { return workdir / "predictions_all.jsonl"; }
};

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir);

// {config_hash, seed, command}: embedded in every report.
json provenance(const PipelineConfig& cfg, const std::string& command);

std::unique_ptr<service::AnnotationService> make_service(const PipelineConfig& cfg);

// Metrics over the intersection of predictions and ground truth, with one
// breakdown row per (post_type, text_type) stratum present.
metrics::EvalReport evaluate_with_breakdown(const std::map<std::string, Label>& truth,
                                            const std::map<std::string, Label>& predicted,
                                            const std::vector<corpus::TextDocument>& docs);

// CLI entry. Returns the process exit status; failures print a JSON error
// object on `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, char** argv);

}  // namespace ctalab::app
