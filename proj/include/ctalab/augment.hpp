#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctalab/corpus.hpp"
#include "ctalab/llm_gateway.hpp"

namespace ctalab::augment {

struct SyntheticDocument {
    std::string synth_id;
    std::string parent_doc_id;
    int generation_index = 1;  // 1..n
    std::string text;
    std::string prompt_hash;
    std::size_t token_budget = 0;
};

json to_json(const SyntheticDocument& s);
SyntheticDocument synthetic_from_json(const json& j);
void write_synthetics(const std::filesystem::path& path, const std::vector<SyntheticDocument>& synths);
std::vector<SyntheticDocument> read_synthetics(const std::filesystem::path& path);

// Fills the generation template from the document's provenance fields.
// Character length counts Unicode code points.
std::string render_synth_prompt(const corpus::TextDocument& doc, const llm::PromptTemplate& tmpl);

// User message carrying the variation instruction for generation i of n.
std::string variation_message(int index, int total);

struct GenerationFailure {
    std::string parent_doc_id;
    int generation_index = 0;
    std::string reason;
};

struct GenerationResult {
    std::vector<SyntheticDocument> synthetics;  // ordered by (parent, generation_index)
    std::vector<GenerationFailure> failures;
    std::vector<std::string> warnings;
};

// Every input must carry a positive ground-truth label in `truth`. Each
// request's max_tokens is the parent's approx_llm token count. A generation
// equal to its parent (or empty) is retried once bypassing the cache, then
// dropped with a warning.
GenerationResult generate_synthetics(const std::vector<corpus::TextDocument>& positives,
                                     const std::unordered_map<std::string, Label>& truth,
                                     llm::ChatGateway& gateway, const llm::PromptTemplate& tmpl,
                                     int n_per_doc = 3);

}  // namespace ctalab::augment
