#include "ctalab/augment.hpp"

#include <algorithm>
#include <unordered_set>

namespace ctalab::augment {

json to_json(const SyntheticDocument& s) {
    return {{"synth_id", s.synth_id},
            {"parent_doc_id", s.parent_doc_id},
            {"generation_index", s.generation_index},
            {"text", s.text},
            {"prompt_hash", s.prompt_hash},
            {"token_budget", s.token_budget}};
}

SyntheticDocument synthetic_from_json(const json& j) {
    SyntheticDocument s;
    s.synth_id = j.at("synth_id").get<std::string>();
    s.parent_doc_id = j.at("parent_doc_id").get<std::string>();
    s.generation_index = j.at("generation_index").get<int>();
    s.text = j.at("text").get<std::string>();
    s.prompt_hash = j.value("prompt_hash", std::string{});
    s.token_budget = j.value("token_budget", std::size_t{0});
    return s;
}

void write_synthetics(const std::filesystem::path& path, const std::vector<SyntheticDocument>& synths) {
    std::vector<json> rows;
    for (const auto& s : synths) rows.push_back(to_json(s));
    write_jsonl(path, rows);
}

std::vector<SyntheticDocument> read_synthetics(const std::filesystem::path& path) {
    std::vector<SyntheticDocument> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            out.push_back(synthetic_from_json(j));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::parse, path.filename().string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

std::string render_synth_prompt(const corpus::TextDocument& doc, const llm::PromptTemplate& tmpl) {
    if (doc.username.empty() || doc.party.empty())
        throw Error(ErrorKind::invalid_argument, "document " + doc.doc_id + " lacks username or party");
    if (doc.text.empty()) throw Error(ErrorKind::invalid_argument, "document " + doc.doc_id + " has no text");
    return llm::fill_placeholders(tmpl.system_text,
                                  {{"text_type", std::string(to_string(doc.text_type))},
                                   {"post_type", std::string(to_string(doc.post_type))},
                                   {"username", doc.username},
                                   {"party", doc.party},
                                   {"example_length", std::to_string(utf8_length(doc.text))},
                                   {"example", doc.text}});
}

std::string variation_message(int index, int total) {
    return "Variante " + std::to_string(index) + " von " + std::to_string(total);
}

GenerationResult generate_synthetics(const std::vector<corpus::TextDocument>& positives,
                                     const std::unordered_map<std::string, Label>& truth,
                                     llm::ChatGateway& gateway, const llm::PromptTemplate& tmpl,
                                     int n_per_doc) {
    if (n_per_doc < 1) throw Error(ErrorKind::invalid_argument, "n_per_doc must be >= 1");
    for (const auto& d : positives) {
        auto it = truth.find(d.doc_id);
        if (it == truth.end() || it->second != Label::positive)
            throw Error(ErrorKind::invalid_argument, "document " + d.doc_id + " is not labeled positive");
    }
    struct Job {
        std::size_t parent;
        int index;
    };
    std::unordered_set<std::string> parent_texts;
    for (const auto& d : positives) parent_texts.insert(d.text);
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < positives.size(); ++p)
        for (int i = 1; i <= n_per_doc; ++i) jobs.push_back({p, i});

    struct Slot {
        std::optional<SyntheticDocument> synth;
        std::optional<GenerationFailure> failure;
        std::optional<std::string> warning;
    };
    std::vector<Slot> slots(jobs.size());
    const auto& cfg = gateway.config();
    llm::parallel_for_bounded(jobs.size(), cfg.max_parallel, [&](std::size_t j) {
        const auto& parent = positives[jobs[j].parent];
        const int index = jobs[j].index;
        auto budget = corpus::count_tokens(parent.text, corpus::TokenScheme::approx_llm);
        llm::ChatRequest req{cfg.model_name, render_synth_prompt(parent, tmpl),
                             variation_message(index, n_per_doc), cfg.temperature, cfg.top_p,
                             static_cast<int>(std::max<std::size_t>(budget, 1))};
        auto usable = [&](const llm::Completion& c) {
            return !c.error && !is_blank(c.text) && !parent_texts.contains(c.text);
        };
        auto c = gateway.complete(req);
        if (!c.error && !usable(c)) c = gateway.complete(req, /*bypass_cache=*/true);
        auto& slot = slots[j];
        if (c.error) {
            slot.failure = GenerationFailure{parent.doc_id, index, *c.error};
        } else if (!usable(c)) {
            slot.warning = "dropped generation " + std::to_string(index) + " for " + parent.doc_id +
                           ": output repeats the parent text or is empty";
        } else {
            slot.synth = SyntheticDocument{parent.doc_id + "#s" + std::to_string(index),
                                           parent.doc_id, index, c.text, c.request_hash, budget};
        }
    });

    GenerationResult out;
    for (auto& s : slots) {
        if (s.synth) out.synthetics.push_back(std::move(*s.synth));
        if (s.failure) out.failures.push_back(std::move(*s.failure));
        if (s.warning) {
            log_warning(*s.warning);
            out.warnings.push_back(std::move(*s.warning));
        }
    }
    std::sort(out.synthetics.begin(), out.synthetics.end(), [](const auto& a, const auto& b) {
        return std::tie(a.parent_doc_id, a.generation_index) < std::tie(b.parent_doc_id, b.generation_index);
    });
    return out;
}

}  // namespace ctalab::augment
