#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ctalab/common.hpp"
#include "ctalab/corpus.hpp"

namespace ctalab::llm {

enum class PromptMode { few_shot, zero_shot };
std::string_view to_string(PromptMode m);
PromptMode prompt_mode_from_string(std::string_view s);

struct PromptTemplate {
    std::string template_id;
    PromptMode mode = PromptMode::few_shot;
    std::string system_text;
    std::vector<std::string> example_phrases;  // few-shot only
};

// Golden prompt files:
//   cta_fewshot.txt, cta_zeroshot.txt  classification prompt
//   cta_fewshot_phrases.txt            one leakage phrase per line
//   synth.txt                          generation prompt with {placeholders}
class PromptLibrary {
public:
    static PromptLibrary load(const std::filesystem::path& dir);

    // template ids: "cta" (both modes), "synth" (few_shot slot only)
    const PromptTemplate& get(const std::string& template_id, PromptMode mode) const;

private:
    std::map<std::pair<std::string, PromptMode>, PromptTemplate> templates_;
};

// Drops the ", e.g., ..." example fragments from each enumerated instruction
// line, closing the line with a period.
std::string derive_zero_shot(std::string_view few_shot_text);

// Replaces {name} placeholders. Every placeholder in the text must be bound.
std::string fill_placeholders(std::string_view text, const std::map<std::string, std::string>& vars);

std::string render_prompt(const PromptLibrary& library, const std::string& template_id, PromptMode mode);

enum class ParsedLabel { positive, negative, unparseable };
std::string_view to_string(ParsedLabel l);
ParsedLabel parsed_label_from_string(std::string_view s);

// First whitespace-delimited token, case-insensitive, surrounding quotes and
// trailing punctuation ignored.
ParsedLabel parse_label(std::string_view raw);

struct RetryPolicy {
    int max_attempts = 5;
    int initial_backoff_ms = 500;
    double multiplier = 2.0;
    int max_backoff_ms = 16000;
};

struct ModelEndpointConfig {
    std::string model_name = "gpt-4o-2024-05-13";
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "CTALAB_API_KEY";
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 5;
    int max_parallel = 4;
    double requests_per_second = 0;  // 0 disables the token bucket
    int timeout_s = 60;
    RetryPolicy retry;
};

ModelEndpointConfig endpoint_from_json(const json& j);
json to_json(const ModelEndpointConfig& c);

struct ChatRequest {
    std::string model;
    std::string system;
    std::string user;
    double temperature = 0;
    double top_p = 1;
    int max_tokens = 5;
};

// SHA-256 over a length-delimited encoding of every request field.
std::string request_hash(const ChatRequest& req);
json chat_request_body(const ChatRequest& req);

// cache/{model}/{first 2 hex of hash}/{hash}.json, written atomically.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

    std::filesystem::path path_for(const std::string& model, const std::string& hash) const;
    std::optional<std::string> lookup(const std::string& model, const std::string& hash) const;
    void store(const ChatRequest& req, const std::string& hash, const std::string& response) const;

private:
    std::filesystem::path root_;
};

class TokenBucket {
public:
    TokenBucket(double rate_per_second, double burst);
    void acquire();

private:
    std::mutex mu_;
    double rate_, burst_, tokens_;
    std::chrono::steady_clock::time_point last_;
};

struct Completion {
    std::string text;
    int attempts = 0;
    int http_status = 0;
    double latency_ms = 0;
    bool from_cache = false;
    std::string request_hash;
    std::optional<std::string> error;
};

// Chat-completion client with disk cache and retry. 429, 5xx and transport
// failures are retried with exponential backoff; other statuses fail at once.
class ChatGateway {
public:
    ChatGateway(ModelEndpointConfig config, std::optional<ResponseCache> cache);

    Completion complete(const ChatRequest& req, bool bypass_cache = false);
    const ModelEndpointConfig& config() const { return config_; }

private:
    Completion call_endpoint(const ChatRequest& req);

    ModelEndpointConfig config_;
    std::optional<ResponseCache> cache_;
    std::string api_key_;
    std::string host_;
    std::string path_prefix_;
    TokenBucket bucket_;
};

// Runs fn(i) for i in [0, n) on up to max_parallel worker threads.
void parallel_for_bounded(std::size_t n, int max_parallel, const std::function<void(std::size_t)>& fn);

struct ClassificationRecord {
    std::string doc_id;
    std::string model_name;
    std::string template_id;
    std::string mode;
    std::string raw_response;
    ParsedLabel parsed_label = ParsedLabel::unparseable;
    double latency_ms = 0;
    bool from_cache = false;
    std::string request_hash;
    int attempts = 0;
    std::optional<std::string> error;
};

json to_json(const ClassificationRecord& r);
ClassificationRecord classification_from_json(const json& j);

// One record per document, in input order. System message is the template
// text; the user message is the document text verbatim.
std::vector<ClassificationRecord> classify_corpus(const std::vector<corpus::TextDocument>& docs,
                                                  ChatGateway& gateway, const PromptTemplate& tmpl);

struct LeakageSplit {
    std::vector<corpus::TextDocument> kept;
    std::vector<corpus::TextDocument> excluded;
};

// A document is excluded iff its text contains an example phrase verbatim.
LeakageSplit exclude_fewshot_leakage(const std::vector<corpus::TextDocument>& docs,
                                     const PromptTemplate& tmpl);

}  // namespace ctalab::llm
