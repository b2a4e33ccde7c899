#include "ctalab/llm_gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>
#include <thread>

namespace ctalab::llm {

std::string_view to_string(PromptMode m) { return m == PromptMode::few_shot ? "few_shot" : "zero_shot"; }

PromptMode prompt_mode_from_string(std::string_view s) {
    if (s == "few_shot" || s == "few" || s == "fewshot") return PromptMode::few_shot;
    if (s == "zero_shot" || s == "zero" || s == "zeroshot") return PromptMode::zero_shot;
    throw Error(ErrorKind::invalid_argument, "unknown prompt mode '" + std::string(s) + "'");
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
    PromptLibrary lib;
    auto few = read_text_file(dir / "cta_fewshot.txt");
    auto zero = read_text_file(dir / "cta_zeroshot.txt");
    std::vector<std::string> phrases;
    {
        std::istringstream in(read_text_file(dir / "cta_fewshot_phrases.txt"));
        std::string line;
        while (std::getline(in, line))
            if (!is_blank(line)) phrases.push_back(line);
    }
    lib.templates_[{"cta", PromptMode::few_shot}] = {"cta", PromptMode::few_shot, few, phrases};
    lib.templates_[{"cta", PromptMode::zero_shot}] = {"cta", PromptMode::zero_shot, zero, {}};
    lib.templates_[{"synth", PromptMode::few_shot}] = {"synth", PromptMode::few_shot,
                                                       read_text_file(dir / "synth.txt"), {}};
    return lib;
}

const PromptTemplate& PromptLibrary::get(const std::string& template_id, PromptMode mode) const {
    auto it = templates_.find({template_id, mode});
    if (it == templates_.end())
        throw Error(ErrorKind::not_found,
                    "unknown template '" + template_id + "' (" + std::string(to_string(mode)) + ")");
    return it->second;
}

std::string derive_zero_shot(std::string_view few_shot_text) {
    static constexpr std::string_view marker = ", e.g., ";
    std::string out;
    std::size_t pos = 0;
    while (pos <= few_shot_text.size()) {
        auto nl = few_shot_text.find('\n', pos);
        auto line = few_shot_text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (auto cut = line.find(marker); cut != std::string_view::npos) {
            out += line.substr(0, cut);
            out += '.';
        } else {
            out += line;
        }
        if (nl == std::string_view::npos) break;
        out += '\n';
        pos = nl + 1;
    }
    return out;
}

std::string fill_placeholders(std::string_view text, const std::map<std::string, std::string>& vars) {
    static const std::regex placeholder(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
    std::string src(text), out;
    auto last = src.cbegin();
    for (std::sregex_iterator it(src.begin(), src.end(), placeholder), end; it != end; ++it) {
        auto name = (*it)[1].str();
        auto v = vars.find(name);
        if (v == vars.end()) throw Error(ErrorKind::invalid_argument, "unbound placeholder {" + name + "}");
        out.append(last, (*it)[0].first);
        out += v->second;
        last = (*it)[0].second;
    }
    out.append(last, src.cend());
    return out;
}

std::string render_prompt(const PromptLibrary& library, const std::string& template_id, PromptMode mode) {
    return library.get(template_id, mode).system_text;
}

std::string_view to_string(ParsedLabel l) {
    switch (l) {
        case ParsedLabel::positive: return "positive";
        case ParsedLabel::negative: return "negative";
        case ParsedLabel::unparseable: return "unparseable";
    }
    return "unparseable";
}

ParsedLabel parsed_label_from_string(std::string_view s) {
    if (s == "positive") return ParsedLabel::positive;
    if (s == "negative") return ParsedLabel::negative;
    if (s == "unparseable") return ParsedLabel::unparseable;
    throw Error(ErrorKind::parse, "unknown parsed label '" + std::string(s) + "'");
}

ParsedLabel parse_label(std::string_view raw) {
    std::size_t i = 0;
    while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) ++i;
    std::size_t j = i;
    while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j]))) ++j;
    auto token = raw.substr(i, j - i);
    auto strip = [](unsigned char c) { return std::ispunct(c) != 0; };
    while (!token.empty() && strip(token.front()) && (token.front() == '\'' || token.front() == '"'))
        token.remove_prefix(1);
    while (!token.empty() && strip(token.back())) token.remove_suffix(1);
    std::string lower(token);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "true") return ParsedLabel::positive;
    if (lower == "false") return ParsedLabel::negative;
    return ParsedLabel::unparseable;
}

ModelEndpointConfig endpoint_from_json(const json& j) {
    ModelEndpointConfig c;
    c.model_name = j.value("model_name", c.model_name);
    c.base_url = j.value("base_url", c.base_url);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.temperature = j.value("temperature", c.temperature);
    c.top_p = j.value("top_p", c.top_p);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.max_parallel = j.value("max_parallel", c.max_parallel);
    c.requests_per_second = j.value("requests_per_second", c.requests_per_second);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    if (auto r = j.find("retry"); r != j.end()) {
        c.retry.max_attempts = r->value("max_attempts", c.retry.max_attempts);
        c.retry.initial_backoff_ms = r->value("initial_backoff_ms", c.retry.initial_backoff_ms);
        c.retry.multiplier = r->value("multiplier", c.retry.multiplier);
        c.retry.max_backoff_ms = r->value("max_backoff_ms", c.retry.max_backoff_ms);
    }
    if (c.max_parallel < 1 || c.retry.max_attempts < 1)
        throw Error(ErrorKind::invalid_argument, "max_parallel and retry.max_attempts must be >= 1");
    return c;
}

json to_json(const ModelEndpointConfig& c) {
    return {{"model_name", c.model_name},
            {"base_url", c.base_url},
            {"api_key_env", c.api_key_env},
            {"temperature", c.temperature},
            {"top_p", c.top_p},
            {"max_tokens", c.max_tokens},
            {"max_parallel", c.max_parallel},
            {"requests_per_second", c.requests_per_second},
            {"timeout_s", c.timeout_s},
            {"retry",
             {{"max_attempts", c.retry.max_attempts},
              {"initial_backoff_ms", c.retry.initial_backoff_ms},
              {"multiplier", c.retry.multiplier},
              {"max_backoff_ms", c.retry.max_backoff_ms}}}};
}

std::string request_hash(const ChatRequest& req) {
    json key = json::array({"ctalab-chat-v1", req.model, req.system, req.user, req.temperature,
                            req.top_p, req.max_tokens});
    return sha256_hex(key.dump());
}

json chat_request_body(const ChatRequest& req) {
    return {{"model", req.model},
            {"messages",
             json::array({{{"role", "system"}, {"content", req.system}},
                          {{"role", "user"}, {"content", req.user}}})},
            {"temperature", req.temperature},
            {"top_p", req.top_p},
            {"max_tokens", req.max_tokens}};
}

static std::string sanitize_model_dir(std::string model) {
    for (auto& c : model)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return model;
}

std::filesystem::path ResponseCache::path_for(const std::string& model, const std::string& hash) const {
    return root_ / sanitize_model_dir(model) / hash.substr(0, 2) / (hash + ".json");
}

std::optional<std::string> ResponseCache::lookup(const std::string& model, const std::string& hash) const {
    auto p = path_for(model, hash);
    std::error_code ec;
    if (!std::filesystem::exists(p, ec)) return std::nullopt;
    auto j = read_json_file(p);
    if (j.value("request_hash", std::string{}) != hash) return std::nullopt;
    return j.at("response").get<std::string>();
}

void ResponseCache::store(const ChatRequest& req, const std::string& hash, const std::string& response) const {
    auto p = path_for(req.model, hash);
    std::filesystem::create_directories(p.parent_path());
    // unique temp name per writer, then atomic rename
    auto tmp = p;
    tmp += "." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + ".part";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << json{{"request_hash", hash}, {"model", req.model}, {"response", response},
                    {"request", chat_request_body(req)}}
                   .dump(2)
            << '\n';
        if (!out) throw Error(ErrorKind::io, "cannot write cache entry " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

TokenBucket::TokenBucket(double rate_per_second, double burst)
    : rate_(rate_per_second), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    if (rate_ <= 0) return;
    for (;;) {
        std::chrono::duration<double> wait{};
        {
            std::lock_guard lock(mu_);
            auto now = std::chrono::steady_clock::now();
            tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
            last_ = now;
            if (tokens_ >= 1) {
                tokens_ -= 1;
                return;
            }
            wait = std::chrono::duration<double>((1 - tokens_) / rate_);
        }
        std::this_thread::sleep_for(wait);
    }
}

ChatGateway::ChatGateway(ModelEndpointConfig config, std::optional<ResponseCache> cache)
    : config_(std::move(config)), cache_(std::move(cache)),
      bucket_(config_.requests_per_second, config_.max_parallel) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
        throw Error(ErrorKind::credential, "environment variable " + config_.api_key_env + " is not set");
    api_key_ = key;
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.base_url, m, url))
        throw Error(ErrorKind::invalid_argument, "bad base_url '" + config_.base_url + "'");
    host_ = m[1].str();
    path_prefix_ = m[2].str();
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

Completion ChatGateway::complete(const ChatRequest& req, bool bypass_cache) {
    auto hash = request_hash(req);
    if (cache_ && !bypass_cache) {
        if (auto hit = cache_->lookup(req.model, hash)) {
            Completion c;
            c.text = *hit;
            c.from_cache = true;
            c.request_hash = hash;
            c.http_status = 200;
            return c;
        }
    }
    auto c = call_endpoint(req);
    c.request_hash = hash;
    if (!c.error && cache_) cache_->store(req, hash, c.text);
    return c;
}

Completion ChatGateway::call_endpoint(const ChatRequest& req) {
    Completion c;
    httplib::Client client(host_);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(std::chrono::seconds(config_.timeout_s));
    client.set_bearer_token_auth(api_key_);
    const auto body = chat_request_body(req).dump();
    const auto path = path_prefix_ + "/chat/completions";
    const auto start = std::chrono::steady_clock::now();
    double backoff = config_.retry.initial_backoff_ms;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        c.attempts = attempt;
        bucket_.acquire();
        auto res = client.Post(path, body, "application/json");
        bool transient = false;
        if (!res) {
            transient = true;
            c.error = "transport error: " + httplib::to_string(res.error());
        } else {
            c.http_status = res->status;
            if (res->status == 200) {
                try {
                    auto j = json::parse(res->body);
                    c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
                    c.error.reset();
                } catch (const std::exception& e) {
                    c.error = std::string("malformed completion body: ") + e.what();
                }
                break;
            }
            transient = res->status == 429 || res->status >= 500;
            c.error = "HTTP " + std::to_string(res->status);
        }
        if (!transient) break;
        if (attempt < config_.retry.max_attempts) {
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff));
            backoff = std::min<double>(backoff * config_.retry.multiplier, config_.retry.max_backoff_ms);
        }
    }
    c.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (c.error) c.error = *c.error + " after " + std::to_string(c.attempts) + " attempt(s)";
    return c;
}

void parallel_for_bounded(std::size_t n, int max_parallel, const std::function<void(std::size_t)>& fn) {
    auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, max_parallel)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto run = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

json to_json(const ClassificationRecord& r) {
    json j = {{"doc_id", r.doc_id},
              {"model_name", r.model_name},
              {"template_id", r.template_id},
              {"mode", r.mode},
              {"raw_response", r.raw_response},
              {"parsed_label", to_string(r.parsed_label)},
              {"latency_ms", r.latency_ms},
              {"from_cache", r.from_cache},
              {"request_hash", r.request_hash},
              {"attempts", r.attempts}};
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    return j;
}

ClassificationRecord classification_from_json(const json& j) {
    ClassificationRecord r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.model_name = j.value("model_name", std::string{});
    r.template_id = j.value("template_id", std::string{});
    r.mode = j.value("mode", std::string{});
    r.raw_response = j.value("raw_response", std::string{});
    r.parsed_label = parsed_label_from_string(j.at("parsed_label").get<std::string>());
    r.latency_ms = j.value("latency_ms", 0.0);
    r.from_cache = j.value("from_cache", false);
    r.request_hash = j.value("request_hash", std::string{});
    r.attempts = j.value("attempts", 0);
    if (auto e = j.find("error"); e != j.end() && e->is_string()) r.error = e->get<std::string>();
    return r;
}

std::vector<ClassificationRecord> classify_corpus(const std::vector<corpus::TextDocument>& docs,
                                                  ChatGateway& gateway, const PromptTemplate& tmpl) {
    if (docs.empty()) throw Error(ErrorKind::empty_input, "no documents to classify");
    const auto& cfg = gateway.config();
    std::vector<ClassificationRecord> out(docs.size());
    parallel_for_bounded(docs.size(), cfg.max_parallel, [&](std::size_t i) {
        ChatRequest req{cfg.model_name, tmpl.system_text, docs[i].text, cfg.temperature, cfg.top_p,
                        cfg.max_tokens};
        auto c = gateway.complete(req);
        auto& r = out[i];
        r.doc_id = docs[i].doc_id;
        r.model_name = cfg.model_name;
        r.template_id = tmpl.template_id;
        r.mode = to_string(tmpl.mode);
        r.raw_response = c.text;
        r.parsed_label = c.error ? ParsedLabel::unparseable : parse_label(c.text);
        r.latency_ms = c.latency_ms;
        r.from_cache = c.from_cache;
        r.request_hash = c.request_hash;
        r.attempts = c.attempts;
        r.error = c.error;
        if (c.error) log_warning("classification of " + r.doc_id + " failed: " + *c.error);
    });
    return out;
}

LeakageSplit exclude_fewshot_leakage(const std::vector<corpus::TextDocument>& docs,
                                     const PromptTemplate& tmpl) {
    if (tmpl.mode != PromptMode::few_shot)
        throw Error(ErrorKind::invalid_argument, "leakage exclusion needs the few-shot template");
    LeakageSplit out;
    for (const auto& d : docs) {
        bool leaked = std::any_of(tmpl.example_phrases.begin(), tmpl.example_phrases.end(),
                                  [&](const std::string& p) { return d.text.find(p) != std::string::npos; });
        (leaked ? out.excluded : out.kept).push_back(d);
    }
    return out;
}

}  // namespace ctalab::llm
