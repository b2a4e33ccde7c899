#include "ctalab/corpus.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <regex>

namespace ctalab::corpus {

std::size_t count_tokens(std::string_view text, TokenScheme scheme) {
    std::size_t runs = 0;
    bool in_run = false;
    for (unsigned char c : text) {
        bool space = std::isspace(c) != 0;
        if (!space && !in_run) ++runs;
        in_run = !space;
    }
    if (scheme == TokenScheme::approx_llm) return (runs * 13 + 9) / 10;
    return runs;
}

std::string make_doc_id(std::string_view post_id, std::string_view source, TextType text_type) {
    std::string id(post_id);
    id += ':';
    id += source;
    id += ':';
    id += to_string(text_type);
    return id;
}

std::vector<TextDocument> decompose_post(const MediaPost& post, TokenScheme scheme) {
    std::vector<TextDocument> out;
    auto emit = [&](std::string_view source, TextType type, const std::string& text) {
        TextDocument d;
        d.doc_id = make_doc_id(post.post_id, source, type);
        d.parent_post_id = post.post_id;
        d.post_type = post.kind;
        d.text_type = type;
        d.text = text;
        d.token_count = count_tokens(text, scheme);
        d.username = post.username;
        d.party = post.party;
        out.push_back(std::move(d));
    };
    if (post.kind == PostType::post && post.caption && !is_blank(*post.caption))
        emit("caption", TextType::caption, *post.caption);
    for (const auto& m : post.media) {
        if (m.ocr_text && !is_blank(*m.ocr_text)) emit(m.media_id, TextType::ocr, *m.ocr_text);
        if (m.transcript_text && !is_blank(*m.transcript_text))
            emit(m.media_id, TextType::transcription, *m.transcript_text);
    }
    return out;
}

namespace {

std::optional<std::string> opt_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(ErrorKind::parse, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::string req_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw Error(ErrorKind::parse, std::string("missing string field '") + key + "'");
    return it->get<std::string>();
}

const std::regex kTimestamp(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?Z)");

}  // namespace

json to_json(const MediaPost& post) {
    json media = json::array();
    for (const auto& m : post.media) {
        json jm = {{"media_id", m.media_id},
                   {"media_kind", m.media_kind == MediaKind::video ? "video" : "image"}};
        jm["ocr_text"] = m.ocr_text ? json(*m.ocr_text) : json(nullptr);
        jm["transcript_text"] = m.transcript_text ? json(*m.transcript_text) : json(nullptr);
        media.push_back(std::move(jm));
    }
    json j = {{"post_id", post.post_id},
              {"kind", to_string(post.kind)},
              {"username", post.username},
              {"party", post.party},
              {"account_type", post.account_type == AccountType::party ? "party" : "frontrunner"},
              {"published_at", post.published_at}};
    j["caption"] = post.caption ? json(*post.caption) : json(nullptr);
    j["media"] = std::move(media);
    return j;
}

MediaPost media_post_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::parse, "record is not a JSON object");
    MediaPost p;
    p.post_id = req_string(j, "post_id");
    p.kind = post_type_from_string(req_string(j, "kind"));
    p.username = req_string(j, "username");
    p.party = req_string(j, "party");
    auto acct = req_string(j, "account_type");
    if (acct == "party") p.account_type = AccountType::party;
    else if (acct == "frontrunner") p.account_type = AccountType::frontrunner;
    else throw Error(ErrorKind::parse, "unknown account_type '" + acct + "'");
    p.published_at = req_string(j, "published_at");
    p.caption = opt_string(j, "caption");
    if (auto it = j.find("media"); it != j.end()) {
        if (!it->is_array()) throw Error(ErrorKind::parse, "field 'media' must be an array");
        for (const auto& jm : *it) {
            if (!jm.is_object()) throw Error(ErrorKind::parse, "media entry is not an object");
            MediaItem m;
            m.media_id = req_string(jm, "media_id");
            auto kind = req_string(jm, "media_kind");
            if (kind == "image") m.media_kind = MediaKind::image;
            else if (kind == "video") m.media_kind = MediaKind::video;
            else throw Error(ErrorKind::parse, "unknown media_kind '" + kind + "'");
            m.ocr_text = opt_string(jm, "ocr_text");
            m.transcript_text = opt_string(jm, "transcript_text");
            p.media.push_back(std::move(m));
        }
    }
    return p;
}

void validate_post(const MediaPost& post, const std::set<std::string>& party_registry) {
    if (post.post_id.empty()) throw Error(ErrorKind::parse, "empty post_id");
    if (!std::regex_match(post.published_at, kTimestamp))
        throw Error(ErrorKind::parse, "published_at '" + post.published_at + "' is not a UTC timestamp");
    if (post.kind == PostType::story && post.media.size() > 1)
        throw Error(ErrorKind::parse, "story " + post.post_id + " has more than one media item");
    if (!party_registry.empty() && !party_registry.contains(post.party))
        throw Error(ErrorKind::parse, "party '" + post.party + "' is not in the party registry");
    std::set<std::string> ids;
    for (const auto& m : post.media) {
        if (m.media_id.empty() || m.media_id == "caption")
            throw Error(ErrorKind::parse, "invalid media_id '" + m.media_id + "'");
        if (!ids.insert(m.media_id).second)
            throw Error(ErrorKind::parse, "duplicate media_id '" + m.media_id + "'");
        if (m.transcript_text && m.media_kind != MediaKind::video)
            throw Error(ErrorKind::parse, "transcript on non-video media " + m.media_id);
    }
}

json to_json(const TextDocument& d) {
    return {{"doc_id", d.doc_id},
            {"parent_post_id", d.parent_post_id},
            {"post_type", to_string(d.post_type)},
            {"text_type", to_string(d.text_type)},
            {"text", d.text},
            {"token_count", d.token_count},
            {"username", d.username},
            {"party", d.party}};
}

TextDocument text_document_from_json(const json& j) {
    TextDocument d;
    d.doc_id = req_string(j, "doc_id");
    d.parent_post_id = req_string(j, "parent_post_id");
    d.post_type = post_type_from_string(req_string(j, "post_type"));
    d.text_type = text_type_from_string(req_string(j, "text_type"));
    d.text = req_string(j, "text");
    d.token_count = j.at("token_count").get<std::size_t>();
    d.username = req_string(j, "username");
    d.party = req_string(j, "party");
    return d;
}

CorpusStore::CorpusStore(std::vector<MediaPost> posts, std::set<std::string> party_registry,
                         TokenScheme scheme)
    : posts_(std::move(posts)), scheme_(scheme) {
    for (std::size_t i = 0; i < posts_.size(); ++i) {
        validate_post(posts_[i], party_registry);
        if (!post_index_.emplace(posts_[i].post_id, i).second)
            throw Error(ErrorKind::conflict, "duplicate post_id " + posts_[i].post_id);
        for (auto& d : decompose_post(posts_[i], scheme_)) {
            doc_index_.emplace(d.doc_id, documents_.size());
            documents_.push_back(std::move(d));
        }
    }
}

const MediaPost* CorpusStore::find_post(const std::string& post_id) const {
    auto it = post_index_.find(post_id);
    return it == post_index_.end() ? nullptr : &posts_[it->second];
}

const TextDocument* CorpusStore::find_document(const std::string& doc_id) const {
    auto it = doc_index_.find(doc_id);
    return it == doc_index_.end() ? nullptr : &documents_[it->second];
}

std::size_t CorpusStore::post_count(PostType kind) const {
    std::size_t n = 0;
    for (const auto& p : posts_) n += p.kind == kind;
    return n;
}

CorpusStore ingest_corpus(const std::filesystem::path& path,
                          const std::set<std::string>& party_registry, TokenScheme scheme) {
    std::vector<MediaPost> posts;
    std::unordered_map<std::string, std::size_t> first_line;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        MediaPost p;
        try {
            p = media_post_from_json(j);
            validate_post(p, party_registry);
        } catch (const Error& e) {
            throw Error(ErrorKind::parse, path.filename().string() + ":" + std::to_string(line) +
                                              ": " + e.what());
        } catch (const json::exception& e) {
            throw Error(ErrorKind::parse, path.filename().string() + ":" + std::to_string(line) +
                                              ": " + e.what());
        }
        auto [it, inserted] = first_line.emplace(p.post_id, line);
        if (!inserted)
            throw Error(ErrorKind::conflict, "duplicate post_id '" + p.post_id + "' on lines " +
                                                 std::to_string(it->second) + " and " +
                                                 std::to_string(line));
        posts.push_back(std::move(p));
    });
    return CorpusStore(std::move(posts), party_registry, scheme);
}

CorpusStats corpus_stats(const std::vector<TextDocument>& docs) {
    if (docs.empty()) throw Error(ErrorKind::empty_input, "corpus has no documents");
    std::array<StratumRow, std::size(kStrata)> acc{};
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i].stratum = kStrata[i];
    CorpusStats stats;
    for (const auto& d : docs) {
        auto& row = acc[stratum_index(d.stratum())];
        ++row.doc_count;
        row.token_total += d.token_count;
        ++stats.overall.doc_count;
        stats.overall.token_total += d.token_count;
    }
    auto pct = [](std::size_t part, std::size_t whole) {
        return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
    };
    auto finish = [&](StratumRow& r) {
        r.doc_share_pct = pct(r.doc_count, stats.overall.doc_count);
        r.token_share_pct = pct(r.token_total, stats.overall.token_total);
        r.token_mean = static_cast<double>(r.token_total) / static_cast<double>(r.doc_count);
    };
    for (auto& r : acc) {
        if (r.doc_count == 0) continue;
        finish(r);
        stats.rows.push_back(r);
    }
    finish(stats.overall);
    return stats;
}

CorpusStats corpus_stats(const CorpusStore& store) {
    if (store.empty()) throw Error(ErrorKind::empty_input, "corpus store is empty");
    return corpus_stats(store.documents());
}

std::string stats_csv(const CorpusStats& stats) {
    std::string out = "post_type,text_type,docs,docs_pct,tokens,token_mean,tokens_pct\n";
    char buf[256];
    auto row = [&](std::string_view pt, std::string_view tt, const StratumRow& r) {
        std::snprintf(buf, sizeof buf, "%.*s,%.*s,%zu,%.2f,%zu,%.2f,%.2f\n",
                      static_cast<int>(pt.size()), pt.data(), static_cast<int>(tt.size()), tt.data(),
                      r.doc_count, r.doc_share_pct, r.token_total, r.token_mean, r.token_share_pct);
        out += buf;
    };
    for (const auto& r : stats.rows) row(to_string(r.stratum.post_type), to_string(r.stratum.text_type), r);
    row("overall", "overall", stats.overall);
    return out;
}

void write_documents(const std::filesystem::path& path, const std::vector<TextDocument>& docs) {
    std::vector<json> rows;
    rows.reserve(docs.size());
    for (const auto& d : docs) rows.push_back(to_json(d));
    write_jsonl(path, rows);
}

std::vector<TextDocument> read_documents(const std::filesystem::path& path) {
    std::vector<TextDocument> docs;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            docs.push_back(text_document_from_json(j));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::parse, path.filename().string() + ":" + std::to_string(line) +
                                              ": " + e.what());
        }
    });
    return docs;
}

}  // namespace ctalab::corpus
