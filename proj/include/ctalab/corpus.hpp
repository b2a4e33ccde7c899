#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctalab/common.hpp"

namespace ctalab::corpus {

enum class MediaKind { image, video };
enum class AccountType { party, frontrunner };

struct MediaItem {
    std::string media_id;
    MediaKind media_kind = MediaKind::image;
    std::optional<std::string> ocr_text;
    std::optional<std::string> transcript_text;  // videos only
};

struct MediaPost {
    std::string post_id;
    PostType kind = PostType::post;
    std::string username;
    std::string party;
    AccountType account_type = AccountType::party;
    std::string published_at;  // ISO-8601 UTC, e.g. 2021-09-12T08:30:00Z
    std::optional<std::string> caption;
    std::vector<MediaItem> media;
};

struct TextDocument {
    std::string doc_id;
    std::string parent_post_id;
    PostType post_type = PostType::post;
    TextType text_type = TextType::caption;
    std::string text;
    std::size_t token_count = 0;
    std::string username;
    std::string party;

    Stratum stratum() const { return {post_type, text_type}; }
};

enum class TokenScheme { whitespace, approx_llm };

// whitespace: number of maximal non-whitespace runs.
// approx_llm: ceil(1.3 * whitespace count), used for generation budgets.
std::size_t count_tokens(std::string_view text, TokenScheme scheme = TokenScheme::whitespace);

std::string make_doc_id(std::string_view post_id, std::string_view source, TextType text_type);

// Caption first, then media in input order with OCR before transcript.
// Blank channels produce no document.
std::vector<TextDocument> decompose_post(const MediaPost& post,
                                         TokenScheme scheme = TokenScheme::whitespace);

json to_json(const MediaPost& post);
MediaPost media_post_from_json(const json& j);
json to_json(const TextDocument& doc);
TextDocument text_document_from_json(const json& j);

// Immutable once ingested. Posts keep input order; documents follow post order.
class CorpusStore {
public:
    CorpusStore() = default;
    CorpusStore(std::vector<MediaPost> posts, std::set<std::string> party_registry = {},
                TokenScheme scheme = TokenScheme::whitespace);

    const std::vector<MediaPost>& posts() const { return posts_; }
    const std::vector<TextDocument>& documents() const { return documents_; }
    TokenScheme token_scheme() const { return scheme_; }

    const MediaPost* find_post(const std::string& post_id) const;
    const TextDocument* find_document(const std::string& doc_id) const;
    std::size_t post_count(PostType kind) const;
    bool empty() const { return posts_.empty(); }

private:
    std::vector<MediaPost> posts_;
    std::vector<TextDocument> documents_;
    std::unordered_map<std::string, std::size_t> post_index_;
    std::unordered_map<std::string, std::size_t> doc_index_;
    TokenScheme scheme_ = TokenScheme::whitespace;
};

// Validates every line against the MediaPost schema. Malformed lines raise a
// parse error with the line number; a repeated post_id raises a conflict
// naming both lines.
CorpusStore ingest_corpus(const std::filesystem::path& path,
                          const std::set<std::string>& party_registry = {},
                          TokenScheme scheme = TokenScheme::whitespace);

void validate_post(const MediaPost& post, const std::set<std::string>& party_registry);

struct StratumRow {
    Stratum stratum;
    std::size_t doc_count = 0;
    double doc_share_pct = 0;
    std::size_t token_total = 0;
    double token_mean = 0;
    double token_share_pct = 0;
};

struct CorpusStats {
    std::vector<StratumRow> rows;  // non-empty strata only, reporting order
    StratumRow overall;
};

CorpusStats corpus_stats(const CorpusStore& store);
CorpusStats corpus_stats(const std::vector<TextDocument>& docs);

// Columns: post_type,text_type,docs,docs_pct,tokens,token_mean,tokens_pct
std::string stats_csv(const CorpusStats& stats);

void write_documents(const std::filesystem::path& path, const std::vector<TextDocument>& docs);
std::vector<TextDocument> read_documents(const std::filesystem::path& path);

}  // namespace ctalab::corpus
