#include <gtest/gtest.h>

#include <random>

#include "ctalab/corpus.hpp"
#include "oracles.hpp"

using namespace ctalab;
using namespace ctalab::corpus;

namespace {

MediaPost make_post(const std::string& id, PostType kind) {
    MediaPost p;
    p.post_id = id;
    p.kind = kind;
    p.username = "u_" + id;
    p.party = "SPD";
    p.published_at = "2021-09-12T08:30:00Z";
    return p;
}

MediaItem media(const std::string& id, MediaKind kind, std::optional<std::string> ocr,
                std::optional<std::string> transcript = std::nullopt) {
    return {id, kind, std::move(ocr), std::move(transcript)};
}

}  // namespace

TEST(CountTokens, SpecExamples) {
    EXPECT_EQ(count_tokens("Wählen gehen!"), 2u);
    EXPECT_EQ(count_tokens(""), 0u);
    EXPECT_EQ(count_tokens("a b c", TokenScheme::approx_llm), 4u);
    EXPECT_EQ(count_tokens("  a\t\nb  "), 2u);
    EXPECT_EQ(count_tokens("", TokenScheme::approx_llm), 0u);
    // ceil(1.3 * 10) = 13 exactly, no floating drift upward
    EXPECT_EQ(count_tokens("a a a a a a a a a a", TokenScheme::approx_llm), 13u);
}

TEST(Decompose, StoryVideoWithOcrAndTranscript) {
    auto s = make_post("s1", PostType::story);
    s.media.push_back(media("v", MediaKind::video, "Text im Bild", "Gesprochener Text"));
    auto docs = decompose_post(s);
    ASSERT_EQ(docs.size(), 2u);
    EXPECT_EQ(docs[0].text_type, TextType::ocr);
    EXPECT_EQ(docs[1].text_type, TextType::transcription);
    EXPECT_EQ(docs[0].post_type, PostType::story);
}

TEST(Decompose, CaptionPlusTwoImages) {
    auto p = make_post("p1", PostType::post);
    p.caption = "Hallo Welt";
    p.media.push_back(media("a", MediaKind::image, "eins"));
    p.media.push_back(media("b", MediaKind::image, "zwei"));
    auto docs = decompose_post(p);
    ASSERT_EQ(docs.size(), 3u);
    EXPECT_EQ(docs[0].text_type, TextType::caption);
    EXPECT_EQ(docs[1].doc_id, make_doc_id("p1", "a", TextType::ocr));
    EXPECT_EQ(docs[2].doc_id, make_doc_id("p1", "b", TextType::ocr));
    EXPECT_EQ(docs[0].token_count, 2u);
}

TEST(Decompose, BlankChannelsSuppressed) {
    auto p = make_post("p2", PostType::post);
    p.caption = "Nur Text";
    p.media.push_back(media("a", MediaKind::image, "   "));
    p.media.push_back(media("b", MediaKind::video, std::nullopt, "\n"));
    auto docs = decompose_post(p);
    ASSERT_EQ(docs.size(), 1u);
    EXPECT_EQ(docs[0].text_type, TextType::caption);
    EXPECT_TRUE(decompose_post(make_post("p3", PostType::post)).empty());
}

TEST(Decompose, RandomPostsRespectBoundsAndStrata) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        bool story = rng() % 2;
        auto p = make_post("x" + std::to_string(trial), story ? PostType::story : PostType::post);
        if (!story && rng() % 2) p.caption = rng() % 3 ? "cap text" : " ";
        std::size_t n_media = story ? rng() % 2 : rng() % 4;
        for (std::size_t m = 0; m < n_media; ++m) {
            bool video = rng() % 2;
            std::optional<std::string> ocr, tr;
            if (rng() % 3) ocr = "ocr " + std::to_string(m);
            if (video && rng() % 2) tr = "tr " + std::to_string(m);
            p.media.push_back(media("m" + std::to_string(m), video ? MediaKind::video : MediaKind::image, ocr, tr));
        }
        auto docs = decompose_post(p);
        if (story) EXPECT_LE(docs.size(), 2u);
        else EXPECT_LE(docs.size(), 1 + 2 * p.media.size());
        std::set<std::string> ids;
        for (const auto& d : docs) {
            EXPECT_NO_THROW(stratum_index(d.stratum()));
            EXPECT_FALSE(d.post_type == PostType::story && d.text_type == TextType::caption);
            EXPECT_EQ(d.token_count, count_tokens(d.text));
            EXPECT_TRUE(ids.insert(d.doc_id).second);
        }
    }
}

TEST(Ingest, ThreeValidPosts) {
    tsupport::TempDir dir;
    auto p = dir / "posts.jsonl";
    std::vector<json> rows;
    for (int i = 0; i < 3; ++i) {
        auto post = make_post("p" + std::to_string(i), PostType::post);
        post.caption = "Text " + std::to_string(i);
        rows.push_back(to_json(post));
    }
    write_jsonl(p, rows);
    auto store = ingest_corpus(p);
    EXPECT_EQ(store.posts().size(), 3u);
    EXPECT_EQ(store.documents().size(), 3u);
    ASSERT_NE(store.find_document("p1:caption:caption"), nullptr);
    EXPECT_EQ(store.find_post("p2")->caption, "Text 2");
}

TEST(Ingest, DuplicatePostIdNamesBothLines) {
    tsupport::TempDir dir;
    auto p = dir / "posts.jsonl";
    auto a = make_post("dup", PostType::post);
    auto b = make_post("other", PostType::post);
    write_jsonl(p, {to_json(a), to_json(b), to_json(a)});
    try {
        ingest_corpus(p);
        FAIL() << "expected conflict";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::conflict);
        std::string msg = e.what();
        EXPECT_NE(msg.find("1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("dup"), std::string::npos) << msg;
    }
}

TEST(Ingest, MalformedLineCarriesLineNumber) {
    tsupport::TempDir dir;
    auto p = dir / "posts.jsonl";
    auto a = make_post("ok", PostType::post);
    write_text_file(p, to_json(a).dump() + "\n{\"post_id\": \"x\"}\n");
    try {
        ingest_corpus(p);
        FAIL() << "expected parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
    }
}

TEST(Ingest, SchemaViolations) {
    std::set<std::string> registry{"SPD"};
    auto story = make_post("s", PostType::story);
    story.media = {media("a", MediaKind::image, "x"), media("b", MediaKind::image, "y")};
    EXPECT_THROW(validate_post(story, registry), Error);

    auto img = make_post("i", PostType::post);
    img.media = {media("a", MediaKind::image, "x", "spoken")};
    EXPECT_THROW(validate_post(img, registry), Error);

    auto party = make_post("q", PostType::post);
    party.party = "Unbekannt";
    EXPECT_THROW(validate_post(party, registry), Error);
    EXPECT_NO_THROW(validate_post(party, {}));

    auto ts = make_post("t", PostType::post);
    ts.published_at = "yesterday";
    EXPECT_THROW(validate_post(ts, registry), Error);
}

TEST(Ingest, JsonRoundTrip) {
    auto p = make_post("rt", PostType::post);
    p.caption = "Cäption";
    p.account_type = AccountType::frontrunner;
    p.media = {media("v", MediaKind::video, std::nullopt, "Ton")};
    auto q = media_post_from_json(to_json(p));
    EXPECT_EQ(to_json(q), to_json(p));
}

TEST(Stats, UniformStrata) {
    std::vector<TextDocument> docs;
    for (std::size_t i = 0; i < 5; ++i) {
        TextDocument d;
        d.doc_id = "d" + std::to_string(i);
        d.post_type = kStrata[i].post_type;
        d.text_type = kStrata[i].text_type;
        d.token_count = 10;
        docs.push_back(d);
    }
    auto s = corpus_stats(docs);
    ASSERT_EQ(s.rows.size(), 5u);
    for (const auto& r : s.rows) {
        EXPECT_DOUBLE_EQ(r.doc_share_pct, 20.0);
        EXPECT_DOUBLE_EQ(r.token_mean, 10.0);
    }
    EXPECT_EQ(s.overall.token_total, 50u);
}

TEST(Stats, TwoDocMean) {
    TextDocument a, b;
    a.doc_id = "a";
    a.token_count = 3;
    b.doc_id = "b";
    b.token_count = 5;
    auto s = corpus_stats(std::vector<TextDocument>{a, b});
    EXPECT_DOUBLE_EQ(s.overall.token_mean, 4.0);
    ASSERT_EQ(s.rows.size(), 1u);
    EXPECT_THROW(corpus_stats(std::vector<TextDocument>{}), Error);
}

TEST(Stats, MatchesBruteForceGroupBy) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<MediaPost> posts;
        std::size_t n = 1 + rng() % 100;
        for (std::size_t i = 0; i < n; ++i) {
            bool story = rng() % 2;
            auto p = make_post("p" + std::to_string(i), story ? PostType::story : PostType::post);
            if (!story) p.caption = std::string(1 + rng() % 5, 'w') + " x";
            p.media.push_back(media("m", rng() % 2 ? MediaKind::video : MediaKind::image, "o t"));
            if (p.media[0].media_kind == MediaKind::video && rng() % 2) p.media[0].transcript_text = "a b c";
            posts.push_back(p);
        }
        CorpusStore store(posts);
        if (store.documents().empty()) continue;
        std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> brute;
        std::size_t all_tokens = 0;
        for (const auto& p : posts)
            for (const auto& d : decompose_post(p)) {
                auto& slot = brute[{static_cast<int>(d.post_type), static_cast<int>(d.text_type)}];
                slot.first += 1;
                slot.second += d.token_count;
                all_tokens += d.token_count;
            }
        auto stats = corpus_stats(store);
        ASSERT_EQ(stats.rows.size(), brute.size());
        double share = 0;
        std::size_t tok = 0;
        for (const auto& r : stats.rows) {
            auto& b = brute.at({static_cast<int>(r.stratum.post_type), static_cast<int>(r.stratum.text_type)});
            EXPECT_EQ(r.doc_count, b.first);
            EXPECT_EQ(r.token_total, b.second);
            share += r.doc_share_pct;
            tok += r.token_total;
        }
        EXPECT_NEAR(share, 100.0, 0.1);
        EXPECT_EQ(tok, all_tokens);
        EXPECT_EQ(stats.overall.token_total, all_tokens);
    }
}

TEST(Stats, CsvColumns) {
    auto p = make_post("p", PostType::post);
    p.caption = "eins zwei";
    CorpusStore store({p});
    auto csv = stats_csv(corpus_stats(store));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "post_type,text_type,docs,docs_pct,tokens,token_mean,tokens_pct");
    EXPECT_NE(csv.find("post,caption,1,100.00,2,2.00,100.00"), std::string::npos) << csv;
}

TEST(Documents, FileRoundTrip) {
    tsupport::TempDir dir;
    auto p = make_post("p", PostType::post);
    p.caption = "eins";
    CorpusStore store({p});
    write_documents(dir / "d.jsonl", store.documents());
    auto back = read_documents(dir / "d.jsonl");
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(to_json(back[0]), to_json(store.documents()[0]));
}
