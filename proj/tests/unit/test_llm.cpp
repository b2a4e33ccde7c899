#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <unordered_set>

#include "ctalab/llm_gateway.hpp"
#include "golden_prompts.hpp"
#include "mock_llm_server.hpp"
#include "oracles.hpp"

using namespace ctalab;
using namespace ctalab::llm;

namespace {

PromptLibrary library() { return PromptLibrary::load(tsupport::source_dir() / "prompts"); }

tsupport::MockOptions rules() {
    return tsupport::load_mock_options(tsupport::source_dir() / "fixtures/mock_llm/rules.json");
}

ModelEndpointConfig endpoint(const std::string& base_url) {
    ModelEndpointConfig c;
    c.model_name = "mock-gpt";
    c.base_url = base_url;
    c.retry.initial_backoff_ms = 1;
    c.retry.max_backoff_ms = 4;
    return c;
}

corpus::TextDocument doc(const std::string& id, const std::string& text) {
    corpus::TextDocument d;
    d.doc_id = id;
    d.text = text;
    d.username = "spd";
    d.party = "SPD";
    return d;
}

struct ApiKey {
    ApiKey() { setenv("CTALAB_API_KEY", "test-key", 1); }
};

}  // namespace

TEST(ParseLabel, SpecCases) {
    EXPECT_EQ(parse_label("True"), ParsedLabel::positive);
    EXPECT_EQ(parse_label(" false."), ParsedLabel::negative);
    EXPECT_EQ(parse_label("I think yes"), ParsedLabel::unparseable);
    EXPECT_EQ(parse_label("TRUE!"), ParsedLabel::positive);
    EXPECT_EQ(parse_label("'False'"), ParsedLabel::negative);
    EXPECT_EQ(parse_label(""), ParsedLabel::unparseable);
    EXPECT_EQ(parse_label("Truely"), ParsedLabel::unparseable);
    EXPECT_EQ(parse_label("\n\tfalse\nbecause"), ParsedLabel::negative);
}

TEST(Prompts, FewShotMatchesGolden) {
    auto lib = library();
    EXPECT_EQ(render_prompt(lib, "cta", PromptMode::few_shot), std::string(tsupport::kFewShotGolden));
    EXPECT_EQ(render_prompt(lib, "cta", PromptMode::few_shot).rfind("You're an expert in detecting calls-to-action", 0),
              0u);
    EXPECT_EQ(render_prompt(lib, "cta", PromptMode::few_shot), render_prompt(lib, "cta", PromptMode::few_shot));
}

TEST(Prompts, ZeroShotIsFewShotWithoutExamples) {
    auto lib = library();
    auto zero = render_prompt(lib, "cta", PromptMode::zero_shot);
    EXPECT_EQ(zero, derive_zero_shot(tsupport::kFewShotGolden));
    for (const auto& p : lib.get("cta", PromptMode::few_shot).example_phrases)
        EXPECT_EQ(zero.find(p), std::string::npos) << p;
    EXPECT_EQ(zero.find("beide Stimmen CDU!"), std::string::npos);
    EXPECT_EQ(zero.find("e.g."), std::string::npos);
    EXPECT_TRUE(lib.get("cta", PromptMode::zero_shot).example_phrases.empty());
    EXPECT_THROW(lib.get("nope", PromptMode::few_shot), Error);
}

TEST(Prompts, ExamplePhrasesAppearInFewShot) {
    auto lib = library();
    const auto& t = lib.get("cta", PromptMode::few_shot);
    ASSERT_EQ(t.example_phrases.size(), 5u);
    for (const auto& p : t.example_phrases) EXPECT_NE(t.system_text.find("\"" + p + "\""), std::string::npos) << p;
}

TEST(Placeholders, UnboundIsError) {
    EXPECT_EQ(fill_placeholders("a {x} b {x}", {{"x", "1"}}), "a 1 b 1");
    EXPECT_THROW(fill_placeholders("{missing}", {}), Error);
}

TEST(RequestHash, DistinctInputsDistinctKeys) {
    std::unordered_set<std::string> seen;
    std::mt19937_64 rng(42);
    const char* models[] = {"m1", "m2"};
    for (int i = 0; i < 100000; ++i) {
        ChatRequest r{models[i % 2], "sys" + std::to_string(i % 7), "user text " + std::to_string(i), 0.0, 1.0,
                      5 + i % 3};
        seen.insert(request_hash(r));
    }
    EXPECT_EQ(seen.size(), 100000u);
    // field boundaries are length-delimited
    ChatRequest a{"m", "ab", "c", 0, 1, 5}, b{"m", "a", "bc", 0, 1, 5};
    EXPECT_NE(request_hash(a), request_hash(b));
    ChatRequest c{"m", "ab", "c", 0, 1, 6};
    EXPECT_NE(request_hash(a), request_hash(c));
}

TEST(Cache, LayoutAndRoundTrip) {
    tsupport::TempDir dir;
    ResponseCache cache(dir.path());
    ChatRequest r{"mock/gpt", "s", "u", 0, 1, 5};
    auto h = request_hash(r);
    EXPECT_FALSE(cache.lookup(r.model, h));
    cache.store(r, h, "True");
    auto p = cache.path_for(r.model, h);
    EXPECT_EQ(p.parent_path().filename().string(), h.substr(0, 2));
    EXPECT_EQ(p.filename().string(), h + ".json");
    EXPECT_TRUE(std::filesystem::exists(p));
    EXPECT_EQ(cache.lookup(r.model, h), "True");
}

TEST(Gateway, MissingCredential) {
    auto cfg = endpoint("http://127.0.0.1:1/v1");
    cfg.api_key_env = "CTALAB_TEST_UNSET_KEY";
    unsetenv("CTALAB_TEST_UNSET_KEY");
    try {
        ChatGateway g(cfg, std::nullopt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::credential);
    }
}

TEST(Gateway, ClassifiesAndCaches) {
    ApiKey key;
    tsupport::MockLlmServer server(rules());
    server.start();
    tsupport::TempDir dir;
    ChatGateway g(endpoint(server.base_url()), ResponseCache(dir.path()));
    auto lib = library();
    std::vector<corpus::TextDocument> docs{doc("a", "Heute in Köln. Jetzt wählen gehen!"), doc("b", "Ein ruhiger Tag."),
                                           doc("c", "Schreibt uns eure Fragen in die Kommentare!")};
    auto recs = classify_corpus(docs, g, lib.get("cta", PromptMode::few_shot));
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[0].doc_id, "a");
    EXPECT_EQ(recs[0].parsed_label, ParsedLabel::positive);
    EXPECT_EQ(recs[1].parsed_label, ParsedLabel::negative);
    EXPECT_EQ(recs[2].parsed_label, ParsedLabel::positive);
    EXPECT_EQ(server.total_requests(), 3);

    auto again = classify_corpus(docs, g, lib.get("cta", PromptMode::few_shot));
    EXPECT_EQ(server.total_requests(), 3);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_TRUE(again[i].from_cache);
        EXPECT_EQ(again[i].parsed_label, recs[i].parsed_label);
        EXPECT_EQ(again[i].request_hash, recs[i].request_hash);
    }

    auto zero = classify_corpus(docs, g, lib.get("cta", PromptMode::zero_shot));
    EXPECT_EQ(zero[2].raw_response, "Vielleicht");
    EXPECT_EQ(zero[2].parsed_label, ParsedLabel::unparseable);
}

TEST(Gateway, RetriesTransientThenSucceeds) {
    ApiKey key;
    tsupport::MockLlmServer server(rules());
    server.start();
    server.set_failures(2, 429);
    ChatGateway g(endpoint(server.base_url()), std::nullopt);
    auto lib = library();
    auto recs = classify_corpus({doc("a", "Teilt diesen Beitrag mit euren Freunden!")}, g,
                                lib.get("cta", PromptMode::few_shot));
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].attempts, 3);
    EXPECT_EQ(server.attempts_for("Teilt diesen Beitrag mit euren Freunden!"), 3);
    EXPECT_EQ(recs[0].parsed_label, ParsedLabel::positive);
    EXPECT_FALSE(recs[0].error);
}

TEST(Gateway, ExhaustedRetriesAreRecorded) {
    ApiKey key;
    tsupport::MockLlmServer server(rules());
    server.start();
    server.set_failures(100, 503);
    auto cfg = endpoint(server.base_url());
    cfg.retry.max_attempts = 3;
    ChatGateway g(cfg, std::nullopt);
    auto recs = classify_corpus({doc("a", "x")}, g, library().get("cta", PromptMode::few_shot));
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].attempts, 3);
    ASSERT_TRUE(recs[0].error);
    EXPECT_NE(recs[0].error->find("503"), std::string::npos);
    EXPECT_EQ(recs[0].parsed_label, ParsedLabel::unparseable);
}

TEST(Gateway, PermanentFailureNotRetried) {
    ApiKey key;
    tsupport::MockLlmServer server(rules());
    server.start();
    server.set_failures(100, 400);
    ChatGateway g(endpoint(server.base_url()), std::nullopt);
    auto recs = classify_corpus({doc("a", "x")}, g, library().get("cta", PromptMode::few_shot));
    EXPECT_EQ(recs[0].attempts, 1);
    EXPECT_TRUE(recs[0].error);
}

TEST(Gateway, TransportErrorRetried) {
    ApiKey key;
    auto cfg = endpoint("http://127.0.0.1:9/v1");
    cfg.retry.max_attempts = 2;
    ChatGateway g(cfg, std::nullopt);
    auto c = g.complete({"m", "s", "u", 0, 1, 5});
    EXPECT_EQ(c.attempts, 2);
    ASSERT_TRUE(c.error);
    EXPECT_NE(c.error->find("transport"), std::string::npos);
}

TEST(Leakage, VerbatimPhraseExcluded) {
    auto lib = library();
    const auto& few = lib.get("cta", PromptMode::few_shot);
    std::vector<corpus::TextDocument> docs{doc("x", "Am 26. September #FREIEWÄHLER in den #Bundestag wählen."),
                                           doc("y", "Nichts Besonderes heute."),
                                           doc("z", "Also: beide Stimmen CDU! Danke.")};
    auto split = exclude_fewshot_leakage(docs, few);
    ASSERT_EQ(split.excluded.size(), 2u);
    EXPECT_EQ(split.kept.size(), 1u);
    EXPECT_EQ(split.kept[0].doc_id, "y");
    EXPECT_THROW(exclude_fewshot_leakage(docs, lib.get("cta", PromptMode::zero_shot)), Error);
}

TEST(Leakage, PartitionProperty) {
    auto lib = library();
    const auto& few = lib.get("cta", PromptMode::few_shot);
    std::mt19937_64 rng(3);
    const char* parts[] = {"Hallo ", "beide Stimmen CDU!", " und ", "Besuche unsere Website", " für weitere Details.",
                           "x"};
    for (int t = 0; t < 200; ++t) {
        std::vector<corpus::TextDocument> docs;
        for (int i = 0; i < 10; ++i) {
            std::string s;
            for (int k = 0; k < 4; ++k) s += parts[rng() % 6];
            docs.push_back(doc("d" + std::to_string(i), s));
        }
        auto split = exclude_fewshot_leakage(docs, few);
        EXPECT_EQ(split.kept.size() + split.excluded.size(), docs.size());
        std::set<std::string> ids;
        for (const auto& d : split.kept) ids.insert(d.doc_id);
        for (const auto& d : split.excluded) EXPECT_TRUE(ids.insert(d.doc_id).second);
    }
}

TEST(Endpoint, DefaultsAndValidation) {
    auto c = endpoint_from_json(json::object());
    EXPECT_EQ(c.temperature, 0.0);
    EXPECT_EQ(c.top_p, 1.0);
    EXPECT_EQ(c.max_tokens, 5);
    EXPECT_EQ(c.retry.max_attempts, 5);
    EXPECT_EQ(c.api_key_env, "CTALAB_API_KEY");
    EXPECT_THROW(endpoint_from_json(json{{"max_parallel", 0}}), Error);
}

TEST(Records, JsonRoundTrip) {
    ClassificationRecord r;
    r.doc_id = "d";
    r.parsed_label = ParsedLabel::negative;
    r.error = "boom";
    auto back = classification_from_json(to_json(r));
    EXPECT_EQ(to_json(back), to_json(r));
}
