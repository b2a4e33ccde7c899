#include <gtest/gtest.h>

#include <cstdlib>

#include "ctalab/augment.hpp"
#include "mock_llm_server.hpp"
#include "oracles.hpp"

using namespace ctalab;
using namespace ctalab::augment;

namespace {

corpus::TextDocument positive(const std::string& id, const std::string& text) {
    corpus::TextDocument d;
    d.doc_id = id;
    d.text = text;
    d.username = "die_gruenen";
    d.party = "Grüne";
    d.post_type = PostType::post;
    d.text_type = TextType::caption;
    return d;
}

llm::PromptTemplate synth_template() {
    return llm::PromptLibrary::load(tsupport::source_dir() / "prompts").get("synth", llm::PromptMode::few_shot);
}

llm::ModelEndpointConfig endpoint(const std::string& url) {
    llm::ModelEndpointConfig c;
    c.model_name = "mock-gpt";
    c.base_url = url;
    c.retry.initial_backoff_ms = 1;
    return c;
}

}  // namespace

TEST(SynthPrompt, FillsEveryPlaceholder) {
    auto d = positive("p:caption:caption", std::string(120, 'a'));
    auto text = render_synth_prompt(d, synth_template());
    EXPECT_NE(text.find("representative of the party Grüne"), std::string::npos);
    EXPECT_NE(text.find("die_gruenen"), std::string::npos);
    EXPECT_NE(text.find("approx. 120 characters"), std::string::npos);
    EXPECT_NE(text.find("content type: post"), std::string::npos);
    EXPECT_NE(text.find("descriptor: caption"), std::string::npos);
    EXPECT_EQ(text.find('{'), std::string::npos);
    EXPECT_EQ(text, render_synth_prompt(d, synth_template()));
}

TEST(SynthPrompt, LengthCountsCodePoints) {
    auto d = positive("p", "Wählt grün, übermorgen!");
    auto text = render_synth_prompt(d, synth_template());
    EXPECT_NE(text.find("approx. 23 characters"), std::string::npos);
}

TEST(SynthPrompt, MissingFieldsRejected) {
    auto d = positive("p", "x");
    d.party.clear();
    EXPECT_THROW(render_synth_prompt(d, synth_template()), Error);
}

TEST(SynthPrompt, VariationMessage) { EXPECT_EQ(variation_message(2, 3), "Variante 2 von 3"); }

TEST(Generate, ProvenanceAndBudget) {
    setenv("CTALAB_API_KEY", "k", 1);
    tsupport::MockLlmServer server(tsupport::MockOptions{});
    server.start();
    llm::ChatGateway g(endpoint(server.base_url()), std::nullopt);
    // 31 whitespace tokens -> approx budget ceil(40.3) = 41
    std::string long_text;
    for (int i = 0; i < 31; ++i) long_text += "wort ";
    std::vector<corpus::TextDocument> parents{positive("a", "Heute in Köln. Jetzt wählen gehen!"),
                                              positive("b", long_text)};
    std::unordered_map<std::string, Label> truth{{"a", Label::positive}, {"b", Label::positive}};
    auto r = generate_synthetics(parents, truth, g, synth_template(), 3);
    ASSERT_EQ(r.synthetics.size(), 6u);
    EXPECT_TRUE(r.failures.empty());
    std::set<std::string> parent_texts{parents[0].text, parents[1].text};
    for (std::size_t i = 0; i < r.synthetics.size(); ++i) {
        const auto& s = r.synthetics[i];
        EXPECT_EQ(s.parent_doc_id, i < 3 ? "a" : "b");
        EXPECT_EQ(s.generation_index, static_cast<int>(i % 3) + 1);
        EXPECT_FALSE(parent_texts.contains(s.text));
        EXPECT_FALSE(s.text.empty());
        EXPECT_EQ(s.token_budget, corpus::count_tokens(i < 3 ? parents[0].text : parents[1].text,
                                                       corpus::TokenScheme::approx_llm));
    }
    EXPECT_EQ(r.synthetics[3].token_budget, 41u);
    auto seen = server.max_tokens_seen();
    EXPECT_EQ(std::count(seen.begin(), seen.end(), 41), 3);
    EXPECT_EQ(std::count(seen.begin(), seen.end(), 8), 3);  // 6 words -> ceil(7.8)
}

TEST(Generate, EchoedParentIsDropped) {
    setenv("CTALAB_API_KEY", "k", 1);
    tsupport::MockOptions o;
    o.synth_echo = true;
    tsupport::MockLlmServer server(o);
    server.start();
    llm::ChatGateway g(endpoint(server.base_url()), std::nullopt);
    std::vector<corpus::TextDocument> parents{positive("a", "Kommt alle zur Wahl!")};
    auto r = generate_synthetics(parents, {{"a", Label::positive}}, g, synth_template(), 2);
    EXPECT_TRUE(r.synthetics.empty());
    EXPECT_EQ(r.warnings.size(), 2u);
    // one retry per generation
    EXPECT_EQ(server.total_requests(), 4);
}

TEST(Generate, NonPositiveParentRejected) {
    setenv("CTALAB_API_KEY", "k", 1);
    llm::ChatGateway g(endpoint("http://127.0.0.1:9/v1"), std::nullopt);
    std::vector<corpus::TextDocument> parents{positive("a", "x")};
    EXPECT_THROW(generate_synthetics(parents, {{"a", Label::negative}}, g, synth_template(), 1), Error);
    EXPECT_THROW(generate_synthetics(parents, {}, g, synth_template(), 1), Error);
}

TEST(Generate, EndpointFailureGivesPartialReport) {
    setenv("CTALAB_API_KEY", "k", 1);
    tsupport::MockLlmServer server(tsupport::MockOptions{});
    server.start();
    server.set_failures(100, 500);
    auto cfg = endpoint(server.base_url());
    cfg.retry.max_attempts = 2;
    llm::ChatGateway g(cfg, std::nullopt);
    auto r = generate_synthetics({positive("a", "Wählt uns!")}, {{"a", Label::positive}}, g, synth_template(), 2);
    EXPECT_TRUE(r.synthetics.empty());
    ASSERT_EQ(r.failures.size(), 2u);
    EXPECT_EQ(r.failures[0].parent_doc_id, "a");
}

TEST(Synthetics, FileRoundTrip) {
    tsupport::TempDir dir;
    std::vector<SyntheticDocument> s{{"a#s1", "a", 1, "Text", "h", 4}};
    write_synthetics(dir / "s.jsonl", s);
    auto back = read_synthetics(dir / "s.jsonl");
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(to_json(back[0]), to_json(s[0]));
}
