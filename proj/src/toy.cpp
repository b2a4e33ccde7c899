#include "ctalab/toy.hpp"

#include <cctype>
#include <cstdio>

namespace ctalab::toy {

const std::vector<std::string>& toy_parties() {
    static const std::vector<std::string> p = {"AfD", "CDU", "CSU", "FDP", "FREIE WÄHLER", "Grüne", "Linke", "SPD"};
    return p;
}

const std::vector<std::string>& toy_cta_markers() {
    // the last two also appear among the shipped few-shot phrases
    static const std::vector<std::string> m = {
        "Jetzt wählen gehen!",
        "Kommt vorbei und diskutiert mit uns!",
        "Teilt diesen Beitrag mit euren Freunden!",
        "Schreibt uns eure Fragen in die Kommentare!",
        "Besuche unsere Website für weitere Details.",
        "findet ihr unter dem Link in unserer Story.",
    };
    return m;
}

static const char* const kPlaces[] = {"Berlin", "Hamburg", "München", "Köln", "Leipzig", "Dresden", "Kiel", "Mainz", "Erfurt"};
static const char* const kTopics[] = {"Klimaschutz", "Bildung", "Rente", "Digitalisierung", "Wohnen",
                                      "Verkehr", "Pflege", "Steuern", "Landwirtschaft", "Sicherheit", "Europa"};
static const char* const kOpeners[] = {
    "Heute waren wir in %s unterwegs und haben über %s gesprochen.",
    "Ein spannender Tag in %s mit vielen Gesprächen zum Thema %s.",
    "Unser Team in %s arbeitet weiter an Lösungen für %s.",
    "Rückblick auf die Veranstaltung in %s: Schwerpunkt war %s.",
    "In %s haben wir heute neue Ideen zu %s vorgestellt.",
};

static std::string neutral(std::size_t i, std::size_t salt) {
    char buf[256];
    std::snprintf(buf, sizeof buf, kOpeners[(i + salt) % 5], kPlaces[(i * 7 + salt) % 9], kTopics[(i * 3 + salt) % 11]);
    return buf;
}

static std::string with_cta(std::size_t i, std::size_t salt) {
    const auto& m = toy_cta_markers();
    return neutral(i, salt) + " " + m[(i + salt) % m.size()];
}

ToyCorpus make_toy_corpus() {
    ToyCorpus out;
    const auto& parties = toy_parties();
    auto account = [&](std::size_t i, corpus::MediaPost& post) {
        post.party = parties[i % parties.size()];
        std::string slug;
        for (unsigned char c : post.party) slug += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '_';
        post.account_type = i % 3 == 0 ? corpus::AccountType::frontrunner : corpus::AccountType::party;
        post.username = (i % 3 == 0 ? "kandidat_" : "partei_") + slug;
    };
    auto stamp = [](std::size_t i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "2021-09-%02zuT%02zu:%02zu:00Z", 1 + i % 26, 8 + i % 12, (i * 7) % 60);
        return std::string(buf);
    };

    for (std::size_t p = 0; p < 100; ++p) {
        corpus::MediaPost post;
        char id[16];
        std::snprintf(id, sizeof id, "p%03zu", p);
        post.post_id = id;
        post.kind = PostType::post;
        account(p, post);
        post.published_at = stamp(p);
        const bool cap_cta = p % 2 == 0, img_cta = p % 5 == 0;
        post.caption = cap_cta ? with_cta(p, 0) : neutral(p, 0);
        post.media.push_back({"m1", corpus::MediaKind::image, img_cta ? with_cta(p, 1) : neutral(p, 1), std::nullopt});
        if (p % 4 == 0)
            post.media.push_back({"m2", corpus::MediaKind::video, neutral(p, 2), neutral(p, 3)});
        for (const auto& d : corpus::decompose_post(post)) {
            bool cta = false;
            if (d.text_type == TextType::caption) cta = cap_cta;
            else if (d.doc_id == post.post_id + ":m1:ocr") cta = img_cta;
            out.truth[d.doc_id] = cta;
        }
        out.posts.push_back(std::move(post));
    }
    for (std::size_t s = 0; s < 200; ++s) {
        corpus::MediaPost story;
        char id[16];
        std::snprintf(id, sizeof id, "s%03zu", s);
        story.post_id = id;
        story.kind = PostType::story;
        account(s, story);
        story.published_at = stamp(s + 3);
        bool cta = false;
        if (s % 4 == 0) {
            cta = s % 40 == 0;
            story.media.push_back({"m1", corpus::MediaKind::video, neutral(s, 4), cta ? with_cta(s, 5) : neutral(s, 5)});
        } else {
            cta = s % 10 == 1;
            story.media.push_back({"m1", corpus::MediaKind::image, cta ? with_cta(s, 6) : neutral(s, 6), std::nullopt});
        }
        for (const auto& d : corpus::decompose_post(story))
            out.truth[d.doc_id] = cta && (s % 4 == 0 ? d.text_type == TextType::transcription : true);
        out.posts.push_back(std::move(story));
    }
    return out;
}

}  // namespace ctalab::toy
