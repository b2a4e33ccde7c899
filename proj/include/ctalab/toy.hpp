#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ctalab/corpus.hpp"

// Deterministic 300-post / 500-document corpus with planted CTA labels. A
// document is positive iff its text contains one of toy_cta_markers().
//
//   posts   p = 0..99   caption, image OCR, plus a video (OCR + transcript) when p % 4 == 0
//   stories s = 0..199  video (OCR + transcript) when s % 4 == 0, else image OCR
//   party   toy_parties()[i % 8]; frontrunner account when i % 3 == 0
//
//   positive: caption when p % 2 == 0; post image OCR when p % 5 == 0;
//             story image OCR when s % 10 == 1; story transcript when s % 40 == 0
namespace ctalab::toy {

struct ToyCorpus {
    std::vector<corpus::MediaPost> posts;
    std::map<std::string, bool> truth;  // doc_id -> CTA
};

const std::vector<std::string>& toy_parties();
const std::vector<std::string>& toy_cta_markers();

ToyCorpus make_toy_corpus();

}  // namespace ctalab::toy
