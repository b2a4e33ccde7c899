#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctalab/corpus.hpp"
#include "ctalab/metrics.hpp"

namespace ctalab::analysis {

struct PostLevelLabel {
    std::string post_id;
    PostType post_type = PostType::post;
    std::string party;
    std::string username;
    corpus::AccountType account_type = corpus::AccountType::party;
    bool cta_present = false;
    std::vector<std::string> contributing_doc_ids;  // labeled docs of this post, sorted
};

struct PostAggregation {
    std::vector<PostLevelLabel> labels;        // corpus order
    std::vector<std::string> unlabeled_posts;  // has documents, none labeled
    std::vector<std::string> textless_posts;   // no text documents at all
};

// A post is CTA-positive iff any of its labeled documents is. Unknown doc ids
// raise not_found.
PostAggregation aggregate_to_posts(const std::map<std::string, bool>& doc_labels, const corpus::CorpusStore& store);

enum class GroupBy { post_type, party, party_post_type };
enum class Pooling { party_and_frontrunner, party_accounts_only };

std::string_view to_string(GroupBy g);
std::string_view to_string(Pooling p);

struct PrevalenceRow {
    std::vector<std::string> keys;
    std::size_t n = 0;
    std::size_t positive = 0;
    double pct = 0;  // 100 * positive / n, unrounded
};

struct PrevalenceTable {
    std::vector<std::string> key_names;
    std::vector<PrevalenceRow> rows;  // post before story, parties lexicographic
    PrevalenceRow total;
    Pooling pooling = Pooling::party_and_frontrunner;
};

PrevalenceTable prevalence_table(const std::vector<PostLevelLabel>& labels, GroupBy group_by,
                                 Pooling pooling = Pooling::party_and_frontrunner);

// Document-level prevalence per (post_type, text_type) stratum.
PrevalenceTable stratum_prevalence(const std::map<std::string, bool>& doc_labels, const corpus::CorpusStore& store);

struct AssociationReport {
    metrics::ContingencyTable post_vs_story_table;
    metrics::ChiSquareResult post_vs_story;
    metrics::ContingencyTable party_by_posttype_table;
    metrics::ChiSquareResult party_by_posttype;
    std::vector<std::string> merged_rows;  // folded into "other"
    std::vector<std::string> warnings;
};

// Rows of the crossed table whose expected count falls below 1 in either
// column are merged into a single "other" row before testing.
AssociationReport association_tests(const std::vector<PostLevelLabel>& labels,
                                    Pooling pooling = Pooling::party_and_frontrunner);

json to_json(const PrevalenceTable& t);
json to_json(const AssociationReport& r);
std::string prevalence_csv(const PrevalenceTable& t);
std::string association_csv(const AssociationReport& r);

}  // namespace ctalab::analysis
