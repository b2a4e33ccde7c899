#include "ctalab/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace ctalab::analysis {

PostAggregation aggregate_to_posts(const std::map<std::string, bool>& doc_labels, const corpus::CorpusStore& store) {
    std::unordered_map<std::string, std::vector<std::string>> by_post;
    for (const auto& [doc_id, label] : doc_labels) {
        const auto* doc = store.find_document(doc_id);
        if (!doc) throw Error(ErrorKind::not_found, "labeled document " + doc_id + " is not in the corpus");
        by_post[doc->parent_post_id].push_back(doc_id);
    }
    std::unordered_map<std::string, std::size_t> doc_count;
    for (const auto& d : store.documents()) ++doc_count[d.parent_post_id];

    PostAggregation out;
    for (const auto& post : store.posts()) {
        auto it = by_post.find(post.post_id);
        if (it == by_post.end()) {
            (doc_count.contains(post.post_id) ? out.unlabeled_posts : out.textless_posts).push_back(post.post_id);
            continue;
        }
        PostLevelLabel l;
        l.post_id = post.post_id;
        l.post_type = post.kind;
        l.party = post.party;
        l.username = post.username;
        l.account_type = post.account_type;
        l.contributing_doc_ids = it->second;  // already sorted: map iteration order
        for (const auto& id : l.contributing_doc_ids) l.cta_present = l.cta_present || doc_labels.at(id);
        out.labels.push_back(std::move(l));
    }
    return out;
}

std::string_view to_string(GroupBy g) {
    switch (g) {
        case GroupBy::post_type: return "post_type";
        case GroupBy::party: return "party";
        case GroupBy::party_post_type: return "party_post_type";
    }
    return "?";
}

std::string_view to_string(Pooling p) {
    return p == Pooling::party_and_frontrunner ? "party_and_frontrunner_accounts_pooled" : "party_accounts_only";
}

static bool included(const PostLevelLabel& l, Pooling pooling) {
    return pooling == Pooling::party_and_frontrunner || l.account_type == corpus::AccountType::party;
}

static void finish(PrevalenceRow& r) { r.pct = r.n ? 100.0 * static_cast<double>(r.positive) / static_cast<double>(r.n) : 0.0; }

PrevalenceTable prevalence_table(const std::vector<PostLevelLabel>& labels, GroupBy group_by, Pooling pooling) {
    PrevalenceTable t;
    t.pooling = pooling;
    switch (group_by) {
        case GroupBy::post_type: t.key_names = {"post_type"}; break;
        case GroupBy::party: t.key_names = {"party"}; break;
        case GroupBy::party_post_type: t.key_names = {"party", "post_type"}; break;
    }
    // key order: party lexicographic, then post before story
    std::map<std::pair<std::string, int>, PrevalenceRow> groups;
    for (const auto& l : labels) {
        if (!included(l, pooling)) continue;
        std::pair<std::string, int> key;
        std::vector<std::string> names;
        switch (group_by) {
            case GroupBy::post_type:
                key = {"", static_cast<int>(l.post_type)};
                names = {std::string(to_string(l.post_type))};
                break;
            case GroupBy::party:
                key = {l.party, 0};
                names = {l.party};
                break;
            case GroupBy::party_post_type:
                key = {l.party, static_cast<int>(l.post_type)};
                names = {l.party, std::string(to_string(l.post_type))};
                break;
        }
        auto& row = groups[key];
        row.keys = std::move(names);
        ++row.n;
        row.positive += l.cta_present;
        ++t.total.n;
        t.total.positive += l.cta_present;
    }
    if (t.total.n == 0) throw Error(ErrorKind::empty_input, "prevalence table over zero posts");
    for (auto& [key, row] : groups) {
        finish(row);
        t.rows.push_back(row);
    }
    t.total.keys.assign(t.key_names.size(), "overall");
    finish(t.total);
    return t;
}

PrevalenceTable stratum_prevalence(const std::map<std::string, bool>& doc_labels, const corpus::CorpusStore& store) {
    PrevalenceTable t;
    t.key_names = {"post_type", "text_type"};
    std::vector<PrevalenceRow> rows(std::size(kStrata));
    for (const auto& [doc_id, label] : doc_labels) {
        const auto* doc = store.find_document(doc_id);
        if (!doc) throw Error(ErrorKind::not_found, "labeled document " + doc_id + " is not in the corpus");
        auto& r = rows[stratum_index(doc->stratum())];
        ++r.n;
        r.positive += label;
        ++t.total.n;
        t.total.positive += label;
    }
    if (t.total.n == 0) throw Error(ErrorKind::empty_input, "prevalence table over zero documents");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].n == 0) continue;
        rows[i].keys = {std::string(to_string(kStrata[i].post_type)), std::string(to_string(kStrata[i].text_type))};
        finish(rows[i]);
        t.rows.push_back(rows[i]);
    }
    t.total.keys = {"overall", "overall"};
    finish(t.total);
    return t;
}

AssociationReport association_tests(const std::vector<PostLevelLabel>& labels, Pooling pooling) {
    AssociationReport r;
    const std::vector<std::string> cols = {"cta", "no_cta"};

    auto by_type = prevalence_table(labels, GroupBy::post_type, pooling);
    r.post_vs_story_table.col_labels = cols;
    for (const auto& row : by_type.rows) {
        r.post_vs_story_table.row_labels.push_back(row.keys[0]);
        r.post_vs_story_table.counts.push_back(
            {static_cast<double>(row.positive), static_cast<double>(row.n - row.positive)});
    }
    r.post_vs_story = metrics::chi_square_test(r.post_vs_story_table);

    auto crossed = prevalence_table(labels, GroupBy::party_post_type, pooling);
    const double n = static_cast<double>(crossed.total.n);
    const double col_tot[2] = {static_cast<double>(crossed.total.positive),
                               static_cast<double>(crossed.total.n - crossed.total.positive)};
    auto& table = r.party_by_posttype_table;
    table.col_labels = cols;
    std::vector<double> other(2, 0.0);
    for (const auto& row : crossed.rows) {
        const double rn = static_cast<double>(row.n);
        const std::string label = row.keys[0] + "/" + row.keys[1];
        if (std::min(rn * col_tot[0], rn * col_tot[1]) / n < 1.0) {
            r.merged_rows.push_back(label);
            other[0] += static_cast<double>(row.positive);
            other[1] += static_cast<double>(row.n - row.positive);
            continue;
        }
        table.row_labels.push_back(label);
        table.counts.push_back({static_cast<double>(row.positive), static_cast<double>(row.n - row.positive)});
    }
    if (!r.merged_rows.empty()) {
        std::string names;
        for (const auto& m : r.merged_rows) names += (names.empty() ? "" : ", ") + m;
        r.warnings.push_back("expected count below 1; merged into 'other': " + names);
        log_warning(r.warnings.back());
        table.row_labels.push_back("other");
        table.counts.push_back(other);
    }
    r.party_by_posttype = metrics::chi_square_test(table);
    return r;
}

static json row_json(const std::vector<std::string>& names, const PrevalenceRow& r) {
    json j;
    for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = r.keys[i];
    j["n"] = r.n;
    j["cta"] = r.positive;
    j["pct"] = r.pct;
    return j;
}

json to_json(const PrevalenceTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) rows.push_back(row_json(t.key_names, r));
    return {{"group_by", t.key_names}, {"pooling", to_string(t.pooling)}, {"rows", rows},
            {"overall", row_json(t.key_names, t.total)}};
}

static json table_json(const metrics::ContingencyTable& t) {
    return {{"rows", t.row_labels}, {"cols", t.col_labels}, {"counts", t.counts}};
}

static json chi_json(const metrics::ChiSquareResult& c) {
    return {{"statistic", c.statistic}, {"df", c.df}, {"p_value", c.p_value}, {"cramers_v", c.cramers_v}, {"n", c.n}};
}

json to_json(const AssociationReport& r) {
    return {{"post_vs_story", {{"table", table_json(r.post_vs_story_table)}, {"test", chi_json(r.post_vs_story)}}},
            {"party_by_posttype",
             {{"table", table_json(r.party_by_posttype_table)}, {"test", chi_json(r.party_by_posttype)}}},
            {"merged_rows", r.merged_rows},
            {"warnings", r.warnings}};
}

std::string prevalence_csv(const PrevalenceTable& t) {
    std::ostringstream out;
    for (const auto& k : t.key_names) out << k << ',';
    out << "n,cta,pct\n";
    auto emit = [&](const PrevalenceRow& r) {
        for (const auto& k : r.keys) out << k << ',';
        char pct[32];
        std::snprintf(pct, sizeof pct, "%.2f", r.pct);
        out << r.n << ',' << r.positive << ',' << pct << '\n';
    };
    for (const auto& r : t.rows) emit(r);
    emit(t.total);
    return out.str();
}

std::string association_csv(const AssociationReport& r) {
    std::ostringstream out;
    out << "test,statistic,df,p_value,cramers_v,n\n";
    auto emit = [&](const char* name, const metrics::ChiSquareResult& c) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%.4f,%d,%.6g,%.4f,%.0f\n", name, c.statistic, c.df, c.p_value, c.cramers_v, c.n);
        out << buf;
    };
    emit("post_vs_story", r.post_vs_story);
    emit("party_by_posttype", r.party_by_posttype);
    return out.str();
}

}  // namespace ctalab::analysis
