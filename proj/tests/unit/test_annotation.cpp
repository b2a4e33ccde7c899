#include <gtest/gtest.h>

#include <random>

#include "ctalab/annotation.hpp"
#include "oracles.hpp"

using namespace ctalab;
using namespace ctalab::annotation;

namespace {

std::vector<corpus::TextDocument> make_docs(std::size_t per_stratum) {
    std::vector<corpus::TextDocument> docs;
    for (std::size_t s = 0; s < 5; ++s)
        for (std::size_t i = 0; i < per_stratum; ++i) {
            corpus::TextDocument d;
            d.doc_id = "s" + std::to_string(s) + "_" + std::to_string(i);
            d.post_type = kStrata[s].post_type;
            d.text_type = kStrata[s].text_type;
            d.text = "t";
            docs.push_back(d);
        }
    return docs;
}

AnnotationVote vote(const std::string& doc, const std::string& who, VoteValue v, int round = 1) {
    return {doc, who, v, round, ""};
}

constexpr auto P = VoteValue::positive;
constexpr auto N = VoteValue::negative;
constexpr auto U = VoteValue::unsure;

std::vector<AnnotatorProfile> passed(std::initializer_list<const char*> ids) {
    std::vector<AnnotatorProfile> out;
    for (auto id : ids) out.push_back({id, true, false, true});
    return out;
}

}  // namespace

TEST(Sampling, FullFractionSelectsAll) {
    auto docs = make_docs(7);
    auto plan = draw_stratified_sample(docs, Fraction::parse("1"), 3);
    EXPECT_EQ(plan.size(), docs.size());
}

TEST(Sampling, QuarterOfTenIsThreeAndReproducible) {
    auto docs = make_docs(10);
    auto a = draw_stratified_sample(docs, Fraction::parse("0.25"), 99);
    auto b = draw_stratified_sample(docs, Fraction::parse("0.25"), 99);
    for (std::size_t s = 0; s < 5; ++s) {
        ASSERT_EQ(a.selected[s].size(), 3u);
        EXPECT_EQ(a.selected[s], b.selected[s]);
    }
    auto c = draw_stratified_sample(docs, Fraction::parse("0.25"), 100);
    EXPECT_NE(to_json(a), to_json(c));
}

TEST(Sampling, LargerFractionExtendsSmaller) {
    auto docs = make_docs(40);
    auto small = draw_stratified_sample(docs, Fraction::parse("0.2"), 5);
    auto large = draw_stratified_sample(docs, Fraction::parse("0.3"), 5);
    for (std::size_t s = 0; s < 5; ++s) {
        ASSERT_EQ(small.selected[s].size(), 8u);
        ASSERT_EQ(large.selected[s].size(), 12u);
        EXPECT_TRUE(std::equal(small.selected[s].begin(), small.selected[s].end(), large.selected[s].begin()));
    }
}

TEST(Sampling, InputOrderDoesNotMatter) {
    auto docs = make_docs(9);
    auto shuffled = docs;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(1));
    EXPECT_EQ(to_json(draw_stratified_sample(docs, Fraction::parse("1/3"), 4)),
              to_json(draw_stratified_sample(shuffled, Fraction::parse("1/3"), 4)));
}

TEST(Sampling, JsonRoundTrip) {
    auto plan = draw_stratified_sample(make_docs(5), Fraction::parse("0.4"), 8);
    EXPECT_EQ(to_json(sample_plan_from_json(to_json(plan))), to_json(plan));
}

TEST(Assignment, ForcedSingleDoc) {
    SamplePlan plan;
    plan.selected[0] = {"d"};
    auto a = assign_documents(plan, passed({"a", "b", "c"}), 3, 1);
    ASSERT_EQ(a["d"].size(), 3u);
    std::set<std::string> who(a["d"].begin(), a["d"].end());
    EXPECT_EQ(who, (std::set<std::string>{"a", "b", "c"}));
}

TEST(Assignment, NineByNineBalanced) {
    SamplePlan plan;
    for (int i = 0; i < 9; ++i) plan.selected[0].push_back("d" + std::to_string(i));
    auto people = passed({"a", "b", "c", "d", "e", "f", "g", "h", "i"});
    auto a = assign_documents(plan, people, 3, 17);
    std::map<std::string, int> load;
    std::size_t total = 0;
    for (const auto& [doc, ids] : a) {
        EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), 3u);
        for (const auto& id : ids) ++load[id];
        total += ids.size();
    }
    EXPECT_EQ(total, 27u);
    for (const auto& [id, n] : load) EXPECT_EQ(n, 3) << id;
    EXPECT_EQ(a, assign_documents(plan, people, 3, 17));
}

TEST(Assignment, BalancedWithinOneOnRandomShapes) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n_docs = 1 + rng() % 60, n_people = 3 + rng() % 8, k = 1 + rng() % 3;
        std::vector<std::string> docs, people;
        for (std::size_t i = 0; i < n_docs; ++i) docs.push_back("d" + std::to_string(i));
        for (std::size_t i = 0; i < n_people; ++i) people.push_back("a" + std::to_string(i));
        auto a = assign_documents(docs, people, k, rng());
        std::map<std::string, int> load;
        for (const auto& p : people) load[p] = 0;
        for (const auto& [doc, ids] : a) {
            EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), k);
            for (const auto& id : ids) ++load[id];
        }
        int lo = 1 << 30, hi = 0;
        for (const auto& [id, n] : load) {
            lo = std::min(lo, n);
            hi = std::max(hi, n);
        }
        EXPECT_LE(hi - lo, 1);
    }
}

TEST(Assignment, CapacityError) {
    SamplePlan plan;
    for (int i = 0; i < 5; ++i) plan.selected[0].push_back("d" + std::to_string(i));
    auto people = passed({"a", "b"});
    try {
        assign_documents(plan, people, 3, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::capacity);
    }
    auto mixed = passed({"a", "b", "c"});
    mixed[2].quiz_passed = false;
    EXPECT_THROW(assign_documents(plan, mixed, 3, 1), Error);
}

TEST(Voting, RecordDuplicateConflictAndGate) {
    auto profiles = passed({"a", "b", "c"});
    profiles.push_back({"z", false, false, true});
    AnnotationState s(profiles, "a");
    s.assign(1, {{"d1", {"a", "b", "z"}}});

    EXPECT_EQ(record_vote(vote("d1", "a", P), s), RecordOutcome::recorded);
    EXPECT_EQ(s.votes_for("d1").size(), 1u);
    EXPECT_EQ(record_vote(vote("d1", "a", P), s), RecordOutcome::duplicate);
    EXPECT_EQ(s.log().size(), 1u);

    try {
        record_vote(vote("d1", "a", N), s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::conflict);
    }
    try {
        record_vote(vote("d1", "z", P), s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::authorization);
    }
    try {
        record_vote(vote("d1", "c", P), s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::authorization);
    }
    s.set_quiz_passed("z", true);
    EXPECT_EQ(record_vote(vote("d1", "z", P), s), RecordOutcome::recorded);
}

TEST(Aggregate, SpecExamples) {
    auto r = aggregate_labels({vote("d", "a", P), vote("d", "b", P), vote("d", "c", N)}, "adj", 2);
    ASSERT_EQ(r.decisions.size(), 1u);
    EXPECT_EQ(r.decisions[0].label, Label::positive);
    EXPECT_EQ(r.decisions[0].method, DecisionMethod::majority);

    auto q = aggregate_labels({vote("d", "a", P), vote("d", "b", N), vote("d", "c", U)}, "adj", 2);
    EXPECT_TRUE(q.decisions.empty());
    EXPECT_EQ(q.disagreement_queue, std::vector<std::string>{"d"});

    auto t = aggregate_labels({vote("d", "a", P), vote("d", "b", N), vote("d", "c", P, 2), vote("d", "adj", N, 2)},
                              "adj", 2);
    ASSERT_EQ(t.decisions.size(), 1u);
    EXPECT_EQ(t.decisions[0].label, Label::negative);
    EXPECT_EQ(t.decisions[0].method, DecisionMethod::adjudicated);
    EXPECT_EQ(t.decisions[0].rounds_used, 2);
}

TEST(Aggregate, UnanimousWithUnsureDecides) {
    auto r = aggregate_labels({vote("d", "a", P), vote("d", "b", U), vote("d", "c", P)}, "adj", 2);
    ASSERT_EQ(r.decisions.size(), 1u);
    EXPECT_EQ(r.decisions[0].method, DecisionMethod::unanimous);
    EXPECT_TRUE(r.disagreement_queue.empty());
}

TEST(Aggregate, UnresolvedTieListsDocs) {
    try {
        aggregate_labels({vote("x", "a", P, 2), vote("x", "b", N, 2), vote("y", "a", P, 2), vote("y", "b", N, 2)},
                         "adj", 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unresolved_tie);
        std::string m = e.what();
        EXPECT_NE(m.find("x"), std::string::npos);
        EXPECT_NE(m.find("y"), std::string::npos);
    }
}

TEST(Aggregate, OrderIndependenceAndUnsureNeutrality) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<AnnotationVote> votes;
        int docs = 1 + static_cast<int>(rng() % 8);
        for (int d = 0; d < docs; ++d) {
            int n = 1 + static_cast<int>(rng() % 5);
            for (int v = 0; v < n; ++v) {
                VoteValue val = rng() % 5 == 0 ? U : (rng() % 2 ? P : N);
                votes.push_back(vote("d" + std::to_string(d), "a" + std::to_string(v), val, 1 + (v >= 3)));
            }
            votes.push_back(vote("d" + std::to_string(d), "adj", rng() % 2 ? P : N, 2));
        }
        auto base = aggregate_labels(votes, "adj", 2);
        auto shuffled = votes;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto again = aggregate_labels(shuffled, "adj", 2);
        ASSERT_EQ(base.decisions.size(), again.decisions.size());
        for (std::size_t i = 0; i < base.decisions.size(); ++i)
            EXPECT_EQ(to_json(base.decisions[i]), to_json(again.decisions[i]));

        auto with_unsure = votes;
        with_unsure.push_back(vote("d0", "extra", U, 1));
        auto u = aggregate_labels(with_unsure, "adj", 2);
        for (const auto& d : base.decisions)
            for (const auto& e : u.decisions)
                if (d.doc_id == e.doc_id) EXPECT_EQ(d.label, e.label);
    }
}

TEST(Aggregate, AdditionalRoundSkipsPriorVoters) {
    std::vector<AnnotationVote> votes{vote("d", "a", P), vote("d", "b", N)};
    auto extra = assign_additional_round({"d"}, votes, {"a", "b", "c", "e", "f"}, 2, 5);
    ASSERT_EQ(extra["d"].size(), 2u);
    for (const auto& id : extra["d"]) EXPECT_TRUE(id != "a" && id != "b");
    EXPECT_EQ(extra, assign_additional_round({"d"}, votes, {"a", "b", "c", "e", "f"}, 2, 5));
}

TEST(Agreement, PerfectAgreement) {
    std::vector<AnnotationVote> votes{vote("d1", "a", P), vote("d1", "b", P), vote("d2", "a", N),
                                      vote("d2", "b", N), vote("d1", "adj", P), vote("d2", "adj", N)};
    auto dec = aggregate_labels(votes, "adj", 2).decisions;
    auto r = agreement_report(votes, dec, "adj");
    ASSERT_TRUE(r.alpha && r.kappa_adjudicator);
    EXPECT_DOUBLE_EQ(*r.alpha, 1.0);
    EXPECT_DOUBLE_EQ(*r.kappa_adjudicator, 1.0);
    EXPECT_EQ(r.n_items, 2u);
}

TEST(Agreement, TwoCoderExample) {
    std::vector<AnnotationVote> votes{vote("1", "a", P), vote("1", "b", P), vote("2", "a", P), vote("2", "b", N),
                                      vote("3", "a", N), vote("3", "b", N), vote("4", "a", N), vote("4", "b", N)};
    auto r = agreement_report(votes, {}, "nobody");
    ASSERT_TRUE(r.alpha);
    EXPECT_NEAR(*r.alpha, 0.5333, 1e-4);
    EXPECT_FALSE(r.kappa_adjudicator);
}

TEST(Agreement, NoOverlapIsUndefined) {
    std::vector<AnnotationVote> votes{vote("1", "a", P), vote("2", "b", N)};
    try {
        agreement_report(votes, {}, "a");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::undefined_agreement);
    }
}

TEST(Agreement, KappaExcludesAdjudicatedTies) {
    // t: 2-2 after the second round, broken by the adjudicator; m: unanimous
    std::vector<AnnotationVote> votes{vote("t", "a", P), vote("t", "b", N), vote("t", "adj", P, 2),
                                      vote("t", "c", N, 2), vote("m", "a", P), vote("m", "b", P), vote("m", "adj", P)};
    auto dec = aggregate_labels(votes, "adj", 2).decisions;
    ASSERT_EQ(dec.size(), 2u);
    EXPECT_EQ(dec[1].method, DecisionMethod::adjudicated);
    auto r = agreement_report(votes, dec, "adj");
    EXPECT_EQ(r.n_kappa, 1u);
}

TEST(Balance, PerStratumAndOverall) {
    auto docs = make_docs(2);
    std::vector<LabelDecision> dec;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        LabelDecision d;
        d.doc_id = docs[i].doc_id;
        d.label = i % 2 == 0 ? Label::positive : Label::negative;
        dec.push_back(d);
    }
    auto rows = class_balance(dec, docs);
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_EQ(rows.back().positive, 5u);
    EXPECT_DOUBLE_EQ(rows.back().positive_pct(), 50.0);
    auto csv = class_balance_csv(rows);
    EXPECT_NE(csv.find("overall"), std::string::npos);
}

TEST(Quiz, GradingAndThreshold) {
    auto q = default_quiz();
    ASSERT_GE(q.items.size(), 5u);
    std::map<std::string, bool> right;
    for (const auto& it : q.items) right[it.item_id] = it.has_cta;
    auto r = grade_quiz(q, right);
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.correct, q.items.size());
    right.erase(q.items[0].item_id);
    right[q.items[1].item_id] = !q.items[1].has_cta;
    auto w = grade_quiz(q, right);
    EXPECT_EQ(w.correct, q.items.size() - 2);
    EXPECT_FALSE(w.passed);
}

TEST(Persistence, VotesAndDecisionsRoundTrip) {
    tsupport::TempDir dir;
    std::vector<json> rows;
    std::vector<AnnotationVote> votes{vote("d", "a", P), vote("d", "b", U, 2)};
    for (const auto& v : votes) rows.push_back(to_json(v));
    write_jsonl(dir / "v.jsonl", rows);
    auto back = read_votes(dir / "v.jsonl");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].value, U);
    EXPECT_EQ(back[1].round, 2);

    auto dec = aggregate_labels({vote("d", "a", P), vote("d", "b", P)}, "x", 2).decisions;
    write_decisions(dir / "dec.jsonl", dec);
    auto dback = read_decisions(dir / "dec.jsonl");
    ASSERT_EQ(dback.size(), 1u);
    EXPECT_EQ(to_json(dback[0]), to_json(dec[0]));
}

TEST(Persistence, ReplayReproducesDecisions) {
    std::mt19937_64 rng(8);
    auto people = passed({"a", "b", "c", "d", "e"});
    AnnotationState s(people, "a");
    std::vector<std::string> docs;
    for (int i = 0; i < 30; ++i) docs.push_back("doc" + std::to_string(i));
    auto assignment = assign_documents(docs, {"a", "b", "c", "d", "e"}, 3, 2);
    s.assign(1, assignment);
    for (const auto& [doc, ids] : assignment)
        for (const auto& id : ids) record_vote(vote(doc, id, rng() % 2 ? P : N), s);
    AnnotationState replayed(people, "a");
    replayed.assign(1, assignment);
    for (const auto& v : s.log()) record_vote(v, replayed);
    auto x = aggregate_labels(s, 2), y = aggregate_labels(replayed, 2);
    ASSERT_EQ(x.decisions.size(), y.decisions.size());
    for (std::size_t i = 0; i < x.decisions.size(); ++i) EXPECT_EQ(to_json(x.decisions[i]), to_json(y.decisions[i]));
}
