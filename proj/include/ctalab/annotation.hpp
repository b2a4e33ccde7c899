#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctalab/common.hpp"
#include "ctalab/corpus.hpp"

namespace ctalab::annotation {

struct AnnotatorProfile {
    std::string annotator_id;
    bool quiz_passed = false;
    bool is_adjudicator = false;
    bool native_speaker = true;
};

enum class VoteValue { negative, positive, unsure };

std::string_view to_string(VoteValue v);
// Accepts "True"/"False"/"Unsure" as well as positive/negative/unsure.
VoteValue vote_value_from_string(std::string_view s);

struct AnnotationVote {
    std::string doc_id;
    std::string annotator_id;
    VoteValue value = VoteValue::unsure;
    int round = 1;
    std::string timestamp;  // UTC, informational only
};

json to_json(const AnnotationVote& v);
AnnotationVote vote_from_json(const json& j);

// ---- sampling ---------------------------------------------------------------

struct SamplePlan {
    std::uint64_t seed = 0;
    Fraction fraction;
    // keyed by stratum index into kStrata; doc ids in selection order
    std::map<std::size_t, std::vector<std::string>> selected;

    std::vector<std::string> all_doc_ids() const;
    std::size_t size() const;
};

// Each stratum is permuted by a seed-derived stream after sorting by doc_id,
// and the first round_half_up(fraction * size) ids are taken. A larger
// fraction with the same seed therefore extends the smaller sample.
SamplePlan draw_stratified_sample(const std::vector<corpus::TextDocument>& docs,
                                  const Fraction& fraction, std::uint64_t seed);

json to_json(const SamplePlan& plan);
SamplePlan sample_plan_from_json(const json& j);

// ---- assignment -------------------------------------------------------------

using AssignmentMap = std::map<std::string, std::vector<std::string>>;  // doc -> annotators

// Only quiz-passed profiles are eligible.
AssignmentMap assign_documents(const SamplePlan& plan, const std::vector<AnnotatorProfile>& annotators,
                               std::size_t k, std::uint64_t seed);
// Assignment over an explicit candidate list (e.g. the invited roster).
AssignmentMap assign_documents(const std::vector<std::string>& doc_ids,
                               std::vector<std::string> candidates, std::size_t k,
                               std::uint64_t seed);

// ---- voting state -----------------------------------------------------------

enum class RecordOutcome { recorded, duplicate };

class AnnotationState {
public:
    AnnotationState() = default;
    AnnotationState(std::vector<AnnotatorProfile> profiles, std::string adjudicator_id);

    // round -> doc -> annotators
    void assign(int round, const AssignmentMap& assignments);
    void set_quiz_passed(const std::string& annotator_id, bool passed);

    // Authorization: profile must exist, have passed the quiz, and be assigned
    // to the document in that round. The adjudicator may vote on any assigned
    // document in any round.
    RecordOutcome record_vote(const AnnotationVote& vote);

    const std::vector<AnnotationVote>& log() const { return log_; }
    const std::vector<AnnotatorProfile>& profiles() const { return profiles_; }
    const AnnotatorProfile* profile(const std::string& id) const;
    const std::string& adjudicator_id() const { return adjudicator_id_; }
    bool is_assigned(const std::string& doc_id, const std::string& annotator_id, int round) const;
    std::set<std::string> assigned_docs() const;
    const std::map<int, AssignmentMap>& assignments() const { return assignments_; }
    std::vector<AnnotationVote> votes_for(const std::string& doc_id) const;
    bool has_voted(const std::string& doc_id, const std::string& annotator_id, int round) const;

private:
    std::vector<AnnotatorProfile> profiles_;
    std::string adjudicator_id_;
    std::map<int, AssignmentMap> assignments_;
    std::vector<AnnotationVote> log_;
    std::map<std::tuple<std::string, std::string, int>, std::size_t> by_key_;
};

RecordOutcome record_vote(const AnnotationVote& vote, AnnotationState& state);

// ---- aggregation ------------------------------------------------------------

enum class DecisionMethod { unanimous, majority, adjudicated };
std::string_view to_string(DecisionMethod m);

struct LabelDecision {
    std::string doc_id;
    Label label = Label::negative;
    std::size_t positive_votes = 0;
    std::size_t negative_votes = 0;
    DecisionMethod method = DecisionMethod::majority;
    int rounds_used = 1;
};

json to_json(const LabelDecision& d);
LabelDecision decision_from_json(const json& j);

struct AggregationResult {
    std::vector<LabelDecision> decisions;        // sorted by doc_id
    std::vector<std::string> disagreement_queue;  // sorted by doc_id
};

// A decision needs a strict majority of valid (non-unsure) votes. Without one,
// the document is queued for another round while rounds remain; in the final
// round the adjudicator's valid vote decides. Final-round ties the adjudicator
// did not vote on raise unresolved_tie listing every such doc.
AggregationResult aggregate_labels(const std::vector<AnnotationVote>& votes,
                                   const std::string& adjudicator_id, int max_rounds = 2);
AggregationResult aggregate_labels(const AnnotationState& state, int max_rounds = 2);

// Extra annotators for queued documents: candidates who have not yet voted on
// the doc, ordered by a seed- and doc-derived hash. Pure function of its inputs.
AssignmentMap assign_additional_round(const std::vector<std::string>& queue,
                                      const std::vector<AnnotationVote>& votes,
                                      const std::vector<std::string>& candidates,
                                      std::size_t extra_votes, std::uint64_t seed);

struct AgreementReport {
    std::optional<double> alpha;
    std::optional<double> kappa_adjudicator;
    std::size_t n_items = 0;  // items with at least two valid votes
    std::size_t n_votes = 0;  // valid votes on those items
    std::size_t n_kappa = 0;  // items in the kappa comparison
};

// Unsure is treated as missing. Kappa compares non-adjudicated decisions with
// the adjudicator's own valid votes; null when they share no items.
AgreementReport agreement_report(const std::vector<AnnotationVote>& votes,
                                 const std::vector<LabelDecision>& decisions,
                                 const std::string& adjudicator_id);
json to_json(const AgreementReport& r);

struct BalanceRow {
    std::string post_type;
    std::string text_type;
    std::size_t positive = 0;
    std::size_t negative = 0;
    double positive_pct() const {
        auto n = positive + negative;
        return n == 0 ? 0.0 : 100.0 * static_cast<double>(positive) / static_cast<double>(n);
    }
};

// Ground-truth class balance per stratum plus an overall row (last).
std::vector<BalanceRow> class_balance(const std::vector<LabelDecision>& decisions,
                                      const std::vector<corpus::TextDocument>& docs);
std::string class_balance_csv(const std::vector<BalanceRow>& rows);

// ---- quiz -------------------------------------------------------------------

struct QuizItem {
    std::string item_id;
    std::string text;
    bool has_cta = false;
};

struct Quiz {
    std::vector<QuizItem> items;
    double pass_threshold = 0.8;
};

Quiz default_quiz();
Quiz quiz_from_json(const json& j);

struct QuizResult {
    std::size_t correct = 0;
    std::size_t total = 0;
    double score = 0;
    bool passed = false;
};

// Unanswered items count as wrong.
QuizResult grade_quiz(const Quiz& quiz, const std::map<std::string, bool>& answers);

// ---- persistence ------------------------------------------------------------

std::vector<AnnotationVote> read_votes(const std::filesystem::path& path);
void write_decisions(const std::filesystem::path& path, const std::vector<LabelDecision>& decisions);
std::vector<LabelDecision> read_decisions(const std::filesystem::path& path);

}  // namespace ctalab::annotation
