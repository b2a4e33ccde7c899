#include "ctalab/annotation.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <unordered_map>

#include "ctalab/metrics.hpp"

namespace ctalab::annotation {

std::string_view to_string(VoteValue v) {
    switch (v) {
        case VoteValue::positive: return "positive";
        case VoteValue::negative: return "negative";
        case VoteValue::unsure: return "unsure";
    }
    return "unsure";
}

VoteValue vote_value_from_string(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "positive" || lower == "true") return VoteValue::positive;
    if (lower == "negative" || lower == "false") return VoteValue::negative;
    if (lower == "unsure" || lower == "na") return VoteValue::unsure;
    throw Error(ErrorKind::parse, "unknown vote value '" + std::string(s) + "'");
}

json to_json(const AnnotationVote& v) {
    return {{"doc_id", v.doc_id},
            {"annotator_id", v.annotator_id},
            {"value", to_string(v.value)},
            {"round", v.round},
            {"timestamp", v.timestamp}};
}

AnnotationVote vote_from_json(const json& j) {
    AnnotationVote v;
    v.doc_id = j.at("doc_id").get<std::string>();
    v.annotator_id = j.at("annotator_id").get<std::string>();
    const auto& val = j.at("value");
    if (val.is_boolean()) v.value = val.get<bool>() ? VoteValue::positive : VoteValue::negative;
    else if (val.is_null()) v.value = VoteValue::unsure;
    else v.value = vote_value_from_string(val.get<std::string>());
    v.round = j.value("round", 1);
    v.timestamp = j.value("timestamp", std::string{});
    if (v.round < 1) throw Error(ErrorKind::parse, "round must be >= 1");
    return v;
}

// ---- sampling ---------------------------------------------------------------

std::vector<std::string> SamplePlan::all_doc_ids() const {
    std::vector<std::string> out;
    for (const auto& [s, ids] : selected) out.insert(out.end(), ids.begin(), ids.end());
    return out;
}

std::size_t SamplePlan::size() const {
    std::size_t n = 0;
    for (const auto& [s, ids] : selected) n += ids.size();
    return n;
}

static std::string stratum_name(std::size_t idx) {
    auto s = kStrata[idx];
    return std::string(to_string(s.post_type)) + "/" + std::string(to_string(s.text_type));
}

SamplePlan draw_stratified_sample(const std::vector<corpus::TextDocument>& docs,
                                  const Fraction& fraction, std::uint64_t seed) {
    if (fraction.num <= 0 || fraction.den <= 0 || fraction.num > fraction.den)
        throw Error(ErrorKind::invalid_argument, "sample fraction must lie in (0, 1]");
    if (docs.empty()) throw Error(ErrorKind::empty_input, "cannot sample an empty corpus");
    std::map<std::size_t, std::vector<std::string>> by_stratum;
    for (const auto& d : docs) by_stratum[stratum_index(d.stratum())].push_back(d.doc_id);
    SamplePlan plan;
    plan.seed = seed;
    plan.fraction = fraction;
    for (auto& [idx, ids] : by_stratum) {
        std::sort(ids.begin(), ids.end());
        std::mt19937_64 rng(mix_seed(seed, "sample:" + stratum_name(idx)));
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(fraction.apply_half_up(ids.size()));
        if (!ids.empty()) plan.selected[idx] = std::move(ids);
    }
    return plan;
}

json to_json(const SamplePlan& plan) {
    json strata = json::array();
    for (const auto& [idx, ids] : plan.selected)
        strata.push_back({{"post_type", to_string(kStrata[idx].post_type)},
                          {"text_type", to_string(kStrata[idx].text_type)},
                          {"doc_ids", ids}});
    return {{"seed", plan.seed}, {"fraction", plan.fraction.str()}, {"strata", strata}};
}

SamplePlan sample_plan_from_json(const json& j) {
    SamplePlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.fraction = Fraction::parse(j.at("fraction").get<std::string>());
    for (const auto& s : j.at("strata")) {
        Stratum st{post_type_from_string(s.at("post_type").get<std::string>()),
                   text_type_from_string(s.at("text_type").get<std::string>())};
        plan.selected[stratum_index(st)] = s.at("doc_ids").get<std::vector<std::string>>();
    }
    return plan;
}

// ---- assignment -------------------------------------------------------------

AssignmentMap assign_documents(const std::vector<std::string>& doc_ids,
                               std::vector<std::string> candidates, std::size_t k,
                               std::uint64_t seed) {
    if (k == 0) throw Error(ErrorKind::invalid_argument, "k must be positive");
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    if (candidates.size() < k)
        throw Error(ErrorKind::capacity, "need " + std::to_string(k) + " eligible annotators, have " +
                                             std::to_string(candidates.size()));
    std::vector<std::string> docs = doc_ids;
    std::sort(docs.begin(), docs.end());
    std::mt19937_64 rng_a(mix_seed(seed, "assign:annotators"));
    std::shuffle(candidates.begin(), candidates.end(), rng_a);
    std::mt19937_64 rng_d(mix_seed(seed, "assign:docs"));
    std::shuffle(docs.begin(), docs.end(), rng_d);

    // Cyclic dealing: consecutive slots mod m are distinct for k <= m and the
    // per-annotator load differs by at most one.
    AssignmentMap out;
    const std::size_t m = candidates.size();
    for (std::size_t i = 0; i < docs.size(); ++i) {
        auto& slot = out[docs[i]];
        for (std::size_t j = 0; j < k; ++j) slot.push_back(candidates[(i * k + j) % m]);
    }
    return out;
}

AssignmentMap assign_documents(const SamplePlan& plan, const std::vector<AnnotatorProfile>& annotators,
                               std::size_t k, std::uint64_t seed) {
    std::vector<std::string> eligible;
    for (const auto& a : annotators)
        if (a.quiz_passed) eligible.push_back(a.annotator_id);
    return assign_documents(plan.all_doc_ids(), std::move(eligible), k, seed);
}

// ---- state ------------------------------------------------------------------

AnnotationState::AnnotationState(std::vector<AnnotatorProfile> profiles, std::string adjudicator_id)
    : profiles_(std::move(profiles)), adjudicator_id_(std::move(adjudicator_id)) {}

void AnnotationState::assign(int round, const AssignmentMap& assignments) {
    auto& target = assignments_[round];
    for (const auto& [doc, ids] : assignments) {
        auto& slot = target[doc];
        for (const auto& id : ids)
            if (std::find(slot.begin(), slot.end(), id) == slot.end()) slot.push_back(id);
    }
}

void AnnotationState::set_quiz_passed(const std::string& annotator_id, bool passed) {
    for (auto& p : profiles_)
        if (p.annotator_id == annotator_id) {
            p.quiz_passed = passed;
            return;
        }
    throw Error(ErrorKind::not_found, "unknown annotator " + annotator_id);
}

const AnnotatorProfile* AnnotationState::profile(const std::string& id) const {
    for (const auto& p : profiles_)
        if (p.annotator_id == id) return &p;
    return nullptr;
}

bool AnnotationState::is_assigned(const std::string& doc_id, const std::string& annotator_id,
                                  int round) const {
    auto r = assignments_.find(round);
    if (r == assignments_.end()) return false;
    auto d = r->second.find(doc_id);
    if (d == r->second.end()) return false;
    return std::find(d->second.begin(), d->second.end(), annotator_id) != d->second.end();
}

std::set<std::string> AnnotationState::assigned_docs() const {
    std::set<std::string> out;
    for (const auto& [round, m] : assignments_)
        for (const auto& [doc, ids] : m) out.insert(doc);
    return out;
}

bool AnnotationState::has_voted(const std::string& doc_id, const std::string& annotator_id,
                                int round) const {
    return by_key_.contains({doc_id, annotator_id, round});
}

std::vector<AnnotationVote> AnnotationState::votes_for(const std::string& doc_id) const {
    std::vector<AnnotationVote> out;
    for (const auto& v : log_)
        if (v.doc_id == doc_id) out.push_back(v);
    return out;
}

RecordOutcome AnnotationState::record_vote(const AnnotationVote& vote) {
    if (vote.round < 1) throw Error(ErrorKind::invalid_argument, "round must be >= 1");
    const auto* p = profile(vote.annotator_id);
    if (p == nullptr)
        throw Error(ErrorKind::authorization, "unknown annotator " + vote.annotator_id);
    if (!p->quiz_passed)
        throw Error(ErrorKind::authorization, "annotator " + vote.annotator_id + " has not passed the quiz");
    bool adjudicator = !adjudicator_id_.empty() && vote.annotator_id == adjudicator_id_ &&
                       assigned_docs().contains(vote.doc_id);
    if (!adjudicator && !is_assigned(vote.doc_id, vote.annotator_id, vote.round))
        throw Error(ErrorKind::authorization, "annotator " + vote.annotator_id + " is not assigned to " +
                                                  vote.doc_id + " in round " + std::to_string(vote.round));
    auto key = std::make_tuple(vote.doc_id, vote.annotator_id, vote.round);
    if (auto it = by_key_.find(key); it != by_key_.end()) {
        if (log_[it->second].value == vote.value) return RecordOutcome::duplicate;
        throw Error(ErrorKind::conflict, "annotator " + vote.annotator_id + " already voted " +
                                             std::string(to_string(log_[it->second].value)) + " on " +
                                             vote.doc_id + " in round " + std::to_string(vote.round));
    }
    by_key_.emplace(std::move(key), log_.size());
    log_.push_back(vote);
    return RecordOutcome::recorded;
}

RecordOutcome record_vote(const AnnotationVote& vote, AnnotationState& state) {
    return state.record_vote(vote);
}

// ---- aggregation ------------------------------------------------------------

std::string_view to_string(DecisionMethod m) {
    switch (m) {
        case DecisionMethod::unanimous: return "unanimous";
        case DecisionMethod::majority: return "majority";
        case DecisionMethod::adjudicated: return "adjudicated";
    }
    return "majority";
}

json to_json(const LabelDecision& d) {
    return {{"doc_id", d.doc_id},
            {"label", to_string(d.label)},
            {"valid_votes", {{"positive", d.positive_votes}, {"negative", d.negative_votes}}},
            {"method", to_string(d.method)},
            {"rounds_used", d.rounds_used}};
}

LabelDecision decision_from_json(const json& j) {
    LabelDecision d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.label = label_from_json(j.at("label"));
    if (auto it = j.find("valid_votes"); it != j.end()) {
        d.positive_votes = it->value("positive", std::size_t{0});
        d.negative_votes = it->value("negative", std::size_t{0});
    }
    auto m = j.value("method", std::string("majority"));
    if (m == "unanimous") d.method = DecisionMethod::unanimous;
    else if (m == "majority") d.method = DecisionMethod::majority;
    else if (m == "adjudicated") d.method = DecisionMethod::adjudicated;
    else throw Error(ErrorKind::parse, "unknown decision method '" + m + "'");
    d.rounds_used = j.value("rounds_used", 1);
    return d;
}

AggregationResult aggregate_labels(const std::vector<AnnotationVote>& votes,
                                   const std::string& adjudicator_id, int max_rounds) {
    if (max_rounds < 1) throw Error(ErrorKind::invalid_argument, "max_rounds must be >= 1");
    std::map<std::string, std::vector<const AnnotationVote*>> by_doc;
    for (const auto& v : votes) by_doc[v.doc_id].push_back(&v);

    AggregationResult out;
    std::vector<std::string> unresolved;
    for (const auto& [doc, vs] : by_doc) {
        LabelDecision d;
        d.doc_id = doc;
        const AnnotationVote* adj = nullptr;
        for (const auto* v : vs) {
            d.rounds_used = std::max(d.rounds_used, v->round);
            if (v->value == VoteValue::positive) ++d.positive_votes;
            if (v->value == VoteValue::negative) ++d.negative_votes;
            if (v->annotator_id == adjudicator_id && v->value != VoteValue::unsure &&
                (adj == nullptr || v->round > adj->round))
                adj = v;
        }
        auto pos = d.positive_votes, neg = d.negative_votes;
        if (pos != neg) {
            d.label = pos > neg ? Label::positive : Label::negative;
            d.method = (pos == 0 || neg == 0) ? DecisionMethod::unanimous : DecisionMethod::majority;
        } else if (d.rounds_used < max_rounds) {
            out.disagreement_queue.push_back(doc);
            continue;
        } else if (adj != nullptr) {
            d.label = adj->value == VoteValue::positive ? Label::positive : Label::negative;
            d.method = DecisionMethod::adjudicated;
        } else {
            unresolved.push_back(doc);
            continue;
        }
        out.decisions.push_back(std::move(d));
    }
    if (!unresolved.empty()) {
        std::string ids;
        for (const auto& id : unresolved) ids += (ids.empty() ? "" : ", ") + id;
        throw Error(ErrorKind::unresolved_tie, "tied documents without an adjudicator vote: " + ids);
    }
    return out;
}

AggregationResult aggregate_labels(const AnnotationState& state, int max_rounds) {
    return aggregate_labels(state.log(), state.adjudicator_id(), max_rounds);
}

AssignmentMap assign_additional_round(const std::vector<std::string>& queue,
                                      const std::vector<AnnotationVote>& votes,
                                      const std::vector<std::string>& candidates,
                                      std::size_t extra_votes, std::uint64_t seed) {
    std::map<std::string, std::set<std::string>> voted;
    for (const auto& v : votes) voted[v.doc_id].insert(v.annotator_id);
    AssignmentMap out;
    for (const auto& doc : queue) {
        std::vector<std::pair<std::uint64_t, std::string>> pool;
        auto doc_seed = mix_seed(seed, "round:" + doc);
        for (const auto& c : candidates)
            if (!voted[doc].contains(c)) pool.emplace_back(fnv1a64(c, doc_seed), c);
        std::sort(pool.begin(), pool.end());
        if (pool.size() < extra_votes)
            log_warning("only " + std::to_string(pool.size()) + " fresh annotators available for " + doc);
        auto& slot = out[doc];
        for (std::size_t i = 0; i < std::min(extra_votes, pool.size()); ++i) slot.push_back(pool[i].second);
    }
    return out;
}

AgreementReport agreement_report(const std::vector<AnnotationVote>& votes,
                                 const std::vector<LabelDecision>& decisions,
                                 const std::string& adjudicator_id) {
    // latest valid vote per (doc, coder)
    std::map<std::string, std::map<std::string, const AnnotationVote*>> latest;
    std::set<std::string> coders;
    for (const auto& v : votes) {
        if (v.value == VoteValue::unsure) continue;
        auto& slot = latest[v.doc_id][v.annotator_id];
        if (slot == nullptr || v.round > slot->round) slot = &v;
        coders.insert(v.annotator_id);
    }
    std::vector<std::string> coder_list(coders.begin(), coders.end());
    metrics::VoteMatrix matrix;
    AgreementReport r;
    for (const auto& [doc, by_coder] : latest) {
        std::vector<std::optional<int>> row(coder_list.size());
        for (std::size_t c = 0; c < coder_list.size(); ++c)
            if (auto it = by_coder.find(coder_list[c]); it != by_coder.end())
                row[c] = it->second->value == VoteValue::positive ? 1 : 0;
        if (by_coder.size() >= 2) {
            ++r.n_items;
            r.n_votes += by_coder.size();
        }
        matrix.push_back(std::move(row));
    }
    r.alpha = metrics::krippendorff_alpha(matrix);

    std::vector<Label> majority, adjudicator;
    for (const auto& d : decisions) {
        if (d.method == DecisionMethod::adjudicated) continue;
        auto doc = latest.find(d.doc_id);
        if (doc == latest.end()) continue;
        auto it = doc->second.find(adjudicator_id);
        if (it == doc->second.end()) continue;
        majority.push_back(d.label);
        adjudicator.push_back(it->second->value == VoteValue::positive ? Label::positive : Label::negative);
    }
    r.n_kappa = majority.size();
    if (!majority.empty()) r.kappa_adjudicator = metrics::cohens_kappa(majority, adjudicator);
    return r;
}

json to_json(const AgreementReport& r) {
    json j = {{"n_items", r.n_items}, {"n_votes", r.n_votes}, {"n_kappa", r.n_kappa}};
    j["alpha"] = r.alpha ? json(*r.alpha) : json(nullptr);
    j["kappa_adjudicator"] = r.kappa_adjudicator ? json(*r.kappa_adjudicator) : json(nullptr);
    return j;
}

std::vector<BalanceRow> class_balance(const std::vector<LabelDecision>& decisions,
                                      const std::vector<corpus::TextDocument>& docs) {
    std::unordered_map<std::string, const corpus::TextDocument*> index;
    for (const auto& d : docs) index.emplace(d.doc_id, &d);
    std::vector<BalanceRow> rows(std::size(kStrata));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].post_type = to_string(kStrata[i].post_type);
        rows[i].text_type = to_string(kStrata[i].text_type);
    }
    BalanceRow overall{"overall", "overall"};
    for (const auto& d : decisions) {
        auto it = index.find(d.doc_id);
        if (it == index.end()) throw Error(ErrorKind::not_found, "decision for unknown document " + d.doc_id);
        auto& row = rows[stratum_index(it->second->stratum())];
        (d.label == Label::positive ? row.positive : row.negative)++;
        (d.label == Label::positive ? overall.positive : overall.negative)++;
    }
    std::erase_if(rows, [](const BalanceRow& r) { return r.positive + r.negative == 0; });
    rows.push_back(overall);
    return rows;
}

std::string class_balance_csv(const std::vector<BalanceRow>& rows) {
    std::string out = "post_type,text_type,positive,positive_pct,negative\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.2f", r.positive_pct());
        out += r.post_type + "," + r.text_type + "," + std::to_string(r.positive) + "," + buf + "," +
               std::to_string(r.negative) + "\n";
    }
    return out;
}

// ---- quiz -------------------------------------------------------------------

Quiz default_quiz() {
    Quiz q;
    q.items = {
        {"q1", "Am Sonntag beide Stimmen für die SPD!", true},
        {"q2", "Wir waren heute in Hamburg unterwegs und haben viele Gespräche geführt.", false},
        {"q3", "Alle Infos zu unserem Programm findet ihr auf unserer Website.", true},
        {"q4", "Die Energiewende braucht endlich mehr Tempo.", false},
        {"q5", "Schreibt uns eure Fragen in die Kommentare!", true},
        {"q6", "Gestern Abend fand das TV-Triell statt.", false},
    };
    q.pass_threshold = 0.8;
    return q;
}

Quiz quiz_from_json(const json& j) {
    Quiz q;
    q.pass_threshold = j.value("pass_threshold", 0.8);
    for (const auto& it : j.at("items"))
        q.items.push_back({it.at("item_id").get<std::string>(), it.at("text").get<std::string>(),
                           it.at("has_cta").get<bool>()});
    if (q.items.size() < 5) throw Error(ErrorKind::invalid_argument, "a quiz needs at least five items");
    if (q.pass_threshold <= 0 || q.pass_threshold > 1)
        throw Error(ErrorKind::invalid_argument, "quiz pass threshold must lie in (0, 1]");
    return q;
}

QuizResult grade_quiz(const Quiz& quiz, const std::map<std::string, bool>& answers) {
    QuizResult r;
    r.total = quiz.items.size();
    for (const auto& item : quiz.items) {
        auto it = answers.find(item.item_id);
        if (it != answers.end() && it->second == item.has_cta) ++r.correct;
    }
    r.score = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
    r.passed = r.total > 0 && r.score + 1e-12 >= quiz.pass_threshold;
    return r;
}

// ---- persistence ------------------------------------------------------------

std::vector<AnnotationVote> read_votes(const std::filesystem::path& path) {
    std::vector<AnnotationVote> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            out.push_back(vote_from_json(j));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::parse, path.filename().string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

void write_decisions(const std::filesystem::path& path, const std::vector<LabelDecision>& decisions) {
    std::vector<json> rows;
    for (const auto& d : decisions) rows.push_back(to_json(d));
    write_jsonl(path, rows);
}

std::vector<LabelDecision> read_decisions(const std::filesystem::path& path) {
    std::vector<LabelDecision> out;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            out.push_back(decision_from_json(j));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::parse, path.filename().string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

}  // namespace ctalab::annotation
