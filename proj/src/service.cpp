#include "ctalab/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <set>

namespace ctalab::service {

using annotation::AnnotationVote;
using annotation::RecordOutcome;
using annotation::VoteValue;

std::string_view to_string(DocStatus s) {
    switch (s) {
        case DocStatus::pending: return "pending";
        case DocStatus::decided: return "decided";
        case DocStatus::awaiting_adjudicator: return "awaiting_adjudicator";
        case DocStatus::unresolved: return "unresolved";
    }
    return "pending";
}

std::string utc_now() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

static int http_status(ErrorKind k) {
    switch (k) {
        case ErrorKind::authorization: return 403;
        case ErrorKind::conflict: return 409;
        case ErrorKind::not_found: return 404;
        case ErrorKind::parse:
        case ErrorKind::invalid_argument: return 400;
        default: return 500;
    }
}

static Reply error_reply(int status, ErrorKind kind, const std::string& msg) {
    return {status, {{"error", {{"kind", to_string(kind)}, {"message", msg}}}}};
}

AnnotationService::AnnotationService(ServiceConfig config, corpus::CorpusStore store, annotation::SamplePlan plan)
    : config_(std::move(config)), store_(std::move(store)), plan_(std::move(plan)) {
    if (config_.roster.empty()) throw Error(ErrorKind::invalid_argument, "annotator roster is empty");
    if (config_.max_rounds < 1) throw Error(ErrorKind::invalid_argument, "max_rounds must be >= 1");
    std::vector<annotation::AnnotatorProfile> profiles;
    std::set<std::string> ids;
    for (const auto& r : config_.roster) {
        if (!ids.insert(r.annotator_id).second)
            throw Error(ErrorKind::invalid_argument, "duplicate annotator " + r.annotator_id + " in roster");
        profiles.push_back({r.annotator_id, r.quiz_passed, r.annotator_id == config_.adjudicator_id, r.native_speaker});
        candidates_.push_back(r.annotator_id);
    }
    if (!config_.adjudicator_id.empty() && !ids.contains(config_.adjudicator_id))
        throw Error(ErrorKind::invalid_argument, "adjudicator " + config_.adjudicator_id + " is not in the roster");

    sampled_ = plan_.all_doc_ids();
    for (const auto& id : sampled_)
        if (!store_.find_document(id)) throw Error(ErrorKind::integrity, "sampled document " + id + " is not in the corpus");

    state_ = annotation::AnnotationState(std::move(profiles), config_.adjudicator_id);
    state_.assign(1, annotation::assign_documents(sampled_, candidates_, config_.votes_per_doc, config_.seed));
    replay();

    if (!config_.votes_log.empty()) {
        if (config_.votes_log.has_parent_path()) std::filesystem::create_directories(config_.votes_log.parent_path());
        votes_out_.open(config_.votes_log, std::ios::app);
        if (!votes_out_) throw Error(ErrorKind::io, "cannot open " + config_.votes_log.string());
    }
    if (!config_.quiz_log.empty()) {
        if (config_.quiz_log.has_parent_path()) std::filesystem::create_directories(config_.quiz_log.parent_path());
        quiz_out_.open(config_.quiz_log, std::ios::app);
        if (!quiz_out_) throw Error(ErrorKind::io, "cannot open " + config_.quiz_log.string());
    }
}

AnnotationService::~AnnotationService() { stop(); }

void AnnotationService::replay() {
    auto corrupt = [](const std::filesystem::path& p, std::size_t line, const std::string& what) {
        return Error(ErrorKind::integrity,
                     "corrupt log " + p.string() + " at line " + std::to_string(line) + ": " + what);
    };
    auto scan = [&](const std::filesystem::path& p, const std::function<void(const json&, std::size_t)>& fn) {
        if (p.empty() || !std::filesystem::exists(p)) return;
        try {
            for_each_jsonl(p, [&](const json& j, std::size_t line) {
                try {
                    fn(j, line);
                } catch (const std::exception& e) {
                    throw corrupt(p, line, e.what());
                }
            });
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::parse) throw Error(ErrorKind::integrity, std::string("corrupt log: ") + e.what());
            throw;
        }
    };
    // quiz passes are monotonic, so replaying them first is order-safe
    scan(config_.quiz_log, [&](const json& j, std::size_t) {
        auto id = j.at("annotator_id").get<std::string>();
        annotation::QuizResult r{j.at("correct").get<std::size_t>(), j.at("total").get<std::size_t>(),
                                 j.at("score").get<double>(), j.at("passed").get<bool>()};
        if (!state_.profile(id)) throw Error(ErrorKind::not_found, "unknown annotator " + id);
        quiz_results_[id] = r;
        if (r.passed) state_.set_quiz_passed(id, true);
    });
    scan(config_.votes_log, [&](const json& j, std::size_t) {
        auto v = annotation::vote_from_json(j);
        if (state_.has_voted(v.doc_id, v.annotator_id, v.round))
            throw Error(ErrorKind::conflict, "repeated vote entry for " + v.doc_id + " by " + v.annotator_id);
        apply_vote(v);
    });
}

void AnnotationService::apply_vote(const AnnotationVote& vote) {
    if (state_.record_vote(vote) == RecordOutcome::recorded) {
        votes_by_doc_[vote.doc_id].push_back(vote);
        advance_rounds(vote.doc_id);
    }
}

int AnnotationService::current_round(const std::string& doc_id) const {
    int r = 0;
    for (const auto& [round, m] : state_.assignments())
        if (m.contains(doc_id)) r = std::max(r, round);
    return r;
}

bool AnnotationService::round_complete(const std::string& doc_id, int round) const {
    auto rit = state_.assignments().find(round);
    if (rit == state_.assignments().end()) return false;
    auto dit = rit->second.find(doc_id);
    if (dit == rit->second.end()) return false;
    return std::all_of(dit->second.begin(), dit->second.end(),
                       [&](const std::string& a) { return state_.has_voted(doc_id, a, round); });
}

void AnnotationService::advance_rounds(const std::string& doc_id) {
    for (;;) {
        int r = current_round(doc_id);
        if (r < 1 || r >= config_.max_rounds || !round_complete(doc_id, r)) return;
        const auto& votes = votes_by_doc_[doc_id];
        annotation::AggregationResult agg;
        try {
            agg = annotation::aggregate_labels(votes, config_.adjudicator_id, config_.max_rounds);
        } catch (const Error&) {
            return;
        }
        if (agg.disagreement_queue.empty()) return;
        auto extra = annotation::assign_additional_round({doc_id}, votes, candidates_, config_.extra_votes,
                                                         config_.seed);
        extra[doc_id];  // an empty round still advances the doc
        state_.assign(r + 1, extra);
    }
}

DocStatus AnnotationService::status_of(const std::string& doc_id) const {
    int r = current_round(doc_id);
    if (!round_complete(doc_id, r)) return DocStatus::pending;
    auto it = votes_by_doc_.find(doc_id);
    static const std::vector<AnnotationVote> none;
    const auto& votes = it == votes_by_doc_.end() ? none : it->second;
    const bool adj_voted_final = !config_.adjudicator_id.empty() &&
                                 state_.has_voted(doc_id, config_.adjudicator_id, config_.max_rounds);
    try {
        auto agg = annotation::aggregate_labels(votes, config_.adjudicator_id, config_.max_rounds);
        if (!agg.decisions.empty()) return DocStatus::decided;
        if (r < config_.max_rounds) return DocStatus::pending;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::unresolved_tie) throw;
    }
    if (config_.adjudicator_id.empty() || adj_voted_final) return DocStatus::unresolved;
    return DocStatus::awaiting_adjudicator;
}

std::vector<AnnotationService::Task> AnnotationService::pending_tasks(const std::string& annotator_id) const {
    std::vector<Task> out;
    std::set<std::string> listed;
    for (const auto& [round, m] : state_.assignments())
        for (const auto& [doc, ids] : m)
            if (std::find(ids.begin(), ids.end(), annotator_id) != ids.end() &&
                !state_.has_voted(doc, annotator_id, round) && listed.insert(doc).second)
                out.push_back({doc, round});
    if (annotator_id == config_.adjudicator_id)
        for (const auto& doc : sampled_)
            if (!listed.contains(doc) && status_of(doc) == DocStatus::awaiting_adjudicator)
                out.push_back({doc, config_.max_rounds});
    return out;
}

std::optional<Reply> AnnotationService::check_annotator(const std::string& annotator_id, const std::string& token,
                                                        bool need_quiz) const {
    auto r = std::find_if(config_.roster.begin(), config_.roster.end(),
                          [&](const RosterEntry& e) { return e.annotator_id == annotator_id; });
    if (annotator_id.empty() || r == config_.roster.end())
        return error_reply(403, ErrorKind::authorization, "unknown annotator '" + annotator_id + "'");
    if (!r->token.empty() && r->token != token)
        return error_reply(403, ErrorKind::authorization, "bad token for annotator " + annotator_id);
    if (need_quiz && !state_.profile(annotator_id)->quiz_passed)
        return error_reply(401, ErrorKind::authorization, "annotator " + annotator_id + " has not passed the quiz");
    return std::nullopt;
}

void AnnotationService::append_line(std::ofstream& out, const json& j) {
    if (!out.is_open()) return;
    out << j.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::io, "failed to append to the event log");
}

Reply AnnotationService::get_quiz() const {
    json items = json::array();
    for (const auto& q : config_.quiz.items) items.push_back({{"item_id", q.item_id}, {"text", q.text}});
    return {200, {{"items", items}, {"pass_threshold", config_.quiz.pass_threshold}}};
}

Reply AnnotationService::post_quiz(const json& body, const std::string& token) {
    std::lock_guard lock(mu_);
    auto id = body.value("annotator_id", std::string{});
    if (auto err = check_annotator(id, token, false)) return *err;
    std::map<std::string, bool> answers;
    const json given = body.value("answers", json::object());
    for (const auto& [item, v] : given.items())
        answers[item] = v.is_boolean() ? v.get<bool>() : annotation::vote_value_from_string(v.get<std::string>()) == VoteValue::positive;
    auto result = annotation::grade_quiz(config_.quiz, answers);
    json entry = {{"annotator_id", id},         {"correct", result.correct}, {"total", result.total},
                  {"score", result.score},      {"passed", result.passed},   {"timestamp", utc_now()}};
    append_line(quiz_out_, entry);
    quiz_results_[id] = result;
    if (result.passed) state_.set_quiz_passed(id, true);
    bool passed = state_.profile(id)->quiz_passed;
    return {200, {{"annotator_id", id}, {"correct", result.correct}, {"total", result.total}, {"score", result.score},
                  {"passed", passed}}};
}

Reply AnnotationService::next_task(const std::string& annotator_id, const std::string& token) {
    std::lock_guard lock(mu_);
    if (auto err = check_annotator(annotator_id, token, true)) return *err;
    auto tasks = pending_tasks(annotator_id);
    std::size_t done = 0;
    for (const auto& v : state_.log()) done += v.annotator_id == annotator_id;
    json progress = {{"done", done}, {"total", done + tasks.size()}};
    if (tasks.empty()) return {200, {{"status", "done"}, {"progress", progress}}};
    const auto& t = tasks.front();
    const auto* doc = store_.find_document(t.doc_id);
    // blinded view: no account or party metadata, no other votes
    return {200,
            {{"status", "task"},
             {"doc_id", t.doc_id},
             {"round", t.round},
             {"text", doc->text},
             {"post_type", to_string(doc->post_type)},
             {"text_type", to_string(doc->text_type)},
             {"progress", progress}}};
}

Reply AnnotationService::post_annotation(const json& body, const std::string& token) {
    std::lock_guard lock(mu_);
    AnnotationVote v;
    try {
        v.doc_id = body.at("doc_id").get<std::string>();
        v.annotator_id = body.at("annotator_id").get<std::string>();
        const auto& val = body.at("value");
        v.value = val.is_boolean() ? (val.get<bool>() ? VoteValue::positive : VoteValue::negative)
                  : val.is_null()  ? VoteValue::unsure
                                   : annotation::vote_value_from_string(val.get<std::string>());
    } catch (const std::exception& e) {
        return error_reply(400, ErrorKind::parse, std::string("malformed annotation: ") + e.what());
    }
    if (auto err = check_annotator(v.annotator_id, token, false)) return *err;
    if (body.contains("round")) {
        v.round = body.at("round").get<int>();
    } else {
        // the open task's round, else the latest round already voted (so a
        // retried submission is recognized as a duplicate)
        std::optional<int> r;
        for (const auto& t : pending_tasks(v.annotator_id))
            if (t.doc_id == v.doc_id) r = t.round;
        if (!r)
            for (const auto& old : state_.log())
                if (old.doc_id == v.doc_id && old.annotator_id == v.annotator_id) r = std::max(r.value_or(1), old.round);
        v.round = r.value_or(1);
    }
    v.timestamp = utc_now();
    try {
        auto outcome = state_.record_vote(v);
        if (outcome == RecordOutcome::duplicate)
            return {200, {{"status", "duplicate"}, {"noop", true}, {"doc_id", v.doc_id}, {"round", v.round}}};
        append_line(votes_out_, annotation::to_json(v));
        votes_by_doc_[v.doc_id].push_back(v);
        advance_rounds(v.doc_id);
    } catch (const Error& e) {
        return error_reply(http_status(e.kind()), e.kind(), e.what());
    }
    return {200, {{"status", "recorded"}, {"noop", false}, {"doc_id", v.doc_id}, {"round", v.round}}};
}

Reply AnnotationService::progress(const std::optional<std::string>& annotator_id) const {
    std::lock_guard lock(mu_);
    if (annotator_id) {
        if (!state_.profile(*annotator_id))
            return error_reply(404, ErrorKind::not_found, "unknown annotator " + *annotator_id);
        std::size_t done = 0;
        for (const auto& v : state_.log()) done += v.annotator_id == *annotator_id;
        auto pending = pending_tasks(*annotator_id).size();
        return {200, {{"annotator_id", *annotator_id}, {"done", done}, {"total", done + pending}}};
    }
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> strata;  // index -> (docs, decided)
    std::map<std::string, std::size_t> by_status;
    std::size_t queue = 0;
    for (const auto& id : sampled_) {
        auto s = status_of(id);
        ++by_status[std::string(to_string(s))];
        auto idx = stratum_index(store_.find_document(id)->stratum());
        ++strata[idx].first;
        strata[idx].second += s == DocStatus::decided;
        queue += s == DocStatus::awaiting_adjudicator || (s == DocStatus::pending && current_round(id) > 1);
    }
    json per_stratum = json::array();
    for (const auto& [idx, c] : strata)
        per_stratum.push_back({{"post_type", to_string(kStrata[idx].post_type)},
                               {"text_type", to_string(kStrata[idx].text_type)},
                               {"docs", c.first},
                               {"decided", c.second}});
    json annotators = json::object();
    for (const auto& p : state_.profiles()) {
        std::size_t done = 0;
        for (const auto& v : state_.log()) done += v.annotator_id == p.annotator_id;
        annotators[p.annotator_id] = {{"done", done}, {"pending", pending_tasks(p.annotator_id).size()},
                                      {"quiz_passed", p.quiz_passed}};
    }
    return {200,
            {{"sampled", sampled_.size()},
             {"votes", state_.log().size()},
             {"decided", by_status["decided"]},
             {"pending", by_status["pending"]},
             {"awaiting_adjudicator", by_status["awaiting_adjudicator"]},
             {"unresolved", by_status["unresolved"]},
             {"disagreement_queue", queue},
             {"per_stratum", per_stratum},
             {"annotators", annotators}}};
}

Reply AnnotationService::admin_agreement(const std::string& admin_token) const {
    std::lock_guard lock(mu_);
    if (!config_.admin_token.empty() && admin_token != config_.admin_token)
        return error_reply(401, ErrorKind::authorization, "admin token required");
    std::vector<AnnotationVote> decided_votes;
    std::size_t queue = 0, decided = 0;
    for (const auto& id : sampled_) {
        auto s = status_of(id);
        queue += s == DocStatus::awaiting_adjudicator || (s == DocStatus::pending && current_round(id) > 1);
        if (s != DocStatus::decided) continue;
        ++decided;
        const auto& vs = votes_by_doc_.at(id);
        decided_votes.insert(decided_votes.end(), vs.begin(), vs.end());
    }
    auto decisions = annotation::aggregate_labels(decided_votes, config_.adjudicator_id, config_.max_rounds).decisions;
    json body = {{"alpha", nullptr}, {"kappa", nullptr}, {"n_items", 0}, {"n_votes", 0}, {"n_kappa", 0}};
    try {
        auto r = annotation::agreement_report(state_.log(), decisions, config_.adjudicator_id);
        body["alpha"] = r.alpha ? json(*r.alpha) : json(nullptr);
        body["kappa"] = r.kappa_adjudicator ? json(*r.kappa_adjudicator) : json(nullptr);
        body["n_items"] = r.n_items;
        body["n_votes"] = r.n_votes;
        body["n_kappa"] = r.n_kappa;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::undefined_agreement) throw;
    }
    body["decided"] = decided;
    body["sampled"] = sampled_.size();
    body["disagreement_queue"] = queue;
    return {200, body};
}

json AnnotationService::snapshot() const {
    std::lock_guard lock(mu_);
    json profiles = json::array();
    for (const auto& p : state_.profiles()) profiles.push_back({{"annotator_id", p.annotator_id}, {"quiz_passed", p.quiz_passed}});
    json assignments = json::object();
    for (const auto& [round, m] : state_.assignments()) assignments[std::to_string(round)] = m;
    json votes = json::array();
    for (const auto& v : state_.log()) votes.push_back(annotation::to_json(v));
    json statuses = json::object();
    for (const auto& id : sampled_) statuses[id] = to_string(status_of(id));
    json quiz = json::object();
    for (const auto& [id, r] : quiz_results_) quiz[id] = {{"correct", r.correct}, {"total", r.total}, {"passed", r.passed}};
    return {{"profiles", profiles}, {"assignments", assignments}, {"votes", votes}, {"statuses", statuses}, {"quiz", quiz}};
}

annotation::AnnotationState AnnotationService::state_copy() const {
    std::lock_guard lock(mu_);
    return state_;
}

static std::string bearer(const httplib::Request& req) {
    auto h = req.get_header_value("Authorization");
    if (h.rfind("Bearer ", 0) == 0) return h.substr(7);
    return req.get_param_value("token");
}

void AnnotationService::install_routes() {
    auto& s = *server_;
    auto send = [](httplib::Response& res, const Reply& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    auto parse_body = [](const httplib::Request& req) { return json::parse(req.body); };
    auto token = [](const httplib::Request& req) { return req.get_header_value("X-Annotator-Token"); };

    s.Get("/api/quiz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_quiz()); });
    s.Post("/api/quiz", [this, send, parse_body, token](const httplib::Request& req, httplib::Response& res) {
        send(res, post_quiz(parse_body(req), token(req)));
    });
    s.Get("/api/tasks/next", [this, send, token](const httplib::Request& req, httplib::Response& res) {
        send(res, next_task(req.get_param_value("annotator"), token(req)));
    });
    s.Post("/api/annotations", [this, send, parse_body, token](const httplib::Request& req, httplib::Response& res) {
        send(res, post_annotation(parse_body(req), token(req)));
    });
    s.Get("/api/progress", [this, send](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> who;
        if (req.has_param("annotator")) who = req.get_param_value("annotator");
        send(res, progress(who));
    });
    s.Get("/api/admin/agreement", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, admin_agreement(bearer(req)));
    });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        Reply r;
        try {
            std::rethrow_exception(ep);
        } catch (const json::exception& e) {
            r = error_reply(400, ErrorKind::parse, e.what());
        } catch (const Error& e) {
            r = error_reply(http_status(e.kind()), e.kind(), e.what());
        } catch (const std::exception& e) {
            r = error_reply(500, ErrorKind::io, e.what());
        }
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    });
    if (config_.ui_dir && std::filesystem::is_directory(*config_.ui_dir))
        s.set_mount_point("/ui", config_.ui_dir->string());
}

int AnnotationService::start(const std::string& host, int port) {
    if (server_) throw Error(ErrorKind::invalid_argument, "service already running");
    server_ = std::make_unique<httplib::Server>();
    // no SO_REUSEPORT: a second service on a busy port must fail to bind
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    install_routes();
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        server_.reset();
        throw Error(ErrorKind::io, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void AnnotationService::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
    server_.reset();
    std::lock_guard lock(mu_);
    if (votes_out_.is_open()) votes_out_.flush();
    if (quiz_out_.is_open()) quiz_out_.flush();
}

}  // namespace ctalab::service
