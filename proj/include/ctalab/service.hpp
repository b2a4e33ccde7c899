#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ctalab/annotation.hpp"
#include "ctalab/corpus.hpp"

namespace httplib {
class Server;
}

namespace ctalab::service {

struct RosterEntry {
    std::string annotator_id;
    std::string token;  // empty: no token check
    bool quiz_passed = false;
    bool native_speaker = true;
};

struct ServiceConfig {
    std::vector<RosterEntry> roster;
    std::string adjudicator_id;
    std::string admin_token;  // empty: admin endpoints open
    std::size_t votes_per_doc = 3;
    int max_rounds = 2;
    std::size_t extra_votes = 2;
    std::uint64_t seed = 0;
    annotation::Quiz quiz = annotation::default_quiz();
    std::filesystem::path votes_log;
    std::filesystem::path quiz_log;
    std::optional<std::filesystem::path> ui_dir;
};

// Result of an API call: HTTP status plus JSON body.
struct Reply {
    int status = 200;
    json body;
};

enum class DocStatus { pending, decided, awaiting_adjudicator, unresolved };

// Annotation workflow state behind the HTTP API. Every mutation is appended to
// the vote or quiz log under one writer lock before it is acknowledged, and a
// restart replays both logs (quiz results first) to rebuild the state.
class AnnotationService {
public:
    AnnotationService(ServiceConfig config, corpus::CorpusStore store, annotation::SamplePlan plan);
    ~AnnotationService();

    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    Reply get_quiz() const;
    Reply post_quiz(const json& body, const std::string& token = {});
    Reply next_task(const std::string& annotator_id, const std::string& token = {});
    Reply post_annotation(const json& body, const std::string& token = {});
    Reply progress(const std::optional<std::string>& annotator_id = std::nullopt) const;
    Reply admin_agreement(const std::string& admin_token = {}) const;

    // Everything replay must reproduce.
    json snapshot() const;
    annotation::AnnotationState state_copy() const;

    // Binds immediately (port 0 picks a free port) and serves on a background
    // thread. Returns the bound port.
    int start(const std::string& host, int port);
    void stop();

private:
    struct Task {
        std::string doc_id;
        int round = 1;
    };

    void replay();
    void apply_vote(const annotation::AnnotationVote& vote);
    void advance_rounds(const std::string& doc_id);
    int current_round(const std::string& doc_id) const;
    bool round_complete(const std::string& doc_id, int round) const;
    DocStatus status_of(const std::string& doc_id) const;
    std::vector<Task> pending_tasks(const std::string& annotator_id) const;
    std::optional<Reply> check_annotator(const std::string& annotator_id, const std::string& token,
                                         bool need_quiz) const;
    void append_line(std::ofstream& out, const json& j);
    void install_routes();

    ServiceConfig config_;
    corpus::CorpusStore store_;
    annotation::SamplePlan plan_;
    std::vector<std::string> sampled_;
    std::vector<std::string> candidates_;
    annotation::AnnotationState state_;
    std::map<std::string, std::vector<annotation::AnnotationVote>> votes_by_doc_;
    std::map<std::string, annotation::QuizResult> quiz_results_;

    mutable std::mutex mu_;
    std::ofstream votes_out_;
    std::ofstream quiz_out_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

std::string_view to_string(DocStatus s);
std::string utc_now();

}  // namespace ctalab::service
