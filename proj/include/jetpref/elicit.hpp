#pragma once

#include "jetpref/error.hpp"
#include "jetpref/experiment.hpp"
#include "jetpref/serialization.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace jetpref {

/// Unknown or already-resolved query id. Mapped to HTTP 409.
class ConflictError : public StateError {
public:
    using StateError::StateError;
};

enum class QueryStatus { Pending, Answered, Skipped };
std::string_view query_status_name(QueryStatus s);
QueryStatus parse_query_status(std::string_view name);

struct PendingQuery {
    int id = -1;
    int i = -1;  // first
    int j = -1;  // second
    std::int64_t issued_at = 0;  // ms since the Unix epoch
    int episode = 0;
    QueryStatus status = QueryStatus::Pending;
    std::string choice;  // first | second | skip once resolved
};

/// Online loop driven by human labels, persisted to a data directory after
/// every transition so a restarted service resumes where it stopped.
/// Thread-safe: reads share a lock; submissions and loop transitions are
/// serialized.
class ElicitationSession {
public:
    /// Resumes from data_dir when it holds a session (its config snapshot wins
    /// over cfg); otherwise starts a new run and issues the first queries.
    ElicitationSession(ExperimentConfig cfg, std::filesystem::path data_dir,
                       std::shared_ptr<const PlanningDynamics> dynamics = nullptr);

    /// Oldest pending query and both trajectories; empty when none is pending.
    std::optional<Json> next_pair() const;
    /// choice: first | second | skip. Throws ConflictError for unknown or
    /// resolved ids, InputError for a bad choice. When the episode's queries
    /// are all resolved the loop re-fits and runs until new queries exist.
    Json submit(int query_id, std::string_view choice);
    /// Throws InputError for an unknown id.
    Json trajectory(int id) const;
    Json model_state() const;
    Json status() const;

    std::vector<PendingQuery> queries() const;
    /// Copy of the current graph.
    PreferenceGraph graph() const;
    const std::filesystem::path& data_dir() const { return dir_; }

private:
    void advance();
    void issue_queries();
    void persist() const;
    void load();

    mutable std::shared_mutex mu_;
    std::filesystem::path dir_;
    std::unique_ptr<OnlineLoop> loop_;
    std::vector<PendingQuery> queries_;
    int next_query_id_ = 0;
};

/// HTTP facade: GET /api/pair, POST /api/preference, GET /api/trajectory/{id},
/// GET /api/model, GET /api/status; optional static files at "/".
class ElicitServer {
public:
    explicit ElicitServer(ElicitationSession& session, std::filesystem::path static_dir = {});
    ~ElicitServer();
    ElicitServer(const ElicitServer&) = delete;
    ElicitServer& operator=(const ElicitServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port, throws Error on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Call after bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace jetpref
