#include "jetpref/elicit.hpp"

#include "jetpref/config.hpp"
#include "jetpref/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>

namespace jetpref {

namespace {

constexpr int kStateVersion = 1;

std::int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

Json query_json(const PendingQuery& q) {
    return Json{{"id", q.id},       {"i", q.i},
                {"j", q.j},         {"issued_at", q.issued_at},
                {"episode", q.episode}, {"status", query_status_name(q.status)},
                {"choice", q.choice}};
}

PendingQuery query_from_json(const Json& j) {
    PendingQuery q;
    q.id = j.at("id").get<int>();
    q.i = j.at("i").get<int>();
    q.j = j.at("j").get<int>();
    q.issued_at = j.at("issued_at").get<std::int64_t>();
    q.episode = j.at("episode").get<int>();
    q.status = parse_query_status(j.at("status").get<std::string>());
    q.choice = j.at("choice").get<std::string>();
    return q;
}

Json record_json(const EpisodeRecord& r) {
    return Json{{"episode", r.episode},       {"trajectory_id", r.trajectory_id}, {"online_return", r.online_return},
                {"edges", r.edges},           {"leaves", r.leaves},               {"loss_count", r.loss_count},
                {"loss_fraction", r.loss_fraction}, {"checkpoint", r.checkpoint}};
}

EpisodeRecord record_from_json(const Json& j) {
    EpisodeRecord r;
    r.episode = j.at("episode").get<int>();
    r.trajectory_id = j.at("trajectory_id").get<int>();
    r.online_return = j.at("online_return").get<double>();
    r.edges = j.at("edges").get<int>();
    r.leaves = j.at("leaves").get<int>();
    r.loss_count = j.at("loss_count").get<int>();
    r.loss_fraction = j.at("loss_fraction").get<double>();
    r.checkpoint = j.at("checkpoint").get<std::string>();
    return r;
}

}  // namespace

std::string_view query_status_name(QueryStatus s) {
    switch (s) {
        case QueryStatus::Pending: return "pending";
        case QueryStatus::Answered: return "answered";
        case QueryStatus::Skipped: return "skipped";
    }
    return "?";
}

QueryStatus parse_query_status(std::string_view name) {
    if (name == "pending") return QueryStatus::Pending;
    if (name == "answered") return QueryStatus::Answered;
    if (name == "skipped") return QueryStatus::Skipped;
    throw InputError("unknown query status '" + std::string(name) + "'");
}

ElicitationSession::ElicitationSession(ExperimentConfig cfg, std::filesystem::path data_dir,
                                       std::shared_ptr<const PlanningDynamics> dynamics)
    : dir_(std::move(data_dir)) {
    if (dir_.empty()) throw ConfigError("elicitation needs a data directory");
    std::filesystem::create_directories(dir_);
    const auto state_path = dir_ / "state.json";
    Json state;
    if (std::filesystem::exists(state_path)) {
        std::ifstream in(state_path);
        state = Json::parse(in);
        if (state.value("format", "") != "jetpref-elicit" || state.at("version").get<int>() != kStateVersion) {
            throw InputError(state_path.string() + " is not an elicitation state file");
        }
        cfg = parse_config_text(state.at("config").get<std::string>());
    }
    cfg.evaluator = EvaluatorKind::HumanQueue;
    loop_ = std::make_unique<OnlineLoop>(cfg, std::move(dynamics));
    if (state.is_null()) {
        advance();
        persist();
        return;
    }
    std::istringstream graph_in(state.at("graph").get<std::string>());
    PreferenceGraph graph = PreferenceGraph::load(graph_in);
    std::vector<EpisodeRecord> records;
    for (const auto& r : state.at("records")) records.push_back(record_from_json(r));
    for (const auto& q : state.at("queries")) queries_.push_back(query_from_json(q));
    next_query_id_ = state.at("next_query_id").get<int>();
    const int current = static_cast<int>(records.size()) + 1;
    std::vector<PendingLabel> pending;
    for (const auto& q : queries_) {
        if (q.episode == current) pending.push_back({q.i, q.j});
    }
    const Json* network = state.contains("network") ? &state.at("network") : nullptr;
    loop_->restore(std::move(graph), std::move(records), std::move(pending), network);
    advance();
    persist();
}

void ElicitationSession::issue_queries() {
    const std::int64_t t = now_ms();
    for (const auto& p : loop_->pending()) {
        PendingQuery q;
        q.id = next_query_id_++;
        q.i = p.i;
        q.j = p.j;
        q.issued_at = t;
        q.episode = loop_->episode();
        queries_.push_back(q);
    }
}

void ElicitationSession::advance() {
    while (true) {
        if (loop_->awaiting_labels()) {
            const int ep = loop_->episode();
            for (const auto& q : queries_) {
                if (q.episode == ep && q.status == QueryStatus::Pending) return;
            }
            loop_->complete_episode({}, LabelSource::Human);
        }
        if (loop_->finished()) return;
        loop_->begin_episode();
        issue_queries();
    }
}

void ElicitationSession::persist() const {
    std::ostringstream graph_out;
    loop_->graph().save(graph_out);
    Json records = Json::array();
    for (const auto& r : loop_->records()) records.push_back(record_json(r));
    Json queries = Json::array();
    for (const auto& q : queries_) queries.push_back(query_json(q));
    Json state{{"format", "jetpref-elicit"},
               {"version", kStateVersion},
               {"config", config_to_text(loop_->config())},
               {"graph", graph_out.str()},
               {"records", std::move(records)},
               {"queries", std::move(queries)},
               {"next_query_id", next_query_id_}};
    if (loop_->model().network()) state["network"] = loop_->model().network()->to_json();
    // Write-then-rename so a crash never leaves a truncated state file.
    const auto tmp = dir_ / "state.json.tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw InputError("cannot write " + tmp.string());
        out << state.dump() << '\n';
    }
    std::filesystem::rename(tmp, dir_ / "state.json");
}

std::optional<Json> ElicitationSession::next_pair() const {
    const std::shared_lock lock(mu_);
    for (const auto& q : queries_) {
        if (q.status != QueryStatus::Pending) continue;
        const auto& g = loop_->graph();
        Json names = Json::array();
        for (auto n : feature_names()) names.push_back(n);
        return Json{{"query", query_json(q)},
                    {"first", to_json(g.trajectory(q.i))},
                    {"second", to_json(g.trajectory(q.j))},
                    {"feature_names", std::move(names)}};
    }
    return std::nullopt;
}

Json ElicitationSession::submit(int query_id, std::string_view choice) {
    if (choice != "first" && choice != "second" && choice != "skip") {
        throw InputError("choice must be first, second or skip");
    }
    const std::unique_lock lock(mu_);
    auto it = std::find_if(queries_.begin(), queries_.end(), [&](const PendingQuery& q) { return q.id == query_id; });
    if (it == queries_.end()) throw ConflictError("unknown query " + std::to_string(query_id));
    if (it->status != QueryStatus::Pending) {
        throw ConflictError("query " + std::to_string(query_id) + " is already " +
                            std::string(query_status_name(it->status)));
    }
    if (choice == "first") loop_->add_label(it->j, it->i, LabelSource::Human);
    if (choice == "second") loop_->add_label(it->i, it->j, LabelSource::Human);
    it->status = choice == "skip" ? QueryStatus::Skipped : QueryStatus::Answered;
    it->choice = std::string(choice);
    const PendingQuery resolved = *it;
    const int episode_before = static_cast<int>(loop_->records().size());
    advance();
    persist();
    Json ack{{"query", query_json(resolved)},
             {"episodes_completed", static_cast<int>(loop_->records().size())},
             {"advanced", static_cast<int>(loop_->records().size()) > episode_before},
             {"edges", loop_->graph().num_edges()}};
    if (resolved.status == QueryStatus::Answered) {
        ack["edge"] = resolved.choice == "first" ? Json::array({resolved.j, resolved.i})
                                                 : Json::array({resolved.i, resolved.j});
    }
    return ack;
}

Json ElicitationSession::trajectory(int id) const {
    const std::shared_lock lock(mu_);
    if (!loop_->graph().contains(id)) throw InputError("unknown trajectory " + std::to_string(id));
    return to_json(loop_->graph().trajectory(id));
}

Json ElicitationSession::model_state() const {
    const std::shared_lock lock(mu_);
    const auto& model = loop_->model();
    Json out{{"model", model_type_name(model.type())},
             {"trained", model.trained()},
             {"episode", loop_->episode()},
             {"episodes_completed", static_cast<int>(loop_->records().size())},
             {"n_max", loop_->config().n_max},
             {"edges", loop_->graph().num_edges()},
             {"k_max", loop_->config().k_max}};
    if (model.type() == ModelType::RewardNN) {
        out["tree"] = nullptr;
        out["network_updates"] = model.network()->updates();
    } else {
        const RewardTree tree = model.tree() ? *model.tree() : RewardTree(0.0);
        out["tree"] = tree.to_json();
        out["text"] = tree.render_text();
        out["leaves"] = tree.num_leaves();
    }
    return out;
}

Json ElicitationSession::status() const {
    const std::shared_lock lock(mu_);
    int pending = 0, answered = 0, skipped = 0;
    for (const auto& q : queries_) {
        pending += q.status == QueryStatus::Pending ? 1 : 0;
        answered += q.status == QueryStatus::Answered ? 1 : 0;
        skipped += q.status == QueryStatus::Skipped ? 1 : 0;
    }
    const auto& cfg = loop_->config();
    return Json{{"task", task_name(cfg.task)},
                {"model", model_type_name(cfg.model)},
                {"episode", loop_->episode()},
                {"episodes_completed", static_cast<int>(loop_->records().size())},
                {"n_max", cfg.n_max},
                {"edges", loop_->graph().num_edges()},
                {"k_max", cfg.k_max},
                {"preferences_remaining", loop_->preferences_remaining()},
                {"trajectories", loop_->graph().num_trajectories()},
                {"pending", pending},
                {"answered", answered},
                {"skipped", skipped},
                {"awaiting_labels", loop_->awaiting_labels()},
                {"finished", loop_->finished()}};
}

std::vector<PendingQuery> ElicitationSession::queries() const {
    const std::shared_lock lock(mu_);
    return queries_;
}

PreferenceGraph ElicitationSession::graph() const {
    const std::shared_lock lock(mu_);
    return loop_->graph();
}

struct ElicitServer::Impl {
    explicit Impl(ElicitationSession& s) : session(s) {}
    ElicitationSession& session;
    httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, Json{{"error", message}});
}

}  // namespace

ElicitServer::ElicitServer(ElicitationSession& session, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(session)) {
    auto& srv = impl_->server;
    auto& s = impl_->session;
    srv.Get("/api/pair", [&s](const httplib::Request&, httplib::Response& res) {
        auto pair = s.next_pair();
        if (!pair) {
            res.status = 204;
            return;
        }
        reply(res, 200, *pair);
    });
    srv.Post("/api/preference", [&s](const httplib::Request& req, httplib::Response& res) {
        Json body;
        try {
            body = Json::parse(req.body);
        } catch (const Json::exception&) {
            reply_error(res, 400, "body is not JSON");
            return;
        }
        if (!body.is_object() || !body.contains("query") || !body["query"].is_number_integer() ||
            !body.contains("choice") || !body["choice"].is_string()) {
            reply_error(res, 400, "expected {\"query\": <int>, \"choice\": \"first\"|\"second\"|\"skip\"}");
            return;
        }
        try {
            reply(res, 200, s.submit(body["query"].get<int>(), body["choice"].get<std::string>()));
        } catch (const ConflictError& e) {
            reply_error(res, 409, e.what());
        } catch (const InputError& e) {
            reply_error(res, 400, e.what());
        }
    });
    srv.Get(R"(/api/trajectory/(\d+))", [&s](const httplib::Request& req, httplib::Response& res) {
        try {
            reply(res, 200, s.trajectory(std::stoi(req.matches[1].str())));
        } catch (const InputError& e) {
            reply_error(res, 404, e.what());
        } catch (const std::out_of_range&) {
            reply_error(res, 404, "unknown trajectory");
        }
    });
    srv.Get("/api/model", [&s](const httplib::Request&, httplib::Response& res) { reply(res, 200, s.model_state()); });
    srv.Get("/api/status", [&s](const httplib::Request&, httplib::Response& res) { reply(res, 200, s.status()); });
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            if (ep) std::rethrow_exception(ep);
            reply_error(res, 500, "internal error");
        } catch (const std::exception& e) {
            reply_error(res, 500, e.what());
        }
    });
    if (!static_dir.empty() && !srv.set_mount_point("/", static_dir.string())) {
        throw ConfigError("static directory " + static_dir.string() + " does not exist");
    }
}

ElicitServer::~ElicitServer() { stop(); }

int ElicitServer::bind(const std::string& host, int port) {
    auto& srv = impl_->server;
    if (port == 0) {
        const int bound = srv.bind_to_any_port(host);
        if (bound <= 0) throw Error("cannot bind " + host);
        return bound;
    }
    if (!srv.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ElicitServer::listen() { impl_->server.listen_after_bind(); }

void ElicitServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace jetpref
