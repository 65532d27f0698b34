#include "jetpref/elicit.hpp"
#include "jetpref/error.hpp"
#include "jetpref/rewardtree.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

using namespace jetpref;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(int n_max = 4, int k_batch = 5) {
    ExperimentConfig cfg;
    cfg.task = Task::Follow;
    cfg.n_max = n_max;
    cfg.k_batch = k_batch;
    cfg.planner.horizon = 3;
    cfg.planner.iterations = 2;
    cfg.planner.candidates = 6;
    cfg.planner.elites = 2;
    return cfg;
}

std::vector<PendingQuery> pending_of(const ElicitationSession& s) {
    std::vector<PendingQuery> out;
    for (const auto& q : s.queries()) {
        if (q.status == QueryStatus::Pending) out.push_back(q);
    }
    return out;
}

// Deterministic labeller: prefers the trajectory with the larger id.
std::string choice_for(const PendingQuery& q) { return q.j > q.i ? "second" : "first"; }

void answer_all(ElicitationSession& s) {
    for (auto pending = pending_of(s); !pending.empty(); pending = pending_of(s)) s.submit(pending.front().id, choice_for(pending.front()));
}

std::string graph_bytes(const PreferenceGraph& g) {
    std::ostringstream ss;
    g.save(ss);
    return ss.str();
}

std::set<std::pair<int, int>> edge_set(const PreferenceGraph& g) {
    std::set<std::pair<int, int>> out;
    for (const auto& e : g.edges()) out.emplace(e.i, e.j);
    return out;
}

// Same trajectories, same edge set, same fitted model.
void check_same_outcome(const ElicitationSession& a, const ElicitationSession& b) {
    const PreferenceGraph ga = a.graph(), gb = b.graph();
    REQUIRE(ga.num_trajectories() == gb.num_trajectories());
    for (int k = 0; k < ga.num_trajectories(); ++k) {
        REQUIRE(ga.trajectory(k).length() == gb.trajectory(k).length());
        for (int t = 0; t < ga.trajectory(k).length(); ++t) {
            CHECK(ga.trajectory(k).transitions[static_cast<std::size_t>(t)].x ==
                  gb.trajectory(k).transitions[static_cast<std::size_t>(t)].x);
        }
    }
    CHECK(edge_set(ga) == edge_set(gb));
    CHECK(a.model_state().at("tree") == b.model_state().at("tree"));
}

// "path: type" lines for every key, recursing into objects and the first array element.
void schema_lines(const Json& j, const std::string& path, std::vector<std::string>& out) {
    out.push_back(path + ": " + j.type_name());
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) schema_lines(it.value(), path + "." + it.key(), out);
    } else if (j.is_array() && !j.empty()) {
        schema_lines(j.front(), path + "[]", out);
    }
}

std::string schema(const Json& j, const std::string& root) {
    std::vector<std::string> lines;
    schema_lines(j, root, lines);
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_golden(const std::string& name, const std::string& actual) {
    const fs::path path = fs::path(JETPREF_GOLDEN_DIR) / name;
    if (std::getenv("JETPREF_UPDATE_GOLDEN")) {
        std::ofstream(path, std::ios::binary) << actual;
    }
    CHECK_MESSAGE(slurp(path) == actual, name);
}

// Runs the server on an ephemeral port for the lifetime of the object.
struct RunningServer {
    explicit RunningServer(ElicitationSession& s, fs::path static_dir = {}) : server(s, std::move(static_dir)) {
        port = server.bind("127.0.0.1", 0);
        thread = std::thread([this] { server.listen(); });
        httplib::Client probe("127.0.0.1", port);
        for (int k = 0; k < 200 && !probe.Get("/api/status"); ++k) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ~RunningServer() {
        server.stop();
        thread.join();
    }
    ElicitServer server;
    int port = 0;
    std::thread thread;
};

}  // namespace

TEST_CASE("a fresh session waits on the first comparison") {
    const fs::path dir = test::temp_dir("elicit_fresh");
    ElicitationSession s(small_config(), dir);
    const Json st = s.status();
    CHECK(st.at("episode") == 2);
    CHECK(st.at("episodes_completed") == 1);
    CHECK(st.at("pending") == 1);
    CHECK(st.at("awaiting_labels") == true);
    const auto pair = s.next_pair();
    REQUIRE(pair.has_value());
    CHECK(pair->at("query").at("status") == "pending");
    CHECK(pair->at("first").at("id") == 0);
    CHECK(pair->at("second").at("id") == 1);
    CHECK(pair->at("feature_names").size() == kNumFeatures);
    CHECK(s.next_pair() == pair);

    const Json model = s.model_state();
    CHECK(model.at("trained") == false);
    CHECK(model.at("leaves") == 1);
    CHECK(RewardTree::from_json(model.at("tree")) == RewardTree(0.0));
    CHECK(fs::exists(dir / "state.json"));
}

TEST_CASE("submissions add edges with the chosen orientation") {
    ElicitationSession s(small_config(), test::temp_dir("elicit_submit"));
    const PendingQuery q = pending_of(s).at(0);
    CHECK_THROWS_AS(s.submit(q.id, "left"), InputError);
    CHECK_THROWS_AS(s.submit(12345, "first"), ConflictError);
    const Json ack = s.submit(q.id, "second");
    CHECK(ack.at("edge") == Json::array({q.i, q.j}));
    CHECK(ack.at("advanced") == true);
    CHECK(s.graph().has_edge(q.i, q.j));
    CHECK(s.graph().edges().front().source == LabelSource::Human);
    CHECK_THROWS_AS(s.submit(q.id, "second"), ConflictError);
    CHECK_THROWS_AS(s.submit(q.id, "first"), ConflictError);
    CHECK(s.graph().num_edges() == 1);

    // The next episode compares the new trajectory against both earlier ones.
    const auto next = pending_of(s);
    REQUIRE(next.size() == 2);
    for (const auto& p : next) CHECK(p.j == 2);
    const Json first = s.submit(next[0].id, "first");
    CHECK(first.at("edge") == Json::array({next[0].j, next[0].i}));
    CHECK(first.at("advanced") == false);
    CHECK(first.at("edges") == 2);
    CHECK(s.graph().has_edge(next[0].j, next[0].i));
    CHECK(s.next_pair()->at("query").at("id") == next[1].id);

    // Skips add no edge and leave the budget untouched.
    const int remaining = s.status().at("preferences_remaining");
    const Json skip = s.submit(next[1].id, "skip");
    CHECK_FALSE(skip.contains("edge"));
    CHECK(s.graph().num_edges() == 2);
    CHECK(s.status().at("preferences_remaining") == remaining);
    CHECK(s.status().at("skipped") == 1);
}

TEST_CASE("model state after induction matches re-induction on the graph") {
    ElicitationSession s(small_config(4), test::temp_dir("elicit_model"));
    answer_all(s);
    CHECK(s.status().at("finished") == true);
    CHECK_FALSE(s.next_pair().has_value());
    const Json model = s.model_state();
    CHECK(model.at("trained") == true);
    const RewardTree served = RewardTree::from_json(model.at("tree"));
    const RewardTree fresh = induce(s.graph(), small_config().induction).tree;
    CHECK(served == fresh);
    CHECK(static_cast<int>(served.nodes().size()) == static_cast<int>(fresh.nodes().size()));
    CHECK(model.at("text") == fresh.render_text());
    CHECK_THROWS_AS(s.submit(0, "first"), ConflictError);
}

TEST_CASE("answered and skipped queries reconcile with the edge count") {
    ElicitationSession s(small_config(5), test::temp_dir("elicit_reconcile"));
    int k = 0;
    for (auto p = pending_of(s); !p.empty(); p = pending_of(s), ++k) {
        s.submit(p.front().id, k % 3 == 0 ? "skip" : choice_for(p.front()));
    }
    int answered = 0, skipped = 0;
    for (const auto& q : s.queries()) {
        CHECK(q.status != QueryStatus::Pending);
        answered += q.status == QueryStatus::Answered;
        skipped += q.status == QueryStatus::Skipped;
    }
    CHECK(answered == s.graph().num_edges());
    CHECK(answered + skipped == static_cast<int>(s.queries().size()));
    CHECK(skipped > 0);
    std::set<int> ids;
    for (const auto& q : s.queries()) ids.insert(q.id);
    CHECK(ids.size() == s.queries().size());
}

TEST_CASE("a restarted session resumes where it stopped") {
    const ExperimentConfig cfg = small_config(5);
    ElicitationSession reference(cfg, test::temp_dir("elicit_reference"));
    answer_all(reference);

    const fs::path dir = test::temp_dir("elicit_restart");
    {
        ElicitationSession first(cfg, dir);
        for (int k = 0; k < 3; ++k) {
            const auto p = pending_of(first).at(0);
            first.submit(p.id, choice_for(p));
        }
    }
    std::vector<PendingQuery> before;
    {
        ElicitationSession again(small_config(99), dir);
        CHECK(again.status().at("n_max") == 5);
        before = again.queries();
        CHECK(again.graph().num_edges() == 3);
    }
    ElicitationSession resumed(ExperimentConfig{}, dir);
    const auto after = resumed.queries();
    REQUIRE(after.size() == before.size());
    for (std::size_t k = 0; k < after.size(); ++k) {
        CHECK(after[k].id == before[k].id);
        CHECK(after[k].status == before[k].status);
        CHECK(after[k].issued_at == before[k].issued_at);
    }
    answer_all(resumed);
    CHECK(graph_bytes(resumed.graph()) == graph_bytes(reference.graph()));
    CHECK(resumed.model_state().at("tree") == reference.model_state().at("tree"));

    std::ofstream(dir / "state.json") << "{\"format\": \"other\", \"version\": 1}\n";
    CHECK_THROWS_AS(ElicitationSession(cfg, dir), InputError);
}

TEST_CASE("the reward network resumes across restarts") {
    ExperimentConfig cfg = small_config(4);
    cfg.model = ModelType::RewardNN;
    cfg.reward_nn.hidden_units = 8;
    cfg.reward_nn.batches_per_update = 5;
    cfg.reward_nn_norm_rollouts = 3;
    ElicitationSession reference(cfg, test::temp_dir("elicit_nn_reference"));
    answer_all(reference);
    const fs::path dir = test::temp_dir("elicit_nn_restart");
    {
        ElicitationSession first(cfg, dir);
        const auto p = pending_of(first).at(0);
        first.submit(p.id, choice_for(p));
    }
    ElicitationSession resumed(cfg, dir);
    answer_all(resumed);
    CHECK(graph_bytes(resumed.graph()) == graph_bytes(reference.graph()));
    CHECK(resumed.model_state().at("network_updates") == reference.model_state().at("network_updates"));
}

TEST_CASE("the final graph does not depend on the order of distinct submissions") {
    const ExperimentConfig cfg = small_config(5, 3);
    ElicitationSession reference(cfg, test::temp_dir("elicit_order_ref"));
    answer_all(reference);
    for (int order = 1; order < 3; ++order) {
        ElicitationSession s(cfg, test::temp_dir("elicit_order_" + std::to_string(order)));
        for (auto p = pending_of(s); !p.empty(); p = pending_of(s)) {
            if (order == 1) std::reverse(p.begin(), p.end());
            if (order == 2 && p.size() > 2) std::swap(p[0], p[2]);
            for (const auto& q : p) s.submit(q.id, choice_for(q));
        }
        check_same_outcome(s, reference);
    }
}

TEST_CASE("concurrent submissions are serialized") {
    const ExperimentConfig cfg = small_config(5, 3);
    ElicitationSession reference(cfg, test::temp_dir("elicit_conc_ref"));
    answer_all(reference);
    ElicitationSession s(cfg, test::temp_dir("elicit_conc"));
    for (auto p = pending_of(s); !p.empty(); p = pending_of(s)) {
        std::vector<std::thread> workers;
        std::atomic<int> ok{0}, conflicts{0};
        // Every query submitted twice from different threads: one wins, one conflicts.
        for (int rep = 0; rep < 2; ++rep) {
            for (const auto& q : p) {
                workers.emplace_back([&, q] {
                    try {
                        s.submit(q.id, choice_for(q));
                        ++ok;
                    } catch (const ConflictError&) {
                        ++conflicts;
                    }
                });
            }
            workers.emplace_back([&] { (void)s.status(); (void)s.next_pair(); });
        }
        for (auto& w : workers) w.join();
        CHECK(ok == static_cast<int>(p.size()));
        CHECK(conflicts == static_cast<int>(p.size()));
    }
    check_same_outcome(s, reference);
}

TEST_CASE("http api") {
    const fs::path dir = test::temp_dir("elicit_http");
    const fs::path assets = test::temp_dir("elicit_http_static");
    std::ofstream(assets / "index.html") << "<html>ui</html>";
    ElicitationSession s(small_config(3), dir);
    RunningServer srv(s, assets);
    httplib::Client c("127.0.0.1", srv.port);

    auto pair = c.Get("/api/pair");
    REQUIRE(pair);
    CHECK(pair->status == 200);
    CHECK(pair->get_header_value("Content-Type") == "application/json");
    const Json p = Json::parse(pair->body);
    const auto again = c.Get("/api/pair");
    CHECK(again->body == pair->body);
    const int id = p.at("query").at("id");

    CHECK(c.Post("/api/preference", "not json", "application/json")->status == 400);
    CHECK(c.Post("/api/preference", R"({"query": 0})", "application/json")->status == 400);
    const std::string bad = Json{{"query", id}, {"choice", "maybe"}}.dump();
    CHECK(c.Post("/api/preference", bad, "application/json")->status == 400);
    CHECK(c.Post("/api/preference", R"({"query": 999, "choice": "first"})", "application/json")->status == 409);

    const std::string body = Json{{"query", id}, {"choice", "second"}}.dump();
    const auto ok = c.Post("/api/preference", body, "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(Json::parse(ok->body).at("edge") == Json::array({p.at("query").at("i"), p.at("query").at("j")}));
    CHECK(c.Post("/api/preference", body, "application/json")->status == 409);

    const auto traj = c.Get("/api/trajectory/0");
    CHECK(traj->status == 200);
    CHECK(Json::parse(traj->body).at("id") == 0);
    CHECK(c.Get("/api/trajectory/99")->status == 404);
    CHECK(c.Get("/api/trajectory/99999999999999999999")->status == 404);

    const auto status = c.Get("/api/status");
    CHECK(status->status == 200);
    CHECK(Json::parse(status->body).at("edges") == 1);
    CHECK(c.Get("/")->body == "<html>ui</html>");

    // Answer the rest over HTTP, then the queue is empty.
    for (auto r = c.Get("/api/pair"); r->status == 200; r = c.Get("/api/pair")) {
        const Json q = Json::parse(r->body).at("query");
        const std::string choice = q.at("j").get<int>() > q.at("i").get<int>() ? "second" : "first";
        CHECK(c.Post("/api/preference", Json{{"query", q.at("id")}, {"choice", choice}}.dump(), "application/json")->status == 200);
    }
    const auto empty = c.Get("/api/pair");
    CHECK(empty->status == 204);
    CHECK(empty->body.empty());

    const auto model = c.Get("/api/model");
    CHECK(model->status == 200);
    const Json m = Json::parse(model->body);
    CHECK(m.at("trained") == true);
    CHECK(RewardTree::from_json(m.at("tree")) == induce(s.graph(), small_config().induction).tree);

    check_golden("api_model_schema.txt", schema(m, "model"));
    check_golden("api_status_schema.txt", schema(Json::parse(c.Get("/api/status")->body), "status"));
}

TEST_CASE("http submissions from many clients") {
    const ExperimentConfig cfg = small_config(4, 3);
    ElicitationSession reference(cfg, test::temp_dir("elicit_http_conc_ref"));
    answer_all(reference);
    ElicitationSession s(cfg, test::temp_dir("elicit_http_conc"));
    RunningServer srv(s);
    for (auto p = pending_of(s); !p.empty(); p = pending_of(s)) {
        std::vector<std::thread> clients;
        std::vector<int> codes(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) {
            clients.emplace_back([&, k] {
                httplib::Client c("127.0.0.1", srv.port);
                const auto r = c.Post("/api/preference", Json{{"query", p[k].id}, {"choice", choice_for(p[k])}}.dump(),
                                      "application/json");
                codes[k] = r ? r->status : -1;
            });
        }
        for (auto& t : clients) t.join();
        for (int code : codes) CHECK(code == 200);
    }
    check_same_outcome(s, reference);
}

TEST_CASE("server errors") {
    ElicitationSession s(small_config(2), test::temp_dir("elicit_errors"));
    CHECK_THROWS_AS(ElicitServer(s, "/nonexistent/static"), ConfigError);
    CHECK_THROWS_AS(ElicitationSession(small_config(), ""), ConfigError);
    CHECK_THROWS_AS(s.trajectory(7), InputError);
    CHECK(parse_query_status(query_status_name(QueryStatus::Skipped)) == QueryStatus::Skipped);
    CHECK_THROWS_AS(parse_query_status("lost"), InputError);
}
