#include "jetpref/cli.hpp"
#include "jetpref/config.hpp"
#include "jetpref/error.hpp"
#include "jetpref/experiment.hpp"
#include "jetpref/features.hpp"
#include "jetpref/prefgraph.hpp"
#include "jetpref/rewardtree.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace jetpref;

namespace {

FeatureVector to_features(const std::vector<double>& row) {
    if (row.size() != kNumFeatures) {
        throw InputError("feature rows need " + std::to_string(kNumFeatures) + " values, got " +
                         std::to_string(row.size()));
    }
    FeatureVector x{};
    std::copy(row.begin(), row.end(), x.begin());
    return x;
}

Trajectory feature_trajectory(const std::vector<std::vector<double>>& rows, Task task) {
    Trajectory traj;
    traj.task = task;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        Transition tr;
        tr.state.t = static_cast<int>(t);
        tr.next.t = static_cast<int>(t) + 1;
        tr.x = to_features(rows[t]);
        traj.transitions.push_back(tr);
    }
    return traj;
}

ExperimentConfig make_config(const std::string& text, const std::map<std::string, std::string>& overrides) {
    ExperimentConfig cfg = parse_config_text(text);
    for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
    cfg.validate();
    return cfg;
}

py::dict record_dict(const EpisodeRecord& r) {
    py::dict d;
    d["episode"] = r.episode;
    d["trajectory_id"] = r.trajectory_id;
    d["online_return"] = r.online_return;
    d["edges"] = r.edges;
    d["leaves"] = r.leaves;
    d["loss_count"] = r.loss_count;
    d["loss_fraction"] = r.loss_fraction;
    d["checkpoint"] = r.checkpoint;
    return d;
}

}  // namespace

PYBIND11_MODULE(_jetpref, m) {
    m.doc() = "Preference-based reward trees for a fast-jet simulator";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
    static py::exception<InputError> input_error(m, "InputError", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const InputError& e) {
            py::set_error(input_error, e.what());
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    m.def("feature_names", [] {
        std::vector<std::string> out;
        for (auto n : feature_names()) out.emplace_back(n);
        return out;
    });
    m.def("feature_schema_hash", &feature_schema_hash);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");

    m.def(
        "config_keys",
        [] {
            py::list out;
            for (const auto& k : config_keys()) {
                py::dict d;
                d["key"] = k.key;
                d["type"] = k.type;
                d["help"] = k.help;
                out.append(d);
            }
            return out;
        });
    m.def(
        "config_text",
        [](const std::string& text, const std::map<std::string, std::string>& overrides) {
            return config_to_text(make_config(text, overrides));
        },
        py::arg("text") = "", py::arg("overrides") = std::map<std::string, std::string>{},
        "Normalized config snapshot after applying overrides.");

    py::class_<PreferenceGraph>(m, "PreferenceGraph")
        .def(py::init([](const std::string& task) { return PreferenceGraph(parse_task(task)); }),
             py::arg("task") = "follow")
        .def_static("load", &PreferenceGraph::load_file, py::arg("path"))
        .def("save", &PreferenceGraph::save_file, py::arg("path"))
        .def_property_readonly("task", [](const PreferenceGraph& g) { return std::string(task_name(g.task())); })
        .def_property_readonly("num_trajectories", &PreferenceGraph::num_trajectories)
        .def_property_readonly("num_edges", &PreferenceGraph::num_edges)
        .def(
            "add_trajectory",
            [](PreferenceGraph& g, const std::vector<std::vector<double>>& rows) {
                return g.add_trajectory(feature_trajectory(rows, g.task()));
            },
            py::arg("features"), "Adds a trajectory given one feature row per timestep; returns its id.")
        .def(
            "add_preference", [](PreferenceGraph& g, int i, int j) { g.add_preference(i, j); }, py::arg("worse"),
            py::arg("better"))
        .def("edges",
             [](const PreferenceGraph& g) {
                 std::vector<std::pair<int, int>> out;
                 for (const auto& e : g.edges()) out.emplace_back(e.i, e.j);
                 return out;
             })
        .def("trajectory_features", [](const PreferenceGraph& g, int id) {
            std::vector<std::vector<double>> rows;
            for (const auto& tr : g.trajectory(id).transitions) rows.emplace_back(tr.x.begin(), tr.x.end());
            return rows;
        });

    py::class_<RewardTree>(m, "RewardTree")
        .def_static("load", &RewardTree::load_file, py::arg("path"))
        .def_static(
            "from_json", [](const std::string& s) { return RewardTree::from_json(Json::parse(s)); }, py::arg("text"))
        .def("to_json", [](const RewardTree& t) { return t.to_json().dump(); })
        .def("save", &RewardTree::save_file, py::arg("path"))
        .def_property_readonly("num_leaves", &RewardTree::num_leaves)
        .def("render_text", &RewardTree::render_text)
        .def(
            "predict", [](const RewardTree& t, const std::vector<double>& x) { return t.predict(to_features(x)); },
            py::arg("features"))
        .def("trajectory_return", [](const RewardTree& t, const PreferenceGraph& g, int id) {
            return t.trajectory_return(g.trajectory(id));
        })
        .def("__eq__", &RewardTree::operator==);

    m.def(
        "induce",
        [](const PreferenceGraph& g, const std::string& criterion) {
            InductionConfig cfg;
            cfg.split_criterion = parse_split_criterion(criterion);
            InductionResult res = induce(g, cfg);
            return py::make_tuple(std::move(res.tree), res.loss.count);
        },
        py::arg("graph"), py::arg("split_criterion") = "zero-one",
        "Grows and prunes a reward tree; returns (tree, l0-1 count).");

    m.def(
        "run_online",
        [](const std::string& text, const std::map<std::string, std::string>& overrides, const std::string& out_dir) {
            const ExperimentConfig cfg = make_config(text, overrides);
            std::vector<EpisodeRecord> records;
            {
                py::gil_scoped_release release;
                records = run_online(cfg, nullptr, out_dir).records;
            }
            py::list out;
            for (const auto& r : records) out.append(record_dict(r));
            return out;
        },
        py::arg("config_text") = "", py::arg("overrides") = std::map<std::string, std::string>{},
        py::arg("out_dir") = "", "Runs the online loop; returns one dict per episode.");
}
