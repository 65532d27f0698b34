import json

import pytest

import jetpref


def constant_rows(n, value, feature=0):
    names = jetpref.feature_names()
    rows = []
    for _ in range(n):
        row = [0.0] * len(names)
        row[feature] = value
        rows.append(row)
    return rows


def test_feature_schema():
    names = jetpref.feature_names()
    assert len(names) == 30
    assert "alt" in names
    assert len(set(names)) == len(names)
    assert jetpref.feature_schema_hash()


def test_separable_graph_induces_a_stump():
    g = jetpref.PreferenceGraph("follow")
    a = g.add_trajectory(constant_rows(20, 0.0))
    b = g.add_trajectory(constant_rows(20, 1.0))
    g.add_preference(a, b)
    assert (g.num_trajectories, g.num_edges) == (2, 1)
    assert g.edges() == [(0, 1)]
    tree, loss = jetpref.induce(g)
    assert tree.num_leaves == 2
    assert loss == 0
    assert tree.trajectory_return(g, b) > tree.trajectory_return(g, a)
    assert tree.predict(constant_rows(1, 1.0)[0]) > tree.predict(constant_rows(1, 0.0)[0])
    assert jetpref.RewardTree.from_json(tree.to_json()) == tree
    assert json.loads(tree.to_json())


def test_graph_and_tree_files_round_trip(tmp_path):
    g = jetpref.PreferenceGraph("chase")
    g.add_trajectory(constant_rows(3, 2.0, feature=1))
    g.add_trajectory(constant_rows(2, 5.0, feature=1))
    g.add_preference(1, 0)
    g.save(str(tmp_path / "g.jsonl"))
    back = jetpref.PreferenceGraph.load(str(tmp_path / "g.jsonl"))
    assert back.task == "chase"
    assert back.edges() == [(1, 0)]
    assert back.trajectory_features(0) == g.trajectory_features(0)
    tree, _ = jetpref.induce(back, "variance")
    tree.save(str(tmp_path / "t.json"))
    assert jetpref.RewardTree.load(str(tmp_path / "t.json")) == tree


def test_errors_map_to_python_exceptions():
    g = jetpref.PreferenceGraph()
    with pytest.raises(jetpref.InputError):
        g.add_trajectory([[0.0, 1.0]])
    with pytest.raises(jetpref.ConfigError):
        jetpref.config_text("bogus = 1\n")
    with pytest.raises(jetpref.ConfigError):
        jetpref.PreferenceGraph("orbit")
    assert issubclass(jetpref.ConfigError, jetpref.Error)


def test_config_keys_and_overrides():
    keys = {k["key"] for k in jetpref.config_keys()}
    assert {"task", "n_max", "planner.horizon"} <= keys
    text = jetpref.config_text("task = land\n", {"n_max": "7"})
    assert "task = land" in text
    assert "n_max = 7" in text


def test_short_online_run_is_deterministic(tmp_path):
    overrides = {
        "n_max": "3",
        "planner.horizon": "3",
        "planner.iterations": "2",
        "planner.candidates": "6",
        "planner.elites": "2",
    }
    first = jetpref.run_online("", overrides, str(tmp_path / "a"))
    second = jetpref.run_online("", overrides)
    assert [r["episode"] for r in first] == [1, 2, 3]
    assert first == [dict(r, checkpoint=r2["checkpoint"]) for r, r2 in zip(second, first)]
    assert (tmp_path / "a" / "metrics.tsv").exists()


def test_cli_in_process():
    code, out, _ = jetpref.run_cli(["--help"])
    assert code == 0
    assert "run" in out
    code, _, err = jetpref.run_cli(["fly"])
    assert code == 2
    assert err
