import csv
import filecmp
import json
import logging
import os

import numpy as np
import pytest

from skyrsma import harness
from skyrsma.constants_utils import ConfigError, BadConfig, UnknownAxis


def small_doc(out, agent="random", **hyper):
    options = dict(episodes=3, hidden=[8], diffusion_steps=2, batch_size=4, warmup=4, replay_capacity=100,
                   embed_dim=4, eval_episodes=2)
    options.update(hyper)
    return {
        "scenario": {"grid": {"cols": 11, "rows": 11}, "mission": {"n_slots": 5}},
        "agent": agent,
        "hyper": options,
        "seeds": [0],
        "output_dir": str(out),
    }


def csv_rows(path):
    with open(path, newline="") as file:
        return list(csv.reader(file))[1:]


def test_defaults_are_filled():
    cfg = harness.parse_config({})
    assert cfg.data["scenario"]["rsma"]["p_max"] == 5e-3
    assert cfg.data["scenario"]["mission"]["n_slots"] == 100
    assert cfg.data["agent"] == "gdrs"
    assert "/scenario/rsma/p_max" in cfg.filled_defaults
    assert "/seeds" in cfg.filled_defaults
    cfg = harness.parse_config({"scenario": {"rsma": {"p_max": 0.01}}})
    assert "/scenario/rsma/p_max" not in cfg.filled_defaults


@pytest.mark.parametrize("doc,pointer", [
    ({"scenario": {"rsma": {"p_max": -1}}}, "/scenario/rsma/p_max"),
    ({"scenario": {"bogus": 1}}, "/scenario/bogus"),
    ({"hyper": {"episodes": "many"}}, "/hyper/episodes"),
    ({"hyper": {"episodes": True}}, "/hyper/episodes"),
    ({"agent": "ppo"}, "/agent"),
    ({"hyper": {"steps_per_episode": 200}}, "/hyper/steps_per_episode"),
    ({"hyper": {"phi_min": 30.0}}, "/hyper/phi_max"),
    ({"scenario": {"num_gts": 3, "gt_positions": [[0, 0]]}}, "/scenario/gt_positions"),
    ({"scenario": {"rsma": {"mu": [0.7, 0.7]}}}, "/scenario/rsma/mu"),
    ({"scenario": {"rsma": {"mu": [[0.5, 0.5]]}}}, "/scenario/rsma/mu"),
    ({"scenario": {"rsma": {"mu": [[0.5, 0.5], [1.5, -0.5]]}}}, "/scenario/rsma/mu"),
    ({"scenario": {"rsma": {"mu": [[0.5, 0.5], 0.5]}}}, "/scenario/rsma/mu/0"),
    ({"scenario": {"mission": {"start_pose": [0, 20, 1]}}}, "/scenario"),
    ({"seeds": [1, -2]}, "/seeds"),
])
def test_validation_errors_name_the_field(doc, pointer):
    with pytest.raises(ConfigError) as info:
        harness.parse_config(doc)
    assert info.value.pointer == pointer


def test_config_round_trip():
    cfg = harness.parse_config({"scenario": {"num_gts": 3, "tasks": {"bits": 1200}}, "decoding": "oracle"})
    again = harness.parse_config(json.loads(cfg.to_json()))
    assert again.data == cfg.data
    assert again.config_hash() == cfg.config_hash()
    assert cfg.data["scenario"]["tasks"]["bits"] == [1200.0, 1200.0]


def test_overrides():
    cfg = harness.parse_config({})
    changed = harness.with_overrides(cfg, {"/scenario/rsma/p_max": 0.01})
    assert changed.data["scenario"]["rsma"]["p_max"] == 0.01
    assert "/scenario/rsma/p_max" not in changed.filled_defaults
    assert changed.config_hash() != cfg.config_hash()
    with pytest.raises(ConfigError):
        harness.with_overrides(cfg, {"/scenario/nothing": 1})


def test_load_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"agent": "dqn"}))
    cfg = harness.load_config(str(path))
    assert cfg.data["agent"] == "dqn"
    assert cfg.source == str(path)
    with pytest.raises(ConfigError):
        harness.load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        harness.load_config(str(bad))


def test_example_config_is_valid():
    root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    cfg = harness.load_config(os.path.join(root, "example_config.json"))
    assert cfg.data["seeds"] == [0, 1, 2]


def test_out_of_envelope_values_warn(caplog):
    with caplog.at_level(logging.WARNING, logger="skyrsma"):
        harness.parse_config({"scenario": {"num_gts": 6}})
    assert any("/scenario/num_gts" in record.getMessage() for record in caplog.records)


def test_built_objects_follow_the_config():
    cfg = harness.parse_config({"scenario": {"num_gts": 3, "rsma": {"mu": [0.25, 0.75]}}, "access": "noma",
                                "reward": {"power_grid": [0.0, 1.0]}, "agent": "dqn"})
    scenario = harness.build_scenario(cfg)
    assert scenario.num_gts == 3
    assert scenario.access == "noma"
    np.testing.assert_allclose(scenario.rsma.mu, [[0.25, 0.75]] * 3)
    assert harness.build_reward(cfg).power_levels == 2
    assert harness.build_hyper(cfg).learning_rate == cfg.data["hyper"]["critic_lr"]
    assert harness.build_hyper(cfg, "random") is None


def test_split_ratios_per_gt():
    cfg = harness.parse_config({"scenario": {"rsma": {"mu": [[0.25, 0.75], [0.6, 0.4]]}}})
    np.testing.assert_allclose(harness.build_scenario(cfg).rsma.mu, [[0.25, 0.75], [0.6, 0.4]])


def test_random_run_writes_metrics_and_no_checkpoint(tmp_path):
    cfg = harness.parse_config(small_doc(tmp_path / "out"))
    artifacts = harness.run(cfg, 0)
    assert artifacts.checkpoint_path is None
    assert len(csv_rows(artifacts.metrics_path)) == 3
    assert len(csv_rows(artifacts.trajectory_path)) == 5
    with open(artifacts.manifest_path) as file:
        manifest = json.load(file)
    assert manifest["config_hash"] == cfg.config_hash()
    assert manifest["seed"] == 0
    assert "/scenario/rsma/p_max" in manifest["filled_defaults"]
    assert manifest["config"] == cfg.data
    assert artifacts.final_eta > 0


def test_reruns_are_byte_identical(tmp_path):
    first = harness.run(harness.parse_config(small_doc(tmp_path / "a", "gdrs", episodes=2)), 0)
    second = harness.run(harness.parse_config(small_doc(tmp_path / "b", "gdrs", episodes=2)), 0)
    for a, b in [(first.metrics_path, second.metrics_path), (first.trajectory_path, second.trajectory_path),
                 (first.checkpoint_path, second.checkpoint_path)]:
        assert filecmp.cmp(a, b, shallow=False)


@pytest.mark.parametrize("agent", ["gdrs", "dqn"])
def test_checkpoint_evaluation(tmp_path, agent):
    cfg = harness.parse_config(small_doc(tmp_path / "out", agent, episodes=1))
    artifacts = harness.run(cfg, 0)
    assert os.path.exists(artifacts.checkpoint_path)
    evaluation = harness.evaluate_run(cfg, 0, artifacts.checkpoint_path)
    assert len(csv_rows(evaluation.metrics_path)) == 2
    assert len(csv_rows(evaluation.trajectory_path)) == 10
    assert os.path.basename(evaluation.trajectory_path) == "eval_trajectory.csv"


def test_checkpoint_for_another_scenario(tmp_path):
    cfg = harness.parse_config(small_doc(tmp_path / "out", "dqn", episodes=1))
    artifacts = harness.run(cfg, 0)
    other = harness.with_overrides(cfg, {"/scenario/num_gts": 3})
    with pytest.raises(BadConfig):
        harness.evaluate_run(other, 0, artifacts.checkpoint_path)


def test_baseline_access_logs_ignored_decoding(tmp_path, caplog):
    doc = small_doc(tmp_path / "out")
    doc["access"] = "fdma"
    with caplog.at_level(logging.INFO, logger="skyrsma"):
        harness.run(harness.parse_config(doc), 0)
    assert any("ignored" in record.getMessage() for record in caplog.records)


def test_axis_pointers():
    assert harness.axis_pointers("p_max") == ("/scenario/rsma/p_max",)
    assert harness.axis_pointers("learning_rate") == ("/hyper/actor_lr", "/hyper/critic_lr")
    assert harness.axis_pointers("/scenario/compute/f_u") == ("/scenario/compute/f_u",)
    for axis in ("bogus", "/access", "/scenario/nothing"):
        with pytest.raises(UnknownAxis):
            harness.axis_pointers(axis)


def test_summary_uses_population_std():
    rows = [["p_max", 1, 0, 1.0], ["p_max", 1, 1, 3.0], ["p_max", 2, 0, 5.0]]
    assert harness.summarise_sweep(rows) == [["p_max", 1, 2, 2.0, 1.0], ["p_max", 2, 1, 5.0, 0.0]]


def test_sweep(tmp_path):
    doc = small_doc(tmp_path / "out")
    doc["seeds"] = [0, 1]
    cfg = harness.parse_config(doc)
    summary = harness.sweep(cfg, "p_max", [0.001, 0.002])
    assert [row[1] for row in summary] == [0.001, 0.002]
    assert all(row[2] == 2 for row in summary)
    out = tmp_path / "out"
    etas = [harness.final_eta_from_csv(str(out / "sweep_p_max" / "0.001" / "seed_{}".format(s) / "metrics.csv"))
            for s in (0, 1)]
    assert summary[0][3] == pytest.approx(np.mean(etas))
    assert summary[0][4] == pytest.approx(np.std(etas))
    assert len(csv_rows(str(out / "sweep_runs.csv"))) == 4
    assert len(csv_rows(str(out / "sweep_summary.csv"))) == 2
    with open(out / "sweep_p_max" / "0.002" / "seed_0" / "manifest.json") as file:
        assert json.load(file)["config"]["scenario"]["rsma"]["p_max"] == 0.002


def test_main_verify():
    assert harness.main(["verify", "energy"]) == 0


def test_main_train_and_failures(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(small_doc(tmp_path / "out")))
    assert harness.main(["train", "--config", str(path), "--seed", "5", "--quiet"]) == 0
    assert os.path.exists(tmp_path / "out" / "seed_5" / "metrics.csv")
    assert harness.main(["train", "--config", str(tmp_path / "missing.json"), "--quiet"]) == 1
    assert harness.main(["sweep", "--config", str(path), "--axis", "bogus", "--values", "1", "--quiet"]) == 1


def test_cli_overrides(tmp_path):
    args = harness.build_parser().parse_args(["train", "--out", str(tmp_path), "--agent", "dqn", "--access", "noma"])
    cfg = harness.apply_cli_overrides(harness.parse_config({}), args)
    assert cfg.data["output_dir"] == str(tmp_path)
    assert cfg.data["agent"] == "dqn"
    assert cfg.data["access"] == "noma"
