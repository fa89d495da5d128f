"""
Experiment plumbing: JSON experiment configs, single runs, parameter sweeps, the
verification suites and the command line.

Config documents are validated against ``SCHEMA``; every value left out is filled from
``skyrsma.config`` and its JSON pointer recorded in ``filled_defaults``.
"""
import argparse
import copy
import hashlib
import json
import logging
import math
import multiprocessing
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from skyrsma import config, verification
from skyrsma import constants_utils as cu
from skyrsma.constants_utils import ConfigError, BadConfig, UnknownAxis, SkyRsmaError
from skyrsma.physics import AreaGrid, MissionBounds, PropulsionParams, ChannelParams, UavPose
from skyrsma.access import RsmaConfig, ComputeParams
from skyrsma.scenario import ScenarioConfig, place_gts
from skyrsma.mdp import RewardConfig
from skyrsma.encode_decode import head_layout
from skyrsma.nn import save_networks, load_networks, sidecar
from skyrsma.agent import training
from skyrsma.agent.sac import SacHyper, GdrsAgent
from skyrsma.agent.dqn import DqnHyper, DqnAgent

log = logging.getLogger(__name__)


class Field(NamedTuple):
    kind: str
    default: object
    check: object = None
    choices: tuple = None
    nullable: bool = False


def _positive(v):
    return None if v > 0 else "must be positive"


def _non_negative(v):
    return None if v >= 0 else "must be non-negative"


def _at_least(n):
    return lambda v: None if v >= n else "must be at least {}".format(n)


def _fraction(v):
    return None if 0 <= v <= 1 else "must lie in [0, 1]"


def _each(check, non_empty=True):
    def checker(values):
        if non_empty and not values:
            return "must not be empty"
        for v in values:
            msg = check(v)
            if msg:
                return "entries " + msg
        return None
    return checker


def _ratio_check(values):
    rows = values if isinstance(values[0], list) else [values]
    return _each(_fraction)([v for row in rows for v in row])


def _range_check(check):
    def checker(pair):
        if pair[0] > pair[1]:
            return "lower end exceeds upper end"
        return check(pair[0]) or check(pair[1])
    return checker


_CELLS = int(cu.AREA_SIDE / cu.CELL_SPACING) + 1

SCHEMA = {
    "scenario": {
        "grid": {
            "cols": Field("int", _CELLS, _at_least(1)),
            "rows": Field("int", _CELLS, _at_least(1)),
            "spacing": Field("float", cu.CELL_SPACING, _positive),
        },
        "num_gts": Field("int", config.NUM_GTS, _at_least(1)),
        "placement_seed": Field("int", config.PLACEMENT_SEED, _non_negative),
        "gt_positions": Field("points", None, nullable=True),
        "tasks": {
            "cycles": Field("range", list(cu.TASK_CYCLES_RANGE), _range_check(_positive)),
            "bits": Field("range", list(cu.TASK_BITS_RANGE), _range_check(_positive)),
            "f_g": Field("float", cu.F_LOCAL, _positive),
        },
        "channel": {
            "carrier_frequency": Field("float", cu.CARRIER_FREQUENCY, _positive),
            "bandwidth": Field("float", cu.BANDWIDTH, _positive),
            "noise_dbm_per_hz": Field("float", cu.NOISE_DBM_PER_HZ),
            "los_alpha": Field("float", cu.LOS_ALPHA, _positive),
            "los_beta": Field("float", cu.LOS_BETA, _positive),
            "zeta_los_db": Field("float", cu.ZETA_LOS_DB, _non_negative),
            "zeta_nlos_db": Field("float", cu.ZETA_NLOS_DB, _non_negative),
        },
        "propulsion": {
            "w0": Field("float", cu.BLADE_PROFILE_POWER, _positive),
            "w1": Field("float", cu.INDUCED_POWER, _positive),
            "w2": Field("float", cu.CLIMB_POWER, _positive),
            "tip_speed": Field("float", cu.TIP_SPEED, _positive),
            "v_bar": Field("float", cu.MEAN_INDUCED_VELOCITY, _positive),
            "f0": Field("float", cu.FUSELAGE_DRAG_RATIO, _positive),
            "solidity": Field("float", cu.ROTOR_SOLIDITY, _positive),
            "rho": Field("float", cu.AIR_DENSITY, _positive),
            "disc_area": Field("float", cu.ROTOR_DISC_AREA, _positive),
        },
        "mission": {
            "h_min": Field("float", cu.H_MIN, _positive),
            "h_max": Field("float", cu.H_MAX, _positive),
            "t_min": Field("float", cu.T_MIN, _positive),
            "t_max": Field("float", cu.T_MAX, _positive),
            "vmax_h": Field("float", cu.VMAX_H, _positive),
            "vmax_v": Field("float", cu.VMAX_V, _positive),
            "n_slots": Field("int", config.N_SLOTS, _at_least(1)),
            "alt_levels": Field("int", config.ALT_LEVELS, _at_least(1)),
            "time_levels": Field("int", config.TIME_LEVELS, _at_least(1)),
            "start_pose": Field("pose", list(config.START_POSE)),
            "end_pose": Field("pose", None, nullable=True),
        },
        "rsma": {
            "sub_messages": Field("int", cu.SUB_MESSAGES, _at_least(1)),
            "p_max": Field("float", cu.P_MAX, _positive),
            "r_min": Field("float", cu.R_MIN, _non_negative),
            "mu": Field("ratios", None, _ratio_check, nullable=True),
        },
        "compute": {
            "f_u": Field("float", config.F_UAV, _positive),
        },
    },
    "access": Field("str", config.ACCESS, choices=cu.ACCESS_SCHEMES),
    "decoding": Field("str", config.DECODING, choices=cu.DECODING_POLICIES),
    "agent": Field("str", config.AGENT, choices=cu.AGENTS),
    "reward": {
        "lambda1": Field("float", config.LAMBDA1, _positive),
        "lambda2": Field("float", config.LAMBDA2, _positive),
        "c0": Field("float", config.PENALTY_C0, _positive),
        "power_grid": Field("floats", list(config.POWER_GRID), _each(_fraction)),
        "terminal_distance_weight": Field("float", config.TERMINAL_DISTANCE_WEIGHT, _non_negative),
    },
    "hyper": {
        "episodes": Field("int", config.EPISODES, _at_least(1)),
        "steps_per_episode": Field("int", config.STEPS_PER_EPISODE, _at_least(1), nullable=True),
        "eval_episodes": Field("int", config.EVAL_EPISODES, _at_least(1)),
        "discount": Field("float", config.DISCOUNT, lambda v: None if 0 <= v < 1 else "must lie in [0, 1)"),
        "temperature": Field("float", config.TEMPERATURE, _non_negative),
        "soft_update": Field("float", config.SOFT_UPDATE, lambda v: None if 0 < v <= 1 else "must lie in (0, 1]"),
        "batch_size": Field("int", config.BATCH_SIZE, _at_least(1)),
        "replay_capacity": Field("int", config.REPLAY_CAPACITY, _at_least(1)),
        "warmup": Field("int", config.WARMUP, _non_negative),
        "actor_lr": Field("float", config.LEARNING_RATE, _positive),
        "critic_lr": Field("float", config.LEARNING_RATE, _positive),
        "hidden": Field("ints", list(config.HIDDEN), _each(_at_least(1))),
        "activation": Field("str", config.ACTIVATION, choices=("tanh", "relu")),
        "optimizer": Field("str", config.OPTIMIZER, choices=("adam", "sgd")),
        "diffusion_steps": Field("int", config.DIFFUSION_STEPS, _at_least(1)),
        "phi_min": Field("float", config.PHI_MIN, _positive),
        "phi_max": Field("float", config.PHI_MAX, _positive),
        "noise_scale": Field("str", config.NOISE_SCALE, choices=("verbatim", "conventional")),
        "denoise_clip": Field("float", config.DENOISE_CLIP, _positive, nullable=True),
        "embed_dim": Field("int", config.EMBED_DIM, _at_least(2)),
        "eps_start": Field("float", config.EPS_START, _fraction),
        "eps_end": Field("float", config.EPS_END, _fraction),
        "eps_decay_steps": Field("int", config.EPS_DECAY_STEPS, _non_negative),
    },
    "seeds": Field("ints", [config.RANDOM_SEED], _each(_non_negative)),
    "output_dir": Field("str", "results"),
}

AXES = {
    "p_max": ("/scenario/rsma/p_max",),
    "n_slots": ("/scenario/mission/n_slots",),
    "task_bits": ("/scenario/tasks/bits",),
    "f_u": ("/scenario/compute/f_u",),
    "bandwidth": ("/scenario/channel/bandwidth",),
    "diffusion_steps": ("/hyper/diffusion_steps",),
    "learning_rate": ("/hyper/actor_lr", "/hyper/critic_lr"),
    "num_gts": ("/scenario/num_gts",),
    "r_min": ("/scenario/rsma/r_min",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict
    filled_defaults: tuple = ()
    source: str = None

    def to_json(self):
        return json.dumps(self.data, indent=2, sort_keys=True)

    def config_hash(self):
        canonical = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RunArtifacts(NamedTuple):
    metrics_path: str
    trajectory_path: str
    checkpoint_path: str
    manifest_path: str
    final_eta: float


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _as_int(v, pointer):
    if isinstance(v, bool) or not (isinstance(v, int) or (isinstance(v, float) and v.is_integer())):
        raise ConfigError(pointer, "must be an integer, got {!r}".format(v))
    return int(v)


def _as_float(v, pointer):
    if not _is_number(v):
        raise ConfigError(pointer, "must be a finite number, got {!r}".format(v))
    return float(v)


def _coerce(field, value, pointer):
    if value is None:
        if field.nullable:
            return None
        raise ConfigError(pointer, "must not be null")
    kind = field.kind
    if kind == "float":
        out = _as_float(value, pointer)
    elif kind == "int":
        out = _as_int(value, pointer)
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError(pointer, "must be a string")
        out = value
    elif kind in ("floats", "ints"):
        if not isinstance(value, list):
            raise ConfigError(pointer, "must be a list")
        convert = _as_float if kind == "floats" else _as_int
        out = [convert(v, "{}/{}".format(pointer, j)) for j, v in enumerate(value)]
    elif kind == "range":
        if _is_number(value):
            out = [float(value), float(value)]
        elif isinstance(value, list) and len(value) == 2:
            out = [_as_float(v, "{}/{}".format(pointer, j)) for j, v in enumerate(value)]
        else:
            raise ConfigError(pointer, "must be a number or a [low, high] pair")
    elif kind == "pose":
        if not isinstance(value, list) or len(value) != 3:
            raise ConfigError(pointer, "must be [cell, altitude level, time level]")
        out = [_as_int(v, "{}/{}".format(pointer, j)) for j, v in enumerate(value)]
    elif kind == "ratios":
        if not isinstance(value, list) or not value:
            raise ConfigError(pointer, "must be a list of fractions or one such list per GT")
        if all(isinstance(row, list) for row in value):
            out = [[_as_float(v, "{}/{}/{}".format(pointer, k, i)) for i, v in enumerate(row)]
                   for k, row in enumerate(value)]
        else:
            out = [_as_float(v, "{}/{}".format(pointer, i)) for i, v in enumerate(value)]
    elif kind == "points":
        if not isinstance(value, list) or any(not isinstance(p, list) or len(p) != 2 for p in value):
            raise ConfigError(pointer, "must be a list of [x, y] pairs")
        out = [[_as_float(v, "{}/{}/{}".format(pointer, j, c)) for c, v in enumerate(p)]
               for j, p in enumerate(value)]
    else:
        raise BadConfig("Unknown field kind {}".format(kind))
    if field.choices is not None and out not in field.choices:
        raise ConfigError(pointer, "must be one of {}, got {!r}".format(", ".join(field.choices), out))
    if field.check is not None:
        msg = field.check(out)
        if msg:
            raise ConfigError(pointer, msg)
    return out


def _fill(schema, doc, pointer, filled):
    if not isinstance(doc, dict):
        raise ConfigError(pointer, "must be an object")
    unknown = sorted(set(doc) - set(schema))
    if unknown:
        raise ConfigError("{}/{}".format(pointer, unknown[0]), "unknown key")
    out = {}
    for key, entry in schema.items():
        here = "{}/{}".format(pointer, key)
        if isinstance(entry, dict):
            out[key] = _fill(entry, doc.get(key, {}), here, filled)
        elif key in doc:
            out[key] = _coerce(entry, doc[key], here)
        else:
            out[key] = copy.deepcopy(entry.default)
            filled.append(here)
    return out


def _cross_check(data):
    s, h = data["scenario"], data["hyper"]
    if s["gt_positions"] is not None and len(s["gt_positions"]) != s["num_gts"]:
        raise ConfigError("/scenario/gt_positions", "{} positions for {} GTs".format(len(s["gt_positions"]),
                                                                                     s["num_gts"]))
    if s["rsma"]["mu"] is not None:
        mu = s["rsma"]["mu"]
        per_gt = isinstance(mu[0], list)
        if per_gt and len(mu) != s["num_gts"]:
            raise ConfigError("/scenario/rsma/mu", "{} rows for {} GTs".format(len(mu), s["num_gts"]))
        for row in (mu if per_gt else [mu]):
            if len(row) != s["rsma"]["sub_messages"] or abs(sum(row) - 1) > 1e-9:
                raise ConfigError("/scenario/rsma/mu", "needs one fraction per sub-message, summing to one")
    if s["mission"]["h_min"] > s["mission"]["h_max"]:
        raise ConfigError("/scenario/mission/h_max", "below h_min")
    if s["mission"]["t_min"] > s["mission"]["t_max"]:
        raise ConfigError("/scenario/mission/t_max", "below t_min")
    if h["steps_per_episode"] is not None and h["steps_per_episode"] > s["mission"]["n_slots"]:
        raise ConfigError("/hyper/steps_per_episode", "exceeds the {} mission slots".format(s["mission"]["n_slots"]))
    if h["phi_min"] >= h["phi_max"]:
        raise ConfigError("/hyper/phi_max", "must exceed phi_min")
    if h["batch_size"] > h["replay_capacity"]:
        raise ConfigError("/hyper/batch_size", "exceeds the replay capacity")
    if h["warmup"] > h["replay_capacity"]:
        raise ConfigError("/hyper/warmup", "exceeds the replay capacity")

    cfg = ExperimentConfig(data)
    for pointer, build in (("/scenario", build_scenario), ("/reward", build_reward), ("/hyper", build_hyper)):
        try:
            build(cfg)
        except ConfigError:
            raise
        except SkyRsmaError as e:
            raise ConfigError(pointer, str(e))


def _validate(doc):
    filled = []
    data = _fill(SCHEMA, doc, "", filled)
    _cross_check(data)
    return data, tuple(filled)


def get_pointer(data, pointer):
    node = data
    for part in pointer.strip("/").split("/"):
        if isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise ConfigError(pointer, "no such field")
    return node


def set_pointer(data, pointer, value):
    parts = pointer.strip("/").split("/")
    parent = get_pointer(data, "/" + "/".join(parts[:-1])) if len(parts) > 1 else data
    if not isinstance(parent, dict) or parts[-1] not in parent:
        raise ConfigError(pointer, "no such field")
    parent[parts[-1]] = value


def schema_field(pointer):
    node = SCHEMA
    for part in pointer.strip("/").split("/"):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node if isinstance(node, Field) else None


def warn_envelopes(cfg):
    for pointer, (lo, hi) in config.ENVELOPES.items():
        value = get_pointer(cfg.data, pointer)
        ends = value if isinstance(value, list) else [value]
        if any(v < lo or v > hi for v in ends):
            log.warning("%s = %s lies outside the reference range [%s, %s]; accepted as an explicit override",
                        pointer, value, lo, hi)


def parse_config(doc, source=None):
    data, filled = _validate(doc)
    cfg = ExperimentConfig(data, filled, source)
    if filled:
        log.info("Filled %d config defaults", len(filled))
        log.debug("Defaults filled at %s", ", ".join(filled))
    warn_envelopes(cfg)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as file:
            doc = json.load(file)
    except OSError as e:
        raise ConfigError("", "cannot read {}: {}".format(path, e))
    except json.JSONDecodeError as e:
        raise ConfigError("", "{} is not valid JSON: {}".format(path, e))
    return parse_config(doc, source=path)


def with_overrides(cfg, overrides):
    """New config with the given ``{pointer: value}`` replacements, re-validated."""
    data = copy.deepcopy(cfg.data)
    for pointer, value in overrides.items():
        set_pointer(data, pointer, value)
    data, _ = _validate(data)
    filled = tuple(p for p in cfg.filled_defaults if p not in overrides)
    return ExperimentConfig(data, filled, cfg.source)


def build_scenario(cfg):
    s = cfg.data["scenario"]
    grid = AreaGrid(s["grid"]["cols"], s["grid"]["rows"], s["grid"]["spacing"], s["grid"]["spacing"])
    m = s["mission"]
    start = UavPose(*m["start_pose"])
    end = UavPose(*m["end_pose"]) if m["end_pose"] is not None else start
    bounds = MissionBounds(m["h_min"], m["h_max"], m["t_min"], m["t_max"], m["vmax_h"], m["vmax_v"], start, end,
                           m["n_slots"], m["alt_levels"], m["time_levels"])
    ch = s["channel"]
    channel = ChannelParams(ch["los_alpha"], ch["los_beta"], ch["zeta_los_db"], ch["zeta_nlos_db"],
                            ch["carrier_frequency"], cu.SPEED_OF_LIGHT, ch["bandwidth"],
                            cu.dbm_per_hz_to_watts(ch["noise_dbm_per_hz"]))
    t = s["tasks"]
    gts = place_gts(grid, s["num_gts"], s["placement_seed"], tuple(t["cycles"]), tuple(t["bits"]), t["f_g"],
                    s["gt_positions"])
    r = s["rsma"]
    if r["mu"] is None:
        rsma = RsmaConfig.uniform(s["num_gts"], r["sub_messages"], r["p_max"], r["r_min"])
    else:
        mu = np.asarray(r["mu"], dtype=float)
        if mu.ndim == 1:
            mu = np.tile(mu, (s["num_gts"], 1))
        rsma = RsmaConfig(r["sub_messages"], mu, r["p_max"], r["r_min"])
    return ScenarioConfig(grid, bounds, PropulsionParams(**s["propulsion"]), channel, gts, rsma,
                          ComputeParams(s["compute"]["f_u"]), cfg.data["access"], cfg.data["decoding"])


def build_reward(cfg):
    r = cfg.data["reward"]
    return RewardConfig(r["lambda1"], r["lambda2"], r["c0"], tuple(r["power_grid"]), r["terminal_distance_weight"])


def build_hyper(cfg, agent=None):
    h = cfg.data["hyper"]
    agent = agent or cfg.data["agent"]
    if agent == "gdrs":
        return SacHyper(h["discount"], h["temperature"], h["soft_update"], h["batch_size"], h["replay_capacity"],
                        h["warmup"], h["actor_lr"], h["critic_lr"], tuple(h["hidden"]), h["activation"],
                        h["optimizer"], h["diffusion_steps"], h["phi_min"], h["phi_max"], h["noise_scale"],
                        h["denoise_clip"], h["embed_dim"])
    if agent == "dqn":
        return DqnHyper(h["discount"], h["critic_lr"], h["soft_update"], h["batch_size"], h["replay_capacity"],
                        h["warmup"], h["eps_start"], h["eps_end"], h["eps_decay_steps"], tuple(h["hidden"]),
                        h["activation"], h["optimizer"])
    return None


def seed_dir(cfg, seed):
    return os.path.join(cfg.data["output_dir"], "seed_{}".format(seed))


def write_manifest(cfg, seed, folder):
    manifest = {
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "version": cu.VERSION,
        "filled_defaults": list(cfg.filled_defaults),
        "config": cfg.data,
    }
    path = os.path.join(folder, "manifest.json")
    with open(path, "w", encoding="utf-8") as file:
        json.dump(manifest, file, indent=2, sort_keys=True)
    return path


def run(cfg, seed):
    """One training (or random-policy) run; writes metrics, trajectory, checkpoint and manifest."""
    scenario = build_scenario(cfg)
    reward_cfg = build_reward(cfg)
    hyper = build_hyper(cfg)
    h = cfg.data["hyper"]
    agent_kind = cfg.data["agent"]
    if scenario.access != "rsma":
        log.info("Access scheme %s decodes one message per GT; decoding policy '%s' ignored", scenario.access,
                 scenario.decoding)
    folder = seed_dir(cfg, seed)
    os.makedirs(folder, exist_ok=True)
    log.info("Run %s/%s/%s seed %d -> %s", agent_kind, scenario.access, scenario.decoding, seed, folder)

    if agent_kind == "gdrs":
        result = training.train(scenario, hyper, reward_cfg, h["episodes"], h["steps_per_episode"], seed)
    elif agent_kind == "dqn":
        result = training.dqn_train(scenario, hyper, reward_cfg, h["episodes"], h["steps_per_episode"], seed)
    else:
        result = training.random_run(scenario, reward_cfg, h["episodes"], h["steps_per_episode"], seed)

    metrics_path = os.path.join(folder, "metrics.csv")
    cu.write_csv(metrics_path, training.METRICS_HEADER, result.metrics)
    trajectory_path = os.path.join(folder, "trajectory.csv")
    cu.write_csv(trajectory_path, *result.trajectory)
    checkpoint_path = None
    if result.agent is not None:
        checkpoint_path = os.path.join(folder, "checkpoint.bin")
        info = dict(agent=agent_kind, hyper=hyper.as_dict(), seed=seed, episodes=h["episodes"],
                    head_layout=list(result.agent.head_layout), state_dim=result.agent.state_dim,
                    config_hash=cfg.config_hash())
        save_networks(checkpoint_path, result.agent.networks(), sidecar=info)
    manifest_path = write_manifest(cfg, seed, folder)
    final_eta = training.final_window_eta(result.etas, config.FINAL_WINDOW_FRACTION)
    log.info("Seed %d final-window eta %.6g bits/J", seed, final_eta)
    return RunArtifacts(metrics_path, trajectory_path, checkpoint_path, manifest_path, final_eta)


def restore_agent(checkpoint_path, layout, seed=0):
    info = sidecar(checkpoint_path)
    if list(layout) != list(info["head_layout"]):
        raise BadConfig("Checkpoint heads {} do not match the scenario {}".format(info["head_layout"], list(layout)))
    hyper = dict(info["hyper"], hidden=tuple(info["hyper"]["hidden"]))
    if info["agent"] == "gdrs":
        agent = GdrsAgent(info["state_dim"], layout, SacHyper(**hyper), seed=seed)
    elif info["agent"] == "dqn":
        agent = DqnAgent(info["state_dim"], layout, DqnHyper(**hyper), seed=seed)
    else:
        raise BadConfig("Checkpoint holds no learnable agent ({})".format(info["agent"]))
    agent.load_networks(load_networks(checkpoint_path))
    return agent, info


def evaluate_run(cfg, seed, checkpoint_path):
    """Frozen-policy rollouts of a saved agent; writes eval_metrics.csv and eval_trajectory.csv."""
    scenario = build_scenario(cfg)
    reward_cfg = build_reward(cfg)
    h = cfg.data["hyper"]
    agent, info = restore_agent(checkpoint_path, head_layout(scenario, reward_cfg), seed)
    result = training.evaluate(scenario, agent, reward_cfg, h["eval_episodes"], h["steps_per_episode"], seed,
                               greedy=info["agent"] == "dqn")
    folder = seed_dir(cfg, seed)
    os.makedirs(folder, exist_ok=True)
    metrics_path = os.path.join(folder, "eval_metrics.csv")
    cu.write_csv(metrics_path, training.METRICS_HEADER, result.metrics)
    trajectory_path = os.path.join(folder, "eval_trajectory.csv")
    cu.write_csv(trajectory_path, *result.trajectory)
    manifest_path = write_manifest(cfg, seed, folder)
    final_eta = float(np.mean(result.etas))
    log.info("Evaluation over %d episodes: mean eta %.6g bits/J", len(result.metrics), final_eta)
    return RunArtifacts(metrics_path, trajectory_path, checkpoint_path, manifest_path, final_eta)


def axis_pointers(axis):
    if axis in AXES:
        return AXES[axis]
    if axis.startswith("/"):
        field = schema_field(axis)
        if field is not None and field.kind in ("float", "int", "range"):
            return (axis,)
    raise UnknownAxis("Unknown sweep axis {}; use one of {} or a pointer to a numeric field".format(
        axis, ", ".join(AXES)))


def final_eta_from_csv(path, fraction=config.FINAL_WINDOW_FRACTION):
    header, rows = cu.read_csv(path)
    col = header.index("eta")
    return training.final_window_eta([float(row[col]) for row in rows], fraction)


def summarise_sweep(run_rows):
    """(axis, value, n_runs, eta_mean, eta_std) per value, in first-seen order; std is the population std."""
    groups = {}
    for axis, value, _, eta in run_rows:
        groups.setdefault((axis, value), []).append(eta)
    return [[axis, value, len(etas), float(np.mean(etas)), float(np.std(etas))]
            for (axis, value), etas in groups.items()]


def _sweep_job(data, filled, seed):
    return run(ExperimentConfig(data, tuple(filled)), seed).metrics_path


def sweep(cfg, axis, values, workers=1):
    """
    One run per (value, seed) with the axis field(s) set to the value. Runs write into
    ``<output_dir>/sweep_<axis>/<value>/``; the summary is computed from their metrics CSVs.
    """
    pointers = axis_pointers(axis)
    out = cfg.data["output_dir"]
    label = axis.strip("/").replace("/", "_")
    keys, jobs = [], []
    for value in values:
        overrides = {p: value for p in pointers}
        overrides["/output_dir"] = os.path.join(out, "sweep_{}".format(label), str(value))
        point = with_overrides(cfg, overrides)
        for seed in point.data["seeds"]:
            keys.append((value, seed))
            jobs.append((point.data, list(point.filled_defaults), seed))
    log.info("Sweep over %s: %d values x %d seeds on %d workers", label, len(values), len(cfg.data["seeds"]),
             workers)
    if workers > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            paths = pool.starmap(_sweep_job, jobs)
    else:
        paths = [_sweep_job(*job) for job in jobs]

    run_rows = [[label, value, seed, final_eta_from_csv(path)] for (value, seed), path in zip(keys, paths)]
    summary = summarise_sweep(run_rows)
    cu.write_csv(os.path.join(out, "sweep_runs.csv"), ["axis", "value", "seed", "final_eta"], run_rows)
    cu.write_csv(os.path.join(out, "sweep_summary.csv"), ["axis", "value", "n_runs", "eta_mean", "eta_std"], summary)
    return summary


def verify(suite):
    """Runs a verification suite (or ``all``), logs one line per property, returns True when all pass."""
    names = verification.SUITES if suite == "all" else (suite,)
    ok = True
    for name in names:
        for check in verification.run_suite(name):
            (log.info if check.ok else log.error)("%s", check.line())
            ok = ok and check.ok
    return ok


def _parse_value(text):
    try:
        return int(text)
    except ValueError:
        return float(text)


def build_parser():
    verbosity = argparse.ArgumentParser(add_help=False)
    verbosity.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    verbosity.add_argument("--quiet", action="store_true", help="log warnings and errors only")

    common = argparse.ArgumentParser(add_help=False, parents=[verbosity])
    common.add_argument("--config", help="experiment config (JSON); defaults are used when omitted")
    common.add_argument("--seed", type=int, help="run this seed instead of the config's seed list")
    common.add_argument("--out", help="output directory")
    common.add_argument("--access", choices=cu.ACCESS_SCHEMES)
    common.add_argument("--decoding", choices=cu.DECODING_POLICIES)
    common.add_argument("--agent", choices=cu.AGENTS)
    common.add_argument("--workers", type=int, default=config.SWEEP_WORKERS, help="parallel sweep points")

    parser = argparse.ArgumentParser(prog="runproject.py",
                                     description="RSMA UAV edge-computing simulator with diffusion-policy SAC")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train and write metrics, trajectory and checkpoint")
    evaluate = sub.add_parser("evaluate", parents=[common], help="frozen-policy rollouts of a checkpoint")
    evaluate.add_argument("--checkpoint", required=True)
    sweep_parser = sub.add_parser("sweep", parents=[common], help="one run per value and seed")
    sweep_parser.add_argument("--axis", required=True)
    sweep_parser.add_argument("--values", required=True, help="comma separated values")
    check = sub.add_parser("verify", parents=[verbosity], help="run a property suite")
    check.add_argument("suite", choices=verification.SUITES + ("all",))
    return parser


def apply_cli_overrides(cfg, args):
    overrides = {}
    if args.seed is not None:
        overrides["/seeds"] = [args.seed]
    if args.out is not None:
        overrides["/output_dir"] = args.out
    for name in ("access", "decoding", "agent"):
        if getattr(args, name) is not None:
            overrides["/" + name] = getattr(args, name)
    return with_overrides(cfg, overrides) if overrides else cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.verbose:
        cu.log.setLevel(logging.DEBUG)
    elif args.quiet:
        cu.log.setLevel(logging.WARNING)
    try:
        if args.command == "verify":
            return 0 if verify(args.suite) else 2
        cfg = load_config(args.config) if args.config else parse_config({})
        cfg = apply_cli_overrides(cfg, args)
        if args.command == "train":
            for seed in cfg.data["seeds"]:
                run(cfg, seed)
        elif args.command == "evaluate":
            for seed in cfg.data["seeds"]:
                evaluate_run(cfg, seed, args.checkpoint)
        else:
            sweep(cfg, args.axis, [_parse_value(v) for v in args.values.split(",")], args.workers)
    except SkyRsmaError as e:
        log.error("%s", e)
        return 1
    return 0
