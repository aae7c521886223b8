"""Experiment orchestration: seeded evaluation batches, training runs with
persisted artifacts, threshold assertions, and plot-data export.

Episodes in a batch are independent; with `workers > 1` they are distributed
over a process pool and reduced in seed order, so output files are identical
regardless of worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    CohesionParams,
    P2PConfig,
    P2PController,
    cohesive_init_episode,
    cohesive_target_step,
)
from .config import ExperimentConfig
from .control import (
    DQNDrivingPolicy,
    DQNSelectionPolicy,
    HierarchicalController,
    MAPPOSelectionPolicy,
    PPODrivingPolicy,
    RewardGains,
    decode_discrete_action,
    driving_reward,
    selection_reward,
)
from .dqn import DQNHyper
from .envs import BatchDrivingEnv, BatchSelectionEnv
from .episode import run_episode
from .extensions import (
    make_sigmoid_goal_trajectory,
    topological_filter,
    tracking_containment_fraction,
)
from .mappo import mappo_hyper
from .metrics import episode_metrics, write_summary_csv
from .nets import forward
from .ppo import PPOHyper
from .sim import SimParams
from .weights import PolicyBundle, load_manifest, load_policy, save_policy

SCENARIO_AGENTS = {
    "drive-1v1": (1, 1),
    "select-2v5": (2, 5),
    "benchmark": (2, 5),
    "track": (2, 5),
    "scale-5v50": (5, 50),
}
SCENARIO_T_MAX = {
    "drive-1v1": 60.0,
    "select-2v5": 150.0,
    "benchmark": 150.0,
    "track": 250.0,
    "scale-5v50": 300.0,
}
DESK_EPISODES = {"dqn": 2_000, "ppo": 5_000, "mappo": 20_000, "dqn-select": 50_000}
PAPER_EPISODES = {"dqn": 5_000, "ppo": 20_000, "mappo": 200_000, "dqn-select": 400_000}
CURVE_WINDOW = {"dqn": 100, "ppo": 1_000, "mappo": 5_000, "dqn-select": 5_000}


def output_root() -> Path:
    return Path(os.environ.get("SHEPHERDING_OUT", "."))


def artifacts_root() -> Path:
    return Path(os.environ.get("SHEPHERDING_ARTIFACTS", "artifacts"))


def resolve_out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg["out_dir"])
    return out if out.is_absolute() else output_root() / out


def sim_params(cfg: ExperimentConfig, training: bool = False) -> SimParams:
    scenario = cfg["scenario"]
    n, m = SCENARIO_AGENTS.get(scenario, (1, 1))
    if cfg["sim.n_herders"]:
        n = cfg["sim.n_herders"]
    if cfg["sim.n_targets"]:
        m = cfg["sim.n_targets"]
    return SimParams(
        zeta=cfg["sim.zeta"],
        diffusion=cfg["sim.diffusion"],
        lam=cfg["sim.lambda"],
        beta=cfg["train.beta"] if training else cfg["sim.beta"],
        r_c=cfg["sim.r_c"],
        v_max=cfg["sim.v_max"],
        rho_0=cfg["sim.rho_0"],
        rho_G=cfg["sim.rho_G"],
        dt=cfg["train.dt"] if training else cfg["sim.dt"],
        n_herders=n,
        n_targets=m,
    )


def scenario_t_max(cfg: ExperimentConfig) -> float:
    return cfg["t_max"] or SCENARIO_T_MAX[cfg["scenario"]]


def default_weights_path(kind: str) -> Path:
    name = {"dqn": "driving_dqn", "ppo": "driving_ppo",
            "mappo": "selection_mappo", "dqn-select": "selection_dqn"}[kind]
    return artifacts_root() / f"{name}.npw"


def _weights_path(cfg, key, kind) -> Path:
    path = Path(cfg[key]) if cfg[key] else default_weights_path(kind)
    if not path.exists():
        raise FileNotFoundError(
            f"missing weights for {kind!r}: {path} (train it first or set {key})")
    return path


def driving_policy_from_bundle(bundle: PolicyBundle):
    v_max = bundle.constants["v_max"]
    if bundle.algorithm == "dqn":
        return DQNDrivingPolicy(bundle.nets["q"], v_max)
    return PPODrivingPolicy(bundle.nets["actor"], v_max, bundle.constants["rho_0"])


def selection_policy_from_bundle(bundle: PolicyBundle):
    if bundle.algorithm == "dqn-select":
        return DQNSelectionPolicy(bundle.nets["q"])
    return MAPPOSelectionPolicy(bundle.nets["actor"], bundle.constants["rho_0"])


def driving_fn_from_bundle(bundle: PolicyBundle):
    """Vectorized driving policy for the selection environments; returns the
    function plus the observation layout it expects."""
    v_max = bundle.constants["v_max"]
    if bundle.algorithm == "dqn":
        table = np.stack([decode_discrete_action(i, v_max) for i in range(25)])

        def fn(obs):
            return table[np.argmax(forward(bundle.nets["q"], obs), axis=1)]

        return fn, "dqn"

    net = bundle.nets["actor"]

    def fn(obs):
        return v_max * forward(net, obs)

    return fn, "ppo"


def perturbed_params(params: SimParams, seed: int, magnitude: float) -> SimParams:
    """Per-episode robustness perturbation of (diffusion, zeta, lambda),
    each drawn once from a Gaussian with the given relative std."""
    rng = np.random.default_rng([seed, 0x0B0B])
    g = rng.standard_normal(3)
    return params.with_(
        diffusion=max(params.diffusion * (1 + magnitude * g[0]), 0.0),
        zeta=max(params.zeta * (1 + magnitude * g[1]), 1e-6),
        lam=max(params.lam * (1 + magnitude * g[2]), 0.0),
    )


def heuristic_stack_requested(cfg: ExperimentConfig) -> bool:
    if cfg["scenario"] == "drive-1v1":
        return cfg["policy.driving"] == "p2p"
    return cfg["policy.selection"] == "p2p"


def build_controller(cfg: ExperimentConfig, params: SimParams, stack: str):
    """Assemble the controller plus the reward function used for logging;
    `stack` picks the learned or the heuristic pipeline."""
    scenario = cfg["scenario"]
    if stack == "heuristic":
        ctrl = P2PController(P2PConfig(cfg["control.standoff"],
                                       cfg["control.p_gain"]), params)
        return ctrl, None

    drv_kind = cfg["policy.driving"]
    bundle = load_policy(_weights_path(cfg, "weights.driving", drv_kind))
    driving = driving_policy_from_bundle(bundle)
    gains = RewardGains.for_dqn() if drv_kind == "dqn" else RewardGains.for_ppo()

    if scenario == "drive-1v1":
        ctrl = HierarchicalController(driving, None, params,
                                      n_w=cfg["control.n_w"], evaluate=True)
        reward_fn = partial(_driving_reward_fn, gains=gains, rho_G=params.rho_G)
        return ctrl, reward_fn

    sel_kind = cfg["policy.selection"]
    sel_bundle = load_policy(_weights_path(cfg, "weights.selection", sel_kind))
    selection = selection_policy_from_bundle(sel_bundle)
    view_fn = None
    if scenario == "scale-5v50":
        view_fn = _ViewFn(cfg["sensing.n_obs"], cfg["sensing.m_obs"])
    ctrl = HierarchicalController(driving, selection, params,
                                  n_w=cfg["control.n_w"], evaluate=True,
                                  view_fn=view_fn)
    k_t = 1.0 if sel_kind == "dqn" else 0.01
    reward_fn = partial(_selection_reward_fn, k_t=k_t, rho_G=params.rho_G)
    return ctrl, reward_fn


class _ViewFn:
    """Picklable wrapper for the topological sensing budgets."""

    def __init__(self, n_obs, m_obs):
        self.n_obs = n_obs
        self.m_obs = m_obs

    def __call__(self, state, herder_idx):
        return topological_filter(state, herder_idx, self.n_obs, self.m_obs)


def _driving_reward_fn(state, controls, selections, gains, rho_G):
    return [driving_reward(state, controls[0], gains, rho_G)]


def _selection_reward_fn(state, controls, selections, k_t, rho_G):
    return [selection_reward(state, k_t, rho_G)] * state.n_herders


def run_one(cfg_text: str, stack: str, seed: int, traj_path: str | None = None) -> dict:
    """One seeded episode -> summary row. Module-level so a process pool can
    run it; everything is rebuilt from the serialized config."""
    from .config import parse_config

    cfg = parse_config(cfg_text)
    params = sim_params(cfg)
    if cfg["robustness.enabled"]:
        params = perturbed_params(params, seed, cfg["robustness.magnitude"])
    ctrl, reward_fn = build_controller(cfg, params, stack)

    t_max = scenario_t_max(cfg)
    goal_traj = None
    if cfg["scenario"] == "track" or cfg["goal.trajectory"] == "sigmoid":
        goal_traj = make_sigmoid_goal_trajectory(
            (cfg["goal.start_x"], cfg["goal.start_y"]),
            (cfg["goal.end_x"], cfg["goal.end_y"]),
            speed_ratio=cfg["goal.speed_ratio"],
            agent_speed=params.v_max,
            steepness=cfg["goal.steepness"])
    target_step = None
    init_state = None
    if cfg["targets.cohesive"]:
        cohesion = CohesionParams(cfg["targets.cohesion_gain"])
        target_step = partial(_cohesive_step, cohesion=cohesion)
        init_state = cohesive_init_episode(params, seed)

    log = run_episode(ctrl, params, seed, t_max, cfg["t_contain"],
                      chi_star=cfg["chi_star"], goal_trajectory=goal_traj,
                      target_step=target_step, init_state=init_state,
                      reward_fn=reward_fn)
    m = episode_metrics(log, cfg["chi_star"], cfg["t_contain"], t_max)
    row = {"seed": seed, **m.row()}
    row["chi_max"] = float(m.chi_series.max())
    if cfg["scenario"] == "track":
        row["track_frac"] = tracking_containment_fraction(log, cfg["chi_star"])
    if traj_path:
        log.write_csv(traj_path, provenance=cfg.provenance(__version__))
    return row


def _cohesive_step(state, params, rng, cohesion):
    return cohesive_target_step(state, cohesion, params, rng)


def run_batch(cfg: ExperimentConfig) -> dict:
    """Run the configured scenario over seeds seed_base..seed_base+episodes-1
    and write summary CSVs (plus optional trajectory logs). Returns the rows
    and file paths per stack."""
    out = resolve_out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.serialize())
    if cfg["scenario"] == "benchmark":
        stacks = ["learned", "heuristic"]
    else:
        stacks = ["heuristic" if heuristic_stack_requested(cfg) else "learned"]
    seeds = list(range(cfg["seed_base"], cfg["seed_base"] + cfg["episodes"]))
    cfg_text = cfg.serialize()
    extra_cols = ["chi_max"] + (["track_frac"] if cfg["scenario"] == "track" else [])

    results = {}
    for stack in stacks:
        traj_dir = None
        if cfg["save_trajectories"]:
            traj_dir = out / ("trajectories" if len(stacks) == 1
                              else f"trajectories_{stack}")
            traj_dir.mkdir(exist_ok=True)
        jobs = [(cfg_text, stack, s,
                 str(traj_dir / f"ep_{s}.csv") if traj_dir else None)
                for s in seeds]
        if cfg["workers"] > 1:
            with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
                rows = list(pool.map(_run_one_star, jobs, chunksize=1))
        else:
            rows = [_run_one_star(job) for job in jobs]
        rows.sort(key=lambda r: r["seed"])
        name = "summary.csv" if len(stacks) == 1 else f"summary_{stack}.csv"
        path = out / name
        write_summary_csv(path, rows, provenance=cfg.provenance(__version__),
                          extra_columns=extra_cols)
        results[stack] = {"rows": rows, "summary": path}
    return results


def _run_one_star(job):
    return run_one(*job)


def check_thresholds(cfg: ExperimentConfig, results: dict) -> list[str]:
    """Evaluate the acceptance thresholds for this scenario; returns failure
    messages (empty = pass)."""
    failures = []
    scenario = cfg["scenario"]

    def rate(rows, key="success"):
        return float(np.mean([r[key] for r in rows]))

    def median(rows, key, none_as_inf=False):
        vals = np.array([r[key] for r in rows], dtype=float)
        if none_as_inf:
            vals = np.where(np.isnan(vals), np.inf, vals)
        else:
            vals = vals[np.isfinite(vals)]
        return float(np.median(vals)) if vals.size else float("nan")

    if scenario == "drive-1v1":
        need = 0.95 if cfg["policy.driving"] == "ppo" else 0.80
        got = rate(results["learned" if "learned" in results else "heuristic"]["rows"])
        if got < need:
            failures.append(f"driving success {got:.3f} < {need}")
    elif scenario == "select-2v5":
        rows = results["learned"]["rows"]
        need = 0.95 if cfg["robustness.enabled"] else 0.90
        got = rate(rows)
        if got < need:
            failures.append(f"selection success {got:.3f} < {need}")
        if not cfg["robustness.enabled"]:
            psi = median(rows, "psi_g")
            if not psi > 0.5:
                failures.append(f"median cooperation at gathering {psi:.3f} <= 0.5")
    elif scenario == "benchmark":
        heur = results["heuristic"]["rows"]
        gather_rate = float(np.mean([np.isfinite(r["t_g"]) for r in heur]))
        if gather_rate < 1.0:
            failures.append(f"heuristic gathering success {gather_rate:.3f} < 1.0")
        learned_ts = median(results["learned"]["rows"], "t_s", none_as_inf=True)
        heur_ts = median(heur, "t_s", none_as_inf=True)
        if not learned_ts <= heur_ts:
            failures.append(
                f"learned median settling {learned_ts:.1f} > heuristic {heur_ts:.1f}")
    elif scenario == "scale-5v50":
        rows = results["learned"]["rows"]
        full = float(np.mean([r["chi_max"] >= 1.0 for r in rows]))
        if full < 3 / 5:
            failures.append(f"full containment in {full:.2f} of runs < 0.6")
    elif scenario == "track":
        frac = median(results["learned"]["rows"], "track_frac")
        if not frac >= 0.9:
            failures.append(f"median tracking containment {frac:.3f} < 0.9")
    return failures


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average with a growing window over the first samples."""
    x = np.asarray(x, dtype=float)
    c = np.concatenate(([0.0], np.cumsum(x)))
    n = np.minimum(np.arange(1, x.size + 1), window)
    start = np.arange(1, x.size + 1) - n
    return (c[1:] - c[start]) / n


def _write_curve(path, curve, window, provenance, start_episode=0):
    smoothed = moving_average(curve, window)
    mode = "a" if start_episode else "w"
    with open(path, mode) as fh:
        if not start_episode:
            fh.write(f"# {provenance}\n")
            fh.write("episode,reward,smoothed\n")
        for i, (r, s) in enumerate(zip(curve, smoothed)):
            fh.write("%d,%.9g,%.9g\n" % (start_episode + i, r, s))


def train(cfg: ExperimentConfig) -> dict:
    """Train the configured algorithm, persist weights + manifest + learning
    curve, and return the artifact paths."""
    algorithm = cfg["train.algorithm"]
    episodes = cfg["train.episodes"] or \
        (DESK_EPISODES if cfg["train.preset"] == "desk" else PAPER_EPISODES)[algorithm]
    seed = cfg["train.seed"]
    out = resolve_out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    name = {"dqn": "driving_dqn", "ppo": "driving_ppo",
            "mappo": "selection_mappo", "dqn-select": "selection_dqn"}[algorithm]
    weights_file = out / f"{name}.npw"
    curve_file = out / f"curve_{name}.csv"

    start_episode = 0
    resume_bundle = None
    if cfg["train.resume"] and weights_file.exists():
        resume_bundle = load_policy(weights_file)
        start_episode = load_manifest(weights_file)["episodes_trained"]
        if start_episode >= episodes:
            return {"weights": weights_file, "curve": curve_file,
                    "episodes_trained": start_episode}

    remaining = episodes - start_episode
    scn = "drive-1v1" if algorithm in ("dqn", "ppo") else "select-2v5"
    params = sim_params(cfg.copy(scenario=scn), training=True)
    bundle, curve = _train_algorithm(cfg, algorithm, params, remaining, seed,
                                     resume_bundle, start_episode)

    manifest = {
        "algorithm": algorithm,
        "episodes_trained": episodes,
        "seed": seed,
        "preset": cfg["train.preset"],
        "sim": {f: getattr(params, f) for f in
                ("zeta", "diffusion", "lam", "beta", "r_c", "v_max",
                 "rho_0", "rho_G", "dt", "n_herders", "n_targets")},
        "hyper": _hyper_dict(cfg, algorithm),
        "t_max": SCENARIO_T_MAX[scn],
        "t_contain": cfg["t_contain"],
        "config_sha256": cfg.sha256(),
        "version": __version__,
        "resumed_from": start_episode or None,
    }
    save_policy(weights_file, bundle, manifest=manifest)
    _write_curve(curve_file, curve, CURVE_WINDOW[algorithm],
                 cfg.provenance(__version__), start_episode=start_episode)
    return {"weights": weights_file, "curve": curve_file,
            "episodes_trained": episodes}


def _hyper_dict(cfg, algorithm):
    hyper = _build_hyper(cfg, algorithm)
    return {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in hyper.__dict__.items()}


def _build_hyper(cfg, algorithm):
    over = cfg.hyper_overrides(algorithm)
    if "hidden" in over:
        over["hidden"] = tuple(int(x) for x in str(over["hidden"]).split("x"))
    if algorithm == "dqn":
        return DQNHyper(**over)
    if algorithm == "dqn-select":
        return DQNHyper.selection(**over)
    if algorithm == "ppo":
        return PPOHyper(**over)
    return mappo_hyper(**over)


def _train_algorithm(cfg, algorithm, params, episodes, seed, resume_bundle,
                     start_episode):
    from .dqn import DQNTrainer
    from .mappo import MAPPOTrainer
    from .ppo import PPOTrainer

    hyper = _build_hyper(cfg, algorithm)
    n_w = cfg["control.n_w"]
    constants = {"v_max": params.v_max, "rho_0": params.rho_0}

    if algorithm in ("dqn", "dqn-select"):
        if algorithm == "dqn":
            env = BatchDrivingEnv(params, RewardGains.for_dqn(), batch=1,
                                  train_seed=seed, obs_mode="dqn",
                                  action_mode="discrete", t_max=60.0,
                                  t_contain=cfg["t_contain"],
                                  chi_star=cfg["chi_star"], auto_reset=False)
        else:
            driving_fn, drv_obs = _frozen_driver(cfg)
            env = BatchSelectionEnv(params, k_t=1.0, driving_fn=driving_fn,
                                    batch=1, train_seed=seed, n_w=n_w,
                                    obs_scale=None, driving_obs_mode=drv_obs,
                                    t_max=150.0, t_contain=cfg["t_contain"],
                                    chi_star=cfg["chi_star"], auto_reset=False)
        trainer = DQNTrainer(env, hyper, seed)
        if resume_bundle is not None:
            trainer.net.set_from(resume_bundle.nets["q"])
            trainer.target.set_from(resume_bundle.nets["q"])
        curve = np.empty(episodes)
        for ep in range(episodes):
            curve[ep] = trainer.run_episode(start_episode + ep)
            if (ep + 1) % 100 == 0:
                _progress(f"{algorithm}: episode {ep + 1}/{episodes} "
                          f"mean100={curve[max(0, ep - 99):ep + 1].mean():.1f}")
        return PolicyBundle(algorithm, {"q": trainer.net},
                            constants=constants), curve

    if algorithm == "ppo":
        env = BatchDrivingEnv(params, RewardGains.for_ppo(), batch=hyper.actors,
                              train_seed=seed, obs_mode="ppo",
                              action_mode="continuous", t_max=60.0,
                              t_contain=cfg["t_contain"], chi_star=cfg["chi_star"])
        trainer = PPOTrainer(env, hyper, seed)
        if resume_bundle is not None:
            trainer.actor.net.set_from(resume_bundle.nets["actor"])
            trainer.critic.set_from(resume_bundle.nets["critic"])
            trainer.actor.log_std[...] = resume_bundle.extras["log_std"]
        curve = trainer.train(episodes, progress=_cycle_progress("ppo", episodes))
        return PolicyBundle("ppo", {"actor": trainer.actor.net,
                                    "critic": trainer.critic},
                            extras={"log_std": trainer.actor.log_std},
                            constants=constants), curve

    driving_fn, drv_obs = _frozen_driver(cfg)
    env = BatchSelectionEnv(params, k_t=0.01, driving_fn=driving_fn,
                            batch=hyper.actors, train_seed=seed, n_w=n_w,
                            obs_scale=params.rho_0, driving_obs_mode=drv_obs,
                            t_max=150.0, t_contain=cfg["t_contain"],
                            chi_star=cfg["chi_star"])
    trainer = MAPPOTrainer(env, hyper, seed)
    if resume_bundle is not None:
        trainer.actor.set_from(resume_bundle.nets["actor"])
        trainer.critic.set_from(resume_bundle.nets["critic"])
    curve = trainer.train(episodes, progress=_cycle_progress("mappo", episodes))
    return PolicyBundle("mappo", {"actor": trainer.actor,
                                  "critic": trainer.critic},
                        constants=constants), curve


def _progress(msg: str):
    import sys

    print(msg, file=sys.stderr, flush=True)


def _cycle_progress(tag: str, episodes: int):
    def cb(done: int):
        _progress(f"{tag}: {min(done, episodes)}/{episodes} episodes")

    return cb


def _frozen_driver(cfg):
    driver_path = Path(cfg["train.driving_weights"]) if cfg["train.driving_weights"] \
        else default_weights_path("ppo")
    if not driver_path.exists():
        raise FileNotFoundError(
            f"selection training needs a trained driving policy: {driver_path}")
    return driving_fn_from_bundle(load_policy(driver_path))


PLOT_SCRIPT = '''\
#!/usr/bin/env python3
"""Render the exported batch data (box plots, learning curves, traces).

Usage: python plot_results.py [data_dir]
"""
import csv
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def main():
    data = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
    box = data / "boxplot_data.csv"
    if box.exists():
        rows = read_rows(box)
        fig, ax = plt.subplots(figsize=(8, 4))
        labels = [f"{r['stack']}:{r['metric']}" for r in rows]
        stats = [{
            "med": float(r["median"]), "q1": float(r["q1"]), "q3": float(r["q3"]),
            "whislo": float(r["lo"]), "whishi": float(r["hi"]), "label": lab,
        } for r, lab in zip(rows, labels)]
        ax.bxp(stats, showfliers=False)
        ax.tick_params(axis="x", rotation=60)
        fig.tight_layout()
        fig.savefig(data / "boxplots.png", dpi=150)
    for curve in sorted(data.glob("curve_*.csv")):
        rows = read_rows(curve)
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.plot([float(r["episode"]) for r in rows],
                [float(r["reward"]) for r in rows], alpha=0.2, label="raw")
        ax.plot([float(r["episode"]) for r in rows],
                [float(r["smoothed"]) for r in rows], label="smoothed")
        ax.set_xlabel("episode")
        ax.set_ylabel("episode reward")
        ax.legend()
        fig.tight_layout()
        fig.savefig(data / (curve.stem + ".png"), dpi=150)
    radial = data / "radial_traces.csv"
    if radial.exists():
        rows = read_rows(radial)
        cols = [c for c in rows[0] if c.startswith("t") and c.endswith("_dist")]
        fig, ax = plt.subplots(figsize=(6, 3))
        for c in cols:
            ax.plot([float(r["time"]) for r in rows],
                    [float(r[c]) for r in rows], "m-", alpha=0.6)
        ax.axhline(float(rows[0]["rho_G"]), color="g", ls="--")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("distance to goal center (m)")
        fig.tight_layout()
        fig.savefig(data / "radial_traces.png", dpi=150)
    timeline = data / "selection_timeline.csv"
    if timeline.exists():
        rows = read_rows(timeline)
        herders = sorted({r["herder"] for r in rows})
        fig, ax = plt.subplots(figsize=(6, 3))
        for j in herders:
            sub = [r for r in rows if r["herder"] == j]
            ax.step([float(r["time"]) for r in sub],
                    [float(r["selection"]) for r in sub], where="post",
                    label=f"herder {j}")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("selected target")
        ax.legend()
        fig.tight_layout()
        fig.savefig(data / "selection_timeline.png", dpi=150)
    print(f"wrote plots into {data}")


if __name__ == "__main__":
    main()
'''


def export_plots(batch_dir) -> Path:
    """Emit tidy plot data plus a standalone plotting script for a batch."""
    from .episode import read_trajectory_csv
    from .metrics import read_summary_csv

    batch = Path(batch_dir)
    summaries = sorted(batch.glob("summary*.csv"))
    if not summaries:
        raise FileNotFoundError(f"no batch summary found in {batch}")
    cfg_file = batch / "config.txt"
    provenance = ""
    if cfg_file.exists():
        from .config import parse_config

        provenance = parse_config(cfg_file.read_text()).provenance(__version__)
    plots = batch / "plots"
    plots.mkdir(exist_ok=True)

    with open(plots / "boxplot_data.csv", "w") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        fh.write("stack,metric,median,q1,q3,lo,hi\n")
        for summary in summaries:
            stack = summary.stem.replace("summary", "").strip("_") or "learned"
            _, cols = read_summary_csv(summary)
            for metric in ("t_g", "t_s", "d_g", "d_f", "psi_g", "psi_f"):
                vals = cols[metric][np.isfinite(cols[metric])]
                if vals.size == 0:
                    continue
                q1, med, q3 = np.percentile(vals, [25, 50, 75])
                fh.write("%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g\n" %
                         (stack, metric, med, q1, q3, vals.min(), vals.max()))

    for curve in batch.glob("curve_*.csv"):
        (plots / curve.name).write_text(curve.read_text())

    traj_dirs = [d for d in (batch / "trajectories",) if d.is_dir()]
    traj_dirs += sorted(batch.glob("trajectories_*"))
    example = None
    for d in traj_dirs:
        files = sorted(d.glob("ep_*.csv"))
        if files:
            example = files[0]
            break
    if example is not None:
        data = read_trajectory_csv(example)
        rho_G = _rho_g_from_config(cfg_file)
        m = sum(1 for k in data if k.endswith("_vx"))
        n = sum(1 for k in data if k.startswith("sel"))
        with open(plots / "radial_traces.csv", "w") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            cols = [f"t{i}_dist" for i in range(m)]
            fh.write("time," + ",".join(cols) + ",rho_G\n")
            for k in range(len(data["time"])):
                dists = [np.hypot(data[f"t{i}_x"][k] - data["goal_x"][k],
                                  data[f"t{i}_y"][k] - data["goal_y"][k])
                         for i in range(m)]
                fh.write("%.9g," % data["time"][k]
                         + ",".join("%.9g" % d for d in dists)
                         + ",%.9g\n" % rho_G)
        with open(plots / "selection_timeline.csv", "w") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            fh.write("time,herder,selection\n")
            for k in range(len(data["time"]) - 1):
                for j in range(n):
                    fh.write("%.9g,%d,%d\n" % (data["time"][k], j,
                                               int(data[f"sel{j}"][k])))

    script = plots / "plot_results.py"
    script.write_text(PLOT_SCRIPT)
    return plots


def _rho_g_from_config(cfg_file) -> float:
    if cfg_file.exists():
        from .config import parse_config

        return parse_config(cfg_file.read_text())["sim.rho_G"]
    return 5.0
