"""Episode runners with JSONL logging.

A log starts with one header line carrying everything needed to reproduce
the episode (seed, sampled terrain and vehicle parameters, weights), then
one line per step with the commanded action, the shield decision, the
trail-frame state and the reward breakdown.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .dynamics import Action
from .environment import MetricsReport, OffTerSimEnv, aggregate
from .errors import IOFailure


def expert_policy(env: OffTerSimEnv):
    """Defer to the built-in controller."""
    return None


class RandomPolicy:
    """Uniform actions from a private RNG stream; reproducible by seed."""

    def __init__(self, seed: int):
        self._rng = np.random.default_rng(seed)

    def __call__(self, env: OffTerSimEnv):
        if env.config.action_mode == "discrete":
            return int(self._rng.integers(0, env.config.n_actions))
        return Action(steer=float(self._rng.uniform(-1.0, 1.0)),
                      throttle=float(self._rng.uniform(0.0, 1.0)),
                      brake=0.0)


def _header_line(env: OffTerSimEnv, seed: int) -> dict:
    return {
        "type": "header",
        "seed": seed,
        "terrain_seed": env.terrain_seed,
        "terrain_params": env.terrain.params.to_dict(),
        "vehicle_params": env.params.to_dict(),
        "shield": asdict(env.shield_config),
        "rewards": asdict(env.config.rewards),
        "dt": env.config.dt,
        "max_steps": env.config.max_steps,
        "action_mode": env.config.action_mode,
        "observation_mode": env.config.observation_mode,
        "trail_length": env.trail_length,
    }


def _step_line(t: int, res) -> dict:
    act = res.info["action"]
    return {
        "t": t,
        "action": {"steer": act.steer, "throttle": act.throttle,
                   "brake": act.brake},
        "u_safe": res.info["shield"].u_safe,
        "shield": res.info["shield"].to_dict(),
        "frenet": res.info["frenet"].to_dict(),
        "reward": res.reward,
        "reward_terms": res.reward_terms,
        "done": res.done,
        "done_reason": res.done_reason,
    }


def run_episode(env: OffTerSimEnv, seed: int, policy=None,
                log=None) -> MetricsReport:
    """Run one episode to completion; optionally stream JSONL to ``log``."""
    if policy is None:
        policy = expert_policy
    env.reset(seed)
    if log is not None:
        log.write(json.dumps(_header_line(env, seed)) + "\n")
    t = 0
    while not env.done:
        res = env.step(policy(env))
        if log is not None:
            log.write(json.dumps(_step_line(t, res)) + "\n")
        t += 1
    return env.metrics()


def run_episodes(env: OffTerSimEnv, seed: int, episodes: int, policy=None,
                 log_path=None) -> list[MetricsReport]:
    """Sequential episodes seeded seed, seed+1, ... into one log file."""
    reports = []
    log = None
    try:
        if log_path is not None:
            try:
                log = open(log_path, "w", encoding="utf-8")
            except OSError as exc:
                raise IOFailure(f"cannot open log file {log_path}: {exc}") from exc
        for k in range(episodes):
            reports.append(run_episode(env, seed + k, policy, log))
    finally:
        if log is not None:
            log.close()
    return reports


def summarize(reports) -> MetricsReport | None:
    """Mean report, or None when no episodes ran."""
    reports = list(reports)
    if not reports:
        return None
    return aggregate(reports)
