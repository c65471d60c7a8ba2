"""Command-line entry points.

Subcommands: serve (TCP protocol), serve-http (REST), rollout, eval,
terrain. The base configuration comes from the file named by the
OFFTERSIM_CONFIG environment variable, further adjusted by flags. Exit
codes: 0 success, 2 configuration error, 3 I/O error, 4 simulation
fault.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .client import RemoteEnv
from .config import apply_overrides, config_from_environment
from .dynamics import Action
from .environment import (
    MetricsReport,
    OffTerSimEnv,
    aggregate,
    table_header,
    table_row,
)
from .errors import (
    ConfigError,
    IOFailure,
    OffTerSimError,
    ProtocolError,
    SimulationFault,
)
from .rollout import RandomPolicy, run_episodes
from .terrain import export_obstacles, export_pgm16, sample_terrain

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FAULT = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="offtersim",
        description="Headless off-road driving simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the TCP line-JSON protocol server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7447)
    p.add_argument("--max-envs", type=int, default=32)

    p = sub.add_parser("serve-http", help="run the REST service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-envs", type=int, default=32)

    for name, help_text in (("rollout", "run episodes and write JSONL logs"),
                            ("eval", "run episodes and print the metrics row")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--episodes", type=int, default=1)
        p.add_argument("--policy", choices=("expert", "random", "remote"),
                       default="expert",
                       help="remote sends null actions so the server-side "
                            "expert drives; requires --connect")
        p.add_argument("--policy-seed", type=int, default=0)
        if name == "rollout":
            p.add_argument("--out", default=None, help="JSONL log path")
        p.add_argument("--no-shield", action="store_true")
        p.add_argument("--obs-mode", choices=("privileged", "depth", "both"),
                       default=None)
        p.add_argument("--discrete-n", type=int, default=None,
                       help="switch to discrete steering with this many bins")
        p.add_argument("--max-steps", type=int, default=None)
        p.add_argument("--connect", default=None, metavar="HOST:PORT",
                       help="drive a remote protocol server instead of an "
                            "in-process environment")

    p = sub.add_parser("terrain", help="export a sampled terrain as PGM16")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--obstacles", action="store_true",
                   help="also write the obstacle list alongside")

    return parser


def _episode_overrides(args) -> dict:
    overrides: dict = {}
    if args.no_shield:
        overrides["shield"] = {"enabled": False}
    if args.obs_mode is not None:
        overrides["observation_mode"] = args.obs_mode
    if args.discrete_n is not None:
        overrides["action_mode"] = "discrete"
        overrides["n_actions"] = args.discrete_n
    if args.max_steps is not None:
        overrides["max_steps"] = args.max_steps
    return overrides


def _parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"--connect expects HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


class _WireRandomPolicy:
    """Random actions for a remote environment.

    A remote env does not expose its config, so the action mode comes
    from the command-line flags instead.
    """

    def __init__(self, seed: int, discrete_n: int | None):
        self._rng = np.random.default_rng(seed)
        self._n = discrete_n

    def __call__(self):
        if self._n is not None:
            return int(self._rng.integers(0, self._n))
        return Action(steer=float(self._rng.uniform(-1.0, 1.0)),
                      throttle=float(self._rng.uniform(0.0, 1.0)),
                      brake=0.0)


def _remote_rollout(args, overrides, log) -> list[MetricsReport]:
    host, port = _parse_address(args.connect)
    policy = (_WireRandomPolicy(args.policy_seed, args.discrete_n)
              if args.policy == "random" else None)
    reports = []
    with RemoteEnv(host, port, config=overrides or None) as env:
        for k in range(args.episodes):
            env.reset(args.seed + k)
            t = 0
            while True:
                action = policy() if policy is not None else None
                res = env.step(action)
                if log is not None:
                    # only wire-visible data here; shield internals stay
                    # on the server
                    if isinstance(action, Action):
                        act_json = {"steer": action.steer,
                                    "throttle": action.throttle,
                                    "brake": action.brake}
                    else:
                        act_json = action
                    log.write(json.dumps({
                        "t": t,
                        "action": act_json,
                        "reward": res.reward,
                        "reward_terms": res.reward_terms,
                        "done": res.done,
                        "done_reason": res.done_reason}) + "\n")
                t += 1
                if res.done:
                    reports.append(MetricsReport(**res.metrics))
                    break
    return reports


def _cmd_rollout(args) -> None:
    if args.policy == "remote" and not args.connect:
        raise ConfigError("--policy remote requires --connect")
    out = getattr(args, "out", None)
    overrides = _episode_overrides(args)

    if args.connect:
        log = None
        try:
            if out is not None:
                try:
                    log = open(out, "w", encoding="utf-8")
                except OSError as exc:
                    raise IOFailure(f"cannot open {out}: {exc}") from exc
            reports = _remote_rollout(args, overrides, log)
        finally:
            if log is not None:
                log.close()
    else:
        cfg = config_from_environment()
        if overrides:
            cfg = apply_overrides(cfg, overrides)
        cfg.validate()
        env = OffTerSimEnv(cfg)
        policy = (RandomPolicy(args.policy_seed)
                  if args.policy == "random" else None)
        reports = run_episodes(env, args.seed, args.episodes, policy, out)

    print(table_header())
    if reports:
        print(table_row(args.policy, aggregate(reports)))


def _cmd_terrain(args) -> None:
    cfg = config_from_environment()
    model = sample_terrain(args.seed, cfg.ranges)
    out = Path(args.out)
    try:
        export_pgm16(model, out)
        if args.obstacles:
            export_obstacles(model, out.with_suffix(".obstacles.json"))
    except OSError as exc:
        raise IOFailure(f"cannot write {out}: {exc}") from exc
    print(f"wrote {out} ({model.params.grid_size}x{model.params.grid_size})")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            from .protocol import serve
            cfg = config_from_environment()
            print(f"serving offtersim protocol on {args.host}:{args.port}")
            serve(args.host, args.port, args.max_envs, cfg)
        elif args.command == "serve-http":
            from .service import serve_http
            cfg = config_from_environment()
            serve_http(args.host, args.port, args.max_envs, cfg)
        elif args.command in ("rollout", "eval"):
            _cmd_rollout(args)
        elif args.command == "terrain":
            _cmd_terrain(args)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IOFailure, ProtocolError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except OffTerSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
