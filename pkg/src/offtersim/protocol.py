"""Newline-delimited JSON protocol over TCP.

One JSON object per line, UTF-8. Requests carry {cmd, env_id, seed?,
action?, config?}; every request gets exactly one response with at least
{ok, env_id?}. Depth frames travel as base64 of row-major little-endian
float32. Malformed lines produce an error response and leave the
connection open. Environments created on a connection are closed when it
drops.
"""

from __future__ import annotations

import base64
import json
import socketserver
import threading
from contextlib import contextmanager

import numpy as np

from .config import make_config
from .dynamics import Action
from .environment import EpisodeConfig, OffTerSimEnv
from .errors import OffTerSimError, ProtocolError
from .frenet import FrenetState
from .sensors import Observation

PROTOCOL_VERSION = "offtersim/1"


# -- payload encoding ------------------------------------------------------

def encode_depth(depth: np.ndarray) -> dict:
    raw = np.ascontiguousarray(depth, dtype="<f4").tobytes()
    return {"shape": list(depth.shape),
            "b64": base64.b64encode(raw).decode("ascii")}


def decode_depth(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["b64"])
    arr = np.frombuffer(raw, dtype="<f4")
    return arr.reshape(payload["shape"])


def encode_observation(obs: Observation) -> dict:
    return {
        "imu_accel": [float(v) for v in obs.imu_accel],
        "imu_gyro": [float(v) for v in obs.imu_gyro],
        "roll": float(obs.roll),
        "pitch": float(obs.pitch),
        "frenet": obs.frenet.to_dict(),
        "scandots": None if obs.scandots is None else obs.scandots.tolist(),
        "depth": None if obs.depth is None else encode_depth(obs.depth),
    }


def decode_observation(payload: dict) -> Observation:
    scan = payload.get("scandots")
    depth = payload.get("depth")
    return Observation(
        imu_accel=np.asarray(payload["imu_accel"], dtype=float),
        imu_gyro=np.asarray(payload["imu_gyro"], dtype=float),
        roll=float(payload["roll"]),
        pitch=float(payload["pitch"]),
        frenet=FrenetState.from_dict(payload["frenet"]),
        scandots=None if scan is None else np.asarray(scan, dtype=float),
        depth=None if depth is None else decode_depth(depth),
    )


def encode_action(action) -> dict | None:
    if action is None:
        return None
    if isinstance(action, (int, np.integer)):
        return {"index": int(action)}
    if isinstance(action, Action):
        return {"steer": action.steer, "throttle": action.throttle,
                "brake": action.brake}
    raise ProtocolError(f"cannot encode action of type {type(action).__name__}")


def decode_action(payload):
    """Wire action payload -> Action, discrete index, or None (expert)."""
    if payload is None:
        return None
    if isinstance(payload, (int, np.integer)) and not isinstance(payload, bool):
        return int(payload)
    if isinstance(payload, dict):
        if "index" in payload:
            idx = payload["index"]
            if not isinstance(idx, int) or isinstance(idx, bool):
                raise ProtocolError("action index must be an integer")
            return idx
        try:
            return Action(steer=float(payload.get("steer", 0.0)),
                          throttle=float(payload.get("throttle", 0.0)),
                          brake=float(payload.get("brake", 0.0)))
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"bad action payload: {exc}") from exc
    raise ProtocolError("action must be null, an integer, or an object")


# -- environment registry --------------------------------------------------

class _Entry:
    __slots__ = ("env", "lock")

    def __init__(self, env: OffTerSimEnv):
        self.env = env
        self.lock = threading.Lock()


class EnvRegistry:
    """Mutation-safe id -> environment table with a global capacity cap."""

    def __init__(self, max_envs: int = 32,
                 default_config: EpisodeConfig | None = None):
        if max_envs < 1:
            raise ValueError("max_envs must be at least 1")
        self.max_envs = max_envs
        self.default_config = (default_config if default_config is not None
                               else EpisodeConfig())
        self._lock = threading.Lock()
        self._entries: dict[int, _Entry] = {}
        self._next_id = 1

    def make(self, overrides: dict | None = None) -> int:
        cfg = make_config(overrides, base=self.default_config)
        with self._lock:
            if len(self._entries) >= self.max_envs:
                raise ProtocolError(
                    f"server is at capacity ({self.max_envs} environments)")
            env_id = self._next_id
            self._next_id += 1
            self._entries[env_id] = _Entry(OffTerSimEnv(cfg))
        return env_id

    @contextmanager
    def use(self, env_id):
        """Yield the environment under its per-id lock."""
        with self._lock:
            entry = self._entries.get(env_id)
        if entry is None:
            raise ProtocolError(f"unknown env_id {env_id}")
        with entry.lock:
            yield entry.env

    def close(self, env_id) -> None:
        with self._lock:
            if env_id not in self._entries:
                raise ProtocolError(f"unknown env_id {env_id}")
            del self._entries[env_id]

    def close_quietly(self, env_id) -> None:
        with self._lock:
            self._entries.pop(env_id, None)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


# -- request dispatch ------------------------------------------------------

def handle_request(registry: EnvRegistry, msg) -> dict:
    """One request in, one response out; all failures become error payloads."""
    if not isinstance(msg, dict):
        return {"ok": False, "error": "request must be a JSON object"}
    env_id = msg.get("env_id")
    base = {"env_id": env_id} if env_id is not None else {}
    try:
        cmd = msg.get("cmd")
        if cmd == "ping":
            return {"ok": True, **base}
        if cmd == "make":
            new_id = registry.make(msg.get("config"))
            return {"ok": True, "env_id": new_id, "version": PROTOCOL_VERSION}
        if cmd == "reset":
            seed = msg.get("seed", 0)
            if not isinstance(seed, int) or isinstance(seed, bool):
                raise ProtocolError("seed must be an integer")
            with registry.use(env_id) as env:
                obs = env.reset(seed)
                return {"ok": True, "env_id": env_id,
                        "observation": encode_observation(obs)}
        if cmd == "step":
            action = decode_action(msg.get("action"))
            with registry.use(env_id) as env:
                res = env.step(action)
                resp = {"ok": True, "env_id": env_id,
                        "observation": encode_observation(res.observation),
                        "reward": res.reward,
                        "reward_terms": res.reward_terms,
                        "done": res.done,
                        "done_reason": res.done_reason}
                if res.done:
                    resp["metrics"] = env.metrics().to_dict()
                return resp
        if cmd == "close":
            registry.close(env_id)
            return {"ok": True, **base}
        return {"ok": False, **base, "error": f"unknown cmd {cmd!r}"}
    except OffTerSimError as exc:
        return {"ok": False, **base, "error": str(exc)}
    except Exception as exc:  # crash isolation: never take the server down
        return {"ok": False, **base,
                "error": f"{type(exc).__name__}: {exc}"}


# -- TCP server ------------------------------------------------------------

class _ConnectionHandler(socketserver.StreamRequestHandler):
    def handle(self):
        registry: EnvRegistry = self.server.registry
        owned: set[int] = set()
        try:
            for raw in self.rfile:
                line = raw.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line.decode("utf-8"))
                except (UnicodeDecodeError, json.JSONDecodeError):
                    resp = {"ok": False, "error": "malformed JSON"}
                else:
                    resp = handle_request(registry, msg)
                    if isinstance(msg, dict) and resp.get("ok"):
                        if msg.get("cmd") == "make":
                            owned.add(resp["env_id"])
                        elif msg.get("cmd") == "close":
                            owned.discard(msg.get("env_id"))
                self.wfile.write((json.dumps(resp) + "\n").encode("utf-8"))
                self.wfile.flush()
        except (ConnectionError, BrokenPipeError):
            pass
        finally:
            for env_id in owned:
                registry.close_quietly(env_id)


class ProtocolServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address=("127.0.0.1", 0), max_envs: int = 32,
                 config: EpisodeConfig | None = None):
        self.registry = EnvRegistry(max_envs, config)
        super().__init__(address, _ConnectionHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def serve(host: str = "127.0.0.1", port: int = 7447, max_envs: int = 32,
          config: EpisodeConfig | None = None) -> None:
    """Blocking entry point used by the CLI."""
    with ProtocolServer((host, port), max_envs, config) as server:
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
