"""Socket client for the line-delimited JSON protocol."""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass

from .errors import IOFailure, ProtocolError
from .protocol import PROTOCOL_VERSION, decode_observation, encode_action
from .sensors import Observation


@dataclass
class RemoteStep:
    observation: Observation
    reward: float
    reward_terms: dict
    done: bool
    done_reason: str | None
    metrics: dict | None


class RemoteEnv:
    """One remote environment over one connection.

    Guards step-after-done locally so a finished episode never produces
    a wire request.
    """

    def __init__(self, host: str, port: int, config: dict | None = None,
                 timeout: float = 60.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise IOFailure(f"cannot connect to {host}:{port}: {exc}") from exc
        self._file = self._sock.makefile("rwb")
        self._done = True
        self._was_reset = False
        resp = self._request({"cmd": "make", "config": config or {}})
        self.env_id = resp["env_id"]
        self.version = resp.get("version")
        if self.version != PROTOCOL_VERSION:
            raise ProtocolError(f"unexpected protocol version {self.version!r}")

    def _request(self, msg: dict) -> dict:
        try:
            self._file.write((json.dumps(msg) + "\n").encode("utf-8"))
            self._file.flush()
            line = self._file.readline()
        except OSError as exc:
            raise IOFailure(f"connection lost: {exc}") from exc
        if not line:
            raise IOFailure("connection closed by server")
        resp = json.loads(line.decode("utf-8"))
        if not resp.get("ok"):
            raise ProtocolError(resp.get("error", "unspecified server error"))
        return resp

    def ping(self) -> None:
        self._request({"cmd": "ping"})

    def reset(self, seed: int) -> Observation:
        resp = self._request({"cmd": "reset", "env_id": self.env_id,
                              "seed": seed})
        self._done = False
        self._was_reset = True
        return decode_observation(resp["observation"])

    def step(self, action=None) -> RemoteStep:
        if not self._was_reset:
            raise ProtocolError("step before reset")
        if self._done:
            raise ProtocolError("episode is over; call reset() first")
        resp = self._request({"cmd": "step", "env_id": self.env_id,
                              "action": encode_action(action)})
        self._done = bool(resp["done"])
        return RemoteStep(
            observation=decode_observation(resp["observation"]),
            reward=resp["reward"],
            reward_terms=resp["reward_terms"],
            done=self._done,
            done_reason=resp.get("done_reason"),
            metrics=resp.get("metrics"),
        )

    @property
    def done(self) -> bool:
        return self._done

    def close(self) -> None:
        try:
            self._request({"cmd": "close", "env_id": self.env_id})
        except (IOFailure, ProtocolError):
            pass
        finally:
            self._file.close()
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
