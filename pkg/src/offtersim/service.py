"""HTTP front end: environment lifecycle, rollouts and terrain export.

Wraps the same registry the TCP protocol uses, with pydantic request and
response models. Error mapping: bad configuration 400, unknown
environment 404, lifecycle misuse or capacity 409, simulation faults 500.
"""

from __future__ import annotations

import base64

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from .config import make_config
from .environment import (
    EpisodeConfig,
    OffTerSimEnv,
    aggregate,
    table_header,
    table_row,
)
from .errors import ConfigError, DomainError, ProtocolError, SimulationFault
from .protocol import (
    PROTOCOL_VERSION,
    EnvRegistry,
    decode_action,
    encode_observation,
)
from .rollout import RandomPolicy, run_episodes
from .terrain import pgm16_bytes, pgm16_meta, sample_terrain


class ActionModel(BaseModel):
    steer: float = 0.0
    throttle: float = 0.0
    brake: float = 0.0


class MakeRequest(BaseModel):
    config: dict | None = None


class EnvCreated(BaseModel):
    env_id: int
    version: str


class ResetRequest(BaseModel):
    seed: int = 0


class StepRequest(BaseModel):
    # an integer selects a discrete steering bin; null defers to the expert
    action: ActionModel | int | None = None


class FrenetModel(BaseModel):
    s: float
    x_lat: float
    theta: float
    v: float
    v_perp: float
    omega: float
    c: float


class DepthModel(BaseModel):
    shape: list[int]
    b64: str


class ObservationModel(BaseModel):
    imu_accel: list[float]
    imu_gyro: list[float]
    roll: float
    pitch: float
    frenet: FrenetModel
    scandots: list[list[float]] | None = None
    depth: DepthModel | None = None


class MetricsModel(BaseModel):
    n_collisions: float
    collision_time: float
    progress: float
    cumulative_unevenness: float
    n_cbf_violations: float


class ResetResponse(BaseModel):
    env_id: int
    observation: ObservationModel


class StepResponse(BaseModel):
    env_id: int
    observation: ObservationModel
    reward: float
    reward_terms: dict[str, float]
    done: bool
    done_reason: str | None = None
    metrics: MetricsModel | None = None


class RolloutRequest(BaseModel):
    seed: int = 0
    episodes: int = Field(default=1, ge=0)
    policy: str = "expert"
    policy_seed: int = 0
    config: dict | None = None


class RolloutResponse(BaseModel):
    reports: list[MetricsModel]
    aggregate: MetricsModel | None = None
    table: str


class TerrainRequest(BaseModel):
    seed: int = 0
    config: dict | None = None


class TerrainResponse(BaseModel):
    pgm_b64: str
    meta: dict


def create_app(max_envs: int = 32,
               config: EpisodeConfig | None = None) -> FastAPI:
    app = FastAPI(title="offtersim", version=PROTOCOL_VERSION)
    registry = EnvRegistry(max_envs, config)
    app.state.registry = registry

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(DomainError)
    async def _domain_error(request: Request, exc: DomainError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(ProtocolError)
    async def _protocol_error(request: Request, exc: ProtocolError):
        status = 404 if "unknown env_id" in str(exc) else 409
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.exception_handler(SimulationFault)
    async def _fault(request: Request, exc: SimulationFault):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/ping")
    def ping():
        return {"ok": True, "version": PROTOCOL_VERSION}

    @app.post("/envs", response_model=EnvCreated)
    def make_env(req: MakeRequest):
        env_id = registry.make(req.config)
        return EnvCreated(env_id=env_id, version=PROTOCOL_VERSION)

    @app.post("/envs/{env_id}/reset", response_model=ResetResponse)
    def reset_env(env_id: int, req: ResetRequest):
        with registry.use(env_id) as env:
            obs = env.reset(req.seed)
            return ResetResponse(env_id=env_id,
                                 observation=encode_observation(obs))

    @app.post("/envs/{env_id}/step", response_model=StepResponse)
    def step_env(env_id: int, req: StepRequest):
        payload = req.action
        if isinstance(payload, ActionModel):
            payload = payload.model_dump()
        action = decode_action(payload)
        with registry.use(env_id) as env:
            res = env.step(action)
            metrics = env.metrics().to_dict() if res.done else None
            return StepResponse(env_id=env_id,
                                observation=encode_observation(res.observation),
                                reward=res.reward,
                                reward_terms=res.reward_terms,
                                done=res.done,
                                done_reason=res.done_reason,
                                metrics=metrics)

    @app.get("/envs/{env_id}/metrics", response_model=MetricsModel)
    def env_metrics(env_id: int):
        with registry.use(env_id) as env:
            return MetricsModel(**env.metrics().to_dict())

    @app.delete("/envs/{env_id}")
    def close_env(env_id: int):
        registry.close(env_id)
        return {"ok": True, "env_id": env_id}

    @app.post("/rollout", response_model=RolloutResponse)
    def rollout(req: RolloutRequest):
        cfg = make_config(req.config, base=registry.default_config)
        env = OffTerSimEnv(cfg)
        if req.policy == "expert":
            policy = None
        elif req.policy == "random":
            policy = RandomPolicy(req.policy_seed)
        else:
            raise ConfigError(f"unknown policy {req.policy!r}")
        reports = run_episodes(env, req.seed, req.episodes, policy)
        agg = aggregate(reports) if reports else None
        table = table_header()
        if agg is not None:
            table += "\n" + table_row(req.policy, agg)
        return RolloutResponse(
            reports=[MetricsModel(**r.to_dict()) for r in reports],
            aggregate=None if agg is None else MetricsModel(**agg.to_dict()),
            table=table)

    @app.post("/terrain", response_model=TerrainResponse)
    def terrain(req: TerrainRequest):
        cfg = make_config(req.config, base=registry.default_config)
        model = sample_terrain(req.seed, cfg.ranges)
        return TerrainResponse(
            pgm_b64=base64.b64encode(pgm16_bytes(model)).decode("ascii"),
            meta=pgm16_meta(model))

    @app.get("/terrain/{seed}.pgm")
    def terrain_pgm(seed: int):
        model = sample_terrain(seed, registry.default_config.ranges)
        return Response(content=pgm16_bytes(model),
                        media_type="image/x-portable-graymap")

    return app


def serve_http(host: str = "127.0.0.1", port: int = 8000,
               max_envs: int = 32,
               config: EpisodeConfig | None = None) -> None:
    """Blocking uvicorn entry point used by the CLI."""
    import uvicorn

    uvicorn.run(create_app(max_envs, config), host=host, port=port,
                log_level="warning")
