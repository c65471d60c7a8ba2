"""Second-order lane-keeping safety filter on the steering command.

Two barrier functions h = L/2 -+ x keep the lateral offset inside the
trail; each yields an affine-in-steering constraint
g(delta) = h'' + 2*lambda*h' + lambda^2*h >= 0. The filter returns the
steering command minimizing

    K_viol * (C_right^2 + C_left^2) + (u - u_ref)^2,   C = max(0, -g),

over the command box. The objective is piecewise quadratic with at most
two breakpoints (the constraint roots), so the minimum is found exactly
by minimizing each interval's quadratic in closed form.

The lateral-offset convention here is right-positive, matching the
barrier definitions; vehicle states arrive in the body left-positive
convention and are mirrored internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import VehicleParams
from .errors import SimulationFault
from .frenet import FrenetState

_EPS_V = 0.1


@dataclass(frozen=True)
class ShieldConfig:
    """Gains, bounds and the trail width the barriers enforce.

    model selects the lateral-velocity derivative used inside the
    constraints: "standard" is the linear bicycle including the yaw-rate
    coupling; "inertial" scales the drift and steering terms by yaw
    inertia and carries no yaw-rate feedback.
    """

    lam: float = 1.5
    K_viol: float = 1e4
    k_constraint: float = 1.0
    u_min: float = -1.0
    u_max: float = 1.0
    L: float = 8.0
    enabled: bool = True
    model: str = "standard"
    viol_tol: float = 1e-3

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.K_viol <= 0:
            raise ValueError("K_viol must be positive")
        if self.u_min >= self.u_max:
            raise ValueError("u_min must be below u_max")
        if self.model not in ("standard", "inertial"):
            raise ValueError(f"unknown shield model {self.model!r}")


@dataclass(frozen=True)
class ShieldResult:
    u_safe: float
    c_left: float
    c_right: float
    modified: bool
    r_constraint: float
    violation: bool

    def to_dict(self) -> dict:
        return {
            "u_safe": self.u_safe,
            "c_left": self.c_left,
            "c_right": self.c_right,
            "modified": self.modified,
            "r_constraint": self.r_constraint,
            "violation": self.violation,
        }


def cbf_constraints(frenet: FrenetState, a_x: float, params: VehicleParams,
                    config: ShieldConfig) -> tuple:
    """Affine constraint forms in the physical steering angle delta.

    Returns (p_left, q_left, p_right, q_right) with
    g_right(delta) = xdd(delta) + 2*lam*xd + lam^2*(L/2 + x) and
    g_left(delta) = -xdd(delta) - 2*lam*xd + lam^2*(L/2 - x), where x is
    the right-positive lateral offset and xdd is affine in delta through
    the lateral-velocity derivative.
    """
    lam = config.lam
    x = frenet.x_lat
    # mirror body-frame left-positive quantities into the right-positive
    # frame the barrier algebra uses
    theta = -frenet.theta
    v_perp = -frenet.v_perp
    omega = -frenet.omega
    c = -frenet.c
    v = max(frenet.v, _EPS_V)

    cf, cr = params.C_f_lin, params.C_r_lin
    lf, lr = params.l_f, params.l_r
    ct, st = math.cos(theta), math.sin(theta)

    # lateral-velocity derivative, affine in the (mirrored) steering angle
    if config.model == "inertial":
        vperp_dot_0 = (-2.0 * (cf + cr) / (params.m * v) * v_perp
                       - 2.0 * (lf * cf ** 2 + lr * cr ** 2) / (params.I_z * v))
        vperp_dot_delta = 2.0 * lf * cf / params.I_z
    else:
        vperp_dot_0 = (-2.0 * (cf + cr) / (params.m * v) * v_perp
                       - (v + 2.0 * (lf * cf - lr * cr) / (params.m * v))
                       * omega)
        vperp_dot_delta = 2.0 * cf / params.m

    x_dot = v_perp * ct + v * st
    theta_dot = omega - v * c
    xdd_0 = vperp_dot_0 * ct + a_x * st + theta_dot * (-v_perp * st + v * ct)
    xdd_delta = vperp_dot_delta * ct

    # back to the vehicle's left-positive steering angle
    p_right = -xdd_delta
    q_right = xdd_0 + 2.0 * lam * x_dot + lam ** 2 * (config.L / 2.0 + x)
    p_left = xdd_delta
    q_left = -xdd_0 - 2.0 * lam * x_dot + lam ** 2 * (config.L / 2.0 - x)
    return p_left, q_left, p_right, q_right


def _slack(p: float, q: float, u: float) -> float:
    return max(0.0, -(p * u + q))


def _objective(u: float, u_ref: float, k: float, forms) -> float:
    total = (u - u_ref) ** 2
    for p, q in forms:
        total += k * _slack(p, q, u) ** 2
    return total


def filter_action(u_ref: float, frenet: FrenetState, a_x: float,
                  params: VehicleParams, config: ShieldConfig) -> ShieldResult:
    """Minimally modified safe steering command, solved exactly."""
    if not config.enabled:
        return ShieldResult(u_safe=u_ref, c_left=0.0, c_right=0.0,
                            modified=False, r_constraint=0.0, violation=False)
    if not all(map(math.isfinite, (u_ref, frenet.x_lat, frenet.theta,
                                   frenet.v, frenet.v_perp, frenet.omega,
                                   frenet.c, a_x))):
        raise SimulationFault("non-finite shield input")

    u_ref = min(max(u_ref, config.u_min), config.u_max)
    p_l, q_l, p_r, q_r = cbf_constraints(frenet, a_x, params, config)
    # constraints as functions of the command: delta = u * delta_max
    forms = [(p_l * params.delta_max, q_l), (p_r * params.delta_max, q_r)]
    k = config.K_viol

    # interval edges: command bounds plus each constraint's root
    edges = [config.u_min, config.u_max]
    for p, q in forms:
        if p != 0.0:
            root = -q / p
            if config.u_min < root < config.u_max:
                edges.append(root)
    edges.sort()

    best_u = None
    best_f = math.inf
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        # quadratic on this interval: sides with g < 0 contribute
        quad = 1.0
        lin = -2.0 * u_ref
        for p, q in forms:
            if p * mid + q < 0.0:
                quad += k * p * p
                lin += 2.0 * k * p * q
        u_star = min(max(-lin / (2.0 * quad), a), b)
        for cand in (u_star, a, b):
            f = _objective(cand, u_ref, k, forms)
            if f < best_f:
                best_f = f
                best_u = cand

    u_safe = float(best_u)
    c_left = _slack(*forms[0], u_safe)
    c_right = _slack(*forms[1], u_safe)
    return ShieldResult(
        u_safe=u_safe,
        c_left=c_left,
        c_right=c_right,
        modified=abs(u_safe - u_ref) > 1e-9,
        r_constraint=config.k_constraint * (u_safe - u_ref) ** 2,
        violation=max(c_left, c_right) > config.viol_tol,
    )


def violation_flag(result: ShieldResult, viol_tol: float = 1e-3) -> bool:
    """True iff the worst slack strictly exceeds the tolerance."""
    return max(result.c_left, result.c_right) > viol_tol
