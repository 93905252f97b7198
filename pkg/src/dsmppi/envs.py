"""Benchmark environments: cart-pole swing-up and truck backer-upper.

States are plain float64 vectors:

    cart-pole:  [x, x_dot, phi, phi_dot]      phi = 0 is upright
    truck:      [x, y, theta_s, theta_c]      trailer / cab angles (rad)

Both tasks use diagonal quadratic costs; the cart-pole cost is evaluated on
the trig-augmented state [x, x_dot, cos phi, sin phi, phi_dot] so the angle
periodicity does not distort it. Controls are clamped to the task bounds
inside every step, i.e. clamping is part of the (modified) dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels

# Cart-pole physics: standard frictionless benchmark values. lp is the pole
# half-length (the pole is a uniform rod); integration is semi-implicit
# Euler (velocities first, then positions with the new velocities). dt is
# chosen so a 30-step horizon (1.5 s) spans enough of a swing for the
# optimizer to see the payoff; at much smaller steps the swing-up is not
# discoverable within the benchmark's fixed horizon.
CART_MASS = 1.0
POLE_MASS = 0.1
POLE_HALF_LENGTH = 0.5
GRAVITY = 9.81
CARTPOLE_DT = 0.05

# Truck geometry and control scaling: normalized inputs in [-1, 1] map to a
# steering angle of up to 70 degrees and up to 3 m of travel per step.
TRAILER_LENGTH = 14.0
CAB_LENGTH = 6.0
STEER_MAX = math.radians(70.0)
DIST_MAX = 3.0
JACKKNIFE_LIMIT = 0.5 * math.pi


def clamp_controls(u: np.ndarray, u_min: np.ndarray, u_max: np.ndarray) -> np.ndarray:
    """Elementwise min(max(u, u_min), u_max)."""
    return np.minimum(np.maximum(u, u_min), u_max)


def cartpole_step(state: np.ndarray, u: float, dt: float = CARTPOLE_DT) -> np.ndarray:
    """One semi-implicit Euler step of the frictionless cart-pole."""
    x, xd, ph, phd = state
    total = CART_MASS + POLE_MASS
    cph = math.cos(ph)
    sph = math.sin(ph)
    tmp = (u + POLE_MASS * POLE_HALF_LENGTH * phd * phd * sph) / total
    phdd = (GRAVITY * sph - cph * tmp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cph * cph / total))
    xdd = tmp - POLE_MASS * POLE_HALF_LENGTH * phdd * cph / total
    xd = xd + dt * xdd
    phd = phd + dt * phdd
    return np.array([x + dt * xd, xd, ph + dt * phd, phd])


def cartpole_augment(state: np.ndarray) -> np.ndarray:
    """[x, x_dot, cos phi, sin phi, phi_dot] for cost evaluation."""
    x, xd, ph, phd = state
    return np.array([x, xd, math.cos(ph), math.sin(ph), phd])


def truck_step(state: np.ndarray, u_norm: np.ndarray,
               jackknife_mode: str = "relative", diag: dict | None = None) -> np.ndarray:
    """One kinematic step of the truck backing up (controls already in [-1, 1]).

    The trailer translates by the cab velocity projected onto its axis; both
    angles evolve through arcsin terms whose arguments are clipped to the
    principal domain. If the cab-trailer angle difference leaves +-90 deg the
    jackknife clamp pulls the cab angle back: mode "relative" (default) pins
    the difference at exactly 90 deg, mode "absolute" pins |theta_c| itself.
    Pass a dict as `diag` to count arcsin clips and jackknife events.
    """
    x, y, ths, thc = state
    us = STEER_MAX * u_norm[0]
    uv = DIST_MAX * u_norm[1]
    a = uv * math.cos(us)
    diff = thc - ths
    b = a * math.cos(diff)
    arg1 = a * math.sin(diff) / TRAILER_LENGTH
    arg2 = uv * math.sin(us) / (TRAILER_LENGTH + CAB_LENGTH)
    if diag is not None and (abs(arg1) > 1.0 or abs(arg2) > 1.0):
        diag["arcsin_clips"] = diag.get("arcsin_clips", 0) + 1
    arg1 = min(max(arg1, -1.0), 1.0)
    arg2 = min(max(arg2, -1.0), 1.0)
    x = x - b * math.cos(ths)
    y = y - b * math.sin(ths)
    ths_new = ths - math.asin(arg1)
    thc_new = thc + math.asin(arg2)
    d = thc_new - ths_new
    if jackknife_mode == "relative":
        if d > JACKKNIFE_LIMIT:
            thc_new = ths_new + JACKKNIFE_LIMIT
        elif d < -JACKKNIFE_LIMIT:
            thc_new = ths_new - JACKKNIFE_LIMIT
        clamped = abs(d) > JACKKNIFE_LIMIT
    elif jackknife_mode == "absolute":
        clamped = abs(ths_new - thc_new) > JACKKNIFE_LIMIT
        if clamped:
            thc_new = JACKKNIFE_LIMIT if thc_new >= 0.0 else -JACKKNIFE_LIMIT
    else:
        raise ValueError(f"unknown jackknife_mode {jackknife_mode!r}")
    if diag is not None and clamped:
        diag["jackknife_clamps"] = diag.get("jackknife_clamps", 0) + 1
    return np.array([x, y, ths_new, thc_new])


@dataclass(frozen=True)
class QuadraticCostSpec:
    """Diagonal quadratic stage/terminal cost around a goal state.

    q / q_terminal weight the (optionally mapped) state error, r weights the
    control; state_map=None means the raw state is used.
    """

    q: np.ndarray
    r: np.ndarray
    q_terminal: np.ndarray
    x_goal: np.ndarray
    state_map: Callable[[np.ndarray], np.ndarray] | None = None

    def mapped(self, x: np.ndarray) -> np.ndarray:
        return x if self.state_map is None else self.state_map(x)


def stage_cost(x: np.ndarray, u: np.ndarray, spec: QuadraticCostSpec) -> float:
    xt = spec.mapped(np.asarray(x, dtype=np.float64))
    if xt.shape != spec.x_goal.shape:
        raise ValueError(f"state (mapped) shape {xt.shape} != goal shape {spec.x_goal.shape}")
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if u.shape != spec.r.shape:
        raise ValueError(f"control shape {u.shape} != R shape {spec.r.shape}")
    e = xt - spec.x_goal
    return float(e @ (spec.q * e) + u @ (spec.r * u))


def terminal_cost(x: np.ndarray, spec: QuadraticCostSpec) -> float:
    xt = spec.mapped(np.asarray(x, dtype=np.float64))
    if xt.shape != spec.x_goal.shape:
        raise ValueError(f"state (mapped) shape {xt.shape} != goal shape {spec.x_goal.shape}")
    e = xt - spec.x_goal
    return float(e @ (spec.q_terminal * e))


@dataclass(frozen=True)
class Task:
    """One benchmark environment plus its cost and control bounds."""

    name: str
    state_dim: int
    control_dim: int
    state_labels: tuple
    control_labels: tuple
    u_min: np.ndarray
    u_max: np.ndarray
    cost: QuadraticCostSpec
    step_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    horizon: int
    episode_length: int
    sigma0: float
    # Proposal-adaptation defaults; the swing-up settles into a long
    # regulation phase and benefits from a persistent, shrinking sigma,
    # while the backer-upper is one long transient and needs per-step
    # re-exploration.
    momentum_alpha: float = 0.1
    sigma_reset: bool = True
    sigma_floor: float = 1e-6
    lambda0: float = 1.0
    jackknife_mode: str = "relative"

    def step(self, state: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.step_fn(state, u)


def cartpole_task() -> Task:
    cost = QuadraticCostSpec(
        q=np.array([0.1, 0.1, 1.0, 0.1, 0.1]),
        r=np.array([1e-4]),
        q_terminal=np.array([10.0, 0.1, 10.0, 0.1, 0.1]),
        x_goal=np.array([0.0, 0.0, 1.0, 0.0, 0.0]),
        state_map=cartpole_augment,
    )
    return Task(
        name="cartpole", state_dim=4, control_dim=1,
        state_labels=("x", "x_dot", "phi", "phi_dot"), control_labels=("u",),
        u_min=np.array([-20.0]), u_max=np.array([20.0]), cost=cost,
        step_fn=lambda s, u: cartpole_step(s, float(u[0])),
        horizon=30, episode_length=300, sigma0=10.0,
        momentum_alpha=0.5, sigma_reset=False, sigma_floor=0.1, lambda0=1.0,
    )


def truck_task(jackknife_mode: str = "relative") -> Task:
    cost = QuadraticCostSpec(
        q=np.array([0.01, 0.5, 5.0, 0.01]),
        r=np.array([1e-3, 5.0]),
        q_terminal=np.array([0.1, 1.0, 10.0, 0.1]),
        x_goal=np.zeros(4),
        state_map=None,
    )
    return Task(
        name="truck", state_dim=4, control_dim=2,
        state_labels=("x", "y", "theta_s", "theta_c"),
        control_labels=("u_1", "u_2"),
        u_min=np.array([-1.0, -1.0]), u_max=np.array([1.0, 1.0]), cost=cost,
        step_fn=lambda s, u: truck_step(s, u, jackknife_mode=jackknife_mode),
        horizon=15, episode_length=100, sigma0=1.0,
        momentum_alpha=0.1, sigma_reset=True, sigma_floor=0.01, lambda0=10.0,
        jackknife_mode=jackknife_mode,
    )


def make_task(name: str, jackknife_mode: str = "relative") -> Task:
    if name == "cartpole":
        return cartpole_task()
    if name == "truck":
        return truck_task(jackknife_mode=jackknife_mode)
    raise ValueError(f"unknown task {name!r}")


@dataclass(frozen=True)
class RolloutResult:
    """Trajectory of one control sequence: states (H+1), clamped controls (H),
    per-stage costs (H), and the cumulative cost including the terminal term."""

    states: np.ndarray
    controls_applied: np.ndarray
    stage_costs: np.ndarray
    cost: float

    @property
    def failed(self) -> bool:
        return not math.isfinite(self.cost)


def rollout(task: Task, x0: np.ndarray, seq: np.ndarray) -> RolloutResult:
    """Shoot one flattened control sequence from x0 and accumulate its cost.

    Clamping is applied before each step; the stage cost at stage 0 uses the
    measured state x0. A non-finite state marks the rollout failed with a
    +inf cost sentinel. Deterministic for identical inputs.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.size % task.control_dim != 0:
        raise ValueError(f"sequence length {seq.size} not a multiple of d_u={task.control_dim}")
    h = seq.size // task.control_dim
    controls = seq.reshape(h, task.control_dim)
    states = np.empty((h + 1, task.state_dim))
    applied = np.empty_like(controls)
    stage_costs = np.empty(h)
    states[0] = np.asarray(x0, dtype=np.float64)
    x = states[0]
    failed = not np.all(np.isfinite(x))
    for t in range(h):
        u = clamp_controls(controls[t], task.u_min, task.u_max)
        applied[t] = u
        stage_costs[t] = stage_cost(x, u, task.cost) if not failed else np.inf
        x = task.step(x, u)
        states[t + 1] = x
        if not np.all(np.isfinite(x)):
            failed = True
    total = np.inf if failed else float(stage_costs.sum() + terminal_cost(x, task.cost))
    return RolloutResult(states, applied, stage_costs, total)


def batch_costs(task: Task, x0: np.ndarray, seqs: np.ndarray) -> np.ndarray:
    """Costs of many flattened sequences from one state, via the hot kernels."""
    seqs = np.ascontiguousarray(seqs, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    n, flat = seqs.shape
    if flat % task.control_dim != 0:
        raise ValueError(f"sequence length {flat} not a multiple of d_u={task.control_dim}")
    h = flat // task.control_dim
    c = task.cost
    if task.name == "cartpole":
        return kernels.cartpole_rollout_costs(
            x0, seqs, float(task.u_min[0]), float(task.u_max[0]), CARTPOLE_DT,
            CART_MASS, POLE_MASS, POLE_HALF_LENGTH, GRAVITY,
            c.q, float(c.r[0]), c.q_terminal, c.x_goal)
    if task.name == "truck":
        mode = 0 if task.jackknife_mode == "relative" else 1
        return kernels.truck_rollout_costs(
            x0, seqs.reshape(n, h, 2), task.u_min, task.u_max,
            TRAILER_LENGTH, CAB_LENGTH, STEER_MAX, DIST_MAX, mode,
            c.q, c.r, c.q_terminal, c.x_goal)
    # generic fallback for custom tasks
    return np.array([rollout(task, x0, s).cost for s in seqs])
