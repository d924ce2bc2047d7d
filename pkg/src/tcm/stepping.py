"""IMEX time integration: exact per-mode integrating factors for diffusion,
explicit Runge-Kutta for everything else.

Schemes:
  if_rk2 - Heun's method on the integrating-factor-transformed system;
  if_rk3 - Wray's low-storage three-stage RK3 (a = 8/15, 5/12, 3/4;
           b = 0, -17/60, -5/12) with per-substage factors. Every
           exponential that appears is decaying, so the scheme stays
           well-conditioned for arbitrarily large diffusion numbers.

Per-equation diffusivities: u and v use mu, T uses 1, q uses eta (or 0).
For pure diffusion both schemes reduce to the exact modal decay
exp(-nu k^2 t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from tcm import diagnostics
from tcm.model import (
    NO_FORCING,
    FIELD_NAMES,
    Forcing,
    State,
    SystemVariant,
    Tendency,
    TendencyError,
    tendencies,
)
from tcm.spectral import Grid
from tcm.thermo import PhysConsts, measured_constants, precipitation

_SCHEMES = ("if_rk2", "if_rk3")


class StepError(RuntimeError):
    """A single step produced non-finite fields or was mis-sized."""

    def __init__(self, message: str, time: float, step_index: Optional[int] = None):
        self.time = time
        self.step_index = step_index
        super().__init__(message)


class StepFailure(RuntimeError):
    """A run aborted; carries the last good state and partial trajectory."""

    def __init__(self, step_index: int, time: float, last_state: State, trajectory):
        self.step_index = step_index
        self.time = time
        self.last_state = last_state
        self.trajectory = trajectory
        super().__init__(
            f"integration failed at step {step_index} (t = {time:.6g})"
        )


@dataclass(frozen=True)
class StepPolicy:
    dt: float = 0.01
    cfl_target: float = 0.4
    eps_substep_safety: float = 0.5
    scheme: str = "if_rk2"

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0.0 < self.cfl_target < 1.0:
            raise ValueError(f"cfl_target must lie in (0, 1), got {self.cfl_target}")
        if not 0.0 < self.eps_substep_safety <= 1.0:
            raise ValueError(
                f"eps_substep_safety must lie in (0, 1], got {self.eps_substep_safety}"
            )
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; valid: {_SCHEMES}")


@dataclass
class Trajectory:
    """Snapshots at the output cadence plus one diagnostics record per step."""

    variant: SystemVariant
    snapshots: list[tuple[float, State]] = field(default_factory=list)
    records: list[diagnostics.DiagnosticsRecord] = field(default_factory=list)
    step_count: int = 0

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.snapshots]

    @property
    def final_state(self) -> State:
        return self.snapshots[-1][1]

    def state_at(self, t: float, rtol: float = 1e-9) -> State:
        for ts, s in self.snapshots:
            if abs(ts - t) <= rtol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t = {t}; have {self.times}")


def _diffusivities(variant: SystemVariant, c: PhysConsts) -> tuple[float, ...]:
    eta = variant.humidity_viscosity
    return (c.mu, c.mu, c.mu, c.mu, 1.0, eta)


def cfl_dt(
    s: State, variant: SystemVariant, c: PhysConsts, policy: StepPolicy
) -> float:
    """Stable step size: min of the policy dt, the advective CFL bound and
    the precipitation-stiffness bound.

    The stiffness bound applies only where the mollifier is actually
    non-constant (0 < q - q_s <= eps); elsewhere the source has no
    1/eps Lipschitz constant. For the limit variant the step is capped so
    one step drains at most half of the local supersaturation q - q_s.
    """
    g = s.grid
    dt = policy.dt

    speed = np.sqrt(s.u1**2 + s.u2**2) + np.sqrt(s.v1**2 + s.v2**2)
    max_speed = float(np.max(speed))
    if max_speed > 0.0:
        dt = min(dt, policy.cfl_target * g.dx / max_speed)

    if variant.tag in ("p_eps", "p_eps_eta"):
        r = s.q - c.q_s
        band = (r > 0.0) & (r <= variant.eps)
        if band.any():
            div_v = g.divergence(s.v1, s.v2)
            updraft = np.maximum(-div_v, 0.0)
            c_g = measured_constants(c)["C_G"]
            stiff = c.coef_precip * float(np.max(updraft[band])) * c_g
            if stiff > 0.0:
                dt = min(dt, policy.eps_substep_safety * variant.eps / stiff)
    else:
        div_v = g.divergence(s.v1, s.v2)
        P = precipitation(div_v, s.q, s.T, variant.switch, c)
        active = (s.q > c.q_s) & (P > 0.0)
        if active.any():
            dt = min(dt, 0.5 * float(np.min((s.q[active] - c.q_s) / P[active])))

    return dt


def _explicit(s, variant, c, t, forcing) -> Tendency:
    return tendencies(s, variant, c, t=t, forcing=forcing, include_diffusion=False)


def _spectral_state(s: State) -> list[np.ndarray]:
    g = s.grid
    return [g.forward(f) for f in s.fields()]


def _physical_state(grid: Grid, spectral: list[np.ndarray]) -> State:
    return State(grid, *(grid.inverse(fh) for fh in spectral))


def step(
    s: State,
    dt: float,
    variant: SystemVariant,
    c: PhysConsts,
    policy: StepPolicy,
    forcing: Forcing = NO_FORCING,
    t: float = 0.0,
) -> State:
    """One IMEX Runge-Kutta step from time t to t + dt."""
    if not dt > 0:
        raise StepError(f"dt must be positive, got {dt}", time=t)
    bound = cfl_dt(s, variant, c, policy)
    if dt > bound * (1.0 + 1e-9):
        raise StepError(
            f"dt = {dt:.6g} exceeds the stability bound {bound:.6g}", time=t
        )

    g = s.grid
    nus = _diffusivities(variant, c)

    def factors(tau: float) -> list[np.ndarray]:
        return [np.exp(-nu * g.k2 * tau) for nu in nus]

    yh = _spectral_state(s)

    if policy.scheme == "if_rk2":
        e_full = factors(dt)
        n0 = _explicit(s, variant, c, t, forcing)
        n0h = [g.forward(f) for f in n0.fields()]
        pred_h = [e * (y + dt * n) for e, y, n in zip(e_full, yh, n0h)]
        pred = _physical_state(g, pred_h)
        n1 = _explicit(pred, variant, c, t + dt, forcing)
        n1h = [g.forward(f) for f in n1.fields()]
        yh = [
            e * y + 0.5 * dt * (e * n0_ + n1_)
            for e, y, n0_, n1_ in zip(e_full, yh, n0h, n1h)
        ]
    else:
        a = (8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0)
        b = (0.0, -17.0 / 60.0, -5.0 / 12.0)
        nodes = (0.0, 8.0 / 15.0, 2.0 / 3.0, 1.0)
        stage_state = s
        prev_h: Optional[list[np.ndarray]] = None
        for k in range(3):
            e_sub = factors((nodes[k + 1] - nodes[k]) * dt)
            nk = _explicit(stage_state, variant, c, t + nodes[k] * dt, forcing)
            nkh = [g.forward(f) for f in nk.fields()]
            if prev_h is None:
                yh = [e * (y + dt * a[k] * n) for e, y, n in zip(e_sub, yh, nkh)]
            else:
                yh = [
                    e * (y + dt * (a[k] * n + b[k] * p))
                    for e, y, n, p in zip(e_sub, yh, nkh, prev_h)
                ]
            prev_h = [e * n for e, n in zip(e_sub, nkh)]
            if k < 2:
                stage_state = _physical_state(g, yh)

    out = _physical_state(g, yh)
    u1, u2 = g.leray_project(out.u1, out.u2)
    out = State(g, u1, u2, out.v1, out.v2, out.T, out.q)

    for name, f in zip(FIELD_NAMES, out.fields()):
        if not np.isfinite(f).all():
            raise StepError(f"non-finite field {name!r} after step", time=t + dt)
    return out


def run(
    initial: State,
    t_end: float,
    variant: SystemVariant,
    c: PhysConsts,
    policy: StepPolicy,
    forcing: Forcing = NO_FORCING,
    output_cadence: Optional[float] = None,
) -> Trajectory:
    """Integrate to t_end with adaptive dt = cfl_dt, clipping each step onto
    the output-cadence boundaries so snapshots land on exact times.

    Deterministic: identical inputs give a bitwise-identical trajectory.
    Step failures raise StepFailure carrying the last good state and the
    partial trajectory.
    """
    if t_end < 0:
        raise ValueError(f"t_end must be nonnegative, got {t_end}")
    if output_cadence is not None and not output_cadence > 0:
        raise ValueError(f"output_cadence must be positive, got {output_cadence}")

    initial.validate()
    state = initial.sanitized()
    traj = Trajectory(variant=variant)
    traj.snapshots.append((0.0, state))
    traj.records.append(diagnostics.record(state, variant, c, time=0.0))

    if t_end == 0.0:
        return traj

    t = 0.0
    next_output = output_cadence if output_cadence is not None else t_end
    step_index = 0
    eps_t = 1e-12 * max(1.0, t_end)

    while t < t_end - eps_t:
        target = min(next_output, t_end)
        dt = min(cfl_dt(state, variant, c, policy), target - t)
        hit_boundary = t + dt >= target - eps_t
        if hit_boundary:
            dt = target - t
        try:
            state = step(state, dt, variant, c, policy, forcing, t=t)
        except (StepError, TendencyError) as exc:
            raise StepFailure(step_index, t, state, traj) from exc
        step_index += 1
        t = target if hit_boundary else t + dt
        traj.records.append(diagnostics.record(state, variant, c, time=t))
        if hit_boundary:
            traj.snapshots.append((t, state))
            if output_cadence is not None:
                next_output = round(t / output_cadence + 1) * output_cadence

    traj.step_count = step_index
    diagnostics.fill_energy_residuals(traj.records, variant, c)
    return traj
