"""Right-hand sides of the three system variants and derived reconstructions.

Variants:
  p_eps_eta(eps, eta) - mollified threshold plus artificial humidity
                        viscosity eta*Lap(q);
  p_eps(eps)          - mollified threshold, no humidity viscosity;
  limit(alpha)        - exact threshold via a measurable Heaviside
                        selection (value alpha on the set {q == q_s}).

Tendencies (pressure eliminated by Leray projection):
  dt u = P[ -u.grad(u) - div(v x v) + mu*Lap(u) + F_u ]
  dt v = -u.grad(v) - v.grad(u) + mu*Lap(v) + (H/pi)(g/theta0) grad(T) + F_v
  dt T = -u.grad(T) + Lap(T) + (H/pi)(theta0 N^2/g) div(v) + P + F_T
  dt q = -u.grad(q) - Qbar*div(v) - P [+ eta*Lap(q)] + F_q

Every quadratic product is dealiased by the 2/3 rule; the precipitation
product is evaluated pointwise in physical space and dealiased before it
enters the tendency. The u forcing is added before the projection so the
u tendency is always divergence-free.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from tcm.spectral import FieldError, Grid, ensure_finite
from tcm.thermo import PhysConsts, SwitchVariant, precipitation

FieldFunc = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

FIELD_NAMES = ("u1", "u2", "v1", "v2", "T", "q")


class TendencyError(RuntimeError):
    """Raised when a tendency evaluation produces non-finite values."""

    def __init__(self, field_name: str, message: str = ""):
        self.field_name = field_name
        super().__init__(message or f"non-finite tendency in field {field_name!r}")


@dataclass(frozen=True)
class SystemVariant:
    """Tagged variant of the system: p_eps_eta, p_eps or limit."""

    tag: str
    eps: float = 0.0
    eta: float = 0.0
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.tag not in ("p_eps_eta", "p_eps", "limit"):
            raise ValueError(f"unknown system variant {self.tag!r}")
        if self.tag in ("p_eps_eta", "p_eps") and not self.eps > 0:
            raise ValueError(f"variant {self.tag} needs eps > 0, got {self.eps}")
        if self.tag == "p_eps_eta" and not self.eta > 0:
            raise ValueError(f"variant p_eps_eta needs eta > 0, got {self.eta}")
        if self.tag == "limit" and not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"variant limit needs alpha in [0, 1], got {self.alpha}")

    @staticmethod
    def p_eps_eta(eps: float, eta: float) -> "SystemVariant":
        return SystemVariant("p_eps_eta", eps=eps, eta=eta)

    @staticmethod
    def p_eps(eps: float) -> "SystemVariant":
        return SystemVariant("p_eps", eps=eps)

    @staticmethod
    def limit(alpha: float = 1.0) -> "SystemVariant":
        return SystemVariant("limit", alpha=alpha)

    @property
    def humidity_viscosity(self) -> float:
        return self.eta if self.tag == "p_eps_eta" else 0.0

    @property
    def switch(self) -> SwitchVariant:
        if self.tag == "limit":
            return SwitchVariant("selection", alpha=self.alpha)
        return SwitchVariant("mollified", eps=self.eps)


@dataclass(frozen=True)
class Forcing:
    """Optional per-equation sources, each a callable (X, Y, t) -> array."""

    u1: Optional[FieldFunc] = None
    u2: Optional[FieldFunc] = None
    v1: Optional[FieldFunc] = None
    v2: Optional[FieldFunc] = None
    T: Optional[FieldFunc] = None
    q: Optional[FieldFunc] = None

    def is_zero(self) -> bool:
        return all(
            getattr(self, name) is None for name in FIELD_NAMES
        )

    @staticmethod
    def none() -> "Forcing":
        return Forcing()


NO_FORCING = Forcing()


@dataclass(frozen=True, eq=False)
class State:
    """The four prognostic fields at one time level."""

    grid: Grid
    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    T: np.ndarray
    q: np.ndarray

    def fields(self) -> tuple[np.ndarray, ...]:
        return (self.u1, self.u2, self.v1, self.v2, self.T, self.q)

    def validate(self) -> None:
        for name, f in zip(FIELD_NAMES, self.fields()):
            self.grid._check_shape(np.asarray(f))
            ensure_finite(name, f)

    def sanitized(self) -> "State":
        """Leray-project u and dealias every field (state invariants)."""
        g = self.grid
        u1, u2 = g.leray_project(self.u1, self.u2)
        return State(
            grid=g,
            u1=g.dealias(u1),
            u2=g.dealias(u2),
            v1=g.dealias(self.v1),
            v2=g.dealias(self.v2),
            T=g.dealias(self.T),
            q=g.dealias(self.q),
        )

    def copy(self) -> "State":
        return State(self.grid, *(f.copy() for f in self.fields()))

    @staticmethod
    def create(grid: Grid, u1, u2, v1, v2, T, q) -> "State":
        s = State(
            grid,
            *(np.asarray(f, dtype=np.float64) for f in (u1, u2, v1, v2, T, q)),
        )
        s.validate()
        return s.sanitized()

    @staticmethod
    def zeros(grid: Grid) -> "State":
        z = lambda: np.zeros((grid.n, grid.n))
        return State(grid, z(), z(), z(), z(), z(), z())

    def diff_l2(self, other: "State") -> float:
        """Grid L2 norm of the stacked field difference."""
        return self.grid.l2(
            *(a - b for a, b in zip(self.fields(), other.fields()))
        )


def perturbed(s: State, field_name: str, delta: float, mode: int = 1) -> State:
    """Add a band-limited bump delta*cos(mode*2pi x/L) to one named field."""
    if field_name not in FIELD_NAMES:
        raise ValueError(f"unknown field {field_name!r}; valid: {FIELD_NAMES}")
    X, _ = s.grid.coords()
    bump = delta * np.cos(mode * 2.0 * np.pi * X / s.grid.length)
    kwargs = {field_name: getattr(s, field_name) + bump}
    return replace(s, **kwargs)


@dataclass(frozen=True, eq=False)
class Tendency:
    """State-shaped right-hand side."""

    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    T: np.ndarray
    q: np.ndarray

    def fields(self) -> tuple[np.ndarray, ...]:
        return (self.u1, self.u2, self.v1, self.v2, self.T, self.q)


def _advect(g: Grid, u1: np.ndarray, u2: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Dealiased convective advection u.grad(f)."""
    fx, fy = g.gradient(f)
    return g.dealias(u1 * fx + u2 * fy)


def tendencies(
    s: State,
    variant: SystemVariant,
    c: PhysConsts,
    t: float = 0.0,
    forcing: Forcing = NO_FORCING,
    include_diffusion: bool = True,
) -> Tendency:
    """Full right-hand side of the chosen variant.

    With include_diffusion=False the diffusion terms (mu*Lap u, mu*Lap v,
    Lap T, eta*Lap q) are omitted; the time stepper integrates them exactly
    with per-mode integrating factors.
    """
    s.validate()
    g = s.grid
    u1, u2, v1, v2, T, q = s.fields()

    X = Y = None
    if not forcing.is_zero():
        X, Y = g.coords()

    def force(name: str) -> Optional[np.ndarray]:
        fn = getattr(forcing, name)
        return None if fn is None else np.asarray(fn(X, Y, t), dtype=np.float64)

    # barotropic momentum
    d11 = g.dealias(v1 * v1)
    d12 = g.dealias(v1 * v2)
    d22 = g.dealias(v2 * v2)
    div_vv1 = g.divergence(d11, d12)
    div_vv2 = g.divergence(d12, d22)
    rhs_u1 = -_advect(g, u1, u2, u1) - div_vv1
    rhs_u2 = -_advect(g, u1, u2, u2) - div_vv2
    if include_diffusion:
        rhs_u1 = rhs_u1 + c.mu * g.laplacian(u1)
        rhs_u2 = rhs_u2 + c.mu * g.laplacian(u2)
    fu1, fu2 = force("u1"), force("u2")
    if fu1 is not None:
        rhs_u1 = rhs_u1 + fu1
    if fu2 is not None:
        rhs_u2 = rhs_u2 + fu2
    rhs_u1, rhs_u2 = g.leray_project(rhs_u1, rhs_u2)

    # baroclinic momentum
    du11, du12 = g.gradient(u1)   # grad of u1
    du21, du22 = g.gradient(u2)   # grad of u2
    Tx, Ty = g.gradient(T)
    rhs_v1 = (
        -_advect(g, u1, u2, v1)
        - g.dealias(v1 * du11 + v2 * du12)
        + c.coef_grad_T * Tx
    )
    rhs_v2 = (
        -_advect(g, u1, u2, v2)
        - g.dealias(v1 * du21 + v2 * du22)
        + c.coef_grad_T * Ty
    )
    if include_diffusion:
        rhs_v1 = rhs_v1 + c.mu * g.laplacian(v1)
        rhs_v2 = rhs_v2 + c.mu * g.laplacian(v2)
    fv1, fv2 = force("v1"), force("v2")
    if fv1 is not None:
        rhs_v1 = rhs_v1 + fv1
    if fv2 is not None:
        rhs_v2 = rhs_v2 + fv2

    # temperature and humidity
    div_v = g.divergence(v1, v2)
    P = g.dealias(precipitation(div_v, q, T, variant.switch, c))

    rhs_T = -_advect(g, u1, u2, T) + c.coef_div_v * div_v + P
    if include_diffusion:
        rhs_T = rhs_T + g.laplacian(T)
    fT = force("T")
    if fT is not None:
        rhs_T = rhs_T + fT

    rhs_q = -_advect(g, u1, u2, q) - c.Qbar * div_v - P
    eta = variant.humidity_viscosity
    if include_diffusion and eta > 0.0:
        rhs_q = rhs_q + eta * g.laplacian(q)
    fq = force("q")
    if fq is not None:
        rhs_q = rhs_q + fq

    out = Tendency(rhs_u1, rhs_u2, rhs_v1, rhs_v2, rhs_T, rhs_q)
    for name, f in zip(FIELD_NAMES, out.fields()):
        if not np.isfinite(f).all():
            raise TendencyError(name)
    return out


def source_cancellation_check(
    s: State, variant: SystemVariant, c: PhysConsts
) -> float:
    """Max-norm residual of the precipitation cancellation in d/dt (T + q).

    The precipitation terms enter T and q with opposite signs, so
    dt T + dt q must equal the precipitation-free combination
    -u.grad(T+q) + Lap T + (coef_div_v - Qbar) div v [+ eta Lap q]
    to round-off, independent of eps/alpha.
    """
    tend = tendencies(s, variant, c)
    g = s.grid
    summed = tend.T + tend.q
    reference = (
        -_advect(g, s.u1, s.u2, s.T + s.q)
        + g.laplacian(s.T)
        + (c.coef_div_v - c.Qbar) * g.divergence(s.v1, s.v2)
    )
    eta = variant.humidity_viscosity
    if eta > 0.0:
        reference = reference + eta * g.laplacian(s.q)
    return g.linf(summed - reference)


def vertical_velocity(v1: np.ndarray, v2: np.ndarray, grid: Grid, c: PhysConsts) -> np.ndarray:
    """Reconstructed vertical velocity w = -(H/pi) div v (w > 0 in updrafts)."""
    return -(c.H_trop / np.pi) * grid.divergence(v1, v2)


def baroclinic_pressure(T: np.ndarray, c: PhysConsts) -> np.ndarray:
    """Reconstructed baroclinic pressure p1 = -(H/pi)(g/theta0) T."""
    return -(c.H_trop / np.pi) * (c.g / c.theta0) * np.asarray(T, dtype=np.float64)
