"""Physical constants and closure functions for the precipitation source.

The source is assembled pointwise as

    P = (H_trop * g / (pi * R)) * max(-div v, 0) * Hvar(q - q_s) * max(G(T), 0)

where Hvar is a mollified Heaviside (slope 1/eps), an exact measurable
selection of the Heaviside graph, or the plain indicator; and

    F(T) = q_s * T * (L*R - c_p*R_nu*T) / (c_p*R_nu*T^2 + q_s*L^2)
    G(T) = F(T) / T   (evaluated by its closed form, no division by T)

F and G are smooth, bounded and Lipschitz on all of R; their bound and
Lipschitz constants are measured numerically (dense sampling plus the
analytic critical points), not hardcoded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from tcm.spectral import FieldError


@dataclass(frozen=True)
class PhysConsts:
    """All physical parameters; xi0 is derived, never stored.

    Defaults keep the thermodynamic constants physical (so xi0 is around
    1548.5 K) while H_trop, N and Qbar are desk-scale values that make the
    coupling coefficients O(1) for nondimensional runs. H_trop = 0 is a
    legal override that switches off all T-v coupling and precipitation
    ("heat mode").
    """

    L: float = 2.5e6          # latent heat of evaporation, J/kg
    R: float = 287.0          # dry-air gas constant, J/(kg K)
    R_nu: float = 461.5       # water-vapor gas constant, J/(kg K)
    c_p: float = 1004.0       # specific heat capacity, J/(kg K)
    g: float = 9.81           # gravity, m/s^2
    H_trop: float = np.pi     # troposphere thickness (scaled)
    theta0: float = 300.0     # reference potential temperature, K
    N: float = 0.18           # Brunt-Vaisala frequency, 1/s (scaled)
    Qbar: float = 0.9         # gross moisture stratification, > 0
    q_s: float = 0.02         # saturation humidity, in (0, 1)
    mu: float = 1.0           # viscosity

    def __post_init__(self) -> None:
        if not self.Qbar > 0:
            raise ValueError(f"Qbar must be positive, got {self.Qbar}")
        if not (0.0 < self.q_s < 1.0):
            raise ValueError(f"q_s must lie in (0, 1), got {self.q_s}")
        if self.H_trop < 0:
            raise ValueError(f"H_trop must be nonnegative, got {self.H_trop}")
        for name in ("L", "R", "R_nu", "c_p", "theta0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def xi0(self) -> float:
        """Temperature at which G vanishes: L*R / (c_p * R_nu)."""
        return self.L * self.R / (self.c_p * self.R_nu)

    # coupling coefficients of the projected system
    @property
    def coef_grad_T(self) -> float:
        """(H/pi)(g/theta0): gradient-of-T forcing on v."""
        return (self.H_trop / np.pi) * (self.g / self.theta0)

    @property
    def coef_div_v(self) -> float:
        """(H/pi)(theta0 N^2 / g): div-v forcing on T."""
        return (self.H_trop / np.pi) * (self.theta0 * self.N**2 / self.g)

    @property
    def coef_precip(self) -> float:
        """H*g/(pi*R): precipitation strength."""
        return self.H_trop * self.g / (np.pi * self.R)


@dataclass(frozen=True)
class ClosureTolerances:
    """Sampling setup for the measured closure constants."""

    lipschitz_sample_count: int = 200_001
    bound_check_tolerance: float = 1e-12

    def __post_init__(self) -> None:
        if self.lipschitz_sample_count <= 0:
            raise ValueError("lipschitz_sample_count must be positive")
        if self.bound_check_tolerance <= 0:
            raise ValueError("bound_check_tolerance must be positive")


def F(T, c: PhysConsts):
    """Moisture-flux closure; accepts scalars or arrays."""
    T = np.asarray(T, dtype=np.float64)
    a = c.c_p * c.R_nu
    out = c.q_s * T * (c.L * c.R - a * T) / (a * T**2 + c.q_s * c.L**2)
    return out if out.ndim else float(out)


def G(T, c: PhysConsts):
    """G = F/T by closed form; G(0) = R/L, G(xi0) = 0."""
    T = np.asarray(T, dtype=np.float64)
    a = c.c_p * c.R_nu
    out = c.q_s * (c.L * c.R - a * T) / (a * T**2 + c.q_s * c.L**2)
    return out if out.ndim else float(out)


def Gplus(T, c: PhysConsts):
    """Positive part of G; vanishes for T >= xi0."""
    out = np.maximum(G(np.asarray(T, dtype=np.float64), c), 0.0)
    return out if out.ndim else float(out)


def _critical_temperatures(c: PhysConsts) -> tuple[float, float]:
    """Roots of G'(T) = 0: T = (b +- sqrt(b^2 + a*s)) / a."""
    a = c.c_p * c.R_nu
    b = c.L * c.R
    s = c.q_s * c.L**2
    root = np.sqrt(b**2 + a * s)
    return (b - root) / a, (b + root) / a


@lru_cache(maxsize=32)
def _measured_constants(c: PhysConsts, samples: int) -> dict[str, float]:
    T = np.linspace(-1e4, 1e4, samples)
    crit = np.array(_critical_temperatures(c))
    T = np.concatenate([T, crit])

    a = c.c_p * c.R_nu
    s = c.q_s * c.L**2
    b = c.L * c.R
    denom = a * T**2 + s
    g_vals = c.q_s * (b - a * T) / denom
    f_vals = T * g_vals
    # analytic derivatives
    g_prime = c.q_s * (-a * denom - (b - a * T) * 2 * a * T) / denom**2
    f_prime = g_vals + T * g_prime

    return {
        "C_F": float(np.max(np.abs(f_vals))),
        "C_G": float(np.max(np.abs(g_vals))),
        "M_F": float(np.max(np.abs(f_prime))),
        "M_G": float(np.max(np.abs(g_prime))),
    }


def measured_constants(
    c: PhysConsts, tol: ClosureTolerances = ClosureTolerances()
) -> dict[str, float]:
    """Bound and Lipschitz constants of F and G, measured by dense sampling
    over [-1e4, 1e4] augmented with the analytic critical points."""
    return dict(_measured_constants(c, tol.lipschitz_sample_count))


def heaviside_eps(r, eps: float):
    """Piecewise-linear Heaviside mollifier: 0, r/eps on (0, eps], then 1."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    r = np.asarray(r, dtype=np.float64)
    out = np.clip(r / eps, 0.0, 1.0)
    return out if out.ndim else float(out)


def heaviside_selection(r, alpha: float):
    """Exact Heaviside selection: 1 for r > 0, alpha at r == 0, 0 for r < 0."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    r = np.asarray(r, dtype=np.float64)
    out = np.where(r > 0.0, 1.0, np.where(r == 0.0, alpha, 0.0))
    return out if out.ndim else float(out)


def heaviside_indicator(r):
    """Indicator form: active for r >= 0 (the delta of the source term)."""
    r = np.asarray(r, dtype=np.float64)
    out = np.where(r >= 0.0, 1.0, 0.0)
    return out if out.ndim else float(out)


def saturation_switch(r: np.ndarray, variant) -> np.ndarray:
    """Evaluate the variant's Heaviside on r = q - q_s."""
    if variant.kind == "indicator":
        return heaviside_indicator(r)
    if variant.kind == "selection":
        return heaviside_selection(r, variant.alpha)
    return heaviside_eps(r, variant.eps)


@dataclass(frozen=True)
class SwitchVariant:
    """Which Heaviside the precipitation product uses.

    kind: 'mollified' (needs eps), 'selection' (needs alpha) or 'indicator'.
    """

    kind: str
    eps: float = 0.0
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("mollified", "selection", "indicator"):
            raise ValueError(f"unknown switch kind {self.kind!r}")
        if self.kind == "mollified" and not self.eps > 0:
            raise ValueError("mollified switch needs eps > 0")
        if self.kind == "selection" and not 0.0 <= self.alpha <= 1.0:
            raise ValueError("selection switch needs alpha in [0, 1]")


def mollified(eps: float) -> SwitchVariant:
    return SwitchVariant("mollified", eps=eps)


def selection(alpha: float = 1.0) -> SwitchVariant:
    return SwitchVariant("selection", alpha=alpha)


def indicator() -> SwitchVariant:
    return SwitchVariant("indicator")


def precipitation(
    div_v: np.ndarray,
    q: np.ndarray,
    T: np.ndarray,
    variant: SwitchVariant,
    c: PhysConsts,
) -> np.ndarray:
    """Pointwise precipitation field.

    P = coef_precip * (div v)^- * Hvar(q - q_s) * G^+(T) with
    (div v)^- = max(-div v, 0). Nonnegative everywhere; zero wherever
    q < q_s, div v >= 0 or T >= xi0.
    """
    if not (div_v.shape == q.shape == T.shape):
        raise FieldError(
            f"precipitation fields on mismatched grids: "
            f"{div_v.shape}, {q.shape}, {T.shape}"
        )
    updraft = np.maximum(-div_v, 0.0)
    return c.coef_precip * updraft * saturation_switch(q - c.q_s, variant) * Gplus(T, c)
