"""Per-step scalar diagnostics and discrete residuals of the energy identity.

The energy functional is E = (|u|_2^2 + |v|_2^2 + |T|_2^2 + |q|_2^2) / 2.
Testing the dynamics goes through the exact balance

    dE/dt + mu|grad u|^2 + mu|grad v|^2 + |grad T|^2 + eta|grad q|^2
        = c_gT * int(grad T . v) + c_div * int(T div v) + int(P T)
          - Qbar * int(q div v) - int(P q)

whose five right-hand integrals are evaluated per record; the residual is
formed with a three-point (possibly nonuniform) centered time difference
and must shrink at the integrator's order under dt refinement.

The record's `dissipation` entry is the integrated-estimate combination
2mu|grad u|^2 + mu|grad v|^2 + |grad T|^2 + 2eta|grad q|^2; the identity
uses `ident_dissipation` (coefficients mu, mu, 1, eta). Sup norms are grid
maxima; |grad f|_inf is the max absolute value over both gradient
components.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields
from typing import Sequence

import numpy as np

from tcm.model import State, SystemVariant
from tcm.thermo import PhysConsts, measured_constants, precipitation


@dataclass
class DiagnosticsRecord:
    time: float
    E: float
    l2_u: float
    l2_v: float
    l2_T: float
    l2_q: float
    grad_u: float
    grad_v: float
    grad_T: float
    grad_q: float
    h1_u: float
    h1_v: float
    h1_T: float
    h1_q: float
    sup_T: float
    sup_grad_u: float
    sup_grad_v: float
    dissipation: float
    ident_dissipation: float
    precip_total: float
    sat_below: float
    sat_at: float
    sat_above: float
    rhs_grad_T_v: float
    rhs_T_div_v: float
    rhs_precip_T: float
    rhs_q_div_v: float
    rhs_precip_q: float
    energy_residual: float = 0.0

    @property
    def rhs_total(self) -> float:
        return (
            self.rhs_grad_T_v
            + self.rhs_T_div_v
            + self.rhs_precip_T
            + self.rhs_q_div_v
            + self.rhs_precip_q
        )

    def validate(self) -> None:
        for f in dataclass_fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise ValueError(f"diagnostics entry {f.name} is not finite: {value}")
        if self.E < 0 or self.dissipation < 0:
            raise ValueError("E and dissipation must be nonnegative")
        if abs(self.sat_below + self.sat_at + self.sat_above - 1.0) > 1e-12:
            raise ValueError("saturation fractions must sum to 1")


def record(
    s: State, variant: SystemVariant, c: PhysConsts, time: float = 0.0
) -> DiagnosticsRecord:
    """Evaluate every scalar diagnostic on one State."""
    g = s.grid
    u1, u2, v1, v2, T, q = s.fields()

    l2sq_u = g.l2sq(u1, u2)
    l2sq_v = g.l2sq(v1, v2)
    l2sq_T = g.l2sq(T)
    l2sq_q = g.l2sq(q)
    E = 0.5 * (l2sq_u + l2sq_v + l2sq_T + l2sq_q)

    gradients = {name: g.gradient(f) for name, f in
                 (("u1", u1), ("u2", u2), ("v1", v1), ("v2", v2), ("T", T), ("q", q))}
    gsq_u = g.l2sq(*gradients["u1"], *gradients["u2"])
    gsq_v = g.l2sq(*gradients["v1"], *gradients["v2"])
    gsq_T = g.l2sq(*gradients["T"])
    gsq_q = g.l2sq(*gradients["q"])

    eta = variant.humidity_viscosity
    mu = c.mu
    dissipation = 2.0 * mu * gsq_u + mu * gsq_v + gsq_T + 2.0 * eta * gsq_q
    ident_dissipation = mu * gsq_u + mu * gsq_v + gsq_T + eta * gsq_q

    div_v = g.divergence(v1, v2)
    P = precipitation(div_v, q, T, variant.switch, c)
    Tx, Ty = gradients["T"]

    r = q - c.q_s
    npts = r.size
    below = int(np.count_nonzero(r < 0.0))
    at = int(np.count_nonzero(r == 0.0))
    above = npts - below - at

    rec = DiagnosticsRecord(
        time=time,
        E=E,
        l2_u=float(np.sqrt(l2sq_u)),
        l2_v=float(np.sqrt(l2sq_v)),
        l2_T=float(np.sqrt(l2sq_T)),
        l2_q=float(np.sqrt(l2sq_q)),
        grad_u=float(np.sqrt(gsq_u)),
        grad_v=float(np.sqrt(gsq_v)),
        grad_T=float(np.sqrt(gsq_T)),
        grad_q=float(np.sqrt(gsq_q)),
        h1_u=float(np.sqrt(l2sq_u + gsq_u)),
        h1_v=float(np.sqrt(l2sq_v + gsq_v)),
        h1_T=float(np.sqrt(l2sq_T + gsq_T)),
        h1_q=float(np.sqrt(l2sq_q + gsq_q)),
        sup_T=g.linf(T),
        sup_grad_u=g.linf(*gradients["u1"], *gradients["u2"]),
        sup_grad_v=g.linf(*gradients["v1"], *gradients["v2"]),
        dissipation=dissipation,
        ident_dissipation=ident_dissipation,
        precip_total=g.integral(P),
        sat_below=below / npts,
        sat_at=at / npts,
        sat_above=above / npts,
        rhs_grad_T_v=c.coef_grad_T * g.integral(Tx * v1 + Ty * v2),
        rhs_T_div_v=c.coef_div_v * g.integral(T * div_v),
        rhs_precip_T=g.integral(P * T),
        rhs_q_div_v=-c.Qbar * g.integral(q * div_v),
        rhs_precip_q=-g.integral(P * q),
    )
    rec.validate()
    return rec


def _centered_derivative(r0: DiagnosticsRecord, r1: DiagnosticsRecord,
                         r2: DiagnosticsRecord) -> float:
    """Second-order dE/dt at r1 for a possibly nonuniform stencil."""
    h0 = r1.time - r0.time
    h1 = r2.time - r1.time
    if h0 <= 0 or h1 <= 0:
        raise ValueError("records must have strictly increasing times")
    return float(
        (r2.E - r1.E) / h1 * (h0 / (h0 + h1))
        + (r1.E - r0.E) / h0 * (h1 / (h0 + h1))
    )


def energy_identity_residual(window: Sequence[DiagnosticsRecord]) -> float:
    """|dE/dt + dissipation - RHS| at the middle record of a >= 3 window."""
    if len(window) < 3:
        raise ValueError(f"need at least 3 consecutive records, got {len(window)}")
    mid = len(window) // 2
    r0, r1, r2 = window[mid - 1], window[mid], window[mid + 1]
    de_dt = _centered_derivative(r0, r1, r2)
    return abs(de_dt + r1.ident_dissipation - r1.rhs_total)


def fill_energy_residuals(
    records: list[DiagnosticsRecord], variant: SystemVariant, c: PhysConsts
) -> None:
    """Populate record.energy_residual in place (endpoints copy neighbors)."""
    n = len(records)
    if n < 3:
        for r in records:
            r.energy_residual = 0.0
        return
    for i in range(1, n - 1):
        records[i].energy_residual = energy_identity_residual(records[i - 1 : i + 2])
    records[0].energy_residual = records[1].energy_residual
    records[-1].energy_residual = records[-2].energy_residual


def residual_near(records: Sequence[DiagnosticsRecord], t: float) -> float:
    """Energy residual at the interior record closest to time t."""
    if len(records) < 3:
        raise ValueError("need at least 3 records")
    interior = records[1:-1]
    idx = min(range(len(interior)), key=lambda i: abs(interior[i].time - t))
    return energy_identity_residual(records[idx : idx + 3])


@dataclass(frozen=True)
class GronwallReport:
    c_tilde: float
    satisfied: bool
    first_violation_time: float | None
    max_ratio: float


def gronwall_bound_check(
    records: Sequence[DiagnosticsRecord], variant: SystemVariant, c: PhysConsts
) -> GronwallReport:
    """Check E(t) + int_0^t (dissipation/2) <= E(0) exp(2 c_tilde t).

    c_tilde is assembled from the constants exactly as in the a-priori
    energy estimate (Young's inequality with the measured bound C_G):
    the div-v couplings cost 2(Qbar^2 + cP^2 C_G^2) and
    2(c_div^2 + cP^2 C_G^2) on |q|^2 and |T|^2, the grad-T coupling costs
    c_gT^2 / 2 on |v|^2.
    """
    c_g = measured_constants(c)["C_G"]
    c_tilde = max(
        2.0 * (c.Qbar**2 + (c.coef_precip * c_g) ** 2),
        2.0 * (c.coef_div_v**2 + (c.coef_precip * c_g) ** 2),
        c.coef_grad_T**2 / 2.0,
    )
    e0 = records[0].E
    integral = 0.0
    satisfied = True
    first_violation = None
    max_ratio = 0.0
    for prev, rec in zip(records, records[1:]):
        dt = rec.time - prev.time
        integral += 0.5 * dt * (0.5 * prev.dissipation + 0.5 * rec.dissipation)
        bound = e0 * np.exp(2.0 * c_tilde * rec.time) + 1e-14
        ratio = (rec.E + integral) / bound if bound > 0 else np.inf
        max_ratio = max(max_ratio, ratio)
        if ratio > 1.0 + 1e-9 and satisfied:
            satisfied = False
            first_violation = rec.time
    if not records[1:]:
        max_ratio = 1.0 if e0 == 0.0 else records[0].E / (e0 + 1e-14)
    return GronwallReport(c_tilde, satisfied, first_violation, max_ratio)


@dataclass(frozen=True)
class SupTReport:
    max_sup_T: float
    exceeded_xi0: bool
    first_exceed_time: float | None
    sup_T_series: tuple[tuple[float, float], ...]


def sup_T_monitor(
    records: Sequence[DiagnosticsRecord], c: PhysConsts
) -> SupTReport:
    """Track |T|_inf over a trajectory and flag (not assert) xi0 exceedance."""
    series = tuple((r.time, r.sup_T) for r in records)
    max_sup = max((r.sup_T for r in records), default=0.0)
    first = next((r.time for r in records if r.sup_T > c.xi0), None)
    return SupTReport(max_sup, first is not None, first, series)


def saturation_decomposition(
    q1: np.ndarray, q2: np.ndarray, q_s: float
) -> tuple[float, ...]:
    """Area fractions of the seven pairwise saturation sets for two humidity
    fields: sign(q1 - q_s) x sign(q2 - q_s) with the {== q_s} cases kept
    separate. Ordered: (<,<), (<,=), (=,<), (=,=), (=,>), (>,=), (>,>),
    plus the two mixed-sign sets (<,>) and (>,<) appended last."""
    r1 = q1 - q_s
    r2 = q2 - q_s
    npts = r1.size

    def frac(mask: np.ndarray) -> float:
        return int(np.count_nonzero(mask)) / npts

    return (
        frac((r1 < 0) & (r2 < 0)),
        frac((r1 < 0) & (r2 == 0)),
        frac((r1 == 0) & (r2 < 0)),
        frac((r1 == 0) & (r2 == 0)),
        frac((r1 == 0) & (r2 > 0)),
        frac((r1 > 0) & (r2 == 0)),
        frac((r1 > 0) & (r2 > 0)),
        frac((r1 < 0) & (r2 > 0)),
        frac((r1 > 0) & (r2 < 0)),
    )
