"""Run configuration: a flat `key = value` text format with dotted sections.

Lines are `section.key = value`; `#` starts a comment; blank lines are
skipped. Every key is optional and defaulted, unknown keys are errors, and
every parse error carries the line number and the offending key. The full
key table with defaults is documented in README.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from tcm.harness import REGIMES, BaseRun, InitialDataSpec
from tcm.model import Forcing, State, SystemVariant
from tcm.spectral import Grid
from tcm.stepping import StepPolicy
from tcm.thermo import PhysConsts


class ConfigError(ValueError):
    """Malformed configuration text; message carries line number and key."""


@dataclass(frozen=True)
class SweepSettings:
    values: tuple[float, ...] = ()
    norm: str = "l2"
    times: tuple[float, ...] = ()
    compare_field: Optional[str] = "q"


@dataclass(frozen=True)
class TwinSettings:
    regime: str = "subsaturated"
    perturb_field: Optional[str] = None
    delta: float = 0.0


@dataclass(frozen=True)
class MmsSettings:
    family: str = "decaying_smooth"
    resolutions: tuple[int, ...] = (16, 32, 64)
    dts: tuple[float, ...] = (4e-3, 2e-3, 1e-3)
    t_end: float = 0.25


@dataclass(frozen=True)
class RunConfig:
    grid_n: int = 128
    grid_length: float = 2.0 * np.pi
    variant: SystemVariant = SystemVariant.p_eps(1e-2)
    consts: PhysConsts = PhysConsts()
    policy: StepPolicy = StepPolicy()
    t_end: float = 1.0
    cadence: float = 0.1
    out_dir: str = "out"
    init: InitialDataSpec = InitialDataSpec()
    init_kind: str = "generator"          # 'generator' | 'snapshot'
    init_snapshot: Optional[str] = None
    forcing_id: str = "none"
    sweep: SweepSettings = SweepSettings()
    twin: TwinSettings = TwinSettings()
    mms: MmsSettings = MmsSettings()

    def grid(self) -> Grid:
        return Grid(self.grid_n, self.grid_length)

    def base_run(self) -> BaseRun:
        return BaseRun(
            grid=self.grid(),
            variant=self.variant,
            consts=self.consts,
            policy=self.policy,
            t_end=self.t_end,
            cadence=self.cadence,
            init=self.init,
            forcing=Forcing(),
        )

    def initial_state(self) -> Optional[State]:
        """Explicit initial state for snapshot-based init, else None
        (the generator in BaseRun takes over)."""
        if self.init_kind != "snapshot":
            return None
        from tcm.storage import read_snapshot

        state, _meta = read_snapshot(self.init_snapshot)
        if state.grid.n != self.grid_n:
            raise ConfigError(
                f"snapshot resolution {state.grid.n} does not match grid.n "
                f"{self.grid_n}"
            )
        return state


# -- key registry ------------------------------------------------------------

def _float_range(lo=None, hi=None, lo_open=False, hi_open=False):
    def convert(text: str) -> float:
        v = float(text)
        if not np.isfinite(v):
            raise ValueError("must be finite")
        if lo is not None and (v <= lo if lo_open else v < lo):
            raise ValueError(f"must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and (v >= hi if hi_open else v > hi):
            raise ValueError(f"must be {'<' if hi_open else '<='} {hi}")
        return v
    return convert


def _int_range(lo=None):
    def convert(text: str) -> int:
        v = int(text)
        if lo is not None and v < lo:
            raise ValueError(f"must be >= {lo}")
        return v
    return convert


def _choice(*options):
    def convert(text: str) -> str:
        if text not in options:
            raise ValueError(f"must be one of {options}")
        return text
    return convert


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _optional_field(text: str):
    return None if text == "none" else _choice("u1", "u2", "v1", "v2", "T", "q")(text)


_POSITIVE = _float_range(0.0, lo_open=True)

_KEYS = {
    "grid.n": _int_range(8),
    "grid.length": _POSITIVE,
    "variant.tag": _choice("p_eps_eta", "p_eps", "limit"),
    "variant.eps": _POSITIVE,
    "variant.eta": _POSITIVE,
    "variant.alpha": _float_range(0.0, 1.0),
    "consts.L": _POSITIVE,
    "consts.R": _POSITIVE,
    "consts.R_nu": _POSITIVE,
    "consts.c_p": _POSITIVE,
    "consts.g": _POSITIVE,
    "consts.H_trop": _float_range(0.0),
    "consts.theta0": _POSITIVE,
    "consts.N": _float_range(0.0),
    "consts.Qbar": _POSITIVE,
    "consts.q_s": _float_range(0.0, 1.0, lo_open=True, hi_open=True),
    "consts.mu": _POSITIVE,
    "policy.dt": _POSITIVE,
    "policy.cfl": _float_range(0.0, 1.0, lo_open=True, hi_open=True),
    "policy.sub_safety": _float_range(0.0, 1.0, lo_open=True),
    "policy.scheme": _choice("if_rk2", "if_rk3"),
    "run.t_end": _float_range(0.0),
    "run.cadence": _POSITIVE,
    "run.out_dir": str,
    "init.kind": _choice("generator", "snapshot"),
    "init.snapshot": str,
    "init.seed": _int_range(0),
    "init.regime": _choice(*REGIMES),
    "init.kband": _int_range(1),
    "init.amp_u": _float_range(0.0),
    "init.amp_v": _float_range(0.0),
    "init.amp_T": _float_range(0.0),
    "init.amp_q": _float_range(0.0),
    "init.q_margin": _float_range(0.0),
    "forcing.id": _choice("none"),
    "sweep.values": _float_list,
    "sweep.norm": _choice("l2", "h1", "linf"),
    "sweep.times": _float_list,
    "sweep.field": _optional_field,
    "twin.regime": _choice("subsaturated", "supersaturated"),
    "twin.perturb_field": _optional_field,
    "twin.delta": _float_range(0.0),
    "mms.family": _choice("decaying_smooth", "saturated_updraft", "steep_smooth"),
    "mms.resolutions": _int_list,
    "mms.dts": _float_list,
    "mms.t_end": _POSITIVE,
}


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate configuration text; total: every input
    yields a RunConfig or a ConfigError locating the failure."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _KEYS[key](rhs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(
                f"line {lineno}: key {key!r}: invalid value {rhs!r} ({exc})"
            ) from None
    return _assemble(values)


def _assemble(v: dict[str, object]) -> RunConfig:
    base = RunConfig()

    tag = v.get("variant.tag", base.variant.tag)
    eps = v.get("variant.eps", 1e-2)
    eta = v.get("variant.eta", 1e-3)
    alpha = v.get("variant.alpha", 1.0)
    try:
        if tag == "p_eps_eta":
            variant = SystemVariant.p_eps_eta(eps, eta)
        elif tag == "p_eps":
            variant = SystemVariant.p_eps(eps)
        else:
            variant = SystemVariant.limit(alpha)
    except ValueError as exc:
        raise ConfigError(f"key 'variant.tag': {exc}") from None

    consts_kwargs = {
        name: v[f"consts.{name}"]
        for name in ("L", "R", "R_nu", "c_p", "g", "H_trop", "theta0", "N",
                     "Qbar", "q_s", "mu")
        if f"consts.{name}" in v
    }
    try:
        consts = PhysConsts(**consts_kwargs)
    except ValueError as exc:
        raise ConfigError(f"consts: {exc}") from None

    policy = StepPolicy(
        dt=v.get("policy.dt", 0.01),
        cfl_target=v.get("policy.cfl", 0.4),
        eps_substep_safety=v.get("policy.sub_safety", 0.5),
        scheme=v.get("policy.scheme", "if_rk2"),
    )

    init = InitialDataSpec(
        seed=v.get("init.seed", 0),
        regime=v.get("init.regime", "subsaturated"),
        kband=v.get("init.kband", 4),
        amp_u=v.get("init.amp_u", 0.5),
        amp_v=v.get("init.amp_v", 0.5),
        amp_T=v.get("init.amp_T", 0.5),
        amp_q=v.get("init.amp_q", 0.25),
        q_margin=v.get("init.q_margin", 0.2),
    )

    init_kind = v.get("init.kind", "generator")
    init_snapshot = v.get("init.snapshot")
    if init_kind == "snapshot" and init_snapshot is None:
        raise ConfigError("key 'init.snapshot' is required when init.kind = snapshot")

    grid_n = v.get("grid.n", base.grid_n)
    if grid_n % 2 != 0:
        raise ConfigError(f"key 'grid.n': must be even, got {grid_n}")

    sweep = SweepSettings(
        values=v.get("sweep.values", ()),
        norm=v.get("sweep.norm", "l2"),
        times=v.get("sweep.times", ()),
        compare_field=v.get("sweep.field", "q"),
    )
    twin = TwinSettings(
        regime=v.get("twin.regime", "subsaturated"),
        perturb_field=v.get("twin.perturb_field"),
        delta=v.get("twin.delta", 0.0),
    )
    mms = MmsSettings(
        family=v.get("mms.family", "decaying_smooth"),
        resolutions=v.get("mms.resolutions", (16, 32, 64)),
        dts=v.get("mms.dts", (4e-3, 2e-3, 1e-3)),
        t_end=v.get("mms.t_end", 0.25),
    )

    return RunConfig(
        grid_n=grid_n,
        grid_length=v.get("grid.length", base.grid_length),
        variant=variant,
        consts=consts,
        policy=policy,
        t_end=v.get("run.t_end", base.t_end),
        cadence=v.get("run.cadence", base.cadence),
        out_dir=v.get("run.out_dir", base.out_dir),
        init=init,
        init_kind=init_kind,
        init_snapshot=init_snapshot,
        forcing_id=v.get("forcing.id", "none"),
        sweep=sweep,
        twin=twin,
        mms=mms,
    )
