"""Command-line entry points.

Subcommands: run, sweep-eta, sweep-eps, twin, mms, inspect.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from tcm.config import ConfigError, RunConfig, parse_config
from tcm.harness import SweepSpec, TwinSpec, mms_verify, sweep, twin_run
from tcm.model import TendencyError
from tcm.spectral import FieldError
from tcm.stepping import StepFailure
from tcm.storage import (
    SnapshotError,
    read_snapshot,
    snapshot_stats,
    write_diagnostics_csv,
    write_manifest,
    write_snapshot,
)

_DEFAULT_SWEEP_VALUES = (1e-2, 5e-3, 2.5e-3, 1.25e-3)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="tcm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None,
                       help="path to a key = value configuration file")
        p.add_argument("--out", type=str, default=None,
                       help="output directory (overrides run.out_dir)")
        p.add_argument("--seed", type=int, default=None,
                       help="override init.seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker-thread cap (overrides env TCM_THREADS); "
                            "results never depend on it")

    for name, help_text in (
        ("run", "integrate a single trajectory"),
        ("sweep-eta", "humidity-viscosity limit sweep"),
        ("sweep-eps", "mollifier limit sweep"),
        ("twin", "twin-run divergence experiment"),
        ("mms", "manufactured-solution verification"),
    ):
        common(sub.add_parser(name, help=help_text))

    insp = sub.add_parser("inspect", help="print snapshot header and field stats")
    insp.add_argument("path", type=str)
    return parser


def _load_config(args) -> tuple[RunConfig, str]:
    text = ""
    if args.config is not None:
        text = Path(args.config).read_text()
    cfg = parse_config(text)
    if args.seed is not None:
        cfg = replace(cfg, init=replace(cfg.init, seed=args.seed))
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        os.environ["TCM_THREADS"] = str(args.threads)
    return cfg, text


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_trajectory(out: Path, cfg: RunConfig, traj, config_text: str,
                      status: str = "ok") -> dict:
    snaps = []
    for i, (t, state) in enumerate(traj.snapshots):
        name = f"snap_{i:05d}.tcm"
        write_snapshot(out / name, state, t, cfg.variant)
        snaps.append({"index": i, "time": t, "path": name})
    write_diagnostics_csv(out / "diagnostics.csv", traj.records)
    manifest = {
        "status": status,
        "config": config_text,
        "variant": cfg.variant.tag,
        "eps": cfg.variant.eps,
        "eta": cfg.variant.eta,
        "alpha": cfg.variant.alpha,
        "n": cfg.grid_n,
        "length": cfg.grid_length,
        "t_end": cfg.t_end,
        "steps": traj.step_count,
        "snapshots": snaps,
        "diagnostics_csv": "diagnostics.csv",
    }
    write_manifest(out / "run_manifest.json", manifest)
    return manifest


def _cmd_run(args) -> int:
    cfg, text = _load_config(args)
    out = _out_dir(cfg)
    base = cfg.base_run()
    initial = cfg.initial_state()
    try:
        traj = base.execute(initial)
    except StepFailure as failure:
        write_snapshot(out / "last_good.tcm", failure.last_state,
                       failure.time, cfg.variant)
        write_diagnostics_csv(out / "diagnostics.csv",
                              failure.trajectory.records)
        write_manifest(out / "run_manifest.json", {
            "status": "failed",
            "config": text,
            "failed_step": failure.step_index,
            "failed_time": failure.time,
            "last_good_snapshot": "last_good.tcm",
        })
        print(f"tcm run: {failure}", file=sys.stderr)
        return 2
    _write_trajectory(out, cfg, traj, text)
    print(f"run complete: {traj.step_count} steps, outputs in {out}")
    return 0


def _cmd_sweep(args, parameter: str) -> int:
    cfg, text = _load_config(args)
    out = _out_dir(cfg)
    values = cfg.sweep.values or _DEFAULT_SWEEP_VALUES
    base = cfg.base_run()
    if parameter == "eta" and base.variant.tag != "p_eps_eta":
        from tcm.model import SystemVariant
        base = replace(base, variant=SystemVariant.p_eps_eta(
            cfg.variant.eps if cfg.variant.tag != "limit" else 1e-2, values[0]))
    times = cfg.sweep.times or (cfg.t_end,)
    spec = SweepSpec(parameter, tuple(values), base, cfg.sweep.norm,
                     tuple(times), cfg.sweep.compare_field)
    result = sweep(spec)

    members = []
    for value, traj in result.trajectories:
        sub = out / f"{parameter}_{value:.6e}"
        sub.mkdir(parents=True, exist_ok=True)
        member_cfg = replace(cfg, out_dir=str(sub),
                             variant=replace(base.variant, **{parameter: value}))
        _write_trajectory(sub, member_cfg, traj, text)
        members.append({"value": value, "dir": sub.name})

    manifest = {
        "parameter": parameter,
        "values": list(values),
        "norm": cfg.sweep.norm,
        "comparison_times": list(times),
        "compare_field": cfg.sweep.compare_field,
        "members": members,
        "differences": [
            {"coarse": r.value_coarse, "fine": r.value_fine, "time": r.time,
             "difference": r.difference, "bitwise_equal": r.bitwise_equal}
            for r in result.rows
        ],
        "rates": result.rates,
        "failed_value": result.failed_value,
        "all_zero": result.all_zero,
    }
    write_manifest(out / "sweep_manifest.json", manifest)

    print(f"{parameter}-sweep over {list(values)}")
    for r in result.rows:
        flag = " (bitwise equal)" if r.bitwise_equal else ""
        print(f"  d({r.value_coarse:.3e} vs {r.value_fine:.3e}) at t={r.time:g}: "
              f"{r.difference:.6e}{flag}")
    if result.rates:
        print("  empirical rates:", ", ".join(f"{x:.3f}" for x in result.rates))
    if result.failed_value is not None:
        print(f"tcm sweep: member {result.failed_value} failed; partial table "
              f"written", file=sys.stderr)
        return 2
    return 0


def _cmd_twin(args) -> int:
    cfg, text = _load_config(args)
    out = _out_dir(cfg)
    base = replace(cfg.base_run(),
                   init=replace(cfg.init, regime=cfg.twin.regime))
    spec = TwinSpec(base, cfg.twin.regime, cfg.twin.perturb_field,
                    cfg.twin.delta)
    report = twin_run(spec)
    payload = {
        "ran": report.ran,
        "delta0": report.delta0,
        "bitwise_identical": report.bitwise_identical,
        "kappa_ls": report.kappa_ls,
        "kappa_env": report.kappa_env,
        "bounded_by_envelope": report.bounded_by_envelope,
        "super_exponential_jumps": report.super_exponential_jumps,
        "hypothesis_breakdown": report.hypothesis_breakdown,
        "breakdown_time": report.breakdown_time,
        "config": text,
    }
    write_manifest(out / "twin_report.json", payload)
    with open(out / "divergence.csv", "w") as fh:
        fh.write("time,delta\n")
        for t, d in zip(report.times, report.deltas):
            fh.write(f"{t!r},{d!r}\n")
    if not report.ran:
        print("twin run: hypothesis breakdown at t = 0 (initial regimes "
              "violate the sign condition)")
    else:
        print(f"twin run: delta0 = {report.delta0:.3e}, "
              f"final delta = {report.deltas[-1]:.3e}, "
              f"kappa = {report.kappa_ls:.3f}, "
              f"breakdown = {report.hypothesis_breakdown}")
    return 0


def _cmd_mms(args) -> int:
    cfg, text = _load_config(args)
    out = _out_dir(cfg)
    result = mms_verify(
        cfg.mms.family, cfg.mms.resolutions, cfg.mms.dts, cfg.consts,
        cfg.variant, scheme=cfg.policy.scheme, t_end=cfg.mms.t_end,
    )
    payload = {
        "family": result.family,
        "scheme": result.scheme,
        "spatial": [{"n": n, "error": e} for n, e in result.spatial_rows],
        "temporal": [{"dt": d, "error": e} for d, e in result.temporal_rows],
        "temporal_order": result.temporal_order,
        "config": text,
    }
    write_manifest(out / "mms_table.json", payload)
    print(f"mms family {result.family} ({result.scheme})")
    for n, e in result.spatial_rows:
        print(f"  n = {n:4d}: error = {e:.6e}")
    for d, e in result.temporal_rows:
        print(f"  dt = {d:.3e}: error = {e:.6e}")
    if result.temporal_rows:
        print(f"  fitted temporal order: {result.temporal_order:.3f}")
    return 0


def _cmd_inspect(args) -> int:
    state, meta = read_snapshot(args.path)
    g = state.grid
    print(f"snapshot {args.path}")
    print(f"  n = {g.n}, length = {g.length!r}, time = {meta['time']!r}")
    print(f"  variant = {meta['variant_tag']} "
          f"(eps = {meta['eps']:g}, eta = {meta['eta']:g}, "
          f"alpha = {meta['alpha']:g})")
    for st in snapshot_stats(state):
        print(f"  {st.name:3s}: min = {st.minimum: .6e}  max = {st.maximum: .6e}  "
              f"mean = {st.mean: .6e}  l2 = {st.l2:.6e}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep-eta":
            return _cmd_sweep(args, "eta")
        if args.command == "sweep-eps":
            return _cmd_sweep(args, "eps")
        if args.command == "twin":
            return _cmd_twin(args)
        if args.command == "mms":
            return _cmd_mms(args)
        if args.command == "inspect":
            return _cmd_inspect(args)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, SnapshotError, FieldError, TendencyError, OSError,
            ValueError) as exc:
        print(f"tcm {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
