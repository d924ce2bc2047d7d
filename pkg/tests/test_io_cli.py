"""Tests for config parsing, snapshot/CSV storage and the CLI."""

import json
from pathlib import Path

import numpy as np
import pytest

from tcm.cli import main
from tcm.config import ConfigError, parse_config
from tcm.model import State, SystemVariant
from tcm.spectral import Grid
from tcm.stepping import StepPolicy, run
from tcm.storage import (
    CSV_COLUMNS,
    SnapshotError,
    read_diagnostics_csv,
    read_snapshot,
    snapshot_variant,
    write_diagnostics_csv,
    write_snapshot,
)
from tcm.thermo import PhysConsts

from helpers import random_state

SAMPLE_CONFIG = (Path(__file__).parent.parent / "docs" / "sample-run.cfg").read_text()


class TestParseConfig:
    def test_empty_config_gives_documented_defaults(self):
        cfg = parse_config("")
        assert cfg.grid_n == 128
        assert cfg.grid_length == pytest.approx(2 * np.pi)
        assert cfg.variant == SystemVariant.p_eps(1e-2)
        assert cfg.t_end == 1.0
        assert cfg.policy.scheme == "if_rk2"
        assert cfg.init.regime == "subsaturated"

    def test_golden_sample(self):
        # the shipped docs/sample-run.cfg parses to the documented values
        cfg = parse_config(SAMPLE_CONFIG)
        assert cfg.grid_n == 64
        assert cfg.variant == SystemVariant.p_eps_eta(2e-2, 5e-4)
        assert cfg.consts.Qbar == 1.1
        assert cfg.consts.q_s == 0.05
        assert cfg.policy.dt == 0.005
        assert cfg.policy.cfl_target == pytest.approx(0.4)
        assert cfg.policy.scheme == "if_rk3"
        assert cfg.t_end == 0.5
        assert cfg.cadence == 0.25
        assert cfg.out_dir == "out/sample"
        assert cfg.init.seed == 11
        assert cfg.init.regime == "supersaturated"
        assert cfg.init.kband == 4
        assert cfg.init.amp_T == 0.4
        assert cfg.init.q_margin == 0.2

    def test_unknown_key_with_line_number(self):
        with pytest.raises(ConfigError, match=r"line 2: unknown key 'grid\.m'"):
            parse_config("grid.n = 32\ngrid.m = 7\n")

    def test_range_error_names_key_and_line(self):
        with pytest.raises(ConfigError, match=r"line 1: key 'variant.eta'"):
            parse_config("variant.eta = -1\n")
        with pytest.raises(ConfigError, match=r"key 'consts.q_s'"):
            parse_config("consts.q_s = 2.0\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("this is not a key value pair\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("grid.n = 32\ngrid.n = 64\n")

    def test_odd_grid_rejected(self):
        with pytest.raises(ConfigError, match="even"):
            parse_config("grid.n = 33\n")

    def test_snapshot_init_requires_path(self):
        with pytest.raises(ConfigError, match="init.snapshot"):
            parse_config("init.kind = snapshot\n")

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config("\n# comment only\n  \ngrid.n = 16 # trailing\n")
        assert cfg.grid_n == 16


class TestSnapshots:
    def test_round_trip_bitwise(self, tmp_path):
        g = Grid(16)
        c = PhysConsts()
        s = random_state(g, 0, c)
        var = SystemVariant.p_eps_eta(1e-2, 1e-3)
        path = tmp_path / "state.tcm"
        write_snapshot(path, s, 0.75, var)
        back, meta = read_snapshot(path)
        for fa, fb in zip(s.fields(), back.fields()):
            assert np.array_equal(fa, fb)
        assert meta["time"] == 0.75
        assert snapshot_variant(meta) == var

    def test_variant_tags_round_trip(self, tmp_path):
        g = Grid(8)
        s = State.zeros(g)
        for var in (SystemVariant.p_eps_eta(1e-2, 1e-4),
                    SystemVariant.p_eps(3e-3),
                    SystemVariant.limit(0.25)):
            path = tmp_path / f"{var.tag}.tcm"
            write_snapshot(path, s, 0.0, var)
            _, meta = read_snapshot(path)
            assert snapshot_variant(meta) == var

    def test_truncated_rejected(self, tmp_path):
        g = Grid(8)
        path = tmp_path / "trunc.tcm"
        write_snapshot(path, State.zeros(g), 0.0, SystemVariant.p_eps(1e-2))
        blob = path.read_bytes()
        path.write_bytes(blob[:-17])
        with pytest.raises(SnapshotError, match="payload"):
            read_snapshot(path)

    def test_bad_magic_rejected(self, tmp_path):
        g = Grid(8)
        path = tmp_path / "magic.tcm"
        write_snapshot(path, State.zeros(g), 0.0, SystemVariant.p_eps(1e-2))
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(SnapshotError, match="magic"):
            read_snapshot(path)

    def test_version_bump_rejected(self, tmp_path):
        g = Grid(8)
        path = tmp_path / "ver.tcm"
        write_snapshot(path, State.zeros(g), 0.0, SystemVariant.p_eps(1e-2))
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(SnapshotError, match="version"):
            read_snapshot(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SnapshotError, match="cannot read"):
            read_snapshot(tmp_path / "absent.tcm")


class TestDiagnosticsCsv:
    def test_round_trip_and_header(self, tmp_path):
        g = Grid(16)
        c = PhysConsts()
        s = random_state(g, 1, c, q_regime="sub", amp=0.2)
        traj = run(s, 0.1, SystemVariant.p_eps(1e-2), c, StepPolicy(dt=0.02))
        path = tmp_path / "diag.csv"
        write_diagnostics_csv(path, traj.records)
        header = path.read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        data = read_diagnostics_csv(path)
        assert len(data["time"]) == len(traj.records)
        # repr round trip preserves the doubles exactly
        assert data["E"][0] == traj.records[0].E
        assert data["energy_residual"][-1] == traj.records[-1].energy_residual

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,bogus\n0.0,1.0\n")
        with pytest.raises(IOError, match="header"):
            read_diagnostics_csv(path)


class TestCli:
    def test_usage_error_exit_1(self, capsys):
        assert main([]) == 1
        assert main(["frobnicate"]) == 1

    def test_inspect_missing_path_exit_2(self, tmp_path, capsys):
        assert main(["inspect", str(tmp_path / "nope.tcm")]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_run_smoke(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "grid.n = 16\nrun.t_end = 0.1\nrun.cadence = 0.05\n"
            "policy.dt = 0.02\ninit.regime = subsaturated\n"
        )
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert len(manifest["snapshots"]) == 3     # t = 0, 0.05, 0.1
        assert (out / "diagnostics.csv").exists()
        state, meta = read_snapshot(out / manifest["snapshots"][-1]["path"])
        assert meta["time"] == pytest.approx(0.1)

    def test_run_then_inspect(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("grid.n = 16\nrun.t_end = 0.05\nrun.cadence = 0.05\n"
                       "policy.dt = 0.025\n")
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        capsys.readouterr()
        assert main(["inspect", str(out / "snap_00001.tcm")]) == 0
        text = capsys.readouterr().out
        assert "variant = p_eps" in text
        assert "l2" in text

    def test_sweep_eps_degenerate_zero_table(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text(
            "grid.n = 16\nrun.t_end = 0.1\nrun.cadence = 0.1\n"
            "policy.dt = 0.02\ninit.regime = subsaturated\n"
            "init.q_margin = 0.2\nsweep.values = 1e-2,5e-3,2.5e-3\n"
        )
        out = tmp_path / "sweep_out"
        assert main(["sweep-eps", "--config", str(cfg), "--out", str(out)]) == 0
        manifest = json.loads((out / "sweep_manifest.json").read_text())
        assert manifest["all_zero"]
        assert all(d["difference"] == 0.0 for d in manifest["differences"])
        assert len(manifest["members"]) == 3
        member_dir = out / manifest["members"][0]["dir"]
        assert (member_dir / "diagnostics.csv").exists()

    def test_twin_smoke(self, tmp_path, capsys):
        cfg = tmp_path / "twin.cfg"
        cfg.write_text(
            "grid.n = 16\nrun.t_end = 0.1\npolicy.dt = 0.02\n"
            "twin.regime = subsaturated\ntwin.perturb_field = T\n"
            "twin.delta = 1e-8\n"
        )
        out = tmp_path / "twin_out"
        assert main(["twin", "--config", str(cfg), "--out", str(out)]) == 0
        report = json.loads((out / "twin_report.json").read_text())
        assert report["ran"]
        assert not report["hypothesis_breakdown"]
        assert (out / "divergence.csv").exists()

    def test_mms_smoke(self, tmp_path, capsys):
        cfg = tmp_path / "mms.cfg"
        cfg.write_text(
            "grid.n = 16\nmms.family = decaying_smooth\n"
            "mms.resolutions = 16\nmms.dts = 4e-3,2e-3\nmms.t_end = 0.1\n"
        )
        out = tmp_path / "mms_out"
        assert main(["mms", "--config", str(cfg), "--out", str(out)]) == 0
        table = json.loads((out / "mms_table.json").read_text())
        assert table["family"] == "decaying_smooth"
        assert len(table["temporal"]) == 2

    def test_config_error_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("variant.eta = -1\n")
        assert main(["run", "--config", str(cfg)]) == 2
        assert "variant.eta" in capsys.readouterr().err

    def test_snapshot_init_round_trip(self, tmp_path, capsys):
        # produce a snapshot, then start a new run from it
        cfg1 = tmp_path / "a.cfg"
        cfg1.write_text("grid.n = 16\nrun.t_end = 0.05\nrun.cadence = 0.05\n"
                        "policy.dt = 0.025\n")
        out1 = tmp_path / "a"
        assert main(["run", "--config", str(cfg1), "--out", str(out1)]) == 0
        snap = out1 / "snap_00001.tcm"
        cfg2 = tmp_path / "b.cfg"
        cfg2.write_text(
            f"grid.n = 16\nrun.t_end = 0.05\nrun.cadence = 0.05\n"
            f"policy.dt = 0.025\ninit.kind = snapshot\n"
            f"init.snapshot = {snap}\n"
        )
        out2 = tmp_path / "b"
        assert main(["run", "--config", str(cfg2), "--out", str(out2)]) == 0
