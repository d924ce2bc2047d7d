"""Tests for sweeps, twin runs and manufactured-solution verification."""

import numpy as np
import pytest

from tcm.harness import (
    BaseRun,
    InitialDataSpec,
    MmsProblem,
    SweepSpec,
    TwinSpec,
    make_initial_state,
    mms_error,
    mms_problem,
    mms_verify,
    sweep,
    twin_run,
)
from tcm.model import State, SystemVariant, tendencies
from tcm.spectral import Grid
from tcm.stepping import StepPolicy
from tcm.thermo import PhysConsts

STRONG_PRECIP = dict(L=1.0, R=1.0, c_p=1.0, R_nu=0.5)


def base_run(grid_n=32, variant=None, consts=None, dt=5e-3, t_end=0.2,
             cadence=0.2, **init_kwargs):
    return BaseRun(
        grid=Grid(grid_n),
        variant=variant or SystemVariant.p_eps(1e-2),
        consts=consts or PhysConsts(),
        policy=StepPolicy(dt=dt),
        t_end=t_end,
        cadence=cadence,
        init=InitialDataSpec(**init_kwargs),
    )


class TestInitialData:
    def test_regimes(self):
        g = Grid(32)
        c = PhysConsts()
        sub = make_initial_state(g, InitialDataSpec(seed=1, regime="subsaturated",
                                                    q_margin=0.1), c)
        assert np.max(sub.q) <= c.q_s - 0.1 + 1e-12
        sup = make_initial_state(g, InitialDataSpec(seed=1, regime="supersaturated",
                                                    q_margin=0.1), c)
        assert np.min(sup.q) >= c.q_s + 0.1 - 1e-12
        mix = make_initial_state(g, InitialDataSpec(seed=1, regime="mixed"), c)
        assert np.min(mix.q) < c.q_s < np.max(mix.q)

    def test_deterministic(self):
        g = Grid(32)
        c = PhysConsts()
        a = make_initial_state(g, InitialDataSpec(seed=7), c)
        b = make_initial_state(g, InitialDataSpec(seed=7), c)
        for fa, fb in zip(a.fields(), b.fields()):
            assert np.array_equal(fa, fb)
        other = make_initial_state(g, InitialDataSpec(seed=8), c)
        assert a.diff_l2(other) > 0

    def test_divergence_free_u(self):
        g = Grid(32)
        c = PhysConsts()
        s = make_initial_state(g, InitialDataSpec(seed=2), c)
        assert np.max(np.abs(g.divergence(s.u1, s.u2))) < 1e-10

    def test_kband_validation(self):
        with pytest.raises(ValueError, match="cutoff"):
            make_initial_state(Grid(8), InitialDataSpec(kband=5), PhysConsts())
        with pytest.raises(ValueError, match="regime"):
            InitialDataSpec(regime="damp")


class TestSweep:
    def test_spec_validation(self):
        base = base_run()
        with pytest.raises(ValueError, match="decreasing"):
            SweepSpec("eps", (1e-3, 1e-2), base)
        with pytest.raises(ValueError, match="p_eps_eta"):
            SweepSpec("eta", (1e-2, 1e-3), base)
        with pytest.raises(ValueError, match="mollified"):
            SweepSpec("eps", (1e-2, 1e-3),
                      base_run(variant=SystemVariant.limit()))

    def test_single_member_empty_table(self):
        base = base_run(regime="subsaturated")
        res = sweep(SweepSpec("eps", (1e-2,), base))
        assert res.rows == []
        assert res.rates == []

    def test_eps_degenerate_sweep_bitwise_zero(self):
        # subsaturated data never enters any mollifier band: trajectories
        # are bitwise identical for every eps
        base = base_run(regime="subsaturated", q_margin=0.2)
        res = sweep(SweepSpec("eps", (1e-2, 5e-3, 2.5e-3), base, "l2", (0.2,)))
        assert res.all_zero
        assert all(r.difference == 0.0 for r in res.rows)

    def test_eta_sweep_cauchy(self):
        base = base_run(variant=SystemVariant.p_eps_eta(1e-2, 1e-2),
                        regime="subsaturated")
        res = sweep(SweepSpec("eta", (1e-2, 5e-3, 2.5e-3), base, "l2", (0.2,),
                              compare_field="q"))
        ds = [r.difference for r in res.rows]
        assert len(ds) == 2
        assert ds[0] > ds[1] > 0.0

    def test_reproducible(self):
        base = base_run(regime="mixed", consts=PhysConsts(**STRONG_PRECIP))
        spec = SweepSpec("eps", (1e-2, 5e-3), base, "l2", (0.2,))
        a = sweep(spec)
        b = sweep(spec)
        assert [r.difference for r in a.rows] == [r.difference for r in b.rows]

    def test_comparison_norms(self):
        base = base_run(variant=SystemVariant.p_eps_eta(1e-2, 1e-2),
                        regime="subsaturated")
        for norm in ("l2", "h1", "linf"):
            res = sweep(SweepSpec("eta", (1e-2, 5e-3), base, norm, (0.2,)))
            assert res.rows[0].difference > 0.0


class TestTwinRun:
    def test_identical_twins_bitwise_zero(self):
        rep = twin_run(TwinSpec(base_run(regime="subsaturated"), "subsaturated"))
        assert rep.ran
        assert rep.bitwise_identical
        assert max(rep.deltas) == 0.0
        assert not rep.hypothesis_breakdown

    def test_perturbed_bounded_growth(self):
        rep = twin_run(TwinSpec(base_run(regime="subsaturated", t_end=0.3),
                                "subsaturated", "T", 1e-8))
        assert rep.ran
        assert rep.delta0 > 0.0
        assert np.isfinite(rep.kappa_ls)
        assert rep.bounded_by_envelope
        assert rep.super_exponential_jumps == []
        assert not rep.hypothesis_breakdown
        # subsaturated throughout: the omega fractions stay all-below
        assert all(fr[0] == 1.0 for fr in rep.omega_fractions)

    def test_opposite_regime_immediate_breakdown(self):
        base = base_run(regime="supersaturated")
        rep = twin_run(TwinSpec(base, "subsaturated"))
        assert not rep.ran
        assert rep.hypothesis_breakdown
        assert rep.breakdown_time == 0.0

    def test_spec_validation(self):
        with pytest.raises(ValueError, match="sign_regime"):
            TwinSpec(base_run(), "mixed")
        with pytest.raises(ValueError, match="unknown field"):
            TwinSpec(base_run(), "subsaturated", "w", 1e-8)


class TestMms:
    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError, match="non-smooth"):
            mms_problem("sawtooth", PhysConsts(), SystemVariant.p_eps(1e-2))

    def test_decaying_smooth_initially_consistent(self):
        # the discrete tendency on the exact state matches the analytic
        # time derivative (forcing closes the balance)
        c = PhysConsts()
        var = SystemVariant.p_eps(1e-2)
        prob = mms_problem("decaying_smooth", c, var)
        g = Grid(16)
        s0 = prob.exact_state(g, 0.0)
        td = tendencies(s0, var, c, t=0.0, forcing=prob.grid_forcing(g))
        X, Y = g.coords()
        want = {
            "u1": -np.sin(Y), "u2": -np.sin(X),
            "v1": -np.sin(Y), "v2": -np.sin(X),
            "T": -np.cos(X), "q": -(c.q_s / 2) * (1 + np.sin(X) / 10),
        }
        for name, w in want.items():
            assert np.max(np.abs(getattr(td, name) - w)) < 1e-11

    def test_decaying_smooth_small_error(self):
        c = PhysConsts()
        prob = mms_problem("decaying_smooth", c, SystemVariant.p_eps(1e-2))
        err = mms_error(prob, 16, 1e-3, 0.25, scheme="if_rk3")
        assert err < 1e-10

    @pytest.mark.parametrize("scheme,order", [("if_rk2", 2), ("if_rk3", 3)])
    def test_temporal_order(self, scheme, order):
        res = mms_verify("decaying_smooth", [], [4e-3, 2e-3, 1e-3],
                         PhysConsts(), SystemVariant.p_eps(1e-2),
                         scheme=scheme, t_end=0.4, temporal_n=16)
        assert res.temporal_order >= order - 0.2
        errs = [e for _, e in res.temporal_rows]
        assert errs[0] > errs[1] > errs[2]

    def test_saturated_family_order_rk2(self):
        c = PhysConsts(**STRONG_PRECIP)
        res = mms_verify("saturated_updraft", [], [4e-3, 2e-3, 1e-3],
                         c, SystemVariant.p_eps(0.05), scheme="if_rk2",
                         t_end=0.4, temporal_n=32)
        assert res.temporal_order >= 2 - 0.3

    def test_saturated_family_guards(self):
        c = PhysConsts(**STRONG_PRECIP)
        with pytest.raises(ValueError, match="margin"):
            mms_problem("saturated_updraft", c, SystemVariant.p_eps(0.5))
        with pytest.raises(ValueError, match="xi0"):
            mms_problem("saturated_updraft", PhysConsts(L=1.0, R=1.0, c_p=10.0,
                                                        R_nu=1.0),
                        SystemVariant.p_eps(0.05))

    def test_spatial_spectral_convergence(self):
        res = mms_verify("steep_smooth", [8, 16, 32], [], PhysConsts(),
                         SystemVariant.p_eps(1e-2), scheme="if_rk3",
                         t_end=0.2, spatial_dt=1e-3)
        errs = [e for _, e in res.spatial_rows]
        assert errs[0] / errs[1] > 10.0
        assert errs[1] / errs[2] > 10.0
