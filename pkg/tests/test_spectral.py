"""Tests for the periodic grid and FFT-based operators."""

import numpy as np
import pytest

from tcm.spectral import FieldError, Grid

from helpers import fd4_x, fd4_y, random_band_limited


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError, match="n >= 8"):
            Grid(4)
        with pytest.raises(ValueError, match="even"):
            Grid(9)
        with pytest.raises(ValueError, match="positive"):
            Grid(16, length=-1.0)

    def test_wavenumber_antisymmetry(self):
        # full-axis wavenumbers are antisymmetric under index negation
        # except the Nyquist mode
        g = Grid(16)
        kx = g.kx[:, 0]
        for i in range(1, g.n // 2):
            assert kx[i] == -kx[-i]
        assert kx[g.n // 2] != 0.0          # Nyquist present in k2
        assert g.ikx[g.n // 2, 0] == 0.0    # but zeroed for derivatives

    def test_dx(self):
        g = Grid(32, length=4.0)
        assert g.dx == pytest.approx(0.125)


class TestTransforms:
    def test_constant_field_dc_only(self):
        g = Grid(16)
        fh = g.forward(np.full((16, 16), 3.5))
        assert fh[0, 0] == pytest.approx(3.5 * 16**2)
        fh[0, 0] = 0.0
        assert np.max(np.abs(fh)) < 1e-12

    def test_single_harmonic_two_modes(self):
        g = Grid(32)
        X, _ = g.coords()
        fh = g.forward(np.sin(2 * np.pi * X / g.length))
        mag = np.abs(fh)
        # sin(x) on the full x-axis: modes (+-1, 0); rfft2 keeps both
        hot = mag > 1e-9 * mag.max()
        assert hot.sum() == 2
        assert hot[1, 0] and hot[-1, 0]

    @pytest.mark.parametrize("n", [8, 16, 32, 64, 128, 256])
    def test_round_trip(self, n):
        g = Grid(n)
        rng = np.random.default_rng(n)
        f = rng.standard_normal((n, n))
        back = g.inverse(g.forward(f))
        assert np.max(np.abs(back - f)) <= 1e-12 * np.max(np.abs(f))

    def test_non_finite_rejected_with_location(self):
        g = Grid(8)
        f = np.zeros((8, 8))
        f[3, 5] = np.nan
        with pytest.raises(FieldError, match=r"\(3, 5\)"):
            g.forward(f)

    def test_shape_mismatch_rejected(self):
        g = Grid(8)
        with pytest.raises(FieldError, match="shape"):
            g.forward(np.zeros((8, 16)))


class TestDerivatives:
    def test_gradient_single_harmonic(self):
        g = Grid(64, length=3.0)
        X, _ = g.coords()
        k = 2 * np.pi / g.length
        gx, gy = g.gradient(np.sin(k * X))
        assert np.max(np.abs(gx - k * np.cos(k * X))) < 1e-12 * k
        assert np.max(np.abs(gy)) < 1e-13

    def test_gradient_constant(self):
        g = Grid(16)
        gx, gy = g.gradient(np.ones((16, 16)))
        assert np.max(np.abs(gx)) == 0.0
        assert np.max(np.abs(gy)) == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradient_matches_fd4(self, seed):
        # FD oracle converges at O(dx^4); the spectral result is exact,
        # so the discrepancy must shrink 16x per refinement.
        errs = []
        for n in (32, 64):
            g = Grid(n)
            f = random_band_limited(g, seed)
            gx, gy = g.gradient(f)
            errs.append(
                max(
                    np.max(np.abs(gx - fd4_x(f, g.dx))),
                    np.max(np.abs(gy - fd4_y(f, g.dx))),
                )
            )
        assert errs[0] / errs[1] > 12.0

    def test_divergence_single_harmonic(self):
        g = Grid(64)
        X, _ = g.coords()
        k = 2 * np.pi / g.length
        d = g.divergence(np.sin(k * X), np.zeros_like(X))
        assert np.max(np.abs(d - k * np.cos(k * X))) < 1e-12

    def test_divergence_stream_function_zero(self):
        g = Grid(64)
        psi = random_band_limited(g, 7)
        px, py = g.gradient(psi)
        d = g.divergence(-py, px)
        assert np.max(np.abs(d)) < 1e-11

    @pytest.mark.parametrize("seed", [3, 4])
    def test_divergence_matches_fd4(self, seed):
        errs = []
        for n in (32, 64):
            g = Grid(n)
            f1 = random_band_limited(g, seed)
            f2 = random_band_limited(g, seed + 100)
            d = g.divergence(f1, f2)
            errs.append(np.max(np.abs(d - fd4_x(f1, g.dx) - fd4_y(f2, g.dx))))
        assert errs[0] / errs[1] > 12.0

    def test_laplacian_constant_and_harmonic(self):
        g = Grid(64)
        X, _ = g.coords()
        k = 2 * np.pi / g.length
        assert np.max(np.abs(g.laplacian(np.ones((64, 64))))) == 0.0
        lap = g.laplacian(np.sin(k * X))
        assert np.max(np.abs(lap + k**2 * np.sin(k * X))) < 1e-11

    def test_laplacian_matches_fd_refinement(self):
        errs = []
        for n in (32, 64):
            g = Grid(n)
            f = random_band_limited(g, 11)
            fd = fd4_x(fd4_x(f, g.dx), g.dx) + fd4_y(fd4_y(f, g.dx), g.dx)
            errs.append(np.max(np.abs(g.laplacian(f) - fd)))
        assert errs[0] / errs[1] > 12.0

    def test_div_grad_equals_laplacian(self):
        g = Grid(64)
        f = random_band_limited(g, 5, kmax=g.n // 3)
        assert np.max(np.abs(g.divergence(*g.gradient(f)) - g.laplacian(f))) < 1e-11


class TestLerayProjection:
    def test_kills_pure_gradient(self):
        g = Grid(64)
        X, _ = g.coords()
        phi = np.sin(2 * np.pi * X / g.length)
        p1, p2 = g.leray_project(*g.gradient(phi))
        assert np.max(np.abs(p1)) < 1e-11
        assert np.max(np.abs(p2)) < 1e-11

    def test_preserves_divergence_free(self):
        g = Grid(64)
        psi = random_band_limited(g, 9)
        px, py = g.gradient(psi)
        w1, w2 = -py, px
        q1, q2 = g.leray_project(w1, w2)
        assert np.max(np.abs(q1 - w1)) < 1e-12
        assert np.max(np.abs(q2 - w2)) < 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_idempotent_and_divergence_free(self, seed):
        g = Grid(64)
        rng = np.random.default_rng(seed)
        f1 = rng.standard_normal((64, 64))
        f2 = rng.standard_normal((64, 64))
        a1, a2 = g.leray_project(f1, f2)
        b1, b2 = g.leray_project(a1, a2)
        assert np.max(np.abs(b1 - a1)) < 1e-12
        assert np.max(np.abs(b2 - a2)) < 1e-12
        assert np.max(np.abs(g.divergence(a1, a2))) < 1e-11


class TestDealias:
    def test_band_limited_unchanged(self):
        g = Grid(32)
        cutoff = (2 * (g.n // 2)) // 3
        f = random_band_limited(g, 13, kmax=cutoff)
        assert np.max(np.abs(g.dealias(f) - f)) < 1e-13

    def test_high_mode_zeroed(self):
        g = Grid(32)
        X, _ = g.coords()
        k_hi = ((2 * (g.n // 2)) // 3) + 1
        f = np.sin(k_hi * 2 * np.pi * X / g.length)
        assert np.max(np.abs(g.dealias(f))) < 1e-13

    def test_quadratic_product_exact(self):
        # product of two resolved harmonics whose sum mode stays below the
        # cutoff: dealiased product equals the analytic product
        g = Grid(32)
        X, _ = g.coords()
        k = 2 * np.pi / g.length
        f1 = np.sin(3 * k * X)
        f2 = np.sin(4 * k * X)
        exact = 0.5 * (np.cos(k * X) - np.cos(7 * k * X))
        assert np.max(np.abs(g.dealias(f1 * f2) - exact)) <= 1e-12


class TestNorms:
    @pytest.mark.parametrize("n", [16, 64, 128])
    def test_parseval(self, n):
        g = Grid(n)
        rng = np.random.default_rng(n + 1)
        f = rng.standard_normal((n, n))
        phys = g.l2(f)
        spec = g.spectral_l2(g.forward(f))
        assert abs(phys - spec) <= 1e-12 * phys

    def test_sin_l2(self):
        # ||sin||_2^2 over [0, 2pi)^2 = 2 pi^2
        g = Grid(64)
        X, _ = g.coords()
        assert g.l2sq(np.sin(X)) == pytest.approx(2 * np.pi**2, rel=1e-13)

    def test_grad_norm_parseval_consistency(self):
        g = Grid(64)
        f = random_band_limited(g, 21)
        gx, gy = g.gradient(f)
        phys = np.sqrt(g.l2sq(gx, gy))
        spec = np.sqrt(
            g.spectral_l2(g.forward(gx)) ** 2 + g.spectral_l2(g.forward(gy)) ** 2
        )
        assert abs(phys - spec) <= 1e-11 * max(phys, 1.0)
