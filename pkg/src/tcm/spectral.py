"""Periodic-domain fields and FFT-based spatial operators.

All fields live on a uniform n x n grid over the square [0, L) x [0, L)
with periodic boundaries. Arrays are float64, C-ordered, indexed
``f[i, j] = f(x_i, y_j)`` (axis 0 is x, axis 1 is y).

Transform convention: ``numpy.fft.rfft2`` (unnormalized forward, the
inverse divides by n^2), so conjugate symmetry is held by construction.
Odd-order derivatives zero the Nyquist mode; the Laplacian keeps it.

Norms are grid-weighted discrete integrals, ``||f||_2^2 = dx^2 * sum(f^2)``,
accumulated with numpy's pairwise summation over the C-ordered array. The
reduction order is a pure function of the array shape, so results do not
depend on any worker/thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class FieldError(ValueError):
    """Raised when a field violates a precondition (non-finite, wrong grid)."""


def ensure_finite(name: str, values: np.ndarray) -> None:
    """Reject NaN/Inf, reporting the first offending grid location."""
    bad = ~np.isfinite(values)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise FieldError(
            f"{name} is not finite at grid point ({i}, {j}): {values[i, j]!r}"
        )


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic square grid with precomputed spectral machinery.

    Parameters
    ----------
    n : int
        Points per dimension; must be even and >= 8.
    length : float
        Physical side length L of the domain (default 2*pi).
    """

    n: int
    length: float = 2.0 * np.pi

    # filled in __post_init__
    dx: float = field(init=False, repr=False)
    kx: np.ndarray = field(init=False, repr=False)
    ky: np.ndarray = field(init=False, repr=False)
    k2: np.ndarray = field(init=False, repr=False)
    ikx: np.ndarray = field(init=False, repr=False)
    iky: np.ndarray = field(init=False, repr=False)
    k2_safe: np.ndarray = field(init=False, repr=False)
    k2_deriv: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n < 8:
            raise ValueError(f"grid needs n >= 8, got n={self.n}")
        if self.n % 2 != 0:
            raise ValueError(f"grid needs even n, got n={self.n}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"grid length must be positive, got {self.length}")

        n = self.n
        dx = self.length / n
        object.__setattr__(self, "dx", dx)

        kx1 = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)        # full axis (x)
        ky1 = 2.0 * np.pi * np.fft.rfftfreq(n, d=dx)       # halved axis (y)
        kx = kx1[:, None]
        ky = ky1[None, :]
        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "ky", ky)
        object.__setattr__(self, "k2", kx**2 + ky**2)

        # Odd-order derivatives drop the sign-ambiguous Nyquist mode.
        kx_d = kx1.copy()
        kx_d[n // 2] = 0.0
        ky_d = ky1.copy()
        ky_d[-1] = 0.0
        object.__setattr__(self, "ikx", 1j * kx_d[:, None])
        object.__setattr__(self, "iky", 1j * ky_d[None, :])

        # Projection must invert the same (Nyquist-zeroed) derivative
        # wavenumbers the divergence uses, or it is not idempotent.
        k2_deriv = kx_d[:, None] ** 2 + ky_d[None, :] ** 2
        k2_safe = np.where(k2_deriv == 0.0, 1.0, k2_deriv)
        object.__setattr__(self, "k2_safe", k2_safe)
        object.__setattr__(self, "k2_deriv", k2_deriv)

        # 2/3 rule on integer mode indices: keep max(|ix|,|iy|) <= cutoff.
        cutoff = (2 * (n // 2)) // 3
        ix = np.abs(np.fft.fftfreq(n, d=1.0 / n)).astype(int)[:, None]
        iy = np.arange(n // 2 + 1)[None, :]
        mask = (ix <= cutoff) & (iy <= cutoff)
        object.__setattr__(self, "dealias_mask", mask)

    # -- transforms ---------------------------------------------------------

    def forward(self, f: np.ndarray) -> np.ndarray:
        """Real field -> complex rfft2 coefficients."""
        f = np.asarray(f, dtype=np.float64)
        self._check_shape(f)
        ensure_finite("forward input", f)
        return np.fft.rfft2(f)

    def inverse(self, fh: np.ndarray) -> np.ndarray:
        """Complex rfft2 coefficients -> real field."""
        if fh.shape != (self.n, self.n // 2 + 1):
            raise FieldError(
                f"spectral shape {fh.shape} does not match grid {self.spectral_shape}"
            )
        return np.fft.irfft2(fh, s=(self.n, self.n))

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.n, self.n // 2 + 1)

    def _check_shape(self, f: np.ndarray) -> None:
        if f.shape != (self.n, self.n):
            raise FieldError(
                f"field shape {f.shape} does not match grid ({self.n}, {self.n})"
            )

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Full (X, Y) coordinate arrays, shape (n, n)."""
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    # -- differential operators ---------------------------------------------

    def gradient(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        fh = self.forward(f)
        return self.inverse(self.ikx * fh), self.inverse(self.iky * fh)

    def divergence(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        f1h = self.forward(f1)
        f2h = self.forward(f2)
        return self.inverse(self.ikx * f1h + self.iky * f2h)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.inverse(-self.k2 * self.forward(f))

    def leray_project(
        self, f1: np.ndarray, f2: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Remove the gradient part: P(f) = f - grad(div^-1 f).

        The mean (DC) mode passes through unchanged; output equals the input
        for divergence-free fields and the projection is idempotent.
        """
        f1h = self.forward(f1)
        f2h = self.forward(f2)
        div_h = self.ikx * f1h + self.iky * f2h
        # solve Lap(phi) = div f, then subtract grad(phi)
        phi_h = -div_h / self.k2_safe
        phi_h[0, 0] = 0.0
        return (
            self.inverse(f1h - self.ikx * phi_h),
            self.inverse(f2h - self.iky * phi_h),
        )

    def dealias_spectral(self, fh: np.ndarray) -> np.ndarray:
        return fh * self.dealias_mask

    def dealias(self, f: np.ndarray) -> np.ndarray:
        """Zero every mode with max(|ix|, |iy|) above 2/3 of n/2."""
        return self.inverse(self.dealias_spectral(self.forward(f)))

    # -- reductions ----------------------------------------------------------

    def integral(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.dx**2)

    def l2(self, *fields: np.ndarray) -> float:
        """Grid-weighted L2 norm of one field or a tuple treated as a vector."""
        total = 0.0
        for f in fields:
            total += float(np.sum(np.square(f)))
        return float(np.sqrt(total * self.dx**2))

    def l2sq(self, *fields: np.ndarray) -> float:
        total = 0.0
        for f in fields:
            total += float(np.sum(np.square(f)))
        return total * self.dx**2

    def linf(self, *fields: np.ndarray) -> float:
        return max(float(np.max(np.abs(f))) for f in fields)

    def grad_l2sq(self, f: np.ndarray) -> float:
        gx, gy = self.gradient(f)
        return self.l2sq(gx, gy)

    def h1(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.l2sq(f) + self.grad_l2sq(f)))

    def spectral_l2(self, fh: np.ndarray) -> float:
        """L2 norm computed from rfft2 coefficients (Parseval)."""
        w = np.full(self.spectral_shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        total = float(np.sum(w * (fh.real**2 + fh.imag**2)))
        return float(np.sqrt(total * self.dx**2 / self.n**2))
