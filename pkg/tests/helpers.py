"""Shared fixtures-in-spirit: seeded field and state generators, FD oracles."""

import numpy as np

from tcm.model import State


def random_band_limited(grid, seed, kmax=4, amp=1.0):
    """Seeded random field supported on modes with max(|ix|,|iy|) <= kmax."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((grid.n, grid.n))
    fh = grid.forward(f)
    ix = np.abs(np.fft.fftfreq(grid.n, d=1.0 / grid.n)).astype(int)[:, None]
    iy = np.arange(grid.n // 2 + 1)[None, :]
    fh[(ix > kmax) | (iy > kmax)] = 0.0
    out = grid.inverse(fh)
    return amp * out / np.max(np.abs(out))


def random_state(grid, seed, c, q_regime="mixed", amp=0.5):
    """Seeded band-limited random state; u is projected by State.create."""
    base = seed * 10
    u1 = random_band_limited(grid, base + 0, amp=amp)
    u2 = random_band_limited(grid, base + 1, amp=amp)
    v1 = random_band_limited(grid, base + 2, amp=amp)
    v2 = random_band_limited(grid, base + 3, amp=amp)
    T = random_band_limited(grid, base + 4, amp=amp)
    qf = random_band_limited(grid, base + 5, amp=amp)
    if q_regime == "mixed":
        q = c.q_s + qf
    elif q_regime == "super":
        q = c.q_s + 1.0 + qf
    else:
        q = c.q_s - 1.0 + qf
    return State.create(grid, u1, u2, v1, v2, T, q)


def fd4_x(f, dx):
    """Fourth-order central difference along axis 0, periodic."""
    return (
        -np.roll(f, -2, axis=0)
        + 8 * np.roll(f, -1, axis=0)
        - 8 * np.roll(f, 1, axis=0)
        + np.roll(f, 2, axis=0)
    ) / (12 * dx)


def fd4_y(f, dx):
    return (
        -np.roll(f, -2, axis=1)
        + 8 * np.roll(f, -1, axis=1)
        - 8 * np.roll(f, 1, axis=1)
        + np.roll(f, 2, axis=1)
    ) / (12 * dx)
