"""Fixed-step RK4 propagation of the driven three-level amplitudes.

State vector v = (c1, c2, c3) for |s>|0>, |e>|0>, |g>|1> obeys

    dc1/dt = -i W(t) c2
    dc2/dt = -i W(t) c1 - i g0 c3
    dc3/dt = -i g0 c2 - (kappa/2) c3 + sqrt(kappa) a_in(t)

with W the (real, possibly signed) drive and a_in the incoming field.  One
RK4 step spans one grid interval; W and a_in are interpolated linearly at
the midpoint.  The loop is compiled with numba; determinism comes from the
fixed step and fixed evaluation order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["propagate_three_level"]


@njit(cache=True)
def _rk4_loop(omega, a_in, g0, kappa, dt, c1, c2, c3):  # pragma: no cover - jit
    n = omega.shape[0]
    out = np.empty((n, 3), np.complex128)
    out[0, 0] = c1
    out[0, 1] = c2
    out[0, 2] = c3
    hk = 0.5 * kappa
    rk = np.sqrt(kappa)
    for k in range(n - 1):
        w0 = omega[k]
        w1 = omega[k + 1]
        wm = 0.5 * (w0 + w1)
        f0 = a_in[k]
        f1 = a_in[k + 1]
        fm = 0.5 * (f0 + f1)

        a1 = -1j * w0 * c2
        b1 = -1j * (w0 * c1 + g0 * c3)
        d1 = -1j * g0 * c2 - hk * c3 + rk * f0

        u1 = c1 + 0.5 * dt * a1
        u2 = c2 + 0.5 * dt * b1
        u3 = c3 + 0.5 * dt * d1
        a2 = -1j * wm * u2
        b2 = -1j * (wm * u1 + g0 * u3)
        d2 = -1j * g0 * u2 - hk * u3 + rk * fm

        u1 = c1 + 0.5 * dt * a2
        u2 = c2 + 0.5 * dt * b2
        u3 = c3 + 0.5 * dt * d2
        a3 = -1j * wm * u2
        b3 = -1j * (wm * u1 + g0 * u3)
        d3 = -1j * g0 * u2 - hk * u3 + rk * fm

        u1 = c1 + dt * a3
        u2 = c2 + dt * b3
        u3 = c3 + dt * d3
        a4 = -1j * w1 * u2
        b4 = -1j * (w1 * u1 + g0 * u3)
        d4 = -1j * g0 * u2 - hk * u3 + rk * f1

        c1 = c1 + dt * (a1 + 2.0 * (a2 + a3) + a4) / 6.0
        c2 = c2 + dt * (b1 + 2.0 * (b2 + b3) + b4) / 6.0
        c3 = c3 + dt * (d1 + 2.0 * (d2 + d3) + d4) / 6.0
        out[k + 1, 0] = c1
        out[k + 1, 1] = c2
        out[k + 1, 2] = c3
    return out


def propagate_three_level(
    omega: np.ndarray,
    a_in: np.ndarray | None,
    g0: float,
    kappa: float,
    dt: float,
    initial: tuple[complex, complex, complex],
) -> np.ndarray:
    """Run the RK4 loop; returns the (n, 3) complex amplitude history."""
    omega = np.ascontiguousarray(omega, dtype=np.float64)
    if a_in is None:
        a_in = np.zeros(omega.shape[0], dtype=np.complex128)
    else:
        a_in = np.ascontiguousarray(a_in, dtype=np.complex128)
    c1, c2, c3 = (complex(c) for c in initial)
    return _rk4_loop(omega, a_in, float(g0), float(kappa), float(dt), c1, c2, c3)
