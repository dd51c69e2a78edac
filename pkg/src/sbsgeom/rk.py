"""Dormand-Prince 5(4) stepper for a complex scalar ODE ``dz/dt = f(z)``.

Written as a bare stepper (rather than a ``solve_ivp`` call) because the
gradient flow needs per-step control: chart switches, termination tests
and an explicit step budget.
"""

from __future__ import annotations

import math

A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
B5 = A[6] + (0.0,)
B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
E = tuple(b5 - b4 for b5, b4 in zip(B5, B4))


def dopri_step(f, z: complex, h: float, k1: complex | None = None):
    """One trial step. Returns ``(z_new, err, k_last)``; ``k_last`` is f(z_new)."""
    k = [f(z) if k1 is None else k1]
    for row in A[1:]:
        zi = z + h * sum(a * kj for a, kj in zip(row, k))
        k.append(f(zi))
    z_new = z + h * sum(b * kj for b, kj in zip(B5, k))
    err = h * sum(e * kj for e, kj in zip(E, k))
    return z_new, err, k[-1]


def next_step(h: float, enorm: float) -> float:
    if enorm == 0.0:
        return h * 5.0
    return h * min(5.0, max(0.2, 0.9 * enorm ** (-0.2)))


def is_finite(z: complex) -> bool:
    return math.isfinite(z.real) and math.isfinite(z.imag)
