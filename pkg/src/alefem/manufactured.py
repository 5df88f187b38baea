"""Closed-form solutions and forcing terms for the benchmark problems.

The forcing of each manufactured solution is f = u_t - alpha lap(u) in
physical coordinates, differentiated by hand; a finite-difference oracle is
provided so tests can check the closed forms independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ale import UniformScaleMap


@dataclass(frozen=True)
class Manufactured:
    """Physical-coordinate exact solution with its heat-equation forcing."""

    alpha: float
    u: Callable  # u(x, y, t)
    f: Callable  # f(x, y, t) = u_t - alpha lap(u)


def scaled_bubble(alpha: float = 0.1) -> tuple[Manufactured, UniformScaleMap]:
    """Polynomial bubble locked to a breathing square [0, a(t)]^2 with
    a(t) = 2 - cos(10 pi t). In referent coordinates
    u_hat = 16 (1 + sin(5 pi t)/2) xh (1-xh) yh (1-yh); it vanishes on the
    moving boundary for all t."""
    motion = UniformScaleMap(omega=10.0 * math.pi)

    def g(t):
        return 16.0 * (1.0 + 0.5 * math.sin(5.0 * math.pi * t))

    def dg(t):
        return 40.0 * math.pi * math.cos(5.0 * math.pi * t)

    def u(x, y, t):
        a = motion.scale(t)
        xh, yh = x / a, y / a
        return g(t) * xh * (1.0 - xh) * yh * (1.0 - yh)

    def f(x, y, t):
        # With p = xh(1-xh), q = yh(1-yh) and xh = x/a(t):
        # u_t = g' p q - g (a'/a) (xh p' q + yh q' p)
        # lap u = -2 g (p + q) / a^2
        a = motion.scale(t)
        da = motion.c1 * motion.omega * math.sin(motion.omega * t)
        xh, yh = x / a, y / a
        p, q = xh * (1.0 - xh), yh * (1.0 - yh)
        dp, dq = 1.0 - 2.0 * xh, 1.0 - 2.0 * yh
        ut = dg(t) * p * q - g(t) * (da / a) * (xh * dp * q + yh * dq * p)
        lap = -2.0 * g(t) * (p + q) / a**2
        return ut - alpha * lap

    return Manufactured(alpha, u, f), motion


def scaled_bubble_referent(alpha: float = 0.1):
    """Referent-coordinate fields of :func:`scaled_bubble`: exact solution
    u_hat(xh, yh, t), forcing f_hat(xh, yh, t) = f(a xh, a yh, t), and the
    motion. These are what a referent-domain run consumes directly."""
    man, motion = scaled_bubble(alpha)

    def u_hat(xh, yh, t):
        g = 16.0 * (1.0 + 0.5 * math.sin(5.0 * math.pi * t))
        return g * xh * (1.0 - xh) * yh * (1.0 - yh)

    def f_hat(xh, yh, t):
        a = motion.scale(t)
        return man.f(a * np.asarray(xh), a * np.asarray(yh), t)

    return man, motion, u_hat, f_hat


def ring_pulse(alpha: float = 0.1) -> Manufactured:
    """Fixed-square solution u = sin(t) cos(Q), Q = 2 (x-1/2)^2 + 2 (y-1/2)^2.
    The domain never moves; interior maps only redistribute the grid."""

    def u(x, y, t):
        Q = 2.0 * (x - 0.5) ** 2 + 2.0 * (y - 0.5) ** 2
        return math.sin(t) * np.cos(Q)

    def f(x, y, t):
        # grad Q = (4(x-1/2), 4(y-1/2)), |grad Q|^2 = 8 Q, lap Q = 8
        # lap u = -sin(t) (8 Q cos Q + 8 sin Q)
        Q = 2.0 * (x - 0.5) ** 2 + 2.0 * (y - 0.5) ** 2
        return math.cos(t) * np.cos(Q) \
            + alpha * math.sin(t) * (8.0 * Q * np.cos(Q) + 8.0 * np.sin(Q))

    return Manufactured(alpha, u, f)


def fd_forcing(man: Manufactured, x, y, t, hx: float = 1e-3, ht: float = 5e-4):
    """Finite-difference oracle for the forcing: fourth-order central
    differences of the exact solution, f = u_t - alpha lap(u)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def d1(fn, h):
        return (-fn(2 * h) + 8 * fn(h) - 8 * fn(-h) + fn(-2 * h)) / (12.0 * h)

    def d2(fn, h):
        return (-fn(2 * h) + 16 * fn(h) - 30 * fn(0.0) + 16 * fn(-h) - fn(-2 * h)) / (12.0 * h**2)

    ut = d1(lambda s: man.u(x, y, t + s), ht)
    uxx = d2(lambda s: man.u(x + s, y, t), hx)
    uyy = d2(lambda s: man.u(x, y + s, t), hx)
    return ut - man.alpha * (uxx + uyy)
