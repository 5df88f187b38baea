"""Grid motion on a fixed referent square.

The referent mesh never moves. A prescribed map supplies nodal displacement
samples; within one time interval the displacement is a polynomial in time
with P1 nodal fields as coefficients, so every geometric quantity needed by
the weak form (deformation gradient, cofactor, Jacobian determinant, and the
cofactor-weighted grid flux) is a per-element polynomial in time that can be
integrated exactly. That exact integral is what makes the discrete space
conservation identity hold to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridTanglingError",
    "IdentityMap",
    "UniformScaleMap",
    "AxisWaveMap",
    "BubbleShearMap",
    "prescribed_map",
    "sample_displacement",
    "GridVelocity",
    "velocity_piecewise_constant",
    "velocity_continuous",
    "IntervalGeometry",
    "build_interval_geometry",
    "assert_untangled",
    "static_geometry",
    "element_def_gradient",
    "cofactor2d",
    "jacobian",
    "integrated_flux_field",
    "scl_residual",
]


class GridTanglingError(RuntimeError):
    """Deformed grid degenerated: nonpositive Jacobian inside an interval."""


# ---------------------------------------------------------------------------
# prescribed maps


@dataclass(frozen=True)
class IdentityMap:
    map_id: str = "identity"

    def displacement(self, points, t):
        points = np.asarray(points, dtype=float)
        return np.zeros_like(points)


@dataclass(frozen=True)
class UniformScaleMap:
    """Oscillating homothety x -> a(t) x with a(t) = c0 - c1 cos(omega t)."""

    c0: float = 2.0
    c1: float = 1.0
    omega: float = 20.0 * math.pi
    map_id: str = "uniform-scale"

    def scale(self, t: float) -> float:
        return self.c0 - self.c1 * math.cos(self.omega * t)

    def displacement(self, points, t):
        points = np.asarray(points, dtype=float)
        return (self.scale(t) - 1.0) * points


@dataclass(frozen=True)
class AxisWaveMap:
    """Axis-decoupled interior wave; the boundary of the square stays put."""

    map_id: str = "map-a"

    def displacement(self, points, t):
        points = np.asarray(points, dtype=float)
        s = 0.5 * math.sin(math.pi * t)
        x, y = points[..., 0], points[..., 1]
        dx = s * np.sin(np.pi * x * (1.0 - x) * (x - 0.5))
        dy = s * np.sin(np.pi * y * (1.0 - y) * (y - 0.5))
        return np.stack([dx, dy], axis=-1)


@dataclass(frozen=True)
class BubbleShearMap:
    """Diagonal shift by an interior bubble; boundary stays put."""

    map_id: str = "map-b"

    def displacement(self, points, t):
        points = np.asarray(points, dtype=float)
        x, y = points[..., 0], points[..., 1]
        b = math.sin(math.pi * t) * x * (1.0 - x) * y * (1.0 - y)
        return np.stack([b, b], axis=-1)


_MAPS = {
    "identity": IdentityMap,
    "uniform-scale": UniformScaleMap,
    "map-a": AxisWaveMap,
    "map-b": BubbleShearMap,
}


def prescribed_map(map_id: str, **params):
    """Factory over the built-in analytic maps."""
    try:
        cls = _MAPS[map_id]
    except KeyError:
        raise ValueError(f"unknown map {map_id!r}, expected one of {sorted(_MAPS)}")
    return cls(**params)


def sample_displacement(motion, mesh, t: float) -> np.ndarray:
    """Nodal displacement samples of an analytic map; everything downstream
    sees only this P1 interpolant, never the analytic map itself."""
    return np.asarray(motion.displacement(mesh.nodes, t), dtype=float)


# ---------------------------------------------------------------------------
# grid velocity over one interval


@dataclass(frozen=True)
class GridVelocity:
    """Nodal grid velocity on one interval, affine in local time:
    w(t) = w0 + t w1 with t in [0, dt]."""

    strategy: str
    dt: float
    w0: np.ndarray
    w1: np.ndarray

    def at(self, t: float) -> np.ndarray:
        return self.w0 + t * self.w1

    @property
    def end(self) -> np.ndarray:
        return self.at(self.dt)

    def integral(self) -> np.ndarray:
        """Exact time integral over the interval; equals the displacement
        increment by construction."""
        return self.dt * self.w0 + 0.5 * self.dt**2 * self.w1


def velocity_piecewise_constant(u_start, u_end, dt: float) -> GridVelocity:
    """Constant-in-time velocity (u_end - u_start)/dt; discontinuous across
    interval boundaries."""
    u_start = np.asarray(u_start, dtype=float)
    u_end = np.asarray(u_end, dtype=float)
    w = (u_end - u_start) / dt
    return GridVelocity("dc", dt, w, np.zeros_like(w))


def velocity_continuous(u_start, u_end, dt: float, w_prev_end=None) -> GridVelocity:
    """Affine-in-time velocity starting from the previous interval's end
    velocity; the rate is fixed by requiring the exact integral to match the
    displacement increment. First interval (w_prev_end None) starts from the
    mean velocity, which degenerates to the piecewise-constant choice."""
    u_start = np.asarray(u_start, dtype=float)
    u_end = np.asarray(u_end, dtype=float)
    du = u_end - u_start
    if w_prev_end is None:
        w_prev_end = du / dt
    w_prev_end = np.asarray(w_prev_end, dtype=float)
    rate = 2.0 * (du - dt * w_prev_end) / dt**2
    return GridVelocity("c", dt, w_prev_end, rate)


def make_velocity(strategy: str, u_start, u_end, dt: float, w_prev_end=None) -> GridVelocity:
    if strategy == "dc":
        return velocity_piecewise_constant(u_start, u_end, dt)
    if strategy == "c":
        return velocity_continuous(u_start, u_end, dt, w_prev_end)
    raise ValueError(f"unknown velocity strategy {strategy!r}")


# ---------------------------------------------------------------------------
# small polynomial helpers (monomial coefficients along the last axis)


def _poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    da, db = a.shape[-1], b.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (da + db - 1,))
    for i in range(da):
        for j in range(db):
            out[..., i + j] += a[..., i] * b[..., j]
    return out


def _poly_eval(c: np.ndarray, t: float) -> np.ndarray:
    out = np.zeros(c.shape[:-1])
    for m in range(c.shape[-1] - 1, -1, -1):
        out = out * t + c[..., m]
    return out


# ---------------------------------------------------------------------------
# static per-element geometry


def _p1_gradients(mesh) -> np.ndarray:
    """Constant gradients of the three P1 hat functions per element, (n_e,3,2)."""
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    g = np.empty((mesh.n_triangles, 3, 2))
    g[:, 1, 0] = d2[:, 1] / det
    g[:, 1, 1] = -d2[:, 0] / det
    g[:, 2, 0] = -d1[:, 1] / det
    g[:, 2, 1] = d1[:, 0] / det
    g[:, 0] = -g[:, 1] - g[:, 2]
    return g


def _grad_nodal_field(mesh, grad_lambda, values) -> np.ndarray:
    """Per-element gradient of a P1 nodal vector field: (n_e, 2, 2) with
    entry [i, j] = d(values_i)/d(x_j)."""
    v = values[mesh.triangles]  # (n_e, 3, 2)
    return np.einsum("eki,ekj->eij", v, grad_lambda)


def cofactor2d(g: np.ndarray) -> np.ndarray:
    """Cofactor (adjugate) of 2x2 matrices, any leading shape:
    G cof(G) = det(G) I."""
    g = np.asarray(g, dtype=float)
    c = np.empty_like(g)
    c[..., 0, 0] = g[..., 1, 1]
    c[..., 0, 1] = -g[..., 0, 1]
    c[..., 1, 0] = -g[..., 1, 0]
    c[..., 1, 1] = g[..., 0, 0]
    return c


def jacobian(g: np.ndarray) -> np.ndarray:
    """Determinant of 2x2 matrices, any leading shape."""
    g = np.asarray(g, dtype=float)
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def element_def_gradient(mesh, disp: np.ndarray, elem: int) -> np.ndarray:
    """Deformation gradient G = I + grad(disp) on one element, from the P1
    interpolant of the nodal displacement samples."""
    gl = _p1_gradients(mesh)
    G = _grad_nodal_field(mesh, gl, np.asarray(disp, dtype=float))
    return np.eye(2) + G[elem]


def static_geometry(mesh, disp: np.ndarray):
    """(G, C, J) per element for a single displacement field (no time axis)."""
    gl = _p1_gradients(mesh)
    G = np.eye(2) + _grad_nodal_field(mesh, gl, np.asarray(disp, dtype=float))
    C = cofactor2d(G)
    return G, C, jacobian(G)


# ---------------------------------------------------------------------------
# interval geometry: everything polynomial in local time


@dataclass(frozen=True)
class IntervalGeometry:
    """Per-element polynomial geometry of one time interval [0, dt].

    Coefficient layout: monomial coefficients along the last axis. The
    displacement interpolant is P1 in space, so G, C are constant per element,
    J = det G is their polynomial determinant, and the grid flux C(t) w(t) is
    linear per element (stored by its three corner values, discontinuous
    across elements; it is never interpolated to a continuous space).
    """

    dt: float
    grad_lambda: np.ndarray  # (n_e, 3, 2)
    G: np.ndarray  # (n_e, 2, 2, du+1)
    C: np.ndarray  # (n_e, 2, 2, du+1)
    J: np.ndarray  # (n_e, 2 du + 1)
    flux: np.ndarray  # (n_e, 3, 2, du+dw+1) corner values of C(t) w(t)
    int_flux: np.ndarray  # (n_e, 3, 2)
    div_int_flux: np.ndarray  # (n_e,)
    velocity: GridVelocity = field(repr=False, default=None)

    def G_at(self, t: float) -> np.ndarray:
        return _poly_eval(self.G, t)

    def C_at(self, t: float) -> np.ndarray:
        return _poly_eval(self.C, t)

    def J_at(self, t: float) -> np.ndarray:
        return _poly_eval(self.J, t)

    def flux_at(self, t: float) -> np.ndarray:
        return _poly_eval(self.flux, t)

    def endpoint_flux(self):
        """Endpoint-product surrogate dt * C(dt) w(dt) for the exact interval
        integral, with its per-element divergence. This is the quantity the
        classical schemes use; it violates the conservation identity."""
        n_flux = self.dt * self.flux_at(self.dt)
        div = np.einsum("ekc,ekc->e", self.grad_lambda, n_flux)
        return n_flux, div


def build_interval_geometry(mesh, u_start: np.ndarray, velocity: GridVelocity) -> IntervalGeometry:
    """Assemble the polynomial geometry of one interval from the starting
    displacement field and the interval's grid velocity."""
    dt = velocity.dt
    u_start = np.asarray(u_start, dtype=float)
    gl = _p1_gradients(mesh)
    n_e = mesh.n_triangles

    # displacement coefficients per node: u(t) = u_start + t w0 + t^2 w1/2
    dw = 0 if velocity.strategy == "dc" else 1
    du = dw + 1
    disp = np.zeros((mesh.n_nodes, 2, du + 1))
    disp[..., 0] = u_start
    disp[..., 1] = velocity.w0
    if dw:
        disp[..., 2] = 0.5 * velocity.w1

    G = np.zeros((n_e, 2, 2, du + 1))
    for m in range(du + 1):
        G[..., m] = _grad_nodal_field(mesh, gl, disp[..., m])
    G[:, 0, 0, 0] += 1.0
    G[:, 1, 1, 0] += 1.0

    C = np.empty_like(G)
    C[:, 0, 0] = G[:, 1, 1]
    C[:, 0, 1] = -G[:, 0, 1]
    C[:, 1, 0] = -G[:, 1, 0]
    C[:, 1, 1] = G[:, 0, 0]

    J = _poly_mul(G[:, 0, 0], G[:, 1, 1]) - _poly_mul(G[:, 0, 1], G[:, 1, 0])

    # corner values of the flux C(t) w(t): degree du + dw
    w = np.zeros((mesh.n_nodes, 2, dw + 1))
    w[..., 0] = velocity.w0
    if dw:
        w[..., 1] = velocity.w1
    wt = w[mesh.triangles]  # (n_e, 3, 2, dw+1)
    flux = np.zeros((n_e, 3, 2, du + dw + 1))
    for p in range(du + 1):
        for q in range(dw + 1):
            flux[..., p + q] += np.einsum("ecd,ekd->ekc", C[..., p], wt[..., q])

    powers = np.array([dt ** (m + 1) / (m + 1) for m in range(flux.shape[-1])])
    int_flux = flux @ powers
    div_int_flux = np.einsum("ekc,ekc->e", gl, int_flux)

    return IntervalGeometry(dt, gl, G, C, J, flux, int_flux, div_int_flux, velocity)


def assert_untangled(geom: IntervalGeometry) -> None:
    """Grid-validity guard: the Jacobian must stay positive through the
    interval. Sampled at five times; raises GridTanglingError otherwise.
    Construction itself never checks, because the polynomial conservation
    identities hold regardless of the sign of J."""
    for s in (0.0, 0.25, 0.5, 0.75, 1.0):
        j = geom.J_at(s * geom.dt)
        if np.any(j <= 0.0):
            raise GridTanglingError(
                f"nonpositive Jacobian at local t = {s * geom.dt:.6g} "
                f"(min J = {float(j.min()):.3e})"
            )


def interval_geometries(mesh, motion, strategy: str, dt: float, n_intervals: int):
    """Yield the interval geometries of a trajectory, carrying the velocity
    history that the continuous strategy needs."""
    disp = sample_displacement(motion, mesh, 0.0)
    w_prev_end = None
    for n in range(n_intervals):
        disp_next = sample_displacement(motion, mesh, (n + 1) * dt)
        vel = make_velocity(strategy, disp, disp_next, dt, w_prev_end)
        geom = build_interval_geometry(mesh, disp, vel)
        yield geom
        disp = disp_next
        w_prev_end = vel.end


def integrated_flux_field(geom: IntervalGeometry, elem: int):
    """Exact interval integral of the grid flux on one element: the three
    corner values of the linear field and its constant divergence."""
    return geom.int_flux[elem], float(geom.div_int_flux[elem])


def scl_residual(mesh, geom: IntervalGeometry, div_flux=None) -> np.ndarray:
    """Weak space-conservation residual against the P1 hat functions:
    r_i = int psi_i (J(dt) - J(0)) - int psi_i div(flux integral).
    Both integrands are constant per element, so the hat-function moments
    integrate exactly (area/3 per corner, matching any rule of degree >= 2).
    div_flux overrides the exact integral's divergence, e.g. to measure the
    violation of the endpoint surrogate."""
    if div_flux is None:
        div_flux = geom.div_int_flux
    jump = geom.J_at(geom.dt) - geom.J_at(0.0) - div_flux
    cell = (mesh.areas() / 3.0) * jump
    r = np.zeros(mesh.n_nodes)
    np.add.at(r, mesh.triangles.ravel(), np.repeat(cell, 3))
    return r
