"""Self-contained verification suites: conservation identities, constant
preservation, convergence-rate estimation, and assembly cross-checks."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from . import ale, fem, schemes
from .mesh import Mesh, build_unit_square_mesh

SCL_TOL = 1e-12
CONSTANT_TOL = 1e-10
CLASSICAL_DRIFT_MIN = 1e-6


@dataclass(frozen=True)
class CheckRow:
    suite: str
    case: str
    metric: str
    value: float
    passed: bool


def convergence_rate(dts, errors) -> float:
    """Least-squares slope of log(error) against log(dt); needs at least
    three strictly positive points."""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dts.size < 3 or errors.size != dts.size:
        raise ValueError("need at least 3 matching (dt, error) points")
    if np.any(dts <= 0.0) or np.any(errors <= 0.0):
        raise ValueError("dts and errors must be positive")
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


def scl_identity_suite(mesh_sizes=(20, 40),
                       map_ids=("uniform-scale", "map-a", "map-b"),
                       strategies=("dc", "c"),
                       dts=(0.05, 0.01, 0.001),
                       tol: float = SCL_TOL,
                       max_intervals: int = 400) -> list[CheckRow]:
    """Worst per-interval weak SCL residual over leading trajectory intervals
    for every (mesh, map, strategy, dt) combination."""
    rows = []
    for nx, map_id, strat, dt in product(mesh_sizes, map_ids, strategies, dts):
        mesh = build_unit_square_mesh(nx, nx)
        motion = ale.prescribed_map(map_id)
        horizon = 0.4 if map_id == "uniform-scale" else 2.0
        n_int = min(int(round(horizon / dt)), max_intervals)
        worst = 0.0
        for geom in ale.interval_geometries(mesh, motion, strat, dt, n_int):
            worst = max(worst, float(np.max(np.abs(ale.scl_residual(mesh, geom)))))
        rows.append(CheckRow("scl-identity", f"{map_id}/nx{nx}/{strat}/dt{dt:g}",
                             "max_residual_inf", worst, worst <= tol))
    return rows


def constant_preservation_suite(scheme_ids=("mIE", "mCN", "mBDF2", "mBDF3", "cBDF2"),
                                map_id: str = "map-b",
                                strategies=("dc", "c"),
                                dt: float = 0.05,
                                t_final: float = 2.0,
                                nx: int = 20) -> list[CheckRow]:
    """Transport of the constant state u = 1 with alpha = 0, f = 0, u_D = 1.
    Modified schemes must hold the constant to CONSTANT_TOL for every
    strategy. The classical comparator is expected to drift by at least
    CLASSICAL_DRIFT_MIN; that expectation is checked with the continuous
    strategy, because the endpoint defect under piecewise-constant velocity
    is dt^2 det(grad w) per element, which vanishes identically for rank-one
    interior maps such as map-b."""
    mesh = build_unit_square_mesh(nx, nx)
    motion = ale.prescribed_map(map_id)
    rows = []
    for scheme, strat in product(scheme_ids, strategies):
        if scheme in schemes.CLASSICAL and strat != "c":
            continue
        drift = _constant_drift(scheme, mesh, motion, strat, dt, t_final)
        if scheme in schemes.MODIFIED:
            rows.append(CheckRow("constant-preservation", f"{scheme}/{map_id}/{strat}",
                                 "sup_drift", drift, drift <= CONSTANT_TOL))
        else:
            rows.append(CheckRow("constant-preservation", f"{scheme}/{map_id}/{strat}",
                                 "sup_drift_violation", drift, drift >= CLASSICAL_DRIFT_MIN))
    return rows


def _constant_drift(scheme: str, mesh, motion, strategy: str, dt: float, t_final: float) -> float:
    config = schemes.SchemeConfig(scheme, dt, t_final, alpha=0.0, strategy=strategy)
    worst = 0.0

    def watch(n, t, u):
        nonlocal worst
        worst = max(worst, float(np.max(np.abs(u - 1.0))))

    schemes.run_simulation(config, mesh, motion, lambda x, y: np.ones_like(x),
                           bc=1.0, callback=watch)
    return worst


def change_of_variables_oracle(mesh, degree: int, motion, t: float) -> float:
    """Max entrywise mismatch between pulled-back mass/stiffness on the
    referent mesh and plain assembly on the deformed node positions."""
    disp = ale.sample_displacement(motion, mesh, t)
    _, C, J = ale.static_geometry(mesh, disp)
    space = fem.build_space(mesh, degree)
    M_pull = fem.assemble_weighted_mass(space, J)
    K_pull = fem.assemble_stiffness_arrays(space, C, J, 1.0)

    moved = Mesh(mesh.nodes + disp, mesh.triangles,
                 mesh.boundary_edges, mesh.boundary_markers)
    space_d = fem.build_space(moved, degree)
    eye = np.broadcast_to(np.eye(2), (mesh.n_triangles, 2, 2))
    ones = np.ones(mesh.n_triangles)
    M_dir = fem.assemble_weighted_mass(space_d, ones)
    K_dir = fem.assemble_stiffness_arrays(space_d, eye, ones, 1.0)

    return max(_matrix_gap(M_pull, M_dir), _matrix_gap(K_pull, K_dir))


def _matrix_gap(a, b) -> float:
    d = (a - b).tocoo()
    return float(np.max(np.abs(d.data))) if d.nnz else 0.0


def cofactor_fuzz(n: int = 1000, seed: int = 20260816, det_range=(0.1, 10.0)) -> float:
    """Seeded fuzz of the cofactor identity G cof(G) = det(G) I over random
    2x2 matrices with determinant inside det_range; returns the worst
    entrywise defect."""
    rng = np.random.default_rng(seed)
    lo, hi = det_range
    worst = 0.0
    accepted = 0
    while accepted < n:
        g = rng.uniform(-2.0, 2.0, size=(2, 2))
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        if not (lo <= det <= hi):
            continue
        accepted += 1
        defect = g @ ale.cofactor2d(g) - det * np.eye(2)
        worst = max(worst, float(np.max(np.abs(defect))))
    return worst


def write_report(rows, stream) -> None:
    """CSV report: suite, case, metric, value, pass."""
    stream.write("suite,case,metric,value,pass\n")
    for r in rows:
        stream.write(f"{r.suite},{r.case},{r.metric},{r.value:.17g},"
                     f"{'true' if r.passed else 'false'}\n")
