"""Vectorized numpy implementations of the local assembly kernels.

Mirrors the compiled module in alefem._kernels._core; either backend may be
selected at import time, so signatures and semantics must stay identical.
"""

import numpy as np


def stiffness_locals(dets, gradhat, cof, jac, wq, scale):
    """Local pulled-back diffusion matrices.

    dets: (n_e,) absolute determinants of the referent affine maps
    gradhat: (n_e, nq, nloc, 2) basis gradients in referent coordinates
    cof: (n_e, 2, 2) cofactor of the deformation gradient, frozen in time
    jac: (n_e,) Jacobian determinant, frozen at the same instant
    wq: (nq,) quadrature weights summing to 1/2
    scale: constant prefactor (diffusivity times step size)

    Returns (n_e, nloc, nloc) with entries
    scale/jac * det * sum_q wq (C^T grad_i).(C^T grad_j).
    """
    b = np.einsum("edk,eqid->eqik", cof, gradhat)
    loc = np.einsum("q,eqik,eqjk->eij", wq, b, b)
    return (scale * dets / jac)[:, None, None] * loc


def motion_locals(dets, phi, gradhat, flux, lam, divflux, wq):
    """Local grid-motion matrices.

    phi: (nq, nloc) basis values
    flux: (n_e, 3, 2) nodal values of the per-element linear flux field
    lam: (nq, 3) barycentric coordinates of the quadrature points
    divflux: (n_e,) constant per-element divergence of the flux field

    Returns (n_e, nloc, nloc) with entries
    det * sum_q wq phi_i (flux(x_q) . grad_j)  +  det * divflux * M_ref_ij.
    """
    fq = np.einsum("qk,ekc->eqc", lam, flux)
    adv = np.einsum("q,qi,eqc,eqjc->eij", wq, phi, fq, gradhat)
    mref = np.einsum("q,qi,qj->ij", wq, phi, phi)
    return dets[:, None, None] * adv + (dets * divflux)[:, None, None] * mref


def load_locals(dets, jac, phi, fq, wq, scale):
    """Local load vectors: scale * jac * det * sum_q wq f(x_q) phi_i.

    fq: (n_e, nq) forcing sampled at the quadrature points.
    Returns (n_e, nloc).
    """
    vec = np.einsum("q,qi,eq->ei", wq, phi, fq)
    return (scale * dets * jac)[:, None] * vec
