"""Discrete free energy of a confined nematic and its exact gradient.

Total energy of a field Q on the cuboid grid:

    E = sum_bonds dx/2 |Q_a - Q_b|^2                      (elastic)
      + sum_nodes dx^3 * bulk_potential(Q)                (bulk, lam2-scaled)
      + omega * sum_faces sum_nodes w |Q nu + s+/3 nu|^2  (anchoring)

The anchoring term penalizes any deviation of Q nu from -s+/3 nu, i.e. it
favors a planar-degenerate boundary: the wall normal must be an
eigenvector with eigenvalue -s+/3 while the tangent plane stays free.

``gradient`` is the exact derivative of this discrete functional with
respect to the inner product <f,g> = dx^3 sum tr(FG); the finite
difference identity <grad E(f), v> = d/dt E(f + t v) holds to roundoff.
On a wall node the anchoring contributes omega * (w_face/dx) * G_face per
adjacent face, where w_face is 1, 1/2 or 1/4 of dx^2 by the trapezoid
rule and G_face is the traceless projection of
nu nu^T Q + Q nu nu^T + (2 s+/3) nu nu^T.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .backend import kernels
from .errors import NonFinite
from .grid import FACES, Field, GridGeometry
from .tensor import BulkParams

__all__ = [
    "ModelParams",
    "EnergyBreakdown",
    "anchoring_omega",
    "energy",
    "gradient",
    "hess_vec",
    "boundary_jacobian_diag",
]


def anchoring_omega(lam2: float, W: float, bulk: BulkParams) -> float:
    """Dimensionless anchoring strength sqrt(lam2) W / sqrt(2 C L)."""
    if lam2 < 0.0:
        raise ValueError("lam2 must be nonnegative")
    return float(np.sqrt(lam2) * W / np.sqrt(2.0 * bulk.C * bulk.L))


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model: bulk constants, domain scale lam2, anchoring omega."""

    bulk: BulkParams
    lam2: float
    omega: float
    dimer_l: float = 1e-4

    def __post_init__(self):
        if self.lam2 < 0.0:
            raise ValueError("lam2 must be nonnegative")
        if self.omega < 0.0:
            raise ValueError("omega must be nonnegative")
        if self.dimer_l <= 0.0:
            raise ValueError("dimer_l must be positive")

    @classmethod
    def with_anchoring(
        cls, bulk: BulkParams, lam2: float, W: float = 0.01, **kw
    ) -> "ModelParams":
        """Build params from a physical anchoring coefficient W (J/m^2)."""
        return cls(bulk=bulk, lam2=lam2, omega=anchoring_omega(lam2, W, bulk), **kw)


class EnergyBreakdown(NamedTuple):
    e_ldg: float  # elastic + bulk
    e_bc: float  # anchoring surface integral (without omega)
    total: float  # e_ldg + omega * e_bc


def _require_finite(f: Field):
    if not np.all(np.isfinite(f.q)):
        raise NonFinite("field contains NaN or Inf")


def _face_density(qf: np.ndarray, axis: int, sp: float) -> np.ndarray:
    """|Q nu + (s+/3) nu|^2 on one wall plane (independent of wall side)."""
    third = sp / 3.0
    if axis == 0:
        return (qf[..., 0] + third) ** 2 + qf[..., 2] ** 2 + qf[..., 3] ** 2
    if axis == 1:
        return (qf[..., 1] + third) ** 2 + qf[..., 2] ** 2 + qf[..., 4] ** 2
    return (qf[..., 0] + qf[..., 1] - third) ** 2 + qf[..., 3] ** 2 + qf[..., 4] ** 2


def _face_gradient(qf: np.ndarray, axis: int, sp: float) -> np.ndarray:
    """Traceless tensor gradient of the face density w.r.t. tr(GP) pairing."""
    g = np.zeros_like(qf)
    if axis == 0:
        r = qf[..., 0] + sp / 3.0
        g[..., 0] = (4.0 / 3.0) * r
        g[..., 1] = -(2.0 / 3.0) * r
        g[..., 2] = qf[..., 2]
        g[..., 3] = qf[..., 3]
    elif axis == 1:
        r = qf[..., 1] + sp / 3.0
        g[..., 0] = -(2.0 / 3.0) * r
        g[..., 1] = (4.0 / 3.0) * r
        g[..., 2] = qf[..., 2]
        g[..., 4] = qf[..., 4]
    else:
        r = qf[..., 0] + qf[..., 1] - sp / 3.0
        g[..., 0] = (2.0 / 3.0) * r
        g[..., 1] = (2.0 / 3.0) * r
        g[..., 3] = qf[..., 3]
        g[..., 4] = qf[..., 4]
    return g


# implicit-diagonal coefficients of the anchoring gradient per component,
# i.e. d(G_face[c])/d(q_c), keyed by wall axis
_BDIAG = {
    0: np.array([4.0 / 3.0, 0.0, 1.0, 1.0, 0.0]),
    1: np.array([0.0, 4.0 / 3.0, 1.0, 0.0, 1.0]),
    2: np.array([2.0 / 3.0, 2.0 / 3.0, 0.0, 1.0, 1.0]),
}


def surface_energy(f: Field, params: ModelParams) -> float:
    """Anchoring surface integral (without the omega factor)."""
    geom = f.geom
    sp = params.bulk.s_plus
    total = 0.0
    for axis, side in FACES:
        w = geom.face_weights(axis)
        qf = f.q[geom.face_slicer(axis, side)]
        total += float(np.sum(w * _face_density(qf, axis, sp)))
    return total


def energy(f: Field, params: ModelParams) -> EnergyBreakdown:
    """Energy breakdown (elastic+bulk, anchoring, weighted total)."""
    _require_finite(f)
    geom = f.geom
    bulk = params.bulk
    e_el = kernels.elastic_energy(f.q, geom.dx)
    e_bulk = kernels.bulk_energy(
        f.q,
        params.lam2,
        bulk.A / (4.0 * bulk.C),
        bulk.B / (6.0 * bulk.C),
        bulk.f_shift / (2.0 * bulk.C),
        geom.dx,
    )
    e_bc = surface_energy(f, params)
    e_ldg = e_el + e_bulk
    return EnergyBreakdown(e_ldg, e_bc, e_ldg + params.omega * e_bc)


def gradient(f: Field, params: ModelParams) -> Field:
    """Exact gradient of the discrete energy under the field inner product."""
    _require_finite(f)
    geom = f.geom
    bulk = params.bulk
    out = np.empty_like(f.q)
    kernels.laplacian(f.q, geom.dx, out)
    out *= -1.0
    gb = np.empty_like(f.q)
    kernels.bulk_gradient(
        f.q, params.lam2, bulk.A / (2.0 * bulk.C), bulk.B / (2.0 * bulk.C), gb
    )
    out += gb
    if params.omega != 0.0:
        sp = bulk.s_plus
        dx3 = geom.dx**3
        for axis, side in FACES:
            sl = geom.face_slicer(axis, side)
            scale = (params.omega / dx3) * geom.face_weights(axis)
            out[sl] += scale[..., None] * _face_gradient(f.q[sl], axis, sp)
    return Field(geom, out)


def hess_vec(f: Field, v: Field, params: ModelParams) -> Field:
    """Hessian action by a central-difference dimer on the gradient.

    Dimer half-length: dimer_l * max(1, |f|_inf) / max(1, |v|_inf).
    """
    f._check(v)
    ell = params.dimer_l * max(1.0, f.max_abs()) / max(1.0, v.max_abs())
    gp = gradient(Field(f.geom, f.q + ell * v.q), params)
    gm = gradient(Field(f.geom, f.q - ell * v.q), params)
    return Field(f.geom, (gp.q - gm.q) / (2.0 * ell))


def boundary_jacobian_diag(geom: GridGeometry, params: ModelParams) -> np.ndarray:
    """Per-component diagonal of the anchoring gradient Jacobian.

    Returns a (5, nx, ny, nz) array: entry c holds
    omega/dx^3 * sum_adjacent_faces w_face * d(G_face[c])/dq_c, the
    non-coupling part that the semi-implicit step treats implicitly.
    """
    out = np.zeros((5,) + geom.shape)
    if params.omega == 0.0:
        return out
    dx3 = geom.dx**3
    for axis, side in FACES:
        sl = geom.face_slicer(axis, side)
        scale = (params.omega / dx3) * geom.face_weights(axis)
        for c in range(5):
            coeff = _BDIAG[axis][c]
            if coeff != 0.0:
                out[c][sl] += coeff * scale
    return out
