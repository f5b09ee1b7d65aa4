"""Pointwise algebra of symmetric traceless 3x3 order tensors.

A tensor Q is stored through five independent components

    q = (q1, q2, q3, q4, q5)  <->  Q = [[q1, q3, q4],
                                        [q3, q2, q5],
                                        [q4, q5, -q1-q2]]

All functions below are array-native: they accept any ndarray whose last
axis has length 5 (a single tensor, a face of tensors, a full field) and
broadcast over the leading axes.  The Frobenius pairing of two tensors in
this representation is

    tr(AB) = 2(a1 b1 + a2 b2) + a1 b2 + a2 b1 + 2(a3 b3 + a4 b4 + a5 b5)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateDirector, NoNematicMinimum, NotUnit

__all__ = [
    "QTensor",
    "BulkParams",
    "uniaxial",
    "to_matrix",
    "from_matrix",
    "tensor_dot",
    "trq2",
    "trq3",
    "biaxiality",
    "eigenvalues",
    "spectral",
    "director",
    "s_plus",
    "bulk_potential",
    "bulk_gradient",
    "METRIC",
    "METRIC_INV",
]

# Gram matrix of the five-component representation: tr(AB) = a^T METRIC b.
METRIC = np.array(
    [
        [2.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 2.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 2.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 2.0],
    ]
)
METRIC_INV = np.linalg.inv(METRIC)


class QTensor(NamedTuple):
    """Named view of the five independent components of a Q-tensor.

    Being a tuple of floats it converts to a shape-(5,) array via
    ``np.asarray`` and can be passed directly to every function here.
    """

    q1: float
    q2: float
    q3: float
    q4: float
    q5: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    def matrix(self) -> np.ndarray:
        return to_matrix(self.as_array())


def as_qtensor(q) -> QTensor:
    a = np.asarray(q, dtype=float).reshape(5)
    return QTensor(*a.tolist())


def _q(q) -> np.ndarray:
    a = np.asarray(q, dtype=float)
    if a.shape[-1] != 5:
        raise ValueError(f"expected component-last layout (...,5), got {a.shape}")
    return a


def uniaxial(n, s: float):
    """Uniaxial tensor s (n x n - I/3) for a unit director n.

    Raises NotUnit if |n| deviates from 1 by more than 1e-10.
    """
    n = np.asarray(n, dtype=float)
    nrm2 = np.einsum("...i,...i->...", n, n)
    if np.any(np.abs(nrm2 - 1.0) > 1e-10):
        raise NotUnit("director must be unit length within 1e-10")
    out = np.empty(n.shape[:-1] + (5,))
    out[..., 0] = s * (n[..., 0] * n[..., 0] - 1.0 / 3.0)
    out[..., 1] = s * (n[..., 1] * n[..., 1] - 1.0 / 3.0)
    out[..., 2] = s * n[..., 0] * n[..., 1]
    out[..., 3] = s * n[..., 0] * n[..., 2]
    out[..., 4] = s * n[..., 1] * n[..., 2]
    return out


def to_matrix(q) -> np.ndarray:
    q = _q(q)
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = q[..., 0]
    m[..., 1, 1] = q[..., 1]
    m[..., 2, 2] = -q[..., 0] - q[..., 1]
    m[..., 0, 1] = m[..., 1, 0] = q[..., 2]
    m[..., 0, 2] = m[..., 2, 0] = q[..., 3]
    m[..., 1, 2] = m[..., 2, 1] = q[..., 4]
    return m


def from_matrix(m, tol: float = 1e-10) -> np.ndarray:
    """Project a (...,3,3) matrix back to components, validating shape.

    The matrix must be symmetric and traceless within ``tol`` relative to
    its own magnitude.
    """
    m = np.asarray(m, dtype=float)
    if m.shape[-2:] != (3, 3):
        raise ValueError("expected (...,3,3)")
    scale = np.maximum(1.0, np.abs(m).max(axis=(-2, -1)))
    asym = np.abs(m - np.swapaxes(m, -1, -2)).max(axis=(-2, -1))
    trace = np.abs(m[..., 0, 0] + m[..., 1, 1] + m[..., 2, 2])
    if np.any(asym > tol * scale):
        raise ValueError("matrix is not symmetric within tolerance")
    if np.any(trace > tol * scale):
        raise ValueError("matrix is not traceless within tolerance")
    out = np.empty(m.shape[:-2] + (5,))
    out[..., 0] = m[..., 0, 0]
    out[..., 1] = m[..., 1, 1]
    out[..., 2] = 0.5 * (m[..., 0, 1] + m[..., 1, 0])
    out[..., 3] = 0.5 * (m[..., 0, 2] + m[..., 2, 0])
    out[..., 4] = 0.5 * (m[..., 1, 2] + m[..., 2, 1])
    return out


def tensor_dot(a, b):
    """Frobenius pairing tr(AB) of two component arrays, broadcast."""
    a = _q(a)
    b = _q(b)
    return (
        2.0 * (a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1])
        + a[..., 0] * b[..., 1]
        + a[..., 1] * b[..., 0]
        + 2.0
        * (a[..., 2] * b[..., 2] + a[..., 3] * b[..., 3] + a[..., 4] * b[..., 4])
    )


def trq2(q):
    """tr(Q^2), the squared Frobenius norm."""
    q = _q(q)
    q1, q2 = q[..., 0], q[..., 1]
    return 2.0 * (
        q1 * q1
        + q2 * q2
        + q1 * q2
        + q[..., 2] * q[..., 2]
        + q[..., 3] * q[..., 3]
        + q[..., 4] * q[..., 4]
    )


def trq3(q):
    """tr(Q^3) = 3 det(Q) for traceless symmetric Q."""
    q = _q(q)
    q1, q2, q3, q4, q5 = (q[..., i] for i in range(5))
    q6 = -q1 - q2
    det = (
        q1 * (q2 * q6 - q5 * q5)
        - q3 * (q3 * q6 - q5 * q4)
        + q4 * (q3 * q5 - q2 * q4)
    )
    return 3.0 * det


def biaxiality(q, tiny: float = 1e-14):
    """Biaxiality parameter beta^2 = 1 - 6 tr(Q^3)^2 / tr(Q^2)^3 in [0, 1].

    Zero for any uniaxial or isotropic tensor; tensors with tr(Q^2) below
    ``tiny`` are reported as 0 (isotropic).
    """
    t2 = trq2(q)
    t3 = trq3(q)
    safe = np.where(t2 > tiny, t2, 1.0)
    beta = 1.0 - 6.0 * t3 * t3 / (safe * safe * safe)
    beta = np.where(t2 > tiny, beta, 0.0)
    return np.clip(beta, 0.0, 1.0)


def eigenvalues(q):
    """Eigenvalues of Q in ascending order, by the trigonometric formula.

    For traceless symmetric Q the characteristic polynomial is
    lam^3 + p lam + r = 0 with p = -tr(Q^2)/2, r = -det(Q); the roots are
    2 sqrt(-p/3) cos((acos(3r sqrt(-3/p)/(2p)) - 2 pi k)/3).
    """
    q = _q(q)
    t2 = trq2(q)
    det = trq3(q) / 3.0
    p = 0.5 * t2  # -p in the reduced cubic; p >= 0
    amp = np.sqrt(np.maximum(p, 0.0) / 3.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(amp > 0.0, det / (2.0 * amp**3), 0.0)
    arg = np.clip(arg, -1.0, 1.0)
    phi = np.arccos(arg) / 3.0
    lam_hi = 2.0 * amp * np.cos(phi)
    lam_mid = 2.0 * amp * np.cos(phi - 2.0 * np.pi / 3.0)
    lam_lo = -lam_hi - lam_mid
    out = np.stack([lam_lo, lam_mid, lam_hi], axis=-1)
    out.sort(axis=-1)
    return out


def spectral(q, degenerate_tol: float = 1e-8):
    """Full eigen-decomposition: (eigenvalues ascending, eigenvectors).

    Eigenvalues come from the closed-form solver; eigenvectors are taken
    from LAPACK on the 3x3 matrices (robust near degeneracies, where the
    adjugate construction loses accuracy).  Columns of the returned
    (...,3,3) array are unit eigenvectors for the corresponding value.
    """
    lam = eigenvalues(q)
    w, v = np.linalg.eigh(to_matrix(q))
    # eigh already sorts ascending; keep its vectors, trust trig values
    # when they are consistent, otherwise fall back to LAPACK values.
    lam = np.where(np.abs(lam - w) < 1e-8 * np.maximum(1.0, np.abs(w)), lam, w)
    return lam, v


def director(q, degenerate_tol: float = 1e-8):
    """Unit eigenvector of the largest eigenvalue, sign-fixed.

    Raises DegenerateDirector when the top eigenvalue gap is below
    ``degenerate_tol * max(1, |lam_max|)`` for a scalar input.  For array
    input the degenerate entries are returned as NaN rows instead.
    """
    q = _q(q)
    lam, v = spectral(q)
    gap = lam[..., 2] - lam[..., 1]
    bad = gap <= degenerate_tol * np.maximum(1.0, np.abs(lam[..., 2]))
    n = v[..., :, 2].copy()
    n = _fix_sign(n)
    if q.ndim == 1:
        if bool(bad):
            raise DegenerateDirector(
                f"leading eigenvalue gap {float(gap):.3e} below tolerance"
            )
        return n
    n[bad] = np.nan
    return n


def _fix_sign(n: np.ndarray) -> np.ndarray:
    """Flip each vector so its first significant component is positive."""
    scale = np.max(np.abs(n), axis=-1, keepdims=True)
    sig = np.abs(n) > 1e-9 * scale
    # index of first significant component
    first = np.argmax(sig, axis=-1)
    lead = np.take_along_axis(n, first[..., None], axis=-1)[..., 0]
    flip = lead < 0.0
    return np.where(flip[..., None], -n, n)


def s_plus(A: float, B: float, C: float) -> float:
    """Uniaxial order of the nematic bulk minimum, (B + sqrt(B^2-24AC))/4C."""
    if C <= 0.0:
        raise NoNematicMinimum("quartic coefficient C must be positive")
    disc = B * B - 24.0 * A * C
    if disc < 0.0:
        raise NoNematicMinimum(
            f"B^2 - 24AC = {disc:.6g} < 0: no nematic minimum at these coefficients"
        )
    return (B + math.sqrt(disc)) / (4.0 * C)


@dataclass(frozen=True)
class BulkParams:
    """Thermotropic bulk coefficients (SI) plus derived constants.

    ``s_plus`` is the preferred uniaxial order and ``f_shift`` the value of
    the unshifted bulk density at that order, so the shifted density
    vanishes on the uniaxial minimum manifold.
    """

    A: float
    B: float
    C: float
    L: float
    s_plus: float = field(init=False)
    f_shift: float = field(init=False)

    def __post_init__(self):
        sp = s_plus(self.A, self.B, self.C)
        fs = (
            (self.A / 3.0) * sp**2
            - (2.0 * self.B / 27.0) * sp**3
            + (self.C / 9.0) * sp**4
        )
        object.__setattr__(self, "s_plus", sp)
        object.__setattr__(self, "f_shift", fs)

    @classmethod
    def mbba(cls, A: float | None = None) -> "BulkParams":
        """MBBA-like constants; A defaults to the -B^2/3C special point."""
        B = 0.64e4
        C = 0.35e4
        if A is None:
            A = -(B * B) / (3.0 * C)
        return cls(A=A, B=B, C=C, L=4.0e-11)


def bulk_potential(q, bulk: BulkParams, lam2: float):
    """Dimensionless shifted bulk density, scaled by lam2.

    lam2 * (A/4C tr(Q^2) - B/6C tr(Q^3) + tr(Q^2)^2 / 8 - f_shift/2C);
    non-negative for coefficients at the special temperature, zero on the
    uniaxial minimum manifold.
    """
    q = _q(q)
    t2 = trq2(q)
    t3 = trq3(q)
    c_a = bulk.A / (4.0 * bulk.C)
    c_b = bulk.B / (6.0 * bulk.C)
    c_s = bulk.f_shift / (2.0 * bulk.C)
    return lam2 * (c_a * t2 - c_b * t3 + 0.125 * t2 * t2 - c_s)


def bulk_gradient(q, bulk: BulkParams, lam2: float):
    """Tensor-space gradient of ``bulk_potential`` (traceless symmetric).

    Equals lam2 [A/2C Q - B/2C (Q^2 - tr(Q^2)/3 I) + tr(Q^2)/2 Q] in matrix
    form; components satisfy tr(G P) = d bulk_potential(Q + eps P)/d eps
    for every traceless symmetric perturbation P.
    """
    q = _q(q)
    q1, q2, q3, q4, q5 = (q[..., i] for i in range(5))
    q6 = -q1 - q2
    t2 = trq2(q)
    # entries of Q^2 needed for the traceless projection
    s11 = q1 * q1 + q3 * q3 + q4 * q4
    s22 = q3 * q3 + q2 * q2 + q5 * q5
    s12 = q1 * q3 + q3 * q2 + q4 * q5
    s13 = q1 * q4 + q3 * q5 + q4 * q6
    s23 = q3 * q4 + q2 * q5 + q5 * q6
    c_lin = bulk.A / (2.0 * bulk.C) + 0.5 * t2
    c_b = bulk.B / (2.0 * bulk.C)
    out = np.empty_like(q)
    out[..., 0] = c_lin * q1 - c_b * (s11 - t2 / 3.0)
    out[..., 1] = c_lin * q2 - c_b * (s22 - t2 / 3.0)
    out[..., 2] = c_lin * q3 - c_b * s12
    out[..., 3] = c_lin * q4 - c_b * s13
    out[..., 4] = c_lin * q5 - c_b * s23
    out *= lam2
    return out
