"""NumPy reference implementations of the hot kernels.

Shared signature contract with the compiled core (_core_cy):

* fields are C-contiguous float64, component-last (nx, ny, nz, 5)
* scalars are (nx, ny, nz)
* every kernel writes into a caller-supplied ``out`` when it returns an
  array, so the two backends can be swapped without allocation changes.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _accumulate_neighbor_diffs(u: np.ndarray, out: np.ndarray) -> None:
    # sum of (neighbor - center) over existing neighbors, all three axes
    out[1:, ...] += u[:-1, ...]
    out[1:, ...] -= u[1:, ...]
    out[:-1, ...] += u[1:, ...]
    out[:-1, ...] -= u[:-1, ...]
    out[:, 1:, ...] += u[:, :-1, ...]
    out[:, 1:, ...] -= u[:, 1:, ...]
    out[:, :-1, ...] += u[:, 1:, ...]
    out[:, :-1, ...] -= u[:, :-1, ...]
    out[:, :, 1:, ...] += u[:, :, :-1, ...]
    out[:, :, 1:, ...] -= u[:, :, 1:, ...]
    out[:, :, :-1, ...] += u[:, :, 1:, ...]
    out[:, :, :-1, ...] -= u[:, :, :-1, ...]


def laplacian(q: np.ndarray, dx: float, out: np.ndarray) -> None:
    """7-point Neumann Laplacian, componentwise; works on (...,5) or 3D."""
    out.fill(0.0)
    _accumulate_neighbor_diffs(q, out)
    out *= 1.0 / (dx * dx)


def helmholtz(u: np.ndarray, coef: np.ndarray, inv_dt: float, dx: float,
              out: np.ndarray) -> None:
    """out = inv_dt * u + coef * u - Lap(u), scalar 3D."""
    out.fill(0.0)
    _accumulate_neighbor_diffs(u, out)
    out *= -1.0 / (dx * dx)
    out += (inv_dt + coef) * u


def trq2_field(q: np.ndarray, out: np.ndarray) -> None:
    """tr(Q^2) per node into a 3D scalar array."""
    q1 = q[..., 0]
    q2 = q[..., 1]
    np.multiply(q1, q1, out=out)
    out += q2 * q2
    out += q1 * q2
    out += q[..., 2] * q[..., 2]
    out += q[..., 3] * q[..., 3]
    out += q[..., 4] * q[..., 4]
    out *= 2.0


def metric_dot(qa: np.ndarray, qb: np.ndarray) -> float:
    """sum_nodes tr(A B) without the dx^3 factor."""
    a1, a2 = qa[..., 0], qa[..., 1]
    b1, b2 = qb[..., 0], qb[..., 1]
    acc = 2.0 * (
        np.sum(a1 * b1)
        + np.sum(a2 * b2)
        + np.sum(qa[..., 2] * qb[..., 2])
        + np.sum(qa[..., 3] * qb[..., 3])
        + np.sum(qa[..., 4] * qb[..., 4])
    )
    acc += np.sum(a1 * b2) + np.sum(a2 * b1)
    return float(acc)


def elastic_energy(q: np.ndarray, dx: float) -> float:
    """Half squared-gradient energy via bond differences: (dx/2) sum |dQ|^2."""
    total = 0.0
    for axis in range(3):
        sl_hi = [slice(None)] * 3
        sl_lo = [slice(None)] * 3
        sl_hi[axis] = slice(1, None)
        sl_lo[axis] = slice(None, -1)
        d = q[tuple(sl_hi)] - q[tuple(sl_lo)]
        d1, d2 = d[..., 0], d[..., 1]
        total += 2.0 * (
            np.sum(d1 * d1)
            + np.sum(d2 * d2)
            + np.sum(d[..., 2] * d[..., 2])
            + np.sum(d[..., 3] * d[..., 3])
            + np.sum(d[..., 4] * d[..., 4])
        ) + 2.0 * np.sum(d1 * d2)
    return float(0.5 * dx * total)


def bulk_energy(q: np.ndarray, lam2: float, c_a: float, c_b: float,
                c_shift: float, dx: float) -> float:
    """sum_nodes dx^3 lam2 (c_a t2 - c_b t3 + t2^2/8 - c_shift)."""
    q1, q2, q3, q4, q5 = (q[..., i] for i in range(5))
    q6 = -q1 - q2
    t2 = 2.0 * (q1 * q1 + q2 * q2 + q1 * q2 + q3 * q3 + q4 * q4 + q5 * q5)
    det = (
        q1 * (q2 * q6 - q5 * q5)
        - q3 * (q3 * q6 - q5 * q4)
        + q4 * (q3 * q5 - q2 * q4)
    )
    t3 = 3.0 * det
    dens = c_a * t2 - c_b * t3 + 0.125 * t2 * t2 - c_shift
    return float(lam2 * dx * dx * dx * np.sum(dens))


def bulk_gradient(q: np.ndarray, lam2: float, a_half: float, b_half: float,
                  out: np.ndarray) -> None:
    """Tensor-space bulk gradient; a_half=A/2C, b_half=B/2C."""
    q1, q2, q3, q4, q5 = (q[..., i] for i in range(5))
    q6 = -q1 - q2
    t2 = 2.0 * (q1 * q1 + q2 * q2 + q1 * q2 + q3 * q3 + q4 * q4 + q5 * q5)
    c_lin = a_half + 0.5 * t2
    third = t2 / 3.0
    out[..., 0] = c_lin * q1 - b_half * (q1 * q1 + q3 * q3 + q4 * q4 - third)
    out[..., 1] = c_lin * q2 - b_half * (q3 * q3 + q2 * q2 + q5 * q5 - third)
    out[..., 2] = c_lin * q3 - b_half * (q1 * q3 + q3 * q2 + q4 * q5)
    out[..., 3] = c_lin * q4 - b_half * (q1 * q4 + q3 * q5 + q4 * q6)
    out[..., 4] = c_lin * q5 - b_half * (q3 * q4 + q2 * q5 + q5 * q6)
    out *= lam2
