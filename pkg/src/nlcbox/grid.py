"""Uniform cuboid grid, tensor fields on it, and the discrete operators.

The domain is [-1,1] x [-1,1] x [-h,h] sampled on a uniform grid with
spacing dx = 2/(nx-1) shared by all axes; the half-height snaps to the
nearest realizable value (nz-1) dx / 2.  Fields store one Q-tensor per
node in a C-contiguous (nx, ny, nz, 5) array.

Discrete conventions, chosen so the pair (energy, gradient) is exactly
variational:

* inner product  <f,g> = dx^3 sum_nodes tr(F G)   (uniform node weight)
* Laplacian: 7-point stencil where each axis contributes the sum of
  (neighbor - center)/dx^2 over existing neighbors.  At a wall the missing
  neighbor is simply dropped (homogeneous-Neumann flux closure), which
  makes the operator self-adjoint and negative semidefinite under the
  uniform inner product.
* surface quadrature: per-face trapezoid weights dx^2 * {1, 1/2, 1/4};
  edge and corner nodes contribute once per adjacent face.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import GeometryMismatch, TooCoarse
from .tensor import tensor_dot

__all__ = [
    "GridGeometry",
    "Field",
    "build_grid",
    "laplacian",
    "inner_product",
    "norm",
    "surface_integral",
    "FACES",
    "FACE_NAMES",
]

# (axis, side): side 0 is the low wall, 1 the high wall.
FACES = ((0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1))
FACE_NAMES = {
    (0, 0): "left",
    (0, 1): "right",
    (1, 0): "front",
    (1, 1): "back",
    (2, 0): "bottom",
    (2, 1): "top",
}


class GridGeometry:
    """Immutable description of the grid plus cached quadrature tables."""

    __slots__ = (
        "nx",
        "ny",
        "nz",
        "dx",
        "h",
        "xs",
        "ys",
        "zs",
        "_face_w2d",
        "_boundary_count",
    )

    def __init__(self, nx: int, ny: int, nz: int, dx: float, h: float):
        self.nx = nx
        self.ny = ny
        self.nz = nz
        self.dx = dx
        self.h = h
        self.xs = np.linspace(-1.0, 1.0, nx)
        self.ys = np.linspace(-1.0, 1.0, ny)
        self.zs = np.linspace(-h, h, nz)
        self._face_w2d = {}
        self._boundary_count = None

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def key(self):
        return (self.nx, self.ny, self.nz, self.dx)

    def __eq__(self, other):
        return isinstance(other, GridGeometry) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return (
            f"GridGeometry(nx={self.nx}, ny={self.ny}, nz={self.nz}, "
            f"dx={self.dx:.6g}, h={self.h:.6g})"
        )

    def coordinates(self):
        """Meshgrid arrays X, Y, Z of shape (nx, ny, nz)."""
        return np.meshgrid(self.xs, self.ys, self.zs, indexing="ij")

    def face_slicer(self, axis: int, side: int):
        """Index tuple selecting one wall plane of a node array."""
        idx = [slice(None)] * 3
        idx[axis] = -1 if side else 0
        return tuple(idx)

    def face_axes(self, axis: int) -> tuple[int, int]:
        """In-plane (u, v) axes of a face, in global axis order."""
        return tuple(a for a in range(3) if a != axis)

    def face_weights(self, axis: int) -> np.ndarray:
        """Trapezoid surface weights (dx^2 scaled) on one wall plane."""
        if axis not in self._face_w2d:
            ua, va = self.face_axes(axis)
            dims = self.shape
            tu = np.ones(dims[ua])
            tu[0] = tu[-1] = 0.5
            tv = np.ones(dims[va])
            tv[0] = tv[-1] = 0.5
            self._face_w2d[axis] = (self.dx * self.dx) * np.outer(tu, tv)
        return self._face_w2d[axis]

    def boundary_count(self) -> np.ndarray:
        """Per-node count of walls the node lies on (0..3)."""
        if self._boundary_count is None:
            c = np.zeros(self.shape, dtype=np.int8)
            for axis, side in FACES:
                c[self.face_slicer(axis, side)] += 1
            self._boundary_count = c
        return self._boundary_count

    def volume(self) -> float:
        """Continuum volume of the cuboid, 8 h."""
        return 8.0 * self.h

    def surface_area(self) -> float:
        """Continuum area of the boundary, 8 + 16 h."""
        return 8.0 + 16.0 * self.h


def build_grid(nx: int, ny: int, h: float, dx_policy: str = "snap") -> GridGeometry:
    """Create the uniform grid; h snaps to the nearest (nz-1) dx / 2.

    ``dx_policy`` currently admits only "snap" and exists to pin the
    snapping semantics in the signature.
    """
    if dx_policy != "snap":
        raise ValueError(f"unknown dx_policy {dx_policy!r}")
    if nx != ny:
        raise ValueError("cross-section is the unit square: nx must equal ny")
    if nx < 5 or ny < 5:
        raise TooCoarse("need at least 5 nodes per axis")
    if not (h > 0.0):
        raise ValueError("half-height h must be positive")
    dx = 2.0 / (nx - 1)
    nz = int(round(2.0 * h / dx)) + 1
    if nz < 5:
        raise TooCoarse(
            f"h={h} with dx={dx:.4g} leaves only {nz} nodes along z (need >= 5)"
        )
    h_real = 0.5 * (nz - 1) * dx
    return GridGeometry(nx, ny, nz, dx, h_real)


class Field:
    """A Q-tensor per node: thin wrapper over an (nx, ny, nz, 5) array."""

    __slots__ = ("geom", "q")

    def __init__(self, geom: GridGeometry, q: np.ndarray | None = None):
        self.geom = geom
        if q is None:
            q = np.zeros(geom.shape + (5,))
        else:
            q = np.ascontiguousarray(q, dtype=float)
            if q.shape != geom.shape + (5,):
                raise GeometryMismatch(
                    f"values shaped {q.shape}, geometry wants {geom.shape + (5,)}"
                )
        self.q = q

    def copy(self) -> "Field":
        return Field(self.geom, self.q.copy())

    def checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.q).tobytes()).hexdigest()

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.q)))

    def _check(self, other: "Field"):
        if self.geom != other.geom:
            raise GeometryMismatch("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.geom, self.q + other.q)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.geom, self.q - other.q)

    def __mul__(self, a: float) -> "Field":
        return Field(self.geom, self.q * float(a))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.geom, -self.q)


def inner_product(f: Field, g: Field) -> float:
    """<f,g> = dx^3 sum_nodes tr(F G)."""
    f._check(g)
    dx = f.geom.dx
    return float(dx * dx * dx * np.sum(tensor_dot(f.q, g.q)))


def norm(f: Field) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def laplacian(f: Field) -> Field:
    """Componentwise 7-point Neumann Laplacian (flux closure at walls)."""
    from .backend import kernels

    out = np.empty_like(f.q)
    kernels.laplacian(f.q, f.geom.dx, out)
    return Field(f.geom, out)


def surface_integral(geom: GridGeometry, values: np.ndarray) -> float:
    """Trapezoid-rule integral of a nodal scalar over all six walls.

    Edge and corner nodes contribute once per adjacent face, so a constant
    1 integrates to the full area 8 + 16 h.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != geom.shape:
        raise GeometryMismatch(
            f"scalar shaped {values.shape}, geometry wants {geom.shape}"
        )
    total = 0.0
    for axis, side in FACES:
        w = geom.face_weights(axis)
        total += float(np.sum(w * values[geom.face_slicer(axis, side)]))
    return total
