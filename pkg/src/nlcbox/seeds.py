"""Seed fields: the diagonal-cross ansatz, edge-orientation skeletons,
and their interpolation into volume Q-tensor fields.

An almost-uniaxial candidate state is described combinatorially by a
:class:`TopologicalSkeleton`: one orientation sign per cuboid edge,
giving the tangent director on that edge.  The canonical enumeration
fixes the source vertex at (-1,-1,-1), points all four vertical edges
up, places the sink at one of three inequivalent top vertices, and
leaves three admissible orientation pairs for the free bottom edges and
three for the free top edges - 27 skeletons in total.

``skeleton_to_field`` turns a skeleton into a volume field: each wall
gets a director angle by harmonic interpolation of its edge angles (a
discrete Laplace solve with the unwrapped edge data as boundary
values), the six wall fields are blended into the volume by
transfinite inverse-distance weights, and the result is emitted as a
uniaxial tensor of order s_plus nodewise.  Wall restrictions of the
output are tangent uniaxial fields, so the anchoring energy of a seed
vanishes to quadrature accuracy.

Edge ids are ``(axis, c1, c2)`` where ``axis`` is the direction the
edge runs along and ``c1, c2`` are the signs of the two fixed
coordinates in ascending axis order; vertices are sign triples
``(sx, sy, sz)`` (the physical z coordinate is ``sz * h``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .classify import FACE_FRAMES, StateLabel, _frame_axis, label_from_tags
from .errors import SkeletonInconsistent
from .grid import FACES, Field, GridGeometry
from .linsolve import minres_arrays
from .tensor import BulkParams, uniaxial

__all__ = [
    "EDGES",
    "VERTICES",
    "TopologicalSkeleton",
    "skeleton_from_signs",
    "make_skeleton",
    "enumerate_topological_seeds",
    "transform_skeleton",
    "skeleton_label",
    "face_profile",
    "kink_number",
    "wors_seed",
    "face_angle_field",
    "skeleton_to_field",
    "uniform_seed",
    "extruded_seed",
    "default_sweep_seeds",
]

VERTICES = tuple(product((-1, 1), repeat=3))

EDGES = tuple(
    (axis, c1, c2) for axis in range(3) for c1 in (-1, 1) for c2 in (-1, 1)
)

_CANONICAL_SINKS = ((-1, -1, 1), (-1, 1, 1), (1, 1, 1))


def _vertex_edge(v, axis):
    """Id of the edge through vertex ``v`` running along ``axis``."""
    tr = [v[a] for a in range(3) if a != axis]
    return (axis, tr[0], tr[1])


def _edge_vertices(edge):
    axis, c1, c2 = edge
    tr = [a for a in range(3) if a != axis]
    lo = [0, 0, 0]
    lo[tr[0]], lo[tr[1]] = c1, c2
    hi = list(lo)
    lo[axis], hi[axis] = -1, 1
    return tuple(lo), tuple(hi)


# ----------------------------------------------------------------------
# face walks
# ----------------------------------------------------------------------


def _face_edges(face):
    """Compass -> (edge id, which frame axis the edge runs along)."""
    axis, side = face
    u3, v3 = FACE_FRAMES[tuple(face)]
    ua, su = _frame_axis(u3)
    va, sv = _frame_axis(v3)
    sigma = 1 if side else -1

    def eid(run_axis, fixed):
        tr = sorted(a for a in range(3) if a != run_axis)
        return (run_axis, fixed[tr[0]], fixed[tr[1]])

    return {
        "s": (eid(ua, {axis: sigma, va: -sv}), "u"),
        "n": (eid(ua, {axis: sigma, va: +sv}), "u"),
        "w": (eid(va, {axis: sigma, ua: -su}), "v"),
        "e": (eid(va, {axis: sigma, ua: +su}), "v"),
    }


def face_profile(edge_signs, face) -> dict:
    """Director of each boundary edge as a 2-vector in the face frame."""
    axis, side = face
    u3, v3 = FACE_FRAMES[tuple(face)]
    ua, su = _frame_axis(u3)
    va, sv = _frame_axis(v3)
    out = {}
    for compass, (eid, along) in _face_edges(face).items():
        s = edge_signs[eid]
        out[compass] = (s * su, 0) if along == "u" else (0, s * sv)
    return out


def _walk_turn(profile) -> float:
    """Total director turn (radians) around the walk s -> e -> n -> w."""
    seq = [profile[c] for c in ("s", "e", "n", "w", "s")]
    total = 0.0
    for a, b in zip(seq[:-1], seq[1:]):
        da = math.atan2(a[1], a[0])
        db = math.atan2(b[1], b[0])
        d = (db - da + math.pi) % (2.0 * math.pi) - math.pi
        total += d
    return total


def kink_number(edge_signs, face) -> int:
    """Quarter-turn winding count of the boundary director of one face."""
    total = _walk_turn(face_profile(edge_signs, face))
    k = total / (2.0 * math.pi)
    ki = int(round(k))
    if abs(k - ki) > 1e-9:
        raise SkeletonInconsistent(
            f"face {face}: boundary walk does not close (turn {total:.3f})"
        )
    return ki


def _corner_types(profile) -> dict:
    """(cu, cv) -> 'source' | 'sink' | 'transit' from the edge directors."""
    out = {}
    for cu, cv in product((-1, 1), repeat=2):
        du = profile["s" if cv < 0 else "n"][0]
        dv = profile["w" if cu < 0 else "e"][1]
        a = du * cu < 0  # u-running edge points away from the corner
        b = dv * cv < 0
        out[(cu, cv)] = "source" if (a and b) else ("sink" if not (a or b) else "transit")
    return out


def _face_pattern(edge_signs, face) -> str:
    """D/R tag of a kink-0 face induced by its edge orientations."""
    profile = face_profile(edge_signs, face)
    corners = _corner_types(profile)
    sources = [c for c, t in corners.items() if t == "source"]
    sinks = [c for c, t in corners.items() if t == "sink"]
    if len(sources) != 1 or len(sinks) != 1:
        raise SkeletonInconsistent(
            f"face {face}: boundary pattern has {len(sources)} sources "
            f"and {len(sinks)} sinks"
        )
    (su, sv), (ku, kv) = sources[0], sinks[0]
    if su == -ku and sv == -kv:
        return "D1" if su * sv > 0 else "D2"
    if sv == kv:
        return "Rs" if sv < 0 else "Rn"
    if su == ku:
        return "Rw" if su < 0 else "Re"
    raise SkeletonInconsistent(f"face {face}: corner pattern is not D or R")


# ----------------------------------------------------------------------
# skeletons
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TopologicalSkeleton:
    """Edge orientations of a candidate almost-uniaxial state.

    ``edge_signs`` follows the module-level ``EDGES`` order.  The
    canonical enumeration additionally satisfies: all vertical edges
    point up, the single source vertex lies on the bottom wall and the
    single sink vertex on the top wall.  ``kink_numbers`` (one per wall,
    ``FACES`` order) are all zero here; ``trapped_areas`` (one per
    vertex, ``VERTICES`` order) are each +-pi/2, positive at the source
    and negative at the sink.
    """

    edge_signs: tuple[int, ...]
    source_vertex: tuple[int, int, int]
    sink_vertex: tuple[int, int, int]
    kink_numbers: tuple[int, ...]
    trapped_areas: tuple[float, ...]

    def sign(self, edge) -> int:
        return self.edge_signs[EDGES.index(tuple(edge))]

    def signs_map(self) -> dict:
        return dict(zip(EDGES, self.edge_signs))

    def is_canonical(self) -> bool:
        vert_up = all(self.sign((2, c1, c2)) == 1 for c1 in (-1, 1) for c2 in (-1, 1))
        return (
            vert_up
            and self.source_vertex[2] == -1
            and self.sink_vertex[2] == 1
        )


def skeleton_from_signs(edge_signs, require_canonical: bool = False) -> TopologicalSkeleton:
    """Validate edge orientations and derive the skeleton invariants.

    Raises SkeletonInconsistent if any wall has a nonzero kink number,
    if the vertex flow does not have exactly one source and one sink,
    or (with ``require_canonical``) if the canonical-form constraints
    are violated.
    """
    if isinstance(edge_signs, dict):
        missing = set(EDGES) - set(map(tuple, edge_signs))
        if missing:
            raise SkeletonInconsistent(f"missing edges: {sorted(missing)}")
        signs = {tuple(k): int(v) for k, v in edge_signs.items()}
    else:
        seq = [int(s) for s in edge_signs]
        if len(seq) != 12:
            raise SkeletonInconsistent("need 12 edge signs")
        signs = dict(zip(EDGES, seq))
    if any(s not in (-1, 1) for s in signs.values()):
        raise SkeletonInconsistent("edge signs must be +-1")

    kinks = tuple(kink_number(signs, face) for face in FACES)
    if any(kinks):
        bad = [f for f, k in zip(FACES, kinks) if k]
        raise SkeletonInconsistent(f"nonzero kink number on faces {bad}")
    for face in FACES:
        _face_pattern(signs, face)  # raises if not D/R

    sources, sinks = [], []
    for v in VERTICES:
        outs = [signs[_vertex_edge(v, a)] == -v[a] for a in range(3)]
        if all(outs):
            sources.append(v)
        elif not any(outs):
            sinks.append(v)
    if len(sources) != 1 or len(sinks) != 1:
        raise SkeletonInconsistent(
            f"vertex flow has {len(sources)} sources and {len(sinks)} sinks"
        )

    areas = tuple(
        -v[0] * v[1] * v[2]
        * signs[_vertex_edge(v, 0)]
        * signs[_vertex_edge(v, 1)]
        * signs[_vertex_edge(v, 2)]
        * (math.pi / 2.0)
        for v in VERTICES
    )

    sk = TopologicalSkeleton(
        edge_signs=tuple(signs[e] for e in EDGES),
        source_vertex=sources[0],
        sink_vertex=sinks[0],
        kink_numbers=kinks,
        trapped_areas=areas,
    )
    if require_canonical and not sk.is_canonical():
        raise SkeletonInconsistent(
            "not in canonical form (vertical edges up, source on the "
            "bottom wall, sink on the top wall)"
        )
    return sk


def make_skeleton(sink, bottom_choice, top_choice) -> TopologicalSkeleton:
    """Canonical skeleton from the sink vertex and the two free-edge choices.

    ``bottom_choice`` gives the orientation signs of the two bottom
    edges not touching the source (the x-running edge at y=+1 and the
    y-running edge at x=+1); ``top_choice`` gives the signs of the two
    top edges not touching the sink (x-running at y=-sy, y-running at
    x=-sx).  Admissible choices keep every wall at kink number 0.
    """
    sx, sy, sz = sink
    if sz != 1:
        raise SkeletonInconsistent("sink must lie on the top wall")
    fb_x, fb_y = bottom_choice
    ft_x, ft_y = top_choice
    signs = {
        (0, -1, -1): 1,
        (1, -1, -1): 1,
        (0, 1, -1): fb_x,
        (1, 1, -1): fb_y,
        (2, -1, -1): 1,
        (2, -1, 1): 1,
        (2, 1, -1): 1,
        (2, 1, 1): 1,
        (0, sy, 1): sx,
        (1, sx, 1): sy,
        (0, -sy, 1): ft_x,
        (1, -sx, 1): ft_y,
    }
    return skeleton_from_signs(signs, require_canonical=True)


def enumerate_topological_seeds() -> list[TopologicalSkeleton]:
    """The 27 canonical skeletons: 3 sink placements x 3 bottom x 3 top."""
    out = []
    for sink in _CANONICAL_SINKS:
        sx, sy, _ = sink
        bottoms = ((1, 1), (1, -1), (-1, 1))
        tops = ((sx, sy), (sx, -sy), (-sx, sy))
        for b in bottoms:
            for t in tops:
                out.append(make_skeleton(sink, b, t))
    return out


def transform_skeleton(sk: TopologicalSkeleton, m) -> TopologicalSkeleton:
    """Push a skeleton through a signed-permutation symmetry."""
    m = np.asarray(m, dtype=int)
    signs = sk.signs_map()
    new = {}
    for (axis, c1, c2), s in signs.items():
        d = np.zeros(3, dtype=int)
        d[axis] = s
        p = np.zeros(3, dtype=int)
        tr = [a for a in range(3) if a != axis]
        p[tr[0]], p[tr[1]] = c1, c2
        dn, pn = m @ d, m @ p
        new_axis = int(np.argmax(np.abs(dn)))
        ntr = [a for a in range(3) if a != new_axis]
        new[(new_axis, int(pn[ntr[0]]), int(pn[ntr[1]]))] = int(dn[new_axis])
    return skeleton_from_signs(new)


def skeleton_label(sk: TopologicalSkeleton) -> StateLabel:
    """Wall tags induced directly by the edge orientations."""
    signs = sk.signs_map()
    return label_from_tags({face: _face_pattern(signs, face) for face in FACES})


# ----------------------------------------------------------------------
# seed fields
# ----------------------------------------------------------------------


def wors_seed(geom: GridGeometry, bulk: BulkParams) -> Field:
    """Diagonal-cross candidate: Q11 = p + B/3C, Q22 = -p + B/3C with
    p = -(B/3C) x y, off-diagonal components zero, z-invariant."""
    c = bulk.B / (3.0 * bulk.C)
    x, y, _ = geom.coordinates()
    p = -c * x * y
    q = np.zeros(geom.shape + (5,))
    q[..., 0] = p + c
    q[..., 1] = -p + c
    return Field(geom, q)


def _laplace_dirichlet(bc: np.ndarray) -> np.ndarray:
    """Solve the 5-point Laplace equation with the boundary of ``bc`` as
    Dirichlet data; returns the full grid including the boundary."""
    nu, nv = bc.shape
    rhs = np.zeros((nu - 2, nv - 2))
    rhs[0, :] += bc[0, 1:-1]
    rhs[-1, :] += bc[-1, 1:-1]
    rhs[:, 0] += bc[1:-1, 0]
    rhs[:, -1] += bc[1:-1, -1]

    def apply_a(t):
        out = 4.0 * t
        out[1:, :] -= t[:-1, :]
        out[:-1, :] -= t[1:, :]
        out[:, 1:] -= t[:, :-1]
        out[:, :-1] -= t[:, 1:]
        return out

    res = minres_arrays(
        apply_a,
        rhs,
        dot=lambda a, b: float(np.sum(a * b)),
        tol=1e-12,
        maxit=40 * (nu + nv),
    )
    full = bc.copy()
    full[1:-1, 1:-1] = res.x
    return full


def _angles_from_profile(profile, nu: int, nv: int) -> np.ndarray:
    """Harmonic in-face director angle with unwrapped edge data.

    The boundary walk visits the edges in the order s, e, n, w; each
    edge contributes its constant director angle, unwrapped so steps
    between consecutive edges stay within a half turn.  A nonzero net
    turn around the walk is rejected.
    """
    raw = {c: math.atan2(profile[c][1], profile[c][0]) for c in ("s", "e", "n", "w")}
    unwrapped = {}
    prev = None
    for c in ("s", "e", "n", "w"):
        if prev is None:
            unwrapped[c] = raw[c]
        else:
            step = (raw[c] - unwrapped[prev] + math.pi) % (2.0 * math.pi) - math.pi
            unwrapped[c] = unwrapped[prev] + step
        prev = c
    closure = (raw["s"] - unwrapped["w"] + math.pi) % (2.0 * math.pi) - math.pi
    if abs(unwrapped["w"] + closure - unwrapped["s"]) > 1e-9:
        raise SkeletonInconsistent("face boundary angle walk does not close")

    bc = np.zeros((nu, nv))
    bc[1:-1, 0] = unwrapped["s"]
    bc[-1, 1:-1] = unwrapped["e"]
    bc[1:-1, -1] = unwrapped["n"]
    bc[0, 1:-1] = unwrapped["w"]
    bc[-1, 0] = 0.5 * (unwrapped["s"] + unwrapped["e"])
    bc[-1, -1] = 0.5 * (unwrapped["e"] + unwrapped["n"])
    bc[0, -1] = 0.5 * (unwrapped["n"] + unwrapped["w"])
    bc[0, 0] = 0.5 * (unwrapped["w"] + unwrapped["s"])
    return _laplace_dirichlet(bc)


def _face_dims(geom: GridGeometry, face) -> tuple[int, int]:
    axis, _ = face
    u3, v3 = FACE_FRAMES[tuple(face)]
    dims = geom.shape
    return dims[_frame_axis(u3)[0]], dims[_frame_axis(v3)[0]]


def face_angle_field(sk: TopologicalSkeleton, geom: GridGeometry, face) -> np.ndarray:
    """Harmonic director angle of one wall, frame coordinates ascending."""
    profile = face_profile(sk.signs_map(), face)
    nu, nv = _face_dims(geom, face)
    return _angles_from_profile(profile, nu, nv)


def _frame_to_global(arr: np.ndarray, face) -> np.ndarray:
    """Reorder a (nu, nv, ...) frame-ordered wall array into global axis
    order along the wall's two free axes."""
    axis, _ = face
    u3, v3 = FACE_FRAMES[tuple(face)]
    ua, su = _frame_axis(u3)
    va, sv = _frame_axis(v3)
    if su < 0:
        arr = arr[::-1]
    if sv < 0:
        arr = arr[:, ::-1]
    if ua > va:
        arr = np.swapaxes(arr, 0, 1)
    return arr


def _face_director(sk, geom, face) -> np.ndarray:
    theta = face_angle_field(sk, geom, face)
    u3, v3 = FACE_FRAMES[tuple(face)]
    n = np.cos(theta)[..., None] * u3 + np.sin(theta)[..., None] * v3
    return _frame_to_global(n, face)


def skeleton_to_field(
    sk: TopologicalSkeleton,
    geom: GridGeometry,
    bulk: BulkParams,
    mode: str = "interp",
    params=None,
    dirichlet_steps: int = 80,
) -> Field:
    """Interpolate a skeleton into a volume field.

    ``interp`` blends the six harmonic wall fields with transfinite
    inverse-distance weights (tensor-level blending, so the director
    sign ambiguity never enters).  ``dirichlet`` additionally descends
    the full energy over interior nodes with the walls pinned, which
    needs ``params``.
    """
    if mode not in ("interp", "dirichlet"):
        raise ValueError(f"unknown mode {mode!r}")
    sp = bulk.s_plus
    x, y, z = geom.coordinates()
    h = geom.h
    dists = {
        (0, 0): x + 1.0,
        (0, 1): 1.0 - x,
        (1, 0): y + 1.0,
        (1, 1): 1.0 - y,
        (2, 0): z + h,
        (2, 1): h - z,
    }
    eps = 1e-9 * geom.dx
    acc = np.zeros(geom.shape + (5,))
    wsum = np.zeros(geom.shape)
    for face in FACES:
        axis, _ = face
        n2 = _face_director(sk, geom, face)
        q2 = uniaxial(n2, sp)
        q3 = np.expand_dims(q2, axis=axis)
        w = np.ones(geom.shape)
        for other in FACES:
            if other != face:
                w = w * (dists[other] + eps)
        acc += w[..., None] * q3
        wsum += w
    q = acc / wsum[..., None]
    f = Field(geom, q)
    if mode == "dirichlet":
        if params is None:
            raise ValueError("dirichlet mode needs model parameters")
        f = _pinned_descent(f, params, dirichlet_steps)
    return f


def _pinned_descent(f: Field, params, steps: int) -> Field:
    """Gradient descent over interior nodes only, walls held fixed."""
    from .energy import gradient

    interior = (f.geom.boundary_count() == 0)[..., None]
    q = f.q.copy()
    prev_q = None
    prev_g = None
    dt = 0.05
    for _ in range(steps):
        g = gradient(Field(f.geom, q), params).q * interior
        gn2 = float(np.sum(g * g))
        if gn2 < 1e-20:
            break
        if prev_g is not None:
            dq = q - prev_q
            dg = g - prev_g
            denom = float(np.sum(dg * dg))
            if denom > 1e-20:
                dt = min(max(abs(float(np.sum(dq * dg))) / denom, 1e-4), 10.0)
        prev_q, prev_g = q.copy(), g
        q = q - dt * g
    return Field(f.geom, q)


def uniform_seed(geom: GridGeometry, bulk: BulkParams, axis: int) -> Field:
    """Spatially constant uniaxial field along a coordinate axis."""
    n = np.zeros(geom.shape + (3,))
    n[..., axis] = 1.0
    return Field(geom, uniaxial(n, bulk.s_plus))


_EXTRUDE_PROFILES = {
    "d1": {"s": (1, 0), "n": (1, 0), "w": (0, 1), "e": (0, 1)},
    "d2": {"s": (1, 0), "n": (1, 0), "w": (0, -1), "e": (0, -1)},
}


def extruded_seed(geom: GridGeometry, bulk: BulkParams, pattern: str = "d1") -> Field:
    """z-invariant uniaxial seed whose cross-section carries a harmonic
    diagonal director pattern (``d1`` along x+y, ``d2`` along x-y)."""
    profile = _EXTRUDE_PROFILES[pattern]
    theta = _angles_from_profile(profile, geom.nx, geom.ny)
    n = np.zeros((geom.nx, geom.ny, 3))
    n[..., 0] = np.cos(theta)
    n[..., 1] = np.sin(theta)
    q2 = uniaxial(n, bulk.s_plus)
    q = np.broadcast_to(q2[:, :, None, :], geom.shape + (5,)).copy()
    return Field(geom, q)


def default_sweep_seeds(geom: GridGeometry, bulk: BulkParams) -> dict:
    """Named seed set used by parameter sweeps: the diagonal-cross
    ansatz, all 27 canonical skeleton seeds, uniform axis fields, and
    the two extruded diagonal composites."""
    seeds = {"wors": wors_seed(geom, bulk)}
    for i, sk in enumerate(enumerate_topological_seeds()):
        seeds[f"topo{i:02d}"] = skeleton_to_field(sk, geom, bulk)
    for axis, name in ((0, "x"), (1, "y"), (2, "z")):
        seeds[f"uniform_{name}"] = uniform_seed(geom, bulk, axis)
    seeds["extrude_d1"] = extruded_seed(geom, bulk, "d1")
    seeds["extrude_d2"] = extruded_seed(geom, bulk, "d2")
    return seeds
