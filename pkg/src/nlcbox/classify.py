"""Face-pattern labeling of critical points and cuboid symmetry operations.

A converged field is summarized by one tag per wall describing the
boundary director pattern: a biaxial cross on both face diagonals
(WORS), biaxial defect lines along one opposite edge pair (BD1/BD2), a
defect-free diagonal state (D1/D2), or a defect-free state whose
director turns by pi across the face (Rn/Rs/Re/Rw).  The six tags
combine into a :class:`StateLabel` whose collapsed name identifies the
critical point, and signed-permutation symmetry operations act on both
fields and labels to produce canonical (symmetry-reduced) names.

Per-wall in-plane frames (u, v), shared by opposite walls so their tags
are directly comparable:

* top and bottom (z walls):  u = +x,  v = +y
* front and back (y walls):  u = +x,  v = +z
* left and right (x walls):  u = -y,  v = +z

``D1`` is the diagonal state with director along u+v, ``D2`` along u-v.
The R compass names the edge that carries the two splay corners of the
face: traversing the u midline west to east, a +pi director turn puts
the corners on the north edge (Rn) and a -pi turn on the south edge
(Rs); traversing the v midline south to north, +pi means west (Rw) and
-pi means east (Re).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product

import numpy as np

from .errors import GeometryMismatch
from .grid import FACES, Field
from .tensor import biaxiality, director, from_matrix, to_matrix

__all__ = [
    "TAGS",
    "FACE_FRAMES",
    "ClassifierConfig",
    "StateLabel",
    "classify_face",
    "classify_faces",
    "face_view",
    "beta2_field",
    "symmetry_ops",
    "symmetrize_field",
    "transform_field",
    "transform_label",
    "canonical_name",
    "splay_vertex_fluxes",
    "splay_vertex_count",
]

TAGS = ("WORS", "BD1", "BD2", "D1", "D2", "Rn", "Rs", "Re", "Rw", "UNKNOWN")

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])

# (u_hat, v_hat) per wall; opposite walls share a frame.
FACE_FRAMES = {
    (2, 1): (_X, _Y),
    (2, 0): (_X, _Y),
    (1, 0): (_X, _Z),
    (1, 1): (_X, _Z),
    (0, 0): (-_Y, _Z),
    (0, 1): (-_Y, _Z),
}

# Compass unit vectors in frame coordinates.
COMPASS = {
    "n": np.array([0.0, 1.0]),
    "s": np.array([0.0, -1.0]),
    "e": np.array([1.0, 0.0]),
    "w": np.array([-1.0, 0.0]),
}


def _outward_normal(face) -> np.ndarray:
    axis, side = face
    nu = np.zeros(3)
    nu[axis] = 1.0 if side else -1.0
    return nu


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds of the face classifier.

    beta_ridge: biaxiality level that counts as a defect ridge.
    diag_tol_deg: max angle between the center director and a face
        diagonal for the D tags.
    band_frac: width of the near-edge band, as a fraction of the face
        extent, searched for edge defect ridges; also sets the
        half-width of the band swept around each diagonal.
    diag_band_min: smallest diagonal-band half-width in nodes.  An
        order-reconstruction wall has vanishing biaxiality exactly on
        its centerline with the high-biaxiality shell flanking it, so
        the diagonal must be sampled as a band maximum, never as a
        single node line.
    wall_core_max: largest biaxiality allowed at the sampled diagonal
        node itself for a cross station to count.  An order
        reconstruction wall is uniaxial at its core, so a diagonal wall
        pairs a high band maximum with a low centerline value; a face
        whose interior is broadly biaxial fails this pairing.
    cover: fraction of sampled ridge stations that must exceed
        ``beta_ridge`` for a ridge to count.
    trim_frac: fraction of each ridge line trimmed at both ends before
        coverage is measured (corners are shared with other features).
    rot_tol: |total director turn| - pi tolerance for the R tags, radians.
    min_inplane: smallest in-plane director magnitude that still yields
        a usable angle sample.
    degenerate_tol: eigenvalue-gap tolerance for director extraction.
    """

    beta_ridge: float = 0.8
    diag_tol_deg: float = 15.0
    band_frac: float = 0.10
    diag_band_min: int = 3
    wall_core_max: float = 0.3
    cover: float = 0.6
    trim_frac: float = 0.15
    rot_tol: float = 0.8
    min_inplane: float = 0.3
    degenerate_tol: float = 1e-8


DEFAULT_CLASSIFIER = ClassifierConfig()

_PAIR_FIELDS = (
    ("top_bottom", ((2, 1), (2, 0))),
    ("front_back", ((1, 0), (1, 1))),
    ("left_right", ((0, 0), (0, 1))),
)


@dataclass(frozen=True)
class StateLabel:
    """Six face tags, paired by wall axis: (top,bottom), (front,back),
    (left,right)."""

    top_bottom: tuple[str, str]
    front_back: tuple[str, str]
    left_right: tuple[str, str]

    def __post_init__(self):
        for pair in (self.top_bottom, self.front_back, self.left_right):
            for tag in pair:
                if tag not in TAGS:
                    raise ValueError(f"unknown face tag {tag!r}")

    def tag(self, face) -> str:
        for name, faces in _PAIR_FIELDS:
            pair = getattr(self, name)
            for t, f in zip(pair, faces):
                if f == tuple(face):
                    return t
        raise ValueError(f"unknown face {face!r}")

    def as_dict(self) -> dict:
        out = {}
        for name, faces in _PAIR_FIELDS:
            pair = getattr(self, name)
            for t, f in zip(pair, faces):
                out[f] = t
        return out

    @property
    def name(self) -> str:
        parts = []
        for pair in (self.top_bottom, self.front_back, self.left_right):
            parts.append(pair[0] if pair[0] == pair[1] else f"{pair[0]},{pair[1]}")
        return "-".join(parts)

    def canonical(self, ops) -> str:
        return canonical_name(self, ops)

    def __str__(self) -> str:
        return self.name


def label_from_tags(tags: dict) -> StateLabel:
    """Build a StateLabel from a {(axis, side): tag} mapping."""
    kw = {}
    for name, faces in _PAIR_FIELDS:
        kw[name] = (tags[faces[0]], tags[faces[1]])
    return StateLabel(**kw)


# ----------------------------------------------------------------------
# face views
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class FaceView:
    """One wall of a field resampled into its (u, v) frame.

    ``q2`` is (nu, nv, 5) with both frame coordinates ascending; ``us``
    and ``vs`` are the frame coordinates of the samples.
    """

    face: tuple
    q2: np.ndarray
    us: np.ndarray
    vs: np.ndarray
    u3: np.ndarray
    v3: np.ndarray
    normal: np.ndarray


def _frame_axis(vec3) -> tuple[int, int]:
    """Global axis index and sign of a frame unit vector."""
    axis = int(np.argmax(np.abs(vec3)))
    return axis, int(np.sign(vec3[axis]))


def face_view(f: Field, face) -> FaceView:
    geom = f.geom
    axis, side = face
    u3, v3 = FACE_FRAMES[(axis, side)]
    qf = f.q[geom.face_slicer(axis, side)]
    rem = geom.face_axes(axis)  # global axes of qf in order
    ua, su = _frame_axis(u3)
    va, sv = _frame_axis(v3)
    if rem != (ua, va):  # frame order differs from global order
        qf = np.swapaxes(qf, 0, 1)
    coords = {0: geom.xs, 1: geom.ys, 2: geom.zs}
    us = su * coords[ua]
    vs = sv * coords[va]
    if su < 0:
        qf = qf[::-1]
        us = us[::-1]
    if sv < 0:
        qf = qf[:, ::-1]
        vs = vs[::-1]
    return FaceView(tuple(face), np.ascontiguousarray(qf), us, vs, u3, v3,
                    _outward_normal(face))


def beta2_field(f: Field) -> np.ndarray:
    """Nodewise biaxiality parameter of the field, shape (nx, ny, nz)."""
    return biaxiality(f.q)


# ----------------------------------------------------------------------
# per-face classification
# ----------------------------------------------------------------------


def _line_delta(a: float, b: float) -> float:
    """Director-line angle step b - a wrapped into [-pi/2, pi/2)."""
    return (b - a + np.pi / 2.0) % np.pi - np.pi / 2.0


def _unwrapped_turn(phis: np.ndarray) -> float | None:
    """Total continuous turn of a line-angle sequence; None if too sparse."""
    vals = phis[np.isfinite(phis)]
    if vals.size < 3:
        return None
    total = 0.0
    for a, b in zip(vals[:-1], vals[1:]):
        total += _line_delta(a, b)
    return total


def _face_angles(view: FaceView, cfg: ClassifierConfig) -> np.ndarray:
    """In-plane director line angles on the face; NaN where unusable."""
    n = director(view.q2, degenerate_tol=cfg.degenerate_tol)
    nu_c = n @ view.u3
    nv_c = n @ view.v3
    inplane = np.hypot(nu_c, nv_c)
    phi = np.arctan2(nv_c, nu_c) % np.pi
    bad = ~np.isfinite(inplane) | (inplane < cfg.min_inplane)
    phi = np.where(bad, np.nan, phi)
    return phi


def _diag_stations(nu: int, nv: int, anti: bool) -> tuple[np.ndarray, np.ndarray]:
    m = max(nu, nv)
    t = np.arange(m) / (m - 1)
    iu = np.rint(t * (nu - 1)).astype(int)
    iv = np.rint(t * (nv - 1)).astype(int)
    if anti:
        iv = (nv - 1) - iv
    return iu, iv


def _band_values(beta: np.ndarray, iu: np.ndarray, iv: np.ndarray,
                 w: int) -> np.ndarray:
    """Per-station maximum of beta over a (2w+1)-square window."""
    nu, nv = beta.shape
    out = np.empty(iu.size)
    for t in range(iu.size):
        lo_u, hi_u = max(0, iu[t] - w), min(nu, iu[t] + w + 1)
        lo_v, hi_v = max(0, iv[t] - w), min(nv, iv[t] + w + 1)
        out[t] = beta[lo_u:hi_u, lo_v:hi_v].max()
    return out


def _trimmed_cover(hits: np.ndarray, cfg: ClassifierConfig) -> float:
    """Fraction of the station sequence that hits, ends trimmed off."""
    m = hits.size
    k = int(round(cfg.trim_frac * m))
    core = hits[k : m - k] if m - 2 * k >= 3 else hits
    if core.size == 0:
        return 0.0
    return float(np.mean(core))


def _ridge_cover(values: np.ndarray, cfg: ClassifierConfig) -> float:
    """Fraction of the trimmed station sequence at or above the ridge level."""
    return _trimmed_cover(values >= cfg.beta_ridge, cfg)


def classify_face(f: Field, face, cfg: ClassifierConfig | None = None,
                  explain: bool = False):
    """Tag one wall of the field; see module docstring for the taxonomy."""
    cfg = cfg or DEFAULT_CLASSIFIER
    view = face_view(f, face)
    beta = biaxiality(view.q2)
    nu, nv = beta.shape
    info: dict = {}

    # WORS: ridges along both diagonals, sampled as a band maximum since
    # the wall centerline itself is uniaxial (beta = 0) and the high
    # beta shell flanks it.  A station only counts when the node on the
    # diagonal is itself close to uniaxial: that pairing separates a
    # wall crossing the diagonal from a broadly biaxial face interior.
    w = max(cfg.diag_band_min, int(round(cfg.band_frac * (max(nu, nv) - 1))))
    diag_cover = []
    for anti in (False, True):
        iu, iv = _diag_stations(nu, nv, anti)
        band = _band_values(beta, iu, iv, w)
        hits = (band >= cfg.beta_ridge) & (beta[iu, iv] <= cfg.wall_core_max)
        diag_cover.append(_trimmed_cover(hits, cfg))
    info["diag_cover"] = tuple(diag_cover)
    if min(diag_cover) >= cfg.cover:
        return ("WORS", info) if explain else "WORS"

    # BD: ridges along one opposite edge pair.  The band max near an edge
    # is scanned along the edge direction.
    bu = max(1, int(round(cfg.band_frac * (nu - 1))))
    bv = max(1, int(round(cfg.band_frac * (nv - 1))))
    edge_cover = {
        "w": _ridge_cover(beta[: bu + 1, :].max(axis=0), cfg),
        "e": _ridge_cover(beta[nu - 1 - bu :, :].max(axis=0), cfg),
        "s": _ridge_cover(beta[:, : bv + 1].max(axis=1), cfg),
        "n": _ridge_cover(beta[:, nv - 1 - bv :].max(axis=1), cfg),
    }
    info["edge_cover"] = edge_cover
    u_pair = min(edge_cover["w"], edge_cover["e"]) >= cfg.cover
    v_pair = min(edge_cover["s"], edge_cover["n"]) >= cfg.cover
    if u_pair and not v_pair:
        return ("BD1", info) if explain else "BD1"
    if v_pair and not u_pair:
        return ("BD2", info) if explain else "BD2"
    if u_pair and v_pair:
        return ("UNKNOWN", info) if explain else "UNKNOWN"

    # Defect-free patterns need a low-biaxiality face interior; the
    # near-edge bands are excluded so that vertex defect cores (present
    # on any tangent-anchored face) do not mask a D or R pattern.
    core = beta[bu + 1 : nu - 1 - bu, bv + 1 : nv - 1 - bv]
    info["beta_max"] = float(core.max() if core.size else beta.max())
    if info["beta_max"] >= cfg.beta_ridge:
        return ("UNKNOWN", info) if explain else "UNKNOWN"

    phi = _face_angles(view, cfg)

    # R: the director turns by pi across exactly one midline.
    turn_u = _unwrapped_turn(phi[:, (nv - 1) // 2])  # west -> east
    turn_v = _unwrapped_turn(phi[(nu - 1) // 2, :])  # south -> north
    info["turn_u"] = turn_u
    info["turn_v"] = turn_v

    def _is_pi(t):
        return t is not None and abs(abs(t) - np.pi) <= cfg.rot_tol

    if _is_pi(turn_u) and not _is_pi(turn_v):
        tag = "Rn" if turn_u > 0 else "Rs"
        return (tag, info) if explain else tag
    if _is_pi(turn_v) and not _is_pi(turn_u):
        tag = "Rw" if turn_v > 0 else "Re"
        return (tag, info) if explain else tag
    if _is_pi(turn_u) and _is_pi(turn_v):
        return ("UNKNOWN", info) if explain else "UNKNOWN"

    # D: center director within tolerance of a face diagonal.
    ic, jc = (nu - 1) // 2, (nv - 1) // 2
    block = phi[max(0, ic - 1) : ic + 2, max(0, jc - 1) : jc + 2]
    vals = block[np.isfinite(block)]
    info["center_angle"] = None
    if vals.size:
        # average line angles around the reference of the center sample
        ref = vals[0]
        mean = ref + np.mean([_line_delta(ref, v) for v in vals])
        info["center_angle"] = float(mean % np.pi)
        tol = np.deg2rad(cfg.diag_tol_deg)
        if abs(_line_delta(np.pi / 4.0, mean)) <= tol:
            return ("D1", info) if explain else "D1"
        if abs(_line_delta(3.0 * np.pi / 4.0, mean)) <= tol:
            return ("D2", info) if explain else "D2"
    return ("UNKNOWN", info) if explain else "UNKNOWN"


def classify_faces(f: Field, cfg: ClassifierConfig | None = None) -> StateLabel:
    """Tag all six walls and combine them into a StateLabel."""
    tags = {face: classify_face(f, face, cfg) for face in FACES}
    return label_from_tags(tags)


# ----------------------------------------------------------------------
# symmetry operations
# ----------------------------------------------------------------------


def symmetry_ops(kind: str = "prism") -> list[np.ndarray]:
    """Signed-permutation symmetries of the domain.

    ``prism``: the 16 operations preserving the z-axis line (square
    cross-section, any height).  ``cube``: all 48 signed permutations
    (valid only when h = 1).
    """
    ops = []
    for perm in permutations(range(3)):
        for signs in product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=int)
            for a in range(3):
                m[a, perm[a]] = signs[a]
            if kind == "cube" or perm[2] == 2:
                ops.append(m)
    if kind not in ("prism", "cube"):
        raise ValueError(f"unknown symmetry kind {kind!r}")
    return ops


def ops_for_height(h: float, tol: float = 1e-9) -> list[np.ndarray]:
    return symmetry_ops("cube" if abs(h - 1.0) <= tol else "prism")


def transform_field(f: Field, m) -> Field:
    """Push a field through a signed-permutation domain symmetry.

    The output satisfies Q'(r) = M Q(M^T r) M^T on the same grid.  Any
    operation mixing the z axis with x or y requires a cubic grid
    (nz = nx and h = 1).
    """
    m = np.asarray(m, dtype=int)
    if m.shape != (3, 3) or not np.array_equal(np.abs(m) @ np.abs(m.T), np.eye(3)):
        raise ValueError("not a signed permutation matrix")
    geom = f.geom
    perm = [int(np.argmax(np.abs(m[a]))) for a in range(3)]
    signs = [int(m[a, perm[a]]) for a in range(3)]
    if perm[2] != 2 and (geom.nz != geom.nx or abs(geom.h - 1.0) > 1e-9):
        raise GeometryMismatch(
            "symmetry mixes z with x/y but the grid is not cubic"
        )
    out = np.transpose(f.q, axes=(perm[0], perm[1], perm[2], 3))
    for a in range(3):
        if signs[a] < 0:
            out = np.flip(out, axis=a)
    mat = to_matrix(out)
    mf = m.astype(float)
    mat = np.einsum("ab,...bc,dc->...ad", mf, mat, mf)
    return Field(geom, from_matrix(mat))


def symmetrize_field(f: Field, ops) -> Field:
    """Group-orbit average of a field: the exact projector onto the
    subspace invariant under the given symmetry operations.

    Averaging keeps any field already invariant under every operation
    unchanged and removes symmetry-breaking perturbations (for example
    rounding drift accumulated while descending a symmetric branch).
    """
    if isinstance(ops, str):
        ops = symmetry_ops(ops)
    acc = np.zeros_like(f.q)
    for m in ops:
        acc += transform_field(f, m).q
    return Field(f.geom, acc / len(ops))


def _face_image(face, m) -> tuple:
    nu = _outward_normal(face)
    im = np.asarray(m, dtype=float) @ nu
    axis = int(np.argmax(np.abs(im)))
    return (axis, 1 if im[axis] > 0 else 0)


def _frame_map(face, new_face, m) -> np.ndarray:
    """2x2 signed permutation taking old (u, v) components to new ones."""
    u3, v3 = FACE_FRAMES[tuple(face)]
    nu3, nv3 = FACE_FRAMES[tuple(new_face)]
    mf = np.asarray(m, dtype=float)
    return np.array(
        [
            [nu3 @ (mf @ u3), nu3 @ (mf @ v3)],
            [nv3 @ (mf @ u3), nv3 @ (mf @ v3)],
        ]
    )


def _transform_tag(tag: str, m2: np.ndarray) -> str:
    if tag in ("WORS", "UNKNOWN"):
        return tag
    if tag in ("D1", "D2"):
        w = m2 @ (np.array([1.0, 1.0]) if tag == "D1" else np.array([1.0, -1.0]))
        return "D1" if w[0] * w[1] > 0 else "D2"
    if tag in ("BD1", "BD2"):
        w = m2 @ (np.array([1.0, 0.0]) if tag == "BD1" else np.array([0.0, 1.0]))
        return "BD1" if abs(w[0]) > 0.5 else "BD2"
    if tag[0] == "R":
        c = m2 @ COMPASS[tag[1]]
        for k, v in COMPASS.items():
            if np.allclose(c, v):
                return "R" + k
    raise ValueError(f"cannot transform tag {tag!r}")


def transform_label(label: StateLabel, m) -> StateLabel:
    """Relabel a state as seen after applying the symmetry to the field."""
    old = label.as_dict()
    new = {}
    for face, tag in old.items():
        nf = _face_image(face, m)
        new[nf] = _transform_tag(tag, _frame_map(face, nf, m))
    return label_from_tags(new)


def canonical_name(label: StateLabel, ops) -> str:
    """Lexicographically smallest name over the symmetry orbit."""
    if isinstance(ops, str):
        ops = symmetry_ops(ops)
    return min(transform_label(label, m).name for m in ops)


# ----------------------------------------------------------------------
# splay vertices
# ----------------------------------------------------------------------


def _boundary_directors(f: Field, tol: float) -> np.ndarray:
    """Continuity-oriented director vectors on wall nodes, NaN inside."""
    geom = f.geom
    mask = geom.boundary_count() > 0
    n = director(f.q, degenerate_tol=tol)
    n = np.where(mask[..., None], n, np.nan)
    ok = mask & np.all(np.isfinite(n), axis=-1)
    idx = np.argwhere(ok)
    if idx.size == 0:
        return n
    key = {tuple(i): k for k, i in enumerate(idx)}
    seen = np.zeros(len(idx), dtype=bool)
    order = []
    shape = geom.shape
    for start in range(len(idx)):
        if seen[start]:
            continue
        seen[start] = True
        stack = [start]
        while stack:
            k = stack.pop()
            order.append(k)
            i0, j0, k0 = idx[k]
            for d in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
                      (0, 0, 1), (0, 0, -1)):
                p = (i0 + d[0], j0 + d[1], k0 + d[2])
                if not all(0 <= p[a] < shape[a] for a in range(3)):
                    continue
                kn = key.get(p)
                if kn is None or seen[kn]:
                    continue
                if np.dot(n[p], n[tuple(idx[k])]) < 0.0:
                    n[p] = -n[p]
                seen[kn] = True
                stack.append(kn)
    return n


def splay_vertex_fluxes(f: Field, radius: int = 2,
                        degenerate_tol: float = 1e-6) -> dict:
    """Mean outward director flux through an octant shell at each vertex.

    The boundary director field is first oriented by continuity, so the
    eight values share one global sign (flipping the orientation negates
    all of them).  Vertices where the field radiates outward or inward
    have |flux| near the radial average 0.5; pass-through vertices sit
    near zero.
    """
    geom = f.geom
    n = _boundary_directors(f, degenerate_tol)
    r = min(radius, geom.nx - 1, geom.ny - 1, geom.nz - 1)
    fluxes = {}
    for sx, sy, sz in product((-1, 1), repeat=3):
        corner = (
            0 if sx < 0 else geom.nx - 1,
            0 if sy < 0 else geom.ny - 1,
            0 if sz < 0 else geom.nz - 1,
        )
        steps = (-sx, -sy, -sz)  # index steps moving into the domain
        total, count = 0.0, 0
        for a in range(3):
            # shell facet normal to axis a, at offset r, spanning 0..r-1
            # on the other two axes (the facet edges shared with the next
            # facet are counted once).
            for b in range(r):
                for c in range(r):
                    off = [0, 0, 0]
                    off[a] = r
                    off[(a + 1) % 3] = b
                    off[(a + 2) % 3] = c
                    node = tuple(corner[t] + steps[t] * off[t] for t in range(3))
                    vec = n[node]
                    if not np.all(np.isfinite(vec)):
                        continue
                    total += steps[a] * vec[a]
                    count += 1
        fluxes[(sx, sy, sz)] = total / count if count else np.nan
    return fluxes


def splay_vertex_count(f: Field, threshold: float = 0.35,
                       radius: int = 2) -> tuple[int, int]:
    """Counts of (positive, negative) splay vertices at |flux| >= threshold."""
    fluxes = splay_vertex_fluxes(f, radius=radius)
    vals = np.array([v for v in fluxes.values() if np.isfinite(v)])
    return int(np.sum(vals >= threshold)), int(np.sum(vals <= -threshold))
