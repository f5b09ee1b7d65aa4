"""Matrix-free symmetric linear algebra on tensor fields.

Two building blocks used throughout the solvers:

* ``minres`` — the minimal-residual Krylov method for symmetric (possibly
  indefinite) operators.  The core works on flat arrays with a caller
  supplied inner product, so the same code serves the field-level Newton
  systems and the per-component semi-implicit block solves.  An optional
  positive-definite preconditioner hook is accepted; the recorded residual
  history is monotone nonincreasing in the preconditioned norm.
* ``lobpcg_single_step`` / ``smallest_eigs`` — locally optimal block
  steps for the smallest eigenpairs of a symmetric operator, used to
  track unstable directions.  Each step performs a Rayleigh--Ritz solve
  over span{X, R, P}: the current block, its residuals orthogonalized
  against X, and the previous search directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import Breakdown, RankDeficient
from .grid import Field, GridGeometry, inner_product, norm

__all__ = [
    "LinearMap",
    "EigenPair",
    "MinresResult",
    "EigList",
    "minres",
    "minres_arrays",
    "lobpcg_single_step",
    "smallest_eigs",
]


@dataclass(frozen=True)
class LinearMap:
    """A symmetric operator on fields, given by its action."""

    apply: Callable[[Field], Field]
    geom: GridGeometry
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", self.geom.n_nodes * 5)

    def symmetry_defect(self, rng: np.random.Generator, probes: int = 3) -> float:
        """Max |<Au,w> - <u,Aw>| / scale over random probes (debug check)."""
        worst = 0.0
        for _ in range(probes):
            u = Field(self.geom, rng.standard_normal(self.geom.shape + (5,)))
            w = Field(self.geom, rng.standard_normal(self.geom.shape + (5,)))
            a = inner_product(self.apply(u), w)
            b = inner_product(u, self.apply(w))
            worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1.0))
        return worst


class EigenPair(NamedTuple):
    value: float  # Rayleigh quotient
    vector: Field  # unit norm under the field inner product


@dataclass
class MinresResult:
    """Solution plus convergence report; iterates as (x, relres, iters)."""

    x: object
    relres: float
    iters: int
    converged: bool
    breakdown: bool
    history: list

    def __iter__(self):
        return iter((self.x, self.relres, self.iters))


class EigList(list):
    """List of EigenPairs with convergence flags attached."""

    converged: bool = True
    iters: int = 0
    max_residual: float = 0.0


_TINY = 1e-30


def minres_arrays(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    dot: Callable[[np.ndarray, np.ndarray], float],
    tol: float = 1e-10,
    maxit: int = 500,
    apply_m: Callable[[np.ndarray], np.ndarray] | None = None,
    x0: np.ndarray | None = None,
) -> MinresResult:
    """MINRES on flat arrays with a custom inner product.

    ``apply_m``, when given, must be the action of a symmetric positive
    definite preconditioner (an approximate inverse of A); residual norms
    are then measured and minimized in the M-induced norm.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)

    r1 = b - apply_a(x) if x0 is not None else b.copy()
    y = apply_m(r1) if apply_m is not None else r1
    beta1_sq = dot(r1, y)
    if beta1_sq < 0.0:
        raise Breakdown("preconditioner is not positive definite")
    beta1 = math.sqrt(beta1_sq)

    if x0 is None:
        bnorm = beta1
    else:
        mb = apply_m(b) if apply_m is not None else b
        bnorm = math.sqrt(max(dot(b, mb), 0.0))
    if bnorm < _TINY:
        return MinresResult(np.zeros_like(b), 0.0, 0, True, False, [0.0])
    if beta1 / bnorm <= tol:
        return MinresResult(x, beta1 / bnorm, 0, True, False, [beta1 / bnorm])

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros_like(b)
    w2 = np.zeros_like(b)
    r2 = r1

    history = [beta1 / bnorm]
    relres = beta1 / bnorm
    converged = False
    broke = False
    itn = 0
    while itn < maxit:
        itn += 1
        s = 1.0 / beta
        v = s * y
        y = apply_a(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = dot(v, y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = apply_m(r2) if apply_m is not None else r2
        oldb = beta
        beta_sq = dot(r2, y)
        if beta_sq < 0.0:
            raise Breakdown("preconditioner is not positive definite")
        beta = math.sqrt(beta_sq)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = math.sqrt(gbar * gbar + beta * beta)
        if gamma < _TINY:
            # exact singularity of the tridiagonal factor
            broke = True
            break
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        relres = phibar / bnorm
        history.append(relres)
        if relres <= tol:
            converged = True
            break
        if beta < _TINY:
            # invariant subspace reached: best possible iterate in hand
            broke = True
            converged = relres <= tol
            break

    return MinresResult(x, relres, itn, converged, broke, history)


def minres(
    A: LinearMap,
    b: Field,
    tol: float = 1e-10,
    maxit: int = 500,
    M: Callable[[Field], Field] | None = None,
    x0: Field | None = None,
) -> MinresResult:
    """Field-level MINRES: solve A x = b under the field inner product."""
    geom = b.geom
    shape = geom.shape + (5,)
    dx3 = geom.dx**3

    from .backend import kernels

    def dot(u, w):
        return dx3 * kernels.metric_dot(u.reshape(shape), w.reshape(shape))

    def apply_a(u):
        return A.apply(Field(geom, u.reshape(shape))).q.ravel()

    apply_m = None
    if M is not None:

        def apply_m(u):
            return M(Field(geom, u.reshape(shape))).q.ravel()

    res = minres_arrays(
        apply_a,
        b.q.ravel(),
        dot,
        tol=tol,
        maxit=maxit,
        apply_m=apply_m,
        x0=None if x0 is None else x0.q.ravel(),
    )
    res.x = Field(geom, res.x.reshape(shape))
    return res


def _orthonormalize(
    candidates: Sequence[Field], basis: Sequence[Field], drop_tol: float = 1e-6
) -> list[Field]:
    """Modified Gram-Schmidt of normalized candidates against basis + output.

    One re-orthogonalization pass; candidates whose remainder is smaller
    than drop_tol (they lie in the span already) are dropped.
    """
    out: list[Field] = []
    for c in candidates:
        n0 = norm(c)
        if not np.isfinite(n0) or n0 < _TINY:
            continue
        v = (1.0 / n0) * c
        for _ in range(2):
            for u in basis:
                v = v - inner_product(v, u) * u
            for u in out:
                v = v - inner_product(v, u) * u
        n1 = norm(v)
        if n1 > drop_tol:
            out.append((1.0 / n1) * v)
    return out


def _ritz(S, HS, k):
    """Rayleigh-Ritz over span(S): k smallest values and coefficient columns."""
    m = len(S)
    T = np.empty((m, m))
    G = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            T[i, j] = T[j, i] = 0.5 * (
                inner_product(S[i], HS[j]) + inner_product(S[j], HS[i])
            )
            G[i, j] = G[j, i] = inner_product(S[i], S[j])
    # generalized symmetric solve via Cholesky of the (near identity) Gram
    gvals = np.linalg.eigvalsh(G)
    if gvals[0] < 1e-12 * max(1.0, gvals[-1]):
        raise np.linalg.LinAlgError("Gram matrix numerically singular")
    L = np.linalg.cholesky(G)
    Linv = np.linalg.inv(L)
    B = Linv @ T @ Linv.T
    vals, U = np.linalg.eigh(B)
    Y = Linv.T @ U
    return vals[:k], Y[:, :k]


def lobpcg_single_step(
    H: LinearMap,
    current: Sequence[EigenPair],
    previous_directions: Sequence[Field] | None = None,
    cache: dict | None = None,
) -> tuple[list[EigenPair], list[Field]]:
    """One locally optimal block step for the k smallest eigenpairs.

    Rayleigh--Ritz over span{X, R, P} where X holds the current vectors,
    R = H X - X diag(theta) orthogonalized against X, and P the previous
    search directions.  Returns the updated orthonormal pairs (ascending)
    and the new directions (the non-X component of each new vector).

    ``cache`` (optional, only valid while H stays fixed) carries the H
    images of the current block between calls to avoid recomputation.
    """
    k = len(current)
    if k == 0:
        return [], []
    X = [p.vector for p in current]

    HX = None
    if cache is not None:
        tick = cache.get("tick", 0)
        hx = cache.get("HX")
        if hx is not None and len(hx) == k and tick % 20 != 0:
            HX = hx
    if HX is None:
        HX = [H.apply(x) for x in X]
    theta = [inner_product(x, hx) for x, hx in zip(X, HX)]
    R = [hx - th * x for x, hx, th in zip(X, HX, theta)]

    Rn = _orthonormalize(R, X)
    P = list(previous_directions) if previous_directions else []
    Pn = _orthonormalize(P, list(X) + Rn) if P else []

    cands = Rn + Pn
    if not cands:
        # fixed point: X spans an invariant subspace to working precision
        order = sorted(range(k), key=lambda i: theta[i])
        pairs = [EigenPair(theta[i], X[i]) for i in order]
        if cache is not None:
            cache["HX"] = [HX[i] for i in order]
            cache["tick"] = cache.get("tick", 0) + 1
        return pairs, []

    HC = [H.apply(c) for c in cands]
    S = list(X) + cands
    HS = list(HX) + HC
    try:
        vals, Y = _ritz(S, HS, k)
    except np.linalg.LinAlgError:
        if not Pn:
            raise RankDeficient("Ritz basis degenerated even without P block")
        S = list(X) + Rn
        HS = list(HX) + HC[: len(Rn)]
        try:
            vals, Y = _ritz(S, HS, k)
        except np.linalg.LinAlgError as exc:
            raise RankDeficient("Ritz basis span{X,R} degenerated") from exc

    new_pairs: list[EigenPair] = []
    new_dirs: list[Field] = []
    new_hx: list[Field] = []
    for j in range(k):
        xq = sum((Y[i, j] * S[i].q for i in range(len(S))), np.zeros_like(S[0].q))
        hq = sum((Y[i, j] * HS[i].q for i in range(len(S))), np.zeros_like(S[0].q))
        xf = Field(H.geom, xq)
        nx = norm(xf)
        xf = (1.0 / nx) * xf
        new_pairs.append(EigenPair(float(vals[j]), xf))
        new_hx.append(Field(H.geom, hq / nx))
        # direction = contribution of the R/P blocks to the new vector
        pq = sum(
            (Y[i, j] * S[i].q for i in range(k, len(S))), np.zeros_like(S[0].q)
        )
        pf = Field(H.geom, pq)
        npf = norm(pf)
        if npf > 1e-12:
            new_dirs.append((1.0 / npf) * pf)

    if cache is not None:
        cache["HX"] = new_hx
        cache["tick"] = cache.get("tick", 0) + 1
    return new_pairs, new_dirs


def smallest_eigs(
    H: LinearMap,
    m: int,
    tol: float = 1e-8,
    maxit: int = 300,
    x0: Sequence[Field] | None = None,
    rng: np.random.Generator | None = None,
) -> EigList:
    """The m smallest eigenpairs of a symmetric operator, ascending.

    Iterates ``lobpcg_single_step`` until every pair satisfies
    ||H v - theta v|| <= tol * max(1, |theta|); on maxit exhaustion the
    best available pairs are returned with ``converged`` set to False.
    """
    if m < 1:
        raise ValueError("need m >= 1 eigenpairs")
    geom = H.geom
    if rng is None:
        rng = np.random.default_rng(8675309)

    block: list[Field] = []
    if x0:
        block = _orthonormalize(list(x0), [], drop_tol=1e-10)[:m]
    while len(block) < m:
        cand = Field(geom, rng.standard_normal(geom.shape + (5,)))
        block += _orthonormalize([cand], block, drop_tol=1e-10)
    pairs = [EigenPair(0.0, v) for v in block]

    dirs: list[Field] = []
    cache: dict = {}
    out = EigList()
    worst = math.inf
    for it in range(1, maxit + 1):
        pairs, dirs = lobpcg_single_step(H, pairs, dirs, cache)
        hx = cache.get("HX")
        worst = 0.0
        for p, h in zip(pairs, hx):
            res = norm(h - p.value * p.vector)
            worst = max(worst, res / max(1.0, abs(p.value)))
        if worst <= tol:
            # re-verify against fresh operator applications before trusting
            worst = 0.0
            fresh = [H.apply(p.vector) for p in pairs]
            for p, h in zip(pairs, fresh):
                res = norm(h - p.value * p.vector)
                worst = max(worst, res / max(1.0, abs(p.value)))
            cache["HX"] = fresh
            if worst <= tol:
                out.extend(pairs)
                out.converged = True
                out.iters = it
                out.max_residual = worst
                return out
    out.extend(pairs)
    out.converged = False
    out.iters = maxit
    out.max_residual = worst
    return out
