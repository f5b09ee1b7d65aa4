"""Index-k saddle dynamics on the tensor field energy landscape.

The driver ``run_hisd`` seeks a critical point whose Morse index equals a
target k.  It evolves the field by a reflected force
``(I - 2 sum_i v_i v_i^T) grad E`` where the v_i track the k most
unstable Hessian directions, using:

* a semi-implicit step: the stiff linear parts (Laplacian, bulk quadratic
  coefficient frozen at the current iterate, and the non-coupling
  anchoring diagonal) move to the left-hand side, giving five decoupled
  symmetric scalar systems per step, each solved by preconditioned
  MINRES; the step size comes from a bounded Barzilai-Borwein rule;
* direction renewal by one locally optimal block eigenstep per move;
* an inexact-Newton tail once the force is small, with residual forcing
  eta = min(0.5, sqrt(|grad E|)) and a fallback to the semi-implicit
  phase when a Newton step stagnates.

``morse_index`` certifies the index of a converged point by counting
negative Hessian eigenvalues outside a zero-mode safety band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .backend import kernels
from .energy import ModelParams, boundary_jacobian_diag, energy, gradient, hess_vec
from .errors import (
    EnergyNaN,
    IndexAmbiguous,
    LinearSolveFailed,
    MaxStepsExceeded,
    NonFinite,
    StagnationFallback,
)
from .grid import Field, inner_product, norm
from .linsolve import EigenPair, LinearMap, lobpcg_single_step, minres, minres_arrays, smallest_eigs

__all__ = [
    "SolverConfig",
    "SaddleState",
    "TraceRecord",
    "bb_stepsize",
    "make_state",
    "sd_step",
    "newton_step",
    "run_hisd",
    "newton_polish",
    "morse_index",
    "hessian_map",
]


def _default_eta(grad_norm: float) -> float:
    return min(0.5, math.sqrt(grad_norm))


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the hybrid saddle search."""

    k: int = 0
    dt_init: float = 0.1
    dt_min: float = 1e-6
    dt_max: float = 1.0
    switch_tol: float = 1e-3
    final_tol: float = 1e-6
    eta: Callable[[float], float] = _default_eta
    max_steps: int = 5000
    lin_tol: float = 1e-8
    lin_maxit: int = 600
    eig_tol: float = 1e-6
    eig_maxit: int = 500
    certify: bool = True
    max_backtracks: int = 40

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("target index k must be nonnegative")
        if not (0.0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not (self.final_tol < self.switch_tol):
            raise ValueError("need final_tol < switch_tol")


@dataclass
class SaddleState:
    """One iterate: the field plus everything recomputed after each step."""

    q: Field
    directions: list[Field]
    rayleigh: list[float]
    grad_norm: float
    energy: float
    e_bc: float
    step_count: int
    dt: float
    grad: Field
    p_dirs: list[Field] = field(default_factory=list)
    converged: bool = False
    index: int | None = None
    flags: tuple[str, ...] = ()


class TraceRecord(NamedTuple):
    step: int
    energy: float
    e_bc: float
    grad_norm: float
    dt: float
    rayleigh: tuple


def hessian_map(q: Field, params: ModelParams) -> LinearMap:
    """The energy Hessian at q as a symmetric operator."""
    return LinearMap(lambda v: hess_vec(q, v, params), q.geom)


def bb_stepsize(dq: Field, dg: Field, bounds: tuple[float, float, float]) -> float:
    """Barzilai-Borwein step |<dq,dg>|/<dg,dg>, clamped to [dt_min, dt_max].

    ``bounds`` is (dt_min, dt_init, dt_max); dt_init is the fallback when
    the gradient difference vanishes.
    """
    dt_min, dt_init, dt_max = bounds
    denom = inner_product(dg, dg)
    if denom < 1e-20:
        return dt_init
    dt = abs(inner_product(dq, dg)) / denom
    return min(max(dt, dt_min), dt_max)


def _reflect(g: Field, directions: Sequence[Field]) -> Field:
    """(I - 2 sum v v^T) g under the field inner product."""
    if not directions:
        return g
    rq = g.q.copy()
    for v in directions:
        rq -= (2.0 * inner_product(v, g)) * v.q
    return Field(g.geom, rq)


def make_state(
    q: Field,
    params: ModelParams,
    directions: Sequence[Field] = (),
    rayleigh: Sequence[float] = (),
    step_count: int = 0,
    dt: float | None = None,
    p_dirs: Sequence[Field] = (),
) -> SaddleState:
    """Build a consistent state: energy and gradient recomputed from q."""
    e = energy(q, params)
    g = gradient(q, params)
    return SaddleState(
        q=q,
        directions=list(directions),
        rayleigh=list(rayleigh),
        grad_norm=norm(g),
        energy=e.total,
        e_bc=e.e_bc,
        step_count=step_count,
        dt=0.1 if dt is None else dt,
        grad=g,
        p_dirs=list(p_dirs),
    )


def _solve_blocks(
    s: SaddleState,
    params: ModelParams,
    cfg: SolverConfig,
    r: Field,
    dt: float,
    coef_base: np.ndarray,
    bdiag: np.ndarray,
    stencil_diag: np.ndarray,
) -> np.ndarray:
    """The five decoupled semi-implicit solves: delta with
    (1/dt + coef_base + bdiag_c - Lap) delta_c = -r_c for each component."""
    geom = s.q.geom
    shape = geom.shape
    inv_dt = 1.0 / dt
    delta = np.empty_like(s.q.q)
    work = np.empty(shape)
    for c in range(5):
        coef = coef_base + bdiag[c]

        def apply_a(u, coef=coef):
            kernels.helmholtz(u.reshape(shape), coef, inv_dt, geom.dx, work)
            return work.ravel().copy()

        diag = inv_dt + coef + stencil_diag
        floor = 1e-3 * max(float(np.median(np.abs(diag))), 1e-12)
        inv_diag = 1.0 / np.maximum(diag, floor)
        inv_diag_flat = inv_diag.ravel()

        res = minres_arrays(
            apply_a,
            -r.q[..., c].ravel(),
            lambda a, b: float(a @ b),
            tol=cfg.lin_tol,
            maxit=cfg.lin_maxit,
            apply_m=lambda u: u * inv_diag_flat,
        )
        if not res.converged and res.relres > 1e-4:
            raise LinearSolveFailed(
                f"component {c} block solve stalled at relres {res.relres:.3g}"
            )
        delta[..., c] = res.x.reshape(shape)
    return delta


def sd_step(s: SaddleState, params: ModelParams, cfg: SolverConfig) -> SaddleState:
    """One semi-implicit move along the reflected force.

    For k = 0 the step is accepted only if the energy does not increase
    (the step size is halved otherwise), making the dynamics monotone.
    """
    geom = s.q.geom
    r = _reflect(s.grad, s.directions)

    t2 = np.empty(geom.shape)
    kernels.trq2_field(s.q.q, t2)
    bulkc = params.bulk
    coef_base = params.lam2 * (bulkc.A / (2.0 * bulkc.C) + 0.5 * t2)
    bdiag = boundary_jacobian_diag(geom, params)
    stencil_diag = (6.0 - geom.boundary_count()) / (geom.dx * geom.dx)

    dt = s.dt
    qn = None
    e_new = None
    for attempt in range(cfg.max_backtracks + 1):
        delta = _solve_blocks(s, params, cfg, r, dt, coef_base, bdiag, stencil_diag)
        cand = Field(geom, s.q.q + delta)
        try:
            e_cand = energy(cand, params)
        except NonFinite as exc:
            raise EnergyNaN("energy became non-finite during a step") from exc
        if not math.isfinite(e_cand.total):
            raise EnergyNaN(f"energy overflowed to {e_cand.total}")
        if cfg.k == 0 and e_cand.total > s.energy + 1e-12:
            dt *= 0.5
            continue
        qn, e_new = cand, e_cand
        break
    if qn is None:
        raise StagnationFallback(
            f"monotone step not found after {cfg.max_backtracks} halvings"
        )

    gn = gradient(qn, params)
    directions = s.directions
    rayleigh = s.rayleigh
    p_dirs = s.p_dirs
    if cfg.k > 0 and directions:
        H = hessian_map(qn, params)
        pairs = [EigenPair(th, v) for th, v in zip(rayleigh, directions)]
        pairs, p_dirs = lobpcg_single_step(H, pairs, p_dirs)
        directions = [p.vector for p in pairs]
        rayleigh = [p.value for p in pairs]

    rn = _reflect(gn, directions)
    dt_next = bb_stepsize(
        Field(geom, delta), rn - r, (cfg.dt_min, cfg.dt_init, cfg.dt_max)
    )
    return SaddleState(
        q=qn,
        directions=directions,
        rayleigh=rayleigh,
        grad_norm=norm(gn),
        energy=e_new.total,
        e_bc=e_new.e_bc,
        step_count=s.step_count + 1,
        dt=dt_next,
        grad=gn,
        p_dirs=p_dirs,
        flags=s.flags,
    )


def newton_step(s: SaddleState, params: ModelParams, cfg: SolverConfig) -> SaddleState:
    """One inexact-Newton move: solve H dq = -grad to forcing accuracy.

    Accepts when the gradient norm drops, halving the step up to five
    times; raises StagnationFallback otherwise.
    """
    geom = s.q.geom
    eta = cfg.eta(s.grad_norm)
    H = hessian_map(s.q, params)
    res = minres(H, -1.0 * s.grad, tol=eta, maxit=cfg.lin_maxit)
    if res.relres > 0.9:
        raise StagnationFallback(
            f"Newton system solve made no progress (relres {res.relres:.3g})"
        )
    scale = 1.0
    for _ in range(6):
        cand = Field(geom, s.q.q + scale * res.x.q)
        try:
            gn = gradient(cand, params)
        except NonFinite:
            scale *= 0.5
            continue
        gnn = norm(gn)
        if gnn < s.grad_norm:
            e_new = energy(cand, params)
            return SaddleState(
                q=cand,
                directions=s.directions,
                rayleigh=s.rayleigh,
                grad_norm=gnn,
                energy=e_new.total,
                e_bc=e_new.e_bc,
                step_count=s.step_count + 1,
                dt=s.dt,
                grad=gn,
                p_dirs=s.p_dirs,
                flags=s.flags,
            )
        scale *= 0.5
    raise StagnationFallback("Newton step rejected after five halvings")


def _emit(sink, s: SaddleState):
    if sink is not None:
        sink(
            TraceRecord(
                s.step_count,
                s.energy,
                s.e_bc,
                s.grad_norm,
                s.dt,
                tuple(s.rayleigh),
            )
        )


def run_hisd(
    q0: Field,
    v0: Sequence[Field] | None,
    cfg: SolverConfig,
    params: ModelParams,
    sink: Callable[[TraceRecord], None] | None = None,
) -> SaddleState:
    """Drive the hybrid dynamics to a critical point of target index cfg.k.

    Semi-implicit steps run while |grad E| >= switch_tol, then Newton
    steps until final_tol, falling back to a semi-implicit step whenever
    Newton stagnates.  If ``cfg.certify`` the Morse index of the result
    is computed; a mismatch with cfg.k sets the "not_target_index" flag.
    """
    if not np.all(np.isfinite(q0.q)):
        raise NonFinite("initial field contains NaN or Inf")

    directions: list[Field] = []
    rayleigh: list[float] = []
    if cfg.k > 0:
        if v0:
            from .linsolve import _orthonormalize

            directions = _orthonormalize(list(v0), [], drop_tol=1e-10)
            if len(directions) != cfg.k:
                raise ValueError(
                    f"v0 spans {len(directions)} directions, need k={cfg.k}"
                )
            H = hessian_map(q0, params)
            rayleigh = [inner_product(v, H.apply(v)) for v in directions]
        else:
            ev = smallest_eigs(
                hessian_map(q0, params),
                cfg.k,
                tol=cfg.eig_tol,
                maxit=cfg.eig_maxit,
            )
            directions = [p.vector for p in ev]
            rayleigh = [p.value for p in ev]

    state = make_state(
        q0, params, directions=directions, rayleigh=rayleigh, dt=cfg.dt_init
    )
    _emit(sink, state)

    def bump(st: SaddleState):
        if st.step_count >= cfg.max_steps:
            err = MaxStepsExceeded(
                f"no convergence within {cfg.max_steps} steps "
                f"(grad_norm {st.grad_norm:.3g})"
            )
            err.state = st
            raise err

    while state.grad_norm >= cfg.final_tol:
        while state.grad_norm >= cfg.switch_tol:
            bump(state)
            state = sd_step(state, params, cfg)
            _emit(sink, state)
        while cfg.final_tol <= state.grad_norm < cfg.switch_tol:
            bump(state)
            try:
                state = newton_step(state, params, cfg)
            except StagnationFallback:
                state = sd_step(state, params, cfg)
            _emit(sink, state)

    state.converged = True
    if cfg.certify:
        idx, pairs = morse_index(state.q, params, max_k=max(cfg.k + 4, 6))
        state.index = idx
        if idx != cfg.k:
            state.flags = state.flags + ("not_target_index",)
    return state


def newton_polish(
    q0: Field, cfg: SolverConfig, params: ModelParams, sink=None
) -> SaddleState:
    """Converge a nearby critical point Newton-first (no reflection).

    Used for continuation: the previous solution is an excellent guess,
    so the semi-implicit phase is skipped unless Newton keeps stagnating.
    """
    cfg_polish = replace(cfg, k=0, switch_tol=float("inf"), certify=False)
    return run_hisd(q0, None, cfg_polish, params, sink=sink)


def _power_lambda_max(H: LinearMap, iters: int = 15, seed: int = 97) -> float:
    rng = np.random.default_rng(seed)
    v = Field(H.geom, rng.standard_normal(H.geom.shape + (5,)))
    v = (1.0 / norm(v)) * v
    lam = 1.0
    for _ in range(iters):
        w = H.apply(v)
        lam = max(abs(inner_product(v, w)), 1e-12)
        nw = norm(w)
        if nw < 1e-300:
            return 1.0
        v = (1.0 / nw) * w
    return lam


def morse_index(
    q: Field,
    params: ModelParams,
    max_k: int = 10,
    tol: float = 1e-6,
    maxit: int = 500,
    rng: np.random.Generator | None = None,
) -> tuple[int, list[EigenPair]]:
    """Count negative Hessian eigenvalues at a critical point.

    Runs the block eigensolver with a growing window until the largest
    computed eigenvalue clears a +margin; eigenvalues inside the margin
    band (scaled 1e-8 of a power-iteration |lambda|_max estimate) are
    re-examined once at tightened tolerance and reported as ambiguous if
    they persist.
    """
    H = hessian_map(q, params)
    lam_max = _power_lambda_max(H)
    margin = max(1e-8 * lam_max, 1e-14)

    m = min(3, max_k)
    warm: list[Field] | None = None
    while True:
        ev = smallest_eigs(H, m, tol=tol, maxit=maxit, x0=warm, rng=rng)
        if not ev.converged:
            # A residual plateau usually means the window boundary cuts
            # through a symmetry-degenerate cluster; widening the block
            # restores convergence, so only a full-width stall is fatal.
            if m < max_k:
                warm = [p.vector for p in ev]
                m = min(m + 2, max_k)
                continue
            # Full-width stall: each Ritz value of a symmetric operator
            # lies within its own residual norm of a true eigenvalue, so
            # the sign count is still certain when every value clears
            # that bound and a positive value tops the window.
            res = [norm(H.apply(p.vector) - p.value * p.vector) for p in ev]
            clear = all(
                abs(p.value) > max(margin, r) for p, r in zip(ev, res)
            )
            if clear and ev[-1].value > 0:
                return int(sum(p.value < 0 for p in ev)), list(ev)
            raise IndexAmbiguous(
                f"eigensolver stalled at residual {ev.max_residual:.3g} "
                f"for m={m}"
            )
        if ev[-1].value > margin:
            vals = np.array([p.value for p in ev])
            if np.any(np.abs(vals) <= margin):
                ev2 = smallest_eigs(
                    H,
                    m,
                    tol=tol * 1e-2,
                    maxit=2 * maxit,
                    x0=[p.vector for p in ev],
                    rng=rng,
                )
                vals = np.array([p.value for p in ev2])
                if np.any(np.abs(vals) <= margin):
                    bad = vals[np.abs(vals) <= margin]
                    raise IndexAmbiguous(
                        f"eigenvalues {bad} within +-{margin:.3g} of zero"
                    )
                ev = ev2
            return int(np.sum(vals < -margin)), list(ev)
        if m >= max_k:
            raise IndexAmbiguous(
                f"no positive eigenvalue among the smallest {max_k}"
            )
        warm = [p.vector for p in ev]
        m = min(m + 2, max_k)
