import numpy as np
import pytest

from nlcbox.energy import ModelParams, hess_vec
from nlcbox.errors import RankDeficient
from nlcbox.grid import Field, build_grid, inner_product, laplacian, norm
from nlcbox.linsolve import (
    EigenPair,
    LinearMap,
    lobpcg_single_step,
    minres,
    minres_arrays,
    smallest_eigs,
)
from nlcbox.tensor import METRIC

from conftest import random_field


def identity_map(geom):
    return LinearMap(lambda f: f.copy(), geom)


def helmholtz_map(geom, dt=0.1):
    return LinearMap(lambda f: Field(geom, f.q - dt * laplacian(f).q), geom)


def shifted_lap_map(geom, shift):
    """-lap - shift: indefinite once shift exceeds the lowest eigenvalue 0."""
    return LinearMap(lambda f: Field(geom, -laplacian(f).q - shift * f.q), geom)


def scalar_multiplier_map(geom, c):
    """Node-scalar multiplication: symmetric, spectrum = {c} with mult. 5."""
    return LinearMap(lambda f: Field(geom, c[..., None] * f.q), geom)


def dense_coordinate_matrix(A, geom):
    """Assemble the operator's coordinate matrix column by column."""
    n = geom.n_nodes * 5
    M = np.empty((n, n))
    e = np.zeros(geom.shape + (5,))
    flat = e.reshape(-1)
    for j in range(n):
        flat[j] = 1.0
        M[:, j] = A.apply(Field(geom, e)).q.ravel()
        flat[j] = 0.0
    return M


def dense_spectrum(A, geom, m):
    """Oracle: m smallest eigenvalues under the metric inner product.

    The coordinate Gram matrix is G = dx^3 (I kron METRIC); an operator
    symmetric w.r.t. G satisfies G M = (G M)^T, so eigenvalues come from
    the Cholesky-transformed standard problem.
    """
    M = dense_coordinate_matrix(A, geom)
    n = M.shape[0]
    gm = geom.dx**3 * METRIC
    L5 = np.linalg.cholesky(gm)
    # block-diagonal G = I kron gm; transform B = L^T M L^{-T}
    Mr = M.reshape(n // 5, 5, n // 5, 5)
    B = np.einsum("ca,iajd,dq->icjq", L5.T, Mr, np.linalg.inv(L5).T).reshape(n, n)
    B = 0.5 * (B + B.T)
    return np.linalg.eigvalsh(B)[:m]


class TestMinres:
    def test_identity_one_iteration(self, grid7, rng):
        b = random_field(grid7, rng)
        res = minres(identity_map(grid7), b)
        x, relres, iters = res
        assert iters == 1
        assert relres < 1e-12
        assert (x - b).max_abs() < 1e-12

    def test_zero_rhs(self, grid7):
        res = minres(identity_map(grid7), Field(grid7))
        assert res.iters == 0 and res.converged
        assert res.x.max_abs() == 0.0

    def test_helmholtz_reapplication(self, grid9, rng):
        A = helmholtz_map(grid9, dt=0.1)
        b = random_field(grid9, rng, smooth=False)
        x, relres, iters = minres(A, b, tol=1e-10, maxit=200)
        assert relres <= 1e-10
        assert iters <= 200
        r = A.apply(x) - b
        assert norm(r) <= 1e-9 * norm(b)

    def test_indefinite_system(self, grid7, rng):
        A = shifted_lap_map(grid7, shift=5.3)
        # confirm indefiniteness: constant field gives negative quadratic form
        c = Field(grid7, np.ones(grid7.shape + (5,)))
        assert inner_product(A.apply(c), c) < 0.0
        b = random_field(grid7, rng, smooth=False)
        x, relres, iters = minres(A, b, tol=1e-8, maxit=2000)
        assert relres <= 1e-8
        assert norm(A.apply(x) - b) <= 1e-6 * norm(b)

    def test_residual_monotone(self, grid7, rng):
        for A in (helmholtz_map(grid7), shifted_lap_map(grid7, 5.3)):
            b = random_field(grid7, rng, smooth=False)
            res = minres(A, b, tol=1e-12, maxit=300)
            hist = np.array(res.history)
            assert np.all(np.diff(hist) <= 1e-14)

    def test_jacobi_preconditioner(self, grid7, rng):
        # strongly varying node scalar: Jacobi should pay off
        X, Y, Z = grid7.coordinates()
        c = 1.0 + 200.0 * (X**2 + Y**2 + Z**2)
        A = LinearMap(
            lambda f: Field(grid7, -laplacian(f).q + c[..., None] * f.q), grid7
        )
        b = random_field(grid7, rng, smooth=False)
        plain = minres(A, b, tol=1e-10, maxit=500)
        M = lambda f: Field(grid7, f.q / (6.0 / grid7.dx**2 + c)[..., None])
        prec = minres(A, b, tol=1e-10, maxit=500, M=M)
        assert prec.converged
        assert norm(A.apply(prec.x) - b) <= 1e-8 * norm(b)
        assert prec.iters <= plain.iters

    def test_warm_start(self, grid7, rng):
        A = helmholtz_map(grid7)
        b = random_field(grid7, rng)
        x1 = minres(A, b, tol=1e-12).x
        res2 = minres(A, b, tol=1e-12, x0=x1)
        assert res2.iters <= 2

    def test_breakdown_flagged(self, grid7, rng):
        zero_map = LinearMap(lambda f: Field(f.geom), grid7)
        res = minres(zero_map, random_field(grid7, rng))
        assert res.breakdown
        assert not res.converged

    def test_arrays_against_dense_solve(self, rng):
        n = 40
        Braw = rng.standard_normal((n, n))
        M = Braw @ Braw.T + n * np.eye(n)
        b = rng.standard_normal(n)
        res = minres_arrays(lambda v: M @ v, b, np.dot, tol=1e-12, maxit=200)
        ref = np.linalg.solve(M, b)
        assert np.abs(res.x - ref).max() < 1e-8


class TestLobpcgSingleStep:
    def seed_pairs(self, geom, rng, k):
        vs = []
        for _ in range(k):
            f = random_field(geom, rng, smooth=False)
            for u in vs:
                f = f - inner_product(f, u) * u
            vs.append((1.0 / norm(f)) * f)
        return [EigenPair(0.0, v) for v in vs]

    def test_fixed_point_on_exact_eigenvectors(self, rng):
        g = build_grid(5, 5, 1.0)
        c = np.arange(g.n_nodes, dtype=float).reshape(g.shape) + 1.0
        A = scalar_multiplier_map(g, c)
        # exact eigenvectors: node indicators; eigenvalue = c at that node
        pairs = []
        for node, comp in [((0, 0, 0), 0), ((1, 2, 3), 2)]:
            q = np.zeros(g.shape + (5,))
            q[node + (comp,)] = 1.0
            f = Field(g, q)
            f = (1.0 / norm(f)) * f
            pairs.append(EigenPair(float(c[node]), f))
        out, dirs = lobpcg_single_step(A, pairs)
        assert dirs == []
        for a, b in zip(out, sorted(pairs, key=lambda p: p.value)):
            assert a.value == pytest.approx(b.value, rel=1e-12)
            overlap = abs(inner_product(a.vector, b.vector))
            assert overlap == pytest.approx(1.0, abs=1e-10)

    def test_monotone_rayleigh_sums_random_maps(self, rng):
        g = build_grid(5, 5, 1.0)
        n = g.n_nodes * 5
        gm = g.dx**3 * METRIC
        ginv_blocks = np.linalg.inv(gm)
        for trial in range(20):
            S = rng.standard_normal((n, n))
            S = 0.5 * (S + S.T)

            def apply(f, S=S):
                w = (S @ f.q.reshape(-1, 5).reshape(-1)).reshape(-1, 5)
                return Field(g, (w @ ginv_blocks.T).reshape(g.shape + (5,)))

            A = LinearMap(apply, g)
            pairs = self.seed_pairs(g, rng, 3)
            dirs = []
            prev = None
            for _ in range(5):
                pairs, dirs = lobpcg_single_step(A, pairs, dirs)
                total = sum(p.value for p in pairs)
                if prev is not None:
                    assert total <= prev + 1e-8 * max(1.0, abs(prev))
                prev = total
                # output block orthonormal
                for i, p in enumerate(pairs):
                    for j, q in enumerate(pairs):
                        want = 1.0 if i == j else 0.0
                        assert abs(inner_product(p.vector, q.vector) - want) < 1e-8

    def test_diagonal_operator_convergence(self, rng):
        g = build_grid(5, 5, 1.0)
        c = np.linspace(1.0, 30.0, g.n_nodes).reshape(g.shape)
        A = scalar_multiplier_map(g, c)
        pairs = self.seed_pairs(g, rng, 2)
        dirs = []
        for _ in range(100):
            pairs, dirs = lobpcg_single_step(A, pairs, dirs)
        # smallest eigenvalue c.min() has multiplicity 5
        for p in pairs:
            assert p.value == pytest.approx(c.min(), abs=1e-8)

    def test_rank_deficient_raised(self, rng):
        # duplicated block vectors with nonzero residuals degenerate the basis
        g = build_grid(5, 5, 1.0)
        A = helmholtz_map(g)
        v = random_field(g, rng, smooth=False)
        v = (1.0 / norm(v)) * v
        dup = [EigenPair(0.0, v), EigenPair(0.0, v.copy())]
        with pytest.raises(RankDeficient):
            lobpcg_single_step(A, dup)


class TestSmallestEigs:
    def test_neumann_kernel(self, rng):
        g = build_grid(5, 5, 1.0)
        A = LinearMap(lambda f: -1.0 * laplacian(f), g)
        out = smallest_eigs(A, 1, tol=1e-9, maxit=300, rng=rng)
        assert out.converged
        assert abs(out[0].value) < 1e-8
        # eigenvector is spatially constant
        v = out[0].vector.q
        spread = np.abs(v - v.mean(axis=(0, 1, 2))).max()
        assert spread < 1e-6

    def test_positive_map(self, rng):
        g = build_grid(5, 5, 1.0)
        out = smallest_eigs(identity_map(g), 1, tol=1e-10, rng=rng)
        assert out[0].value > 0.0
        assert out[0].value == pytest.approx(1.0, abs=1e-10)

    def test_unit_norm_pairs(self, rng):
        g = build_grid(5, 5, 1.0)
        A = helmholtz_map(g)
        out = smallest_eigs(A, 3, tol=1e-9, rng=rng)
        for p in out:
            assert abs(norm(p.vector) - 1.0) < 1e-10

    def test_dense_oracle_hessian(self, rng, bulk):
        g = build_grid(5, 5, 1.0)
        p = ModelParams(bulk=bulk, lam2=50.0, omega=10.0)
        f = random_field(g, rng)
        H = LinearMap(lambda v: hess_vec(f, v, p), g)
        ref = dense_spectrum(H, g, 4)
        out = smallest_eigs(H, 4, tol=1e-9, maxit=600, rng=rng)
        assert out.converged
        got = np.array([q.value for q in out])
        assert np.all(np.diff(got) >= -1e-10)
        assert np.abs(got - ref).max() < 1e-6

    def test_reinitialization_invariance(self, bulk):
        g = build_grid(5, 5, 1.0)
        p = ModelParams(bulk=bulk, lam2=5.0, omega=1.0)
        f = Field(g)
        H = LinearMap(lambda v: hess_vec(f, v, p), g)
        a = smallest_eigs(H, 3, tol=1e-9, rng=np.random.default_rng(1))
        b = smallest_eigs(H, 3, tol=1e-9, rng=np.random.default_rng(2))
        assert a.converged and b.converged
        for pa, pb in zip(a, b):
            assert pa.value == pytest.approx(pb.value, abs=1e-6)

    def test_not_converged_flagged(self, rng, bulk):
        g = build_grid(5, 5, 1.0)
        p = ModelParams(bulk=bulk, lam2=50.0, omega=10.0)
        f = random_field(g, rng)
        H = LinearMap(lambda v: hess_vec(f, v, p), g)
        out = smallest_eigs(H, 2, tol=1e-12, maxit=2, rng=rng)
        assert not out.converged
        assert len(out) == 2

    def test_symmetry_defect_helper(self, grid7, rng):
        A = helmholtz_map(grid7)
        assert A.symmetry_defect(rng) < 1e-10
