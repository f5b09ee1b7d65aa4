import numpy as np
import pytest

from nlcbox.classify import classify_face, classify_faces, symmetry_ops, transform_field, transform_label
from nlcbox.energy import ModelParams, energy
from nlcbox.errors import SkeletonInconsistent
from nlcbox.grid import build_grid
from nlcbox.seeds import (
    EDGES,
    VERTICES,
    TopologicalSkeleton,
    default_sweep_seeds,
    enumerate_topological_seeds,
    extruded_seed,
    make_skeleton,
    skeleton_from_signs,
    skeleton_label,
    skeleton_to_field,
    transform_skeleton,
    uniform_seed,
    wors_seed,
)

# Collapsed names of the topological constructions that stay stable at
# large domain size, by enumeration position.
STABLE_SKELETONS = {
    0: "D1-Rw-Re",
    4: "Rs-Rw-Re,Rw",
    9: "D2,D1-Rw-D2",
    13: "Rn,Rs-Rw-D2,D1",
    18: "D1-D1-D2",
    22: "Rn,Rs-D1-Re,Rw",
}


@pytest.fixture(scope="module")
def skeletons():
    return enumerate_topological_seeds()


class TestEnumeration:
    def test_twenty_seven_distinct(self, skeletons):
        assert len(skeletons) == 27
        assert len({sk.edge_signs for sk in skeletons}) == 27
        assert len({skeleton_label(sk).name for sk in skeletons}) == 27

    def test_all_canonical(self, skeletons):
        for sk in skeletons:
            assert sk.is_canonical()
            assert sk.source_vertex == (-1, -1, -1)

    def test_stable_labels_frozen(self, skeletons):
        for i, name in STABLE_SKELETONS.items():
            assert skeleton_label(skeletons[i]).name == name

    def test_diagonal_skeleton_is_all_ones(self, skeletons):
        sk = skeletons[18]
        assert all(s == 1 for s in sk.edge_signs)
        assert sk.sink_vertex == (1, 1, 1)

    def test_make_skeleton_reproduces_enumeration(self, skeletons):
        sk = make_skeleton((1, 1, 1), (1, 1), (1, 1))
        assert sk in skeletons


class TestSkeletonValidation:
    def test_bottom_vortex_rejected(self, skeletons):
        signs = dict(zip(EDGES, skeletons[18].edge_signs))
        signs[(0, -1, -1)] = 1
        signs[(1, 1, -1)] = 1
        signs[(0, 1, -1)] = -1
        signs[(1, -1, -1)] = -1
        with pytest.raises(SkeletonInconsistent):
            skeleton_from_signs(signs)

    def test_second_source_rejected(self, skeletons):
        signs = dict(zip(EDGES, skeletons[18].edge_signs))
        signs[(0, 1, -1)] = -1
        signs[(1, 1, -1)] = -1
        signs[(2, 1, -1)] = -1
        with pytest.raises(SkeletonInconsistent):
            skeleton_from_signs(signs)

    def test_kink_numbers_all_zero_for_canonical(self, skeletons):
        for sk in skeletons:
            assert all(k == 0 for k in sk.kink_numbers)


class TestTrappedAreas:
    def test_diagonal_skeleton_areas(self, skeletons):
        sk = skeletons[18]
        quarter = np.pi / 2.0
        signs = [round(a / quarter) for a in sk.trapped_areas]
        assert signs == [1, -1, -1, 1, -1, 1, 1, -1]
        assert abs(sum(sk.trapped_areas)) < 1e-12

    def test_areas_are_quarter_multiples(self, skeletons):
        for sk in skeletons:
            for a in sk.trapped_areas:
                assert abs(a) == pytest.approx(np.pi / 2.0)


class TestTransformSkeleton:
    def test_label_commutes_with_field_symmetry(self, skeletons):
        ops = symmetry_ops("cube")
        for i in STABLE_SKELETONS:
            sk = skeletons[i]
            base = skeleton_label(sk)
            for m in ops:
                assert skeleton_label(transform_skeleton(sk, m)) == transform_label(base, m)

    def test_orbit_of_diagonal_skeleton(self, skeletons):
        c4z = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]])
        names = set()
        sk = skeletons[18]
        for _ in range(4):
            sk = transform_skeleton(sk, c4z)
            names.add(skeleton_label(sk).name)
        assert names == {"D1-D1-D2", "D1-D2-D1", "D2-D1-D1", "D2-D2-D2"}


class TestWorsSeed:
    def test_structure(self, bulk):
        geom = build_grid(17, 17, 1.0)
        f = wors_seed(geom, bulk)
        assert np.abs(f.q[..., 2:]).max() == 0.0
        assert np.abs(f.q - f.q[:, :, :1]).max() == 0.0  # z invariant
        p = 0.5 * (f.q[..., 0] - f.q[..., 1])
        assert np.abs(p[geom.nx // 2, :, :]).max() == 0.0  # zero on x = 0
        assert np.abs(p[:, geom.ny // 2, :]).max() == 0.0  # zero on y = 0
        c = bulk.B / (3.0 * bulk.C)
        x, y, _ = geom.coordinates()
        assert np.allclose(p, -c * x * y, atol=1e-14)

    def test_quarter_turn_invariance(self, bulk):
        geom = build_grid(17, 17, 1.0)
        f = wors_seed(geom, bulk)
        c4z = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]])
        g = transform_field(f, c4z)
        assert np.allclose(g.q, f.q, atol=1e-14)


class TestSkeletonToField:
    def test_classify_round_trip_all_27(self, skeletons, bulk):
        geom = build_grid(13, 13, 1.0)
        for i, sk in enumerate(skeletons):
            f = skeleton_to_field(sk, geom, bulk)
            assert classify_faces(f) == skeleton_label(sk), f"skeleton {i}"

    def test_boundary_energy_is_corner_limited(self, skeletons, bulk):
        # no tangent direction exists at a cuboid corner, so the seed's
        # boundary misfit is pure corner frustration, O(dx^2)
        for n in (9, 17):
            geom = build_grid(n, n, 1.0)
            params = ModelParams.with_anchoring(bulk, lam2=50.0, W=0.01)
            f = skeleton_to_field(skeletons[18], geom, bulk)
            assert energy(f, params).e_bc <= 3.5 * geom.dx**2

    def test_dirichlet_mode_smoke(self, skeletons, bulk):
        geom = build_grid(9, 9, 1.0)
        params = ModelParams.with_anchoring(bulk, lam2=50.0, W=0.01)
        f = skeleton_to_field(skeletons[18], geom, bulk, mode="dirichlet",
                              params=params, dirichlet_steps=20)
        assert np.all(np.isfinite(f.q))
        assert classify_faces(f) == skeleton_label(skeletons[18])

    def test_unknown_mode_rejected(self, skeletons, bulk):
        geom = build_grid(9, 9, 1.0)
        with pytest.raises(ValueError):
            skeleton_to_field(skeletons[18], geom, bulk, mode="hyperbolic")


class TestSimpleSeeds:
    def test_extruded_profiles_classify(self, bulk):
        geom = build_grid(17, 17, 1.0)
        assert classify_face(extruded_seed(geom, bulk, "d1"), (2, 1)) == "D1"
        assert classify_face(extruded_seed(geom, bulk, "d2"), (2, 1)) == "D2"

    def test_uniform_seed_axes(self, bulk):
        geom = build_grid(9, 9, 0.5)
        for axis in range(3):
            f = uniform_seed(geom, bulk, axis)
            assert f.q.shape == geom.shape + (5,)
            assert np.all(np.isfinite(f.q))
            # constant in space
            assert np.abs(f.q - f.q[:1, :1, :1]).max() == 0.0

    def test_default_sweep_seed_set(self, bulk):
        geom = build_grid(9, 9, 1.0)
        seeds = default_sweep_seeds(geom, bulk)
        want = {"wors", "uniform_x", "uniform_y", "uniform_z",
                "extrude_d1", "extrude_d2"}
        want |= {f"topo{i:02d}" for i in range(27)}
        assert set(seeds) == want
        for name, f in seeds.items():
            assert f.q.shape == geom.shape + (5,), name
            assert np.all(np.isfinite(f.q)), name
