import numpy as np
import pytest

from nlcbox.classify import StateLabel, classify_face, classify_faces, symmetrize_field, symmetry_ops
from nlcbox.energy import ModelParams
from nlcbox.errors import MaxStepsExceeded, NoPathFound, NotTargetIndex
from nlcbox.grid import Field, build_grid
from nlcbox.landscape import (
    GraphEdge,
    GraphNode,
    LandscapeGraph,
    PathwayChain,
    add_downward,
    converge_symmetric,
    downward_search,
    transition_pathway,
    upward_search,
)
from nlcbox.saddle import SolverConfig
from nlcbox.tensor import BulkParams

PRISM = symmetry_ops("prism")


def cross_seed(geom, bulk):
    """Diagonal order-reconstruction profile extruded through the slab."""
    c = bulk.B / (3.0 * bulk.C)
    x, y, _ = geom.coordinates()
    p = -c * (x * x - y * y)
    q = np.zeros(geom.shape + (5,))
    q[..., 0] = p + c
    q[..., 1] = -p + c
    return Field(geom, q)


@pytest.fixture(scope="module")
def slab():
    return build_grid(11, 11, 0.4)


@pytest.fixture(scope="module")
def mbba():
    return BulkParams.mbba()


def slab_params(bulk, lam2):
    return ModelParams.with_anchoring(bulk, lam2=lam2, W=0.01)


@pytest.fixture(scope="module")
def cross8(slab, mbba):
    return converge_symmetric(
        cross_seed(slab, mbba), slab_params(mbba, 8.0), PRISM,
        cfg=SolverConfig(final_tol=1e-6),
    )


@pytest.fixture(scope="module")
def tree8(cross8, mbba):
    return downward_search(cross8, slab_params(mbba, 8.0))


class TestConvergeSymmetric:
    # Morse index of the symmetric cross branch vs domain size, frozen
    # from converged runs on the 11x11x5 slab
    @pytest.mark.parametrize(
        "lam2,index,e_ref",
        [(5.0, 0, 29.845259), (6.0, 1, 31.656035), (16.0, 2, 45.587372)],
    )
    def test_branch_index_and_energy(self, slab, mbba, lam2, index, e_ref):
        st = converge_symmetric(
            cross_seed(slab, mbba), slab_params(mbba, lam2), PRISM,
            cfg=SolverConfig(final_tol=1e-6),
        )
        assert st.index == index
        assert st.energy == pytest.approx(e_ref, rel=1e-5)
        assert st.converged
        assert classify_face(st.q, (2, 1)) == "WORS"

    def test_result_is_group_invariant(self, cross8):
        sym = symmetrize_field(cross8.q, PRISM)
        assert np.allclose(sym.q, cross8.q.q, atol=1e-13)

    def test_round_budget_enforced(self, slab, mbba):
        with pytest.raises(MaxStepsExceeded):
            converge_symmetric(
                cross_seed(slab, mbba), slab_params(mbba, 8.0), PRISM,
                cfg=SolverConfig(final_tol=1e-6), chunk=5, max_rounds=1,
            )


class TestDownwardSearch:
    def test_tree_shape_at_lam2_8(self, cross8, tree8):
        assert cross8.index == 2
        assert not tree8.failures
        by_index = sorted(c.state.index for c in tree8.children)
        assert by_index == [0, 1, 1]
        for child in tree8.children:
            assert child.state.index < cross8.index
            assert child.state.energy < cross8.energy

    def test_symmetric_twin_saddles(self, tree8):
        ones = [c for c in tree8.children if c.state.index == 1]
        assert len(ones) == 2
        assert ones[0].state.energy == pytest.approx(ones[1].state.energy, rel=1e-6)
        assert ones[0].label != ones[1].label  # mirror copies, distinct tags

    def test_minimum_reached_from_all_perturbations(self, tree8):
        mins = [c for c in tree8.children if c.state.index == 0]
        assert len(mins) == 1
        assert sorted(mins[0].arrivals) == [(0, -1), (0, 1), (1, -1), (1, 1)]
        assert mins[0].state.energy == pytest.approx(34.672276, rel=1e-5)

    def test_rejects_stable_start(self, slab, mbba, tree8):
        minimum = next(c.state for c in tree8.children if c.state.index == 0)
        with pytest.raises(ValueError):
            downward_search(minimum, slab_params(mbba, 8.0))

    def test_merged_pitchfork_twins_at_lam2_6(self, slab, mbba):
        # just past the pitchfork the twin minima carry identical labels
        # and energies, so deduplication folds them into one record
        params = slab_params(mbba, 6.0)
        saddle = converge_symmetric(
            cross_seed(slab, mbba), params, PRISM, cfg=SolverConfig(final_tol=1e-6)
        )
        assert saddle.index == 1
        res = downward_search(saddle, params)
        assert len(res.children) == 1
        child = res.children[0]
        assert child.state.index == 0
        assert sorted(child.arrivals) == [(0, -1), (0, 1)]
        assert child.state.energy < saddle.energy


class TestUpwardSearch:
    def test_up_down_consistency(self, slab, mbba, tree8):
        minimum = next(c.state for c in tree8.children if c.state.index == 0)
        saddle_e = next(
            c.state.energy for c in tree8.children if c.state.index == 1
        )
        up = upward_search(minimum, 1, slab_params(mbba, 8.0))
        assert up.index == 1
        assert "not_target_index" not in up.flags
        assert up.energy == pytest.approx(saddle_e, rel=1e-6)

    def test_target_zero_returns_input(self, tree8, mbba):
        minimum = next(c.state for c in tree8.children if c.state.index == 0)
        assert upward_search(minimum, 0, slab_params(mbba, 8.0)) is minimum

    def test_rejects_unstable_start(self, cross8, mbba):
        with pytest.raises(ValueError):
            upward_search(cross8, 1, slab_params(mbba, 8.0))

    def test_strict_near_pitchfork(self, slab, mbba):
        # at lam2=6 the landscape is nearly flat and the ascent slides
        # back to the minimum; strict mode turns that into an error
        params = slab_params(mbba, 6.0)
        saddle = converge_symmetric(
            cross_seed(slab, mbba), params, PRISM, cfg=SolverConfig(final_tol=1e-6)
        )
        res = downward_search(saddle, params)
        minimum = res.children[0].state
        with pytest.raises(NotTargetIndex):
            upward_search(minimum, 1, params, strict=True)
        relaxed = upward_search(minimum, 1, params, strict=False)
        assert relaxed.index == 0
        assert "not_target_index" in relaxed.flags


class TestLandscapeGraph:
    def test_build_and_dedup(self, cross8, tree8, mbba):
        graph = LandscapeGraph()
        pnode, new = graph.add_state(cross8, classify_faces(cross8.q), {"lam2": 8.0})
        assert new
        kids = add_downward(graph, pnode.key, tree8, {"lam2": 8.0})
        assert len(graph) == 4
        assert len(kids) == 3
        # re-adding an existing state is a no-op returning the old node
        rec = tree8.children[0]
        node, new = graph.add_state(rec.state, rec.label, {"lam2": 8.0})
        assert not new
        assert node.key in [k.key for k in kids]
        # every edge decreases the Morse index
        for e in graph.edges:
            assert graph.nodes[e.child].index < graph.nodes[e.parent].index

    def test_add_edge_must_decrease_index(self, cross8, tree8):
        graph = LandscapeGraph()
        pnode, _ = graph.add_state(cross8, classify_faces(cross8.q), {})
        rec = next(c for c in tree8.children if c.state.index == 0)
        cnode, _ = graph.add_state(rec.state, rec.label, {})
        with pytest.raises(ValueError):
            graph.add_edge(cnode.key, pnode.key, 0, 1)

    def test_uncertified_state_rejected(self, slab, mbba):
        from nlcbox.saddle import make_state

        st = make_state(cross_seed(slab, mbba), slab_params(mbba, 8.0))
        graph = LandscapeGraph()
        with pytest.raises(ValueError):
            graph.add_state(st, StateLabel(("WORS",) * 2, ("WORS",) * 2, ("WORS",) * 2), {})

    def test_as_dict_is_json_ready(self, cross8, tree8):
        import json

        graph = LandscapeGraph()
        pnode, _ = graph.add_state(cross8, classify_faces(cross8.q), {"lam2": 8.0})
        add_downward(graph, pnode.key, tree8, {"lam2": 8.0})
        d = graph.as_dict()
        json.dumps(d)
        energies = [n["energy"] for n in d["nodes"]]
        assert energies == sorted(energies)
        assert {e["parent"] for e in d["edges"]} == {pnode.key}

    def test_field_storage(self, cross8):
        graph = LandscapeGraph()
        node, _ = graph.add_state(cross8, classify_faces(cross8.q), {})
        assert graph.field(node.key) is cross8.q
        assert graph.minima() == []


def label_of(tag):
    return StateLabel((tag, tag), (tag, tag), (tag, tag))


def synthetic_graph():
    """Two routes between A and B: one direct high saddle, one two-hop
    low-saddle detour through C."""
    graph = LandscapeGraph()
    entries = [
        (0, "D1", 1.0),   # A
        (0, "D2", 1.2),   # B
        (0, "Rn", 1.1),   # C
        (1, "BD1", 2.0),  # S1 bridges A-B
        (1, "BD2", 1.5),  # S2 bridges A-C
        (1, "Rs", 1.6),   # S3 bridges C-B
        (0, "Re", 0.9),   # D isolated
    ]
    for key, (index, tag, e) in enumerate(entries):
        graph.nodes.append(
            GraphNode(key=key, checksum=f"{key}", energy=e, e_bc=0.0,
                      index=index, label=label_of(tag), params={})
        )
    for saddle, mins in ((3, (0, 1)), (4, (0, 2)), (5, (2, 1))):
        for m in mins:
            graph.edges.append(GraphEdge(saddle, m, 0, 1))
    return graph


class TestTransitionPathway:
    def test_chains_sorted_by_barrier(self):
        graph = synthetic_graph()
        chains = transition_pathway("D1-D1-D1", "D2-D2-D2", graph)
        assert len(chains) == 2
        low, high = chains
        assert low.keys == (0, 4, 2, 5, 1)
        assert low.barrier == pytest.approx(0.6)
        assert low.n_saddles == 2
        assert high.keys == (0, 3, 1)
        assert high.barrier == pytest.approx(1.0)
        assert high.n_saddles == 1
        # the single-saddle route carries the highest barrier here
        assert high.barrier > low.barrier

    def test_chain_properties(self):
        ch = PathwayChain(keys=(0, 4, 2, 5, 1), barrier=0.6)
        assert ch.minima == (0, 2, 1)
        assert ch.saddles == (4, 5)
        assert ch.n_saddles == 2

    def test_same_endpoints_zero_chain(self):
        graph = synthetic_graph()
        chains = transition_pathway("D1-D1-D1", "D1-D1-D1", graph)
        assert chains == [PathwayChain(keys=(0,), barrier=0.0)]

    def test_isolated_minimum_unreachable(self):
        graph = synthetic_graph()
        with pytest.raises(NoPathFound):
            transition_pathway("D1-D1-D1", "Re-Re-Re", graph)

    def test_unknown_state_rejected(self):
        graph = synthetic_graph()
        with pytest.raises(NoPathFound):
            transition_pathway("D1-D1-D1", "WORS-WORS-WORS", graph)

    def test_saddle_label_is_not_a_minimum(self):
        graph = synthetic_graph()
        with pytest.raises(NoPathFound):
            transition_pathway("D1-D1-D1", "BD1-BD1-BD1", graph)

    def test_real_graph_round_trip(self, cross8, tree8):
        graph = LandscapeGraph()
        pnode, _ = graph.add_state(cross8, classify_faces(cross8.q), {"lam2": 8.0})
        add_downward(graph, pnode.key, tree8, {"lam2": 8.0})
        the_min = graph.minima()[0]
        chains = transition_pathway(the_min.label, the_min.label, graph)
        assert chains[0].keys == (the_min.key,)
        assert chains[0].barrier == 0.0
