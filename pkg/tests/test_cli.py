"""End-to-end command-line driver tests on small grids.

The heavier runs (landscape mapping on the thin slab) are shared
module-scoped fixtures so the whole file costs about a minute.
"""

import json
import os

import numpy as np
import pytest
import yaml

from nlcbox.cli import _worker_count, main
from nlcbox.config import load_config
from nlcbox.energy import gradient
from nlcbox.errors import ConfigError
from nlcbox.grid import build_grid, norm
from nlcbox.io import import_field_vtk, import_landscape_json
from nlcbox.seeds import wors_seed
from nlcbox.tensor import BulkParams


def write_config(path, **raw):
    base = {
        "mode": "relax",
        "grid": {"nx": 9, "ny": 9, "h": 1.0},
        "model": {"lam2": 5.0, "W": 0.01},
        "solver": {"max_steps": 4000, "final_tol": 1.0e-5},
        "seeds": ["wors"],
    }
    base.update(raw)
    path.write_text(yaml.safe_dump(base))
    return str(path)


@pytest.fixture(scope="module")
def relax_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("relax")
    cfg = write_config(d / "run.yaml", output=str(d / "out"))
    code = main(["run", cfg])
    return code, str(d / "out")


@pytest.fixture(scope="module")
def pathway_run(tmp_path_factory):
    """Landscape + pathway artifacts from the thin-slab index-2 cross."""
    d = tmp_path_factory.mktemp("pathway")
    cfg = write_config(
        d / "run.yaml",
        mode="pathway",
        grid={"nx": 11, "ny": 11, "h": 0.4},
        model={"lam2": 8.0, "W": 0.01},
        solver={"max_steps": 6000, "final_tol": 1.0e-6},
        symmetrize="prism",
        pathway={"start": "UNKNOWN-Rs-Rs", "end": "UNKNOWN-Rs-Rs"},
        output=str(d / "out"),
    )
    code = main(["run", cfg])
    return code, str(d / "out")


class TestRelaxMode:
    def test_exit_zero_and_artifacts(self, relax_run):
        code, out = relax_run
        assert code == 0
        for name in ("config_resolved.yaml", "summary.json", "wors.vtk",
                     "wors_trace.csv"):
            assert os.path.exists(os.path.join(out, name))

    def test_summary_reports_cross_label(self, relax_run):
        _, out = relax_run
        summary = json.load(open(os.path.join(out, "summary.json")))
        (state,) = summary["states"]
        assert state["label"] == "WORS-WORS-WORS"
        assert state["index"] == 0
        assert state["converged"] is True
        assert summary["failures"] == []

    def test_saved_field_reverifies(self, relax_run):
        _, out = relax_run
        cfg = load_config(os.path.join(out, "config_resolved.yaml"))
        f = import_field_vtk(os.path.join(out, "wors.vtk"))
        gn = norm(gradient(f, cfg.model_params()))
        assert gn < cfg.solver.final_tol

    def test_trace_has_header_and_descends(self, relax_run):
        _, out = relax_run
        lines = open(os.path.join(out, "wors_trace.csv")).read().splitlines()
        assert lines[0] == "step,energy,E_LdG,E_bc,grad_norm,dt"
        assert len(lines) > 2
        first = lines[1].split(",")
        last = lines[-1].split(",")
        assert float(last[1]) < float(first[1])
        assert float(last[4]) < 1.0e-5

    def test_resolved_copy_reparses(self, relax_run):
        _, out = relax_run
        cfg = load_config(os.path.join(out, "config_resolved.yaml"))
        assert cfg.mode == "relax" and cfg.lam2 == 5.0

    def test_zero_step_budget_writes_seed_unchanged(self, tmp_path):
        cfg = write_config(
            tmp_path / "z.yaml",
            solver={"max_steps": 0},
            output=str(tmp_path / "out"),
        )
        assert main(["run", cfg]) == 0
        seed = wors_seed(build_grid(9, 9, 1.0), BulkParams.mbba())
        written = import_field_vtk(str(tmp_path / "out" / "wors.vtk"))
        assert np.array_equal(seed.q, written.q)

    def test_exhausted_budget_is_partial_failure(self, tmp_path):
        cfg = write_config(
            tmp_path / "s.yaml",
            solver={"max_steps": 2},
            output=str(tmp_path / "out"),
        )
        assert main(["run", cfg]) == 1
        summary = json.load(open(tmp_path / "out" / "summary.json"))
        assert summary["states"] == []
        (failure,) = summary["failures"]
        assert failure["seed"] == "wors"


class TestBadInput:
    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text(
            yaml.safe_dump(
                {
                    "mode": "relax",
                    "grid": {"nx": 9, "ny": 9, "h": 1.0},
                    "model": {"lam2": 5.0, "Q": 1},
                }
            )
        )
        assert main(["run", str(path)]) == 2
        assert "model.Q" in capsys.readouterr().err

    def test_unknown_seed_exits_2(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "s.yaml", seeds=["wombat"], output=str(tmp_path / "out")
        )
        assert main(["run", cfg]) == 2
        assert "wombat" in capsys.readouterr().err

    def test_classify_missing_file_exits_2(self, tmp_path):
        assert main(["classify", str(tmp_path / "nope.vtk")]) == 2

    def test_sweep_subcommand_rejects_other_modes(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "r.yaml", output=str(tmp_path / "out"))
        assert main(["sweep", cfg]) == 2
        assert "mode=sweep" in capsys.readouterr().err


class TestClassifyAndGraph:
    def test_classify_prints_label_json(self, relax_run, capsys):
        _, out = relax_run
        assert main(["classify", os.path.join(out, "wors.vtk")]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["label"] == "WORS-WORS-WORS"
        assert len(payload["tags"]) == 6

    def test_graph_scans_then_verifies(self, relax_run, capsys):
        _, out = relax_run
        assert main(["graph", out]) == 0
        graph_file = os.path.join(out, "landscape.json")
        payload = json.load(open(graph_file))
        assert payload["edges"] == []
        assert [n["label"] for n in payload["nodes"]] == ["WORS-WORS-WORS"]
        capsys.readouterr()
        # second invocation re-verifies every node from its stored field
        assert main(["graph", out]) == 0
        checked = json.load(open(os.path.join(out, "graph_checked.json")))
        assert all(r["status"] == "ok" for r in checked)

    def test_graph_needs_resolved_config(self, tmp_path, capsys):
        assert main(["graph", str(tmp_path)]) == 2


class TestSweepMode:
    def test_cells_checkpoint_and_resume_identically(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLCBOX_THREADS", "1")
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "sw.yaml",
            mode="sweep",
            seeds=["wors", "uniform_z"],
            sweep={"lam2": [5.0], "h": [1.0]},
            output=str(out),
        )
        assert main(["sweep", cfg]) == 0
        cell = json.load(open(out / "cell_0_0.json"))
        assert cell["stable_label"] == "WORS-WORS-WORS"
        assert os.path.exists(out / "cell_0_0_stable.vtk")
        summary = json.load(open(out / "sweep_summary.json"))
        assert len(summary) == 1

        ref_json = open(out / "cell_0_0.json").read()
        ref_vtk = open(out / "cell_0_0_stable.vtk", "rb").read()
        os.unlink(out / "cell_0_0.json")
        os.unlink(out / "cell_0_0_stable.vtk")
        assert main(["sweep", cfg]) == 0
        assert open(out / "cell_0_0.json").read() == ref_json
        assert open(out / "cell_0_0_stable.vtk", "rb").read() == ref_vtk

    def test_stable_field_reverifies_as_minimum(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NLCBOX_THREADS", "1")
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "sw.yaml",
            mode="sweep",
            seeds=["wors"],
            sweep={"lam2": [5.0], "h": [1.0]},
            output=str(out),
        )
        assert main(["sweep", cfg]) == 0
        rc = load_config(str(out / "config_resolved.yaml"))
        f = import_field_vtk(str(out / "cell_0_0_stable.vtk"))
        assert norm(gradient(f, rc.model_params(5.0))) < rc.solver.final_tol

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("NLCBOX_THREADS", "4")
        assert _worker_count(2) == 2
        assert _worker_count(9) == 4
        monkeypatch.setenv("NLCBOX_THREADS", "abc")
        with pytest.raises(ConfigError, match="NLCBOX_THREADS"):
            _worker_count(2)
        monkeypatch.setenv("NLCBOX_THREADS", "0")
        with pytest.raises(ConfigError, match="positive"):
            _worker_count(2)


class TestLandscapeMode:
    def test_slab_tree_reproduced(self, pathway_run):
        code, out = pathway_run
        assert code == 0
        graph = import_landscape_json(os.path.join(out, "landscape.json"))
        indices = sorted(n.index for n in graph.nodes)
        assert indices == [0, 1, 1, 2]
        assert len(graph.edges) == 10
        by_key = {n.key: n for n in graph.nodes}
        for e in graph.edges:
            assert by_key[e.child].index < by_key[e.parent].index
        energies = sorted(n.energy for n in graph.nodes)
        assert energies[0] == pytest.approx(34.672276, rel=1e-5)
        assert energies[-1] == pytest.approx(34.935056, rel=1e-5)

    def test_every_node_field_saved(self, pathway_run):
        _, out = pathway_run
        graph = import_landscape_json(os.path.join(out, "landscape.json"))
        for node in graph.nodes:
            f = import_field_vtk(os.path.join(out, node.field_ref))
            assert f.checksum() == node.checksum

    def test_pathway_zero_chain(self, pathway_run):
        _, out = pathway_run
        chains = json.load(open(os.path.join(out, "pathways.json")))
        assert chains == [
            {
                "barrier": 0.0,
                "keys": [chains[0]["keys"][0]],
                "n_saddles": 0,
                "names": ["UNKNOWN-Rs-Rs"],
            }
        ]

    def test_graph_verifies_landscape_run(self, pathway_run, capsys):
        _, out = pathway_run
        assert main(["graph", out]) == 0
        checked = json.load(open(os.path.join(out, "graph_checked.json")))
        assert len(checked) == 4
        assert all(r["status"] == "ok" for r in checked)
