"""Command-line batch driver: `nlc run|sweep|classify|graph`.

Every run writes a resolved copy of its configuration next to its
outputs, writes artifacts atomically (temp + rename), and reports
partial failures per seed with a nonzero exit code.  Phase-diagram
sweeps execute cells on a process pool, checkpoint each cell to its own
file, and resume byte-identically after an interruption.  The worker
count is taken from the NLCBOX_THREADS environment variable when set.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from .classify import classify_faces, symmetry_ops
from .config import PhaseDiagramCell, RunConfig, load_config
from .energy import ModelParams, energy, gradient
from .errors import ConfigError, NlcError, NoPathFound
from .grid import Field, GridGeometry, norm
from .io import (
    atomic_write_text,
    export_field_vtk,
    export_landscape_json,
    export_traces_csv,
    import_field_vtk,
    import_landscape_json,
)
from .landscape import (
    LandscapeGraph,
    add_downward,
    converge_symmetric,
    downward_search,
    transition_pathway,
)
from .saddle import run_hisd
from .seeds import default_sweep_seeds

__all__ = ["main", "sweep_phase_diagram"]

THREAD_ENV = "NLCBOX_THREADS"


def _worker_count(n_tasks: int) -> int:
    raw = os.environ.get(THREAD_ENV)
    if raw:
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigError(f"{THREAD_ENV} must be an integer, got {raw!r}")
        if workers < 1:
            raise ConfigError(f"{THREAD_ENV} must be positive")
    else:
        workers = os.cpu_count() or 1
    return max(1, min(workers, n_tasks))


def _named_seeds(cfg: RunConfig, geom: GridGeometry) -> dict:
    """Build the configured subset of the named seed registry."""
    registry = default_sweep_seeds(geom, cfg.bulk())
    if cfg.seeds == ("all",):
        picked = registry
    else:
        missing = [s for s in cfg.seeds if s not in registry]
        if missing:
            known = ", ".join(sorted(registry))
            raise ConfigError(
                f"unknown seed name(s) {', '.join(missing)}; known: {known}"
            )
        picked = {name: registry[name] for name in cfg.seeds}
    if cfg.perturb > 0.0:
        for i, (name, f) in enumerate(sorted(picked.items())):
            rng = np.random.default_rng((cfg.rng_seed, i))
            f.q += cfg.perturb * rng.standard_normal(f.q.shape)
    return picked


def _write_resolved(cfg: RunConfig, outdir: str) -> None:
    text = yaml.safe_dump(cfg.as_dict(), sort_keys=True)
    atomic_write_text(os.path.join(outdir, "config_resolved.yaml"), text)


def _write_json(payload, path: str) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ----------------------------------------------------------------------
# relax / saddle modes
# ----------------------------------------------------------------------


def _relax_seed(
    name: str,
    f0: Field,
    cfg: RunConfig,
    params: ModelParams,
    outdir: str,
    k: int,
) -> dict:
    """Drive one seed to a critical point and write its artifacts."""
    field_file = f"{name}.vtk"
    if cfg.solver.max_steps == 0:
        export_field_vtk(f0, os.path.join(outdir, field_file))
        return {
            "seed": name,
            "steps": 0,
            "converged": False,
            "field": field_file,
            "note": "max_steps=0: seed written unchanged",
        }

    solver = dataclasses.replace(cfg.solver, k=k)
    trace: list = []
    state = run_hisd(f0, None, solver, params, sink=trace.append)
    export_field_vtk(state.q, os.path.join(outdir, field_file))
    trace_file = f"{name}_trace.csv"
    export_traces_csv(trace, os.path.join(outdir, trace_file), params.omega)
    label = classify_faces(state.q)
    return {
        "seed": name,
        "label": label.name,
        "energy": state.energy,
        "e_bc": state.e_bc,
        "grad_norm": state.grad_norm,
        "steps": state.step_count,
        "index": state.index,
        "flags": list(state.flags),
        "converged": state.converged,
        "field": field_file,
        "trace": trace_file,
    }


def _run_relax(cfg: RunConfig, outdir: str) -> int:
    params = cfg.model_params()
    geom = cfg.geometry()
    k = 0 if cfg.mode == "relax" else cfg.solver.k
    states, failures = [], []
    for name, f0 in _named_seeds(cfg, geom).items():
        try:
            states.append(_relax_seed(name, f0, cfg, params, outdir, k))
        except NlcError as exc:
            failures.append({"seed": name, "error": str(exc)})
    summary = {
        "mode": cfg.mode,
        "states": states,
        "failures": failures,
        "h": geom.h,
        "lam2": cfg.lam2,
        "omega": params.omega,
    }
    _write_json(summary, os.path.join(outdir, "summary.json"))
    for s in states:
        print(f"{s['seed']}: " + (f"label {s['label']}, energy {s['energy']:.6f}"
                                   if "label" in s else s.get("note", "")))
    for f in failures:
        print(f"{f['seed']}: FAILED ({f['error']})", file=sys.stderr)
    return 1 if failures else 0


# ----------------------------------------------------------------------
# landscape / pathway modes
# ----------------------------------------------------------------------


def _initial_state(cfg: RunConfig, f0: Field, params: ModelParams):
    if cfg.symmetrize:
        ops = symmetry_ops(cfg.symmetrize)
        return converge_symmetric(f0, params, ops, cfg.solver)
    solver = dataclasses.replace(cfg.solver, certify=True)
    return run_hisd(f0, None, solver, params)


def _build_landscape(cfg: RunConfig, outdir: str):
    """Converge the seeds, then exhaust downward searches from every saddle."""
    params = cfg.model_params()
    geom = cfg.geometry()
    graph = LandscapeGraph()
    states: dict[int, object] = {}
    node_params = {"lam2": cfg.lam2, "omega": params.omega, "h": geom.h}
    failures: list[dict] = []
    queue: list[int] = []

    for name, f0 in _named_seeds(cfg, geom).items():
        try:
            state = _initial_state(cfg, f0, params)
        except NlcError as exc:
            failures.append({"seed": name, "error": str(exc)})
            continue
        label = classify_faces(state.q)
        node, inserted = graph.add_state(state, label, node_params)
        if inserted:
            states[node.key] = state
            if node.index and node.index >= 1:
                queue.append(node.key)

    expanded: set[int] = set()
    while queue:
        key = queue.pop(0)
        if key in expanded:
            continue
        expanded.add(key)
        result = downward_search(states[key], params, cfg.solver)
        for direction, sign, k, message in result.failures:
            failures.append(
                {
                    "node": key,
                    "direction": direction,
                    "sign": sign,
                    "k": k,
                    "error": message,
                }
            )
        nodes = add_downward(graph, key, result, node_params)
        for rec, node in zip(result.children, nodes):
            if node.key not in states:
                states[node.key] = rec.state
            if node.index >= 1 and node.key not in expanded:
                queue.append(node.key)

    for i, node in enumerate(graph.nodes):
        ref = os.path.join("fields", f"node_{node.key}.vtk")
        export_field_vtk(states[node.key].q, os.path.join(outdir, ref))
        graph.nodes[i] = dataclasses.replace(node, field_ref=ref)
    return graph, failures


def _run_landscape(cfg: RunConfig, outdir: str) -> int:
    graph, failures = _build_landscape(cfg, outdir)
    export_landscape_json(graph, os.path.join(outdir, "landscape.json"))
    if failures:
        _write_json(failures, os.path.join(outdir, "failures.json"))
    print(
        f"landscape: {len(graph.nodes)} states "
        f"({len(graph.minima())} minima), {len(graph.edges)} edges"
    )
    if cfg.mode == "pathway":
        try:
            chains = transition_pathway(cfg.pathway_start, cfg.pathway_end, graph)
        except NoPathFound as exc:
            print(f"pathway: {exc}", file=sys.stderr)
            return 1
        name_of = {n.key: n.name for n in graph.nodes}
        payload = [
            {
                "keys": list(c.keys),
                "names": [name_of[k] for k in c.keys],
                "barrier": c.barrier,
                "n_saddles": c.n_saddles,
            }
            for c in chains
        ]
        _write_json(payload, os.path.join(outdir, "pathways.json"))
        print(f"pathway: {len(chains)} chains, lowest barrier {chains[0].barrier:.6f}")
    return 1 if failures else 0


# ----------------------------------------------------------------------
# phase-diagram sweep
# ----------------------------------------------------------------------


def _cell_name(i: int, j: int) -> str:
    return f"cell_{i}_{j}"


def _sweep_cell(task) -> str:
    """Relax every seed of one (lam2, h) cell; returns the cell file name.

    Runs in a pool worker.  The cell's JSON checkpoint is written last,
    atomically, so its existence marks the cell complete.
    """
    i, j, lam2, h, cfg, seed_names, outdir = task
    cell_file = _cell_name(i, j) + ".json"
    geom = cfg.geometry(h)
    params = cfg.model_params(lam2)
    registry = default_sweep_seeds(geom, cfg.bulk())
    energies: dict[str, float] = {}
    best: dict[str, object] = {}
    failures: list[dict] = []
    nonstable = 0
    for idx, name in enumerate(seed_names):
        f0 = registry[name]
        if cfg.perturb > 0.0:
            rng = np.random.default_rng((cfg.rng_seed, i, j, idx))
            f0.q += cfg.perturb * rng.standard_normal(f0.q.shape)
        try:
            state = run_hisd(f0, None, cfg.solver, params)
        except NlcError as exc:
            failures.append({"seed": name, "error": str(exc)})
            continue
        if state.index not in (None, 0):
            nonstable += 1
            continue
        label = classify_faces(state.q).name
        if label not in energies or state.energy < energies[label]:
            energies[label] = state.energy
            best[label] = state
    cell: dict = {
        "i": i,
        "j": j,
        "lam2": lam2,
        "h": geom.h,
        "failures": failures,
        "nonstable_seeds": nonstable,
    }
    if energies:
        stable = min(energies, key=lambda lb: (energies[lb], lb))
        field_file = _cell_name(i, j) + "_stable.vtk"
        export_field_vtk(best[stable].q, os.path.join(outdir, field_file))
        cell.update(
            stable_label=stable,
            metastable_labels=sorted(lb for lb in energies if lb != stable),
            energies=energies,
            field=field_file,
        )
    else:
        cell["error"] = "no stable state found"
    _write_json(cell, os.path.join(outdir, cell_file))
    return cell_file


def sweep_phase_diagram(
    lam2_list,
    h_list,
    seed_set,
    config: RunConfig,
) -> list[PhaseDiagramCell]:
    """Map stable states over a (lam2, h) grid, checkpointing per cell.

    Every seed in ``seed_set`` (default: the full named registry) is
    relaxed in every cell; index-0 results are grouped by face label and
    the lowest energy label wins.  Cells already checkpointed in the
    output directory are skipped, so an interrupted sweep resumes where
    it stopped and reproduces the remaining cells byte-for-byte.
    """
    lam2_list = list(lam2_list)
    h_list = list(h_list)
    if not lam2_list or not h_list:
        raise ConfigError("sweep needs nonempty lam2 and h lists")
    outdir = config.output
    os.makedirs(outdir, exist_ok=True)
    registry = sorted(default_sweep_seeds(config.geometry(h_list[0]), config.bulk()))
    if seed_set is None:
        seed_set = registry
    seed_set = list(seed_set)
    unknown = [s for s in seed_set if s not in registry]
    if unknown:
        raise ConfigError(f"unknown seed name(s) in sweep: {', '.join(unknown)}")

    tasks = []
    for i, lam2 in enumerate(lam2_list):
        for j, h in enumerate(h_list):
            if not os.path.exists(os.path.join(outdir, _cell_name(i, j) + ".json")):
                tasks.append((i, j, lam2, h, config, seed_set, outdir))

    if tasks:
        workers = _worker_count(len(tasks))
        if workers == 1:
            for task in tasks:
                _sweep_cell(task)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                list(pool.map(_sweep_cell, tasks))

    cells: list[PhaseDiagramCell] = []
    records: list[dict] = []
    for i in range(len(lam2_list)):
        for j in range(len(h_list)):
            path = os.path.join(outdir, _cell_name(i, j) + ".json")
            with open(path) as fh:
                rec = json.load(fh)
            records.append(rec)
            if "stable_label" in rec:
                cells.append(
                    PhaseDiagramCell(
                        lam2=rec["lam2"],
                        h=rec["h"],
                        stable_label=rec["stable_label"],
                        metastable_labels=tuple(rec["metastable_labels"]),
                        energies=rec["energies"],
                    )
                )
    _write_json(records, os.path.join(outdir, "sweep_summary.json"))
    return cells


def _run_sweep(cfg: RunConfig) -> int:
    seed_set = None if cfg.seeds == ("all",) else list(cfg.seeds)
    cells = sweep_phase_diagram(cfg.sweep_lam2, cfg.sweep_h, seed_set, cfg)
    n_cells = len(cfg.sweep_lam2) * len(cfg.sweep_h)
    for c in cells:
        print(f"lam2={c.lam2:g} h={c.h:g}: {c.stable_label}")
    if len(cells) < n_cells:
        print(f"{n_cells - len(cells)} cell(s) failed", file=sys.stderr)
        return 1
    return 0


# ----------------------------------------------------------------------
# classify / graph subcommands
# ----------------------------------------------------------------------


def _cmd_classify(path: str) -> int:
    f = import_field_vtk(path)
    label = classify_faces(f)
    payload = {
        "label": label.name,
        "tags": {f"{ax},{side}": t for (ax, side), t in label.as_dict().items()},
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _verify_node(node, outdir: str, params: ModelParams, tol: float) -> dict:
    report: dict = {"key": node.key, "label": node.label.name}
    if not node.field_ref:
        report["status"] = "no field file"
        return report
    f = import_field_vtk(os.path.join(outdir, node.field_ref))
    e = energy(f, params)
    gn = norm(gradient(f, params))
    label = classify_faces(f).name
    ok = (
        abs(e.total - node.energy) <= 1e-8 * max(1.0, abs(node.energy))
        and gn < tol
        and label == node.label.name
    )
    report.update(
        status="ok" if ok else "mismatch",
        energy=e.total,
        stored_energy=node.energy,
        grad_norm=gn,
        reclassified=label,
    )
    return report


def _cmd_graph(outdir: str) -> int:
    """Re-verify a landscape run from its saved artifacts."""
    cfg_path = os.path.join(outdir, "config_resolved.yaml")
    if not os.path.exists(cfg_path):
        print(f"error: {cfg_path} not found", file=sys.stderr)
        return 2
    cfg = load_config(cfg_path)
    params = cfg.model_params()

    graph_path = os.path.join(outdir, "landscape.json")
    if os.path.exists(graph_path):
        graph = import_landscape_json(graph_path)
        reports = [
            _verify_node(n, outdir, params, cfg.solver.final_tol)
            for n in graph.nodes
        ]
        _write_json(reports, os.path.join(outdir, "graph_checked.json"))
        bad = [r for r in reports if r["status"] != "ok"]
        for r in reports:
            print(f"node {r['key']} [{r['label']}]: {r['status']}")
        return 1 if bad else 0

    # No graph: classify every stored field into a flat (edge-free) graph
    # file using the same node schema, with the Morse index left null.
    nodes = []
    for path in sorted(glob.glob(os.path.join(outdir, "**", "*.vtk"), recursive=True)):
        f = import_field_vtk(path)
        e = energy(f, params)
        label = classify_faces(f)
        nodes.append(
            {
                "checksum": f.checksum(),
                "field_ref": os.path.relpath(path, outdir),
                "energy": e.total,
                "e_bc": e.e_bc,
                "index": None,
                "grad_norm": norm(gradient(f, params)),
                "label": label.name,
                "tags": {
                    f"{ax},{side}": t for (ax, side), t in label.as_dict().items()
                },
                "params": {},
            }
        )
    if not nodes:
        print(f"error: no .vtk fields under {outdir}", file=sys.stderr)
        return 2
    nodes.sort(key=lambda n: (n["energy"], n["field_ref"]))
    for key, n in enumerate(nodes):
        n["key"] = key
    _write_json(
        {"nodes": nodes, "edges": []}, os.path.join(outdir, "landscape.json")
    )
    for n in nodes:
        print(f"{n['field_ref']}: {n['label']} (energy {n['energy']:.6f})")
    return 0


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------


def _cmd_run(cfg_path: str, force_mode: str | None = None) -> int:
    cfg = load_config(cfg_path)
    if force_mode and cfg.mode != force_mode:
        raise ConfigError(
            f"this subcommand needs mode={force_mode}, config says {cfg.mode}"
        )
    os.makedirs(cfg.output, exist_ok=True)
    _write_resolved(cfg, cfg.output)
    start = time.monotonic()
    if cfg.mode in ("relax", "saddle"):
        code = _run_relax(cfg, cfg.output)
    elif cfg.mode in ("landscape", "pathway"):
        code = _run_landscape(cfg, cfg.output)
    else:
        code = _run_sweep(cfg)
    print(f"done in {time.monotonic() - start:.1f}s (exit {code})")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlc",
        description=(
            "Critical points of a Landau-de Gennes tensor model on a cuboid: "
            "relaxation, saddle search, landscape mapping, phase-diagram sweeps."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute the mode given in the config")
    p_run.add_argument("config")
    p_sweep = sub.add_parser("sweep", help="run a phase-diagram sweep config")
    p_sweep.add_argument("config")
    p_cls = sub.add_parser("classify", help="print the face label of a field file")
    p_cls.add_argument("field")
    p_graph = sub.add_parser("graph", help="re-verify a run directory's artifacts")
    p_graph.add_argument("dir")
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            return _cmd_run(args.config)
        if args.command == "sweep":
            return _cmd_run(args.config, force_mode="sweep")
        if args.command == "classify":
            return _cmd_classify(args.field)
        return _cmd_graph(args.dir)
    except NlcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
