"""Run configuration: YAML schema, strict validation, resolved copies.

A run is described by a small structured text file.  Parsing is strict:
any key the schema does not know is rejected with its dotted path, so a
typo cannot silently fall back to a default.  Every run writes back a
fully resolved copy of its configuration (all defaults filled in) next
to its outputs for reproducibility.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .energy import BulkParams, ModelParams, anchoring_omega
from .errors import ConfigError
from .grid import GridGeometry, build_grid
from .saddle import SolverConfig

__all__ = [
    "MODES",
    "PhaseDiagramCell",
    "RunConfig",
    "load_config",
]

MODES = ("relax", "saddle", "landscape", "sweep", "pathway")

_MBBA = BulkParams.mbba()

_SOLVER_KEYS = {
    f.name for f in dataclasses.fields(SolverConfig) if f.name != "eta"
}
_GRID_KEYS = {"nx", "ny", "h"}
_MODEL_KEYS = {"lam2", "W", "omega", "A", "B", "C", "L"}
_SWEEP_KEYS = {"lam2", "h"}
_PATHWAY_KEYS = {"start", "end"}
_TOP_KEYS = {
    "mode",
    "grid",
    "model",
    "solver",
    "seeds",
    "output",
    "checkpoint_interval",
    "rng_seed",
    "perturb",
    "symmetrize",
    "sweep",
    "pathway",
}


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    for key in mapping:
        if key not in allowed:
            prefix = f"{where}." if where else ""
            raise ConfigError(f"unknown key {prefix}{key}")


def _section(raw: dict, name: str, required: bool) -> dict:
    sec = raw.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing required section {name}")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name} must be a mapping")
    return sec


def _number(sec: dict, where: str, key: str, default=None) -> float:
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing required key {where}.{key}")
        return default
    try:
        return float(sec[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key} must be a number") from None


@dataclass(frozen=True)
class RunConfig:
    """A fully validated and resolved run description."""

    mode: str
    nx: int
    ny: int
    h: float
    lam2: float
    omega: float
    W: float | None
    A: float
    B: float
    C: float
    L: float
    solver: SolverConfig
    seeds: tuple = ("wors",)
    output: str = "out"
    checkpoint_interval: int = 100
    rng_seed: int = 0
    perturb: float = 0.0
    symmetrize: str | None = None
    sweep_lam2: tuple = ()
    sweep_h: tuple = ()
    pathway_start: str | None = None
    pathway_end: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(
                f"mode must be one of {', '.join(MODES)}; got {self.mode!r}"
            )
        if self.nx < 5 or self.ny < 5:
            raise ConfigError("grid.nx and grid.ny must be at least 5")
        if self.h <= 0:
            raise ConfigError("grid.h must be positive")
        if self.symmetrize not in (None, "prism", "cube"):
            raise ConfigError("symmetrize must be 'prism' or 'cube'")
        if self.mode == "sweep" and (not self.sweep_lam2 or not self.sweep_h):
            raise ConfigError("mode=sweep needs nonempty sweep.lam2 and sweep.h")
        if self.mode == "pathway" and not (
            self.pathway_start and self.pathway_end
        ):
            raise ConfigError("mode=pathway needs pathway.start and pathway.end")

    def bulk(self) -> BulkParams:
        return BulkParams(A=self.A, B=self.B, C=self.C, L=self.L)

    def model_params(self, lam2: float | None = None) -> ModelParams:
        """Model at this config's coupling; lam2 overridable for sweeps.

        When the anchoring was given as a physical coefficient W, the
        dimensionless omega is recomputed for the effective lam2, which
        is what a sweep over domain sizes physically means.  An explicit
        omega is used verbatim at every lam2.
        """
        eff = self.lam2 if lam2 is None else lam2
        bulk = self.bulk()
        omega = (
            self.omega
            if self.W is None
            else anchoring_omega(eff, self.W, bulk)
        )
        return ModelParams(bulk=bulk, lam2=eff, omega=omega)

    def geometry(self, h: float | None = None) -> GridGeometry:
        return build_grid(self.nx, self.ny, self.h if h is None else h)

    def as_dict(self) -> dict:
        """Resolved copy of the config, ready for YAML emission."""
        solver = {
            k: getattr(self.solver, k) for k in sorted(_SOLVER_KEYS)
        }
        out = {
            "mode": self.mode,
            "grid": {"nx": self.nx, "ny": self.ny, "h": self.h},
            # Keep the user's anchoring parametrization so the resolved
            # copy re-parses to the same config (W and omega are
            # mutually exclusive on input).
            "model": {
                "lam2": self.lam2,
                **({"W": self.W} if self.W is not None else {"omega": self.omega}),
                "A": self.A,
                "B": self.B,
                "C": self.C,
                "L": self.L,
            },
            "solver": solver,
            "seeds": list(self.seeds),
            "output": self.output,
            "checkpoint_interval": self.checkpoint_interval,
            "rng_seed": self.rng_seed,
            "perturb": self.perturb,
            "symmetrize": self.symmetrize,
        }
        if self.mode == "sweep":
            out["sweep"] = {
                "lam2": list(self.sweep_lam2),
                "h": list(self.sweep_h),
            }
        if self.mode == "pathway":
            out["pathway"] = {
                "start": self.pathway_start,
                "end": self.pathway_end,
            }
        return out


def _parse_solver(sec: dict) -> SolverConfig:
    _reject_unknown(sec, _SOLVER_KEYS, "solver")
    kwargs = {}
    for key, value in sec.items():
        if key in ("k", "max_steps", "lin_maxit", "eig_maxit", "max_backtracks"):
            kwargs[key] = int(value)
        elif key == "certify":
            if not isinstance(value, bool):
                raise ConfigError("solver.certify must be true or false")
            kwargs[key] = value
        else:
            kwargs[key] = float(value)
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _parse_model(sec: dict) -> tuple:
    _reject_unknown(sec, _MODEL_KEYS, "model")
    lam2 = _number(sec, "model", "lam2")
    if lam2 < 0:
        raise ConfigError("model.lam2 must be nonnegative")
    A = _number(sec, "model", "A", _MBBA.A)
    B = _number(sec, "model", "B", _MBBA.B)
    C = _number(sec, "model", "C", _MBBA.C)
    L = _number(sec, "model", "L", _MBBA.L)
    if "W" in sec and "omega" in sec:
        raise ConfigError("model: give W or omega, not both")
    if "omega" in sec:
        omega = _number(sec, "model", "omega")
        if omega < 0:
            raise ConfigError("model.omega must be nonnegative")
        W = None
    else:
        W = _number(sec, "model", "W", 0.01)
        omega = anchoring_omega(lam2, W, BulkParams(A=A, B=B, C=C, L=L))
    return lam2, omega, W, A, B, C, L


def _parse_float_list(value, where: str) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{where} must be a list of numbers")
    try:
        out = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a list of numbers") from None
    if not out:
        raise ConfigError(f"{where} must not be empty")
    return out


def config_from_dict(raw: dict) -> RunConfig:
    """Validate a parsed mapping and build the resolved RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")
    _reject_unknown(raw, _TOP_KEYS, "")
    if "mode" not in raw:
        raise ConfigError("missing required key mode")

    grid = _section(raw, "grid", required=True)
    _reject_unknown(grid, _GRID_KEYS, "grid")
    nx = int(_number(grid, "grid", "nx"))
    ny = int(_number(grid, "grid", "ny"))
    h = _number(grid, "grid", "h")

    lam2, omega, W, A, B, C, L = _parse_model(
        _section(raw, "model", required=True)
    )
    solver = _parse_solver(_section(raw, "solver", required=False))

    mode = str(raw["mode"])
    # Unstated seed sets default to the full registry for sweeps (the
    # point of a phase diagram is to try everything) and to the single
    # cross ansatz otherwise.
    seeds = raw.get("seeds", ["all"] if mode == "sweep" else ["wors"])
    if isinstance(seeds, str):
        seeds = [seeds]
    if not isinstance(seeds, list) or not all(
        isinstance(s, str) for s in seeds
    ):
        raise ConfigError("seeds must be a list of seed names")

    sweep = _section(raw, "sweep", required=False)
    _reject_unknown(sweep, _SWEEP_KEYS, "sweep")
    sweep_lam2 = _parse_float_list(sweep["lam2"], "sweep.lam2") if "lam2" in sweep else ()
    sweep_h = _parse_float_list(sweep["h"], "sweep.h") if "h" in sweep else ()

    pathway = _section(raw, "pathway", required=False)
    _reject_unknown(pathway, _PATHWAY_KEYS, "pathway")

    return RunConfig(
        mode=mode,
        nx=nx,
        ny=ny,
        h=h,
        lam2=lam2,
        omega=omega,
        W=W,
        A=A,
        B=B,
        C=C,
        L=L,
        solver=solver,
        seeds=tuple(seeds),
        output=str(raw.get("output", "out")),
        checkpoint_interval=int(raw.get("checkpoint_interval", 100)),
        rng_seed=int(raw.get("rng_seed", 0)),
        perturb=float(raw.get("perturb", 0.0)),
        symmetrize=raw.get("symmetrize"),
        sweep_lam2=sweep_lam2,
        sweep_h=sweep_h,
        pathway_start=pathway.get("start"),
        pathway_end=pathway.get("end"),
    )


def load_config(path: str) -> RunConfig:
    """Parse and validate a YAML run configuration file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if raw is None:
        raise ConfigError(f"config {path} is empty")
    return config_from_dict(raw)


@dataclass(frozen=True)
class PhaseDiagramCell:
    """One (lam2, h) cell of a phase-diagram sweep."""

    lam2: float
    h: float
    stable_label: str
    metastable_labels: tuple = ()
    energies: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.energies:
            if self.stable_label not in self.energies:
                raise ValueError("stable_label missing from energies")
            lowest = min(self.energies.values())
            if self.energies[self.stable_label] > lowest + 1e-12 * max(
                1.0, abs(lowest)
            ):
                raise ValueError("stable_label is not the lowest-energy label")

    def as_dict(self) -> dict:
        return {
            "lam2": self.lam2,
            "h": self.h,
            "stable_label": self.stable_label,
            "metastable_labels": list(self.metastable_labels),
            "energies": dict(sorted(self.energies.items())),
        }
