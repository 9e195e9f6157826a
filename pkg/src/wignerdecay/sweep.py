"""Parameter sweeps over the decay protocol and the multi-ancilla scaling run.

A sweep evaluates every point of a (at most two-dimensional) product grid of
configuration values independently: thermal state, decay, evolution, Wigner
negativity, and the optimum over time.  Rows come back in axis order no
matter how the points were scheduled, so CSV output is reproducible.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .analysis import CoreStateResult, optimize_core
from .dynamics import BathSpec, EvolutionResult, IntegrationError, TimeGrid, evolve
from .hilbert import DimensionError
from .model import DecayProfile, ModelParams
from .wigner import NegativityRecord, PhaseSpaceGrid, negativity_series

METRICS = ("min_N", "integrated_I")
SECTIONS = ("model", "profile", "bath", "time", "grid")
MAX_DIMENSION = 1024
_SECTION_TYPES = {
    "model": ModelParams,
    "profile": DecayProfile,
    "bath": BathSpec,
    "time": TimeGrid,
    "grid": PhaseSpaceGrid,
}


def _resolve_axis(name: str) -> tuple[str, str]:
    """Map ``"gR"`` or ``"model.gR"`` to ``("model", "gR")``."""
    if "." in name:
        section, key = name.split(".", 1)
        if section not in _SECTION_TYPES:
            raise ValueError(f"unknown config section {section!r} in axis {name!r}")
        if key not in {f.name for f in fields(_SECTION_TYPES[section])}:
            raise ValueError(f"{section} has no field {key!r} (axis {name!r})")
        return section, key
    hits = [s for s, cls in _SECTION_TYPES.items() if name in {f.name for f in fields(cls)}]
    if not hits:
        raise ValueError(f"axis {name!r} names no field of the base configs")
    if len(hits) > 1:
        raise ValueError(f"axis {name!r} is ambiguous between {hits}; qualify it as section.field")
    return hits[0], name


@dataclass(frozen=True)
class SweepSpec:
    """Base configuration plus up to two axes of values.

    ``grid=None`` picks :meth:`PhaseSpaceGrid.for_ancillas` per point.
    Axis names are field names of the base configs, optionally qualified
    (``"model.gR"``, ``"profile.tS"``).
    """

    model: ModelParams = ModelParams()
    profile: DecayProfile = DecayProfile()
    bath: BathSpec = BathSpec()
    time: TimeGrid = TimeGrid()
    grid: PhaseSpaceGrid | None = None
    axes: tuple[tuple[str, tuple], ...] = ()
    metric: str = "min_N"

    def __post_init__(self):
        axes = tuple((str(n), tuple(v)) for n, v in self.axes)
        object.__setattr__(self, "axes", axes)
        if len(axes) > 2:
            raise ValueError(f"at most 2 axes are supported, got {len(axes)}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        seen = set()
        for name, values in axes:
            target = _resolve_axis(name)
            if target in seen:
                raise ValueError(f"axis {name!r} given twice")
            seen.add(target)
            if not values:
                raise ValueError(f"axis {name!r} has no values")
        # Build every point once so invalid combinations fail up front.
        for i in range(self.size):
            self.point_config(i)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(v) for _, v in self.axes)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def point_values(self, index: int) -> tuple:
        if not 0 <= index < self.size:
            raise IndexError(f"point index {index} outside 0..{self.size - 1}")
        combo = list(itertools.product(*(v for _, v in self.axes)))
        return combo[index]

    def point_config(self, index: int) -> dict:
        """Configs (model, profile, bath, time, grid) for one grid point."""
        cfg = {
            "model": self.model,
            "profile": self.profile,
            "bath": self.bath,
            "time": self.time,
            "grid": self.grid,
        }
        updates: dict[str, dict] = {}
        for (name, _), value in zip(self.axes, self.point_values(index)):
            section, key = _resolve_axis(name)
            updates.setdefault(section, {})[key] = value
        for section, changes in updates.items():
            if section == "profile" and "tS" in changes and "kind" not in changes:
                # A tS axis through 0 means the instant limit.
                base = cfg["profile"]
                kind = base.kind if changes["tS"] else "instant"
                if kind == "instant" and changes["tS"]:
                    raise ValueError("a tS axis needs a finite base profile kind")
                changes = {**changes, "kind": kind}
            current = cfg[section]
            if current is None:
                current = PhaseSpaceGrid.for_ancillas(cfg["model"].n_ancillas)
            cfg[section] = replace(current, **changes)
        if cfg["grid"] is None:
            cfg["grid"] = PhaseSpaceGrid.for_ancillas(cfg["model"].n_ancillas)
        return cfg

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "profile": self.profile.to_dict(),
            "bath": self.bath.to_dict(),
            "time": self.time.to_dict(),
            "grid": None if self.grid is None else self.grid.to_dict(),
            "axes": [[n, list(v)] for n, v in self.axes],
            "metric": self.metric,
        }


@dataclass(frozen=True)
class SweepRow:
    values: tuple
    t_star: float
    min_N: float
    integrated_I: float
    x_star: float
    p_star: float
    runtime: float
    failed: bool = False
    message: str = ""


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow] = field(default_factory=list)

    @property
    def axis_names(self) -> list[str]:
        return [n for n, _ in self.spec.axes]

    def table(self, column: str = "min_N") -> np.ndarray:
        """Column reshaped onto the axis grid (NaN at failed points)."""
        vals = np.array([np.nan if r.failed else getattr(r, column) for r in self.rows], dtype=float)
        return vals.reshape(self.spec.shape or (1,))

    def best(self) -> SweepRow:
        """Deepest minimum (``min_N``) or largest ``integrated_I`` among successful rows."""
        ok = [r for r in self.rows if not r.failed]
        if not ok:
            raise ValueError("every sweep point failed")
        if self.spec.metric == "min_N":
            return min(ok, key=lambda r: r.min_N)
        return max(ok, key=lambda r: r.integrated_I)

    def write_csv(self, path, header: str | None = None) -> None:
        """Axis values and metrics; runtimes go to the JSON sidecar only.

        Keeping wall-clock numbers out of the CSV makes repeated runs
        byte-identical.
        """
        path = Path(path)
        with open(path, "w", newline="") as fh:
            if header:
                for line in header.splitlines():
                    fh.write(f"# {line}\n")
            fh.write(f"# metric = {self.spec.metric}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.axis_names, "t_star", "N", "I_neg", "x_star", "p_star", "failed", "message"])
            for r in self.rows:
                w.writerow([
                    *(_fmt(v) for v in r.values),
                    f"{r.t_star:.10g}",
                    f"{r.min_N:.12e}",
                    f"{r.integrated_I:.12e}",
                    f"{r.x_star:.10g}",
                    f"{r.p_star:.10g}",
                    int(r.failed),
                    r.message,
                ])

    def write_sidecar(self, path) -> None:
        doc = {
            "spec": self.spec.to_dict(),
            "runtimes": [r.runtime for r in self.rows],
            "failed": [r.failed for r in self.rows],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)

    def write(self, stem, header: str | None = None) -> tuple[Path, Path]:
        stem = Path(stem)
        csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
        self.write_csv(csv_path, header)
        self.write_sidecar(json_path)
        return csv_path, json_path


def _fmt(v) -> str:
    return f"{v:.10g}" if isinstance(v, float) else str(v)


def evaluate_point(spec: SweepSpec, index: int) -> SweepRow:
    """Run the protocol at one grid point; integration failures are flagged in-row."""
    cfg = spec.point_config(index)
    values = spec.point_values(index)
    start = time.perf_counter()
    try:
        ev = evolve(None, cfg["model"], cfg["profile"], cfg["bath"], cfg["time"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            series = negativity_series(ev, cfg["grid"])
    except (IntegrationError, np.linalg.LinAlgError) as exc:
        nan = float("nan")
        return SweepRow(values, nan, nan, nan, nan, nan, time.perf_counter() - start, True, str(exc))
    i = series.index_star if spec.metric == "min_N" else series.index_star_integrated
    rec = series.records[i]
    return SweepRow(
        values, rec.time, rec.min_value, rec.integrated_negativity,
        rec.x_star, rec.p_star, time.perf_counter() - start,
    )


def _evaluate_star(args):
    return evaluate_point(*args)


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Evaluate every grid point; ``workers > 1`` uses a process pool."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    jobs = [(spec, i) for i in range(spec.size)]
    if workers == 1 or spec.size == 1:
        rows = [_evaluate_star(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, spec.size)) as pool:
            rows = list(pool.map(_evaluate_star, jobs))
    return SweepResult(spec, rows)


def preset(name: str, model: ModelParams = ModelParams(), **overrides) -> SweepSpec:
    """Standard sweeps: ``coupling``, ``omega0``, ``temperature``, ``decay``.

    ``decay`` scans ``tS`` for the profile kind passed as ``kind``
    (default Gaussian).
    """
    if name == "coupling":
        axes = (
            ("gR", tuple(round(0.3 + 0.1 * i, 10) for i in range(7))),
            ("gA0", tuple(round(0.2 + 0.1 * i, 10) for i in range(11))),
        )
        return SweepSpec(model=model, axes=axes, **overrides)
    if name == "omega0":
        axes = (("omega0", tuple(round(0.5 + 0.25 * i, 10) for i in range(11))),)
        return SweepSpec(model=model, axes=axes, **overrides)
    if name == "temperature":
        axes = (("T", (0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0)),)
        return SweepSpec(model=model, axes=axes, **overrides)
    if name == "decay":
        kind = overrides.pop("kind", "gaussian")
        axes = (("tS", (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)),)
        return SweepSpec(model=model, profile=DecayProfile(kind, 1.0), axes=axes, **overrides)
    raise ValueError(f"unknown preset {name!r}")


@dataclass
class ScalingResult:
    evolution: EvolutionResult
    record: NegativityRecord
    core: CoreStateResult

    def to_dict(self) -> dict:
        return {"record": asdict(self.record), "core": self.core.to_dict()}


def scaling_run(
    n_ancillas: int,
    model: ModelParams | None = None,
    profile: DecayProfile = DecayProfile(),
    bath: BathSpec = BathSpec(),
    time_grid: TimeGrid = TimeGrid(),
    grid: PhaseSpaceGrid | None = None,
    workers: int = 1,
) -> ScalingResult:
    """Full pipeline for ``n_ancillas``: evolve, locate t*, extract the core state."""
    model = (model or ModelParams()).with_(n_ancillas=n_ancillas)
    if n_ancillas == 3 and model.fock_dim < 25:
        raise ValueError(f"three ancillas need fock_dim >= 25, got {model.fock_dim}")
    dim = model.layout.total_dim
    if dim > MAX_DIMENSION:
        raise DimensionError(f"total dimension {dim} exceeds the limit of {MAX_DIMENSION}")
    grid = grid or PhaseSpaceGrid.for_ancillas(n_ancillas)
    ev = evolve(None, model, profile, bath, time_grid)
    series = negativity_series(ev, grid)
    rec = series.best
    core = optimize_core(ev.state(series.index_star), workers=workers)
    return ScalingResult(ev, rec, core)
