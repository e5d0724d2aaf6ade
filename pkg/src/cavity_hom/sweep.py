"""Visibility maps over pairs of system parameters."""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .dynamics import CoherenceMatrix, TimeGrid, simulate
from .interference import visibility_value
from .models import (
    DriveField,
    GaussianDrive,
    LambdaParams,
    TwoLevelParams,
    build_lambda,
    build_two_level,
)
from .optimizer import OptimizerConfig, optimize_drive, reference_target

log = logging.getLogger(__name__)

AXIS_NAMES = ("delta_c", "g", "kappa", "gamma")
SYSTEMS = ("two_level", "lambda")
MODES = ("identical", "reference")
POSITIVE_AXES = ("g", "kappa")


@dataclass(frozen=True)
class SweepAxis:
    name: str
    start: float
    stop: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"axis name must be one of {AXIS_NAMES}, got {self.name!r}")
        if self.spacing != "linear":
            raise ValueError(f"unsupported spacing {self.spacing!r}")
        if self.count < 2:
            raise ValueError("an axis needs at least 2 points")
        if not self.start < self.stop:
            raise ValueError(f"axis {self.name}: start must be below stop")
        if self.name in POSITIVE_AXES and self.start <= 0:
            raise ValueError(f"axis {self.name} must start above 0")
        if self.name == "gamma" and self.start < 0:
            raise ValueError("axis gamma must start at or above 0")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class SweepRequest:
    system: str
    axis1: SweepAxis
    axis2: SweepAxis
    mode: str = "identical"
    base_params: TwoLevelParams | LambdaParams | None = None
    reference_params: TwoLevelParams | LambdaParams | None = None
    drive: DriveField = GaussianDrive(6.0, 15.0, 5.0)
    reference_drive: DriveField | None = None
    grid: TimeGrid = TimeGrid()
    gamma32_target: str = "g0"

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"system must be one of {SYSTEMS}, got {self.system!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.axis1.name == self.axis2.name:
            raise ValueError("the two sweep axes must differ")
        params_type = LambdaParams if self.system == "lambda" else TwoLevelParams
        if self.base_params is None:
            object.__setattr__(self, "base_params", params_type())
        if self.reference_params is None:
            object.__setattr__(self, "reference_params", self.base_params)
        for p in (self.base_params, self.reference_params):
            if not isinstance(p, params_type):
                raise TypeError(f"{self.system} sweep needs {params_type.__name__} parameters")

    def cell_params(self, v1: float, v2: float):
        return replace(self.base_params, **{self.axis1.name: float(v1), self.axis2.name: float(v2)})

    def model(self, params, drive=None):
        if self.system == "two_level":
            return build_two_level(params)
        return build_lambda(params, drive or self.drive, self.gamma32_target)

    def reference_model(self):
        return self.model(self.reference_params, self.reference_drive or self.drive)


@dataclass
class VisibilityMap:
    axis1: SweepAxis
    axis2: SweepAxis
    values: np.ndarray  # (count1, count2)
    mode: str
    base_params: object
    reference_params: object
    warnings: list[str] = field(default_factory=list)

    def high_area(self, threshold: float = 0.9) -> int:
        return int(np.sum(np.nan_to_num(self.values, nan=-1.0) > threshold))


def resolve_workers(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("CAVITY_HOM_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def parallel_map(func: Callable, items: Sequence, threads: int | None = None) -> list:
    """Order-preserving map; results are identical for any worker count."""
    workers = min(resolve_workers(threads), len(items))
    if workers <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _safe_cell(func, cell):
    try:
        return func(cell), None
    except Exception as exc:  # one bad cell must not sink the map
        return math.nan, f"cell {cell}: {type(exc).__name__}: {exc}"


@dataclass(frozen=True)
class _VisibilityCell:
    request: SweepRequest
    reference_g: CoherenceMatrix | None

    def run(self, values):
        req = self.request
        params = req.cell_params(*values)
        g = simulate(req.model(params), req.grid).coherence
        ref = g if self.reference_g is None else self.reference_g
        return visibility_value(ref, g)

    def __call__(self, values):
        return _safe_cell(self.run, values)


def _cells(req: SweepRequest):
    return [(a, b) for a in req.axis1.values for b in req.axis2.values]


def _assemble(req, results, label=""):
    values = np.array([v for v, _ in results], dtype=float).reshape(req.axis1.count, req.axis2.count)
    notes = [w for _, w in results if w]
    for w in notes:
        warnings.warn(f"{label}{w}", RuntimeWarning, stacklevel=3)
    return VisibilityMap(req.axis1, req.axis2, values, req.mode, req.base_params,
                         req.reference_params, notes)


def sweep_visibility(req: SweepRequest, threads: int | None = None) -> VisibilityMap:
    ref_g = None
    if req.mode == "reference":
        ref_g = simulate(req.reference_model(), req.grid).coherence
    results = parallel_map(_VisibilityCell(req, ref_g), _cells(req), threads)
    return _assemble(req, results)


def optimal_kappa_curve(vmap: VisibilityMap) -> list[tuple[float, float]]:
    """For each g, the kappa maximising V (ties go to the smaller kappa)."""
    names = (vmap.axis1.name, vmap.axis2.name)
    if set(names) != {"g", "kappa"}:
        raise ValueError(f"map axes must be g and kappa, got {names}")
    values = vmap.values if names[0] == "g" else vmap.values.T
    g_axis = vmap.axis1 if names[0] == "g" else vmap.axis2
    k_axis = vmap.axis2 if names[0] == "g" else vmap.axis1
    curve = []
    for g, row in zip(g_axis.values, values):
        if np.all(np.isnan(row)):
            continue
        curve.append((float(g), float(k_axis.values[np.nanargmax(row)])))
    return curve


@dataclass(frozen=True)
class _OptimizedCell:
    request: SweepRequest
    config: OptimizerConfig
    target: object
    reference_g: CoherenceMatrix

    def run(self, values):
        req = self.request
        params = req.cell_params(*values)
        before = visibility_value(self.reference_g, simulate(req.model(params), req.grid).coherence)
        res = optimize_drive(self.target, params, self.reference_g, self.config,
                             initial=req.drive, grid=req.grid, gamma32_target=req.gamma32_target)
        # the unoptimised Gaussian drive stays available if the knots cannot beat it
        return before, max(before, res.final_visibility)

    def __call__(self, values):
        try:
            return self.run(values), None
        except Exception as exc:
            return (math.nan, math.nan), f"cell {values}: {type(exc).__name__}: {exc}"


def optimized_sweep(
    req: SweepRequest,
    config: OptimizerConfig = OptimizerConfig(),
    threads: int | None = None,
) -> tuple[VisibilityMap, VisibilityMap]:
    """Maps before and after drive optimisation, against a fixed reference source."""
    if req.system != "lambda":
        raise ValueError("optimised sweeps need the Lambda system")
    if req.mode != "reference":
        req = replace(req, mode="reference")
    target, ref_g, _ = reference_target(
        req.reference_params, req.reference_drive or req.drive, req.grid,
        config.n_segments, req.gamma32_target,
    )
    results = parallel_map(_OptimizedCell(req, config, target, ref_g), _cells(req), threads)
    before = _assemble(req, [(b, w) for (b, _), w in results], "before: ")
    after = _assemble(req, [(a, w) for (_, a), w in results], "after: ")
    return before, after
