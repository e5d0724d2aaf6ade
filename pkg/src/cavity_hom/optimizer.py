"""Feedback shaping of a piecewise-linear drive so one Lambda emitter matches another.

Each iteration interpolates the knots into a drive, simulates the interfered
emitter, bins its photon flux into segment averages, and nudges knots by
``eta * gain * (target - output)``.  The HOM visibility against the reference
source is the value function: training stops early once it drops.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CoherenceMatrix, PhotonWavefunction, TimeGrid, simulate, trapezoid_weights
from .interference import normalize_coherence, overlap
from .models import (
    DriveField,
    GaussianDrive,
    LambdaParams,
    PiecewiseLinearDrive,
    ZeroDrive,
    build_lambda,
)

log = logging.getLogger(__name__)

SCHEDULES = ("sequential", "global")
CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
VISIBILITY_DECREASED = "visibility_decreased"


@dataclass(frozen=True)
class TargetDataset:
    values: np.ndarray
    n_segments: int
    dt_seg: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.n_segments < 2 or len(values) != self.n_segments:
            raise ValueError("target needs n_segments >= 2 values")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("target values must be finite and non-negative")


@dataclass(frozen=True)
class OptimizerConfig:
    """Loop settings.

    ``schedule="sequential"`` trains one time segment at a time, in order,
    feeding each segment's error to the knot that closes it, for ``passes``
    sweeps over the pulse.  ``schedule="global"`` updates every knot at once
    with its own segment's error, once per iteration.  ``max_iterations``
    bounds the iterations per segment (sequential) or in total (global).
    """

    eta: float = 1.0
    max_iterations: int = 30
    error_tolerance: float = 1e-4
    n_segments: int = 40
    gain: float = 10.0
    schedule: str = "sequential"
    passes: int = 2

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.error_tolerance > 0:
            raise ValueError("error_tolerance must be > 0")
        if self.n_segments < 2:
            raise ValueError("n_segments must be >= 2")
        if not self.gain > 0:
            raise ValueError("gain must be > 0")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")


@dataclass(frozen=True)
class OptimizationResult:
    drive: PiecewiseLinearDrive
    visibility_history: list[float]
    final_visibility: float
    status: str
    iterations: int
    initial_visibility: float
    final_errors: np.ndarray = field(repr=False)


def discretize_wavefunction(phi: PhotonWavefunction, n_segments: int) -> TargetDataset:
    """Segment averages of the photon flux, each by the trapezoid rule."""
    n = phi.grid.n_steps
    if n_segments > n:
        raise ValueError(f"n_segments={n_segments} exceeds the {n} grid steps")
    if n % n_segments:
        raise ValueError(f"n_segments={n_segments} must divide the {n} grid steps evenly")
    per = n // n_segments
    dt = phi.grid.dt
    v = phi.values
    seg = v[:-1].reshape(n_segments, per)
    integrals = dt * (seg.sum(axis=1) - 0.5 * seg[:, 0] + 0.5 * v[per::per])
    dt_seg = per * dt
    return TargetDataset(np.maximum(integrals / dt_seg, 0.0), n_segments, dt_seg)


def feedback_update(knots, errors, eta: float, gain: float = 1.0) -> np.ndarray:
    knots = np.asarray(knots, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if knots.shape != errors.shape:
        raise ValueError(f"length mismatch: {knots.shape} knots vs {errors.shape} errors")
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return np.maximum(0.0, knots + eta * gain * errors)


def initial_knots(drive: DriveField, n_segments: int, dt_seg: float) -> np.ndarray:
    t = np.arange(n_segments + 1) * dt_seg
    if isinstance(drive, PiecewiseLinearDrive) and len(drive.knots) == n_segments + 1 and np.isclose(drive.dt, dt_seg):
        return np.array(drive.knots, dtype=float)
    return np.maximum(0.0, np.asarray(drive(t), dtype=float))


class _Evaluator:
    """Simulates knot vectors, remembering recent results."""

    def __init__(self, target, interfered, reference_g, grid, gamma32_target):
        self.target = target
        self.interfered = interfered
        self.reference = normalize_coherence(reference_g)
        self.grid = grid
        self.gamma32_target = gamma32_target
        self._cache: dict[bytes, tuple[float, np.ndarray]] = {}
        self.n_simulations = 0

    def drive(self, knots):
        return PiecewiseLinearDrive(tuple(knots), self.target.dt_seg)

    def __call__(self, knots: np.ndarray) -> tuple[float, np.ndarray]:
        key = knots.tobytes()
        if key in self._cache:
            return self._cache[key]
        self.n_simulations += 1
        model = build_lambda(self.interfered, self.drive(knots), self.gamma32_target)
        em = simulate(model, self.grid)
        out = discretize_wavefunction(em.wavefunction, self.target.n_segments)
        errors = self.target.values - out.values
        if em.coherence.empty:
            v = 0.0
        else:
            v = overlap(self.reference, normalize_coherence(em.coherence))
        if len(self._cache) > 8:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = (v, errors)
        return v, errors


def optimize_drive(
    target: TargetDataset,
    interfered: LambdaParams,
    reference_G: CoherenceMatrix,
    config: OptimizerConfig = OptimizerConfig(),
    initial: DriveField | None = None,
    grid: TimeGrid | None = None,
    gamma32_target: str = "g0",
) -> OptimizationResult:
    grid = grid or reference_G.grid
    if grid != reference_G.grid:
        raise ValueError("optimisation grid must match the reference coherence grid")
    if target.n_segments != config.n_segments:
        raise ValueError("target and config disagree on n_segments")
    if not np.isclose(target.n_segments * target.dt_seg, grid.t_end):
        raise ValueError("target segments must span the simulation window")
    if initial is None:
        initial = ZeroDrive()
    evaluate = _Evaluator(target, interfered, reference_G, grid, gamma32_target)
    knots = initial_knots(initial, target.n_segments, target.dt_seg)
    if config.schedule == "global":
        best, history, status, iterations = _run_global(evaluate, knots, config)
    else:
        best, history, status, iterations = _run_sequential(evaluate, knots, config)
    v_best, e_best = evaluate(best)
    if history[-1] != v_best:
        history.append(v_best)
    log.info("optimisation %s after %d iterations: V %.4f -> %.4f (%d simulations)",
             status, iterations, history[0], v_best, evaluate.n_simulations)
    return OptimizationResult(
        drive=evaluate.drive(best),
        visibility_history=history,
        final_visibility=v_best,
        status=status,
        iterations=iterations,
        initial_visibility=history[0],
        final_errors=e_best,
    )


def _run_global(evaluate, knots, config):
    history = []
    best, best_v = knots, -np.inf
    prev_v = None
    status = MAX_ITERATIONS
    it = 0
    for it in range(1, config.max_iterations + 1):
        v, e = evaluate(knots)
        history.append(v)
        if prev_v is not None and v < prev_v:
            status = VISIBILITY_DECREASED
            break
        if v > best_v:
            best, best_v = knots, v
        if np.mean(np.abs(e)) < config.error_tolerance:
            status = CONVERGED
            break
        prev_v = v
        # the closing knot has no segment of its own
        knots = feedback_update(knots, np.append(e, 0.0), config.eta, config.gain)
    return best, history, status, it


def _run_sequential(evaluate, knots, config):
    knots = knots.copy()
    v, e = evaluate(knots)
    history = [v]
    decreased = False
    iterations = 0
    for _ in range(config.passes):
        for seg in range(len(knots) - 1):
            k = seg + 1
            for _ in range(config.max_iterations):
                if abs(e[seg]) < config.error_tolerance:
                    break
                old = knots[k]
                knots[k] = max(0.0, old + config.eta * config.gain * e[seg])
                iterations += 1
                v_new, e_new = evaluate(knots)
                history.append(v_new)
                if v_new < v:
                    knots[k] = old
                    decreased = True
                    break
                v, e = v_new, e_new
    if np.mean(np.abs(e)) < config.error_tolerance:
        status = CONVERGED
    elif decreased:
        status = VISIBILITY_DECREASED
    else:
        status = MAX_ITERATIONS
    return knots, history, status, iterations


def reference_target(
    reference: LambdaParams,
    reference_drive: DriveField,
    grid: TimeGrid,
    n_segments: int,
    gamma32_target: str = "g0",
) -> tuple[TargetDataset, CoherenceMatrix, PhotonWavefunction]:
    """Target dataset and coherence of the reference emitter."""
    em = simulate(build_lambda(reference, reference_drive, gamma32_target), grid)
    return discretize_wavefunction(em.wavefunction, n_segments), em.coherence, em.wavefunction


REFERENCE_PARAMS = LambdaParams(delta_c=0.0, delta_d=0.0, g=5.0, kappa=1.25, gamma=1.0)
REFERENCE_DRIVE = GaussianDrive(6.0, 15.0, 5.0)
