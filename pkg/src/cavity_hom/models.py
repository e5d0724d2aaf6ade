"""Two-level and Lambda-type cavity-QED emitters in a single-excitation basis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .linalg import as_operator, check_density_matrix, is_hermitian, transition_op

# two-level basis
TL_E0, TL_G1, TL_G0 = 0, 1, 2
TWO_LEVEL_LABELS = ("|e,0>", "|g,1>", "|g,0>")

# Lambda basis
LA_U0, LA_E0, LA_G1, LA_G0 = 0, 1, 2, 3
LAMBDA_LABELS = ("|u,0>", "|e,0>", "|g,1>", "|g,0>")

GAMMA32_TARGETS = ("g0", "g1")


def _require_finite(**values):
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v}")


def _check_rates(g, kappa, gamma):
    if g <= 0:
        raise ValueError(f"g must be > 0, got {g}")
    if kappa <= 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")


@dataclass(frozen=True)
class TwoLevelParams:
    delta_c: float = 0.0
    g: float = 1.0
    kappa: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        _require_finite(delta_c=self.delta_c, g=self.g, kappa=self.kappa, gamma=self.gamma)
        _check_rates(self.g, self.kappa, self.gamma)


@dataclass(frozen=True)
class LambdaParams:
    delta_c: float = 0.0
    delta_d: float = 0.0
    g: float = 1.0
    kappa: float = 1.0
    gamma: float = 0.0
    gamma12_fraction: float = 5.0 / 9.0
    gamma32_fraction: float = 4.0 / 9.0

    def __post_init__(self):
        _require_finite(
            delta_c=self.delta_c, delta_d=self.delta_d, g=self.g, kappa=self.kappa,
            gamma=self.gamma, gamma12_fraction=self.gamma12_fraction,
            gamma32_fraction=self.gamma32_fraction,
        )
        _check_rates(self.g, self.kappa, self.gamma)
        for name in ("gamma12_fraction", "gamma32_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.gamma12_fraction + self.gamma32_fraction - 1.0) > 1e-12:
            raise ValueError("gamma12_fraction + gamma32_fraction must equal 1")

    @property
    def gamma12(self) -> float:
        return self.gamma * self.gamma12_fraction

    @property
    def gamma32(self) -> float:
        return self.gamma * self.gamma32_fraction


# --- drive fields -----------------------------------------------------------


@dataclass(frozen=True)
class ZeroDrive:
    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class GaussianDrive:
    """``amplitude * exp(-((t - center) / width)**2)``."""

    amplitude: float
    center: float
    width: float

    def __post_init__(self):
        _require_finite(amplitude=self.amplitude, center=self.center, width=self.width)
        if self.width <= 0:
            raise ValueError(f"Gaussian width must be > 0, got {self.width}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.exp(-(((t - self.center) / self.width) ** 2))


@dataclass(frozen=True)
class PiecewiseLinearDrive:
    """Linear interpolation between knots placed at ``t_i = i * dt``.

    Clamped to the first knot for ``t <= 0`` and to the last for ``t >= N * dt``.
    """

    knots: tuple[float, ...]
    dt: float

    def __post_init__(self):
        knots = tuple(float(k) for k in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2:
            raise ValueError("a piecewise-linear drive needs at least 2 knots")
        if not all(math.isfinite(k) for k in knots):
            raise ValueError("drive knots must be finite")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"knot spacing dt must be > 0, got {self.dt}")

    @property
    def knot_times(self) -> np.ndarray:
        return np.arange(len(self.knots)) * self.dt

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.knot_times, self.knots)


DriveField = Union[ZeroDrive, GaussianDrive, PiecewiseLinearDrive]


def drive_eval(d: DriveField, t):
    """Drive amplitude at time(s) ``t``; scalar in, float out."""
    out = d(t)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class _PhasedDrive:
    # Omega(t) * exp(sign * i * delta * t)
    drive: DriveField
    delta: float
    sign: int

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        amp = self.drive(t)
        if self.delta == 0.0:
            return amp.astype(complex)
        return amp * np.exp(1j * self.sign * self.delta * t)


# --- model container --------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Everything the dynamics needs to know about one emitter.

    The Hamiltonian is ``h_static + sum_k f_k(t) * H_k`` for the
    ``(f_k, H_k)`` pairs in ``h_terms``; ``f_k`` accept numpy arrays of times.
    Collapse operators carry their rate factors already.
    """

    h_static: np.ndarray
    h_terms: tuple[tuple[Callable, np.ndarray], ...]
    collapse_ops: tuple[np.ndarray, ...]
    initial_state: np.ndarray
    cavity_lowering: np.ndarray
    kappa: float
    basis_labels: tuple[str, ...]
    params: object = field(default=None, compare=False)

    def __post_init__(self):
        dim = self.h_static.shape[0]
        ops = [self.h_static, self.initial_state, self.cavity_lowering, *self.collapse_ops]
        ops += [h for _, h in self.h_terms]
        if any(o.shape != (dim, dim) for o in ops):
            raise ValueError("all model operators must share one dimension")
        if len(self.basis_labels) != dim:
            raise ValueError("one basis label per basis state is required")
        check_density_matrix(self.initial_state)

    @property
    def dim(self) -> int:
        return self.h_static.shape[0]

    def hamiltonian(self, t: float) -> np.ndarray:
        h = np.array(self.h_static)
        for coeff, op in self.h_terms:
            h = h + complex(coeff(t)) * op
        return h

    @property
    def photon_number_op(self) -> np.ndarray:
        a = self.cavity_lowering
        return a.conj().T @ a


def build_two_level(p: TwoLevelParams) -> ModelSpec:
    d = 3
    sig = lambda i, j: transition_op(i, j, d)  # noqa: E731
    h = p.delta_c * sig(TL_G1, TL_G1) + p.g * (sig(TL_G1, TL_E0) + sig(TL_E0, TL_G1))
    a = sig(TL_G0, TL_G1)
    collapse = (
        as_operator(math.sqrt(p.kappa) * a),
        as_operator(math.sqrt(p.gamma) * sig(TL_G0, TL_E0)),
    )
    return ModelSpec(
        h_static=as_operator(h),
        h_terms=(),
        collapse_ops=collapse,
        initial_state=sig(TL_E0, TL_E0),
        cavity_lowering=a,
        kappa=p.kappa,
        basis_labels=TWO_LEVEL_LABELS,
        params=p,
    )


def build_lambda(p: LambdaParams, drive: DriveField, gamma32_target: str = "g0") -> ModelSpec:
    """Rotating-frame Lambda system driven on |u,0> <-> |e,0>.

    ``gamma32_target`` picks where e -> g spontaneous emission lands: ``"g0"``
    (photon lost to free space) or ``"g1"`` (the literal sigma_32 reading).
    """
    if gamma32_target not in GAMMA32_TARGETS:
        raise ValueError(f"gamma32_target must be one of {GAMMA32_TARGETS}, got {gamma32_target!r}")
    d = 4
    sig = lambda i, j: transition_op(i, j, d)  # noqa: E731
    h0 = p.delta_c * sig(LA_G1, LA_G1) + p.g * (sig(LA_G1, LA_E0) + sig(LA_E0, LA_G1))
    terms = []
    if not isinstance(drive, ZeroDrive):
        terms = [
            (_PhasedDrive(drive, p.delta_d, -1), sig(LA_E0, LA_U0)),
            (_PhasedDrive(drive, p.delta_d, +1), sig(LA_U0, LA_E0)),
        ]
    a = sig(LA_G0, LA_G1)
    target = LA_G0 if gamma32_target == "g0" else LA_G1
    collapse = (
        as_operator(math.sqrt(p.kappa) * a),
        as_operator(math.sqrt(p.gamma12) * sig(LA_U0, LA_E0)),
        as_operator(math.sqrt(p.gamma32) * sig(target, LA_E0)),
    )
    return ModelSpec(
        h_static=as_operator(h0),
        h_terms=tuple(terms),
        collapse_ops=collapse,
        initial_state=sig(LA_U0, LA_U0),
        cavity_lowering=a,
        kappa=p.kappa,
        basis_labels=LAMBDA_LABELS,
        params=p,
    )


def check_hermitian_hamiltonian(m: ModelSpec, times: Sequence[float]) -> bool:
    return all(is_hermitian(m.hamiltonian(t)) for t in times)
