"""Fixed-step Lindblad propagation and two-time coherences.

The generator is linear, so one step is a fixed matrix acting on the
vectorised state.  The state and the quantum-regression rows each stay inside
a small generator-invariant subspace, so the step matrices are built once per
model and grid on those subspaces and applied to reduced coordinates.

Two steppers are available.  ``magnus4`` (default) is the fourth-order
commutator-free Magnus scheme: the product of two exponentials of the
generator averaged over the Gauss points.  The Hamiltonian is affine in the
drive and the drive terms come in Hermitian-conjugate pairs, so each averaged
generator is again a Lindbladian with non-negative rates and each step is
completely positive.  ``rk4`` is the classical Runge-Kutta step; it is cheaper
but lets near-zero eigenvalues of rank-deficient states dip below zero at the
default step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .linalg import (
    TRACE_TOL,
    dagger,
    dissipator_superop,
    hamiltonian_superop,
    min_eigenvalue,
    right_superop,
)
from .models import ModelSpec

DEFAULT_T_END = 40.0
DEFAULT_N_STEPS = 800
EMPTY_PHOTON_NUMBER = 1e-9
INTEGRATORS = ("magnus4", "rk4")


class TraceDriftError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_end: float = DEFAULT_T_END
    n_steps: int = DEFAULT_N_STEPS
    integrator: str = "magnus4"

    def __post_init__(self):
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be > 0, got {self.t_end}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError(f"n_steps must be an integer >= 2, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_end, self.n_steps * factor, self.integrator)


def trapezoid_weights(grid: TimeGrid) -> np.ndarray:
    w = np.full(grid.n_steps + 1, grid.dt)
    w[0] = w[-1] = grid.dt / 2
    return w


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # (N+1, d, d)

    def trace_drift(self) -> float:
        return float(np.max(np.abs(np.trace(self.states, axis1=1, axis2=2) - 1.0)))

    def min_eigenvalue(self) -> float:
        return float(np.min(min_eigenvalue(self.states)))

    def populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.states, axis1=1, axis2=2))


@dataclass(frozen=True)
class PhotonWavefunction:
    grid: TimeGrid
    values: np.ndarray
    efficiency: float


@dataclass(frozen=True)
class CoherenceMatrix:
    """G(t_i, t_j) = kappa <a^+(t_i) a(t_j)> on a uniform grid."""

    grid: TimeGrid
    entries: np.ndarray
    photon_number: float

    @classmethod
    def from_entries(cls, grid: TimeGrid, entries: np.ndarray) -> "CoherenceMatrix":
        n = float(np.sum(trapezoid_weights(grid) * np.real(np.diagonal(entries))))
        return cls(grid, entries, n)

    @property
    def empty(self) -> bool:
        return self.photon_number < EMPTY_PHOTON_NUMBER

    def weighted_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of W^1/2 G W^1/2, i.e. of G viewed as an integral kernel."""
        s = np.sqrt(trapezoid_weights(self.grid))
        k = s[:, None] * self.entries * s[None, :]
        return np.linalg.eigvalsh(0.5 * (k + k.conj().T))


def lindblad_rhs(m: ModelSpec, x: np.ndarray, t: float) -> np.ndarray:
    """Lindblad generator applied to ``x`` (not necessarily Hermitian, may be stacked)."""
    if x.shape[-2:] != (m.dim, m.dim):
        raise ValueError(f"operator shape {x.shape} does not match model dimension {m.dim}")
    h = m.hamiltonian(t)
    out = -1j * (h @ x - x @ h)
    for c in m.collapse_ops:
        cd = dagger(c)
        cdc = cd @ c
        out = out + c @ x @ cd - 0.5 * (cdc @ x + x @ cdc)
    return out


def _liouvillian_parts(m: ModelSpec):
    static = hamiltonian_superop(m.h_static)
    for c in m.collapse_ops:
        static = static + dissipator_superop(c)
    terms = [(coeff, hamiltonian_superop(h)) for coeff, h in m.h_terms]
    return static, terms


def liouvillian(m: ModelSpec, t) -> np.ndarray:
    """Superoperator of ``lindblad_rhs`` at time(s) ``t``; stacked for array ``t``."""
    static, terms = _liouvillian_parts(m)
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + static.shape, dtype=complex)
    out[...] = static
    for coeff, sup in terms:
        out += np.asarray(coeff(t))[..., None, None] * sup
    return out


def _restricted_parts(m: ModelSpec, basis: np.ndarray | None):
    static, terms = _liouvillian_parts(m)
    if basis is None:
        return static, terms
    bh = basis.conj().T
    return bh @ static @ basis, [(coeff, bh @ sup @ basis) for coeff, sup in terms]


def rk4_propagators(m: ModelSpec, grid: TimeGrid, basis: np.ndarray | None = None) -> np.ndarray:
    """Step matrices M_n with vec(rho_{n+1}) = M_n vec(rho_n) for classical RK4.

    With ``basis`` (orthonormal columns spanning a generator-invariant
    subspace) the matrices act on coordinates in that subspace.
    """
    dt = grid.dt
    static, terms = _restricted_parts(m, basis)
    half_t = np.arange(2 * grid.n_steps + 1) * (dt / 2)
    half = np.empty(half_t.shape + static.shape, dtype=complex)
    half[...] = static
    for coeff, sup in terms:
        half += np.asarray(coeff(half_t))[..., None, None] * sup
    l1, l2, l3 = half[0:-1:2], half[1::2], half[2::2]
    eye = np.eye(static.shape[0])
    k1 = l1
    k2 = l2 @ (eye + (dt / 2) * k1)
    k3 = l2 @ (eye + (dt / 2) * k2)
    k4 = l3 @ (eye + dt * k3)
    return eye + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


_GAUSS = np.array([0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6])
_CF4 = np.array([[(3 - 2 * math.sqrt(3)) / 12, (3 + 2 * math.sqrt(3)) / 12],
                 [(3 + 2 * math.sqrt(3)) / 12, (3 - 2 * math.sqrt(3)) / 12]])


def magnus4_propagators(m: ModelSpec, grid: TimeGrid, basis: np.ndarray | None = None) -> np.ndarray:
    """Step matrices of the commutator-free fourth-order Magnus scheme.

    M_n = exp(dt (a L(t1) + b L(t2))) exp(dt (b L(t1) + a L(t2))) with t1, t2
    the Gauss points of step n and a + b = 1/2.  ``basis`` as for
    ``rk4_propagators``.
    """
    dt = grid.dt
    static, terms = _restricted_parts(m, basis)
    if not terms:
        step = expm(dt * static)
        return np.broadcast_to(step, (grid.n_steps,) + step.shape)
    t = grid.times[:-1, None] + dt * _GAUSS[None, :]  # (N, 2)
    gens = np.empty((2, grid.n_steps) + static.shape, dtype=complex)
    gens[...] = (dt / 2) * static
    for coeff, sup in terms:
        f = np.asarray(coeff(t))  # (N, 2)
        mix = dt * (f @ _CF4.T)  # (N, 2): weights of the later, then the earlier factor
        gens += mix.T[..., None, None] * sup
    exps = expm(gens)
    return exps[0] @ exps[1]


def step_propagators(m: ModelSpec, grid: TimeGrid, basis: np.ndarray | None = None) -> np.ndarray:
    if grid.integrator == "rk4":
        return rk4_propagators(m, grid, basis)
    return magnus4_propagators(m, grid, basis)


def _orth(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return u[:, :0]
    return u[:, s > tol * s[0]]


def invariant_subspace(m: ModelSpec, seeds: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the smallest subspace containing the
    columns of ``seeds`` and invariant under the generator at every time."""
    static, terms = _liouvillian_parts(m)
    gens = [static] + [sup for _, sup in terms]
    q = _orth(seeds)
    while True:
        grown = _orth(np.hstack([q] + [gen @ q for gen in gens]))
        if grown.shape[1] == q.shape[1] or grown.shape[1] == static.shape[0]:
            return grown
        q = grown


def regression_subspace(m: ModelSpec) -> np.ndarray:
    """Invariant subspace holding every vec(X a^+); regression rows never leave it."""
    return invariant_subspace(m, right_superop(dagger(m.cavity_lowering)))


def state_subspace(m: ModelSpec) -> np.ndarray:
    """Invariant subspace reachable from the initial state."""
    return invariant_subspace(m, np.asarray(m.initial_state, dtype=complex).reshape(-1, 1))


def evolve(m: ModelSpec, grid: TimeGrid) -> Trajectory:
    d = m.dim
    q = state_subspace(m)
    qh = q.conj().T
    props = step_propagators(m, grid, q)
    states = np.empty((grid.n_steps + 1, d, d), dtype=complex)
    rho = np.array(m.initial_state, dtype=complex)
    states[0] = rho
    c = qh @ rho.reshape(-1)
    for n in range(grid.n_steps):
        rho = (q @ (props[n] @ c)).reshape(d, d)
        rho = 0.5 * (rho + rho.conj().T)
        states[n + 1] = rho
        c = qh @ rho.reshape(-1)
    traj = Trajectory(grid, states)
    drift = traj.trace_drift()
    if not drift <= TRACE_TOL:
        raise TraceDriftError(
            f"trace drifted by {drift:.3g} over the trajectory; use a finer time grid "
            f"(n_steps > {grid.n_steps})"
        )
    return traj


def photon_wavefunction(traj: Trajectory, m: ModelSpec) -> PhotonWavefunction:
    n_op = m.photon_number_op
    values = m.kappa * np.real(np.einsum("ij,nji->n", n_op, traj.states))
    eff = float(np.sum(trapezoid_weights(traj.grid) * values))
    return PhotonWavefunction(traj.grid, values, eff)


def first_order_coherence(
    m: ModelSpec, grid: TimeGrid, traj: Trajectory | None = None
) -> CoherenceMatrix:
    """Two-time coherence via the quantum regression theorem.

    Row i starts from rho(t_i) a^+ and is carried forward by the generator
    that moves the state; all live rows advance together as one batch, in
    the invariant subspace from ``regression_subspace``.
    """
    if traj is None:
        traj = evolve(m, grid)
    elif traj.grid != grid:
        raise ValueError("trajectory grid does not match the requested grid")
    n = grid.n_steps + 1
    a = m.cavity_lowering
    q = regression_subspace(m)
    qh = q.conj().T
    seeds = (traj.states @ dagger(a)).reshape(n, -1) @ qh.T
    readout = (m.kappa * a.T.reshape(-1)) @ q  # kappa tr(a X) = readout . coefficients
    step_t = np.ascontiguousarray(np.swapaxes(step_propagators(m, grid, q), 1, 2))
    gt = np.zeros((n, n), dtype=complex)  # gt[j, i] = G(t_i, t_j), i <= j
    rows = np.zeros_like(seeds)
    for j in range(n):
        rows[j] = seeds[j]
        np.matmul(rows[: j + 1], readout, out=gt[j, : j + 1])
        if j < n - 1:
            rows[: j + 1] = rows[: j + 1] @ step_t[j]
    g = gt.T.copy()
    lower = np.tril_indices(n, -1)
    g[lower] = np.conj(gt[lower])
    # equal-time entries are real by construction; drop rounding residue
    g[np.diag_indices(n)] = np.real(np.diagonal(g))
    return CoherenceMatrix.from_entries(grid, g)


@dataclass(frozen=True)
class Emission:
    """State trajectory, photon flux and coherence of one simulated source."""

    model: ModelSpec
    trajectory: Trajectory
    wavefunction: PhotonWavefunction
    coherence: CoherenceMatrix | None


def simulate(m: ModelSpec, grid: TimeGrid, coherence: bool = True) -> Emission:
    traj = evolve(m, grid)
    phi = photon_wavefunction(traj, m)
    g = first_order_coherence(m, grid, traj) if coherence else None
    return Emission(m, traj, phi, g)
