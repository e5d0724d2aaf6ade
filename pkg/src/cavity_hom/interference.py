"""Hong-Ou-Mandel correlation and visibility between two photon sources."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import CoherenceMatrix, trapezoid_weights

G2_LIMIT = 0.5


class NoPhotonError(ValueError):
    pass


@dataclass(frozen=True)
class HOMResult:
    tau_values: np.ndarray
    g2_values: np.ndarray
    g2_zero: float
    g2_limit: float
    g2_limit_numeric: float
    visibility: float
    raw_overlap: float  # Re overlap of the unnormalised coherences


def normalize_coherence(g: CoherenceMatrix) -> CoherenceMatrix:
    if g.empty:
        raise NoPhotonError(f"no photon emitted (photon number {g.photon_number:.3g})")
    return CoherenceMatrix.from_entries(g.grid, g.entries / g.photon_number)


def _check_grids(ga: CoherenceMatrix, gb: CoherenceMatrix):
    if ga.grid != gb.grid:
        raise ValueError(f"grid mismatch: {ga.grid} vs {gb.grid}")


def _shift_index(grid, tau: float) -> int:
    s = int(round(tau / grid.dt))
    if abs(tau - s * grid.dt) > 1e-9 * max(1.0, abs(tau)):
        raise ValueError(f"tau={tau} is not a multiple of the grid step {grid.dt}")
    return s


def overlap(ga: CoherenceMatrix, gb: CoherenceMatrix, shift: int = 0) -> float:
    """Re of the trapezoid double integral of conj(GA(t, t')) GB(t - tau, t')."""
    _check_grids(ga, gb)
    w = trapezoid_weights(ga.grid)
    n = len(w)
    if abs(shift) >= n:
        return 0.0
    rows_a = slice(max(shift, 0), n + min(shift, 0))
    rows_b = slice(max(-shift, 0), n - max(shift, 0))
    a = ga.entries[rows_a]
    b = gb.entries[rows_b]
    return float(np.real(w[rows_a] @ (np.conj(a) * b) @ w))


def hom_correlation(ga: CoherenceMatrix, gb: CoherenceMatrix, tau: float) -> float:
    _check_grids(ga, gb)
    s = _shift_index(ga.grid, tau)
    return 0.5 * (1.0 - overlap(normalize_coherence(ga), normalize_coherence(gb), s))


def hom_curve(ga: CoherenceMatrix, gb: CoherenceMatrix, shifts=None) -> tuple[np.ndarray, np.ndarray]:
    """g2 at every grid shift in ``shifts`` (default: all of -N..N)."""
    _check_grids(ga, gb)
    a = normalize_coherence(ga).entries
    b = normalize_coherence(gb).entries
    w = trapezoid_weights(ga.grid)
    n = len(w)
    if shifts is None:
        shifts = np.arange(-(n - 1), n)
    shifts = np.asarray(shifts, dtype=int)
    # c[i, k] = sum_j conj(a[i, j]) w_j b[k, j]; overlap(s) = sum_i w_i c[i, i - s]
    c = (np.conj(a) * w) @ b.T
    c *= w[:, None]
    ov = np.array([np.real(np.trace(c, offset=-s)) if abs(s) < n else 0.0 for s in shifts])
    return shifts * ga.grid.dt, 0.5 * (1.0 - ov)


def visibility_value(ga: CoherenceMatrix, gb: CoherenceMatrix) -> float:
    """V = 1 - g2[0] / 0.5, which reduces to the normalised zero-delay overlap."""
    g2_zero = hom_correlation(ga, gb, 0.0)
    return 1.0 - g2_zero / G2_LIMIT


def visibility(ga: CoherenceMatrix, gb: CoherenceMatrix, tau_sweep: bool = True) -> HOMResult:
    _check_grids(ga, gb)
    grid = ga.grid
    if tau_sweep:
        taus, g2 = hom_curve(ga, gb)
    else:
        taus = np.array([0.0, grid.t_end])
        g2 = np.array([hom_correlation(ga, gb, t) for t in taus])
    g2_zero = float(g2[np.argmin(np.abs(taus))])
    g2_limit_numeric = float(g2[np.argmin(np.abs(taus - grid.t_end))])
    return HOMResult(
        tau_values=taus,
        g2_values=g2,
        g2_zero=g2_zero,
        g2_limit=G2_LIMIT,
        g2_limit_numeric=g2_limit_numeric,
        visibility=1.0 - g2_zero / G2_LIMIT,
        raw_overlap=overlap(ga, gb, 0),
    )
