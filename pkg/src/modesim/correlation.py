"""Two-rail correlation measurements: Bell correlation, CHSH, group delays.

The normalized correlation of the two analyzers is

    E(theta1, theta2) = <(I1+ - I1-)(I2+ - I2-)> / <(I1+ + I1-)(I2+ + I2-)>

whose denominator equals 1 for any unit-trace state because the branch
projectors are complete; it is still computed explicitly and asserted.  The
CHSH combination |E(t1,t2) - E(t1,t2') + E(t1',t2') + E(t1',t2)| reaches
2 sqrt(2) for the maximally entangled state and never exceeds 2 for the
product state.

The group-delay operator is diagonal in the mode basis with per-mode
eigenvalues (tau0, tau1); its two-rail covariance separates entangled from
product states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._io import write_csv
from .analyzer import analyzer_projectors, intensity_split_operator
from .states import DensityMatrix, partial_trace

__all__ = [
    "ChshAngles",
    "DelayPair",
    "rail_embed",
    "correlation_E",
    "chsh_B",
    "chsh_scan",
    "delay_covariance",
    "export_bell_csv",
    "export_chsh_csv",
]

_DENOMINATOR_TOL = 1e-12


@dataclass(frozen=True)
class ChshAngles:
    """The four analyzer settings (theta1, theta1p, theta2, theta2p)."""

    theta1: float
    theta1p: float
    theta2: float
    theta2p: float


@dataclass(frozen=True)
class DelayPair:
    """Group delays of TE0 and TE1 over the measured length, in seconds."""

    tau0: float
    tau1: float


def rail_embed(op: np.ndarray, rail: str) -> np.ndarray:
    """Embed a single-rail operator into the two-rail space.

    rail "c" gives op (x) I (control is the left tensor factor), rail "t"
    gives I (x) op.
    """
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (2, 2):
        raise ValueError(f"expected a 2x2 operator, got shape {op.shape}")
    if rail == "c":
        return np.kron(op, np.eye(2, dtype=np.complex128))
    if rail == "t":
        return np.kron(np.eye(2, dtype=np.complex128), op)
    raise ValueError(f"rail must be 'c' or 't', got {rail!r}")


def correlation_E(rho4: DensityMatrix, theta1: float, theta2: float) -> float:
    """Normalized two-analyzer correlation of a two-rail state."""
    if rho4.rails != 2:
        raise ValueError("correlation_E expects a two-rail 4x4 state")
    diff_c = rail_embed(intensity_split_operator(theta1), "c")
    diff_t = rail_embed(intensity_split_operator(theta2), "t")
    plus1, minus1 = analyzer_projectors(theta1)
    plus2, minus2 = analyzer_projectors(theta2)
    sum_c = rail_embed(plus1 + minus1, "c")
    sum_t = rail_embed(plus2 + minus2, "t")
    numerator = float(np.trace(rho4.matrix @ diff_c @ diff_t).real)
    denominator = float(np.trace(rho4.matrix @ sum_c @ sum_t).real)
    if abs(denominator - 1.0) > _DENOMINATOR_TOL:
        raise ValueError(f"projector completeness violated: denominator {denominator!r}")
    return numerator / denominator


def chsh_B(rho4: DensityMatrix, angles: ChshAngles) -> float:
    """|B| of the four-setting CHSH combination for the given state."""
    value = (
        correlation_E(rho4, angles.theta1, angles.theta2)
        - correlation_E(rho4, angles.theta1, angles.theta2p)
        + correlation_E(rho4, angles.theta1p, angles.theta2p)
        + correlation_E(rho4, angles.theta1p, angles.theta2)
    )
    return abs(value)


def chsh_scan(rho4: DensityMatrix, grid_n: int) -> tuple[float, ChshAngles]:
    """Exhaustive maximum of |B| over a uniform 4D grid of angles in [0, pi).

    Returns the maximum and the attaining angles; ties resolve to the
    lexicographically smallest (theta1, theta1p, theta2, theta2p) index, so
    the result is deterministic however the scan is scheduled.
    """
    if grid_n < 8:
        raise ValueError("grid_n must be at least 8")
    thetas = np.arange(grid_n) * math.pi / grid_n
    e_table = np.empty((grid_n, grid_n))
    for i, t1 in enumerate(thetas):
        for k, t2 in enumerate(thetas):
            e_table[i, k] = correlation_E(rho4, float(t1), float(t2))
    # B[i,j,k,l] = E[i,k] - E[i,l] + E[j,l] + E[j,k]
    b = (
        e_table[:, None, :, None]
        - e_table[:, None, None, :]
        + e_table[None, :, None, :]
        + e_table[None, :, :, None]
    )
    flat_index = int(np.argmax(np.abs(b)))
    i, j, k, l = np.unravel_index(flat_index, b.shape)
    best = ChshAngles(float(thetas[i]), float(thetas[j]), float(thetas[k]), float(thetas[l]))
    return float(abs(b[i, j, k, l])), best


def delay_covariance(rho4: DensityMatrix, delays: DelayPair) -> float:
    """Covariance <tau_c tau_t> - <tau_c><tau_t> of the two rails' delays.

    The single-rail delay operator is diag(tau0, tau1); the means are taken
    from the partial traces of the state.
    """
    if rho4.rails != 2:
        raise ValueError("delay_covariance expects a two-rail 4x4 state")
    tau_op = np.diag([delays.tau0, delays.tau1]).astype(np.complex128)
    joint = rail_embed(tau_op, "c") @ rail_embed(tau_op, "t")
    mean_joint = float(np.trace(rho4.matrix @ joint).real)
    mean_c = float(np.trace(partial_trace(rho4, "c").matrix @ tau_op).real)
    mean_t = float(np.trace(partial_trace(rho4, "t").matrix @ tau_op).real)
    return mean_joint - mean_c * mean_t


def export_bell_csv(rho4: DensityMatrix, thetas1, thetas2, destination) -> None:
    """Write a correlation surface as CSV with columns (theta1, theta2, E)."""
    rows = []
    for t1 in thetas1:
        for t2 in thetas2:
            rows.append((float(t1), float(t2), correlation_E(rho4, float(t1), float(t2))))
    write_csv(destination, ("theta1", "theta2", "E"), rows)


def export_chsh_csv(entries, destination) -> None:
    """Write CHSH rows (theta1, theta1p, theta2, theta2p, B) as CSV."""
    rows = [
        (angles.theta1, angles.theta1p, angles.theta2, angles.theta2p, float(value))
        for value, angles in entries
    ]
    write_csv(destination, ("theta1", "theta1p", "theta2", "theta2p", "B"), rows)
