"""Phase controller and Y-splitter measurement algebra for one rail.

An ideal adiabatic Y-splitter maps the symmetric combination
|+> = (|TE0> + |TE1>)/sqrt(2) into one branch and the antisymmetric
|-> = (|TE0> - |TE1>)/sqrt(2) into the other.  A phase controller ahead of
the splitter imparts a differential phase 2*theta between the modes, giving
the branch projectors

    I+(theta) = P(theta)^dag |+><+| P(theta) = 1/2 [[1, e^{-2i theta}],
                                                    [e^{+2i theta}, 1]]

and I-(theta) with the off-diagonal signs flipped.  Convention: the
controller P(theta) = diag(e^{+i theta}, e^{-i theta}) advances TE0 and
retards TE1, so that the measured intensity difference of a decohered
equal superposition is exp(-gamma L) cos[2 theta + (dbeta + kappa) L].
theta is the half-angle of the total differential phase 2*theta.

The splitter is lossless here ("the projectors are exact"); the physical
splitter including radiation loss lives in :mod:`modesim.bpm`.
"""
from __future__ import annotations

import numpy as np

from ._io import write_csv
from .decoherence import EvolutionParams, analytic_single_rail
from .states import DensityMatrix, PureState, density_of, expectation, superpose

__all__ = [
    "phase_op",
    "splitter_states",
    "analyzer_projectors",
    "intensity_split_operator",
    "intensities",
    "intensity_difference_evolved",
    "export_theta_scan_csv",
]


def phase_op(theta: float) -> np.ndarray:
    """Phase-controller unitary diag(e^{+i theta}, e^{-i theta})."""
    return np.diag([np.exp(1j * theta), np.exp(-1j * theta)]).astype(np.complex128)


def splitter_states() -> tuple[PureState, PureState]:
    """The symmetric and antisymmetric branch states (|+>, |->)."""
    return superpose(1.0, 1.0), superpose(1.0, -1.0)


def analyzer_projectors(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Branch projectors (I+, I-) of the phase controller plus Y-splitter.

    Each is Hermitian and idempotent, I+ + I- is the identity, and
    I+- (theta) = P(theta)^dag |+-><+-| P(theta) holds entrywise.
    """
    off = np.exp(-2j * theta)
    plus = 0.5 * np.array([[1.0, off], [np.conj(off), 1.0]], dtype=np.complex128)
    minus = 0.5 * np.array([[1.0, -off], [-np.conj(off), 1.0]], dtype=np.complex128)
    return plus, minus


def intensity_split_operator(theta: float) -> np.ndarray:
    """The intensity-difference observable I+(theta) - I-(theta)."""
    plus, minus = analyzer_projectors(theta)
    return plus - minus


def intensities(rho: DensityMatrix, theta: float) -> tuple[float, float]:
    """Branch intensities (Tr rho I+, Tr rho I-); nonnegative, summing to 1."""
    plus, minus = analyzer_projectors(theta)
    return float(expectation(rho, plus).real), float(expectation(rho, minus).real)


def intensity_difference_evolved(c0: complex, c1: complex, params: EvolutionParams,
                                 theta: float) -> float:
    """Intensity difference <I+ - I-> for an input superposition after a
    random waveguide of length L and an analyzer at angle theta.

    Evaluated through the operator route: the input coherence is evolved by
    the closed-form map and traced against I+(theta) - I-(theta).  The result
    equals the closed form

        e^{-gamma L} [c0 conj(c1) e^{i (dbeta + kappa) L} e^{2 i theta} + c.c.]

    which reduces to e^{-gamma L} cos[2 theta + (dbeta + kappa) L] for an
    equal superposition.
    """
    if abs(abs(c0) ** 2 + abs(c1) ** 2 - 1.0) > 1e-12:
        raise ValueError("input coefficients must satisfy |c0|^2 + |c1|^2 = 1")
    rho0 = density_of(superpose(c0, c1))
    evolved = analytic_single_rail(rho0, params)
    return float(expectation(evolved, intensity_split_operator(theta)).real)


def export_theta_scan_csv(rho: DensityMatrix, thetas, destination) -> None:
    """Write an analyzer-angle scan as CSV.

    Columns: theta_rad, I_plus, I_minus, difference.
    """
    rows = []
    for theta in thetas:
        plus, minus = intensities(rho, float(theta))
        rows.append((float(theta), plus, minus, plus - minus))
    write_csv(destination, ("theta_rad", "I_plus", "I_minus", "difference"), rows)
