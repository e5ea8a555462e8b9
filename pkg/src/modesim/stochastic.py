"""Random-waveguide perturbation statistics.

A deformed waveguide couples its guided modes through a coupling coefficient
proportional to a stationary zero-mean Gaussian process f(z) with
autocovariance

    <f(z) f(z - u)> = sigma^2 exp(-(u / D)^2)

where D is the correlation length.  This module samples realizations of
f(z) by circulant embedding (exact target covariance on the grid) and
evaluates the closed-form decoherence rates

    gamma = sqrt(pi) sigma^2 D exp(-(D dbeta / 2)^2) |K|^2
    kappa = 2 sigma^2 D F(D dbeta / 2) |K|^2

with F the Dawson function, valid in the weak-coupling regime where the
mode-beat rate dbeta dominates both rates.

Reproducibility: paths are generated with numpy's seeded PCG64 generator;
an ensemble uses seed = base_seed + realization_index for realization i, so
results are independent of scheduling order.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import dawsn

from ._errors import NumericalError
from ._io import write_csv

__all__ = [
    "PerturbationModel",
    "SampledPath",
    "RateConstants",
    "sample_path",
    "rates",
    "export_path_csv",
]

#: dz must resolve the correlation length at least this finely.
MAX_DZ_FRACTION = 1.0 / 8.0
#: the sampled window must decorrelate: count * dz >= this many D.
MIN_WINDOW_CORRELATION_LENGTHS = 20.0
#: validity margin for the closed-form rates: |dbeta| >= 100 max(gamma, |kappa|).
REGIME_MARGIN = 100.0


@dataclass(frozen=True)
class PerturbationModel:
    """Statistics of the waveguide deformation and its coupling strength.

    sigma is the RMS amplitude of f(z), corr_length the Gaussian correlation
    length D in meters, and k_ab the z-independent coupling strength (1/m per
    unit f).  k_ab may be complex; the closed-form rates use only |k_ab|^2.
    """

    sigma: float
    corr_length: float
    k_ab: complex

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.corr_length <= 0:
            raise ValueError("corr_length must be positive")


@dataclass(frozen=True, eq=False)
class SampledPath:
    """One realization of f(z) on a uniform grid z_i = i * dz."""

    values: np.ndarray
    dz: float
    seed: int

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] < 2:
            raise ValueError("path must hold at least 2 samples")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return int(self.values.shape[0])

    @property
    def length(self) -> float:
        """Propagation length covered when each sample drives one dz step."""
        return self.count * self.dz


@dataclass(frozen=True)
class RateConstants:
    """Decoherence rate gamma and coherent rate shift kappa, both 1/m.

    regime_ok records whether the closed forms are trustworthy, i.e. whether
    the mode beat dominates: |dbeta| >= 100 max(gamma, |kappa|).
    """

    gamma: float
    kappa: float
    regime_ok: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


@functools.lru_cache(maxsize=8)
def _circulant_eigenvalues(sigma: float, corr_length: float, dz: float, size: int) -> np.ndarray:
    # cached: an ensemble draws thousands of paths from one embedding
    j = np.arange(size)
    lag = np.minimum(j, size - j) * dz
    first_row = sigma * sigma * np.exp(-((lag / corr_length) ** 2))
    eig = np.fft.fft(first_row).real
    eig.setflags(write=False)
    return eig


def sample_path(model: PerturbationModel, dz: float, count: int, seed: int) -> SampledPath:
    """Sample one realization of f(z) with the Gaussian autocovariance.

    Uses circulant embedding: the covariance is embedded in a circulant
    matrix whose FFT gives its eigenvalues, and one FFT of scaled complex
    white noise returns a Gaussian vector with exactly the target covariance
    on the grid.  Deterministic for fixed (model, dz, count, seed).
    """
    if dz <= 0 or count < 2:
        raise ValueError("need dz > 0 and count >= 2")
    if dz > model.corr_length * MAX_DZ_FRACTION * (1 + 1e-12):
        raise ValueError(
            f"dz={dz:g} does not resolve the correlation length; need dz <= D/8 = "
            f"{model.corr_length * MAX_DZ_FRACTION:g}"
        )
    if count * dz < MIN_WINDOW_CORRELATION_LENGTHS * model.corr_length * (1 - 1e-12):
        raise ValueError(
            f"window count*dz={count * dz:g} too short; need >= 20 D = "
            f"{MIN_WINDOW_CORRELATION_LENGTHS * model.corr_length:g}"
        )
    if model.sigma == 0.0:
        return SampledPath(np.zeros(count), dz, seed)

    size = 1 << max(1, int(math.ceil(math.log2(2 * (count - 1)))))
    eigenvalues = None
    for _ in range(4):  # initial embedding plus up to 3 doublings
        eig = _circulant_eigenvalues(model.sigma, model.corr_length, dz, size)
        if eig.min() >= -1e-12 * eig.max():
            eigenvalues = np.clip(eig, 0.0, None)
            break
        size *= 2
    if eigenvalues is None:
        raise NumericalError("circulant embedding not positive semidefinite after 3 doublings")

    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((2, size))
    spectrum = np.sqrt(eigenvalues / size) * (draws[0] + 1j * draws[1])
    values = np.fft.fft(spectrum).real[:count]
    return SampledPath(values, dz, seed)


def rates(model: PerturbationModel, delta_beta: float) -> RateConstants:
    """Closed-form decoherence rates for a given mode-beat rate delta_beta.

    kappa is evaluated through the Dawson function F: the imaginary-argument
    error function in the textbook expression reduces to
    kappa = 2 sigma^2 D F(D dbeta / 2) |K|^2 exactly.  gamma is even and
    monotonically decreasing in |dbeta|; kappa is odd.
    """
    x = model.corr_length * delta_beta / 2.0
    coupling_sq = abs(model.k_ab) ** 2
    gamma = math.sqrt(math.pi) * model.sigma ** 2 * model.corr_length * math.exp(-x * x) * coupling_sq
    kappa = 2.0 * model.sigma ** 2 * model.corr_length * float(dawsn(x)) * coupling_sq
    strongest = max(gamma, abs(kappa))
    regime_ok = strongest == 0.0 or abs(delta_beta) >= REGIME_MARGIN * strongest
    return RateConstants(gamma=gamma, kappa=kappa, regime_ok=regime_ok)


def export_path_csv(path_obj: SampledPath, destination) -> None:
    """Write one realization as CSV with columns (z_m, f)."""
    z = np.arange(path_obj.count) * path_obj.dz
    write_csv(destination, ("z_m", "f"), zip(z.tolist(), path_obj.values.tolist()))
