"""Density-matrix evolution through random dual-mode waveguides.

Two routes are provided and checked against each other:

* the closed-form map: populations relax toward equal weights at rate
  2 gamma while the coherence rho01 is multiplied by
  exp([i (dbeta + kappa) - gamma] L), with (gamma, kappa) from
  :mod:`modesim.stochastic`;

* a per-realization Liouville integrator: each realization of the random
  coupling f(z) drives the 2x2 Hamiltonian

      H(z) = [[0, K f(z)], [conj(K) f(z), dbeta]]

  and the state is conjugated by the exact matrix exponential over each dz
  step, so trace and purity are conserved per realization.  Ensemble
  averaging the realizations reproduces the closed-form decay within Monte
  Carlo error in the regime dbeta >> gamma, kappa.

Free evolution (f = 0) advances rho01 by exp(+i dbeta z), which fixes the
sign convention used throughout.

Step unitaries are composed as SU(2) quaternions (scalar w and vector part
v, with U = w I - i v.sigma); this is algebraically identical to 2x2 matrix
products but runs on real arrays.  The composition over a path is reduced
pairwise (a balanced tree), which keeps rounding growth logarithmic.

Ensemble reductions use compensated (fsum) summation per matrix entry, so
the mean is independent of scheduling order at the 1e-13 level demanded of
parallel runs.  Realization i always uses seed = base_seed + i.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._io import write_csv
from .states import DensityMatrix, bell_state, density_of, product_state
from .stochastic import PerturbationModel, RateConstants, SampledPath, rates, sample_path

__all__ = [
    "EvolutionParams",
    "DecoherenceScan",
    "analytic_single_rail",
    "integrate_realization",
    "ensemble_evolve",
    "ensemble_scan",
    "fit_decay_rate",
    "two_rail_evolve",
    "export_scan_csv",
    "MIN_STEPS_PER_BEAT",
]

#: the integrator requires dz <= (2 pi / |dbeta|) / MIN_STEPS_PER_BEAT.
MIN_STEPS_PER_BEAT = 16


@dataclass(frozen=True)
class EvolutionParams:
    """Mode-beat rate, decoherence rates, and propagation length (meters)."""

    delta_beta: float
    rates: RateConstants
    length: float

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be nonnegative")


def _apply_single_rail(entries: np.ndarray, delta_beta: float, gamma: float,
                       kappa: float, length: float) -> np.ndarray:
    """Closed-form map extended linearly to an arbitrary 2x2 matrix."""
    relax = math.exp(-2.0 * gamma * length)
    phase = np.exp((1j * (delta_beta + kappa) - gamma) * length)
    out = np.empty((2, 2), dtype=np.complex128)
    out[0, 0] = 0.5 * ((1 + relax) * entries[0, 0] + (1 - relax) * entries[1, 1])
    out[1, 1] = 0.5 * ((1 - relax) * entries[0, 0] + (1 + relax) * entries[1, 1])
    out[0, 1] = entries[0, 1] * phase
    out[1, 0] = entries[1, 0] * np.conj(phase)
    return out


def analytic_single_rail(rho0: DensityMatrix, params: EvolutionParams) -> DensityMatrix:
    """Closed-form single-rail decoherence map applied to rho0."""
    if rho0.rails != 1:
        raise ValueError("analytic_single_rail expects a single-rail 2x2 state")
    out = _apply_single_rail(rho0.matrix, params.delta_beta, params.rates.gamma,
                             params.rates.kappa, params.length)
    return DensityMatrix(out)


def _step_quaternions(values: np.ndarray, dz: float, delta_beta: float, k_ab: complex):
    """Per-step SU(2) components (w, x, y, z) of exp(-i H dz).

    The traceless part of H is Re(c) sx - Im(c) sy - (dbeta/2) sz with
    c = k_ab f; the global phase exp(-i dbeta dz / 2) is dropped because the
    state is conjugated by U and never sees it.
    """
    half = delta_beta / 2.0
    c_re = values * k_ab.real
    c_im = values * k_ab.imag
    radius = np.sqrt(half * half + c_re * c_re + c_im * c_im)
    theta = radius * dz
    w = np.cos(theta)
    # sin(theta)/radius, continuous at radius -> 0
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(radius > 0.0, np.sin(theta) / np.where(radius > 0.0, radius, 1.0), dz)
    return w, scale * c_re, scale * (-c_im), scale * (-half)


def _quaternion_reduce(w, x, y, z):
    """Ordered SU(2) product q[n-1] * ... * q[0] by pairwise reduction."""
    while w.shape[0] > 1:
        n = w.shape[0]
        m = n - (n % 2)
        w2, x2, y2, z2 = w[1:m:2], x[1:m:2], y[1:m:2], z[1:m:2]
        w1, x1, y1, z1 = w[0:m:2], x[0:m:2], y[0:m:2], z[0:m:2]
        nw = w2 * w1 - (x2 * x1 + y2 * y1 + z2 * z1)
        nx = w2 * x1 + w1 * x2 + (y2 * z1 - z2 * y1)
        ny = w2 * y1 + w1 * y2 + (z2 * x1 - x2 * z1)
        nz = w2 * z1 + w1 * z2 + (x2 * y1 - y2 * x1)
        if n % 2:
            nw = np.append(nw, w[-1])
            nx = np.append(nx, x[-1])
            ny = np.append(ny, y[-1])
            nz = np.append(nz, z[-1])
        w, x, y, z = nw, nx, ny, nz
    return float(w[0]), float(x[0]), float(y[0]), float(z[0])


def _quaternion_compose(a, b):
    """SU(2) product a * b of two scalar quaternions (a applied after b)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - (ax * bx + ay * by + az * bz),
        aw * bx + bw * ax + (ay * bz - az * by),
        aw * by + bw * ay + (az * bx - ax * bz),
        aw * bz + bw * az + (ax * by - ay * bx),
    )


def _quaternion_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    # renormalize: products of exact unitaries, so any norm drift is rounding
    norm = math.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / norm, x / norm, y / norm, z / norm
    return np.array(
        [[w - 1j * z, -y - 1j * x],
         [y - 1j * x, w + 1j * z]],
        dtype=np.complex128,
    )


def _check_step_resolution(dz: float, delta_beta: float) -> None:
    if delta_beta != 0.0:
        limit = (2.0 * math.pi / abs(delta_beta)) / MIN_STEPS_PER_BEAT
        if dz > limit * (1 + 1e-12):
            raise ValueError(
                f"path step dz={dz:g} does not resolve the mode beat; need dz <= {limit:g}"
            )


def _path_unitary(values: np.ndarray, dz: float, delta_beta: float, k_ab: complex) -> np.ndarray:
    q = _quaternion_reduce(*_step_quaternions(values, dz, delta_beta, k_ab))
    return _quaternion_to_matrix(q)


def integrate_realization(rho0: DensityMatrix, path: SampledPath, delta_beta: float,
                          k_ab: complex) -> DensityMatrix:
    """Evolve rho0 through one realization of the random coupling.

    Each of the path's samples drives one dz step, so the result is the state
    after length count * dz.  The per-step propagator is the exact 2x2
    exponential, hence purity is conserved to rounding for every realization.
    """
    if rho0.rails != 1:
        raise ValueError("integrate_realization expects a single-rail 2x2 state")
    _check_step_resolution(path.dz, delta_beta)
    unitary = _path_unitary(path.values, path.dz, delta_beta, complex(k_ab))
    return DensityMatrix(unitary @ rho0.matrix @ unitary.conj().T)


def _compensated_mean(stack: np.ndarray) -> np.ndarray:
    """Order-insensitive mean over axis 0 of a stack of small complex matrices."""
    n, rows, cols = stack.shape
    out = np.empty((rows, cols), dtype=np.complex128)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = complex(
                math.fsum(stack[:, i, j].real), math.fsum(stack[:, i, j].imag)
            ) / n
    return out


def _scan_dz(model: PerturbationModel, delta_beta: float) -> float:
    dz = model.corr_length / 8.0
    if delta_beta != 0.0:
        dz = min(dz, (2.0 * math.pi / abs(delta_beta)) / MIN_STEPS_PER_BEAT)
    return dz


def ensemble_evolve(rho0: DensityMatrix, model: PerturbationModel, delta_beta: float,
                    length: float, n_realizations: int, base_seed: int,
                    n_jobs: int = 1) -> DensityMatrix:
    """Arithmetic mean of integrate_realization over seeded realizations.

    Realization i uses seed base_seed + i; the reduction is a compensated
    mean, so the result does not depend on completion order.
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    if length <= 0:
        raise ValueError("length must be positive")
    dz = _scan_dz(model, delta_beta)
    count = max(2, int(round(length / dz)))
    dz = length / count
    k_ab = complex(model.k_ab)

    def one(i: int) -> np.ndarray:
        path = sample_path(model, dz, count, base_seed + i)
        unitary = _path_unitary(path.values, dz, delta_beta, k_ab)
        return unitary @ rho0.matrix @ unitary.conj().T

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, range(n_realizations)))
    else:
        results = [one(i) for i in range(n_realizations)]
    return DensityMatrix(_compensated_mean(np.array(results)))


@dataclass(frozen=True, eq=False)
class DecoherenceScan:
    """Ensemble means over a grid of propagation lengths.

    lengths: checkpoint lengths (snapped to whole steps so the free-evolution
    phase of the Monte Carlo and the analytic map match exactly).
    mean: (n_L, 2, 2) ensemble means; stderr: per-entry standard errors
    sqrt((Var Re + Var Im) / n); analytic: the closed-form counterpart.
    """

    lengths: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    analytic: np.ndarray
    n_realizations: int


def ensemble_scan(rho0: DensityMatrix, model: PerturbationModel, delta_beta: float,
                  length_max: float, n_lengths: int, n_realizations: int,
                  base_seed: int, n_jobs: int = 1) -> DecoherenceScan:
    """Monte Carlo ensemble means at n_lengths checkpoints up to length_max.

    One path per realization covers the full length; checkpoints reuse its
    prefix products, so the scan costs the same as a single full-length run.
    """
    if rho0.rails != 1:
        raise ValueError("ensemble_scan expects a single-rail 2x2 state")
    if n_lengths < 2 or n_realizations < 1:
        raise ValueError("need n_lengths >= 2 and n_realizations >= 1")
    dz = _scan_dz(model, delta_beta)
    total = max(n_lengths, int(round(length_max / dz)))
    dz = length_max / total
    marks = sorted({max(1, int(round(total * (j + 1) / n_lengths))) for j in range(n_lengths)})
    lengths = np.array([m * dz for m in marks])
    k_ab = complex(model.k_ab)
    rate_consts = rates(model, delta_beta)

    def one(i: int) -> np.ndarray:
        path = sample_path(model, dz, total, base_seed + i)
        w, x, y, z = _step_quaternions(path.values, dz, delta_beta, k_ab)
        snapshots = np.empty((len(marks), 2, 2), dtype=np.complex128)
        cumulative = (1.0, 0.0, 0.0, 0.0)
        start = 0
        for idx, mark in enumerate(marks):
            segment = _quaternion_reduce(w[start:mark], x[start:mark], y[start:mark], z[start:mark])
            cumulative = _quaternion_compose(segment, cumulative)
            unitary = _quaternion_to_matrix(cumulative)
            snapshots[idx] = unitary @ rho0.matrix @ unitary.conj().T
            start = mark
        return snapshots

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            stack = np.array(list(pool.map(one, range(n_realizations))))
    else:
        stack = np.array([one(i) for i in range(n_realizations)])

    mean = np.empty((len(marks), 2, 2), dtype=np.complex128)
    for j in range(len(marks)):
        mean[j] = _compensated_mean(stack[:, j])
    var = np.var(stack.real, axis=0) + np.var(stack.imag, axis=0)
    stderr = np.sqrt(var / n_realizations)

    analytic = np.empty_like(mean)
    for j, length in enumerate(lengths):
        analytic[j] = _apply_single_rail(rho0.matrix, delta_beta,
                                         rate_consts.gamma, rate_consts.kappa, length)
    return DecoherenceScan(lengths=lengths, mean=mean, stderr=stderr,
                           analytic=analytic, n_realizations=n_realizations)


def fit_decay_rate(scan: DecoherenceScan) -> float:
    """Weighted least-squares decay rate of |mean rho01| versus length.

    Fits log |rho01(L)| = a - gamma_fit L with weights from the Monte Carlo
    standard errors; returns gamma_fit.
    """
    mag = np.abs(scan.mean[:, 0, 1])
    if np.any(mag <= 0):
        raise ValueError("vanishing coherence; cannot fit a decay rate")
    y = np.log(mag)
    rel = np.maximum(scan.stderr[:, 0, 1] / mag, 1e-15)
    weights = 1.0 / rel ** 2
    design = np.column_stack([np.ones_like(scan.lengths), scan.lengths])
    lhs = design.T @ (design * weights[:, None])
    rhs = design.T @ (weights * y)
    coeffs = np.linalg.solve(lhs, rhs)
    return float(-coeffs[1])


def _two_rail_closed_form(state: str, params: EvolutionParams) -> np.ndarray:
    gamma = params.rates.gamma
    kappa = params.rates.kappa
    length = params.length
    single = np.exp((1j * (params.delta_beta + kappa) - gamma) * length)
    double = np.exp(2.0 * (1j * (params.delta_beta + kappa) - gamma) * length)
    relax = math.exp(-2.0 * gamma * length)
    if state == "phi_plus":
        out = np.zeros((4, 4), dtype=np.complex128)
        out[0, 0] = out[3, 3] = 0.5
        out[0, 3] = 0.5 * double
        out[3, 0] = 0.5 * np.conj(double)
        return out
    out = 0.25 * np.array(
        [
            [1.0, single, single, double],
            [np.conj(single), 1.0, relax, single],
            [np.conj(single), relax, 1.0, single],
            [np.conj(double), np.conj(single), np.conj(single), 1.0],
        ],
        dtype=np.complex128,
    )
    return out


def _two_rail_channel(state: str, params: EvolutionParams) -> np.ndarray:
    pure = bell_state("phi", "+") if state == "phi_plus" else product_state()
    tensor4 = density_of(pure).matrix.reshape(2, 2, 2, 2)

    def apply_on(tens: np.ndarray, control: bool) -> np.ndarray:
        out = np.empty_like(tens)
        if control:
            blocks = [[tens[0, :, 0, :], tens[0, :, 1, :]], [tens[1, :, 0, :], tens[1, :, 1, :]]]
        else:
            blocks = [[tens[:, 0, :, 0], tens[:, 0, :, 1]], [tens[:, 1, :, 0], tens[:, 1, :, 1]]]
        relax = math.exp(-2.0 * params.rates.gamma * params.length)
        phase = np.exp((1j * (params.delta_beta + params.rates.kappa) - params.rates.gamma)
                       * params.length)
        new = [
            [0.5 * ((1 + relax) * blocks[0][0] + (1 - relax) * blocks[1][1]), blocks[0][1] * phase],
            [blocks[1][0] * np.conj(phase),
             0.5 * ((1 - relax) * blocks[0][0] + (1 + relax) * blocks[1][1])],
        ]
        for a in range(2):
            for b in range(2):
                if control:
                    out[a, :, b, :] = new[a][b]
                else:
                    out[:, a, :, b] = new[a][b]
        return out

    evolved = apply_on(apply_on(tensor4, control=True), control=False)
    return evolved.reshape(4, 4)


def two_rail_evolve(state: str, params: EvolutionParams, mode: str = "closed_form") -> DensityMatrix:
    """Evolve a two-rail input ("phi_plus" or "product") through matched rails.

    Both rails share the same statistics and length and are statistically
    independent.  mode "closed_form" returns the published two-rail matrices
    verbatim; mode "channel_composition" applies the single-rail map to each
    rail independently.  The two agree exactly for the product state; for the
    entangled state the closed form keeps its populations frozen while the
    composed channel populates the cross terms |01>, |10> at order
    (1 - exp(-2 gamma L)).  Both definitions are preserved deliberately.
    """
    if state not in ("phi_plus", "product"):
        raise ValueError(f"state must be 'phi_plus' or 'product', got {state!r}")
    if mode == "closed_form":
        return DensityMatrix(_two_rail_closed_form(state, params))
    if mode == "channel_composition":
        return DensityMatrix(_two_rail_channel(state, params))
    raise ValueError(f"mode must be 'closed_form' or 'channel_composition', got {mode!r}")


def export_scan_csv(scan: DecoherenceScan, destination) -> None:
    """Write a decoherence scan as CSV.

    Columns: L_m, re_rho01, im_rho01, purity, analytic_re, analytic_im.
    """
    rows = []
    for j, length in enumerate(scan.lengths):
        mean = scan.mean[j]
        pur = float(np.trace(mean @ mean).real)
        rows.append((
            float(length),
            float(mean[0, 1].real),
            float(mean[0, 1].imag),
            pur,
            float(scan.analytic[j][0, 1].real),
            float(scan.analytic[j][0, 1].imag),
        ))
    write_csv(destination,
              ("L_m", "re_rho01", "im_rho01", "purity", "analytic_re", "analytic_im"),
              rows)
