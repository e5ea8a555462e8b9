"""Finite-difference beam propagation in one transverse dimension.

Marches the reduced field u(x, z) of the paraxial wave equation

    i du/dz = -(1 / (2 k n0)) d2u/dx2 + (k / (2 n0)) (n0^2 - n(x,z)^2) u

with a Crank-Nicolson step (a Cayley transform of the tridiagonal operator,
exactly norm-conserving for lossless maps).  The physical field carries the
extra plane-wave factor exp(-i k n0 z); a guided mode of exact propagation
constant beta therefore accumulates total phase

    (k^2 n0^2 + beta^2) / (2 k n0) * z,

which equals beta z exactly when the reference index n0 is the mode's
effective index beta/k.  Mode-dependent phase error of order
(k n0 - beta)^2 / (2 k n0) per unit length is the intrinsic paraxial cost.

A complex absorber (imaginary potential, quadratic ramp over the outer 10%
of the window on each side) removes radiation before it can wrap around.

Geometry builders rasterize symmetric Y-splitters: a dual-mode stem, an
optional phase section where the core index is raised by delta_n, and two
single-mode branches separating linearly to a final spacing.  Launching the
equal superposition (TE0 + TE1)/sqrt(2) reproduces the branch-intensity
interference law of the ideal analyzer, with the accumulated differential
phase 2*theta controlled by delta_n.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from ._errors import NumericalError
from ._io import write_bytes, write_csv
from .waveguide import GuidedMode, SlabSpec, solve_slab_te_modes

__all__ = [
    "Grid",
    "RIMap",
    "Field",
    "PhaseSection",
    "YSplitterGeometry",
    "FigTwoRow",
    "uniform_map",
    "straight_slab_map",
    "build_geometry",
    "mode_field",
    "field_from_modes",
    "propagate",
    "decompose",
    "branch_powers",
    "fig2_experiment",
    "export_field_csv",
    "export_raster",
    "DEFAULT_ABSORBER_FRACTION",
    "DEFAULT_ABSORBER_STRENGTH",
]

DEFAULT_ABSORBER_FRACTION = 0.10
DEFAULT_ABSORBER_STRENGTH = 2.0e5  # 1/m, peak imaginary potential
#: paraxial step heuristic: dz <= SAFETY * wavelength / (2 max|n - n0|)
PARAXIAL_DZ_SAFETY = 0.1
MIN_POINTS_ACROSS_CORE = 16
#: per-step relative power growth beyond this aborts the march.
INSTABILITY_GROWTH = 1e-6


@dataclass(frozen=True)
class Grid:
    """Uniform transverse/longitudinal discretization."""

    x_min: float
    dx: float
    nx: int
    dz: float
    nz: int

    def __post_init__(self):
        if self.dx <= 0 or self.dz <= 0:
            raise ValueError("dx and dz must be positive")
        if self.nx < 64:
            raise ValueError("nx must be at least 64")
        if self.nz < 2:
            raise ValueError("nz must be at least 2")

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def z(self) -> np.ndarray:
        return self.dz * np.arange(self.nz)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.nx - 1)

    @property
    def z_max(self) -> float:
        return self.dz * (self.nz - 1)

    def waveguide_grid(self) -> tuple[float, float, int]:
        return (self.x_min, self.dx, self.nx)


@dataclass(frozen=True, eq=False)
class RIMap:
    """Refractive-index landscape n[j, i] = n(x_i, z_j) plus reference index."""

    n: np.ndarray
    reference_n0: float

    def __post_init__(self):
        n = np.array(self.n, dtype=np.float64)
        if n.ndim != 2:
            raise ValueError("index map must be 2D (nz, nx)")
        if np.any(n <= 0):
            raise ValueError("refractive index must be positive everywhere")
        n.setflags(write=False)
        object.__setattr__(self, "n", n)
        if self.reference_n0 <= 0:
            raise ValueError("reference_n0 must be positive")


@dataclass(frozen=True, eq=False)
class Field:
    """Complex transverse field at one z position, with its power."""

    values: np.ndarray
    z: float
    power: float

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if not np.all(np.isfinite(values.view(np.float64))):
            raise ValueError("field contains non-finite samples")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class PhaseSection:
    """Core-index bump delta_n over [z_start, z_start + length] in the stem."""

    delta_n: float
    length: float
    z_start: float = 0.0
    side: str = "core"

    def __post_init__(self):
        if self.length < 0 or self.z_start < 0:
            raise ValueError("phase-section extents must be nonnegative")
        if self.side != "core":
            raise ValueError("only core-side phase sections are supported")


@dataclass(frozen=True)
class YSplitterGeometry:
    """Symmetric Y-splitter layout.

    The stem (width from the base slab spec) runs to stem_length; there two
    branch cores of width core_width start side by side and separate at
    branch_half_angle each until their centers are branch_separation_final
    apart.  With core_width = stem_width / 2 and zero angle the map reduces
    to the straight stem.
    """

    stem_length: float
    branch_half_angle: float
    branch_separation_final: float
    core_width: float
    phase_section: PhaseSection | None = None

    def __post_init__(self):
        if self.stem_length <= 0 or self.core_width <= 0:
            raise ValueError("lengths must be positive")
        if not (0.0 <= self.branch_half_angle < math.radians(2.0)):
            raise ValueError("branch_half_angle must lie in [0, 2 deg) for paraxial validity")
        if self.branch_separation_final < self.core_width:
            raise ValueError("final separation must be at least one branch width")

    def separation_end_z(self) -> float:
        """z where the branch centers reach their final separation."""
        if self.branch_half_angle == 0.0:
            return self.stem_length
        travel = (self.branch_separation_final - self.core_width) / 2.0
        return self.stem_length + travel / math.tan(self.branch_half_angle)


def uniform_map(grid: Grid, index: float, reference_n0: float | None = None) -> RIMap:
    """Homogeneous-medium index map (free diffraction)."""
    ref = index if reference_n0 is None else reference_n0
    return RIMap(np.full((grid.nz, grid.nx), index), ref)


def _coverage(x: np.ndarray, dx: float, intervals) -> np.ndarray:
    """Fraction of each cell [x - dx/2, x + dx/2] covered by the intervals.

    Overlapping intervals are merged first, so touching branch cores are not
    double counted.  Area-weighted core edges keep the discrete propagation
    constant free of the O(dx) bias a hard staircase would introduce.
    """
    merged: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    fraction = np.zeros_like(x)
    left = x - dx / 2.0
    right = x + dx / 2.0
    for lo, hi in merged:
        fraction += np.clip(np.minimum(right, hi) - np.maximum(left, lo), 0.0, dx) / dx
    return np.clip(fraction, 0.0, 1.0)


def straight_slab_map(grid: Grid, spec: SlabSpec, reference_n0: float | None = None) -> RIMap:
    """z-invariant slab profile of the given spec on the grid."""
    half = spec.core_width / 2.0
    row = spec.n_clad + (spec.n_core - spec.n_clad) * _coverage(grid.x, grid.dx, [(-half, half)])
    return RIMap(np.tile(row, (grid.nz, 1)), spec.n_core if reference_n0 is None else reference_n0)


def build_geometry(geometry: YSplitterGeometry, grid: Grid, base: SlabSpec,
                   reference_n0: float | None = None) -> RIMap:
    """Rasterize a Y-splitter onto the grid.

    Core cells take n_core (plus delta_n inside the phase section); edge
    cells are area weighted so the raster integrates to the analytic core
    area and the discrete mode constants are free of staircase bias.
    """
    x = grid.x
    z = grid.z
    stem_half = base.core_width / 2.0
    branch_half = geometry.core_width / 2.0
    sep_end = geometry.separation_end_z()
    margin = 1.05 * (geometry.branch_separation_final / 2.0 + branch_half)
    if sep_end > grid.z_max:
        raise ValueError(
            f"geometry exceeds grid: branches separate until z={sep_end:g} m "
            f"but the grid ends at {grid.z_max:g} m"
        )
    if margin > min(-grid.x_min, grid.x_max):
        raise ValueError(
            f"geometry exceeds grid: need |x| up to {margin:g} m inside "
            f"[{grid.x_min:g}, {grid.x_max:g}]"
        )
    phase = geometry.phase_section
    if phase is not None and phase.z_start + phase.length > geometry.stem_length:
        raise ValueError("phase section must sit inside the stem")

    n = np.full((grid.nz, grid.nx), base.n_clad)
    slope = math.tan(geometry.branch_half_angle)
    contrast = base.n_core - base.n_clad
    for j, z_j in enumerate(z):
        if z_j < geometry.stem_length:
            value = contrast
            if phase is not None and phase.z_start <= z_j < phase.z_start + phase.length:
                value = contrast + phase.delta_n
            n[j] += value * _coverage(x, grid.dx, [(-stem_half, stem_half)])
        else:
            travel = min((z_j - geometry.stem_length) * slope,
                         (geometry.branch_separation_final - geometry.core_width) / 2.0)
            center = branch_half + travel
            n[j] += contrast * _coverage(
                x, grid.dx,
                [(-center - branch_half, -center + branch_half),
                 (center - branch_half, center + branch_half)],
            )
    ref = base.n_core if reference_n0 is None else reference_n0
    return RIMap(n, ref)


def _power(values: np.ndarray, dx: float) -> float:
    return float(np.sum(np.abs(values) ** 2) * dx)


def mode_field(mode: GuidedMode, grid: Grid) -> Field:
    """Launch field equal to a solved mode profile (shared x grid required)."""
    return field_from_modes([mode], [1.0], grid)


def field_from_modes(modes, coefficients, grid: Grid) -> Field:
    """Launch field sum_i c_i psi_i(x) at z = 0."""
    values = np.zeros(grid.nx, dtype=np.complex128)
    for mode, coeff in zip(modes, coefficients):
        if mode.grid != grid.waveguide_grid():
            raise ValueError("mode grid does not match the propagation grid")
        values += complex(coeff) * mode.profile.astype(np.complex128)
    return Field(values, 0.0, _power(values, grid.dx))


def _absorber(grid: Grid, fraction: float, strength: float) -> np.ndarray:
    width = fraction * (grid.x_max - grid.x_min)
    x = grid.x
    left = np.clip((grid.x_min + width - x) / width, 0.0, 1.0)
    right = np.clip((x - (grid.x_max - width)) / width, 0.0, 1.0)
    return strength * (left ** 2 + right ** 2)


def propagate(field: Field, ri_map: RIMap, grid: Grid, wavelength: float,
              absorber_fraction: float = DEFAULT_ABSORBER_FRACTION,
              absorber_strength: float = DEFAULT_ABSORBER_STRENGTH,
              snapshot_every: int = 1,
              core_width_hint: float | None = None) -> list[Field]:
    """Crank-Nicolson march of the reduced field through the index map.

    Returns snapshots every `snapshot_every` steps (the launch field first,
    the final field always).  Power is tracked each step; relative growth
    above 1e-6 per step aborts with diagnostics, and a lossless straight
    guide conserves power to rounding.
    """
    if ri_map.n.shape != (grid.nz, grid.nx):
        raise ValueError("index map shape does not match grid")
    if field.values.shape != (grid.nx,):
        raise ValueError("field length does not match grid")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be at least 1")
    k = 2.0 * math.pi / wavelength
    n0 = ri_map.reference_n0
    contrast = float(np.abs(ri_map.n - n0).max())
    if contrast > 0:
        dz_limit = PARAXIAL_DZ_SAFETY * wavelength / (2.0 * contrast)
        if grid.dz > dz_limit * (1 + 1e-12):
            raise ValueError(
                f"dz={grid.dz:g} exceeds the paraxial accuracy limit {dz_limit:g}"
            )
    if core_width_hint is not None and core_width_hint / grid.dx < MIN_POINTS_ACROSS_CORE:
        raise ValueError(
            f"dx={grid.dx:g} puts fewer than {MIN_POINTS_ACROSS_CORE} points across the core"
        )

    off_diag = -1.0 / (2.0 * k * n0 * grid.dx ** 2)
    laplacian_diag = 1.0 / (k * n0 * grid.dx ** 2)
    damping = _absorber(grid, absorber_fraction, absorber_strength)
    half_step = 0.5j * grid.dz

    values = field.values.astype(np.complex128)
    power_prev = _power(values, grid.dx)
    snapshots = [Field(values.copy(), 0.0, power_prev)]

    banded = np.zeros((3, grid.nx), dtype=np.complex128)
    rhs = np.empty(grid.nx, dtype=np.complex128)
    for j in range(grid.nz - 1):
        n_mid = 0.5 * (ri_map.n[j] + ri_map.n[j + 1])
        potential = (k / (2.0 * n0)) * (n0 * n0 - n_mid * n_mid)
        diag = laplacian_diag + potential - 1j * damping
        # (1 + i dz/2 A) u_next = (1 - i dz/2 A) u
        rhs[:] = (1.0 - half_step * diag) * values
        rhs[:-1] -= half_step * off_diag * values[1:]
        rhs[1:] -= half_step * off_diag * values[:-1]
        banded[0, 1:] = half_step * off_diag
        banded[1, :] = 1.0 + half_step * diag
        banded[2, :-1] = half_step * off_diag
        values = solve_banded((1, 1), banded, rhs)
        power = _power(values, grid.dx)
        if not math.isfinite(power) or power > power_prev * (1.0 + INSTABILITY_GROWTH):
            raise NumericalError(
                f"propagation unstable at z={grid.dz * (j + 1):g} m: power "
                f"{power_prev:g} -> {power:g}"
            )
        power_prev = power
        step = j + 1
        if step % snapshot_every == 0 or step == grid.nz - 1:
            snapshots.append(Field(values.copy(), grid.dz * step, power))
    return snapshots


def decompose(field: Field, modes, grid: Grid) -> tuple[np.ndarray, float]:
    """Mode coefficients <psi_n|field> and the residual (radiated) power."""
    coefficients = np.empty(len(modes), dtype=np.complex128)
    for i, mode in enumerate(modes):
        if mode.grid != grid.waveguide_grid():
            raise ValueError("mode grid does not match the propagation grid")
        coefficients[i] = np.trapezoid(np.conj(mode.profile) * field.values, dx=grid.dx)
    residual = _power(field.values, grid.dx) - float(np.sum(np.abs(coefficients) ** 2))
    return coefficients, residual


def branch_powers(field: Field, split_x: float, grid: Grid) -> tuple[float, float]:
    """Normalized power (x < split_x, x >= split_x) of a field snapshot."""
    x = grid.x
    intensity = np.abs(field.values) ** 2
    left = float(np.sum(intensity[x < split_x]) * grid.dx)
    right = float(np.sum(intensity[x >= split_x]) * grid.dx)
    total = left + right
    if total <= 0:
        raise ValueError("field carries no power")
    return left / total, right / total


@dataclass(frozen=True)
class FigTwoRow:
    """One phase-controller setting of the splitter interference experiment."""

    delta_n: float
    power_left: float
    power_right: float
    theta: float


def _differential_phase(base: SlabSpec, delta_n: float, length: float) -> float:
    """Half the differential phase 2*theta accumulated over the phase section.

    2*theta = [beta1(n+dn) - beta0(n+dn) - beta1(n) + beta0(n)] * length,
    from the slab solver at the bumped and unbumped core indices.
    """
    if delta_n == 0.0 or length == 0.0:
        return 0.0
    bumped = SlabSpec(base.core_width, base.n_core + delta_n, base.n_clad, base.wavelength)
    modes_base = solve_slab_te_modes(base, points=8)
    modes_bumped = solve_slab_te_modes(bumped, points=8)
    if len(modes_base) < 2 or len(modes_bumped) < 2:
        raise ValueError("phase section left the guide with fewer than two modes")
    two_theta = ((modes_bumped[1].beta - modes_bumped[0].beta)
                 - (modes_base[1].beta - modes_base[0].beta)) * length
    return two_theta / 2.0


def fig2_experiment(delta_n_list, base: SlabSpec, geometry: YSplitterGeometry,
                    grid: Grid, snapshot_every: int = 0) -> list[FigTwoRow]:
    """Branch powers of the splitter versus phase-section index bump.

    For each delta_n the equal superposition (TE0 + TE1)/sqrt(2) is launched
    into the stem, picks up differential phase in the phase section, and is
    split; the row records the final branch powers and the solver-predicted
    controller angle theta.
    """
    if geometry.phase_section is None:
        raise ValueError("fig2_experiment needs a geometry with a phase section")
    modes = solve_slab_te_modes(base, grid=grid.waveguide_grid())
    if len(modes) < 2:
        raise ValueError("base guide must carry two modes")
    launch = field_from_modes(modes[:2], [1 / math.sqrt(2.0), 1 / math.sqrt(2.0)], grid)
    stride = snapshot_every if snapshot_every >= 1 else grid.nz
    rows = []
    for delta_n in delta_n_list:
        section = PhaseSection(float(delta_n), geometry.phase_section.length,
                               geometry.phase_section.z_start)
        shaped = YSplitterGeometry(geometry.stem_length, geometry.branch_half_angle,
                                   geometry.branch_separation_final, geometry.core_width,
                                   phase_section=section)
        ri_map = build_geometry(shaped, grid, base)
        final = propagate(launch, ri_map, grid, base.wavelength,
                          snapshot_every=stride,
                          core_width_hint=geometry.core_width)[-1]
        left, right = branch_powers(final, 0.0, grid)
        theta = _differential_phase(base, float(delta_n), section.length)
        rows.append(FigTwoRow(float(delta_n), left, right, theta))
    return rows


def export_field_csv(field: Field, grid: Grid, destination) -> None:
    """Write a field snapshot as CSV with columns (x_m, re, im, intensity)."""
    rows = zip(
        grid.x.tolist(),
        field.values.real.tolist(),
        field.values.imag.tolist(),
        (np.abs(field.values) ** 2).tolist(),
    )
    write_csv(destination, ("x_m", "re", "im", "intensity"), rows)


def export_raster(snapshots, grid: Grid, destination) -> None:
    """Write an intensity raster: header (int64 nx, int64 nz, float64 dx,
    float64 dz), then nz rows of nx row-major float64 intensities.

    nz here is the number of snapshots and dz their z spacing (snapshot
    stride times the grid step for uniform snapshots).
    """
    intensities = np.vstack([np.abs(s.values) ** 2 for s in snapshots])
    nz = intensities.shape[0]
    dz_out = snapshots[1].z - snapshots[0].z if nz > 1 else grid.dz
    header = struct.pack("<qqdd", grid.nx, nz, grid.dx, dz_out)
    write_bytes(destination, header + intensities.astype("<f8").tobytes(order="C"))
