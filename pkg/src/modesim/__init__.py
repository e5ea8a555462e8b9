"""Classical simulation of mode-entangled states in dual-mode waveguides.

Subsystems: mode-basis state algebra (:mod:`modesim.states`), slab and
parabolic mode solvers (:mod:`modesim.waveguide`), random-perturbation
statistics and decoherence rates (:mod:`modesim.stochastic`), closed-form
and Monte Carlo density-matrix evolution (:mod:`modesim.decoherence`), the
phase-controller/Y-splitter measurement algebra (:mod:`modesim.analyzer`),
two-rail Bell/CHSH and group-delay correlations (:mod:`modesim.correlation`),
a Crank-Nicolson beam-propagation engine (:mod:`modesim.bpm`), and a
scripted experiment runner (:mod:`modesim.cli`).
"""

from ._errors import NumericalError
from .analyzer import analyzer_projectors, intensities, intensity_difference_evolved, phase_op, splitter_states
from .correlation import ChshAngles, DelayPair, chsh_B, chsh_scan, correlation_E, delay_covariance, rail_embed
from .decoherence import (
    DecoherenceScan,
    EvolutionParams,
    analytic_single_rail,
    ensemble_evolve,
    ensemble_scan,
    integrate_realization,
    two_rail_evolve,
)
from .states import (
    DensityMatrix,
    FockVector,
    ModeLabel,
    PureState,
    bell_state,
    density_of,
    expectation,
    fock_state,
    ladder_apply,
    maximally_mixed,
    partial_trace,
    product_state,
    purity,
    superpose,
    tensor,
)
from .stochastic import PerturbationModel, RateConstants, SampledPath, rates, sample_path
from .waveguide import GuidedMode, ParabolicSpec, SlabSpec, delta_beta, group_delay, mode_overlap, parabolic_modes, solve_slab_te_modes

__version__ = "0.1.0"
