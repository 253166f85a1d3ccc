"""Gradient play and higher-order learning in polymatrix games.

Simulation of payoff-driven learning dynamics, linearization around
completely mixed Nash equilibria, and the full battery of stability and
stabilizability tests (spectra, PBH, decentralized rank conditions, gain
sweeps, parity screening, robustness probing).
"""

from .analysis import (
    DecentralizedCheck,
    MarkovReport,
    ModeSupportReport,
    ParityResult,
    PbhResult,
    RobustnessResult,
    StabilityVerdict,
    SweepResult,
    check_mode_support,
    decentralized_stabilizable,
    default_gain_grid,
    gain_sweep,
    markov_report,
    pbh_detectable,
    pbh_stabilizable,
    robust_rank,
    robustness_probe,
    spectral_abscissa,
    strong_stabilizability_2x2,
)
from .dynamics import (
    DynamicsSpec,
    GradientPlay,
    HigherOrderGradientPlay,
    PlayerState,
    Replicator,
    SmoothFictitiousPlay,
    check_vanishing_modification,
    derivative,
    make_anticipatory,
    modified_payoff,
    softmax,
)
from .games import (
    NeCertificate,
    PolymatrixGame,
    make_coordination,
    make_jordan,
    payoff_map,
    perturb_jordan_diagonal,
    perturb_random,
    uniform_profile,
    utility,
    verify_ne,
)
from .linearize import (
    ClosedLoopMatrix,
    DecentralizedPlant,
    GameLocalMatrix,
    RescaledJordanDecomposition,
    assemble_closed_loop,
    assemble_local_game,
    assemble_plant,
    assemble_rescaled_jordan,
)
from .simplex import TangentBasis, from_local, project_to_simplex, tangent_basis, to_local
from .simulate import (
    ConvergenceCheck,
    NonFiniteStateError,
    ScenarioResult,
    SimConfig,
    Trajectory,
    detect_convergence,
    run_scenario,
    scenario_names,
    simulate_coupled,
    simulate_open_loop,
)

__version__ = "0.1.0"
