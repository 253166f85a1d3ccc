"""Stability and stabilizability tests.

Dense spectra, PBH rank tests, the decentralized fixed-mode rank condition,
eigenvector block-support checks, Markov-parameter reports, gain sweeps with
crossing refinement, the 2x2 parity obstruction to strong stabilization, and
directional robustness probing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .games import PolymatrixGame
from .linearize import (
    DecentralizedPlant,
    GameLocalMatrix,
    _local_matrix_raw,
    assemble_closed_loop,
)
from .simplex import tangent_basis

__all__ = [
    "StabilityVerdict",
    "PbhResult",
    "ModeSupportReport",
    "DecentralizedCheck",
    "MarkovReport",
    "SweepResult",
    "ParityResult",
    "RobustnessResult",
    "spectral_abscissa",
    "robust_rank",
    "pbh_stabilizable",
    "pbh_detectable",
    "check_mode_support",
    "decentralized_stabilizable",
    "markov_report",
    "gain_sweep",
    "strong_stabilizability_2x2",
    "robustness_probe",
    "default_gain_grid",
]

STABILITY_TOL = 1e-8


def _sorted_eigenvalues(M: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(M)
    order = np.lexsort((-ev.imag, -ev.real))
    return ev[order]


@dataclass(frozen=True)
class StabilityVerdict:
    """Spectrum summary: stable iff every eigenvalue real part < -tol."""

    spectral_abscissa: float
    stable: bool
    eigenvalues: np.ndarray
    tol: float


def spectral_abscissa(M, tol: float = STABILITY_TOL) -> StabilityVerdict:
    """Full spectrum via dense QR iteration and the resulting stability verdict."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    ev = _sorted_eigenvalues(M)
    alpha = float(np.max(ev.real))
    return StabilityVerdict(alpha, alpha < -tol, ev, tol)


def robust_rank(M: np.ndarray, tol: float | None = None) -> int:
    """Numerical rank from singular values; default threshold max(dims)*eps*s_max."""
    M = np.atleast_2d(np.asarray(M, dtype=float if not np.iscomplexobj(M) else complex))
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if tol is None:
        tol = max(M.shape) * np.finfo(float).eps * sv[0]
    return int(np.sum(sv > tol))


def _unstable_eigenvalues(A: np.ndarray, tol: float) -> np.ndarray:
    ev = np.linalg.eigvals(A)
    return ev[ev.real >= -tol]


@dataclass(frozen=True)
class PbhResult:
    """Rank-test outcome; witnesses are the eigenvalues where rank dropped."""

    ok: bool
    witnesses: tuple

    def __bool__(self):
        return self.ok


def pbh_stabilizable(
    A, B, tol: float = STABILITY_TOL, rank_tol: float | None = None
) -> PbhResult:
    """PBH test: (A - lam I, B) keeps full row rank at every unstable eigenvalue."""
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    witnesses = []
    for lam in _unstable_eigenvalues(A, tol):
        M = np.hstack([A - lam * np.eye(n), B])
        if robust_rank(M, rank_tol) < n:
            witnesses.append(lam)
    return PbhResult(not witnesses, tuple(witnesses))


def pbh_detectable(
    A, C, tol: float = STABILITY_TOL, rank_tol: float | None = None
) -> PbhResult:
    """Dual PBH test: (C; A - lam I) keeps full column rank at unstable eigenvalues."""
    A = np.asarray(A, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    witnesses = []
    for lam in _unstable_eigenvalues(A, tol):
        M = np.vstack([A - lam * np.eye(n), C])
        if robust_rank(M, rank_tol) < n:
            witnesses.append(lam)
    return PbhResult(not witnesses, tuple(witnesses))


@dataclass(frozen=True)
class ModeSupportEntry:
    eigenvalue: complex
    multiplicity: int
    left_block_norms: tuple
    right_block_norms: tuple
    ok: bool
    indeterminate: bool


@dataclass(frozen=True)
class ModeSupportReport:
    """Per-eigenvalue support of unstable modes on every player block.

    A single player's channel can reach every unstable mode only when both the
    left and right eigenvectors have nonzero components in each player's
    block.  Repeated (possibly defective) unstable eigenvalues are reported as
    indeterminate rather than resolved through generalized eigenvectors.
    """

    satisfied: bool
    indeterminate: bool
    entries: tuple


def check_mode_support(
    local: GameLocalMatrix, tol: float = STABILITY_TOL, block_tol: float = 1e-8
) -> ModeSupportReport:
    """Check block support of left/right eigenvectors for Re >= 0 eigenvalues."""
    M = local.matrix
    lam, VL, VR = scipy.linalg.eig(M, left=True, right=True)
    scale = max(1.0, float(np.max(np.abs(lam))))
    entries = []
    ok_all = True
    indeterminate_any = False
    for idx, lv in enumerate(lam):
        if lv.real < -tol:
            continue
        mult = int(np.sum(np.abs(lam - lv) <= 1e-8 * scale))
        if mult > 1:
            entries.append(ModeSupportEntry(lv, mult, (), (), False, True))
            indeterminate_any = True
            ok_all = False
            continue
        left = VL[:, idx]
        right = VR[:, idx]
        lnorms = []
        rnorms = []
        ok = True
        for i in range(local.n):
            sl = local.block_slice(i)
            ln = float(np.linalg.norm(left[sl])) / float(np.linalg.norm(left))
            rn = float(np.linalg.norm(right[sl])) / float(np.linalg.norm(right))
            lnorms.append(ln)
            rnorms.append(rn)
            if ln <= block_tol or rn <= block_tol:
                ok = False
        entries.append(ModeSupportEntry(lv, 1, tuple(lnorms), tuple(rnorms), ok, False))
        ok_all = ok_all and ok
    return ModeSupportReport(ok_all and not indeterminate_any, indeterminate_any, tuple(entries))


@dataclass(frozen=True)
class FixedModeWitness:
    eigenvalue: complex
    input_players: tuple
    output_players: tuple
    rank: int


@dataclass(frozen=True)
class DecentralizedCheck:
    """Outcome of the decentralized fixed-mode rank condition."""

    ok: bool
    required_rank: int
    failures: tuple

    def __bool__(self):
        return self.ok


def decentralized_stabilizable(
    plant: DecentralizedPlant,
    tol: float = STABILITY_TOL,
    rank_tol: float | None = None,
) -> DecentralizedCheck:
    """Rank condition for decentralized stabilization over all player partitions.

    For every split of players into an input set Q and output set R and every
    eigenvalue of A with Re >= -tol, the bordered matrix
    [[A - lam I, B|Q], [C|R, 0]] must have rank at least n; a drop below n at
    an unstable eigenvalue is a fixed mode that no decentralized compensation
    can move.  Rank loss away from eigenvalues of A is impossible since
    A - lam I is then invertible.  Q = all players reproduces the PBH
    stabilizability test and R = all players the PBH detectability test.
    """
    A = plant.A
    n = A.shape[0]
    unstable = _unstable_eigenvalues(A, tol)
    players = range(plant.n)
    failures = []
    for qsize in range(plant.n + 1):
        for Q in itertools.combinations(players, qsize):
            R = tuple(i for i in players if i not in Q)
            BQ = (
                np.hstack([plant.B_blocks[q] for q in Q])
                if Q
                else np.zeros((n, 0))
            )
            CR = (
                np.vstack([plant.C_blocks[r] for r in R])
                if R
                else np.zeros((0, n))
            )
            for lam in unstable:
                top = np.hstack([A - lam * np.eye(n), BQ])
                bottom = np.hstack([CR, np.zeros((CR.shape[0], BQ.shape[1]))])
                rank = robust_rank(np.vstack([top, bottom]), rank_tol)
                if rank < n:
                    failures.append(FixedModeWitness(lam, Q, R, rank))
    return DecentralizedCheck(not failures, n, tuple(failures))


@dataclass(frozen=True)
class MarkovReport:
    """Leading Markov parameters C A^m B and the zero-eigenvalue count of A.

    first_nonzero_order is the smallest m with a nonvanishing C A^m B (None if
    all tested orders vanish).  zero_eigenvalue_multiplicity counts eigenvalues
    of A within zero_tol of the origin; the default tolerance is sized for
    defective zero clusters, which rounding spreads across a radius of roughly
    (eps * norm)^(1/multiplicity).
    """

    norms: tuple
    first_nonzero_order: int | None
    zero_eigenvalue_multiplicity: int
    zero_tol: float
    nonzero_tol: float

    @property
    def cb_norm(self) -> float:
        return self.norms[0]

    @property
    def cab_norm(self) -> float:
        return self.norms[1]


def markov_report(
    A,
    B,
    C,
    max_order: int = 8,
    zero_tol: float = 1e-4,
    nonzero_tol: float = 1e-9,
) -> MarkovReport:
    """Compute C A^m B for m = 0..max_order and count eigenvalues of A near zero."""
    if max_order < 2:
        raise ValueError("max_order must be at least 2")
    A = np.asarray(A, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    norms = []
    X = B
    for _ in range(max_order + 1):
        norms.append(float(np.max(np.abs(C @ X))) if X.size else 0.0)
        X = A @ X
    first = next((m for m, v in enumerate(norms) if v > nonzero_tol), None)
    ev = np.linalg.eigvals(A)
    scale = max(1.0, float(np.max(np.abs(ev))))
    zero_mult = int(np.sum(np.abs(ev) <= zero_tol * scale))
    return MarkovReport(tuple(norms), first, zero_mult, zero_tol, nonzero_tol)


@dataclass(frozen=True)
class SweepResult:
    """Eigenvalue clouds and stability flags over a gain grid.

    crossings holds one (lo, hi) bracket per stability flip, refined by
    bisection on the stability flag.
    """

    grid: np.ndarray
    eigenvalues: tuple
    stable: np.ndarray
    crossings: tuple
    tol: float


def default_gain_grid(lo: float = 1e-2, hi: float = 1e2, points: int = 200) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), points)


def gain_sweep(
    build_matrix: Callable[[float], np.ndarray],
    grid,
    tol: float = STABILITY_TOL,
    refine_width: float = 1e-4,
) -> SweepResult:
    """Sweep a scalar gain, recording spectra and bracketing stability flips."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-D array")
    if np.any(grid <= 0):
        raise ValueError("grid values must be positive")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")

    def is_stable(g: float) -> bool:
        ev = np.linalg.eigvals(build_matrix(g))
        return float(np.max(ev.real)) < -tol

    eigenvalues = []
    stable = np.zeros(grid.size, dtype=bool)
    for idx, g in enumerate(grid):
        ev = _sorted_eigenvalues(build_matrix(g))
        eigenvalues.append(ev)
        stable[idx] = float(np.max(ev.real)) < -tol
    crossings = []
    for idx in range(grid.size - 1):
        if stable[idx] == stable[idx + 1]:
            continue
        lo, hi = float(grid[idx]), float(grid[idx + 1])
        lo_flag = bool(stable[idx])
        while hi - lo > refine_width:
            mid = 0.5 * (lo + hi)
            if is_stable(mid) == lo_flag:
                lo = mid
            else:
                hi = mid
        crossings.append((lo, hi))
    return SweepResult(grid, tuple(eigenvalues), stable, tuple(crossings), tol)


@dataclass(frozen=True)
class ParityResult:
    """Strong-stabilizability screen for the two-player 2x2 plant.

    The plant's transfer matrix has blocking zeros at the origin and at
    infinity with eigenvalues -1, -1, +-sqrt(m12*m21) in between; a positive
    product puts a single real eigenvalue between two real zeros, which the
    parity interlacing principle forbids for stabilization by a stable
    compensator.  Only the obstruction is decided; a negative product merely
    passes the parity condition.
    """

    verdict: str
    m12: float
    m21: float

    @property
    def strongly_stabilizable_obstructed(self) -> bool:
        return self.verdict == "not_strongly_stabilizable"


def strong_stabilizability_2x2(game: PolymatrixGame, tol: float = 1e-12) -> ParityResult:
    """Parity screen on a two-player game with binary strategies."""
    if game.n != 2 or game.dims != (2, 2):
        raise ValueError("parity screen applies to two players with two strategies each")
    N = tangent_basis(2).N
    m12 = float((N.T @ game.pair(0, 1) @ N)[0, 0])
    m21 = float((N.T @ game.pair(1, 0) @ N)[0, 0])
    if abs(m12 * m21) <= tol:
        raise ValueError(
            "m12 * m21 vanishes: the mixed equilibrium is not isolated"
        )
    verdict = "not_strongly_stabilizable" if m12 * m21 > 0 else "parity_condition_passed"
    return ParityResult(verdict, m12, m21)


@dataclass(frozen=True)
class RobustnessResult:
    """Directional stability margin from a grid scan plus bisection."""

    certified_delta: float
    first_unstable_delta: float | None
    max_delta: float


def robustness_probe(
    game: PolymatrixGame,
    specs: Sequence,
    direction: Mapping,
    max_delta: float = 1.0,
    gap: float = 1e-3,
    coarse_points: int = 16,
    tol: float = STABILITY_TOL,
) -> RobustnessResult:
    """Largest verified-stable perturbation scale along a matrix direction.

    The game matrices are perturbed as M[i,j] + delta * direction[i,j] and the
    closed loop is re-assembled at each scale (the reduced coupling depends
    only on the matrices and tangent bases, not on where the equilibrium
    sits).  A coarse upward scan finds the first unstable scale, then
    bisection tightens the bracket to the requested gap.
    """
    if max_delta <= 0:
        raise ValueError("max_delta must be positive")
    bases = [tangent_basis(k) for k in game.dims]
    dims = game.dims

    def loop_stable(delta: float) -> bool:
        mats = dict(game.pair_matrices)
        for key, d in direction.items():
            d = np.asarray(d, dtype=float)
            mats[key] = game.pair(*key) + delta * d
        perturbed = PolymatrixGame(dims, mats)
        M = _local_matrix_raw(perturbed, bases)
        J = assemble_closed_loop(GameLocalMatrix(M, dims), list(specs)).matrix
        return float(np.max(np.linalg.eigvals(J).real)) < -tol

    if not loop_stable(0.0):
        raise ValueError("nominal closed loop is unstable; nothing to certify")
    deltas = np.linspace(0.0, max_delta, coarse_points + 1)[1:]
    lo = 0.0
    hi = None
    for d in deltas:
        if loop_stable(float(d)):
            lo = float(d)
        else:
            hi = float(d)
            break
    if hi is None:
        return RobustnessResult(max_delta, None, max_delta)
    while hi - lo > gap:
        mid = 0.5 * (lo + hi)
        if loop_stable(mid):
            lo = mid
        else:
            hi = mid
    return RobustnessResult(lo, hi, max_delta)
