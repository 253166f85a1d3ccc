"""Local matrices around a completely mixed equilibrium.

Everything here lives in tangent coordinates w_i = N_i^T (x_i - x_i*): the
reduced game coupling matrix, the closed-loop dynamics of higher-order
gradient play, the open-loop plant split into per-player input/output
channels, and the rescaled anti-coordination loop with its gain decomposition.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import HigherOrderGradientPlay, aux_dim
from .games import PolymatrixGame, validate_profile
from .simplex import tangent_basis

__all__ = [
    "GameLocalMatrix",
    "ClosedLoopMatrix",
    "DecentralizedPlant",
    "RescaledJordanDecomposition",
    "assemble_local_game",
    "assemble_closed_loop",
    "assemble_plant",
    "assemble_rescaled_jordan",
]

SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class GameLocalMatrix:
    """Reduced game coupling in tangent coordinates.

    Block (i, j) is N_i^T M[i,j] N_j for i != j; diagonal blocks are zero, so
    the trace vanishes and pure gradient play can never be asymptotically
    stable at a completely mixed equilibrium.
    """

    matrix: np.ndarray
    dims: tuple

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def offsets(self) -> tuple:
        out = []
        start = 0
        for k in self.dims:
            out.append((start, start + k - 1))
            start += k - 1
        return tuple(out)

    def block_slice(self, i: int) -> slice:
        a, b = self.offsets[i]
        return slice(a, b)

    def block(self, i: int, j: int) -> np.ndarray:
        return self.matrix[self.block_slice(i), self.block_slice(j)]


def _warn_if_singular(M: np.ndarray, what: str):
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < SINGULAR_RTOL * sv[0]:
        warnings.warn(
            f"{what} is singular to working precision; "
            "the equilibrium is not isolated",
            stacklevel=3,
        )


def _local_matrix_raw(game: PolymatrixGame, bases) -> np.ndarray:
    offsets = []
    start = 0
    for k in game.dims:
        offsets.append((start, start + k - 1))
        start += k - 1
    M = np.zeros((start, start))
    for (i, j), mat in game.pair_matrices.items():
        ai, bi = offsets[i]
        aj, bj = offsets[j]
        M[ai:bi, aj:bj] = bases[i].N.T @ mat @ bases[j].N
    return M


def assemble_local_game(
    game: PolymatrixGame, ne_profile, bases=None, mixed_tol: float = 1e-9
) -> GameLocalMatrix:
    """Reduced coupling matrix at a completely mixed equilibrium profile.

    The matrix itself depends only on the pair matrices and tangent bases; the
    profile is required to certify that local coordinates are valid (a
    boundary profile has no tangent-space neighbourhood).
    """
    xs = validate_profile(game, ne_profile)
    if any(float(np.min(x)) <= mixed_tol for x in xs):
        raise ValueError(
            "profile is not completely mixed; local coordinates are undefined at the boundary"
        )
    if bases is None:
        bases = [tangent_basis(k) for k in game.dims]
    for i, b in enumerate(bases):
        if b.k != game.dims[i]:
            raise ValueError(f"basis {i} has k={b.k}, expected {game.dims[i]}")
    M = _local_matrix_raw(game, bases)
    _warn_if_singular(M, "local game matrix")
    return GameLocalMatrix(M, game.dims)


@dataclass(frozen=True)
class ClosedLoopMatrix:
    """Closed-loop dynamics matrix of coupled (higher-order) gradient play.

    State ordering is (w, xi, v): all tangent deviations, then all aux states
    player by player, then all washout states.  With block-diagonal E, F, G, H
    collected from the per-player compensators the matrix is

        [[(I+H) M,  G, -H],
         [  F M,    E, -F],
         [   M,     0, -I]].

    Fixed-order players contribute empty aux blocks and H_i = 0.
    """

    matrix: np.ndarray
    dims: tuple
    aux_dims: tuple

    @property
    def w_dim(self) -> int:
        return sum(k - 1 for k in self.dims)

    @property
    def aux_total(self) -> int:
        return sum(self.aux_dims)

    @property
    def w_slice(self) -> slice:
        return slice(0, self.w_dim)

    @property
    def xi_slice(self) -> slice:
        return slice(self.w_dim, self.w_dim + self.aux_total)

    @property
    def v_slice(self) -> slice:
        return slice(self.w_dim + self.aux_total, 2 * self.w_dim + self.aux_total)


def _stacked_compensators(local: GameLocalMatrix, specs):
    ell = local.matrix.shape[0]
    auxes = [aux_dim(s) for s in specs]
    L = sum(auxes)
    E = np.zeros((L, L))
    F = np.zeros((L, ell))
    G = np.zeros((ell, L))
    H = np.zeros((ell, ell))
    row = 0
    for i, spec in enumerate(specs):
        sl = local.block_slice(i)
        if isinstance(spec, HigherOrderGradientPlay):
            r = local.dims[i] - 1
            if spec.signal_dim != r:
                raise ValueError(
                    f"player {i}: compensator signal dimension {spec.signal_dim} "
                    f"does not match k - 1 = {r}"
                )
            li = spec.aux_dim
            E[row : row + li, row : row + li] = spec.E
            F[row : row + li, sl] = spec.F
            G[sl, row : row + li] = spec.G
            H[sl, sl] = spec.H
            row += li
    return E, F, G, H, tuple(auxes)


def assemble_closed_loop(local: GameLocalMatrix, specs) -> ClosedLoopMatrix:
    """Closed-loop matrix for per-player dynamics around the equilibrium."""
    if len(specs) != local.n:
        raise ValueError(f"need {local.n} specs, got {len(specs)}")
    M = local.matrix
    ell = M.shape[0]
    E, F, G, H, auxes = _stacked_compensators(local, specs)
    L = sum(auxes)
    J = np.block(
        [
            [(np.eye(ell) + H) @ M, G, -H],
            [F @ M, E, -F],
            [M, np.zeros((ell, L)), -np.eye(ell)],
        ]
    )
    return ClosedLoopMatrix(J, local.dims, auxes)


@dataclass(frozen=True)
class DecentralizedPlant:
    """Open-loop plant seen by the compensators, split per player.

    A = [[M, 0], [M, -I]] on state (w, v); player i injects through
    B_i = (S_i; 0) and measures y_i = (M_i-row, -S_i^T)(w; v), where S_i
    selects player i's tangent block.  Stacking all B_i gives (I; 0) and
    stacking all C_i gives (M, -I).
    """

    A: np.ndarray
    B_blocks: tuple
    C_blocks: tuple
    dims: tuple

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def B(self) -> np.ndarray:
        return np.hstack(self.B_blocks)

    @property
    def C(self) -> np.ndarray:
        return np.vstack(self.C_blocks)


def assemble_plant(local: GameLocalMatrix) -> DecentralizedPlant:
    """Build the decentralized plant from the reduced coupling matrix."""
    M = local.matrix
    ell = M.shape[0]
    _warn_if_singular(M, "local game matrix")
    A = np.block([[M, np.zeros((ell, ell))], [M, -np.eye(ell)]])
    B_blocks = []
    C_blocks = []
    for i in range(local.n):
        sl = local.block_slice(i)
        r = local.dims[i] - 1
        sel = np.zeros((ell, r))
        sel[sl, :] = np.eye(r)
        B_blocks.append(np.vstack([sel, np.zeros((ell, r))]))
        C_blocks.append(np.hstack([M[sl, :], -sel.T]))
    return DecentralizedPlant(A, tuple(B_blocks), tuple(C_blocks), local.dims)


@dataclass(frozen=True)
class RescaledJordanDecomposition:
    """Closed loop of the rescaled anti-coordination game and its gain split.

    J is the 9 x 9 loop matrix in interleaved order
    (w1, w2, w3, xi1, v1, xi2, v2, xi3, v3); A, B, C give the equivalent
    J = A - gain * B C in the reordered basis (w1, w3, w2, xi1, v1, xi3, v3,
    xi2, v2) that isolates the scaled channel.  perm_from_grouped maps the
    grouped closed-loop ordering (w, xi, v) to J's ordering; perm_gain maps
    J's ordering to the A/B/C ordering.
    """

    gain: float
    J: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    perm_from_grouped: tuple
    perm_gain: tuple

    def gain_matrix(self, gain: float) -> np.ndarray:
        """A - gain * B C (same spectrum as the loop matrix at that gain)."""
        return self.A - gain * (self.B @ self.C)


def assemble_rescaled_jordan(gain: float, specs) -> RescaledJordanDecomposition:
    """Direct construction of the rescaled anti-coordination closed loop.

    Requires three scalar-aux higher-order specs (k_i = 2, aux_dim 1).  Uses
    N^T [[0,1],[1,0]] N = -1 so the loop matrix is written entry by entry;
    consistency with the generic closed-loop assembly is permutation-exact.
    """
    if len(specs) != 3:
        raise ValueError("the rescaled anti-coordination loop has three players")
    params = []
    for i, s in enumerate(specs):
        if not isinstance(s, HigherOrderGradientPlay) or s.aux_dim != 1 or s.signal_dim != 1:
            raise ValueError(f"player {i}: need a scalar-aux higher-order spec")
        params.append(
            (float(s.E[0, 0]), float(s.F[0, 0]), float(s.G[0, 0]), float(s.H[0, 0]))
        )
    (e1, f1, g1, h1), (e2, f2, g2, h2), (e3, f3, g3, h3) = params
    mu = float(gain)
    J = np.array(
        [
            [0, -mu * (1 + h1), 0, g1, -h1, 0, 0, 0, 0],
            [0, 0, -(1 + h2), 0, 0, g2, -h2, 0, 0],
            [-(1 + h3), 0, 0, 0, 0, 0, 0, g3, -h3],
            [0, -mu * f1, 0, e1, -f1, 0, 0, 0, 0],
            [0, -mu, 0, 0, -1, 0, 0, 0, 0],
            [0, 0, -f2, 0, 0, e2, -f2, 0, 0],
            [0, 0, -1, 0, 0, 0, -1, 0, 0],
            [-f3, 0, 0, 0, 0, 0, 0, e3, -f3],
            [-1, 0, 0, 0, 0, 0, 0, 0, -1],
        ],
        dtype=float,
    )
    A = np.array(
        [
            [0, 0, 0, g1, -h1, 0, 0, 0, 0],
            [-(1 + h3), 0, 0, 0, 0, g3, -h3, 0, 0],
            [0, -(1 + h2), 0, 0, 0, 0, 0, g2, -h2],
            [0, 0, 0, e1, -f1, 0, 0, 0, 0],
            [0, 0, 0, 0, -1, 0, 0, 0, 0],
            [-f3, 0, 0, 0, 0, e3, -f3, 0, 0],
            [-1, 0, 0, 0, 0, 0, -1, 0, 0],
            [0, -f2, 0, 0, 0, 0, 0, e2, -f2],
            [0, -1, 0, 0, 0, 0, 0, 0, -1],
        ],
        dtype=float,
    )
    B = np.array([h1 + 1, 0, 0, f1, 1, 0, 0, 0, 0], dtype=float).reshape(-1, 1)
    C = np.zeros((1, 9))
    C[0, 2] = 1.0
    # grouped (w1,w2,w3,xi1,xi2,xi3,v1,v2,v3) -> interleaved (w1,w2,w3,xi1,v1,xi2,v2,xi3,v3)
    perm_from_grouped = (0, 1, 2, 3, 6, 4, 7, 5, 8)
    # interleaved -> gain ordering (w1,w3,w2,xi1,v1,xi3,v3,xi2,v2)
    perm_gain = (0, 2, 1, 3, 4, 7, 8, 5, 6)
    return RescaledJordanDecomposition(mu, J, A, B, C, perm_from_grouped, perm_gain)
