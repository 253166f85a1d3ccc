"""Polymatrix games: payoff evaluation, Nash verification, named instances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PolymatrixGame",
    "NeCertificate",
    "payoff_map",
    "utility",
    "verify_ne",
    "make_jordan",
    "make_coordination",
    "perturb_jordan_diagonal",
    "perturb_random",
    "uniform_profile",
    "validate_profile",
]

NE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PolymatrixGame:
    """An n-player game with pairwise bilinear utilities.

    Player i's utility is x_i^T sum_j M[i,j] x_j over opponents j.  Absent
    (i, j) pairs act as zero matrices, which keeps sparse cyclic games clean.
    Treat instances as immutable values.
    """

    dims: tuple
    pair_matrices: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, PolymatrixGame):
            return NotImplemented
        if self.dims != other.dims or set(self.pair_matrices) != set(other.pair_matrices):
            return False
        return all(
            np.array_equal(m, other.pair_matrices[key])
            for key, m in self.pair_matrices.items()
        )

    def __post_init__(self):
        dims = tuple(int(k) for k in self.dims)
        object.__setattr__(self, "dims", dims)
        if any(k < 2 for k in dims):
            raise ValueError("every player needs at least 2 pure strategies")
        mats = {}
        for (i, j), m in self.pair_matrices.items():
            if i == j or not (0 <= i < self.n) or not (0 <= j < self.n):
                raise ValueError(f"invalid player pair ({i}, {j})")
            m = np.asarray(m, dtype=float)
            if m.shape != (dims[i], dims[j]):
                raise ValueError(
                    f"pair matrix ({i}, {j}) has shape {m.shape}, "
                    f"expected {(dims[i], dims[j])}"
                )
            mats[(i, j)] = m
        object.__setattr__(self, "pair_matrices", mats)

    @property
    def n(self) -> int:
        return len(self.dims)

    def pair(self, i: int, j: int) -> np.ndarray:
        """Payoff matrix of player i against player j (zeros if absent)."""
        m = self.pair_matrices.get((i, j))
        if m is None:
            return np.zeros((self.dims[i], self.dims[j]))
        return m


@dataclass(frozen=True)
class NeCertificate:
    """Result of a Nash-equilibrium check at a strategy profile.

    payoff_levels holds the mean payoff component per player; for a completely
    mixed equilibrium each payoff vector is constant at that level, and
    max_violation bounds both the best-deviation gain and the deviation of
    payoff components from their level.
    """

    profile: tuple
    is_ne: bool
    completely_mixed: bool
    payoff_levels: tuple
    max_violation: float
    tol: float


def validate_profile(game: PolymatrixGame, profile) -> list:
    """Check simplex membership per player and return the profile as arrays."""
    if len(profile) != game.n:
        raise ValueError(f"profile has {len(profile)} strategies for {game.n} players")
    out = []
    for i, x in enumerate(profile):
        x = np.asarray(x, dtype=float)
        if x.shape != (game.dims[i],):
            raise ValueError(f"strategy {i} has shape {x.shape}, expected ({game.dims[i]},)")
        if np.min(x) < -1e-12 or abs(float(np.sum(x)) - 1.0) > 1e-12:
            raise ValueError(f"strategy {i} is not a probability vector")
        out.append(x)
    return out


def uniform_profile(game: PolymatrixGame) -> list:
    return [np.full(k, 1.0 / k) for k in game.dims]


def payoff_map(game: PolymatrixGame, i: int, profile) -> np.ndarray:
    """Payoff vector of player i: sum of M[i,j] x_j over opponents j."""
    if not 0 <= i < game.n:
        raise ValueError(f"player index {i} out of range for {game.n} players")
    xs = validate_profile(game, profile)
    p = np.zeros(game.dims[i])
    for (a, j), m in game.pair_matrices.items():
        if a == i:
            p += m @ xs[j]
    return p


def utility(game: PolymatrixGame, i: int, profile) -> float:
    """Expected utility x_i^T p_i of player i at the profile."""
    xs = validate_profile(game, profile)
    return float(xs[i] @ payoff_map(game, i, profile))


def verify_ne(game: PolymatrixGame, profile, tol: float = NE_TOL) -> NeCertificate:
    """Certify whether a profile is a Nash equilibrium.

    The profile is an equilibrium when no player can gain more than tol by
    deviating to their best pure strategy; it is completely mixed when every
    strategy entry exceeds tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    xs = validate_profile(game, profile)
    gains = []
    levels = []
    const_defects = []
    for i, x in enumerate(xs):
        p = payoff_map(game, i, xs)
        u = float(x @ p)
        gains.append(float(np.max(p)) - u)
        alpha = float(np.mean(p))
        levels.append(alpha)
        const_defects.append(float(np.max(np.abs(p - alpha))))
    completely_mixed = all(float(np.min(x)) > tol for x in xs)
    is_ne = max(gains) <= tol
    max_violation = max(gains)
    if completely_mixed:
        max_violation = max(max_violation, max(const_defects))
    return NeCertificate(
        profile=tuple(x.copy() for x in xs),
        is_ne=is_ne,
        completely_mixed=completely_mixed,
        payoff_levels=tuple(levels),
        max_violation=max_violation,
        tol=tol,
    )


_ANTI = np.array([[0.0, 1.0], [1.0, 0.0]])


def make_jordan(scale: float = 1.0) -> PolymatrixGame:
    """Three-player cyclic anti-coordination game with a unique mixed equilibrium.

    Player 0 plays against player 1 with payoff matrix scale*[[0,1],[1,0]];
    players 1 and 2 close the cycle with the unscaled matrix.  The unique Nash
    equilibrium is (1/2, 1/2) for every player, for any scale > 0.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    return PolymatrixGame(
        dims=(2, 2, 2),
        pair_matrices={(0, 1): scale * _ANTI, (1, 2): _ANTI.copy(), (2, 0): _ANTI.copy()},
    )


def make_coordination() -> PolymatrixGame:
    """Two-player identical-interest coordination game with identity payoffs."""
    return PolymatrixGame(
        dims=(2, 2),
        pair_matrices={(0, 1): np.eye(2), (1, 0): np.eye(2)},
    )


def perturb_jordan_diagonal(d1: float, d2: float, d3: float) -> PolymatrixGame:
    """Anti-coordination game with d_i added on the diagonal of each pair matrix.

    For d_i in [0, 1) the uniform profile remains a completely mixed Nash
    equilibrium (the payoff vectors stay constant).
    """
    ds = (float(d1), float(d2), float(d3))
    if any(d < 0.0 or d >= 1.0 for d in ds):
        raise ValueError("diagonal perturbations must lie in [0, 1)")
    return PolymatrixGame(
        dims=(2, 2, 2),
        pair_matrices={
            (0, 1): _ANTI + ds[0] * np.eye(2),
            (1, 2): _ANTI + ds[1] * np.eye(2),
            (2, 0): _ANTI + ds[2] * np.eye(2),
        },
    )


def _polar_gaussians(rng, count: int) -> np.ndarray:
    """Standard normals via Marsaglia's polar rejection from rng.random().

    Only rng.random() is consumed, so the stream is pinned by the PCG64 seed
    regardless of numpy's distribution implementations.
    """
    out = np.empty(count)
    n = 0
    while n < count:
        u = 2.0 * rng.random() - 1.0
        v = 2.0 * rng.random() - 1.0
        s = u * u + v * v
        if s >= 1.0 or s == 0.0:
            continue
        f = math.sqrt(-2.0 * math.log(s) / s)
        out[n] = u * f
        n += 1
        if n < count:
            out[n] = v * f
            n += 1
    return out


def perturb_random(game: PolymatrixGame, sigma: float, seed: int) -> PolymatrixGame:
    """Add i.i.d. Gaussian(0, sigma^2) noise to every stored pair matrix.

    Deterministic in (seed, sigma): uniforms come from PCG64(seed) and are
    mapped to normals by the polar method, with pairs visited in sorted order.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return PolymatrixGame(game.dims, dict(game.pair_matrices))
    rng = np.random.Generator(np.random.PCG64(seed))
    mats = {}
    for key in sorted(game.pair_matrices):
        m = game.pair_matrices[key]
        noise = sigma * _polar_gaussians(rng, m.size).reshape(m.shape)
        mats[key] = m + noise
    return PolymatrixGame(game.dims, mats)
