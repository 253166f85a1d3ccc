"""Coupled and open-loop integration of the learning dynamics, plus scenario presets.

Players are coupled only through their payoff streams: at every integrator
stage each player's payoff is recomputed from the current opponent strategies,
and the per-player rules never see the game matrices directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import dynamics as dyn
from .analysis import (
    StabilityVerdict,
    SweepResult,
    default_gain_grid,
    gain_sweep,
    spectral_abscissa,
)
from .games import (
    PolymatrixGame,
    make_coordination,
    make_jordan,
    payoff_map,
    perturb_jordan_diagonal,
    perturb_random,
    uniform_profile,
    validate_profile,
    verify_ne,
)
from .linearize import GameLocalMatrix, _local_matrix_raw, assemble_closed_loop
from .simplex import tangent_basis

__all__ = [
    "SimConfig",
    "Trajectory",
    "NonFiniteStateError",
    "ConvergenceCheck",
    "ScenarioResult",
    "simulate_coupled",
    "simulate_open_loop",
    "detect_convergence",
    "run_scenario",
    "scenario_names",
]


class NonFiniteStateError(RuntimeError):
    """Raised when the integrated state stops being finite."""

    def __init__(self, time: float):
        super().__init__(f"nonfinite state encountered at t = {time:g}")
        self.time = time


@dataclass(frozen=True)
class SimConfig:
    step: float = 0.01
    horizon: float = 200.0
    convergence_tol: float = 1e-3
    record_stride: int = 10

    def __post_init__(self):
        if self.step <= 0 or self.horizon <= 0:
            raise ValueError("step and horizon must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")


@dataclass(frozen=True)
class StateLayout:
    """Slices of the flat state vector: strategies, then aux, then washout."""

    dims: tuple
    aux_dims: tuple
    washout_dims: tuple

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def nx(self) -> int:
        return sum(self.dims)

    @property
    def dim(self) -> int:
        return self.nx + sum(self.aux_dims) + sum(self.washout_dims)

    def x_slice(self, i: int) -> slice:
        a = sum(self.dims[:i])
        return slice(a, a + self.dims[i])

    def xi_slice(self, i: int) -> slice:
        a = self.nx + sum(self.aux_dims[:i])
        return slice(a, a + self.aux_dims[i])

    def v_slice(self, i: int) -> slice:
        a = self.nx + sum(self.aux_dims) + sum(self.washout_dims[:i])
        return slice(a, a + self.washout_dims[i])


def _layout_for(dims, specs) -> StateLayout:
    return StateLayout(
        tuple(dims),
        tuple(dyn.aux_dim(s) for s in specs),
        tuple(dyn.washout_dim(s, k) for s, k in zip(specs, dims)),
    )


@dataclass
class Trajectory:
    """Recorded states of one integration run.

    converged is the horizon-free settling flag: over the final tenth of the
    run the full state stays within convergence_tol of its final value, which
    is stored as the limit estimate.
    """

    times: np.ndarray
    states: np.ndarray
    layout: StateLayout
    converged: bool
    limit: np.ndarray
    convergence_tol: float

    def strategy(self, i: int) -> np.ndarray:
        return self.states[:, self.layout.x_slice(i)]

    def aux(self, i: int) -> np.ndarray:
        return self.states[:, self.layout.xi_slice(i)]

    def washout(self, i: int) -> np.ndarray:
        return self.states[:, self.layout.v_slice(i)]

    def final_profile(self) -> list:
        return [self.limit[self.layout.x_slice(i)].copy() for i in range(self.layout.n)]


def _project_floats(vals):
    """Simplex projection on a plain float list (mirrors simplex.project_to_simplex)."""
    top = max(vals)
    u = sorted(vals, reverse=True)
    css = 0.0
    theta = top
    for m, um in enumerate(u, start=1):
        css += um - top
        t = (css - 1.0) / m + top
        if um > t:
            theta = t
    return [v - theta if v > theta else 0.0 for v in vals]


def _projection_family(specs) -> bool:
    return all(
        isinstance(s, (dyn.GradientPlay, dyn.HigherOrderGradientPlay)) for s in specs
    )


def _linear_operators(game: PolymatrixGame, specs, bases, layout: StateLayout):
    """Pre-projection argument map and aux-derivative map for the fast path.

    For gradient-play family players the only nonlinearity is the simplex
    projection; the projection argument x_i + p~_i and the aux derivatives are
    linear in the flat state, so one matrix-vector product per stage computes
    them all.
    """
    dim = layout.dim
    PRE = np.zeros((layout.nx, dim))
    n_aux_rows = sum(layout.aux_dims) + sum(layout.washout_dims)
    AUX = np.zeros((n_aux_rows, dim))
    for i, spec in enumerate(specs):
        xsl = layout.x_slice(i)
        PRE[xsl, xsl] += np.eye(layout.dims[i])
        if isinstance(spec, dyn.HigherOrderGradientPlay):
            N = bases[i].N
            W = np.eye(layout.dims[i]) + N @ spec.H @ N.T
        else:
            W = np.eye(layout.dims[i])
        for (a, j), M in game.pair_matrices.items():
            if a != i:
                continue
            PRE[xsl, layout.x_slice(j)] += W @ M
        if isinstance(spec, dyn.HigherOrderGradientPlay):
            PRE[xsl, layout.xi_slice(i)] = N @ spec.G
            PRE[xsl, layout.v_slice(i)] = -N @ spec.H
    aux0 = layout.nx
    for i, spec in enumerate(specs):
        if not isinstance(spec, dyn.HigherOrderGradientPlay):
            continue
        N = bases[i].N
        xi_rows = slice(layout.xi_slice(i).start - aux0, layout.xi_slice(i).stop - aux0)
        v_rows = slice(layout.v_slice(i).start - aux0, layout.v_slice(i).stop - aux0)
        for (a, j), M in game.pair_matrices.items():
            if a != i:
                continue
            AUX[xi_rows, layout.x_slice(j)] += spec.F @ N.T @ M
            AUX[v_rows, layout.x_slice(j)] += N.T @ M
        AUX[xi_rows, layout.xi_slice(i)] = spec.E
        AUX[xi_rows, layout.v_slice(i)] = -spec.F
        AUX[v_rows, layout.v_slice(i)] = -np.eye(layout.washout_dims[i])
    return PRE, AUX


def _coupled_deriv(game: PolymatrixGame, specs, bases, layout: StateLayout):
    nx = layout.nx
    if _projection_family(specs):
        PRE, AUX = _linear_operators(game, specs, bases, layout)
        bounds = [(layout.x_slice(i).start, layout.x_slice(i).stop) for i in range(layout.n)]
        has_aux = AUX.shape[0] > 0

        def deriv(t, y, out):
            arg = PRE @ y
            vals = arg.tolist()
            proj = []
            for a, b in bounds:
                proj += _project_floats(vals[a:b])
            out[:nx] = proj
            out[:nx] -= y[:nx]
            if has_aux:
                out[nx:] = AUX @ y

        return deriv

    # Generic path: delegate each player's rule to dynamics.derivative.
    PAY = np.zeros((nx, nx))
    for (i, j), M in game.pair_matrices.items():
        PAY[layout.x_slice(i), layout.x_slice(j)] = M

    def deriv(t, y, out):
        x_all = y[:nx]
        p_all = PAY @ x_all
        for i, spec in enumerate(specs):
            xsl = layout.x_slice(i)
            state = dyn.PlayerState(y[xsl], y[layout.xi_slice(i)], y[layout.v_slice(i)])
            d = dyn.derivative(spec, state, p_all[xsl], bases[i])
            out[xsl] = d.dx
            out[layout.xi_slice(i)] = d.dxi
            out[layout.v_slice(i)] = d.dv

    return deriv


def _integrate(deriv, y0: np.ndarray, cfg: SimConfig):
    h = cfg.step
    n_steps = max(1, int(round(cfg.horizon / h)))
    stride = cfg.record_stride
    rec_steps = list(range(0, n_steps + 1, stride))
    if rec_steps[-1] != n_steps:
        rec_steps.append(n_steps)
    times = np.empty(len(rec_steps))
    states = np.empty((len(rec_steps), y0.size))
    y = y0.astype(float).copy()
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    tmp = np.empty_like(y)
    times[0] = 0.0
    states[0] = y
    rec = 1
    next_rec = rec_steps[rec] if rec < len(rec_steps) else -1
    for step in range(1, n_steps + 1):
        t = (step - 1) * h
        try:
            deriv(t, y, k1)
            np.multiply(k1, 0.5 * h, out=tmp)
            tmp += y
            deriv(t + 0.5 * h, tmp, k2)
            np.multiply(k2, 0.5 * h, out=tmp)
            tmp += y
            deriv(t + 0.5 * h, tmp, k3)
            np.multiply(k3, h, out=tmp)
            tmp += y
            deriv(t + h, tmp, k4)
        except ValueError as exc:
            # overflow inside a stage evaluation; shape errors re-raise
            if "finite" in str(exc):
                raise NonFiniteStateError(step * h) from exc
            raise
        k2 += k3
        k2 *= 2.0
        k1 += k2
        k1 += k4
        k1 *= h / 6.0
        y += k1
        if not np.all(np.isfinite(y)):
            raise NonFiniteStateError(step * h)
        if step == next_rec:
            times[rec] = step * h
            states[rec] = y
            rec += 1
            next_rec = rec_steps[rec] if rec < len(rec_steps) else -1
    return times, states


def _settled(times, states, tol) -> bool:
    span = times[-1] - times[0]
    window = times >= times[-1] - 0.1 * span
    final = states[-1]
    return bool(np.max(np.abs(states[window] - final)) <= tol)


def _finish(times, states, layout, cfg) -> Trajectory:
    return Trajectory(
        times=times,
        states=states,
        layout=layout,
        converged=_settled(times, states, cfg.convergence_tol),
        limit=states[-1].copy(),
        convergence_tol=cfg.convergence_tol,
    )


def simulate_coupled(
    game: PolymatrixGame,
    specs,
    init,
    cfg: SimConfig | None = None,
    xi0=None,
    v0="steady",
) -> Trajectory:
    """Integrate all players in feedback through the game with fixed-step RK4.

    Auxiliary states start at zero unless xi0 is given.  The washout states
    start at their steady value for the initial payoffs (v0="steady", no
    artificial startup transient), at zero (v0="zero"), or at explicit
    per-player vectors.
    """
    cfg = cfg or SimConfig()
    if len(specs) != game.n:
        raise ValueError(f"need {game.n} specs, got {len(specs)}")
    xs = validate_profile(game, init)
    bases = [tangent_basis(k) for k in game.dims]
    layout = _layout_for(game.dims, specs)
    y0 = np.zeros(layout.dim)
    for i, x in enumerate(xs):
        y0[layout.x_slice(i)] = x
    if xi0 is not None:
        for i, xi in enumerate(xi0):
            if xi is None:
                continue
            xi = np.asarray(xi, dtype=float)
            if xi.shape != (layout.aux_dims[i],):
                raise ValueError(f"xi0[{i}] has shape {xi.shape}")
            y0[layout.xi_slice(i)] = xi
    if isinstance(v0, str):
        if v0 == "steady":
            for i in range(game.n):
                if layout.washout_dims[i]:
                    y0[layout.v_slice(i)] = bases[i].N.T @ payoff_map(game, i, xs)
        elif v0 != "zero":
            raise ValueError("v0 must be 'steady', 'zero', or explicit vectors")
    else:
        for i, v in enumerate(v0):
            if v is None:
                continue
            v = np.asarray(v, dtype=float)
            if v.shape != (layout.washout_dims[i],):
                raise ValueError(f"v0[{i}] has shape {v.shape}")
            y0[layout.v_slice(i)] = v
    deriv = _coupled_deriv(game, specs, bases, layout)
    times, states = _integrate(deriv, y0, cfg)
    return _finish(times, states, layout, cfg)


def simulate_open_loop(
    spec,
    payoff_fn: Callable[[float], np.ndarray],
    x0,
    cfg: SimConfig | None = None,
    xi0=None,
    v0="zero",
) -> Trajectory:
    """Integrate a single player against an exogenous payoff stream.

    The loop is broken, so the washout default is a cold start (v0="zero");
    with v0="steady" the filter output starts identically zero and an unstable
    compensator sits unexcited on its equilibrium.
    """
    cfg = cfg or SimConfig()
    x0 = np.asarray(x0, dtype=float)
    k = x0.size
    if np.min(x0) < -1e-12 or abs(float(np.sum(x0)) - 1.0) > 1e-12:
        raise ValueError("x0 is not a probability vector")
    basis = tangent_basis(k)
    layout = _layout_for((k,), [spec])
    p0 = np.asarray(payoff_fn(0.0), dtype=float)
    if p0.shape != (k,):
        raise ValueError(f"payoff_fn returned shape {p0.shape}, expected ({k},)")
    y0 = np.zeros(layout.dim)
    y0[:k] = x0
    if xi0 is not None:
        xi = np.asarray(xi0, dtype=float)
        if xi.shape != (layout.aux_dims[0],):
            raise ValueError(f"xi0 has shape {xi.shape}")
        y0[layout.xi_slice(0)] = xi
    if isinstance(v0, str):
        if v0 == "steady":
            if layout.washout_dims[0]:
                y0[layout.v_slice(0)] = basis.N.T @ p0
        elif v0 != "zero":
            raise ValueError("v0 must be 'steady', 'zero', or an explicit vector")
    elif layout.washout_dims[0]:
        v = np.asarray(v0, dtype=float)
        if v.shape != (layout.washout_dims[0],):
            raise ValueError(f"v0 has shape {v.shape}")
        y0[layout.v_slice(0)] = v

    xsl = layout.x_slice(0)
    xisl = layout.xi_slice(0)
    vsl = layout.v_slice(0)

    def deriv(t, y, out):
        p = np.asarray(payoff_fn(t), dtype=float)
        state = dyn.PlayerState(y[xsl], y[xisl], y[vsl])
        d = dyn.derivative(spec, state, p, basis)
        out[xsl] = d.dx
        out[xisl] = d.dxi
        out[vsl] = d.dv

    times, states = _integrate(deriv, y0, cfg)
    return _finish(times, states, layout, cfg)


class ConvergenceCheck(NamedTuple):
    converged: bool
    hitting_time: float | None


def detect_convergence(traj: Trajectory, target, tol: float) -> ConvergenceCheck:
    """Whether the strategies stay within tol of the target over the final 10%.

    On success the hitting time is the first recorded time from which the
    distance never exceeds tol again.
    """
    dist = np.zeros(traj.times.size)
    for i in range(traj.layout.n):
        ti = np.asarray(target[i], dtype=float)
        dist = np.maximum(dist, np.max(np.abs(traj.strategy(i) - ti), axis=1))
    span = traj.times[-1] - traj.times[0]
    window = traj.times >= traj.times[-1] - 0.1 * span
    if not np.all(dist[window] <= tol):
        return ConvergenceCheck(False, None)
    below = dist <= tol
    idx = traj.times.size - 1
    while idx > 0 and below[idx - 1]:
        idx -= 1
    return ConvergenceCheck(True, float(traj.times[idx]))


# ---------------------------------------------------------------------------
# Scenario presets


DIVERGENCE_DISTANCE = 0.45


@dataclass
class ScenarioResult:
    name: str
    trajectory: Trajectory
    verdict: StabilityVerdict
    converged: bool
    hitting_time: float | None
    consistent: bool
    target: list | None
    sweep: SweepResult | None = None
    artifacts: dict = field(default_factory=dict)

    @property
    def diverged(self) -> bool:
        """Left the target's neighbourhood (max-norm distance beyond 0.45,
        which sits near the simplex boundary) or ran out the horizon without
        converging."""
        if not self.converged:
            return True
        if self.target is None:
            return False
        excursion = 0.0
        for i in range(self.trajectory.layout.n):
            ti = np.asarray(self.target[i], dtype=float)
            excursion = max(
                excursion, float(np.max(np.abs(self.trajectory.strategy(i) - ti)))
            )
        return excursion > DIVERGENCE_DISTANCE


def _data_specs(filename: str, game: PolymatrixGame):
    # cli owns the file schemas but imports this module; defer to avoid a cycle
    from . import cli

    text = (resources.files("gradplay") / "data" / filename).read_text(encoding="utf-8")
    return cli.specs_from_json(json.loads(text), game)


def _offset_profile(game: PolymatrixGame, offset: float):
    out = []
    for i, k in enumerate(game.dims):
        x = np.full(k, 1.0 / k) + offset * tangent_basis(k).N[:, 0]
        if np.min(x) <= 0:
            raise ValueError("offset pushes the initial profile out of the simplex")
        out.append(x)
    return out


def _loop_matrix(game: PolymatrixGame, specs) -> np.ndarray:
    bases = [tangent_basis(k) for k in game.dims]
    local = GameLocalMatrix(_local_matrix_raw(game, bases), game.dims)
    return assemble_closed_loop(local, specs).matrix


def _take(overrides: dict, allowed: dict) -> dict:
    unknown = set(overrides) - set(allowed)
    if unknown:
        raise ValueError(f"unknown overrides: {sorted(unknown)}")
    merged = dict(allowed)
    merged.update(overrides)
    return merged


@dataclass
class _CoupledPlan:
    game: PolymatrixGame
    specs: list
    cfg: SimConfig
    init: list
    target: list | None
    sweep_builder: Callable[[], SweepResult] | None = None


def _plan_jordan_single(overrides) -> _CoupledPlan:
    o = _take(overrides, {"h": 0.002, "horizon": 200.0, "stride": 50, "offset": 0.05})
    game = make_jordan(1.0)
    specs = _data_specs("jordan_single.specs.json", game)
    cfg = SimConfig(step=o["h"], horizon=o["horizon"], record_stride=o["stride"])
    return _CoupledPlan(game, specs, cfg, _offset_profile(game, o["offset"]), uniform_profile(game))


def _plan_jordan_random(overrides) -> _CoupledPlan:
    o = _take(
        overrides,
        {"h": 0.002, "horizon": 150.0, "stride": 50, "offset": 0.05, "sigma": 0.3, "seed": 1},
    )
    game = perturb_random(make_jordan(1.0), o["sigma"], o["seed"])
    specs = _data_specs("jordan_single.specs.json", game)
    cfg = SimConfig(step=o["h"], horizon=o["horizon"], record_stride=o["stride"])
    return _CoupledPlan(game, specs, cfg, _offset_profile(game, o["offset"]), None)


def _plan_jordan_diagonal(overrides) -> _CoupledPlan:
    o = _take(
        overrides,
        {
            "h": 0.002,
            "horizon": 80.0,
            "stride": 20,
            "offset": 0.05,
            "deltas": (0.3877, 0.1446, 0.1352),
        },
    )
    game = perturb_jordan_diagonal(*o["deltas"])
    specs = _data_specs("jordan_single.specs.json", game)
    cfg = SimConfig(step=o["h"], horizon=o["horizon"], record_stride=o["stride"])
    return _CoupledPlan(game, specs, cfg, _offset_profile(game, o["offset"]), uniform_profile(game))


def _plan_jordan_rescaled(overrides) -> _CoupledPlan:
    o = _take(
        overrides, {"h": 0.01, "horizon": 100.0, "stride": 10, "offset": 0.05, "mu": 1.0}
    )
    game = make_jordan(o["mu"])
    specs = _data_specs("jordan_rescaled.specs.json", game)
    cfg = SimConfig(step=o["h"], horizon=o["horizon"], record_stride=o["stride"])

    def sweep_builder() -> SweepResult:
        return gain_sweep(
            lambda g: _loop_matrix(make_jordan(g), specs), default_gain_grid()
        )

    return _CoupledPlan(
        game, specs, cfg, _offset_profile(game, o["offset"]), uniform_profile(game), sweep_builder
    )


def _plan_coordination_stabilize(overrides) -> _CoupledPlan:
    o = _take(overrides, {"h": 0.002, "horizon": 80.0, "stride": 20, "offset": 0.05})
    game = make_coordination()
    specs = _data_specs("coordination_stabilize.specs.json", game)
    cfg = SimConfig(step=o["h"], horizon=o["horizon"], record_stride=o["stride"])
    return _CoupledPlan(game, specs, cfg, _offset_profile(game, o["offset"]), uniform_profile(game))


_COUPLED_PLANS = {
    "jordan-single": _plan_jordan_single,
    "jordan-random": _plan_jordan_random,
    "jordan-diagonal": _plan_jordan_diagonal,
    "jordan-rescaled": _plan_jordan_rescaled,
    "coordination-stabilize": _plan_coordination_stabilize,
}

SCENARIO_NAMES = tuple(list(_COUPLED_PLANS) + ["coordination-openloop"])


def scenario_names() -> tuple:
    return SCENARIO_NAMES


def _run_openloop(overrides, out_dir) -> ScenarioResult:
    o = _take(overrides, {"h": 0.002, "horizon": 40.0, "stride": 10})
    game = make_coordination()
    specs = _data_specs("coordination_stabilize.specs.json", game)
    spec = specs[0]
    cfg = SimConfig(step=o["h"], horizon=o["horizon"], record_stride=o["stride"])
    payoff = np.array([0.0, 1.0])
    traj = simulate_open_loop(spec, lambda t: payoff, np.array([0.5, 0.5]), cfg, v0="zero")
    verdict = spectral_abscissa(spec.E)
    corner = np.array([1.0, 0.0])
    converged = bool(np.max(np.abs(traj.strategy(0)[-1] - corner)) <= 1e-2)
    xi_grew = bool(np.max(np.abs(traj.aux(0)[-1])) > 1e3)
    consistent = (not verdict.stable) == xi_grew
    result = ScenarioResult(
        "coordination-openloop", traj, verdict, converged, None, consistent, [corner]
    )
    if out_dir is not None:
        _write_artifacts(result, out_dir)
    return result


def run_scenario(name: str, overrides: dict | None = None, out_dir=None) -> ScenarioResult:
    """Run a named experiment preset and cross-check simulation against spectrum.

    Coupled scenarios report convergence to the known equilibrium (or, for the
    randomly perturbed game, settling to a profile that certifies as a Nash
    equilibrium) and flag consistency with the closed-loop stability verdict.
    The open-loop scenario instead drives one player with a constant payoff
    and checks that the unstable compensator misses the best response.
    """
    overrides = dict(overrides or {})
    if name == "coordination-openloop":
        return _run_openloop(overrides, out_dir)
    if name not in _COUPLED_PLANS:
        raise ValueError(f"unknown scenario {name!r}; valid names: {', '.join(SCENARIO_NAMES)}")
    plan = _COUPLED_PLANS[name](overrides)
    traj = simulate_coupled(plan.game, plan.specs, plan.init, plan.cfg)
    verdict = spectral_abscissa(_loop_matrix(plan.game, plan.specs))
    if plan.target is not None:
        converged, hit = detect_convergence(traj, plan.target, plan.cfg.convergence_tol)
    else:
        hit = None
        converged = False
        if traj.converged:
            cert = verify_ne(plan.game, traj.final_profile(), tol=1e-3)
            converged = cert.is_ne
    consistent = verdict.stable == converged
    sweep = plan.sweep_builder() if plan.sweep_builder is not None else None
    result = ScenarioResult(
        name, traj, verdict, converged, hit, consistent, plan.target, sweep
    )
    if out_dir is not None:
        _write_artifacts(result, out_dir)
    return result


def _write_artifacts(result: ScenarioResult, out_dir):
    from . import cli

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj_path = out / "trajectory.csv"
    cli.write_trajectory_csv(traj_path, result.trajectory)
    result.artifacts["trajectory"] = traj_path
    report = {
        "scenario": result.name,
        "spectral_abscissa": result.verdict.spectral_abscissa,
        "stable": result.verdict.stable,
        "eigenvalues": [[z.real, z.imag] for z in result.verdict.eigenvalues],
        "converged": result.converged,
        "hitting_time": result.hitting_time,
        "consistent": result.consistent,
    }
    if result.sweep is not None:
        report["crossings"] = [list(c) for c in result.sweep.crossings]
        locus_path = out / "rootlocus.csv"
        cli.write_sweep_csv(locus_path, result.sweep)
        result.artifacts["rootlocus"] = locus_path
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    result.artifacts["report"] = report_path
