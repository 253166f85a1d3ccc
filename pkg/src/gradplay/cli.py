"""Command-line surface: file schemas, CSV emitters, and the gradplay tool.

Exit codes: 0 success / affirmative verdict, 1 negative verdict, 2 input
error, 3 precondition failure, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from .analysis import (
    check_mode_support,
    decentralized_stabilizable,
    default_gain_grid,
    gain_sweep,
    pbh_detectable,
    pbh_stabilizable,
    spectral_abscissa,
    strong_stabilizability_2x2,
)
from .games import (
    NeCertificate,
    PolymatrixGame,
    make_jordan,
    uniform_profile,
    verify_ne,
)
from .linearize import assemble_closed_loop, assemble_local_game, assemble_plant
from .simulate import (
    NonFiniteStateError,
    SimConfig,
    Trajectory,
    run_scenario,
    scenario_names,
    simulate_coupled,
)

__all__ = [
    "main",
    "game_to_json",
    "game_from_json",
    "specs_to_json",
    "specs_from_json",
    "load_game_file",
    "load_specs_file",
    "write_matrix_csv",
    "write_trajectory_csv",
    "write_sweep_csv",
]

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_NUMERIC = 4

FLOAT_FMT = "%.17g"


# ---------------------------------------------------------------------------
# JSON schemas


def game_to_json(game: PolymatrixGame) -> dict:
    """Schema: {n, dims: [k_i], matrices: [{i, j, rows}]} with 0-based players."""
    return {
        "n": game.n,
        "dims": list(game.dims),
        "matrices": [
            {"i": i, "j": j, "rows": [list(row) for row in game.pair_matrices[(i, j)]]}
            for (i, j) in sorted(game.pair_matrices)
        ],
    }


def game_from_json(doc: dict) -> PolymatrixGame:
    try:
        dims = tuple(int(k) for k in doc["dims"])
        if "n" in doc and int(doc["n"]) != len(dims):
            raise ValueError("n does not match the number of dims")
        mats = {}
        for entry in doc.get("matrices", []):
            key = (int(entry["i"]), int(entry["j"]))
            if key in mats:
                raise ValueError(f"duplicate pair matrix {key}")
            mats[key] = np.asarray(entry["rows"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed game document: {exc}") from exc
    return PolymatrixGame(dims, mats)


def _matrix_rows(M: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(M)]


def spec_to_json(spec) -> dict:
    if isinstance(spec, dyn.GradientPlay):
        return {"variant": "gradient_play"}
    if isinstance(spec, dyn.Replicator):
        return {"variant": "replicator"}
    if isinstance(spec, dyn.SmoothFictitiousPlay):
        return {"variant": "smooth_fp", "temperature": spec.temperature}
    if isinstance(spec, dyn.HigherOrderGradientPlay):
        return {
            "variant": "higher_order",
            "E": _matrix_rows(spec.E),
            "F": _matrix_rows(spec.F),
            "G": _matrix_rows(spec.G),
            "H": _matrix_rows(spec.H),
        }
    raise TypeError(f"unknown spec {type(spec).__name__}")


def spec_from_json(doc: dict, k: int):
    try:
        variant = doc["variant"]
    except (KeyError, TypeError) as exc:
        raise ValueError("player spec needs a 'variant' key") from exc
    if variant == "gradient_play":
        return dyn.GradientPlay()
    if variant == "replicator":
        return dyn.Replicator()
    if variant == "smooth_fp":
        return dyn.SmoothFictitiousPlay(float(doc.get("temperature", 0.1)))
    if variant == "higher_order":
        try:
            spec = dyn.HigherOrderGradientPlay(
                E=np.asarray(doc["E"], dtype=float),
                F=np.asarray(doc["F"], dtype=float),
                G=np.asarray(doc["G"], dtype=float),
                H=np.asarray(doc["H"], dtype=float),
            )
        except KeyError as exc:
            raise ValueError(f"higher_order spec missing {exc}") from exc
        if spec.signal_dim != k - 1:
            raise ValueError(
                f"higher_order spec has signal dimension {spec.signal_dim}, expected {k - 1}"
            )
        return spec
    if variant == "anticipatory":
        try:
            lam = float(doc["lambda"])
            gamma = float(doc["gamma"])
        except KeyError as exc:
            raise ValueError(f"anticipatory spec missing {exc}") from exc
        gamma2 = doc.get("gamma2")
        return dyn.make_anticipatory(lam, gamma, k, None if gamma2 is None else float(gamma2))
    raise ValueError(f"unknown dynamics variant {variant!r}")


def specs_to_json(specs) -> dict:
    return {"players": [spec_to_json(s) for s in specs]}


def specs_from_json(doc: dict, game: PolymatrixGame) -> list:
    try:
        players = doc["players"]
    except (KeyError, TypeError) as exc:
        raise ValueError("spec document needs a 'players' list") from exc
    if len(players) != game.n:
        raise ValueError(f"spec file has {len(players)} players, game has {game.n}")
    return [spec_from_json(p, k) for p, k in zip(players, game.dims)]


def load_game_file(path) -> PolymatrixGame:
    return game_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def load_specs_file(path, game: PolymatrixGame) -> list:
    return specs_from_json(json.loads(Path(path).read_text(encoding="utf-8")), game)


def parse_profile(game: PolymatrixGame, text: str):
    """Profile argument: 'uniform', inline JSON, or a path to a JSON file."""
    if text == "uniform":
        return uniform_profile(game)
    stripped = text.strip()
    if stripped.startswith("["):
        doc = json.loads(stripped)
    else:
        doc = json.loads(Path(text).read_text(encoding="utf-8"))
    return [np.asarray(x, dtype=float) for x in doc]


def certificate_to_json(cert: NeCertificate) -> dict:
    return {
        "is_ne": cert.is_ne,
        "completely_mixed": cert.completely_mixed,
        "payoff_levels": list(cert.payoff_levels),
        "max_violation": cert.max_violation,
        "tol": cert.tol,
        "profile": [[float(v) for v in x] for x in cert.profile],
    }


# ---------------------------------------------------------------------------
# CSV emitters (RFC-4180-ish: comma separated, header row, \n line ends)


def _fmt(v: float) -> str:
    return FLOAT_FMT % v


def write_matrix_csv(path, M: np.ndarray):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [",".join(_fmt(v) for v in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trajectory_csv(path, traj: Trajectory):
    layout = traj.layout
    header = ["t"]
    for i in range(layout.n):
        header += [f"x{i}_{a}" for a in range(layout.dims[i])]
    for i in range(layout.n):
        header += [f"xi{i}_{a}" for a in range(layout.aux_dims[i])]
    for i in range(layout.n):
        header += [f"v{i}_{a}" for a in range(layout.washout_dims[i])]
    lines = [",".join(header)]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_sweep_csv(path, sweep):
    lines = ["mu,re,im,stable"]
    for g, ev, ok in zip(sweep.grid, sweep.eigenvalues, sweep.stable):
        for z in ev:
            lines.append(f"{_fmt(g)},{_fmt(z.real)},{_fmt(z.imag)},{int(ok)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands


def _emit(doc: dict):
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _cmd_verify(args) -> int:
    game = load_game_file(args.game)
    profile = parse_profile(game, args.profile)
    cert = verify_ne(game, profile, tol=args.tol)
    _emit(certificate_to_json(cert))
    return EXIT_OK if cert.is_ne else EXIT_NEGATIVE


def _cmd_analyze(args) -> int:
    game = load_game_file(args.game)
    specs = load_specs_file(args.specs, game)
    profile = parse_profile(game, args.profile)
    cert = verify_ne(game, profile, tol=args.tol)
    if not (cert.is_ne and cert.completely_mixed):
        print(
            "local analysis undefined: profile is not a completely mixed equilibrium",
            file=sys.stderr,
        )
        return EXIT_PRECONDITION
    local = assemble_local_game(game, profile)
    loop = assemble_closed_loop(local, specs)
    verdict = spectral_abscissa(loop.matrix)
    plant = assemble_plant(local)
    support = check_mode_support(local)
    dec = decentralized_stabilizable(plant)
    report = {
        "certificate": certificate_to_json(cert),
        "eigenvalues": [[z.real, z.imag] for z in verdict.eigenvalues],
        "spectral_abscissa": verdict.spectral_abscissa,
        "stable": verdict.stable,
        "pbh": {
            "stabilizable": pbh_stabilizable(plant.A, plant.B).ok,
            "detectable": pbh_detectable(plant.A, plant.C).ok,
        },
        "per_player_pbh": [
            {
                "player": i,
                "stabilizable": pbh_stabilizable(plant.A, plant.B_blocks[i]).ok,
                "detectable": pbh_detectable(plant.A, plant.C_blocks[i]).ok,
            }
            for i in range(game.n)
        ],
        "mode_support": {
            "satisfied": support.satisfied,
            "indeterminate": support.indeterminate,
        },
        "decentralized": {"ok": dec.ok, "failures": len(dec.failures)},
    }
    if game.n == 2 and game.dims == (2, 2):
        parity = strong_stabilizability_2x2(game)
        report["parity"] = {
            "verdict": parity.verdict,
            "not_strongly_stabilizable": parity.strongly_stabilizable_obstructed,
            "m12": parity.m12,
            "m21": parity.m21,
        }
    else:
        report["parity"] = None
    _emit(report)
    return EXIT_OK if verdict.stable else EXIT_NEGATIVE


def _cmd_sweep(args) -> int:
    if args.template != "jordan":
        raise ValueError(f"unknown game template {args.template!r}")
    if args.mu_min <= 0 or args.mu_max < args.mu_min or args.points < 1:
        raise ValueError("need 0 < mu-min <= mu-max and points >= 1")
    probe_game = make_jordan(1.0)
    specs = load_specs_file(args.specs, probe_game)
    if args.points == 1:
        grid = np.array([args.mu_min])
    else:
        grid = np.logspace(np.log10(args.mu_min), np.log10(args.mu_max), args.points)

    from .simulate import _loop_matrix

    sweep = gain_sweep(lambda g: _loop_matrix(make_jordan(g), specs), grid)
    write_sweep_csv(args.out, sweep)
    _emit(
        {
            "csv": str(args.out),
            "points": int(grid.size),
            "stable_points": int(np.sum(sweep.stable)),
            "crossings": [list(c) for c in sweep.crossings],
        }
    )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    game = load_game_file(args.game)
    specs = load_specs_file(args.specs, game)
    init = parse_profile(game, args.init)
    cfg = SimConfig(step=args.h, horizon=args.horizon, record_stride=args.stride)
    try:
        traj = simulate_coupled(game, specs, init, cfg)
    except NonFiniteStateError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_trajectory_csv(args.out, traj)
    cert = verify_ne(game, traj.final_profile(), tol=max(args.ne_tol, 1e-12))
    converged = traj.converged and cert.is_ne
    _emit(
        {
            "csv": str(args.out),
            "settled": traj.converged,
            "limit_is_ne": cert.is_ne,
            "converged": converged,
            "limit": [[float(v) for v in x] for x in traj.final_profile()],
        }
    )
    return EXIT_OK if converged else EXIT_NEGATIVE


def _cmd_scenario(args) -> int:
    if args.name not in scenario_names():
        print(
            f"unknown scenario {args.name!r}; valid names: {', '.join(scenario_names())}",
            file=sys.stderr,
        )
        return EXIT_INPUT
    overrides = {}
    if args.h is not None:
        overrides["h"] = args.h
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.mu is not None:
        overrides["mu"] = args.mu
    if args.sigma is not None:
        overrides["sigma"] = args.sigma
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.deltas is not None:
        parts = [float(v) for v in args.deltas.split(",")]
        if len(parts) != 3:
            raise ValueError("--deltas needs three comma-separated values")
        overrides["deltas"] = tuple(parts)
    try:
        result = run_scenario(args.name, overrides, out_dir=args.out)
    except NonFiniteStateError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(
        {
            "scenario": result.name,
            "stable": result.verdict.stable,
            "spectral_abscissa": result.verdict.spectral_abscissa,
            "converged": result.converged,
            "consistent": result.consistent,
            "artifacts": {k: str(v) for k, v in result.artifacts.items()},
        }
    )
    return EXIT_OK if result.consistent else EXIT_NEGATIVE


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gradplay",
        description="Learning dynamics in polymatrix games: verification, "
        "stability analysis, gain sweeps, and simulation.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check a profile for Nash equilibrium")
    v.add_argument("game", help="game JSON file")
    v.add_argument("--profile", default="uniform", help="'uniform', inline JSON, or a file")
    v.add_argument("--tol", type=float, default=1e-9, help="equilibrium tolerance")
    v.set_defaults(func=_cmd_verify)

    a = sub.add_parser("analyze", help="stability report around a completely mixed equilibrium")
    a.add_argument("game", help="game JSON file")
    a.add_argument("specs", help="per-player dynamics JSON file")
    a.add_argument("--profile", default="uniform", help="'uniform', inline JSON, or a file")
    a.add_argument("--tol", type=float, default=1e-9, help="equilibrium tolerance")
    a.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("sweep", help="eigenvalue sweep over the payoff scale")
    s.add_argument("template", choices=["jordan"], help="game template to rescale")
    s.add_argument("specs", help="per-player dynamics JSON file")
    s.add_argument("--mu-min", type=float, default=1e-2)
    s.add_argument("--mu-max", type=float, default=1e2)
    s.add_argument("--points", type=int, default=200)
    s.add_argument("--out", default="sweep.csv", help="output CSV path")
    s.set_defaults(func=_cmd_sweep)

    m = sub.add_parser("simulate", help="integrate coupled learning dynamics")
    m.add_argument("game", help="game JSON file")
    m.add_argument("specs", help="per-player dynamics JSON file")
    m.add_argument("--h", type=float, default=0.01, help="integration step")
    m.add_argument("--horizon", type=float, default=200.0)
    m.add_argument("--stride", type=int, default=10, help="record every Nth step")
    m.add_argument("--init", default="uniform", help="initial profile")
    m.add_argument("--ne-tol", type=float, default=1e-3, help="tolerance for the limit check")
    m.add_argument("--out", default="trajectory.csv", help="output CSV path")
    m.set_defaults(func=_cmd_simulate)

    c = sub.add_parser("scenario", help="run a named experiment preset")
    c.add_argument("name", help=f"one of: {', '.join(scenario_names())}")
    c.add_argument("--out", default=None, help="artifact directory")
    c.add_argument("--h", type=float, default=None)
    c.add_argument("--horizon", type=float, default=None)
    c.add_argument("--mu", type=float, default=None)
    c.add_argument("--sigma", type=float, default=None)
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--deltas", default=None, help="three comma-separated diagonal values")
    c.set_defaults(func=_cmd_scenario)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
