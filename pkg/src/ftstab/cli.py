"""Command-line interface.

One JSON configuration describes a system; the subcommands analyze its
coupling graph, compute its spectrum, bound its stabilization time, simulate
decay, and verify a vanishing-time candidate. Exit codes follow a stable
contract: 0 affirmative, 1 negative, 2 input or runtime error. Reports go to
stdout as JSON; human-readable summaries go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import simulator
from .expr import ExprError, parse_expr
from .graph_criteria import robust_fts_report
from .model import (
    BoundaryMatrix,
    HyperbolicSystem,
    InitialData,
    ModelError,
    is_autonomous,
    validate_system,
)
from .spectral import SpectralError, spectrum_report
from .stabtime import NotNilpotentError, StabTimeError, time_report

CONFIG_VERSION = 1


class ConfigError(Exception):
    pass


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def load_config(path: str | Path) -> tuple[HyperbolicSystem, InitialData, dict]:
    """Parse and validate a system configuration file."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e

    _require(isinstance(raw, dict), "config must be a JSON object")
    _require(raw.get("version") == CONFIG_VERSION, f"config version must be {CONFIG_VERSION}")
    for key in ("n", "m", "a", "b", "P", "phi"):
        _require(key in raw, f"missing config key {key!r}")

    n = raw["n"]
    m = raw["m"]
    _require(isinstance(n, int) and n >= 2, "n must be an integer >= 2")
    _require(isinstance(m, int) and 0 <= m <= n, "m must be an integer in [0, n]")

    def parse_list(key: str) -> tuple:
        items = raw[key]
        _require(isinstance(items, list) and len(items) == n, f"{key} must list {n} expressions")
        try:
            return tuple(parse_expr(str(s)) for s in items)
        except ExprError as e:
            raise ConfigError(f"in {key}: {e}") from e

    a = parse_list("a")
    b = parse_list("b")
    phi = InitialData(parse_list("phi"))

    P = raw["P"]
    if isinstance(P, dict):
        _require(set(P) == {"mask", "q"}, "time-dependent P needs exactly the keys mask and q")
        mask, q = P["mask"], P["q"]
        _require(
            isinstance(mask, list) and len(mask) == n and all(len(r) == n for r in mask),
            f"P.mask must be {n}x{n}",
        )
        _require(
            all(v in (0, 1) for r in mask for v in r), "P.mask entries must be 0 or 1"
        )
        _require(
            isinstance(q, list) and len(q) == n and all(len(r) == n for r in q),
            f"P.q must be {n}x{n}",
        )
        try:
            boundary = BoundaryMatrix.time_varying(mask, [[str(v) for v in row] for row in q])
        except ExprError as e:
            raise ConfigError(f"in P.q: {e}") from e
    else:
        _require(
            isinstance(P, list)
            and len(P) == n
            and all(isinstance(r, list) and len(r) == n for r in P)
            and all(isinstance(v, (int, float)) for r in P for v in r),
            f"P must be an {n}x{n} matrix of numbers (or a mask/q object)",
        )
        boundary = BoundaryMatrix.constant(P)

    horizon = float(raw.get("horizon", 10.0))
    density = int(raw.get("sample_density", 257))
    try:
        system = HyperbolicSystem(n, m, a, b, boundary, horizon, density)
    except ModelError as e:
        raise ConfigError(str(e)) from e

    extras = {
        "spatial_points": int(raw.get("spatial_points", simulator.DEFAULT_SPATIAL_POINTS)),
        "dt": raw.get("dt"),
        "minor_tol": float(raw.get("minor_tol", 1e-9)),
    }
    return system, phi, extras


def _emit(report: dict, pretty: bool):
    text = json.dumps(report, indent=2 if pretty else None, sort_keys=True)
    print(text)


def _summary(message: str):
    print(message, file=_sys.stderr)


def _parse_window(spec: str) -> tuple[float, float, float, float]:
    parts = spec.split(":")
    _require(len(parts) == 4, "--window must be re0:re1:im0:im1")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError as e:
        raise ConfigError(f"bad --window: {e}") from e


def _parse_times(spec: str) -> list[float]:
    parts = spec.split(":")
    _require(len(parts) == 3, "--times must be t0:t1:steps")
    try:
        t0, t1, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise ConfigError(f"bad --times: {e}") from e
    _require(steps >= 1 and t1 >= t0 >= 0, "need t1 >= t0 >= 0 and steps >= 1")
    return list(np.linspace(t0, t1, steps))


def cmd_analyze(args) -> int:
    system, _, extras = load_config(args.config)
    validation = validate_system(system)
    if not validation.ok:
        raise ConfigError("; ".join(validation.messages) or "system validation failed")
    report = robust_fts_report(system.boundary, minor_tol=extras["minor_tol"])
    out = report.as_dict()
    out["validation"] = validation.as_dict()
    _emit(out, args.pretty)
    if report.robust_fts:
        _summary(f"robust FTS: coupling graph acyclic, k0 = {report.k0}")
        return 0
    witness = report.witness or {}
    _summary(f"not robust FTS: cycle {witness.get('cycle')}")
    return 1


def cmd_spectrum(args) -> int:
    system, _, _ = load_config(args.config)
    if not is_autonomous(system):
        raise ConfigError("spectrum analysis needs an autonomous system")
    window = _parse_window(args.window) if args.window else None
    report = spectrum_report(system, window)
    _emit(report.as_dict(), args.pretty)
    if report.empty:
        _summary("spectrum empty: finite-time stabilizable")
        return 0
    _summary(f"spectrum nonempty: {len(report.roots)} root(s) located in the window")
    return 1


def cmd_time(args) -> int:
    system, _, _ = load_config(args.config)
    report = time_report(system)
    _emit(report.as_dict(), args.pretty)
    exact = "exact" if report.t_star_exact else "upper bound only"
    tstar = "n/a" if report.t_star is None else f"{report.t_star:.6g} ({exact})"
    _summary(f"k0 = {report.k0}, bound k0/a0 = {report.upper_bound:.6g}, T* = {tstar}")
    return 0


def cmd_simulate(args) -> int:
    system, phi, extras = load_config(args.config)
    times = _parse_times(args.times) if args.times else list(np.linspace(0.0, system.horizon, 33))
    dt = extras["dt"]
    curve = simulator.decay_curve(
        system,
        phi,
        times,
        spatial_points=extras["spatial_points"],
        mode=args.mode,
        dt=float(dt) if dt else None,
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "decay.csv").write_text(curve.to_csv())
    (outdir / "decay.json").write_text(json.dumps(curve.as_dict(), sort_keys=True) + "\n")
    for t in args.snapshot or []:
        xs = simulator.offset_grid(extras["spatial_points"])
        snap = simulator.solution_snapshot(system, phi, xs, float(t))
        header = "x," + ",".join(f"u{j + 1}" for j in range(system.n))
        lines = [header]
        for i, x in enumerate(xs):
            lines.append(",".join([repr(float(x))] + [repr(float(v)) for v in snap[:, i]]))
        (outdir / f"snapshot_t{t}.csv").write_text("\n".join(lines) + "\n")

    vanished = [t for t, l2, _ in curve.rows if l2 <= args.tol]
    if vanished:
        _summary(f"norm at or below {args.tol:g} from t = {vanished[0]:.6g}")
    final_l2 = curve.rows[-1][1] if curve.rows else 0.0
    _summary(f"wrote {len(curve.rows)} samples to {outdir}/decay.csv (final L2 = {final_l2:.3e})")
    return 0 if final_l2 <= args.tol else 1


def cmd_verify(args) -> int:
    system, _, extras = load_config(args.config)
    try:
        treport = time_report(system)
        exact_claim = bool(treport.t_star_exact)
    except (StabTimeError, NotNilpotentError):
        exact_claim = False
    probes = simulator.default_probe_family(system)
    dt = extras["dt"]
    report = simulator.verify_vanishing(
        system,
        probes,
        args.T,
        tol=args.tol,
        dt=float(dt) if dt else None,
        exactness_claimed=exact_claim,
        spatial_points=extras["spatial_points"],
    )
    _emit(report.as_dict(), args.pretty)
    if report.status == "pass":
        note = ""
        if exact_claim and not report.exactness_confirmed:
            note = " (exactness unconfirmed: no probe survived just before T)"
        _summary(f"pass: all probes vanish by T = {args.T:g}{note}")
        return 0
    if report.status == "fail":
        _summary(f"fail: a probe is still alive just after T = {args.T:g}")
        return 1
    _summary("inconclusive: sup norm straddles the tolerance")
    return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftstab",
        description="Finite-time stabilizability analysis of 1-D hyperbolic systems",
    )
    parser.add_argument("--json", action="store_true", help="compact JSON output (default)")
    parser.add_argument("--pretty", action="store_true", help="indent JSON output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="graph/algebraic robust-FTS criteria")
    p.add_argument("config")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("spectrum", help="characteristic function and eigenvalues")
    p.add_argument("config")
    p.add_argument("--window", help="root search window re0:re1:im0:im1")
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("time", help="stabilization-time bounds")
    p.add_argument("config")
    p.set_defaults(fn=cmd_time)

    p = sub.add_parser("simulate", help="decay curve by characteristics")
    p.add_argument("config")
    p.add_argument("--mode", choices=("recursive", "march"), default="recursive")
    p.add_argument("--times", help="time grid t0:t1:steps")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--tol", type=float, default=1e-10, help="vanishing threshold")
    p.add_argument("--snapshot", type=float, action="append", help="export u(x, t) at this time")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify", help="verify a vanishing-time candidate")
    p.add_argument("config")
    p.add_argument("--T", type=float, required=True, help="candidate vanishing time")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(fn=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ModelError, ExprError, SpectralError, StabTimeError, simulator.SimulatorError) as e:
        _summary(f"error: {e}")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
