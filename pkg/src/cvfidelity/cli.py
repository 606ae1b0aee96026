"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 invalid input
file, 4 numerical-consistency or cutoff failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import fock_oracle as fo
from . import gaussian_single as g1
from . import gaussian_two as g2
from . import pnes
from . import region_scan as rs
from .errors import (
    ConfigError,
    CutoffError,
    CVFidelityError,
    DomainError,
    NumericalConsistencyError,
    UndefinedQuantityError,
)

EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_INVALID_INPUT = 3
EXIT_NUMERICAL = 4

SANDWICH_TOL = 1e-10


class InputError(CVFidelityError):
    """An input file could not be read or does not describe a valid state/config."""


def fmt(v: float) -> str:
    return f"{v:.12g}"


def fmt_fidelity(F: float) -> str:
    return f"{F:.12f}"


# -- state files -----------------------------------------------------------


def state_kind(d: dict) -> str:
    if "variant" in d or "coeffs" in d:
        return "pnes"
    if "gamma" in d or {"A", "B", "C"} <= d.keys():
        return "two"
    if "cm" in d and np.shape(d["cm"]) == (4, 4):
        return "two"
    return "single"


def parse_state(d: Any, kind: str = "auto"):
    if not isinstance(d, dict):
        raise InputError("state must be a JSON object")
    kind = state_kind(d) if kind == "auto" else kind
    try:
        if kind == "single":
            return g1.state1_from_dict(d)
        if kind == "two":
            return g2.state2_from_dict(d)
        if kind == "pnes":
            return pnes.pnes_from_dict(d)
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid {kind} state: {exc}") from exc
    raise InputError(f"unknown state kind {kind!r}")


def load_state(path: str, kind: str = "auto"):
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read state file {path}: {exc}") from exc
    return parse_state(d, kind)


def state_to_dict(s) -> dict:
    return s.to_dict()


def pair_fidelity(a, b) -> float:
    if isinstance(a, g1.GaussianState1) and isinstance(b, g1.GaussianState1):
        return g1.fidelity1(a, b)
    if isinstance(a, g2.GaussianState2) and isinstance(b, g2.GaussianState2):
        return g2.fidelity2(a, b)
    if isinstance(a, pnes.PnesState) and isinstance(b, pnes.PnesState):
        return pnes.fidelity_pnes(a, b)
    raise InputError("states must be of the same kind")


def state_report(s) -> dict:
    if isinstance(s, g1.GaussianState1):
        out: dict[str, Any] = {"mean_photon": g1.mean_photon(s), "classical": g1.is_classical(s)}
        try:
            out["fano_factor"] = g1.fano_factor(s)
            out["sub_poissonian"] = out["fano_factor"] < 1
        except UndefinedQuantityError:
            pass
        return out
    if isinstance(s, g2.GaussianState2):
        dp, dm = g2.ppt_symplectic_eigenvalues(s)
        return {"ppt_d_plus": dp, "ppt_d_minus": dm, "separable": g2.is_separable(s)}
    out = {"energy": s.energy, "nongaussianity": pnes.nongaussianity(s)}
    if s.variant is pnes.Variant.PSSV:
        out["nongaussianity_renormalized"] = pnes.renormalized_nongaussianity(s)
    return out


def _json_ready(v: Any) -> Any:
    if isinstance(v, dict):
        return {k: _json_ready(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_ready(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        return float(fmt(float(v))) if math.isfinite(v) else None
    return v


def dump_json(v: Any) -> str:
    return json.dumps(_json_ready(v), indent=2, sort_keys=True)


# -- subcommands -----------------------------------------------------------


def cmd_fidelity(args: argparse.Namespace) -> int:
    a = load_state(args.a, args.kind)
    b = load_state(args.b, args.kind)
    F = pair_fidelity(a, b)
    print(fmt_fidelity(F))
    if args.details:
        lo, hi = g1.trace_distance_bounds(F)
        print(
            dump_json(
                {
                    "fidelity": F,
                    "bures_distance": g1.bures_distance(F),
                    "trace_distance_bounds": [lo, hi],
                    "a": state_report(a),
                    "b": state_report(b),
                }
            )
        )
    return 0


def cmd_state(args: argparse.Namespace) -> int:
    s = load_state(args.input, args.kind)
    text = json.dumps(state_to_dict(s), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.details:
        print(dump_json(state_report(s)))
    return 0


def _load_scan_spec(args: argparse.Namespace) -> rs.ScanSpec:
    if bool(args.preset) == bool(args.config):
        raise ConfigError("give exactly one of --preset or --config")
    try:
        spec = rs.preset(args.preset) if args.preset else rs.load_spec(args.config)
    except ConfigError as exc:
        if args.config:
            raise InputError(str(exc)) from exc
        raise
    if args.threshold is not None:
        spec = rs.with_threshold(spec, args.threshold)
    return spec


def cmd_scan(args: argparse.Namespace) -> int:
    spec = _load_scan_spec(args)
    cells = rs.scan(spec, args.workers)
    if args.out:
        rs.write_cells(spec, cells, args.out, args.format)
    else:
        sys.stdout.write(rs.cells_to_json(spec, cells) if args.format == "json" else rs.cells_to_csv(spec, cells))
    flags = [rs.as_flag(spec.property, c.property_flag) for c in cells]
    inside = [c.in_high_fidelity_region for c in cells]
    summary = {
        "cells": len(cells),
        "in_region": sum(inside),
        "in_region_with_property": sum(f and i for f, i in zip(flags, inside)),
        "in_region_without_property": sum((not f) and i for f, i in zip(flags, inside)),
    }
    print(dump_json(summary), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_counterexample(args: argparse.Namespace) -> int:
    spec = _load_scan_spec(args)
    ce = rs.find_counterexample(spec, refine=not args.no_refine, workers=args.workers)
    record = ce.to_dict()
    record["verified"] = rs.verify_counterexample(spec, ce) if ce.found else False
    text = dump_json(record)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def cmd_pnes(args: argparse.Namespace) -> int:
    nt = np.linspace(args.nt_min, args.nt_max, args.nt_steps)
    ns = np.linspace(args.ns_min, args.ns_max, args.ns_steps)
    ne = np.geomspace(args.equal_min, args.equal_max, args.equal_steps)
    grid = rs.pnes_scan(nt, ns, args.thresholds, ne)
    if args.out:
        Path(args.out).write_text(rs.pnes_grid_to_csv(grid))
    if args.curve_out:
        Path(args.curve_out).write_text(rs.pnes_curve_to_csv(grid))
    limit = pnes.asymptotic_nongaussianity()
    summary = {
        "grid_cells": int(grid.fidelity.size),
        "in_region": {f"{t:g}": int(grid.membership(t).sum()) for t in grid.thresholds},
        "equal_energy_min_fidelity": float(grid.fidelity_equal.min()),
        "bound_27_32": 27 / 32,
        "nongaussianity_limit": limit.value,
        "nongaussianity_limit_last_step": limit.last_step,
    }
    print(dump_json(summary))
    return 0


def _random_dsts1(rng: np.random.Generator, max_energy: float) -> g1.EnergyParams1:
    while True:
        N = rng.uniform(0, max_energy)
        x = rng.uniform(-math.sqrt(max_energy), math.sqrt(max_energy))
        if x * x + N <= max_energy:
            return g1.EnergyParams1(N, rng.uniform(), x)


def sandwich_holds(F: float, T: float, tol: float = SANDWICH_TOL) -> bool:
    """``1 - sqrt(F) <= T <= sqrt(1 - F)`` up to ``tol``."""
    lo, hi = g1.trace_distance_bounds(min(max(F, 0.0), 1.0))
    return lo - tol <= T <= hi + tol


def _summarize(family: str, pairs: list[tuple[float, float, float]], extra_err: float = 0.0) -> dict:
    """Report over ``(closed form, oracle, trace distance)`` triples.

    The sandwich is checked with the oracle fidelity, i.e. on the same density
    matrices that produced the trace distance.
    """
    return {
        "family": family,
        "trials": len(pairs),
        "max_abs_error": max([abs(F - F_o) for F, F_o, _ in pairs] + [extra_err]),
        "sandwich_violations": sum(not sandwich_holds(F_o, T) for _, F_o, T in pairs),
        "pairs": pairs,
    }


def oracle_check_dsts1(trials: int, seed: int, max_energy: float = 3.0, dump_dir: str | None = None) -> dict:
    """Compare the closed-form single-mode fidelity with the Fock oracle on random pairs."""
    rng = np.random.default_rng(seed)
    pairs = []
    for k in range(trials):
        states = [g1.dsts1_from_energy(_random_dsts1(rng, max_energy)) for _ in range(2)]
        params = [g1.physical_params(s) for s in states]
        n_max = max(fo.gaussian1_to_fock_auto(*p).n_max for p in params)
        rhos = [fo.gaussian1_to_fock(*p, n_max) for p in params]
        pairs.append((g1.fidelity1(*states), fo.uhlmann(*rhos), fo.trace_distance(*rhos)))
        if dump_dir:
            for i, r in enumerate(rhos):
                r.dump(Path(dump_dir) / f"dsts1_{k:04d}_{i}.npy")
    return _summarize("dsts1", pairs)


def oracle_check_sts2(
    trials: int, seed: int, max_energy: float = 1.5, n_max: int = fo.TWO_MODE_CUTOFF_CAP, dump_dir: str | None = None
) -> dict:
    rng = np.random.default_rng(seed)
    pairs = []
    for k in range(trials):
        ps = [g2.EnergyParams2(rng.uniform(0, max_energy), rng.uniform(), rng.uniform()) for _ in range(2)]
        states = [g2.sts2_from_energy(p) for p in ps]
        rhos = []
        for p in ps:
            n_s, t1, t2 = g2.physical_from_energy(p)
            rhos.append(fo.gaussian2_to_fock(math.asinh(math.sqrt(n_s)), t1, t2, n_max))
        pairs.append((g2.fidelity2(*states), fo.uhlmann(*rhos), fo.trace_distance(*rhos)))
        if dump_dir:
            for i, r in enumerate(rhos):
                r.dump(Path(dump_dir) / f"sts2_{k:04d}_{i}.npy")
    return _summarize("sts2", pairs)


#: Tail mass for oracle PNES states; an amplitude tail near 1e-10 keeps the doubled basis small.
ORACLE_PNES_TAIL = 1e-20


def oracle_check_pnes(trials: int, seed: int, max_y: float = 0.3) -> dict:
    rng = np.random.default_rng(seed)
    pairs, closed_err = [], 0.0
    for _ in range(trials):
        yt, ys = rng.uniform(0, max_y, 2)
        n = max(pnes.cutoff_for(yt, ORACLE_PNES_TAIL), pnes.cutoff_for(ys, ORACLE_PNES_TAIL))
        a, b = pnes.twb_coeffs(yt, n), pnes.pssv_coeffs(ys, n)
        F = pnes.fidelity_pnes(a, b)
        ra, rb = fo.pnes_to_fock(a), fo.pnes_to_fock(b)
        pairs.append((F, fo.uhlmann(ra, rb), fo.trace_distance(ra, rb)))
        closed_err = max(closed_err, abs(F - pnes.fidelity_twb_pssv(yt, ys)))
    return _summarize("pnes", pairs, closed_err)


DEFAULT_ORACLE_TOL = {"dsts1": 1e-6, "sts2": 1e-4, "pnes": 1e-8}


def cmd_oracle_check(args: argparse.Namespace) -> int:
    if args.dump_dir:
        Path(args.dump_dir).mkdir(parents=True, exist_ok=True)
    if args.family == "dsts1":
        report = oracle_check_dsts1(args.trials, args.seed, args.max_energy or 3.0, args.dump_dir)
    elif args.family == "sts2":
        report = oracle_check_sts2(args.trials, args.seed, args.max_energy or 1.5, args.cutoff, args.dump_dir)
    else:
        report = oracle_check_pnes(args.trials, args.seed)
    tol = args.tol if args.tol is not None else DEFAULT_ORACLE_TOL[args.family]
    report.pop("pairs")
    report["seed"] = args.seed
    report["tolerance"] = tol
    report["passed"] = report["max_abs_error"] <= tol and report["sandwich_violations"] == 0
    print(dump_json(report))
    return 0 if report["passed"] else EXIT_CHECK_FAILED


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvfidelity", description="Fidelity versus physical properties of CV states.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    f = sub.add_parser("fidelity", help="fidelity between two state files")
    f.add_argument("--a", required=True, help="first state (JSON)")
    f.add_argument("--b", required=True, help="second state (JSON)")
    f.add_argument("--kind", choices=["auto", "single", "two", "pnes"], default="auto")
    f.add_argument("--details", action="store_true", help="also print distances and state properties")
    f.set_defaults(func=cmd_fidelity)

    s = sub.add_parser("state", help="normalize a state file to its canonical form")
    s.add_argument("input")
    s.add_argument("--out")
    s.add_argument("--kind", choices=["auto", "single", "two", "pnes"], default="auto")
    s.add_argument("--details", action="store_true")
    s.set_defaults(func=cmd_state)

    for name, func, hlp in (
        ("scan", cmd_scan, "grid scan of fidelity and property"),
        ("counterexample", cmd_counterexample, "find a high-fidelity pair with opposite properties"),
    ):
        c = sub.add_parser(name, help=hlp)
        c.add_argument("--preset", choices=rs.PRESETS)
        c.add_argument("--config", help="scan spec as JSON or TOML")
        c.add_argument("--threshold", type=float, help="override the fidelity threshold")
        c.add_argument("--workers", type=int, help=f"parallel workers (default: ${rs.WORKERS_ENV} or 1)")
        c.add_argument("--out", help="output file (default: stdout)")
        if name == "scan":
            c.add_argument("--format", choices=["csv", "json"], default="csv")
        else:
            c.add_argument("--no-refine", action="store_true", help="report the grid witness without bisection")
        c.set_defaults(func=func)

    q = sub.add_parser("pnes", help="TWB/PSSV fidelity grid and equal-energy curve")
    q.add_argument("--nt-min", type=float, default=0.0)
    q.add_argument("--nt-max", type=float, default=5.0)
    q.add_argument("--nt-steps", type=int, default=51)
    q.add_argument("--ns-min", type=float, default=0.0)
    q.add_argument("--ns-max", type=float, default=5.0)
    q.add_argument("--ns-steps", type=int, default=51)
    q.add_argument("--thresholds", type=_float_list, default=[0.94, 0.92, 0.9])
    q.add_argument("--equal-min", type=float, default=1e-2)
    q.add_argument("--equal-max", type=float, default=1e2)
    q.add_argument("--equal-steps", type=int, default=41)
    q.add_argument("--out", help="grid CSV")
    q.add_argument("--curve-out", help="equal-energy (N, F_ST, delta_R) CSV")
    q.set_defaults(func=cmd_pnes)

    o = sub.add_parser("oracle-check", help="closed forms versus the Fock-space oracle on random pairs")
    o.add_argument("--family", choices=["dsts1", "sts2", "pnes"], required=True)
    o.add_argument("--trials", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--max-energy", type=float, help="largest sampled energy (dsts1: 3, sts2: 1.5)")
    o.add_argument("--cutoff", type=int, default=fo.TWO_MODE_CUTOFF_CAP, help="two-mode per-mode cutoff")
    o.add_argument("--tol", type=float, help="pass tolerance (dsts1: 1e-6, sts2: 1e-4, pnes: 1e-8)")
    o.add_argument("--dump-dir", help="write every oracle density matrix as .npy here")
    o.set_defaults(func=cmd_oracle_check)
    return p


def _fail(kind: str, exc: BaseException, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
    return code


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        return _fail("invalid-input", exc, EXIT_INVALID_INPUT)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_USAGE)
    except (NumericalConsistencyError, CutoffError) as exc:
        return _fail("numerical", exc, EXIT_NUMERICAL)
    except DomainError as exc:
        return _fail("domain", exc, EXIT_INVALID_INPUT)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
