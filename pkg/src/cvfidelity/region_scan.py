"""Grid scans of fidelity against physical properties, and counterexample search.

A scan walks a rectangular grid over the parameters of one state family,
compares each grid state with a target state (or the best member of a target
family) and records the fidelity together with a property of the grid state.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import gaussian_single as g1
from . import gaussian_two as g2
from . import pnes
from .errors import ConfigError, UndefinedQuantityError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

WORKERS_ENV = "CVFIDELITY_WORKERS"
#: delta_R at or above this level counts as strongly non-Gaussian in counterexample search.
NONGAUSSIAN_LEVEL = 0.5
BISECTION_STEPS = 40
PRESETS = ("fig1", "fig2a", "fig2b", "fig3", "fig4a", "fig4b")


@dataclass(frozen=True)
class Family:
    name: str
    state_params: tuple[str, ...]
    target_params: tuple[str, ...]
    properties: tuple[str, ...]
    # target parameter -> state parameter it mirrors under "same"
    same_as: Mapping[str, str]


FAMILIES = {
    "DSTS1": Family("DSTS1", ("N", "beta", "x"), ("N", "beta", "x"), ("sub_poissonian", "classical"), {}),
    "STS1": Family("STS1", ("N", "beta"), ("N", "beta"), ("sub_poissonian", "classical"), {}),
    "STS2": Family("STS2", ("N", "beta", "gamma"), ("N", "beta", "gamma"), ("separable",), {}),
    "PNES": Family("PNES", ("N_S",), ("N_T",), ("nongaussianity",), {"N_T": "N_S"}),
}


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    steps: int
    scale: str = "linear"

    def __post_init__(self) -> None:
        if self.steps < 2:
            raise ConfigError(f"axis {self.name!r} needs at least 2 steps")
        if not self.min <= self.max:
            raise ConfigError(f"axis {self.name!r} has min > max")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"axis {self.name!r}: unknown scale {self.scale!r}")
        if self.scale == "log" and self.min <= 0:
            raise ConfigError(f"log axis {self.name!r} needs min > 0")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.steps)
        return np.linspace(self.min, self.max, self.steps)


@dataclass(frozen=True)
class ScanSpec:
    """Scan configuration.

    ``target`` binds every target parameter to a number, to ``"same"`` (copy
    the grid state's value) or to ``"free"`` (maximize fidelity over that
    axis' grid values). ``fixed`` pins state parameters that are not axes.
    """

    family: str
    axes: tuple[Axis, ...]
    target: Mapping[str, float | str]
    fidelity_threshold: float
    property: str
    fixed: Mapping[str, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "axes", tuple(self.axes))
        fam = FAMILIES.get(self.family)
        if fam is None:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {sorted(FAMILIES)}")
        if self.property not in fam.properties:
            raise ConfigError(f"property {self.property!r} is not available for family {self.family}")
        if not self.axes:
            raise ConfigError("a scan needs at least one axis")
        if not 0 < self.fidelity_threshold <= 1:
            raise ConfigError("fidelity threshold must lie in (0, 1]")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate axis names")
        known = set(fam.state_params) | set(fam.target_params)
        for n in names:
            if n not in known:
                raise ConfigError(f"axis {n!r} is not a parameter of {self.family}")
        for p in fam.state_params:
            if p not in names and p not in self.fixed:
                raise ConfigError(f"state parameter {p!r} is neither an axis nor fixed")
        for p in fam.target_params:
            b = self.target.get(p)
            if b is None:
                if p not in names or p in fam.state_params:
                    raise ConfigError(f"target parameter {p!r} is unbound")
            elif b == "same":
                src = fam.same_as.get(p, p)
                if src not in names and src not in self.fixed:
                    raise ConfigError(f"target {p!r}='same' needs {src!r} as an axis or fixed value")
            elif b == "free":
                if p not in names:
                    raise ConfigError(f"target {p!r}='free' needs {p!r} as an axis")
            elif not isinstance(b, (int, float)):
                raise ConfigError(f"target binding {p!r}={b!r} must be a number, 'same' or 'free'")

    @property
    def axis_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScanSpec":
        try:
            axes = tuple(Axis(**a) for a in d["axes"])
            return cls(
                family=d["family"],
                axes=axes,
                target=dict(d.get("target", {})),
                fidelity_threshold=float(d["fidelity_threshold"]),
                property=d["property"],
                fixed={k: float(v) for k, v in d.get("fixed", {}).items()},
                name=d.get("name", ""),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed scan spec: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "family": self.family,
            "property": self.property,
            "fidelity_threshold": self.fidelity_threshold,
            "axes": [vars(a).copy() for a in self.axes],
            "target": dict(self.target),
            "fixed": dict(self.fixed),
        }


@dataclass(frozen=True)
class ScanCell:
    coordinates: tuple[float, ...]
    fidelity_to_target: float
    property_flag: bool | float
    in_high_fidelity_region: bool


# -- family models ---------------------------------------------------------


def _make_state(family: str, params: Mapping[str, float]):
    if family == "DSTS1":
        return g1.dsts1_from_energy(g1.EnergyParams1(params["N"], params["beta"], params["x"]))
    if family == "STS1":
        return g1.dsts1_from_energy(g1.EnergyParams1(params["N"], params["beta"], 0.0))
    if family == "STS2":
        return g2.sts2_from_energy(g2.EnergyParams2(params["N"], params["beta"], params["gamma"]))
    return float(params.get("N_S", params.get("N_T")))


def _fidelity(family: str, state: Any, target: Any) -> float:
    if family in ("DSTS1", "STS1"):
        return g1.fidelity1(state, target)
    if family == "STS2":
        return g2.fidelity2(state, target)
    return pnes.fidelity_twb_pssv(pnes.y_from_energy(target, "TWB"), pnes.y_from_energy(state, "PSSV"))


def property_of(family: str, prop: str, state: Any) -> bool | float:
    if prop == "sub_poissonian":
        try:
            return g1.is_sub_poissonian(state)
        except UndefinedQuantityError:
            # vacuum: the coherent-state limit R = 1 is not sub-Poissonian
            return False
    if prop == "classical":
        return g1.is_classical(state)
    if prop == "separable":
        return g2.is_separable(state)
    return pnes.renormalized_nongaussianity_at(state)


def _target_property(family: str, prop: str, target: Any) -> bool | float:
    if family == "PNES":
        return 0.0  # the twin beam is Gaussian
    return property_of(family, prop, target)


def as_flag(prop: str, value: bool | float, level: float = NONGAUSSIAN_LEVEL) -> bool:
    if prop == "nongaussianity":
        return float(value) >= level
    return bool(value)


class _Evaluator:
    """Evaluates cells of one spec; caches target states, which repeat across the grid."""

    def __init__(self, spec: ScanSpec) -> None:
        self.spec = spec
        self.fam = FAMILIES[spec.family]
        self.axis_values = {a.name: a.values() for a in spec.axes}
        self._targets: dict[tuple, Any] = {}

    def state_params(self, coords: Mapping[str, float]) -> dict[str, float]:
        return {p: float(coords[p]) if p in coords else float(self.spec.fixed[p]) for p in self.fam.state_params}

    def target_candidates(self, coords: Mapping[str, float]) -> list[dict[str, float]]:
        fixed: dict[str, float] = {}
        free: list[str] = []
        for p in self.fam.target_params:
            b = self.spec.target.get(p)
            if b is None:
                fixed[p] = float(coords[p])
            elif b == "same":
                src = self.fam.same_as.get(p, p)
                fixed[p] = float(coords[src]) if src in coords else float(self.spec.fixed[src])
            elif b == "free":
                free.append(p)
            else:
                fixed[p] = float(b)
        if not free:
            return [fixed]
        out = []
        for combo in itertools.product(*(self.axis_values[p] for p in free)):
            out.append({**fixed, **dict(zip(free, map(float, combo)))})
        return out

    def target_state(self, params: Mapping[str, float]) -> Any:
        key = tuple(sorted(params.items()))
        st = self._targets.get(key)
        if st is None:
            st = self._targets[key] = _make_state(self.spec.family, params)
        return st

    def evaluate(self, coords: Mapping[str, float]) -> tuple[float, bool | float, dict[str, float], Any]:
        """Return ``(fidelity, property, best target params, state)`` at ``coords``."""
        state = _make_state(self.spec.family, self.state_params(coords))
        best_F, best_t = -1.0, None
        for t in self.target_candidates(coords):
            F = _fidelity(self.spec.family, state, self.target_state(t))
            if F > best_F:
                best_F, best_t = F, t
        return best_F, property_of(self.spec.family, self.spec.property, state), best_t, state

    def cell(self, coords_tuple: tuple[float, ...]) -> ScanCell:
        coords = dict(zip(self.spec.axis_names, coords_tuple))
        F, prop, _, _ = self.evaluate(coords)
        return ScanCell(coords_tuple, F, prop, F >= self.spec.fidelity_threshold)


def grid_points(spec: ScanSpec) -> list[tuple[float, ...]]:
    """Row-major grid over the axes in the order listed."""
    return [tuple(map(float, p)) for p in itertools.product(*(a.values() for a in spec.axes))]


def _scan_chunk(spec: ScanSpec, points: Sequence[tuple[float, ...]]) -> list[ScanCell]:
    ev = _Evaluator(spec)
    return [ev.cell(p) for p in points]


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def scan(spec: ScanSpec, workers: int | None = None) -> list[ScanCell]:
    """Evaluate every grid cell; output order is row-major regardless of ``workers``."""
    points = grid_points(spec)
    workers = default_workers() if workers is None else max(1, workers)
    if workers == 1 or len(points) < 2 * workers:
        return _scan_chunk(spec, points)
    size = math.ceil(len(points) / workers)
    chunks = [points[i : i + size] for i in range(0, len(points), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_scan_chunk, [spec] * len(chunks), chunks)
        return [c for part in parts for c in part]


# -- counterexamples -------------------------------------------------------


@dataclass(frozen=True)
class Counterexample:
    found: bool
    state_a: dict[str, float] = field(default_factory=dict)
    state_b: dict[str, float] = field(default_factory=dict)
    fidelity: float = float("nan")
    property_a: bool | float | None = None
    property_b: bool | float | None = None
    refined: bool = False

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "state_a": self.state_a,
            "state_b": self.state_b,
            "fidelity": self.fidelity,
            "property_a": self.property_a,
            "property_b": self.property_b,
            "refined": self.refined,
        }


def _witness(ev: _Evaluator, coords: Mapping[str, float]) -> tuple[float, bool | float, bool | float, dict]:
    F, prop, t, _ = ev.evaluate(coords)
    tprop = _target_property(ev.spec.family, ev.spec.property, ev.target_state(t))
    return F, prop, tprop, t


def _refine(ev: _Evaluator, coords: dict[str, float], steps: int) -> tuple[dict[str, float], bool]:
    """Coordinate bisection from a grid witness toward its neighbours across the property boundary.

    Each axis neighbour whose property matches the target brackets a boundary;
    bisection keeps the witness side, and the bracketed point of largest
    fidelity is returned.
    """
    spec = ev.spec
    prop = spec.property
    F0, p0, _, _ = _witness(ev, coords)
    want = as_flag(prop, p0)
    best, best_F, moved = dict(coords), F0, False
    for axis in spec.axes:
        vals = ev.axis_values[axis.name]
        i = int(np.argmin(np.abs(vals - coords[axis.name])))
        for j in (i - 1, i + 1):
            if not 0 <= j < len(vals):
                continue
            other = {**coords, axis.name: float(vals[j])}
            if as_flag(prop, _witness(ev, other)[1]) == want:
                continue
            inside, outside = coords[axis.name], float(vals[j])
            for _ in range(steps):
                mid = 0.5 * (inside + outside)
                if as_flag(prop, _witness(ev, {**coords, axis.name: mid})[1]) == want:
                    inside = mid
                else:
                    outside = mid
            cand = {**coords, axis.name: inside}
            F, p, tp, _ = _witness(ev, cand)
            if as_flag(prop, p) != as_flag(prop, tp) and F >= spec.fidelity_threshold and F > best_F:
                best, best_F, moved = cand, F, True
    return best, moved


def find_counterexample(
    spec: ScanSpec, refine: bool = True, steps: int = BISECTION_STEPS, workers: int | None = None
) -> Counterexample:
    """Highest-fidelity pair (grid state, target) with fidelity >= threshold and opposite property flags."""
    ev = _Evaluator(spec)
    cells = scan(spec, workers)
    best: tuple[float, dict[str, float]] | None = None
    for cell in cells:
        if not cell.in_high_fidelity_region:
            continue
        coords = dict(zip(spec.axis_names, cell.coordinates))
        F, p, tp, _ = _witness(ev, coords)
        if as_flag(spec.property, p) != as_flag(spec.property, tp) and (best is None or F > best[0]):
            best = (F, coords)
    if best is None:
        return Counterexample(found=False)
    coords, moved = (_refine(ev, best[1], steps) if refine else (best[1], False))
    F, p, tp, t = _witness(ev, coords)
    return Counterexample(True, ev.state_params(coords), dict(t), F, p, tp, moved)


def verify_counterexample(spec: ScanSpec, ce: Counterexample) -> bool:
    """Rebuild both states from their parameters and recheck fidelity and property flags."""
    if not ce.found:
        return False
    fam = spec.family
    a = _make_state(fam, ce.state_a)
    b = _make_state(fam, ce.state_b)
    F = _fidelity(fam, a, b)
    pa = property_of(fam, spec.property, a)
    pb = _target_property(fam, spec.property, b)
    return (
        math.isclose(F, ce.fidelity, rel_tol=0, abs_tol=1e-12)
        and F >= spec.fidelity_threshold
        and pa == ce.property_a
        and pb == ce.property_b
        and as_flag(spec.property, pa) != as_flag(spec.property, pb)
    )


# -- PNES grids ------------------------------------------------------------


@dataclass(frozen=True)
class PnesGrid:
    N_T: np.ndarray
    N_S: np.ndarray
    fidelity: np.ndarray  # shape (len(N_T), len(N_S))
    thresholds: tuple[float, ...]
    # equal-energy companion curve
    N_equal: np.ndarray
    fidelity_equal: np.ndarray
    delta_r_equal: np.ndarray

    def membership(self, threshold: float) -> np.ndarray:
        return self.fidelity >= threshold


def pnes_scan(
    N_T: Sequence[float] | np.ndarray,
    N_S: Sequence[float] | np.ndarray,
    thresholds: Iterable[float] = (0.94, 0.92, 0.9),
    N_equal: Sequence[float] | np.ndarray | None = None,
) -> PnesGrid:
    """TWB/PSSV fidelity over an energy grid, plus ``(F_ST, delta_R)`` along equal energies."""
    thresholds = tuple(float(t) for t in thresholds)
    for t in thresholds:
        if not 0 < t < 1:
            raise ConfigError(f"threshold {t} outside (0, 1)")
    nt, ns = np.asarray(N_T, dtype=float), np.asarray(N_S, dtype=float)
    yt = [pnes.y_from_energy(n, "TWB") for n in nt]
    ys = [pnes.y_from_energy(n, "PSSV") for n in ns]
    F = np.array([[pnes.fidelity_twb_pssv(a, b) for b in ys] for a in yt])
    ne = np.geomspace(1e-2, 1e2, 41) if N_equal is None else np.asarray(N_equal, dtype=float)
    fe = np.array([pnes.fidelity_equal_energy(n) for n in ne])
    de = np.array([pnes.renormalized_nongaussianity_at(n) for n in ne])
    return PnesGrid(nt, ns, F, thresholds, ne, fe, de)


# -- output ----------------------------------------------------------------


def fmt(v: float) -> str:
    return f"{v:.12g}"


def _prop_text(v: bool | float) -> str:
    return ("true" if v else "false") if isinstance(v, (bool, np.bool_)) else fmt(float(v))


def cells_to_csv(spec: ScanSpec, cells: Sequence[ScanCell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*spec.axis_names, "fidelity", "property", "in_region"])
    for c in cells:
        w.writerow(
            [*map(fmt, c.coordinates), fmt(c.fidelity_to_target), _prop_text(c.property_flag),
             "true" if c.in_high_fidelity_region else "false"]
        )
    return buf.getvalue()


def cells_to_json(spec: ScanSpec, cells: Sequence[ScanCell]) -> str:
    rows = []
    for c in cells:
        row: dict[str, Any] = {n: float(fmt(v)) for n, v in zip(spec.axis_names, c.coordinates)}
        row["fidelity"] = float(fmt(c.fidelity_to_target))
        p = c.property_flag
        row["property"] = bool(p) if isinstance(p, (bool, np.bool_)) else float(fmt(float(p)))
        row["in_region"] = bool(c.in_high_fidelity_region)
        rows.append(row)
    return json.dumps(rows, indent=1) + "\n"


def pnes_grid_to_csv(g: PnesGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N_T", "N_S", "fidelity", *(f"in_region_{t:g}" for t in g.thresholds)])
    for i, a in enumerate(g.N_T):
        for j, b in enumerate(g.N_S):
            F = g.fidelity[i, j]
            w.writerow([fmt(a), fmt(b), fmt(F), *("true" if F >= t else "false" for t in g.thresholds)])
    return buf.getvalue()


def pnes_curve_to_csv(g: PnesGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "fidelity", "delta_R"])
    for n, f, d in zip(g.N_equal, g.fidelity_equal, g.delta_r_equal):
        w.writerow([fmt(n), fmt(f), fmt(d)])
    return buf.getvalue()


def write_cells(spec: ScanSpec, cells: Sequence[ScanCell], path: str | Path, fmt_name: str = "csv") -> None:
    text = cells_to_json(spec, cells) if fmt_name == "json" else cells_to_csv(spec, cells)
    Path(path).write_text(text)


# -- configs ---------------------------------------------------------------


def load_spec(path: str | Path) -> ScanSpec:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        d = tomllib.loads(raw.decode()) if path.suffix == ".toml" else json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return ScanSpec.from_dict(d)


@lru_cache(maxsize=None)
def preset(name: str) -> ScanSpec:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")
    text = resources.files("cvfidelity").joinpath("presets", f"{name}.toml").read_text()
    d = tomllib.loads(text)
    d.setdefault("name", name)
    return ScanSpec.from_dict(d)


def with_threshold(spec: ScanSpec, threshold: float) -> ScanSpec:
    d = spec.to_dict()
    d["fidelity_threshold"] = threshold
    return ScanSpec.from_dict(d)


