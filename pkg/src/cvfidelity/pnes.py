"""Photon-number entangled states ``sum_n psi_n |n, n>``.

Two families are generated from ``y = tanh(r)``: the twin beam (TWB) with
geometric coefficients and the photon-subtracted squeezed vacuum (PSSV)
obtained by removing one photon from each mode of a TWB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, NumericalConsistencyError

NORM_TOL = 1e-10
#: Tail mass left beyond the cutoff. Overlaps are linear in the amplitudes, so
#: the amplitude tail (about the square root of this) is what limits accuracy.
TAIL_TOL = 1e-26


class Variant(str, Enum):
    TWB = "TWB"
    PSSV = "PSSV"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class PnesState:
    coeffs: np.ndarray
    variant: Variant = Variant.CUSTOM
    y: float | None = None

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise DomainError("coefficients must be a nonempty finite sequence")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def n_max(self) -> int:
        return self.coeffs.size - 1

    @property
    def norm2(self) -> float:
        return float(self.coeffs @ self.coeffs)

    @property
    def energy(self) -> float:
        """Mean photon number per mode, ``sum_n n psi_n^2``."""
        n = np.arange(self.coeffs.size)
        return float(n @ (self.coeffs * self.coeffs))

    def to_dict(self) -> dict:
        if self.variant is Variant.CUSTOM:
            return {"variant": "custom", "coeffs": self.coeffs.tolist()}
        return {"variant": self.variant.value, "y": self.y}


def _check_y(y: float) -> None:
    if not 0 <= y < 1:
        raise DomainError(f"y must lie in [0, 1), got {y}")


def cutoff_for(y: float, tail_tol: float = TAIL_TOL) -> int:
    """Smallest ``n_max`` such that the tail ``sum_{n > n_max} (1+n)^2 y^(2n)`` is below ``tail_tol``.

    The PSSV weights dominate the TWB ones, so this cutoff serves both families.
    """
    _check_y(y)
    if y == 0:
        return 0
    q = y * y
    c2 = (1 - q) ** 3 / (1 + q)
    # closed form of the normalized tail: c2 * sum_{n>m} (1+n)^2 q^n
    def tail(m: int) -> float:
        k = m + 1
        # sum_{n>=k} (n+1)^2 q^n = q^k [ (k+1)^2 - (2k^2+2k-1) q + k^2 q^2 ] / (1-q)^3
        return c2 * q**k * ((k + 1) ** 2 - (2 * k * k + 2 * k - 1) * q + k * k * q * q) / (1 - q) ** 3

    m = 0
    while tail(m) >= tail_tol:
        m = max(2 * m, 1)
    lo, hi = m // 2, m
    while lo < hi:
        mid = (lo + hi) // 2
        if tail(mid) < tail_tol:
            hi = mid
        else:
            lo = mid + 1
    return lo


def twb_coeffs(y: float, n_max: int | None = None) -> PnesState:
    _check_y(y)
    if n_max is None:
        n_max = cutoff_for(y)
    n = np.arange(n_max + 1)
    return PnesState(math.sqrt(1 - y * y) * y**n, Variant.TWB, y)


def pssv_coeffs(y: float, n_max: int | None = None) -> PnesState:
    _check_y(y)
    if n_max is None:
        n_max = cutoff_for(y)
    q = y * y
    n = np.arange(n_max + 1)
    return PnesState(math.sqrt((1 - q) ** 3 / (1 + q)) * (1 + n) * y**n, Variant.PSSV, y)


def twb_energy(y: float) -> float:
    _check_y(y)
    return y * y / (1 - y * y)


def pssv_energy(y: float) -> float:
    _check_y(y)
    q = y * y
    return 2 * q * (q + 2) / (1 - q * q)


def y_from_energy(N: float, variant: Variant | str) -> float:
    """Invert the per-mode energy of a TWB or PSSV; both inverses are closed form in ``y^2``."""
    if not (N >= 0 and math.isfinite(N)):
        raise DomainError(f"N must be finite and >= 0, got {N}")
    variant = Variant(variant)
    if N == 0:
        return 0.0
    if variant is Variant.TWB:
        return math.sqrt(N / (1 + N))
    if variant is Variant.PSSV:
        # N_S = N is the quadratic (2 + N) q^2 + 4 q - N = 0 in q = y^2, positive root in stable form
        return math.sqrt(2 * N / (4 + math.sqrt(16 + 4 * N * (2 + N))))
    raise DomainError("energy inversion needs a TWB or PSSV variant")


def state_from_energy(N: float, variant: Variant | str, n_max: int | None = None) -> PnesState:
    variant = Variant(variant)
    y = y_from_energy(N, variant)
    return twb_coeffs(y, n_max) if variant is Variant.TWB else pssv_coeffs(y, n_max)


def _check_normalized(p: PnesState, tol: float = NORM_TOL) -> None:
    if abs(p.norm2 - 1) > tol:
        raise DomainError(f"state is not normalized: sum psi_n^2 = {p.norm2!r}")


def overlap(a: PnesState, b: PnesState) -> float:
    m = min(a.coeffs.size, b.coeffs.size)
    return float(a.coeffs[:m] @ b.coeffs[:m])


def fidelity_pnes(a: PnesState, b: PnesState) -> float:
    """Squared overlap ``(sum_n a_n b_n)^2`` of two normalized PNES."""
    _check_normalized(a)
    _check_normalized(b)
    return min(overlap(a, b) ** 2, 1.0)


def fidelity_twb_pssv(y_T: float, y_S: float) -> float:
    """Closed form of the TWB/PSSV fidelity from the geometric series ``sum (1+n) t^n = 1/(1-t)^2``."""
    _check_y(y_T)
    _check_y(y_S)
    qS = y_S * y_S
    amp = math.sqrt(1 - y_T * y_T) * math.sqrt((1 - qS) ** 3 / (1 + qS)) / (1 - y_T * y_S) ** 2
    return amp * amp


def fidelity_equal_energy(N: float) -> float:
    """TWB/PSSV fidelity when both states carry ``N`` photons per mode."""
    return fidelity_twb_pssv(y_from_energy(N, Variant.TWB), y_from_energy(N, Variant.PSSV))


def _entropy_term(d: float) -> float:
    """``(d + 1/2) log(d + 1/2) - (d - 1/2) log(d - 1/2)`` with ``0 log 0 = 0``."""
    lo = d - 0.5
    return (d + 0.5) * math.log(d + 0.5) - (lo * math.log(lo) if lo > 0 else 0.0)


def _delta_from_gap(gap: float, total: float, tol: float = 1e-12) -> float:
    """Non-Gaussianity from ``d_minus^2 = gap * total`` with ``gap = N + 1/2 - C`` and ``total = N + 1/2 + C``."""
    arg = gap * total
    if arg < -tol:
        raise NumericalConsistencyError(f"negative argument {arg!r} under the square root")
    # physical states have d_minus >= 1/2; round-off below is folded onto the pure boundary
    return 2 * _entropy_term(max(math.sqrt(max(arg, 0.0)), 0.5))


def _correlation(c: np.ndarray) -> float:
    return float(np.arange(1, c.size) @ (c[:-1] * c[1:]))


def _gap_total(p: PnesState) -> tuple[float, float]:
    """``N + 1/2 -/+ C`` with ``C = sum_n (1+n) psi_n psi_{n+1}``, for the normalized vector ``psi / |psi|``.

    The difference is evaluated as ``1/2 sum_n (1+n) (psi_{n+1} - psi_n)^2``, a
    sum of non-negative terms, since ``(N + 1/2)^2 - C^2`` cancels badly at
    large energy. Moments are taken on the normalized vector because the
    ``1e-15`` norm deficit of a long float series would otherwise show up
    directly in ``d_minus - 1/2``.
    """
    c = np.append(p.coeffs, 0.0)
    norm2 = p.norm2
    gap = 0.5 * float(np.arange(1, c.size) @ np.diff(c) ** 2) / norm2
    return gap, (p.energy + _correlation(p.coeffs)) / norm2 + 0.5


def symplectic_minus(p: PnesState) -> float:
    """``d_minus = sqrt((N + 1/2)^2 - (sum_n (1+n) psi_n psi_{n+1})^2)``."""
    gap, total = _gap_total(p)
    return math.sqrt(max(gap * total, 0.0))


def nongaussianity(p: PnesState, tol: float = 1e-12) -> float:
    """Quantum negentropy of a PNES in nats: twice the entropy term of the reference Gaussian's ``d_minus``."""
    _check_normalized(p)
    return _delta_from_gap(*_gap_total(p), tol)


def pssv_symplectic_minus(y: float) -> float:
    """Closed form ``d_minus^2 = (9q^2 + 2q + 1) / (4 (1+q)^2)`` for a PSSV with ``q = y^2``."""
    _check_y(y)
    q = y * y
    return math.sqrt((9 * q * q + 2 * q + 1) / (4 * (1 + q) ** 2))


def pssv_nongaussianity(N: float) -> float:
    """Non-Gaussianity of the PSSV with ``N`` photons per mode, without truncating the series."""
    return 2 * _entropy_term(max(pssv_symplectic_minus(y_from_energy(N, Variant.PSSV)), 0.5))


@dataclass(frozen=True)
class LadderLimit:
    """Limit of a sequence evaluated on a geometric ladder, with its convergence record."""

    value: float
    energies: tuple[float, ...] = field(repr=False)
    values: tuple[float, ...] = field(repr=False)
    last_step: float = 0.0


@lru_cache(maxsize=None)
def asymptotic_nongaussianity(
    start: float = 1.0, ratio: float = 2.0, tol: float = 1e-8, max_rungs: int = 200
) -> LadderLimit:
    """Large-energy limit of the PSSV non-Gaussianity.

    Energies ``start * ratio**k`` are visited until two consecutive values
    differ by less than ``tol``.
    """
    energies, values = [start], [pssv_nongaussianity(start)]
    for _ in range(max_rungs):
        energies.append(energies[-1] * ratio)
        values.append(pssv_nongaussianity(energies[-1]))
        step = abs(values[-1] - values[-2])
        if step < tol:
            return LadderLimit(values[-1], tuple(energies), tuple(values), step)
    raise NumericalConsistencyError("energy ladder did not converge")


def renormalized_nongaussianity(p: PnesState) -> float:
    """Non-Gaussianity divided by its large-energy PSSV limit, in [0, 1]."""
    if p.variant is not Variant.PSSV:
        raise DomainError("renormalization is defined for PSSV states only")
    limit = asymptotic_nongaussianity().value
    return min(max(nongaussianity(p) / limit, 0.0), 1.0)


def renormalized_nongaussianity_at(N: float) -> float:
    """Renormalized PSSV non-Gaussianity at per-mode energy ``N`` (closed form path)."""
    return min(pssv_nongaussianity(N) / asymptotic_nongaussianity().value, 1.0)


def pnes_from_dict(d: Mapping[str, Any]) -> PnesState:
    variant = Variant(d.get("variant", "custom"))
    if variant is Variant.CUSTOM:
        if "coeffs" not in d:
            raise DomainError("custom PNES needs 'coeffs'")
        return PnesState(d["coeffs"])
    n_max = d.get("n_max")
    if "y" in d:
        y = float(d["y"])
        return twb_coeffs(y, n_max) if variant is Variant.TWB else pssv_coeffs(y, n_max)
    if "N" in d:
        return state_from_energy(float(d["N"]), variant, n_max)
    raise DomainError("TWB/PSSV state needs 'y' or 'N'")

