"""Single-mode displaced squeezed thermal states (DSTS1).

Quadrature convention: ``x = (a + a^dag)/sqrt(2)``, so the vacuum covariance
matrix is ``diag(1/2, 1/2)`` and a displacement ``D(x)`` with real amplitude
``x`` gives the mean vector ``(sqrt(2) x, 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, NumericalConsistencyError, UndefinedQuantityError

#: Slack on the uncertainty relation ``det(cm) >= 1/4``.
UNCERTAINTY_TOL = 1e-12
#: Slack on the classicality boundary ``min eig(cm) >= 1/2``.
CLASSICAL_TOL = 1e-12
#: ``det(cm) - 1/4`` below this is treated as an exactly pure state.
PURE_DET_TOL = 1e-12
#: Largest excess of a closed-form fidelity over 1 that is silently clamped.
FIDELITY_CLAMP_TOL = 1e-8

VACUUM_CM = np.eye(2) / 2


def _frozen(a: Any, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise DomainError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GaussianState1:
    """Single-mode Gaussian state given by its quadrature mean and covariance matrix."""

    mean: np.ndarray
    cm: np.ndarray

    def __post_init__(self) -> None:
        mean = _frozen(self.mean, (2,))
        cm = _frozen(self.cm, (2, 2))
        if not np.allclose(cm, cm.T, rtol=0, atol=1e-12):
            raise DomainError("covariance matrix is not symmetric")
        if cm[0, 0] <= 0 or np.linalg.det(cm) <= 0:
            raise DomainError("covariance matrix is not positive definite")
        if np.linalg.det(cm) < 0.25 - UNCERTAINTY_TOL:
            raise DomainError("covariance matrix violates det(cm) >= 1/4")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cm", cm)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GaussianState1):
            return NotImplemented
        return bool(np.array_equal(self.mean, other.mean) and np.array_equal(self.cm, other.cm))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "cm": self.cm.tolist()}


@dataclass(frozen=True)
class EnergyParams1:
    """Kernel energy ``N``, squeezing fraction ``beta`` and displacement ``x``."""

    N: float
    beta: float
    x: float = 0.0

    def __post_init__(self) -> None:
        if not (self.N >= 0 and math.isfinite(self.N)):
            raise DomainError(f"N must be finite and >= 0, got {self.N}")
        if not 0 <= self.beta <= 1:
            raise DomainError(f"beta must lie in [0, 1], got {self.beta}")
        if not math.isfinite(self.x):
            raise DomainError("x must be finite")

    def to_dict(self) -> dict:
        return {"N": self.N, "beta": self.beta, "x": self.x}


def dsts1_from_physical(x: float, r: float, n_T: float) -> GaussianState1:
    """Build ``D(x) S(r) nu_th(n_T) S(r)^dag D(x)^dag``."""
    if n_T < 0:
        raise DomainError(f"thermal photon number must be >= 0, got {n_T}")
    s = n_T + 0.5
    return GaussianState1(
        mean=[math.sqrt(2.0) * x, 0.0],
        cm=np.diag([s * math.exp(2 * r), s * math.exp(-2 * r)]),
    )


def energy_to_physical(p: EnergyParams1) -> tuple[float, float, float]:
    """Return ``(n_T, n_S, r)`` for the squeezed thermal kernel of ``p``.

    The kernel is amplitude squeezed (``r <= 0``): the squeezed quadrature is
    the one carrying the displacement, which is what allows sub-Poissonian
    statistics. For ``x = 0`` the sign of ``r`` is a phase-space rotation and
    changes no fidelity or classicality result.
    """
    n_S = p.beta * p.N
    n_T = (1 - p.beta) * p.N / (1 + 2 * p.beta * p.N)
    return n_T, n_S, -math.asinh(math.sqrt(n_S))


def physical_to_energy(n_T: float, n_S: float, x: float = 0.0) -> EnergyParams1:
    """Inverse of :func:`energy_to_physical`; ``beta`` is taken as 0 when ``N == 0``."""
    if n_T < 0 or n_S < 0:
        raise DomainError("photon numbers must be >= 0")
    N = n_T + n_S + 2 * n_T * n_S
    beta = n_S / N if N > 0 else 0.0
    return EnergyParams1(N=N, beta=min(beta, 1.0), x=x)


def dsts1_from_energy(p: EnergyParams1) -> GaussianState1:
    n_T, _, r = energy_to_physical(p)
    return dsts1_from_physical(p.x, r, n_T)


def physical_params(s: GaussianState1) -> tuple[float, float, float]:
    """Recover ``(x, r, n_T)`` from a state with diagonal CM and mean along the x quadrature."""
    if abs(s.cm[0, 1]) > 1e-12 or abs(s.mean[1]) > 1e-12:
        raise DomainError("state is not of DSTS1 form (rotated squeezing or complex displacement)")
    a, b = s.cm[0, 0], s.cm[1, 1]
    return s.mean[0] / math.sqrt(2.0), 0.25 * math.log(a / b), max(math.sqrt(a * b) - 0.5, 0.0)


def mean_photon(s: GaussianState1) -> float:
    return float(np.trace(s.cm) / 2 - 0.5 + s.mean @ s.mean / 2)


def photon_variance(s: GaussianState1) -> float:
    """Photon-number variance ``Tr(cm^2)/2 - 1/4 + mean^T cm mean``."""
    return float(np.sum(s.cm * s.cm) / 2 - 0.25 + s.mean @ s.cm @ s.mean)


def fano_factor(s: GaussianState1) -> float:
    n = mean_photon(s)
    if n <= 1e-15:
        raise UndefinedQuantityError("Fano factor is undefined for the vacuum")
    return photon_variance(s) / n


def is_sub_poissonian(s: GaussianState1) -> bool:
    return fano_factor(s) < 1


def is_classical(s: GaussianState1, tol: float = CLASSICAL_TOL) -> bool:
    """A Gaussian state has a regular P-function iff its CM dominates the vacuum CM."""
    return bool(np.linalg.eigvalsh(s.cm)[0] >= 0.5 - tol)


def clamp_fidelity(F: float, tol: float = FIDELITY_CLAMP_TOL) -> float:
    if not math.isfinite(F) or F < -tol or F > 1 + tol:
        raise NumericalConsistencyError(f"fidelity {F!r} outside [0, 1] beyond tolerance {tol}")
    return min(max(F, 0.0), 1.0)


def fidelity1(s1: GaussianState1, s2: GaussianState1) -> float:
    """Uhlmann fidelity between two single-mode Gaussian states.

    ``F = exp(-d^T (cm1 + cm2)^{-1} d / 2) / (sqrt(Delta + delta) - sqrt(delta))``
    with ``Delta = det(cm1 + cm2)`` and ``delta = 4 prod_k (det cm_k - 1/4)``.
    """
    total = s1.cm + s2.cm
    try:
        chol = np.linalg.cholesky(total)
    except np.linalg.LinAlgError as exc:
        raise DomainError("cm1 + cm2 is not positive definite") from exc
    d = s1.mean - s2.mean
    w = np.linalg.solve(chol, d)
    exponent = -0.5 * float(w @ w)

    Delta = float(np.linalg.det(total))
    excess = []
    for cm in (s1.cm, s2.cm):
        e = float(np.linalg.det(cm)) - 0.25
        excess.append(0.0 if abs(e) < PURE_DET_TOL else e)
    delta = 4 * excess[0] * excess[1]
    # 1/(sqrt(D + d) - sqrt(d)) rewritten to avoid cancellation for hot states
    F = math.exp(exponent) * (math.sqrt(Delta + delta) + math.sqrt(delta)) / Delta
    return clamp_fidelity(F)


def _check_unit_interval(F: float) -> None:
    if not 0 <= F <= 1:
        raise DomainError(f"fidelity must lie in [0, 1], got {F}")


def bures_distance(F: float) -> float:
    _check_unit_interval(F)
    return math.sqrt(2 * (1 - math.sqrt(F)))


def trace_distance_bounds(F: float) -> tuple[float, float]:
    """Lower and upper bounds on the trace distance implied by fidelity ``F``."""
    _check_unit_interval(F)
    return 1 - math.sqrt(F), math.sqrt(1 - F)


def state1_from_dict(d: Mapping[str, Any]) -> GaussianState1:
    """Parse either ``{"mean", "cm"}`` or ``{"N", "beta", "x"}`` (``x`` optional)."""
    if "cm" in d:
        return GaussianState1(mean=d.get("mean", [0.0, 0.0]), cm=d["cm"])
    if "N" in d and "beta" in d:
        return dsts1_from_energy(EnergyParams1(float(d["N"]), float(d["beta"]), float(d.get("x", 0.0))))
    raise DomainError("single-mode state needs either 'cm' or 'N' and 'beta'")
