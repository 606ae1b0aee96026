"""Two-mode squeezed thermal states (STS2).

Covariance matrices are 4x4 in the mode-block ordering ``(x1, p1, x2, p2)``
with vacuum ``I/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import mpmath
import numpy as np

from .errors import DomainError, NumericalConsistencyError
from .gaussian_single import clamp_fidelity

#: Slack on the bona fide condition ``d_minus >= 1/2``.
BONA_FIDE_TOL = 1e-10
#: Slack on the PPT separability boundary.
SEPARABLE_TOL = 1e-12
#: Largest tolerated imaginary residue of ``det(cm + i Omega / 2)``.
IMAG_TOL = 1e-10

#: Below this value of ``X - 1`` the fidelity is re-evaluated with ``EXTENDED_DPS`` digits.
NEAR_PURE_X = 1e-6
EXTENDED_DPS = 40

SIGMA_Z = np.diag([1.0, -1.0])
J = np.array([[0.0, 1.0], [-1.0, 0.0]])
OMEGA = np.block([[J, np.zeros((2, 2))], [np.zeros((2, 2)), J]])


def block_cm(A: float, B: float, C: float) -> np.ndarray:
    """Assemble ``1/2 [[A I, C sz], [C sz, B I]]``."""
    I2 = np.eye(2)
    return 0.5 * np.block([[A * I2, C * SIGMA_Z], [C * SIGMA_Z, B * I2]])


def _invariants(cm: np.ndarray) -> tuple[float, float, float, float]:
    return (
        float(np.linalg.det(cm[:2, :2])),
        float(np.linalg.det(cm[2:, 2:])),
        float(np.linalg.det(cm[:2, 2:])),
        float(np.linalg.det(cm)),
    )


def symplectic_eigenvalues(cm: np.ndarray) -> tuple[float, float]:
    """Williamson spectrum ``(d_plus, d_minus)`` from the Hermitian matrix ``cm^1/2 (i Omega) cm^1/2``.

    Independent of the invariant formula and well conditioned at degeneracy.
    """
    w, v = np.linalg.eigh(cm)
    root = (v * np.sqrt(w)) @ v.T
    ev = np.linalg.eigvalsh(root @ (1j * OMEGA) @ root)
    return float(ev[3]), float(ev[2])


def _symplectic_pair(Delta: float, I4: float, tol: float, disc: float | None = None) -> tuple[float, float]:
    if disc is None:
        disc = Delta * Delta - 4 * I4
    if disc < 0:
        if disc < -tol * max(1.0, Delta * Delta):
            raise NumericalConsistencyError(f"negative discriminant {disc!r} in symplectic spectrum")
        disc = 0.0
    root = math.sqrt(disc)
    plus = (Delta + root) / 2
    # product form keeps the small eigenvalue accurate for strongly squeezed states
    minus = I4 / plus if plus > 0 else 0.0
    return math.sqrt(plus), math.sqrt(max(minus, 0.0))


@dataclass(frozen=True, eq=False)
class GaussianState2:
    """Zero-mean two-mode Gaussian state given by its 4x4 covariance matrix."""

    cm: np.ndarray

    def __post_init__(self) -> None:
        cm = np.array(self.cm, dtype=float)
        if cm.shape != (4, 4) or not np.all(np.isfinite(cm)):
            raise DomainError(f"expected a finite 4x4 covariance matrix, got shape {cm.shape}")
        if not np.allclose(cm, cm.T, rtol=0, atol=1e-12):
            raise DomainError("covariance matrix is not symmetric")
        try:
            np.linalg.cholesky(cm)
        except np.linalg.LinAlgError as exc:
            raise DomainError("covariance matrix is not positive definite") from exc
        d_minus = symplectic_eigenvalues(cm)[1]
        if d_minus < 0.5 - BONA_FIDE_TOL:
            raise DomainError(f"not a quantum covariance matrix: symplectic eigenvalue {d_minus} < 1/2")
        cm.setflags(write=False)
        object.__setattr__(self, "cm", cm)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GaussianState2):
            return NotImplemented
        return bool(np.array_equal(self.cm, other.cm))

    @classmethod
    def from_abc(cls, A: float, B: float, C: float) -> "GaussianState2":
        return cls(block_cm(A, B, C))

    def abc(self) -> tuple[float, float, float] | None:
        """``(A, B, C)`` when the CM has the standard block form, else ``None``."""
        A, B, C = 2 * self.cm[0, 0], 2 * self.cm[2, 2], 2 * self.cm[0, 2]
        if np.allclose(self.cm, block_cm(A, B, C), rtol=0, atol=1e-14):
            return float(A), float(B), float(C)
        return None

    def to_dict(self) -> dict:
        abc = self.abc()
        if abc is not None:
            return dict(zip("ABC", abc))
        return {"cm": self.cm.tolist()}


@dataclass(frozen=True)
class EnergyParams2:
    """Total energy ``N``, squeezed fraction ``beta`` and thermal split ``gamma``."""

    N: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        if not (self.N >= 0 and math.isfinite(self.N)):
            raise DomainError(f"N must be finite and >= 0, got {self.N}")
        for name in ("beta", "gamma"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self) -> dict:
        return {"N": self.N, "beta": self.beta, "gamma": self.gamma}


def physical_from_energy(p: EnergyParams2) -> tuple[float, float, float]:
    """Return ``(n_s, n_T1, n_T2)``; ``n_s = sinh(r)^2`` is the per-mode squeezing photon number."""
    n_s = p.beta * p.N / 2
    thermal = (1 - p.beta) * p.N / (1 + p.beta * p.N)
    return n_s, p.gamma * thermal, (1 - p.gamma) * thermal


def energy_from_physical(n_s: float, n_T1: float, n_T2: float) -> EnergyParams2:
    if min(n_s, n_T1, n_T2) < 0:
        raise DomainError("photon numbers must be >= 0")
    thermal = n_T1 + n_T2
    N = 2 * n_s + thermal * (1 + 2 * n_s)
    return EnergyParams2(
        N=N,
        beta=min(2 * n_s / N, 1.0) if N > 0 else 0.0,
        gamma=n_T1 / thermal if thermal > 0 else 0.5,
    )


def sts2_abc(p: EnergyParams2) -> tuple[float, float, float]:
    N, b, g = p.N, p.beta, p.gamma
    den = 1 + b * N
    squeeze = b * N * (1 + N)
    A = 1 + (2 * g * (1 - b) * N + squeeze) / den
    B = 1 + (2 * (1 - g) * (1 - b) * N + squeeze) / den
    C = (1 + N) * math.sqrt(b * N * (2 + b * N)) / den
    return A, B, C


def sts2_from_energy(p: EnergyParams2) -> GaussianState2:
    return GaussianState2.from_abc(*sts2_abc(p))


def ppt_symplectic_eigenvalues(s: GaussianState2) -> tuple[float, float]:
    """Symplectic eigenvalues ``(d_plus, d_minus)`` of the partially transposed CM.

    Partial transposition flips the sign of the off-diagonal block invariant,
    so ``Delta~ = I1 + I2 - 2 I3``.
    """
    I1, I2, I3, I4 = _invariants(s.cm)
    abc = s.abc()
    disc = None
    if abc is not None:
        # block form: Delta~^2 - 4 I4 factorizes as ((A-B)^2 + 4C^2)(A+B)^2 / 16, free of cancellation
        A, B, C = abc
        I1, I2, I3, I4 = A * A / 4, B * B / 4, -C * C / 4, (A * B - C * C) ** 2 / 16
        disc = ((A - B) ** 2 + 4 * C * C) * (A + B) ** 2 / 16
    return _symplectic_pair(I1 + I2 - 2 * I3, I4, 1e-9, disc)


def is_separable(s: GaussianState2, tol: float = SEPARABLE_TOL) -> bool:
    return ppt_symplectic_eigenvalues(s)[1] >= 0.5 - tol


def _real_det(m: np.ndarray) -> float:
    d = complex(np.linalg.det(m))
    if abs(d.imag) > IMAG_TOL * max(1.0, abs(d.real)):
        raise NumericalConsistencyError(f"determinant has imaginary residue {d.imag!r}")
    return d.real


def fidelity_terms(s1: GaussianState2, s2: GaussianState2) -> dict[str, float]:
    """Intermediate quantities ``Delta, E1, E2, X`` of the two-mode fidelity."""
    Delta = float(np.linalg.det(s1.cm + s2.cm))
    if Delta <= 0:
        raise DomainError("cm1 + cm2 is not positive definite")
    E1 = float(np.linalg.det(OMEGA @ s1.cm @ OMEGA @ s2.cm - np.eye(4) / 4)) / Delta
    half_omega = 0.5j * OMEGA
    E2 = _real_det(s1.cm + half_omega) * _real_det(s2.cm + half_omega) / Delta
    # pure states make E2 vanish up to round-off of either sign
    E1, E2 = max(E1, 0.0), max(E2, 0.0)
    X = 2 * math.sqrt(E1) + 2 * math.sqrt(E2) + 0.5
    return {"Delta": Delta, "E1": E1, "E2": E2, "X": X}


def _fidelity_mp(cm1: np.ndarray, cm2: np.ndarray, dps: int) -> float:
    """Same closed form evaluated in ``dps``-digit arithmetic from the exact float inputs."""
    with mpmath.workdps(dps):
        a, b = mpmath.matrix(cm1.tolist()), mpmath.matrix(cm2.tolist())
        om = mpmath.matrix(OMEGA.tolist())
        Delta = mpmath.det(a + b)
        E1 = mpmath.det(om * a * om * b - mpmath.eye(4) / 4) / Delta
        half = om * mpmath.mpc(0, 0.5)
        E2 = mpmath.re(mpmath.det(a + half) * mpmath.det(b + half)) / Delta
        X = 2 * mpmath.sqrt(max(E1, 0)) + 2 * mpmath.sqrt(max(E2, 0)) + mpmath.mpf(1) / 2
        F = (mpmath.sqrt(X) + mpmath.sqrt(max(X - 1, 0))) ** 2 / mpmath.sqrt(Delta)
        return float(F)


def fidelity2(s1: GaussianState2, s2: GaussianState2, x_tol: float = 1e-9) -> float:
    """Uhlmann fidelity between two zero-mean two-mode Gaussian states.

    ``F = (sqrt(X) + sqrt(X - 1))^2 / sqrt(det(cm1 + cm2))``. Close to
    ``X = 1`` (both states nearly pure) the square root turns round-off in the
    determinants into errors of order 1e-8, so that regime is re-evaluated in
    extended precision.
    """
    t = fidelity_terms(s1, s2)
    X = t["X"]
    if X < 1 - x_tol:
        raise NumericalConsistencyError(f"X = {X!r} < 1")
    if X - 1 < NEAR_PURE_X:
        F = _fidelity_mp(s1.cm, s2.cm, EXTENDED_DPS)
    else:
        F = (math.sqrt(X) + math.sqrt(X - 1)) ** 2 / math.sqrt(t["Delta"])
    return clamp_fidelity(F)


def state2_from_dict(d: Mapping[str, Any]) -> GaussianState2:
    """Parse ``{"A","B","C"}``, ``{"N","beta","gamma"}`` or ``{"cm"}``."""
    if "cm" in d:
        return GaussianState2(d["cm"])
    if {"A", "B", "C"} <= d.keys():
        return GaussianState2.from_abc(float(d["A"]), float(d["B"]), float(d["C"]))
    if {"N", "beta", "gamma"} <= d.keys():
        return sts2_from_energy(EnergyParams2(float(d["N"]), float(d["beta"]), float(d["gamma"])))
    raise DomainError("two-mode state needs 'cm', 'A/B/C' or 'N/beta/gamma'")
