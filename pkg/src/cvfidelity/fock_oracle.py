"""Brute-force Fock-space backend used to cross-check the closed forms.

States are built by applying the squeezing and displacement unitaries,
generated from truncated ladder operators, to diagonal thermal states in a
padded working space. The result is cropped to the requested cutoff and the
lost probability is reported as ``trace_deficit``; it is never silently
absorbed beyond ``max_deficit``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .errors import CutoffError, DomainError, NumericalConsistencyError
from .pnes import PnesState

HERMITIAN_TOL = 1e-12
NEGATIVE_EIG_TOL = 1e-10
#: Largest truncation loss that may be renormalized away (single mode).
MAX_DEFICIT = 1e-8
#: Largest truncation loss accepted for two-mode states, whose cutoff is capped.
MAX_DEFICIT_TWO_MODE = 1e-5
#: Per-mode cutoff cap for two-mode densities.
TWO_MODE_CUTOFF_CAP = 24
DENSE_EXPM_DIM = 400
#: Target truncation loss of the automatic single-mode cutoff.
AUTO_DEFICIT = 1e-10


@dataclass(frozen=True, eq=False)
class FockDensity:
    """Truncated Fock-basis density matrix.

    Two-mode matrices use the product index ``n1 * (n_max + 1) + n2``.
    """

    matrix: np.ndarray
    n_max: int
    modes: int = 1
    trace_deficit: float = 0.0

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix)
        dim = (self.n_max + 1) ** self.modes
        if m.shape != (dim, dim):
            raise DomainError(f"expected a {dim}x{dim} matrix for n_max={self.n_max}, modes={self.modes}")
        if not np.allclose(m, m.conj().T, rtol=0, atol=HERMITIAN_TOL):
            raise DomainError("density matrix is not Hermitian")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def to_json(self) -> str:
        m = self.matrix
        return json.dumps(
            {
                "n_max": self.n_max,
                "modes": self.modes,
                "trace_deficit": self.trace_deficit,
                "real": np.real(m).tolist(),
                "imag": np.imag(m).tolist(),
            }
        )

    def dump(self, path: str | Path) -> None:
        """Write the matrix as ``.npy`` (dense binary) or ``.json`` depending on the suffix."""
        path = Path(path)
        if path.suffix == ".npy":
            np.save(path, self.matrix)
        else:
            path.write_text(self.to_json())


def annihilation(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, format="csr")


def thermal_weights(n_T: float, dim: int) -> np.ndarray:
    n = np.arange(dim)
    if n_T == 0:
        return (n == 0).astype(float)
    return (n_T / (1 + n_T)) ** n / (1 + n_T)


def _finish(rho_work: np.ndarray, keep: np.ndarray, n_max: int, modes: int, max_deficit: float) -> FockDensity:
    rho = rho_work[np.ix_(keep, keep)]
    deficit = 1.0 - float(np.trace(rho).real)
    if deficit > max_deficit:
        raise CutoffError(f"cutoff n_max={n_max} loses probability {deficit:.3e} > {max_deficit:.1e}")
    rho = rho / np.trace(rho).real
    rho = (rho + rho.conj().T) / 2
    return FockDensity(rho, n_max, modes, max(deficit, 0.0))


def _evolve_mixture(generators: list[sp.spmatrix], weights: np.ndarray) -> np.ndarray:
    """Return ``U diag(weights) U^T`` for ``U = exp(G_k) ... exp(G_1)`` acting on the occupied columns."""
    cols = np.flatnonzero(weights > 1e-30)
    psi = np.zeros((weights.size, cols.size))
    psi[cols, np.arange(cols.size)] = np.sqrt(weights[cols])
    for g in generators:
        # small spaces: a dense exponential is cheaper than Krylov steps over many columns
        psi = expm(g.toarray()) @ psi if g.shape[0] <= DENSE_EXPM_DIM else expm_multiply(g, psi)
    return psi @ psi.T


def default_cutoff(mean_photon: float) -> int:
    """Starting single-mode cutoff ``20 + 15 <n>``."""
    return int(math.ceil(20 + 15 * mean_photon))


def gaussian1_to_fock(
    x: float,
    r: float,
    n_T: float,
    n_max: int,
    pad: int | None = None,
    max_deficit: float = MAX_DEFICIT,
) -> FockDensity:
    """Density matrix of ``D(x) S(r) nu_th(n_T) S(r)^dag D(x)^dag`` cut at ``n_max`` photons."""
    if n_T < 0:
        raise DomainError("thermal photon number must be >= 0")
    pad = max(n_max, 20) if pad is None else pad
    dim = n_max + 1 + pad
    a = annihilation(dim)
    ad = a.T.tocsr()
    gens = []
    if r != 0:
        gens.append((0.5 * r * (ad @ ad - a @ a)).tocsc())
    if x != 0:
        gens.append((x * (ad - a)).tocsc())
    rho = _evolve_mixture(gens, thermal_weights(n_T, dim))
    return _finish(rho, np.arange(n_max + 1), n_max, 1, max_deficit)


def gaussian1_to_fock_auto(x: float, r: float, n_T: float, target_deficit: float = AUTO_DEFICIT) -> FockDensity:
    """Single-mode density with the cutoff raised until the truncation loss is below ``target_deficit``."""
    mean = x * x + (n_T + 0.5) * math.cosh(2 * r) - 0.5
    n_max = default_cutoff(mean)
    for _ in range(6):
        try:
            return gaussian1_to_fock(x, r, n_T, n_max, max_deficit=target_deficit)
        except CutoffError:
            n_max *= 2
    raise CutoffError(f"no cutoff up to {n_max} reaches deficit {target_deficit}")


def gaussian2_to_fock(
    r: float,
    n_T1: float,
    n_T2: float,
    n_max: int = TWO_MODE_CUTOFF_CAP,
    pad: int = 8,
    max_deficit: float = MAX_DEFICIT_TWO_MODE,
) -> FockDensity:
    """Density matrix of ``S2(r) nu_th(n_T1) x nu_th(n_T2) S2(r)^dag`` with ``S2 = exp(r(a^dag b^dag - a b))``."""
    if n_max > TWO_MODE_CUTOFF_CAP:
        raise DomainError(f"two-mode cutoff is capped at {TWO_MODE_CUTOFF_CAP} per mode")
    if min(n_T1, n_T2) < 0:
        raise DomainError("thermal photon numbers must be >= 0")
    d = n_max + 1 + pad
    a1 = annihilation(d)
    eye = sp.identity(d, format="csr")
    a = sp.kron(a1, eye, format="csr")
    b = sp.kron(eye, a1, format="csr")
    gens = []
    if r != 0:
        gens.append((r * (a.T @ b.T - a @ b)).tocsc())
    weights = np.kron(thermal_weights(n_T1, d), thermal_weights(n_T2, d))
    rho = _evolve_mixture(gens, weights)
    idx = np.arange(d)
    keep = (idx[:, None] * d + idx[None, :])[: n_max + 1, : n_max + 1].ravel()
    return _finish(rho, keep, n_max, 2, max_deficit)


def pnes_to_fock(p: PnesState, norm_tol: float = 1e-10) -> FockDensity:
    """Projector onto ``sum_n psi_n |n, n>`` in the doubled basis of the state's own cutoff."""
    if abs(p.norm2 - 1) > norm_tol:
        raise DomainError("PNES must be normalized")
    dim = p.n_max + 1
    vec = np.zeros(dim * dim)
    vec[np.arange(dim) * (dim + 1)] = p.coeffs
    return FockDensity(np.outer(vec, vec), p.n_max, 2, 1.0 - p.norm2)


twb_to_fock = pnes_to_fock


def _check_pair(r1: FockDensity, r2: FockDensity) -> None:
    if r1.matrix.shape != r2.matrix.shape or r1.modes != r2.modes:
        raise DomainError("density matrices have mismatched dimensions or mode counts")


def psd_sqrt(m: np.ndarray, tol: float = NEGATIVE_EIG_TOL) -> np.ndarray:
    """Hermitian square root; eigenvalues in ``[-tol, 0)`` are clipped, more negative ones are an error."""
    w, v = np.linalg.eigh(m)
    if w[0] < -tol:
        raise NumericalConsistencyError(f"density matrix has eigenvalue {w[0]:.3e} < -{tol}")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def uhlmann(r1: FockDensity, r2: FockDensity) -> float:
    """``(Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2``.

    The trace is evaluated as the nuclear norm of ``sqrt(rho1) sqrt(rho2)``,
    whose Gram matrix is ``sqrt(rho1) rho2 sqrt(rho1)``; singular values keep
    full precision where the eigenvalues of the Gram matrix would lose half.
    """
    _check_pair(r1, r2)
    try:
        s = np.linalg.svd(psd_sqrt(r1.matrix) @ psd_sqrt(r2.matrix), compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalConsistencyError("eigen-solver failed") from exc
    return float(np.sum(s)) ** 2


def trace_distance(r1: FockDensity, r2: FockDensity) -> float:
    _check_pair(r1, r2)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(r1.matrix - r2.matrix))))


def photon_moments(r: FockDensity) -> tuple[float, float]:
    """``(<n>, <n^2>)`` of a single-mode density."""
    if r.modes != 1:
        raise DomainError("photon moments need a single-mode density")
    p = np.real(np.diag(r.matrix))
    n = np.arange(p.size)
    return float(n @ p), float((n * n) @ p)


def partial_trace(r: FockDensity, keep: int = 0) -> FockDensity:
    """Reduced single-mode state of a two-mode density (``keep`` = 0 or 1)."""
    if r.modes != 2:
        raise DomainError("partial trace needs a two-mode density")
    d = r.n_max + 1
    t = r.matrix.reshape(d, d, d, d)
    red = np.einsum("ijkj->ik", t) if keep == 0 else np.einsum("ijil->jl", t)
    return FockDensity(red, r.n_max, 1, r.trace_deficit)


def purity(r: FockDensity) -> float:
    return float(np.real(np.trace(r.matrix @ r.matrix)))
