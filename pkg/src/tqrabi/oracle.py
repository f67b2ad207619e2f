"""Dense truncated-Fock-space diagonalization, the independent cross-check solver."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .model import (
    ModelParams,
    NotConverged,
    Parity,
    SpectrumRecord,
    SpectrumResult,
    SupportOverflow,
)

__all__ = [
    "FockHamiltonian",
    "build_hamiltonian",
    "diagonalize",
    "certified_spectrum",
    "residual",
]

# Diagonal of sigma1_z, sigma2_z and their product over the pair order (ee, eg, ge, gg).
_Z1 = np.array([1.0, 1.0, -1.0, -1.0])
_Z2 = np.array([1.0, -1.0, 1.0, -1.0])
_Z1Z2 = _Z1 * _Z2

PARITY_PURITY = 0.999
DEFAULT_DRIFT_TOL = 1e-8
DEFAULT_TRUNCATION_CAP = 1200
_DRIFT_STEP = 50


@dataclass(frozen=True)
class FockHamiltonian:
    """Real symmetric Hamiltonian on photon numbers 0..truncation.

    Basis index is 4*n + q with q running over the qubit pairs (ee, eg, ge, gg);
    parity_diag holds the (-1)^n sigma1_z sigma2_z eigenvalues on that basis.
    """

    params: ModelParams
    truncation: int
    matrix: np.ndarray
    parity_diag: np.ndarray

    @property
    def dimension(self) -> int:
        return 4 * (self.truncation + 1)


def build_hamiltonian(params: ModelParams, truncation: int) -> FockHamiltonian:
    """Assemble the block-tridiagonal matrix; commutes exactly with the parity diagonal."""
    if truncation < 0:
        raise ValueError("truncation must be >= 0")
    npts = truncation + 1
    dim = 4 * npts
    h = np.zeros((dim, dim))
    n = np.arange(npts, dtype=float)

    diag = (params.omega * n[:, None]
            + params.delta1 * _Z1 + params.delta2 * _Z2
            + params.jz * _Z1Z2)
    h[np.arange(dim), np.arange(dim)] = diag.ravel()

    # Exchange terms off-diagonal in qubit space, diagonal in photon number.
    base = 4 * np.arange(npts)
    h[base + 0, base + 3] = h[base + 3, base + 0] = params.jx - params.jy
    h[base + 1, base + 2] = h[base + 2, base + 1] = params.jx + params.jy

    # Qubit-photon coupling (g1 flips the first qubit, g2 the second).
    coup = np.array([
        [0.0, params.g2, params.g1, 0.0],
        [params.g2, 0.0, 0.0, params.g1],
        [params.g1, 0.0, 0.0, params.g2],
        [0.0, params.g1, params.g2, 0.0],
    ])
    for m in range(truncation):
        w = np.sqrt(m + 1.0) * coup
        h[4 * m:4 * m + 4, 4 * (m + 1):4 * (m + 1) + 4] = w
        h[4 * (m + 1):4 * (m + 1) + 4, 4 * m:4 * m + 4] = w.T

    pdiag = (np.where(np.arange(npts) % 2 == 0, 1.0, -1.0)[:, None] * _Z1Z2).ravel()
    return FockHamiltonian(params, truncation, h, pdiag)


@lru_cache(maxsize=128)
def _eig(params: ModelParams, truncation: int) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum with exact parity labels; cached per (params, truncation)."""
    fh = build_hamiltonian(params, truncation)
    evals, vecs = scipy.linalg.eigh(fh.matrix)
    pexp = np.einsum("ij,i,ij->j", vecs, fh.parity_diag, vecs)
    if np.min(np.abs(pexp)) > PARITY_PURITY:
        parities = np.where(pexp > 0, 1, -1)
        return evals, parities
    # Degenerate levels mixed the sectors: rediagonalize inside each exact block.
    pairs = []
    for sign in (1, -1):
        idx = np.flatnonzero(fh.parity_diag == sign)
        sub = scipy.linalg.eigh(fh.matrix[np.ix_(idx, idx)], eigvals_only=True)
        pairs.extend((e, sign) for e in sub)
    pairs.sort(key=lambda t: (t[0], -t[1]))
    evals = np.array([e for e, _ in pairs])
    parities = np.array([s for _, s in pairs])
    return evals, parities


def certified_spectrum(params: ModelParams, truncation: int, k_levels: int,
                       drift_tol: float = DEFAULT_DRIFT_TOL,
                       cap: int = DEFAULT_TRUNCATION_CAP,
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Lowest k_levels eigenvalues with per-level truncation drift below drift_tol.

    Repeats at truncation + 50 and grows the basis until the drift test passes;
    returns (energies, parity signs, drifts, truncation actually used).
    """
    t = truncation
    e_lo, _ = _eig(params, t)
    while True:
        e_hi, p_hi = _eig(params, t + _DRIFT_STEP)
        k = min(k_levels, e_lo.size)
        drift = np.abs(e_lo[:k] - e_hi[:k])
        if drift.size and np.max(drift) < drift_tol:
            return e_hi, p_hi, drift, t + _DRIFT_STEP
        t += _DRIFT_STEP
        e_lo = e_hi
        if t + _DRIFT_STEP > cap:
            raise NotConverged(
                f"drift {np.max(drift):.3e} >= {drift_tol:g} at truncation cap {cap}")


def diagonalize(params: ModelParams, truncation: int, k_levels: int,
                drift_tol: float = DEFAULT_DRIFT_TOL,
                cap: int = DEFAULT_TRUNCATION_CAP) -> SpectrumResult:
    """Lowest k_levels eigenpairs as 'oracle' records (residual = truncation drift)."""
    if k_levels < 1:
        raise ValueError("k_levels must be >= 1")
    if truncation < k_levels / 2 + 10:
        raise ValueError("truncation too small for the requested level count")
    evals, parities, drift, _ = certified_spectrum(params, truncation, k_levels,
                                                   drift_tol, cap)
    records = []
    for i in range(min(k_levels, evals.size)):
        par = Parity.PLUS if parities[i] > 0 else Parity.MINUS
        records.append(SpectrumRecord(float(evals[i]), par, "oracle",
                                      float(drift[i]) if i < drift.size else 0.0,
                                      label=i))
    return SpectrumResult.from_records(records)


def residual(params: ModelParams, truncation: int, state, energy: float | None = None,
             ) -> float:
    """Relative eigen-residual ||H v - E v|| / ||v|| for a vector or finite state."""
    if hasattr(state, "vector"):
        vec = state.vector(truncation)
        if energy is None:
            energy = state.energy
    else:
        vec = np.asarray(state, dtype=float)
        if energy is None:
            raise ValueError("energy is required for a raw vector")
        if vec.shape != (4 * (truncation + 1),):
            raise SupportOverflow(
                f"vector length {vec.size} does not match truncation {truncation}")
    h = build_hamiltonian(params, truncation).matrix
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ValueError("zero state")
    return float(np.linalg.norm(h @ vec - energy * vec) / norm)
