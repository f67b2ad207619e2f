"""Quasi-exact eigenstates with bounded photon number on the baseline energies.

For identical couplings (g1 = g2) the center-0 recurrence can terminate at a
photon number N, leaving an eigenstate supported on at most N photons with
energy E = N - Jx +/- (-1)^N (Jy + Jz) (E = N without exchange terms). The
termination happens iff a downward three-term recurrence, started from the
cutoff row, reaches n = -1 with value zero; that value is the cutoff
condition f(-1, N) evaluated here. For several small-N cases the states have
closed forms, which the recurrence construction reproduces componentwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import oracle
from .model import (
    ConditionNotMet,
    DegenerateDenominator,
    ModelParams,
    Parity,
    QUBIT_PAIRS,
    RequiresEqualCouplings,
    SolverError,
    SupportOverflow,
)

__all__ = [
    "ExceptionalCandidate",
    "ExceptionalState",
    "FlatLineHit",
    "condition",
    "build_state",
    "closed_form_state",
    "fock_subspace_check",
    "scan_flat_lines",
    "exceptional_energy",
    "write_catalog_csv",
]

CONDITION_TOL = 1e-10
_DEGENERATE_EPS = 1e-12
_DROP_REL = 1e-13
MANIFOLD_TOL = 1e-8

_SCAN_AXES = ("delta1", "delta2", "jx", "jy", "jz")


@dataclass(frozen=True)
class ExceptionalCandidate:
    """A baseline index with its cutoff-condition value at the probed parameters."""

    n_index: int
    parity: Parity
    energy: float
    condition_value: float
    g_independent: bool


@dataclass(frozen=True)
class ExceptionalState:
    """Finite-photon-support eigenstate: unit-norm amplitudes over |n, s1 s2>."""

    energy: float
    parity: Parity
    coeffs: tuple[tuple[int, str, float], ...]
    norm_constant: float

    @property
    def max_photon(self) -> int:
        return max(n for n, _, _ in self.coeffs)

    def vector(self, truncation: int) -> np.ndarray:
        """Dense amplitude vector in the diagonalization basis (4*n + pair index)."""
        if self.max_photon > truncation:
            raise SupportOverflow(
                f"state reaches photon {self.max_photon} > truncation {truncation}")
        v = np.zeros(4 * (truncation + 1))
        for n, pair, amp in self.coeffs:
            v[4 * n + QUBIT_PAIRS.index(pair)] = amp
        return v


def exceptional_energy(params: ModelParams, parity: Parity, n_index: int) -> float:
    """Baseline energy carrying the cutoff state (caller's units)."""
    sp = params.scaled()
    s = parity.sign
    return params.omega * (n_index - sp.jx
                           + s * (-1.0) ** n_index * (sp.jy + sp.jz))


def _downward(sp: ModelParams, s: int, n_cut: int) -> np.ndarray:
    """First-component coefficients e1[n], n = -1..N, from the cutoff row down.

    Stored with offset one (entry k holds e1_{k-1}); the second component at
    the cutoff is normalized to one, so entry 0 is the cutoff condition.
    """
    g = sp.g
    d1, d2, jx = sp.delta1, sp.delta2, sp.jx
    jy, jz = sp.jy, sp.jz
    beta = jy + jz
    sig_n = (-1.0) ** n_cut
    e = np.zeros(n_cut + 2)
    if n_cut >= 1:
        e[n_cut] = (s * (-1.0) ** (n_cut - 1) * d1 - d2) / g
    else:
        e[0] = (-s * d1 - d2) / g
    for n in range(n_cut - 2, -2, -1):
        if e[n + 2] == 0.0:  # dark chains vanish identically; no division needed
            e[n + 1] = -(n + 2) * e[n + 3]
            continue
        sig = (-1.0) ** n
        den = n_cut - n - 1 + s * (sig_n + sig) * beta
        if abs(den) < _DEGENERATE_EPS:
            raise DegenerateDenominator(
                f"downward recurrence denominator vanished at n={n} (N={n_cut})")
        bracket = (-((d2 + s * (-1.0) ** (n + 1) * d1) ** 2) / den
                   + s * (sig_n - sig) * jy + s * (sig_n + sig) * jz
                   + n_cut - n - 1 - 2 * jx)
        e[n + 1] = bracket / g * e[n + 2] - (n + 2) * e[n + 3]
    return e


def condition(params: ModelParams, parity: Parity, n_index: int) -> float:
    """Cutoff condition f(-1, N); zero (within 1e-10) iff the state exists.

    Values are reported in omega = 1 units. Only defined for g1 = g2.
    """
    if n_index < 0:
        raise ValueError("n_index must be >= 0")
    sp = params.scaled()
    if sp.gprime != 0.0:
        raise RequiresEqualCouplings("cutoff conditions need g1 == g2")
    return float(_downward(sp, parity.sign, n_index)[0])


def _second_component(sp: ModelParams, s: int, n_cut: int,
                      e1: np.ndarray) -> np.ndarray:
    """Second-component coefficients slaved to e1 through the center-0 constraint."""
    beta = sp.jy + sp.jz
    sig_n = (-1.0) ** n_cut
    e2 = np.zeros(n_cut + 1)
    e2[n_cut] = 1.0
    for n in range(n_cut):
        if e1[n + 1] == 0.0:
            continue
        sig = (-1.0) ** n
        den = n_cut - n + s * (sig_n - sig) * beta
        if abs(den) < _DEGENERATE_EPS:
            raise DegenerateDenominator(
                f"second-component denominator vanished at n={n} (N={n_cut})")
        e2[n] = (sp.delta2 + s * sig * sp.delta1) * e1[n + 1] / den
    return e2


def _amps_from_coeffs(s: int, e1: np.ndarray, e2: np.ndarray,
                      n_cut: int) -> dict[tuple[int, str], float]:
    """Map series coefficients to Fock x qubit amplitudes.

    Photon numbers with (-1)^m equal to the parity sign carry the (ee, gg)
    combinations; the others carry (ge, eg).
    """
    amps: dict[tuple[int, str], float] = {}
    for m in range(n_cut + 1):
        w = math.sqrt(math.factorial(m) / 2.0)
        plus = w * (e1[m] + e2[m])
        minus = w * (e1[m] - e2[m])
        if (-1) ** m == s:
            amps[(m, "ee")] = plus
            amps[(m, "gg")] = minus
        else:
            amps[(m, "ge")] = plus
            amps[(m, "eg")] = minus
    return amps


def _trim(amps: Mapping[tuple[int, str], float]) -> dict[tuple[int, str], float]:
    top = max(abs(a) for a in amps.values())
    if top == 0:
        raise SolverError("zero amplitude table")
    return {k: a for k, a in amps.items() if abs(a) > _DROP_REL * top}


def _normalized(amps: Mapping[tuple[int, str], float],
                ) -> tuple[dict[tuple[int, str], float], float]:
    norm = math.sqrt(sum(a * a for a in amps.values()))
    return {k: a / norm for k, a in amps.items()}, norm


def _closed_form_amps(sp: ModelParams, parity: Parity, n_cut: int,
                      ) -> Optional[dict[tuple[int, str], float]]:
    """Raw closed-form amplitude tables where one is known; None otherwise."""
    s = parity.sign
    d1, d2, g = sp.delta1, sp.delta2, sp.g
    beta = sp.jy + sp.jz
    no_j = sp.jx == 0.0 and sp.jy == 0.0 and sp.jz == 0.0
    if d1 == d2 and s == ((-1) ** (n_cut + 1)):
        return {(n_cut, "ge"): 1.0, (n_cut, "eg"): -1.0}
    if n_cut == 1 and s == 1 and d1 != d2:
        if no_j:
            return {(0, "ee"): 2 * (d1 - d2) / g, (1, "eg"): -1.0, (1, "ge"): 1.0}
        if 1 - 2 * beta == 0.0:
            return None
        return {(0, "gg"): 1 - 2 * beta - d1 - d2,
                (0, "ee"): 1 - 2 * beta + d1 + d2,
                (1, "ge"): (1 - 2 * beta) * g / (d1 - d2),
                (1, "eg"): -(1 - 2 * beta) * g / (d1 - d2)}
    if n_cut == 1 and s == -1 and d1 + d2 != 0.0:
        if no_j:
            if abs(d1 - d2 - 1) <= abs(d2 - d1 - 1):
                return {(0, "eg"): 2 * (d1 + d2) / g, (1, "gg"): 1.0, (1, "ee"): -1.0}
            return {(0, "ge"): 2 * (d1 + d2) / g, (1, "gg"): 1.0, (1, "ee"): -1.0}
        return {(0, "eg"): 1 + 2 * beta + d1 - d2,
                (0, "ge"): 1 + 2 * beta - d1 + d2,
                (1, "ee"): -(1 + 2 * beta) * g / (d1 + d2),
                (1, "gg"): (1 + 2 * beta) * g / (d1 + d2)}
    if (n_cut == 3 and s == 1 and d1 != d2 and 1 - 2 * beta != 0.0
            and abs(sp.jx + sp.jy + 2 * sp.jz - 2.0) < MANIFOLD_TOL):
        d12 = d1 + d2
        return {(0, "gg"): 3 - 2 * beta - d12,
                (0, "ee"): 3 - 2 * beta + d12,
                (2, "gg"): (2 * beta - 3) * (1 - 2 * beta - d12)
                / (math.sqrt(2.0) * (1 - 2 * beta)),
                (2, "ee"): (2 * beta - 3) * (1 - 2 * beta + d12)
                / (math.sqrt(2.0) * (1 - 2 * beta)),
                (3, "ge"): math.sqrt(6.0) * (2 * beta - 3) * g / (2 * (d1 - d2)),
                (3, "eg"): -math.sqrt(6.0) * (2 * beta - 3) * g / (2 * (d1 - d2))}
    return None


def closed_form_state(params: ModelParams, parity: Parity, n_index: int,
                      ) -> Optional[ExceptionalState]:
    """Known closed-form state at these parameters, without checking the condition.

    Off the existence manifold the returned amplitudes are still well defined
    but no longer an eigenstate; useful for boundary-row diagnostics.
    """
    sp = params.scaled()
    if sp.gprime != 0.0:
        raise RequiresEqualCouplings("closed forms need g1 == g2")
    raw = _closed_form_amps(sp, parity, n_index)
    if raw is None:
        return None
    raw = _trim(raw)
    amps, norm = _normalized(raw)
    coeffs = tuple(sorted((n, pair, a) for (n, pair), a in amps.items()))
    return ExceptionalState(exceptional_energy(params, parity, n_index),
                            parity, coeffs, norm)


def build_state(params: ModelParams, parity: Parity, n_index: int,
                cond_tol: float = CONDITION_TOL) -> ExceptionalState:
    """Construct the cutoff state from the downward recurrence and normalize it.

    Raises ConditionNotMet unless |f(-1, N)| < cond_tol. When a closed form is
    known the construction is cross-checked against it componentwise (1e-12,
    up to global sign) and the reported norm constant is the closed form's.
    """
    sp = params.scaled()
    if sp.gprime != 0.0:
        raise RequiresEqualCouplings("cutoff states need g1 == g2")
    s = parity.sign
    e1_off = _downward(sp, s, n_index)
    if abs(e1_off[0]) >= cond_tol:
        raise ConditionNotMet(
            f"cutoff condition {e1_off[0]:.3e} not below {cond_tol:g} "
            f"(N={n_index}, parity {parity})")
    e2 = _second_component(sp, s, n_index, e1_off)
    raw = _trim(_amps_from_coeffs(s, e1_off[1:], e2, n_index))
    amps, norm = _normalized(raw)

    cf_raw = _closed_form_amps(sp, parity, n_index)
    if cf_raw is not None:
        cf_amps, cf_norm = _normalized(_trim(cf_raw))
        keys = set(amps) | set(cf_amps)
        anchor = max(keys, key=lambda k: abs(cf_amps.get(k, 0.0)))
        flip = -1.0 if amps.get(anchor, 0.0) * cf_amps[anchor] < 0 else 1.0
        worst = max(abs(flip * amps.get(k, 0.0) - cf_amps.get(k, 0.0)) for k in keys)
        if worst > 1e-12:
            raise SolverError(
                f"recurrence state deviates from its closed form by {worst:.3e}")
        amps = {k: flip * v for k, v in amps.items()}
        norm = cf_norm
    coeffs = tuple(sorted((n, pair, a) for (n, pair), a in amps.items()))
    return ExceptionalState(exceptional_energy(params, parity, n_index),
                            parity, coeffs, norm)


def fock_subspace_check(params: ModelParams, parity: Parity,
                        state: ExceptionalState) -> float:
    """Max violation of the closed-subspace boundary rows for a finite state.

    Applies the Hamiltonian and inspects the eigenvalue-equation rows at the
    support edges: photon number 0, the top photon number N, and the leakage
    rows at N + 1. A value below 1e-14 certifies that the state closes.
    """
    n_top = state.max_photon
    trunc = n_top + 1
    h = oracle.build_hamiltonian(params, trunc).matrix
    v = state.vector(trunc)
    r = h @ v - state.energy * v
    rows = np.zeros(4 * (trunc + 1), dtype=bool)
    rows[0:4] = True
    rows[4 * n_top:4 * (n_top + 2)] = True
    return float(np.max(np.abs(r[rows])))


@dataclass(frozen=True)
class FlatLineHit:
    """One zero of the cutoff condition found along a scan line."""

    manifold: str
    params: ModelParams
    candidate: ExceptionalCandidate


def _manifold_label(sp: ModelParams, parity: Parity, n_index: int) -> str:
    s = parity.sign
    d1, d2 = sp.delta1, sp.delta2
    jx, jy, jz = sp.jx, sp.jy, sp.jz
    no_j = jx == 0.0 and jy == 0.0 and jz == 0.0
    if abs(d1 - d2) < MANIFOLD_TOL and s == (-1) ** (n_index + 1):
        return "delta1=delta2"
    if n_index == 1 and s == 1:
        if no_j and abs(d1 + d2 - 1) < MANIFOLD_TOL:
            return "delta1+delta2=omega"
        bracket = (jx + jy + 2 * jz - 1) ** 2 - (jx - jy) ** 2 - (d2 + d1) ** 2
        if abs(bracket) < MANIFOLD_TOL:
            return "xyz-even-n1"
    if n_index == 1 and s == -1:
        if no_j and abs(d1 - d2 - 1) < MANIFOLD_TOL:
            return "delta1-delta2=omega"
        if no_j and abs(d2 - d1 - 1) < MANIFOLD_TOL:
            return "delta2-delta1=omega"
        bracket = (jx - jy - 2 * jz - 1) ** 2 - (jx + jy) ** 2 - (d2 - d1) ** 2
        if abs(bracket) < MANIFOLD_TOL:
            return "xyz-odd-n1"
    if n_index == 3:
        if s == 1 and abs(jx + jy + 2 * jz - 2) < MANIFOLD_TOL:
            return "jx+jy+2jz=2omega"
        if s == -1 and abs(jx - jy - 2 * jz - 2) < MANIFOLD_TOL:
            return "jx-jy-2jz=2omega"
    return "numeric"


def scan_flat_lines(template: ModelParams, axes: Mapping[str, Sequence[float]],
                    n_max: int = 3,
                    parities: Sequence[Parity] = (Parity.PLUS, Parity.MINUS),
                    g_probe: tuple[float, float] = (0.8, 2.1),
                    cond_tol: float = CONDITION_TOL) -> list[FlatLineHit]:
    """Zeros of the cutoff condition along 1-D parameter lines, with g-probing.

    axes maps parameter names (delta1, delta2, jx, jy, jz) to grids; the last
    axis is the bisection line, the others span an outer grid. Each zero found
    at coupling g_probe[0] is re-evaluated at g_probe[1]; hits whose condition
    vanishes at both couplings are flagged g_independent, the rest are the
    fine-tuned kind that exists at one coupling only.
    """
    if template.scaled().gprime != 0.0:
        raise RequiresEqualCouplings("flat-line scan needs g1 == g2")
    for name in axes:
        if name not in _SCAN_AXES:
            raise ValueError(f"cannot scan axis {name!r}")
    if len(axes) == 0:
        raise ValueError("need at least one scan axis")
    names = list(axes)
    line_axis = names[-1]
    line = np.asarray(axes[line_axis], dtype=float)
    if line.size < 2:
        raise ValueError("scan line needs at least two points")
    outer_names = names[:-1]
    outer_grids = [np.asarray(axes[k], dtype=float) for k in outer_names]
    ga, gb = g_probe

    def cond_at(point: ModelParams, g_tot: float, parity: Parity, n: int) -> float:
        return condition(point.with_g(g_tot), parity, n)

    hits: list[FlatLineHit] = []
    outer_points = [()] if not outer_names else list(np.stack(
        np.meshgrid(*outer_grids, indexing="ij"), axis=-1).reshape(-1, len(outer_names)))
    for combo in outer_points:
        base = template
        for name, value in zip(outer_names, combo):
            base = replace(base, **{name: float(value)})
        for parity in parities:
            for n in range(n_max + 1):
                vals = np.full(line.size, np.nan)
                for i, x in enumerate(line):
                    try:
                        vals[i] = cond_at(replace(base, **{line_axis: float(x)}),
                                          ga, parity, n)
                    except DegenerateDenominator:
                        continue
                roots: list[float] = []
                for i in range(line.size):
                    if vals[i] == 0.0:
                        roots.append(float(line[i]))
                for i in range(line.size - 1):
                    va, vb = vals[i], vals[i + 1]
                    if not (np.isfinite(va) and np.isfinite(vb)):
                        continue
                    if va == 0.0 or vb == 0.0 or (va > 0) == (vb > 0):
                        continue
                    xa, xb = float(line[i]), float(line[i + 1])
                    fa = va
                    while xb - xa > 1e-14 * max(1.0, abs(xa), abs(xb)):
                        xm = 0.5 * (xa + xb)
                        fm = cond_at(replace(base, **{line_axis: xm}), ga, parity, n)
                        if fm == 0.0:
                            xa = xb = xm
                            break
                        if (fm > 0) == (fa > 0):
                            xa, fa = xm, fm
                        else:
                            xb = xm
                    roots.append(0.5 * (xa + xb))
                for x in roots:
                    point = replace(base, **{line_axis: x})
                    cond_a = cond_at(point, ga, parity, n)
                    if abs(cond_a) >= cond_tol:
                        continue
                    try:
                        cond_b = cond_at(point, gb, parity, n)
                    except DegenerateDenominator:
                        cond_b = math.inf
                    cand = ExceptionalCandidate(
                        n, parity, exceptional_energy(point, parity, n),
                        cond_a, abs(cond_b) < cond_tol)
                    hits.append(FlatLineHit(
                        _manifold_label(point.scaled(), parity, n), point, cand))
    return hits


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_catalog_csv(hits: Sequence[FlatLineHit], path_or_file,
                      comments: Sequence[str] = (),
                      states: Optional[Sequence[Optional[ExceptionalState]]] = None,
                      sidecar_path=None) -> None:
    """Catalog CSV of scan hits, with an optional sidecar CSV of state amplitudes."""
    close = False
    if hasattr(path_or_file, "write"):
        fh = path_or_file
    else:
        fh = open(path_or_file, "w")
        close = True
    try:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("N,parity,energy,condition_value,g_independent,manifold_label,"
                 "delta1,delta2,jx,jy,jz\n")
        for h in hits:
            c = h.candidate
            fh.write(",".join([
                str(c.n_index), str(c.parity.sign), _fmt(c.energy),
                _fmt(c.condition_value), str(c.g_independent).lower(), h.manifold,
                _fmt(h.params.delta1), _fmt(h.params.delta2),
                _fmt(h.params.jx), _fmt(h.params.jy), _fmt(h.params.jz)]) + "\n")
    finally:
        if close:
            fh.close()
    if states is not None and sidecar_path is not None:
        with open(sidecar_path, "w") as sc:
            sc.write("hit,n,s1s2,amplitude\n")
            for i, st in enumerate(states):
                if st is None:
                    continue
                for n, pair, amp in st.coeffs:
                    sc.write(f"{i},{n},{pair},{_fmt(amp)}\n")
