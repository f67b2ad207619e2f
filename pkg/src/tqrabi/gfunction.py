"""Analyticity-matching determinant G(E) and eigenvalue search between baselines.

The series expansions around the admissible centers must describe one entire
function, which forces their values to agree at points inside overlapping
convergence disks. Stacking those conditions over the free leading
coefficients gives a square matrix whose determinant G(E) vanishes exactly at
the regular eigenvalues of the chosen parity sector. Three topologies cover
the coupling asymmetry: an 8x8 system for g' >= g/2 (centers 0, g', g with
two matching points), a 6x6 reduction for 0 < g' < g/2 (the center-0 block is
eliminated through the reflection constraint at z = 0), and a 4x4 system for
g' = 0 (centers 0 and g only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import oracle, series
from .model import (
    Baseline,
    ModelParams,
    NoConvergence,
    OutsideDisk,
    Parity,
    PoleAtBaseline,
    SchemeMismatch,
    SpectrumRecord,
    SpectrumResult,
    baselines,
)
from .series import _CENTER_G, _CENTER_GPRIME, _CENTER_ZERO, _radius, _tables

__all__ = [
    "MatchingScheme",
    "GTrace",
    "default_scheme",
    "gvalue",
    "find_roots",
    "trace",
    "write_spectrum_csv",
    "write_trace_csv",
    "DEFAULT_GRID_STEP",
    "POLE_MARGIN",
]

DEFAULT_GRID_STEP = 0.01
POLE_MARGIN = 1e-6
ROOT_TOL = 1e-10
VERIFY_TOL = 1e-6
DEFAULT_VERIFY_TRUNCATION = 300
TANGENT_GTOL = 1e-10


@dataclass(frozen=True)
class MatchingScheme:
    """Matching topology and the points where expansions are compared.

    z0 joins the disks around g' and g (around 0 and g when g' = 0); z0prime
    joins the disks around 0 and g' and is only used by the full 8x8 system.
    Points are in omega = 1 units like the couplings themselves.
    """

    topology: str
    z0: float
    z0prime: Optional[float] = None

    @property
    def basis_columns(self) -> dict[float | str, tuple[int, ...]]:
        """Free-initial-condition slots spanning each expansion, keyed by center."""
        if self.topology == "full8":
            return {"g": (0, 1, 3), "gprime": (0, 1, 2), "zero": (0, 1)}
        if self.topology == "reduced6":
            return {"g": (0, 1, 3), "gprime": (0, 1, 2)}
        return {"g": (0, 1, 3), "zero": (0,)}


def default_scheme(params: ModelParams) -> MatchingScheme:
    """Topology by asymmetry, with matching points balanced between the two disks.

    full8 for g' >= g/2 reproduces z0 = (g' + g)/2 and z0' = g'^2/g; reduced6
    keeps z0' = 0; reduced4 (g' = 0) uses z0 = g/2.
    """
    sp, _ = params.scaled().canonical()
    g, gp = sp.g, sp.gprime
    if gp == 0:
        return MatchingScheme("reduced4", g / 2)
    r2 = _radius(sp, _CENTER_GPRIME)
    r4 = _radius(sp, _CENTER_G)
    z0 = (gp * r4 + g * r2) / (r2 + r4)
    if gp >= g / 2:
        return MatchingScheme("full8", z0, gp * gp / g)
    return MatchingScheme("reduced6", z0, 0.0)


def _validate_scheme(sp: ModelParams, scheme: MatchingScheme) -> None:
    g, gp = sp.g, sp.gprime

    def inside(z: float, center: float, tag: str) -> None:
        if abs(z - center) >= _radius(sp, tag):
            raise OutsideDisk(
                f"matching point {z} outside the disk around {center}")

    if scheme.topology == "full8":
        if gp <= 0:
            raise SchemeMismatch("full8 needs g' > 0")
        if scheme.z0prime is None:
            raise SchemeMismatch("full8 needs z0prime")
        inside(scheme.z0, gp, _CENTER_GPRIME)
        inside(scheme.z0, g, _CENTER_G)
        inside(scheme.z0prime, 0.0, _CENTER_ZERO)
        inside(scheme.z0prime, gp, _CENTER_GPRIME)
    elif scheme.topology == "reduced6":
        if not 0 < gp < g / 2:
            raise SchemeMismatch("reduced6 needs 0 < g' < g/2")
        if scheme.z0prime not in (None, 0.0):
            raise SchemeMismatch("reduced6 matches the center-0 block at z = 0")
        inside(scheme.z0, gp, _CENTER_GPRIME)
        inside(scheme.z0, g, _CENTER_G)
    elif scheme.topology == "reduced4":
        if gp != 0:
            raise SchemeMismatch("reduced4 needs g' = 0")
        inside(scheme.z0, 0.0, _CENTER_ZERO)
        inside(scheme.z0, g, _CENTER_G)
    else:
        raise SchemeMismatch(f"unknown topology {scheme.topology!r}")


def _block_eval(sp: ModelParams, sign: int, energies: np.ndarray, tag: str,
                center: float, slots: Sequence[int], zpoints: Sequence[float],
                n_max: int) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Basis-column values at zpoints: list over z of (4, ncols, nE) arrays."""
    inits = np.zeros((4, len(slots)))
    for col, j in enumerate(slots):
        inits[j, col] = 1.0
    u, pole_ok = _tables(sp, sign, energies, tag, center, inits, n_max)
    radius = _radius(sp, tag)
    vals = []
    conv = np.ones(energies.size, dtype=bool)
    for z in zpoints:
        t = (z - center) / radius
        if abs(t) >= 1.0:
            raise OutsideDisk(f"matching point {z} outside disk around {center}")
        sums, tail = series._kahan_eval(u, t)
        scale = np.maximum(np.max(np.abs(sums), axis=(0, 1)), 1e-300)
        conv &= tail <= series.TAIL_RTOL * scale
        vals.append(sums * math.exp(center * z))
    return vals, pole_ok, conv


def _slots(tag: str, gp: float) -> tuple[int, ...]:
    if tag == _CENTER_ZERO:
        return (0,) if gp == 0 else (0, 1)
    if tag == _CENTER_GPRIME:
        return (0, 1, 2)
    return (0, 1, 3)


def _gvalues_once(sp: ModelParams, sign: int, energies: np.ndarray,
                  scheme: MatchingScheme, n_max: int,
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized determinant on an energy grid; masks for poles and convergence."""
    g, gp = sp.g, sp.gprime
    n_e = energies.size
    if scheme.topology == "full8":
        z0, z0p = scheme.z0, scheme.z0prime
        vg, okg, cg = _block_eval(sp, sign, energies, _CENTER_G, g,
                                  _slots(_CENTER_G, gp), [z0], n_max)
        vp, okp, cp = _block_eval(sp, sign, energies, _CENTER_GPRIME, gp,
                                  _slots(_CENTER_GPRIME, gp), [z0, z0p], n_max)
        vz, okz, cz = _block_eval(sp, sign, energies, _CENTER_ZERO, 0.0,
                                  _slots(_CENTER_ZERO, gp), [z0p], n_max)
        pole_ok = okg & okp & okz
        conv = cg & cp & cz
        m = np.zeros((n_e, 8, 8))
        m[:, 0:4, 0:3] = np.moveaxis(vg[0], -1, 0)
        m[:, 0:4, 3:6] = -np.moveaxis(vp[0], -1, 0)
        m[:, 4:8, 3:6] = np.moveaxis(vp[1], -1, 0)
        m[:, 4:8, 6:8] = -np.moveaxis(vz[0], -1, 0)
    elif scheme.topology == "reduced6":
        z0 = scheme.z0
        vg, okg, cg = _block_eval(sp, sign, energies, _CENTER_G, g,
                                  _slots(_CENTER_G, gp), [z0], n_max)
        vp, okp, cp = _block_eval(sp, sign, energies, _CENTER_GPRIME, gp,
                                  _slots(_CENTER_GPRIME, gp), [z0, 0.0], n_max)
        pole_ok = okg & okp
        conv = cg & cp
        m = np.zeros((n_e, 6, 6))
        m[:, 0:4, 0:3] = np.moveaxis(vg[0], -1, 0)
        m[:, 0:4, 3:6] = -np.moveaxis(vp[0], -1, 0)
        # Reflection constraint of the eliminated center-0 block.
        m[:, 4, 3:6] = np.moveaxis(vp[1][2] - vp[1][0], -1, 0)
        m[:, 5, 3:6] = np.moveaxis(vp[1][3] - vp[1][1], -1, 0)
    else:
        z0 = scheme.z0
        vg, okg, cg = _block_eval(sp, sign, energies, _CENTER_G, g,
                                  _slots(_CENTER_G, gp), [z0], n_max)
        vz, okz, cz = _block_eval(sp, sign, energies, _CENTER_ZERO, 0.0,
                                  _slots(_CENTER_ZERO, gp), [z0], n_max)
        pole_ok = okg & okz
        conv = cg & cz
        m = np.zeros((n_e, 4, 4))
        m[:, 0:4, 0:3] = np.moveaxis(vg[0], -1, 0)
        m[:, 0:4, 3] = -np.moveaxis(vz[0][:, 0, :], -1, 0)
    # Columns are scaled to unit max-norm; the discarded factors are positive,
    # so zeros and signs of the determinant are preserved.
    colmax = np.maximum(np.max(np.abs(m), axis=1, keepdims=True), 1e-300)
    with np.errstate(invalid="ignore"):
        vals = np.linalg.det(m / colmax)
    return vals, pole_ok, conv


def _gvalues(sp: ModelParams, sign: int, energies: np.ndarray,
             scheme: MatchingScheme,
             n_max_start: int = series.DEFAULT_N_MAX,
             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Adaptive-order determinant evaluation; unconverged entries come back NaN."""
    out = np.full(energies.shape, np.nan)
    pole_ok = np.ones(energies.shape, dtype=bool)
    conv_ok = np.zeros(energies.shape, dtype=bool)
    todo = np.arange(energies.size)
    n_max = min(n_max_start, series.HARD_CAP)
    while todo.size:
        vals, pok, cok = _gvalues_once(sp, sign, energies[todo], scheme, n_max)
        pole_ok[todo] &= pok
        done = cok | ~pok
        sel = todo[done]
        out[sel] = np.where(pok[done], vals[done], np.nan)
        conv_ok[sel] = cok[done] & pok[done]
        todo = todo[~done]
        if n_max >= series.HARD_CAP:
            break
        n_max = min(2 * n_max, series.HARD_CAP)
    return out, pole_ok, conv_ok


def _prepare(params: ModelParams, scheme: Optional[MatchingScheme],
             ) -> tuple[ModelParams, MatchingScheme]:
    params.require_analytic()
    sp, _ = params.scaled().canonical()
    if scheme is None:
        scheme = default_scheme(sp)
    _validate_scheme(sp, scheme)
    return sp, scheme


def gvalue(params: ModelParams, parity: Parity, energy: float,
           scheme: Optional[MatchingScheme] = None,
           n_max: int = series.DEFAULT_N_MAX) -> float:
    """Matching determinant at one energy (in the caller's units).

    Raises PoleAtBaseline within 1e-6 of a baseline, NoConvergence if the
    series tails stay above tolerance at the hard truncation cap.
    """
    sp, scheme = _prepare(params, scheme)
    e = energy / params.omega
    for b in baselines(sp, e - 1.0, e + 1.0):
        if abs(b.energy - e) < POLE_MARGIN:
            raise PoleAtBaseline(f"energy {energy} within {POLE_MARGIN} of a baseline")
    vals, pole_ok, conv_ok = _gvalues(sp, parity.sign, np.array([e]), scheme, n_max)
    if not pole_ok[0]:
        raise PoleAtBaseline(f"energy {energy} hits a recurrence pole")
    if not conv_ok[0]:
        raise NoConvergence("series tail above tolerance at the hard cap")
    return float(vals[0])


@dataclass(frozen=True)
class GTrace:
    """Determinant sampled on a uniform grid, NaN inside baseline pole margins."""

    parity: Parity
    energies: np.ndarray
    values: np.ndarray
    poles: tuple[Baseline, ...]


def trace(params: ModelParams, parity: Parity, e_min: float, e_max: float,
          step: Optional[float] = None,
          n_max: int = series.DEFAULT_N_MAX) -> GTrace:
    """Sample the determinant across [e_min, e_max] for plotting or CSV export.

    step defaults to 0.01 in units of the photon frequency.
    """
    if step is None:
        step = DEFAULT_GRID_STEP * params.omega
    if step <= 0:
        raise ValueError("step must be positive")
    if not e_min < e_max:
        raise ValueError("empty energy window")
    sp, scheme = _prepare(params, None)
    w = params.omega
    lo, hi, h = e_min / w, e_max / w, step / w
    grid = np.arange(lo, hi + h / 2, h)
    poles = baselines(sp, lo - 1.0, hi + 1.0)
    mask = np.ones(grid.shape, dtype=bool)
    for b in poles:
        mask &= np.abs(grid - b.energy) >= POLE_MARGIN
    vals = np.full(grid.shape, np.nan)
    if mask.any():
        got, _, _ = _gvalues(sp, parity.sign, grid[mask], scheme, n_max)
        vals[mask] = got
    inwin = tuple(b for b in poles if lo <= b.energy <= hi)
    return GTrace(parity, grid * w,
                  vals, tuple(Baseline(b.kind, b.index, b.energy * w) for b in inwin))


def _refine_brackets(sp: ModelParams, sign: int, scheme: MatchingScheme,
                     lo: np.ndarray, hi: np.ndarray, flo: np.ndarray,
                     tol: float, n_max: int) -> np.ndarray:
    lo = lo.astype(float)
    hi = hi.astype(float)
    flo = flo.copy()
    for _ in range(64):
        if not lo.size or np.max(hi - lo) <= 2 * tol:
            break
        mid = 0.5 * (lo + hi)
        fmid, _, _ = _gvalues(sp, sign, mid, scheme, n_max)
        bad = ~np.isfinite(fmid)
        take_lo = (np.sign(fmid) == np.sign(flo)) & ~bad
        lo = np.where(take_lo, mid, lo)
        flo = np.where(take_lo, fmid, flo)
        hi = np.where(take_lo | bad, hi, mid)
    return 0.5 * (lo + hi)


def find_roots(params: ModelParams, parity: Parity, e_min: float, e_max: float,
               step: Optional[float] = None,
               scheme: Optional[MatchingScheme] = None,
               verify: bool = True,
               verify_truncation: int = DEFAULT_VERIFY_TRUNCATION,
               n_max: int = series.DEFAULT_N_MAX) -> SpectrumResult:
    """Zeros of the matching determinant in [e_min, e_max] for one parity sector.

    The window is partitioned at the baselines; each open interval is scanned
    on a uniform grid (step defaults to 0.01 in units of the photon
    frequency), sign changes are bisected to 1e-10, and dips of |G| inside one
    grid cell are probed for root pairs. With verify=True every root is
    checked against the diagonalization oracle (nearest same-parity level
    within 1e-6); unmatched roots are kept but flagged unverified. Exceptional
    eigenvalues sitting exactly on baselines are out of reach here by
    construction.
    """
    if not e_min < e_max:
        raise ValueError("empty energy window")
    if step is None:
        step = DEFAULT_GRID_STEP * params.omega
    if step <= 0:
        raise ValueError("step must be positive")
    sp, scheme = _prepare(params, scheme)
    w = params.omega
    lo_w, hi_w, h = e_min / w, e_max / w, step / w

    cuts = [lo_w, hi_w]
    cuts += [b.energy for b in baselines(sp, lo_w, hi_w)]
    cuts = sorted(set(cuts))
    roots: list[float] = []
    tangents: list[float] = []
    sign = parity.sign
    for a, b in zip(cuts[:-1], cuts[1:]):
        a += POLE_MARGIN
        b -= POLE_MARGIN
        if b - a <= h * 1e-6:
            continue
        npts = max(2, int(round((b - a) / h)) + 1)
        xs = np.linspace(a, b, npts)
        gs, _, _ = _gvalues(sp, sign, xs, scheme, n_max)
        finite = np.isfinite(gs)
        blo, bhi, bflo = [], [], []
        for i in range(npts - 1):
            if not (finite[i] and finite[i + 1]):
                continue
            if gs[i] == 0.0:
                roots.append(float(xs[i]))
                continue
            if np.sign(gs[i]) != np.sign(gs[i + 1]) and gs[i + 1] != 0.0:
                blo.append(xs[i])
                bhi.append(xs[i + 1])
                bflo.append(gs[i])
        if gs[-1] == 0.0:
            roots.append(float(xs[-1]))
        if blo:
            refined = _refine_brackets(sp, sign, scheme, np.array(blo),
                                       np.array(bhi), np.array(bflo), ROOT_TOL,
                                       n_max)
            roots.extend(float(x) for x in refined)
        # |G| dips without a sign change: either two roots inside one cell or
        # a tangency (even multiplicity).
        for i in range(1, npts - 1):
            if not (finite[i - 1] and finite[i] and finite[i + 1]):
                continue
            if np.sign(gs[i - 1]) != np.sign(gs[i + 1]):
                continue
            if not (abs(gs[i]) < abs(gs[i - 1]) and abs(gs[i]) < abs(gs[i + 1])):
                continue
            xa, xb = xs[i - 1], xs[i + 1]
            for _ in range(48):
                m1 = xa + (xb - xa) / 3
                m2 = xb - (xb - xa) / 3
                f12, _, _ = _gvalues(sp, sign, np.array([m1, m2]), scheme, n_max)
                if not np.all(np.isfinite(f12)):
                    break
                if abs(f12[0]) < abs(f12[1]):
                    xb = m2
                else:
                    xa = m1
            xstar = 0.5 * (xa + xb)
            fstar, _, _ = _gvalues(sp, sign, np.array([xstar]), scheme, n_max)
            if not np.isfinite(fstar[0]):
                continue
            if np.sign(fstar[0]) != np.sign(gs[i - 1]) and fstar[0] != 0.0:
                pair = _refine_brackets(
                    sp, sign, scheme,
                    np.array([xs[i - 1], xstar]), np.array([xstar, xs[i + 1]]),
                    np.array([gs[i - 1], fstar[0]]), ROOT_TOL, n_max)
                roots.extend(float(x) for x in pair)
            elif abs(fstar[0]) < TANGENT_GTOL:
                tangents.append(float(xstar))

    roots.sort()
    dedup: list[float] = []
    for x in roots:
        if not dedup or x - dedup[-1] > 1e-9:
            dedup.append(x)

    ed_levels = None
    if verify:
        evals, parities, _, _ = _verified_levels(params, hi_w * w, verify_truncation)
        ed_levels = evals[parities == sign]

    records = []
    for x in dedup:
        e_raw = x * w
        if ed_levels is not None and ed_levels.size:
            dist = float(np.min(np.abs(ed_levels - e_raw)))
            records.append(SpectrumRecord(e_raw, parity, "gfunction", dist,
                                          verified=dist < VERIFY_TOL * w))
        else:
            gmag, _, _ = _gvalues(sp, sign, np.array([x]), scheme, n_max)
            records.append(SpectrumRecord(e_raw, parity, "gfunction",
                                          float(abs(gmag[0])), verified=None))
    for x in tangents:
        if any(abs(x - r) <= 1e-9 for r in dedup):
            continue
        e_raw = x * w
        if ed_levels is not None and ed_levels.size:
            dist = float(np.min(np.abs(ed_levels - e_raw)))
            if dist < VERIFY_TOL * w:
                records.append(SpectrumRecord(e_raw, parity, "gfunction", dist,
                                              verified=True))
        else:
            gmag, _, _ = _gvalues(sp, sign, np.array([x]), scheme, n_max)
            if abs(gmag[0]) < 1e-12:
                records.append(SpectrumRecord(e_raw, parity, "gfunction",
                                              float(abs(gmag[0])), verified=None))
    result = SpectrumResult.from_records(records)
    relabeled = [SpectrumRecord(r.energy, r.parity, r.method, r.residual, i,
                                r.verified) for i, r in enumerate(result)]
    return SpectrumResult(tuple(relabeled))


def _verified_levels(params: ModelParams, emax: float, truncation: int,
                     ) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    evals, _ = oracle._eig(params, truncation)
    k = int(np.searchsorted(evals, emax + 0.5)) + 4
    return oracle.certified_spectrum(params, truncation, min(k, evals.size))


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_spectrum_csv(records, path_or_file, comments: Sequence[str] = ()) -> None:
    """Spectrum CSV: columns E, parity, method, residual."""
    close = False
    if hasattr(path_or_file, "write"):
        fh = path_or_file
    else:
        fh = open(path_or_file, "w")
        close = True
    try:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("E,parity,method,residual\n")
        for r in records:
            fh.write(f"{_fmt(r.energy)},{r.parity.sign},{r.method},{_fmt(r.residual)}\n")
    finally:
        if close:
            fh.close()


def write_trace_csv(traces: Sequence[GTrace], path_or_file,
                    comments: Sequence[str] = ()) -> None:
    """Trace CSV: columns E, G_plus, G_minus with empty cells in pole margins."""
    by_parity = {t.parity: t for t in traces}
    grid = next(iter(by_parity.values())).energies
    for t in by_parity.values():
        if t.energies.shape != grid.shape or not np.allclose(t.energies, grid):
            raise ValueError("traces must share one energy grid")
    close = False
    if hasattr(path_or_file, "write"):
        fh = path_or_file
    else:
        fh = open(path_or_file, "w")
        close = True
    try:
        for line in comments:
            fh.write(f"# {line}\n")
        poles = next(iter(by_parity.values())).poles
        if poles:
            fh.write("# baselines: " + " ".join(
                f"{b.kind}:{b.index}@{_fmt(b.energy)}" for b in poles) + "\n")
        fh.write("E,G_plus,G_minus\n")
        for i, e in enumerate(grid):
            cells = [_fmt(float(e))]
            for par in (Parity.PLUS, Parity.MINUS):
                t = by_parity.get(par)
                if t is None or not np.isfinite(t.values[i]):
                    cells.append("")
                else:
                    cells.append(_fmt(float(t.values[i])))
            fh.write(",".join(cells) + "\n")
    finally:
        if close:
            fh.close()
