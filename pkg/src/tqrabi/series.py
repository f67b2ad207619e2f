"""Displaced-basis power series for the sector wavefunctions.

The four coupled first-order equations of each parity sector are solved by
power series around the centers alpha in {0, g', g} (g = g1+g2, g' = g1-g2).
Around alpha = g the third component carries a vanishing leading coefficient
and is slaved to the others through a division by (E - n + g^2 - Jx); around
alpha = g' the fourth component divides by (E - n + g'^2 + Jx); around
alpha = 0 the reflection z -> -z ties components 3, 4 to 1, 2. Those divisors
are exactly the baseline energies where the matching determinant has poles.

Coefficients are stored in radius units: coeffs[n] = c_n * R^n, so the series
reads sum_n coeffs[n] * t^n with t = (z - alpha)/R, |t| < 1. This keeps the
tables inside double range even for extreme couplings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    ModelParams,
    NoConvergence,
    OutsideDisk,
    Parity,
    PoleAtBaseline,
)

__all__ = [
    "ExpansionBlock",
    "SeriesPoint",
    "recur",
    "evaluate",
    "sample",
    "convergence_radius",
    "free_slots",
    "dump_coeffs",
    "DEFAULT_N_MAX",
    "HARD_CAP",
]

POLE_EPS = 1e-12        # |divisor| below this means E sits on a baseline
TAIL_RTOL = 1e-14       # relative size of the last term accepted as converged
DEFAULT_N_MAX = 160
HARD_CAP = 512

_CENTER_ZERO = "zero"
_CENTER_GPRIME = "gprime"
_CENTER_G = "g"


def _center_tag(sp: ModelParams, center: float) -> tuple[str, float]:
    scale = max(1.0, sp.g)
    if abs(center) <= 1e-12 * scale:
        return _CENTER_ZERO, 0.0
    if abs(center - sp.gprime) <= 1e-12 * scale:
        return _CENTER_GPRIME, sp.gprime
    if abs(center - sp.g) <= 1e-12 * scale:
        return _CENTER_G, sp.g
    raise ValueError(f"center must be one of 0, g'={sp.gprime}, g={sp.g}; got {center}")


def _radius(sp: ModelParams, tag: str) -> float:
    gp = sp.gprime
    if tag == _CENTER_ZERO:
        return gp if gp > 0 else sp.g
    if tag == _CENTER_GPRIME:
        return min(2 * gp, sp.g - gp)
    return sp.g - gp if gp > 0 else sp.g


def convergence_radius(params: ModelParams, center: float) -> float:
    """Distance from a series center to the nearest singular point (omega = 1 units)."""
    sp = params.scaled()
    tag, _ = _center_tag(sp, center)
    return _radius(sp, tag)


def free_slots(params: ModelParams, center: float) -> tuple[int, ...]:
    """Zero-based component indices whose leading coefficients are free at this center."""
    sp = params.scaled()
    tag, _ = _center_tag(sp, center)
    if tag == _CENTER_ZERO:
        return (0,) if sp.gprime == 0 else (0, 1)
    if tag == _CENTER_GPRIME:
        return (0, 1, 2)
    return (0, 1, 3)


def _tables(sp: ModelParams, sign: int, energies: np.ndarray, tag: str, center: float,
            inits: np.ndarray, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Scaled coefficient tables u[n, j, col, e]; pole_ok marks energies off baselines.

    inits has shape (4, ncols); entries on non-free slots are ignored.
    """
    g, gp = sp.g, sp.gprime
    d1, d2 = sp.delta1, sp.delta2
    jx, jy, jz = sp.jx, sp.jy, sp.jz
    s = float(sign)
    c = center
    radius = _radius(sp, tag)
    ncols = inits.shape[1]
    n_e = energies.size

    pref = (c + g, c + gp, c - g, c - gp)
    aoff = (-2 * c * g - jx, -2 * c * gp + jx, 2 * c * g - jx, 2 * c * gp + jx)
    base = energies - c * c

    u = np.zeros((n_max + 1, 4, ncols, n_e))
    ok = np.ones(n_e, dtype=bool)
    cur = np.broadcast_to(inits[:, :, None], (4, ncols, n_e)).copy()
    prev = np.zeros_like(cur)

    if tag == _CENTER_ZERO and gp > 0:
        cur[2] = cur[0]
        cur[3] = cur[1]
        active = (0, 1, 2, 3)
    elif tag == _CENTER_ZERO:
        active = (0,)
    elif tag == _CENTER_GPRIME:
        active = (0, 1, 2)
    else:
        active = (0, 1, 3)

    for n in range(n_max + 1):
        sig = -1.0 if n % 2 else 1.0
        if tag == _CENTER_G:
            den = base - n + 2 * g * g - jx
            bad = np.abs(den) < POLE_EPS
            ok &= ~bad
            den = np.where(bad, 1.0, den)
            cur[2] = (d2 * cur[3] + s * d1 * cur[1] + s * (jz - jy) * cur[0]) / den
        elif tag == _CENTER_GPRIME:
            den = base - n + 2 * gp * gp + jx
            bad = np.abs(den) < POLE_EPS
            ok &= ~bad
            den = np.where(bad, 1.0, den)
            cur[3] = (d2 * cur[2] + s * d1 * cur[0] + s * (jy + jz) * cur[1]) / den
        elif gp == 0:  # center zero with identical couplings
            den = base - n + jx - s * sig * (jy + jz)
            bad = np.abs(den) < POLE_EPS
            ok &= ~bad
            den = np.where(bad, 1.0, den)
            cur[1] = (d2 + s * sig * d1) * cur[0] / den
            cur[2] = sig * cur[0]
            cur[3] = sig * cur[1]
        u[n] = cur
        if n == n_max:
            break
        cross = (
            -d2 * cur[1] - s * d1 * cur[3] - s * (jz - jy) * cur[2],
            -d2 * cur[0] - s * d1 * cur[2] - s * (jy + jz) * cur[3],
            -d2 * cur[3] - s * d1 * cur[1] - s * (jz - jy) * cur[0],
            -d2 * cur[2] - s * d1 * cur[0] - s * (jy + jz) * cur[1],
        )
        nxt = np.zeros_like(cur)
        for j in active:
            a = base - n + aoff[j]
            nxt[j] = ((a * cur[j] + cross[j]) * (radius / ((n + 1) * pref[j]))
                      - (radius * radius / (n + 1)) * prev[j])
        prev, cur = cur, nxt
    return u, ok


def _kahan_eval(u: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Compensated sum over n of u[n] * t^n; returns (sums, tail_max per energy)."""
    sums = np.zeros_like(u[0])
    comp = np.zeros_like(sums)
    tpow = 1.0
    tail = np.zeros(u.shape[-1])
    for n in range(u.shape[0]):
        term = u[n] * tpow
        y = term - comp
        tmp = sums + y
        comp = (tmp - sums) - y
        sums = tmp
        tpow *= t
        if n >= u.shape[0] - 2:
            tail = np.maximum(tail, np.max(np.abs(term), axis=(0, 1)))
    return sums, tail


@dataclass(frozen=True)
class ExpansionBlock:
    """One series expansion: scaled coefficient table plus its regeneration recipe.

    coeffs[n, j] = c_{j,n} * radius^n; evaluate() sums coeffs[n] * t^n with
    t = (z - center)/radius and multiplies by exp(center*z). params and energy
    are stored in omega = 1 units.
    """

    center: float
    parity: Parity
    basis_tag: int
    coeffs: np.ndarray
    n_max: int
    radius: float
    params: ModelParams
    energy: float
    init: tuple[float, float, float, float]


def recur(params: ModelParams, parity: Parity, energy: float, center: float,
          init: tuple[float, float, float, float],
          n_max: int = DEFAULT_N_MAX) -> ExpansionBlock:
    """Coefficient table around one center; only the free init slots are honoured.

    energy and center are interpreted in units of the photon frequency.
    Raises PoleAtBaseline when a slaving divisor falls below 1e-12 anywhere in
    the table.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    sp = params.scaled()
    tag, cval = _center_tag(sp, center)
    slots = free_slots(params, center)
    iv = np.zeros((4, 1))
    for j in slots:
        iv[j, 0] = init[j]
    u, ok = _tables(sp, parity.sign, np.array([energy], dtype=float), tag, cval,
                    iv, n_max)
    if not ok[0]:
        raise PoleAtBaseline(
            f"energy {energy} sits on a baseline of the center-{center} recurrence")
    tagged = next((j + 1 for j in slots if init[j] == 1.0
                   and all(init[k] == 0.0 for k in slots if k != j)), 0)
    return ExpansionBlock(cval, parity, tagged, u[:, :, 0, 0], n_max,
                          _radius(sp, tag), sp, float(energy),
                          tuple(float(x) for x in init))


def evaluate(block: ExpansionBlock, z: float) -> np.ndarray:
    """Four component values at z (omega = 1 units), with adaptive truncation.

    The summation stops once two consecutive terms drop below 1e-14 of the
    largest running component sum; the table is regenerated at doubled order
    (up to the hard cap of 512) if the tail has not converged.
    """
    blk = block
    while True:
        dz = z - blk.center
        if abs(dz) >= blk.radius:
            raise OutsideDisk(
                f"|z - {blk.center}| = {abs(dz)} >= radius {blk.radius}")
        t = dz / blk.radius
        sums = np.zeros(4)
        comp = np.zeros(4)
        tpow = 1.0
        small_prev = False
        converged = False
        for n in range(blk.n_max + 1):
            term = blk.coeffs[n] * tpow
            y = term - comp
            tmp = sums + y
            comp = (tmp - sums) - y
            sums = tmp
            tpow *= t
            scale = max(float(np.max(np.abs(sums))), 1e-300)
            small = float(np.max(np.abs(term))) <= TAIL_RTOL * scale
            if n >= 4 and small and small_prev:
                converged = True
                break
            small_prev = small
        if converged:
            return sums * math.exp(blk.center * z)
        if blk.n_max >= HARD_CAP:
            raise NoConvergence(
                f"series tail above tolerance at hard cap {HARD_CAP} (z = {z})")
        blk = recur(blk.params, blk.parity, blk.energy, blk.center, blk.init,
                    min(2 * blk.n_max, HARD_CAP))


@dataclass(frozen=True)
class SeriesPoint:
    """Cached evaluation of all four components at one point."""

    z: float
    values: tuple[float, float, float, float]


def sample(block: ExpansionBlock, zs) -> list[SeriesPoint]:
    """Evaluate a block at several points, caching repeated coordinates."""
    cache: dict[float, SeriesPoint] = {}
    out = []
    for z in zs:
        z = float(z)
        if z not in cache:
            cache[z] = SeriesPoint(z, tuple(float(v) for v in evaluate(block, z)))
        out.append(cache[z])
    return out


def dump_coeffs(block: ExpansionBlock, path) -> None:
    """Debug CSV of the raw coefficients c_{j,n}: columns n, c1, c2, c3, c4."""
    with open(path, "w") as fh:
        fh.write("n,c1,c2,c3,c4\n")
        with np.errstate(over="ignore"):
            scale = 1.0
            for n in range(block.n_max + 1):
                row = block.coeffs[n] * scale
                fh.write(",".join([str(n)] + [format(v, ".17g") for v in row]) + "\n")
                scale /= block.radius
