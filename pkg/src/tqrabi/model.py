"""Shared domain types: model parameters, parity sectors, baselines, spectrum records."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

__all__ = [
    "Parity",
    "ModelParams",
    "Baseline",
    "SpectrumRecord",
    "SpectrumResult",
    "baselines",
    "load_params",
    "QUBIT_PAIRS",
    "SolverError",
    "ConfigError",
    "RequiresValidCouplings",
    "RequiresEqualCouplings",
    "PoleAtBaseline",
    "OutsideDisk",
    "NoConvergence",
    "SchemeMismatch",
    "DegenerateDenominator",
    "ConditionNotMet",
    "SupportOverflow",
    "NotConverged",
]

# Qubit-pair basis order used everywhere (photon number is the major index).
QUBIT_PAIRS = ("ee", "eg", "ge", "gg")

BASELINE_DEDUP_TOL = 1e-12


class SolverError(Exception):
    """Base class for all solver-specific failures."""


class ConfigError(SolverError):
    """Malformed or incomplete parameter file."""


class RequiresValidCouplings(SolverError):
    """The series solver needs g1 > 0 and g2 > 0 (|g1 - g2| < g1 + g2)."""


class RequiresEqualCouplings(SolverError):
    """Cutoff conditions are only defined for identical couplings g1 = g2."""


class PoleAtBaseline(SolverError):
    """The requested energy sits on a baseline where a recurrence divisor vanishes."""


class OutsideDisk(SolverError):
    """Evaluation point outside the convergence disk of a series expansion."""


class NoConvergence(SolverError):
    """Series tail did not drop below tolerance at the hard truncation cap."""


class SchemeMismatch(SolverError):
    """Matching topology incompatible with the coupling asymmetry."""


class DegenerateDenominator(SolverError):
    """A downward-recurrence denominator vanished; the condition is undefined there."""


class ConditionNotMet(SolverError):
    """Requested cutoff state does not exist at these parameters."""


class SupportOverflow(SolverError):
    """State has photon support beyond the requested truncation."""


class NotConverged(SolverError):
    """Diagonalization drift test failed at the truncation cap."""


class Parity(enum.Enum):
    """Eigenvalue of the Z2 symmetry exp(i*pi*n) sigma1_z sigma2_z (+1 even, -1 odd)."""

    PLUS = 1
    MINUS = -1

    @property
    def sign(self) -> int:
        return self.value

    @classmethod
    def from_string(cls, text: str) -> "Parity":
        key = text.strip().lower()
        if key in ("plus", "+", "+1", "1", "even"):
            return cls.PLUS
        if key in ("minus", "-", "-1", "odd"):
            return cls.MINUS
        raise ValueError(f"unknown parity {text!r}")

    def __str__(self) -> str:
        return "plus" if self is Parity.PLUS else "minus"


@dataclass(frozen=True)
class ModelParams:
    """Physical couplings of the two-qubit Rabi model with optional exchange terms.

    omega is the photon frequency; delta1/delta2 are half the qubit splittings;
    g1/g2 the qubit-photon couplings; jx/jy/jz the qubit-qubit exchange strengths.
    All fields share one energy unit.
    """

    omega: float
    delta1: float
    delta2: float
    g1: float
    g2: float
    jx: float = 0.0
    jy: float = 0.0
    jz: float = 0.0

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.g1 < 0 or self.g2 < 0:
            raise ValueError("couplings g1, g2 must be non-negative")

    @property
    def g(self) -> float:
        """Total coupling g1 + g2."""
        return self.g1 + self.g2

    @property
    def gprime(self) -> float:
        """Coupling asymmetry g1 - g2 (signed)."""
        return self.g1 - self.g2

    def scaled(self) -> "ModelParams":
        """Same model in units of the photon frequency (omega = 1)."""
        if self.omega == 1.0:
            return self
        w = self.omega
        return ModelParams(1.0, self.delta1 / w, self.delta2 / w, self.g1 / w,
                           self.g2 / w, self.jx / w, self.jy / w, self.jz / w)

    def canonical(self) -> tuple["ModelParams", bool]:
        """Relabel the qubits so that gprime >= 0; returns (params, swapped).

        Swapping (g1, delta1) <-> (g2, delta2) is a unitary on the full model and
        leaves the exchange terms and the parity sectors unchanged.
        """
        if self.gprime >= 0:
            return self, False
        return replace(self, g1=self.g2, g2=self.g1,
                       delta1=self.delta2, delta2=self.delta1), True

    def with_g(self, g_total: float) -> "ModelParams":
        """Rescale both couplings to a new total, preserving the g1:g2 ratio."""
        if self.g <= 0:
            raise ValueError("with_g needs a template with g1 + g2 > 0")
        f = g_total / self.g
        return replace(self, g1=self.g1 * f, g2=self.g2 * f)

    def require_analytic(self) -> None:
        """Validate couplings for the series solver: g > 0 and |gprime| < g."""
        if not (self.g1 > 0 and self.g2 > 0):
            raise RequiresValidCouplings(
                "series solver needs g1 > 0 and g2 > 0 "
                f"(got g1={self.g1}, g2={self.g2})")


@dataclass(frozen=True)
class Baseline:
    """Energy at which a recurrence divisor vanishes; the matching determinant has a pole.

    kind 'first' is E = n - g^2 + Jx, kind 'second' is E = n - gprime^2 - Jx,
    kind 'exchange' (identical couplings only) is E = n - Jx +/- (Jy + Jz).
    """

    kind: str
    index: int
    energy: float


def baselines(params: ModelParams, e_min: float, e_max: float) -> list[Baseline]:
    """Enumerate baseline energies inside [e_min, e_max], sorted ascending.

    Energies are deduplicated (within 1e-12) inside each kind; coincidences across
    kinds are kept because they come from distinct divisor families.
    """
    if not e_min < e_max:
        raise ValueError("baselines needs e_min < e_max")
    sp = params.scaled()
    w = params.omega
    lo, hi = e_min / w, e_max / w

    def comb(kind: str, offset: float) -> Iterable[Baseline]:
        n0 = max(0, math.ceil(lo - offset - 1e-9))
        n1 = math.floor(hi - offset + 1e-9)
        seen: list[float] = []
        for n in range(n0, n1 + 1):
            e = n + offset
            if lo - 1e-12 <= e <= hi + 1e-12:
                if any(abs(e - s) < BASELINE_DEDUP_TOL for s in seen):
                    continue
                seen.append(e)
                yield Baseline(kind, n, e * w)

    out: list[Baseline] = []
    out.extend(comb("first", -sp.g ** 2 + sp.jx))
    if sp.gprime != 0.0:
        out.extend(comb("second", -sp.gprime ** 2 - sp.jx))
    else:
        exch = sp.jy + sp.jz
        if exch == 0.0:
            out.extend(comb("second", -sp.jx))
        else:
            merged = {}
            for b in comb("exchange", -sp.jx + exch):
                merged[b.energy] = b
            for b in comb("exchange", -sp.jx - exch):
                if not any(abs(b.energy - e) < BASELINE_DEDUP_TOL * w for e in merged):
                    merged[b.energy] = b
            out.extend(merged.values())
    out.sort(key=lambda b: (b.energy, b.kind, b.index))
    return out


@dataclass(frozen=True)
class SpectrumRecord:
    """One eigenvalue record: energy, parity, producing method, and a residual.

    For 'gfunction' records the residual is the distance to the nearest
    diagonalization eigenvalue of the same parity when verification ran,
    otherwise the determinant magnitude at the root. For 'oracle' records it
    is the per-level truncation drift. 'verified' is None when no
    cross-check was requested.
    """

    energy: float
    parity: Parity
    method: str
    residual: float
    label: Optional[int] = None
    verified: Optional[bool] = None


@dataclass(frozen=True)
class SpectrumResult:
    """Energy-sorted collection of spectrum records."""

    records: tuple[SpectrumRecord, ...] = field(default_factory=tuple)

    @classmethod
    def from_records(cls, records: Iterable[SpectrumRecord]) -> "SpectrumResult":
        return cls(tuple(sorted(records, key=lambda r: (r.energy, r.parity.sign))))

    def energies(self) -> list[float]:
        return [r.energy for r in self.records]

    def filtered(self, parity: Parity) -> "SpectrumResult":
        return SpectrumResult(tuple(r for r in self.records if r.parity is parity))

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


_CONFIG_KEYS = ("omega", "delta1", "delta2", "g1", "g2", "jx", "jy", "jz")
_REQUIRED_KEYS = ("omega", "delta1", "delta2", "g1", "g2")


def load_params(path: str | Path) -> ModelParams:
    """Read a key = value parameter file; jx/jy/jz default to 0 when absent.

    Lines starting with '#' or ';' and bracketed section headers are ignored.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    values: dict[str, float] = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, text = line.partition("=")
        key = key.strip().lower()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{p}:{lineno}: unknown key {key!r}")
        try:
            values[key] = float(text.strip())
        except ValueError as exc:
            raise ConfigError(f"{p}:{lineno}: bad number {text.strip()!r}") from exc
    missing = [k for k in _REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"{p}: missing keys: {', '.join(missing)}")
    try:
        return ModelParams(**values)
    except ValueError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
