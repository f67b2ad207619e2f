"""Command-line interface: spectrum, trace, sweep, exceptional catalog, verify.

All commands read a key = value parameter file and write CSV with a provenance
comment header. Output is deterministic: floats are printed with 17
significant digits and no timestamps are embedded.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import exceptional, gfunction, oracle, series
from .model import (
    ConfigError,
    ModelParams,
    Parity,
    SolverError,
    SpectrumRecord,
    baselines,
    load_params,
)

WORKERS_ENV = "TQRABI_WORKERS"


@dataclass(frozen=True)
class SweepSpec:
    """Grid over the total coupling g = g1 + g2 at a fixed g1:g2 ratio.

    The fixed template provides every other parameter; each sweep point
    rescales the couplings with the template ratio preserved.
    """

    fixed: ModelParams
    g_start: float
    g_stop: float
    points: int
    varying: str = "g"
    levels: int = 8
    solver: str = "oracle"
    parity: str = "both"
    e_min: float = -1.0
    e_max: float = 3.0
    step: float = gfunction.DEFAULT_GRID_STEP
    truncation: int = 160
    n_max: int = series.DEFAULT_N_MAX

    def __post_init__(self) -> None:
        if self.varying != "g":
            raise ConfigError("only sweeps over the total coupling g are supported")
        if self.points < 0:
            raise ConfigError("sweep needs a non-negative point count")
        if self.step <= 0:
            raise ConfigError("sweep grid step must be positive")
        if self.fixed.g <= 0:
            raise ConfigError("sweep template must have g1 + g2 > 0 to fix the ratio")

    def grid(self) -> np.ndarray:
        return np.linspace(self.g_start, self.g_stop, self.points)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _parities(choice: str) -> tuple[Parity, ...]:
    if choice == "both":
        return (Parity.PLUS, Parity.MINUS)
    return (Parity.from_string(choice),)


def _params_comment(params: ModelParams) -> str:
    return ("params: " + " ".join(
        f"{k}={_fmt(getattr(params, k))}"
        for k in ("omega", "delta1", "delta2", "g1", "g2", "jx", "jy", "jz")))


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w"), True


def _oracle_window(params: ModelParams, truncation: int, e_min: float,
                   e_max: float) -> list[SpectrumRecord]:
    evals, _ = oracle._eig(params, truncation)
    k = int(np.searchsorted(evals, e_max + 0.5)) + 4
    evs, pars, drifts, _ = oracle.certified_spectrum(params, truncation,
                                                     min(k, evals.size))
    out = []
    for i in range(min(k, evs.size)):
        if e_min <= evs[i] <= e_max:
            par = Parity.PLUS if pars[i] > 0 else Parity.MINUS
            drift = float(drifts[i]) if i < drifts.size else 0.0
            out.append(SpectrumRecord(float(evs[i]), par, "oracle", drift, label=i))
    return out


def cmd_spectrum(args: argparse.Namespace, params: ModelParams) -> int:
    records: list[SpectrumRecord] = []
    for parity in _parities(args.parity):
        if args.solver in ("gfunction", "both"):
            res = gfunction.find_roots(params, parity, args.emin, args.emax,
                                       step=args.step, verify=not args.no_verify,
                                       verify_truncation=args.truncation,
                                       n_max=args.nmax)
            records.extend(res.records)
    if args.solver in ("oracle", "both"):
        want = set(_parities(args.parity))
        records.extend(r for r in _oracle_window(params, args.truncation,
                                                 args.emin, args.emax)
                       if r.parity in want)
    records.sort(key=lambda r: (r.energy, r.method, r.parity.sign))
    fh, close = _open_out(args.out)
    try:
        gfunction.write_spectrum_csv(records, fh, comments=[
            "tqrabi spectrum",
            _params_comment(params),
            f"flags: emin={_fmt(args.emin)} emax={_fmt(args.emax)} "
            f"step={_fmt(args.step)} solver={args.solver} parity={args.parity} "
            f"truncation={args.truncation} nmax={args.nmax} "
            f"verify={str(not args.no_verify).lower()}",
        ])
    finally:
        if close:
            fh.close()
    return 0


def cmd_trace(args: argparse.Namespace, params: ModelParams) -> int:
    traces = [gfunction.trace(params, parity, args.emin, args.emax, args.step,
                              n_max=args.nmax)
              for parity in _parities(args.parity)]
    fh, close = _open_out(args.out)
    try:
        gfunction.write_trace_csv(traces, fh, comments=[
            "tqrabi trace",
            _params_comment(params),
            f"flags: emin={_fmt(args.emin)} emax={_fmt(args.emax)} "
            f"step={_fmt(args.step)} parity={args.parity} nmax={args.nmax}",
        ])
    finally:
        if close:
            fh.close()
    return 0


def _sweep_point(task) -> list[tuple[str, ...]]:
    spec, g = task
    point = spec.fixed.with_g(g)
    rows: list[tuple[str, ...]] = []
    parities = _parities(spec.parity)
    if spec.solver in ("gfunction", "both"):
        for parity in parities:
            try:
                res = gfunction.find_roots(point, parity, spec.e_min, spec.e_max,
                                           step=spec.step,
                                           verify=(spec.solver == "both"),
                                           verify_truncation=spec.truncation,
                                           n_max=spec.n_max)
                rows.extend((_fmt(g), _fmt(r.energy), str(r.parity.sign),
                             "gfunction", _fmt(r.residual), "ok")
                            for r in res)
            except SolverError as exc:
                rows.append((_fmt(g), "", str(parity.sign), "gfunction", "",
                             type(exc).__name__))
    if spec.solver in ("oracle", "both"):
        try:
            res = oracle.diagonalize(point, spec.truncation, spec.levels)
            rows.extend((_fmt(g), _fmt(r.energy), str(r.parity.sign), "oracle",
                         _fmt(r.residual), "ok")
                        for r in res
                        if spec.e_min <= r.energy <= spec.e_max
                        and r.parity in parities)
        except SolverError as exc:
            rows.append((_fmt(g), "", "", "oracle", "", type(exc).__name__))
    if point.gprime == 0.0:
        for parity in parities:
            n_hi = int(np.ceil(spec.e_max + abs(point.jx) + abs(point.jy)
                               + abs(point.jz))) + 1
            for n in range(0, max(n_hi, 1)):
                energy = exceptional.exceptional_energy(point, parity, n)
                if not spec.e_min <= energy <= spec.e_max:
                    continue
                try:
                    cond = exceptional.condition(point, parity, n)
                except SolverError:
                    continue
                if abs(cond) < exceptional.CONDITION_TOL:
                    rows.append((_fmt(g), _fmt(energy), str(parity.sign),
                                 "exceptional", _fmt(abs(cond)), "ok"))
    return rows


def cmd_sweep(args: argparse.Namespace, params: ModelParams) -> int:
    spec = SweepSpec(params, args.gmin, args.gmax, args.points,
                     levels=args.levels, solver=args.solver, parity=args.parity,
                     e_min=args.emin, e_max=args.emax, step=args.step,
                     truncation=args.truncation, n_max=args.nmax)
    tasks = [(spec, float(g)) for g in spec.grid()]
    workers = int(os.environ.get(WORKERS_ENV, os.cpu_count() or 1))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    fh, close = _open_out(args.out)
    try:
        fh.write("# tqrabi sweep\n")
        fh.write(f"# {_params_comment(params)}\n")
        fh.write(f"# flags: gmin={_fmt(args.gmin)} gmax={_fmt(args.gmax)} "
                 f"points={args.points} emin={_fmt(args.emin)} "
                 f"emax={_fmt(args.emax)} step={_fmt(args.step)} "
                 f"solver={args.solver} parity={args.parity} "
                 f"levels={args.levels} truncation={args.truncation} "
                 f"nmax={args.nmax}\n")
        fh.write("g,E,parity,method,residual,status\n")
        for rows in results:
            for row in rows:
                fh.write(",".join(row) + "\n")
    finally:
        if close:
            fh.close()
    return 0


def _parse_scan(specs: Sequence[str]) -> dict[str, np.ndarray]:
    axes: dict[str, np.ndarray] = {}
    for spec in specs:
        try:
            name, _, rng = spec.partition("=")
            start, stop, npts = rng.split(":")
            axes[name.strip().lower()] = np.linspace(float(start), float(stop),
                                                     int(npts))
        except ValueError as exc:
            raise ConfigError(f"bad --scan spec {spec!r}; "
                              "expected AXIS=START:STOP:NPTS") from exc
    return axes


def cmd_exceptional(args: argparse.Namespace, params: ModelParams) -> int:
    axes = _parse_scan(args.scan)
    try:
        ga, gb = (float(x) for x in args.gprobe.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --gprobe {args.gprobe!r}; expected GA,GB") from exc
    hits = exceptional.scan_flat_lines(params, axes, n_max=args.ncut,
                                       g_probe=(ga, gb))
    states: list[Optional[exceptional.ExceptionalState]] = []
    for h in hits:
        try:
            states.append(exceptional.build_state(h.params.with_g(ga),
                                                  h.candidate.parity,
                                                  h.candidate.n_index))
        except SolverError:
            states.append(None)
    exceptional.write_catalog_csv(
        hits, args.out,
        comments=["tqrabi exceptional",
                  _params_comment(params),
                  f"flags: scan={' '.join(args.scan)} ncut={args.ncut} "
                  f"gprobe={args.gprobe}"],
        states=states, sidecar_path=args.out + ".states.csv")
    return 0


def cmd_verify(args: argparse.Namespace, params: ModelParams) -> int:
    failures = 0

    def report(ok: bool, text: str) -> None:
        nonlocal failures
        print(("PASS " if ok else "FAIL ") + text)
        if not ok:
            failures += 1

    pole = gfunction.POLE_MARGIN * params.omega
    bl = baselines(params, args.emin - 1e-9, args.emax + 1e-9)
    for parity in _parities(args.parity):
        res = gfunction.find_roots(params, parity, args.emin, args.emax,
                                   step=args.step,
                                   verify_truncation=args.truncation,
                                   n_max=args.nmax)
        bad = [r for r in res if not r.verified]
        worst = max((r.residual for r in res), default=0.0)
        report(not bad, f"roots[{parity}]: {len(res)} roots, "
                        f"max |E - E_ed| = {worst:.3e}")
        ed = [r for r in _oracle_window(params, args.truncation, args.emin,
                                        args.emax) if r.parity is parity]
        missing = []
        for r in ed:
            if any(abs(r.energy - b.energy) < pole for b in bl):
                continue  # baseline levels belong to the exceptional module
            if all(abs(r.energy - x.energy) > gfunction.VERIFY_TOL * params.omega
                   for x in res):
                missing.append(r.energy)
        report(not missing, f"coverage[{parity}]: {len(ed)} oracle levels, "
                            f"{len(missing)} unmatched off-baseline")
    if params.gprime == 0.0:
        for parity in _parities(args.parity):
            for n in range(0, int(np.ceil(args.emax)) + 2):
                energy = exceptional.exceptional_energy(params, parity, n)
                if not args.emin <= energy <= args.emax:
                    continue
                try:
                    cond = exceptional.condition(params, parity, n)
                except SolverError:
                    continue
                if abs(cond) >= exceptional.CONDITION_TOL:
                    continue
                state = exceptional.build_state(params, parity, n)
                resid = oracle.residual(params, max(n + 2, 40), state)
                report(resid < 1e-10,
                       f"exceptional[{parity}, N={n}]: E = {_fmt(energy)}, "
                       f"residual = {resid:.3e}")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tqrabi",
        description="Spectra of two-qubit Rabi models with optional "
                    "qubit-qubit exchange couplings.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="key = value parameter file")
        p.add_argument("--out", default="-", help="output CSV path (default stdout)")
        p.add_argument("--nmax", type=int, default=series.DEFAULT_N_MAX,
                       help="starting series truncation order")

    p = sub.add_parser("spectrum", help="eigenvalues inside an energy window")
    common(p)
    p.add_argument("--emin", type=float, default=-1.0)
    p.add_argument("--emax", type=float, required=True)
    p.add_argument("--step", type=float, default=gfunction.DEFAULT_GRID_STEP)
    p.add_argument("--parity", choices=("plus", "minus", "both"), default="both")
    p.add_argument("--solver", choices=("gfunction", "oracle", "both"),
                   default="both")
    p.add_argument("--truncation", type=int,
                   default=gfunction.DEFAULT_VERIFY_TRUNCATION)
    p.add_argument("--no-verify", action="store_true",
                   help="skip the diagonalization cross-check of roots")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("trace", help="sample the matching determinant on a grid")
    common(p)
    p.add_argument("--emin", type=float, required=True)
    p.add_argument("--emax", type=float, required=True)
    p.add_argument("--step", type=float, default=gfunction.DEFAULT_GRID_STEP)
    p.add_argument("--parity", choices=("plus", "minus", "both"), default="both")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("sweep", help="spectrum versus total coupling g = g1 + g2")
    common(p)
    p.add_argument("--gmin", type=float, required=True)
    p.add_argument("--gmax", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--emin", type=float, default=-1.0)
    p.add_argument("--emax", type=float, default=3.0)
    p.add_argument("--step", type=float, default=gfunction.DEFAULT_GRID_STEP)
    p.add_argument("--parity", choices=("plus", "minus", "both"), default="both")
    p.add_argument("--solver", choices=("gfunction", "oracle", "both"),
                   default="oracle")
    p.add_argument("--levels", type=int, default=8)
    p.add_argument("--truncation", type=int, default=160)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("exceptional", help="catalog of cutoff-condition zeros")
    common(p)
    p.add_argument("--scan", action="append", required=True,
                   metavar="AXIS=START:STOP:NPTS",
                   help="scan axis; repeat for an outer grid, last axis is "
                        "the bisection line")
    p.add_argument("--ncut", type=int, default=3,
                   help="largest baseline index probed for cutoff states")
    p.add_argument("--gprobe", default="0.8,2.1",
                   help="two couplings used to certify g-independence")
    p.set_defaults(func=cmd_exceptional)

    p = sub.add_parser("verify", help="cross-validate the solvers on one model")
    common(p)
    p.add_argument("--emin", type=float, default=-1.0)
    p.add_argument("--emax", type=float, default=2.5)
    p.add_argument("--step", type=float, default=gfunction.DEFAULT_GRID_STEP)
    p.add_argument("--parity", choices=("plus", "minus", "both"), default="both")
    p.add_argument("--truncation", type=int,
                   default=gfunction.DEFAULT_VERIFY_TRUNCATION)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = load_params(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "exceptional" and args.out == "-":
            raise ConfigError("exceptional needs --out FILE for the sidecar")
        return args.func(args, params)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
