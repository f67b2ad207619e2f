import math

import numpy as np
import pytest

from tqrabi import (
    ModelParams,
    NotConverged,
    SupportOverflow,
    build_hamiltonian,
    diagonalize,
    residual,
)
from tqrabi import oracle


def test_decoupled_limit_levels_and_parities():
    p = ModelParams(1.0, 0.6, 0.2, 0.0, 0.0)
    res = diagonalize(p, 40, 8)
    got = [(round(r.energy, 10), r.parity.sign) for r in res]
    expected = [(-0.8, 1), (-0.4, -1), (0.2, -1), (0.4, -1),
                (0.6, 1), (0.8, 1), (1.2, 1), (1.4, 1)]
    for (e, s), (ee, ss) in zip(got, expected):
        assert e == pytest.approx(ee, abs=1e-10)
        assert s == ss


def test_dark_levels_exact_at_integer_energy(equal_qubits):
    p = equal_qubits.with_g(1.5)
    evals, pars = oracle._eig(p, 48)
    for n in (0, 1, 2):
        k = int(np.argmin(np.abs(evals - n)))
        assert abs(evals[k] - n) < 5e-13
        assert pars[k] == (-1) ** (n + 1)
        vec = np.zeros(4 * 49)
        vec[4 * n + 2] = 1 / math.sqrt(2)   # |n, g, e>
        vec[4 * n + 1] = -1 / math.sqrt(2)  # |n, e, g>
        assert residual(p, 48, vec, float(n)) < 1e-14


def test_flat_exchange_levels_present(xyz_double):
    p = xyz_double.with_g(2.0)
    evals, pars = oracle._eig(p, 90)
    even = evals[pars == 1]
    assert min(abs(even - (-0.5))) < 1e-11
    assert min(abs(even - 1.5)) < 1e-11


def test_residual_of_flat_state_closed_form(flat):
    # Amplitudes (2(d1-d2)/g, -1, +1)/norm on (|0ee>, |1eg>, |1ge>) solve
    # H psi = psi when d1 + d2 = 1; assembled by hand as an independent check.
    p = flat.with_g(0.7)
    a = 2 * (p.delta1 - p.delta2) / p.g
    vec = np.zeros(4 * 41)
    vec[0] = a
    vec[4 + 1] = -1.0
    vec[4 + 2] = 1.0
    vec /= np.linalg.norm(vec)
    assert residual(p, 40, vec, 1.0) < 1e-13


def test_residual_of_random_vector_is_large(asym):
    rng = np.random.default_rng(7)
    vec = rng.normal(size=4 * 31)
    assert residual(asym, 30, vec, 0.3) > 0.1


def test_parity_blocks_exact(asym):
    fh = build_hamiltonian(asym.with_g(1.1), 25)
    plus = np.flatnonzero(fh.parity_diag > 0)
    minus = np.flatnonzero(fh.parity_diag < 0)
    assert np.max(np.abs(fh.matrix[np.ix_(plus, minus)])) == 0.0
    comm = fh.matrix * fh.parity_diag[None, :] - fh.parity_diag[:, None] * fh.matrix
    assert np.max(np.abs(comm)) == 0.0


def test_ground_state_monotone_in_truncation(asym):
    p = asym.with_g(1.5)
    e0 = [oracle._eig(p, t)[0][0] for t in (10, 20, 40, 80)]
    assert all(b <= a + 1e-14 for a, b in zip(e0, e0[1:]))


def test_relabeling_invariance():
    a = ModelParams(1.0, 0.6, 0.2, 0.24, 0.06, jx=0.1, jy=0.2, jz=0.3)
    b = ModelParams(1.0, 0.2, 0.6, 0.06, 0.24, jx=0.1, jy=0.2, jz=0.3)
    ea, _ = oracle._eig(a, 60)
    eb, _ = oracle._eig(b, 60)
    assert np.max(np.abs(ea - eb)) < 1e-12


def test_diagonalize_preconditions(asym):
    with pytest.raises(ValueError):
        diagonalize(asym, 12, 10)  # truncation below k/2 + 10
    with pytest.raises(ValueError):
        diagonalize(asym, 40, 0)


def test_not_converged_at_cap():
    p = ModelParams(1.0, 0.6, 0.2, 2.0, 0.5)
    with pytest.raises(NotConverged):
        diagonalize(p, 15, 10, cap=30)


def test_support_overflow():
    p = ModelParams(1.0, 0.6, 0.2, 0.24, 0.06)
    with pytest.raises(SupportOverflow):
        residual(p, 10, np.ones(4 * 12), 0.0)


def test_degenerate_cross_parity_levels_classified():
    # At g = 0 with d1 = 0.75, d2 = 0.25 the level E = 0.5 is doubly
    # degenerate with one state in each parity sector.
    p = ModelParams(1.0, 0.75, 0.25, 0.0, 0.0)
    evals, pars = oracle._eig(p, 30)
    hits = np.flatnonzero(np.abs(evals - 0.5) < 1e-12)
    assert len(hits) == 2
    assert sorted(pars[hits]) == [-1, 1]


def test_sector_rediagonalization_fallback(monkeypatch):
    # Force the mixed-parity branch and check it reproduces the direct path.
    p = ModelParams(1.0, 0.61, 0.23, 0.31, 0.11, jx=0.05)
    direct = oracle._eig(p, 35)
    monkeypatch.setattr(oracle, "PARITY_PURITY", 2.0)
    oracle._eig.cache_clear()
    forced = oracle._eig(p, 35)
    oracle._eig.cache_clear()
    assert np.max(np.abs(direct[0] - forced[0])) < 1e-12
    assert np.array_equal(direct[1], forced[1])


def test_records_sorted_with_drift(asym):
    res = diagonalize(asym, 120, 6)
    energies = res.energies()
    assert energies == sorted(energies)
    assert all(r.method == "oracle" and r.residual < 1e-8 for r in res)
    assert [r.label for r in res] == list(range(6))
