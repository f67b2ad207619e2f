import numpy as np
import pytest

from tqrabi import (
    MatchingScheme,
    ModelParams,
    OutsideDisk,
    Parity,
    PoleAtBaseline,
    RequiresValidCouplings,
    SchemeMismatch,
    default_scheme,
    find_roots,
    gvalue,
    trace,
)
from tqrabi import oracle
from tqrabi.gfunction import write_spectrum_csv, write_trace_csv


def ed_levels(params, parity, e_min, e_max, truncation=200):
    evals, pars = oracle._eig(params, truncation)
    return np.array([e for e, s in zip(evals, pars)
                     if s == parity.sign and e_min <= e <= e_max])


def test_default_scheme_topologies(asym, ratio2, flat):
    s = default_scheme(asym)
    assert s.topology == "full8"
    assert s.z0 == pytest.approx((asym.g + asym.gprime) / 2)
    assert s.z0prime == pytest.approx(asym.gprime ** 2 / asym.g)
    assert default_scheme(ratio2).topology == "reduced6"
    assert default_scheme(ratio2).z0prime == 0.0
    s4 = default_scheme(flat)
    assert s4.topology == "reduced4"
    assert s4.z0 == pytest.approx(flat.g / 2)


def test_scheme_basis_columns(asym, ratio2, flat):
    assert default_scheme(asym).basis_columns == {
        "g": (0, 1, 3), "gprime": (0, 1, 2), "zero": (0, 1)}
    assert default_scheme(ratio2).basis_columns == {
        "g": (0, 1, 3), "gprime": (0, 1, 2)}
    assert default_scheme(flat).basis_columns == {"g": (0, 1, 3), "zero": (0,)}


def test_scheme_mismatch(asym, ratio2, flat):
    with pytest.raises(SchemeMismatch):
        gvalue(flat, Parity.PLUS, 0.4, MatchingScheme("full8", 0.5, 0.25))
    with pytest.raises(SchemeMismatch):
        gvalue(asym, Parity.PLUS, 0.4, MatchingScheme("reduced6", 0.24, 0.0))
    with pytest.raises(SchemeMismatch):
        gvalue(ratio2, Parity.PLUS, 0.35, MatchingScheme("reduced4", 0.25))


def test_matching_point_outside_disk(asym):
    with pytest.raises(OutsideDisk):
        gvalue(asym, Parity.PLUS, 0.4,
               MatchingScheme("full8", asym.g + 0.2, asym.gprime ** 2 / asym.g))


def test_requires_valid_couplings():
    p = ModelParams(1.0, 0.6, 0.2, 0.0, 0.3)
    with pytest.raises(RequiresValidCouplings):
        gvalue(p, Parity.PLUS, 0.4)


def test_gvalue_pole_at_baseline():
    p = ModelParams(1.0, 0.5, 0.5, 0.35, 0.35)
    with pytest.raises(PoleAtBaseline):
        gvalue(p, Parity.PLUS, 1.0)  # baseline energy for identical couplings


def test_gvalue_finite_and_deterministic(asym):
    v1 = gvalue(asym, Parity.MINUS, 0.25)
    v2 = gvalue(asym, Parity.MINUS, 0.25)
    assert np.isfinite(v1) and v1 == v2


def test_root_positions_independent_of_matching_points(asym):
    alt = MatchingScheme("full8", 0.21, 0.08)
    res_a = find_roots(asym, Parity.PLUS, -1.0, 1.0, verify=False)
    res_b = find_roots(asym, Parity.PLUS, -1.0, 1.0, scheme=alt, verify=False)
    ra, rb = res_a.energies(), res_b.energies()
    assert len(ra) == len(rb)
    assert np.max(np.abs(np.array(ra) - np.array(rb))) < 1e-9


def test_roots_match_diagonalization_full8(asym):
    for parity in (Parity.PLUS, Parity.MINUS):
        res = find_roots(asym, parity, -1.0, 1.0, verify=True,
                         verify_truncation=200)
        ed = ed_levels(asym, parity, -1.0, 1.0)
        assert len(res) == len(ed)
        assert np.max(np.abs(np.array(res.energies()) - ed)) < 1e-6
        assert all(r.verified for r in res)
        assert [r.label for r in res] == list(range(len(res)))


def test_roots_match_diagonalization_reduced6(ratio2):
    # All roots below E = 2 for the 2:1 coupling ratio at g = 0.5.
    for parity in (Parity.PLUS, Parity.MINUS):
        res = find_roots(ratio2, parity, -1.0, 2.0, verify=True,
                         verify_truncation=200)
        ed = ed_levels(ratio2, parity, -1.0, 2.0)
        assert len(res) == len(ed)
        assert np.max(np.abs(np.array(res.energies()) - ed)) < 1e-6


def test_roots_match_diagonalization_exchange_reduced4():
    p = ModelParams(1.0, 0.6, 0.2, 0.4, 0.4, jx=0.7, jy=0.1, jz=0.3)
    for parity in (Parity.PLUS, Parity.MINUS):
        res = find_roots(p, parity, -1.0, 1.5, verify=True,
                         verify_truncation=200)
        ed = ed_levels(p, parity, -1.0, 1.5)
        assert len(res) == len(ed)
        assert np.max(np.abs(np.array(res.energies()) - ed)) < 1e-6


def test_roots_rescale_with_photon_frequency(asym):
    scaled_up = ModelParams(2.0, 1.2, 0.4, 0.48, 0.12)
    r1 = find_roots(asym, Parity.MINUS, -1.0, 0.6, verify=False).energies()
    r2 = find_roots(scaled_up, Parity.MINUS, -2.0, 1.2, verify=False).energies()
    assert len(r1) == len(r2)
    assert np.max(np.abs(np.array(r2) - 2 * np.array(r1))) < 1e-9


def test_near_decoupled_limit_levels():
    # g -> 0: levels approach n + s1*d1 + s2*d2 with the parity (-1)^n s1 s2.
    p = ModelParams(1.0, 0.6, 0.2, 0.8e-3, 0.2e-3)
    plus = find_roots(p, Parity.PLUS, -0.95, 0.95, verify=False)
    minus = find_roots(p, Parity.MINUS, -0.95, 0.95, verify=False)
    assert np.allclose(plus.energies(), [-0.8, 0.6, 0.8], atol=1e-4)
    assert np.allclose(minus.energies(), [-0.4, 0.2, 0.4], atol=1e-4)


def test_window_with_baseline_but_no_root(asym):
    res = find_roots(asym, Parity.PLUS, -0.12, -0.05, verify=False)
    assert len(res) == 0


def test_window_validation(asym):
    with pytest.raises(ValueError):
        find_roots(asym, Parity.PLUS, 1.0, -1.0)
    with pytest.raises(ValueError):
        find_roots(asym, Parity.PLUS, -1.0, 1.0, step=0.0)
    with pytest.raises(ValueError):
        trace(asym, Parity.PLUS, -1.0, 1.0, step=-0.1)


def test_trace_sign_changes_count_roots(asym):
    # The determinant also flips sign across the baseline poles, so sign
    # changes are counted inside each inter-baseline segment only.
    for parity in (Parity.PLUS, Parity.MINUS):
        tr = trace(asym, parity, -1.0, 2.5, 0.002)
        edges = [-np.inf] + [b.energy for b in tr.poles] + [np.inf]
        crossings = 0
        for lo, hi in zip(edges[:-1], edges[1:]):
            inside = (tr.energies > lo) & (tr.energies < hi)
            vals = tr.values[inside]
            vals = vals[np.isfinite(vals)]
            crossings += int(np.sum(np.sign(vals[1:]) != np.sign(vals[:-1])))
        ed = ed_levels(asym, parity, -1.0, 2.5, truncation=300)
        assert crossings == len(ed)


def test_trace_constant_sign_between_adjacent_roots(asym):
    # Adjacent odd-parity levels sit at -0.4346 and 0.0067; the window between
    # them (clear of baselines) must keep one sign.
    tr = trace(asym, Parity.MINUS, -0.42, -0.10, 0.005)
    vals = tr.values[np.isfinite(tr.values)]
    assert vals.size > 30
    assert np.all(np.sign(vals) == np.sign(vals[0]))


def test_gvalue_continuous_between_baselines(asym):
    # Column normalization keeps the determinant continuous inside one
    # inter-baseline interval.
    tr = trace(asym, Parity.PLUS, -0.03, 0.89, 0.002)
    vals = tr.values[np.isfinite(tr.values)]
    diffs = np.abs(np.diff(vals))
    assert np.max(diffs) < 0.05 * np.max(np.abs(vals))


def test_trace_masks_pole_margins(flat):
    tr = trace(flat, Parity.PLUS, 0.999999, 1.000001, 2.0e-7)
    assert any(not np.isfinite(v) for v in tr.values)
    assert any(b.energy == pytest.approx(1.0) for b in tr.poles)


def test_spectrum_csv_format(tmp_path, asym):
    res = find_roots(asym, Parity.PLUS, -1.0, 0.5, verify=False)
    out = tmp_path / "spectrum.csv"
    write_spectrum_csv(res, out, comments=["header line"])
    lines = out.read_text().splitlines()
    assert lines[0] == "# header line"
    assert lines[1] == "E,parity,method,residual"
    assert len(lines) == 2 + len(res)
    assert lines[2].split(",")[1:3] == ["1", "gfunction"]


def test_trace_csv_has_empty_cells_in_margins(tmp_path, flat):
    traces = [trace(flat, par, 0.999999, 1.000001, 2.0e-7)
              for par in (Parity.PLUS, Parity.MINUS)]
    out = tmp_path / "trace.csv"
    write_trace_csv(traces, out)
    body = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    assert body[0] == "E,G_plus,G_minus"
    assert any(ln.endswith(",,") or ",," in ln for ln in body[1:])
