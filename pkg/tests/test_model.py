import pytest

from tqrabi import (
    Baseline,
    ConfigError,
    ModelParams,
    Parity,
    RequiresValidCouplings,
    baselines,
    load_params,
)


def test_derived_accessors():
    p = ModelParams(1.0, 0.6, 0.2, 0.24, 0.06)
    assert p.g == pytest.approx(0.3)
    assert p.gprime == pytest.approx(0.18)


def test_validation():
    with pytest.raises(ValueError):
        ModelParams(0.0, 0.5, 0.5, 0.1, 0.1)
    with pytest.raises(ValueError):
        ModelParams(1.0, 0.5, 0.5, -0.1, 0.1)


def test_require_analytic():
    ModelParams(1.0, 0.5, 0.5, 0.1, 0.2).require_analytic()
    with pytest.raises(RequiresValidCouplings):
        ModelParams(1.0, 0.5, 0.5, 0.0, 0.2).require_analytic()


def test_canonical_swaps_qubit_labels():
    p = ModelParams(1.0, 0.6, 0.2, 0.06, 0.24, jy=0.1, jz=0.2)
    q, swapped = p.canonical()
    assert swapped
    assert q.gprime > 0
    assert (q.g1, q.g2, q.delta1, q.delta2) == (0.24, 0.06, 0.2, 0.6)
    assert (q.jy, q.jz) == (p.jy, p.jz)
    assert p.canonical()[1] or not swapped  # idempotent on already-canonical
    assert q.canonical() == (q, False)


def test_with_g_preserves_ratio():
    p = ModelParams(1.0, 0.6, 0.2, 0.4, 0.1)
    q = p.with_g(2.0)
    assert q.g == pytest.approx(2.0)
    assert q.g1 / q.g2 == pytest.approx(4.0)


def test_scaled_is_omega_one():
    p = ModelParams(2.0, 1.2, 0.4, 0.48, 0.12, jx=0.4)
    sp = p.scaled()
    assert sp.omega == 1.0
    assert sp.delta1 == pytest.approx(0.6)
    assert sp.g == pytest.approx(0.3)
    assert sp.jx == pytest.approx(0.2)


def test_baselines_second_and_first_kind():
    # Direct evaluation of E = n - g'^2 and E = n - g^2 inside the window.
    p = ModelParams(1.0, 0.6, 0.2, 0.24, 0.06)
    out = baselines(p, -0.2, 1.0)
    second = sorted(b.energy for b in out if b.kind == "second")
    first = sorted(b.energy for b in out if b.kind == "first")
    assert second == pytest.approx([-0.18 ** 2, 1 - 0.18 ** 2])
    assert first == pytest.approx([-0.09, 0.91])
    assert [b.energy for b in out] == sorted(b.energy for b in out)


def test_baselines_cross_kind_coincidence_kept():
    p = ModelParams(1.0, 0.5, 0.5, 0.5, 0.5)  # g = 1, g' = 0
    out = baselines(p, -1.5, 0.5)
    first = sorted(b.energy for b in out if b.kind == "first")
    second = sorted(b.energy for b in out if b.kind == "second")
    assert first == pytest.approx([-1.0, 0.0])
    assert second == pytest.approx([0.0])


def test_baselines_invalid_range():
    p = ModelParams(1.0, 0.5, 0.5, 0.5, 0.5)
    with pytest.raises(ValueError):
        baselines(p, 1.0, 1.0)


def test_baselines_exchange_kind():
    p = ModelParams(1.0, 0.6, 0.4, 0.5, 0.5, jx=0.5, jy=0.5, jz=0.5)
    out = baselines(p, -1.0, 1.5)
    exch = sorted(b.energy for b in out if b.kind == "exchange")
    # E = n - jx +/- (jy + jz): {n - 1.5, n + 0.5}
    assert exch == pytest.approx([-0.5, 0.5, 1.5])


def test_baselines_swap_invariance():
    a = ModelParams(1.0, 0.6, 0.2, 0.24, 0.06, jy=0.3, jz=0.3)
    b = ModelParams(1.0, 0.2, 0.6, 0.06, 0.24, jy=0.3, jz=0.3)
    ea = [(x.kind, x.energy) for x in baselines(a, -1, 2)]
    eb = [(x.kind, x.energy) for x in baselines(b, -1, 2)]
    assert ea == eb


def test_baselines_rescale_with_omega():
    p1 = ModelParams(1.0, 0.6, 0.2, 0.24, 0.06)
    p2 = ModelParams(2.0, 1.2, 0.4, 0.48, 0.12)
    e1 = [b.energy for b in baselines(p1, -0.2, 1.0)]
    e2 = [b.energy for b in baselines(p2, -0.4, 2.0)]
    assert e2 == pytest.approx([2 * e for e in e1])


def test_parity_parsing_and_sign():
    assert Parity.from_string("plus") is Parity.PLUS
    assert Parity.from_string("-1") is Parity.MINUS
    assert Parity.PLUS.sign == 1 and Parity.MINUS.sign == -1
    with pytest.raises(ValueError):
        Parity.from_string("sideways")


def test_load_params(tmp_path):
    cfg = tmp_path / "model.cfg"
    cfg.write_text("""
# comment
[model]
omega = 1.0
delta1 = 0.6
delta2 = 0.2   ; trailing comment
g1 = 0.24
g2 = 0.06
jy = 0.1
""")
    p = load_params(cfg)
    assert p == ModelParams(1.0, 0.6, 0.2, 0.24, 0.06, jy=0.1)


@pytest.mark.parametrize("body,fragment", [
    ("omega = 1\ndelta1 = 0.6\ndelta2 = 0.2\ng1 = 0.1\n", "missing keys"),
    ("omega = 1\ndelta1 = 0.6\ndelta2 = 0.2\ng1 = 0.1\ng2 = x\n", "bad number"),
    ("omega = 1\ndelta1 = 0.6\ndelta2 = 0.2\ng1 = 0.1\ng2 = 0.1\nzz = 3\n",
     "unknown key"),
    ("omega = 0\ndelta1 = 0.6\ndelta2 = 0.2\ng1 = 0.1\ng2 = 0.1\n", "omega"),
])
def test_load_params_errors(tmp_path, body, fragment):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(body)
    with pytest.raises(ConfigError, match=fragment):
        load_params(cfg)


def test_load_params_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_params(tmp_path / "absent.cfg")


def test_baseline_is_value_type():
    b = Baseline("first", 2, 1.5)
    assert b == Baseline("first", 2, 1.5)
