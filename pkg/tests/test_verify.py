from __future__ import annotations

import numpy as np
import pytest

from rkha import verify
from rkha.lattice import DualLattice, LatticeArray, convolve


def test_oracle_convolution_trivial_cases():
    lat = DualLattice.integer(1, 1)
    d = LatticeArray.delta(lat)
    assert np.array_equal(verify.oracle_convolution(d, d, 1).values, d.values)
    ones = LatticeArray(lat, np.ones(3))
    assert verify.oracle_convolution(ones, ones).values.real.tolist() == [1, 2, 3, 2, 1]


def test_oracle_convolution_matches_engine_on_50_pairs():
    rng = np.random.default_rng(42)
    for i in range(50):
        d = 1 if i % 2 else 2
        ra, rb = rng.integers(2, 7 if d == 2 else 20, size=2)
        la, lb = DualLattice.integer(d, int(ra)), DualLattice.integer(d, int(rb))
        a = LatticeArray(la, rng.standard_normal(la.shape) + 1j * rng.standard_normal(la.shape))
        b = LatticeArray(lb, rng.standard_normal(lb.shape) + 1j * rng.standard_normal(lb.shape))
        out = int(min(ra, rb)) // 2
        expected = verify.oracle_convolution(a, b, out).values
        got = convolve(a, b, out).values
        assert np.max(np.abs(got - expected)) <= 1e-12 * np.max(np.abs(expected))


def test_oracle_min_norm_extension_identity_and_single_point():
    rng = np.random.default_rng(0)
    K = verify.random_kernel(rng, 4).gram
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    expected = float(np.real(v.conj() @ np.linalg.pinv(K) @ v))
    assert verify.oracle_min_norm_extension(K, range(4), v) == pytest.approx(expected, rel=1e-10)
    assert verify.oracle_min_norm_extension(K, [2], [1.5]) == pytest.approx(2.25 / K[2, 2].real, rel=1e-12)


def test_empty_config_runs_nothing():
    assert verify.run_suite({}) == []
    assert verify.run_suite(None) == []


def test_registry_size_and_names():
    names = verify.property_names()
    assert len(names) >= 20
    assert names == sorted(names)
    for prefix in ("dual_grid.", "weights.", "core.", "kernels."):
        assert any(n.startswith(prefix) for n in names)
    assert "weights.C_R_stabilizes_by_doubling" in names


def test_default_suite_passes_and_is_deterministic():
    first = verify.run_suite(verify.DEFAULT_CONFIG)
    second = verify.run_suite(verify.DEFAULT_CONFIG)
    assert len(first) >= 20
    assert [r.name for r in first] == sorted(r.name for r in first)
    failing = [(r.name, r.residual, r.detail) for r in first if not r.passed]
    assert not failing
    assert [r.to_dict() for r in first] == [r.to_dict() for r in second]
    assert all(r.seed == 42 and r.standard for r in first)
    assert len({r.inputs_digest for r in first}) == len(first)


def test_selection_is_order_independent():
    names = ["kernels.tensor_spectrum", "core.reproducing_property"]
    alone = verify.run_suite({"properties": names[:1]})
    together = verify.run_suite({"properties": names})
    assert alone[0].residual == [r for r in together if r.name == names[0]][0].residual


def test_tolerance_override_is_non_standard():
    results = verify.run_suite({"properties": ["core.reproducing_property"], "tol": 0.0})
    assert results[0].tolerance == 0.0
    assert not results[0].standard
    assert results[0].verdict == ("pass" if results[0].residual <= 0.0 else "fail")
    results = verify.run_suite({"properties": ["core.reproducing_property"],
                                "tolerances": {"core.reproducing_property": 1.0}})
    assert results[0].tolerance == 1.0 and results[0].passed and not results[0].standard


def test_unknown_property_rejected():
    with pytest.raises(ValueError, match="unknown"):
        verify.run_suite({"properties": ["nope"]})


def test_failures_are_recorded_not_raised(monkeypatch):
    def boom(ctx):
        raise RuntimeError("broken")

    monkeypatch.setitem(verify.REGISTRY, "zz.broken", verify.Property("zz.broken", 1.0, boom, ""))
    results = verify.run_suite({"properties": ["zz.broken", "kernels.unitalization_formula"]})
    bad = [r for r in results if r.name == "zz.broken"][0]
    assert bad.verdict == "fail" and "broken" in bad.detail
    assert [r for r in results if r.name == "kernels.unitalization_formula"][0].passed


def test_verdict_rule():
    r = verify.OracleResult("x", 1e-11, 1e-10, "pass", "d", 42)
    assert r.passed
    assert r.to_dict()["verdict"] == "pass"
