from __future__ import annotations

import json
import math

import numpy as np
import pytest

from rkha import weights
from rkha.errors import NonPositiveWeight, ProbeOutOfRange, RadiusMismatch, SpecError
from rkha.lattice import DualLattice, LatticeArray
from rkha.verify import oracle_convolution
from rkha.weights import FAILS, HOLDS, INCONCLUSIVE, Weight, parse_weight_spec

LN2 = math.log(2.0)


def subexp(tau, p, radius=64, d=1):
    return Weight.subexp(DualLattice.integer(d, radius), tau, p)


def trivial(value=2.0):
    return Weight.from_table(LatticeArray(DualLattice.integer(1, 0), [value]))


def test_family_closed_form():
    w = subexp(1.0, 0.5, d=2)
    assert w.at([3, -4]) == pytest.approx(math.exp(-(math.sqrt(3) + 2)))
    assert w.values(2).shape == (5, 5)
    assert w.symmetric


def test_table_validation():
    with pytest.raises(NonPositiveWeight):
        Weight.from_table(LatticeArray(DualLattice.integer(1, 1), [1.0, 0.0, 1.0]))
    with pytest.raises(NonPositiveWeight):
        Weight.from_table(LatticeArray(DualLattice.integer(1, 0), [1j]))


def test_asymmetric_table_is_flagged_not_rejected():
    w = Weight.from_table(LatticeArray(DualLattice.integer(1, 1), [1.0, 1.0, 0.5]))
    assert not w.symmetric
    assert weights.weight_report(w).symmetric is False


def test_trivial_group_constant():
    res = weights.subconvolutivity_constant(trivial(2.0), 0)
    assert res.constant == 2.0
    assert res.argmax == (0,)
    report = weights.weight_report(trivial(2.0))
    assert report.C_subconv == 2.0
    assert report.subconv.history == [(0, 2.0)]


def test_geometric_weight_grows():
    w = subexp(LN2, 1.0)
    values = [weights.subconvolutivity_constant(w, r).constant for r in (16, 32, 64)]
    assert values[0] < values[1] < values[2]
    for r, c in zip((16, 32, 64), values):
        ratio = weights.convolution_ratio(w, r)
        assert ratio[-1] >= r + 1  # window edge: |g| + 1 terms equal to one
        assert c >= r + 1
    summary = weights.subconvolutivity_history(w, 64)
    assert summary.status == "unbounded"
    assert summary.constant == "Unbounded"


def test_subexp_constant_matches_loop_oracle():
    w = subexp(1.0, 0.5)
    lam = w.array(24)
    conv = oracle_convolution(lam, lam, 12).values.real
    assert weights.subconvolutivity_constant(w, 12).constant == pytest.approx(np.max(conv / w.values(12)), rel=1e-12)


def test_subexp_stabilizes_by_doubling():
    summary = weights.subconvolutivity_history(subexp(1.0, 0.5), 64)
    assert summary.certified
    (_, prev), (_, last) = summary.history[-2:]
    assert abs(last - prev) / prev < 1e-6
    assert summary.constant == last


def test_constant_nondecreasing_and_bounds():
    w = subexp(1.0, 0.5)
    cs = [weights.subconvolutivity_constant(w, r).constant for r in (4, 8, 16, 32)]
    assert all(a <= b for a, b in zip(cs, cs[1:]))
    lam = w.values(64)
    assert cs[-1] >= float(np.sum(lam * lam[::-1])) / w.at([0])


def test_table_radius_limits():
    w = subexp(1.0, 0.5).tabulate(10)
    with pytest.raises(RadiusMismatch):
        weights.subconvolutivity_constant(w, 6)
    with pytest.raises(ProbeOutOfRange):
        weights.grs_sequence(w, (1,), 11)


def test_grs_family_verdicts():
    for p in (0.3, 0.5, 0.7):
        assert weights.grs_check(subexp(1.0, p)).verdict == HOLDS
    section = weights.grs_check(subexp(1.0, 1.0))
    assert section.verdict == FAILS
    assert section.evidence == "analytic"
    assert np.allclose(section.estimates[(1,)], math.exp(-1.0), rtol=1e-15)


def test_grs_closed_form_sequence():
    w = subexp(1.0, 0.5)
    n = np.arange(1, 257)
    assert np.allclose(weights.grs_sequence(w, (1,), 256), np.exp(-(n ** -0.5)), rtol=1e-14)


def test_grs_table_numeric():
    # exp(-2 * 256**-0.3) is about 0.685: approaching 1, but not yet within 1e-2
    table = Weight.subexp(DualLattice.integer(1, 256), 2.0, 0.7).tabulate(256)
    section = weights.grs_check(table, [(1,)], 256)
    seq = np.array(section.estimates[(1,)])
    assert np.allclose(seq, np.exp(-2.0 * np.arange(1, 257) ** -0.3), rtol=1e-12)
    assert section.evidence == "numeric"
    assert section.verdict == INCONCLUSIVE
    assert np.all(np.diff(seq[192:]) > 0)


def test_grs_numeric_rule():
    settled_low = np.full(64, 0.5)
    assert weights.grs_numeric_verdict(settled_low, 1e-2) == FAILS
    near_one = 1 - 1e-3 / np.arange(1, 65)
    assert weights.grs_numeric_verdict(near_one, 1e-2) == HOLDS


def test_bd_family_and_tail():
    section = weights.bd_check(subexp(1.0, 0.5), n_max=256)
    assert section.verdict == HOLDS
    assert section.tail_bounds[(1,)] == pytest.approx(256 ** -0.5 / 0.5)
    sums = np.array(section.partial_sums[(1,)])
    assert np.all(np.diff(sums) >= 0)
    assert weights.bd_check(subexp(1.0, 1.0)).verdict == FAILS


def test_bd_table_bracket():
    N = 10_000
    table = Weight.subexp(DualLattice.integer(1, N), 1.0, 0.5).tabulate(N)
    S_N = np.cumsum(weights.bd_terms(table, (1,), N))[-1]
    n = np.arange(1, 10**7 + 1, dtype=float)
    full = float(np.sum(n**-1.5))
    tail_bound = N**-0.5 / 0.5
    assert S_N <= full <= S_N + tail_bound


def test_bd_table_detects_harmonic_terms():
    table = subexp(1.0, 1.0).tabulate(64)
    assert weights.bd_check(table, [(1,)], 64).verdict == FAILS
    table = subexp(1.0, 0.5).tabulate(64)
    assert weights.bd_check(table, [(1,)], 64).verdict == INCONCLUSIVE


def test_default_probes():
    assert weights.default_probes(1) == [(1,)]
    assert weights.default_probes(2) == [(1, 0), (0, 1), (1, 1)]


def test_report_dict_keys():
    out = weights.weight_report(subexp(1.0, 0.5), 16, n_max=32).to_dict()
    for key in ("C_subconv", "C_convergence", "grs_estimates", "grs_verdict", "bd_partial_sums",
                "bd_tail_bound", "bd_verdict"):
        assert key in out
    assert out["grs_verdict"] == HOLDS and out["bd_verdict"] == HOLDS


def test_spec_round_trip(tmp_path):
    w = Weight.subexp(DualLattice.grid(2, 8, 0.25), 1.5, 0.4)
    back = parse_weight_spec(w.spec())
    assert back.same_as(w)
    table = w.tabulate(3)
    assert parse_weight_spec(table.spec()).same_as(table)
    path = tmp_path / "lam.bin"
    table.table.save(path)
    (tmp_path / "spec.json").write_text(json.dumps({"table": "lam.bin"}))
    assert parse_weight_spec(tmp_path / "spec.json").same_as(table)


@pytest.mark.parametrize(
    "spec, field",
    [
        ({"group": "Zd", "d": 1, "R": 4}, "family"),
        ({"group": "Td", "d": 1, "R": 4, "family": {}}, "group"),
        ({"group": "Zd", "d": 1, "R": 4, "family": {"name": "subexp", "tau": 1.0}}, "family.p"),
        ({"group": "Zd", "d": 1, "R": 4, "family": {"name": "subexp", "tau": 1.0, "p": 1.5}}, "family.p"),
        ({"group": "Rd", "d": 1, "R": 4, "family": {"name": "subexp", "tau": 1.0, "p": 0.5}}, "h"),
        ({"group": "Zd", "d": "one", "R": 4}, "d"),
    ],
)
def test_spec_errors_name_the_field(spec, field):
    with pytest.raises(SpecError) as err:
        parse_weight_spec(spec)
    assert err.value.field == field


def test_spec_json_error_has_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"group": "Zd",\n  "d": }')
    with pytest.raises(SpecError, match="line 2"):
        parse_weight_spec(path)
