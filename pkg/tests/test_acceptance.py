"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import json
import math
import subprocess
import sys
import time

import numpy as np

from rkha import core, kernels, verify, weights
from rkha.lattice import DualLattice, LatticeArray, convolve
from rkha.weights import Weight

SEED = 42
LN2 = math.log(2.0)


def subexp_z(tau=1.0, p=0.5, radius=64):
    return Weight.subexp(DualLattice.integer(1, radius), tau, p)


def test_criterion_01_subconvolutivity_certification(criterion):
    start = time.perf_counter()
    w = subexp_z()
    C64 = weights.subconvolutivity_constant(w, 64).constant
    C128 = weights.subconvolutivity_constant(w, 128).constant
    rel = abs(C128 - C64) / C64

    rng = np.random.default_rng(SEED)
    worst = 0.0
    for i in range(50):
        d = 1 if i % 5 else 2
        lat = DualLattice.integer(d, 0) if i % 3 else DualLattice.grid(d, 0, 0.5)
        cap = 24 if d == 1 else 5
        ra, rb = (int(r) for r in rng.integers(2, cap + 1, size=2))
        la, lb = lat.with_radius(ra), lat.with_radius(rb)
        a = LatticeArray(la, rng.standard_normal(la.shape) + 1j * rng.standard_normal(la.shape))
        b = LatticeArray(lb, rng.standard_normal(lb.shape) + 1j * rng.standard_normal(lb.shape))
        out = min(ra, rb) // 2
        expected = verify.oracle_convolution(a, b, out).values
        worst = max(worst, float(np.max(np.abs(convolve(a, b, out).values - expected)) / np.max(np.abs(expected))))
    elapsed = time.perf_counter() - start

    ok = rel < 1e-6 and worst <= 1e-12 and elapsed < 10
    criterion(1, "subconvolutivity certification", ok,
              f"C_64={C64:.15g} C_128={C128:.15g} rel={rel:.3e} (need <1e-6); "
              f"oracle worst rel={worst:.2e} (need <=1e-12); {elapsed:.2f}s (need <10s)")


def test_criterion_02_operator_norm_identity(criterion):
    w = subexp_z(radius=128)
    R, T = 32, 64
    rng = np.random.default_rng(SEED)
    worst = 0.0
    best_ratio = 0.0
    for _ in range(100):
        f = core.random_element(w, 2 * T, rng, support=R)
        direct = core.comult(f, T).norm_sq()
        worst = max(worst, abs(direct - core.comult_norm_sq_formula(f, T)) / direct)
        best_ratio = max(best_ratio, math.sqrt(direct) / f.norm())
    C_R, argmax = weights.subconvolutivity_constant(w, R)
    probe = core.SpectralFn(w, LatticeArray.delta(w.lattice.with_radius(2 * T), argmax))
    best_ratio = max(best_ratio, core.comult(probe, T).norm() / probe.norm())
    gap = abs(best_ratio - math.sqrt(C_R)) / math.sqrt(C_R)
    ok = worst <= 1e-10 and gap <= 0.02
    criterion(2, "operator-norm identity", ok,
              f"norm identity worst rel={worst:.2e} (need <=1e-10); max ||Df||/||f||={best_ratio:.12g} "
              f"vs sqrt(C_32)={math.sqrt(C_R):.12g}, gap={gap:.2e} (need <=2e-2)")


def test_criterion_03_algebra_inequality(criterion):
    R = 64
    w = subexp_z(radius=R)
    bound = math.sqrt(weights.subconvolutivity_constant(w, R).constant)
    rng = np.random.default_rng(SEED)
    worst_ratio = 0.0
    worst_point = 0.0
    xs = rng.random((16, 1))
    for i in range(1000):
        f = core.random_element(w, 4 * R, rng, support=R)
        g = core.random_element(w, 4 * R, rng, support=R)
        fg = core.multiply(f, g, 2 * R)
        worst_ratio = max(worst_ratio, fg.norm() / (bound * f.norm() * g.norm()))
        if i < 20:
            lhs, rhs = fg(xs), f(xs) * g(xs)
            worst_point = max(worst_point, float(np.max(np.abs(lhs - rhs) / np.abs(rhs))))
    ok = worst_ratio <= 1 + 1e-9 and worst_point <= 1e-9
    criterion(3, "algebra inequality", ok,
              f"max ||fg||/(sqrt(C_R)||f||||g||)={worst_ratio:.6f} (need <=1+1e-9); "
              f"pointwise worst rel={worst_point:.2e} (need <=1e-9)")


def test_criterion_04_group_like_sections(criterion):
    w = subexp_z(radius=32)
    T = 16
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for x in rng.random((8, 1)):
        kx = core.kernel_section(w, x, 2 * T)
        D = core.comult(kx, T)
        P = core.tensor(kx.restrict(T), kx.restrict(T))
        worst = max(worst, float(np.max(np.abs(D.coeffs - P.coeffs)) / np.max(np.abs(P.coeffs))))
    kx, ky = core.kernel_section(w, [0.1], 2 * T), core.kernel_section(w, [0.55], 2 * T)
    res_sum = core.is_group_like(kx + ky, tensor_radius=T)
    res_two = core.is_group_like(kx * 2.0, tensor_radius=T)
    ok = worst <= 1e-12 and not res_sum[0] and not res_two[0] and min(res_sum[1], res_two[1]) > 1e-3
    criterion(4, "group-like sections", ok,
              f"max coefficient rel diff={worst:.2e} (rounding only, need <=1e-12); "
              f"residual(k_x+k_y)={res_sum[1]:.3g}, residual(2k_x)={res_two[1]:.3g} (need >1e-3)")


def test_criterion_05_negative_control(criterion):
    w = subexp_z(tau=LN2, p=1.0)
    Cs = [weights.subconvolutivity_constant(w, r).constant for r in (16, 32, 64)]
    report = weights.weight_report(w, 64)
    comult = core.comult_report(w, 64)
    ok = (Cs[0] < Cs[1] < Cs[2] and Cs[2] / Cs[1] > 1.2 and report.subconv.status == "unbounded"
          and report.C_subconv == "Unbounded" and not comult.certified)
    criterion(5, "geometric negative control", ok,
              f"C_16,C_32,C_64={Cs[0]:.6g},{Cs[1]:.6g},{Cs[2]:.6g}; C_64/C_32={Cs[2] / Cs[1]:.4f} (need >1.2); "
              f"report={report.C_subconv}")


def test_criterion_06_grs_bd_verdicts(criterion):
    verdicts = {}
    for p in (0.3, 0.5, 0.7, 1.0):
        w = subexp_z(p=p)
        verdicts[p] = (weights.grs_check(w).verdict, weights.bd_check(w).verdict)
    expected = {p: ("Holds", "Holds") for p in (0.3, 0.5, 0.7)}
    expected[1.0] = ("Fails", "Fails")
    worst = 0.0
    n_max = 256
    n = np.arange(1, n_max + 1, dtype=float)
    for tau, p in ((1.0, 0.3), (1.0, 0.5), (2.0, 0.7), (1.0, 1.0)):
        table = subexp_z(tau, p, n_max).tabulate(n_max)
        grs = weights.grs_sequence(table, (1,), n_max)
        bd = weights.bd_terms(table, (1,), n_max)
        worst = max(worst, float(np.max(np.abs(grs / np.exp(-tau * n ** (p - 1)) - 1))))
        worst = max(worst, float(np.max(np.abs(bd / (tau * n ** (p - 2)) - 1))))
    ok = verdicts == expected and worst <= 1e-12
    criterion(6, "GRS/BD verdicts", ok,
              f"{ {p: '/'.join(v) for p, v in verdicts.items()} }; table vs closed form worst rel={worst:.2e}")


def test_criterion_07_approximate_unit(criterion):
    start = time.perf_counter()
    w = Weight.subexp(DualLattice.grid(1, 512, 1 / 64), 1.0, 0.5)
    rows = core.approx_unit_study(w, (1, 2, 4, 8, 16), samples=100, seed=SEED)
    elapsed = time.perf_counter() - start
    within = all(r.error is None and r.max_ratio <= r.bound * (1 + 1e-3) for r in rows)
    ok = within and rows[-1].gap < rows[0].gap and elapsed < 60
    table = ", ".join(f"n={r.n}: {r.max_ratio:.3f}<={r.bound:.3f}" for r in rows)
    criterion(7, "approximate unit", ok,
              f"{table}; gap(1)={rows[0].gap:.3e} gap(16)={rows[-1].gap:.3e}; {elapsed:.2f}s (need <60s)")


def test_criterion_08_categorical_constructions(criterion):
    rng = np.random.default_rng(SEED)
    psd_worst = 0.0
    counts: dict[str, int] = {}
    for _ in range(20):
        for name, k in verify._construction_outputs(rng):
            counts[name] = counts.get(name, 0) + 1
            psd_worst = max(psd_worst, kernels.psd_residual(k.gram))

    pull_worst = 0.0
    for _ in range(20):
        k = verify.random_kernel(rng, 4)
        m = int(rng.integers(1, 5))
        idx = rng.choice(4, size=m, replace=False)
        phi = {f"s{i}": k.points[j] for i, j in enumerate(idx)}
        v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        expected = verify.oracle_min_norm_extension(k.gram, [int(j) for j in idx], v)
        pull_worst = max(pull_worst, abs(kernels.pullback_norm_sq(k, phi, v) - expected) / expected)

    proj_worst = 0.0
    round_worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 7))
        k = verify.random_kernel(rng, n)
        po = kernels.pushout(k, {x: f"t{int(rng.integers(0, 3))}" for x in k.points})
        P, Kinv = po.projection, np.linalg.inv(k.gram)
        proj_worst = max(proj_worst, float(np.max(np.abs(P @ P - P)) / np.max(np.abs(P))),
                         float(np.max(np.abs(Kinv @ P - P.conj().T @ Kinv)) / np.max(np.abs(Kinv @ P))))
        perm = rng.permutation(n)
        phi = {x: f"s{int(perm[i])}" for i, x in enumerate(k.points)}
        back = kernels.pullback_kernel(kernels.pushout_kernel(k, phi), phi)
        round_worst = max(round_worst, float(np.max(np.abs(back.gram - k.gram)) / np.max(np.abs(k.gram))))

    ok = (len(counts) == 8 and all(c == 20 for c in counts.values()) and psd_worst <= 1e-10
          and pull_worst <= 1e-9 and proj_worst <= 1e-10 and round_worst <= 1e-10)
    criterion(8, "categorical constructions", ok,
              f"{len(counts)} constructions x 20, PSD residual={psd_worst:.2e}; pullback vs oracle={pull_worst:.2e}; "
              f"projection={proj_worst:.2e}; pushout/pullback round trip={round_worst:.2e}")


def test_criterion_09_unitalization(criterion):
    rng = np.random.default_rng(SEED)
    exact = True
    for _ in range(20):
        k = verify.random_kernel(rng, int(rng.integers(1, 6)))
        g = kernels.unitalize_kernel(k).gram
        n = len(k)
        expected = np.ones((n + 1, n + 1), dtype=np.complex128)
        expected[1:, 1:] = 1.0 + k.gram
        exact &= bool(np.array_equal(g, expected))
    w = subexp_z(radius=64)
    worst = 0.0
    for _ in range(20):
        f = core.random_element(w, 64, rng, support=32)
        prod = core.multiply(core.unit(w, 64), f, 32)
        worst = max(worst, (prod - f.restrict(32)).norm() / f.norm())
    ok = exact and worst <= 1e-10
    criterion(9, "unitalization", ok, f"Gram formula exact={exact}; ||1*f - f||/||f|| worst={worst:.2e}")


def test_criterion_10_metric_diagnostics(criterion):
    rng = np.random.default_rng(SEED)
    w = subexp_z(radius=64)
    table = kernels.metric_diagnostics(w, rng.random((16, 1)), shift=rng.random(1))
    ok = table.kappa_residual <= 1e-10 and table.shift_residual <= 1e-10
    criterion(10, "metric/kappa diagnostics", ok,
              f"kappa residual={table.kappa_residual:.2e}, translation residual={table.shift_residual:.2e}")


def test_criterion_11_full_certification(criterion, tmp_path):
    outs, codes = [], []
    for i in range(2):
        path = tmp_path / f"report{i}.json"
        proc = subprocess.run([sys.executable, "-m", "rkha.cli", "certify", "--out", str(path)],
                              capture_output=True, text=True)
        codes.append(proc.returncode)
        outs.append(path.read_bytes())
    report = json.loads(outs[0])
    passing = sorted({r["name"] for r in report if r["verdict"] == "pass"})
    ok = codes == [0, 0] and len(passing) >= 20 and len(passing) == len(report) and outs[0] == outs[1]
    criterion(11, "full certification", ok,
              f"exit codes={codes}; {len(passing)}/{len(report)} properties pass; "
              f"byte-identical={outs[0] == outs[1]}")
