"""Brute-force oracles and the property registry behind ``rkha certify``.

The oracles here deliberately avoid the fast paths used by the rest of the
package: convolutions are explicit double loops, minimal-norm extensions are
solved by eliminating the constraints, and tensor norms are summed entry by
entry. Each registered property compares a library result against such an
oracle (or against a closed form) and reduces the comparison to one
nonnegative residual with a fixed tolerance.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import zlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import linalg

from . import core, fileformat, kernels, weights
from .errors import InfeasibleConstraints
from .lattice import DualLattice, LatticeArray, convolve
from .weights import Weight, parse_weight_spec

DEFAULT_SEED = 42
DEFAULT_RADIUS = 64
DEFAULT_WEIGHT = {"group": "Zd", "d": 1, "R": 64, "family": {"name": "subexp", "tau": 1.0, "p": 0.5}}
DEFAULT_CONFIG = {"properties": "all", "seed": DEFAULT_SEED, "radius": DEFAULT_RADIUS, "weight": DEFAULT_WEIGHT}

# grid used by the approximate-unit properties (R^1, h = 1/64)
APPROX_STEP = 1.0 / 64
APPROX_RADIUS = 512
APPROX_NS = (1, 2, 4, 8, 16)
APPROX_SLACK = 1e-3


# -- oracles -------------------------------------------------------------------


def oracle_convolution(a: LatticeArray, b: LatticeArray, out_radius: int | None = None) -> LatticeArray:
    """Exact lattice convolution by an explicit loop over all node pairs.

    The result is the full convolution (radius ``Ra + Rb``) cropped or padded
    to ``out_radius``; no transform and no vectorized kernel is involved.
    """
    if not a.lattice.compatible(b.lattice):
        raise ValueError("oracle_convolution needs compatible lattices")
    d = a.lattice.dimension
    full_radius = a.radius + b.radius
    out_radius = full_radius if out_radius is None else out_radius
    side = 2 * full_radius + 1
    acc = np.zeros((side,) * d, dtype=np.complex128)
    ra = range(-a.radius, a.radius + 1)
    rb = range(-b.radius, b.radius + 1)
    av, bv = a.values, b.values
    for ia in itertools.product(ra, repeat=d):
        x = av[tuple(i + a.radius for i in ia)]
        if x == 0:
            continue
        for ib in itertools.product(rb, repeat=d):
            acc[tuple(i + j + full_radius for i, j in zip(ia, ib))] += x * bv[tuple(j + b.radius for j in ib)]
    out = LatticeArray(a.lattice.with_radius(full_radius), a.lattice.node_measure * acc)
    return out.resize(out_radius)


def oracle_min_norm_extension(K: np.ndarray, phi: Sequence[int] | Mapping, values) -> float:
    """``min ||f||^2`` over ``f`` in ``H(K)`` with ``f(x_phi(s)) = values[s]``.

    ``f = K c`` ranges over the whole space, ``||f||^2 = c^H K c``, and the
    constraints read ``K[phi, :] c = values``. A particular solution plus a
    null-space parametrization turns this into an unconstrained least-squares
    problem in the null-space coordinates.
    """
    K = np.asarray(K, dtype=np.complex128)
    idx = list(phi.values()) if isinstance(phi, Mapping) else list(phi)
    v = np.asarray(values, dtype=np.complex128).ravel()
    if len(idx) != v.size:
        raise InfeasibleConstraints(f"{len(idx)} constraints but {v.size} values")
    if not idx:
        return 0.0
    A = K[idx, :]
    c0, *_ = np.linalg.lstsq(A, v, rcond=None)
    scale = max(float(np.max(np.abs(v))), np.finfo(float).tiny)
    if np.max(np.abs(A @ c0 - v)) > 1e-9 * scale:
        raise InfeasibleConstraints("no element of the space takes the requested values")
    N = linalg.null_space(A)
    if N.shape[1]:
        # minimize (c0 + N z)^H K (c0 + N z): normal equations N^H K N z = -N^H K c0
        # directions where K vanishes do not change the norm; drop them with a
        # cutoff relative to K itself rather than to the reduced matrix
        M = N.conj().T @ K @ N
        evals, evecs = np.linalg.eigh((M + M.conj().T) / 2)
        keep = evals > 1e-12 * max(float(np.linalg.norm(K, 2)), np.finfo(float).tiny)
        rhs = evecs.conj().T @ (-(N.conj().T @ K @ c0))
        z = evecs[:, keep] @ (rhs[keep] / evals[keep])
        c = c0 + N @ z
    else:
        c = c0
    return float(np.real(np.vdot(c, K @ c)))


def oracle_inner(f: core.SpectralFn, g: core.SpectralFn) -> complex:
    """``<f, g>`` as a plain Python sum over nodes."""
    total = 0j
    fv, gv, lam = f.values.ravel(), g.values.ravel(), f.lam.ravel()
    for i in range(fv.size):
        total += complex(fv[i]) * complex(gv[i]).conjugate() / float(lam[i])
    return f.lattice.node_measure * total


def oracle_comult(f: core.SpectralFn, tensor_radius: int) -> np.ndarray:
    """``Delta(f)^(a, b)`` entry by entry for a one-dimensional lattice."""
    if f.lattice.dimension != 1:
        raise ValueError("oracle_comult handles d = 1 only")
    T = tensor_radius
    out = np.zeros((2 * T + 1, 2 * T + 1), dtype=np.complex128)
    for i, a in enumerate(range(-T, T + 1)):
        for j, b in enumerate(range(-T, T + 1)):
            la, lb, lab = (float(f.weight.at([k])) for k in (a, b, a + b))
            out[i, j] = f.coeffs[(a + b,)] * la * lb / lab
    return out


def oracle_tensor_norm_sq(F: np.ndarray, lam: np.ndarray, node_measure: float) -> float:
    """``h^2d sum |F(a, b)|^2 / (lam(a) lam(b))`` by explicit double sum."""
    total = 0.0
    n = F.shape[0]
    for i in range(n):
        for j in range(n):
            total += abs(complex(F[i, j])) ** 2 / (float(lam[i]) * float(lam[j]))
    return node_measure**2 * total


# -- results and registry ------------------------------------------------------


@dataclass
class OracleResult:
    name: str
    residual: float
    tolerance: float
    verdict: str
    inputs_digest: str
    seed: int
    standard: bool = True
    detail: str | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "inputs_digest": self.inputs_digest,
            "seed": self.seed,
            "standard": self.standard,
        }
        if self.detail is not None:
            out["detail"] = self.detail
        return out


@dataclass
class Context:
    """Inputs shared by all properties of one suite run."""

    weight: Weight
    radius: int
    seed: int
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def rng(self) -> np.random.Generator:
        # one stream per property, so results do not depend on run order
        return np.random.default_rng([self.seed, zlib.crc32(self.name.encode())])

    @cached_property
    def C_R(self) -> float:
        return weights.subconvolutivity_constant(self.weight, self.radius).constant

    def approx_rows(self) -> list[core.ApproxUnitRow]:
        if "approx" not in self._cache:
            fam = self.weight.family if self.weight.is_family else weights.SubExp(1.0, 0.5)
            w = Weight.subexp(DualLattice.grid(1, APPROX_RADIUS, APPROX_STEP), fam.tau, fam.p)
            self._cache["approx"] = core.approx_unit_study(w, APPROX_NS, samples=25, seed=self.seed)
        return self._cache["approx"]


@dataclass(frozen=True)
class Property:
    name: str
    tolerance: float
    check: Callable[[Context], float]
    doc: str


REGISTRY: dict[str, Property] = {}


def register(name: str, tolerance: float):
    def wrap(fn: Callable[[Context], float]) -> Callable[[Context], float]:
        if name in REGISTRY:
            raise ValueError(f"duplicate property {name}")
        REGISTRY[name] = Property(name, tolerance, fn, (fn.__doc__ or "").strip())
        return fn

    return wrap


def property_names() -> list[str]:
    return sorted(REGISTRY)


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    scale = max(float(np.max(np.abs(b))) if b.size else 0.0, np.finfo(float).tiny)
    return float(np.max(np.abs(a - b))) / scale if a.size else 0.0


def _random_array(rng: np.random.Generator, lattice: DualLattice) -> LatticeArray:
    shape = lattice.shape
    return LatticeArray(lattice, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    rank = n if rank is None else rank
    A = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    K = A @ A.conj().T
    return (K + K.conj().T) / 2


def random_kernel(rng: np.random.Generator, n: int, prefix: str = "x", rank: int | None = None) -> kernels.SampledKernel:
    return kernels.SampledKernel([f"{prefix}{i}" for i in range(n)], _random_psd(rng, n, rank))


def _work_weight(ctx: Context) -> Weight:
    return ctx.weight.with_radius(ctx.radius) if ctx.weight.is_family else ctx.weight


# -- dual_grid properties --------------------------------------------------------


@register("dual_grid.convolve_matches_oracle", 1e-12)
def _p_conv_oracle(ctx: Context) -> float:
    """Doubled-window convolution against the double-loop oracle on 50 random pairs."""
    rng = ctx.rng
    worst = 0.0
    for i in range(50):
        d = 1 if i % 5 else 2
        lat = DualLattice.integer(d, 0) if i % 3 else DualLattice.grid(d, 0, 0.5)
        cap = 12 if d == 1 else 4
        ra, rb = (int(r) for r in rng.integers(2, cap + 1, size=2))
        a = _random_array(rng, lat.with_radius(ra))
        b = _random_array(rng, lat.with_radius(rb))
        out = min(ra, rb) // 2
        worst = max(worst, _rel(convolve(a, b, out).values, oracle_convolution(a, b, out).values))
    return worst


@register("dual_grid.convolve_commutes", 1e-14)
def _p_conv_comm(ctx: Context) -> float:
    """``a * b = b * a``."""
    rng = ctx.rng
    lat = DualLattice.integer(1, 32)
    worst = 0.0
    for _ in range(10):
        a, b = _random_array(rng, lat), _random_array(rng, lat)
        worst = max(worst, _rel(convolve(a, b, 16).values, convolve(b, a, 16).values))
    return worst


@register("dual_grid.fft_matches_direct", 1e-12)
def _p_conv_fft(ctx: Context) -> float:
    """The FFT path agrees with direct summation."""
    rng = ctx.rng
    worst = 0.0
    for lat in (DualLattice.integer(1, 128), DualLattice.grid(2, 12, 0.25)):
        for _ in range(5):
            a, b = _random_array(rng, lat), _random_array(rng, lat)
            r = lat.radius // 2
            worst = max(worst, _rel(convolve(a, b, r, "fft").values, convolve(a, b, r, "direct").values))
    return worst


@register("dual_grid.delta_is_identity", 0.0)
def _p_conv_delta(ctx: Context) -> float:
    """Convolving with the unit mass ``delta / h^d`` returns the input window."""
    rng = ctx.rng
    worst = 0.0
    for lat in (DualLattice.integer(1, 20), DualLattice.grid(2, 6, 0.5)):
        a = _random_array(rng, lat)
        delta = LatticeArray.delta(lat, scale=1.0 / lat.node_measure)
        r = lat.radius // 2
        worst = max(worst, _rel(convolve(delta, a, r).values, a.restrict(r).values))
    return worst


@register("dual_grid.window_is_exact", 1e-12)
def _p_conv_window(ctx: Context) -> float:
    """All-ones inputs on radius 2R give ``4R + 1 - |g|`` at every output node."""
    R = max(ctx.radius, 1)
    ones = LatticeArray(DualLattice.integer(1, 2 * R), np.ones(4 * R + 1))
    got = convolve(ones, ones, R).values.real
    expected = 4 * R + 1 - np.abs(np.arange(-R, R + 1))
    return _rel(got, expected)


# -- weights properties ----------------------------------------------------------


@register("weights.convolution_symmetric", 1e-14)
def _p_w_sym(ctx: Context) -> float:
    """``(lam * lam)(g) = (lam * lam)(-g)`` for a symmetric weight."""
    if not ctx.weight.symmetric:
        return 0.0
    lam2 = ctx.weight.array(2 * ctx.radius)
    conv = convolve(lam2, lam2, ctx.radius)
    return _rel(conv.values, conv.reflect().values)


@register("weights.C_R_matches_oracle", 1e-12)
def _p_w_oracle(ctx: Context) -> float:
    """``C_R`` from the engine against the loop oracle at a small radius."""
    r = min(ctx.radius, 12)
    lam2 = ctx.weight.array(2 * r)
    conv = oracle_convolution(lam2, lam2, r).values.real
    expected = float(np.max(conv / ctx.weight.values(r)))
    got = weights.subconvolutivity_constant(ctx.weight, r).constant
    return abs(got - expected) / expected


@register("weights.C_R_nondecreasing", 0.0)
def _p_w_monotone(ctx: Context) -> float:
    """``C_{R/4} <= C_{R/2} <= C_R``: larger windows only add positive terms."""
    R = ctx.radius
    radii = sorted({r for r in (R // 4, R // 2, R) if r > 0})
    values = [weights.subconvolutivity_constant(ctx.weight, r).constant for r in radii]
    drops = [max(0.0, a - b) / a for a, b in zip(values, values[1:])]
    return max(drops, default=0.0)


@register("weights.C_R_dominates_origin", 0.0)
def _p_w_origin(ctx: Context) -> float:
    """``C_R >= (lam * lam)(0) / lam(0)`` with the origin term summed directly."""
    lam = ctx.weight.values(2 * ctx.radius).ravel()
    h = ctx.weight.lattice.node_measure
    at0 = h * sum(float(x) * float(y) for x, y in zip(lam, lam[::-1])) / float(ctx.weight.at(
        np.zeros(ctx.weight.lattice.dimension, dtype=int)))
    return max(0.0, at0 - ctx.C_R) / ctx.C_R


@register("weights.C_R_stabilizes_by_doubling", weights.STABILIZATION_TOL)
def _p_w_stable(ctx: Context) -> float:
    """Doubling the radius until the estimate settles; residual is the last relative change."""
    summary = weights.subconvolutivity_history(ctx.weight, ctx.radius)
    (_, prev), (_, last) = summary.history[-2], summary.history[-1]
    return abs(last - prev) / prev


@register("weights.grs_family_verdicts", 0.0)
def _p_w_grs(ctx: Context) -> float:
    """Analytic GRS verdicts: ``p < 1`` holds, ``p = 1`` fails (count of mismatches)."""
    lat = DualLattice.integer(1, 16)
    wrong = 0
    for p, expected in ((0.3, weights.HOLDS), (0.5, weights.HOLDS), (0.7, weights.HOLDS), (1.0, weights.FAILS)):
        wrong += weights.grs_check(Weight.subexp(lat, 1.0, p)).verdict != expected
    return float(wrong)


@register("weights.bd_family_verdicts", 0.0)
def _p_w_bd(ctx: Context) -> float:
    """Analytic BD verdicts match GRS on the sub-exponential family (count of mismatches)."""
    lat = DualLattice.integer(1, 16)
    wrong = 0
    for p, expected in ((0.3, weights.HOLDS), (0.5, weights.HOLDS), (0.7, weights.HOLDS), (1.0, weights.FAILS)):
        wrong += weights.bd_check(Weight.subexp(lat, 1.0, p)).verdict != expected
    return float(wrong)


@register("weights.table_sequences_closed_form", 1e-12)
def _p_w_table(ctx: Context) -> float:
    """Tabulated GRS and BD sequences against ``exp(-tau n^(p-1))`` and ``tau n^(p-2)``."""
    worst = 0.0
    n_max = 64
    n = np.arange(1, n_max + 1, dtype=float)
    for tau, p in ((1.0, 0.3), (1.0, 0.5), (2.0, 0.7), (0.6931471805599453, 1.0)):
        table = Weight.subexp(DualLattice.integer(1, n_max), tau, p).tabulate(n_max)
        worst = max(worst, _rel(weights.grs_sequence(table, (1,), n_max), np.exp(-tau * n ** (p - 1))))
        worst = max(worst, _rel(weights.bd_terms(table, (1,), n_max), tau * n ** (p - 2)))
    return worst


@register("weights.bd_tail_bound_dominates", 0.0)
def _p_w_tail(ctx: Context) -> float:
    """The analytic tail bound exceeds the summed tail ``N < n <= 10^6``."""
    worst = 0.0
    N = weights.GRS_NMAX
    n = np.arange(N + 1, 10**6 + 1, dtype=float)
    for p in (0.3, 0.5, 0.7):
        w = Weight.subexp(DualLattice.integer(1, 1), 1.0, p)
        tail = float(np.sum(n ** (p - 2)))
        bound = weights.bd_tail_bound(w, (1,), N)
        worst = max(worst, max(0.0, tail - bound) / bound)
    return worst


# -- rkha_core properties -------------------------------------------------------


@register("core.reproducing_property", 1e-10)
def _p_c_repro(ctx: Context) -> float:
    """``<f, k_x> = f(x)`` relative to ``||f|| sqrt(k(x, x))``."""
    rng, w, R = ctx.rng, _work_weight(ctx), ctx.radius
    xs = rng.random((8, w.lattice.dimension))
    worst = 0.0
    for _ in range(16):
        f = core.random_element(w, R, rng)
        vals = f(xs)
        for x, fx in zip(xs, vals):
            kx = core.kernel_section(w, x, R)
            err = abs(core.inner(f, kx) - fx) / (f.norm() * kx.norm())
            worst = max(worst, err)
    return worst


@register("core.inner_matches_oracle", 1e-12)
def _p_c_inner(ctx: Context) -> float:
    """Vectorized inner product against a node-by-node sum."""
    rng, w = ctx.rng, _work_weight(ctx)
    r = min(ctx.radius, 32)
    worst = 0.0
    for _ in range(10):
        f, g = core.random_element(w, r, rng), core.random_element(w, r, rng)
        expected = oracle_inner(f, g)
        worst = max(worst, abs(core.inner(f, g) - expected) / abs(expected))
    return worst


@register("core.kernel_gram_matches_inner", 1e-12)
def _p_c_gram(ctx: Context) -> float:
    """``k(x, y) = <k_y, k_x>`` for the vectorized Gram."""
    rng, w, R = ctx.rng, _work_weight(ctx), ctx.radius
    xs = rng.random((6, w.lattice.dimension))
    K = core.kernel_gram(w, xs, R)
    secs = [core.kernel_section(w, x, R) for x in xs]
    expected = np.array([[core.inner(sy, sx) for sy in secs] for sx in secs])
    return _rel(K, expected)


@register("core.comult_matches_oracle", 1e-12)
def _p_c_comult_oracle(ctx: Context) -> float:
    """Comultiplication coefficients and tensor norm against entrywise oracles (d = 1)."""
    if ctx.weight.lattice.dimension != 1:
        return 0.0
    rng, w = ctx.rng, _work_weight(ctx)
    T = 8
    f = core.random_element(w, 2 * T, rng)
    D = core.comult(f, T)
    coeff_err = _rel(D.coeffs, oracle_comult(f, T))
    expected = oracle_tensor_norm_sq(D.coeffs, w.values(T).ravel(), w.lattice.node_measure)
    return max(coeff_err, abs(D.norm_sq() - expected) / expected)


@register("core.comult_norm_identity", 1e-10)
def _p_c_norm_identity(ctx: Context) -> float:
    """``||Delta f||^2`` summed on the tensor window against the convolution formula."""
    rng, w = ctx.rng, _work_weight(ctx)
    r = max(ctx.radius // 4, 1)
    T = 2 * r
    worst = 0.0
    for _ in range(20):
        f = core.random_element(w, 2 * T, rng, support=r)
        direct = core.comult(f, T).norm_sq()
        worst = max(worst, abs(direct - core.comult_norm_sq_formula(f, T)) / direct)
    return worst


@register("core.comult_adjoint_is_multiplication", 1e-10)
def _p_c_adjoint(ctx: Context) -> float:
    """``<fg, e> = <f (x) g, Delta e>`` relative to ``||f|| ||g|| ||e||``."""
    rng, w = ctx.rng, _work_weight(ctx)
    T = min(ctx.radius, 16)
    worst = 0.0
    for _ in range(10):
        f = core.random_element(w, T, rng)
        g = core.random_element(w, T, rng)
        e = core.random_element(w, 2 * T, rng)
        fg = core.multiply(f.pad(4 * T), g.pad(4 * T), 2 * T)
        lhs = core.inner(fg, e)
        rhs = core.tensor_inner(core.tensor(f, g), core.comult(e, T))
        worst = max(worst, abs(lhs - rhs) / (f.norm() * g.norm() * e.norm()))
    return worst


def _product_pairs(ctx: Context, count: int):
    rng, w, R = ctx.rng, _work_weight(ctx), ctx.radius
    for _ in range(count):
        f = core.random_element(w, 4 * R, rng, support=R)
        g = core.random_element(w, 4 * R, rng, support=R)
        yield f, g, core.multiply(f, g, 2 * R)


@register("core.submultiplicative", 1e-9)
def _p_c_submult(ctx: Context) -> float:
    """``||fg|| <= sqrt(C_R) ||f|| ||g||`` on 1000 pairs supported on radius R."""
    bound = math.sqrt(ctx.C_R)
    worst = 0.0
    for f, g, fg in _product_pairs(ctx, 1000):
        worst = max(worst, fg.norm() / (bound * f.norm() * g.norm()) - 1.0)
    return max(worst, 0.0)


@register("core.banach_submultiplicative", 1e-9)
def _p_c_banach(ctx: Context) -> float:
    """``||fg||_Ban <= ||f||_Ban ||g||_Ban`` with the rescaled norm."""
    delta = math.sqrt(ctx.C_R)
    worst = 0.0
    for f, g, fg in _product_pairs(ctx, 200):
        ratio = core.banach_norm(fg, delta) / (core.banach_norm(f, delta) * core.banach_norm(g, delta))
        worst = max(worst, ratio - 1.0)
    return max(worst, 0.0)


@register("core.product_is_pointwise", 1e-9)
def _p_c_pointwise(ctx: Context) -> float:
    """``(fg)(x) = f(x) g(x)`` at 16 random points."""
    worst = 0.0
    xs = ctx.rng.random((16, ctx.weight.lattice.dimension))
    for f, g, fg in _product_pairs(ctx, 5):
        lhs, rhs = fg(xs), f(xs) * g(xs)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300))))
    return worst


@register("core.kernel_bounded_by_delta_norm", 1e-9)
def _p_c_kbound(ctx: Context) -> float:
    """``sqrt(k(x, x)) <= ||Delta||`` at sampled points."""
    rep = core.comult_report(_work_weight(ctx), ctx.radius, seed=ctx.seed)
    return max(0.0, math.sqrt(rep.kernel_diag_max) / rep.delta_norm - 1.0)


@register("core.delta_norm_matches_C_R", 1e-12)
def _p_c_delta_norm(ctx: Context) -> float:
    """``delta_norm^2`` from the report equals ``C_R`` from the weights module."""
    rep = core.comult_report(_work_weight(ctx), ctx.radius, seed=ctx.seed)
    return abs(rep.delta_norm**2 - ctx.C_R) / ctx.C_R


@register("core.kernel_sections_group_like", 1e-12)
def _p_c_group_like(ctx: Context) -> float:
    """``Delta(k_x) = k_x (x) k_x`` for 8 sampled ``x``."""
    rng, w = ctx.rng, _work_weight(ctx)
    T = min(ctx.radius, 16)
    worst = 0.0
    for x in rng.random((8, w.lattice.dimension)):
        _, res = core.is_group_like(core.kernel_section(w, x, 2 * T), tensor_radius=T)
        worst = max(worst, res)
    return worst


@register("core.non_group_like_rejected", 0.0)
def _p_c_reject(ctx: Context) -> float:
    """``k_x + k_y`` and ``2 k_x`` have residual above 1e-3 (count of misses)."""
    rng, w = ctx.rng, _work_weight(ctx)
    T = min(ctx.radius, 16)
    misses = 0
    for x, y in rng.random((4, 2, w.lattice.dimension)):
        kx, ky = core.kernel_section(w, x, 2 * T), core.kernel_section(w, y, 2 * T)
        for xi in (kx + ky, kx * 2.0):
            ok, res = core.is_group_like(xi, tensor_radius=T)
            misses += ok or res <= 1e-3
    return float(misses)


@register("core.mult_operator_norm_bracketed", 1e-8)
def _p_c_opnorm(ctx: Context) -> float:
    """Power-iteration ``||M_f||`` lies in ``[||f|| / ||1||, sqrt(C_R) ||f||]``."""
    rng, w = ctx.rng, _work_weight(ctx)
    R = min(ctx.radius, 16)
    C = weights.subconvolutivity_constant(w, R).constant
    worst = 0.0
    for _ in range(3):
        f = core.random_element(w, 2 * R, rng, support=R)
        est = core.mult_operator_norm(f, R)
        upper = math.sqrt(C) * f.norm()
        worst = max(worst, (est - upper) / upper)
        if core.is_unital(w):
            lower = f.norm() / core.unit(w, R).norm()
            worst = max(worst, (lower - est) / f.norm())
    return max(worst, 0.0)


@register("core.unit_is_neutral", 1e-10)
def _p_c_unit(ctx: Context) -> float:
    """``multiply(1, f) = f`` on Z^d with ``1^ = delta_0``."""
    w, R = _work_weight(ctx), ctx.radius
    if not core.is_unital(w):
        return 0.0
    rng = ctx.rng
    worst = 0.0
    for _ in range(5):
        f = core.random_element(w, 2 * R, rng, support=R)
        prod = core.multiply(core.unit(w, 2 * R), f, R)
        worst = max(worst, (prod - f.restrict(R)).norm() / f.norm())
    return worst


@register("core.approx_unit_bounded", 0.0)
def _p_c_approx_bound(ctx: Context) -> float:
    """``||eta_n xi|| / ||xi|| <= exp(tau (1/2n)^p) (1 + 1e-3)`` on the R grid."""
    worst = 0.0
    for row in ctx.approx_rows():
        if row.error:
            return math.inf
        worst = max(worst, row.max_ratio / (row.bound * (1 + APPROX_SLACK)) - 1.0)
    return max(worst, 0.0)


@register("core.approx_unit_gap_shrinks", 0.0)
def _p_c_approx_gap(ctx: Context) -> float:
    """The weak-convergence gap at the largest ``n`` is below the gap at ``n = 1``."""
    rows = ctx.approx_rows()
    first, last = rows[0].gap, rows[-1].gap
    return max(0.0, last - first) / first if last >= first else 0.0


# -- kernel_cat properties --------------------------------------------------------


def _construction_outputs(rng: np.random.Generator):
    """One output of every construction on fresh random inputs."""
    n1, n2 = (int(v) for v in rng.integers(1, 6, size=2))
    k1 = random_kernel(rng, n1, "a", rank=int(rng.integers(1, n1 + 1)))
    k2 = random_kernel(rng, n2, "b", rank=int(rng.integers(1, n2 + 1)))
    k1b = random_kernel(rng, n1, "a", rank=int(rng.integers(1, n1 + 1)))
    full = random_kernel(rng, n1, "a")
    phi_in = {f"s{i}": f"a{int(j)}" for i, j in enumerate(rng.integers(0, n1, size=int(rng.integers(1, 6))))}
    phi_out = {x: f"t{int(rng.integers(0, 3))}" for x in full.points}
    feats = rng.standard_normal((n2, 3)) + 1j * rng.standard_normal((n2, 3))
    yield "tensor", kernels.tensor_kernel(k1, k2)
    yield "direct-sum", kernels.direct_sum_kernel(k1, k2)
    yield "sum", kernels.sum_kernel(k1, k1b)
    yield "product", kernels.product_kernel(k1, k1b)
    yield "pullback", kernels.pullback_kernel(k1, phi_in)
    yield "pushout", kernels.pushout_kernel(full, phi_out, ["t0", "t1", "t2"])
    yield "unitalize", kernels.unitalize_kernel(k1)
    yield "feature-map", kernels.feature_map_kernel(feats)


@register("kernels.constructions_psd", kernels.PSD_RTOL)
def _p_k_psd(ctx: Context) -> float:
    """Every construction yields ``min eig >= -1e-10 trace`` on 20 random inputs."""
    rng = ctx.rng
    worst = 0.0
    for _ in range(20):
        for _, k in _construction_outputs(rng):
            worst = max(worst, kernels.psd_residual(k.gram))
    return worst


@register("kernels.tensor_spectrum", 1e-10)
def _p_k_tensor(ctx: Context) -> float:
    """Eigenvalues of a tensor Gram are the pairwise products of the factors' eigenvalues."""
    rng = ctx.rng
    worst = 0.0
    for _ in range(10):
        k1, k2 = random_kernel(rng, 3, "a"), random_kernel(rng, 4, "b")
        e1, e2 = np.linalg.eigvalsh(k1.gram), np.linalg.eigvalsh(k2.gram)
        expected = np.sort(np.outer(e1, e2).ravel())
        got = np.linalg.eigvalsh(kernels.tensor_kernel(k1, k2).gram)
        worst = max(worst, _rel(got, expected))
        esum = np.sort(np.concatenate([e1, e2]))
        worst = max(worst, _rel(np.linalg.eigvalsh(kernels.direct_sum_kernel(k1, k2).gram), esum))
    return worst


@register("kernels.pullback_identity_exact", 0.0)
def _p_k_identity(ctx: Context) -> float:
    """Pulling back along the identity reproduces the Gram bit for bit."""
    k = random_kernel(ctx.rng, 5)
    pulled = kernels.pullback_kernel(k, {p: p for p in k.points})
    return 0.0 if pulled.gram.tobytes() == k.gram.tobytes() else 1.0


@register("kernels.pullback_norm_matches_oracle", 1e-9)
def _p_k_pullback(ctx: Context) -> float:
    """Pullback norm ``v^H K_phi^+ v`` against constrained minimization on 4x4 Grams."""
    rng = ctx.rng
    worst = 0.0
    for _ in range(20):
        k = random_kernel(rng, 4)
        m = int(rng.integers(1, 5))
        targets = rng.choice(4, size=m, replace=False)
        phi = {f"s{i}": k.points[j] for i, j in enumerate(targets)}
        v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        got = kernels.pullback_norm_sq(k, phi, v)
        expected = oracle_min_norm_extension(k.gram, [int(j) for j in targets], v)
        worst = max(worst, abs(got - expected) / expected)
    return worst


def _random_pushout(rng: np.random.Generator):
    n = int(rng.integers(2, 7))
    k = random_kernel(rng, n)
    phi = {x: f"t{int(rng.integers(0, 3))}" for x in k.points}
    return k, kernels.pushout(k, phi)


@register("kernels.pushout_projection", 1e-10)
def _p_k_projection(ctx: Context) -> float:
    """``P^2 = P`` and ``K^-1 P = P^H K^-1`` (self-adjoint for the H(k) inner product)."""
    rng = ctx.rng
    worst = 0.0
    for _ in range(20):
        k, po = _random_pushout(rng)
        P = po.projection
        Kinv = np.linalg.inv(k.gram)
        worst = max(worst, _rel(P @ P, P), _rel(Kinv @ P, P.conj().T @ Kinv))
    return worst


@register("kernels.pushout_pullback_roundtrip", 1e-10)
def _p_k_roundtrip(ctx: Context) -> float:
    """Pushing out and pulling back along a bijection returns the original Gram."""
    rng = ctx.rng
    worst = 0.0
    for _ in range(20):
        k = random_kernel(rng, int(rng.integers(1, 7)))
        perm = rng.permutation(len(k))
        phi = {x: f"s{int(perm[i])}" for i, x in enumerate(k.points)}
        pushed = kernels.pushout_kernel(k, phi)
        back = kernels.pullback_kernel(pushed, phi)
        worst = max(worst, _rel(back.gram, k.gram))
    return worst


@register("kernels.unitalization_formula", 0.0)
def _p_k_unital(ctx: Context) -> float:
    """The unitalized Gram is ``[[1, 1^T], [1, J + K]]`` exactly."""
    k = random_kernel(ctx.rng, 4)
    u = kernels.unitalize_kernel(k).gram
    expected = np.ones((5, 5), dtype=np.complex128)
    expected[1:, 1:] = 1.0 + k.gram
    return float(np.max(np.abs(u - expected)))


@register("kernels.metric_translation_invariant", 1e-10)
def _p_k_metric(ctx: Context) -> float:
    """``kappa`` is constant and ``d(x + t, y + t) = d(x, y)`` on torus samples."""
    rng, w = ctx.rng, _work_weight(ctx)
    pts = rng.random((8, w.lattice.dimension))
    table = kernels.metric_diagnostics(w, pts, ctx.radius, shift=rng.random(w.lattice.dimension))
    return max(table.kappa_residual, table.shift_residual)


# -- suite driver --------------------------------------------------------------------


def _digest(name: str, seed: int, radius: int, weight_spec: dict, tolerance: float) -> str:
    payload = fileformat.dumps(
        {"name": name, "seed": seed, "radius": radius, "weight": weight_spec, "tolerance": tolerance}, indent=0
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _select(config: Mapping) -> list[str]:
    chosen = config.get("properties", "all")
    if chosen == "all":
        return property_names()
    if isinstance(chosen, str):
        chosen = [chosen]
    unknown = sorted(set(chosen) - set(REGISTRY))
    if unknown:
        raise ValueError(f"unknown properties: {', '.join(unknown)}")
    return sorted(set(chosen))


def run_suite(config: Mapping | None) -> list[OracleResult]:
    """Run the selected properties and return one result each, sorted by name.

    ``config`` keys: ``properties`` (``"all"`` or a list of names), ``seed``,
    ``radius``, ``weight`` (a weight spec) and optionally ``tolerances``
    (per-property map) or ``tol`` (one value for all). Any tolerance override
    marks the results as non-standard. An empty config runs nothing.
    """
    if not config:
        return []
    seed = int(config.get("seed", DEFAULT_SEED))
    radius = int(config.get("radius", DEFAULT_RADIUS))
    spec = config.get("weight", DEFAULT_WEIGHT)
    weight = parse_weight_spec(spec)
    overrides = dict(config.get("tolerances") or {})
    global_tol = config.get("tol")
    standard = not overrides and global_tol is None
    weight_spec = weight.spec()
    shared = Context(weight, radius, seed)

    results = []
    for name in _select(config):
        prop = REGISTRY[name]
        tol = float(overrides.get(name, global_tol if global_tol is not None else prop.tolerance))
        ctx = Context(weight, radius, seed, name, shared._cache)
        detail = None
        try:
            residual = float(prop.check(ctx))
        except Exception as exc:  # recorded, never fatal to the suite
            residual, detail = math.inf, f"{type(exc).__name__}: {exc}"
        if math.isnan(residual):
            residual, detail = math.inf, detail or "residual is NaN"
        verdict = "pass" if residual <= tol else "fail"
        results.append(OracleResult(name, residual, tol, verdict, _digest(name, seed, radius, weight_spec, tol),
                                    seed, standard, detail))
    return results


def suite_report(results: Sequence[OracleResult]) -> list[dict]:
    return [r.to_dict() for r in results]


def all_passed(results: Sequence[OracleResult]) -> bool:
    return all(r.passed for r in results)


__all__ = [
    "OracleResult",
    "REGISTRY",
    "DEFAULT_CONFIG",
    "oracle_convolution",
    "oracle_min_norm_extension",
    "oracle_inner",
    "oracle_comult",
    "oracle_tensor_norm_sq",
    "run_suite",
    "property_names",
    "random_kernel",
]
