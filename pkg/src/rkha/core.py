"""The weighted Fourier RKHS ``H_lam`` and its algebra structure.

Elements are stored by their Fourier coefficients on a truncated dual lattice.
With node measure ``h^d`` (1 on Z^d) and characters
``gamma_k(x) = exp(2 pi i <h k, x>)``:

* ``<f, g> = h^d sum f^(k) conj(g^(k)) / lam(k)``
* ``f(x) = h^d sum f^(k) gamma_k(x)``
* ``k_x^(k) = lam(k) conj(gamma_k(x))``

Comultiplication acts on coefficients as
``Delta(f)^(a, b) = f^(a + b) lam(a) lam(b) / lam(a + b)`` and pointwise
multiplication (its adjoint) is convolution of coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    GridTooCoarse,
    NoConvergence,
    RadiusMismatch,
    TensorTooLarge,
    WeightMismatch,
    ZeroElement,
)
from .lattice import DualLattice, LatticeArray, LatticeKind, convolve
from .weights import Weight, subconvolutivity_constant, subconvolutivity_history

TENSOR_SIZE_CAP = 2**28
POWER_MAX_ITER = 10_000
POWER_TOL = 1e-8


def characters(lattice: DualLattice, x) -> np.ndarray:
    """``gamma_k(x)`` for every node, shape ``(m, size)`` for ``m`` points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != lattice.dimension:
        x = x.reshape(-1, lattice.dimension)
    freq = lattice.frequencies().reshape(-1, lattice.dimension)
    return np.exp(2j * np.pi * (x @ freq.T))


@dataclass(frozen=True, eq=False)
class SpectralFn:
    """An element of ``H_lam`` given by its coefficients on a lattice window."""

    weight: Weight
    coeffs: LatticeArray = field(repr=False)

    def __post_init__(self):
        if not self.weight.lattice.compatible(self.coeffs.lattice):
            raise WeightMismatch("coefficients live on a different group than the weight")
        if self.coeffs.radius > self.weight.max_radius:
            raise RadiusMismatch(
                f"weight known on radius {self.weight.max_radius}, coefficients need {self.coeffs.radius}"
            )

    @classmethod
    def from_values(cls, weight: Weight, radius: int, values) -> "SpectralFn":
        return cls(weight, LatticeArray(weight.lattice.with_radius(radius), values))

    @classmethod
    def zeros(cls, weight: Weight, radius: int) -> "SpectralFn":
        return cls(weight, LatticeArray.zeros(weight.lattice.with_radius(radius)))

    @property
    def lattice(self) -> DualLattice:
        return self.coeffs.lattice

    @property
    def radius(self) -> int:
        return self.coeffs.radius

    @property
    def values(self) -> np.ndarray:
        return self.coeffs.values

    @cached_property
    def lam(self) -> np.ndarray:
        return self.weight.values(self.radius)

    def norm_sq(self) -> float:
        return float(self.lattice.node_measure * np.sum(np.abs(self.values) ** 2 / self.lam))

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def __call__(self, x) -> np.ndarray:
        """Point evaluation; returns one value per row of ``x``."""
        chars = characters(self.lattice, x)
        return self.lattice.node_measure * (chars @ self.values.ravel())

    def restrict(self, radius: int) -> "SpectralFn":
        return SpectralFn(self.weight, self.coeffs.restrict(radius))

    def pad(self, radius: int) -> "SpectralFn":
        return SpectralFn(self.weight, self.coeffs.pad(radius))

    def resize(self, radius: int) -> "SpectralFn":
        return SpectralFn(self.weight, self.coeffs.resize(radius))

    def _binary(self, other: "SpectralFn", op) -> "SpectralFn":
        _check_same_weight(self, other)
        r = max(self.radius, other.radius)
        a, b = self.resize(r).values, other.resize(r).values
        return SpectralFn.from_values(self.weight, r, op(a, b))

    def __add__(self, other: "SpectralFn") -> "SpectralFn":
        return self._binary(other, np.add)

    def __sub__(self, other: "SpectralFn") -> "SpectralFn":
        return self._binary(other, np.subtract)

    def __mul__(self, scalar: complex) -> "SpectralFn":
        return SpectralFn.from_values(self.weight, self.radius, scalar * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralFn":
        return self * -1

    def header(self) -> dict:
        return {"weight": self.weight.spec()}

    def save(self, path) -> None:
        self.coeffs.save(path, extra=self.header())

    @classmethod
    def load(cls, path) -> "SpectralFn":
        from .weights import parse_weight_spec

        arr, header = LatticeArray.load(path)
        if "weight" not in header:
            raise ValueError(f"{path}: header carries no weight spec")
        return cls(parse_weight_spec(header["weight"]), arr)


def _check_same_weight(f: SpectralFn, g: SpectralFn) -> None:
    if not f.weight.same_as(g.weight):
        raise WeightMismatch("elements belong to different spaces")


def unit(weight: Weight, radius: int) -> SpectralFn:
    """The constant function 1 (``1^ = delta_0``); only exists on Z^d."""
    if weight.lattice.kind is not LatticeKind.INTEGER:
        raise ValueError("the constant function is not in H on a continuous dual group")
    return SpectralFn(weight, LatticeArray.delta(weight.lattice.with_radius(radius)))


def is_unital(weight: Weight) -> bool:
    return weight.lattice.kind is LatticeKind.INTEGER


def random_element(weight: Weight, radius: int, rng: np.random.Generator,
                   support: int | None = None) -> SpectralFn:
    """Coefficients ``sqrt(lam / h^d) * z`` with ``z`` standard complex normal.

    ``z`` is white in the orthonormal basis ``psi_k``; nodes outside
    ``support`` (default: the whole window) are zero.
    """
    support = radius if support is None else support
    lat = weight.lattice.with_radius(support)
    z = (rng.standard_normal(lat.shape) + 1j * rng.standard_normal(lat.shape)) / math.sqrt(2)
    vals = np.sqrt(weight.values(support) / lat.node_measure) * z
    return SpectralFn.from_values(weight, support, vals).pad(radius)


def kernel_section(w: Weight, x, radius: int | None = None) -> SpectralFn:
    """``k_x`` with coefficients ``lam(k) conj(gamma_k(x))``."""
    radius = w.lattice.radius if radius is None else radius
    lat = w.lattice.with_radius(radius)
    chars = characters(lat, x)[0].reshape(lat.shape)
    return SpectralFn.from_values(w, radius, w.values(radius) * np.conj(chars))


def kernel_gram(w: Weight, points, radius: int | None = None) -> np.ndarray:
    """``K[i, j] = k(x_i, x_j) = <k_{x_j}, k_{x_i}> = h^d sum lam gamma(x_i) conj(gamma(x_j))``."""
    radius = w.lattice.radius if radius is None else radius
    lat = w.lattice.with_radius(radius)
    chars = characters(lat, points)
    lam = w.values(radius).ravel()
    return lat.node_measure * (chars * lam) @ chars.conj().T


def kernel_distance(w: Weight, x, y, radius: int | None = None) -> float:
    """``||k_x - k_y||``, summed term by term so that ``d(x, x)`` is exactly 0."""
    radius = w.lattice.radius if radius is None else radius
    lat = w.lattice.with_radius(radius)
    diff = characters(lat, x)[0] - characters(lat, y)[0]
    lam = w.values(radius).ravel()
    return math.sqrt(lat.node_measure * float(np.sum(lam * np.abs(diff) ** 2)))


def inner(f: SpectralFn, g: SpectralFn) -> complex:
    _check_same_weight(f, g)
    r = max(f.radius, g.radius)
    f, g = f.resize(r), g.resize(r)
    return complex(f.lattice.node_measure * np.sum(f.values * np.conj(g.values) / f.lam))


# -- tensors -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TensorCoeffs:
    """Coefficients ``F^(a, b)`` on the product of two radius-``radius`` windows.

    ``coeffs`` is a ``(size, size)`` matrix indexed by flattened nodes.
    """

    weight: Weight
    radius: int
    coeffs: np.ndarray = field(repr=False)

    @property
    def lattice(self) -> DualLattice:
        return self.weight.lattice.with_radius(self.radius)

    @cached_property
    def lam_pair(self) -> np.ndarray:
        lam = self.weight.values(self.radius).ravel()
        return np.outer(lam, lam)

    def norm_sq(self) -> float:
        h = self.lattice.node_measure
        return float(h * h * np.sum(np.abs(self.coeffs) ** 2 / self.lam_pair))

    def norm(self) -> float:
        return math.sqrt(self.norm_sq())

    def __sub__(self, other: "TensorCoeffs") -> "TensorCoeffs":
        _check_tensor_pair(self, other)
        return TensorCoeffs(self.weight, self.radius, self.coeffs - other.coeffs)


def _check_tensor_pair(a: TensorCoeffs, b: TensorCoeffs) -> None:
    if not a.weight.same_as(b.weight):
        raise WeightMismatch("tensors belong to different spaces")
    if a.radius != b.radius:
        raise RadiusMismatch(f"tensor radii differ: {a.radius} vs {b.radius}")


def _guard_tensor_size(lattice: DualLattice, cap: int) -> None:
    n = lattice.size**2
    if n > cap:
        raise TensorTooLarge(f"tensor on radius {lattice.radius} needs {n} scalars (cap {cap})")


def tensor(f: SpectralFn, g: SpectralFn, cap: int = TENSOR_SIZE_CAP) -> TensorCoeffs:
    """``f (x) g`` on the common radius of the two factors."""
    _check_same_weight(f, g)
    if f.radius != g.radius:
        raise RadiusMismatch("tensor factors must share a radius")
    _guard_tensor_size(f.lattice, cap)
    return TensorCoeffs(f.weight, f.radius, np.outer(f.values.ravel(), g.values.ravel()))


def tensor_inner(F: TensorCoeffs, G: TensorCoeffs) -> complex:
    _check_tensor_pair(F, G)
    h = F.lattice.node_measure
    return complex(h * h * np.sum(F.coeffs * np.conj(G.coeffs) / F.lam_pair))


def _pair_sum_positions(lattice: DualLattice, target_radius: int) -> tuple:
    """Flattened positions of ``a + b`` inside a radius-``target_radius`` window."""
    idx = lattice.indices().reshape(-1, lattice.dimension)
    sums = idx[:, None, :] + idx[None, :, :] + target_radius
    side = 2 * target_radius + 1
    flat = np.zeros(sums.shape[:2], dtype=np.int64)
    for axis in range(lattice.dimension):
        flat = flat * side + sums[..., axis]
    return flat


def comult(f: SpectralFn, tensor_radius: int | None = None, cap: int = TENSOR_SIZE_CAP) -> TensorCoeffs:
    """``Delta(f)^(a, b) = f^(a + b) lam(a) lam(b) / lam(a + b)`` for ``|a|, |b| <= T``.

    ``f`` must reach radius ``2T`` so that every ``a + b`` is available;
    ``T`` defaults to half of ``f``'s radius.
    """
    T = f.radius // 2 if tensor_radius is None else tensor_radius
    if f.radius < 2 * T:
        raise RadiusMismatch(f"comult to radius {T} needs coefficients on radius {2 * T}, have {f.radius}")
    lat = f.lattice.with_radius(T)
    _guard_tensor_size(lat, cap)
    src = f.restrict(2 * T)
    pos = _pair_sum_positions(lat, 2 * T)
    lam_T = f.weight.values(T).ravel()
    fhat = src.values.ravel()[pos]
    lam_sum = src.lam.ravel()[pos]
    return TensorCoeffs(f.weight, T, fhat * np.outer(lam_T, lam_T) / lam_sum)


def comult_norm_sq_formula(f: SpectralFn, tensor_radius: int | None = None) -> float:
    """``||Delta f||^2 = h^d sum (lam_T * lam_T)(g) |f^(g)|^2 / lam(g)^2``.

    ``lam_T`` is the weight restricted to the tensor window, so the identity
    holds exactly on the truncation.
    """
    T = f.radius // 2 if tensor_radius is None else tensor_radius
    if f.radius < 2 * T:
        raise RadiusMismatch(f"need coefficients on radius {2 * T}")
    lam_T = f.weight.array(T).pad(4 * T)
    conv = convolve(lam_T, lam_T, 2 * T).values.real
    src = f.restrict(2 * T)
    h = f.lattice.node_measure
    return float(h * np.sum(conv * np.abs(src.values) ** 2 / src.lam**2))


def multiply(f: SpectralFn, g: SpectralFn, out_radius: int | None = None) -> SpectralFn:
    """Pointwise product: ``(fg)^ = f^ * g^`` on ``|g| <= out_radius``.

    Inputs must reach twice the output radius (default: half the smaller input
    radius); the product is never truncated silently.
    """
    _check_same_weight(f, g)
    out_radius = min(f.radius, g.radius) // 2 if out_radius is None else out_radius
    conv = convolve(f.coeffs, g.coeffs, out_radius)
    return SpectralFn(f.weight, conv)


def is_group_like(xi: SpectralFn, tol: float = 1e-8, tensor_radius: int | None = None) -> tuple[bool, float]:
    """Test ``Delta(xi) = xi (x) xi``; returns ``(verdict, relative residual)``."""
    if not np.any(xi.values):
        raise ZeroElement("the zero element is never group-like")
    T = xi.radius // 2 if tensor_radius is None else tensor_radius
    head = xi.restrict(T)
    scale = head.norm_sq()
    if scale == 0:
        raise ZeroElement("element vanishes on the tensor window")
    residual = (comult(xi, T) - tensor(head, head)).norm() / scale
    return residual < tol, residual


# -- operator norms and reports ------------------------------------------------


@dataclass
class ComultReport:
    delta_norm: float
    banach_scale: float
    unital: bool
    certified: bool
    status: str
    radius: int
    C_R: float
    C_history: list[tuple[int, float]]
    kernel_diag_max: float
    kernel_bound_holds: bool
    norm_choice: str

    def to_dict(self) -> dict:
        return {
            "delta_norm": self.delta_norm,
            "banach_scale": self.banach_scale,
            "unital": self.unital,
            "certified": self.certified,
            "status": self.status,
            "radius": self.radius,
            "C_R": self.C_R,
            "C_history": [[r, c] for r, c in self.C_history],
            "kernel_diag_max": self.kernel_diag_max,
            "kernel_bound_holds": self.kernel_bound_holds,
            "norm_choice": self.norm_choice,
        }


def _sample_points(lattice: DualLattice, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = rng.random((count, lattice.dimension))
    if lattice.kind is LatticeKind.GRID:
        pts = 4 * pts - 2
    return pts


def comult_report(w: Weight, radius: int, samples: int = 8, seed: int = 42) -> ComultReport:
    """Norm of the comultiplication on the radius-``radius`` truncation.

    ``delta_norm = sqrt(C_R)`` with ``C_R`` from the weights module; the
    doubling history decides whether that value is certified. The Banach
    norm is the Hilbert norm scaled by ``delta_norm``.
    """
    C_R = subconvolutivity_constant(w, radius).constant
    summary = subconvolutivity_history(w, radius)
    delta_norm = math.sqrt(C_R)
    pts = _sample_points(w.lattice, samples, seed)
    diag = np.real(np.diag(kernel_gram(w, pts, radius)))
    kmax = float(np.max(diag))
    return ComultReport(
        delta_norm=delta_norm,
        banach_scale=delta_norm,
        unital=is_unital(w),
        certified=summary.certified,
        status=summary.status,
        radius=radius,
        C_R=C_R,
        C_history=summary.history,
        kernel_diag_max=kmax,
        kernel_bound_holds=math.sqrt(kmax) <= delta_norm * (1 + 1e-9),
        norm_choice="banach = delta_norm * hilbert",
    )


def banach_norm(f: SpectralFn, delta_norm: float) -> float:
    return delta_norm * f.norm()


def mult_operator_norm(f: SpectralFn, radius: int | None = None, tol: float = POWER_TOL,
                       max_iter: int = POWER_MAX_ITER) -> float:
    """Power-iteration estimate of ``||M_f||`` on radius-``radius`` functions.

    Works in the orthonormal coordinates ``u = g^ / sqrt(lam h^d)`` and
    iterates ``A* A`` from the normalized all-ones coefficient vector until
    the singular value estimate changes by less than ``tol`` (relative).
    """
    R = f.radius // 2 if radius is None else radius
    if f.radius < 2 * R:
        raise RadiusMismatch(f"M_f on radius {R} needs f on radius {2 * R}")
    lat = f.lattice.with_radius(R)
    scale = np.sqrt(f.weight.values(R) / lat.node_measure)
    fhat = f.coeffs
    fadj = LatticeArray(fhat.lattice, np.conj(fhat.reflect().values))

    def apply(u):
        g = LatticeArray(lat, scale * u).pad(2 * R)
        return convolve(fhat, g, R).values / scale

    def apply_adj(v):
        g = LatticeArray(lat, v / scale).pad(2 * R)
        return scale * convolve(fadj, g, R).values

    u = 1.0 / scale
    u = u / np.linalg.norm(u)
    sigma_prev = None
    for _ in range(max_iter):
        v = apply(u)
        sigma = float(np.linalg.norm(v))
        if sigma == 0.0:
            return 0.0
        if sigma_prev is not None and abs(sigma - sigma_prev) <= tol * sigma:
            return sigma
        sigma_prev = sigma
        u = apply_adj(v)
        u = u / np.linalg.norm(u)
    raise NoConvergence(f"power iteration did not settle within {max_iter} steps")


# -- weak approximate unit on R^d --------------------------------------------


def approx_unit_bound(n: int, w: Weight) -> float:
    """``exp(tau (1/2n)^p)`` bounding ``||eta_n xi||^2 / ||xi||^2`` (hence also the ratio)."""
    fam = w.family
    return math.exp(fam.tau * (1.0 / (2 * n)) ** fam.p)


def approx_unit(n: int, w: Weight, radius: int | None = None) -> SpectralFn:
    """``eta_n`` sampled from ``n^d 1_{[-1/2n, 1/2n]^d}``.

    Each node carries the fraction of its quadrature cell ``[kh - h/2, kh + h/2]``
    that lies in the window, so nodes sitting exactly on the window edge count
    half. :func:`approx_unit_mass` reports the resulting quadrature mass.
    """
    if w.lattice.kind is not LatticeKind.GRID:
        raise ValueError("the approximate unit lives on a continuous dual group")
    if not w.is_family:
        raise ValueError("approximate unit needs a sub-exponential family weight")
    if n < 1:
        raise ValueError("n must be positive")
    h = w.lattice.step
    if h > 1.0 / n:
        raise GridTooCoarse(f"step {h} exceeds the window width 1/n = {1.0 / n}")
    radius = w.lattice.radius if radius is None else radius
    lat = w.lattice.with_radius(radius)
    half = 1.0 / (2 * n)
    centers = lat.frequencies()
    lo = np.maximum(centers - h / 2, -half)
    hi = np.minimum(centers + h / 2, half)
    frac = np.prod(np.clip(hi - lo, 0.0, None) / h, axis=-1)
    return SpectralFn.from_values(w, radius, float(n) ** lat.dimension * frac)


def approx_unit_mass(eta: SpectralFn) -> float:
    """Quadrature mass ``h^d sum eta^``; 1 in the continuum."""
    return float(eta.lattice.node_measure * np.sum(eta.values.real))


def gaussian_test_pair(w: Weight, radius: int) -> tuple[SpectralFn, SpectralFn]:
    """Fixed smooth pair with Gaussian coefficients (the second one shifted)."""
    freq = w.lattice.with_radius(radius).frequencies()
    r2 = np.sum(freq**2, axis=-1)
    r2_shift = np.sum((freq - 0.25) ** 2, axis=-1)
    xi = SpectralFn.from_values(w, radius, np.exp(-np.pi * r2))
    zeta = SpectralFn.from_values(w, radius, np.exp(-np.pi * r2_shift / 2.0))
    return xi, zeta


@dataclass
class ApproxUnitRow:
    n: int
    bound: float
    mass: float
    max_ratio: float
    gap: float
    error: str | None = None


def approx_unit_study(w: Weight, ns, samples: int = 100, seed: int = 42,
                      support: int | None = None) -> list[ApproxUnitRow]:
    """Norm ratios ``||eta_n xi|| / ||xi||`` and weak-convergence gaps.

    ``xi`` ranges over ``samples`` seeded random elements supported on
    ``support`` (default half the working radius); the gap is
    ``|<eta_n xi, zeta> - <xi, zeta>|`` for :func:`gaussian_test_pair`.
    """
    R = w.lattice.radius
    support = R // 2 if support is None else support
    rng = np.random.default_rng(seed)
    xis = [random_element(w, 2 * R, rng, support=support) for _ in range(samples)]
    xi_t, zeta_t = gaussian_test_pair(w, support)
    xi_t, zeta_t = xi_t.pad(2 * R), zeta_t.pad(R)
    base = inner(xi_t.restrict(R), zeta_t)
    rows = []
    for n in ns:
        try:
            eta = approx_unit(n, w, 2 * R)
        except GridTooCoarse as exc:
            rows.append(ApproxUnitRow(n, approx_unit_bound(n, w), math.nan, math.nan, math.nan, str(exc)))
            continue
        ratio = max(multiply(eta, xi, R).norm() / xi.norm() for xi in xis)
        gap = abs(inner(multiply(eta, xi_t, R), zeta_t) - base)
        rows.append(ApproxUnitRow(n, approx_unit_bound(n, w), approx_unit_mass(eta), ratio, gap))
    return rows
