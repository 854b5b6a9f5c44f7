"""Kernel constructions on finite point samples.

Every construction works at the level of Gram matrices over opaque string
labels, so it is indifferent to where the points came from. Outputs are
validated as Hermitian positive semidefinite before they are returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import fileformat
from .errors import (
    DimensionMismatch,
    NotPositiveSemidefinite,
    PhiOutOfRange,
    PointSetMismatch,
    SingularGram,
)

HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-10
PINV_CUTOFF = 1e-12
PUSHOUT_MAX_COND = 1e12
INFINITY = "∞"


def min_eigenvalue(gram: np.ndarray) -> float:
    if gram.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh((gram + gram.conj().T) / 2)[0])


def psd_residual(gram: np.ndarray) -> float:
    """``max(0, -min_eig) / max(trace, tiny)``; at most 1e-10 for a valid Gram."""
    if gram.size == 0:
        return 0.0
    trace = float(np.real(np.trace(gram)))
    return max(0.0, -min_eigenvalue(gram)) / max(trace, np.finfo(float).tiny)


def validate_gram(gram: np.ndarray) -> None:
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise DimensionMismatch(f"Gram matrix must be square, got shape {gram.shape}")
    if gram.size == 0:
        return
    scale = max(float(np.max(np.abs(gram))), np.finfo(float).tiny)
    if np.max(np.abs(gram - gram.conj().T)) > HERMITIAN_RTOL * scale:
        raise NotPositiveSemidefinite("Gram matrix is not Hermitian")
    lam_min = min_eigenvalue(gram)
    trace = float(np.real(np.trace(gram)))
    if lam_min < -PSD_RTOL * trace or (trace < 0):
        raise NotPositiveSemidefinite(
            f"Gram matrix is not positive semidefinite (min eigenvalue {lam_min:.6g})", lam_min
        )


@dataclass(frozen=True, eq=False)
class SampledKernel:
    points: tuple[str, ...]
    gram: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        points = tuple(str(p) for p in self.points)
        if len(set(points)) != len(points):
            raise PointSetMismatch("point labels must be unique")
        gram = np.array(self.gram, dtype=np.complex128)
        if gram.size == 0:
            gram = gram.reshape(0, 0)
        if gram.shape != (len(points), len(points)):
            raise DimensionMismatch(f"{len(points)} points but Gram shape {gram.shape}")
        validate_gram(gram)
        gram.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "gram", gram)

    def __len__(self) -> int:
        return len(self.points)

    def index(self, label: str) -> int:
        try:
            return self.points.index(label)
        except ValueError:
            raise PhiOutOfRange(f"{label!r} is not a point of this kernel") from None

    def __call__(self, x: str, y: str) -> complex:
        return complex(self.gram[self.index(x), self.index(y)])

    def save(self, path: str | Path) -> None:
        header = {"points": list(self.points)}
        if self.meta:
            header["meta"] = self.meta
        fileformat.write_array(path, header, self.gram)

    @classmethod
    def load(cls, path: str | Path) -> "SampledKernel":
        header, gram = fileformat.read_array(path)
        if "points" not in header:
            raise ValueError(f"{path}: header has no 'points'")
        n = len(header["points"])
        return cls(header["points"], gram.reshape(n, n), header.get("meta", {}))


@dataclass(frozen=True, eq=False)
class FiniteRkhsElement:
    """A function on the sample given by its values; norm is ``v^H K^+ v``."""

    kernel: SampledKernel
    values: np.ndarray

    def norm_sq(self) -> float:
        v = np.asarray(self.values, dtype=np.complex128)
        return float(np.real(v.conj() @ pinv_hermitian(self.kernel.gram) @ v))


def pinv_hermitian(gram: np.ndarray, cutoff: float = PINV_CUTOFF) -> np.ndarray:
    """Spectral pseudo-inverse; eigenvalues below ``cutoff * lam_max`` count as zero."""
    if gram.size == 0:
        return gram.copy()
    evals, evecs = np.linalg.eigh((gram + gram.conj().T) / 2)
    top = max(float(evals[-1]), 0.0)
    keep = evals > cutoff * top
    inv = np.zeros_like(evals)
    inv[keep] = 1.0 / evals[keep]
    return (evecs * inv) @ evecs.conj().T


# -- constructions -------------------------------------------------------------


def tensor_kernel(k1: SampledKernel, k2: SampledKernel) -> SampledKernel:
    """``k((x1, x2), (y1, y2)) = k1(x1, y1) k2(x2, y2)`` on the product set."""
    points = [f"({a},{b})" for a in k1.points for b in k2.points]
    return SampledKernel(points, np.kron(k1.gram, k2.gram))


def direct_sum_kernel(k1: SampledKernel, k2: SampledKernel) -> SampledKernel:
    """Block-diagonal Gram on the disjoint union; labels are tagged ``0:``/``1:``."""
    n1, n2 = len(k1), len(k2)
    gram = np.zeros((n1 + n2, n1 + n2), dtype=np.complex128)
    gram[:n1, :n1] = k1.gram
    gram[n1:, n1:] = k2.gram
    points = [f"0:{p}" for p in k1.points] + [f"1:{p}" for p in k2.points]
    return SampledKernel(points, gram)


def _same_points(k1: SampledKernel, k2: SampledKernel) -> None:
    if k1.points != k2.points:
        raise PointSetMismatch("kernels must live on the same ordered point list")


def sum_kernel(k1: SampledKernel, k2: SampledKernel) -> SampledKernel:
    # pointwise sums are not algebra-compatible; kept as a plain RKHS construction
    _same_points(k1, k2)
    return SampledKernel(k1.points, k1.gram + k2.gram)


def product_kernel(k1: SampledKernel, k2: SampledKernel) -> SampledKernel:
    """Hadamard product; PSD by the Schur product theorem."""
    _same_points(k1, k2)
    return SampledKernel(k1.points, k1.gram * k2.gram)


def _phi_indices(phi: Mapping[str, str], target: SampledKernel) -> list[int]:
    return [target.index(phi[s]) for s in phi]


def pullback_kernel(k: SampledKernel, phi: Mapping[str, str]) -> SampledKernel:
    """``(k o phi)(s, t) = k(phi(s), phi(t))`` on the domain of ``phi``."""
    idx = _phi_indices(phi, k)
    return SampledKernel(list(phi), k.gram[np.ix_(idx, idx)])


def pullback_norm_sq(k: SampledKernel, phi: Mapping[str, str], values) -> float:
    """``||xi||^2`` in the pullback space, ``v^H (K_phi)^+ v``."""
    pulled = pullback_kernel(k, phi)
    return FiniteRkhsElement(pulled, np.asarray(values, dtype=np.complex128)).norm_sq()


@dataclass
class Pushout:
    kernel: SampledKernel
    projection: np.ndarray
    fibers: dict[str, list[str]]
    empty_fibers: list[str]
    representative_spread: float


def pushout(k: SampledKernel, phi: Mapping[str, str], targets: Sequence[str] | None = None) -> Pushout:
    """Push ``H(k)`` forward along ``phi: X -> S``.

    ``H~`` is the subspace of functions constant on each fiber, ``P`` the
    projection onto it that is orthogonal for ``<u, v> = v^H K^-1 u``, and
    ``k_phi(s, t) = (P k_{x_t})(x_s)`` for fiber representatives. Targets
    with an empty fiber keep zero rows and columns.
    """
    missing = [x for x in k.points if x not in phi]
    if missing:
        raise PhiOutOfRange(f"phi is undefined on {missing}")
    targets = list(dict.fromkeys(phi.values())) if targets is None else [str(t) for t in targets]
    unknown = sorted(set(phi.values()) - set(targets))
    if unknown:
        raise PhiOutOfRange(f"phi maps into {unknown}, which are not listed targets")
    K = k.gram
    n = len(k)
    if n and np.linalg.cond(K) > PUSHOUT_MAX_COND:
        raise SingularGram(f"pushout needs a nondegenerate Gram (condition {np.linalg.cond(K):.3g})")
    fibers = {t: [x for x in k.points if phi[x] == t] for t in targets}
    image = [t for t in targets if fibers[t]]
    E = np.zeros((n, len(image)))
    for j, t in enumerate(image):
        for x in fibers[t]:
            E[k.index(x), j] = 1.0
    Kinv_E = np.linalg.solve(K, E) if n else E
    Gm = E.T @ Kinv_E
    P = E @ np.linalg.solve(Gm, Kinv_E.conj().T) if image else np.zeros((n, n))
    ktilde = P @ K  # column y is P k_y, evaluated at every x

    gram = np.zeros((len(targets), len(targets)), dtype=np.complex128)
    spread = 0.0
    pos = {t: i for i, t in enumerate(targets)}
    for s in image:
        rows = [k.index(x) for x in fibers[s]]
        for t in image:
            cols = [k.index(y) for y in fibers[t]]
            block = ktilde[np.ix_(rows, cols)]
            gram[pos[s], pos[t]] = block[0, 0]
            spread = max(spread, float(np.max(np.abs(block - block[0, 0]))))
    if spread > 1e-10 * max(float(np.max(np.abs(K))), 1.0):
        raise SingularGram(f"pushout kernel depends on the fiber representative (spread {spread:.3g})")
    gram = (gram + gram.conj().T) / 2
    empty = [t for t in targets if not fibers[t]]
    meta = {"empty_fibers": empty} if empty else {}
    return Pushout(SampledKernel(targets, gram, meta), P, fibers, empty, spread)


def pushout_kernel(k: SampledKernel, phi: Mapping[str, str], targets: Sequence[str] | None = None) -> SampledKernel:
    return pushout(k, phi, targets).kernel


def unitalize_kernel(k: SampledKernel, infinity: str = INFINITY) -> SampledKernel:
    """Adjoin the point at infinity: ``1 + k`` on the old points, ``1`` elsewhere.

    The new point comes first, so the Gram is ``[[1, 1^T], [1, J + K]]``.
    """
    if infinity in k.points:
        raise PointSetMismatch(f"label {infinity!r} already used")
    n = len(k)
    gram = np.ones((n + 1, n + 1), dtype=np.complex128)
    gram[1:, 1:] += k.gram
    return SampledKernel((infinity,) + k.points, gram)


def feature_map_kernel(features, labels: Sequence[str] | None = None) -> SampledKernel:
    """``k(x, y) = <phi(y) | phi(x)> = sum_i phi(x)_i conj(phi(y)_i)``."""
    rows = [np.asarray(f, dtype=np.complex128).ravel() for f in features]
    if rows and len({r.size for r in rows}) != 1:
        raise DimensionMismatch("feature vectors must share a dimension")
    F = np.array(rows) if rows else np.zeros((0, 0), dtype=np.complex128)
    labels = [f"x{i}" for i in range(len(rows))] if labels is None else list(labels)
    return SampledKernel(labels, F @ F.conj().T)


# -- metric diagnostics ----------------------------------------------------------


@dataclass
class MetricTable:
    points: np.ndarray
    gram: np.ndarray
    distance: np.ndarray
    kappa: np.ndarray
    kappa_residual: float
    shift_residual: float | None = None

    def rows(self):
        """``(i, j, Re k, Im k, d, kappa_i)`` in row-major order."""
        m = len(self.kappa)
        for i in range(m):
            for j in range(m):
                k = self.gram[i, j]
                yield i, j, float(k.real), float(k.imag), float(self.distance[i, j]), float(self.kappa[i])


def metric_diagnostics(w, points, radius: int | None = None, shift=None) -> MetricTable:
    """``d(x, y) = ||k_x - k_y||`` and ``kappa(x) = k(x, x)`` on sample points.

    ``kappa_residual`` is ``max |kappa(x) - kappa(0)| / kappa(0)``; with
    ``shift`` the table also reports ``max |d(x+t, y+t) - d(x, y)|`` relative
    to ``sqrt(kappa(0))``.
    """
    from . import core

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    gram = core.kernel_gram(w, pts, radius)
    m = len(pts)
    dist = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            dist[i, j] = dist[j, i] = core.kernel_distance(w, pts[i], pts[j], radius)
    kappa = np.real(np.diag(gram)).copy()
    kappa0 = float(np.real(core.kernel_gram(w, np.zeros((1, pts.shape[1])), radius)[0, 0]))
    kres = float(np.max(np.abs(kappa - kappa0))) / kappa0 if m else 0.0
    shift_res = None
    if shift is not None:
        moved = pts + np.asarray(shift, dtype=float)
        worst = 0.0
        for i in range(m):
            for j in range(i + 1, m):
                d_moved = core.kernel_distance(w, moved[i], moved[j], radius)
                worst = max(worst, abs(d_moved - dist[i, j]))
        shift_res = worst / np.sqrt(kappa0)
    return MetricTable(pts, gram, dist, kappa, kres, shift_res)
