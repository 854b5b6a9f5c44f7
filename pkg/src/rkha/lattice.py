"""Truncated dual lattices and the convolution engine.

A :class:`DualLattice` is the box ``|k_i| <= R`` of integer indices, standing
either for the dual group Z^d of the torus (counting measure) or for a uniform
grid ``h * Z^d`` approximating R^d (rectangle-rule measure ``h^d``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .errors import LatticeKindMismatch, RadiusMismatch
from . import fileformat

# direct summation below this many multiply-adds, FFT above
DIRECT_WORK_LIMIT = 2**26


class LatticeKind(str, enum.Enum):
    INTEGER = "IntegerLattice"
    GRID = "ScaledGrid"


@dataclass(frozen=True)
class DualLattice:
    dimension: int
    radius: int
    kind: LatticeKind = LatticeKind.INTEGER
    step: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LatticeKind(self.kind))
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        if self.kind is LatticeKind.INTEGER:
            if self.step != 1.0:
                raise ValueError("integer lattices have step 1")
        elif not self.step > 0:
            raise ValueError("grid step must be positive")
        object.__setattr__(self, "step", float(self.step))

    @classmethod
    def integer(cls, dimension: int, radius: int) -> "DualLattice":
        return cls(dimension, radius)

    @classmethod
    def grid(cls, dimension: int, radius: int, step: float) -> "DualLattice":
        return cls(dimension, radius, LatticeKind.GRID, step)

    @property
    def node_measure(self) -> float:
        return self.step**self.dimension

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dimension

    @property
    def size(self) -> int:
        return self.side**self.dimension

    def with_radius(self, radius: int) -> "DualLattice":
        return DualLattice(self.dimension, radius, self.kind, self.step)

    def compatible(self, other: "DualLattice") -> bool:
        """Same group and discretization, radius aside."""
        return (self.dimension, self.kind, self.step) == (other.dimension, other.kind, other.step)

    def indices(self) -> np.ndarray:
        """Integer indices of all nodes, shape ``(*self.shape, d)``."""
        axis = np.arange(-self.radius, self.radius + 1)
        grids = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack(grids, axis=-1)

    def frequencies(self) -> np.ndarray:
        """Node positions in the dual group, ``h * index``."""
        return self.step * self.indices()

    def position(self, index) -> tuple[int, ...]:
        """Array position of a signed lattice index."""
        index = tuple(int(i) for i in np.atleast_1d(index))
        if len(index) != self.dimension:
            raise ValueError(f"index {index} has wrong dimension for d={self.dimension}")
        return tuple(i + self.radius for i in index)

    def contains(self, index) -> bool:
        return all(abs(int(i)) <= self.radius for i in np.atleast_1d(index))

    def header(self) -> dict:
        return {"kind": self.kind.value, "d": self.dimension, "h": self.step, "R": self.radius}

    @classmethod
    def from_header(cls, header: dict) -> "DualLattice":
        return cls(int(header["d"]), int(header["R"]), LatticeKind(header["kind"]), float(header["h"]))


def enlarge(lat: DualLattice, factor: int) -> DualLattice:
    if factor < 1:
        raise ValueError("factor must be >= 1")
    return lat.with_radius(lat.radius * factor)


@dataclass(frozen=True)
class LatticeArray:
    lattice: DualLattice
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.size != self.lattice.size:
            raise ValueError(f"expected {self.lattice.size} values, got {values.size}")
        values = values.reshape(self.lattice.shape)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, lattice: DualLattice) -> "LatticeArray":
        return cls(lattice, np.zeros(lattice.shape, dtype=np.complex128))

    @classmethod
    def delta(cls, lattice: DualLattice, index=None, scale: complex = 1.0) -> "LatticeArray":
        values = np.zeros(lattice.shape, dtype=np.complex128)
        index = (0,) * lattice.dimension if index is None else index
        values[lattice.position(index)] = scale
        return cls(lattice, values)

    @property
    def radius(self) -> int:
        return self.lattice.radius

    def __getitem__(self, index) -> complex:
        return complex(self.values[self.lattice.position(index)])

    def restrict(self, radius: int) -> "LatticeArray":
        """Central crop to a smaller radius."""
        if radius > self.radius:
            raise RadiusMismatch(f"cannot restrict radius {self.radius} to {radius}")
        cut = self.radius - radius
        sl = (slice(cut, cut + 2 * radius + 1),) * self.lattice.dimension
        return LatticeArray(self.lattice.with_radius(radius), self.values[sl])

    def pad(self, radius: int) -> "LatticeArray":
        """Zero-extend to a larger radius."""
        if radius < self.radius:
            raise RadiusMismatch(f"cannot pad radius {self.radius} to {radius}")
        grow = radius - self.radius
        return LatticeArray(self.lattice.with_radius(radius), np.pad(self.values, grow))

    def resize(self, radius: int) -> "LatticeArray":
        return self.pad(radius) if radius >= self.radius else self.restrict(radius)

    def reflect(self) -> "LatticeArray":
        """``a(-k)``."""
        return LatticeArray(self.lattice, self.values[(slice(None, None, -1),) * self.lattice.dimension])

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        header = self.lattice.header()
        if extra:
            header.update(extra)
        fileformat.write_array(path, header, self.values)

    @classmethod
    def load(cls, path: str | Path) -> tuple["LatticeArray", dict]:
        header, values = fileformat.read_array(path)
        return cls(DualLattice.from_header(header), values), header


def _check_pair(a: LatticeArray, b: LatticeArray, out_radius: int) -> None:
    if not a.lattice.compatible(b.lattice):
        raise LatticeKindMismatch(f"{a.lattice} vs {b.lattice}")
    for arr in (a, b):
        if arr.radius < 2 * out_radius:
            raise RadiusMismatch(
                f"input radius {arr.radius} < 2 * out_radius {out_radius}; enlarge the inputs"
            )


def convolve(a: LatticeArray, b: LatticeArray, out_radius: int, method: str = "auto") -> LatticeArray:
    """Lattice convolution ``h^d * sum_alpha a(alpha) b(gamma - alpha)`` on ``|gamma| <= out_radius``.

    Both inputs must reach at least twice the output radius, so every term that
    lands in the output window is present: nothing near the boundary is lost
    to truncation and nothing wraps around.

    Parameters
    ----------
    a, b
        Arrays on compatible lattices (same kind, step and dimension).
    out_radius
        Radius of the returned window.
    method
        ``"direct"`` (exact summation), ``"fft"``, or ``"auto"`` which picks
        direct summation unless the work exceeds :data:`DIRECT_WORK_LIMIT`.
    """
    _check_pair(a, b, out_radius)
    if method == "auto":
        method = "direct" if a.lattice.size * b.lattice.size <= DIRECT_WORK_LIMIT else "fft"
    if method not in ("direct", "fft"):
        raise ValueError(f"unknown method {method!r}")
    full = signal.convolve(a.values, b.values, mode="full", method=method)
    # full result has radius Ra + Rb, centred at that index
    center = a.radius + b.radius
    sl = (slice(center - out_radius, center + out_radius + 1),) * a.lattice.dimension
    out_lattice = a.lattice.with_radius(out_radius)
    return LatticeArray(out_lattice, a.lattice.node_measure * full[sl])

