"""Weights on a dual lattice and analyzers for the conditions they may satisfy.

Three conditions are checked:

* subconvolutivity, ``(lam * lam)(g) <= C lam(g)``, with the smallest such
  ``C`` estimated by doubling the truncation radius until it stabilizes;
* GRS, ``lam(n g)**(1/n) -> 1``;
* Beurling-Domar (BD), ``sum_n log(1/lam(n g)) / n**2 < inf``.

For the closed-form sub-exponential family the GRS and BD verdicts are
analytic (they only depend on ``p < 1``); for tabulated weights the verdicts
come from finite sequences and are reported as numeric evidence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NonPositiveWeight, ProbeOutOfRange, RadiusMismatch, SpecError
from .lattice import DualLattice, LatticeArray, LatticeKind, convolve

HOLDS = "Holds"
FAILS = "Fails"
INCONCLUSIVE = "Inconclusive"

SYMMETRY_RTOL = 1e-14
STABILIZATION_TOL = 1e-6
GRS_TOL = 1e-2
GRS_NMAX = 256


@dataclass(frozen=True)
class SubExp:
    """``lam(k) = exp(-tau * sum_i |k_i|**p)``."""

    tau: float
    p: float

    def __post_init__(self):
        if not self.tau > 0:
            raise SpecError("tau must be positive", "family.tau")
        if not 0 < self.p <= 1:
            raise SpecError("p must lie in (0, 1]", "family.p")


@dataclass(frozen=True, eq=False)
class Weight:
    """A strictly positive weight on the dual group.

    ``lattice`` fixes the group (Z^d or an ``h``-grid on R^d); for a table
    weight its radius is the tabulated radius, for a family weight the radius
    is only the nominal working radius since the closed form has no limit.
    """

    lattice: DualLattice
    family: SubExp | None = None
    table: LatticeArray | None = field(default=None, repr=False)

    def __post_init__(self):
        if (self.family is None) == (self.table is None):
            raise ValueError("a weight is either a family or a table")
        if self.table is not None:
            vals = self.table.values
            if np.any(np.abs(vals.imag) > 0) or not np.all(vals.real > 0):
                raise NonPositiveWeight("tabulated weight must be real and strictly positive")
            object.__setattr__(self, "lattice", self.table.lattice)

    @classmethod
    def subexp(cls, lattice: DualLattice, tau: float, p: float) -> "Weight":
        return cls(lattice, family=SubExp(float(tau), float(p)))

    @classmethod
    def from_table(cls, table: LatticeArray) -> "Weight":
        return cls(table.lattice, table=table)

    @property
    def is_family(self) -> bool:
        return self.family is not None

    @property
    def max_radius(self) -> float:
        return math.inf if self.is_family else self.table.radius

    @property
    def symmetric(self) -> bool:
        if self.is_family:
            return True
        vals = self.table.values.real
        flipped = self.table.reflect().values.real
        return bool(np.all(np.abs(vals - flipped) <= SYMMETRY_RTOL * np.abs(vals)))

    def log_inverse_at(self, indices) -> np.ndarray:
        """``log(1/lam)`` at signed integer indices (last axis = coordinates)."""
        indices = np.asarray(indices)
        if self.is_family:
            freq = self.lattice.step * np.abs(indices)
            return self.family.tau * np.sum(freq**self.family.p, axis=-1)
        return -np.log(self.at(indices))

    def at(self, indices) -> np.ndarray:
        """``lam`` at signed integer indices; tables raise outside their radius."""
        indices = np.asarray(indices)
        if self.is_family:
            return np.exp(-self.log_inverse_at(indices))
        r = self.table.radius
        if np.any(np.abs(indices) > r):
            raise ProbeOutOfRange(f"index beyond tabulated radius {r}")
        pos = np.moveaxis(indices + r, -1, 0)
        return self.table.values.real[tuple(pos)]

    def values(self, radius: int) -> np.ndarray:
        """Real array of weight values on the radius-``radius`` window."""
        lat = self.lattice.with_radius(radius)
        if self.is_family:
            return self.at(lat.indices())
        if radius > self.table.radius:
            raise RadiusMismatch(f"weight tabulated on radius {self.table.radius}, need {radius}")
        return self.table.restrict(radius).values.real.copy()

    def array(self, radius: int) -> LatticeArray:
        return LatticeArray(self.lattice.with_radius(radius), self.values(radius))

    def with_radius(self, radius: int) -> "Weight":
        """Same weight with a different nominal radius (tables are cropped)."""
        if self.is_family:
            return Weight(self.lattice.with_radius(radius), family=self.family)
        return Weight.from_table(self.table.restrict(radius))

    def tabulate(self, radius: int) -> "Weight":
        """Table weight holding this weight's values on ``radius``."""
        return Weight.from_table(self.array(radius))

    def same_as(self, other: "Weight") -> bool:
        """True when both describe the same weight on the same group."""
        if self is other:
            return True
        if not self.lattice.compatible(other.lattice) or self.family != other.family:
            return False
        if self.is_family:
            return True
        r = min(self.table.radius, other.table.radius)
        return bool(np.array_equal(self.table.restrict(r).values, other.table.restrict(r).values))

    def spec(self) -> dict:
        """JSON weight spec that :func:`parse_weight_spec` turns back into this weight."""
        lat = self.lattice
        out = {"group": "Zd" if lat.kind is LatticeKind.INTEGER else "Rd", "d": lat.dimension, "R": lat.radius}
        if lat.kind is LatticeKind.GRID:
            out["h"] = lat.step
        if self.is_family:
            out["family"] = {"name": "subexp", "tau": self.family.tau, "p": self.family.p}
        else:
            out["table"] = self.table.values.real.ravel().tolist()
        return out


def _require(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise SpecError("missing", f"{where}{key}")
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SpecError(f"expected {kind.__name__}, got {type(value).__name__}", f"{where}{key}")
    return value


def parse_weight_spec(spec: dict | str | Path, base_dir: Path | None = None) -> Weight:
    """Build a :class:`Weight` from the JSON weight-spec format.

    ``{"group": "Zd"|"Rd", "d": int, "h": float?, "R": int,
    "family": {"name": "subexp", "tau": float, "p": float}}`` or
    ``{"table": path}`` where the path names a lattice-array file. An inline
    table ``{"group", "d", "h"?, "R", "table": [values...]}`` (row-major) is
    accepted as well.
    """
    if isinstance(spec, (str, Path)):
        path = Path(spec)
        base_dir = path.parent
        text = path.read_text(encoding="utf-8")
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None
    if not isinstance(spec, dict):
        raise SpecError("weight spec must be a JSON object")

    table = spec.get("table")
    if isinstance(table, str):
        tpath = Path(table)
        if not tpath.is_absolute() and base_dir is not None:
            tpath = base_dir / tpath
        try:
            arr, _ = LatticeArray.load(tpath)
        except (OSError, ValueError) as exc:
            raise SpecError(str(exc), "table") from None
        return Weight.from_table(arr)

    group = _require(spec, "group", str, "")
    if group not in ("Zd", "Rd"):
        raise SpecError(f"unknown group {group!r}; expected 'Zd' or 'Rd'", "group")
    d = _require(spec, "d", int, "")
    radius = _require(spec, "R", int, "")
    if d < 1:
        raise SpecError("must be >= 1", "d")
    if radius < 0:
        raise SpecError("must be >= 0", "R")
    if group == "Rd":
        h = _require(spec, "h", float, "")
        if not h > 0:
            raise SpecError("must be positive", "h")
        lattice = DualLattice.grid(d, radius, h)
    else:
        lattice = DualLattice.integer(d, radius)

    if isinstance(table, list):
        try:
            arr = LatticeArray(lattice, np.asarray(table, dtype=float))
        except ValueError as exc:
            raise SpecError(str(exc), "table") from None
        return Weight.from_table(arr)
    if table is not None:
        raise SpecError("expected a path or a list of values", "table")

    fam = spec.get("family")
    if not isinstance(fam, dict):
        raise SpecError("missing 'family' or 'table'", "family")
    name = _require(fam, "name", str, "family.")
    if name != "subexp":
        raise SpecError(f"unknown family {name!r}", "family.name")
    tau = _require(fam, "tau", float, "family.")
    p = _require(fam, "p", float, "family.")
    return Weight(lattice, family=SubExp(tau, p))


# -- subconvolutivity --------------------------------------------------------


class SubconvResult(NamedTuple):
    constant: float
    argmax: tuple[int, ...]


def convolution_ratio(w: Weight, out_radius: int) -> np.ndarray:
    """``(lam * lam) / lam`` on ``|g| <= out_radius``, from the radius-2R window."""
    lam2 = w.array(2 * out_radius)
    if np.any(lam2.values.real <= 0):
        raise NonPositiveWeight("weight must be strictly positive")
    conv = convolve(lam2, lam2, out_radius)
    return conv.values.real / lam2.restrict(out_radius).values.real


def subconvolutivity_constant(w: Weight, out_radius: int) -> SubconvResult:
    """``C_R = max_{|g| <= R} (lam * lam)(g) / lam(g)`` and where it is attained."""
    if 2 * out_radius > w.max_radius:
        raise RadiusMismatch(
            f"need the weight on radius {2 * out_radius}, table has radius {w.max_radius}"
        )
    ratio = convolution_ratio(w, out_radius)
    flat = int(np.argmax(ratio))
    pos = np.unravel_index(flat, ratio.shape)
    return SubconvResult(float(ratio[pos]), tuple(int(i) - out_radius for i in pos))


@dataclass
class SubconvSummary:
    constant: float | str  # certified value, or "Unbounded" / "Unconverged"
    status: str  # certified | unbounded | unconverged
    history: list[tuple[int, float]]
    argmax: tuple[int, ...]

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    @property
    def latest(self) -> float:
        return self.history[-1][1]


def _growth_status(history: list[tuple[int, float]], tol: float) -> str:
    values = [c for _, c in history]
    if len(values) >= 2 and abs(values[-1] - values[-2]) <= tol * values[-2]:
        return "certified"
    if len(values) >= 3:
        d1, d2 = values[-2] - values[-3], values[-1] - values[-2]
        if d1 > 0 and d2 >= d1:
            return "unbounded"
    return "unconverged"


def subconvolutivity_history(w: Weight, radius: int, tol: float = STABILIZATION_TOL,
                             max_radius: int | None = None) -> SubconvSummary:
    """Estimate the subconvolutivity constant by doubling the radius.

    Starts from ``R/4, R/2, R`` and keeps doubling while the estimate is
    neither stabilized (relative change below ``tol``) nor growing without
    deceleration, up to ``max_radius`` (default ``16 R``) or the largest
    radius a table supports.
    """
    limit = max(w.max_radius // 2, 0) if not w.is_family else math.inf
    if not w.is_family and w.table.radius == 0:
        # the trivial dual group: nothing left to truncate
        res = subconvolutivity_constant(w, 0)
        return SubconvSummary(res.constant, "certified", [(0, res.constant)], res.argmax)
    if radius > limit:
        raise RadiusMismatch(f"radius {radius} needs the weight on {2 * radius}")
    cap = min(limit, max_radius if max_radius is not None else 16 * max(radius, 1))
    radii = sorted({r for r in (radius // 4, radius // 2, radius) if r > 0}) or [radius]
    history: list[tuple[int, float]] = []
    argmax: tuple[int, ...] = ()
    status = "unconverged"
    for r in radii:
        res = subconvolutivity_constant(w, r)
        history.append((r, res.constant))
        argmax = res.argmax
    status = _growth_status(history, tol)
    r = radii[-1]
    while status == "unconverged" and 2 * max(r, 1) <= cap:
        r = 2 * max(r, 1)
        res = subconvolutivity_constant(w, r)
        history.append((r, res.constant))
        argmax = res.argmax
        status = _growth_status(history, tol)
    if status == "certified":
        constant: float | str = history[-1][1]
    else:
        constant = "Unbounded" if status == "unbounded" else "Unconverged"
    return SubconvSummary(constant, status, history, argmax)


# -- GRS and BD ----------------------------------------------------------------


def default_probes(dimension: int) -> list[tuple[int, ...]]:
    """Unit vectors plus the all-ones vector (deduplicated for d = 1)."""
    probes = [tuple(int(i == j) for j in range(dimension)) for i in range(dimension)]
    ones = (1,) * dimension
    if ones not in probes:
        probes.append(ones)
    return probes


def _probe_multiples(w: Weight, probe, n_max: int) -> np.ndarray:
    probe = np.asarray(probe, dtype=np.int64).reshape(-1)
    if probe.size != w.lattice.dimension:
        raise ValueError(f"probe {tuple(probe)} has wrong dimension")
    n = np.arange(1, n_max + 1)
    mult = n[:, None] * probe[None, :]
    if not w.is_family and np.any(np.abs(mult) > w.table.radius):
        raise ProbeOutOfRange(
            f"{n_max} * {tuple(probe)} leaves the tabulated radius {w.table.radius}"
        )
    return mult


def grs_sequence(w: Weight, probe, n_max: int) -> np.ndarray:
    """``a_n = lam(n g)**(1/n)`` for ``n = 1..n_max``."""
    mult = _probe_multiples(w, probe, n_max)
    n = np.arange(1, n_max + 1)
    if w.is_family:
        fam = w.family
        norm_p = np.sum((w.lattice.step * np.abs(np.asarray(probe, dtype=float))) ** fam.p)
        return np.exp(-fam.tau * n ** (fam.p - 1.0) * norm_p)
    return w.at(mult) ** (1.0 / n)


def grs_numeric_verdict(seq: np.ndarray, tol: float) -> str:
    dist = np.abs(seq - 1.0)
    tail = seq[(3 * len(seq)) // 4:]
    tail_dist = dist[(3 * len(seq)) // 4:]
    if dist[-1] < tol and np.all(np.diff(tail_dist) <= 0):
        return HOLDS
    if seq[-1] < 1.0 - tol and tail.max() - tail.min() < tol:
        return FAILS
    return INCONCLUSIVE


def _combine(verdicts: Sequence[str]) -> str:
    # no probe directions (trivial dual group): the condition holds vacuously
    if all(v == HOLDS for v in verdicts):
        return HOLDS
    if any(v == FAILS for v in verdicts):
        return FAILS
    return INCONCLUSIVE


@dataclass
class GrsSection:
    estimates: dict[tuple[int, ...], list[float]]
    per_probe: dict[tuple[int, ...], str]
    verdict: str
    evidence: str  # analytic | numeric


def grs_check(w: Weight, probes=None, n_max: int = GRS_NMAX, tol: float = GRS_TOL) -> GrsSection:
    """Gelfand-Raikov-Shilov condition along each probe direction.

    Family weights get the analytic verdict (``p < 1`` holds, ``p = 1``
    fails); tables are judged on the sequence: *Holds* when the last value is
    within ``tol`` of 1 and the final quarter approaches 1 monotonically,
    *Fails* when the final quarter has settled below ``1 - tol``.
    """
    probes = default_probes(w.lattice.dimension) if probes is None else [tuple(p) for p in probes]
    estimates, per_probe = {}, {}
    for probe in probes:
        seq = grs_sequence(w, probe, n_max)
        estimates[probe] = seq.tolist()
        if w.is_family:
            per_probe[probe] = HOLDS if w.family.p < 1 else FAILS
        else:
            per_probe[probe] = grs_numeric_verdict(seq, tol)
    return GrsSection(estimates, per_probe, _combine(list(per_probe.values())),
                      "analytic" if w.is_family else "numeric")


@dataclass
class BdSection:
    partial_sums: dict[tuple[int, ...], list[float]]
    tail_bounds: dict[tuple[int, ...], float]
    per_probe: dict[tuple[int, ...], str]
    verdict: str
    evidence: str

    @property
    def tail_bound(self) -> float:
        return max(self.tail_bounds.values()) if self.tail_bounds else math.nan


def bd_terms(w: Weight, probe, n_max: int) -> np.ndarray:
    """``log(1/lam(n g)) / n**2`` for ``n = 1..n_max``."""
    mult = _probe_multiples(w, probe, n_max)
    n = np.arange(1, n_max + 1, dtype=float)
    return w.log_inverse_at(mult) / n**2


def bd_tail_bound(w: Weight, probe, n_max: int) -> float:
    """``tau |g|_p^p N^(p-1) / (1-p)`` bounding the omitted tail; family weights only."""
    if not w.is_family:
        return math.nan
    fam = w.family
    if fam.p >= 1:
        return math.inf
    norm_p = float(np.sum((w.lattice.step * np.abs(np.asarray(probe, dtype=float))) ** fam.p))
    return fam.tau * norm_p * n_max ** (fam.p - 1.0) / (1.0 - fam.p)


def bd_check(w: Weight, probes=None, n_max: int = GRS_NMAX) -> BdSection:
    """Beurling-Domar partial sums with the analytic tail bound when available.

    Tables are *Fails* when ``n * term_n`` does not decrease over the second
    half of the sequence (terms bounded below by ``c/n``), else inconclusive.
    """
    probes = default_probes(w.lattice.dimension) if probes is None else [tuple(p) for p in probes]
    sums, tails, per_probe = {}, {}, {}
    for probe in probes:
        terms = bd_terms(w, probe, n_max)
        sums[probe] = np.cumsum(terms).tolist()
        tails[probe] = bd_tail_bound(w, probe, n_max)
        if w.is_family:
            per_probe[probe] = HOLDS if math.isfinite(tails[probe]) else FAILS
        else:
            scaled = terms[len(terms) // 2:] * np.arange(len(terms) // 2 + 1, len(terms) + 1)
            flat = np.all(np.diff(scaled) >= -1e-12 * np.abs(scaled[1:])) and scaled[-1] > 0
            per_probe[probe] = FAILS if flat else INCONCLUSIVE
    return BdSection(sums, tails, per_probe, _combine(list(per_probe.values())),
                     "analytic" if w.is_family else "numeric")


# -- full report ---------------------------------------------------------------


@dataclass
class WeightReport:
    weight: dict
    radius: int
    C_R: float
    argmax: tuple[int, ...]
    subconv: SubconvSummary
    grs: GrsSection
    bd: BdSection
    symmetric: bool

    @property
    def C_subconv(self) -> float | str:
        return self.subconv.constant

    def to_dict(self) -> dict:
        def key(p):
            return ",".join(str(i) for i in p)

        return {
            "weight": self.weight,
            "radius": self.radius,
            "symmetric": self.symmetric,
            "C_R": self.C_R,
            "argmax": list(self.argmax),
            "C_subconv": self.subconv.constant,
            "subconv_status": self.subconv.status,
            "C_convergence": [[r, c] for r, c in self.subconv.history],
            "grs_estimates": {key(p): v for p, v in self.grs.estimates.items()},
            "grs_per_probe": {key(p): v for p, v in self.grs.per_probe.items()},
            "grs_verdict": self.grs.verdict,
            "grs_evidence": self.grs.evidence,
            "bd_partial_sums": {key(p): v for p, v in self.bd.partial_sums.items()},
            "bd_tail_bounds": {key(p): v for p, v in self.bd.tail_bounds.items()},
            "bd_tail_bound": self.bd.tail_bound,
            "bd_verdict": self.bd.verdict,
            "bd_evidence": self.bd.evidence,
        }


def weight_report(w: Weight, radius: int | None = None, probes=None, n_max: int = GRS_NMAX,
                  grs_tol: float = GRS_TOL, stabilization_tol: float = STABILIZATION_TOL) -> WeightReport:
    radius = w.lattice.radius if radius is None else radius
    if not w.is_family:
        radius = min(radius, w.table.radius // 2)
        if w.table.radius == 0:
            probes = []
        else:
            n_max = min(n_max, _max_probe_steps(w, probes))
    at_r = subconvolutivity_constant(w, radius)
    summary = subconvolutivity_history(w, radius, stabilization_tol)
    return WeightReport(
        weight=w.spec(),
        radius=radius,
        C_R=at_r.constant,
        argmax=at_r.argmax,
        subconv=summary,
        grs=grs_check(w, probes, n_max, grs_tol),
        bd=bd_check(w, probes, n_max),
        symmetric=w.symmetric,
    )


def _max_probe_steps(w: Weight, probes) -> int:
    probes = default_probes(w.lattice.dimension) if probes is None else probes
    reach = max(max(abs(int(c)) for c in p) for p in probes)
    return max(w.table.radius // max(reach, 1), 1)
