"""Command-line entry point: ``rkha <command> [options]``.

JSON is the canonical output (sorted keys, 17 significant digits); ``--format
csv`` gives a flat projection with the fixed columns listed per command.

Exit status: 0 on success, 1 when a check fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import core, fileformat, kernels, verify, weights
from .errors import NotPositiveSemidefinite, RKHAError, SpecError

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

CSV_COLUMNS = {
    "weight-report": ("section", "probe", "n", "value"),
    "certify": ("name", "verdict", "residual", "tolerance", "seed", "inputs_digest"),
    "kernel": ("i", "j", "re_k", "im_k", "d", "kappa_i"),
    "approx-unit": ("n", "bound", "max_ratio", "gap", "mass", "error"),
}


class InputError(Exception):
    pass


# -- input helpers -------------------------------------------------------------


def _load_weight(args, default: dict | None = None) -> weights.Weight:
    """``--weight`` as inline JSON or a file path, with ``--radius``/``--step`` overrides."""
    raw = args.weight
    base_dir = None
    if raw is None:
        if default is None:
            raise InputError("--weight is required")
        spec = dict(default)
    elif raw.lstrip().startswith("{"):
        try:
            spec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", "--weight") from None
    else:
        path = Path(raw)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read weight spec: {exc}") from None
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None
        base_dir = path.parent
    if not isinstance(spec, dict):
        raise SpecError("weight spec must be a JSON object")
    if "group" in spec and not isinstance(spec.get("table"), list):
        if getattr(args, "radius", None) is not None:
            spec["R"] = args.radius
        if getattr(args, "step", None) is not None:
            spec["h"] = args.step
    return weights.parse_weight_spec(spec, base_dir)


def _parse_points(text: str, dimension: int | None = None) -> np.ndarray:
    """``"x1,y1;x2,y2"`` or a path to a file with one point per line."""
    path = Path(text)
    if "," not in text and ";" not in text and path.exists():
        text = ";".join(line for line in path.read_text().splitlines() if line.strip() and not line.startswith("#"))
    rows = []
    for i, chunk in enumerate(c for c in text.split(";") if c.strip()):
        try:
            rows.append([float(v) for v in chunk.replace(" ", ",").split(",") if v])
        except ValueError:
            raise InputError(f"point {i}: cannot parse {chunk.strip()!r}") from None
    if not rows:
        raise InputError("no points given")
    dims = {len(r) for r in rows}
    if len(dims) != 1:
        raise InputError("points have different dimensions")
    if dimension is not None and dims != {dimension}:
        raise InputError(f"points are {dims.pop()}-dimensional, weight expects d={dimension}")
    return np.array(rows)


def _load_kernel(path: str) -> kernels.SampledKernel:
    """Binary kernel file, or JSON ``{"points": [...], "gram": [[...]]}`` (complex entries as [re, im])."""
    p = Path(path)
    if p.suffix == ".json":
        obj = json.loads(p.read_text(encoding="utf-8"))
        gram = _gram_from_json(obj["gram"])
        n = len(obj["points"])
        return kernels.SampledKernel(obj["points"], gram.reshape(n, n), obj.get("meta", {}))
    return kernels.SampledKernel.load(p)


def _gram_from_json(obj) -> np.ndarray:
    arr = np.array(obj, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(np.complex128)


def _load_map(text: str) -> dict[str, str]:
    """A point map from inline JSON or a JSON file."""
    raw = text if text.lstrip().startswith("{") else Path(text).read_text(encoding="utf-8")
    obj = json.loads(raw)
    if not isinstance(obj, dict):
        raise InputError("a point map must be a JSON object")
    return {str(k): str(v) for k, v in obj.items()}


def _emit(args, payload, csv_rows=None) -> None:
    if args.format == "csv":
        if csv_rows is None:
            raise InputError(f"{args.command} has no CSV projection")
        text = fileformat.csv_text(CSV_COLUMNS[args.command], csv_rows)
    else:
        text = fileformat.dumps(payload) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- commands ------------------------------------------------------------------


def cmd_weight_report(args) -> int:
    w = _load_weight(args)
    radius = args.radius if args.radius is not None else w.lattice.radius
    report = weights.weight_report(w, radius, n_max=args.n_max)
    out = report.to_dict()
    rows = [("C_R", "", r, c) for r, c in report.subconv.history]
    for probe, seq in out["grs_estimates"].items():
        rows += [("grs", probe, n + 1, v) for n, v in enumerate(seq)]
    for probe, seq in out["bd_partial_sums"].items():
        rows += [("bd", probe, n + 1, v) for n, v in enumerate(seq)]
    _emit(args, out, rows)
    return EXIT_OK


def _certify_config(args) -> dict:
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", args.config) from None
        if not isinstance(config, dict):
            raise InputError("suite config must be a JSON object")
    else:
        config = dict(verify.DEFAULT_CONFIG)
    if args.weight is not None:
        config["weight"] = _load_weight(args).spec()
    if args.radius is not None:
        config["radius"] = args.radius
    if args.seed is not None:
        config["seed"] = args.seed
    if args.tol is not None:
        config["tol"] = args.tol
    if args.properties is not None:
        config["properties"] = [p for p in args.properties.split(",") if p]
    return config


def cmd_certify(args) -> int:
    results = verify.run_suite(_certify_config(args))
    rows = [(r.name, r.verdict, r.residual, r.tolerance, r.seed, r.inputs_digest) for r in results]
    _emit(args, verify.suite_report(results), rows)
    return EXIT_OK if verify.all_passed(results) else EXIT_FAIL


def cmd_kernel(args) -> int:
    w = _load_weight(args)
    pts = _parse_points(args.points, w.lattice.dimension)
    shift = _parse_points(args.shift, w.lattice.dimension)[0] if args.shift else None
    table = kernels.metric_diagnostics(w, pts, args.radius, shift)
    payload = {
        "weight": w.spec(),
        "radius": args.radius if args.radius is not None else w.lattice.radius,
        "points": pts.tolist(),
        "gram": [[complex(v) for v in row] for row in table.gram],
        "distance": table.distance.tolist(),
        "kappa": table.kappa.tolist(),
        "kappa_residual": table.kappa_residual,
    }
    if table.shift_residual is not None:
        payload["shift"] = shift.tolist()
        payload["shift_residual"] = table.shift_residual
    _emit(args, payload, list(table.rows()))
    return EXIT_OK


CONSTRUCTIONS = ("tensor", "direct-sum", "sum", "product", "pullback", "pushout", "unitalize", "feature-map")


def _construct(args) -> kernels.SampledKernel:
    name, inputs = args.construction, args.inputs
    arity = {"tensor": 2, "direct-sum": 2, "sum": 2, "product": 2, "pullback": 1, "pushout": 1,
             "unitalize": 1, "feature-map": 1}[name]
    if len(inputs) != arity:
        raise InputError(f"{name} takes {arity} input file(s), got {len(inputs)}")
    if name == "feature-map":
        obj = json.loads(Path(inputs[0]).read_text(encoding="utf-8"))
        feats = obj["features"] if isinstance(obj, dict) else obj
        labels = obj.get("labels") if isinstance(obj, dict) else None
        rows = [[complex(*v) if isinstance(v, list) else complex(v) for v in f] for f in feats]
        return kernels.feature_map_kernel(rows, labels)
    ks = [_load_kernel(p) for p in inputs]
    if name == "tensor":
        return kernels.tensor_kernel(*ks)
    if name == "direct-sum":
        return kernels.direct_sum_kernel(*ks)
    if name == "sum":
        return kernels.sum_kernel(*ks)
    if name == "product":
        return kernels.product_kernel(*ks)
    if name == "unitalize":
        return kernels.unitalize_kernel(ks[0])
    if not args.map:
        raise InputError(f"{name} needs --map")
    phi = _load_map(args.map)
    if name == "pullback":
        return kernels.pullback_kernel(ks[0], phi)
    targets = args.targets.split(",") if args.targets else None
    return kernels.pushout_kernel(ks[0], phi, targets)


def cmd_construct(args) -> int:
    if not args.out:
        raise InputError("construct needs --out")
    k = _construct(args)
    kernels.validate_gram(k.gram)  # already enforced on construction; kept explicit before writing
    k.save(args.out)
    summary = {
        "construction": args.construction,
        "points": list(k.points),
        "min_eigenvalue": kernels.min_eigenvalue(k.gram),
        "trace": float(np.real(np.trace(k.gram))),
        "out": str(args.out),
    }
    if k.meta:
        summary["meta"] = k.meta
    sys.stdout.write(fileformat.dumps(summary) + "\n")
    return EXIT_OK


def cmd_approx_unit(args) -> int:
    w = _load_weight(args)
    ns = [int(v) for v in args.n.split(",") if v]
    rows = core.approx_unit_study(w, ns, samples=args.samples, seed=args.seed if args.seed is not None else 42)
    ok = [r for r in rows if r.error is None]
    gaps = [r.gap for r in ok]
    within = all(r.max_ratio <= r.bound * (1 + args.slack) for r in ok)
    payload = {
        "weight": w.spec(),
        "samples": args.samples,
        "slack": args.slack,
        "rows": [
            {"n": r.n, "bound": r.bound, "max_ratio": r.max_ratio, "gap": r.gap, "mass": r.mass, "error": r.error}
            for r in rows
        ],
        "ratios_within_bound": within,
        "gap_monotone": all(b <= a for a, b in zip(gaps, gaps[1:])),
        "gap_trend_down": len(gaps) < 2 or gaps[-1] < gaps[0],
    }
    csv_rows = [(r.n, r.bound, r.max_ratio, r.gap, r.mass, r.error or "") for r in rows]
    _emit(args, payload, csv_rows)
    return EXIT_OK if within else EXIT_FAIL


def cmd_multiply(args) -> int:
    if not args.out:
        raise InputError("multiply needs --out")
    f = core.SpectralFn.load(args.f)
    g = core.SpectralFn.load(args.g)
    prod = core.multiply(f, g, args.radius)
    prod.save(args.out)
    summary = {"radius": prod.radius, "norm": prod.norm(), "out": str(args.out)}
    sys.stdout.write(fileformat.dumps(summary) + "\n")
    return EXIT_OK


def cmd_element(args) -> int:
    if not args.out:
        raise InputError("element needs --out")
    w = _load_weight(args)
    radius = args.radius if args.radius is not None else w.lattice.radius
    if args.at:
        f = core.kernel_section(w, _parse_points(args.at, w.lattice.dimension)[0], radius)
    elif args.unit:
        f = core.unit(w, radius)
    else:
        rng = np.random.default_rng(args.seed if args.seed is not None else 42)
        f = core.random_element(w, radius, rng, args.support)
    f.save(args.out)
    sys.stdout.write(fileformat.dumps({"radius": f.radius, "norm": f.norm(), "out": str(args.out)}) + "\n")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rkha", description="Weighted Fourier RKHA toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, weight=True, fmt=True):
        if weight:
            p.add_argument("--weight", help="weight spec: inline JSON or a path to a JSON file")
            p.add_argument("--radius", type=int, help="truncation radius (overrides the spec's R)")
            p.add_argument("--step", type=float, help="grid step h for R^d groups")
        p.add_argument("--seed", type=int, help="random seed (default 42)")
        p.add_argument("--out", help="output path (default: stdout)")
        if fmt:
            p.add_argument("--format", choices=("json", "csv"), default="json")
        return p

    p = common(sub.add_parser("weight-report", help="subconvolutivity, GRS and BD analysis of a weight"))
    p.add_argument("--n-max", type=int, default=weights.GRS_NMAX, help="length of the GRS/BD sequences")
    p.set_defaults(func=cmd_weight_report)

    p = common(sub.add_parser("certify", help="run the property suite"))
    p.add_argument("--config", help="suite config JSON file (default: built-in configuration)")
    p.add_argument("--tol", type=float, help="override every tolerance (marks the run non-standard)")
    p.add_argument("--properties", help="comma-separated property names (default: all)")
    p.set_defaults(func=cmd_certify)

    p = common(sub.add_parser("kernel", help="Gram, distance and kappa table on sample points"))
    p.add_argument("--points", required=True, help="'x1,y1;x2,y2;...' or a file with one point per line")
    p.add_argument("--shift", help="translation t for the d(x+t, y+t) = d(x, y) check")
    p.set_defaults(func=cmd_kernel)

    p = common(sub.add_parser("construct", help="apply a kernel construction to Gram files"), weight=False, fmt=False)
    p.add_argument("construction", choices=CONSTRUCTIONS)
    p.add_argument("inputs", nargs="+", help="input kernel files (binary, or .json); feature-map takes a JSON file")
    p.add_argument("--map", help="point map for pullback (S -> X) or pushout (X -> S), JSON object or file")
    p.add_argument("--targets", help="comma-separated target points for pushout, including empty fibers")
    p.set_defaults(func=cmd_construct)

    p = common(sub.add_parser("approx-unit", help="approximate-unit norm ratios and weak-convergence gaps"))
    p.add_argument("--n", default="1,2,4,8,16", help="comma-separated window parameters")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--slack", type=float, default=1e-3, help="relative quadrature slack on the bound")
    p.set_defaults(func=cmd_approx_unit)

    p = common(sub.add_parser("multiply", help="pointwise product of two stored elements"), weight=False, fmt=False)
    p.add_argument("f")
    p.add_argument("g")
    p.add_argument("--radius", type=int, help="output radius (default: half the smaller input radius)")
    p.set_defaults(func=cmd_multiply)

    p = common(sub.add_parser("element", help="write a random element, kernel section or unit"), fmt=False)
    p.add_argument("--support", type=int, help="radius carrying the random coefficients")
    p.add_argument("--at", help="write the kernel section k_x at this point instead")
    p.add_argument("--unit", action="store_true", help="write the constant function 1 (Z^d only)")
    p.set_defaults(func=cmd_element)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotPositiveSemidefinite as exc:
        print(f"error: {exc} (min eigenvalue {exc.min_eigenvalue})", file=sys.stderr)
        return EXIT_FAIL
    except (RKHAError, InputError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
