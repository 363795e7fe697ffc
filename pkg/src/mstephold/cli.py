"""Command-line surface: problem ingestion, computation drivers,
verification commands and figure-data export.

Verbs: discretize | cinf | rcinf | check | counterexample | plot | oracle.
Exit codes: 0 success, 2 usage or parse error, 3 domain condition
(nested sets, empty result where nonempty required, failed checks),
4 non-convergence under --strict.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .disturbance import (
    DisturbanceSchedule,
    box_schedule,
    sine_example_schedule,
)
from .errors import MstepholdError, SetsNestedError
from .invariance import (
    FixedPointOptions,
    InvariantSetResult,
    compute_cinf,
    compute_rcinf,
    feasible_hold_input,
)
from .lti import (
    ContinuousLtiModel,
    DiscreteLtiModel,
    euler_discretize,
    exact_discretize,
)
from .polytope import (
    Polytope,
    chebyshev_center,
    contains,
    is_empty,
    polygon_area,
    scale,
    set_equal,
    vertices_2d,
)
from .verify import (
    find_counterexample,
    grid_oracle_cinf,
    oracle_agreement,
    validate_invariance,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NOT_CONVERGED = 4

BUILTIN_SCHEDULES = ("fig4-box", "sine-taylor")


class ProblemFileError(MstepholdError):
    """Problem file is syntactically or semantically invalid."""


@dataclass
class ProblemSpec:
    """JSON-serializable root object describing one computation problem."""

    model: ContinuousLtiModel | DiscreteLtiModel
    Ts: float
    X: Polytope
    U: Polytope
    M_list: list[int]
    disturbance: dict | None = None  # builtin name or explicit schedule spec
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.M_list or any(m < 1 for m in self.M_list):
            raise ProblemFileError("M_list must be nonempty with entries >= 1")
        if self.Ts <= 0:
            raise ProblemFileError("Ts must be positive")
        n = (self.model.state_dim if isinstance(self.model, DiscreteLtiModel)
             else self.model.state_dim)
        m = self.model.input_dim
        if self.X.dim != n:
            raise ProblemFileError(f"X has dim {self.X.dim}, state dim is {n}")
        if self.U.dim != m:
            raise ProblemFileError(f"U has dim {self.U.dim}, input dim is {m}")

    @property
    def state_dim(self) -> int:
        return self.model.state_dim

    def fixed_point_options(self) -> FixedPointOptions:
        return FixedPointOptions(
            tolerance=float(self.options.get("tolerance", 1e-8)),
            max_iterations=int(self.options.get("max_iterations", 200)),
        )

    def seed(self) -> int:
        return int(self.options.get("seed", 0))

    def discrete_model(self, Ts: float | None = None) -> DiscreteLtiModel:
        """The discrete model at the base period (or at an override Ts)."""
        if isinstance(self.model, DiscreteLtiModel):
            if Ts is not None and abs(Ts - self.model.Ts) > 1e-12:
                raise ProblemFileError(
                    "cannot re-discretize a literal discrete model")
            return self.model
        return exact_discretize(self.model, self.Ts if Ts is None else Ts)

    def continuous_model(self) -> ContinuousLtiModel | None:
        return self.model if isinstance(self.model, ContinuousLtiModel) else None

    def schedule_for(self, M: int) -> DisturbanceSchedule | None:
        spec = self.disturbance
        if spec is None:
            return None
        if "builtin" in spec:
            name = spec["builtin"]
            if name == "fig4-box":
                n = self.state_dim
                return box_schedule(lambda j: (j + 1) * 0.2 * np.ones(n), M)
            if name == "sine-taylor":
                if self.state_dim != 1:
                    raise ProblemFileError(
                        "sine-taylor schedule is one-dimensional")
                return sine_example_schedule(self.Ts, M)
            raise ProblemFileError(
                f"unknown builtin schedule {name!r}; known: {BUILTIN_SCHEDULES}")
        sched = DisturbanceSchedule.from_dict(spec)
        if sched.M != M:
            raise ProblemFileError(
                f"explicit schedule has {sched.M} sets but M={M}")
        return sched

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "Ts": self.Ts,
            "X": self.X.to_dict(),
            "U": self.U.to_dict(),
            "M_list": list(self.M_list),
            "disturbance": self.disturbance,
            "options": dict(self.options),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemSpec":
        try:
            mdata = data["model"]
            if "Ac" in mdata:
                model = ContinuousLtiModel.from_dict(mdata)
                Ts = float(data["Ts"])
            else:
                model = DiscreteLtiModel.from_dict(mdata)
                Ts = float(data.get("Ts", model.Ts))
            return cls(
                model=model,
                Ts=Ts,
                X=Polytope.from_dict(data["X"]),
                U=Polytope.from_dict(data["U"]),
                M_list=[int(m) for m in data["M_list"]],
                disturbance=data.get("disturbance"),
                options=dict(data.get("options", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProblemFileError(f"invalid problem file: {exc}") from exc


def load_problem(path: str) -> ProblemSpec:
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from exc
    return ProblemSpec.from_dict(data)


def _dump_json(obj, path: Path | None) -> str:
    text = json.dumps(obj, indent=1)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")
    return text


def _apply_overrides(problem: ProblemSpec, args) -> None:
    if getattr(args, "tolerance", None) is not None:
        problem.options["tolerance"] = args.tolerance
    if getattr(args, "max_iters", None) is not None:
        problem.options["max_iterations"] = args.max_iters
    if getattr(args, "seed", None) is not None:
        problem.options["seed"] = args.seed


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_discretize(args) -> int:
    try:
        with open(args.model_file) as f:
            mdata = json.load(f)
        mc = ContinuousLtiModel.from_dict(mdata)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: cannot read model file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    md = (exact_discretize(mc, args.Ts) if args.method == "exact"
          else euler_discretize(mc, args.Ts))
    print(_dump_json(md.to_dict(), None))
    return EXIT_OK


def _run_family(problem: ProblemSpec, robust: bool, out: Path | None,
                strict: bool) -> tuple[dict[int, InvariantSetResult], int]:
    opts = problem.fixed_point_options()
    results: dict[int, InvariantSetResult] = {}
    md = problem.discrete_model()
    code = EXIT_OK
    for M in problem.M_list:
        if robust:
            W = problem.schedule_for(M)
            if W is None:
                raise ProblemFileError("problem has no disturbance schedule")
            res = compute_rcinf(problem.X, problem.U, md, M, W, opts)
        else:
            res = compute_cinf(problem.X, problem.U, md, M, opts)
        results[M] = res
        tag = "RC" if robust else "C"
        empty = is_empty(res.final_set)
        note = " (empty set)" if empty else ""
        print(f"{tag}^{M}: converged={res.converged} "
              f"iterations={res.iterations} rows={res.final_set.num_rows}{note}")
        if out is not None:
            name = f"{'rcinf' if robust else 'cinf'}_M{M}.json"
            _dump_json(res.to_dict(), out / name)
        if not res.converged and strict:
            code = EXIT_NOT_CONVERGED
    return results, code


def cmd_cinf(args) -> int:
    problem = load_problem(args.problem_file)
    _apply_overrides(problem, args)
    out = Path(args.out) if args.out else None
    _, code = _run_family(problem, robust=False, out=out, strict=args.strict)
    return code


def cmd_rcinf(args) -> int:
    problem = load_problem(args.problem_file)
    _apply_overrides(problem, args)
    out = Path(args.out) if args.out else None
    _, code = _run_family(problem, robust=True, out=out, strict=args.strict)
    return code


def cmd_counterexample(args) -> int:
    problem = load_problem(args.problem_file)
    _apply_overrides(problem, args)
    mc = problem.continuous_model()
    if mc is None:
        print("error: counterexample search needs a continuous model",
              file=sys.stderr)
        return EXIT_DOMAIN
    opts = problem.fixed_point_options()
    fine = compute_cinf(problem.X, problem.U,
                        exact_discretize(mc, args.Ts), 1, opts).final_set
    coarse = compute_cinf(problem.X, problem.U,
                          exact_discretize(mc, args.Ts * args.M), 1, opts).final_set
    try:
        report = find_counterexample(
            mc, problem.X, problem.U, args.Ts, args.M, fine, coarse,
            horizon=args.horizon, rng=np.random.default_rng(problem.seed()))
    except SetsNestedError as exc:
        print(f"SetsNested: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if report is None:
        print("no violating replay found", file=sys.stderr)
        return EXIT_DOMAIN
    out = Path(args.out) if args.out else Path(".")
    path = out / f"counterexample_Ts{args.Ts}_M{args.M}.json"
    _dump_json(report.to_dict(), path)
    print(f"counterexample written to {path} "
          f"(fine margin {report.margin_fine:.4f}, "
          f"continuous margin {report.margin_continuous:.4f})")
    return EXIT_OK


def cmd_check(args) -> int:
    problem = load_problem(args.problem_file)
    _apply_overrides(problem, args)
    rng = np.random.default_rng(problem.seed())
    robust = problem.disturbance is not None
    rows: list[tuple[str, bool, str]] = []
    not_converged = False

    nominal, _ = _run_family(problem, robust=False, out=None, strict=False)
    robust_results: dict[int, InvariantSetResult] = {}
    if robust:
        robust_results, _ = _run_family(problem, robust=True, out=None,
                                        strict=False)

    def add(name: str, ok: bool, note: str = ""):
        rows.append((name, ok, note))

    for M, res in nominal.items():
        add(f"C^{M} converged", res.converged,
            "" if res.converged else "not converged")
        not_converged |= not res.converged
    for M, res in robust_results.items():
        add(f"RC^{M} converged", res.converged,
            "" if res.converged else "not converged")
        not_converged |= not res.converged

    Ms = sorted(nominal)
    tol = problem.fixed_point_options().tolerance
    for a, b in zip(Ms, Ms[1:]):
        add(f"C^{b} subset of C^{a}",
            contains(nominal[a].final_set, nominal[b].final_set, tol))
    if robust:
        for a, b in zip(Ms, Ms[1:]):
            add(f"RC^{b} subset of RC^{a}",
                contains(robust_results[a].final_set,
                         robust_results[b].final_set, tol))
        for M in Ms:
            add(f"RC^{M} subset of C^{M}",
                contains(nominal[M].final_set,
                         robust_results[M].final_set, tol))

    md = problem.discrete_model()
    mc = problem.continuous_model()
    if mc is not None:
        for M in Ms:
            if M == 1:
                continue
            coarse = compute_cinf(problem.X, problem.U,
                                  exact_discretize(mc, problem.Ts * M), 1,
                                  problem.fixed_point_options()).final_set
            add(f"C^{M} at Ts subset of C^1 at {M}*Ts",
                contains(coarse, nominal[M].final_set, tol))

    check_sets = [(f"C^{M}", nominal[M].final_set, None) for M in Ms]
    if robust:
        check_sets += [(f"RC^{M}", robust_results[M].final_set,
                        problem.schedule_for(M)) for M in Ms]
    for label, target, W in check_sets:
        M = int(label.split("^")[1])
        if is_empty(target):
            add(f"{label} membership", True, "empty set")
            continue
        rep = validate_invariance(target, problem.X, problem.U, md, M, W,
                                  samples=args.samples,
                                  disturbance_draws=100, rng=rng)
        add(f"{label} membership certificates", rep.all_passed,
            f"{rep.points_checked} points")
        ext = _exterior_samples(target, problem.X, args.samples, 2 * tol, rng)
        fails = sum(feasible_hold_input(x, target, problem.U, md, M, W)
                    is None for x in ext)
        add(f"{label} maximality", fails == len(ext),
            f"{fails}/{len(ext)} exterior rejections")

    width = max(len(name) for name, _, _ in rows) + 2
    all_ok = True
    for name, ok, note in rows:
        status = "PASS" if ok else "FAIL"
        suffix = f"  [{note}]" if note else ""
        print(f"{name:<{width}} {status}{suffix}")
        all_ok &= ok
    if not_converged and args.strict:
        return EXIT_NOT_CONVERGED
    return EXIT_OK if all_ok else EXIT_DOMAIN


def _exterior_samples(target: Polytope, X: Polytope, count: int,
                      min_outside: float, rng: np.random.Generator
                      ) -> list[np.ndarray]:
    """Points of X at least min_outside outside the target (normalized rows)."""
    from .polytope import bounding_box
    lo, hi = bounding_box(X)
    tn = target.normalized()
    Xn = X.normalized()
    out: list[np.ndarray] = []
    for _ in range(200):
        if len(out) >= count:
            break
        batch = rng.uniform(lo, hi, size=(max(count, 64), X.dim))
        in_X = np.all(batch @ Xn.H.T <= Xn.h + 1e-12, axis=1)
        outside = (batch @ tn.H.T - tn.h).max(axis=1) >= min_outside
        out.extend(batch[in_X & outside])
    return out[:count]


def cmd_oracle(args) -> int:
    problem = load_problem(args.problem_file)
    _apply_overrides(problem, args)
    M = args.M if args.M is not None else problem.M_list[0]
    md = problem.discrete_model()
    res = compute_cinf(problem.X, problem.U, md, M,
                       problem.fixed_point_options())
    oracle = grid_oracle_cinf(problem.X, problem.U, md, M,
                              args.resolution, args.input_samples)
    agreement = oracle_agreement(oracle, res.final_set)
    payload = {
        "M": M,
        "resolution": args.resolution,
        "input_samples": args.input_samples,
        "oracle_iterations": oracle.iterations,
        "polytope_converged": res.converged,
        "agreement": agreement,
    }
    if args.out:
        _dump_json(oracle.to_dict() | payload, Path(args.out) / f"oracle_M{M}.json")
    print(_dump_json(payload, None))
    return EXIT_OK if agreement["agrees"] else EXIT_DOMAIN


# ---------------------------------------------------------------------------
# Plot export
# ---------------------------------------------------------------------------

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#17becf", "#8c564b", "#e377c2"]


def _load_result(path: str) -> InvariantSetResult:
    with open(path) as f:
        return InvariantSetResult.from_dict(json.load(f))


def _plot_payload(results: list[InvariantSetResult]) -> dict:
    """Vertex polygons (or 1-D interval bars) ordered largest first."""
    entries = []
    dim = results[0].final_set.dim
    for res in results:
        label = f"{'RC' if res.robust else 'C'}^{res.M}"
        if is_empty(res.final_set):
            entries.append({"label": label, "M": res.M, "robust": res.robust,
                            "empty": True, "vertices": [], "area": 0.0})
            continue
        V = vertices_2d(res.final_set)
        area = polygon_area(V) if dim == 2 else float(V.max() - V.min())
        entries.append({"label": label, "M": res.M, "robust": res.robust,
                        "empty": False, "vertices": V.tolist(), "area": area})
    entries.sort(key=lambda e: -e["area"])
    X = results[0].iterates[0]  # Omega_0 is the admissible region
    from .polytope import bounding_box
    lo, hi = bounding_box(X)
    return {"dim": dim, "xlim": [lo[0], hi[0]],
            "ylim": [lo[1], hi[1]] if dim == 2 else [0.0, 1.0],
            "sets": entries}


def _render_svg(payload: dict) -> str:
    width, height, pad = 640.0, 480.0, 50.0
    x0, x1 = payload["xlim"]
    y0, y1 = payload["ylim"]
    dim = payload["dim"]

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        f'<rect x="{pad:g}" y="{pad:g}" width="{width - 2 * pad:g}" '
        f'height="{height - 2 * pad:g}" fill="none" stroke="#888"/>',
    ]
    legend_y = pad + 14.0
    n_bars = max(sum(1 for e in payload["sets"] if not e["empty"]), 1)
    bar = 0
    for i, entry in enumerate(payload["sets"]):
        color = _PALETTE[i % len(_PALETTE)]
        if entry["empty"]:
            parts.append(
                f'<text x="{width - pad - 4:g}" y="{legend_y:g}" '
                f'text-anchor="end" font-size="13" fill="{color}">'
                f'{entry["label"]} = &#8709;</text>')
            legend_y += 16.0
            continue
        verts = entry["vertices"]
        if dim == 2:
            pts = " ".join(f"{sx(vx):.6g},{sy(vy):.6g}" for vx, vy in verts)
            parts.append(
                f'<polygon points="{pts}" fill="{color}" fill-opacity="0.35" '
                f'stroke="{color}" stroke-width="1.5"/>')
            cx = sum(v[0] for v in verts) / len(verts)
            cy = sum(v[1] for v in verts) / len(verts)
            parts.append(
                f'<text x="{sx(cx):.6g}" y="{sy(cy) - 4 * i:.6g}" '
                f'font-size="13" fill="{color}">{entry["label"]}</text>')
        else:
            lo_v = min(v[0] for v in verts)
            hi_v = max(v[0] for v in verts)
            yb = pad + (bar + 0.5) / n_bars * (height - 2 * pad)
            bar += 1
            parts.append(
                f'<rect x="{sx(lo_v):.6g}" y="{yb - 8:.6g}" '
                f'width="{sx(hi_v) - sx(lo_v):.6g}" height="16" '
                f'fill="{color}" fill-opacity="0.35" stroke="{color}"/>')
            parts.append(
                f'<text x="{sx(hi_v) + 6:.6g}" y="{yb + 4:.6g}" '
                f'font-size="13" fill="{color}">{entry["label"]}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def cmd_plot(args) -> int:
    try:
        results = [_load_result(p) for p in args.result_files]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: cannot read result file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    dims = {r.final_set.dim for r in results}
    if len(dims) != 1 or dims.pop() > 2:
        print("error: plot needs results of one common dimension <= 2",
              file=sys.stderr)
        return EXIT_DOMAIN
    payload = _plot_payload(results)
    if args.format == "json":
        text = json.dumps(payload, indent=1)
        suffix = "json"
    else:
        text = _render_svg(payload)
        suffix = "svg"
    if args.out:
        path = Path(args.out) / f"plot.{suffix}"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")
        print(f"wrote {path}")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--tolerance", type=float, default=None)
    sp.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--strict", action="store_true",
                    help="exit 4 on non-convergence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mstephold",
        description="M-step hold control invariant sets: computation, "
                    "verification, figure export")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="discretize a continuous model")
    p.add_argument("model_file")
    p.add_argument("--Ts", type=float, required=True)
    p.add_argument("--method", choices=["exact", "euler"], default="exact")
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("cinf", help="maximal M-step hold invariant sets")
    p.add_argument("problem_file")
    _common_flags(p)
    p.set_defaults(func=cmd_cinf)

    p = sub.add_parser("rcinf", help="robust counterparts")
    p.add_argument("problem_file")
    _common_flags(p)
    p.set_defaults(func=cmd_rcinf)

    p = sub.add_parser("check", help="run the property suite")
    p.add_argument("problem_file")
    p.add_argument("--samples", type=int, default=50)
    _common_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("counterexample",
                       help="coarse-plan replay violating constraints")
    p.add_argument("problem_file")
    p.add_argument("--Ts", type=float, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--horizon", type=int, default=10)
    _common_flags(p)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("plot", help="export overlaid set polygons")
    p.add_argument("result_files", nargs="+")
    p.add_argument("--format", choices=["svg", "json"], default="svg")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("oracle", help="lattice backward-reachability check")
    p.add_argument("problem_file")
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--resolution", type=float, default=0.05)
    p.add_argument("--input-samples", type=int, default=41,
                   dest="input_samples")
    _common_flags(p)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SetsNestedError as exc:
        print(f"SetsNested: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except MstepholdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
