"""Command-line entry point: ``sphereheat {kernel,cv,simulate,diagnose}``.

Exit codes: 0 on success, 2 for usage errors, 3 for data or runtime errors.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from contextlib import contextmanager

import numpy as np

from . import __version__
from .errors import InvalidParams, SphereHeatError, TooFewWalkers, UsageError
from .exact import ExactKernelParams, k_exact, sweet_spot_time
from .experiments import DEFAULT_C_GRID, DEFAULT_T_STAR_GRID, load_csv, repeated_cv
from .geometry import SphereMap
from .kernels import KernelKind, KernelSpec, gram_matrix, psd_check, write_gram_csv
from .parametrix import k_prx, u0, u1, u2, unphysical_regime

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _ints(text: str) -> list[int]:
    return [int(v) for v in _floats(text)]


def _global_options(parser, suppress: bool):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(0), help="master RNG seed")
    parser.add_argument("--threads", type=int, default=default(1), help="worker-pool ceiling")
    parser.add_argument("--output", default=default(None), help="output path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv", "table"), default=default(None))


def _time_options(parser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--t", type=float, help="diffusion time")
    group.add_argument("--t-star", type=float, help="multiplier of the sweet spot log(n)/n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sphereheat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sphereheat {__version__}")
    _global_options(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("kernel", parents=[common], help="build a Gram matrix from a CSV dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--id-column")
    p.add_argument("--kernel", required=True, choices=[k.value for k in KernelKind])
    _time_options(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--map", choices=[m.value for m in SphereMap])
    p.add_argument("--psd-check", action="store_true")

    p = sub.add_parser("cv", parents=[common], help="grid-search cross-validation")
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--id-column")
    p.add_argument("--kernel", default="cos", help="comma-separated kernel kinds")
    p.add_argument("--map", choices=[m.value for m in SphereMap], default=SphereMap.SQRT_L1.value)
    p.add_argument("--t-star-grid", type=_floats, default=list(DEFAULT_T_STAR_GRID))
    p.add_argument("--C-grid", dest="C_grid", type=_floats, default=list(DEFAULT_C_GRID))
    p.add_argument("--gamma-grid", type=_floats, default=[0.01, 0.1, 1.0])
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--m-r", type=int, help="representatives per class (implies --balance)")
    p.add_argument("--balance", action="store_true")
    p.add_argument("--balance-runs", type=int, default=50)
    p.add_argument("--timing", action="store_true", help="record wall times (breaks byte-identity)")

    p = sub.add_parser("simulate", parents=[common], help="random walks versus the heat kernel")
    p.add_argument("--n", type=int, default=3)
    _time_options(p)
    p.add_argument("--walkers", type=int, default=20000)
    p.add_argument("--delta", type=float, default=0.02)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--paths", help="write walker paths to this CSV")
    p.add_argument("--record-every", type=int, default=50)
    p.add_argument("--path-walkers", type=int, default=20, help="walkers kept in the path dump")

    p = sub.add_parser("diagnose", parents=[common], help="parametrix versus exact kernel profiles")
    p.add_argument("--n-grid", type=_ints, default=[3, 100, 200])
    group = p.add_mutually_exclusive_group()
    group.add_argument("--t-grid", type=_floats)
    group.add_argument("--t-star-grid", type=_floats)
    p.add_argument("--theta-grid", type=_floats, help="angles in radians (default: 33 points on [0, pi])")
    p.add_argument("--slope-step", type=float, default=1e-3)
    return parser


# --- output helpers ------------------------------------------------------


@contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _config(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        # output location is not part of the result, so identical runs stay identical
        if callable(value) or key in ("output", "paths"):
            continue
        out[key] = value
    return out


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _table(header: list[str], rows: list[list]) -> str:
    cells = [[str(c) for c in header]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return f"{value:.6g}"
    return str(value)


def _csv(header: list[str], rows: list[list], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join("" if v is None else (repr(float(v)) if isinstance(v, float) else str(v)) for v in r) + "\n")
    return buf.getvalue()


def _header_line(args) -> str:
    return "sphereheat " + args.command + " " + json.dumps(_config(args), sort_keys=True)


# --- commands ------------------------------------------------------------


def _resolve_t(args, n: int, default_t_star: float | None = 1.0) -> float | None:
    if args.t is not None:
        if not args.t > 0:
            raise UsageError("--t must be > 0")
        return args.t
    t_star = args.t_star if args.t_star is not None else default_t_star
    if t_star is None:
        return None
    if not t_star > 0:
        raise UsageError("--t-star must be > 0")
    return sweet_spot_time(n, t_star)


def cmd_kernel(args) -> int:
    kind = KernelKind(args.kernel)
    if args.map is None:
        sphere_map = SphereMap.SQRT_L1 if kind.spherical else SphereMap.NONE
    else:
        sphere_map = SphereMap(args.map)
    if kind is KernelKind.RBF and args.gamma is None:
        raise UsageError("--gamma is required for the rbf kernel")
    if kind is not KernelKind.RBF and args.gamma is not None:
        raise UsageError("--gamma only applies to the rbf kernel")
    uses_t = kind in (KernelKind.PARAMETRIX, KernelKind.EXACT)
    if not uses_t and (args.t is not None or args.t_star is not None):
        raise UsageError(f"--t/--t-star do not apply to the {kind.value} kernel")
    # validate the flag combination before touching the data
    probe_t = 1.0 if uses_t else None
    try:
        KernelSpec(kind, map=sphere_map, gamma=args.gamma, t=probe_t)
    except InvalidParams as exc:
        raise UsageError(str(exc)) from exc

    data = load_csv(args.input, args.label_column, map_hint=sphere_map, id_column=args.id_column)
    t = _resolve_t(args, data.n) if uses_t else None
    spec = KernelSpec(kind, map=sphere_map, gamma=args.gamma, t=t, n=data.n if kind is KernelKind.EXACT else None)
    gram = gram_matrix(spec, data.matrix, data.sample_ids, threads=args.threads)
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "command": "kernel",
        "config": _config(args),
        "seed": args.seed,
        "spec": gram.spec.to_dict(),
        "n": data.n,
        "m": data.m,
    }
    if args.psd_check:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = psd_check(gram)
        sidecar["psd"] = report.to_dict()
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    fmt = args.format or "csv"
    with _sink(args.output) as fh:
        if fmt == "json":
            fh.write(_json_dump({**sidecar, "sample_ids": gram.sample_ids, "entries": gram.entries.tolist()}))
        elif fmt == "table":
            fh.write(f"# {_header_line(args)}\n")
            fh.write(_table(["id"] + gram.sample_ids, [[sid] + list(row) for sid, row in zip(gram.sample_ids, gram.entries)]))
        else:
            write_gram_csv(gram, fh)
    if fmt == "csv":
        if args.output and args.output != "-":
            with open(args.output + ".json", "w") as fh:
                fh.write(_json_dump(sidecar))
        else:
            sys.stderr.write(_json_dump(sidecar))
    return EXIT_OK


def cmd_cv(args) -> int:
    kinds = []
    for name in args.kernel.split(","):
        name = name.strip()
        try:
            kinds.append(KernelKind(name))
        except ValueError:
            raise UsageError(f"unknown kernel {name!r}") from None
    sphere_map = SphereMap(args.map)
    if any(k.spherical for k in kinds) and sphere_map is SphereMap.NONE:
        raise UsageError("hyperspherical kernels need --map sqrt-l1 or l2")
    if args.folds < 2 or args.runs < 1:
        raise UsageError("need --folds >= 2 and --runs >= 1")
    data = load_csv(args.input, args.label_column, map_hint=sphere_map, id_column=args.id_column)
    m_r = args.m_r
    if args.balance and m_r is None:
        m_r = min(int(np.sum(data.labels == c)) for c in data.classes)
    results = {}
    for kind in kinds:
        results[kind.value] = repeated_cv(
            data,
            kind,
            runs=args.runs,
            seed=args.seed,
            m_r=m_r,
            balance_runs=args.balance_runs,
            t_star_grid=args.t_star_grid,
            C_grid=args.C_grid,
            gamma_grid=args.gamma_grid,
            k=args.folds,
            sphere_map=sphere_map if kind.spherical else SphereMap.NONE,
            threads=args.threads,
            timed=args.timing,
        )
    fmt = args.format or "json"
    with _sink(args.output) as fh:
        if fmt == "json":
            doc = {
                "schema_version": SCHEMA_VERSION,
                "command": "cv",
                "config": _config(args),
                "seed": args.seed,
                "n": data.n,
                "m": data.m,
                "m_r": m_r,
                "results": {k: r.to_dict() for k, r in results.items()},
            }
            fh.write(_json_dump(doc))
        else:
            header = ["kernel"] + [f"run{i + 1}" for i in range(args.runs)] + ["mean"]
            rows = [[k] + [100 * v for v in r.best_means] + [100 * r.mean_of_best] for k, r in results.items()]
            if fmt == "csv":
                fh.write(_csv(header, rows, comment=_header_line(args)))
            else:
                fh.write(f"# {_header_line(args)}\n")
                fh.write(_table(header, [[r[0]] + [f"{v:.2f}" for v in r[1:]] for r in rows]))
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .diffusion import WalkConfig, WalkResult, compare_to_kernel, walk, write_paths_csv

    if args.n < 3:
        raise UsageError("--n must be >= 3 for the kernel comparison")
    t = _resolve_t(args, args.n)
    config = WalkConfig.for_time(args.n, t, step_size=args.delta, num_walkers=args.walkers, seed=args.seed)
    if config.num_walkers < 1000:
        # fail before spending time on the walk
        raise TooFewWalkers(f"need at least 1000 walkers, got {config.num_walkers}")
    record = args.record_every if args.paths else None
    result = walk(config, record_every=record, threads=args.threads)
    report = compare_to_kernel(result.endpoints, args.n, config.diffusion_time, bins=args.bins)
    if args.paths:
        kept = result.paths[: args.path_walkers]
        write_paths_csv(WalkResult(config, result.endpoints[: args.path_walkers], kept, result.path_steps), args.paths)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "config": _config(args),
        "seed": args.seed,
        "t_requested": t,
        "t_effective": config.diffusion_time,
        "steps": config.num_steps,
        **report.to_dict(),
    }
    fmt = args.format or "json"
    with _sink(args.output) as fh:
        if fmt == "json":
            fh.write(_json_dump(doc))
        else:
            header = ["theta", "empirical", "predicted"]
            rows = [[b["theta"], b["empirical"], b["predicted"]] for b in doc["bins"]]
            comment = f"{_header_line(args)} ks={report.ks_statistic:.6g}"
            fh.write(_csv(header, rows, comment) if fmt == "csv" else f"# {comment}\n" + _table(header, rows))
    return EXIT_OK


def _finite(value) -> float | None:
    value = float(value)
    return value if math.isfinite(value) else None


def _slope_at_pi(f, h: float) -> float:
    """One-sided second-order difference (3 f(pi) - 4 f(pi - h) + f(pi - 2h)) / 2h."""
    return (3 * f(math.pi) - 4 * f(math.pi - h) + f(math.pi - 2 * h)) / (2 * h)


def diagnose_rows(n_grid, t_grid=None, t_star_grid=None, theta_grid=None, slope_step: float = 1e-3):
    """Kernel-shape table for every (n, t, theta) plus per-(n, t) summaries."""
    theta = np.linspace(0.0, math.pi, 33) if theta_grid is None else np.asarray(theta_grid, dtype=float)
    if np.any(theta < 0) or np.any(theta > math.pi):
        raise UsageError("--theta-grid values must lie in [0, pi]")
    rows, summary = [], []
    for n in n_grid:
        if n < 3:
            raise UsageError(f"n must be >= 3, got {n}")
        times = list(t_grid) if t_grid else [sweet_spot_time(n, ts) for ts in (t_star_grid or [1.0])]
        for t in times:
            params = ExactKernelParams(n=int(n), t=float(t))
            ext = np.asarray(k_exact(np.cos(theta), params), dtype=float)
            prx = np.asarray(k_prx(theta, t), dtype=float)
            d = n - 1
            flag = bool(unphysical_regime(int(n), float(t)))
            for th, ke, kp in zip(theta, ext, prx):
                inside = th < math.pi
                # the correction terms blow up towards the antipode; report overflow as null
                with np.errstate(over="ignore", invalid="ignore"):
                    corr = {
                        "u0": _finite(u0(th, d)) if inside else None,
                        "u1": _finite(u1(th, d)) if inside else None,
                        "u2": _finite(u2(th, d)) if 0 < th < math.pi else None,
                    }
                rows.append({"n": int(n), "t": float(t), "theta": float(th), "k_prx": float(kp), "k_exact": float(ke), **corr, "unphysical": flag})
            summary.append(
                {
                    "n": int(n),
                    "t": float(t),
                    "slope_exact_at_pi": _slope_at_pi(lambda x: float(k_exact(math.cos(x), params)), slope_step),
                    "slope_prx_at_pi": _slope_at_pi(lambda x: float(k_prx(min(x, math.pi), t)), slope_step),
                    "unphysical": flag,
                }
            )
    return rows, summary


def cmd_diagnose(args) -> int:
    rows, summary = diagnose_rows(args.n_grid, args.t_grid, args.t_star_grid, args.theta_grid, args.slope_step)
    fmt = args.format or "json"
    with _sink(args.output) as fh:
        if fmt == "json":
            fh.write(
                _json_dump(
                    {
                        "schema_version": SCHEMA_VERSION,
                        "command": "diagnose",
                        "config": _config(args),
                        "seed": args.seed,
                        "summary": summary,
                        "rows": rows,
                    }
                )
            )
        else:
            header = list(rows[0])
            table_rows = [[r[k] for k in header] for r in rows]
            s_header = list(summary[0])
            s_rows = [[s[k] for k in s_header] for s in summary]
            if fmt == "csv":
                fh.write(_csv(header, table_rows, comment=_header_line(args)))
            else:
                fh.write(f"# {_header_line(args)}\n" + _table(s_header, s_rows) + "\n" + _table(header, table_rows))
    return EXIT_OK


COMMANDS = {"kernel": cmd_kernel, "cv": cmd_cv, "simulate": cmd_simulate, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SphereHeatError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
