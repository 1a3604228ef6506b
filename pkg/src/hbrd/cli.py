"""Command-line front end.

Subcommands: canonicalize, rate, bounds, sweep, verify.  Output is JSON
(CSV for sweeps), byte-stable for fixed inputs, seed, and version: floats
are emitted at round-trip precision and no timestamps enter the payload.

Exit codes: 0 success, 2 validation/usage error, 3 solver non-convergence,
4 verification failure.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .achievability import LN2, RateReport, rate_mse_closed, rate_sc_closed
from .enhancement import build_enhanced
from .errors import HbrdError, NoFeasiblePointFound, NonConvergence, ValidationError
from .instancefile import InstanceFile, InstanceFileError, load_instance
from .lower_bounds import (
    BoundKind,
    BoundTag,
    SearchConfig,
    analytic_converse,
    mlb_inner_search,
)
from .model import (
    MseDiag,
    ScaledIdentity,
    Trace,
    canonicalize,
    detect_degraded,
    family_name,
    validate,
)
from .trace_solver import SolverConfig, grid_oracle, solve_maximin_swapped, solve_minimax
from .verify import (
    check_bound_ordering,
    check_corollary_enhanced_distortion,
    check_degraded_reduction,
    check_diag_inverse_lemma,
    check_variance_drop,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

_FAMILY_FLAGS = {"mse": MseDiag, "sc": ScaledIdentity, "tr": Trace}

VERIFY_SUITES = (
    "all",
    "diag-inverse",
    "variance-drop",
    "corollary",
    "bound-ordering",
    "degraded",
)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items() if k != "elapsed_s"}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _default_seed() -> int:
    env = os.environ.get("HBRD_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            pass
    return 0


def _rates_payload(report: RateReport, bits: bool) -> dict:
    out = {
        "unit": "nats",
        "r1_nats": report.r1,
        "r2_nats": report.r2,
        "r_nats": report.r,
    }
    if bits:
        out.update(
            {
                "r1_bits": report.r1 / LN2,
                "r2_bits": report.r2 / LN2,
                "r_bits": report.r / LN2,
            }
        )
    return out


def _canonical_payload(canon) -> dict:
    return {
        "l1": canon.l1,
        "l2": canon.l2,
        "A": canon.a.tolist(),
        "B": canon.b.tolist(),
        "Q": canon.q.tolist(),
        "K_X_given_Y1_c": canon.k1c.tolist(),
        "K_X_given_Y2_c": canon.k2c.tolist(),
    }


def _record(args, payload: dict, seed: int | None = None) -> dict:
    rec = {
        "command": " ".join(args._argv),
        "tool": {"name": "hbrd", "version": __version__},
    }
    if seed is not None:
        rec["seed"] = seed
    rec.update(payload)
    return _jsonable(rec)


def _emit(args, record: dict) -> None:
    print(json.dumps(record, sort_keys=True, indent=2))


def _load(path: str) -> InstanceFile:
    return load_instance(path)


def cmd_canonicalize(args) -> int:
    loaded = _load(args.instance)
    issues = validate(loaded.instance, loaded.spec)
    if issues:
        _emit(args, _record(args, {"errors": [str(i) for i in issues]}))
        return EXIT_VALIDATION
    canon = canonicalize(loaded.instance, loaded.spec)
    payload = {
        "canonical": _canonical_payload(canon),
        "degraded": list(detect_degraded(loaded.instance) or []) or None,
        "family": family_name(loaded.spec),
    }
    _emit(args, _record(args, payload))
    return EXIT_OK


def _check_family(loaded: InstanceFile, flag: str) -> None:
    want = _FAMILY_FLAGS[flag]
    if not isinstance(loaded.spec, want):
        raise ValidationError(
            [
                f"family mismatch: instance carries "
                f"'{family_name(loaded.spec)}' but '{flag}' was requested"
            ]
        )


def cmd_rate(args) -> int:
    loaded = _load(args.instance)
    _check_family(loaded, args.family)
    canon = canonicalize(loaded.instance, loaded.spec)
    seed = args.seed
    payload = {"family": args.family, "canonical": _canonical_payload(canon)}
    if args.family == "mse":
        report = rate_mse_closed(canon, loaded.spec)
        payload["method"] = "closed_form"
    elif args.family == "sc":
        report = rate_sc_closed(canon, loaded.spec)
        payload["method"] = "closed_form"
    else:
        cfg = SolverConfig(seed=seed, restarts=args.restarts, tol=args.tol)
        if args.swapped:
            report = solve_maximin_swapped(canon, loaded.spec, cfg)
            payload["method"] = "maximin_swapped"
        else:
            report, tv = solve_minimax(canon, loaded.spec, cfg)
            payload["method"] = "minimax"
            payload["argmin"] = {
                "w": tv.w.tolist(),
                "u": tv.u.tolist(),
                "v": tv.v.tolist(),
            }
        payload["diagnostics"] = report.diagnostics
    payload["rates"] = _rates_payload(report, args.bits)
    payload["components"] = report.components
    _emit(args, _record(args, payload, seed=seed))
    return EXIT_OK


def cmd_bounds(args) -> int:
    loaded = _load(args.instance)
    canon = canonicalize(loaded.instance, loaded.spec)
    seed = args.seed
    payload = {"family": family_name(loaded.spec), "canonical": _canonical_payload(canon)}
    if isinstance(loaded.spec, Trace):
        cfg = SolverConfig(seed=seed, restarts=args.restarts, tol=args.tol)
        minimax, _ = solve_minimax(canon, loaded.spec, cfg)
        swapped = solve_maximin_swapped(canon, loaded.spec, cfg)
        payload["bounds"] = {
            "minimax": {
                "value_nats": minimax.r,
                "label": "certified",
                "diagnostics": minimax.diagnostics,
            },
            "maximin_swapped": {
                "value_nats": swapped.r,
                "label": "certified",
                "diagnostics": swapped.diagnostics,
            },
            "gap_nats": minimax.r - swapped.r,
        }
    else:
        if isinstance(loaded.spec, MseDiag):
            ach = rate_mse_closed(canon, loaded.spec)
        else:
            ach = rate_sc_closed(canon, loaded.spec)
        conv = analytic_converse(canon, loaded.spec)
        kxy = build_enhanced(canon).k_x_given_y
        searches = {}
        for tag in (BoundTag.ELB, BoundTag.E2LB, BoundTag.MLB):
            vals = []
            for branch in (1, 2):
                cfg = SearchConfig(
                    seed=seed + branch,
                    restarts=args.restarts,
                    kind=BoundKind(tag, branch),
                )
                vals.append(mlb_inner_search(canon, kxy, loaded.spec, cfg).value)
            searches[tag.value] = {
                "value_nats": max(vals),
                "label": "heuristic",
                "branches": vals,
            }
        payload["bounds"] = {
            "achievable_closed_form": {"value_nats": ach.r, "label": "certified"},
            "analytic_converse": {"value_nats": conv.r, "label": "certified"},
            "tightness_gap_nats": ach.r - conv.r,
            "inner_search_estimates": searches,
        }
    _emit(args, _record(args, payload, seed=seed))
    return EXIT_OK


def _sweep_spec(spec, axis: str, value: float):
    if isinstance(spec, MseDiag):
        f1 = value if axis in ("d1", "both") else 1.0
        f2 = value if axis in ("d2", "both") else 1.0
        return MseDiag(d1=f1 * spec.d1, d2=f2 * spec.d2)
    d1 = value if axis in ("d1", "both") else spec.d1
    d2 = value if axis in ("d2", "both") else spec.d2
    return type(spec)(d1=d1, d2=d2)


def cmd_sweep(args) -> int:
    loaded = _load(args.instance)
    values = np.linspace(args.start, args.stop, args.steps)
    rows = []
    seed = args.seed
    for value in values:
        spec = _sweep_spec(loaded.spec, args.axis, float(value))
        issues = validate(loaded.instance, spec)
        if issues:
            rows.append((float(value), spec, None, "infeasible"))
            continue
        canon = canonicalize(loaded.instance, spec)
        if isinstance(spec, Trace):
            cfg = SolverConfig(seed=seed, restarts=args.restarts, tol=args.tol)
            report, _ = solve_minimax(canon, spec, cfg)
        elif isinstance(spec, MseDiag):
            report = rate_mse_closed(canon, spec)
        else:
            report = rate_sc_closed(canon, spec)
        branch = "1" if report.r1 >= report.r2 else "2"
        rows.append((float(value), spec, report, branch))

    feasible_rates = [r.r for _, _, r, _ in rows if r is not None]
    for earlier, later in zip(feasible_rates, feasible_rates[1:]):
        if later > earlier + 1e-6:
            raise NonConvergence(
                f"sweep rate column is not nonincreasing: {earlier} -> {later}"
            )

    buf = io.StringIO()
    print("axis_value,d1,d2,feasible,r1_nats,r2_nats,r_nats,active_branch", file=buf)
    for value, spec, report, branch in rows:
        if isinstance(spec, MseDiag):
            d1 = float(np.max(spec.d1))
            d2 = float(np.max(spec.d2))
        else:
            d1, d2 = spec.d1, spec.d2
        if report is None:
            print(f"{value!r},{d1!r},{d2!r},no,,,,", file=buf)
        else:
            print(
                f"{value!r},{d1!r},{d2!r},yes,{report.r1!r},{report.r2!r},{report.r!r},{branch}",
                file=buf,
            )
    text = buf.getvalue()
    if args.format == "json":
        _emit(args, _record(args, {"csv": text}, seed=seed))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed
    results = []
    selected = args.suite
    if "all" in selected:
        selected = [s for s in VERIFY_SUITES if s != "all"]
    for suite in selected:
        if suite == "diag-inverse":
            results.append(check_diag_inverse_lemma(trials=args.trials or 1000, seed=seed))
        elif suite == "variance-drop":
            results.append(check_variance_drop(trials=args.trials or 500, seed=seed))
        elif suite == "corollary":
            results.append(
                check_corollary_enhanced_distortion(trials=args.trials or 500, seed=seed)
            )
        elif suite == "bound-ordering":
            instances = _bound_ordering_instances()
            results.append(
                check_bound_ordering(
                    instances,
                    seed=seed,
                    triples=args.trials or 100,
                    search_instances=1,
                )
            )
        elif suite == "degraded":
            results.append(check_degraded_reduction(trials=args.trials or 50, seed=seed))
    payload = {
        "suites": [
            {
                "name": r.name,
                "trials": r.trials,
                "failures": r.failures,
                "worst_violation": r.worst_violation,
                "seed": r.seed,
            }
            for r in results
        ]
    }
    _emit(args, _record(args, payload, seed=seed))
    return EXIT_OK if all(r.failures == 0 for r in results) else EXIT_VERIFY


def _bound_ordering_instances():
    from .model import ProblemInstance

    mse_inst = ProblemInstance(
        k_x_given_y1=np.diag([1.0, 0.25]), k_x_given_y2=np.diag([0.25, 1.0])
    )
    mse_spec = MseDiag(d1=np.array([0.2, 0.2]), d2=np.array([0.2, 0.2]))
    sc_inst = ProblemInstance(
        k_x_given_y1=np.diag([4.0 / 9.0, 4.0 / 9.0]),
        k_x_given_y2=np.diag([4.0 / 17.0, 4.0 / 5.0]),
    )
    sc_spec = ScaledIdentity(d1=0.15, d2=0.15)
    return [
        (canonicalize(mse_inst, mse_spec), mse_spec),
        (canonicalize(sc_inst, sc_spec), sc_spec),
    ]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hbrd",
        description=(
            "Optimal rates and converse bounds for two-decoder vector Gaussian "
            "rate-distortion with decoder side information."
        ),
    )
    parser.add_argument("--version", action="version", version=f"hbrd {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, solver=False):
        p.add_argument("--seed", type=int, default=_default_seed())
        p.add_argument("--bits", action="store_true", help="also report rates in bits")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if solver:
            p.add_argument("--restarts", type=int, default=None)
            p.add_argument("--tol", type=float, default=1e-7)

    p = sub.add_parser("canonicalize", help="print the canonical decomposition")
    p.add_argument("instance")
    common(p)
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("rate", help="optimal rate for the instance's family")
    p.add_argument("instance")
    p.add_argument("--family", choices=("mse", "sc", "tr"), required=True)
    p.add_argument("--swapped", action="store_true", help="swapped maximin (tr only)")
    common(p, solver=True)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("bounds", help="converse/achievable bound panel")
    p.add_argument("instance")
    common(p, solver=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="distortion sweep as CSV")
    p.add_argument("instance")
    p.add_argument("--axis", choices=("d1", "d2", "both"), default="both")
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    common(p, solver=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run randomized property suites")
    p.add_argument(
        "suite",
        nargs="+",
        choices=VERIFY_SUITES,
        metavar="suite",
        help=f"one or more of: {', '.join(VERIFY_SUITES)}",
    )
    p.add_argument("--trials", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = ["hbrd"] + argv
    if getattr(args, "restarts", None) is None and hasattr(args, "restarts"):
        args.restarts = 64 if args.cmd in ("rate", "sweep") else 8
    try:
        return args.func(args)
    except (InstanceFileError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NonConvergence, NoFeasiblePointFound) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except HbrdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
