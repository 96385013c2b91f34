"""Command-line front end.

Subcommands: ``plan`` prints a sizing report for one QoS class, ``curve``
sweeps the planner over a rho or lambda grid, ``validate`` runs the simulator
against the planner's predictions, and ``ratio-table`` tabulates the
bound-tightness ratios.  The CSV dialect is fixed (comma separator, header
row, LF line endings, 12 significant digits) so outputs are byte-stable for
a given config and seed; ``--plot`` additionally renders a PNG next to each
CSV.

Exit codes: 0 success, 2 config/usage errors, 3 invalid model or parameter
values, 4 simulation failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import (
    ConfigError,
    arrival_from,
    get_float,
    grid_from,
    load_config,
    parse_grid,
    qos_from,
    seed_from,
    service_from,
    sim_params_from,
)
from .halfin_whitt import hw_solve_psi
from .planner import _guarded_ceil, machines_for, machines_for_rate, tightness_ratio
from .simulate import SimulationError, validate_class

_CLASS_ORDER = ("zwt", "mwt", "bwt", "pwt")

_CURVE_COLUMNS = (
    "sweep",
    "value",
    "class",
    "rho",
    "lambda",
    "n_lo",
    "n_hi",
    "additional",
    "constant_lo",
    "constant_hi",
)
_VALIDATE_COLUMNS = (
    "rho",
    "n",
    "bound",
    "predicted",
    "simulated",
    "ci_halfwidth",
    "simulated_time_avg",
)
_RATIO_COLUMNS = ("k", "alpha", "r1", "r2", "r")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".12g")


def _write_csv(path: str, columns: tuple[str, ...], rows: list[dict]) -> None:
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(row[col]) for col in columns) for row in rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _sizing_record(result) -> dict:
    record = {"class": result.qos, "rho": result.rho, "n": result.n}
    if result.n_lo is not None:
        record["n_lo"] = result.n_lo
        record["n_hi"] = result.n_hi
    record["constants"] = dict(result.constants or {})
    return record


def _cmd_plan(args) -> int:
    cfg = load_config(args.config)
    svc = service_from(cfg)
    arr = arrival_from(cfg)
    qos = qos_from(cfg, args.qos_class)
    rho = args.rho if args.rho is not None else get_float(cfg, "rho", None)
    lam = args.lam if args.lam is not None else get_float(cfg, "lambda", None)
    if (rho is None) == (lam is None):
        raise ConfigError("plan needs exactly one of rho and lambda")
    if rho is not None:
        result = machines_for(qos, svc, arr.cv, rho)
    else:
        result = machines_for_rate(qos, svc, arr.cv, lam)

    print(f"class={result.qos}")
    print(f"rho={_fmt(result.rho)}")
    if result.n_lo is not None:
        print(f"n_lo={result.n_lo}")
        print(f"n_hi={result.n_hi}")
    print(f"n={result.n}")
    for key in sorted(result.constants or {}):
        print(f"{key}={_fmt(result.constants[key])}")
    if args.record:
        with open(args.record, "w", encoding="utf-8", newline="") as fh:
            json.dump(_sizing_record(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


_CURVE_CONSTANTS = {
    "zwt": ("k1", "k1"),
    "mwt": ("L", "U"),
    "bwt": ("tau", "tau"),
    "pwt": ("gamma", "gamma"),
}


def _cmd_curve(args) -> int:
    cfg = load_config(args.config)
    svc = service_from(cfg)
    arr = arrival_from(cfg)
    sweep = args.sweep or cfg.get("sweep")
    if sweep not in ("rho", "lambda"):
        raise ConfigError(f"curve sweeps rho or lambda, got {sweep!r}")
    grid = grid_from(cfg, args.grid)
    cls = args.qos_class or cfg.get("qos.class", "all")
    classes = _CLASS_ORDER if cls == "all" else (cls,)

    rows = []
    for value in grid:
        for name in classes:
            qos = qos_from(cfg, name)
            if sweep == "rho":
                result = machines_for(qos, svc, arr.cv, value)
                lam = value * result.n * svc.mu
            else:
                result = machines_for_rate(qos, svc, arr.cv, value)
                lam = value
            lo_key, hi_key = _CURVE_CONSTANTS[name]
            rows.append(
                {
                    "sweep": sweep,
                    "value": value,
                    "class": name,
                    "rho": result.rho,
                    "lambda": lam,
                    "n_lo": result.n_lo if result.n_lo is not None else result.n,
                    "n_hi": result.n_hi if result.n_hi is not None else result.n,
                    "additional": result.n - _guarded_ceil(lam / svc.mu),
                    "constant_lo": result.constants[lo_key],
                    "constant_hi": result.constants[hi_key],
                }
            )
    _write_csv(args.out, _CURVE_COLUMNS, rows)
    if args.plot:
        from .plots import plot_curve

        plot_curve(rows, args.out)
    return 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    svc = service_from(cfg)
    arr = arrival_from(cfg)
    qos = qos_from(cfg, args.qos_class)
    grid = grid_from(cfg, args.grid)
    measured, warmup, batches = sim_params_from(cfg)
    seed = seed_from(cfg, args.seed)
    results = validate_class(
        qos,
        svc,
        arr,
        grid,
        measured=measured,
        warmup=warmup,
        batches=batches,
        seed=seed,
        jobs=args.jobs,
    )
    # keep zero estimates plottable on a log axis: report them strictly
    # below the 1/measured resolution instead of as 0
    floor = 0.5 / measured

    def clamp(x: float | None) -> float | None:
        if x is None:
            return None
        return max(x, floor)

    rows = [
        {
            "rho": row.rho,
            "n": row.n,
            "bound": row.bound,
            "predicted": row.predicted,
            "simulated": clamp(row.simulated),
            "ci_halfwidth": row.ci_halfwidth,
            "simulated_time_avg": clamp(row.simulated_time_avg),
        }
        for row in results
    ]
    _write_csv(args.out, _VALIDATE_COLUMNS, rows)
    if args.plot:
        from .plots import plot_validate

        plot_validate(rows, args.out)
    return 0


def _cmd_ratio_table(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    k_grid = parse_grid(args.k_grid)
    alpha_grid = parse_grid(args.alpha_grid)
    ks = []
    for k in k_grid:
        if abs(k - round(k)) > 1e-9 or round(k) < 1:
            raise ConfigError(f"k grid entries must be integers >= 1, got {k!r}")
        ks.append(int(round(k)))
    svc = service_from(cfg) if "service.mu" in cfg else None
    cv = arrival_from(cfg).cv if svc is not None else 1.0

    psi_cache: dict[float, float] = {}

    def psi(alpha: float) -> float:
        if alpha not in psi_cache:
            psi_cache[alpha] = hw_solve_psi(alpha).psi
        return psi_cache[alpha]

    rows = []
    for k in ks:
        for alpha in alpha_grid:
            r1 = psi(alpha / k) / psi(alpha)
            r2 = r = None
            if svc is not None:
                r2 = tightness_ratio(svc, cv, alpha)[2]
                r = r1 * r2
            rows.append({"k": k, "alpha": alpha, "r1": r1, "r2": r2, "r": r})
    _write_csv(args.out, _RATIO_COLUMNS, rows)
    if args.plot:
        from .plots import plot_ratio

        plot_ratio(rows, args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heavyq",
        description="Capacity planning and validation for many-server queues.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="size a pool for one QoS class at a rho or lambda")
    plan.add_argument("--config", required=True, help="experiment config path")
    plan.add_argument("--class", dest="qos_class", choices=_CLASS_ORDER, help="QoS class")
    plan.add_argument("--rho", type=float, help="traffic intensity in (0, 1)")
    plan.add_argument("--lambda", dest="lam", type=float, help="arrival rate")
    plan.add_argument("--record", help="also write the report as JSON to this path")
    plan.set_defaults(handler=_cmd_plan)

    curve = sub.add_parser("curve", help="sweep the planner over a rho or lambda grid")
    curve.add_argument("--config", required=True, help="experiment config path")
    curve.add_argument("--class", dest="qos_class", choices=_CLASS_ORDER + ("all",))
    curve.add_argument("--sweep", choices=("rho", "lambda"))
    curve.add_argument("--grid", help="sweep grid as a:b:step")
    curve.add_argument("--out", required=True, help="output CSV path")
    curve.add_argument("--plot", action="store_true", help="render a PNG next to the CSV")
    curve.set_defaults(handler=_cmd_curve)

    validate = sub.add_parser("validate", help="simulate a class against its prediction")
    validate.add_argument("--config", required=True, help="experiment config path")
    validate.add_argument("--class", dest="qos_class", choices=("mwt", "bwt"))
    validate.add_argument("--grid", help="rho grid as a:b:step")
    validate.add_argument("--seed", type=int, help="override the config seed")
    validate.add_argument("--jobs", type=int, default=1, help="parallel grid points")
    validate.add_argument("--out", required=True, help="output CSV path")
    validate.add_argument("--plot", action="store_true", help="render a PNG next to the CSV")
    validate.set_defaults(handler=_cmd_validate)

    ratio = sub.add_parser("ratio-table", help="tabulate bound-tightness ratios")
    ratio.add_argument("--config", help="optional config providing a service model")
    ratio.add_argument("--k-grid", required=True, help="branch-count grid as a:b:step")
    ratio.add_argument("--alpha-grid", required=True, help="wait-probability grid as a:b:step")
    ratio.add_argument("--out", required=True, help="output CSV path")
    ratio.add_argument("--plot", action="store_true", help="render a PNG next to the CSV")
    ratio.set_defaults(handler=_cmd_ratio_table)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
