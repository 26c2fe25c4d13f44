"""Command line front end: ``ermstab run | fit | bounds | verify``.

Exit codes: 0 success, 2 validation error, 3 enumeration cap refusal,
4 verification failure.
"""

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from . import __version__
from ._validation import as_fraction, check_grid
from .analysis import ClassifyConfig, RateSeries, classify
from .exact import DEFAULT_CAP, exact_delta
from .exceptions import EnumerationCapError, ErmStabError, ValidationError
from .montecarlo import BLOCK_SIZE, CI_LEVEL, CI_METHOD, McConfig, default_workers, estimate_delta
from .resample import StabilityNotion
from .scenarios import builtin, dump_scenario, load_scenario
from . import bounds as _bounds
from .verify import FAIL, run_checks

EXIT_OK, EXIT_VALIDATION, EXIT_CAP, EXIT_VERIFY = 0, 2, 3, 4

CSV_COLUMNS = [
    "scenario", "notion", "beta", "m", "delta", "ci_lo", "ci_hi",
    "engine", "trials", "seed", "i_policy",
]
RATIONAL_COLUMN = "delta_rational"


def fmt_float(x):
    return format(float(x), ".17g")


def fmt_fraction(x):
    return str(Fraction(x))


@dataclass
class ExperimentConfig:
    scenario: dict = field(default_factory=lambda: {"builtin": "two_constant", "params": {"p": "1/2"}})
    notion: str = "cv"
    beta: str = "0"
    m_grid: list = field(default_factory=lambda: [25, 50, 100])
    engine: str = "exact"
    mode: str = "rational"
    trials: int = 100_000
    seed: int = 0
    workers: int = 1
    i_policy: str = "fixed"
    cap: int = DEFAULT_CAP
    csv: str = None
    manifest: str = None

    def validate(self):
        self.notion = StabilityNotion.parse(self.notion).value
        self.beta = fmt_fraction(as_fraction(self.beta))
        self.m_grid = check_grid(self.m_grid)
        if self.engine not in ("exact", "mc", "auto"):
            raise ValidationError(f"engine must be exact, mc or auto, got {self.engine!r}")
        if self.mode not in ("rational", "float"):
            raise ValidationError(f"mode must be rational or float, got {self.mode!r}")
        if self.engine != "exact" and self.trials < 1:
            raise ValidationError("trials must be at least 1")
        if self.i_policy not in ("fixed", "uniform"):
            raise ValidationError(f"i_policy must be fixed or uniform, got {self.i_policy!r}")
        return self

    def reproducible(self):
        """Fields that determine the output bytes (workers and paths do not)."""
        out = asdict(self)
        for key in ("workers", "csv", "manifest"):
            out.pop(key)
        return out


def resolve_scenario(ref):
    if not isinstance(ref, dict):
        raise ValidationError("scenario reference must be an object")
    if "builtin" in ref:
        return builtin(ref["builtin"], **ref.get("params", {}))
    if "file" in ref:
        return load_scenario(Path(ref["file"]))
    if "document" in ref:
        return load_scenario(ref["document"])
    raise ValidationError("scenario reference needs 'builtin', 'file' or 'document'")


def _parse_params(pairs):
    params = {}
    for item in pairs or ():
        if "=" not in item:
            raise ValidationError(f"parameters are key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = value.strip()
    return params


def _parse_grid(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"m grid must be comma-separated integers, got {text!r}") from None


def load_config(path):
    doc = json.loads(Path(path).read_text())
    if "config" in doc:
        doc = doc["config"]
    unknown = set(doc) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**doc)


def _exact_row(spec, cfg, m, notion, beta):
    result = exact_delta(spec, m, notion, beta, mode=cfg.mode, cap=cfg.cap)
    row = {
        "scenario": spec.label, "notion": notion.value, "beta": fmt_fraction(beta), "m": m,
        "delta": fmt_float(result.delta), "ci_lo": "", "ci_hi": "", "engine": "exact",
        "trials": 0, "seed": "", "i_policy": "fixed",
    }
    if cfg.mode == "rational":
        row[RATIONAL_COLUMN] = fmt_fraction(result.delta)
    return row


def _mc_row(spec, cfg, m, notion, beta):
    mc = McConfig(trials=cfg.trials, seed=cfg.seed, workers=cfg.workers, notion=notion,
                  beta=beta, i_policy=cfg.i_policy)
    est = estimate_delta(spec, m, mc)
    row = {
        "scenario": spec.label, "notion": notion.value, "beta": fmt_fraction(beta), "m": m,
        "delta": fmt_float(est.delta_hat), "ci_lo": fmt_float(est.ci_low),
        "ci_hi": fmt_float(est.ci_high), "engine": "mc", "trials": est.trials,
        "seed": est.seed, "i_policy": est.i_policy,
    }
    if cfg.mode == "rational":
        row[RATIONAL_COLUMN] = ""
    return row


def run_experiment(cfg):
    """Compute the series rows for a validated config."""
    cfg.validate()
    spec = resolve_scenario(cfg.scenario)
    notion = StabilityNotion.parse(cfg.notion)
    beta = as_fraction(cfg.beta)
    rows = []
    for m in cfg.m_grid:
        if cfg.engine == "mc":
            rows.append(_mc_row(spec, cfg, m, notion, beta))
        elif cfg.engine == "exact":
            rows.append(_exact_row(spec, cfg, m, notion, beta))
        else:
            try:
                rows.append(_exact_row(spec, cfg, m, notion, beta))
            except EnumerationCapError:
                rows.append(_mc_row(spec, cfg, m, notion, beta))
    return spec, rows


def write_csv(rows, out, rational=False):
    columns = CSV_COLUMNS + ([RATIONAL_COLUMN] if rational else [])
    writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in columns})


def build_manifest(cfg, spec, rows):
    config = cfg.reproducible()
    if "file" in config["scenario"]:
        config["scenario"] = {"document": dump_scenario(spec)}
    return {
        "config": config,
        "scenario": {"label": spec.label, "document": dump_scenario(spec), "metadata": spec.metadata()},
        "rows": len(rows),
        "seeding": {
            "master_seed": cfg.seed,
            "stream_key": "numpy SeedSequence(seed, spawn_key=(m,)).generate_state(1, uint64)",
            "per_trial": "splitmix64 output t+1 of the stream started at the key",
            "per_slot": "splitmix64 output j of the stream started at the trial seed",
            "block_size": BLOCK_SIZE,
        },
        "interval": {"method": CI_METHOD, "level": CI_LEVEL},
        "training_delta": "max(cv, overlap)",
        "ermstab_version": __version__,
    }


def cmd_run(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.scenario_file:
        cfg.scenario = {"file": args.scenario_file}
    elif args.scenario:
        cfg.scenario = {"builtin": args.scenario, "params": _parse_params(args.param)}
    for name in ("notion", "beta", "engine", "mode", "trials", "seed", "i_policy", "cap", "csv", "manifest"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    if args.m_grid is not None:
        cfg.m_grid = _parse_grid(args.m_grid)
    cfg.workers = args.workers if args.workers is not None else (
        cfg.workers if args.config else default_workers()
    )
    spec, rows = run_experiment(cfg)
    buf = io.StringIO()
    write_csv(rows, buf, rational=cfg.mode == "rational")
    if cfg.csv:
        Path(cfg.csv).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if cfg.manifest:
        Path(cfg.manifest).write_text(json.dumps(build_manifest(cfg, spec, rows), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def read_series_csv(path, scenario=None, notion=None):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path} has no rows")
    missing = {"m", "delta"} - set(rows[0])
    if missing:
        raise ValidationError(f"{path} lacks columns {sorted(missing)}")
    if scenario:
        rows = [r for r in rows if r.get("scenario") == scenario]
    if notion:
        rows = [r for r in rows if r.get("notion") == notion]
    labels = {(r.get("scenario"), r.get("notion")) for r in rows}
    if len(labels) > 1:
        raise ValidationError(f"{path} mixes several series {sorted(labels)}; pass --scenario/--notion")

    def num(text):
        return float(text) if text not in (None, "") else None

    records = [
        (int(r["m"]), float(r["delta"]), num(r.get("ci_lo")), num(r.get("ci_hi")), r.get("engine") or "exact")
        for r in rows
    ]
    return RateSeries.from_records(records)


def cmd_fit(args):
    series = read_series_csv(args.series, args.scenario, args.notion)
    config = ClassifyConfig(
        rss_ratio=args.rss_ratio, alpha_min=args.alpha_min, alpha_max=args.alpha_max,
        min_span=args.min_span, min_points=args.min_points, weighted=args.weighted,
    )
    report = classify(series, config).to_dict()
    report["points"] = len(series)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


BOUND_NAMES = {
    "thm25_training_rate": lambda m, **kw: _bounds.thm25_training_rate(m),
    "thm25_weak_rate": lambda m, p: _bounds.thm25_weak_rate(p, m),
    "tie_gap_probability": lambda m, p: _bounds.tie_gap_probability(p, m),
    "tie_gap_upper_bound": lambda m, p, tail="cdf": _bounds.tie_gap_upper_bound(p, m, tail),
    "tie_gap_lower_bound": lambda m, **kw: _bounds.tie_gap_lower_bound(m),
    "erm_in_hstar_lower_bound": lambda m, h_size, eps: _bounds.erm_in_hstar_lower_bound(int(h_size), eps, m).value,
    "central_window_prob": lambda m, **kw: _bounds.central_window_prob(m),
    "odd_central_binom_prob": lambda m, **kw: _bounds.odd_central_binom_prob(m),
    "pair_mismatch_prob": lambda m, p: _bounds.pair_mismatch_prob(as_fraction(p)),
}


def cmd_bounds(args):
    try:
        fn = BOUND_NAMES[args.name]
    except KeyError:
        raise ValidationError(f"unknown bound {args.name!r}; choose from {', '.join(BOUND_NAMES)}") from None
    params = _parse_params(args.param)
    grid = check_grid(_parse_grid(args.m_grid))
    label = args.name + ("(" + ",".join(f"{k}={v}" for k, v in params.items()) + ")" if params else "")
    rows = []
    for m in grid:
        try:
            value = fn(m, **params)
        except TypeError as exc:
            raise ValidationError(f"bad parameters for {args.name}: {exc}") from None
        rows.append({
            "scenario": label, "notion": "bound", "beta": "", "m": m, "delta": fmt_float(value),
            "ci_lo": "", "ci_hi": "", "engine": "bound", "trials": 0, "seed": "", "i_policy": "",
        })
    buf = io.StringIO()
    write_csv(rows, buf)
    if args.csv:
        Path(args.csv).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_verify(args):
    extra = [load_scenario(Path(p)) for p in args.scenario_file or ()]
    results = run_checks(cap=args.cap, fault=args.inject_fault, extra=extra)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.status:4}  {r.name:<{width}}  {r.detail}")
    failed = sum(r.status == FAIL for r in results)
    print(f"{len(results) - failed}/{len(results)} checks did not fail")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ermstab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="compute an instability series")
    run.add_argument("--config", help="JSON experiment config or a run manifest")
    run.add_argument("--scenario", help="built-in scenario name")
    run.add_argument("--param", action="append", help="scenario parameter key=value (repeatable)")
    run.add_argument("--scenario-file", help="JSON scenario document")
    run.add_argument("--notion", choices=[n.value for n in StabilityNotion])
    run.add_argument("--beta")
    run.add_argument("--m-grid", help="comma-separated increasing sample sizes")
    run.add_argument("--engine", choices=["exact", "mc", "auto"])
    run.add_argument("--mode", choices=["rational", "float"])
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int, help="default: $ERMSTAB_WORKERS or 1")
    run.add_argument("--i-policy", choices=["fixed", "uniform"])
    run.add_argument("--cap", type=int)
    run.add_argument("--csv", help="series CSV path (default: stdout)")
    run.add_argument("--manifest", help="run manifest JSON path")
    run.set_defaults(func=cmd_run)

    fit = sub.add_parser("fit", help="classify the decay of a series CSV")
    fit.add_argument("series")
    fit.add_argument("--scenario")
    fit.add_argument("--notion")
    fit.add_argument("--out")
    defaults = ClassifyConfig()
    fit.add_argument("--rss-ratio", type=float, default=defaults.rss_ratio)
    fit.add_argument("--alpha-min", type=float, default=defaults.alpha_min)
    fit.add_argument("--alpha-max", type=float, default=defaults.alpha_max)
    fit.add_argument("--min-span", type=float, default=defaults.min_span)
    fit.add_argument("--min-points", type=int, default=defaults.min_points)
    fit.add_argument("--weighted", action="store_true")
    fit.set_defaults(func=cmd_fit)

    bnd = sub.add_parser("bounds", help="tabulate a closed-form bound over an m grid")
    bnd.add_argument("name", help=", ".join(BOUND_NAMES))
    bnd.add_argument("--param", action="append", help="key=value (repeatable)")
    bnd.add_argument("--m-grid", required=True)
    bnd.add_argument("--csv")
    bnd.set_defaults(func=cmd_bounds)

    ver = sub.add_parser("verify", help="run the desk-scale self-check")
    ver.add_argument("--cap", type=int, default=DEFAULT_CAP)
    ver.add_argument("--inject-fault", choices=["tie-break"])
    ver.add_argument("--scenario-file", action="append")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ErmStabError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
