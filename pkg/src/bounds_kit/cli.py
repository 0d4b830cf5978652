"""Command-line interface.

Three subcommands:

* ``estimate``: compute regions for one or more assumption regimes from
  survey files and emit a report table (TSV or JSON).
* ``simulate``: generate a synthetic population, draw a sample in the
  survey file schema, write a ground-truth sidecar, and optionally run a
  coverage check.
* ``report``: flatten one or more estimate outputs into a long-format
  table for external plotting.

Exit codes: 0 success, 2 data-validation failure, 3 estimation undefined
on the data, 4 configuration error.  Errors are emitted to stderr as a
single JSON record; warnings stream to stderr as they occur.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from .errors import BoundsKitError, ConfigError, DataValidationError, EstimationUndefinedError
from .estimator import MeanBoundsEstimator
from .io import load_dataset, write_dataset
from .regions import (
    AssumptionSet,
    QUANTILE_REGIMES,
    Regime,
    parse_regime,
)
from .simulate import (
    MechanismConfig,
    MechanismKind,
    PopulationShape,
    SampleDesign,
    census_truth,
    draw_sample,
    generate_population,
    verify_coverage,
)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_ESTIMATION = 3
EXIT_CONFIG = 4

SCORE_COLUMNS = {"lower", "upper", "point", "width", "mu", "q_lo", "q_hi", "value"}
RATE_DECIMALS = 4
SCORE_DECIMALS = 2


@dataclass
class RunConfig:
    """Parsed invocation; one instance per command run."""

    command: str
    students: str | None = None
    schools: str | None = None
    strata: str | None = None
    regimes: list[AssumptionSet] = field(default_factory=list)
    use_replacements: bool = False
    out: str | None = None
    fmt: str = "tsv"
    seed: int = 0


@dataclass
class ReportRow:
    scenario: str
    stratum: str
    lower: float
    upper: float
    point: float | None
    width: float
    p1: float | None
    p2: float | None
    p: float | None
    mu: float | None
    q_lo: float | None
    q_hi: float | None
    share: float | None

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "stratum": self.stratum,
            "lower": self.lower,
            "upper": self.upper,
            "point": self.point,
            "width": self.width,
            "p1": self.p1,
            "p2": self.p2,
            "p": self.p,
            "mu": self.mu,
            "q_lo": self.q_lo,
            "q_hi": self.q_hi,
            "share": self.share,
        }


REPORT_COLUMNS = tuple(ReportRow.__dataclass_fields__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise ConfigError(message)


def parse_regime_spec(spec: str, support_min=None, support_max=None) -> AssumptionSet:
    """Parse a ``REGIME[:ALPHA]`` token into an assumption set."""
    name, sep, alpha_part = spec.partition(":")
    try:
        regime = parse_regime(name)
    except EstimationUndefinedError as exc:
        raise ConfigError(str(exc)) from None
    alpha = None
    if sep:
        try:
            alpha = float(alpha_part)
        except ValueError:
            raise ConfigError(f"cannot parse alpha in regime spec {spec!r}") from None
    if regime in QUANTILE_REGIMES and alpha is None:
        raise ConfigError(
            f"regime {regime.value} needs an alpha, e.g. {regime.value}:0.05")
    if regime not in QUANTILE_REGIMES and alpha is not None:
        raise ConfigError(f"regime {regime.value} does not take an alpha")
    if regime is Regime.WORST_CASE and (support_min is None or support_max is None):
        raise ConfigError("WORST_CASE requires --support-min and --support-max")
    try:
        return AssumptionSet(
            regime=regime,
            alpha=alpha,
            support_min=support_min if regime is Regime.WORST_CASE else None,
            support_max=support_max if regime is Regime.WORST_CASE else None,
        )
    except EstimationUndefinedError as exc:
        raise ConfigError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bounds-kit", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate regions from survey files")
    est.add_argument("--students", required=True, help="students CSV path")
    est.add_argument("--schools", required=True, help="schools CSV path")
    est.add_argument("--strata", required=True, help="strata CSV path")
    est.add_argument("--regime", action="append", required=True, metavar="REGIME[:ALPHA]",
                     help="assumption regime, repeatable (e.g. A1:0.05, A2_A3, WORST_CASE)")
    est.add_argument("--use-replacements", action="store_true",
                     help="treat A2_A3 as A2_A3_REPLACEMENT")
    est.add_argument("--support-min", type=float, default=None)
    est.add_argument("--support-max", type=float, default=None)
    est.add_argument("--format", choices=("tsv", "json"), default="tsv")
    est.add_argument("--out", default=None, help="output path (stdout when omitted)")

    sim = sub.add_parser("simulate", help="generate a synthetic dataset plus truth sidecar")
    sim.add_argument("--mechanism", default="IGNORABLE_WITHIN_CELLS",
                     choices=[k.value for k in MechanismKind])
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--n-strata", type=int, default=2)
    sim.add_argument("--schools-per-stratum", type=int, default=20)
    sim.add_argument("--students-per-school", type=int, default=30)
    sim.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                     help="mechanism parameter override, repeatable")
    sim.add_argument("--sample-schools", type=int, default=None,
                     help="schools drawn per stratum (default: census)")
    sim.add_argument("--sample-students", type=int, default=None,
                     help="students drawn per participating school (default: census)")
    sim.add_argument("--coverage-regime", default=None, metavar="REGIME[:ALPHA]",
                     help="also run a coverage check under this regime")
    sim.add_argument("--replicates", type=int, default=0,
                     help="sampled replicates for the coverage check")
    sim.add_argument("--support-min", type=float, default=None)
    sim.add_argument("--support-max", type=float, default=None)
    sim.add_argument("--out", required=True, help="output directory")

    rep = sub.add_parser("report", help="flatten estimate outputs for plotting")
    rep.add_argument("inputs", nargs="+", help="estimate JSON files")
    rep.add_argument("--format", choices=("tsv", "json"), default="tsv")
    rep.add_argument("--out", default=None, help="output path (stdout when omitted)")

    return parser


def _region_rows(label: str, region) -> list[ReportRow]:
    ing = region.ingredients
    rows = [ReportRow(
        scenario=label,
        stratum="",
        lower=region.lower,
        upper=region.upper,
        point=region.lower if region.is_point else None,
        width=region.width,
        p1=ing.p1, p2=ing.p2, p=ing.p,
        mu=ing.mu, q_lo=ing.q_lo, q_hi=ing.q_hi,
        share=None,
    )]
    for comp in region.per_stratum or ():
        rows.append(ReportRow(
            scenario=label,
            stratum=comp.stratum_id,
            lower=comp.lower,
            upper=comp.upper,
            point=comp.lower if comp.lower == comp.upper else None,
            width=comp.upper - comp.lower,
            p1=comp.ingredients.p1, p2=comp.ingredients.p2, p=comp.ingredients.p,
            mu=comp.ingredients.mu, q_lo=comp.ingredients.q_lo, q_hi=comp.ingredients.q_hi,
            share=comp.share,
        ))
    return rows


def _format_cell(column: str, value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        decimals = SCORE_DECIMALS if column in SCORE_COLUMNS else RATE_DECIMALS
        return f"{value:.{decimals}f}"
    return str(value)


def _emit_table(rows: list[dict], columns, fmt: str, out: str | None, command: str) -> None:
    if fmt == "json":
        text = json.dumps({"command": command, "rows": rows}, indent=2)
    else:
        lines = ["\t".join(columns)]
        lines.extend(
            "\t".join(_format_cell(c, row[c]) for c in columns) for row in rows
        )
        text = "\n".join(lines)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_estimate(config: RunConfig) -> int:
    dataset = load_dataset(config.students, config.schools, config.strata)
    rows: list[ReportRow] = []
    for assumptions in config.regimes:
        regime = assumptions.regime
        if config.use_replacements and regime is Regime.A2_A3:
            assumptions = AssumptionSet(regime=Regime.A2_A3_REPLACEMENT)
        est = MeanBoundsEstimator(
            regime=assumptions.regime,
            alpha=assumptions.alpha if assumptions.alpha is not None else 0.05,
            support_min=assumptions.support_min,
            support_max=assumptions.support_max,
        ).fit(dataset)
        rows.extend(_region_rows(assumptions.label(), est.region_))
    rows.sort(key=lambda r: (r.scenario, r.stratum))
    _emit_table([r.as_dict() for r in rows], REPORT_COLUMNS, config.fmt, config.out, "estimate")
    return EXIT_OK


def _parse_params(pairs: list[str]) -> dict:
    params = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--param expects NAME=VALUE, got {pair!r}")
        try:
            params[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--param {name.strip()!r}: cannot parse {value!r} as float") from None
    return params


def cmd_simulate(args) -> int:
    config = MechanismConfig(
        kind=MechanismKind(args.mechanism),
        parameters=_parse_params(args.param),
        seed=args.seed,
    )
    shape = PopulationShape(
        strata=args.n_strata,
        schools_per_stratum=args.schools_per_stratum,
        students_per_school=args.students_per_school,
    )
    pop = generate_population(config, shape)
    design = SampleDesign(args.sample_schools, args.sample_students)
    dataset = draw_sample(pop, design, seed=args.seed + 1)

    os.makedirs(args.out, exist_ok=True)
    write_dataset(
        dataset,
        os.path.join(args.out, "students.csv"),
        os.path.join(args.out, "schools.csv"),
        os.path.join(args.out, "strata.csv"),
    )
    truth = census_truth(pop)
    sidecar = {
        "mechanism": {"kind": config.kind.value, "parameters": config.parameters,
                      "seed": config.seed},
        "shape": {"strata": shape.strata,
                  "schools_per_stratum": shape.schools_per_stratum,
                  "students_per_school": shape.students_per_school},
        "design": {"schools_per_stratum": design.schools_per_stratum,
                   "students_per_school": design.students_per_school},
        "truth": truth.to_dict(),
    }
    with open(os.path.join(args.out, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if args.coverage_regime:
        assumptions = parse_regime_spec(
            args.coverage_regime, args.support_min, args.support_max)
        report = verify_coverage(
            pop, assumptions, replicates=args.replicates, design=design,
            base_seed=args.seed + 1)
        payload = {
            "regime": assumptions.label(),
            "truth_mean": report.truth_mean,
            "census_contained": report.census_contained,
            "census_lower": report.census_lower,
            "census_upper": report.census_upper,
            "replicates": report.replicates,
            "coverage": report.coverage,
        }
        with open(os.path.join(args.out, "coverage.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        sys.stderr.write(
            f"coverage[{assumptions.label()}]: census_contained={report.census_contained} "
            f"coverage={report.coverage}\n")
    return EXIT_OK


def cmd_report(args) -> int:
    long_rows: list[dict] = []
    for path in args.inputs:
        if not os.path.exists(path):
            raise DataValidationError(f"{path}: file not found")
        with open(path, encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(payload, dict) or payload.get("command") != "estimate" \
                or "rows" not in payload:
            raise DataValidationError(
                f"{path}: schema mismatch, expected an estimate JSON output")
        source = os.path.splitext(os.path.basename(path))[0]
        for row in payload["rows"]:
            for endpoint in ("lower", "upper"):
                long_rows.append({
                    "source": source,
                    "scenario": row["scenario"],
                    "stratum": row["stratum"],
                    "endpoint": endpoint,
                    "value": row[endpoint],
                })
    long_rows.sort(key=lambda r: (r["source"], r["scenario"], r["stratum"], r["endpoint"]))
    _emit_table(long_rows, ("source", "scenario", "stratum", "endpoint", "value"),
                args.format, args.out, "report")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "estimate":
            regimes = [
                parse_regime_spec(spec, args.support_min, args.support_max)
                for spec in args.regime
            ]
            config = RunConfig(
                command="estimate",
                students=args.students,
                schools=args.schools,
                strata=args.strata,
                regimes=regimes,
                use_replacements=args.use_replacements,
                out=args.out,
                fmt=args.format,
            )
            return cmd_estimate(config)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "report":
            return cmd_report(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    except DataValidationError as exc:
        _emit_error(exc)
        return EXIT_DATA
    except EstimationUndefinedError as exc:
        _emit_error(exc)
        return EXIT_ESTIMATION
    except BoundsKitError as exc:  # pragma: no cover - safety net
        _emit_error(exc)
        return EXIT_CONFIG


def _emit_error(exc: BoundsKitError) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(record) + "\n")


if __name__ == "__main__":
    sys.exit(main())
