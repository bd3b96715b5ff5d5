"""Command-line driver.

    reqtest validate  --ontology O1 [--ontology O2 --links L2] --rsl R
    reqtest refine    --ontology O1 --ontology O2 --links L2 --out DIR
    reqtest gen       --ontology ... --rsl R --out DIR [--max-depth N] [--max-repeat N]
    reqtest simulate  --ontology ... --scenario S [--scenario S2] [--params P] [--variant both] --out DIR
    reqtest exec      --tests DIR --traces DIR --out DIR
    reqtest report    --out DIR

Exit status: 0 success, 1 violations or failing verdicts, 2 I/O, parse or
per-cell execution errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from reqtest import __version__
from reqtest.executor import FormatError, SuiteReport, export_csv, import_csv, load_trace_csv, run_suite, save_trace_csv
from reqtest.expr import ExprSyntaxError
from reqtest.ontology import (
    Ontology,
    OntologyError,
    check_traceability,
    load_links,
    load_ontology,
    refine,
    save_ontology,
    validate,
)
from reqtest.rsl import RequirementError, parse_rsl, requirement_atoms, validate_requirement
from reqtest.testgen import DEFAULT_MAX_DEPTH, DEFAULT_MAX_REPEAT, build_tree, generate, test_cases_to_json
from reqtest.wps_sim import MODEL, PLANT, PlantParams, ParamError, ScenarioError, BindingError, default_binding, load_params, load_scenario, run_scenario

OK, SEMANTIC, OPERATIONAL = 0, 1, 2
GENERATED_BY = f"reqtest {__version__}"


class UsageError(Exception):
    """Operational failure: bad path, unparseable input, inconsistent flags."""


@dataclass
class RunConfig:
    ontologies: list[Path]
    links: list[Path]
    rsl: Optional[Path]
    out: Optional[Path]
    stage: Optional[int]
    max_depth: int
    max_repeat: int
    params: Optional[Path]
    scenarios: list[Path]
    variant: str
    tests: Optional[Path]
    traces: Optional[Path]

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        return cls(
            ontologies=[Path(p) for p in getattr(ns, "ontology", None) or []],
            links=[Path(p) for p in getattr(ns, "links", None) or []],
            rsl=Path(ns.rsl) if getattr(ns, "rsl", None) else None,
            out=Path(ns.out) if getattr(ns, "out", None) else None,
            stage=getattr(ns, "stage", None),
            max_depth=getattr(ns, "max_depth", DEFAULT_MAX_DEPTH),
            max_repeat=getattr(ns, "max_repeat", DEFAULT_MAX_REPEAT),
            params=Path(ns.params) if getattr(ns, "params", None) else None,
            scenarios=[Path(p) for p in getattr(ns, "scenario", None) or []],
            variant=getattr(ns, "variant", "both"),
            tests=Path(ns.tests) if getattr(ns, "tests", None) else None,
            traces=Path(ns.traces) if getattr(ns, "traces", None) else None,
        )


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None


def _require(value, flag: str):
    if value is None or value == []:
        raise UsageError(f"missing required option {flag}")
    return value


def _write_all(outputs: list[tuple[Path, str]]) -> None:
    for path, text in outputs:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            raise UsageError(f"{path}: {exc.strerror or exc}") from None


def _load_stages(cfg: RunConfig) -> list[tuple[Path, Ontology]]:
    paths = _require(cfg.ontologies, "--ontology")
    out = []
    for p in paths:
        try:
            out.append((p, load_ontology(_read(p))))
        except OntologyError as exc:
            raise UsageError(f"{p}: {exc}") from None
    return out


def _merged(cfg: RunConfig, stages: list[tuple[Path, Ontology]]) -> Ontology:
    n = len(stages) if cfg.stage is None else cfg.stage
    if not 1 <= n <= len(stages):
        raise UsageError(f"--stage {n} but {len(stages)} ontology file(s) were given")
    if len(cfg.links) > len(stages) - 1:
        raise UsageError("more --links files than refinement steps")
    merged = stages[0][1]
    for i in range(1, n):
        links = []
        if i - 1 < len(cfg.links):
            lp = cfg.links[i - 1]
            try:
                links = load_links(_read(lp))
            except (OntologyError, json.JSONDecodeError) as exc:
                raise UsageError(f"{lp}: {exc}") from None
        try:
            merged = refine(merged, stages[i][1], links)
        except OntologyError as exc:
            raise UsageError(f"{stages[i][0]}: {exc}") from None
    return merged


def _parse_requirements(cfg: RunConfig, o: Ontology, check: bool):
    path = _require(cfg.rsl, "--rsl")
    text = _read(path)
    try:
        return parse_rsl(text, o, check=check)
    except ExprSyntaxError as exc:
        raise UsageError(f"{path}:{exc.line}:{exc.column}: {exc.message}") from None


def _validation_report(cfg: RunConfig) -> tuple[list[str], list[str], Ontology, list]:
    """Return (violation lines, warning lines, merged ontology, requirements)."""
    stages = _load_stages(cfg)
    problems: list[str] = []
    for path, o in stages:
        problems.extend(f"{path}: {v}" for v in validate(o))
    if problems:
        return problems, [], stages[0][1], []
    merged = _merged(cfg, stages)
    try:
        reqs = _parse_requirements(cfg, merged, check=False)
    except RequirementError as exc:
        return [f"{cfg.rsl}: {exc}"], [], merged, []
    warnings: list[str] = []
    for r in reqs:
        where = f"{cfg.rsl}:{r.line}" if r.line else str(cfg.rsl)
        found = validate_requirement(r, merged)
        problems.extend(f"{where}: {r.id}: {v}" for v in found)
        if not found:
            for name in check_traceability(requirement_atoms(r), merged):
                warnings.append(f"{where}: {r.id}: concept {name!r} has no refinement link at stage {merged.stage_version}")
    return problems, warnings, merged, reqs


def cmd_validate(cfg: RunConfig) -> int:
    problems, warnings, _, reqs = _validation_report(cfg)
    for line in problems:
        print(line)
    for line in warnings:
        print(f"warning: {line}")
    if problems:
        print(f"{len(problems)} violation(s)")
        return SEMANTIC
    print(f"ok: {len(reqs)} requirement(s) valid")
    return OK


def cmd_refine(cfg: RunConfig) -> int:
    out = _require(cfg.out, "--out")
    stages = _load_stages(cfg)
    if len(stages) < 2:
        raise UsageError("refine needs at least two --ontology files")
    merged = _merged(cfg, stages)
    target = out / f"stage{merged.stage_version}.onto.json"
    _write_all([(target, save_ontology(merged))])
    print(f"wrote {target} ({len(merged.vertices)} vertices, {len(merged.arcs)} arcs)")
    return OK


def cmd_gen(cfg: RunConfig) -> int:
    out = _require(cfg.out, "--out")
    problems, _, _, reqs = _validation_report(cfg)
    if problems:
        for line in problems:
            print(line)
        return SEMANTIC
    outputs = []
    for r in reqs:
        tree = build_tree(r, cfg.max_depth, cfg.max_repeat)
        tcs = generate(r, cfg.max_depth, cfg.max_repeat)
        print(f"{r.id}: {len(tcs)} test case(s), {len(tree.leaves())} leaf/leaves")
        if not tcs:
            print(f"warning: {r.id} has no entry-to-release path within max depth {cfg.max_depth}")
        outputs.append((out / f"{r.id}.tc.json", test_cases_to_json(tcs, r.id)))
        outputs.append((out / f"{r.id}.csv", export_csv(tcs)))
    _write_all(outputs)
    return OK


def cmd_simulate(cfg: RunConfig) -> int:
    out = _require(cfg.out, "--out")
    scenarios = _require(cfg.scenarios, "--scenario")
    o = _merged(cfg, _load_stages(cfg))
    try:
        params = load_params(_read(cfg.params)) if cfg.params else PlantParams()
        binding = default_binding(o)
    except (ParamError, BindingError, json.JSONDecodeError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    variants = [MODEL, PLANT] if cfg.variant == "both" else [cfg.variant]
    outputs = []
    for sp in scenarios:
        try:
            script = load_scenario(_read(sp))
        except (ScenarioError, json.JSONDecodeError, ValueError) as exc:
            raise UsageError(f"{sp}: {exc}") from None
        stem = sp.name[: -len(".json")] if sp.name.endswith(".json") else sp.stem
        for v in variants:
            trace = run_scenario(params, script, binding, v)
            target = out / f"{stem}.{v}.trace.csv"
            outputs.append((target, save_trace_csv(trace)))
            print(f"{target}: {len(trace)} samples")
    _write_all(outputs)
    return OK


def _exit_for(report: SuiteReport) -> int:
    counts = report.counts
    if counts["error"]:
        return OPERATIONAL
    if counts["fail"]:
        return SEMANTIC
    return OK


def cmd_exec(cfg: RunConfig) -> int:
    out = _require(cfg.out, "--out")
    tests_dir = _require(cfg.tests, "--tests")
    traces_dir = _require(cfg.traces, "--traces")
    for d in (tests_dir, traces_dir):
        if not d.is_dir():
            raise UsageError(f"{d}: not a directory")

    tcs = []
    for p in sorted(tests_dir.glob("*.csv")):
        if p.name.endswith(".trace.csv"):
            continue
        try:
            tcs.extend(import_csv(_read(p)))
        except FormatError as exc:
            raise UsageError(f"{p}: {exc}") from None
    traces = {}
    for p in sorted(traces_dir.glob("*.trace.csv")):
        try:
            traces[p.name[: -len(".trace.csv")]] = load_trace_csv(_read(p))
        except (FormatError, ValueError) as exc:
            raise UsageError(f"{p}: {exc}") from None

    report = run_suite(tcs, traces)
    text = report.to_text(GENERATED_BY)
    _write_all([(out / "report.txt", text), (out / "report.json", report.to_json(GENERATED_BY))])
    sys.stdout.write(text)
    return _exit_for(report)


def cmd_report(cfg: RunConfig) -> int:
    out = _require(cfg.out, "--out")
    path = out / "report.json"
    try:
        report = SuiteReport.from_dict(json.loads(_read(path)))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    sys.stdout.write(report.to_text())
    return _exit_for(report)


COMMANDS = {
    "validate": cmd_validate,
    "refine": cmd_refine,
    "gen": cmd_gen,
    "simulate": cmd_simulate,
    "exec": cmd_exec,
    "report": cmd_report,
}


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reqtest", description="Requirements-driven test generation and execution.")
    parser.add_argument("--version", action="version", version=GENERATED_BY)
    sub = parser.add_subparsers(dest="command", required=True)

    def ontology_opts(p: argparse.ArgumentParser) -> None:
        p.add_argument("--ontology", action="append", metavar="PATH", help="ontology file; repeat in stage order")
        p.add_argument("--links", action="append", metavar="PATH", help="refinement links for the next stage; repeatable")
        p.add_argument("--stage", type=_positive, help="merge ontologies up to this stage (default: all)")

    p = sub.add_parser("validate", help="check ontologies and requirements")
    ontology_opts(p)
    p.add_argument("--rsl", metavar="PATH")

    p = sub.add_parser("refine", help="merge staged ontologies into one document")
    ontology_opts(p)
    p.add_argument("--out", metavar="DIR")

    p = sub.add_parser("gen", help="generate test cases")
    ontology_opts(p)
    p.add_argument("--rsl", metavar="PATH")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--max-depth", type=_positive, default=DEFAULT_MAX_DEPTH)
    p.add_argument("--max-repeat", type=_positive, default=DEFAULT_MAX_REPEAT)

    p = sub.add_parser("simulate", help="run scenarios on the tank simulator")
    ontology_opts(p)
    p.add_argument("--params", metavar="PATH")
    p.add_argument("--scenario", action="append", metavar="PATH")
    p.add_argument("--variant", choices=[MODEL, PLANT, "both"], default="both")
    p.add_argument("--out", metavar="DIR")

    p = sub.add_parser("exec", help="execute test cases over traces")
    p.add_argument("--tests", metavar="DIR", help="directory of test-case CSV files")
    p.add_argument("--traces", metavar="DIR", help="directory of *.trace.csv files")
    p.add_argument("--out", metavar="DIR")

    p = sub.add_parser("report", help="print the report stored in a results directory")
    p.add_argument("--out", metavar="DIR")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig.from_args(ns)
    try:
        return COMMANDS[ns.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
