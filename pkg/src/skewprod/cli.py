"""Command-line scenario runner: ``skewprod run <file|name>`` and ``skewprod validate <file>``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import __version__
from .classifier import ClassificationReport, classify_level, classify_system, fixed_point_check
from .coboundary import DetectorRefused, _jsonable
from .conjugacy import are_cohomologous
from .crossed import CPElement, cesaro_average, gns_norm
from .scenario import Scenario, SchemaError, bundled_names, parse_scenario, read_source
from .states import (
    check_invariance,
    double_window,
    expectation_onto_fixed_points,
    state_from_report,
)
from .torus import BandOverflow, ResolutionError, RuleExhausted, UnitaryFn

EXIT_OK, EXIT_SCHEMA, EXIT_BUDGET = 0, 2, 3
BUDGET_ERRORS = (BandOverflow, DetectorRefused, ResolutionError, RuleExhausted)


class TaskFailed(RuntimeError):
    def __init__(self, task: str, exc: Exception):
        super().__init__(f"task {task!r}: {type(exc).__name__}: {exc}")
        self.task = task


class Runner:
    def __init__(self, sc: Scenario, seed: int = 0, threads: int = 1):
        self.sc = sc
        self.seed = seed
        self.threads = threads
        self.report: ClassificationReport | None = None
        self.tables: dict[str, list[list]] = {}
        self.timings: dict[str, float] = {}

    def classification(self) -> ClassificationReport:
        if self.report is None:
            sc = self.sc
            self.report = classify_system(sc.spec, sc.n_max, sc.cfg, depth=sc.depth, threads=self.threads)
        return self.report

    # -- tasks --------------------------------------------------------------
    def task_classify(self) -> dict:
        rep = self.classification()
        out = rep.to_json()
        out["validation"] = rep.validate()
        gen = rep.fixed_point_generator
        if gen is not None and isinstance(gen[0], UnitaryFn):
            out["fixed_point_residual"] = fixed_point_check(
                self.sc.spec, rep, samples=self.sc.checks["powers"], box=self.sc.checks["box"]
            )
        self.tables["levels"] = [
            [n, v.tag, v.certificate_name or "", v.heuristic] for n, v in ((n, rep.verdicts[n]) for n in rep.levels())
        ]
        return out

    def task_coboundary(self) -> dict:
        sc = self.sc
        return classify_level(sc.spec, 1, sc.cfg, depth=sc.depth).to_json()

    def task_average(self) -> dict:
        sc = self.sc
        series = []
        last = None
        for w in sc.windows:
            avg = cesaro_average(sc.spec, sc.element, w)
            series.append({"window": w, "gns_norm": gns_norm(avg)})
            last = (w, avg)
        w, avg = last
        out = {
            "element": sc.element.to_json(),
            "series": series,
            "stability": {"window": w, "gap": gns_norm(double_window(sc.spec, avg, w) - avg)},
        }
        if "classify" in sc.tasks:
            fx = expectation_onto_fixed_points(sc.spec, self.classification(), sc.element, w)
            out["fixed_point_expectation"] = {
                "window": w,
                "limit_estimate": fx.limit.to_json(),
                "limit_vs_average": fx.limit_shift,
                "proportionality_residual": fx.proportionality,
            }
        self.tables["cesaro"] = [[r["window"], r["gns_norm"]] for r in series]
        return out

    def task_states(self) -> dict:
        sc = self.sc
        rep = self.classification()
        if not rep.n0:
            note = (
                "uniquely ergodic: the canonical state is the only invariant state"
                if rep.uniquely_ergodic.value == "true"
                else "no coboundary level in the scan; only the canonical state is built"
            )
            return {"n0": 0, "note": note}
        rows = []
        for mu in sc.measures:
            st = state_from_report(rep, mu, sc.alpha)
            inv = check_invariance(st, sc.spec, sc.checks["box"], sc.checks["samples"], seed=self.seed)
            probes = []
            for k in range(-2, 3):
                wk = st.witnesses(k)
                x = CPElement.monomial(wk, k * rep.n0, sc.alpha)
                probes.append({"k": k, "value": st(x)})
            rows.append(
                {
                    "measure": mu.to_json(),
                    "invariance_residual": inv,
                    "positivity_gap": st.positivity_gap(sc.alpha, seed=self.seed),
                    "witness_probes": probes,
                }
            )
        return {"n0": rep.n0, "states": rows}

    def task_conjugacy(self) -> dict:
        return are_cohomologous(self.sc.spec, self.sc.other, self.sc.cfg).to_json()

    def run(self) -> dict:
        outputs = {}
        for task in self.sc.tasks:
            t0 = time.perf_counter()
            try:
                result = getattr(self, f"task_{task}")()
            except BUDGET_ERRORS as exc:
                raise TaskFailed(task, exc) from exc
            self.timings[task] = time.perf_counter() - t0
            result["provenance"] = {"task": task, "config": _provenance(task)}
            outputs[task] = result
        return {
            "toolkit": {"name": "skewprod", "version": __version__},
            "seed": self.seed,
            "scenario": self.sc.raw,
            "tasks": outputs,
        }


def _provenance(task: str) -> list[str]:
    base = ["rotation", "alpha", "cocycle"]
    return base + {
        "classify": ["solver", "scan", "checks"],
        "coboundary": ["solver"],
        "average": ["windows", "average"],
        "states": ["solver", "scan", "measures", "checks"],
        "conjugacy": ["solver", "conjugacy"],
    }[task]


def write_outputs(out_dir: Path, report: dict, tables: dict, timings: dict) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    path = out_dir / "report.json"
    path.write_text(json.dumps(_jsonable(report), indent=2) + "\n")
    written.append(path)
    headers = {"levels": ["level", "verdict", "certificate", "heuristic"], "cesaro": ["window", "gns_norm"]}
    for name, rows in tables.items():
        path = out_dir / f"{name}.csv"
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(headers[name])
            wr.writerows(rows)
        written.append(path)
    path = out_dir / "timings.json"
    path.write_text(json.dumps(timings, indent=2) + "\n")
    written.append(path)
    return written


def _load(ref: str) -> Scenario:
    text, _ = read_source(ref)
    return parse_scenario(text)


def cmd_run(args) -> int:
    try:
        sc = _load(args.scenario)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SchemaError as exc:
        for d in exc.diagnostics:
            print(f"schema error: {d}", file=sys.stderr)
        return EXIT_SCHEMA
    runner = Runner(sc, seed=args.seed, threads=args.threads)
    t0 = time.perf_counter()
    try:
        report = runner.run()
    except TaskFailed as exc:
        print(f"numeric budget exceeded in {exc}", file=sys.stderr)
        return EXIT_BUDGET
    timings = {"tasks": runner.timings, "total": time.perf_counter() - t0, "threads": args.threads}
    out_dir = Path(args.out) if args.out else Path("out") / sc.name
    for p in write_outputs(out_dir, report, runner.tables, timings):
        print(p)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        text, _ = read_source(args.scenario)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        parse_scenario(text)
    except SchemaError as exc:
        for d in exc.diagnostics:
            print(d)
        return EXIT_SCHEMA
    print("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skewprod", description="Skew-product cocycle scenarios.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file or a bundled scenario")
    r.add_argument("scenario", help="path to a YAML file, or one of: " + ", ".join(bundled_names()))
    r.add_argument("--out", help="output directory (default out/<name>)")
    r.add_argument("--threads", type=int, default=1, help="worker threads for level scans")
    r.add_argument("--seed", type=int, default=0, help="seed for sampled verifications")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario against the schema without computing")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_SCHEMA
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
