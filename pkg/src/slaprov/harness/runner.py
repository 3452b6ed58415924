"""Sweep execution, CSV rows, series files and wait PDFs."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import metrics
from ..engine import JsonlTrace, run
from ..policies import make_policy
from .config import ExperimentConfig

log = logging.getLogger(__name__)

RUNS_CSV = "runs.csv"
FAILURES = "failures.jsonl"
MANIFEST = "manifest.json"


def csv_columns(m: int) -> list[str]:
    cols = ["policy", "sweep_var", "sweep_value", "seed", "revenue_per_sec", "ci_half_width"]
    for stem in ("accepted", "rejected", "violated", "sla_met_frac"):
        cols += [f"{stem}_{i}" for i in range(1, m + 1)]
    return cols


def run_seed(base_seed: int, cell: int, rep: int) -> int:
    """base_seed XOR a stable hash of (cell, replication)."""
    h = hashlib.blake2b(f"{cell}:{rep}".encode(), digest_size=8).digest()
    return (base_seed ^ int.from_bytes(h, "little")) & (2**63 - 1)


@dataclass(frozen=True)
class Task:
    cell: int
    value: float
    policy_index: int
    rep: int
    seed: int

    @property
    def label(self) -> str:
        return f"cell{self.cell}-p{self.policy_index}-r{self.rep}"


@dataclass
class RunRecord:
    task: Task
    row: dict
    waits: list = field(default_factory=list)
    wall_seconds: float = 0.0
    in_flight: int = 0


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures

    def rows(self) -> list[dict]:
        return [r.row for r in self.records]

    def revenues(self, policy: str, value: float) -> list[float]:
        return [r.row["revenue_per_sec"] for r in self.records
                if r.row["policy"] == policy and r.task.value == value]

    def select(self, policy: str, value: float) -> list[RunRecord]:
        return [r for r in self.records if r.row["policy"] == policy and r.task.value == value]


def _fmt(v: float) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else repr(v)


def tasks(cfg: ExperimentConfig) -> list[Task]:
    out = []
    for cell, value in cfg.cells():
        for p in range(len(cfg.policies)):
            for r in range(cfg.replications):
                out.append(Task(cell, value, p, r, run_seed(cfg.base_seed, cell, r)))
    return out


def execute(cfg: ExperimentConfig, task: Task, trace_dir: str | None = None) -> RunRecord:
    """One simulation run.  Safe to call in a worker process."""
    spec = cfg.policies[task.policy_index]
    sim = cfg.sim_config(task.value)
    policy = make_policy(spec.name, **spec.params)
    stream = None
    try:
        trace = None
        if trace_dir is not None:
            stream = open(Path(trace_dir) / f"{spec.name}-{task.label}.jsonl", "w")
            trace = JsonlTrace(stream, cell=f"{spec.name}/{task.label}")
        res = run(sim, policy, task.seed, trace=trace)
    finally:
        if stream is not None:
            stream.close()
    L = res.ledger
    ci = metrics.within_run_interval(L)
    m = len(sim.classes)
    row = {
        "policy": spec.name,
        "sweep_var": cfg.sweep.var,
        "sweep_value": task.value,
        "seed": task.seed,
        "revenue_per_sec": metrics.revenue_rate(L),
        "ci_half_width": ci.half_width if ci.defined else math.nan,
    }
    for i in range(m):
        row[f"accepted_{i + 1}"] = L.accepted[i]
    for i in range(m):
        row[f"rejected_{i + 1}"] = L.rejected[i]
    for i in range(m):
        row[f"violated_{i + 1}"] = L.violated[i]
    for i in range(m):
        row[f"sla_met_frac_{i + 1}"] = metrics.sla_met_fraction(L, i)
    log.info("%s %s=%g seed=%d revenue/s=%.4f (%.1fs)", spec.name, cfg.sweep.var, task.value, task.seed,
             row["revenue_per_sec"], res.wall_seconds)
    return RunRecord(task, row, [list(w) for w in L.session_waits], res.wall_seconds, sum(L.in_flight))


def _write_row(writer, row: dict) -> None:
    writer.writerow({k: _fmt(v) if isinstance(v, float) else v for k, v in row.items()})


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None, jobs: int = 1,
                   trace: bool = False, write: bool = True) -> SweepResult:
    """Run every (sweep value, policy, replication) and write the outputs.

    Rows are flushed as runs finish; at the end the CSV is rewritten in task
    order so reruns with the same seeds produce identical files.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    todo = tasks(cfg)
    trace_dir = None
    if write:
        out.mkdir(parents=True, exist_ok=True)
        if trace:
            trace_dir = out / "trace"
            trace_dir.mkdir(exist_ok=True)
        (out / FAILURES).unlink(missing_ok=True)
        manifest = {"name": cfg.name, "replications": cfg.replications, "horizon": cfg.horizon,
                    "base_seed": cfg.base_seed, "runs": len(todo)}
        (out / MANIFEST).write_text(json.dumps(manifest, indent=1) + "\n")
    cols = csv_columns(cfg.m)
    records: dict[Task, RunRecord] = {}
    failures: list[dict] = []
    fh = open(out / RUNS_CSV, "w", newline="") if write else None
    writer = csv.DictWriter(fh, cols) if fh else None
    if writer:
        writer.writeheader()
        fh.flush()

    def done(task: Task, rec: RunRecord | None, err: BaseException | None) -> None:
        if err is not None:
            info = {"policy": cfg.policies[task.policy_index].name, "sweep_value": task.value, "seed": task.seed,
                    "cell": task.cell, "rep": task.rep, "error": f"{type(err).__name__}: {err}"}
            failures.append(info)
            log.error("run failed: %s", info)
            if write:
                with open(out / FAILURES, "a") as f:
                    f.write(json.dumps(info) + "\n")
            return
        records[task] = rec
        if writer:
            _write_row(writer, rec.row)
            fh.flush()

    try:
        if jobs <= 1:
            for t in todo:
                try:
                    done(t, execute(cfg, t, trace_dir and str(trace_dir)), None)
                except Exception as e:  # a failed cell must not stop the sweep
                    done(t, None, e)
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futs = {pool.submit(execute, cfg, t, trace_dir and str(trace_dir)): t for t in todo}
                for f in as_completed(futs):
                    e = f.exception()
                    done(futs[f], None if e else f.result(), e)
    finally:
        if fh:
            fh.close()
    ordered = [records[t] for t in todo if t in records]
    result = SweepResult(cfg, ordered, failures)
    if write:
        with open(out / RUNS_CSV, "w", newline="") as f:
            w = csv.DictWriter(f, cols)
            w.writeheader()
            for r in ordered:
                _write_row(w, r.row)
        if ordered:
            emit_plot_data(result, out)
            emit_wait_pdfs(result, out)
    return result


def series(result: SweepResult, policy: str) -> list[tuple[float, float, float, int]]:
    """(sweep value, mean revenue/s, CI half-width, runs) for one policy."""
    cfg = result.config
    rows = []
    for _, value in cfg.cells():
        recs = result.select(policy, value)
        if not recs:
            continue
        revs = [r.row["revenue_per_sec"] for r in recs]
        if cfg.ci_mode == "across" and len(revs) >= 2:
            ci = metrics.confidence_interval(revs)
            half = ci.half_width
        else:
            hws = [r.row["ci_half_width"] for r in recs]
            half = float(np.mean(hws)) if len(hws) == 1 else float(np.sqrt(np.mean(np.square(hws)) / len(hws)))
        rows.append((value, float(np.mean(revs)), half, len(revs)))
    return rows


def emit_plot_data(result: SweepResult, out_dir: str | Path) -> list[Path]:
    """One CSV series per policy: sweep value, mean revenue, CI half-width."""
    if not result.records:
        raise ValueError("no completed runs")
    d = Path(out_dir) / "series"
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for spec in result.config.policies:
        p = d / f"{spec.name}.csv"
        with open(p, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow([result.config.sweep.var, "mean_revenue_per_sec", "ci_half_width", "runs"])
            for value, mean, half, n in series(result, spec.name):
                w.writerow([repr(value), repr(mean), _fmt(half), n])
        paths.append(p)
    return paths


def emit_wait_pdfs(result: SweepResult, out_dir: str | Path, bin_width: float | None = None) -> list[Path]:
    """Per class histograms of completed-session mean waits, pooled over
    replications of each (policy, sweep value) cell."""
    cfg = result.config
    width = bin_width if bin_width is not None else cfg.sim.get("pdf_bin", 0.05)
    d = Path(out_dir) / "pdf"
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for cell, value in cfg.cells():
        for spec in cfg.policies:
            recs = result.select(spec.name, value)
            if not recs:
                continue
            for i, c in enumerate(cfg.classes):
                waits = np.concatenate([np.asarray(r.waits[i], dtype=float) for r in recs])
                counts = metrics.wait_histogram(waits, width)
                p = d / f"{spec.name}_cell{cell}_class{c.id}.csv"
                total = counts.sum()
                with open(p, "w", newline="") as f:
                    w = csv.writer(f)
                    w.writerow(["bin_start", "bin_end", "count", "density"])
                    for j, n in enumerate(counts):
                        dens = n / (total * width) if total else 0.0
                        w.writerow([repr(round(j * width, 12)), repr(round((j + 1) * width, 12)), int(n),
                                    repr(float(dens))])
                paths.append(p)
    return paths


def sweep_status(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Count completed, failed and pending runs from files on disk."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    if (out / MANIFEST).exists():
        m = json.loads((out / MANIFEST).read_text())
        cfg = cfg.with_overrides(replications=m.get("replications"), horizon=m.get("horizon"),
                                 base_seed=m.get("base_seed"))
    expected = {(cfg.policies[t.policy_index].name, t.value, t.seed) for t in tasks(cfg)}
    done = set()
    if (out / RUNS_CSV).exists():
        with open(out / RUNS_CSV, newline="") as f:
            for row in csv.DictReader(f):
                done.add((row["policy"], float(row["sweep_value"]), int(row["seed"])))
    failed = set()
    if (out / FAILURES).exists():
        for line in (out / FAILURES).read_text().splitlines():
            if line.strip():
                info = json.loads(line)
                failed.add((info["policy"], float(info["sweep_value"]), int(info["seed"])))
    done &= expected
    failed = (failed & expected) - done
    return {"expected": len(expected), "completed": len(done), "failed": len(failed),
            "pending": len(expected - done - failed)}
