"""Operations behind the command-line subcommands."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .. import stats
from ..errors import ConfigError
from ..geometry import ThetaVector
from ..mfs import ForwardModel, evaluate_scalp, quality_q
from ..oracle import Dipole, layered_potential
from ..sampling import DipoleRegion
from ..tuner import TuningResult, best_theta, run
from .checks import oracle_checks
from .config import ExperimentConfig
from .ledger_io import LedgerWriter, header_for, read_ledger

__all__ = [
    "THREADS_ENV",
    "ForwardReport",
    "cmd_forward",
    "cmd_oracle_check",
    "cmd_tune",
    "cmd_compare",
    "cmd_report",
    "ledger_path",
    "worker_count",
]

THREADS_ENV = "MFSTUNE_THREADS"
ARMS = (("sko", False), ("sko", True), ("random", False), ("random", True))


def worker_count() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            n = int(value)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
        if n < 1:
            raise ConfigError(f"{THREADS_ENV} must be positive")
        return n
    try:
        import psutil

        return psutil.cpu_count(logical=False) or os.cpu_count() or 1
    except ImportError:
        return os.cpu_count() or 1


@dataclass
class ForwardReport:
    q: float
    residual: float
    rhs_norm: float
    rank: int
    columns: int
    seconds: float

    def lines(self) -> list[str]:
        return [
            f"Q              {self.q:.6f}",
            f"residual       {self.residual:.6e} (relative {self.residual / self.rhs_norm:.3e})"
            if self.rhs_norm > 0 else f"residual       {self.residual:.6e}",
            f"numerical rank {self.rank} / {self.columns}",
            f"time           {self.seconds:.3f} s",
        ]


def cmd_forward(config: ExperimentConfig, theta: ThetaVector, dipole: Dipole) -> ForwardReport:
    """One MFS solve at ``theta`` scored against the analytic potential."""
    if not config.bounds.contains(theta):
        raise ConfigError(f"theta {[float(x) for x in theta.as_array()]} lies outside the configured bounds")
    start = time.perf_counter()
    model = ForwardModel(config.head, tuple(config.data["counts"]), config.data["n_colloc"], config.data["k_test"],
                         config.data["oracle_tol"], config.metric)
    solution = model.solve(theta, dipole)
    u_true = layered_potential(config.head, dipole, model.test, config.data["oracle_tol"])
    q = quality_q(evaluate_scalp(solution, model.test), u_true, config.metric).q
    return ForwardReport(q, solution.residual, solution.rhs_norm, solution.rank,
                         solution.system.shape[1], time.perf_counter() - start)


def cmd_oracle_check(config: ExperimentConfig, stability_tol: float = 1e-10):
    return oracle_checks(config.head, config.data["oracle_tol"], stability_tol)


def ledger_path(out: str | Path, strategy: str, preemptive: bool, seed: int, region: DipoleRegion) -> Path:
    label = f"region{region.index}" if region.index else (region.name or region.kind)
    arm = "preemptive" if preemptive else "standard"
    return Path(out) / label / f"{strategy}-{arm}-s{seed}.ndjson"


def cmd_tune(config: ExperimentConfig, out: str | Path | None = None, resume: bool = False,
             stop_after: int | None = None, path: str | Path | None = None,
             region: DipoleRegion | None = None, strategy: str | None = None, preemptive: bool | None = None,
             seed: int | None = None) -> tuple[TuningResult, Path]:
    """Single tuning run, persisting each ledger entry as it completes."""
    tc = config.tuner_config(strategy, preemptive, seed, region)
    path = Path(path) if path is not None else ledger_path(out or config.data["output"], tc.strategy,
                                                           tc.preemptive, tc.seed, tc.region)
    header = header_for(tc, config.data["objective"])
    ledger = None
    if resume:
        _, ledger = read_ledger(path)
    blackbox = config.blackbox()
    with LedgerWriter(path, header, tc.seed, resume=resume, timestamps=config.data["timestamps"]) as writer:
        result = run(tc, blackbox, config.head, ledger=ledger, on_entry=writer, stop_after=stop_after)
    return result, path


def _arm_job(args):
    data, strategy, preemptive, seed, region, out = args
    config = ExperimentConfig(data)
    _, path = cmd_tune(config, out, region=DipoleRegion.from_dict(region), strategy=strategy,
                            preemptive=preemptive, seed=seed)
    return str(path)


def cmd_compare(config: ExperimentConfig, out: str | Path | None = None, workers: int | None = None) -> dict:
    """All four arms times the configured repetitions with paired seeds, then the report."""
    out = Path(out or config.data["output"])
    jobs = []
    for region in config.regions:
        for rep in range(config.data["repetitions"]):
            for strategy, preemptive in ARMS:
                jobs.append((config.to_dict(), strategy, preemptive, config.data["seed"] + rep, region.to_dict(),
                             str(out)))
    workers = workers or worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_arm_job, jobs))
    else:
        for job in jobs:
            _arm_job(job)
    return cmd_report(out)


@dataclass
class _Replay:
    best_mean: float
    distinct: int


def cmd_report(out: str | Path, write: bool = True) -> dict:
    """Collect ledgers under ``out`` into a comparison table.

    Writes ``table.csv``, ``table.json`` and ``table.txt`` next to the
    ledgers and returns the JSON document.
    """
    out = Path(out)
    groups: dict = {}
    for path in sorted(out.rglob("*.ndjson")):
        header, ledger = read_ledger(path)
        region = header["region"]
        key = (region.get("index") or 0, region.get("name") or region["kind"])
        arm = (header["strategy"], header["preemptive"])
        _, mean = best_theta(ledger)
        replay = _Replay(mean, len(ledger.completed()))
        groups.setdefault(key, {}).setdefault(arm, {})[header["seed"]] = replay
    if not groups:
        raise ConfigError(f"no ledgers found under {out}")

    rows = []
    for key in sorted(groups):
        arms = groups[key]
        row = {"index": key[0], "region": key[1], "strategies": {}}
        for strategy in ("sko", "random"):
            std, pre = arms.get((strategy, False), {}), arms.get((strategy, True), {})
            seeds = sorted(set(std) & set(pre))
            if not seeds:
                continue
            report = stats.compare_strategies([std[s] for s in seeds], [pre[s] for s in seeds], strategy)
            row["strategies"][strategy] = report.to_dict()
        rows.append(row)
    doc = {"rows": rows}
    if write:
        (out / "table.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        (out / "table.csv").write_text(_csv(rows))
        (out / "table.txt").write_text(format_table(rows))
    return doc


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "strategy", "arm", "median_q", "bonus", "p_value", "significant", "repetitions"])
    for row in rows:
        for strategy, rep in row["strategies"].items():
            writer.writerow([row["index"], strategy, "standard", f"{rep['median_standard']:.6g}", "", "", "",
                             rep["repetitions"]])
            writer.writerow([row["index"], strategy, "preemptive", f"{rep['median_preemptive']:.6g}",
                             f"{rep['bonus']:g}", f"{rep['p_value']:.6g}",
                             str(rep["significant"]).lower() if rep["sufficient"] else "insufficient",
                             rep["repetitions"]])
    return buf.getvalue()


def format_table(rows) -> str:
    """Aligned text table: median best Q per arm, bonus, ``*`` for p < 0.05."""
    head = f"{'index':>5} | {'SKO std':>9} {'SKO pre':>10} {'bonus':>6} | {'RS std':>9} {'RS pre':>10} {'bonus':>6}"
    lines = [head, "-" * len(head)]
    for row in rows:
        cells = []
        for strategy in ("sko", "random"):
            rep = row["strategies"].get(strategy)
            if rep is None:
                cells.append(f"{'-':>9} {'-':>10} {'-':>6}")
                continue
            mark = "*" if rep["significant"] else ("?" if not rep["sufficient"] else " ")
            cells.append(f"{rep['median_standard']:9.3f} {rep['median_preemptive']:9.3f}{mark} {rep['bonus']:6g}")
        lines.append(f"{row['index']:>5} | {cells[0]} | {cells[1]}")
    lines.append("* p < 0.05 (two-sided Mann-Whitney U, preemptive vs standard); ? too few repetitions")
    return "\n".join(lines) + "\n"
