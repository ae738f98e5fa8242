"""Sequential kriging optimization with preemptive termination.

The outer loop asks for a theta, then averages Q over random dipoles. Once a
theta has ``n_min`` values and the run has spent more than ``j_init``
evaluations, the inner loop stops early whenever the theta's running mean is
strictly below the pooled mean of every Q recorded so far.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kriging
from .errors import GeometryError, InvalidArgument, NoResult, RankFailure, RegionInfeasible
from .geometry import DEFAULT_HEAD, HeadModel, ThetaBounds, ThetaVector
from .oracle import Dipole
from .sampling import DipoleRegion, RngStream, sample_dipole

__all__ = [
    "TunerConfig",
    "LedgerEntry",
    "Ledger",
    "TuningResult",
    "pooled_mean",
    "best_theta",
    "run",
    "STREAM_DIPOLES",
    "STREAM_SUGGEST",
    "STREAM_FIT",
]

log = logging.getLogger(__name__)

# child-stream keys; every ledger entry k draws from (key, k)
STREAM_DIPOLES, STREAM_SUGGEST, STREAM_FIT = 0, 1, 2

Blackbox = Callable[[ThetaVector, Dipole], float]


@dataclass(frozen=True)
class TunerConfig:
    j_max: int = 200
    n_avg: int = 10
    n_min: int = 3
    j_init: int = 50
    bounds: ThetaBounds = field(default_factory=ThetaBounds)
    region: DipoleRegion = field(default_factory=DipoleRegion)
    strategy: str = "sko"
    preemptive: bool = True
    seed: int = 0
    include_in_progress: bool = False
    max_failures: int = 1000

    def __post_init__(self):
        if not (1 <= self.n_min <= self.n_avg <= self.j_init <= self.j_max):
            raise InvalidArgument(
                f"need 1 <= n_min <= n_avg <= j_init <= j_max, got n_min={self.n_min}, n_avg={self.n_avg}, "
                f"j_init={self.j_init}, j_max={self.j_max}"
            )
        if self.preemptive != (self.n_min < self.n_avg):
            raise InvalidArgument("preemptive runs need n_min < n_avg and standard runs n_min == n_avg")
        if self.strategy not in ("sko", "random"):
            raise InvalidArgument(f"unknown strategy {self.strategy!r}")

    def arm(self, strategy: str, preemptive: bool, n_min: int | None = None) -> "TunerConfig":
        """Copy with another strategy; standard arms get ``n_min = n_avg``."""
        if preemptive:
            n_min = n_min if n_min is not None else (self.n_min if self.preemptive else max(1, self.n_avg // 3))
        else:
            n_min = self.n_avg
        return dataclasses.replace(self, strategy=strategy, preemptive=preemptive, n_min=n_min)

    @property
    def n_design(self) -> int:
        """Uniformly drawn thetas before the surrogate takes over."""
        return max(2, self.j_init // self.n_avg)


@dataclass(frozen=True)
class LedgerEntry:
    theta: ThetaVector
    q_values: tuple[float, ...] = ()
    preempted: bool = False
    failed: bool = False
    truncated: bool = False

    @property
    def mean(self) -> float:
        return float(np.mean(self.q_values))

    @property
    def variance(self) -> float:
        return float(np.var(self.q_values, ddof=1)) if len(self.q_values) > 1 else 0.0


@dataclass
class Ledger:
    """The record set of a run, with a running pooled sum."""

    entries: list = field(default_factory=list)
    _sum: float = field(default=0.0, repr=False)
    _count: int = field(default=0, repr=False)

    def __post_init__(self):
        entries, self.entries = list(self.entries), []
        for e in entries:
            self.append(e)

    def append(self, entry: LedgerEntry):
        self.entries.append(entry)
        if not entry.failed:
            self._sum += float(np.sum(entry.q_values))
            self._count += len(entry.q_values)

    @property
    def j_used(self) -> int:
        return self._count

    @property
    def pooled(self) -> tuple[float, int]:
        return self._sum, self._count

    def completed(self) -> list:
        return [e for e in self.entries if not e.failed]

    def __len__(self):
        return len(self.entries)


def pooled_mean(ledger: Ledger) -> float:
    """Mean of all Q values of all non-failed entries pooled into one sample."""
    values = [q for e in ledger.entries if not e.failed for q in e.q_values]
    if not values:
        raise NoResult("pooled mean of an empty ledger is undefined")
    return float(np.mean(values))


def best_theta(ledger: Ledger) -> tuple[ThetaVector, float]:
    """Entry with the largest mean; the earliest one wins ties."""
    best = None
    for e in ledger.entries:
        if e.failed or not e.q_values:
            continue
        if best is None or e.mean > best.mean:
            best = e
    if best is None:
        raise NoResult("every ledger entry failed")
    return best.theta, best.mean


@dataclass
class TuningResult:
    best_theta: ThetaVector
    best_mean: float
    ledger: Ledger
    distinct: int
    means: np.ndarray
    variances: np.ndarray
    config: Optional[TunerConfig] = None


def _suggest(config: TunerConfig, ledger: Ledger, k: int, root: RngStream) -> ThetaVector:
    rng = root.spawn(STREAM_SUGGEST, k)
    done = ledger.completed()
    if config.strategy == "random" or len(done) < config.n_design:
        return ThetaVector.from_array(config.bounds.denormalize(rng.generator.random(len(config.bounds.lo))))
    observations = [kriging.Observation(e.theta, e.q_values) for e in done]
    failed = [e.theta for e in ledger.entries if e.failed]
    best = max(o.mean for o in observations)
    # failed thetas enter the surrogate at the worst mean so a whole failing region loses EI
    worst = min(o.mean for o in observations)
    observations += [kriging.Observation(t, (worst,)) for t in failed]
    model = kriging.fit(observations, config.bounds, root.spawn(STREAM_FIT, k))
    return kriging.suggest(model, config.bounds, rng, best=best, failed=failed)


def run(config: TunerConfig, blackbox: Blackbox, head: HeadModel = DEFAULT_HEAD, ledger: Ledger | None = None,
        on_entry: Callable[[int, LedgerEntry], None] | None = None, stop_after: int | None = None) -> TuningResult:
    """Run the tuner until ``config.j_max`` Q evaluations have been spent.

    ``blackbox(theta, dipole)`` returns Q or raises ``RankFailure`` (a
    degenerate geometry counts the same way). If it
    has a ``check(theta)`` method, that is called first so a rank-deficient
    theta costs no budget. Passing an existing ``ledger`` resumes a run;
    ``on_entry`` sees each entry as it is completed, and ``stop_after``
    halts once the ledger holds that many entries.
    """
    ledger = Ledger(ledger.entries) if ledger is not None else Ledger()
    if ledger.j_used > config.j_max:
        raise InvalidArgument("ledger already exceeds the budget")
    root = RngStream(config.seed)
    failures = sum(e.failed for e in ledger.entries)
    check = getattr(blackbox, "check", None)

    while ledger.j_used < config.j_max:
        if stop_after is not None and len(ledger) >= stop_after:
            break
        k = len(ledger)
        theta = _suggest(config, ledger, k, root)
        entry = _trial(config, blackbox, check, head, ledger, theta, root.spawn(STREAM_DIPOLES, k))
        ledger.append(entry)
        if entry.failed:
            failures += 1
            log.info("entry %d: rank failure at %s", k, theta)
            if failures > config.max_failures:
                raise NoResult(f"more than {config.max_failures} rank-failed suggestions")
        if on_entry is not None:
            on_entry(k, entry)

    theta, mean = best_theta(ledger)
    done = ledger.completed()
    return TuningResult(theta, mean, ledger, len(done), np.array([e.mean for e in done]),
                        np.array([e.variance for e in done]), config)


def _trial(config, blackbox, check, head, ledger, theta, rng) -> LedgerEntry:
    try:
        if check is not None:
            check(theta)
    except (RankFailure, GeometryError):
        return LedgerEntry(theta, failed=True)

    pooled_sum, pooled_n = ledger.pooled
    j = ledger.j_used
    v: list[float] = []
    while len(v) < config.n_avg and j < config.j_max:
        try:
            dipole = sample_dipole(config.region, head, rng)
        except RegionInfeasible:
            log.error("dipole region %r is infeasible", config.region.name or config.region.kind)
            raise
        try:
            q = float(blackbox(theta, dipole))
        except (RankFailure, GeometryError):
            return LedgerEntry(theta, failed=True)
        v.append(q)
        j += 1
        if config.preemptive and len(v) >= config.n_min and j > config.j_init and len(v) < config.n_avg:
            if config.include_in_progress:
                reference = (pooled_sum + sum(v)) / (pooled_n + len(v))
            elif pooled_n:
                reference = pooled_sum / pooled_n
            else:
                continue
            if np.mean(v) < reference:
                return LedgerEntry(theta, tuple(v), preempted=True)
    return LedgerEntry(theta, tuple(v), truncated=len(v) < config.n_avg)
