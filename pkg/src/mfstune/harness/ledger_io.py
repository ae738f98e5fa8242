"""Append-only newline-delimited JSON ledgers.

The first line is a header describing the run; every following line is one
ledger entry, written and fsynced as soon as the entry completes. Replaying
the entry lines rebuilds the in-memory ledger exactly.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

from ..errors import ResumeIntegrityError
from ..geometry import ThetaVector
from ..tuner import Ledger, LedgerEntry, TunerConfig

__all__ = ["LedgerWriter", "read_ledger", "header_for", "entry_record", "entry_from_record"]

FORMAT = "mfstune-ledger/1"


def _dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def header_for(config: TunerConfig, objective: dict | None = None) -> dict:
    return {
        "kind": "header",
        "format": FORMAT,
        "seed": config.seed,
        "stream": [],
        "strategy": config.strategy,
        "preemptive": config.preemptive,
        "budget": {"j_max": config.j_max, "n_avg": config.n_avg, "n_min": config.n_min, "j_init": config.j_init},
        "bounds": {"lower": list(config.bounds.lower), "upper": list(config.bounds.upper)},
        "region": config.region.to_dict(),
        "include_in_progress": config.include_in_progress,
        "objective": objective or {},
    }


def entry_record(index: int, entry: LedgerEntry, seed: int, timestamp: bool = False) -> dict:
    record = {
        "kind": "entry",
        "index": index,
        "theta": [float(x) for x in entry.theta.as_array()],
        "q_values": [float(q) for q in entry.q_values],
        "preempted": entry.preempted,
        "failed": entry.failed,
        "truncated": entry.truncated,
        "seed": seed,
        "stream": [index],
    }
    if timestamp:
        record["time"] = time.time()
    return record


def entry_from_record(record: dict) -> LedgerEntry:
    return LedgerEntry(ThetaVector.from_array(record["theta"]), tuple(record["q_values"]),
                       preempted=bool(record["preempted"]), failed=bool(record["failed"]),
                       truncated=bool(record["truncated"]))


def read_ledger(path: str | Path) -> tuple[dict, Ledger]:
    """Parse a ledger file into its header and a replayed ``Ledger``.

    Raises ``ResumeIntegrityError`` on malformed lines, a missing header,
    non-consecutive indices or a partially written final line.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ResumeIntegrityError(f"cannot read ledger {path}: {exc}") from None
    if raw and not raw.endswith(b"\n"):
        raise ResumeIntegrityError(f"{path}: last record is incomplete")
    lines = raw.decode("utf-8", errors="strict").splitlines()
    if not lines:
        raise ResumeIntegrityError(f"{path}: empty ledger")
    records = []
    for no, line in enumerate(lines, 1):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ResumeIntegrityError(f"{path}:{no}: {exc}") from None
    header = records[0]
    if header.get("kind") != "header" or header.get("format") != FORMAT:
        raise ResumeIntegrityError(f"{path}: missing or unknown header")
    ledger = Ledger()
    for expected, record in enumerate(records[1:]):
        if record.get("kind") != "entry" or record.get("index") != expected:
            raise ResumeIntegrityError(f"{path}: entry {expected} is missing or out of order")
        try:
            ledger.append(entry_from_record(record))
        except (KeyError, TypeError, ValueError) as exc:
            raise ResumeIntegrityError(f"{path}: entry {expected} is malformed: {exc}") from None
    return header, ledger


class LedgerWriter:
    """Appends entry records, syncing to disk after each one."""

    def __init__(self, path: str | Path, header: dict, seed: int, resume: bool = False, timestamps: bool = False):
        self.path = Path(path)
        self.seed = seed
        self.timestamps = timestamps
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if resume:
            existing, _ = read_ledger(self.path)
            if existing != json.loads(_dumps(header)):
                raise ResumeIntegrityError(f"{self.path}: header does not match the current configuration")
            self._fh = open(self.path, "a", encoding="utf-8")
        else:
            self._fh = open(self.path, "w", encoding="utf-8")
            self._write(header)

    def _write(self, record: dict):
        self._fh.write(_dumps(record) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def __call__(self, index: int, entry: LedgerEntry):
        self._write(entry_record(index, entry, self.seed, self.timestamps))

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
