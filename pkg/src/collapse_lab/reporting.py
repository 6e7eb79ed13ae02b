"""Experiment reports and their bit-stable serialized forms.

Reals are serialized with 12 significant digits (round-half-even via the
IEEE formatting path), which keeps golden files byte-stable without
resorting to binary dumps.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

SCHEMA_VERSION = 1


def format_real(x: float) -> str:
    """Render a real with 12 significant digits; integers stay integral."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".12g")


def round12(x: float) -> float:
    """Collapse a float onto its 12-significant-digit representative."""
    return float(format(float(x), ".12g"))


def canonical_config_text(mapping: Mapping[str, object]) -> str:
    """Key-sorted `key = value` lines with JSON-encoded values."""
    lines = [f"{key} = {json.dumps(mapping[key], sort_keys=True)}" for key in sorted(mapping)]
    return "\n".join(lines) + "\n"


def canonical_fingerprint(mapping: Mapping[str, object]) -> str:
    """Stable 16-hex-digit digest of a canonicalized configuration."""
    digest = hashlib.sha256(canonical_config_text(mapping).encode("utf-8")).hexdigest()
    return digest[:16]


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """Counts plus derived statistics for one reproducible experiment run.

    Statistics are stored exactly as computed from the counts, so
    recomputing them from the stored rows reproduces them bit-for-bit.
    """

    experiment: str
    seed: int
    fingerprint: str
    statistics: dict[str, float]
    counts_header: tuple[str, ...]
    counts: tuple[tuple, ...] = field(repr=False)

    def to_json_dict(self) -> dict:
        rows = [
            {name: _json_value(value) for name, value in zip(self.counts_header, row)}
            for row in self.counts
        ]
        return {
            "schemaVersion": SCHEMA_VERSION,
            "experiment": self.experiment,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "statistics": {k: _json_value(v) for k, v in self.statistics.items()},
            "counts": rows,
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def to_counts_csv(self) -> str:
        lines = [",".join(self.counts_header)]
        for row in self.counts:
            lines.append(",".join(_csv_value(v) for v in row))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_json_text(text: str) -> "ExperimentReport":
        data = json.loads(text)
        if data.get("schemaVersion") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {data.get('schemaVersion')!r}")
        rows = data["counts"]
        header: tuple[str, ...] = ()
        if rows:
            header = tuple(rows[0].keys())
        return ExperimentReport(
            experiment=data["experiment"],
            seed=data["seed"],
            fingerprint=data["fingerprint"],
            statistics=dict(data["statistics"]),
            counts_header=header,
            counts=tuple(tuple(row[name] for name in header) for row in rows),
        )


def _json_value(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return round12(value)
    return value


def _csv_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return format_real(value)


def counts_csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_value(v) for v in row))
    return "\n".join(lines) + "\n"
