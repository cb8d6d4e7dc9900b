"""Machine-readable audit reports and cosine CSV files.

Reports are JSON documents that round-trip exactly: every float is kept
bit-for-bit by Python's repr-based serialization, and infinities (which
JSON cannot represent) travel as the strings "inf" / "-inf" next to an
explicit ``saturated`` flag. Files are written atomically
(write-temp-then-rename) so partially written reports never appear.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .estimators import EpsilonLowerBound, NormalityDiagnostic
from .tradeoff import EPSILON_CAP, GaussianHypothesis

TOOLKIT_VERSION = "0.1.0"

COSINE_CSV_HEADER = ("round", "canary_id", "label", "cosine")
FINAL_MODEL_ROUND = -1


def encode_float(x: float) -> float | str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def decode_float(x: float | int | str) -> float:
    if isinstance(x, str):
        return {"inf": math.inf, "-inf": -math.inf}[x]
    return float(x)


@dataclass
class AuditReport:
    """Everything needed to interpret and reproduce one audit."""

    config_echo: dict[str, Any]
    epsilon_estimate: float
    epsilon_lower_bound: EpsilonLowerBound
    fitted_observed: GaussianHypothesis
    null_model: str
    normality: NormalityDiagnostic | None
    observed_samples: int
    runtime_seconds: float
    epsilon_all_iterates: float | None = None
    epsilon_lower_bound_all_iterates: EpsilonLowerBound | None = None
    fitted_unobserved: GaussianHypothesis | None = None
    unobserved_samples: int = 0
    epsilon_cap: float = EPSILON_CAP
    toolkit_version: str = TOOLKIT_VERSION
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def saturated(self) -> bool:
        return math.isinf(self.epsilon_estimate)

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "config_echo": dict(self.config_echo),
            "epsilon_estimate": encode_float(self.epsilon_estimate),
            "saturated": self.saturated,
            "epsilon_lower_bound": {
                "value": self.epsilon_lower_bound.value,
                "confidence": self.epsilon_lower_bound.confidence,
                "threshold_used": encode_float(self.epsilon_lower_bound.threshold_used),
            },
            "fitted_observed": asdict(self.fitted_observed),
            "null_model": self.null_model,
            "normality": asdict(self.normality) if self.normality else None,
            "observed_samples": self.observed_samples,
            "unobserved_samples": self.unobserved_samples,
            "epsilon_cap": self.epsilon_cap,
            "runtime_seconds": self.runtime_seconds,
            "toolkit_version": self.toolkit_version,
        }
        if self.epsilon_all_iterates is not None:
            out["epsilon_all_iterates"] = encode_float(self.epsilon_all_iterates)
        if self.epsilon_lower_bound_all_iterates is not None:
            lb = self.epsilon_lower_bound_all_iterates
            out["epsilon_lower_bound_all_iterates"] = {
                "value": lb.value,
                "confidence": lb.confidence,
                "threshold_used": encode_float(lb.threshold_used),
            }
        if self.fitted_unobserved is not None:
            out["fitted_unobserved"] = asdict(self.fitted_unobserved)
        if self.extra:
            out["extra"] = dict(self.extra)
        return out

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "AuditReport":
        def bound(d: dict[str, Any]) -> EpsilonLowerBound:
            return EpsilonLowerBound(
                value=d["value"],
                confidence=d["confidence"],
                threshold_used=decode_float(d["threshold_used"]),
            )

        return cls(
            config_echo=dict(data["config_echo"]),
            epsilon_estimate=decode_float(data["epsilon_estimate"]),
            epsilon_lower_bound=bound(data["epsilon_lower_bound"]),
            fitted_observed=GaussianHypothesis(**data["fitted_observed"]),
            null_model=data["null_model"],
            normality=(
                NormalityDiagnostic(**data["normality"]) if data.get("normality") else None
            ),
            observed_samples=data["observed_samples"],
            runtime_seconds=data["runtime_seconds"],
            epsilon_all_iterates=(
                decode_float(data["epsilon_all_iterates"])
                if "epsilon_all_iterates" in data
                else None
            ),
            epsilon_lower_bound_all_iterates=(
                bound(data["epsilon_lower_bound_all_iterates"])
                if "epsilon_lower_bound_all_iterates" in data
                else None
            ),
            fitted_unobserved=(
                GaussianHypothesis(**data["fitted_unobserved"])
                if "fitted_unobserved" in data
                else None
            ),
            unobserved_samples=data.get("unobserved_samples", 0),
            epsilon_cap=data.get("epsilon_cap", EPSILON_CAP),
            toolkit_version=data["toolkit_version"],
            extra=dict(data.get("extra", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AuditReport":
        return cls.from_json_dict(json.loads(text))


def write_atomic(path: str | Path, text: str) -> None:
    """Writes UTF-8 text via a temp file in the same directory, then renames."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(path: str | Path, report: AuditReport) -> None:
    write_atomic(path, report.to_json())


def read_report(path: str | Path) -> AuditReport:
    return AuditReport.from_json(Path(path).read_text(encoding="utf-8"))


def write_cosine_csv(path: str | Path, rows: Iterable[tuple[int, int, str, float]]) -> None:
    """Writes rows of (round, canary_id, label, cosine); round -1 = final model."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(COSINE_CSV_HEADER)
            for row in rows:
                writer.writerow([row[0], row[1], row[2], repr(float(row[3]))])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_cosine_csv(path: str | Path) -> list[tuple[int, int, str, float]]:
    rows = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != COSINE_CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header}; expected {list(COSINE_CSV_HEADER)}")
        for record in reader:
            rows.append((int(record[0]), int(record[1]), record[2], float(record[3])))
    return rows
