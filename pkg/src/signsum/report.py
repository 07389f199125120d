"""Verification report records and their serialized forms."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable

SCHEMA_VERSION = 1


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


@dataclass
class VerificationReport:
    """Outcome of one checked claim.

    ``margin`` is signed: nonnegative means the claim held with that much
    room at its worst point.  ``worst_point`` locates the worst case (a grid
    coordinate, an instance ordinal, ...).  ``applicable`` is False when a
    precondition was not met; such reports count as passing.
    """

    claim_id: str
    passed: bool
    margin: float
    worst_point: Any = None
    grid_spec: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    applicable: bool = True
    records: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return _jsonable(
            {
                "claim_id": self.claim_id,
                "pass": bool(self.passed),
                "margin": float(self.margin),
                "worst_point": self.worst_point,
                "grid_spec": self.grid_spec,
                "applicable": self.applicable,
                "details": self.details,
            }
        )

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def merge_reports(claim_id: str, reports: Iterable[VerificationReport]) -> VerificationReport:
    """Combine partial reports by worst-case margin.

    Ties on margin keep the earliest report, so the result does not depend
    on how the work was partitioned.
    """
    reports = list(reports)
    if not reports:
        return VerificationReport(claim_id, True, math.inf)
    worst = min(enumerate(reports), key=lambda p: (p[1].margin, p[0]))[1]
    return VerificationReport(
        claim_id,
        all(r.passed for r in reports),
        worst.margin,
        worst.worst_point,
        worst.grid_spec,
        {"parts": len(reports)},
    )


def reports_to_csv(reports: Iterable[VerificationReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["claim_id", "pass", "margin", "worst_point"])
    for r in reports:
        writer.writerow([r.claim_id, int(bool(r.passed)), repr(float(r.margin)),
                         json.dumps(_jsonable(r.worst_point))])
    return buf.getvalue()
