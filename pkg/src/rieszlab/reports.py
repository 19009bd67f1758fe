"""Report records shared by every checker."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

CSV_FIELDS = ("name", "lhs", "rhs", "constant", "pass", "params")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class EstimateReport:
    """A measured quantity against its bound.

    ``direction`` says how ``passed`` relates the two sides: "le" (lhs <= rhs),
    "ge" (lhs >= rhs) or "report" (no inequality, the check only has to run).
    """

    name: str
    measured_lhs: float
    bound_rhs: float
    empirical_constant: float
    passed: bool
    direction: str = "le"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.measured_lhs = float(self.measured_lhs)
        self.bound_rhs = float(self.bound_rhs)
        self.empirical_constant = float(self.empirical_constant)
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateReport":
        return cls(**d)

    def csv_row(self) -> list:
        return [self.name, repr(self.measured_lhs), repr(self.bound_rhs), repr(self.empirical_constant),
                "true" if self.passed else "false", json.dumps(_plain(self.metadata), sort_keys=True)]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()
