"""Improvement metric and benchmark reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field


class MetricError(ValueError):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


def improvement(bks: float, obj: float) -> float:
    """Percentage by which ``obj`` undercuts the reference value ``bks``.

    Positive means ``obj`` is better (cheaper) than the reference.
    """
    if bks <= 0:
        raise MetricError("nonpositive-bks", f"reference cost must be positive, got {bks}")
    return (bks - obj) / bks * 100.0


@dataclass(frozen=True)
class BenchRow:
    variant: str
    operator: str
    baseline_cost: float
    candidate_cost: float
    baseline_seconds: float
    candidate_seconds: float

    @property
    def improvement(self) -> float:
        return improvement(self.baseline_cost, self.candidate_cost)


@dataclass
class BenchReport:
    rows: list[BenchRow]
    stamp: dict = field(default_factory=dict)
    per_instance: list[dict] = field(default_factory=list)

    COLUMNS = (
        "variant",
        "operator",
        "baseline_cost",
        "candidate_cost",
        "improvement_pct",
        "baseline_seconds",
        "candidate_seconds",
    )

    def _records(self) -> list[dict]:
        # Rounded once here so the table and the CSV show identical numbers;
        # the improvement is computed from the rounded costs so readers can
        # recompute it from the printed columns.
        out = []
        for r in self.rows:
            b, c = round(r.baseline_cost, 2), round(r.candidate_cost, 2)
            out.append({
                "variant": r.variant,
                "operator": r.operator,
                "baseline_cost": b,
                "candidate_cost": c,
                "improvement_pct": round(improvement(b, c), 2),
                "baseline_seconds": round(r.baseline_seconds, 2),
                "candidate_seconds": round(r.candidate_seconds, 2),
            })
        return out

    def to_table(self) -> str:
        records = self._records()
        header = ["Variant", "Operator", "Baseline Cost", "Candidate Cost", "Improvement (%)", "Baseline Time (s)", "Candidate Time (s)"]
        cells = [header] + [
            [
                rec["variant"],
                rec["operator"],
                f"{rec['baseline_cost']:.2f}",
                f"{rec['candidate_cost']:.2f}",
                f"{rec['improvement_pct']:.2f}",
                f"{rec['baseline_seconds']:.2f}",
                f"{rec['candidate_seconds']:.2f}",
            ]
            for rec in records
        ]
        widths = [max(len(row[c]) for row in cells) for c in range(len(header))]
        lines = []
        for k, row in enumerate(cells):
            parts = [row[c].ljust(widths[c]) if c < 2 else row[c].rjust(widths[c]) for c in range(len(row))]
            lines.append("  ".join(parts).rstrip())
            if k == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(self.COLUMNS), lineterminator="\n")
        writer.writeheader()
        for rec in self._records():
            writer.writerow({k: (f"{v:.2f}" if isinstance(v, float) else v) for k, v in rec.items()})
        return buf.getvalue()

    def per_instance_csv(self) -> str:
        if not self.per_instance:
            return ""
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(self.per_instance[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.per_instance)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"stamp": self.stamp, "rows": self._records(), "raw": [asdict(r) for r in self.rows]},
            indent=2,
            sort_keys=True,
        )
