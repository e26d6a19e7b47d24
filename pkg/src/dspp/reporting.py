"""Benchmark rows and their CSV/JSON forms."""
import csv
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

COLUMNS = ("kind", "parameters", "size", "iterations", "converged", "status",
           "setup_seconds", "iterate_seconds", "final_res", "phi")
TIMING_COLUMNS = ("setup_seconds", "iterate_seconds")


@dataclass(frozen=True)
class BenchRow:
    kind: str
    parameters: dict
    size: int
    iterations: int
    converged: bool
    status: str
    setup_seconds: float
    iterate_seconds: float
    final_res: float
    phi: Optional[float] = None

    def to_csv_fields(self):
        return {
            "kind": self.kind,
            "parameters": json.dumps(self.parameters, sort_keys=True),
            "size": str(self.size),
            "iterations": str(self.iterations),
            "converged": "true" if self.converged else "false",
            "status": self.status,
            "setup_seconds": repr(float(self.setup_seconds)),
            "iterate_seconds": repr(float(self.iterate_seconds)),
            "final_res": repr(float(self.final_res)),
            "phi": "" if self.phi is None else repr(float(self.phi)),
        }

    @classmethod
    def from_csv_fields(cls, rec):
        return cls(
            kind=rec["kind"],
            parameters=json.loads(rec["parameters"]),
            size=int(rec["size"]),
            iterations=int(rec["iterations"]),
            converged=rec["converged"] == "true",
            status=rec["status"],
            setup_seconds=float(rec["setup_seconds"]),
            iterate_seconds=float(rec["iterate_seconds"]),
            final_res=float(rec["final_res"]),
            phi=None if rec["phi"] == "" else float(rec["phi"]),
        )


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow(row.to_csv_fields())


def read_rows(path):
    with open(path, newline="") as fh:
        return [BenchRow.from_csv_fields(rec) for rec in csv.DictReader(fh)]


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n")


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: getattr(obj, f.name) for f in fields(obj)}
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def row_dict(row: BenchRow):
    return asdict(row)
