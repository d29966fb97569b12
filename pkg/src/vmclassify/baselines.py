"""Published baseline numbers for the comparison table.

These are quoted reference values shipped as package data; nothing here is
computed. Approximate entries (mapped from time horizons in hours to the
nearest window size) carry a star when rendered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources as importlib_resources

REFERENCE_WINDOWS = (4, 8, 16, 32, 64, 128, 256)


@dataclass(frozen=True)
class ReferenceRow:
    method: str
    kind: str
    approximate: bool
    values: dict[int, float | None]

    def value(self, window: int) -> float | None:
        return self.values.get(window)


def load_reference_rows() -> list[ReferenceRow]:
    raw = importlib_resources.files("vmclassify.resources").joinpath(
        "reference_baselines.json"
    ).read_text(encoding="utf-8")
    doc = json.loads(raw)
    rows = []
    for row in doc["rows"]:
        values = {int(k): (None if v is None else float(v)) for k, v in row["values"].items()}
        rows.append(
            ReferenceRow(
                method=row["method"],
                kind=row["kind"],
                approximate=bool(row["approximate"]),
                values=values,
            )
        )
    return rows
