"""Result tables with a fixed CSV/JSON schema.

CSV columns come in the fixed order (mode, n, alpha, r, t, estimate,
ci_lo, ci_hi, theory, residual) followed by the provenance columns
(seed, replicas, build_id). JSON carries the same rows plus a metadata
object (seed, replicas, wall time, and anything the caller adds).
Identical inputs produce byte-identical CSV; JSON is identical up to the
wall-time field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version

try:
    BUILD_ID = "nbrewire-" + version("nbrewire")
except PackageNotFoundError:  # running from a source tree
    BUILD_ID = "nbrewire-dev"

SCHEMA = ("mode", "n", "alpha", "r", "t", "estimate", "ci_lo", "ci_hi",
          "theory", "residual")
PROVENANCE = ("seed", "replicas", "build_id")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


@dataclass
class ResultTable:
    """Tagged rows of (parameters, t, estimate, CI, theory prediction)."""

    rows: list[dict] = field(default_factory=list)
    seed: int | None = None
    replicas: int | None = None
    metadata: dict = field(default_factory=dict)

    def add_row(self, mode, n, alpha, r, t, estimate, ci_lo=None, ci_hi=None,
                theory=None, residual=None, **extra) -> None:
        row = {"mode": mode, "n": n, "alpha": alpha, "r": r, "t": t,
               "estimate": estimate, "ci_lo": ci_lo, "ci_hi": ci_hi,
               "theory": theory, "residual": residual}
        row.update(extra)
        self.rows.append(row)

    def _columns(self) -> list[str]:
        extra = []
        for row in self.rows:
            for key in row:
                if key not in SCHEMA and key not in extra:
                    extra.append(key)
        return list(SCHEMA) + extra + list(PROVENANCE)

    def to_csv(self, path) -> None:
        cols = self._columns()
        prov = {"seed": self.seed, "replicas": self.replicas,
                "build_id": BUILD_ID}
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in self.rows:
                merged = {**row, **prov}
                fh.write(",".join(_fmt(merged.get(c)) for c in cols) + "\n")

    def to_json(self, path, wall_time_s: float | None = None) -> None:
        cols = self._columns()
        prov = {"seed": self.seed, "replicas": self.replicas,
                "build_id": BUILD_ID}
        payload = {
            "schema": cols,
            "rows": [{c: (row | prov).get(c) for c in cols} for row in self.rows],
            "metadata": {"seed": self.seed, "replicas": self.replicas,
                         "build_id": BUILD_ID,
                         "wall_time_s": wall_time_s, **self.metadata},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True, default=float)
            fh.write("\n")
