"""Self-contained experiment reports with deterministic serialization.

The canonical JSON (``report_<name>_<seed>.json``) is byte-identical across
reruns with the same config and seed, regardless of worker count; wall-clock
runtime is therefore kept out of the canonical payload (it lives on the
in-memory object and in a separate timing sidecar).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TestReport"]


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


@dataclass
class TestReport:
    experiment_name: str
    seed: int
    policy: str
    triplet: dict
    params: dict
    grid_levels: list
    checks: list = field(default_factory=list)
    sample_sizes: dict = field(default_factory=dict)
    exclusion_rates: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    inconclusive_reason: str | None = None
    runtime_seconds: float | None = None

    @property
    def verdict(self) -> str:
        if self.inconclusive_reason is not None:
            return "inconclusive"
        if any(not c.get("passed", False) for c in self.checks):
            return "fail"
        if not self.checks:
            return "inconclusive"
        return "pass"

    def to_canonical_dict(self) -> dict:
        return _plain({
            "experiment_name": self.experiment_name,
            "seed": self.seed,
            "verdict": self.verdict,
            "policy": self.policy,
            "triplet": self.triplet,
            "params": self.params,
            "grid_levels": self.grid_levels,
            "checks": self.checks,
            "sample_sizes": self.sample_sizes,
            "exclusion_rates": self.exclusion_rates,
            "notes": self.notes,
            "inconclusive_reason": self.inconclusive_reason,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_canonical_dict(), sort_keys=True, indent=2)

    def save(self, output_dir: str) -> str:
        os.makedirs(output_dir, exist_ok=True)
        path = os.path.join(
            output_dir, f"report_{self.experiment_name}_{self.seed}.json")
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")
        if self.runtime_seconds is not None:
            side = os.path.join(
                output_dir, f"timing_{self.experiment_name}_{self.seed}.txt")
            with open(side, "w") as fh:
                fh.write(f"{self.runtime_seconds:.3f}\n")
        return path

    def save_samples(self, output_dir: str, side: str,
                     columns: dict[str, np.ndarray]) -> str:
        os.makedirs(output_dir, exist_ok=True)
        path = os.path.join(output_dir, f"samples_{side}.csv")
        names = list(columns)
        arrays = [np.asarray(columns[k]) for k in names]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in zip(*arrays):
                w.writerow([f"{float(v):.12g}" for v in row])
        return path
