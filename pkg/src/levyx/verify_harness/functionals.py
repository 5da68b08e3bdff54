"""Bounded path functionals used by the distributional experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..path_algebra import running_extrema
from ..simulate import Path

__all__ = ["FunctionalSpec", "evaluate_functional", "parse_functionals"]


@dataclass(frozen=True)
class FunctionalSpec:
    """One of: endpoint, sup, inf, lifetime, value_at_fraction(q),
    overshoot(level), clipped_occupation(level).  All are bounded on bounded
    paths and measurable from the skeleton."""

    kind: str
    param: float = 0.0

    def label(self) -> str:
        if self.kind in ("value_at_fraction", "overshoot",
                         "clipped_occupation"):
            return f"{self.kind}({self.param:g})"
        return self.kind


_KINDS = {"endpoint", "sup", "inf", "lifetime", "value_at_fraction",
          "overshoot", "clipped_occupation"}


def parse_functionals(items: list) -> list[FunctionalSpec]:
    out = []
    for it in items:
        if isinstance(it, str):
            if "(" in it:
                kind, rest = it.split("(", 1)
                out.append(FunctionalSpec(kind.strip(),
                                          float(rest.rstrip(") "))))
            else:
                out.append(FunctionalSpec(it.strip()))
        else:
            out.append(FunctionalSpec(str(it[0]), float(it[1])))
    for f in out:
        if f.kind not in _KINDS:
            raise ValueError(f"unknown functional {f.kind!r}")
        if f.kind == "value_at_fraction" and not 0.0 < f.param < 1.0:
            raise ValueError("value_at_fraction needs q in (0, 1)")
    return out


def evaluate_functional(spec: FunctionalSpec, path: Path) -> float:
    if spec.kind == "endpoint":
        return path.end - path.start
    if spec.kind == "lifetime":
        return path.lifetime
    if spec.kind == "sup":
        s, _ = running_extrema(path)
        return float(s[-1])
    if spec.kind == "inf":
        _, i = running_extrema(path)
        return float(i[-1])
    if spec.kind == "value_at_fraction":
        k = int(round(spec.param * path.n_cells))
        return float(path.values[k])
    if spec.kind == "overshoot":
        from ..path_algebra import first_passage_up
        p = first_passage_up(path, spec.param)
        return float(p.overshoot) if p.happened else 0.0
    if spec.kind == "clipped_occupation":
        h = path.grid_step
        return float(((path.values[:-1] > spec.param) * h).sum())
    raise ValueError(spec.kind)
