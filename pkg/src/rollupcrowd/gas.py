"""Calibrated gas schedule for the L1 chain and the rollup's L1 postings.

The L1 ``CreateTask`` costs and the per-batch rollup stage costs come from a
measured fixture. Between fixture points cumulative costs are linearly
interpolated; the fixture rows themselves are always reproduced exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import FixtureMissing, UnknownClass
from .protocol import FunctionClass


@dataclass(frozen=True)
class StageGas:
    commit: int
    verify: int
    execute: int

    @property
    def total(self) -> int:
        return self.commit + self.verify + self.execute


def _interp(points: Mapping[int, int], x: int) -> int:
    xs = sorted(points)
    if x in points:
        return points[x]
    lo = max(p for p in xs if p < x)
    hi = min(p for p in xs if p > x)
    return points[lo] + round(Fraction((x - lo) * (points[hi] - points[lo]), hi - lo))


class GasSchedule:
    def __init__(self, data: dict):
        self.raw = data
        self.batch_capacity: int = int(data["batch_capacity"])
        self._l1_cumulative: dict[FunctionClass, dict[int, int]] = {}
        self._l1_linear: dict[FunctionClass, tuple[int, int]] = {}
        for name, entry in data["l1"].items():
            cls = FunctionClass(name)
            if "cumulative" in entry:
                points = {int(k): int(v) for k, v in entry["cumulative"].items()}
                points[0] = 0
                self._l1_cumulative[cls] = points
            else:
                self._l1_linear[cls] = (int(entry["first_call"]), int(entry["marginal"]))
        stages = {int(k): tuple(v) for k, v in data["l2"]["batch_stages"].items()}
        self._stage_points = [{k: v[i] for k, v in stages.items()} for i in range(3)]
        self.aggregated_stage_marginal: int = int(data["l2"]["aggregated_stage_marginal"])
        self.table_ii: dict[int, dict[str, int]] = {int(k): v for k, v in data.get("table_ii", {}).items()}
        if self.batch_capacity != 20:
            raise ValueError("batch capacity is fixed at 20")

    @classmethod
    def load(cls, path: str | Path | None = None) -> GasSchedule:
        if path is None:
            text = resources.files("rollupcrowd").joinpath("data/gas_schedule.json").read_text()
        else:
            try:
                text = Path(path).read_text()
            except FileNotFoundError:
                raise FixtureMissing(str(path)) from None
        return cls(json.loads(text))

    # -- L1 ---------------------------------------------------------------

    def l1_cumulative(self, function_class: FunctionClass | str, n: int) -> int:
        """Total gas for ``n`` calls of one class landing in the same block."""
        cls = FunctionClass(function_class)
        if n < 0:
            raise ValueError("call count must be non-negative")
        if n == 0:
            return 0
        if cls in self._l1_cumulative:
            points = self._l1_cumulative[cls]
            last = max(points)
            if n <= last:
                return _interp(points, n)
            # past the fixture: extend at the fixture's mean per-call cost
            return points[last] + round(Fraction((n - last) * points[last], last))
        if cls in self._l1_linear:
            first, marginal = self._l1_linear[cls]
            return first + (n - 1) * marginal
        raise UnknownClass(cls.value)

    def lookup_gas(self, function_class: FunctionClass | str, call_index: int) -> int:
        """Marginal gas of the ``call_index``-th call (1-based) within a block."""
        if call_index < 1:
            raise ValueError("call_index starts at 1")
        return self.l1_cumulative(function_class, call_index) - self.l1_cumulative(function_class, call_index - 1)

    # -- L2 postings --------------------------------------------------------

    def batch_stages(self, size: int) -> StageGas:
        if not 1 <= size <= self.batch_capacity:
            raise ValueError(f"batch size {size} outside 1..{self.batch_capacity}")
        return StageGas(*(_interp(p, size) for p in self._stage_points))

    def l2_model(self, n_calls: int) -> StageGas:
        """Stage gas for ``n_calls`` transactions posted together.

        Every batch pays its own commit. Proofs and executions for batches
        posted together are aggregated into one L1 call each: the first batch
        pays the full stage cost, each further batch a fixed marginal.
        """
        if n_calls < 1:
            raise ValueError("n_calls must be >= 1")
        n_batches = math.ceil(n_calls / self.batch_capacity)
        sizes = [self.batch_capacity] * (n_batches - 1) + [n_calls - self.batch_capacity * (n_batches - 1)]
        first = self.batch_stages(sizes[0])
        extra = self.aggregated_stage_marginal * (n_batches - 1)
        return StageGas(
            sum(self.batch_stages(s).commit for s in sizes),
            first.verify + extra,
            first.execute + extra,
        )

    def l2_gas_report(self, n_calls: int, function_class: FunctionClass | str = FunctionClass.CREATE_TASK) -> StageGas:
        cls = FunctionClass(function_class)
        if cls is FunctionClass.CREATE_TASK and n_calls in self.table_ii:
            row = self.table_ii[n_calls]
            return StageGas(row["commit"], row["verify"], row["execute"])
        return self.l2_model(n_calls)
