"""Per-step counters and run summaries.

candidate_expansions counts scorer evaluations only; the no-op carrying of a
finalized candidate costs nothing and is excluded. expansions_per_step is
reported to one decimal with round-half-up to match conventional table
formatting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import NamedTuple

from .errors import InvariantViolation
from .model import CostParams, step_cost


class StepRecord(NamedTuple):
    timestep: int
    expansions: int
    effective_len: int
    cost: float


def round_half_up(value: float, decimals: int = 1) -> float:
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass
class MetricsReport:
    """Aggregates over one engine run; counters only ever increase."""

    timesteps: int = 0
    candidate_expansions: int = 0
    simulated_cost: float = 0.0
    per_step_trace: list[StepRecord] | None = None

    @classmethod
    def new(cls, trace: bool = False) -> "MetricsReport":
        return cls(per_step_trace=[] if trace else None)

    def record_step(
        self, num_expansions: int, effective_len: int, cost_params: CostParams
    ) -> None:
        if num_expansions < 0:
            raise InvariantViolation(f"negative expansion count {num_expansions}")
        cost = step_cost(num_expansions, effective_len, cost_params)
        self.timesteps += 1
        self.candidate_expansions += num_expansions
        self.simulated_cost += cost
        if self.per_step_trace is not None:
            self.per_step_trace.append(
                StepRecord(self.timesteps, num_expansions, effective_len, cost)
            )

    @property
    def expansions_per_step(self) -> float:
        if self.timesteps == 0:
            return 0.0
        return self.candidate_expansions / self.timesteps

    def summarize(self) -> dict:
        """All aggregate fields, with the per-step ratio rounded half-up to
        one decimal. A run with zero timesteps has no defined ratio and is
        flagged instead."""
        summary = {
            "timesteps": self.timesteps,
            "candidate_expansions": self.candidate_expansions,
            "expansions_per_step": round_half_up(self.expansions_per_step, 1),
            "simulated_cost": self.simulated_cost,
        }
        if self.timesteps == 0:
            summary["expansions_per_step"] = 0.0
            summary["undefined_ratio"] = True
        return summary
