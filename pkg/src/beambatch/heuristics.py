"""Beam pruning rules: per-parent candidate caps and score-gap thresholding.

Composition order inside apply_heuristics: sort, then the per-parent cap
during the top-k scan, then the absolute threshold anchored at the surviving
rank-1 score. The anchor may belong to a finalized candidate carried over
from an earlier timestep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TypeVar

from .core import Proposal, proposal_order
from .errors import ConfigError, InvariantViolation

_Scored = TypeVar("_Scored")  # anything with a float .score attribute


@dataclass(frozen=True, slots=True)
class HeuristicConfig:
    """Pruning knobs. delta=+inf and max_candidates=k disable both rules,
    reducing variable-width search to fixed-width search."""

    delta: float
    max_candidates: int

    def __post_init__(self) -> None:
        if not (self.delta >= 0.0):
            raise ConfigError(f"delta must be >= 0 or +inf, got {self.delta}")
        if self.max_candidates < 1:
            raise ConfigError(
                f"max_candidates must be >= 1, got {self.max_candidates}"
            )

    def apply(self, pool: Sequence[Proposal], k: int) -> list[Proposal]:
        return apply_heuristics(
            pool, k=k, delta=self.delta, max_candidates=self.max_candidates
        )


def max_candidates_filter(
    pool: Sequence[Proposal], max_candidates: int, k: int
) -> list[Proposal]:
    """Scan a descending-sorted pool, capping acceptances per parent.

    A proposal is accepted only while its parent has contributed fewer than
    max_candidates accepted proposals; the scan stops after k acceptances.
    No-op proposals (token is None) carry no expanding parent and are exempt
    from the cap, though they still count toward k.
    """
    accepted: list[Proposal] = []
    per_parent: dict[int, int] = {}
    for proposal in pool:
        if len(accepted) >= k:
            break
        if proposal.token is None:
            accepted.append(proposal)
            continue
        used = per_parent.get(proposal.parent, 0)
        if used < max_candidates:
            per_parent[proposal.parent] = used + 1
            accepted.append(proposal)
    return accepted


def absolute_threshold_filter(
    candidates: Sequence[_Scored], delta: float, best_score: float
) -> list[_Scored]:
    """Keep entries scoring at least best_score - delta.

    best_score is the beam's rank-1 score, which may come from a finalized
    candidate retained from a previous timestep.
    """
    if delta == float("inf"):
        return list(candidates)
    cutoff = best_score - delta
    return [c for c in candidates if c.score >= cutoff]


def apply_heuristics(
    pool: Sequence[Proposal], *, k: int, delta: float, max_candidates: int
) -> list[Proposal]:
    """Prune one beam's expansion pool down to the next beam's contents.

    Returns at most k proposals in descending score order; the rank-1
    proposal always survives, so the result is never empty.
    """
    if not pool:
        raise InvariantViolation("pruning an empty expansion pool")
    ranked = sorted(pool, key=proposal_order)
    kept = max_candidates_filter(ranked, max_candidates, k)
    return absolute_threshold_filter(kept, delta, kept[0].score)
