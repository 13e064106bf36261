"""Value types and the deterministic top-k primitive shared by every engine.

Scores are raw cumulative log-probabilities; no length normalization is
applied anywhere. Ties are broken by (lower parent index, then lower token
id) so that every engine is bit-for-bit reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

from .errors import ConfigError, InvariantViolation


class FinalizationPolicy(str, Enum):
    """What happens to a candidate the moment it is finalized.

    IMMEDIATE: an end-token expansion is emitted to the final outputs in the
    same timestep and never occupies the next beam.
    DEFERRED: finalized candidates stay on the beam and are emitted only when
    they reach rank 1; a higher-scoring influx can displace them first.
    """

    IMMEDIATE = "immediate"
    DEFERRED = "deferred"


@dataclass(frozen=True, slots=True)
class Vocabulary:
    """Token-id space with designated start and end markers."""

    size: int
    sos: int
    eos: int

    def __post_init__(self) -> None:
        if self.size < 2:
            raise ConfigError(f"vocabulary size must be >= 2, got {self.size}")
        if not (0 <= self.sos < self.size):
            raise ConfigError(f"sos token {self.sos} out of range for size {self.size}")
        if not (0 <= self.eos < self.size):
            raise ConfigError(f"eos token {self.eos} out of range for size {self.size}")
        if self.sos == self.eos:
            raise ConfigError("sos and eos tokens must differ")


@dataclass(frozen=True, slots=True)
class Candidate:
    """A partial or finalized output sequence with its cumulative score.

    tokens always starts with the start token. The end token can appear at
    most once and only in final position.
    """

    tokens: tuple[int, ...]
    score: float
    finalized: bool
    input_id: int = 0


@dataclass(frozen=True, slots=True)
class Beam:
    """Per-input ordered candidate set at a common active length.

    candidates are sorted by score descending with the deterministic
    tie-break; active candidates all have length l_t, finalized ones kept on
    the beam may be shorter. emitted counts candidates already moved to the
    final outputs.
    """

    input_id: int
    candidates: tuple[Candidate, ...]
    l_t: int
    emitted: int = 0

    @classmethod
    def initial(cls, input_id: int, sos: int) -> "Beam":
        seed = Candidate(tokens=(sos,), score=0.0, finalized=False, input_id=input_id)
        return cls(input_id=input_id, candidates=(seed,), l_t=1, emitted=0)

    def active_width(self) -> int:
        return sum(1 for c in self.candidates if not c.finalized)


@dataclass(frozen=True)
class DecodeConfig:
    """All search and scheduling hyperparameters.

    delta = +inf disables the score-gap threshold; max_candidates = k
    disables the per-parent cap. capacity bounds the total number of
    candidates scored in one scheduler timestep and defaults to n * k.
    """

    k: int
    n: int
    epsilon: float = 1.0 / 6.0
    delta: float = math.inf
    max_candidates: int | None = None
    max_len: int = 128
    policy: FinalizationPolicy = FinalizationPolicy.DEFERRED
    capacity: int | None = None
    flush_interval: int | None = None
    cost_c0: float = 1.0
    cost_c1: float = 1.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not (self.delta >= 0.0):
            raise ConfigError(f"delta must be >= 0 or +inf, got {self.delta}")
        if self.max_candidates is None:
            object.__setattr__(self, "max_candidates", self.k)
        if not (1 <= self.max_candidates <= self.k):
            raise ConfigError(
                f"max_candidates must lie in [1, k={self.k}], got {self.max_candidates}"
            )
        if self.max_len < 2:
            raise ConfigError(f"max_len must be >= 2, got {self.max_len}")
        if self.capacity is None:
            object.__setattr__(self, "capacity", self.n * self.k)
        if self.capacity < self.k:
            raise ConfigError(
                f"capacity must be >= k={self.k}, got {self.capacity}"
            )
        if self.flush_interval is not None and self.flush_interval < 1:
            raise ConfigError(
                f"flush_interval must be >= 1 when set, got {self.flush_interval}"
            )
        object.__setattr__(self, "policy", FinalizationPolicy(self.policy))
        if self.cost_c0 < 0 or self.cost_c1 < 0:
            raise ConfigError("cost coefficients must be non-negative")
        if self.cost_c0 + self.cost_c1 <= 0:
            raise ConfigError("at least one cost coefficient must be positive")


class Proposal(NamedTuple):
    """One entry of an expansion pool.

    parent is the index of the source candidate within its beam. token is
    None for the no-op proposal that carries an already-finalized candidate
    forward unchanged.
    """

    score: float
    parent: int
    token: int | None


def proposal_order(p: Proposal) -> tuple[float, int, int]:
    """Sort key: score descending, then lower parent, then lower token id."""
    return (-p.score, p.parent, -1 if p.token is None else p.token)


def extend(candidate: Candidate, token: int, logp: float, eos: int, max_len: int) -> Candidate:
    """Append one token, accumulating its log-probability into the score.

    The result is finalized when the token is the end token or the new
    length reaches max_len. Extending an already-finalized candidate is a
    programming error.
    """
    if candidate.finalized:
        raise InvariantViolation("cannot extend a finalized candidate")
    tokens = candidate.tokens + (token,)
    return Candidate(
        tokens=tokens,
        score=candidate.score + float(logp),
        finalized=(token == eos or len(tokens) >= max_len),
        input_id=candidate.input_id,
    )


def top_k_select(pool: Sequence[Proposal], k: int) -> list[Proposal]:
    """Pick the k highest-scoring proposals, deterministically.

    Pure function of (pool, k): the result is sorted descending and is a
    subset of the pool. An empty pool signals an internally inconsistent
    beam.
    """
    if not pool:
        raise InvariantViolation("top-k selection over an empty expansion pool")
    if k < 1:
        raise InvariantViolation(f"top-k selection with k={k}")
    return sorted(pool, key=proposal_order)[:k]
